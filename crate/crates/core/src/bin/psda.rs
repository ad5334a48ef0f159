fn main() {
    std::process::exit(psda::cli::run(std::env::args_os()));
}
