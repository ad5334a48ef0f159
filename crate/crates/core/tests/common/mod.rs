//! Oracles shared by the integration suites. Nothing here calls into the
//! code paths it is used to check.
#![allow(dead_code)]

use astro_float::{BigFloat, Consts, RoundingMode};
use rand::Rng;
use rand_distr::StandardNormal;

use psda::UnitVec;

const PREC: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

fn big(x: f64) -> BigFloat {
    BigFloat::from_f64(x, PREC)
}

fn to_f64(x: &BigFloat) -> f64 {
    format!("{x}").parse().expect("BigFloat prints a decimal number")
}

/// `log I_nu(x)` for `nu = twice_nu / 2` from the all-positive power series
/// summed in 256-bit arithmetic until the tail is below `1e-25` of the sum.
/// `Gamma(nu + 1)` is built exactly from its product form.
pub fn log_bessel_i_oracle(twice_nu: u32, x: f64) -> f64 {
    assert!(x > 0.0);
    let mut cc = Consts::new().expect("constants cache");
    let nu = big(twice_nu as f64 / 2.0);
    let half = big(0.5);

    // Gamma(nu + 1)
    let mut gamma = if twice_nu % 2 == 0 {
        big(1.0)
    } else {
        cc.pi(PREC, RM).sqrt(PREC, RM)
    };
    let mut f = if twice_nu % 2 == 0 { big(1.0) } else { half.clone() };
    let one = big(1.0);
    while f.cmp(&nu).unwrap() <= 0 {
        gamma = gamma.mul(&f, PREC, RM);
        f = f.add(&one, PREC, RM);
    }

    let hx = big(x).mul(&half, PREC, RM);
    let q = hx.mul(&hx, PREC, RM);
    let mut term = big(1.0);
    let mut sum = big(1.0);
    let tiny = big(1e-25);
    let peak = x / 2.0;
    let mut k = 0u64;
    loop {
        k += 1;
        let kk = big(k as f64);
        let denom = kk.mul(&kk.add(&nu, PREC, RM), PREC, RM);
        term = term.mul(&q, PREC, RM).div(&denom, PREC, RM);
        sum = sum.add(&term, PREC, RM);
        if k as f64 > peak && term.cmp(&sum.mul(&tiny, PREC, RM)).unwrap() < 0 {
            break;
        }
    }
    let log_lead = nu
        .mul(&hx.ln(PREC, RM, &mut cc), PREC, RM)
        .sub(&gamma.ln(PREC, RM, &mut cc), PREC, RM);
    to_f64(&sum.ln(PREC, RM, &mut cc).add(&log_lead, PREC, RM))
}

/// `log(sinh k / k)`, with the `k -> 0` limit 0.
pub fn log_sinhc(k: f64) -> f64 {
    if k < 1e-4 {
        (k * k / 6.0).ln_1p()
    } else if k < 20.0 {
        (k.sinh() / k).ln()
    } else {
        k - std::f64::consts::LN_2 + (-(-2.0 * k).exp()).ln_1p() - k.ln()
    }
}

/// `log( (1/4pi) * integral over S^2 of exp(a'z) dz )` for `|a| = k`.
pub fn log_mean_exp_s2(k: f64) -> f64 {
    log_sinhc(k)
}

pub fn random_unit<R: Rng>(dim: usize, rng: &mut R) -> UnitVec {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = UnitVec::from_direction(&v) {
            return u;
        }
    }
}

pub fn log_uniform<R: Rng>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Operating points from thresholds placed below, between and above the
/// sorted distinct scores, as `(p_fa, p_miss)`.
pub fn brute_points(tar: &[f64], non: &[f64]) -> Vec<(f64, f64)> {
    let mut all: Vec<f64> = tar.iter().chain(non).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let mut thresholds = vec![all[0] - 1.0];
    for w in all.windows(2) {
        thresholds.push(0.5 * (w[0] + w[1]));
    }
    thresholds.push(all[all.len() - 1] + 1.0);
    thresholds
        .iter()
        .map(|&t| {
            let miss = tar.iter().filter(|&&s| s < t).count() as f64 / tar.len() as f64;
            let fa = non.iter().filter(|&&s| s >= t).count() as f64 / non.len() as f64;
            (fa, miss)
        })
        .collect()
}

/// Lowest point where the diagonal meets any segment between two operating
/// points, i.e. the EER of the best randomized mixture of two thresholds.
pub fn brute_eer(tar: &[f64], non: &[f64]) -> f64 {
    let pts = brute_points(tar, non);
    let mut best = f64::INFINITY;
    for p in &pts {
        for q in &pts {
            let dp = p.1 - p.0;
            let dq = q.1 - q.0;
            if dp >= 0.0 && dq <= 0.0 {
                let x = if dp == dq {
                    p.0
                } else {
                    let t = dp / (dp - dq);
                    p.0 + t * (q.0 - p.0)
                };
                best = best.min(x);
            }
        }
    }
    best
}

pub fn brute_min_dcf(tar: &[f64], non: &[f64], p_tar: f64) -> f64 {
    let best = brute_points(tar, non)
        .iter()
        .map(|&(fa, miss)| p_tar * miss + (1.0 - p_tar) * fa)
        .fold(f64::INFINITY, f64::min);
    best / p_tar.min(1.0 - p_tar)
}
