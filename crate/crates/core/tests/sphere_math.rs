mod common;

use proptest::prelude::*;

use psda::{log_bessel_i, log_cnu, rho, rho_inv, BesselOrder};

use common::log_bessel_i_oracle;

fn order(nu: f64) -> BesselOrder {
    BesselOrder::new(nu).unwrap()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `I_{nu+1}(x)/I_nu(x)` from the Gauss continued fraction
/// `1/(2(nu+1)/x + 1/(2(nu+2)/x + ...))`, evaluated bottom-up.
fn rho_gauss_cf(nu: f64, x: f64) -> f64 {
    let depth = (4.0 * x + 200.0) as usize;
    let mut tail = 0.0;
    for k in (1..=depth).rev() {
        tail = 1.0 / (2.0 * (nu + k as f64) / x + tail);
    }
    tail
}

#[test]
fn order_127_matches_series_oracle() {
    for &k in &[1e-3, 0.5, 10.0, 11.9, 12.0, 37.5, 400.0] {
        let got = log_bessel_i(order(127.0), k).unwrap();
        let want = log_bessel_i_oracle(254, k);
        assert!((got - want).abs() < 1e-10, "kappa={k}: {got} vs {want}");
    }
}

#[test]
fn large_orders_and_arguments() {
    for &(n2, k) in &[(20000u32, 3.0), (20000, 150.0), (20000, 2e4), (3, 1e6), (64, 5e5)] {
        let got = log_bessel_i(order(n2 as f64 / 2.0), k).unwrap();
        let want = log_bessel_i_oracle(n2, k);
        assert!((got - want).abs() < 1e-10, "nu={} kappa={k}: {got} vs {want}", n2 / 2);
    }
}

#[test]
fn monotone_on_log_grid() {
    for &nu in &[0.0, 0.5, 3.0, 14.5, 15.0, 49.5, 1023.0] {
        let o = order(nu);
        let mut prev = (f64::NEG_INFINITY, f64::INFINITY, -1.0_f64);
        let mut prev_k = 0.0;
        for k in log_grid(1e-5, 1e6, 300) {
            let cur = (
                log_bessel_i(o, k).unwrap(),
                log_cnu(o, k).unwrap(),
                rho(o, k).unwrap(),
            );
            assert!(cur.0 > prev.0, "log I not increasing at nu={nu} kappa={k}");
            // d/dk log C = -rho, so the true drop is at least rho(k_prev) dk. A drop
            // smaller than a couple of ulps of log C cannot show up in f64.
            let drop = prev.2.max(0.0) * (k - prev_k);
            let ulp = f64::EPSILON * prev.1.abs().max(cur.1.abs());
            if prev.1.is_finite() && drop <= 2.0 * ulp {
                assert!(cur.1 <= prev.1, "log C increased at nu={nu} kappa={k}");
            } else {
                assert!(cur.1 < prev.1, "log C not decreasing at nu={nu} kappa={k}");
            }
            assert!(cur.2 > prev.2 && cur.2 < 1.0, "rho at nu={nu} kappa={k}");
            prev = cur;
            prev_k = k;
        }
    }
}

#[test]
fn derivative_identity() {
    // d/dk log I_nu(k) = nu/k + rho(k)
    for &nu in &[0.0, 0.5, 2.0, 14.5, 31.0, 127.0, 1023.0] {
        let o = order(nu);
        for k in log_grid(0.1, 1e3, 60) {
            let h = 1e-4 * k;
            let fd = (log_bessel_i(o, k + h).unwrap() - log_bessel_i(o, k - h).unwrap()) / (2.0 * h);
            let exact = nu / k + rho(o, k).unwrap();
            assert!(((fd - exact) / exact).abs() <= 1e-6, "nu={nu} k={k}: {fd} vs {exact}");
        }
    }
}

#[test]
fn rho_cross_checks() {
    for &nu in &[0.0, 0.5, 1.0, 14.5, 49.5, 127.0, 1023.0] {
        let o = order(nu);
        for k in log_grid(1e-6, 1e4, 80) {
            let r = rho(o, k).unwrap();
            let cf = rho_gauss_cf(nu, k);
            assert!(((r - cf) / cf).abs() < 1e-13, "nu={nu} k={k}: {r} vs gauss {cf}");
            // The log-difference route carries the rounding of both logs.
            let (l1, l0) = (log_bessel_i(order(nu + 1.0), k).unwrap(), log_bessel_i(o, k).unwrap());
            let tol = 1e-12 + 8.0 * f64::EPSILON * (l1.abs() + l0.abs());
            assert!(((r - (l1 - l0).exp()) / r).abs() < tol, "nu={nu} k={k}");
        }
    }
}

#[test]
fn rho_of_rho_inv_is_identity() {
    for &nu in &[0.0, 0.5, 7.0, 127.0, 1023.0] {
        let o = order(nu);
        for i in 0..=999 {
            let r = i as f64 * 1e-3;
            let back = rho(o, rho_inv(o, r).unwrap()).unwrap();
            assert!((back - r).abs() <= 1e-10 * r, "nu={nu} r={r}: {back}");
        }
    }
}

proptest! {
    #[test]
    fn rho_inv_residual(nu in 0.0f64..2000.0, r in 0.0f64..0.999_999) {
        let o = order(nu);
        let k = rho_inv(o, r).unwrap();
        prop_assert!(k >= 0.0);
        prop_assert!((rho(o, k).unwrap() - r).abs() <= 1e-12 * r.max(1.0));
    }

    #[test]
    fn rho_roundtrip_relative(nu in 0.0f64..2000.0, lk in -6.0f64..5.0) {
        let o = order(nu);
        let k = 10f64.powf(lk);
        let back = rho_inv(o, rho(o, k).unwrap()).unwrap();
        prop_assert!(((back - k) / k).abs() <= 1e-8, "k={} back={}", k, back);
    }
}
