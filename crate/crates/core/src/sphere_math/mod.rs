//! Log-scale modified Bessel functions of the first kind and the quantities
//! the VMF distribution derives from them.
//!
//! For embeddings in `d` dimensions the order is `nu = d/2 - 1`, which is large
//! for typical embedding sizes; `I_nu(kappa)` then overflows for large
//! `kappa` and underflows for small `kappa`, so everything here works on the
//! log scale:
//!
//! * `log I_nu(kappa)` uses the all-positive power series when `kappa` is
//!   small, Debye's uniform asymptotic expansion in `nu` when `nu >= 15`, and
//!   Hankel's large-argument expansion when `nu < 15` and `kappa >= 30`. The
//!   asymptotic branches produce the exponentially scaled value
//!   `log(I_nu(kappa) e^-kappa)` and add `kappa` back at the end.
//! * `log C_nu(kappa) = nu log kappa - log I_nu(kappa)` is evaluated in a
//!   cancellation-free form on the series branch, so it is continuous down to
//!   its limit `nu log 2 + log Gamma(nu + 1)` at `kappa = 0`.
//! * `rho(kappa) = I_{nu+1}(kappa) / I_nu(kappa)` comes from Perron's
//!   continued fraction, which converges in a few dozen terms for every
//!   argument, and `rho_inv` brackets the root and refines it with TOMS 748.

mod debye;

use crate::{Error, Result};

use debye::DEBYE_U;

/// Largest mean resultant length accepted by [`rho_inv`]. Beyond it the data
/// are treated as numerically coincident.
pub const R_MAX: f64 = 1.0 - 1e-10;

/// Orders at or above this use Debye's expansion outside the series region.
const DEBYE_MIN_ORDER: f64 = 15.0;
/// Below [`DEBYE_MIN_ORDER`], arguments at or above this use Hankel's expansion.
const HANKEL_MIN_ARG: f64 = 30.0;
const SERIES_MAX_TERMS: usize = 500;
const CF_MAX_TERMS: usize = 100_000;

/// Order `nu >= 0` of a Bessel function.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if !nu.is_finite() || nu < 0.0 {
            return Err(Error::Domain(format!(
                "Bessel order must be finite and non-negative, got {nu}"
            )));
        }
        Ok(BesselOrder(nu))
    }

    /// The order `d/2 - 1` belonging to embeddings of dimension `d`.
    pub fn from_dim(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain(format!(
                "embedding dimension must be at least 2, got {dim}"
            )));
        }
        Ok(BesselOrder(dim as f64 / 2.0 - 1.0))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Which evaluation branch `log I_nu(x)` takes for `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Regime {
    Series,
    Debye,
    Hankel,
}

pub(crate) fn regime(nu: f64, x: f64) -> Regime {
    if nu >= DEBYE_MIN_ORDER {
        if x < (nu + 1.0).sqrt() {
            Regime::Series
        } else {
            Regime::Debye
        }
    } else if x < HANKEL_MIN_ARG {
        Regime::Series
    } else {
        Regime::Hankel
    }
}

/// Argument at which the series hands over to an asymptotic branch.
#[cfg(test)]
pub(crate) fn switch_point(nu: f64) -> f64 {
    if nu >= DEBYE_MIN_ORDER {
        (nu + 1.0).sqrt()
    } else {
        HANKEL_MIN_ARG
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa.is_nan() || !kappa.is_finite() || kappa < 0.0 {
        return Err(Error::Domain(format!(
            "concentration must be finite and non-negative, got {kappa}"
        )));
    }
    Ok(())
}

#[inline]
fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `log sum_i (x/2)^(2i) Gamma(nu+1) / (i! Gamma(nu+i+1))`, the normalized
/// power series of `I_nu`. All terms are positive.
pub(crate) fn series_log_sum(nu: f64, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..=SERIES_MAX_TERMS {
        let i = i as f64;
        term *= q / (i * (nu + i));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum.ln()
}

pub(crate) fn log_bessel_i_series(nu: f64, x: f64) -> f64 {
    nu * (0.5 * x).ln() - ln_gamma(nu + 1.0) + series_log_sum(nu, x)
}

/// `log(I_nu(x) e^-x)` from Debye's expansion; requires `nu > 0`, `x > 0`.
pub(crate) fn log_bessel_i_scaled_debye(nu: f64, x: f64) -> f64 {
    let z = x / nu;
    let sq = z.hypot(1.0);
    let p = 1.0 / sq;
    // nu * eta - x, where eta = sq + ln(z / (1 + sq)); sq - z = 1 / (sq + z).
    let log_ratio = if z > 1.0 {
        (-(1.0 + 1.0 / (sq + z)) / (1.0 + sq)).ln_1p()
    } else {
        (z / (1.0 + sq)).ln()
    };
    let exponent = nu / (sq + z) + nu * log_ratio;

    let p2 = p * p;
    let inv_nu = 1.0 / nu;
    let mut sum = 0.0;
    for (k, coeffs) in DEBYE_U.iter().enumerate().rev() {
        let mut u = 0.0;
        for &c in coeffs.iter().rev() {
            u = u * p2 + c;
        }
        u *= p.powi(k as i32);
        sum = sum * inv_nu + u;
    }
    exponent - 0.5 * (2.0 * std::f64::consts::PI * nu).ln() + 0.5 * p.ln() + sum.ln()
}

/// `log(I_nu(x) e^-x)` from Hankel's large-argument expansion.
pub(crate) fn log_bessel_i_scaled_hankel(nu: f64, x: f64) -> f64 {
    let m = 4.0 * nu * nu;
    let mut term: f64 = 1.0;
    let mut sum = 1.0;
    // Asymptotic series: with x >= 30 and nu < 15 the terms fall below 1e-17
    // well before they start to grow again near k = 2x.
    for k in 1..(2.0 * x) as usize {
        let odd = (2 * k - 1) as f64;
        term *= -(m - odd * odd) / (8.0 * k as f64 * x);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    -0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln()
}

fn log_bessel_i_positive(nu: f64, x: f64) -> f64 {
    match regime(nu, x) {
        Regime::Series => log_bessel_i_series(nu, x),
        Regime::Debye => log_bessel_i_scaled_debye(nu, x) + x,
        Regime::Hankel => log_bessel_i_scaled_hankel(nu, x) + x,
    }
}

/// `log I_nu(kappa)`.
///
/// Returns `-inf` at `kappa = 0` for `nu > 0` and `0` for `nu = 0`.
pub fn log_bessel_i(order: BesselOrder, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    let nu = order.value();
    if kappa == 0.0 {
        return Ok(if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    Ok(log_bessel_i_positive(nu, kappa))
}

/// `log C_nu(kappa) = nu log kappa - log I_nu(kappa)`, the concentration
/// dependent part of the VMF normalizer. Strictly decreasing in `kappa`.
pub fn log_cnu(order: BesselOrder, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(log_cnu_unchecked(order.value(), kappa))
}

pub(crate) fn log_cnu_unchecked(nu: f64, kappa: f64) -> f64 {
    if kappa == 0.0 {
        return nu * std::f64::consts::LN_2 + ln_gamma(nu + 1.0);
    }
    match regime(nu, kappa) {
        Regime::Series => {
            nu * std::f64::consts::LN_2 + ln_gamma(nu + 1.0) - series_log_sum(nu, kappa)
        }
        _ if nu == 0.0 => -log_bessel_i_positive(nu, kappa),
        _ => nu * kappa.ln() - log_bessel_i_positive(nu, kappa),
    }
}

/// Mean resultant length `rho(kappa) = I_{nu+1}(kappa) / I_nu(kappa)`, the norm
/// of the expected value of a VMF variate. Lies in `[0, 1)`.
pub fn rho(order: BesselOrder, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(rho_unchecked(order.value(), kappa))
}

/// Perron's continued fraction
/// `I_{nu+1}(x)/I_nu(x) = x / (2nu+2+x - (2nu+3)x / (2nu+3+2x - (2nu+5)x / (2nu+4+2x - ...)))`
/// evaluated with the modified Lentz algorithm.
pub(crate) fn rho_unchecked(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    const TINY: f64 = 1e-300;
    let mut f = 2.0 * nu + 2.0 + x;
    let mut c = f;
    let mut d = 0.0;
    for k in 1..=CF_MAX_TERMS {
        let kf = k as f64;
        let a = -(2.0 * nu + 1.0 + 2.0 * kf) * x;
        let b = 2.0 * nu + 2.0 + kf + 2.0 * x;
        d = b + a * d;
        if d == 0.0 {
            d = TINY;
        }
        d = 1.0 / d;
        c = b + a / c;
        if c == 0.0 {
            c = TINY;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() <= f64::EPSILON {
            break;
        }
    }
    x / f
}

/// Inverse of [`rho`]: the concentration whose mean resultant length is `r`.
///
/// `rho_inv(0) = 0`. Values `r >= R_MAX` fail with
/// [`Error::CappedConcentration`]; `r` outside `[0, 1)` is a domain error.
pub fn rho_inv(order: BesselOrder, r: f64) -> Result<f64> {
    if r.is_nan() || !(0.0..1.0).contains(&r) {
        return Err(Error::Domain(format!(
            "mean resultant length must lie in [0, 1), got {r}"
        )));
    }
    if r >= R_MAX {
        return Err(Error::CappedConcentration { r, cap: R_MAX });
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let nu = order.value();
    let f = |kappa: f64| rho_unchecked(nu, kappa) - r;

    // Starting guess r (d - r^2) / (1 - r^2), widened until it brackets the root.
    let d = 2.0 * nu + 2.0;
    let guess = r * (d - r * r) / (1.0 - r * r);
    let (mut lo, mut hi) = (guess, guess);
    let mut f_lo = f(lo);
    while f_lo > 0.0 {
        lo *= 0.5;
        f_lo = f(lo);
    }
    let mut f_hi = f(hi);
    while f_hi < 0.0 {
        hi *= 2.0;
        f_hi = f(hi);
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    root1d::toms748(f, lo, hi)
        .rtol(4.0 * f64::EPSILON)
        .atol(0.0)
        .maxiter(500)
        .root()
        .map_err(|e| Error::Domain(format!("inverting rho at r = {r}: {e}")))
}
