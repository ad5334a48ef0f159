//! Unit vectors and the Von Mises-Fisher distribution on the sphere `S^{d-1}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::sphere_math::{self, BesselOrder, R_MAX};
use crate::{Error, Result};

/// Inputs whose norm is within this distance of 1 are renormalized silently.
pub const RENORM_TOLERANCE: f64 = 1e-3;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// A point on the unit hypersphere, `d >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVec(Vec<f64>);

impl UnitVec {
    /// Validates `coords` as a length-normalized embedding.
    ///
    /// Vectors within [`RENORM_TOLERANCE`] of unit length are rescaled onto the
    /// sphere; anything further away is rejected rather than fixed up. Vectors
    /// already unit to within a few ulps are kept bit for bit.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Domain(format!(
                "embedding dimension must be at least 2, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("embedding has non-finite coordinates".into()));
        }
        let n = norm(&coords);
        if (n - 1.0).abs() > RENORM_TOLERANCE {
            return Err(Error::NotUnit {
                norm: n,
                tolerance: RENORM_TOLERANCE,
            });
        }
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(UnitVec(coords));
        }
        Ok(UnitVec(coords.into_iter().map(|c| c / n).collect()))
    }

    /// Direction of an arbitrary non-zero finite vector; `None` for the zero
    /// vector.
    pub fn from_direction(v: &[f64]) -> Option<Self> {
        let n = norm(v);
        if v.len() < 2 || n == 0.0 || !n.is_finite() {
            return None;
        }
        Some(UnitVec(v.iter().map(|c| c / n).collect()))
    }

    /// Canonical basis vector `e_axis`.
    pub fn basis(dim: usize, axis: usize) -> Self {
        assert!(dim >= 2 && axis < dim, "basis({dim}, {axis}) out of range");
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        UnitVec(v)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    #[inline]
    pub fn dot(&self, other: &UnitVec) -> f64 {
        dot(&self.0, &other.0)
    }
}

impl AsRef<[f64]> for UnitVec {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Parameters of one VMF distribution: mean direction and concentration.
///
/// With `kappa = 0` the distribution is uniform and `mu` is kept only as a
/// valid placeholder.
#[derive(Debug, Clone, PartialEq)]
pub struct VmfParams {
    mu: UnitVec,
    kappa: f64,
}

impl VmfParams {
    pub fn new(mu: UnitVec, kappa: f64) -> Result<Self> {
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::Domain(format!(
                "concentration must be finite and non-negative, got {kappa}"
            )));
        }
        Ok(VmfParams { mu, kappa })
    }

    /// The uniform distribution, with `mu = e_1`.
    pub fn uniform(dim: usize) -> Self {
        VmfParams {
            mu: UnitVec::basis(dim, 0),
            kappa: 0.0,
        }
    }

    /// VMF whose natural parameter is `theta`, i.e. density proportional to
    /// `exp(theta' x)`: direction `theta / |theta|`, concentration `|theta|`.
    pub fn from_natural(theta: &[f64]) -> Self {
        match UnitVec::from_direction(theta) {
            Some(mu) => VmfParams {
                mu,
                kappa: norm(theta),
            },
            None => VmfParams::uniform(theta.len()),
        }
    }

    #[inline]
    pub fn mu(&self) -> &UnitVec {
        &self.mu
    }

    #[inline]
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub fn order(&self) -> BesselOrder {
        BesselOrder::from_dim(self.dim()).expect("UnitVec has dim >= 2")
    }

    /// `log V(x | mu, kappa) - log U(x)`, the log-density relative to the
    /// uniform distribution on the sphere: `log C(kappa)/C(0) + kappa mu'x`.
    pub fn log_density_rel_uniform(&self, x: &UnitVec) -> Result<f64> {
        check_dim(self.dim(), x.dim())?;
        if self.kappa == 0.0 {
            return Ok(0.0);
        }
        let nu = self.order().value();
        Ok(sphere_math::log_cnu_unchecked(nu, self.kappa)
            - sphere_math::log_cnu_unchecked(nu, 0.0)
            + self.kappa * self.mu.dot(x))
    }

    /// `E[x] = rho(kappa) mu`. Its norm is strictly below 1.
    pub fn mean_vector(&self) -> Vec<f64> {
        let r = sphere_math::rho_unchecked(self.order().value(), self.kappa);
        self.mu.as_slice().iter().map(|m| r * m).collect()
    }

    /// `n` independent draws, reproducible from `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<UnitVec> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with_rng(n, &mut rng)
    }

    /// Wood's rejection sampler: the cosine `w = mu'x` is drawn by rejection
    /// from a transformed Beta proposal, and the remaining tangent direction is
    /// uniform on the sphere orthogonal to `mu`.
    pub fn sample_with_rng<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<UnitVec> {
        let dim = self.dim();
        if self.kappa == 0.0 {
            return (0..n).map(|_| uniform_direction(dim, rng)).collect();
        }
        let dm1 = (dim - 1) as f64;
        let kappa = self.kappa;
        let b = dm1 / (2.0 * kappa + (4.0 * kappa * kappa + dm1 * dm1).sqrt());
        let x0 = (1.0 - b) / (1.0 + b);
        let c = kappa * x0 + dm1 * (1.0 - x0 * x0).ln();
        let beta = Beta::new(0.5 * dm1, 0.5 * dm1).expect("shape parameters are positive");
        let mu = self.mu.as_slice();

        (0..n)
            .map(|_| {
                let w = loop {
                    let z: f64 = beta.sample(rng);
                    let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
                    let u: f64 = 1.0 - rng.random::<f64>();
                    if kappa * w + dm1 * (1.0 - x0 * w).ln() - c >= u.ln() {
                        break w;
                    }
                };
                let v = tangent_direction(mu, rng);
                let s = (1.0 - w * w).max(0.0).sqrt();
                let x: Vec<f64> = mu.iter().zip(&v).map(|(m, t)| w * m + s * t).collect();
                UnitVec::from_direction(&x).expect("sample is non-zero")
            })
            .collect()
    }
}

fn gaussian_vec<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// A uniformly distributed point on `S^{dim-1}`.
pub fn uniform_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> UnitVec {
    loop {
        if let Some(u) = UnitVec::from_direction(&gaussian_vec(dim, rng)) {
            return u;
        }
    }
}

/// Uniform unit vector orthogonal to `mu`.
fn tangent_direction<R: Rng + ?Sized>(mu: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let mut g = gaussian_vec(mu.len(), rng);
        let along = dot(&g, mu);
        for (gi, mi) in g.iter_mut().zip(mu) {
            *gi -= along * mi;
        }
        let n = norm(&g);
        if n > 1e-12 {
            g.iter_mut().for_each(|gi| *gi /= n);
            return g;
        }
    }
}

/// Maximum-likelihood VMF parameters for a sample.
///
/// The estimate depends on the data only through the sample mean; see
/// [`fit_ml_from_mean`].
pub fn fit_ml(xs: &[UnitVec]) -> Result<VmfParams> {
    let first = xs.first().ok_or(Error::Empty("fit_ml needs at least one vector"))?;
    let dim = first.dim();
    let mut mean = vec![0.0; dim];
    for x in xs {
        check_dim(dim, x.dim())?;
        for (m, v) in mean.iter_mut().zip(x.as_slice()) {
            *m += v;
        }
    }
    let n = xs.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    fit_ml_from_mean(&mean)
}

/// ML parameters from the sample mean `xbar`: `mu = xbar/|xbar|`,
/// `kappa = rho_inv(|xbar|)`. A zero mean gives the uniform distribution with
/// `mu = e_1`.
pub fn fit_ml_from_mean(mean: &[f64]) -> Result<VmfParams> {
    let r = norm(mean);
    let Some(mu) = UnitVec::from_direction(mean) else {
        return Ok(VmfParams::uniform(mean.len()));
    };
    if r >= R_MAX {
        return Err(Error::CappedConcentration { r, cap: R_MAX });
    }
    let kappa = sphere_math::rho_inv(BesselOrder::from_dim(mean.len())?, r)?;
    VmfParams::new(mu, kappa)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> UnitVec {
        UnitVec::new(v.to_vec()).unwrap()
    }

    #[test]
    fn unit_vec_renormalizes_small_deviations() {
        let u = UnitVec::new(vec![1.0005, 0.0, 0.0]).unwrap();
        assert!((norm(u.as_slice()) - 1.0).abs() < 1e-15);
        assert!(matches!(
            UnitVec::new(vec![0.9, 0.0, 0.0]),
            Err(Error::NotUnit { .. })
        ));
        assert!(UnitVec::new(vec![1.0]).is_err());
        assert!(UnitVec::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn density_is_zero_for_uniform() {
        let p = VmfParams::uniform(5);
        let x = unit(&[0.0, 0.6, 0.8, 0.0, 0.0]);
        assert_eq!(p.log_density_rel_uniform(&x).unwrap(), 0.0);
    }

    #[test]
    fn density_three_dim_closed_form() {
        // d = 3: C(k)/C(0) = k / sinh k
        let p = VmfParams::new(UnitVec::basis(3, 0), 1.0).unwrap();
        let expected = (1.0 / 1f64.sinh()).ln() + 1.0;
        let got = p.log_density_rel_uniform(&UnitVec::basis(3, 0)).unwrap();
        assert!((got - expected).abs() < 1e-13);
        assert!(matches!(
            p.log_density_rel_uniform(&UnitVec::basis(4, 0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mean_vector_examples() {
        assert_eq!(VmfParams::uniform(4).mean_vector(), vec![0.0; 4]);
        let p = VmfParams::new(UnitVec::basis(3, 0), 1.0).unwrap();
        let m = p.mean_vector();
        let expected = 1.0 / 1f64.tanh() - 1.0;
        assert!((m[0] - expected).abs() < 1e-14);
        assert_eq!(&m[1..], &[0.0, 0.0]);
        let r = sphere_math::rho(p.order(), 1.0).unwrap();
        assert_eq!(norm(&m), r);
    }

    #[test]
    fn fit_antipodal_pair_is_uniform() {
        let x = unit(&[0.6, 0.8, 0.0]);
        let y = unit(&[-0.6, -0.8, 0.0]);
        let p = fit_ml(&[x, y]).unwrap();
        assert_eq!(p.kappa(), 0.0);
        assert_eq!(p.mu(), &UnitVec::basis(3, 0));
    }

    #[test]
    fn fit_two_basis_vectors() {
        let p = fit_ml(&[UnitVec::basis(3, 0), UnitVec::basis(3, 1)]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((p.mu().as_slice()[0] - s).abs() < 1e-15);
        assert!((p.mu().as_slice()[1] - s).abs() < 1e-15);
        // coth k - 1/k = sqrt(1/2), solved by bisection on the closed form
        let (mut lo, mut hi) = (0.1_f64, 20.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 1.0 / mid.tanh() - 1.0 / mid < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((p.kappa() - lo).abs() < 1e-9 * lo);
    }

    #[test]
    fn fit_coincident_points_is_capped() {
        let x = unit(&[0.0, 1.0]);
        assert!(matches!(
            fit_ml(&[x.clone(), x]),
            Err(Error::CappedConcentration { .. })
        ));
        assert!(matches!(fit_ml(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn sampler_is_deterministic_and_unit() {
        let p = VmfParams::new(unit(&[0.0, 0.0, 1.0, 0.0]), 5.0).unwrap();
        let a = p.sample(50, 7);
        let b = p.sample(50, 7);
        assert_eq!(a, b);
        assert_ne!(a, p.sample(50, 8));
        for x in &a {
            assert!((norm(x.as_slice()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampler_high_concentration() {
        let p = VmfParams::new(UnitVec::basis(8, 3), 1e4).unwrap();
        for x in p.sample(2000, 1) {
            assert!(x.dot(p.mu()) > 0.99);
        }
    }

    #[test]
    fn sampler_uniform_mean_is_small() {
        let xs = VmfParams::uniform(8).sample(100_000, 3);
        let mut mean = [0.0; 8];
        for x in &xs {
            for (m, v) in mean.iter_mut().zip(x.as_slice()) {
                *m += v / xs.len() as f64;
            }
        }
        assert!(norm(&mean) < 0.02);
    }
}
