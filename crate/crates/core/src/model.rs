//! The PSDA generative model and its EM training.
//!
//! A speaker's identity is a hidden unit vector `z ~ V(mu, b)`; that speaker's
//! embeddings are independent draws `x ~ V(z, w)`. The posterior of `z` given
//! embeddings with sum `s` is `V` with natural parameter `b mu + w s`, and
//! every likelihood below is taken relative to the uniform distribution on the
//! sphere so the dimension-only normalizer cancels.

use rayon::prelude::*;

use crate::sphere_math::{self, BesselOrder, R_MAX};
use crate::vmf::{self, check_dim, dot, norm, UnitVec, VmfParams};
use crate::{Error, Result};

/// Trained PSDA parameters: within-speaker concentration `w > 0`,
/// between-speaker concentration `b >= 0` and speaker mean direction `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdaModel {
    w: f64,
    b: f64,
    mu: UnitVec,
}

impl PsdaModel {
    pub fn new(w: f64, b: f64, mu: UnitVec) -> Result<Self> {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::Domain(format!(
                "within-speaker concentration must be finite and positive, got {w}"
            )));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::Domain(format!(
                "between-speaker concentration must be finite and non-negative, got {b}"
            )));
        }
        Ok(PsdaModel { w, b, mu })
    }

    #[inline]
    pub fn w(&self) -> f64 {
        self.w
    }

    #[inline]
    pub fn b(&self) -> f64 {
        self.b
    }

    #[inline]
    pub fn mu(&self) -> &UnitVec {
        &self.mu
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub fn order(&self) -> BesselOrder {
        BesselOrder::from_dim(self.dim()).expect("UnitVec has dim >= 2")
    }

    /// The speaker prior `V(z | mu, b)`.
    pub fn prior(&self) -> VmfParams {
        VmfParams::new(self.mu.clone(), self.b).expect("b validated at construction")
    }

    #[inline]
    pub(crate) fn log_c(&self, kappa: f64) -> f64 {
        sphere_math::log_cnu_unchecked(self.order().value(), kappa)
    }

    /// `b mu + w sum`, the posterior natural parameter for a side with this sum.
    pub(crate) fn natural(&self, sum: &[f64]) -> Vec<f64> {
        self.mu
            .as_slice()
            .iter()
            .zip(sum)
            .map(|(m, s)| self.b * m + self.w * s)
            .collect()
    }

    /// Posterior of the speaker variable given one side's statistics:
    /// `V(z | ztilde/|ztilde|, |ztilde|)` with `ztilde = b mu + w sum`.
    /// A zero `ztilde` yields the uniform posterior.
    pub fn posterior(&self, stats: &SideStats) -> Result<VmfParams> {
        check_dim(self.dim(), stats.dim())?;
        Ok(VmfParams::from_natural(&self.natural(stats.sum())))
    }

    /// Log marginal likelihood of one speaker's embeddings, relative to the
    /// uniform density raised to the number of embeddings:
    /// `n [log C(w) - log C(0)] + log C(b) - log C(|ztilde|)`.
    pub fn marginal_loglik(&self, stats: &SideStats) -> Result<f64> {
        check_dim(self.dim(), stats.dim())?;
        Ok(self.marginal_unchecked(stats))
    }

    fn marginal_unchecked(&self, stats: &SideStats) -> f64 {
        let kappa = norm(&self.natural(stats.sum()));
        stats.n() as f64 * (self.log_c(self.w) - self.log_c(0.0)) + self.log_c(self.b)
            - self.log_c(kappa)
    }
}

/// Zero- and first-order statistics of a set of embeddings assumed to share
/// one speaker: the count and the vector sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SideStats {
    n: usize,
    sum: Vec<f64>,
}

impl SideStats {
    pub fn new(n: usize, sum: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("statistics need at least one observation"));
        }
        if sum.len() < 2 {
            return Err(Error::Domain("statistics dimension must be at least 2".into()));
        }
        let s = norm(&sum);
        if !s.is_finite() || s > n as f64 + 1e-6 {
            return Err(Error::Domain(format!(
                "sum of {n} unit vectors cannot have norm {s}"
            )));
        }
        Ok(SideStats { n, sum })
    }

    pub fn from_vec(x: &UnitVec) -> Self {
        SideStats {
            n: 1,
            sum: x.as_slice().to_vec(),
        }
    }

    pub fn from_vecs<'a, I>(xs: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a UnitVec>,
    {
        let mut iter = xs.into_iter();
        let first = iter
            .next()
            .ok_or(Error::Empty("statistics need at least one observation"))?;
        let mut stats = SideStats::from_vec(first);
        for x in iter {
            check_dim(stats.dim(), x.dim())?;
            stats.n += 1;
            for (s, v) in stats.sum.iter_mut().zip(x.as_slice()) {
                *s += v;
            }
        }
        Ok(stats)
    }

    /// Statistics of the union of two disjoint sets.
    pub fn merge(&self, other: &SideStats) -> Result<SideStats> {
        check_dim(self.dim(), other.dim())?;
        Ok(SideStats {
            n: self.n + other.n,
            sum: self.sum.iter().zip(&other.sum).map(|(a, b)| a + b).collect(),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn sum(&self) -> &[f64] {
        &self.sum
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.sum.iter().map(|s| s / self.n as f64).collect()
    }
}

/// Where EM starts.
#[derive(Debug, Clone, Default)]
pub enum Init {
    /// [`init_params`] on the training statistics.
    #[default]
    Auto,
    Model(PsdaModel),
}

#[derive(Debug, Clone)]
pub struct EmOptions {
    pub max_iters: usize,
    /// Stop once an iteration improves the total log-likelihood by less than
    /// this fraction of its magnitude.
    pub rel_tol: f64,
    pub init: Init,
    /// Train the uniform-prior variant: `b` is held at 0 and `mu` is not
    /// updated.
    pub fix_b_zero: bool,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iters: 100,
            rel_tol: 1e-8,
            init: Init::Auto,
            fix_b_zero: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmResult {
    pub model: PsdaModel,
    /// Total log-likelihood of the initial model followed by one entry per
    /// iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn validate_speakers(speakers: &[SideStats]) -> Result<usize> {
    if speakers.len() < 2 {
        return Err(Error::Degenerate(format!(
            "training needs at least 2 speakers, got {}",
            speakers.len()
        )));
    }
    let dim = speakers[0].dim();
    for s in speakers {
        check_dim(dim, s.dim())?;
    }
    Ok(dim)
}

/// Sum of the speakers' marginal log-likelihoods. The per-speaker terms may be
/// computed in parallel; the reduction runs in speaker order.
pub fn total_loglik(model: &PsdaModel, speakers: &[SideStats]) -> Result<f64> {
    if let Some(s) = speakers.first() {
        check_dim(model.dim(), s.dim())?;
    }
    let terms: Vec<f64> = speakers
        .par_iter()
        .map(|s| model.marginal_unchecked(s))
        .collect();
    Ok(terms.iter().sum())
}

/// One EM iteration.
///
/// E-step: the posterior mean `E[z]_i = rho(k_i) ztilde_i / k_i` per speaker.
/// M-step: with `zbar = mean_i E[z]_i` and
/// `rbar = (1/N) sum_i n_i xbar_i' E[z]_i`, set `mu = zbar/|zbar|`,
/// `b = rho_inv(|zbar|)` and `w = rho_inv(rbar)`.
pub fn em_step(model: &PsdaModel, speakers: &[SideStats], fix_b_zero: bool) -> Result<PsdaModel> {
    let dim = validate_speakers(speakers)?;
    check_dim(model.dim(), dim)?;
    let order = model.order();
    let nu = order.value();

    let post_means: Vec<Vec<f64>> = speakers
        .par_iter()
        .map(|s| {
            let mut theta = model.natural(s.sum());
            let kappa = norm(&theta);
            if kappa == 0.0 {
                theta.iter_mut().for_each(|t| *t = 0.0);
            } else {
                let scale = sphere_math::rho_unchecked(nu, kappa) / kappa;
                theta.iter_mut().for_each(|t| *t *= scale);
            }
            theta
        })
        .collect();

    let mut zbar = vec![0.0; dim];
    let mut align = 0.0;
    let mut total_n = 0usize;
    for (s, ez) in speakers.iter().zip(&post_means) {
        for (acc, v) in zbar.iter_mut().zip(ez) {
            *acc += v;
        }
        align += dot(s.sum(), ez);
        total_n += s.n();
    }
    let speaker_count = speakers.len() as f64;
    zbar.iter_mut().for_each(|v| *v /= speaker_count);
    let rbar = align / total_n as f64;

    if !(rbar > 0.0) {
        return Err(Error::Degenerate(format!(
            "embeddings are not aligned with their speaker posteriors (mean alignment {rbar})"
        )));
    }
    if rbar >= R_MAX {
        return Err(Error::CappedConcentration { r: rbar, cap: R_MAX });
    }
    let w = sphere_math::rho_inv(order, rbar)?;

    let (b, mu) = if fix_b_zero {
        (0.0, model.mu().clone())
    } else {
        let r = norm(&zbar);
        match UnitVec::from_direction(&zbar) {
            // z-bar at the origin: keep the old direction, uniform prior.
            None => (0.0, model.mu().clone()),
            Some(_) if r >= R_MAX => return Err(Error::CappedConcentration { r, cap: R_MAX }),
            Some(mu) => (sphere_math::rho_inv(order, r)?, mu),
        }
    };
    PsdaModel::new(w, b, mu)
}

/// Clip range for the mean speaker-mean norm used to seed `w`.
const INIT_R_RANGE: (f64, f64) = (1e-6, 1.0 - 1e-6);

fn init_w(speakers: &[SideStats], order: BesselOrder) -> Result<f64> {
    let mean_norm = speakers
        .iter()
        .map(|s| norm(s.sum()) / s.n() as f64)
        .sum::<f64>()
        / speakers.len() as f64;
    sphere_math::rho_inv(order, mean_norm.clamp(INIT_R_RANGE.0, INIT_R_RANGE.1))
}

fn speaker_directions(speakers: &[SideStats]) -> Vec<UnitVec> {
    speakers
        .iter()
        .filter_map(|s| UnitVec::from_direction(s.sum()))
        .collect()
}

/// Deterministic starting point for EM: `mu` and `b` are the ML VMF fit to the
/// speakers' normalized mean embeddings, and `w = rho_inv` of the average
/// speaker-mean norm (clipped into the invertible range).
pub fn init_params(speakers: &[SideStats]) -> Result<PsdaModel> {
    let dim = validate_speakers(speakers)?;
    let order = BesselOrder::from_dim(dim)?;
    let dirs = speaker_directions(speakers);
    if dirs.is_empty() {
        return Err(Error::Degenerate("every speaker has a zero embedding sum".into()));
    }
    let prior = vmf::fit_ml(&dirs)?;
    let w = init_w(speakers, order)?;
    PsdaModel::new(w, prior.kappa(), prior.mu().clone())
}

fn init_b_zero(speakers: &[SideStats]) -> Result<PsdaModel> {
    let dim = validate_speakers(speakers)?;
    let order = BesselOrder::from_dim(dim)?;
    let mut total = vec![0.0; dim];
    for s in speakers {
        for (t, v) in total.iter_mut().zip(s.sum()) {
            *t += v;
        }
    }
    let mu = UnitVec::from_direction(&total).unwrap_or_else(|| UnitVec::basis(dim, 0));
    PsdaModel::new(init_w(speakers, order)?, 0.0, mu)
}

/// Maximum-likelihood training by EM.
///
/// Needs at least two speakers with consistent dimension. The returned trace
/// is non-decreasing up to rounding.
pub fn em_train(speakers: &[SideStats], opts: &EmOptions) -> Result<EmResult> {
    validate_speakers(speakers)?;
    let mut model = match (&opts.init, opts.fix_b_zero) {
        (Init::Model(m), false) => m.clone(),
        (Init::Model(m), true) => PsdaModel::new(m.w(), 0.0, m.mu().clone())?,
        (Init::Auto, false) => init_params(speakers)?,
        (Init::Auto, true) => init_b_zero(speakers)?,
    };
    let mut prev = total_loglik(&model, speakers)?;
    let mut trace = vec![prev];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        model = em_step(&model, speakers, opts.fix_b_zero)?;
        iterations += 1;
        let ll = total_loglik(&model, speakers)?;
        trace.push(ll);
        let gain = ll - prev;
        prev = ll;
        if gain <= opts.rel_tol * ll.abs() {
            converged = true;
            break;
        }
    }
    Ok(EmResult {
        model,
        trace,
        iterations,
        converged,
    })
}
