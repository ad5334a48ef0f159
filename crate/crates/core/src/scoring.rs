//! Likelihood-ratio scoring of verification trials.
//!
//! For enrollment statistics `e` and test statistics `t` the natural-log
//! likelihood ratio between "same speaker" and "different speakers" is
//!
//! ```text
//! log C(|b mu + w e|) + log C(|b mu + w t|) - log C(|b mu + w (e + t)|) - log C(b)
//! ```
//!
//! where `e` and `t` are embedding sums and `C` is the VMF normalizer of the
//! model's order.

use ndarray::{Array2, Zip};
use rayon::prelude::*;

use crate::metrics::LabeledScores;
use crate::model::{PsdaModel, SideStats};
use crate::vmf::{check_dim, dot, norm, UnitVec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Target,
    Nontarget,
}

impl Label {
    /// `"tar"` or `"non"`.
    pub fn parse(token: &str) -> Option<Label> {
        match token {
            "tar" => Some(Label::Target),
            "non" => Some(Label::Nontarget),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Target => "tar",
            Label::Nontarget => "non",
        }
    }
}

/// One verification trial: enrollment side, test side and optional label.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub enroll: SideStats,
    pub test: SideStats,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTrial {
    pub enroll: String,
    pub test: String,
    pub score: f64,
    pub label: Option<Label>,
}

/// Scores for a list of trials, in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreReport {
    pub trials: Vec<ScoredTrial>,
}

impl ScoreReport {
    /// Splits the scores by label. Every trial must be labeled.
    pub fn labeled(&self) -> Result<LabeledScores> {
        let mut tar = Vec::new();
        let mut non = Vec::new();
        for t in &self.trials {
            match t.label {
                Some(Label::Target) => tar.push(t.score),
                Some(Label::Nontarget) => non.push(t.score),
                None => {
                    return Err(Error::Data(format!(
                        "trial {} {} has no label",
                        t.enroll, t.test
                    )))
                }
            }
        }
        LabeledScores::new(tar, non)
    }
}

/// One side of a trial reduced to what scoring needs.
#[derive(Debug, Clone)]
pub struct PreparedSide {
    sum: Vec<f64>,
    log_c: f64,
}

/// Scores trials against a fixed model, caching the per-side terms.
#[derive(Debug, Clone)]
pub struct Scorer<'a> {
    model: &'a PsdaModel,
    log_c_b: f64,
}

impl<'a> Scorer<'a> {
    pub fn new(model: &'a PsdaModel) -> Self {
        Scorer {
            model,
            log_c_b: model.log_c(model.b()),
        }
    }

    /// Precomputes `log C(|b mu + w s|)` for one side.
    pub fn prepare(&self, stats: &SideStats) -> Result<PreparedSide> {
        check_dim(self.model.dim(), stats.dim())?;
        Ok(PreparedSide {
            sum: stats.sum().to_vec(),
            log_c: self.model.log_c(norm(&self.model.natural(stats.sum()))),
        })
    }

    /// Log-likelihood ratio of two prepared sides. Symmetric in its arguments
    /// bit for bit.
    pub fn score(&self, enroll: &PreparedSide, test: &PreparedSide) -> f64 {
        let (w, b) = (self.model.w(), self.model.b());
        let joint: f64 = self
            .model
            .mu()
            .as_slice()
            .iter()
            .zip(enroll.sum.iter().zip(&test.sum))
            .map(|(m, (e, t))| {
                let v = b * m + w * (e + t);
                v * v
            })
            .sum();
        enroll.log_c + test.log_c - self.model.log_c(joint.sqrt()) - self.log_c_b
    }
}

/// Log-likelihood ratio of one trial.
pub fn llr_score(model: &PsdaModel, enroll: &SideStats, test: &SideStats) -> Result<f64> {
    let scorer = Scorer::new(model);
    Ok(scorer.score(&scorer.prepare(enroll)?, &scorer.prepare(test)?))
}

/// Scores every enrollment side against every test side.
///
/// Uses `|a + c|^2 = |a|^2 + 2 a'c + |c|^2` with `a_i = b mu + w e_i` and
/// `c_j = w t_j`, so the cross terms for the whole block come from one dense
/// matrix product and the per-side norms are computed once.
pub fn score_matrix(
    model: &PsdaModel,
    enrolls: &[SideStats],
    tests: &[SideStats],
) -> Result<Array2<f64>> {
    let dim = model.dim();
    for s in enrolls.iter().chain(tests) {
        check_dim(dim, s.dim())?;
    }
    let w = model.w();

    let mut a = Array2::<f64>::zeros((enrolls.len(), dim));
    for (mut row, s) in a.rows_mut().into_iter().zip(enrolls) {
        row.assign(&ndarray::ArrayView1::from(&model.natural(s.sum())[..]));
    }
    let mut c = Array2::<f64>::zeros((tests.len(), dim));
    for (mut row, s) in c.rows_mut().into_iter().zip(tests) {
        row.iter_mut().zip(s.sum()).for_each(|(r, v)| *r = w * v);
    }

    let a_sq: Vec<f64> = a.rows().into_iter().map(|r| r.dot(&r)).collect();
    let c_sq: Vec<f64> = c.rows().into_iter().map(|r| r.dot(&r)).collect();
    let a_log_c: Vec<f64> = a_sq.par_iter().map(|s| model.log_c(s.sqrt())).collect();
    let t_log_c: Vec<f64> = tests
        .par_iter()
        .map(|s| model.log_c(norm(&model.natural(s.sum()))))
        .collect();
    let log_c_b = model.log_c(model.b());

    let mut out = a.dot(&c.t());
    Zip::indexed(&mut out).par_for_each(|(i, j), v| {
        let joint = (a_sq[i] + c_sq[j] + 2.0 * *v).max(0.0);
        *v = a_log_c[i] + t_log_c[j] - model.log_c(joint.sqrt()) - log_c_b;
    });
    Ok(out)
}

/// Cosine baseline: the dot product of two unit vectors.
pub fn cosine_score(e: &UnitVec, t: &UnitVec) -> Result<f64> {
    check_dim(e.dim(), t.dim())?;
    Ok(dot(e.as_slice(), t.as_slice()))
}
