//! Verification metrics: DET operating points, equal error rate and minimum
//! detection cost.
//!
//! A trial is accepted when its score is at or above the threshold.

use crate::{Error, Result};

/// Scores split by trial label. Both sides are non-empty and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScores {
    targets: Vec<f64>,
    nontargets: Vec<f64>,
}

impl LabeledScores {
    pub fn new(targets: Vec<f64>, nontargets: Vec<f64>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::Empty("no target scores"));
        }
        if nontargets.is_empty() {
            return Err(Error::Empty("no non-target scores"));
        }
        if targets.iter().chain(&nontargets).any(|s| !s.is_finite()) {
            return Err(Error::Domain("scores must be finite".into()));
        }
        Ok(LabeledScores {
            targets,
            nontargets,
        })
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn nontargets(&self) -> &[f64] {
        &self.nontargets
    }

    /// The same trials with target and non-target roles exchanged.
    pub fn swapped(&self) -> LabeledScores {
        LabeledScores {
            targets: self.nontargets.clone(),
            nontargets: self.targets.clone(),
        }
    }
}

/// An empirical operating point: accepting scores `>= threshold` misses
/// `p_miss` of the targets and accepts `p_fa` of the non-targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    pub p_miss: f64,
    pub p_fa: f64,
}

/// Operating points at every distinct score plus `+inf` (reject all), in
/// increasing threshold order. `p_miss` rises and `p_fa` falls along the list.
pub fn det_points(s: &LabeledScores) -> Vec<DetPoint> {
    let mut all: Vec<(f64, bool)> = s
        .targets
        .iter()
        .map(|&x| (x, true))
        .chain(s.nontargets.iter().map(|&x| (x, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    let n_tar = s.targets.len() as f64;
    let n_non = s.nontargets.len() as f64;
    let mut below_tar = 0usize;
    let mut below_non = 0usize;
    let mut points = Vec::new();
    let mut i = 0;
    while i < all.len() {
        let threshold = all[i].0;
        points.push(DetPoint {
            threshold,
            p_miss: below_tar as f64 / n_tar,
            p_fa: (s.nontargets.len() - below_non) as f64 / n_non,
        });
        while i < all.len() && all[i].0 == threshold {
            if all[i].1 {
                below_tar += 1;
            } else {
                below_non += 1;
            }
            i += 1;
        }
    }
    points.push(DetPoint {
        threshold: f64::INFINITY,
        p_miss: 1.0,
        p_fa: 0.0,
    });
    points
}

/// Equal error rate on the ROC convex hull: the point where the lower hull of
/// the operating points crosses `p_miss = p_fa`, interpolating linearly along
/// the hull segment.
pub fn eer(s: &LabeledScores) -> f64 {
    let mut pts: Vec<(f64, f64)> = det_points(s).iter().map(|p| (p.p_fa, p.p_miss)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    for seg in hull.windows(2) {
        let (p, q) = (seg[0], seg[1]);
        let dp = p.1 - p.0;
        let dq = q.1 - q.0;
        if dp >= 0.0 && dq <= 0.0 {
            if dp == dq {
                return p.0;
            }
            let t = dp / (dp - dq);
            return p.0 + t * (q.0 - p.0);
        }
    }
    // Unreachable: the hull runs from (0, 1) to (1, 0).
    0.5
}

/// Staircase equal error rate: the mean of `p_miss` and `p_fa` at the raw
/// operating point where they are closest.
pub fn eer_staircase(s: &LabeledScores) -> f64 {
    det_points(s)
        .iter()
        .min_by(|a, b| (a.p_miss - a.p_fa).abs().total_cmp(&(b.p_miss - b.p_fa).abs()))
        .map(|p| 0.5 * (p.p_miss + p.p_fa))
        .expect("det_points is never empty")
}

/// Minimum over the raw operating points of
/// `p_tar c_miss p_miss + (1 - p_tar) c_fa p_fa`, divided by the cost of the
/// better trivial decision, `min(p_tar c_miss, (1 - p_tar) c_fa)`.
pub fn min_dcf(s: &LabeledScores, p_tar: f64, c_miss: f64, c_fa: f64) -> Result<f64> {
    if !(p_tar > 0.0 && p_tar < 1.0) {
        return Err(Error::Domain(format!("target prior must be in (0, 1), got {p_tar}")));
    }
    if !(c_miss > 0.0 && c_fa > 0.0 && c_miss.is_finite() && c_fa.is_finite()) {
        return Err(Error::Domain(format!(
            "costs must be positive and finite, got c_miss={c_miss} c_fa={c_fa}"
        )));
    }
    let wm = p_tar * c_miss;
    let wf = (1.0 - p_tar) * c_fa;
    let best = det_points(s)
        .iter()
        .map(|p| wm * p.p_miss + wf * p.p_fa)
        .fold(f64::INFINITY, f64::min);
    Ok(best / wm.min(wf))
}
