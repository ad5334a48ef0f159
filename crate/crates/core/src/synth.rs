//! Synthetic data drawn from the PSDA generative model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::io::{EmbeddingTable, EnrollMap, TrialSpec};
use crate::model::PsdaModel;
use crate::scoring::Label;
use crate::vmf::{UnitVec, VmfParams};
use crate::Result;

/// Embeddings with their speaker labels.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub table: EmbeddingTable,
    /// `(segment id, speaker id)` in table order.
    pub labels: Vec<(String, String)>,
    /// The speaker variables that generated each speaker's embeddings.
    pub speakers: Vec<UnitVec>,
}

pub fn speaker_id(prefix: &str, s: usize) -> String {
    format!("{prefix}spk{s:05}")
}

pub fn segment_id(prefix: &str, s: usize, k: usize) -> String {
    format!("{prefix}spk{s:05}-{k:03}")
}

/// Draws `speakers` speaker variables `z ~ V(mu, b)` and `n_per` embeddings
/// `x ~ V(z, w)` for each. Ids are prefixed with `prefix` so independent sets
/// can share files.
pub fn synth_dataset(
    truth: &PsdaModel,
    speakers: usize,
    n_per: usize,
    seed: u64,
    prefix: &str,
) -> Result<SynthData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zs = truth.prior().sample_with_rng(speakers, &mut rng);
    let mut table = EmbeddingTable::new();
    let mut labels = Vec::with_capacity(speakers * n_per);
    for (s, z) in zs.iter().enumerate() {
        let within = VmfParams::new(z.clone(), truth.w())?;
        for (k, x) in within.sample_with_rng(n_per, &mut rng).into_iter().enumerate() {
            let seg = segment_id(prefix, s, k);
            table.push(seg.clone(), x)?;
            labels.push((seg, speaker_id(prefix, s)));
        }
    }
    Ok(SynthData {
        table,
        labels,
        speakers: zs,
    })
}

/// Trials over a synthetic set: each speaker's first `n_enroll` segments form
/// one enrollment model (named after the speaker) and every remaining segment
/// of every speaker is a test segment scored against every model.
pub fn synth_trials(data: &SynthData, n_enroll: usize) -> (EnrollMap, Vec<TrialSpec>) {
    let mut by_speaker: Vec<(String, Vec<String>)> = Vec::new();
    for (seg, spk) in &data.labels {
        match by_speaker.last_mut() {
            Some((s, segs)) if s == spk => segs.push(seg.clone()),
            _ => by_speaker.push((spk.clone(), vec![seg.clone()])),
        }
    }
    let mut map = EnrollMap::default();
    let mut tests: Vec<(String, &str)> = Vec::new();
    for (spk, segs) in &by_speaker {
        let k = n_enroll.min(segs.len());
        if k > 0 {
            map.insert(spk.clone(), segs[..k].to_vec())
                .expect("speaker ids are unique and k > 0");
        }
        tests.extend(segs[k..].iter().map(|t| (t.clone(), spk.as_str())));
    }
    let mut trials = Vec::with_capacity(map.entries().len() * tests.len());
    for (model, _) in map.entries() {
        for (test, spk) in &tests {
            let label = if model == spk {
                Label::Target
            } else {
                Label::Nontarget
            };
            trials.push(TrialSpec {
                enroll: model.clone(),
                test: test.clone(),
                label: Some(label),
            });
        }
    }
    (map, trials)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let m = PsdaModel::new(20.0, 3.0, UnitVec::basis(5, 0)).unwrap();
        let a = synth_dataset(&m, 4, 3, 7, "").unwrap();
        let b = synth_dataset(&m, 4, 3, 7, "").unwrap();
        assert_eq!(a.table.vectors(), b.table.vectors());
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.table.len(), 12);
    }

    #[test]
    fn tight_speakers() {
        let m = PsdaModel::new(1e4, 0.0, UnitVec::basis(8, 0)).unwrap();
        let d = synth_dataset(&m, 5, 4, 3, "").unwrap();
        let v = d.table.vectors();
        for s in 0..5 {
            for i in 0..4 {
                for j in 0..i {
                    assert!(v[4 * s + i].dot(&v[4 * s + j]) > 0.99);
                }
            }
        }
    }

    #[test]
    fn trial_layout() {
        let m = PsdaModel::new(20.0, 0.0, UnitVec::basis(4, 0)).unwrap();
        let d = synth_dataset(&m, 3, 4, 1, "x").unwrap();
        let (map, trials) = synth_trials(&d, 1);
        assert_eq!(map.entries().len(), 3);
        assert_eq!(trials.len(), 3 * 9);
        let n_tar = trials.iter().filter(|t| t.label == Some(Label::Target)).count();
        assert_eq!(n_tar, 9);
    }
}
