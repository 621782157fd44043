use rand::distributions::{Distribution, WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BinningCode, Model};
use crate::dist::JointDistribution;
use crate::error::{Error, Result};
use crate::roles::Roles;
use crate::seed::{stream, Purpose};
use crate::sequences;

/// Ceiling on `|Z|^n · |X|^n` for exact evaluation.
const EXACT_OPS_BUDGET: u128 = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinLevel {
    Outer,
    Inner,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinQuality {
    pub label: u64,
    pub prob: f64,
    /// `TV(P_{Z^n | bin}, P_{Z^n})`.
    pub tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringQuality {
    pub level: BinLevel,
    pub exact: bool,
    pub bins: Vec<BinQuality>,
    pub max_tv: f64,
    /// Probability-weighted mean.
    pub mean_tv: f64,
}

/// How far the reference's view conditioned on a bin is from its
/// unconditioned view. Uses
/// `TV_c = Σ_{z^n} P(z^n) · max(0, 1 − P(c | z^n) / P(c))`, summed over all
/// `z^n` when `z_samples` is `None` and averaged over that many draws of
/// `z^n` otherwise.
pub fn covering_quality(
    d: &JointDistribution,
    roles: &Roles,
    code: &BinningCode,
    level: BinLevel,
    z_samples: Option<usize>,
    seed: u64,
) -> Result<CoveringQuality> {
    let m = Model::new(d, roles)?;
    let n = code.n();
    if code.alphabet_size() != m.kx {
        return Err(Error::InvalidConfig(format!(
            "code is over {} symbols, sender has {}",
            code.alphabet_size(),
            m.kx
        )));
    }
    let p_seq = sequences::power(&m.p_x, n);
    let (ids, labels): (Vec<usize>, Vec<u64>) = match level {
        BinLevel::Outer => (
            (0..p_seq.len()).map(|s| code.outer_id(s)).collect(),
            (0..code.occupied_outer())
                .map(|i| code.outer_label(i))
                .collect(),
        ),
        BinLevel::Inner => (
            (0..p_seq.len()).map(|s| code.inner_id(s)).collect(),
            (0..code.occupied_inner())
                .map(|i| code.inner_label(i))
                .collect(),
        ),
    };
    let mut prior = vec![0.0; labels.len()];
    for (s, &p) in p_seq.iter().enumerate() {
        prior[ids[s]] += p;
    }

    let gap = |z: &[usize]| -> Vec<f64> {
        let post = m.posterior(z);
        let mut by_bin = vec![0.0; labels.len()];
        for (s, &p) in post.iter().enumerate() {
            by_bin[ids[s]] += p;
        }
        by_bin
            .iter()
            .zip(&prior)
            .map(|(&q, &p)| if p > 0.0 { (1.0 - q / p).max(0.0) } else { 0.0 })
            .collect()
    };

    let (tvs, exact) = match z_samples {
        None => {
            let z_count = sequences::count(m.kz, n);
            let ops = z_count.saturating_mul(p_seq.len() as u128);
            if ops > EXACT_OPS_BUDGET {
                return Err(Error::SizeBudgetExceeded {
                    what: "exact covering evaluation",
                    required: ops,
                    budget: EXACT_OPS_BUDGET,
                });
            }
            let p_zn = sequences::power(&m.p_z, n);
            let parts: Vec<Vec<f64>> = (0..p_zn.len())
                .into_par_iter()
                .filter(|&zi| p_zn[zi] > 0.0)
                .map(|zi| {
                    let g = gap(&sequences::digits(zi, m.kz, n));
                    g.iter().map(|v| v * p_zn[zi]).collect()
                })
                .collect();
            (sum_columns(&parts, labels.len()), true)
        }
        Some(k) => {
            if k == 0 {
                return Err(Error::InvalidConfig("need at least one z sample".into()));
            }
            let sampler = WeightedIndex::new(&m.p_z)
                .map_err(|e| Error::InvalidConfig(format!("cannot sample: {e}")))?;
            let parts: Vec<Vec<f64>> = (0..k)
                .into_par_iter()
                .map(|t| {
                    let mut rng = stream(seed, Purpose::Leakage, t as u64);
                    let z: Vec<usize> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
                    gap(&z)
                })
                .collect();
            let mut s = sum_columns(&parts, labels.len());
            s.iter_mut().for_each(|v| *v /= k as f64);
            (s, false)
        }
    };

    let bins: Vec<BinQuality> = labels
        .iter()
        .zip(&prior)
        .zip(&tvs)
        .filter(|((_, &p), _)| p > 0.0)
        .map(|((&label, &prob), &tv)| BinQuality { label, prob, tv })
        .collect();
    let max_tv = bins.iter().map(|b| b.tv).fold(0.0, f64::max);
    let mean_tv = bins.iter().map(|b| b.prob * b.tv).sum();
    Ok(CoveringQuality {
        level,
        exact,
        bins,
        max_tv,
        mean_tv,
    })
}

fn sum_columns(parts: &[Vec<f64>], width: usize) -> Vec<f64> {
    let mut out = vec![0.0; width];
    for p in parts {
        for (a, b) in out.iter_mut().zip(p) {
            *a += b;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;
    use crate::dist::Alphabet;
    use crate::protocol::SimConfig;

    fn binary_symmetric(flip: f64) -> JointDistribution {
        let v = vec![
            Alphabet::new("X", 2).unwrap(),
            Alphabet::new("Y", 1).unwrap(),
            Alphabet::new("Z", 2).unwrap(),
        ];
        let (s, f) = (0.5 * (1.0 - flip), 0.5 * flip);
        JointDistribution::new(v, vec![s, f, f, s]).unwrap()
    }

    #[test]
    fn single_bin_reveals_nothing() {
        let d = binary_symmetric(0.1);
        let code = BinningCode::from_assignment(6, 2, 1, 1, vec![(0, 0); 64], 0).unwrap();
        let q = covering_quality(&d, &Roles::default(), &code, BinLevel::Outer, None, 0).unwrap();
        assert_eq!(q.bins.len(), 1);
        assert!(q.max_tv < 1e-12);
    }

    #[test]
    fn key_bins_cover_a_trivial_reference() {
        let cfg = SimConfig {
            n: 10,
            delta: 0.1,
            ..SimConfig::default()
        };
        let d = builtins::ex2();
        let code = BinningCode::build(&d, &Roles::default(), &cfg).unwrap();
        let q = covering_quality(&d, &Roles::default(), &code, BinLevel::Inner, None, 0).unwrap();
        assert!(q.exact);
        assert!(q.mean_tv <= 0.1);
    }

    #[test]
    fn sorted_bins_leak_and_random_bins_do_not() {
        let d = binary_symmetric(0.25);
        let n = 12;
        let sorted = BinningCode::sorted(n, 2, 16, 1, 1 << 20).unwrap();
        let q_sorted =
            covering_quality(&d, &Roles::default(), &sorted, BinLevel::Outer, None, 0).unwrap();

        let assignment = {
            let mut order: Vec<usize> = (0..1 << n).collect();
            rand::seq::SliceRandom::shuffle(&mut order[..], &mut stream(0, Purpose::Code, 0));
            let mut a = vec![(0, 0); 1 << n];
            for (pos, &s) in order.iter().enumerate() {
                a[s] = ((pos % 16) as u64, 0);
            }
            a
        };
        let random = BinningCode::from_assignment(n, 2, 16, 1, assignment, 0).unwrap();
        let q_random =
            covering_quality(&d, &Roles::default(), &random, BinLevel::Outer, None, 0).unwrap();
        assert!(q_sorted.max_tv > 0.35, "{}", q_sorted.max_tv);
        assert!(
            q_random.mean_tv < q_sorted.mean_tv / 3.0,
            "{} {}",
            q_random.mean_tv,
            q_sorted.mean_tv
        );
    }

    #[test]
    fn sampled_mode_tracks_exact_mode() {
        let d = binary_symmetric(0.2);
        let code = BinningCode::sorted(8, 2, 4, 1, 1 << 20).unwrap();
        let r = Roles::default();
        let exact = covering_quality(&d, &r, &code, BinLevel::Outer, None, 0).unwrap();
        let sampled = covering_quality(&d, &r, &code, BinLevel::Outer, Some(4000), 3).unwrap();
        assert!(!sampled.exact);
        assert!((exact.mean_tv - sampled.mean_tv).abs() < 0.03);
    }

    #[test]
    fn exact_mode_respects_budget() {
        let d = binary_symmetric(0.2);
        let code = BinningCode::from_assignment(15, 2, 1, 1, vec![(0, 0); 1 << 15], 0).unwrap();
        let err = covering_quality(&d, &Roles::default(), &code, BinLevel::Outer, None, 0);
        assert!(matches!(err, Err(Error::SizeBudgetExceeded { .. })));
    }
}
