//! Empirical check of the covering lemma: about `2^{n(I(U:V)+γ)}` random
//! `U`-sequences, pushed through `P_V|U`, give a mixture `Q` whose
//! divergence from `P_V^{⊗n}` is at most `2^{−γn}` with high probability.

use rand::distributions::{Distribution, WeightedIndex};
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{mutual_information, JointDistribution};
use crate::error::{Error, Result};
use crate::seed::{stream, Purpose};
use crate::sequences;

/// Ceiling on `|V|^n`.
pub const V_BUDGET: u128 = 1 << 20;
/// Ceiling on `(distinct sequences) · |V|^n`.
pub const OPS_BUDGET: u128 = 1 << 28;
/// Ceiling on the number of sampled sequences.
pub const COUNT_BUDGET: u128 = 1 << 28;

/// Sequences drawn for one run of the lemma.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverInstance {
    /// Marginal over `(U, V)` in that order.
    pub p_uv: JointDistribution,
    pub n: usize,
    pub gamma: f64,
    /// Indices of the chosen `U`-sequences, with repetition.
    pub sequences: Vec<usize>,
    pub seed: u64,
}

impl CoverInstance {
    /// An instance with explicitly chosen sequences.
    pub fn from_sequences(
        d: &JointDistribution,
        u: &str,
        v: &str,
        n: usize,
        gamma: f64,
        sequences: Vec<usize>,
    ) -> Result<Self> {
        let p_uv = d.marginalize(&[u, v])?;
        let total = sequences::count(p_uv.shape()[0], n);
        if sequences.is_empty() || sequences.iter().any(|&s| s as u128 >= total) {
            return Err(Error::InvalidConfig(format!(
                "need at least one sequence index below {total}"
            )));
        }
        Ok(CoverInstance {
            p_uv,
            n,
            gamma,
            sequences,
            seed: 0,
        })
    }

    /// `N`, the number of chosen sequences.
    pub fn count(&self) -> usize {
        self.sequences.len()
    }
}

/// `⌈2^{n(I(U:V)+γ)}⌉`.
pub fn cover_size(d: &JointDistribution, u: &str, v: &str, n: usize, gamma: f64) -> Result<u128> {
    if !(gamma >= 0.0 && gamma.is_finite()) || n == 0 {
        return Err(Error::InvalidConfig(format!(
            "need n >= 1 and gamma >= 0, got n = {n}, gamma = {gamma}"
        )));
    }
    let exponent = n as f64 * (mutual_information(d, &[u], &[v])? + gamma);
    if exponent >= 127.0 {
        return Err(Error::SizeBudgetExceeded {
            what: "cover sequences",
            required: u128::MAX,
            budget: COUNT_BUDGET,
        });
    }
    Ok((exponent.exp2() - 1e-6).ceil().max(1.0) as u128)
}

fn check_budget(p_uv: &JointDistribution, n: usize, count: u128) -> Result<()> {
    let shape = p_uv.shape();
    let v_count = sequences::count(shape[1], n);
    if v_count > V_BUDGET {
        return Err(Error::SizeBudgetExceeded {
            what: "V-sequences",
            required: v_count,
            budget: V_BUDGET,
        });
    }
    if count > COUNT_BUDGET {
        return Err(Error::SizeBudgetExceeded {
            what: "cover sequences",
            required: count,
            budget: COUNT_BUDGET,
        });
    }
    let distinct = count.min(sequences::count(shape[0], n));
    let ops = distinct.saturating_mul(v_count);
    if ops > OPS_BUDGET {
        return Err(Error::SizeBudgetExceeded {
            what: "covering mixture evaluation",
            required: ops,
            budget: OPS_BUDGET,
        });
    }
    Ok(())
}

/// Draws `N = ⌈2^{n(I(U:V)+γ)}⌉` sequences i.i.d. from `P_U^{⊗n}`.
pub fn sample_cover(
    d: &JointDistribution,
    u: &str,
    v: &str,
    n: usize,
    gamma: f64,
    seed: u64,
) -> Result<CoverInstance> {
    d.ensure_valid()?;
    let p_uv = d.marginalize(&[u, v])?;
    let count = cover_size(&p_uv, u, v, n, gamma)?;
    check_budget(&p_uv, n, count)?;
    let ku = p_uv.shape()[0];
    let p_u = p_uv.marginal_vector(&[u])?;
    let sampler = WeightedIndex::new(&p_u)
        .map_err(|e| Error::InvalidConfig(format!("cannot sample: {e}")))?;
    let mut rng = stream(seed, Purpose::Cover, n as u64);
    let sequences = (0..count)
        .map(|_| (0..n).fold(0, |acc, _| acc * ku + sampler.sample(&mut rng)))
        .collect();
    Ok(CoverInstance {
        p_uv,
        n,
        gamma,
        sequences,
        seed,
    })
}

/// `D(Q ‖ P_V^{⊗n})` in bits, with `Q` computed exactly over all
/// `V`-sequences.
pub fn covering_divergence(inst: &CoverInstance) -> Result<f64> {
    let n = inst.n;
    check_budget(&inst.p_uv, n, inst.count() as u128)?;
    let (ku, kv) = (inst.p_uv.shape()[0], inst.p_uv.shape()[1]);
    let family = inst.p_uv.condition(&[inst.p_uv.variables()[0].name()])?;
    let p_v: Vec<f64> = (0..kv)
        .map(|j| (0..ku).map(|i| inst.p_uv.probs()[i * kv + j]).sum())
        .collect();

    let mut sorted = inst.sequences.clone();
    sorted.sort_unstable();
    let mut distinct: Vec<(usize, f64)> = Vec::new();
    for s in sorted {
        match distinct.last_mut() {
            Some((last, m)) if *last == s => *m += 1.0,
            _ => distinct.push((s, 1.0)),
        }
    }
    let rows: Vec<&[f64]> = (0..ku)
        .map(|i| family.rows[i].as_deref().unwrap_or(&[]))
        .collect();
    if let Some(&(s, _)) = distinct.iter().find(|(s, _)| {
        sequences::digits(*s, ku, n)
            .iter()
            .any(|&a| rows[a].is_empty())
    }) {
        return Err(Error::InvalidConfig(format!(
            "sequence {s} uses a U symbol of probability zero"
        )));
    }

    let total = inst.count() as f64;
    let v_len = sequences::count(kv, n) as usize;
    let chunk = distinct.len().div_ceil(16).max(1);
    let partial: Vec<Vec<f64>> = distinct
        .par_chunks(chunk)
        .map(|part| {
            let mut q = vec![0.0; v_len];
            for &(s, mult) in part {
                let digits = sequences::digits(s, ku, n);
                let factors: Vec<&[f64]> = digits.iter().map(|&a| rows[a]).collect();
                let w = mult / total;
                for (acc, p) in q.iter_mut().zip(sequences::kronecker(&factors)) {
                    *acc += w * p;
                }
            }
            q
        })
        .collect();
    let mut q = vec![0.0; v_len];
    for part in &partial {
        for (a, b) in q.iter_mut().zip(part) {
            *a += b;
        }
    }
    let p = sequences::power(&p_v, n);
    let d: f64 = q
        .iter()
        .zip(&p)
        .filter(|(&qi, _)| qi > 0.0)
        .map(|(&qi, &pi)| qi * (qi / pi).log2())
        .sum();
    Ok(d.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    /// Sequences per instance.
    pub count: usize,
    pub mean_divergence: f64,
    pub max_divergence: f64,
    /// Standard error of the mean over seeds.
    pub se: f64,
    /// `2^{−γn}`.
    pub bound: f64,
    /// Fraction of seeds with divergence at most `bound`.
    pub fraction_within: f64,
}

/// One row per distinct `n`, sorted by `n`. Seed `s` of the sweep runs
/// [`sample_cover`] with seed `master_seed + s`.
pub fn covering_sweep(
    d: &JointDistribution,
    u: &str,
    v: &str,
    n_list: &[usize],
    gamma: f64,
    seeds: usize,
    master_seed: u64,
) -> Result<Vec<SweepRow>> {
    if seeds == 0 || n_list.is_empty() {
        return Err(Error::InvalidConfig(
            "a sweep needs at least one n and one seed".into(),
        ));
    }
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let mut rows = Vec::with_capacity(ns.len());
    for n in ns {
        let runs: Vec<(usize, f64)> = (0..seeds as u64)
            .into_par_iter()
            .map(|s| {
                let inst = sample_cover(d, u, v, n, gamma, master_seed.wrapping_add(s))?;
                Ok((inst.count(), covering_divergence(&inst)?))
            })
            .collect::<Result<_>>()?;
        let divs: Vec<f64> = runs.iter().map(|r| r.1).collect();
        let k = divs.len() as f64;
        let mean = divs.iter().sum::<f64>() / k;
        let sd = if divs.len() > 1 {
            (divs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        let bound = (-gamma * n as f64).exp2();
        rows.push(SweepRow {
            n,
            count: runs[0].0,
            mean_divergence: mean,
            max_divergence: divs.iter().copied().fold(0.0, f64::max),
            se: sd / k.sqrt(),
            bound,
            fraction_within: divs.iter().filter(|&&x| x <= bound).count() as f64 / k,
        });
    }
    Ok(rows)
}

/// Tab-separated table with a header line.
pub fn sweep_tsv(rows: &[SweepRow]) -> String {
    let mut out = String::from("n\tcount\tmean_d\tmax_d\tse\tbound\tfraction_within\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.n, r.count, r.mean_divergence, r.max_divergence, r.se, r.bound, r.fraction_within
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Alphabet;
    use proptest::prelude::*;

    fn pair(probs: Vec<f64>) -> JointDistribution {
        let v = vec![
            Alphabet::new("U", 2).unwrap(),
            Alphabet::new("V", 2).unwrap(),
        ];
        JointDistribution::new(v, probs).unwrap()
    }

    fn copies() -> JointDistribution {
        pair(vec![0.5, 0.0, 0.0, 0.5])
    }

    fn independent() -> JointDistribution {
        pair(vec![0.3, 0.2, 0.3, 0.2])
    }

    #[test]
    fn sizes() {
        assert_eq!(cover_size(&copies(), "U", "V", 8, 0.25).unwrap(), 1024);
        assert_eq!(cover_size(&independent(), "U", "V", 8, 0.25).unwrap(), 4);
        assert_eq!(cover_size(&copies(), "U", "V", 4, 0.0).unwrap(), 16);
        assert!(cover_size(&copies(), "U", "V", 4, -0.1).is_err());
    }

    #[test]
    fn independent_pair_is_covered_exactly() {
        let inst = sample_cover(&independent(), "U", "V", 6, 0.5, 3).unwrap();
        assert_eq!(inst.count(), 8);
        assert!(covering_divergence(&inst).unwrap() < 1e-12);
    }

    #[test]
    fn all_sequences_once() {
        let all: Vec<usize> = (0..16).collect();
        let inst = CoverInstance::from_sequences(&copies(), "U", "V", 4, 0.0, all.clone()).unwrap();
        assert!(covering_divergence(&inst).unwrap() < 1e-12);

        // Unweighted enumeration misses a non-uniform P_U.
        let skewed = pair(vec![0.7, 0.1, 0.05, 0.15]);
        let inst = CoverInstance::from_sequences(&skewed, "U", "V", 4, 0.0, all).unwrap();
        assert!(covering_divergence(&inst).unwrap() > 1e-3);
    }

    #[test]
    fn single_sequence_of_copies() {
        // Q is a point mass, so D = n bits.
        let inst = CoverInstance::from_sequences(&copies(), "U", "V", 5, 0.0, vec![9]).unwrap();
        assert!((covering_divergence(&inst).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let err = sample_cover(&copies(), "U", "V", 21, 0.0, 0).unwrap_err();
        assert!(matches!(err, Error::SizeBudgetExceeded { .. }));
    }

    #[test]
    fn sweep_shape() {
        let rows = covering_sweep(&copies(), "U", "V", &[8, 4, 6], 0.5, 5, 1).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![4, 6, 8]);
        let one = covering_sweep(&copies(), "U", "V", &[4], 0.5, 5, 1).unwrap();
        assert_eq!(one.len(), 1);
        let zero = covering_sweep(&independent(), "U", "V", &[4, 6], 0.5, 5, 1).unwrap();
        assert!(zero.iter().all(|r| r.max_divergence < 1e-12));
        let tsv = sweep_tsv(&rows);
        assert_eq!(tsv.lines().count(), 4);
    }

    #[test]
    fn mean_divergence_decreases_for_copies() {
        let rows = covering_sweep(&copies(), "U", "V", &[4, 8, 12], 0.5, 20, 0).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].mean_divergence < w[0].mean_divergence, "{rows:?}");
        }
    }

    #[test]
    fn reproducible() {
        let a = sample_cover(&copies(), "U", "V", 6, 0.5, 9).unwrap();
        let b = sample_cover(&copies(), "U", "V", 6, 0.5, 9).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn divergence_is_nonnegative(
            w in prop::collection::vec(0.01f64..1.0, 4),
            n in 1usize..6,
            seed in 0u64..1000,
        ) {
            let s: f64 = w.iter().sum();
            let d = pair(w.iter().map(|x| x / s).collect());
            let inst = sample_cover(&d, "U", "V", n, 0.2, seed).unwrap();
            prop_assert!(covering_divergence(&inst).unwrap() >= 0.0);
        }
    }
}
