use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{mean_sd, Estimate, SimConfig};
use crate::dist::{conditional_entropy, JointDistribution};
use crate::error::{Error, Result};
use crate::roles::Roles;
use crate::seed::{stream, Purpose};
use crate::sequences::{self, entropy_bits};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistillReport {
    pub n: usize,
    pub delta: f64,
    /// `H(X|Z)` per symbol.
    pub conditional_entropy: f64,
    /// `⌊n(H(X|Z) − δ)⌋`, clamped at 0.
    pub output_bits: usize,
    /// Total variation of the hash output from uniform.
    pub uniformity_tv: f64,
    /// `I(hash : Z^n) / n`.
    pub leakage: Estimate,
    pub trials: usize,
    pub seed: u64,
}

/// Privacy amplification of a shared sender string against the reference:
/// a seeded random full-rank binary matrix applied to the bits of the
/// sequence index.
pub fn distill_key_from_shared(
    d: &JointDistribution,
    roles: &Roles,
    cfg: &SimConfig,
) -> Result<DistillReport> {
    cfg.check()?;
    d.ensure_valid()?;
    let (x, z) = (roles.x(), roles.z());
    let xz = d.marginalize(&[x, z])?;
    let (kx, kz) = (xz.shape()[0], xz.shape()[1]);
    let n = cfg.n;
    let total = sequences::checked_count("sender sequences", kx, n, cfg.budget)?;
    let h = conditional_entropy(&xz, &[x], &[z])?;
    let input_bits = usize::BITS - (total - 1).leading_zeros();
    let m =
        ((n as f64 * (h - cfg.delta) + 1e-9).floor().max(0.0) as usize).min(input_bits as usize);

    let mut rng = stream(cfg.seed, Purpose::Hash, 0);
    let mask = if input_bits == 0 {
        0
    } else {
        u64::MAX >> (64 - input_bits)
    };
    let rows = loop {
        let rows: Vec<u64> = (0..m).map(|_| rng.gen::<u64>() & mask).collect();
        if rank(&rows) == m {
            break rows;
        }
    };
    let hash = |s: usize| -> usize {
        rows.iter()
            .enumerate()
            .map(|(j, &r)| (((r & s as u64).count_ones() & 1) as usize) << j)
            .sum()
    };
    let hashed: Vec<usize> = (0..total).map(hash).collect();

    let p_x = xz.marginal_vector(&[x])?;
    let p_z = xz.marginal_vector(&[z])?;
    let x_given_z: Vec<Vec<f64>> = (0..kz)
        .map(|zi| {
            (0..kx)
                .map(|xi| {
                    if p_z[zi] > 0.0 {
                        xz.probs()[xi * kz + zi] / p_z[zi]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let outputs = 1usize << m;
    let p_seq = sequences::power(&p_x, n);
    let mut p_out = vec![0.0; outputs];
    for (s, &p) in p_seq.iter().enumerate() {
        p_out[hashed[s]] += p;
    }
    let uniformity_tv = 0.5
        * p_out
            .iter()
            .map(|p| (p - 1.0 / outputs as f64).abs())
            .sum::<f64>();

    let sampler = WeightedIndex::new(&p_z)
        .map_err(|e| Error::InvalidConfig(format!("cannot sample: {e}")))?;
    let samples: Vec<f64> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(cfg.seed, Purpose::Leakage, t as u64);
            let zs: Vec<usize> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
            let rows: Vec<&[f64]> = zs.iter().map(|&zi| x_given_z[zi].as_slice()).collect();
            let post = sequences::kronecker(&rows);
            let mut by_out = vec![0.0; outputs];
            for (s, &p) in post.iter().enumerate() {
                by_out[hashed[s]] += p;
            }
            entropy_bits(&by_out)
        })
        .collect();
    let (mean, sd) = mean_sd(&samples);
    Ok(DistillReport {
        n,
        delta: cfg.delta,
        conditional_entropy: h,
        output_bits: m,
        uniformity_tv,
        leakage: Estimate {
            value: ((entropy_bits(&p_out) - mean) / n as f64).max(0.0),
            se: sd / (cfg.trials as f64).sqrt() / n as f64,
        },
        trials: cfg.trials,
        seed: cfg.seed,
    })
}

/// Rank over GF(2) of bit-vector rows.
fn rank(rows: &[u64]) -> usize {
    let mut basis: Vec<u64> = Vec::new();
    for &r in rows {
        let mut v = r;
        for &b in &basis {
            v = v.min(v ^ b);
        }
        if v != 0 {
            basis.push(v);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    basis.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Alphabet;

    fn xz(probs: Vec<f64>, kz: usize) -> JointDistribution {
        let v = vec![
            Alphabet::new("X", 2).unwrap(),
            Alphabet::new("Y", 1).unwrap(),
            Alphabet::new("Z", kz).unwrap(),
        ];
        JointDistribution::new(v, probs).unwrap()
    }

    fn cfg(n: usize) -> SimConfig {
        SimConfig {
            n,
            delta: 0.15,
            trials: 200,
            seed: 5,
            ..SimConfig::default()
        }
    }

    #[test]
    fn independent_reference() {
        let d = xz(vec![0.25; 4], 2);
        let r = distill_key_from_shared(&d, &Roles::default(), &cfg(12)).unwrap();
        assert_eq!(r.output_bits, 10);
        assert!(r.leakage.value <= 0.02);
        assert!(r.uniformity_tv < 1e-9);
    }

    #[test]
    fn fully_known_string_yields_nothing() {
        let d = xz(vec![0.5, 0.0, 0.0, 0.5], 2);
        let r = distill_key_from_shared(&d, &Roles::default(), &cfg(12)).unwrap();
        assert_eq!(r.output_bits, 0);
        assert_eq!(r.leakage.value, 0.0);
    }

    #[test]
    fn half_erased_string() {
        // Z reveals X with probability 1/2 and erases it otherwise.
        let d = xz(vec![0.25, 0.0, 0.25, 0.0, 0.25, 0.25], 3);
        let h = conditional_entropy(&d, &["X"], &["Z"]).unwrap();
        assert!((h - 0.5).abs() < 1e-12);
        let r = distill_key_from_shared(&d, &Roles::default(), &cfg(16)).unwrap();
        assert_eq!(r.output_bits, 5);
        assert!(r.leakage.value < 0.1);
    }

    #[test]
    fn gf2_rank() {
        assert_eq!(rank(&[0b11, 0b01, 0b10]), 2);
        assert_eq!(rank(&[0b100, 0b010, 0b001]), 3);
        assert_eq!(rank(&[0, 0]), 0);
    }
}
