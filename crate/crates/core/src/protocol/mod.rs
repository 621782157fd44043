//! Finite-length simulation of the binning protocol for merging.
//!
//! Alice bins her sequence `x^n` with a nested code, broadcasts the outer
//! index `C_o`, and Bob decodes by maximum likelihood inside that bin using
//! his `y^n`. From `(x̂^n, y^n)` he reads off the block label of every
//! symbol and resamples `(x̂, ŷ)` from the block's conditional, which
//! reproduces the joint distribution with the reference. The inner index
//! `C_i` is kept as key. Leakage to the reference is measured by drawing
//! `z^n` and enumerating `P(x^n | z^n)` exactly.

mod code;
mod distill;
mod quality;

use rand::distributions::{Distribution, WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use code::{bin_exponents, BinningCode};
pub use distill::{distill_key_from_shared, DistillReport};
pub use quality::{covering_quality, BinLevel, BinQuality, CoveringQuality};

use crate::dist::{mutual_information, total_variation, JointDistribution, DEFAULT_TABLE_BUDGET};
use crate::error::{Error, Result};
use crate::rates::merging_rate_entropic;
use crate::roles::Roles;
use crate::seed::{stream, Purpose};
use crate::sequences::{self, entropy_bits};
use crate::structure::is_bi_disjoint;

/// Normal quantile for the 95% confidence intervals.
const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    /// No key extraction; `inner_count` is 1.
    MergeOnly,
    MergeAndDistill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    /// Rate back-off in bits per symbol.
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    pub mode: SimMode,
    /// Maximum number of enumerated sequences.
    pub budget: usize,
    /// Overrides the outer-rate margin `δ` in `H(X|Y) + δ`. May be negative
    /// to run below the decoding threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_margin: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 10,
            delta: 0.1,
            trials: 1000,
            seed: 0,
            mode: SimMode::MergeAndDistill,
            budget: DEFAULT_TABLE_BUDGET,
            outer_margin: None,
        }
    }
}

impl SimConfig {
    pub fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "delta must be a nonnegative number, got {}",
                self.delta
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if matches!(self.outer_margin, Some(m) if !m.is_finite()) {
            return Err(Error::InvalidConfig("outer margin must be finite".into()));
        }
        Ok(())
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeParams {
    pub n: usize,
    pub outer_count: u64,
    pub inner_count: u64,
    pub occupied_outer: usize,
}

/// Both sides of the secrecy monotone, per symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotoneCheck {
    /// Consumed key plus `I(Y : XZ)`.
    pub before: f64,
    /// Plug-in `I(X̂Ŷ : Z)` plus `H(C_i) / n`.
    pub after: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: SimConfig,
    pub code_params: CodeParams,
    pub decode_error_rate: f64,
    /// Half-width of the 95% Wilson interval for the decode error rate.
    pub ci: f64,
    /// `I(C_o : Z^n) / n`.
    pub leakage_outer: Estimate,
    pub key_rate: f64,
    /// `I(C_i : Z^n C_o) / n`.
    pub key_leakage: Estimate,
    pub key_uniformity: f64,
    pub monotone_ok: bool,
    pub monotone: MonotoneCheck,
    /// Total variation between the per-symbol `(X̂, Ŷ, Z)` frequencies and
    /// the target distribution.
    pub merge_fidelity_tv: f64,
    /// Key consumed up front when the merging rate is positive.
    pub key_consumed_bits: u64,
    pub trials: usize,
    pub seed: u64,
}

/// Per-symbol view of `P_XYZ` with the tables the protocol needs.
pub(crate) struct Model {
    pub kx: usize,
    pub ky: usize,
    pub kz: usize,
    /// `P_XYZ` flattened as `(x · ky + y) · kz + z`.
    pub table: JointDistribution,
    pub p_x: Vec<f64>,
    pub p_z: Vec<f64>,
    /// `P_X|Z=z`, all zeros when `P(z) = 0`.
    pub x_given_z: Vec<Vec<f64>>,
}

impl Model {
    pub fn new(d: &JointDistribution, roles: &Roles) -> Result<Self> {
        d.ensure_valid()?;
        let table = roles.restrict(d)?;
        let shape = table.shape();
        let (kx, ky, kz) = (shape[0], shape[1], shape[2]);
        let xz = table.marginalize(&[roles.x(), roles.z()])?;
        let p_x = table.marginal_vector(&[roles.x()])?;
        let p_z = table.marginal_vector(&[roles.z()])?;
        let x_given_z = (0..kz)
            .map(|z| {
                if p_z[z] > 0.0 {
                    (0..kx).map(|x| xz.probs()[x * kz + z] / p_z[z]).collect()
                } else {
                    vec![0.0; kx]
                }
            })
            .collect();
        Ok(Model {
            kx,
            ky,
            kz,
            table,
            p_x,
            p_z,
            x_given_z,
        })
    }

    /// `P(x^n | z^n)` over all sender sequences.
    pub fn posterior(&self, z: &[usize]) -> Vec<f64> {
        let rows: Vec<&[f64]> = z.iter().map(|&zi| self.x_given_z[zi].as_slice()).collect();
        sequences::kronecker(&rows)
    }
}

struct Trial {
    error: bool,
    h_outer: f64,
    h_inner: f64,
    /// `(x̂, ŷ, z)` symbol counts.
    counts: Vec<u64>,
}

/// Runs `cfg.trials` independent executions of the protocol with `code`.
pub fn run_merging_protocol(
    d: &JointDistribution,
    roles: &Roles,
    code: &BinningCode,
    cfg: &SimConfig,
) -> Result<SimulationReport> {
    cfg.check()?;
    let (x, y, z) = (roles.x(), roles.y(), roles.z());
    let blocks = is_bi_disjoint(d, &[x, y], &[z])?.ok_or_else(|| Error::NotBiDisjoint {
        cut: format!("{x}{y}|{z}"),
    })?;
    let m = Model::new(d, roles)?;
    if code.n() != cfg.n || code.alphabet_size() != m.kx {
        return Err(Error::InvalidConfig(format!(
            "code is for n = {} over {} symbols, run needs n = {} over {}",
            code.n(),
            code.alphabet_size(),
            cfg.n,
            m.kx
        )));
    }
    let n = cfg.n;
    let (kx, ky, kz) = (m.kx, m.ky, m.kz);
    let cells = kx * ky * kz;

    let sampler = WeightedIndex::new(m.table.probs())
        .map_err(|e| Error::InvalidConfig(format!("cannot sample: {e}")))?;
    let p_xy = m.table.marginal_vector(&[x, y])?;
    let block_samplers: Vec<WeightedIndex<f64>> = (0..blocks.block_count())
        .map(|b| WeightedIndex::new(blocks.t_conditional(&p_xy, b)).expect("blocks have mass"))
        .collect();
    let log_x_given_y: Vec<Vec<f64>> = (0..ky)
        .map(|yi| {
            let col: Vec<f64> = (0..kx).map(|xi| p_xy[xi * ky + yi]).collect();
            let s: f64 = col.iter().sum();
            col.iter()
                .map(|&p| {
                    if p > 0.0 {
                        (p / s).log2()
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect()
        })
        .collect();

    let p_seq = sequences::power(&m.p_x, n);
    let h_outer_prior = entropy_bits(&code.outer_distribution(&p_seq));
    let p_inner = code.inner_distribution(&p_seq);
    let h_inner_prior = entropy_bits(&p_inner);
    let keyed = code.inner_count() > 1;

    let score = |seq: usize, ys: &[usize]| -> f64 {
        let mut s = 0.0;
        let mut rest = seq;
        for &yi in ys.iter().rev() {
            s += log_x_given_y[yi][rest % kx];
            rest /= kx;
        }
        s
    };

    let run_trial = |t: usize| -> Trial {
        let mut rng = stream(cfg.seed, Purpose::Trial, t as u64);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        let mut zs = Vec::with_capacity(n);
        for _ in 0..n {
            let c = sampler.sample(&mut rng);
            xs.push(c / (ky * kz));
            ys.push(c / kz % ky);
            zs.push(c % kz);
        }
        let seq = sequences::index_of(&xs, kx);
        let outer = code.outer_id(seq);

        let mut best = None;
        let mut best_score = f64::NEG_INFINITY;
        for &cand in code.members(outer) {
            let s = score(cand, &ys);
            if best.is_none() || s > best_score + 1e-9 {
                best = Some(cand);
                best_score = s;
            }
        }
        let decoded = best.expect("the true sequence is in its own bin");
        let x_hat = sequences::digits(decoded, kx, n);

        let mut counts = vec![0u64; cells];
        for i in 0..n {
            let t_idx = x_hat[i] * ky + ys[i];
            let (xo, yo) = match blocks.labels_t[t_idx] {
                Some(b) => {
                    let r = block_samplers[b].sample(&mut rng);
                    (r / ky, r % ky)
                }
                None => (x_hat[i], ys[i]),
            };
            counts[(xo * ky + yo) * kz + zs[i]] += 1;
        }

        let post = m.posterior(&zs);
        let mut by_outer = vec![0.0; code.occupied_outer()];
        for (s, &p) in post.iter().enumerate() {
            by_outer[code.outer_id(s)] += p;
        }
        let h_outer = entropy_bits(&by_outer);

        let h_inner = if keyed {
            let mut by_inner = vec![0.0; code.occupied_inner()];
            let mut mass = 0.0;
            for &s in code.members(outer) {
                by_inner[code.inner_id(s)] += post[s];
                mass += post[s];
            }
            by_inner.iter_mut().for_each(|p| *p /= mass);
            entropy_bits(&by_inner)
        } else {
            0.0
        };

        Trial {
            error: decoded != seq,
            h_outer,
            h_inner,
            counts,
        }
    };
    let trials: Vec<Trial> = (0..cfg.trials).into_par_iter().map(run_trial).collect();

    let t = cfg.trials as f64;
    let errors = trials.iter().filter(|r| r.error).count() as f64;
    let rate = errors / t;
    let mut counts = vec![0u64; cells];
    for r in &trials {
        for (a, b) in counts.iter_mut().zip(&r.counts) {
            *a += b;
        }
    }

    let estimate = |prior: f64, samples: Vec<f64>| -> Estimate {
        let (mean, sd) = mean_sd(&samples);
        Estimate {
            value: ((prior - mean) / n as f64).max(0.0),
            se: sd / t.sqrt() / n as f64,
        }
    };
    let leakage_outer = estimate(h_outer_prior, trials.iter().map(|r| r.h_outer).collect());
    let key_leakage = if keyed {
        estimate(h_inner_prior, trials.iter().map(|r| r.h_inner).collect())
    } else {
        Estimate {
            value: 0.0,
            se: 0.0,
        }
    };

    let total = counts.iter().sum::<u64>() as f64;
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
    let fidelity = JointDistribution::new(m.table.variables().to_vec(), empirical.clone())?;
    let merge_fidelity_tv = total_variation(&fidelity, &m.table)?;

    let rate_per_symbol = merging_rate_entropic(&m.table, roles)?;
    let key_consumed_bits = if rate_per_symbol > 1e-12 {
        (n as f64 * rate_per_symbol - 1e-9).ceil() as u64
    } else {
        0
    };
    let (plug_in, plug_se) = plug_in_information(&empirical, kx * ky, kz, total);
    let before = key_consumed_bits as f64 / n as f64 + mutual_information(&m.table, &[y], &[x, z])?;
    let after = plug_in + h_inner_prior / n as f64;
    let monotone = MonotoneCheck {
        before,
        after,
        se: plug_se,
    };

    Ok(SimulationReport {
        config: cfg.clone(),
        code_params: CodeParams {
            n,
            outer_count: code.outer_count(),
            inner_count: code.inner_count(),
            occupied_outer: code.occupied_outer(),
        },
        decode_error_rate: rate,
        ci: wilson_half_width(rate, t),
        leakage_outer,
        key_rate: code.key_rate(),
        key_leakage,
        key_uniformity: code.key_uniformity(&p_seq),
        monotone_ok: before >= after - 3.0 * plug_se - 1e-9,
        monotone,
        merge_fidelity_tv,
        key_consumed_bits,
        trials: cfg.trials,
        seed: cfg.seed,
    })
}

/// Builds the code for `cfg` and runs the protocol.
pub fn simulate(d: &JointDistribution, roles: &Roles, cfg: &SimConfig) -> Result<SimulationReport> {
    let code = BinningCode::build(d, roles, cfg)?;
    run_merging_protocol(d, roles, &code, cfg)
}

pub(crate) fn mean_sd(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

fn wilson_half_width(p: f64, t: f64) -> f64 {
    let z2 = Z95 * Z95;
    Z95 / (1.0 + z2 / t) * (p * (1.0 - p) / t + z2 / (4.0 * t * t)).sqrt()
}

/// Plug-in mutual information of an `a × b` frequency table and its
/// delta-method standard error over `samples` draws.
fn plug_in_information(p: &[f64], a: usize, b: usize, samples: f64) -> (f64, f64) {
    let pa: Vec<f64> = (0..a).map(|i| p[i * b..(i + 1) * b].iter().sum()).collect();
    let pb: Vec<f64> = (0..b).map(|j| (0..a).map(|i| p[i * b + j]).sum()).collect();
    let (mut m1, mut m2) = (0.0, 0.0);
    for i in 0..a {
        for j in 0..b {
            let q = p[i * b + j];
            if q > 0.0 {
                let l = (q / (pa[i] * pb[j])).log2();
                m1 += q * l;
                m2 += q * l * l;
            }
        }
    }
    let var = (m2 - m1 * m1).max(0.0);
    (m1.max(0.0), (var / samples).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;

    fn run(d: &JointDistribution, n: usize, delta: f64, trials: usize) -> SimulationReport {
        let cfg = SimConfig {
            n,
            delta,
            trials,
            seed: 11,
            ..SimConfig::default()
        };
        simulate(d, &Roles::default(), &cfg).unwrap()
    }

    #[test]
    fn wilson_interval_oracle() {
        // p = 0.5, t = 100: 1.96/(1+0.038416) * sqrt(0.0025 + 0.00009604)
        let w = wilson_half_width(0.5, 100.0);
        assert!((w - 0.096_170).abs() < 1e-5, "{w}");
        assert!(wilson_half_width(0.0, 2000.0) > 0.0);
    }

    #[test]
    fn plug_in_information_of_copies() {
        let (i, se) = plug_in_information(&[0.5, 0.0, 0.0, 0.5], 2, 2, 100.0);
        assert!((i - 1.0).abs() < 1e-12 && se < 1e-12);
        let (i, _) = plug_in_information(&[0.25; 4], 2, 2, 100.0);
        assert!(i.abs() < 1e-12);
    }

    #[test]
    fn key_is_extracted_from_correlated_bits() {
        let r = run(&builtins::ex2(), 12, 0.15, 200);
        assert!(r.key_rate >= 0.6);
        assert_eq!(r.decode_error_rate, 0.0);
        assert!(r.key_leakage.value <= 0.05);
        assert!(r.key_uniformity <= 0.1);
        assert_eq!(r.key_consumed_bits, 0);
        assert!(r.monotone_ok);
    }

    #[test]
    fn positive_rate_consumes_key() {
        let r = run(&builtins::ex1(), 10, 0.1, 200);
        assert_eq!(r.code_params.inner_count, 1);
        assert_eq!(r.key_rate, 0.0);
        assert_eq!(r.key_consumed_bits, 10);
        assert_eq!(r.decode_error_rate, 0.0);
        assert!(r.monotone_ok);
    }

    #[test]
    fn reproducible_for_a_seed() {
        let a = run(&builtins::ex3(), 8, 0.2, 100);
        let b = run(&builtins::ex3(), 8, 0.2, 100);
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_non_bi_disjoint_input() {
        let d = builtins::generic_perturbation(&builtins::ex3(), 1e-3);
        let cfg = SimConfig::default();
        assert!(matches!(
            simulate(&d, &Roles::default(), &cfg),
            Err(Error::NotBiDisjoint { .. })
        ));
    }

    #[test]
    fn code_must_match_run() {
        let d = builtins::ex3();
        let cfg = SimConfig {
            n: 6,
            ..SimConfig::default()
        };
        let code = BinningCode::build(&d, &Roles::default(), &cfg).unwrap();
        let other = SimConfig { n: 7, ..cfg };
        assert!(run_merging_protocol(&d, &Roles::default(), &code, &other).is_err());
    }
}
