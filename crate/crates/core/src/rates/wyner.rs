//! Wyner common information `min I(XY:W)` over the Markov chain `X - W - Y`.
//!
//! The Markov constraint is handled with a penalty: for fixed `λ` we
//! minimize `F(q) = I(XY:W) + λ·I(X:Y|W)` over the kernel `q = P_W|XY`.
//! `F` is the minimum over auxiliary `(r, a, b)` of
//!
//! ```text
//! G = Σ p(xy) q(w|xy) [ (1+λ) log q(w|xy) − (1+λ) log r(w)
//!                        − λ log a(x|w) − λ log b(y|w) ] + const
//! ```
//!
//! attained at the marginals `r = P_W`, `a = P_X|W`, `b = P_Y|W`; for fixed
//! `(r, a, b)` the minimizing kernel is `q(w|xy) ∝ r(w)·(a(x|w) b(y|w))^{λ/(1+λ)}`.
//! Alternating the two steps never increases `F`. After the configured
//! schedule `λ` keeps growing by 4x until the residual `I(X:Y|W)` is within
//! tolerance.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{Alphabet, ConditionalKernel, JointDistribution, SUPPORT_EPS};
use crate::error::{Error, Result};
use crate::seed::{self, Purpose};

const LAMBDA_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovOptimizerConfig {
    /// `|W|`; `None` means `|X|·|Y| + 1`.
    pub cardinality_w: Option<usize>,
    pub restarts: usize,
    /// Iteration cap per penalty stage.
    pub max_iterations: usize,
    /// Stage ends when the penalized objective moves less than this.
    pub convergence_eps: f64,
    pub seed: u64,
    pub penalty_schedule: Vec<f64>,
    /// Largest `I(X:Y|W)` accepted as satisfying the Markov constraint.
    pub feasibility_tol: f64,
}

impl Default for MarkovOptimizerConfig {
    fn default() -> Self {
        MarkovOptimizerConfig {
            cardinality_w: None,
            restarts: 20,
            max_iterations: 5000,
            convergence_eps: 1e-9,
            seed: 0,
            penalty_schedule: vec![1.0, 4.0, 16.0, 64.0],
            feasibility_tol: 1e-6,
        }
    }
}

impl MarkovOptimizerConfig {
    fn check(&self) -> Result<()> {
        if self.cardinality_w == Some(0) {
            return Err(Error::InvalidConfig("cardinality_w must be >= 1".into()));
        }
        if self.convergence_eps <= 0.0 || self.convergence_eps.is_nan() {
            return Err(Error::InvalidConfig("convergence_eps must be > 0".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be >= 1".into()));
        }
        if self.penalty_schedule.is_empty() || self.penalty_schedule.iter().any(|&l| l <= 0.0) {
            return Err(Error::InvalidConfig(
                "penalty schedule must be a nonempty list of positive weights".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WynerSolution {
    /// `I(XY:W)` at the reported kernel, in bits.
    pub value: f64,
    /// `I(X:Y|W)` at the reported kernel.
    pub residual: f64,
    pub cardinality_w: usize,
    /// False when no restart reached the feasibility tolerance; the best
    /// infeasible point is reported instead.
    pub converged: bool,
    pub feasible_restarts: usize,
    #[serde(skip)]
    pub kernel: ConditionalKernel,
}

struct Problem {
    nx: usize,
    ny: usize,
    nw: usize,
    /// `(x, y, p)` for every support cell.
    cells: Vec<(usize, usize, f64)>,
}

struct Marginals {
    r: Vec<f64>,
    jx: Vec<f64>,
    jy: Vec<f64>,
}

impl Problem {
    fn marginals(&self, q: &[f64]) -> Marginals {
        let nw = self.nw;
        let mut m = Marginals {
            r: vec![0.0; nw],
            jx: vec![0.0; self.nx * nw],
            jy: vec![0.0; self.ny * nw],
        };
        for (t, &(x, y, p)) in self.cells.iter().enumerate() {
            for w in 0..nw {
                let j = p * q[t * nw + w];
                m.r[w] += j;
                m.jx[x * nw + w] += j;
                m.jy[y * nw + w] += j;
            }
        }
        m
    }

    /// `(I(XY:W), I(X:Y|W))`.
    fn evaluate(&self, q: &[f64]) -> (f64, f64) {
        let nw = self.nw;
        let m = self.marginals(q);
        let mut info = 0.0;
        let mut residual = 0.0;
        for (t, &(x, y, p)) in self.cells.iter().enumerate() {
            for w in 0..nw {
                let qw = q[t * nw + w];
                if qw <= 0.0 {
                    continue;
                }
                let j = p * qw;
                info += j * (qw / m.r[w]).log2();
                residual += j * (j * m.r[w] / (m.jx[x * nw + w] * m.jy[y * nw + w])).log2();
            }
        }
        (info.max(0.0), residual.max(0.0))
    }

    fn update(&self, q: &mut [f64], lambda: f64) {
        let nw = self.nw;
        let m = self.marginals(q);
        let e = lambda / (1.0 + lambda);
        for (t, &(x, y, _)) in self.cells.iter().enumerate() {
            let row = &mut q[t * nw..(t + 1) * nw];
            let mut total = 0.0;
            for (w, slot) in row.iter_mut().enumerate() {
                let r = m.r[w];
                *slot = if r > 0.0 && *slot > 0.0 {
                    let a = m.jx[x * nw + w] / r;
                    let b = m.jy[y * nw + w] / r;
                    r * (a * b).powf(e)
                } else {
                    0.0
                };
                total += *slot;
            }
            row.iter_mut().for_each(|v| *v /= total);
        }
    }

    fn random_kernel(&self, rng: &mut impl Rng) -> Vec<f64> {
        let nw = self.nw;
        let mut q = vec![0.0; self.cells.len() * nw];
        for row in q.chunks_mut(nw) {
            for v in row.iter_mut() {
                let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                *v = -u.ln();
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        q
    }
}

struct RestartResult {
    q: Vec<f64>,
    value: f64,
    residual: f64,
}

fn run_restart(problem: &Problem, cfg: &MarkovOptimizerConfig, index: usize) -> RestartResult {
    let mut rng = seed::stream(cfg.seed, Purpose::Optimizer, index as u64);
    let mut q = problem.random_kernel(&mut rng);
    let penalized = |(i, c): (f64, f64), lambda: f64| i + lambda * c;

    let stage = |q: &mut Vec<f64>, lambda: f64| {
        let mut prev = penalized(problem.evaluate(q), lambda);
        for _ in 0..cfg.max_iterations {
            problem.update(q, lambda);
            let f = penalized(problem.evaluate(q), lambda);
            if (prev - f).abs() < cfg.convergence_eps {
                break;
            }
            prev = f;
        }
    };

    for &lambda in &cfg.penalty_schedule {
        stage(&mut q, lambda);
    }
    let mut lambda = *cfg.penalty_schedule.last().unwrap();
    let (mut value, mut residual) = problem.evaluate(&q);
    while residual > cfg.feasibility_tol && lambda < LAMBDA_LIMIT {
        lambda *= 4.0;
        stage(&mut q, lambda);
        (value, residual) = problem.evaluate(&q);
    }
    RestartResult { q, value, residual }
}

/// Minimizes `I(XY:W)` subject to `I(X:Y|W) = 0` over `P_W|XY`.
pub fn wyner_common_information(
    d: &JointDistribution,
    x: &str,
    y: &str,
    cfg: &MarkovOptimizerConfig,
) -> Result<WynerSolution> {
    cfg.check()?;
    let m = d.marginalize(&[x, y])?;
    let (ax, ay) = (m.variables()[0].clone(), m.variables()[1].clone());
    let (nx, ny) = (ax.size(), ay.size());
    let nw = cfg.cardinality_w.unwrap_or(nx * ny + 1);
    let cells: Vec<(usize, usize, f64)> = m
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > SUPPORT_EPS)
        .map(|(i, &p)| (i / ny, i % ny, p))
        .collect();
    let total: f64 = cells.iter().map(|c| c.2).sum();
    let cells = cells
        .into_iter()
        .map(|(a, b, p)| (a, b, p / total))
        .collect();
    let problem = Problem { nx, ny, nw, cells };

    let results: Vec<RestartResult> = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| run_restart(&problem, cfg, i))
        .collect();

    let feasible_restarts = results
        .iter()
        .filter(|r| r.residual <= cfg.feasibility_tol)
        .count();
    let converged = feasible_restarts > 0;
    let best = results
        .iter()
        .filter(|r| !converged || r.residual <= cfg.feasibility_tol)
        .min_by(|a, b| {
            let key = |r: &RestartResult| {
                if converged {
                    r.value
                } else {
                    r.value + LAMBDA_LIMIT * r.residual
                }
            };
            key(a).total_cmp(&key(b))
        })
        .expect("at least one restart");

    let r = problem.marginals(&best.q).r;
    let mut rows = vec![r; nx * ny];
    for (t, &(x, y, _)) in problem.cells.iter().enumerate() {
        rows[x * ny + y] = best.q[t * nw..(t + 1) * nw].to_vec();
    }
    let kernel = ConditionalKernel::new(
        Alphabet::composite(&[ax, ay]),
        Alphabet::new("W", nw)?,
        rows,
    )?;
    Ok(WynerSolution {
        value: best.value,
        residual: best.residual,
        cardinality_w: nw,
        converged,
        feasible_restarts,
        kernel,
    })
}
