use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{SimConfig, SimMode};
use crate::dist::{conditional_entropy, mutual_information, JointDistribution};
use crate::error::{Error, Result};
use crate::roles::Roles;
use crate::seed::{stream, Purpose};
use crate::sequences;
use crate::structure::is_bi_disjoint;

/// Largest supported exponent of a bin count.
const MAX_BITS: i64 = 62;

/// Nested binning of all length-`n` sender sequences: an outer index `C_o`
/// that is broadcast, and an inner index `C_i` that becomes key.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningCode {
    n: usize,
    alphabet_size: usize,
    outer_count: u64,
    inner_count: u64,
    seed: u64,
    assignment: Vec<(u64, u64)>,
    outer_ids: Vec<usize>,
    inner_ids: Vec<usize>,
    outer_labels: Vec<u64>,
    inner_labels: Vec<u64>,
    members: Vec<Vec<usize>>,
}

/// `(outer, inner)` exponents: `⌈n(H(X|Y) + margin)⌉` and
/// `max(0, ⌊n(I(X:Y) − I(X:Z) − 2δ)⌋)`, the latter forced to 0 in
/// merge-only mode. The margin is `cfg.outer_margin`, defaulting to `δ`.
pub fn bin_exponents(d: &JointDistribution, roles: &Roles, cfg: &SimConfig) -> Result<(u32, u32)> {
    let (x, y, z) = (roles.x(), roles.y(), roles.z());
    let n = cfg.n as f64;
    let margin = cfg.outer_margin.unwrap_or(cfg.delta);
    let outer = (n * (conditional_entropy(d, &[x], &[y])? + margin) - 1e-9).ceil();
    let inner = match cfg.mode {
        SimMode::MergeOnly => 0.0,
        SimMode::MergeAndDistill => {
            let gap = mutual_information(d, &[x], &[y])? - mutual_information(d, &[x], &[z])?;
            (n * (gap - 2.0 * cfg.delta) + 1e-9).floor()
        }
    };
    let clamp = |v: f64| -> Result<u32> {
        let v = v.max(0.0) as i64;
        if v > MAX_BITS {
            return Err(Error::InvalidConfig(format!(
                "bin count 2^{v} exceeds 2^{MAX_BITS}"
            )));
        }
        Ok(v as u32)
    };
    Ok((clamp(outer)?, clamp(inner)?))
}

impl BinningCode {
    /// Random balanced binning with the configured counts. A seeded random
    /// permutation of the sequences is dealt round-robin over the
    /// `outer_count · inner_count` cells, so cell sizes differ by at most one.
    pub fn build(d: &JointDistribution, roles: &Roles, cfg: &SimConfig) -> Result<Self> {
        cfg.check()?;
        let (x, y, z) = (roles.x(), roles.y(), roles.z());
        if is_bi_disjoint(d, &[x, y], &[z])?.is_none() {
            return Err(Error::NotBiDisjoint {
                cut: format!("{x}{y}|{z}"),
            });
        }
        let k = d.variable(x)?.size();
        let total = sequences::checked_count("sender sequences", k, cfg.n, cfg.budget)?;
        let (ob, ib) = bin_exponents(d, roles, cfg)?;
        let (outer, inner) = (1u64 << ob, 1u64 << ib);

        let mut order: Vec<usize> = (0..total).collect();
        order.shuffle(&mut stream(cfg.seed, Purpose::Code, 0));
        let cells = outer as u128 * inner as u128;
        let mut assignment = vec![(0, 0); total];
        for (pos, &seq) in order.iter().enumerate() {
            let cell = pos as u128 % cells;
            assignment[seq] = (
                (cell % outer as u128) as u64,
                ((cell / outer as u128) % inner as u128) as u64,
            );
        }
        BinningCode::from_assignment(cfg.n, k, outer, inner, assignment, cfg.seed)
    }

    /// Deterministic binning that fills bins contiguously after sorting the
    /// sequences by symbol sum. Nearby sequences share a bin, which is the
    /// opposite of what secrecy needs.
    pub fn sorted(
        n: usize,
        alphabet_size: usize,
        outer: u64,
        inner: u64,
        budget: usize,
    ) -> Result<Self> {
        let total = sequences::checked_count("sender sequences", alphabet_size, n, budget)?;
        let mut order: Vec<usize> = (0..total).collect();
        order.sort_by_key(|&i| {
            (
                sequences::digits(i, alphabet_size, n).iter().sum::<usize>(),
                i,
            )
        });
        let (outer_w, inner_w) = (outer.max(1) as u128, inner.max(1) as u128);
        let mut assignment = vec![(0, 0); total];
        for (rank, &seq) in order.iter().enumerate() {
            let cell = rank as u128 * outer_w * inner_w / total as u128;
            assignment[seq] = ((cell / inner_w) as u64, (cell % inner_w) as u64);
        }
        BinningCode::from_assignment(n, alphabet_size, outer, inner, assignment, 0)
    }

    /// Wraps an explicit assignment, one `(outer, inner)` pair per sequence
    /// index.
    pub fn from_assignment(
        n: usize,
        alphabet_size: usize,
        outer_count: u64,
        inner_count: u64,
        assignment: Vec<(u64, u64)>,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 || alphabet_size == 0 || outer_count == 0 || inner_count == 0 {
            return Err(Error::InvalidConfig(
                "block length, alphabet size and bin counts must be positive".into(),
            ));
        }
        let total = sequences::count(alphabet_size, n);
        if assignment.len() as u128 != total {
            return Err(Error::ShapeMismatch(format!(
                "assignment has {} entries for {total} sequences",
                assignment.len()
            )));
        }
        if let Some((i, _)) = assignment
            .iter()
            .enumerate()
            .find(|(_, &(o, c))| o >= outer_count || c >= inner_count)
        {
            return Err(Error::InvalidConfig(format!(
                "sequence {i} assigned outside {outer_count}x{inner_count} bins"
            )));
        }

        let dense = |labels: Vec<u64>| -> (Vec<usize>, Vec<u64>) {
            let mut map = BTreeMap::new();
            for &l in &labels {
                map.insert(l, 0);
            }
            let names: Vec<u64> = map.keys().copied().collect();
            for (i, v) in map.values_mut().enumerate() {
                *v = i;
            }
            (labels.iter().map(|l| map[l]).collect(), names)
        };
        let (outer_ids, outer_labels) = dense(assignment.iter().map(|a| a.0).collect());
        let (inner_ids, inner_labels) = dense(assignment.iter().map(|a| a.1).collect());
        let mut members = vec![Vec::new(); outer_labels.len()];
        for (seq, &o) in outer_ids.iter().enumerate() {
            members[o].push(seq);
        }
        Ok(BinningCode {
            n,
            alphabet_size,
            outer_count,
            inner_count,
            seed,
            assignment,
            outer_ids,
            inner_ids,
            outer_labels,
            inner_labels,
            members,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn outer_count(&self) -> u64 {
        self.outer_count
    }

    pub fn inner_count(&self) -> u64 {
        self.inner_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sequence_count(&self) -> usize {
        self.assignment.len()
    }

    /// `(C_o, C_i)` of a sequence index.
    pub fn bin_of(&self, seq: usize) -> (u64, u64) {
        self.assignment[seq]
    }

    /// `log₂(inner_count) / n`.
    pub fn key_rate(&self) -> f64 {
        (self.inner_count as f64).log2() / self.n as f64
    }

    /// Number of outer bins that received at least one sequence.
    pub fn occupied_outer(&self) -> usize {
        self.outer_labels.len()
    }

    pub fn occupied_inner(&self) -> usize {
        self.inner_labels.len()
    }

    /// Dense id of the occupied outer bin holding `seq`.
    pub(crate) fn outer_id(&self, seq: usize) -> usize {
        self.outer_ids[seq]
    }

    pub(crate) fn inner_id(&self, seq: usize) -> usize {
        self.inner_ids[seq]
    }

    pub(crate) fn outer_label(&self, id: usize) -> u64 {
        self.outer_labels[id]
    }

    pub(crate) fn inner_label(&self, id: usize) -> u64 {
        self.inner_labels[id]
    }

    /// Members of an occupied outer bin in ascending index order.
    pub(crate) fn members(&self, outer_id: usize) -> &[usize] {
        &self.members[outer_id]
    }

    /// Exact distribution of the dense outer ids under `p_seq`.
    pub(crate) fn outer_distribution(&self, p_seq: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.occupied_outer()];
        for (seq, &p) in p_seq.iter().enumerate() {
            out[self.outer_ids[seq]] += p;
        }
        out
    }

    pub(crate) fn inner_distribution(&self, p_seq: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.occupied_inner()];
        for (seq, &p) in p_seq.iter().enumerate() {
            out[self.inner_ids[seq]] += p;
        }
        out
    }

    /// Total variation of the induced key distribution from uniform over
    /// all `inner_count` values.
    pub fn key_uniformity(&self, p_seq: &[f64]) -> f64 {
        let m = self.inner_count as f64;
        let occupied = self.inner_distribution(p_seq);
        let empty = (self.inner_count - occupied.len() as u64) as f64;
        0.5 * (occupied.iter().map(|p| (p - 1.0 / m).abs()).sum::<f64>() + empty / m)
    }
}
