//! Bi-disjoint structure, purification and the cloning criterion.
//!
//! A distribution of `T` and `Z` is bi-disjoint when its support graph
//! (an edge between `t` and `z` whenever `P(t, z) > 0`) splits into
//! components on each of which `P_TZ` is a product. The purified version of
//! `P_XYZ` replaces `Z` by the record `Zbar = Φ(x, y)` of which conditional
//! `P_Z|XY=xy` applies, together with the channel `Zbar → Z` that
//! regenerates `Z`.

use petgraph::unionfind::UnionFind;

use crate::dist::{apply_channel, Alphabet, ConditionalKernel, JointDistribution, SUPPORT_EPS};
use crate::error::Result;
use crate::roles::Roles;

/// Absolute tolerance for the per-block factorization test and for
/// comparing conditional rows.
pub const FACTOR_TOL: f64 = 1e-9;

/// The block label of a bi-disjoint distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecomposition {
    /// Composite alphabet of the `T` side.
    pub t: Alphabet,
    /// Composite alphabet of the `Z` side.
    pub z: Alphabet,
    /// Block of each `T` outcome, `None` off the support.
    pub labels_t: Vec<Option<usize>>,
    /// Block of each `Z` outcome, `None` off the support.
    pub labels_z: Vec<Option<usize>>,
    pub block_probs: Vec<f64>,
}

impl BlockDecomposition {
    pub fn block_count(&self) -> usize {
        self.block_probs.len()
    }

    /// `P_T|I=i` over the composite `T` alphabet.
    pub fn t_conditional(&self, p_t: &[f64], block: usize) -> Vec<f64> {
        let w = self.block_probs[block];
        self.labels_t
            .iter()
            .zip(p_t)
            .map(|(l, &p)| if *l == Some(block) { p / w } else { 0.0 })
            .collect()
    }
}

/// Decides whether `d` is bi-disjoint across the cut `t_vars | z_vars`.
/// Variables outside the cut are summed out first. Blocks are numbered by
/// their smallest `T` outcome.
pub fn is_bi_disjoint(
    d: &JointDistribution,
    t_vars: &[&str],
    z_vars: &[&str],
) -> Result<Option<BlockDecomposition>> {
    let mut keep = t_vars.to_vec();
    keep.extend_from_slice(z_vars);
    let joint = d.marginalize(&keep)?;
    let t = Alphabet::composite(&joint.variables()[..t_vars.len()]);
    let z = Alphabet::composite(&joint.variables()[t_vars.len()..]);
    let (nt, nz) = (t.size(), z.size());
    let p = joint.probs();
    let cell = |ti: usize, zi: usize| p[ti * nz + zi];

    let mut uf = UnionFind::<usize>::new(nt + nz);
    let mut has_edge = vec![false; nt + nz];
    for ti in 0..nt {
        for zi in 0..nz {
            if cell(ti, zi) > SUPPORT_EPS {
                uf.union(ti, nt + zi);
                has_edge[ti] = true;
                has_edge[nt + zi] = true;
            }
        }
    }

    let mut root_to_block: Vec<Option<usize>> = vec![None; nt + nz];
    let mut labels_t = vec![None; nt];
    let mut block_count = 0;
    for (ti, label) in labels_t.iter_mut().enumerate() {
        if !has_edge[ti] {
            continue;
        }
        let root = uf.find(ti);
        let b = *root_to_block[root].get_or_insert_with(|| {
            block_count += 1;
            block_count - 1
        });
        *label = Some(b);
    }
    let labels_z: Vec<Option<usize>> = (0..nz)
        .map(|zi| {
            if has_edge[nt + zi] {
                root_to_block[uf.find(nt + zi)]
            } else {
                None
            }
        })
        .collect();

    let p_t: Vec<f64> = (0..nt)
        .map(|ti| (0..nz).map(|zi| cell(ti, zi)).sum())
        .collect();
    let p_z: Vec<f64> = (0..nz)
        .map(|zi| (0..nt).map(|ti| cell(ti, zi)).sum())
        .collect();
    let mut block_probs = vec![0.0; block_count];
    for (ti, l) in labels_t.iter().enumerate() {
        if let Some(b) = l {
            block_probs[*b] += p_t[ti];
        }
    }

    for ti in 0..nt {
        let Some(b) = labels_t[ti] else { continue };
        for zi in 0..nz {
            if labels_z[zi] != Some(b) {
                continue;
            }
            let factored = p_t[ti] * p_z[zi] / block_probs[b];
            if (cell(ti, zi) - factored).abs() > FACTOR_TOL {
                return Ok(None);
            }
        }
    }

    Ok(Some(BlockDecomposition {
        t,
        z,
        labels_t,
        labels_z,
        block_probs,
    }))
}

/// The minimal bi-disjoint extension of a tripartite distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PurifiedDistribution {
    /// Distribution over sender, receiver and `Zbar`.
    pub base: JointDistribution,
    /// `Zbar → Z`; row `k` is the conditional shared by group `k`.
    pub channel: ConditionalKernel,
    /// `Zbar` symbol of each composite `(x, y)` index; `None` off the
    /// support.
    pub phi: Vec<Option<usize>>,
    pub roles: Roles,
}

impl PurifiedDistribution {
    pub fn zbar_name(&self) -> &str {
        self.base.variables()[2].name()
    }

    pub fn zbar_size(&self) -> usize {
        self.base.variables()[2].size()
    }

    /// `(id ⊗ Λ)` applied to the base, which reproduces the input.
    pub fn reconstruct(&self) -> Result<JointDistribution> {
        apply_channel(&self.base, self.zbar_name(), &self.channel)
    }

    /// Roles with the reference replaced by `Zbar`.
    pub fn purified_roles(&self) -> Roles {
        Roles::new(self.roles.x(), self.roles.y(), self.zbar_name())
    }
}

/// Groups `(x, y)` outcomes by their conditional `P_Z|XY` (entrywise within
/// [`FACTOR_TOL`] of the group's first member) and records one `Zbar`
/// symbol per group, numbered by smallest member.
pub fn purify(d: &JointDistribution, roles: &Roles) -> Result<PurifiedDistribution> {
    d.ensure_valid()?;
    let m = roles.restrict(d)?;
    let cond = m.condition(&[roles.x(), roles.y()])?;
    let nz = m.variables()[2].size();

    let mut representatives: Vec<Vec<f64>> = Vec::new();
    let mut sums: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut phi = vec![None; cond.rows.len()];
    for (t, row) in cond.rows.iter().enumerate() {
        let Some(row) = row else { continue };
        let w = cond.weights[t];
        let group = representatives
            .iter()
            .position(|r| rows_agree(r, row))
            .unwrap_or_else(|| {
                representatives.push(row.clone());
                sums.push(vec![0.0; nz]);
                weights.push(0.0);
                representatives.len() - 1
            });
        phi[t] = Some(group);
        weights[group] += w;
        for (s, q) in sums[group].iter_mut().zip(row) {
            *s += w * q;
        }
    }

    let groups = representatives.len();
    let zbar = Alphabet::new(format!("{}bar", roles.z()), groups)?;
    let rows: Vec<Vec<f64>> = sums
        .iter()
        .zip(&weights)
        .map(|(s, w)| {
            let mut r: Vec<f64> = s.iter().map(|x| x / w).collect();
            let total: f64 = r.iter().sum();
            r.iter_mut().for_each(|x| *x /= total);
            r
        })
        .collect();
    let channel = ConditionalKernel::new(zbar.clone(), m.variables()[2].clone(), rows)?;

    let mut variables = m.variables()[..2].to_vec();
    variables.push(zbar);
    let mut probs = vec![0.0; cond.rows.len() * groups];
    for (t, g) in phi.iter().enumerate() {
        if let Some(g) = g {
            probs[t * groups + g] = cond.weights[t];
        }
    }
    let base = JointDistribution::new(variables, probs)?;
    Ok(PurifiedDistribution {
        base,
        channel,
        phi,
        roles: roles.clone(),
    })
}

fn rows_agree(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= FACTOR_TOL)
}

/// Whether the sender could draw a fresh sample of `P_X|YZ` without
/// knowing `Y` and `Z`: every pair of conditionals must be equal or have
/// disjoint supports, which is bi-disjointness across `X | YZ`.
pub fn cloning_feasible(d: &JointDistribution, roles: &Roles) -> Result<bool> {
    Ok(is_bi_disjoint(d, &[roles.x()], &[roles.y(), roles.z()])?.is_some())
}
