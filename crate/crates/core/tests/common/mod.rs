#![allow(dead_code)]

use distmerge::dist::{Alphabet, JointDistribution};
use rand::Rng;

pub fn xyz(kx: usize, ky: usize, kz: usize) -> Vec<Alphabet> {
    vec![
        Alphabet::new("X", kx).unwrap(),
        Alphabet::new("Y", ky).unwrap(),
        Alphabet::new("Z", kz).unwrap(),
    ]
}

/// Random probability vector of length `k`; each entry is zeroed with
/// probability `sparsity` (at least one entry survives).
pub fn random_simplex(rng: &mut impl Rng, k: usize, sparsity: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k)
            .map(|_| {
                if rng.gen_bool(sparsity) {
                    0.0
                } else {
                    rng.gen_range(0.05..1.0)
                }
            })
            .collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            return v.iter().map(|x| x / s).collect();
        }
    }
}

/// A distribution built from a known grouping of the `(x, y)` outcomes:
/// every group shares one conditional `P_Z|XY`. Returns the table and the
/// number of distinct conditionals that actually carry mass.
pub struct Grouped {
    pub d: JointDistribution,
    pub distinct_rows: usize,
    /// Group of each composite `(x, y)`, `None` when it has no mass.
    pub groups: Vec<Option<usize>>,
}

pub fn grouped(rng: &mut impl Rng, kx: usize, ky: usize, kz: usize) -> Grouped {
    let nt = kx * ky;
    let g = rng.gen_range(1..=nt.min(4));
    let rows: Vec<Vec<f64>> = (0..g).map(|_| random_simplex(rng, kz, 0.4)).collect();
    let mut weights = vec![0.0; nt];
    let mut groups = vec![None; nt];
    loop {
        for t in 0..nt {
            if rng.gen_bool(0.8) {
                weights[t] = rng.gen_range(0.05..1.0);
                groups[t] = Some(rng.gen_range(0..g));
            } else {
                weights[t] = 0.0;
                groups[t] = None;
            }
        }
        if weights.iter().any(|&w| w > 0.0) {
            break;
        }
    }
    let s: f64 = weights.iter().sum();
    let mut probs = vec![0.0; nt * kz];
    for t in 0..nt {
        if let Some(k) = groups[t] {
            for z in 0..kz {
                probs[t * kz + z] = weights[t] / s * rows[k][z];
            }
        }
    }
    let mut used: Vec<&Vec<f64>> = Vec::new();
    for k in groups.iter().flatten() {
        if !used.iter().any(|r| *r == &rows[*k]) {
            used.push(&rows[*k]);
        }
    }
    Grouped {
        d: JointDistribution::new(xyz(kx, ky, kz), probs).unwrap(),
        distinct_rows: used.len(),
        groups,
    }
}

/// Fully random table with some zero cells.
pub fn generic(rng: &mut impl Rng, kx: usize, ky: usize, kz: usize) -> JointDistribution {
    let p = random_simplex(rng, kx * ky * kz, 0.3);
    JointDistribution::new(xyz(kx, ky, kz), p).unwrap()
}

pub fn sizes(rng: &mut impl Rng) -> (usize, usize, usize) {
    (
        rng.gen_range(1..=4),
        rng.gen_range(1..=4),
        rng.gen_range(1..=4),
    )
}
