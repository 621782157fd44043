//! Built-in example distributions over `X` (sender), `Y` (receiver) and
//! `Z` (reference).

use crate::dist::{Alphabet, JointDistribution};

const NAMES: [&str; 8] = [
    "ex1", "ex2", "ex3", "ghz_a", "ghz_b", "toy8", "exch", "product",
];

pub fn names() -> &'static [&'static str] {
    &NAMES
}

pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "ex1" => "sender's bit copied to the reference, receiver holds a constant",
        "ex2" => "one perfectly shared secret bit, trivial reference",
        "ex3" => "uniform bits, reference = parity of sender and receiver",
        "ghz_a" => "P(000) = P(111) = 1/2",
        "ghz_b" => "same table as ex3",
        "toy8" => "equal mixture of 111 122 212 221 333 344 434 443",
        "exch" => "P(000) = P(111) = P(012) = P(102) = 1/4",
        "product" => "perfectly correlated bits times an independent uniform reference bit",
        _ => return None,
    })
}

pub fn get(name: &str) -> Option<JointDistribution> {
    Some(match name {
        "ex1" => ex1(),
        "ex2" => ex2(),
        "ex3" | "ghz_b" => ex3(),
        "ghz_a" => ghz_a(),
        "toy8" => toy8(),
        "exch" => exch(),
        "product" => product(),
        _ => return None,
    })
}

pub fn all() -> Vec<(&'static str, JointDistribution)> {
    NAMES.iter().map(|&n| (n, get(n).unwrap())).collect()
}

fn xyz(sizes: [usize; 3]) -> Vec<Alphabet> {
    ["X", "Y", "Z"]
        .iter()
        .zip(sizes)
        .map(|(n, s)| Alphabet::new(*n, s).unwrap())
        .collect()
}

fn equal_mixture(sizes: [usize; 3], outcomes: &[[usize; 3]]) -> JointDistribution {
    let p = 1.0 / outcomes.len() as f64;
    JointDistribution::from_outcomes(xyz(sizes), outcomes.iter().map(|o| (&o[..], p))).unwrap()
}

pub fn ex1() -> JointDistribution {
    equal_mixture([2, 1, 2], &[[0, 0, 0], [1, 0, 1]])
}

pub fn ex2() -> JointDistribution {
    equal_mixture([2, 2, 1], &[[0, 0, 0], [1, 1, 0]])
}

pub fn ex3() -> JointDistribution {
    equal_mixture([2, 2, 2], &[[0, 1, 1], [0, 0, 0], [1, 0, 1], [1, 1, 0]])
}

pub fn ghz_a() -> JointDistribution {
    equal_mixture([2, 2, 2], &[[0, 0, 0], [1, 1, 1]])
}

/// Symbols `1..=4` are stored as indices `0..=3`.
pub fn toy8() -> JointDistribution {
    let triples = ["111", "122", "212", "221", "333", "344", "434", "443"];
    let outcomes: Vec<[usize; 3]> = triples
        .iter()
        .map(|t| {
            let b = t.as_bytes();
            [0, 1, 2].map(|i| (b[i] - b'1') as usize)
        })
        .collect();
    let symbols: Vec<String> = (1..=4).map(|i| i.to_string()).collect();
    let vars = ["X", "Y", "Z"]
        .iter()
        .map(|n| Alphabet::with_symbols(*n, symbols.clone()).unwrap())
        .collect();
    JointDistribution::from_outcomes(vars, outcomes.iter().map(|o| (&o[..], 0.125))).unwrap()
}

pub fn exch() -> JointDistribution {
    equal_mixture([2, 2, 3], &[[0, 0, 0], [1, 1, 1], [0, 1, 2], [1, 0, 2]])
}

pub fn product() -> JointDistribution {
    equal_mixture([2, 2, 2], &[[0, 0, 0], [0, 0, 1], [1, 1, 0], [1, 1, 1]])
}

/// Moves every cell of `d` by a distinct offset of magnitude at most
/// `scale` (upward on empty cells, alternating sign elsewhere) and
/// renormalizes. The result has full support and, for small `scale`,
/// pairwise distinct conditionals of any variable given the others.
pub fn generic_perturbation(d: &JointDistribution, scale: f64) -> JointDistribution {
    let len = d.len() as f64;
    let mut sign = 1.0;
    let mut probs: Vec<f64> = d
        .probs()
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let step = scale * (k as f64 + 1.0) / len;
            if p == 0.0 {
                step
            } else {
                sign = -sign;
                (p + sign * step).max(0.0)
            }
        })
        .collect();
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= s);
    JointDistribution::new(d.variables().to_vec(), probs).unwrap()
}
