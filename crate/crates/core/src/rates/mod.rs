//! Merging and exchange rates in secret-key bits per copy.
//!
//! A positive merging rate is key consumed; a negative one is key left over
//! once the sender's share has been transferred.

mod wyner;

use serde::Serialize;

pub use wyner::{wyner_common_information, MarkovOptimizerConfig, WynerSolution};

use crate::dist::{conditional_entropy, mutual_information, JointDistribution};
use crate::error::{Error, Result};
use crate::roles::Roles;
use crate::structure::{is_bi_disjoint, purify};

/// `I(X:Z) − I(X:Y)` for a distribution that is bi-disjoint across
/// `XY | Z`.
pub fn merging_rate(d: &JointDistribution, roles: &Roles) -> Result<f64> {
    let (x, y, z) = (roles.x(), roles.y(), roles.z());
    if is_bi_disjoint(d, &[x, y], &[z])?.is_none() {
        return Err(Error::NotBiDisjoint {
            cut: format!("{x}{y}|{z}"),
        });
    }
    Ok(mutual_information(d, &[x], &[z])? - mutual_information(d, &[x], &[y])?)
}

/// `H(X|Y) − H(X|Z)`, the entropic form of [`merging_rate`]. No structure
/// check.
pub fn merging_rate_entropic(d: &JointDistribution, roles: &Roles) -> Result<f64> {
    let (x, y, z) = (roles.x(), roles.y(), roles.z());
    Ok(conditional_entropy(d, &[x], &[y])? - conditional_entropy(d, &[x], &[z])?)
}

/// `H(X|Y) − H(X|Zbar)` computed on the purified version of `d`.
pub fn purified_merging_rate(d: &JointDistribution, roles: &Roles) -> Result<f64> {
    let p = purify(d, roles)?;
    merging_rate_entropic(&p.base, &p.purified_roles())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub sender: String,
    pub receiver: String,
    pub bi_disjoint: bool,
    pub blocks: Option<usize>,
    /// Present only for bi-disjoint inputs.
    pub merging_rate: Option<f64>,
    pub purified_rate: f64,
    /// `H(X|Y)`: public bits per copy.
    pub public_cost: f64,
    pub zbar_size: usize,
}

pub fn rate_report(d: &JointDistribution, roles: &Roles) -> Result<RateReport> {
    let (x, y, z) = (roles.x(), roles.y(), roles.z());
    let blocks = is_bi_disjoint(d, &[x, y], &[z])?;
    let merging_rate = match &blocks {
        Some(_) => Some(merging_rate(d, roles)?),
        None => None,
    };
    let p = purify(d, roles)?;
    Ok(RateReport {
        sender: x.to_string(),
        receiver: y.to_string(),
        bi_disjoint: blocks.is_some(),
        blocks: blocks.map(|b| b.block_count()),
        merging_rate,
        purified_rate: merging_rate_entropic(&p.base, &p.purified_roles())?,
        public_cost: conditional_entropy(d, &[x], &[y])?,
        zbar_size: p.zbar_size(),
    })
}

/// `key_bits + I(bob : others)`; cannot grow under local operations and
/// public communication.
pub fn secrecy_monotone(
    d: &JointDistribution,
    bob: &[&str],
    others: &[&str],
    key_bits: f64,
) -> Result<f64> {
    Ok(key_bits + mutual_information(d, bob, others)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExchangeBounds {
    /// `H(X|Y) + H(Y|X)`.
    pub sw_both_ways: f64,
    /// `I(X:Z) − I(X:Y) + min I(XY:W)`.
    pub wyner_xy: f64,
    /// `I(Y:Z) − I(X:Y) + min I(XY:W)`.
    pub wyner_yx: f64,
    /// Trivial floor; exchange never produces key.
    pub lower_bound: f64,
    pub common_information: WynerSolution,
    /// True when the input was not bi-disjoint and the bounds were taken on
    /// its purified version.
    pub purified: bool,
}

impl ExchangeBounds {
    /// Smallest upper bound, clamped at the lower bound.
    pub fn best_upper_bound(&self) -> f64 {
        self.sw_both_ways
            .min(self.wyner_xy)
            .min(self.wyner_yx)
            .max(self.lower_bound)
    }
}

pub fn exchange_bounds(
    d: &JointDistribution,
    roles: &Roles,
    cfg: &MarkovOptimizerConfig,
) -> Result<ExchangeBounds> {
    let (x, y, z) = (roles.x(), roles.y(), roles.z());
    let bi_disjoint = is_bi_disjoint(d, &[x, y], &[z])?.is_some();
    let (table, roles) = if bi_disjoint {
        (roles.restrict(d)?, roles.clone())
    } else {
        let p = purify(d, roles)?;
        let r = p.purified_roles();
        (p.base, r)
    };
    let (x, y, z) = (roles.x(), roles.y(), roles.z());
    let ixy = mutual_information(&table, &[x], &[y])?;
    let common = wyner_common_information(&table, x, y, cfg)?;
    Ok(ExchangeBounds {
        sw_both_ways: conditional_entropy(&table, &[x], &[y])?
            + conditional_entropy(&table, &[y], &[x])?,
        wyner_xy: mutual_information(&table, &[x], &[z])? - ixy + common.value,
        wyner_yx: mutual_information(&table, &[y], &[z])? - ixy + common.value,
        lower_bound: 0.0,
        common_information: common,
        purified: !bi_disjoint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;

    fn rate(d: &JointDistribution) -> f64 {
        merging_rate(d, &Roles::default()).unwrap()
    }

    #[test]
    fn worked_examples() {
        assert!((rate(&builtins::ex1()) - 1.0).abs() < 1e-12);
        assert!((rate(&builtins::ex2()) + 1.0).abs() < 1e-12);
        assert!(rate(&builtins::ex3()).abs() < 1e-12);
    }

    #[test]
    fn not_bi_disjoint_is_refused() {
        let d = builtins::generic_perturbation(&builtins::ex3(), 1e-3);
        assert!(matches!(
            merging_rate(&d, &Roles::default()),
            Err(Error::NotBiDisjoint { .. })
        ));
    }

    #[test]
    fn purified_rates() {
        let r = purified_merging_rate(&builtins::product(), &Roles::default()).unwrap();
        assert!((r + 1.0).abs() < 1e-12);

        let d = builtins::generic_perturbation(&builtins::ex3(), 1e-3);
        let r = purified_merging_rate(&d, &Roles::default()).unwrap();
        let h = conditional_entropy(&d, &["X"], &["Y"]).unwrap();
        assert!((r - h).abs() < 1e-9);

        let report = rate_report(&builtins::toy8(), &Roles::default()).unwrap();
        assert!(report.purified_rate.abs() < 1e-12);
        assert!((report.public_cost - 1.0).abs() < 1e-12);
    }

    #[test]
    fn both_forms_agree_on_builtins() {
        for (name, d) in builtins::all() {
            let a = rate(&d);
            let b = merging_rate_entropic(&d, &Roles::default()).unwrap();
            assert!((a - b).abs() < 1e-9, "{name}");
        }
    }

    #[test]
    fn secrecy_monotone_examples() {
        // Example 1: Bob starts with one key bit and no correlation, ends
        // with X̂Ŷ fully correlated to Z and no key.
        let ex1 = builtins::ex1();
        let before = secrecy_monotone(&ex1, &["Y"], &["X", "Z"], 1.0).unwrap();
        let after = secrecy_monotone(&ex1, &["X", "Y"], &["Z"], 0.0).unwrap();
        assert!((before - 1.0).abs() < 1e-12 && (after - 1.0).abs() < 1e-12);

        let ex2 = builtins::ex2();
        let before = secrecy_monotone(&ex2, &["Y"], &["X", "Z"], 0.0).unwrap();
        let after = secrecy_monotone(&ex2, &["X", "Y"], &["Z"], 1.0).unwrap();
        assert!((before - 1.0).abs() < 1e-12 && (after - 1.0).abs() < 1e-12);

        let ind = builtins::ex3().marginalize(&["X", "Z"]).unwrap();
        assert!(secrecy_monotone(&ind, &["X"], &["Z"], 0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn exchange_on_the_exchange_example() {
        let b = exchange_bounds(
            &builtins::exch(),
            &Roles::default(),
            &MarkovOptimizerConfig::default(),
        )
        .unwrap();
        assert!((b.sw_both_ways - 2.0).abs() < 1e-12);
        assert!((b.wyner_xy - 0.5).abs() < 1e-6, "{}", b.wyner_xy);
        assert!((b.wyner_yx - 0.5).abs() < 1e-6);
        assert!(!b.purified);
        let one_way = rate(&builtins::exch());
        assert!((one_way - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exchange_on_product_template() {
        let b = exchange_bounds(
            &builtins::product(),
            &Roles::default(),
            &MarkovOptimizerConfig::default(),
        )
        .unwrap();
        // 0 - 1 + C(X;Y) with C = 1 for identical bits
        assert!(b.wyner_xy.abs() < 1e-3);
        assert!(b.best_upper_bound() >= b.lower_bound);
    }

    #[test]
    fn exchange_uses_purification_when_needed() {
        let d = builtins::generic_perturbation(&builtins::ex3(), 1e-3);
        let cfg = MarkovOptimizerConfig {
            restarts: 4,
            ..Default::default()
        };
        let b = exchange_bounds(&d, &Roles::default(), &cfg).unwrap();
        assert!(b.purified);
        assert!(b.wyner_xy >= -1e-9 && b.sw_both_ways >= 0.0);
    }
}
