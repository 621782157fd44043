use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use distmerge::builtins;
use distmerge::covering::{covering_sweep, SweepRow};
use distmerge::dist::{
    entropy, mutual_information, DistributionFile, JointDistribution, PhiRecord,
    DEFAULT_TABLE_BUDGET,
};
use distmerge::protocol::{
    distill_key_from_shared, simulate, SimConfig, SimMode, SimulationReport,
};
use distmerge::rates::{
    exchange_bounds, rate_report, wyner_common_information, MarkovOptimizerConfig,
};
use distmerge::structure::{cloning_feasible, is_bi_disjoint, purify};
use distmerge::{Error, Roles};

/// Secret-key cost of merging and exchanging private classical distributions.
#[derive(Parser)]
#[command(name = "distmerge", version, about)]
struct Cli {
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Maximum number of enumerated sequences.
    #[arg(long, global = true, default_value_t = DEFAULT_TABLE_BUDGET)]
    budget: usize,

    /// Variable held by the sender.
    #[arg(long, global = true, default_value = "X")]
    sender: String,

    /// Variable held by the receiver.
    #[arg(long, global = true, default_value = "Y")]
    receiver: String,

    /// Variable held by the reference.
    #[arg(long, global = true, default_value = "Z")]
    reference: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entropies, mutual informations, structure and rates.
    Info { source: String },
    /// Write the purified distribution with its channel and map.
    Purify {
        source: String,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merging rates in both directions.
    Rate { source: String },
    /// Simulate the binning protocol.
    MergeSim(MergeSimArgs),
    /// Hash a shared sender string into key against the reference.
    Distill {
        source: String,
        #[arg(long, default_value_t = 12)]
        n: usize,
        #[arg(long, default_value_t = 0.15)]
        delta: f64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Bounds on the cost of swapping sender and receiver shares.
    Exchange {
        source: String,
        #[command(flatten)]
        opt: OptimizerArgs,
    },
    /// Wyner common information of sender and receiver.
    Wyner {
        source: String,
        #[command(flatten)]
        opt: OptimizerArgs,
    },
    /// Covering lemma sweep with U = sender and V = receiver.
    Cover {
        source: String,
        /// Comma-separated block lengths.
        #[arg(long, value_delimiter = ',', default_value = "4,6,8,10")]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
    },
    /// Names of the built-in distributions.
    ListBuiltins,
}

#[derive(Args)]
struct MergeSimArgs {
    source: String,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::MergeAndDistill)]
    mode: ModeArg,
    /// Outer-rate margin; defaults to delta, may be negative.
    #[arg(long, allow_hyphen_values = true)]
    outer_margin: Option<f64>,
    /// Largest acceptable decode error rate.
    #[arg(long, default_value_t = 0.05)]
    max_error: f64,
    /// Largest acceptable key leakage in bits per symbol.
    #[arg(long, default_value_t = 0.05)]
    max_leakage: f64,
}

#[derive(Args)]
struct OptimizerArgs {
    /// Size of the auxiliary alphabet; |X||Y|+1 when absent.
    #[arg(long)]
    card: Option<usize>,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    MergeOnly,
    MergeAndDistill,
}

enum Failure {
    Threshold,
    Usage(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => Failure::Usage(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Threshold) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let roles = Roles::new(&cli.sender, &cli.receiver, &cli.reference);
    match &cli.command {
        Command::Info { source } => info(cli, &roles, source),
        Command::Purify { source, out } => cmd_purify(cli, &roles, source, out.as_deref()),
        Command::Rate { source } => rate(cli, &roles, source),
        Command::MergeSim(args) => merge_sim(cli, &roles, args),
        Command::Distill {
            source,
            n,
            delta,
            trials,
        } => {
            let d = load(source)?;
            let cfg = SimConfig {
                n: *n,
                delta: *delta,
                trials: *trials,
                seed: cli.seed,
                budget: cli.budget,
                ..SimConfig::default()
            };
            let r = distill_key_from_shared(&d, &roles, &cfg)?;
            emit(cli, &r, || {
                vec![
                    ("n".into(), r.n.to_string()),
                    ("H(X|Z)".into(), g6(r.conditional_entropy)),
                    ("output bits".into(), r.output_bits.to_string()),
                    ("uniformity TV".into(), g6(r.uniformity_tv)),
                    ("leakage".into(), pm(r.leakage.value, r.leakage.se)),
                    ("trials".into(), r.trials.to_string()),
                    ("seed".into(), r.seed.to_string()),
                ]
            });
            Ok(())
        }
        Command::Exchange { source, opt } => {
            let d = load(source)?;
            let b = exchange_bounds(&d, &roles, &optimizer(cli, opt))?;
            emit(cli, &b, || {
                vec![
                    ("sw_both_ways".into(), g6(b.sw_both_ways)),
                    ("wyner_xy".into(), g6(b.wyner_xy)),
                    ("wyner_yx".into(), g6(b.wyner_yx)),
                    ("lower_bound".into(), g6(b.lower_bound)),
                    ("best_upper_bound".into(), g6(b.best_upper_bound())),
                    ("common information".into(), g6(b.common_information.value)),
                    (
                        "residual I(X:Y|W)".into(),
                        g6(b.common_information.residual),
                    ),
                    ("purified".into(), yes_no(b.purified)),
                ]
            });
            Ok(())
        }
        Command::Wyner { source, opt } => {
            let d = load(source)?;
            let w = wyner_common_information(&d, roles.x(), roles.y(), &optimizer(cli, opt))?;
            emit(cli, &w, || {
                vec![
                    ("min I(XY:W)".into(), g6(w.value)),
                    ("residual I(X:Y|W)".into(), g6(w.residual)),
                    ("|W|".into(), w.cardinality_w.to_string()),
                    ("feasible restarts".into(), w.feasible_restarts.to_string()),
                    ("converged".into(), yes_no(w.converged)),
                ]
            });
            Ok(())
        }
        Command::Cover {
            source,
            n_list,
            gamma,
            seeds,
        } => {
            let d = load(source)?;
            let rows = covering_sweep(&d, roles.x(), roles.y(), n_list, *gamma, *seeds, cli.seed)?;
            if cli.json {
                print_json(&rows);
            } else {
                print!("{}", cover_table(&rows));
            }
            Ok(())
        }
        Command::ListBuiltins => {
            #[derive(Serialize)]
            struct Entry {
                name: &'static str,
                description: &'static str,
            }
            let entries: Vec<Entry> = builtins::names()
                .iter()
                .map(|&name| Entry {
                    name,
                    description: builtins::describe(name).unwrap_or(""),
                })
                .collect();
            if cli.json {
                print_json(&entries);
            } else {
                for e in &entries {
                    println!("{:<8} {}", e.name, e.description);
                }
            }
            Ok(())
        }
    }
}

fn load(source: &str) -> Result<JointDistribution, Failure> {
    let d = match source.strip_prefix("builtin:") {
        Some(name) => builtins::get(name).ok_or_else(|| {
            Failure::Input(format!(
                "unknown builtin `{name}`; available: {}",
                builtins::names().join(", ")
            ))
        })?,
        None => DistributionFile::read(Path::new(source))?.to_distribution()?,
    };
    d.ensure_valid()?;
    Ok(d)
}

fn optimizer(cli: &Cli, opt: &OptimizerArgs) -> MarkovOptimizerConfig {
    MarkovOptimizerConfig {
        cardinality_w: opt.card,
        restarts: opt.restarts,
        seed: cli.seed,
        ..MarkovOptimizerConfig::default()
    }
}

#[derive(Serialize)]
struct Quantity {
    name: String,
    value: f64,
}

#[derive(Serialize)]
struct InfoReport {
    source: String,
    variables: Vec<(String, usize)>,
    entropies: Vec<Quantity>,
    mutual_information: Vec<Quantity>,
    bi_disjoint: bool,
    blocks: Option<usize>,
    merging_rate: Option<f64>,
    merging_rate_reverse: Option<f64>,
    purified_rate: f64,
    purified_rate_reverse: f64,
    public_cost: f64,
    zbar_size: usize,
    cloning_feasible: bool,
}

fn info(cli: &Cli, roles: &Roles, source: &str) -> Result<(), Failure> {
    let d = load(source)?;
    let names = d.variable_names();
    let mut entropies = Vec::new();
    for (i, a) in names.iter().enumerate() {
        entropies.push(Quantity {
            name: format!("H({a})"),
            value: entropy(&d, &[a])?,
        });
        for b in &names[i + 1..] {
            entropies.push(Quantity {
                name: format!("H({a}{b})"),
                value: entropy(&d, &[a, b])?,
            });
        }
    }
    let mut mi = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            mi.push(Quantity {
                name: format!("I({a}:{b})"),
                value: mutual_information(&d, &[a], &[b])?,
            });
        }
    }
    let forward = rate_report(&d, roles)?;
    let reverse = rate_report(&d, &roles.reversed())?;
    let blocks = is_bi_disjoint(&d, &[roles.x(), roles.y()], &[roles.z()])?;
    let r = InfoReport {
        source: source.to_string(),
        variables: d
            .variables()
            .iter()
            .map(|a| (a.name().to_string(), a.size()))
            .collect(),
        entropies,
        mutual_information: mi,
        bi_disjoint: blocks.is_some(),
        blocks: blocks.map(|b| b.block_count()),
        merging_rate: forward.merging_rate,
        merging_rate_reverse: reverse.merging_rate,
        purified_rate: forward.purified_rate,
        purified_rate_reverse: reverse.purified_rate,
        public_cost: forward.public_cost,
        zbar_size: forward.zbar_size,
        cloning_feasible: cloning_feasible(&d, roles)?,
    };
    let (x, y, z) = (roles.x(), roles.y(), roles.z());
    emit(cli, &r, || {
        let mut lines = vec![
            ("source".into(), r.source.clone()),
            (
                "variables".into(),
                r.variables
                    .iter()
                    .map(|(n, s)| format!("{n}({s})"))
                    .collect::<Vec<_>>()
                    .join(" "),
            ),
        ];
        let mut owned: Vec<(String, String)> = r
            .entropies
            .iter()
            .chain(&r.mutual_information)
            .map(|q| (q.name.clone(), g6(q.value)))
            .collect();
        owned.push((
            format!("bi-disjoint {x}{y}|{z}"),
            match r.blocks {
                Some(b) => format!("yes, block count {b}"),
                None => "no".into(),
            },
        ));
        owned.push((format!("merging_rate {x}->{y}"), opt_g6(r.merging_rate)));
        owned.push((
            format!("merging_rate {y}->{x}"),
            opt_g6(r.merging_rate_reverse),
        ));
        owned.push((format!("purified_rate {x}->{y}"), g6(r.purified_rate)));
        owned.push((
            format!("purified_rate {y}->{x}"),
            g6(r.purified_rate_reverse),
        ));
        owned.push((format!("public_cost H({x}|{y})"), g6(r.public_cost)));
        owned.push((format!("|{z}bar|"), r.zbar_size.to_string()));
        owned.push(("cloning_feasible".into(), yes_no(r.cloning_feasible)));
        lines.extend(owned);
        lines
    });
    Ok(())
}

fn cmd_purify(cli: &Cli, roles: &Roles, source: &str, out: Option<&Path>) -> Result<(), Failure> {
    let d = load(source)?;
    let p = purify(&d, roles)?;
    let ny = p.base.variables()[1].size();
    let mut file = DistributionFile::from_distribution(&p.base).with_channel(&p.channel);
    file.phi = Some(
        p.phi
            .iter()
            .enumerate()
            .filter_map(|(t, g)| {
                g.map(|zbar| PhiRecord {
                    xy: vec![t / ny, t % ny],
                    zbar,
                })
            })
            .collect(),
    );
    match out {
        None => println!("{}", file.to_json()),
        Some(path) => {
            file.write(path)?;
            #[derive(Serialize)]
            struct Written<'a> {
                out: &'a Path,
                zbar_size: usize,
            }
            let w = Written {
                out: path,
                zbar_size: p.zbar_size(),
            };
            emit(cli, &w, || {
                vec![
                    ("wrote".into(), path.display().to_string()),
                    ("zbar_size".into(), p.zbar_size().to_string()),
                ]
            });
        }
    }
    Ok(())
}

fn rate(cli: &Cli, roles: &Roles, source: &str) -> Result<(), Failure> {
    let d = load(source)?;
    #[derive(Serialize)]
    struct Both {
        forward: distmerge::rates::RateReport,
        reverse: distmerge::rates::RateReport,
    }
    let both = Both {
        forward: rate_report(&d, roles)?,
        reverse: rate_report(&d, &roles.reversed())?,
    };
    emit(cli, &both, || {
        let mut lines = Vec::new();
        for r in [&both.forward, &both.reverse] {
            let dir = format!("{}->{}", r.sender, r.receiver);
            lines.push((format!("merging_rate {dir}"), opt_g6(r.merging_rate)));
            lines.push((format!("purified_rate {dir}"), g6(r.purified_rate)));
            lines.push((format!("public_cost {dir}"), g6(r.public_cost)));
        }
        lines
    });
    Ok(())
}

fn merge_sim(cli: &Cli, roles: &Roles, a: &MergeSimArgs) -> Result<(), Failure> {
    let d = load(&a.source)?;
    let cfg = SimConfig {
        n: a.n,
        delta: a.delta,
        trials: a.trials,
        seed: cli.seed,
        mode: match a.mode {
            ModeArg::MergeOnly => SimMode::MergeOnly,
            ModeArg::MergeAndDistill => SimMode::MergeAndDistill,
        },
        budget: cli.budget,
        outer_margin: a.outer_margin,
    };
    let r = simulate(&d, roles, &cfg)?;
    emit(cli, &r, || sim_lines(&r));
    let pass = r.decode_error_rate <= a.max_error && r.key_leakage.value <= a.max_leakage;
    if pass {
        Ok(())
    } else {
        Err(Failure::Threshold)
    }
}

fn sim_lines(r: &SimulationReport) -> Vec<(String, String)> {
    vec![
        ("n".into(), r.code_params.n.to_string()),
        ("outer_count".into(), r.code_params.outer_count.to_string()),
        ("inner_count".into(), r.code_params.inner_count.to_string()),
        ("decode_error_rate".into(), pm(r.decode_error_rate, r.ci)),
        (
            "leakage_outer".into(),
            pm(r.leakage_outer.value, r.leakage_outer.se),
        ),
        ("key_rate".into(), g6(r.key_rate)),
        (
            "key_leakage".into(),
            pm(r.key_leakage.value, r.key_leakage.se),
        ),
        ("key_uniformity".into(), g6(r.key_uniformity)),
        ("key_consumed_bits".into(), r.key_consumed_bits.to_string()),
        ("merge_fidelity_tv".into(), g6(r.merge_fidelity_tv)),
        (
            "monotone_ok".into(),
            format!(
                "{} (before {}, after {})",
                yes_no(r.monotone_ok),
                g6(r.monotone.before),
                g6(r.monotone.after)
            ),
        ),
        ("trials".into(), r.trials.to_string()),
        ("seed".into(), r.seed.to_string()),
    ]
}

fn cover_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("n\tcount\tmean_d\tmax_d\tse\tbound\tfraction_within\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.n,
            r.count,
            g6(r.mean_divergence),
            g6(r.max_divergence),
            g6(r.se),
            g6(r.bound),
            g6(r.fraction_within)
        ));
    }
    out
}

fn emit<T: Serialize>(cli: &Cli, value: &T, lines: impl FnOnce() -> Vec<(String, String)>) {
    if cli.json {
        print_json(value);
        return;
    }
    let lines = lines();
    let width = lines
        .iter()
        .map(|(k, _)| k.chars().count())
        .max()
        .unwrap_or(0);
    for (k, v) in lines {
        println!("{k:<width$}  {v}");
    }
}

fn print_json<T: Serialize + ?Sized>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("reports always serialize")
    );
}

fn yes_no(b: bool) -> String {
    if b { "yes" } else { "no" }.into()
}

fn pm(value: f64, se: f64) -> String {
    format!("{} ± {}", g6(value), g6(se))
}

fn opt_g6(v: Option<f64>) -> String {
    v.map(g6).unwrap_or_else(|| "n/a (not bi-disjoint)".into())
}

/// Six significant digits, trailing zeros removed.
fn g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if !(-4..6).contains(&exp) {
        let s = format!("{x:.5e}");
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        format!("{}e{e}", trim_zeros(mantissa))
    } else {
        trim_zeros(&format!("{:.*}", (5 - exp).max(0) as usize, x)).to_string()
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(g6(1.0), "1");
        assert_eq!(g6(-1.0), "-1");
        assert_eq!(g6(0.5), "0.5");
        assert_eq!(g6(2.0 / 3.0), "0.666667");
        assert_eq!(g6(123456.7), "123457");
        assert_eq!(g6(1.5e-7), "1.5e-7");
        assert_eq!(g6(-1e-17), "-1e-17");
        assert_eq!(g6(4.97972e-5), "4.97972e-5");
        assert_eq!(g6(0.000123), "0.000123");
        assert_eq!(g6(0.0), "0");
    }
}
