//! Command-line front end: seeded sampling experiments, exact distances,
//! orbit partitions, tree decompositions and the verification check suite,
//! with machine-readable reports.
//!
//! Exit codes: 0 ok, 2 usage/config error, 3 resource cap exceeded,
//! 4 hard check failure.

mod config;

use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use config::{CheckSpec, ExperimentConfig, OutputFormat};
use treeirs::ratio::{rational_json, rational_string};
use treeirs::verify::{self, CheckReport};
use treeirs::{
    aut_distance, class_distance_at_depth, decompose, estimate_atom_mass,
    hausdorff_distance_approx, partition_distance, ray_distance, seeded_rng, Arity,
    ClosedSetApprox, Error, FinitaryAutomorphism, GeneratedSubgroup, LevelPartition,
    TruncatedDistance, VertexAddress, DEFAULT_ORDER_CAP,
};

const EXIT_USAGE: u8 = 2;
const EXIT_CAP: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "treeirs",
    about = "Experiments with finitary automorphism groups of rooted trees",
    version
)]
struct Cli {
    /// Experiment config JSON: a path, or `-` for stdin.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the config trial count.
    #[arg(long, global = true)]
    trials: Option<u64>,

    /// Overrides the config working depth.
    #[arg(long, global = true)]
    depth: Option<usize>,

    /// Overrides the config output format.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    /// Treat inconclusive statistical verdicts as failures.
    #[arg(long, global = true)]
    strict: bool,

    /// Include wall-clock timings in reports (off by default so identical
    /// configs produce byte-identical output).
    #[arg(long, global = true)]
    timings: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistanceKind {
    Ray,
    Aut,
    Partition,
    Set,
    Class,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sampler and report the fingerprint histogram.
    Sample,
    /// Run verification checks (the full committed suite by default).
    Verify {
        /// Comma-separated check names, or `all`.
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
    },
    /// Exact distance between two objects of the given kind.
    Distance {
        #[arg(long, value_enum)]
        kind: DistanceKind,
        /// First object: inline JSON or a file path (plain digit string for
        /// `--kind ray`).
        #[arg(long)]
        a: String,
        /// Second object, same conventions.
        #[arg(long)]
        b: String,
    },
    /// Orbit partition of generators acting on a level.
    Orbits {
        /// Inline JSON or path: array of portraits.
        #[arg(long)]
        generators: String,
        #[arg(long)]
        level: usize,
    },
    /// Decomposition of the tree with respect to a closed set.
    Decompose {
        /// Inline JSON or path: a closed set approximation.
        #[arg(long)]
        set: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Lib(err) => write!(f, "{err}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError::Lib(err)
    }
}

fn exit_code_for(err: &CliError) -> u8 {
    match err {
        CliError::Usage(_) => EXIT_USAGE,
        CliError::Lib(Error::OrderCapExceeded { .. }) => EXIT_CAP,
        CliError::Lib(_) => EXIT_USAGE,
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(trials) = cli.trials {
        config.trials = trials;
    }
    if let Some(depth) = cli.depth {
        config.depth = depth;
    }
    if let Some(format) = cli.format {
        config.format = match format {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Csv => OutputFormat::Csv,
        };
    }
    if cli.strict {
        config.strict = true;
    }
    config.validate().map_err(CliError::Usage)?;

    match cli.command {
        Command::Sample => cmd_sample(&config),
        Command::Verify { checks } => cmd_verify(&config, &checks, cli.timings),
        Command::Distance { kind, a, b } => cmd_distance(&config, kind, &a, &b),
        Command::Orbits { generators, level } => cmd_orbits(&config, &generators, level),
        Command::Decompose { set } => cmd_decompose(&set),
    }
}

fn load_config(path: Option<&std::path::Path>) -> Result<ExperimentConfig, CliError> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    let text = if path.as_os_str() == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| CliError::Usage(format!("reading stdin: {e}")))?;
        buf
    } else {
        std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("reading {}: {e}", path.display())))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config: {e}")))
}

/// Inline JSON if it parses, otherwise the contents of the file at the
/// given path.
fn load_json(input: &str) -> Result<Value, CliError> {
    if let Ok(value) = serde_json::from_str::<Value>(input) {
        return Ok(value);
    }
    let text = std::fs::read_to_string(input)
        .map_err(|e| CliError::Usage(format!("input {input:?} is neither JSON nor a readable file: {e}")))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("parsing {input}: {e}")))
}

fn parse_from<T: serde::de::DeserializeOwned>(input: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_value(load_json(input)?)
        .map_err(|e| CliError::Usage(format!("parsing {what}: {e}")))
}

fn cmd_sample(config: &ExperimentConfig) -> Result<ExitCode, CliError> {
    let sampler = config
        .sampler
        .clone()
        .ok_or_else(|| CliError::Usage("sample needs a sampler in the config".into()))?;
    let seed = config.require_seed().map_err(CliError::Usage)?;
    let depth = config.fingerprint_depth.unwrap_or(config.depth);
    let mut rng = seeded_rng(seed);
    let report = estimate_atom_mass(&sampler, config.trials, depth, &mut rng)?;

    let mut support: Vec<Value> = report
        .distribution
        .counts()
        .map(|(fp, count)| {
            json!({
                "fingerprint_hash": fp.hash_hex(),
                "count": count,
                "order": fp.order(),
            })
        })
        .collect();
    support.sort_by(|a, b| {
        a["fingerprint_hash"]
            .as_str()
            .cmp(&b["fingerprint_hash"].as_str())
    });

    match config.format {
        OutputFormat::Json => {
            let doc = json!({
                "command": "sample",
                "config": config,
                "sampler": sampler,
                "seed": seed,
                "trials": config.trials,
                "depth": depth,
                "support_size": report.support_size,
                "max_frequency": rational_json(&report.max_frequency),
                "support": support,
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
        }
        OutputFormat::Csv => {
            println!("fingerprint_hash,count");
            for row in &support {
                println!(
                    "{},{}",
                    row["fingerprint_hash"].as_str().expect("string"),
                    row["count"]
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(
    config: &ExperimentConfig,
    requested: &[String],
    timings: bool,
) -> Result<ExitCode, CliError> {
    let seed = config.seed.unwrap_or(0);
    let mut specs: Vec<CheckSpec> = Vec::new();
    let run_all = requested.is_empty() || requested.iter().any(|n| n == "all");
    if run_all {
        match &config.checks {
            Some(checks) => specs.extend(checks.iter().cloned()),
            None => {
                for (name, params) in verify::default_suite() {
                    specs.push(CheckSpec {
                        name: name.to_string(),
                        params,
                    });
                }
            }
        }
    } else {
        for name in requested {
            if !verify::CHECK_NAMES.contains(&name.as_str()) {
                return Err(CliError::Usage(format!("unknown check {name:?}")));
            }
            let params = config
                .checks
                .as_ref()
                .and_then(|cs| cs.iter().find(|c| &c.name == name))
                .map(|c| c.params.clone())
                .unwrap_or_else(|| json!({}));
            specs.push(CheckSpec {
                name: name.clone(),
                params,
            });
        }
    }
    specs.sort_by(|a, b| a.name.cmp(&b.name));

    let mut reports: Vec<CheckReport> = Vec::new();
    for spec in &specs {
        reports.push(verify::run_check(&spec.name, &spec.params, seed)?);
    }

    let any_fail = reports.iter().any(CheckReport::failed);
    let any_inconclusive = reports
        .iter()
        .any(|r| r.verdict == verify::Verdict::InconclusiveStatistical);

    let mut rendered: Vec<Value> = Vec::new();
    for report in &reports {
        let mut value = serde_json::to_value(report).expect("serializable");
        if !timings {
            value.as_object_mut().expect("object").remove("ms");
        }
        rendered.push(value);
    }
    let doc = json!({
        "command": "verify",
        "config": config,
        "seed": seed,
        "reports": rendered,
        "failures": reports.iter().filter(|r| r.failed()).count(),
        "inconclusive": reports
            .iter()
            .filter(|r| r.verdict == verify::Verdict::InconclusiveStatistical)
            .count(),
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));

    if any_fail || (config.strict && any_inconclusive) {
        Ok(ExitCode::from(EXIT_CHECK_FAILED))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn print_distance(kind: &str, distance: &TruncatedDistance) -> Result<ExitCode, CliError> {
    let doc = json!({
        "command": "distance",
        "kind": kind,
        "rational": rational_string(&distance.value),
        "decimal": treeirs::ratio::rational_f64(&distance.value),
        "agreed_level": distance.agreed_level,
        "equal_at_truncation": distance.equal_at_truncation,
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    Ok(ExitCode::SUCCESS)
}

fn cmd_distance(
    config: &ExperimentConfig,
    kind: DistanceKind,
    a: &str,
    b: &str,
) -> Result<ExitCode, CliError> {
    match kind {
        DistanceKind::Ray => {
            let d = Arity::new(config.d)?;
            let p = VertexAddress::parse(a.trim_matches('"'), d)?;
            let q = VertexAddress::parse(b.trim_matches('"'), d)?;
            let value = ray_distance(&p, &q)?;
            let doc = json!({
                "command": "distance",
                "kind": "ray",
                "rational": rational_string(&value),
                "decimal": treeirs::ratio::rational_f64(&value),
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
            Ok(ExitCode::SUCCESS)
        }
        DistanceKind::Aut => {
            let x: FinitaryAutomorphism = parse_from(a, "first portrait")?;
            let y: FinitaryAutomorphism = parse_from(b, "second portrait")?;
            let value = aut_distance(&x, &y)?;
            let doc = json!({
                "command": "distance",
                "kind": "aut",
                "rational": rational_string(&value),
                "decimal": treeirs::ratio::rational_f64(&value),
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
            Ok(ExitCode::SUCCESS)
        }
        DistanceKind::Partition => {
            let x: Vec<LevelPartition> = parse_from(a, "first partition sequence")?;
            let y: Vec<LevelPartition> = parse_from(b, "second partition sequence")?;
            let dist = partition_distance(&x, &y)?;
            print_distance("partition", &dist)
        }
        DistanceKind::Set => {
            let x: ClosedSetApprox = parse_from(a, "first set")?;
            let y: ClosedSetApprox = parse_from(b, "second set")?;
            let dist = hausdorff_distance_approx(&x, &y)?;
            print_distance("set", &dist)
        }
        DistanceKind::Class => {
            let x: ClosedSetApprox = parse_from(a, "first set")?;
            let y: ClosedSetApprox = parse_from(b, "second set")?;
            let group = config
                .group()
                .map_err(CliError::Usage)?
                .full_subgroup(DEFAULT_ORDER_CAP)
                .enumerate()?;
            let dist = class_distance_at_depth(&x, &y, &group)?;
            print_distance("class", &dist)
        }
    }
}

fn cmd_orbits(
    config: &ExperimentConfig,
    generators: &str,
    level: usize,
) -> Result<ExitCode, CliError> {
    let gens: Vec<FinitaryAutomorphism> = parse_from(generators, "generators")?;
    let group = config.group().map_err(CliError::Usage)?;
    let subgroup = GeneratedSubgroup::new(group, gens, DEFAULT_ORDER_CAP)?;
    let partition = subgroup.orbits(level)?;
    let doc = json!({
        "command": "orbits",
        "level": level,
        "partition": partition,
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    Ok(ExitCode::SUCCESS)
}

fn cmd_decompose(set: &str) -> Result<ExitCode, CliError> {
    let set: ClosedSetApprox = parse_from(set, "closed set")?;
    let descriptors = decompose(&set);
    let doc = json!({
        "command": "decompose",
        "set": set,
        "subtrees": descriptors,
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    Ok(ExitCode::SUCCESS)
}
