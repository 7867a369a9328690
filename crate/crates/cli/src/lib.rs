//! Command-line experiment runner. [`run`] is the whole binary; it returns the
//! process exit code (0 all checks pass, 1 a check failed, 2 bad usage or config).

pub mod config;
pub mod manifest;
pub mod runner;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use config::{ConfigError, ExperimentConfig};
use runner::{Job, Outcome, RunError, Sub};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const SUMMARY_NAME: &str = "summary.txt";

/// Configs compiled into the binary, addressable by name in `--config`.
pub const BUILTIN: &[(&str, &str)] = &[
    ("heat", include_str!("../../../configs/heat.cfg")),
    ("fp", include_str!("../../../configs/fp.cfg")),
    ("gm", include_str!("../../../configs/gm.cfg")),
    ("steady", include_str!("../../../configs/steady.cfg")),
    ("quick", include_str!("../../../configs/quick.cfg")),
];

/// Run when no `--config` is given. `steady` is left out: the splitting
/// solver's steady state is off the Gibbs state by O(dt^2), which the zero LYH
/// bound at equilibrium does not absorb.
pub const DEFAULT_SUITE: &[&str] = &["heat", "fp", "gm"];

#[derive(Debug, Parser)]
#[command(name = "lyhjko", version, about = "Semi-convexity and Harnack checks for the JKO scheme on the torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Config file, or the name of a built-in config. Repeatable.
    #[arg(long, global = true)]
    pub config: Vec<String>,
    /// Output root.
    #[arg(long, global = true, env = "LYHJKO_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Overrides `verify.seed` of every config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: one per hardware thread).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Treat informational checks as required.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Comparison sequence and recursion round trip.
    Seq,
    /// Continuous flow: LYH, Lipschitz, dissipation, Harnack.
    Pde,
    /// JKO flow: discrete comparison, one-step bound, descent, discrete Harnack.
    Jko,
    /// JKO to PDE convergence over the tau ladder.
    Converge,
    /// Slack budgets and the discrete Harnack constant.
    Calibrate,
    /// Calibrate, then every other subcommand with the frozen constant.
    All,
}

pub fn load_configs(specs: &[String], seed: Option<u64>) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let names: Vec<String> = if specs.is_empty() {
        DEFAULT_SUITE.iter().map(|s| s.to_string()).collect()
    } else {
        specs.to_vec()
    };
    let mut out = Vec::with_capacity(names.len());
    for spec in &names {
        let text = if Path::new(spec).is_file() {
            std::fs::read_to_string(spec)?
        } else if let Some((_, t)) = BUILTIN.iter().find(|(n, _)| n == spec) {
            t.to_string()
        } else {
            return Err(ConfigError::Invalid(format!("no config file or built-in named '{spec}'")));
        };
        let mut cfg = ExperimentConfig::parse(&text).map_err(|e| match e {
            ConfigError::Parse { line, msg } => ConfigError::Parse { line, msg: format!("{spec}: {msg}") },
            ConfigError::Invalid(m) => ConfigError::Invalid(format!("{spec}: {m}")),
            e => e,
        })?;
        if let Some(s) = seed {
            cfg.verify.seed = s;
        }
        out.push(cfg);
    }
    let mut dirs: Vec<&str> = out.iter().map(dir_name).collect();
    dirs.sort_unstable();
    if let Some(w) = dirs.windows(2).find(|w| w[0] == w[1]) {
        return Err(ConfigError::Invalid(format!("two configs write to the same directory '{}'", w[0])));
    }
    Ok(out)
}

fn dir_name(cfg: &ExperimentConfig) -> &str {
    cfg.out_dir.as_deref().unwrap_or(&cfg.scenario)
}

type JobResult = (String, Result<Outcome, RunError>);

fn run_jobs(root: &Path, cfgs: &[ExperimentConfig], subs: &[Sub], harnack_c: Option<f64>) -> Vec<JobResult> {
    let jobs: Vec<(&ExperimentConfig, Sub)> =
        cfgs.iter().flat_map(|c| subs.iter().map(move |&s| (c, s))).collect();
    jobs.par_iter()
        .map(|&(cfg, sub)| {
            let name = format!("{}/{}", dir_name(cfg), sub.name());
            let job = Job { cfg, dir: root.join(&name), harnack_c };
            (name, runner::run(sub, &job))
        })
        .collect()
}

/// Zero potentials: the configuration the discrete Harnack constant is frozen on.
fn is_heat(cfg: &ExperimentConfig) -> bool {
    cfg.v.is_zero() && cfg.w.is_zero()
}

fn execute(cli: &Cli, cfgs: &[ExperimentConfig]) -> Result<(Vec<JobResult>, Vec<PathBuf>, Option<f64>), RunError> {
    let root = cli.out.as_path();
    let mut extra = Vec::new();
    for cfg in cfgs {
        let dir = root.join(dir_name(cfg));
        std::fs::create_dir_all(&dir)?;
        let p = dir.join("config.cfg");
        std::fs::write(&p, cfg.to_text())?;
        extra.push(p);
    }
    let single = |s: Sub| run_jobs(root, cfgs, &[s], None);
    Ok(match cli.command {
        Command::Seq => (single(Sub::Seq), extra, None),
        Command::Pde => (single(Sub::Pde), extra, None),
        Command::Jko => (single(Sub::Jko), extra, None),
        Command::Converge => (single(Sub::Converge), extra, None),
        Command::Calibrate => (single(Sub::Calibrate), extra, None),
        Command::All => {
            let mut results = run_jobs(root, cfgs, &[Sub::Calibrate], None);
            let frozen = cfgs
                .iter()
                .zip(&results)
                .find(|(c, _)| is_heat(c))
                .and_then(|(_, (_, r))| r.as_ref().ok().and_then(|o| o.harnack_c));
            results.extend(run_jobs(root, cfgs, &[Sub::Seq, Sub::Pde, Sub::Jko, Sub::Converge], frozen));
            (results, extra, frozen)
        }
    })
}

/// Deterministic run summary and whether every counted check passed.
pub fn summarize(results: &[JobResult], strict: bool, frozen_c: Option<f64>) -> (String, bool) {
    let mut sorted: Vec<&JobResult> = results.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut s = String::new();
    let mut ok = true;
    if let Some(c) = frozen_c {
        let _ = writeln!(s, "harnack_c = {c}");
    }
    for (name, r) in sorted {
        match r {
            Ok(o) => {
                for c in &o.checks {
                    let counted = c.required || strict;
                    ok &= c.pass || !counted;
                    let tag = match (c.pass, counted) {
                        (true, _) => "PASS",
                        (false, true) => "FAIL",
                        (false, false) => "WARN",
                    };
                    let kind = if c.required { "required" } else { "info" };
                    let _ = writeln!(s, "{tag} {name} {} [{kind}] {}", c.name, c.detail);
                }
                if let Some(c) = o.harnack_c {
                    let _ = writeln!(s, "INFO {name} harnack_c {c}");
                }
            }
            Err(e) => {
                ok = false;
                let _ = writeln!(s, "FAIL {name} error: {e}");
            }
        }
    }
    (s, ok)
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let cfgs = match load_configs(&cli.config, cli.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_USAGE;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("thread pool: {e}");
            return EXIT_USAGE;
        }
    };
    let (results, extra, frozen) = match pool.install(|| execute(&cli, &cfgs)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CHECK;
        }
    };
    let (summary, ok) = summarize(&results, cli.strict, frozen);
    print!("{summary}");
    for (name, r) in &results {
        if let Ok(o) = r {
            for c in o.checks.iter().filter(|c| !c.pass && (c.required || cli.strict)) {
                for row in &c.failing {
                    eprintln!("{name} {}: {row}", c.name);
                }
            }
        }
    }
    let mut files = extra;
    files.extend(results.iter().filter_map(|(_, r)| r.as_ref().ok()).flat_map(|o| o.artifacts.iter().cloned()));
    let summary_path = cli.out.join(SUMMARY_NAME);
    let written = std::fs::write(&summary_path, &summary).and_then(|_| {
        files.push(summary_path.clone());
        let m = manifest::manifest(&cli.out, &files)?;
        std::fs::write(cli.out.join(manifest::MANIFEST_NAME), m)
    });
    if let Err(e) = written {
        eprintln!("error writing {}: {e}", cli.out.display());
        return EXIT_CHECK;
    }
    if ok {
        EXIT_PASS
    } else {
        EXIT_CHECK
    }
}
