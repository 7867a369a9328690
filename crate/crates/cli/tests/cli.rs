use std::path::Path;
use std::process::{Command, Output};

use lyhjko_cli::config::ExperimentConfig;
use lyhjko_cli::manifest::{sha256_file, MANIFEST_NAME};
use lyhjko_cli::{BUILTIN, EXIT_CHECK, EXIT_PASS, EXIT_USAGE, SUMMARY_NAME};
use proptest::prelude::*;

fn lyhjko(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lyhjko"))
        .args(args)
        .env("LYHJKO_OUT", out)
        .output()
        .expect("binary runs")
}

fn builtin_text(name: &str) -> &'static str {
    BUILTIN.iter().find(|(n, _)| *n == name).unwrap().1
}

fn builtin(name: &str) -> ExperimentConfig {
    ExperimentConfig::parse(builtin_text(name)).unwrap()
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lyhjko(&["frobnicate"], dir.path()).status.code(), Some(EXIT_USAGE));
    assert_eq!(lyhjko(&[], dir.path()).status.code(), Some(EXIT_USAGE));
    assert_eq!(lyhjko(&["seq", "--jobs", "many"], dir.path()).status.code(), Some(EXIT_USAGE));
    assert_eq!(lyhjko(&["--help"], dir.path()).status.code(), Some(EXIT_PASS));
    let o = lyhjko(&["seq", "--config", "no-such-config"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no-such-config"));
}

#[test]
fn bad_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    let text = builtin_text("quick").replace("n = 64", "n = 64\nbogus = 1");
    std::fs::write(&cfg, text).unwrap();
    let o = lyhjko(&["seq", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 8"), "{err}");
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn step_beyond_threshold_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("big_tau.cfg");
    std::fs::write(&cfg, builtin_text("quick").replace("tau = 0.02", "tau = 0.5")).unwrap();
    let o = lyhjko(&["jko", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&o.stderr).contains("threshold"));
}

#[test]
fn duplicate_output_directories_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = lyhjko(&["seq", "--config", "quick", "--config", "quick"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
}

#[test]
fn quick_all_passes_and_manifest_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = lyhjko(&["all", "--config", "quick", "--seed", "11", "--jobs", "2"], &out);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(EXIT_PASS), "{stdout}\n{}", String::from_utf8_lossy(&o.stderr));
    assert!(!stdout.lines().any(|l| l.starts_with("FAIL")), "{stdout}");
    for sub in ["seq", "pde", "jko", "converge", "calibrate"] {
        assert!(stdout.contains(&format!("quick/{sub} ")), "no {sub} rows");
    }
    assert_eq!(std::fs::read_to_string(out.join(SUMMARY_NAME)).unwrap(), stdout);

    let manifest = std::fs::read_to_string(out.join(MANIFEST_NAME)).unwrap();
    let mut count = 0;
    for line in manifest.lines() {
        let (hash, rel) = line.split_once("  ").unwrap();
        assert_eq!(sha256_file(&out.join(rel)).unwrap(), hash, "{rel}");
        count += 1;
    }
    assert!(count > 20);
    assert!(manifest.contains("quick/jko/lyh_jko_sharp.csv"));

    // The stored config carries the seed override and parses back.
    let stored = std::fs::read_to_string(out.join("quick/config.cfg")).unwrap();
    let cfg = ExperimentConfig::parse(&stored).unwrap();
    assert_eq!(cfg.verify.seed, 11);
    let mut expected = builtin("quick");
    expected.verify.seed = 11;
    assert_eq!(cfg, expected);
}

#[test]
fn strict_mode_counts_informational_checks() {
    let dir = tempfile::tempdir().unwrap();
    let relaxed = lyhjko(&["jko", "--config", "quick"], &dir.path().join("a"));
    assert_eq!(relaxed.status.code(), Some(EXIT_PASS));
    let summary = String::from_utf8_lossy(&relaxed.stdout).to_string();
    let warns = summary.lines().filter(|l| l.starts_with("WARN")).count();
    let strict = lyhjko(&["jko", "--config", "quick", "--strict"], &dir.path().join("b"));
    let expected = if warns > 0 { EXIT_CHECK } else { EXIT_PASS };
    assert_eq!(strict.status.code(), Some(expected), "{summary}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_text_round_trips(
        n in prop_oneof![Just(32usize), Just(64), Just(128)],
        seed in any::<u64>(),
        tau_frac in 0.05..0.95f64,
        eps in 1e-4..1e-2f64,
        steps in 1usize..200,
        samples in 1usize..5000,
        slack in 0.0..0.1f64,
        kappa in 0.1..10.0f64,
        amp in -0.5..0.5f64,
        name in "[a-z][a-z0-9_]{0,11}",
    ) {
        let mut cfg = builtin("quick");
        cfg.scenario = name;
        cfg.n = n;
        cfg.verify.seed = seed;
        cfg.solver.eps = eps;
        cfg.verify.eps_ladder = vec![2.0 * eps, eps];
        cfg.solver.steps = steps;
        cfg.verify.harnack_samples = samples;
        cfg.verify.lyh_slack = slack;
        cfg.initial = lyhjko::torus::DensityFamily::VonMises { kappa, center: [0.25, 0.0] };
        cfg.v = lyhjko::torus::PotentialSpec::parse(1, &format!("cos[1]:{amp} sin[2]:{}", amp / 3.0)).unwrap();
        let lim = lyhjko::torus::potential_constants(&cfg.v, &cfg.w).tau_limit().min(0.05);
        cfg.solver.tau = tau_frac * lim;
        cfg.verify.tau_ladder = vec![2.0 * cfg.solver.tau, cfg.solver.tau];
        prop_assume!(cfg.validate().is_ok());
        let text = cfg.to_text();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
