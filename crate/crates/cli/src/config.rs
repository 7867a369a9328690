//! Experiment configuration: flat `key = value` text with `[section]` headers
//! and a leading `schema=1` line.
//!
//! ```text
//! schema=1
//! [scenario]
//! name = fp
//! [grid]
//! dim = 1
//! n = 256
//! [potentials]
//! V = cos[1]:2e-1
//! W = 0
//! ...
//! ```
//!
//! Missing keys take the defaults of [`ExperimentConfig::default`], which are
//! read from the library option types. [`ExperimentConfig::to_text`] writes
//! every key, so `to_text(parse(s)) == s` for any text it produced.

use std::fmt::Write as _;

use lyhjko::jko::JkoOptions;
use lyhjko::torus::{DensityFamily, PeriodicGrid, PotentialSpec, Potentials};
use lyhjko::transport::EPS_FLOOR;
use lyhjko::verify::{HarnackOptions, Lambda0Mode};

pub const SCHEMA: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read configuration: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    /// PDE time step.
    pub dt: f64,
    /// PDE horizon.
    pub t_end: f64,
    /// Spacing of stored PDE snapshots.
    pub snapshot_dt: f64,
    pub tau: f64,
    pub eps: f64,
    /// Number of JKO steps `K`.
    pub steps: usize,
    pub jko_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyParams {
    pub lambda0: Lambda0Mode,
    /// First snapshot time checked by the continuous LYH and Lipschitz reports.
    pub t_min: f64,
    /// Relative slack of the continuous LYH check.
    pub lyh_slack: f64,
    /// Relative slack of the gradient bound.
    pub lip_slack: f64,
    /// Start of the envelope and discrete Harnack windows.
    pub t0: f64,
    /// Envelope inflation `1 + eps`.
    pub env_eps: f64,
    /// Slack of `G[tau lambda1+] - tau lambda0+ <= 0`.
    pub one_step_slack: f64,
    /// Absolute slack of the discrete comparison check.
    pub comparison_slack: f64,
    pub harnack_samples: usize,
    pub path_segments: usize,
    pub path_sweeps: usize,
    /// Exponent inflation of the discrete Harnack factor.
    pub harnack_eps: f64,
    /// Discrete Harnack constant (replaced by the calibrated value in `all`).
    pub harnack_c: f64,
    /// Required pass rate of the discrete Harnack check.
    pub harnack_min_rate: f64,
    pub seed: u64,
    pub tau_ladder: Vec<f64>,
    pub eps_ladder: Vec<f64>,
    pub refine_ns: Vec<usize>,
    pub conv_t0: f64,
    pub conv_t_end: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub dim: usize,
    pub n: usize,
    pub v: PotentialSpec,
    pub w: PotentialSpec,
    pub initial: DensityFamily,
    pub solver: SolverParams,
    pub verify: VerifyParams,
    /// Output directory relative to the output root (defaults to the scenario name).
    pub out_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let jko = JkoOptions::default();
        let har = HarnackOptions::default();
        Self {
            scenario: "heat".into(),
            dim: 1,
            n: 256,
            v: PotentialSpec::zero(1),
            w: PotentialSpec::zero(1),
            initial: DensityFamily::HeatKernel { width: 0.005, center: [0.5, 0.0] },
            solver: SolverParams {
                dt: 1e-4,
                t_end: 1.0,
                snapshot_dt: 0.01,
                tau: 0.02,
                eps: jko.eps,
                steps: 50,
                jko_tol: jko.tol,
            },
            verify: VerifyParams {
                lambda0: Lambda0Mode::Measured,
                t_min: 0.01,
                lyh_slack: 0.05,
                lip_slack: 0.05,
                t0: 0.1,
                env_eps: 0.1,
                one_step_slack: 5e-3,
                comparison_slack: 5e-2,
                harnack_samples: har.samples,
                path_segments: har.segments,
                path_sweeps: har.sweeps,
                harnack_eps: 0.1,
                harnack_c: 0.0,
                harnack_min_rate: 1.0,
                seed: har.seed,
                tau_ladder: vec![0.04, 0.02, 0.01],
                eps_ladder: vec![2e-3, 1e-3, 5e-4],
                refine_ns: vec![128, 256, 512, 1024],
                conv_t0: 0.1,
                conv_t_end: 0.5,
            },
            out_dir: None,
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn family_keys(f: &DensityFamily, dim: usize) -> Vec<(&'static str, String)> {
    let center = |c: &[f64; 2]| join(&c[..dim]);
    match f {
        DensityFamily::Uniform => vec![("family", "uniform".into())],
        DensityFamily::Cosine { amplitude, freq } => vec![
            ("family", "cosine".into()),
            ("amplitude", amplitude.to_string()),
            ("freq", join(&freq[..dim])),
        ],
        DensityFamily::VonMises { kappa, center: c } => vec![
            ("family", "von_mises".into()),
            ("kappa", kappa.to_string()),
            ("center", center(c)),
        ],
        DensityFamily::HeatKernel { width, center: c } => vec![
            ("family", "heat_kernel".into()),
            ("width", width.to_string()),
            ("center", center(c)),
        ],
        DensityFamily::Gibbs => vec![("family", "gibbs".into())],
    }
}

impl ExperimentConfig {
    /// Canonical text form.
    pub fn to_text(&self) -> String {
        let s = &self.solver;
        let v = &self.verify;
        let mut out = format!("schema={SCHEMA}\n");
        let mut section = |name: &str, kv: Vec<(&str, String)>| {
            let _ = writeln!(out, "[{name}]");
            for (k, val) in kv {
                let _ = writeln!(out, "{k} = {val}");
            }
        };
        section("scenario", vec![("name", self.scenario.clone())]);
        section("grid", vec![("dim", self.dim.to_string()), ("n", self.n.to_string())]);
        section("potentials", vec![("V", self.v.to_string()), ("W", self.w.to_string())]);
        section("initial", family_keys(&self.initial, self.dim));
        section(
            "solver",
            vec![
                ("dt", s.dt.to_string()),
                ("t_end", s.t_end.to_string()),
                ("snapshot_dt", s.snapshot_dt.to_string()),
                ("tau", s.tau.to_string()),
                ("eps", s.eps.to_string()),
                ("steps", s.steps.to_string()),
                ("jko_tol", s.jko_tol.to_string()),
            ],
        );
        section(
            "verify",
            vec![
                ("lambda0", v.lambda0.name().into()),
                ("t_min", v.t_min.to_string()),
                ("lyh_slack", v.lyh_slack.to_string()),
                ("lip_slack", v.lip_slack.to_string()),
                ("t0", v.t0.to_string()),
                ("env_eps", v.env_eps.to_string()),
                ("one_step_slack", v.one_step_slack.to_string()),
                ("comparison_slack", v.comparison_slack.to_string()),
                ("harnack_samples", v.harnack_samples.to_string()),
                ("path_segments", v.path_segments.to_string()),
                ("path_sweeps", v.path_sweeps.to_string()),
                ("harnack_eps", v.harnack_eps.to_string()),
                ("harnack_c", v.harnack_c.to_string()),
                ("harnack_min_rate", v.harnack_min_rate.to_string()),
                ("seed", v.seed.to_string()),
                ("tau_ladder", join(&v.tau_ladder)),
                ("eps_ladder", join(&v.eps_ladder)),
                ("refine_ns", join(&v.refine_ns)),
                ("conv_t0", v.conv_t0.to_string()),
                ("conv_t_end", v.conv_t_end.to_string()),
            ],
        );
        if let Some(d) = &self.out_dir {
            section("output", vec![("dir", d.clone())]);
        }
        out
    }

    /// Parses and validates.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg = Self::parse_unchecked(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without checking module preconditions.
    pub fn parse_unchecked(text: &str) -> Result<Self, ConfigError> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        let mut section = String::new();
        let mut schema_seen = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| ConfigError::Parse { line: line_no, msg };
            if !schema_seen {
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| perr("expected 'schema=1' first".into()))?;
                if k.trim() != "schema" {
                    return Err(perr("expected 'schema=1' first".into()));
                }
                if v.trim() != SCHEMA.to_string() {
                    return Err(perr(format!("unsupported schema '{}'", v.trim())));
                }
                schema_seen = true;
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| perr(format!("expected 'key = value', got '{line}'")))?;
            if section.is_empty() {
                return Err(perr("key outside of a section".into()));
            }
            let key = format!("{section}.{}", k.trim());
            if entries.iter().any(|(_, kk, _)| *kk == key) {
                return Err(perr(format!("duplicate key {key}")));
            }
            entries.push((line_no, key, v.trim().to_string()));
        }
        if !schema_seen {
            return Err(ConfigError::Parse { line: 1, msg: "missing 'schema=1' header".into() });
        }
        let mut cfg = Self::default();
        let get = |key: &str| entries.iter().find(|(_, k, _)| k == key).map(|(l, _, v)| (*l, v.as_str()));
        fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
            v.parse().map_err(|_| ConfigError::Parse { line, msg: format!("bad value '{v}' for {key}") })
        }
        fn list<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>, ConfigError> {
            v.split(',').map(|x| num(line, key, x.trim())).collect()
        }
        macro_rules! set {
            ($key:expr, $field:expr) => {
                if let Some((l, v)) = get($key) {
                    $field = num(l, $key, v)?;
                }
            };
        }
        macro_rules! set_list {
            ($key:expr, $field:expr) => {
                if let Some((l, v)) = get($key) {
                    $field = list(l, $key, v)?;
                }
            };
        }
        if let Some((_, v)) = get("scenario.name") {
            cfg.scenario = v.to_string();
        }
        set!("grid.dim", cfg.dim);
        set!("grid.n", cfg.n);
        let dim = cfg.dim;
        for (key, slot) in [("potentials.V", &mut cfg.v), ("potentials.W", &mut cfg.w)] {
            *slot = match get(key) {
                Some((l, v)) => PotentialSpec::parse(dim, v)
                    .map_err(|e| ConfigError::Parse { line: l, msg: e.to_string() })?,
                None => PotentialSpec::zero(dim),
            };
        }
        cfg.initial = parse_family(&get, dim)?;
        let s = &mut cfg.solver;
        set!("solver.dt", s.dt);
        set!("solver.t_end", s.t_end);
        set!("solver.snapshot_dt", s.snapshot_dt);
        set!("solver.tau", s.tau);
        set!("solver.eps", s.eps);
        set!("solver.steps", s.steps);
        set!("solver.jko_tol", s.jko_tol);
        let v = &mut cfg.verify;
        if let Some((l, m)) = get("verify.lambda0") {
            v.lambda0 = match m {
                "measured" => Lambda0Mode::Measured,
                "infinite" => Lambda0Mode::Infinite,
                _ => {
                    return Err(ConfigError::Parse {
                        line: l,
                        msg: format!("lambda0 must be 'measured' or 'infinite', got '{m}'"),
                    })
                }
            };
        }
        set!("verify.t_min", v.t_min);
        set!("verify.lyh_slack", v.lyh_slack);
        set!("verify.lip_slack", v.lip_slack);
        set!("verify.t0", v.t0);
        set!("verify.env_eps", v.env_eps);
        set!("verify.one_step_slack", v.one_step_slack);
        set!("verify.comparison_slack", v.comparison_slack);
        set!("verify.harnack_samples", v.harnack_samples);
        set!("verify.path_segments", v.path_segments);
        set!("verify.path_sweeps", v.path_sweeps);
        set!("verify.harnack_eps", v.harnack_eps);
        set!("verify.harnack_c", v.harnack_c);
        set!("verify.harnack_min_rate", v.harnack_min_rate);
        set!("verify.seed", v.seed);
        set_list!("verify.tau_ladder", v.tau_ladder);
        set_list!("verify.eps_ladder", v.eps_ladder);
        set_list!("verify.refine_ns", v.refine_ns);
        set!("verify.conv_t0", v.conv_t0);
        set!("verify.conv_t_end", v.conv_t_end);
        if let Some((_, d)) = get("output.dir") {
            cfg.out_dir = Some(d.to_string());
        }
        const KNOWN: &[&str] = &[
            "scenario.name", "grid.dim", "grid.n", "potentials.V", "potentials.W",
            "initial.family", "initial.width", "initial.center", "initial.amplitude",
            "initial.freq", "initial.kappa", "solver.dt", "solver.t_end", "solver.snapshot_dt",
            "solver.tau", "solver.eps", "solver.steps", "solver.jko_tol", "verify.lambda0",
            "verify.t_min", "verify.lyh_slack", "verify.lip_slack", "verify.t0", "verify.env_eps",
            "verify.one_step_slack", "verify.comparison_slack", "verify.harnack_samples",
            "verify.path_segments", "verify.path_sweeps", "verify.harnack_eps",
            "verify.harnack_c", "verify.harnack_min_rate", "verify.seed", "verify.tau_ladder",
            "verify.eps_ladder", "verify.refine_ns", "verify.conv_t0", "verify.conv_t_end",
            "output.dir",
        ];
        if let Some((l, k, _)) = entries.iter().find(|(_, k, _)| !KNOWN.contains(&k.as_str())) {
            return Err(ConfigError::Parse { line: *l, msg: format!("unknown key {k}") });
        }
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<PeriodicGrid, ConfigError> {
        PeriodicGrid::new(self.dim, self.n).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn potentials_on(&self, grid: PeriodicGrid) -> Result<Potentials, ConfigError> {
        Potentials::new(&self.v, &self.w, grid).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Checks every parameter against the module preconditions.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |m: String| Err(ConfigError::Invalid(m));
        if self.scenario.is_empty()
            || !self.scenario.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return inv(format!("scenario name '{}' must be [A-Za-z0-9_-]+", self.scenario));
        }
        let grid = self.grid()?;
        let pots = self.potentials_on(grid)?;
        self.initial
            .build(grid, &self.v)
            .map_err(|e| ConfigError::Invalid(format!("initial density: {e}")))?;
        let c = pots.constants();
        let s = &self.solver;
        let v = &self.verify;
        let positive = [
            ("solver.dt", s.dt),
            ("solver.t_end", s.t_end),
            ("solver.snapshot_dt", s.snapshot_dt),
            ("solver.tau", s.tau),
            ("solver.jko_tol", s.jko_tol),
            ("verify.t_min", v.t_min),
            ("verify.t0", v.t0),
            ("verify.conv_t_end", v.conv_t_end),
        ];
        for (k, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return inv(format!("{k} must be positive, got {x}"));
            }
        }
        let nonneg = [
            ("verify.lyh_slack", v.lyh_slack),
            ("verify.lip_slack", v.lip_slack),
            ("verify.env_eps", v.env_eps),
            ("verify.one_step_slack", v.one_step_slack),
            ("verify.comparison_slack", v.comparison_slack),
            ("verify.harnack_eps", v.harnack_eps),
            ("verify.harnack_c", v.harnack_c),
            ("verify.conv_t0", v.conv_t0),
        ];
        for (k, x) in nonneg {
            if !(x >= 0.0 && x.is_finite()) {
                return inv(format!("{k} must be non-negative, got {x}"));
            }
        }
        if c.big_lambda() > 0.0 {
            c.check_tau(s.tau).map_err(|e| ConfigError::Invalid(format!("solver.tau: {e}")))?;
        }
        for e in std::iter::once(s.eps).chain(v.eps_ladder.iter().copied()) {
            if !(e >= EPS_FLOOR) {
                return inv(format!("eps = {e} is below the transport floor {EPS_FLOOR}"));
            }
        }
        if s.steps == 0 {
            return inv("solver.steps must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&v.harnack_min_rate) {
            return inv(format!("verify.harnack_min_rate must be in [0,1], got {}", v.harnack_min_rate));
        }
        if v.harnack_samples == 0 || v.path_segments < 2 {
            return inv("verify.harnack_samples must be >= 1 and verify.path_segments >= 2".into());
        }
        if v.tau_ladder.iter().any(|t| !(*t > 0.0 && t * c.lambda_star() < 1.0)) {
            return inv("verify.tau_ladder entries must satisfy 0 < tau < 1/lambda*".into());
        }
        if v.tau_ladder.windows(2).any(|w| w[1] >= w[0]) || v.eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
            return inv("ladders must be strictly decreasing".into());
        }
        if v.tau_ladder.len() < 2 || v.eps_ladder.len() < 2 || v.refine_ns.len() < 2 {
            return inv("tau_ladder, eps_ladder and refine_ns need at least two entries each".into());
        }
        if v.eps_ladder.last() != Some(&s.eps) {
            return inv(format!("verify.eps_ladder must end at solver.eps = {}", s.eps));
        }
        if v.refine_ns.windows(2).any(|w| w[1] != 2 * w[0]) {
            return inv("verify.refine_ns must double at each entry".into());
        }
        for &n in &v.refine_ns {
            PeriodicGrid::new(self.dim, n).map_err(|e| ConfigError::Invalid(format!("verify.refine_ns: {e}")))?;
        }
        if v.conv_t0 >= v.conv_t_end {
            return inv("verify.conv_t0 must be below verify.conv_t_end".into());
        }
        Ok(())
    }
}

fn parse_family<'a>(
    get: &impl Fn(&str) -> Option<(usize, &'a str)>,
    dim: usize,
) -> Result<DensityFamily, ConfigError> {
    let Some((line, fam)) = get("initial.family") else {
        return Ok(ExperimentConfig::default().initial);
    };
    let perr = |line: usize, msg: String| ConfigError::Parse { line, msg };
    let f64_key = |k: &str, default: f64| -> Result<f64, ConfigError> {
        match get(k) {
            Some((l, v)) => v.parse().map_err(|_| perr(l, format!("bad value '{v}' for {k}"))),
            None => Ok(default),
        }
    };
    let center = || -> Result<[f64; 2], ConfigError> {
        let mut c = [0.0; 2];
        if let Some((l, v)) = get("initial.center") {
            let xs: Vec<f64> = v
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| perr(l, format!("bad center '{v}'")))?;
            if xs.len() != dim {
                return Err(perr(l, format!("center needs {dim} coordinates")));
            }
            c[..dim].copy_from_slice(&xs);
        }
        Ok(c)
    };
    Ok(match fam {
        "uniform" => DensityFamily::Uniform,
        "gibbs" => DensityFamily::Gibbs,
        "cosine" => {
            let mut freq = [1, 0];
            if let Some((l, v)) = get("initial.freq") {
                let ks: Vec<i32> = v
                    .split(',')
                    .map(|x| x.trim().parse::<i32>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| perr(l, format!("bad freq '{v}'")))?;
                if ks.len() != dim {
                    return Err(perr(l, format!("freq needs {dim} entries")));
                }
                freq[..dim].copy_from_slice(&ks);
            }
            DensityFamily::Cosine { amplitude: f64_key("initial.amplitude", 0.5)?, freq }
        }
        "von_mises" => DensityFamily::VonMises { kappa: f64_key("initial.kappa", 1.0)?, center: center()? },
        "heat_kernel" => DensityFamily::HeatKernel { width: f64_key("initial.width", 0.005)?, center: center()? },
        other => return Err(perr(line, format!("unknown density family '{other}'"))),
    })
}
