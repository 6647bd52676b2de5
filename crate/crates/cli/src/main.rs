//! Command-line front end: named presets, key=value configs, CSV emission.
//!
//! Every output starts with `#`-prefixed header lines carrying the tool
//! version and the resolved configuration (seed included, worker count
//! deliberately excluded), so a result file alone suffices to rerun it.

mod config;

use clap::{Parser, Subcommand};
use config::{Config, ConfigError};
use otfs_ra::channel::{ChannelRealization, FrameScenario, PathTap, UtActivation};
use otfs_ra::design::{snr_to_energy, DesignError};
use otfs_ra::receiver::ReceiverError;
use otfs_ra::rng::{stream, substream};
use otfs_ra::sim::SimError;
use otfs_ra::{
    analytic_threshold, bound_sweep, build_allocation, collision_lower_bound, csv_header, csv_row,
    derive_grid, empirical_threshold, load_model, make_window, min_doppler_width, receive_tf,
    run_tep, Calibration, Complex64, DdIndex, DelayPowerProfile, ScenarioConfig, Sfft, SweepConfig,
    SystemBudget, WindowKind,
};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const PRESETS: &[(&str, &str)] = &[
    ("fig1", include_str!("../presets/fig1.conf")),
    ("fig8", include_str!("../presets/fig8.conf")),
    ("fig9", include_str!("../presets/fig9.conf")),
    ("table2", include_str!("../presets/table2.conf")),
    ("table2-bounds", include_str!("../presets/table2-bounds.conf")),
    ("fig21", include_str!("../presets/fig21.conf")),
];

#[derive(Parser)]
#[command(name = "otfs-ra", version, about = "OTFS random-access design and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Preset name (fig1, fig8, fig9, table2, table2-bounds, fig21) or a
    /// config file path.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; shorthand for --set seed=N.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for simulation. Never echoed into output headers.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Frames per simulation point; shorthand for --set frames=N.
    #[arg(long, global = true)]
    frames: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Derive the delay-Doppler grid and preamble count from a budget.
    Design,
    /// Collision floor for given preamble counts, or swept over cell radii.
    Bound,
    /// Monte Carlo timing-error runs over the configured parameter grids.
    Simulate,
    /// Detection threshold for a window, noise level and false-alarm target.
    Threshold,
    /// Doppler-domain energy profile of one received preamble per window.
    Leakage,
}

enum CliError {
    Io(String),
    Config(String),
    Infeasible(String),
    Numeric(String),
}

impl CliError {
    fn report(&self) -> (u8, &str, &String) {
        match self {
            CliError::Io(m) => (1, "io", m),
            CliError::Config(m) => (2, "config", m),
            CliError::Infeasible(m) => (3, "infeasible", m),
            CliError::Numeric(m) => (4, "numeric", m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        match e {
            DesignError::InvalidBudget { .. } | DesignError::InvalidLoad => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Infeasible(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match &e {
            SimError::InvalidConfig(_) | SimError::Detector(_) => CliError::Config(e.to_string()),
            SimError::Design(DesignError::InvalidBudget { .. })
            | SimError::Design(DesignError::InvalidLoad) => CliError::Config(e.to_string()),
            SimError::Receiver(ReceiverError::QuadratureDiverged) => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Infeasible(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, class, msg) = err.report();
            eprintln!("error ({class}): {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = load_config(cli.config.as_deref())?;
    for pair in &cli.set {
        cfg.set(pair)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set_value("seed", seed.to_string());
    }
    if let Some(frames) = cli.frames {
        cfg.set_value("frames", frames.to_string());
    }
    let workers = if force_single_thread() { Some(1) } else { cli.workers };

    let (resolved, body) = match cli.command {
        Command::Design => cmd_design(&mut cfg)?,
        Command::Bound => cmd_bound(&mut cfg)?,
        Command::Simulate => cmd_simulate(&mut cfg, workers)?,
        Command::Threshold => cmd_threshold(&mut cfg)?,
        Command::Leakage => cmd_leakage(&mut cfg)?,
    };

    let mut text = String::new();
    let _ = writeln!(text, "# otfs-ra {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(text, "# {resolved}");
    text.push_str(&body);

    match cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_config(source: Option<&str>) -> Result<Config, CliError> {
    let Some(source) = source else {
        return Ok(Config::default());
    };
    if let Some((_, text)) = PRESETS.iter().find(|(name, _)| *name == source) {
        return Ok(Config::parse(text)?);
    }
    let text = std::fs::read_to_string(source).map_err(|e| {
        CliError::Config(format!("cannot read config `{source}` (not a preset name): {e}"))
    })?;
    Ok(Config::parse(&text)?)
}

fn force_single_thread() -> bool {
    std::env::var_os("OTFS_RA_FORCE_SINGLE_THREAD").is_some_and(|v| !v.is_empty() && v != "0")
}

/// Key=value echo of everything a command resolved, defaults included.
struct Resolved(String);

impl Resolved {
    fn new() -> Self {
        Resolved(String::new())
    }

    fn push(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        if !self.0.is_empty() {
            self.0.push(' ');
        }
        let _ = write!(self.0, "{key}={value}");
        self
    }

    fn push_list<T: std::fmt::Display>(&mut self, key: &str, values: &[T]) -> &mut Self {
        let joined =
            values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        self.push(key, joined)
    }
}

fn cmd_design(cfg: &mut Config) -> Result<(String, String), CliError> {
    let b_c = cfg.require_f64("b_c")?;
    let t_c = cfg.require_f64("t_c")?;
    let g = cfg.require_f64("g")?;
    let nu_max = cfg.require_f64("nu_max")?;
    std::mem::take(cfg).finish()?;

    let budget = SystemBudget::new(b_c, t_c, g, nu_max)?;
    let grid = derive_grid(&budget)?;
    let n1 = min_doppler_width(&grid, nu_max)?;
    if grid.m() == 1 {
        eprintln!("warning: zero guard leaves a single delay bin; the timing-advance range is degenerate");
    }

    let mut echo = Resolved::new();
    echo.push("b_c", b_c).push("t_c", t_c).push("g", g).push("nu_max", nu_max);

    let mut body = String::new();
    let _ = writeln!(body, "m = {}", grid.m());
    let _ = writeln!(body, "n = {}", grid.n());
    let _ = writeln!(body, "delta_f_hz = {}", grid.delta_f());
    let _ = writeln!(body, "t_s = {}", grid.t());
    let _ = writeln!(body, "n1 = {n1}");
    let _ = writeln!(body, "r = {}", grid.n() / n1);
    Ok((echo.0, body))
}

fn cmd_bound(cfg: &mut Config) -> Result<(String, String), CliError> {
    if cfg.contains("r") && cfg.contains("radii_m") {
        return Err(CliError::Config(
            "give either `r` (direct preamble counts) or `radii_m` (cell sweep), not both".into(),
        ));
    }
    if cfg.contains("r") {
        let r_list = cfg.require_usize_list("r")?;
        let lambda = cfg.require_f64("lambda")?;
        let t_a = cfg.require_f64("t_a")?;
        let r_c = cfg.require_f64("r_c")?;
        let r_a = cfg.require_f64("r_a")?;
        std::mem::take(cfg).finish()?;

        if let Some(bad) = r_list.iter().find(|&&r| r == 0) {
            return Err(CliError::Config(format!("preamble count must be positive, got {bad}")));
        }
        let load = load_model(lambda, t_a, r_c, r_a)?;

        let mut echo = Resolved::new();
        echo.push_list("r", &r_list)
            .push("lambda", lambda)
            .push("t_a", t_a)
            .push("r_c", r_c)
            .push("r_a", r_a);

        let mut body = String::from("r,mu_q,bound\n");
        for r in r_list {
            let b = collision_lower_bound(r, load.mu_q);
            let _ = writeln!(body, "{},{:.6e},{:.6e}", r, b.mu_q, b.value);
        }
        return Ok((echo.0, body));
    }

    let sweep = SweepConfig {
        b_c: cfg.require_f64("b_c")?,
        t_c: cfg.require_f64("t_c")?,
        f_c: cfg.require_f64("f_c")?,
        t_a: cfg.require_f64("t_a")?,
        r_a: cfg.require_f64("r_a")?,
        radii_m: cfg.require_f64_list("radii_m")?,
        speeds_kmh: cfg.require_f64_list("speeds_kmh")?,
        lambdas: cfg.require_f64_list("lambdas")?,
    };
    std::mem::take(cfg).finish()?;

    let mut echo = Resolved::new();
    echo.push("b_c", sweep.b_c)
        .push("t_c", sweep.t_c)
        .push("f_c", sweep.f_c)
        .push("t_a", sweep.t_a)
        .push("r_a", sweep.r_a)
        .push_list("radii_m", &sweep.radii_m)
        .push_list("speeds_kmh", &sweep.speeds_kmh)
        .push_list("lambdas", &sweep.lambdas);

    let rows = bound_sweep(&sweep).map_err(|e| CliError::Infeasible(e.to_string()))?;
    let mut body = String::from("r_c_m,speed_kmh,lambda,mu_q,m,n,n1,r,window,bound\n");
    for p in rows {
        let _ = writeln!(
            body,
            "{},{},{},{:.6e},{},{},{},{},{},{:.6e}",
            p.r_c_m, p.speed_kmh, p.lambda, p.mu_q, p.m, p.n, p.n1, p.r, p.window, p.bound
        );
    }
    Ok((echo.0, body))
}

fn parse_profile(spec: &str) -> Result<DelayPowerProfile, CliError> {
    match spec {
        "etu" => Ok(DelayPowerProfile::etu()),
        "single" => Ok(DelayPowerProfile::new(&[(0.0, 0.0)])
            .expect("single tap at zero excess delay is valid")),
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read profile `{path}` (not etu/single): {e}"))
            })?;
            DelayPowerProfile::from_text(&text).map_err(|e| CliError::Config(e.to_string()))
        }
    }
}

fn parse_window(spec: &str) -> Result<WindowKind, CliError> {
    spec.parse().map_err(|e: ReceiverError| CliError::Config(e.to_string()))
}

fn cmd_simulate(cfg: &mut Config, workers: Option<usize>) -> Result<(String, String), CliError> {
    let scenario_id = cfg.str_or("scenario_id", "custom");
    let b_c = cfg.require_f64("b_c")?;
    let t_c = cfg.require_f64("t_c")?;
    let g = cfg.require_f64("g")?;
    let nu_list = cfg.require_f64_list("nu_max")?;
    let lambda_list = cfg.require_f64_list("lambda")?;
    let t_a = cfg.require_f64("t_a")?;
    let r_c = cfg.require_f64("r_c")?;
    let r_a = cfg.require_f64("r_a")?;
    let pathloss_exp = cfg.f64_or("pathloss_exp", 3.0)?;
    let profile_spec = cfg.str_or("profile", "etu");
    let window_spec = cfg.str_or("window", "hamming");
    // 0 selects the policy width for each nu_max.
    let n1_list = cfg.usize_list_or("n1", &[0])?;
    let l_anchor = cfg.usize_or("l_anchor", 1)?;
    let rho_list = cfg.require_f64_list("rho_db")?;
    let n_o = cfg.f64_or("n_o", 1.0)?;
    let p_fa = cfg.f64_or("p_fa", 1e-2)?;
    let frames = cfg.u64_or("frames", 10_000)?;
    let calibration_frames = cfg.u64_or("calibration_frames", 10_000)?;
    let seed = cfg.u64_or("seed", 0)?;
    std::mem::take(cfg).finish()?;

    let profile = parse_profile(&profile_spec)?;
    let window = parse_window(&window_spec)?;

    let mut echo = Resolved::new();
    echo.push("scenario_id", &scenario_id)
        .push("b_c", b_c)
        .push("t_c", t_c)
        .push("g", g)
        .push_list("nu_max", &nu_list)
        .push_list("lambda", &lambda_list)
        .push("t_a", t_a)
        .push("r_c", r_c)
        .push("r_a", r_a)
        .push("pathloss_exp", pathloss_exp)
        .push("profile", &profile_spec)
        .push("window", window)
        .push_list("n1", &n1_list)
        .push("l_anchor", l_anchor)
        .push_list("rho_db", &rho_list)
        .push("n_o", n_o)
        .push("p_fa", p_fa)
        .push("frames", frames)
        .push("calibration_frames", calibration_frames)
        .push("seed", seed);

    let mut body = String::from(csv_header());
    body.push('\n');
    for &nu_max in &nu_list {
        let budget = SystemBudget::new(b_c, t_c, g, nu_max)?;
        let grid = derive_grid(&budget)?;
        for &lambda in &lambda_list {
            for &n1_spec in &n1_list {
                let n1 = if n1_spec == 0 { min_doppler_width(&grid, nu_max)? } else { n1_spec };
                for &rho_db in &rho_list {
                    let run = ScenarioConfig {
                        scenario_id: scenario_id.clone(),
                        budget,
                        load: load_model(lambda, t_a, r_c, r_a)?,
                        profile: profile.clone(),
                        pathloss_exp,
                        window,
                        n1,
                        l_anchor,
                        rho_db,
                        n_o,
                        p_fa,
                        n_frames: frames,
                        calibration_frames,
                        master_seed: seed,
                        workers,
                    };
                    let res = run_tep(&run)?;
                    body.push_str(&csv_row(&run, &res));
                    body.push('\n');
                }
            }
        }
    }
    Ok((echo.0, body))
}

fn cmd_threshold(cfg: &mut Config) -> Result<(String, String), CliError> {
    let b_c = cfg.require_f64("b_c")?;
    let t_c = cfg.require_f64("t_c")?;
    let g = cfg.require_f64("g")?;
    let nu_max = cfg.f64_or("nu_max", 0.0)?;
    let window_spec = cfg.str_or("window", "hamming");
    // 0 selects the policy width for nu_max.
    let n1_spec = cfg.usize_or("n1", 0)?;
    let l_anchor = cfg.usize_or("l_anchor", 1)?;
    let n_o = cfg.f64_or("n_o", 1.0)?;
    let p_fa = cfg.f64_or("p_fa", 1e-2)?;
    let calibration_frames = cfg.u64_or("calibration_frames", 10_000)?;
    let seed = cfg.u64_or("seed", 0)?;
    std::mem::take(cfg).finish()?;

    let window = parse_window(&window_spec)?;
    let budget = SystemBudget::new(b_c, t_c, g, nu_max)?;
    let grid = derive_grid(&budget)?;
    let n1 = if n1_spec == 0 { min_doppler_width(&grid, nu_max)? } else { n1_spec };

    let threshold = if window == WindowKind::Rectangular {
        analytic_threshold(&grid, n1, n_o, p_fa).map_err(|e| CliError::Config(e.to_string()))?
    } else {
        let alloc = build_allocation(&grid, n1, l_anchor)
            .map_err(|e| CliError::Infeasible(e.to_string()))?;
        let shape = make_window(window, grid.n());
        let mut rng = substream(seed, &[stream::CALIBRATION]);
        empirical_threshold(&grid, &alloc, &shape, n_o, p_fa, &mut rng, calibration_frames)
            .map_err(|e| CliError::Config(e.to_string()))?
    };

    let mut echo = Resolved::new();
    echo.push("b_c", b_c)
        .push("t_c", t_c)
        .push("g", g)
        .push("window", window)
        .push("n1", n1)
        .push("l_anchor", l_anchor)
        .push("n_o", n_o)
        .push("p_fa", p_fa)
        .push("calibration_frames", calibration_frames)
        .push("seed", seed);

    let calibration = match threshold.calibration {
        Calibration::Analytic => "analytic",
        Calibration::Empirical => "empirical",
    };
    let mut body = String::from("window,n1,n_o,p_fa,calibration,mu\n");
    let _ = writeln!(body, "{window},{n1},{n_o},{p_fa},{calibration},{:.6e}", threshold.mu);
    Ok((echo.0, body))
}

fn cmd_leakage(cfg: &mut Config) -> Result<(String, String), CliError> {
    let b_c = cfg.require_f64("b_c")?;
    let t_c = cfg.require_f64("t_c")?;
    let g = cfg.require_f64("g")?;
    // The probe Doppler follows the budget's nu_max unless `nu` says otherwise.
    let nu_default = cfg.f64_or("nu_max", 300.0)?;
    let nu = cfg.f64_or("nu", nu_default)?;
    let distance_m = cfg.f64_or("distance_m", 1000.0)?;
    let tau = match cfg.opt_str("tau_s") {
        Some(v) => v.parse::<f64>().map_err(|_| {
            CliError::Config(format!("key `tau_s`: `{v}` is not a number"))
        })?,
        None => 2.0 * distance_m / SPEED_OF_LIGHT,
    };
    let anchor_k = cfg.usize_or("anchor_k", 71)?;
    let l_anchor = cfg.usize_or("l_anchor", 1)?;
    let windows_spec = cfg.str_or("windows", "all");
    std::mem::take(cfg).finish()?;

    let windows: Vec<WindowKind> = if windows_spec == "all" {
        WindowKind::ALL.to_vec()
    } else {
        windows_spec
            .split(',')
            .map(|s| parse_window(s.trim()))
            .collect::<Result<_, _>>()?
    };

    let budget = SystemBudget::new(b_c, t_c, g, 0.0)?;
    let grid = derive_grid(&budget)?;
    // Width-one groups make every Doppler row an anchor, so `anchor_k`
    // addresses the row directly.
    let alloc = build_allocation(&grid, 1, l_anchor)
        .map_err(|e| CliError::Infeasible(e.to_string()))?;
    if anchor_k >= alloc.r() {
        return Err(CliError::Infeasible(format!(
            "anchor row {anchor_k} outside the {} available rows",
            alloc.r()
        )));
    }

    let scenario = FrameScenario {
        uts: vec![UtActivation {
            preamble: anchor_k,
            channel: ChannelRealization::from_taps(vec![PathTap {
                gain: Complex64::new(1.0, 0.0),
                delay: tau,
                doppler: nu,
            }]),
        }],
    };
    let energy = snr_to_energy(&grid, g, b_c, 1.0, 1.0);
    let sfft = Sfft::new(&grid);

    let mut echo = Resolved::new();
    echo.push("b_c", b_c)
        .push("t_c", t_c)
        .push("g", g)
        .push("nu", nu)
        .push("tau_s", tau)
        .push("anchor_k", anchor_k)
        .push("l_anchor", l_anchor)
        .push_list("windows", &windows);

    let mut profiles: Vec<Vec<f64>> = Vec::with_capacity(windows.len());
    for &kind in &windows {
        let shape = make_window(kind, grid.n());
        // Noise density zero: the generator is consulted but contributes
        // nothing, keeping the profile deterministic.
        let mut rng = substream(0, &[stream::PROBE]);
        let tf = receive_tf(&scenario, &alloc, &grid, energy, &shape, &mut rng, 0.0)
            .map_err(|e| CliError::Infeasible(e.to_string()))?;
        let dd = sfft.apply(&tf);

        let mut peak = (0.0f64, DdIndex { k: 0, l: 0 });
        for k in 0..grid.n() {
            for l in 0..grid.m() {
                let idx = DdIndex { k, l };
                let e = dd.energy(idx);
                if e > peak.0 {
                    peak = (e, idx);
                }
            }
        }
        let l_peak = peak.1.l;
        let profile: Vec<f64> = (0..grid.n())
            .map(|k| {
                let e = dd.energy(DdIndex { k, l: l_peak });
                10.0 * (e / peak.0).max(1e-300).log10()
            })
            .collect();
        profiles.push(profile);
    }

    let mut body = String::from("k");
    for w in &windows {
        let _ = write!(body, ",{w}");
    }
    body.push('\n');
    for k in 0..grid.n() {
        let _ = write!(body, "{k}");
        for profile in &profiles {
            let _ = write!(body, ",{:.3}", profile[k]);
        }
        body.push('\n');
    }
    Ok((echo.0, body))
}
