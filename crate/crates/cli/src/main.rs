//! `delayopt`: delay profiles, correction, quadratic fit and sampling-period
//! optimization from the command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use delayopt::discretize::{simulate, DelayedModel};
use delayopt::optimizer::{fit_quadratic, vertex};
use delayopt::plot::{curve, render_svg, Series, CURVE_POINTS};
use delayopt::profile::{csv_number, load_profile_csv, save_profile_csv, ProfileTable};
use delayopt::scenario::{run, Run, Scenario, Stage};
use delayopt::{Error, ScalarLoopGains, StateSpacePlant};

#[derive(Parser)]
#[command(name = "delayopt", version, about = "Control-delay profiles and sampling-period optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover the delay profile from (h, ratio) samples.
    Profile(ScenarioArgs),
    /// Detect and correct irregular profile points.
    Correct(ScenarioArgs),
    /// Least-squares quadratic through the corrected profile.
    Fit(ScenarioArgs),
    /// Fit, locate the optimal period and evaluate the model.
    Optimize(ScenarioArgs),
    /// Simulate the delayed loop or the benchmark plant.
    Simulate(SimulateArgs),
    /// Emit plot series (raw profile, fitted curve, markers).
    Plot(PlotArgs),
    /// Run a bundled reproduction scenario end to end with golden checks.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML file, or the name of a bundled scenario (case1, case2).
    #[arg(long)]
    scenario: String,
    /// Directory for output files; nothing is written without it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long, conflicts_with = "profile", required_unless_present = "profile")]
    scenario: Option<String>,
    /// Profile CSV to fit and plot instead of a scenario.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Series CSVs are always written; `svg` adds rendered figures.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    Case1,
    Case2,
}

impl Case {
    fn name(self) -> &'static str {
        match self {
            Case::Case1 => "case1",
            Case::Case2 => "case2",
        }
    }
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    case: Case,
    /// Last stage to run: profile, correct, fit, optimize, plot (or all).
    #[arg(long, default_value = "all")]
    stage: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlantKind {
    /// Third-order benchmark plant, eigenvalues −1, −2, −3.
    Benchmark,
    /// Scalar loop dx/dt = a·x + b·u.
    Scalar,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputKind {
    Step,
    Impulse,
    Zero,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "benchmark")]
    plant: PlantKind,
    #[arg(long, default_value_t = -6.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 6.0, allow_hyphen_values = true)]
    b: f64,
    #[arg(long, default_value_t = 0.01)]
    h: f64,
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, value_enum, default_value = "step")]
    input: InputKind,
    /// Input amplitude.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    amplitude: f64,
    /// Trajectory CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with its exit code: 1 for computation, 2 for usage or configuration.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Parse { .. } | Error::Validation(_) => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure { code: 1, message: format!("{}: {e}", path.display()) }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DELAYOPT_LOG", "warn"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> CliResult<u8> {
    match command {
        Command::Profile(args) => scenario_command(&args, Stage::Profile),
        Command::Correct(args) => scenario_command(&args, Stage::Correct),
        Command::Fit(args) => scenario_command(&args, Stage::Fit),
        Command::Optimize(args) => scenario_command(&args, Stage::Optimize),
        Command::Plot(args) => plot_command(&args),
        Command::Simulate(args) => simulate_command(&args),
        Command::Reproduce(args) => reproduce_command(&args),
    }
}

fn load_scenario(spec: &str) -> CliResult<Scenario> {
    let path = Path::new(spec);
    if !path.exists() && Scenario::bundled_source(spec).is_some() {
        info!("using bundled scenario {spec}");
        return Ok(Scenario::bundled(spec)?);
    }
    Ok(Scenario::load(path)?)
}

fn execute(scenario: &Scenario, stage: Stage) -> CliResult<Run> {
    let result = run(scenario, stage)?;
    for w in &result.warnings {
        warn!("{w}");
    }
    Ok(result)
}

fn scenario_command(args: &ScenarioArgs, stage: Stage) -> CliResult<u8> {
    let scenario = load_scenario(&args.scenario)?;
    let result = execute(&scenario, stage)?;
    let mut out = String::new();
    print_run(&mut out, &result);
    print!("{out}");
    if let Some(dir) = &args.out {
        write_artifacts(dir, &result, Format::Csv)?;
    }
    Ok(0)
}

fn reproduce_command(args: &ReproduceArgs) -> CliResult<u8> {
    let stage: Stage = args.stage.parse()?;
    let scenario = Scenario::bundled(args.case.name())?;
    let result = execute(&scenario, stage)?;
    let mut out = String::new();
    print_run(&mut out, &result);
    print_golden(&mut out, &result);
    print!("{out}");
    if let Some(dir) = &args.out {
        write_artifacts(dir, &result, args.format)?;
    }
    Ok(if result.golden_passed() { 0 } else { 1 })
}

fn plot_command(args: &PlotArgs) -> CliResult<u8> {
    let (raw, fit, markers) = match (&args.scenario, &args.profile) {
        (Some(spec), _) => {
            let result = execute(&load_scenario(spec)?, Stage::Plot)?;
            let plot = result.plot.expect("plot stage ran");
            (plot.raw, plot.fit, plot.markers)
        }
        (None, Some(path)) => profile_series(&load_profile_csv(path)?)?,
        (None, None) => unreachable!("clap requires one source"),
    };
    write_series(&args.out, &raw, &fit, &markers, args.format)?;
    let min = delayopt::plot::argmin(&fit, 1).unwrap_or(f64::NAN);
    println!("fitted curve minimum at h = {min:.6}");
    Ok(0)
}

fn profile_series(table: &ProfileTable) -> CliResult<(Series, Series, Series)> {
    if table.is_empty() {
        return Err(Failure { code: 2, message: "profile is empty".into() });
    }
    let points = table.points();
    let model = fit_quadratic(&points)?;
    let mut raw = Series::new("raw", &["h", "tau"]);
    raw.rows = points.iter().map(|&(h, t)| vec![h, t]).collect();
    let markers = Series { name: "markers".into(), ..raw.clone() };
    let (lo, hi) = (points[0].0, points[points.len() - 1].0);
    let fit = curve("fit", &[("tau_exact", &model)], lo, hi, CURVE_POINTS);
    if let Ok(v) = vertex(&model) {
        info!("vertex h*={} tau*={}", v.h_star, v.tau_star);
    }
    Ok((raw, fit, markers))
}

fn print_run(out: &mut String, r: &Run) {
    use std::fmt::Write as _;
    let _ = writeln!(out, "scenario {}", r.name);
    let _ = writeln!(out, "\ndelay profile");
    let _ = writeln!(out, "{:>8} {:>8} {:>8}", "h", "ratio", "tau");
    for row in r.profile.rows() {
        let ratio = row.ratio.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "{:>8.3} {:>8} {:>8.3}", row.h, ratio, row.tau);
    }
    if let Some(c) = &r.correction {
        let _ = writeln!(out, "\ncorrected profile");
        let _ = writeln!(out, "{:>8} {:>8}  source", "h", "tau");
        for row in c.table.rows() {
            let _ = writeln!(out, "{:>8.3} {:>8.3}  {}", row.h, row.tau, row.source.as_str());
        }
        for n in &c.notes {
            let interp = n.interpolated.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "  h={:.3}: {:.3} -> {:.3} ({}, interpolation {interp})",
                n.h,
                n.original,
                n.applied,
                n.source.as_str()
            );
        }
    }
    if let Some(f) = &r.fit {
        let _ = writeln!(out, "\nquadratic fit tau = a + b*h + c*h^2");
        let _ = writeln!(out, "  exact   a={:.5} b={:.3} c={:.1} sse={:.3e}", f.exact.a, f.exact.b, f.exact.c, f.exact.sse);
        if let Some(p) = &f.rounded {
            let _ = writeln!(out, "  rounded a={} b={} c={} sse={:.3e}", p.a, p.b, p.c, p.sse);
        }
    }
    if let Some(o) = &r.optimize {
        let _ = writeln!(out, "\noptimal sampling period");
        let _ = writeln!(out, "  exact   h*={:.7} tau*={:.6}", o.exact.h_star, o.exact.tau_star);
        if let Some(p) = &o.rounded {
            let _ = writeln!(out, "  rounded h*={:.7} tau*={:.6}", p.h_star, p.tau_star);
        }
        let _ = writeln!(out, "\nevaluated model");
        let _ = writeln!(out, "{:>8} {:>8} {:>8} {:>8}", "h", "data", "exact", "rounded");
        for e in &o.evaluated {
            let rounded = e.tau_rounded.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "{:>8.3} {:>8.3} {:>8.3} {:>8}", e.h, e.tau_data, e.tau_exact, rounded);
        }
    }
    if let Some(p) = &r.plot {
        let min = delayopt::plot::argmin(&p.fit, 1).unwrap_or(f64::NAN);
        let _ = writeln!(out, "\nfitted curve minimum at h = {min:.6}");
    }
}

fn print_golden(out: &mut String, r: &Run) {
    use std::fmt::Write as _;
    if r.golden.is_empty() {
        return;
    }
    let _ = writeln!(out, "\ngolden checks");
    for g in &r.golden {
        let _ = writeln!(
            out,
            "  {} {} (max error {:.3e}, tolerance {:.0e})",
            if g.passed { "PASS" } else { "FAIL" },
            g.name,
            g.max_error,
            g.tolerance
        );
    }
    let passed = r.golden.iter().filter(|g| g.passed).count();
    let _ = writeln!(out, "  {passed}/{} passed", r.golden.len());
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes).map_err(|e| io_failure(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn write_artifacts(dir: &Path, r: &Run, format: Format) -> CliResult {
    create_dir(dir)?;
    save_profile_csv(&r.profile, dir.join("profile.csv"))?;
    if r.correction.is_some() {
        save_profile_csv(r.corrected(), dir.join("corrected.csv"))?;
    }
    if r.fit.is_some() {
        let json = serde_json::to_string_pretty(&r.report())
            .map_err(|e| Failure { code: 1, message: e.to_string() })?;
        write_file(&dir.join("report.json"), format!("{json}\n").as_bytes())?;
    }
    if let Some(o) = &r.optimize {
        let mut text = String::from("h,tau_data,tau_exact,tau_rounded\n");
        for e in &o.evaluated {
            let rounded = e.tau_rounded.map(csv_number).unwrap_or_default();
            text.push_str(&format!(
                "{},{},{},{rounded}\n",
                csv_number(e.h),
                csv_number(e.tau_data),
                csv_number(e.tau_exact)
            ));
        }
        write_file(&dir.join("evaluated.csv"), text.as_bytes())?;
    }
    if let Some(p) = &r.plot {
        write_series(dir, &p.raw, &p.fit, &p.markers, format)?;
    }
    Ok(())
}

fn write_series(dir: &Path, raw: &Series, fit: &Series, markers: &Series, format: Format) -> CliResult {
    create_dir(dir)?;
    for (name, s) in [("fig_raw.csv", raw), ("fig_fit.csv", fit), ("fig_markers.csv", markers)] {
        let mut buf = Vec::new();
        s.write_csv(&mut buf)?;
        write_file(&dir.join(name), &buf)?;
    }
    if format == Format::Svg {
        write_file(&dir.join("fig_raw.svg"), render_svg("delay profile before correction", &[raw], &[raw]).as_bytes())?;
        write_file(
            &dir.join("fig_fit.svg"),
            render_svg("sampling period against delay", &[fit], &[markers]).as_bytes(),
        )?;
    }
    Ok(())
}

fn simulate_command(args: &SimulateArgs) -> CliResult<u8> {
    let model = match args.plant {
        PlantKind::Benchmark => DelayedModel::plant(&StateSpacePlant::benchmark(), args.h, args.tau)?,
        PlantKind::Scalar => {
            let gains = ScalarLoopGains::new(args.a, args.b, 0)?;
            DelayedModel::scalar(&gains, args.h, args.tau)?
        }
    };
    if let Some(w) = model.warning() {
        warn!("{w}");
    }
    let inputs: Vec<f64> = (0..args.steps.max(1))
        .map(|k| match args.input {
            InputKind::Step => args.amplitude,
            InputKind::Impulse if k == 0 => args.amplitude,
            InputKind::Impulse | InputKind::Zero => 0.0,
        })
        .collect();
    let x0 = vec![0.0; model.order()];
    let traj = simulate(&model, &x0, &inputs, args.steps, 0.0)?;

    let mut text = String::from("step,t");
    for i in 0..model.order() {
        text.push_str(&format!(",x{i}"));
    }
    text.push_str(",y\n");
    for p in &traj {
        text.push_str(&format!("{},{}", p.step, csv_number(p.t)));
        for x in &p.state {
            text.push(',');
            text.push_str(&csv_number(*x));
        }
        text.push_str(&format!(",{}\n", csv_number(p.output)));
    }
    match &args.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                create_dir(dir)?;
            }
            write_file(path, text.as_bytes())?;
            let last = traj.last().expect("trajectory has the initial point");
            println!("{} steps, final output {:.6}", args.steps, last.output);
        }
        None => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| Failure { code: 1, message: e.to_string() })?;
        }
    }
    Ok(0)
}
