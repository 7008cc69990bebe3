mod budget_spec;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use gvw::data::{
    format_float, generate_synthetic, load_csv, normalize, to_records, trajectory_from_json, trajectory_to_json,
    write_records, BudgetPattern, CsvSchema, NormalizationConfig, SyntheticSpec,
};
use gvw::econbase::{compare_models, fit_ols, ComparisonScenario, EconParams};
use gvw::estimator::{fit_gvw, fit_gvw_fd, EstimationProblem, FitReport};
use gvw::model::{
    elasticity_threshold, integrate_quadratic, log_spaced, pulse_response, sensitivity_sweep, simulate,
    steady_budget, steady_share, taylor_reduce, GvwParams, PiecewiseConstant, PulseSpec, QuadraticReduction,
    SweepIndex,
};
use gvw::Trajectory;
use svg::{Panel, Series};

/// Generalized Vidale-Wolfe advertising response model.
#[derive(Parser, Debug)]
#[command(name = "gvw", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Write here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Seed for noise, random-walk budgets, multistart and network init.
    #[arg(long, global = true, env = "GVW_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the model under a budget pattern and sample it.
    Simulate(SimulateArgs),
    /// Closed-form rectangular-pulse response next to numerical integration.
    Pulse(PulseArgs),
    /// Estimate (rho, alpha, beta, delta) from a campaign file.
    Fit(FitArgs),
    /// Steady-state share over a log-spaced budget grid.
    Steady(SteadyArgs),
    /// Steady-state curves while varying alpha or beta, with shape labels.
    Sensitivity(SensitivityArgs),
    /// Compare the model with the log-log econometric baseline.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    beta: f64,
    #[arg(long, allow_negative_numbers = true)]
    delta: f64,
}

impl ModelArgs {
    fn params(&self) -> gvw::Result<GvwParams<f64>> {
        GvwParams::new(self.rho, self.alpha, self.beta, self.delta)
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// `const:LEVEL`, `pulse:L1,L2,...:ON:OFF` or `walk:MIN:MAX:SIGMA:HOLD`.
    #[arg(long, value_parser = budget_spec::parse, default_value = "const:1")]
    budget: BudgetPattern,
    #[arg(long, default_value_t = 100.0)]
    t_end: f64,
    /// Number of samples, uniform on [0, t-end].
    #[arg(long, default_value_t = 101)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    x0: f64,
    /// Standard deviation of additive share noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
}

#[derive(Args, Debug)]
struct PulseArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1.0)]
    b0: f64,
    /// Time at which spending stops.
    #[arg(long, default_value_t = 20.0)]
    pulse_end: f64,
    #[arg(long, default_value_t = 0.0)]
    x0: f64,
    #[arg(long, default_value_t = 60.0)]
    horizon: f64,
    #[arg(long, default_value_t = 121)]
    n: usize,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Campaign CSV (`t,budget,response`) or trajectory JSON.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Divisor turning responses into shares; defaults to 1.05 x the largest response.
    #[arg(long)]
    market_potential: Option<f64>,
    #[arg(long, default_value = "t")]
    t_col: String,
    #[arg(long, default_value = "budget")]
    budget_col: String,
    #[arg(long, default_value = "response")]
    response_col: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Dnn,
    Fd,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Dnn)]
    method: MethodArg,
    #[arg(long, default_value_t = 16)]
    starts: usize,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long, default_value_t = 0.01)]
    b_min: f64,
    #[arg(long, default_value_t = 100.0)]
    b_max: f64,
    /// Number of log-spaced budgets.
    #[arg(long = "grid", default_value_t = 41)]
    points: usize,
}

impl GridArgs {
    fn budgets(&self) -> Result<Vec<f64>, AppError> {
        if !(self.b_min > 0.0 && self.b_max > self.b_min && self.b_max.is_finite() && self.points >= 2) {
            return Err(AppError::Usage(format!(
                "budget grid needs 0 < b-min < b-max and at least 2 points (got {}, {}, {})",
                self.b_min, self.b_max, self.points
            )));
        }
        Ok(log_spaced(self.b_min, self.b_max, self.points))
    }
}

#[derive(Args, Debug)]
struct SteadyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VaryArg {
    Alpha,
    Beta,
}

#[derive(Args, Debug)]
struct SensitivityArgs {
    #[arg(long, value_enum)]
    vary: VaryArg,
    /// Comma-separated values of the varied index.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    values: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.10)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Data used to fit whichever model has no parameters on the command line.
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c2: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    b0: f64,
    #[arg(long, default_value_t = 20.0)]
    pulse_end: f64,
    #[arg(long, default_value_t = 0.01)]
    x0: f64,
    #[arg(long, default_value_t = 60)]
    horizon: usize,
    #[arg(long, default_value_t = 0.05)]
    b_min: f64,
    #[arg(long, default_value_t = 20.0)]
    b_max: f64,
    #[arg(long = "grid", default_value_t = 25)]
    points: usize,
}

#[derive(Debug)]
enum AppError {
    Usage(String),
    Run(gvw::Error),
}

impl From<gvw::Error> for AppError {
    fn from(e: gvw::Error) -> Self {
        AppError::Run(e)
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Run(e.into())
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::Run(e.into())
    }
}

/// `# key=value` lines, a header and rows.
fn csv_table<K: AsRef<str>>(
    summary: &[(K, String)],
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> String {
    let mut out = String::new();
    for (key, value) in summary {
        out.push_str(&format!("# {}={value}\n", key.as_ref()));
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn floats(values: &[f64]) -> Vec<String> {
    values.iter().map(|&v| format_float(v)).collect()
}

fn pretty(value: &serde_json::Value) -> Result<String, AppError> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn simulate_cmd(args: &SimulateArgs, format: Format, seed: u64) -> Result<String, AppError> {
    if args.n < 2 {
        return Err(AppError::Usage("--n must be at least 2".into()));
    }
    let spec = SyntheticSpec {
        true_params: args.model.params()?,
        budget_pattern: args.budget.clone(),
        n_samples: args.n,
        horizon: args.t_end,
        noise_sigma: args.noise,
        seed,
        x0: args.x0,
    };
    let traj = generate_synthetic(&spec)?;
    Ok(match format {
        Format::Json => trajectory_to_json(&traj)? + "\n",
        Format::Csv => {
            let mut body = Vec::new();
            write_records(&mut body, &to_records(&traj))?;
            format!(
                "# clamp_events={}\n# seed={seed}\n{}",
                traj.meta.clamp_events.len(),
                String::from_utf8(body).expect("ascii output")
            )
        }
        Format::Svg => {
            let t = traj.times();
            svg::render(&[
                Panel {
                    title: "market share".into(),
                    x_label: "t".into(),
                    series: vec![Series::new("share", &t, &traj.shares())],
                },
                Panel {
                    title: "budget".into(),
                    x_label: "t".into(),
                    series: vec![Series::new("budget", &t, &traj.budgets())],
                },
            ])
        }
    })
}

fn pulse_cmd(args: &PulseArgs, format: Format) -> Result<String, AppError> {
    let params = args.model.params()?;
    let pulse = PulseSpec::new(args.b0, args.pulse_end, args.x0)?;
    if !(args.horizon > 0.0 && args.horizon.is_finite()) || args.n < 2 {
        return Err(AppError::Usage("--horizon must be positive and --n at least 2".into()));
    }
    let red = taylor_reduce(&params, args.b0)?;
    let decay = QuadraticReduction {
        k1: 0.0,
        k2: -params.delta,
        k3: 0.0,
        x_hat: 0.0,
    };
    let times: Vec<f64> = (0..args.n)
        .map(|i| args.horizon * i as f64 / (args.n - 1) as f64)
        .collect();
    let step = 1e-3;
    let mut closed = Vec::with_capacity(times.len());
    let mut integrated = Vec::with_capacity(times.len());
    let (mut x, mut at) = (args.x0, 0.0);
    for &t in &times {
        closed.push(pulse_response(&params, &pulse, t)?);
        // advance through the pulse end so the decay branch starts from x(T)
        if at < args.pulse_end && t > args.pulse_end {
            x = integrate_quadratic(&red, x, args.pulse_end - at, step);
            at = args.pulse_end;
        }
        let phase = if at < args.pulse_end { &red } else { &decay };
        x = integrate_quadratic(phase, x, t - at, step);
        at = t;
        integrated.push(x);
    }
    let diffs: Vec<f64> = closed.iter().zip(&integrated).map(|(a, b)| (a - b).abs()).collect();
    let max_diff = diffs.iter().fold(0.0_f64, |a, &d| a.max(d));
    Ok(match format {
        Format::Csv => csv_table(
            &[
                ("max_abs_diff", format_float(max_diff)),
                ("x_hat", format_float(red.x_hat)),
                ("k1", format_float(red.k1)),
                ("k2", format_float(red.k2)),
                ("k3", format_float(red.k3)),
            ],
            &["t", "x_closed_form", "x_integrated", "abs_diff"],
            (0..times.len()).map(|i| floats(&[times[i], closed[i], integrated[i], diffs[i]])),
        ),
        Format::Json => pretty(&serde_json::json!({
            "max_abs_diff": max_diff,
            "reduction": red,
            "t": times,
            "x_closed_form": closed,
            "x_integrated": integrated,
            "abs_diff": diffs,
        }))?,
        Format::Svg => svg::render(&[Panel {
            title: format!("rectangular pulse, b0 = {}, T = {}", args.b0, args.pulse_end),
            x_label: "t".into(),
            series: vec![
                Series::new("closed form", &times, &closed),
                Series::new("integrated", &times, &integrated),
            ],
        }]),
    })
}

fn load_input(args: &InputArgs) -> Result<Trajectory<f64>, AppError> {
    let path = args
        .input
        .as_deref()
        .ok_or_else(|| AppError::Usage("--input is required".into()))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let text = std::fs::read_to_string(path).map_err(|e| input_error(path, e))?;
        return Ok(trajectory_from_json(&text)?);
    }
    let schema = CsvSchema {
        t: args.t_col.clone(),
        budget: args.budget_col.clone(),
        response: args.response_col.clone(),
    };
    let records = load_csv(path, &schema)?;
    let config = match args.market_potential {
        Some(m) => NormalizationConfig::new(m),
        None => NormalizationConfig::from_records(&records)?,
    };
    Ok(normalize(&records, &config)?)
}

fn input_error(path: &Path, e: std::io::Error) -> AppError {
    AppError::Run(gvw::Error::Input {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn fitted_curve(data: &Trajectory<f64>, report: &FitReport) -> gvw::Result<Vec<f64>> {
    let times = data.times();
    let budget = PiecewiseConstant::new(times.clone(), data.budgets());
    Ok(simulate(&report.params, &budget, data.shares()[0], &times)?.shares())
}

fn fit_cmd(args: &FitArgs, format: Format, seed: u64) -> Result<String, AppError> {
    let data = load_input(&args.input)?;
    let mut problem = EstimationProblem::new(data);
    problem.seed = seed;
    problem.multistart_count = args.starts;
    let report = match args.method {
        MethodArg::Dnn => fit_gvw(&problem)?,
        MethodArg::Fd => fit_gvw_fd(&problem)?,
    };
    eprintln!("rho alpha beta delta mse\n{}", report.table_row());
    Ok(match format {
        Format::Json => report.to_json()? + "\n",
        Format::Csv => {
            let p = &report.params;
            csv_table(
                &[
                    ("method", serde_json::to_value(report.method)?.as_str().unwrap_or_default().to_string()),
                    ("alpha_identifiable", report.alpha_identifiable.to_string()),
                    ("starts", report.starts_tried.to_string()),
                ],
                &["rho", "alpha", "beta", "delta", "mse"],
                [floats(&[p.rho, p.alpha, p.beta, p.delta, report.residual_mse])],
            )
        }
        Format::Svg => {
            let data = &problem.data;
            let t = data.times();
            svg::render(&[Panel {
                title: "observed and fitted share".into(),
                x_label: "t".into(),
                series: vec![
                    Series::new("observed", &t, &data.shares()),
                    Series::new("fitted", &t, &fitted_curve(data, &report)?),
                ],
            }])
        }
    })
}

fn steady_cmd(args: &SteadyArgs, format: Format) -> Result<String, AppError> {
    let params = args.model.params()?;
    let budgets = args.grid.budgets()?;
    let threshold = elasticity_threshold(&params)?;
    let mut shares = Vec::with_capacity(budgets.len());
    let mut roundtrip = Vec::with_capacity(budgets.len());
    for &b in &budgets {
        let x = steady_share(&params, b)?;
        shares.push(x);
        roundtrip.push((steady_budget(&params, x)? - b).abs() / b);
    }
    Ok(match format {
        Format::Csv => csv_table(
            &[("threshold", format_float(threshold))],
            &["b_bar", "x_bar", "roundtrip_rel_err"],
            (0..budgets.len()).map(|i| floats(&[budgets[i], shares[i], roundtrip[i]])),
        ),
        Format::Json => pretty(&serde_json::json!({
            "threshold": threshold,
            "b_bar": budgets,
            "x_bar": shares,
            "roundtrip_rel_err": roundtrip,
        }))?,
        Format::Svg => svg::render(&[Panel {
            title: format!("steady-state share, threshold {threshold:.4}"),
            x_label: "budget".into(),
            series: vec![Series::new("steady share", &budgets, &shares)],
        }]),
    })
}

fn sensitivity_cmd(args: &SensitivityArgs, format: Format) -> Result<String, AppError> {
    let base = GvwParams::new(args.rho, args.alpha, args.beta, args.delta)?;
    let budgets = args.grid.budgets()?;
    let (index, name, default_values) = match args.vary {
        VaryArg::Alpha => (SweepIndex::Alpha, "alpha", vec![0.2, 0.4, 0.6, 0.8, 1.0]),
        VaryArg::Beta => (SweepIndex::Beta, "beta", vec![0.2, 0.4, 0.6, 0.8, 1.0]),
    };
    let values = args.values.clone().unwrap_or(default_values);
    if values.is_empty() {
        return Err(AppError::Usage("--values needs at least one value".into()));
    }
    let mut curves = Vec::new();
    for curve in sensitivity_sweep(&base, index, &values, &budgets) {
        let shape = curve.shape()?;
        let points = curve.points?;
        curves.push((curve.value, shape, points));
    }
    Ok(match format {
        Format::Csv => {
            let summary: Vec<(String, String)> = curves
                .iter()
                .map(|(v, shape, _)| (format!("shape[{name}={}]", format_float(*v)), shape.label().to_string()))
                .collect();
            let rows = curves.iter().flat_map(|(v, shape, points)| {
                points.iter().map(move |&(b, x)| {
                    vec![format_float(*v), shape.label().to_string(), format_float(b), format_float(x)]
                })
            });
            csv_table(&summary, &[name, "shape", "budget", "share"], rows)
        }
        Format::Json => pretty(&serde_json::json!({
            "vary": name,
            "budgets": budgets,
            "curves": curves.iter().map(|(v, shape, points)| serde_json::json!({
                "value": v,
                "shape": shape.label(),
                "shares": points.iter().map(|p| p.1).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        }))?,
        Format::Svg => svg::render(&[Panel {
            title: format!("steady-state share while varying {name}"),
            x_label: "ln budget".into(),
            series: curves
                .iter()
                .map(|(v, shape, points)| {
                    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
                    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
                    Series::new(format!("{name} = {v} ({})", shape.label()), &xs, &ys)
                })
                .collect(),
        }]),
    })
}

fn compare_cmd(args: &CompareArgs, format: Format, seed: u64) -> Result<String, AppError> {
    let given_gvw = match (args.rho, args.alpha, args.beta, args.delta) {
        (Some(r), Some(a), Some(b), Some(d)) => Some(GvwParams::new(r, a, b, d)?),
        (None, None, None, None) => None,
        _ => return Err(AppError::Usage("give all of --rho --alpha --beta --delta or none".into())),
    };
    let given_econ = match (args.c0, args.c1, args.c2) {
        (Some(c0), Some(c1), Some(c2)) => Some(EconParams::new(c0, c1, c2)?),
        (None, None, None) => None,
        _ => return Err(AppError::Usage("give all of --c0 --c1 --c2 or none".into())),
    };
    let data = if given_gvw.is_none() || given_econ.is_none() {
        if args.input.input.is_none() {
            return Err(AppError::Usage(
                "each model needs parameters on the command line or --input data to fit".into(),
            ));
        }
        Some(load_input(&args.input)?)
    } else {
        None
    };
    let gvw = match given_gvw {
        Some(p) => p,
        None => {
            let mut problem = EstimationProblem::new(data.clone().expect("loaded above"));
            problem.seed = seed;
            fit_gvw_fd(&problem)?.params
        }
    };
    let econ = match given_econ {
        Some(p) => p,
        None => fit_ols(data.as_ref().expect("loaded above"))?.params,
    };
    if !(args.b_min > 0.0 && args.b_max > args.b_min && args.points >= 3) {
        return Err(AppError::Usage("budget grid needs 0 < b-min < b-max and at least 3 points".into()));
    }
    let scenario = ComparisonScenario {
        pulse: PulseSpec::new(args.b0, args.pulse_end, args.x0)?,
        horizon: args.horizon,
        budget_grid: log_spaced(args.b_min, args.b_max, args.points),
    };
    let cmp = compare_models(&gvw, &econ, &scenario)?;
    let label = |v: serde_json::Value| v.as_str().unwrap_or_default().to_string();
    Ok(match format {
        Format::Json => cmp.to_json()? + "\n",
        Format::Csv => {
            let summary = [
                ("rho", format_float(gvw.rho)),
                ("alpha", format_float(gvw.alpha)),
                ("beta", format_float(gvw.beta)),
                ("delta", format_float(gvw.delta)),
                ("c0", format_float(econ.c0)),
                ("c1", format_float(econ.c1)),
                ("c2", format_float(econ.c2)),
                ("gvw_decay_rate", format_float(cmp.gvw.decay_rate)),
                ("econbase_decay_rate", format_float(cmp.econbase.decay_rate)),
                ("gvw_returns", label(serde_json::to_value(cmp.gvw.returns)?)),
                ("econbase_returns", label(serde_json::to_value(cmp.econbase.returns)?)),
                ("econbase_exponent", format_float(cmp.econ_steady_exponent)),
                ("saturation", cmp.saturation_verdict.clone()),
            ];
            let pulse_rows = (0..cmp.times.len()).map(|i| {
                let mut row = vec!["pulse".to_string()];
                row.extend(floats(&[cmp.times[i], cmp.gvw.pulse[i], cmp.econbase.pulse[i]]));
                row
            });
            let steady_rows = (0..scenario.budget_grid.len()).map(|i| {
                let mut row = vec!["steady".to_string()];
                row.extend(floats(&[scenario.budget_grid[i], cmp.gvw.steady[i], cmp.econbase.steady[i]]));
                row
            });
            csv_table(&summary, &["series", "x", "gvw", "econbase"], pulse_rows.chain(steady_rows))
        }
        Format::Svg => svg::render(&[
            Panel {
                title: "rectangular pulse".into(),
                x_label: "t".into(),
                series: vec![
                    Series::new("GVW share", &cmp.times, &cmp.gvw.pulse),
                    Series::new("Econbase sales", &cmp.times, &cmp.econbase.pulse),
                ],
            },
            Panel {
                title: format!("steady state: {}", cmp.saturation_verdict),
                x_label: "budget".into(),
                series: vec![
                    Series::new("GVW share", &scenario.budget_grid, &cmp.gvw.steady),
                    Series::new("Econbase sales", &scenario.budget_grid, &cmp.econbase.steady),
                ],
            },
        ]),
    })
}

fn run(cli: &Cli) -> Result<String, AppError> {
    match &cli.command {
        Command::Simulate(a) => simulate_cmd(a, cli.format, cli.seed),
        Command::Pulse(a) => pulse_cmd(a, cli.format),
        Command::Fit(a) => fit_cmd(a, cli.format, cli.seed),
        Command::Steady(a) => steady_cmd(a, cli.format),
        Command::Sensitivity(a) => sensitivity_cmd(a, cli.format),
        Command::Compare(a) => compare_cmd(a, cli.format, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let written = run(&cli).and_then(|text| match &cli.output {
        Some(path) => std::fs::write(path, text).map_err(|e| input_error(path, e)),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes()).map_err(AppError::from)
        }
    });
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(message)) => Cli::command()
            .error(clap::error::ErrorKind::ArgumentConflict, message)
            .exit(),
        Err(AppError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
