use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use oedctl_core::bench::{run_bench, BenchConfig};
use oedctl_core::examples::{
    portfolio_synthetic, sclqr_paper, synthetic_family, QMode, M1, M1_INITIAL_STATES,
    SCLQR_INITIAL_STATES,
};
use oedctl_core::ipiter::{reference_trajectory, DEFAULT_MAX_ITER, DEFAULT_TOL};
use oedctl_core::sclqr::{fitted_decay_rate, simulate_sclqr, solve_sclqr, CostForm};
use oedctl_core::verify::{property_checks, PropertyCheck, PropertyResult};
use oedctl_core::{BarrierConfig, ControlLaw, ProblemDef, SimConfig, VLaw};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "oedctl",
    version,
    about = "Closed-form optimal tracking control: simulations, references, timing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the closed loop and write `t,x..,y..,sigma,tau_c` CSV.
    Run(RunArgs),
    /// Solve the instantaneous problem along a time grid (warm-started).
    Solve(SolveArgs),
    /// Time control evaluations on the synthetic family and fit the cubic trend.
    Bench(BenchArgs),
    /// Solve and simulate the 3-D state-constrained LQ example.
    Sclqr(SclqrArgs),
    /// Run the property suite.
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleKind {
    M1,
    Synthetic,
    Portfolio,
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long, value_enum, default_value = "m1")]
    example: ExampleKind,
    /// State dimension of the synthetic and portfolio examples.
    #[arg(long, default_value_t = 32)]
    dx: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Cost weight of the synthetic family: identity, diagonal or spd.
    #[arg(long, default_value = "identity")]
    mode: QMode,
    /// Designed barrier ratio K_R/Q.
    #[arg(long, default_value_t = 1e4, conflicts_with = "p2")]
    k_rq: f64,
    /// Fixed barrier weight instead of the designed one.
    #[arg(long)]
    p2: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Law {
    Oed,
    Tracking,
    Constrained,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 100.0)]
    kx: f64,
    #[arg(long, default_value_t = 5e-4)]
    dt: f64,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    /// Comma-separated initial state.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x0: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "oed")]
    law: Law,
    /// Gain of the tracking law.
    #[arg(long, default_value_t = 100.0)]
    k_chi: f64,
    /// Hold the first-stage control over each step.
    #[arg(long)]
    zoh: bool,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Sample spacing.
    #[arg(long, default_value_t = 0.05)]
    dt: f64,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long, default_value_t = 20.0)]
    t_final: f64,
    /// Starting point of the first solve.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x0: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "32,64,128,256")]
    dims: Vec<usize>,
    #[arg(long, default_value = "identity")]
    mode: QMode,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    samples: usize,
    #[arg(long, default_value_t = 5)]
    warmup: usize,
    #[arg(long, default_value_t = 500.0)]
    kx: f64,
    #[arg(long, default_value_t = 5e-4)]
    dt: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Exact,
    Printed,
}

#[derive(Args)]
struct SclqrArgs {
    #[arg(long, value_enum, default_value = "exact")]
    form: Form,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    #[arg(long, default_value_t = 0.5)]
    t_final: f64,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x0: Option<Vec<f64>>,
    /// Trajectory CSV `t,x1,x2,x3,y1,cost`; the summary goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Numeric {
        kind: &'static str,
        message: String,
        t: Option<f64>,
    },
}

impl From<oedctl_core::Error> for Failure {
    fn from(e: oedctl_core::Error) -> Self {
        match e {
            oedctl_core::Error::InvalidConfig(m) => Failure::Usage(m),
            e => Failure::Numeric {
                kind: e.kind(),
                message: e.to_string(),
                t: None,
            },
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Numeric {
            kind: "Io",
            message: e.to_string(),
            t: None,
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Numeric {
            kind: "Io",
            message: e.to_string(),
            t: None,
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn sink(out: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(io::BufWriter::new(File::create(path)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn barrier(args: &ProblemArgs) -> CliResult<BarrierConfig> {
    let cfg = match args.p2 {
        Some(p2) => BarrierConfig::fixed(p2),
        None => BarrierConfig::designed(args.k_rq),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn build_problem(args: &ProblemArgs) -> CliResult<Box<dyn ProblemDef>> {
    let even = args.dx >= 4 && args.dx.is_multiple_of(2);
    Ok(match args.example {
        ExampleKind::M1 => Box::new(M1),
        ExampleKind::Synthetic if even => Box::new(synthetic_family(args.dx, args.seed, args.mode)),
        ExampleKind::Portfolio if args.dx >= 4 => Box::new(portfolio_synthetic(args.dx, args.seed)),
        _ => {
            return Err(Failure::Usage(format!(
                "--dx {} is not valid for this example",
                args.dx
            )))
        }
    })
}

fn initial_state(
    args: &ProblemArgs,
    dx: usize,
    given: &Option<Vec<f64>>,
) -> CliResult<DVector<f64>> {
    match given {
        Some(v) if v.len() == dx => Ok(DVector::from_column_slice(v)),
        Some(v) => Err(Failure::Usage(format!(
            "--x0 has {} entries, expected {dx}",
            v.len()
        ))),
        None => Ok(match args.example {
            ExampleKind::M1 => DVector::from_row_slice(&M1_INITIAL_STATES[0]),
            ExampleKind::Synthetic => DVector::zeros(dx),
            ExampleKind::Portfolio => DVector::from_element(dx, 1.0 / dx as f64),
        }),
    }
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

fn run(args: RunArgs) -> CliResult<()> {
    let p = build_problem(&args.problem)?;
    let cfg = barrier(&args.problem)?;
    let dims = p.dims();
    let x0 = initial_state(&args.problem, dims.dx, &args.x0)?;
    let control_law = match args.law {
        Law::Oed => ControlLaw::Oed,
        Law::Tracking => ControlLaw::TrackingFromSolution { k_chi: args.k_chi },
        Law::Constrained => ControlLaw::Constrained(VLaw::Zero),
    };
    let sim = SimConfig {
        t0: args.t0,
        t_final: args.t_final,
        dt: args.dt,
        k_x: args.kx,
        control_law,
        zoh: args.zoh,
    };
    let traj = oedctl_core::sim::simulate_closed_loop(p.as_ref(), &sim, &cfg, &x0)?;

    let mut w = csv::Writer::from_writer(sink(&args.out)?);
    let mut header = vec!["t".to_string()];
    header.extend(numbered("x", dims.dx));
    header.extend(numbered("y", dims.dy));
    header.extend(["sigma".to_string(), "tau_c".to_string()]);
    w.write_record(&header)?;
    for k in 0..traj.len() {
        let mut row = vec![traj.times[k].to_string()];
        row.extend(traj.states[k].iter().map(f64::to_string));
        row.extend(traj.outputs[k].iter().map(f64::to_string));
        row.push(traj.sigma_values[k].to_string());
        row.push(traj.tau_c.get(k).map(f64::to_string).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    match traj.failure {
        Some(f) => Err(Failure::Numeric {
            kind: f.kind,
            message: f.message,
            t: Some(f.t),
        }),
        None => Ok(()),
    }
}

fn solve(args: SolveArgs) -> CliResult<()> {
    let p = build_problem(&args.problem)?;
    let cfg = barrier(&args.problem)?;
    let dx = p.dims().dx;
    let chi0 = initial_state(&args.problem, dx, &args.x0)?;
    let span = (args.t_final - args.t0) / args.dt;
    let n = span.round();
    if !(args.dt > 0.0) || !(n >= 1.0) || (span - n).abs() > 1e-9 * n {
        return Err(Failure::Usage(
            "(t-final - t0)/dt must be a positive integer".into(),
        ));
    }
    let times: Vec<f64> = (0..=n as usize)
        .map(|i| args.t0 + i as f64 * args.dt)
        .collect();
    let reference = reference_trajectory(p.as_ref(), &cfg, &times, &chi0, args.tol, args.max_iter)?;

    let mut w = csv::Writer::from_writer(sink(&args.out)?);
    let mut header = vec!["t".to_string()];
    header.extend(numbered("chi", dx));
    header.extend(["iterations".to_string(), "jump_flag".to_string()]);
    w.write_record(&header)?;
    for s in &reference.samples {
        let mut row = vec![s.t.to_string()];
        row.extend(s.chi.iter().map(f64::to_string));
        row.push(s.iterations.to_string());
        row.push(u8::from(s.jump).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn bench(args: BenchArgs) -> CliResult<()> {
    let cfg = BenchConfig {
        dims: args.dims,
        mode: args.mode,
        seed: args.seed,
        samples: args.samples,
        warmup: args.warmup,
        k_x: args.kx,
        dt: args.dt,
    };
    let report = run_bench(&cfg)?;
    let per_dim: Vec<_> = report
        .per_dim
        .iter()
        .map(|d| {
            let s = &d.summary;
            json!({
                "d_x": d.d_x,
                "median": s.median,
                "q25": s.q25,
                "q75": s.q75,
                "min": s.min,
                "max": s.max,
                "mad_over_median": s.mad_over_median,
            })
        })
        .collect();
    let doc = json!({
        "dims": report.dims,
        "mode": report.mode.as_str(),
        "per_dim": per_dim,
        "trend": {
            "p1": report.trend.p1,
            "p2": report.trend.p2,
            "r_squared": report.trend.r_squared,
        },
    });
    let mut w = sink(&args.out)?;
    serde_json::to_writer_pretty(&mut w, &doc).map_err(io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn sclqr(args: SclqrArgs) -> CliResult<()> {
    let m = sclqr_paper();
    let form = match args.form {
        Form::Exact => CostForm::Exact,
        Form::Printed => CostForm::Printed,
    };
    let x0 = match &args.x0 {
        Some(v) if v.len() == 3 => DVector::from_column_slice(v),
        Some(v) => {
            return Err(Failure::Usage(format!(
                "--x0 has {} entries, expected 3",
                v.len()
            )))
        }
        None => DVector::from_row_slice(&SCLQR_INITIAL_STATES[0]),
    };
    let (_, sol) = solve_sclqr(&m, form)?;
    let traj = simulate_sclqr(&m, &sol, &x0, args.dt, args.t_final)?;
    let outputs: Vec<f64> = traj.states.iter().map(|x| (&m.h * x)[0]).collect();
    let magnitudes: Vec<f64> = outputs.iter().map(|y| y.abs()).collect();
    let floor = 1e-12 * magnitudes[0];
    let rate = if magnitudes[0] > 0.0 {
        Some(fitted_decay_rate(&traj.times, &magnitudes, floor)?)
    } else {
        None
    };
    if let Some(path) = &args.out {
        let mut w = csv::Writer::from_writer(sink(&Some(path.clone()))?);
        w.write_record(["t", "x1", "x2", "x3", "y1", "cost"])?;
        for (k, y) in outputs.iter().enumerate() {
            let mut row = vec![traj.times[k].to_string()];
            row.extend(traj.states[k].iter().map(f64::to_string));
            row.push(y.to_string());
            row.push(traj.running_cost[k].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    let doc = json!({
        "form": match args.form { Form::Exact => "exact", Form::Printed => "printed" },
        "x0": x0.as_slice(),
        "settle_time": sol.settle_time,
        "regularization_eps": sol.regularization_eps,
        "gain": sol.gain.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
        "output_decay_rate": rate,
        "k_x": m.k_x,
        "cost": traj.running_cost.last().copied(),
    });
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &doc).map_err(io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn worker_threads() -> CliResult<Option<usize>> {
    match std::env::var("OEDCTL_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::Usage(format!(
                "OEDCTL_THREADS must be a positive integer, got `{v}`"
            ))),
        },
    }
}

fn verify() -> CliResult<bool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_threads()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure::Usage(e.to_string()))?;
    let checks = property_checks();
    let results: Vec<PropertyResult> = pool.install(|| {
        use rayon::prelude::*;
        checks.par_iter().map(PropertyCheck::evaluate).collect()
    });
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = io::stdout().lock();
    for r in &results {
        writeln!(
            out,
            "{:<width$}  {}  observed {:.3e}  bound {:.1e}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.observed,
            r.bound
        )?;
    }
    let passed = results.iter().filter(|r| r.passed).count();
    writeln!(out, "{passed}/{} properties passed", results.len())?;
    Ok(passed == results.len())
}

fn dispatch(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Run(a) => run(a).map(|_| true),
        Command::Solve(a) => solve(a).map(|_| true),
        Command::Bench(a) => bench(a).map(|_| true),
        Command::Sclqr(a) => sclqr(a).map(|_| true),
        Command::Verify => verify(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Failure::Numeric { kind, message, t }) => {
            eprintln!("{}", json!({ "error": kind, "message": message, "t": t }));
            ExitCode::from(2)
        }
    }
}
