//! Command-line front end: configuration in, JSON/CSV reports out.
//!
//! Exit codes: 0 on success, 1 on validation or configuration errors,
//! 2 when a configured acceptance threshold fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use evolex::config::{ModelSpec, RunConfig, TestFunctionSpec};
use evolex::expansion::ExpansionSet;
use evolex::grid::StateField;
use evolex::report::{
    analyze_report, check_verdict, curve_data, field_csv, matrix_csv, term_tables, Envelope,
};
use evolex::residual::residual_report;
use evolex::sweep::{run_sweep, SlopeThreshold};
use evolex::{ChainAlgebra64, ChainModel64, TestFunction64};

#[derive(Parser)]
#[command(
    name = "evolex",
    version,
    about = "Expansion laboratory for switched-velocity Markov evolutions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a model and report its derived chain algebra.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the expansion and emit term tables and sampled fields.
    Expand {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the expansion order from the config.
        #[arg(long)]
        order: Option<usize>,
        /// Also verify recursion residuals and the transform cross-check.
        #[arg(long)]
        check: bool,
    },
    /// Solve the evolution exactly at one epsilon and time.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        time: Option<f64>,
    },
    /// Monte Carlo estimates against the exact solver.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Residual and remainder diagnostics for one truncation.
    Residual {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        time: Option<f64>,
    },
    /// Epsilon sweep with slope fitting and threshold verdicts.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the list of sweep orders, e.g. `--order 2`.
        #[arg(long)]
        order: Option<usize>,
        /// Comma-separated epsilon list overriding the config.
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List built-in models or print a ready-to-run config for one.
    Example {
        #[arg(long)]
        list: bool,
        #[arg(long)]
        name: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match command {
        Command::Analyze { config, out } => analyze(&config, out.as_deref()),
        Command::Expand {
            config,
            out,
            order,
            check,
        } => expand(&config, out.as_deref(), order, check),
        Command::Solve {
            config,
            out,
            eps,
            time,
        } => solve(&config, out.as_deref(), eps, time),
        Command::Simulate {
            config,
            out,
            seed,
            eps,
            paths,
        } => simulate(&config, out.as_deref(), seed, eps, paths),
        Command::Residual {
            config,
            out,
            order,
            eps,
            time,
        } => residual(&config, out.as_deref(), order, eps, time),
        Command::Sweep {
            config,
            out,
            order,
            eps,
            seed,
        } => sweep(&config, out.as_deref(), order, eps, seed),
        Command::Example { list, name } => example(list, name),
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Box<dyn std::error::Error>> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config `{}`: {e}", path.display()))?;
    let mut cfg = RunConfig::parse_str(&text)?;
    // Resolve sample files relative to the config location.
    if let TestFunctionSpec::CsvPath(ref rel) = cfg.test_function {
        let base = path.parent().unwrap_or(Path::new("."));
        let full = base.join(rel);
        let raw = fs::read_to_string(&full)
            .map_err(|e| format!("cannot read samples `{}`: {e}", full.display()))?;
        let values: Vec<f64> = raw
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("bad sample value in `{}`: {e}", full.display()))?;
        cfg.test_function = TestFunctionSpec::Samples(values);
    }
    Ok(cfg)
}

fn materialize(
    cfg: &RunConfig,
) -> Result<
    (
        ChainModel64,
        ChainAlgebra64,
        evolex::ModeGrid,
        TestFunction64,
    ),
    Box<dyn std::error::Error>,
> {
    let model: ChainModel64 = cfg.model()?;
    let grid = cfg.grid(&model)?;
    let f: TestFunction64 = cfg.test_function(&grid)?;
    let algebra = ChainAlgebra64::new(model.clone(), &cfg.tolerances)?;
    Ok((model, algebra, grid, f))
}

fn emit<P: Serialize>(
    envelope: &Envelope<P>,
    out: Option<&Path>,
    filename: &str,
) -> Result<(), Box<dyn std::error::Error>> {
    let json = envelope.to_json();
    println!("{json}");
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(filename), json)?;
    }
    Ok(())
}

fn write_out(out: Option<&Path>, name: &str, text: &str) -> Result<(), Box<dyn std::error::Error>> {
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), text)?;
    }
    Ok(())
}

fn family_n(cfg: &RunConfig) -> Option<usize> {
    if let ModelSpec::Builtin(name) = &cfg.model {
        for prefix in ["cyclic(", "uniform("] {
            if let Some(rest) = name.trim().strip_prefix(prefix) {
                if let Some(num) = rest.strip_suffix(')') {
                    return num.trim().parse().ok();
                }
            }
        }
    }
    None
}

fn analyze(path: &Path, out: Option<&Path>) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let cfg = load_config(path)?;
    let (_, algebra, _, _) = materialize(&cfg)?;
    let payload = analyze_report(&algebra, family_n(&cfg));

    write_out(
        out,
        "stationary.csv",
        &matrix_csv(std::slice::from_ref(&payload.stationary)),
    )?;
    write_out(out, "projector.csv", &matrix_csv(&payload.projector))?;
    write_out(out, "deviation.csv", &matrix_csv(&payload.deviation))?;
    if let Some(ref tensor) = payload.diffusion_tensor {
        write_out(out, "diffusion.csv", &matrix_csv(tensor))?;
    }
    emit(&Envelope::new(cfg, payload), out, "analyze.json")?;
    Ok(ExitCode::SUCCESS)
}

fn expand(
    path: &Path,
    out: Option<&Path>,
    order: Option<usize>,
    check: bool,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut cfg = load_config(path)?;
    if let Some(n) = order {
        cfg.order = n;
    }
    let (_, algebra, grid, f) = materialize(&cfg)?;
    let set = ExpansionSet::build(&algebra, &grid, &f, cfg.order, &cfg.tolerances)?;

    let tables = term_tables(&set)?;

    // Sampled real fields: regular terms at the configured solve time,
    // layer terms at a few fast times.
    for n in 0..=set.order() {
        let field = set.evaluate_regular(n, cfg.solve.time)?;
        let (samples, _) = field.to_grid(&grid)?;
        write_out(
            out,
            &format!("regular_{n}.csv"),
            &field_csv(&grid, &samples),
        )?;
        if n >= 1 {
            let field = set.evaluate_layer(n, 1.0)?;
            let (samples, _) = field.to_grid(&grid)?;
            write_out(out, &format!("layer_{n}.csv"), &field_csv(&grid, &samples))?;
        }
    }

    let verdict = if check {
        Some(check_verdict(&algebra, &set)?)
    } else {
        None
    };
    let failed = verdict.as_ref().is_some_and(|v| !v.passed);

    #[derive(Serialize)]
    struct ExpandPayload {
        order: usize,
        terms: Vec<evolex::report::TermTable>,
        check: Option<evolex::report::CheckVerdict>,
    }
    emit(
        &Envelope::new(
            cfg,
            ExpandPayload {
                order: set.order(),
                terms: tables,
                check: verdict,
            },
        ),
        out,
        "expand.json",
    )?;
    Ok(if failed {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn solve(
    path: &Path,
    out: Option<&Path>,
    eps: Option<f64>,
    time: Option<f64>,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut cfg = load_config(path)?;
    if let Some(e) = eps {
        cfg.solve.eps = e;
    }
    if let Some(t) = time {
        cfg.solve.time = t;
    }
    let (model, _, grid, f) = materialize(&cfg)?;
    let field: StateField<f64> =
        evolex::exact::exact_solution(&model, &f, &grid, cfg.solve.eps, cfg.solve.time)?;
    let (samples, imag_leak) = field.to_grid(&grid)?;
    write_out(out, "solution.csv", &field_csv(&grid, &samples))?;

    #[derive(Serialize)]
    struct ModeCoeff {
        wave: Vec<i64>,
        /// One `[re, im]` pair per state.
        values: Vec<[f64; 2]>,
    }
    #[derive(Serialize)]
    struct SolvePayload {
        eps: f64,
        time: f64,
        sup_norm: f64,
        l2_norm: f64,
        imaginary_leak: f64,
        coefficients: Vec<ModeCoeff>,
    }
    let dim = grid.dim();
    let coefficients = field
        .values
        .iter()
        .enumerate()
        .map(|(m, v)| ModeCoeff {
            wave: grid.mode_at(m)[..dim].to_vec(),
            values: v.iter().map(|z| [z.re, z.im]).collect(),
        })
        .collect();
    let payload = SolvePayload {
        eps: cfg.solve.eps,
        time: cfg.solve.time,
        sup_norm: field.sup_norm(&grid)?,
        l2_norm: field.l2_norm(&grid)?,
        imaginary_leak: imag_leak,
        coefficients,
    };
    emit(&Envelope::new(cfg, payload), out, "solve.json")?;
    Ok(ExitCode::SUCCESS)
}

fn simulate(
    path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    eps: Option<f64>,
    paths: Option<usize>,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut cfg = load_config(path)?;
    if let Some(s) = seed {
        cfg.mc.seed = s;
    }
    if let Some(e) = eps {
        cfg.mc.eps = e;
    }
    if let Some(p) = paths {
        cfg.mc.paths = p;
    }
    let (model, _, grid, f) = materialize(&cfg)?;

    let exact = evolex::exact::exact_solution(&model, &f, &grid, cfg.mc.eps, cfg.mc.time)?;

    #[derive(Serialize)]
    struct QueryResult {
        x: Vec<f64>,
        mean: Vec<f64>,
        std_error: Vec<f64>,
        exact: Vec<f64>,
        z_scores: Vec<f64>,
    }
    #[derive(Serialize)]
    struct SimulatePayload {
        eps: f64,
        time: f64,
        paths: usize,
        seed: u64,
        sigma_gate: f64,
        points: Vec<QueryResult>,
        comparisons: usize,
        within_gate: usize,
        agreement: f64,
    }

    let sigma_gate = 3.5;
    let mut points = Vec::new();
    let mut comparisons = 0usize;
    let mut within = 0usize;
    for qi in 0..cfg.mc.points {
        let frac = qi as f64 / cfg.mc.points as f64;
        let x = vec![2.0 * std::f64::consts::PI * frac; model.dim()];
        let est = evolex::mc::mc_estimate(
            &model,
            &f,
            &grid,
            &x,
            cfg.mc.time,
            cfg.mc.eps,
            cfg.mc.paths,
            cfg.mc.seed.wrapping_add(qi as u64),
        )?;
        let exact_here: Vec<f64> = (0..model.n_states())
            .map(|s| {
                let coeffs: Vec<evolex::C<f64>> = exact.values.iter().map(|v| v[s]).collect();
                grid.evaluate_at(&coeffs, &x).re
            })
            .collect();
        let z_scores: Vec<f64> = (0..model.n_states())
            .map(|s| {
                let err = (est.mean[s] - exact_here[s]).abs();
                if est.std_error[s] > 0.0 {
                    err / est.std_error[s]
                } else if err == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        for z in &z_scores {
            comparisons += 1;
            if *z <= sigma_gate {
                within += 1;
            }
        }
        points.push(QueryResult {
            x,
            mean: est.mean.iter().copied().collect(),
            std_error: est.std_error.iter().copied().collect(),
            exact: exact_here,
            z_scores,
        });
    }

    let payload = SimulatePayload {
        eps: cfg.mc.eps,
        time: cfg.mc.time,
        paths: cfg.mc.paths,
        seed: cfg.mc.seed,
        sigma_gate,
        points,
        comparisons,
        within_gate: within,
        agreement: within as f64 / comparisons.max(1) as f64,
    };
    emit(&Envelope::new(cfg, payload), out, "simulate.json")?;
    Ok(ExitCode::SUCCESS)
}

fn residual(
    path: &Path,
    out: Option<&Path>,
    order: Option<usize>,
    eps: Option<f64>,
    time: Option<f64>,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut cfg = load_config(path)?;
    if let Some(n) = order {
        cfg.order = n;
    }
    if let Some(e) = eps {
        cfg.solve.eps = e;
    }
    if let Some(t) = time {
        cfg.solve.time = t;
    }
    let (_, algebra, grid, f) = materialize(&cfg)?;
    let set = ExpansionSet::build(&algebra, &grid, &f, cfg.order, &cfg.tolerances)?;
    let report = residual_report(&algebra, &set, &f, cfg.order, cfg.solve.eps, cfg.solve.time)?;
    emit(&Envelope::new(cfg, report), out, "residual.json")?;
    Ok(ExitCode::SUCCESS)
}

fn sweep(
    path: &Path,
    out: Option<&Path>,
    order: Option<usize>,
    eps: Option<String>,
    seed: Option<u64>,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut cfg = load_config(path)?;
    if let Some(n) = order {
        cfg.sweep.orders = vec![n];
    }
    if let Some(list) = eps {
        cfg.sweep.eps = list
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("bad --eps list: {e}"))?;
    }
    if let Some(s) = seed {
        cfg.mc.seed = s;
    }
    let (_, algebra, grid, f) = materialize(&cfg)?;

    let thresholds: Vec<SlopeThreshold> = cfg
        .sweep
        .orders
        .iter()
        .zip(cfg.sweep.min_slope.iter())
        .map(|(&order, &min_slope)| SlopeThreshold {
            order,
            min_slope,
            min_r_squared: cfg.sweep.min_r_squared,
        })
        .collect();

    let outcome = run_sweep(
        &algebra,
        &grid,
        &f,
        &cfg.sweep.orders.clone(),
        &cfg.sweep.eps.clone(),
        cfg.sweep.time,
        &thresholds,
        &cfg.tolerances,
    )?;

    for case in &outcome.cases {
        let xs: Vec<f64> = case.rows.iter().map(|r| r.epsilon.ln()).collect();
        let rem: Vec<f64> = case
            .rows
            .iter()
            .map(|r| r.remainder_sup.max(1e-300).ln())
            .collect();
        let res: Vec<f64> = case
            .rows
            .iter()
            .map(|r| r.residual_sup.max(1e-300).ln())
            .collect();
        write_out(
            out,
            &format!("remainder_order{}.dat", case.order),
            &curve_data(&xs, &rem),
        )?;
        write_out(
            out,
            &format!("residual_order{}.dat", case.order),
            &curve_data(&xs, &res),
        )?;
    }

    let all_passed = outcome.all_passed;
    emit(&Envelope::new(cfg, outcome), out, "sweep.json")?;
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn example(list: bool, name: Option<String>) -> Result<ExitCode, Box<dyn std::error::Error>> {
    if list || name.is_none() {
        for (n, desc) in evolex::builtin::catalog() {
            println!("{n:24} {desc}");
        }
        return Ok(ExitCode::SUCCESS);
    }
    let name = name.unwrap();
    // Validate the name before printing a config for it.
    evolex::builtin::builtin_model::<f64>(&name, &evolex::Tolerances::default())?;
    let modes = if name == "two_state_telegraph" { 33 } else { 9 };
    println!(
        "[chain]\nbuiltin = {name}\n\n[space]\nmodes = {modes}\n\n\
         [test_function]\nkind = sine\nk = 1\n\n[expansion]\norder = 4\n\n\
         [sweep]\neps = 0.2 0.1 0.05 0.025\ntime = 1.0\norders = 0 1 2\n\
         min_slope = 0.9 1.8 2.5\nmin_r_squared = 0.98\n\n\
         [mc]\npaths = 100000\nseed = 42\npoints = 20\ntime = 1.0\neps = 0.1\n"
    );
    Ok(ExitCode::SUCCESS)
}
