//! Command-line front end: single runs, table reproduction and the
//! verification suite.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use helmhss::assembly::{Cg1Coefficients, Source};
use helmhss::driver::{
    append_reports_csv, reproduce_table, verify_suite, ExperimentConfig, ExperimentOutcome, ExperimentSetup, TableName,
};
use helmhss::multigrid::{write_cycle_log, MgConfig};

#[derive(Parser)]
#[command(name = "helmhss", version, about = "Shifted-HSS preconditioned Helmholtz solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and report iteration counts and rates.
    Run(RunArgs),
    /// Reproduce an iteration-count or rate table.
    Table(TableArgs),
    /// Run the self-verification suite; exits nonzero on any failure.
    Verify,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "primal")]
    formulation: String,
    #[arg(long, default_value = "uniform")]
    source: Source,
    #[arg(long, default_value_t = 16.0)]
    k: f64,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    #[arg(long, default_value_t = 2.0)]
    delta_hat: f64,
    /// Inner solver: `direct` or `mg`.
    #[arg(long, default_value = "direct")]
    inner: String,
    /// W-cycles per inner solve (default 1 primal, 2 mixed).
    #[arg(long)]
    mg_cycles: Option<usize>,
    /// Smoothing steps per level (default 5 primal, 4 mixed).
    #[arg(long)]
    mg_smooth: Option<usize>,
    #[arg(long)]
    mg_levels: Option<usize>,
    /// Direct backend: `auto`, `banded-lu` or `nd-ldlt`.
    #[arg(long, default_value = "auto")]
    factorization: String,
    #[arg(long, default_value_t = 1e-6)]
    rtol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    maxiter: usize,
    /// Append the run report to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the outer residual trace, inner step residuals and
    /// multigrid cycle contractions next to the output.
    #[arg(long)]
    verbose: bool,
    /// Write the assembled operators in Matrix Market format to this directory.
    #[arg(long)]
    dump_operators: Option<PathBuf>,
    /// Write the CG1 solution as `vertex,re,im` rows.
    #[arg(long)]
    dump_solution: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    name: TableName,
    #[arg(long, value_delimiter = ',', default_values_t = vec![16.0, 32.0, 64.0])]
    k: Vec<f64>,
    /// Allow k >= 128.
    #[arg(long)]
    big: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Table CSV path (default `<name>.csv`); the runs go to `<stem>.runs.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> ExperimentConfig {
        let base = if self.formulation == "mixed" {
            MgConfig::mixed()
        } else {
            MgConfig::primal()
        };
        ExperimentConfig {
            formulation: self.formulation.clone(),
            source: self.source,
            k: self.k,
            theta: self.theta,
            c0: self.c0,
            delta_hat: self.delta_hat,
            inner: self.inner.clone(),
            mg: MgConfig {
                levels: self.mg_levels.unwrap_or(base.levels),
                smooth: self.mg_smooth.unwrap_or(base.smooth),
                cycles: self.mg_cycles.unwrap_or(base.cycles),
            },
            factorization: self.factorization.clone(),
            rtol: self.rtol,
            seed: self.seed,
            maxiter: self.maxiter,
            record: self.verbose,
        }
    }

    /// Path for a verbose sidecar file, `<stem>.<suffix>.csv`.
    fn sidecar(&self, suffix: &str) -> PathBuf {
        let out = self.out.clone().unwrap_or_else(|| PathBuf::from("helmhss_run.csv"));
        let stem = out
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("helmhss_run")
            .to_string();
        out.with_file_name(format!("{stem}.{suffix}.csv"))
    }
}

fn dump_operators(dir: &Path, setup: &ExperimentSetup) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let forms = &*setup.forms;
    let f = &*setup.formulation;
    let real = [
        ("mass", &forms.mass),
        ("stiffness", &forms.stiffness),
        ("boundary_mass", &forms.boundary_mass),
        ("gradient", &forms.gradient),
    ];
    for (name, m) in real {
        m.to_complex().write_matrix_market(&dir.join(format!("{name}.mtx")))?;
    }
    let inner: Cg1Coefficients = f.inner_coefficients();
    inner.assemble(forms).write_matrix_market(&dir.join("hss_step.mtx"))?;
    if f.name() == "primal" {
        helmhss::assembly::primal_coefficients(setup.config.k, 0.0)
            .assemble(forms)
            .write_matrix_market(&dir.join("outer.mtx"))?;
    }
    let mut w = fs::File::create(dir.join("sigma_mass.txt"))?;
    for m in &forms.sigma_mass {
        writeln!(w, "{m:.17e}")?;
    }
    Ok(())
}

fn dump_solution(path: &Path, out: &ExperimentOutcome) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "vertex,re,im")?;
    for (i, v) in out.solution().iter().enumerate() {
        writeln!(w, "{i},{:.17e},{:.17e}", v.re, v.im)?;
    }
    w.flush()?;
    Ok(())
}

fn write_step_log(path: &Path, out: &ExperimentOutcome) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "application,step,increment")?;
    for (a, steps) in out.stats.step_residuals.iter().enumerate() {
        for (s, r) in steps.iter().enumerate() {
            writeln!(w, "{},{},{r:.17e}", a + 1, s + 1)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = args.config();
    let setup = ExperimentSetup::new(&cfg)?;
    if let Some(dir) = &args.dump_operators {
        dump_operators(dir, &setup)?;
    }
    let out = setup.run()?;
    let r = &out.report;
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    println!(
        "{} {} k={} theta={} inner={}: {} outer iterations ({} inner steps, {} cycles){}",
        r.formulation,
        r.source,
        r.k,
        r.theta,
        r.inner,
        r.outer_its,
        r.inner_total,
        r.mg_cycles,
        if r.converged { "" } else { " NOT CONVERGED" }
    );
    println!(
        "eta_h={} eta_s={} eta_mg={} dofs={} time={:.2}s",
        fmt(r.eta_h),
        fmt(r.eta_s),
        fmt(r.eta_mg),
        r.dofs,
        r.seconds
    );
    if let Some(path) = &args.out {
        append_reports_csv(path, std::slice::from_ref(r))?;
    }
    if args.verbose {
        out.trace.write_csv(&args.sidecar("trace"))?;
        write_step_log(&args.sidecar("steps"), &out)?;
        if cfg.uses_mg() {
            write_cycle_log(&args.sidecar("cycles"), &out.stats.inner.cycle_contractions)?;
        }
    }
    if let Some(path) = &args.dump_solution {
        dump_solution(path, &out)?;
    }
    Ok(())
}

fn table(args: &TableArgs) -> Result<()> {
    let base = ExperimentConfig {
        seed: args.seed,
        ..ExperimentConfig::default()
    };
    let t = reproduce_table(args.name, &args.k, args.big, &base)?;
    print!("{}", t.format());
    let path = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", args.name.name())));
    t.write_csv(&path)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = matches!(&cli.command, Command::Run(a) if a.verbose);
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if verbose { "info" } else { "warn" }))
        .init();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Table(a) => table(a),
        Command::Verify => {
            let report = verify_suite();
            print!("{}", report.format());
            return if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
