//! Experiment runner: problem setup, outer FGMRES with the shifted-HSS
//! preconditioner, table reproduction and self-verification.

pub mod reference;
pub mod table;
pub mod verify;

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{assemble_core, assemble_load, AssembledForms, Source};
use crate::error::{HelmError, Result};
use crate::hss::{
    formulation_registry, inner_solver_registry, rate, HssConfig, HssFormulation, HssPreconditioner, InnerRequest,
    InnerSolver, PreconditionerStats,
};
use crate::krylov::{fgmres, IterationTrace, KrylovConfig};
use crate::linalgc::vector::norm2;
pub use crate::linalgc::vector::random_vector;
use crate::mesh::{build_mesh, resolution_for, DofMap, Mesh};
use crate::multigrid::MgConfig;

pub use table::{reproduce_table, Table, TableName};
pub use verify::{verify_suite, CheckResult, VerifyReport};

/// Right-hand sides with a 2-norm at or below this are treated as zero: the
/// solution is zero and no outer iteration is run.
pub const ZERO_RHS_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub formulation: String,
    pub source: Source,
    pub k: f64,
    pub theta: f64,
    pub c0: f64,
    pub delta_hat: f64,
    /// Inner solver name (`direct` or `mg`).
    pub inner: String,
    pub mg: MgConfig,
    /// Direct factorization backend (`auto`, `banded-lu`, `nd-ldlt`).
    pub factorization: String,
    pub rtol: f64,
    pub seed: u64,
    pub maxiter: usize,
    /// Keep per-step and per-cycle logs.
    pub record: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            formulation: "primal".into(),
            source: Source::Uniform,
            k: 16.0,
            theta: 1.0,
            c0: 1.0,
            delta_hat: 2.0,
            inner: "direct".into(),
            mg: MgConfig::primal(),
            factorization: "auto".into(),
            rtol: 1e-6,
            seed: 0,
            maxiter: 200,
            record: false,
        }
    }
}

impl ExperimentConfig {
    pub fn hss(&self) -> HssConfig {
        HssConfig {
            k: self.k,
            delta_hat: self.delta_hat,
            theta: self.theta,
        }
    }

    pub fn uses_mg(&self) -> bool {
        self.inner == "mg"
    }

    /// Cells per direction; multigrid runs round up to a coarsenable size.
    pub fn resolution(&self) -> usize {
        let levels = if self.uses_mg() { self.mg.levels } else { 1 };
        resolution_for(self.k, self.c0, levels)
    }

    pub fn validate(&self) -> Result<()> {
        self.hss().validate()?;
        if !(self.c0 > 0.0) {
            return Err(HelmError::InvalidConfig(format!(
                "c0 must be positive, got {}",
                self.c0
            )));
        }
        formulation_registry().get(&self.formulation)?;
        inner_solver_registry().get(&self.inner)?;
        if self.uses_mg() {
            self.mg.validate()?;
        }
        KrylovConfig {
            rtol: self.rtol,
            maxiter: self.maxiter,
            ..KrylovConfig::default()
        }
        .validate()
    }
}

/// One row of the run CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub k: f64,
    pub theta: f64,
    pub c0: f64,
    pub delta_hat: f64,
    pub formulation: String,
    pub source: String,
    pub inner: String,
    pub outer_its: usize,
    pub inner_total: usize,
    pub mg_cycles: usize,
    pub eta_h: Option<f64>,
    pub eta_s: Option<f64>,
    pub eta_mg: Option<f64>,
    pub dofs: usize,
    pub seconds: f64,
    #[serde(skip)]
    pub converged: bool,
    #[serde(skip)]
    pub n_inner: usize,
    #[serde(skip)]
    pub n_cg1: usize,
}

impl ExperimentReport {
    /// Bracketed total of a table cell: inner steps, or W-cycles for
    /// multigrid runs.
    pub fn bracket_total(&self) -> usize {
        if self.inner == "mg" {
            self.mg_cycles
        } else {
            self.inner_total
        }
    }
}

pub fn write_reports_csv(path: &Path, reports: &[ExperimentReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends `reports` to `path`, writing the header only into a new or empty file.
pub fn append_reports_csv(path: &Path, reports: &[ExperimentReport]) -> Result<()> {
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Full output of one run.
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    /// Outer state (CG1 `u`, or stacked `(sigma, u)`).
    pub state: Vec<C64>,
    pub trace: IterationTrace,
    pub stats: PreconditionerStats,
}

impl ExperimentOutcome {
    /// CG1 solution coefficients (the trailing block of the state).
    pub fn solution(&self) -> &[C64] {
        &self.state[self.state.len() - self.report.n_cg1..]
    }
}

/// Mesh, operators and inner solver for one `(formulation, k, inner)`
/// combination; reusable across sources, exponents and seeds.
pub struct ExperimentSetup {
    pub config: ExperimentConfig,
    pub mesh: Mesh,
    pub cg1: DofMap,
    pub forms: Arc<AssembledForms>,
    pub formulation: Box<dyn HssFormulation>,
    pub inner: Box<dyn InnerSolver>,
    pub setup_seconds: f64,
}

impl ExperimentSetup {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let t0 = Instant::now();
        let n = config.resolution();
        let mesh = build_mesh(n)?;
        let cg1 = DofMap::cg1(&mesh);
        let forms = Arc::new(assemble_core(&mesh, &cg1, &DofMap::dg0_vec(&mesh)));
        let formulation =
            (formulation_registry().get(&config.formulation)?)(forms.clone(), config.k, config.delta_hat)?;
        let inner = (inner_solver_registry().get(&config.inner)?)(&InnerRequest {
            forms: &forms,
            coefficients: formulation.inner_coefficients(),
            factorization: &config.factorization,
            mg: config.mg,
        })?;
        let setup_seconds = t0.elapsed().as_secs_f64();
        log::info!(
            "setup {} k={} n={} inner={} in {:.2}s",
            config.formulation,
            config.k,
            n,
            config.inner,
            setup_seconds
        );
        Ok(ExperimentSetup {
            config: config.clone(),
            mesh,
            cg1,
            forms,
            formulation,
            inner,
            setup_seconds,
        })
    }

    pub fn dofs(&self) -> usize {
        self.formulation.dim()
    }

    /// Runs with the setup's own source, exponent and seed.
    pub fn run(&self) -> Result<ExperimentOutcome> {
        let c = &self.config;
        self.run_with(c.source, c.theta, c.seed)
    }

    pub fn run_with(&self, source: Source, theta: f64, seed: u64) -> Result<ExperimentOutcome> {
        let cfg = ExperimentConfig {
            source,
            theta,
            seed,
            ..self.config.clone()
        };
        cfg.validate()?;
        let t0 = Instant::now();
        let f = &*self.formulation;
        let load = assemble_load(&self.mesh, &self.cg1, source);
        let b = f.outer_load(&load);
        let n_inner = cfg.hss().n_inner();
        let mut pc = HssPreconditioner::new(f, &*self.inner, n_inner)?;
        pc.stats.record_steps = cfg.record;
        pc.stats.inner.record_cycles = cfg.record;

        let (state, trace) = if norm2(&b) <= ZERO_RHS_FLOOR {
            let trace = IterationTrace {
                residuals: vec![0.0],
                iterations: 0,
                converged: true,
            };
            (vec![C64::new(0.0, 0.0); f.dim()], trace)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x0 = random_vector(f.dim(), &mut rng);
            let kc = KrylovConfig {
                rtol: cfg.rtol,
                maxiter: cfg.maxiter,
                ..KrylovConfig::default()
            };
            fgmres(f.outer_operator(), &b, &x0, &kc, &mut pc)?
        };
        if !trace.converged {
            log::warn!("outer FGMRES did not converge in {} iterations", trace.iterations);
        }
        let stats = pc.stats;
        let report = ExperimentReport {
            k: cfg.k,
            theta,
            c0: cfg.c0,
            delta_hat: cfg.delta_hat,
            formulation: cfg.formulation.clone(),
            source: source.name().into(),
            inner: cfg.inner.clone(),
            outer_its: trace.iterations,
            inner_total: stats.inner_steps,
            mg_cycles: stats.inner.cycles,
            eta_h: rate(&trace.residuals).ok(),
            eta_s: stats.eta_s(),
            eta_mg: stats.inner.eta_mg(),
            dofs: f.dim(),
            seconds: t0.elapsed().as_secs_f64(),
            converged: trace.converged,
            n_inner,
            n_cg1: self.forms.num_cg1(),
        };
        Ok(ExperimentOutcome {
            report,
            state,
            trace,
            stats,
        })
    }
}

/// Builds the problem described by `config` and solves it once.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    Ok(ExperimentSetup::new(config)?.run()?.report)
}
