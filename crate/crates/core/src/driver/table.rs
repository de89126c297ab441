//! Reproduction of the iteration-count and rate tables.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{write_reports_csv, ExperimentConfig, ExperimentReport, ExperimentSetup};
use crate::assembly::Source;
use crate::error::{HelmError, Result};
use crate::hss::contraction_bound;
use crate::multigrid::MgConfig;

/// Wavenumbers at or above this need the `big` flag.
pub const BIG_K: f64 = 128.0;

const THETAS: [f64; 3] = [0.5, 1.0, 1.5];
const SOURCES: [Source; 2] = [Source::Uniform, Source::Box];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableName {
    PrimalDirect,
    MixedDirect,
    PrimalMg,
    MixedMg,
    HssRates,
    OuterRates,
}

impl TableName {
    pub const ALL: [TableName; 6] = [
        TableName::PrimalDirect,
        TableName::MixedDirect,
        TableName::PrimalMg,
        TableName::MixedMg,
        TableName::HssRates,
        TableName::OuterRates,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TableName::PrimalDirect => "primal-direct",
            TableName::MixedDirect => "mixed-direct",
            TableName::PrimalMg => "primal-mg",
            TableName::MixedMg => "mixed-mg",
            TableName::HssRates => "hss-rates",
            TableName::OuterRates => "outer-rates",
        }
    }

    /// Formulation and inner solver of an iteration-count table.
    fn iteration_setup(&self) -> Option<(&'static str, &'static str)> {
        match self {
            TableName::PrimalDirect => Some(("primal", "direct")),
            TableName::MixedDirect => Some(("mixed", "direct")),
            TableName::PrimalMg => Some(("primal", "mg")),
            TableName::MixedMg => Some(("mixed", "mg")),
            _ => None,
        }
    }
}

impl FromStr for TableName {
    type Err = HelmError;

    fn from_str(s: &str) -> Result<Self> {
        TableName::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| HelmError::UnknownStrategy {
                kind: "table",
                name: s.to_string(),
                available: TableName::ALL.map(|t| t.name()).join(", "),
            })
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: TableName,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Every run behind the table.
    pub reports: Vec<ExperimentReport>,
}

impl Table {
    pub fn format(&self) -> String {
        let ncol = self.headers.len();
        let mut width = vec![0usize; ncol];
        for row in std::iter::once(&self.headers).chain(&self.rows) {
            for (w, cell) in width.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, row: &[String]| {
            let cells: Vec<String> = row.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
            let _ = writeln!(out, "{}", cells.join("  "));
        };
        line(&mut out, &self.headers);
        let _ = writeln!(out, "{}", "-".repeat(width.iter().sum::<usize>() + 2 * (ncol - 1)));
        for row in &self.rows {
            line(&mut out, row);
        }
        out
    }

    /// Writes the table cells to `path` and the underlying runs to
    /// `<stem>.runs.csv` next to it.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        write_reports_csv(&runs_path(path), &self.reports)
    }
}

pub fn runs_path(path: &Path) -> std::path::PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
    path.with_file_name(format!("{stem}.runs.csv"))
}

fn check_ks(ks: &[f64], big: bool) -> Result<()> {
    if ks.is_empty() {
        return Err(HelmError::InvalidConfig("no wavenumbers given".into()));
    }
    if let Some(k) = ks.iter().find(|&&k| k >= BIG_K && !big) {
        return Err(HelmError::InvalidConfig(format!(
            "k = {k} is long-running; pass the big flag to include it"
        )));
    }
    Ok(())
}

fn fmt_k(k: f64) -> String {
    format!("{k}")
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

/// Runs every experiment of table `name` for the wavenumbers `ks`, using
/// `base` for all settings the table does not fix.
pub fn reproduce_table(name: TableName, ks: &[f64], big: bool, base: &ExperimentConfig) -> Result<Table> {
    check_ks(ks, big)?;
    match name.iteration_setup() {
        Some((formulation, inner)) => iteration_table(name, formulation, inner, ks, base),
        None => rate_table(name, ks, base),
    }
}

fn iteration_table(
    name: TableName,
    formulation: &str,
    inner: &str,
    ks: &[f64],
    base: &ExperimentConfig,
) -> Result<Table> {
    let mut headers = vec!["k".to_string()];
    for s in SOURCES {
        for t in THETAS {
            headers.push(format!("{} theta={t}", s.name()));
        }
    }
    let mg = match (inner, formulation) {
        ("mg", "mixed") => MgConfig::mixed(),
        _ => MgConfig::primal(),
    };
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &k in ks {
        let cfg = ExperimentConfig {
            formulation: formulation.into(),
            inner: inner.into(),
            mg,
            k,
            ..base.clone()
        };
        let setup = ExperimentSetup::new(&cfg)?;
        let mut row = vec![fmt_k(k)];
        for s in SOURCES {
            for t in THETAS {
                let r = setup.run_with(s, t, cfg.seed)?.report;
                log::info!(
                    "{} k={k} {} theta={t}: {} ({})",
                    name.name(),
                    s.name(),
                    r.outer_its,
                    r.bracket_total()
                );
                row.push(format!("{} ({})", r.outer_its, r.bracket_total()));
                reports.push(r);
            }
        }
        rows.push(row);
    }
    Ok(Table {
        name,
        headers,
        rows,
        reports,
    })
}

fn rate_table(name: TableName, ks: &[f64], base: &ExperimentConfig) -> Result<Table> {
    let mut headers = vec!["k".to_string()];
    if name == TableName::HssRates {
        headers.push("nu_s".into());
    }
    let mut combos = Vec::new();
    for f in ["primal", "mixed"] {
        for s in SOURCES {
            combos.push((f, s));
            headers.push(format!("{f} {}", s.name()));
        }
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &k in ks {
        let mut row = vec![fmt_k(k)];
        if name == TableName::HssRates {
            row.push(format!("{:.4}", contraction_bound(k)));
        }
        for f in ["primal", "mixed"] {
            let mg = if f == "mixed" {
                MgConfig::mixed()
            } else {
                MgConfig::primal()
            };
            let cfg = ExperimentConfig {
                formulation: f.into(),
                k,
                theta: 1.0,
                mg,
                ..base.clone()
            };
            let setup = ExperimentSetup::new(&cfg)?;
            for &(_, s) in combos.iter().filter(|(ff, _)| *ff == f) {
                let r = setup.run_with(s, 1.0, cfg.seed)?.report;
                row.push(fmt_rate(if name == TableName::HssRates { r.eta_s } else { r.eta_h }));
                reports.push(r);
            }
        }
        rows.push(row);
    }
    Ok(Table {
        name,
        headers,
        rows,
        reports,
    })
}
