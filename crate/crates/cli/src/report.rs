//! Serializable report documents and CSV writers.

use std::path::Path;

use anyhow::{bail, Context};
use floquet_lie::euler::{RigidBodyAnalysis, RigidBodyFamily};
use floquet_lie::floquet::MonodromyReport;
use floquet_lie::lie::LogStatus;
use floquet_lie::phases::{HomotopyKind, PhaseReport, SweepRow};
use floquet_lie::{AlgebraElement, GroupElement, GroupId};
use serde::Serialize;

use crate::config::{AnalysisConfig, ConfigError, SCHEMA_VERSION};

pub const SWEEP_HEADER: [&str; 12] = [
    "s",
    "k_1",
    "k_2",
    "k_3",
    "k_dyn_1",
    "k_dyn_2",
    "k_dyn_3",
    "k_geom_1",
    "k_geom_2",
    "k_geom_3",
    "splitting_residual",
    "periodicity_residual",
];

pub const ORBIT_HEADER: [&str; 5] = ["s", "t", "xi_1", "xi_2", "xi_3"];

/// `rec1` and `rec3` count as agreeing below this absolute gap.
pub const RECONSTRUCTION_TOLERANCE: f64 = 1e-8;

fn coords(x: &AlgebraElement) -> [f64; 3] {
    let c = x.coords();
    [c[0], c[1], c[2]]
}

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema_version: u32,
    pub group: GroupId,
    pub n_t: usize,
    pub n_s: usize,
    pub homotopy: HomotopyKind,
    pub homotopy_provenance: String,
    pub k_rule: String,
    pub branch_rule: String,
}

impl Provenance {
    pub fn new(group: GroupId, phases: &PhaseReport) -> Self {
        Provenance {
            tool: "floquet-lie",
            version: env!("CARGO_PKG_VERSION"),
            schema_version: SCHEMA_VERSION,
            group,
            n_t: phases.n_t,
            n_s: phases.n_s,
            homotopy: phases.homotopy_kind,
            homotopy_provenance: phases.homotopy_provenance.clone(),
            k_rule: phases.k_rule.clone(),
            branch_rule: phases.branch_rule.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MonodromyDoc {
    /// Defining matrix, row-major (3x3 for SO3, 2x2 for SL2R).
    pub m: Vec<f64>,
    pub trace: f64,
    pub log_status: LogStatus,
    pub principal_log: [f64; 3],
    pub branch_rule: String,
    pub reducible: bool,
    pub adjoint_reducible: bool,
    pub adjoint_log: [f64; 3],
}

impl MonodromyDoc {
    pub fn new(report: &MonodromyReport) -> Self {
        let a = report.adjoint_log_coords;
        MonodromyDoc {
            m: report.m.defining_entries(),
            trace: defining_trace(&report.m),
            log_status: report.log.status,
            principal_log: coords(&report.log.principal),
            branch_rule: report.log.branch_rule.describe(),
            reducible: report.reducible,
            adjoint_reducible: report.adjoint_reducible,
            adjoint_log: [a[0], a[1], a[2]],
        }
    }
}

fn defining_trace(g: &GroupElement) -> f64 {
    let n = match g.group() {
        GroupId::So3 => 3,
        GroupId::Sl2r => 2,
    };
    (0..n).map(|i| g.matrix()[(i, i)]).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &'static str, residual: f64, tolerance: f64) -> Self {
        Check {
            name,
            residual,
            tolerance,
            passed: residual <= tolerance,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PhasesDoc {
    pub k: [f64; 3],
    pub k_dyn: [f64; 3],
    pub k_geom: [f64; 3],
    pub splitting_residual: f64,
    /// Zero-curvature residual of the factor grid, `t` normalized to `[0, 1]`.
    pub curvature_residual: f64,
    pub periodicity_residual: f64,
    pub max_drift: f64,
    /// `|<e_i*, k_geom> - surface integral|` for the basis covectors.
    pub surface_check: [f64; 3],
}

impl PhasesDoc {
    pub fn new(r: &PhaseReport) -> Self {
        PhasesDoc {
            k: coords(&r.k),
            k_dyn: coords(&r.k_dyn),
            k_geom: coords(&r.k_geom),
            splitting_residual: r.splitting_residual,
            curvature_residual: r.curvature_residual,
            periodicity_residual: r.periodicity_residual,
            max_drift: r.max_drift,
            surface_check: r.surface_check,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SweepDoc {
    pub s: f64,
    pub period: f64,
    pub k: [f64; 3],
    pub k_dyn: [f64; 3],
    pub k_geom: [f64; 3],
    pub splitting_residual: f64,
    pub periodicity_residual: f64,
}

impl SweepDoc {
    pub fn new(r: &SweepRow) -> Self {
        SweepDoc {
            s: r.s,
            period: r.period,
            k: coords(&r.k),
            k_dyn: coords(&r.k_dyn),
            k_geom: coords(&r.k_geom),
            splitting_residual: r.splitting_residual,
            periodicity_residual: r.periodicity_residual,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AnalyzeReport {
    pub command: &'static str,
    pub config: AnalysisConfig,
    pub monodromy: MonodromyDoc,
    pub phases: PhasesDoc,
    pub checks: Vec<Check>,
    pub sweep: Vec<SweepDoc>,
    pub provenance: Provenance,
}

#[derive(Debug, Serialize)]
pub struct ReconstructionDoc {
    pub s: f64,
    pub period: f64,
    pub k: [f64; 3],
    pub k_dyn: [f64; 3],
    pub k_geom: [f64; 3],
    pub dyn_pairing: f64,
    pub geom_pairing: f64,
    pub rec1: f64,
    pub rec2: f64,
    pub rec3: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<f64>,
    pub isotropy: f64,
    pub factor_orbit_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct RigidBodySummary {
    pub degenerate: bool,
    pub rec1_rec3_agree: bool,
    pub max_rec1_rec3_gap: f64,
    pub max_dyn_rec3_gap: f64,
    pub max_geom_rec2_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_geom_oracle_gap: Option<f64>,
    pub max_isotropy: f64,
    pub casimir_drift: f64,
    pub energy_drift: f64,
    pub max_closure: f64,
}

#[derive(Debug, Serialize)]
pub struct RigidBodyReport {
    pub command: &'static str,
    pub config: AnalysisConfig,
    pub monodromy: MonodromyDoc,
    pub phases: PhasesDoc,
    pub summary: RigidBodySummary,
    pub checks: Vec<Check>,
    pub rows: Vec<ReconstructionDoc>,
    pub provenance: Provenance,
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

impl RigidBodyReport {
    pub fn new(
        config: AnalysisConfig,
        fam: &RigidBodyFamily,
        analysis: &RigidBodyAnalysis,
        splitting: f64,
    ) -> Self {
        let rows = &analysis.rows;
        let gap13 = max_of(rows.iter().map(|r| (r.rec1 - r.rec3).abs()));
        let oracle_gaps: Vec<f64> = rows
            .iter()
            .filter_map(|r| r.oracle.map(|o| (r.geom_pairing - o).abs()))
            .collect();
        let summary = RigidBodySummary {
            degenerate: analysis.degenerate,
            rec1_rec3_agree: gap13 <= RECONSTRUCTION_TOLERANCE,
            max_rec1_rec3_gap: gap13,
            max_dyn_rec3_gap: max_of(rows.iter().map(|r| (r.dyn_pairing - r.rec3).abs())),
            max_geom_rec2_gap: max_of(rows.iter().map(|r| (r.geom_pairing - r.rec2).abs())),
            max_geom_oracle_gap: (oracle_gaps.len() == rows.len())
                .then(|| max_of(oracle_gaps.into_iter())),
            max_isotropy: max_of(rows.iter().map(|r| r.isotropy)),
            casimir_drift: fam.casimir_drift(),
            energy_drift: fam.energy_drift(),
            max_closure: fam.max_closure(),
        };
        let phases = &analysis.phases.report;
        let checks = vec![
            Check::new(
                "splitting k = k_dyn + k_geom",
                phases.splitting_residual,
                splitting,
            ),
            Check::new(
                "rec1 = rec3",
                summary.max_rec1_rec3_gap,
                RECONSTRUCTION_TOLERANCE,
            ),
        ];
        RigidBodyReport {
            command: "rigidbody",
            config,
            monodromy: MonodromyDoc::new(&analysis.phases.monodromy),
            phases: PhasesDoc::new(phases),
            provenance: Provenance::new(GroupId::So3, phases),
            summary,
            checks,
            rows: rows
                .iter()
                .map(|r| ReconstructionDoc {
                    s: r.s,
                    period: r.period,
                    k: coords(&r.k),
                    k_dyn: coords(&r.k_dyn),
                    k_geom: coords(&r.k_geom),
                    dyn_pairing: r.dyn_pairing,
                    geom_pairing: r.geom_pairing,
                    rec1: r.rec1,
                    rec2: r.rec2,
                    rec3: r.rec3,
                    oracle: r.oracle,
                    isotropy: r.isotropy,
                    factor_orbit_residual: r.factor_orbit_residual,
                })
                .collect(),
        }
    }
}

/// Machine-readable failure record written next to the outputs.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub command: String,
    pub error: ErrorBody,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monodromy: Option<MonodromyDoc>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failed_checks: Vec<Check>,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
}

impl ErrorBody {
    pub fn config(e: &ConfigError) -> Self {
        ErrorBody {
            kind: "ConfigError".into(),
            message: e.to_string(),
            field: Some(e.path.clone()),
            s: None,
        }
    }

    pub fn pipeline(e: &floquet_lie::FloquetError) -> Self {
        ErrorBody {
            kind: e.kind().into(),
            message: e.to_string(),
            field: None,
            s: e.s(),
        }
    }
}

/// Pretty JSON with a trailing newline. Non-finite numbers serialize as
/// `null` in JSON and are rejected instead.
pub fn to_json<T: Serialize>(doc: &T) -> anyhow::Result<String> {
    let value = serde_json::to_value(doc)?;
    if let Some(path) = find_null(&value, String::new()) {
        bail!("non-finite number in report at `{path}`");
    }
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

fn find_null(v: &serde_json::Value, path: String) -> Option<String> {
    match v {
        serde_json::Value::Null => Some(path),
        serde_json::Value::Array(items) => items
            .iter()
            .enumerate()
            .find_map(|(i, x)| find_null(x, format!("{path}[{i}]"))),
        serde_json::Value::Object(map) => map.iter().find_map(|(k, x)| {
            let p = if path.is_empty() {
                k.clone()
            } else {
                format!("{path}.{k}")
            };
            find_null(x, p)
        }),
        _ => None,
    }
}

pub fn write_json<T: Serialize>(path: &Path, doc: &T) -> anyhow::Result<()> {
    let text = to_json(doc)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Shortest round-trip representation in exponent form.
fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        let mut record = vec![num(r.s)];
        for x in [&r.k, &r.k_dyn, &r.k_geom] {
            record.extend(coords(x).iter().map(|v| num(*v)));
        }
        record.push(num(r.splitting_residual));
        record.push(num(r.periodicity_residual));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Orbit samples at the integration nodes of every row; each row traces the
/// boundary of the swept cap.
pub fn write_orbit_csv(path: &Path, fam: &RigidBodyFamily) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(ORBIT_HEADER)?;
    for (s, orbit) in fam.s_grid.iter().zip(&fam.orbits) {
        for (t, xi) in orbit.t_grid.iter().zip(&orbit.points).step_by(2) {
            w.write_record([num(*s), num(*t), num(xi[0]), num(xi[1]), num(xi[2])])?;
        }
    }
    w.flush()?;
    Ok(())
}
