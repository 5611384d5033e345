//! Feeder files and result documents.
//!
//! Feeders are JSON documents (schema version `1`). Complex values are either
//! `{"re": .., "im": ..}` or `{"mag": .., "angle_deg": ..}`; 3x3 impedances
//! are nine such entries in row-major order. See `docs/feeder-format.md`.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bfs::BfsOptions;
use crate::error::{Error, Result};
use crate::linsolve::{LinearizationPoint, Method, Solution};
use crate::loads::{Connection, PhaseSel, ZipLoad};
use crate::metrics::{Comparison, MetricsReport};
use crate::network::{validate_radial, Branch, Feeder, Impedance, UnitSystem, PHASE_NAMES};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum ComplexValue {
    Rect(Rect),
    Polar(Polar),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Rect {
    re: f64,
    im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Polar {
    mag: f64,
    angle_deg: f64,
}

impl From<ComplexValue> for Complex64 {
    fn from(c: ComplexValue) -> Self {
        match c {
            ComplexValue::Rect(r) => Complex64::new(r.re, r.im),
            ComplexValue::Polar(p) => Complex64::from_polar(p.mag, p.angle_deg.to_radians()),
        }
    }
}

impl From<Complex64> for ComplexValue {
    fn from(c: Complex64) -> Self {
        ComplexValue::Rect(Rect { re: c.re, im: c.im })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(ComplexValue),
    Many(Vec<ComplexValue>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeederFile {
    schema_version: String,
    name: String,
    #[serde(default = "one")]
    phases: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    units: Option<UnitsFile>,
    nodes: Vec<String>,
    slack: SlackFile,
    branches: Vec<BranchFile>,
    #[serde(default)]
    loads: Vec<LoadFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    options: Option<OptionsFile>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitsFile {
    system: UnitKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_base: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s_base: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum UnitKind {
    PerUnit,
    Physical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SlackFile {
    node: String,
    voltage: OneOrMany,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchFile {
    id: String,
    from: String,
    to: String,
    z: OneOrMany,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadFile {
    node: String,
    #[serde(default = "all")]
    phase: String,
    #[serde(default = "wye")]
    connection: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    s_z: Option<ComplexValue>,
    #[serde(default, skip_serializing_if = "is_zero")]
    s_i: Option<ComplexValue>,
    #[serde(default, skip_serializing_if = "is_zero")]
    s_p: Option<ComplexValue>,
}

fn all() -> String {
    "all".into()
}

fn wye() -> String {
    "wye".into()
}

fn is_zero(c: &Option<ComplexValue>) -> bool {
    c.is_none_or(|c| Complex64::from(c) == Complex64::new(0.0, 0.0))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptionsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v0: Option<OneOrMany>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bfs_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bfs_max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flat_start: Option<bool>,
}

/// Solver settings carried in a feeder file's `options` section.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveOptions {
    pub method: Option<Method>,
    pub v0: Option<LinearizationPoint>,
    pub bfs: BfsOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeederDocument {
    pub feeder: Feeder,
    pub options: SolveOptions,
}

/// Parses and validates a feeder document.
pub fn parse_feeder(text: &str) -> Result<Feeder> {
    Ok(parse_document(text)?.feeder)
}

pub fn parse_document(text: &str) -> Result<FeederDocument> {
    let doc = parse_document_unchecked(text)?;
    let report = validate_radial(&doc.feeder);
    if !report.ok() {
        return Err(Error::Validation(report.violations));
    }
    Ok(doc)
}

/// Parses a feeder without the radiality and admissibility checks, for
/// reporting every violation at once.
pub fn parse_document_unchecked(text: &str) -> Result<FeederDocument> {
    let file: FeederFile = serde_json::from_str(text).map_err(|e| {
        Error::parse(
            format!("line {}, column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    convert(file)
}

fn convert(file: FeederFile) -> Result<FeederDocument> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::parse(
            "schema_version",
            format!(
                "unsupported version '{}' (expected '{SCHEMA_VERSION}')",
                file.schema_version
            ),
        ));
    }
    let p = file.phases;
    if p != 1 && p != 3 {
        return Err(Error::parse("phases", format!("must be 1 or 3, got {p}")));
    }
    let known = |field: String, id: &str| -> Result<()> {
        if file.nodes.iter().any(|n| n == id) {
            Ok(())
        } else {
            Err(Error::parse(field, format!("unknown node '{id}'")))
        }
    };

    known("slack.node".into(), &file.slack.node)?;
    // slack first; a duplicated slack id stays in place for validation to report
    let mut nodes = file.nodes.clone();
    let at = nodes.iter().position(|n| *n == file.slack.node).unwrap();
    let slack = nodes.remove(at);
    nodes.insert(0, slack);
    let slack_voltage = phasors(&file.slack.voltage, p, "slack.voltage")?;

    let units = match &file.units {
        None => UnitSystem::PerUnit,
        Some(u) => match u.system {
            UnitKind::PerUnit => UnitSystem::PerUnit,
            UnitKind::Physical => UnitSystem::Physical {
                v_base: u
                    .v_base
                    .ok_or_else(|| Error::parse("units.v_base", "required for physical units"))?,
                s_base: u.s_base,
            },
        },
    };

    let mut branches = Vec::with_capacity(file.branches.len());
    for (i, b) in file.branches.iter().enumerate() {
        known(format!("branches[{i}].from"), &b.from)?;
        known(format!("branches[{i}].to"), &b.to)?;
        let impedance = match &b.z {
            OneOrMany::One(z) => Impedance::Scalar((*z).into()),
            OneOrMany::Many(zs) if zs.len() == 9 => {
                let mut m = [[Complex64::new(0.0, 0.0); 3]; 3];
                for (k, z) in zs.iter().enumerate() {
                    m[k / 3][k % 3] = (*z).into();
                }
                Impedance::Matrix(m)
            }
            OneOrMany::Many(zs) => {
                return Err(Error::parse(
                    format!("branches[{i}].z"),
                    format!(
                        "expected one value or nine (3x3 row-major), got {}",
                        zs.len()
                    ),
                ))
            }
        };
        branches.push(Branch {
            id: b.id.clone(),
            from: b.from.clone(),
            to: b.to.clone(),
            impedance,
        });
    }

    let mut loads = Vec::with_capacity(file.loads.len());
    for (i, l) in file.loads.iter().enumerate() {
        known(format!("loads[{i}].node"), &l.node)?;
        let phase = match l.phase.as_str() {
            "a" => PhaseSel::A,
            "b" => PhaseSel::B,
            "c" => PhaseSel::C,
            "all" => PhaseSel::All,
            other => {
                return Err(Error::parse(
                    format!("loads[{i}].phase"),
                    format!("expected a, b, c or all, got '{other}'"),
                ))
            }
        };
        let connection = match l.connection.as_str() {
            "wye" => Connection::Wye,
            "delta" => Connection::Delta,
            other => {
                return Err(Error::parse(
                    format!("loads[{i}].connection"),
                    format!("expected wye or delta, got '{other}'"),
                ))
            }
        };
        let get = |c: Option<ComplexValue>| c.map(Complex64::from).unwrap_or_default();
        let load = ZipLoad {
            node: l.node.clone(),
            phase,
            connection,
            s_z: get(l.s_z),
            s_i: get(l.s_i),
            s_p: get(l.s_p),
        };
        if load.is_zero() {
            log::warn!(
                "dropping load #{i} at node '{}': all components are zero",
                l.node
            );
            continue;
        }
        loads.push(load);
    }

    let options = match &file.options {
        None => SolveOptions::default(),
        Some(o) => {
            let defaults = BfsOptions::default();
            SolveOptions {
                method: o.method,
                v0: o
                    .v0
                    .as_ref()
                    .map(|v| {
                        phasors(v, p, "options.v0").map(|phases| LinearizationPoint { phases })
                    })
                    .transpose()?,
                bfs: BfsOptions {
                    tolerance: o.bfs_tolerance.unwrap_or(defaults.tolerance),
                    max_iterations: o.bfs_max_iterations.unwrap_or(defaults.max_iterations),
                    flat_start: o.flat_start.unwrap_or(defaults.flat_start),
                },
            }
        }
    };

    Ok(FeederDocument {
        feeder: Feeder {
            name: file.name,
            phase_count: p,
            nodes,
            slack_voltage,
            units,
            branches,
            loads,
        },
        options,
    })
}

/// One value means phase a, rotated onto b and c in a three-phase feeder.
fn phasors(v: &OneOrMany, p: usize, field: &str) -> Result<Vec<Complex64>> {
    match v {
        OneOrMany::One(c) => Ok(LinearizationPoint::uniform((*c).into(), p).phases),
        OneOrMany::Many(cs) if cs.len() == p => Ok(cs.iter().map(|&c| c.into()).collect()),
        OneOrMany::Many(cs) => Err(Error::parse(
            field,
            format!("expected {p} phasors, got {}", cs.len()),
        )),
    }
}

/// Serializes a feeder in the canonical form `parse_feeder` reads back.
pub fn serialize_feeder(feeder: &Feeder) -> String {
    let file = FeederFile {
        schema_version: SCHEMA_VERSION.into(),
        name: feeder.name.clone(),
        phases: feeder.phase_count,
        units: match feeder.units {
            UnitSystem::PerUnit => None,
            UnitSystem::Physical { v_base, s_base } => Some(UnitsFile {
                system: UnitKind::Physical,
                v_base: Some(v_base),
                s_base,
            }),
        },
        nodes: feeder.nodes.clone(),
        slack: SlackFile {
            node: feeder.slack_id().into(),
            voltage: OneOrMany::Many(feeder.slack_voltage.iter().map(|&c| c.into()).collect()),
        },
        branches: feeder
            .branches
            .iter()
            .map(|b| BranchFile {
                id: b.id.clone(),
                from: b.from.clone(),
                to: b.to.clone(),
                z: match &b.impedance {
                    Impedance::Scalar(z) => OneOrMany::One((*z).into()),
                    Impedance::Matrix(m) => {
                        OneOrMany::Many(m.iter().flatten().map(|&c| c.into()).collect())
                    }
                },
            })
            .collect(),
        loads: feeder
            .loads
            .iter()
            .map(|l| LoadFile {
                node: l.node.clone(),
                phase: l.phase.as_str().into(),
                connection: match l.connection {
                    Connection::Wye => "wye".into(),
                    Connection::Delta => "delta".into(),
                },
                s_z: Some(l.s_z.into()),
                s_i: Some(l.s_i.into()),
                s_p: Some(l.s_p.into()),
            })
            .collect(),
        options: None,
    };
    serde_json::to_string_pretty(&file).expect("feeder serializes")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(format!("unknown format '{other}' (expected json or csv)")),
        }
    }
}

/// Rounds to 12 digits after the decimal point, i.e. 12 significant digits
/// at the 1 p.u. scale. Complex components are written this way.
pub fn digits12(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let r: f64 = format!("{x:.12}").parse().expect("float formats");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn phase_name(p: usize, ph: usize) -> &'static str {
    if p == 1 {
        "1"
    } else {
        PHASE_NAMES[ph]
    }
}

fn angle_deg(v: Complex64) -> f64 {
    let a = v.arg().to_degrees();
    if a == 0.0 {
        0.0
    } else {
        a
    }
}

#[derive(Serialize)]
struct NodeRow<'a> {
    id: &'a str,
    phase: &'static str,
    re: f64,
    im: f64,
    magnitude: f64,
    angle_deg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    luvr: Option<f64>,
}

#[derive(Serialize)]
struct SolutionDoc<'a> {
    method: &'static str,
    iterations: usize,
    converged: bool,
    phase_count: usize,
    p_loss: f64,
    q_loss: f64,
    v_min: f64,
    nodes: Vec<NodeRow<'a>>,
}

fn node_rows<'a>(sol: &'a Solution, report: &MetricsReport) -> Vec<NodeRow<'a>> {
    let p = sol.phase_count;
    sol.voltages
        .iter()
        .enumerate()
        .map(|(i, v)| NodeRow {
            id: &sol.node_ids[i / p],
            phase: phase_name(p, i % p),
            re: digits12(v.re),
            im: digits12(v.im),
            magnitude: v.norm(),
            angle_deg: angle_deg(*v),
            epsilon: report.epsilon.as_ref().map(|e| e[i]),
            luvr: report.luvr.as_ref().map(|l| l[i / p]),
        })
        .collect()
}

/// Renders a solution and its metrics. CSV has one row per node and phase.
pub fn write_solution(sol: &Solution, report: &MetricsReport, format: OutputFormat) -> String {
    let rows = node_rows(sol, report);
    match format {
        OutputFormat::Json => {
            let doc = SolutionDoc {
                method: sol.method.as_str(),
                iterations: sol.iterations,
                converged: sol.converged,
                phase_count: sol.phase_count,
                p_loss: report.p_loss,
                q_loss: report.q_loss,
                v_min: report.v_min,
                nodes: rows,
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("solution serializes");
            s.push('\n');
            s
        }
        OutputFormat::Csv => {
            let mut out = String::from("node,phase,v_mag,v_angle_deg");
            if report.epsilon.is_some() {
                out.push_str(",epsilon");
            }
            if report.luvr.is_some() {
                out.push_str(",luvr");
            }
            out.push('\n');
            for r in rows {
                let _ = write!(out, "{},{},{},{}", r.id, r.phase, r.magnitude, r.angle_deg);
                if let Some(e) = r.epsilon {
                    let _ = write!(out, ",{e}");
                }
                if let Some(l) = r.luvr {
                    let _ = write!(out, ",{l}");
                }
                out.push('\n');
            }
            out
        }
    }
}

#[derive(Serialize)]
struct SideDoc {
    method: &'static str,
    iterations: usize,
    v_min: f64,
    p_loss: f64,
    q_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    luvr: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    luvr_above_1pct: Option<usize>,
}

#[derive(Serialize)]
struct CompareRow<'a> {
    index: usize,
    id: &'a str,
    phase: &'static str,
    v_mag_linear: f64,
    v_mag_bfs: f64,
    epsilon: f64,
}

#[derive(Serialize)]
struct CompareDoc<'a> {
    reference: &'static str,
    epsilon_mean: f64,
    epsilon_max: f64,
    linear: SideDoc,
    bfs: SideDoc,
    nodes: Vec<CompareRow<'a>>,
}

fn side(sol: &Solution, report: &MetricsReport, above: &Option<Vec<usize>>) -> SideDoc {
    SideDoc {
        method: sol.method.as_str(),
        iterations: sol.iterations,
        v_min: report.v_min,
        p_loss: report.p_loss,
        q_loss: report.q_loss,
        luvr: report.luvr.clone(),
        luvr_above_1pct: above.as_ref().map(Vec::len),
    }
}

/// Renders a linear-vs-reference comparison. The CSV form is plot-ready:
/// node index against `epsilon_k` and, for three-phase feeders, against the
/// unbalance of each method.
pub fn write_comparison(cmp: &Comparison, format: OutputFormat) -> String {
    let p = cmp.linear.phase_count;
    let rows: Vec<CompareRow> = (0..cmp.epsilon.len())
        .map(|i| CompareRow {
            index: i / p,
            id: &cmp.linear.node_ids[i / p],
            phase: phase_name(p, i % p),
            v_mag_linear: cmp.linear.voltages[i].norm(),
            v_mag_bfs: cmp.reference.voltages[i].norm(),
            epsilon: cmp.epsilon[i],
        })
        .collect();
    match format {
        OutputFormat::Json => {
            let doc = CompareDoc {
                reference: "bfs",
                epsilon_mean: cmp.epsilon_mean,
                epsilon_max: cmp.epsilon_max,
                linear: side(&cmp.linear, &cmp.linear_report, &cmp.unbalanced_linear),
                bfs: side(
                    &cmp.reference,
                    &cmp.reference_report,
                    &cmp.unbalanced_reference,
                ),
                nodes: rows,
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("comparison serializes");
            s.push('\n');
            s
        }
        OutputFormat::Csv => {
            let luvr = cmp
                .linear_report
                .luvr
                .as_ref()
                .zip(cmp.reference_report.luvr.as_ref());
            let mut out = String::from("index,node,phase,v_mag_linear,v_mag_bfs,epsilon");
            if luvr.is_some() {
                out.push_str(",luvr_linear,luvr_bfs");
            }
            out.push('\n');
            for r in &rows {
                let _ = write!(
                    out,
                    "{},{},{},{},{},{}",
                    r.index, r.id, r.phase, r.v_mag_linear, r.v_mag_bfs, r.epsilon
                );
                if let Some((l, b)) = luvr {
                    let _ = write!(out, ",{},{}", l[r.index], b[r.index]);
                }
                out.push('\n');
            }
            out
        }
    }
}
