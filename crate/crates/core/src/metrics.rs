//! Branch flows, losses, voltage error and unbalance metrics.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linsolve::Solution;
use crate::loads::LoadTable;
use crate::network::Network;

/// Threshold (percent) above which a node counts as unbalanced.
pub const LUVR_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BranchFlow {
    pub id: String,
    /// `e = V_from - V_to`, per phase.
    pub drop: Vec<Complex64>,
    /// `I_F = Z^-1 e`, flowing from `from` to `to`.
    pub current: Vec<Complex64>,
    /// `V_from * conj(I_F)`.
    pub sending_power: Vec<Complex64>,
}

pub fn branch_flows(network: &Network, sol: &Solution) -> Vec<BranchFlow> {
    let feeder = network.feeder();
    let p = feeder.phase_count;
    feeder
        .branches
        .iter()
        .enumerate()
        .map(|(bi, b)| {
            let f = feeder.node_index(&b.from).unwrap();
            let t = feeder.node_index(&b.to).unwrap();
            let vf = &sol.voltages[f * p..f * p + p];
            let vt = &sol.voltages[t * p..t * p + p];
            let current = network.branch_current(bi, vf, vt);
            BranchFlow {
                id: b.id.clone(),
                drop: vf.iter().zip(vt).map(|(a, b)| a - b).collect(),
                sending_power: vf.iter().zip(&current).map(|(v, i)| v * i.conj()).collect(),
                current,
            }
        })
        .collect()
}

/// `(P_loss, Q_loss) = sum_b e_b . conj(I_F,b)` over branches and phases.
pub fn losses(flows: &[BranchFlow]) -> (f64, f64) {
    let s: Complex64 = flows
        .iter()
        .flat_map(|f| f.drop.iter().zip(&f.current).map(|(e, i)| e * i.conj()))
        .sum();
    (s.re, s.im)
}

/// Smallest non-slack voltage magnitude over all phases.
pub fn v_min(sol: &Solution) -> f64 {
    let skip = if sol.node_count() > 1 {
        sol.phase_count
    } else {
        0
    };
    sol.voltages
        .iter()
        .skip(skip)
        .map(|v| v.norm())
        .fold(f64::INFINITY, f64::min)
}

/// Complex power delivered by the slack node.
pub fn slack_power(network: &Network, sol: &Solution) -> Complex64 {
    let p = network.phase_count();
    let inj = network.network_injections(&sol.voltages);
    (0..p).map(|ph| sol.voltages[ph] * inj[ph].conj()).sum()
}

/// Complex power drawn by all loads at the solution voltages.
pub fn load_power(network: &Network, sol: &Solution) -> Result<Complex64> {
    let inj = LoadTable::new(network.feeder()).injections(&sol.voltages)?;
    Ok(sol
        .voltages
        .iter()
        .zip(&inj)
        .map(|(v, i)| -(v * i.conj()))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorNorm {
    /// `| |V_a| - |V_b| |`
    #[default]
    Magnitude,
    /// `| V_a - V_b |`
    Complex,
}

/// Per-entry error `epsilon_k` between two solutions of the same feeder.
pub fn node_errors(a: &Solution, b: &Solution) -> Result<Vec<f64>> {
    node_errors_with(a, b, ErrorNorm::Magnitude)
}

pub fn node_errors_with(a: &Solution, b: &Solution, norm: ErrorNorm) -> Result<Vec<f64>> {
    if a.voltages.len() != b.voltages.len() {
        return Err(Error::Dimension {
            expected: a.voltages.len(),
            found: b.voltages.len(),
        });
    }
    Ok(a.voltages
        .iter()
        .zip(&b.voltages)
        .map(|(x, y)| match norm {
            ErrorNorm::Magnitude => (x.norm() - y.norm()).abs(),
            ErrorNorm::Complex => (x - y).norm(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LuvrForm {
    /// `100 |V_max - V_avg| / V_avg` with `V_max` the largest magnitude.
    #[default]
    MaxMagnitude,
    /// `100 max_i |V_i - V_avg| / V_avg`.
    MaxDeviation,
}

/// Per-node voltage unbalance (percent) on phase-to-ground magnitudes.
pub fn luvr(sol: &Solution) -> Result<Vec<f64>> {
    luvr_with(sol, LuvrForm::MaxMagnitude)
}

pub fn luvr_with(sol: &Solution, form: LuvrForm) -> Result<Vec<f64>> {
    if sol.phase_count != 3 {
        return Err(Error::Unsupported(
            "voltage unbalance needs a three-phase solution".into(),
        ));
    }
    Ok(sol
        .voltages
        .chunks(3)
        .map(|v| luvr_of([v[0].norm(), v[1].norm(), v[2].norm()], form))
        .collect())
}

pub fn luvr_of(m: [f64; 3], form: LuvrForm) -> f64 {
    let avg = (m[0] + m[1] + m[2]) / 3.0;
    let dev = match form {
        LuvrForm::MaxMagnitude => (m.iter().copied().fold(f64::MIN, f64::max) - avg).abs(),
        LuvrForm::MaxDeviation => m.iter().map(|x| (x - avg).abs()).fold(0.0, f64::max),
    };
    100.0 * dev / avg
}

/// Indices of nodes whose unbalance exceeds `threshold` percent.
pub fn nodes_above(luvr: &[f64], threshold: f64) -> Vec<usize> {
    luvr.iter()
        .enumerate()
        .filter(|(_, &x)| x > threshold)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub p_loss: f64,
    pub q_loss: f64,
    pub v_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub luvr: Option<Vec<f64>>,
}

/// Losses, `V_min`, unbalance (three-phase only) and, when a reference
/// solution is given, `epsilon_k` against it.
pub fn report(
    network: &Network,
    sol: &Solution,
    reference: Option<&Solution>,
) -> Result<MetricsReport> {
    let (p_loss, q_loss) = losses(&branch_flows(network, sol));
    Ok(MetricsReport {
        p_loss,
        q_loss,
        v_min: v_min(sol),
        epsilon: reference.map(|r| node_errors(sol, r)).transpose()?,
        luvr: if sol.phase_count == 3 {
            Some(luvr(sol)?)
        } else {
            None
        },
    })
}

/// A linear solution measured against the sweep reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub linear: Solution,
    pub reference: Solution,
    pub linear_report: MetricsReport,
    pub reference_report: MetricsReport,
    pub epsilon: Vec<f64>,
    pub epsilon_mean: f64,
    pub epsilon_max: f64,
    /// Nodes above [`LUVR_THRESHOLD`]; three-phase only.
    pub unbalanced_linear: Option<Vec<usize>>,
    pub unbalanced_reference: Option<Vec<usize>>,
}

pub fn compare(network: &Network, linear: Solution, reference: Solution) -> Result<Comparison> {
    let epsilon = node_errors(&linear, &reference)?;
    let epsilon_mean = epsilon.iter().sum::<f64>() / epsilon.len() as f64;
    let epsilon_max = epsilon.iter().copied().fold(0.0, f64::max);
    let linear_report = report(network, &linear, Some(&reference))?;
    let reference_report = report(network, &reference, None)?;
    let above = |r: &MetricsReport| r.luvr.as_ref().map(|l| nodes_above(l, LUVR_THRESHOLD));
    Ok(Comparison {
        unbalanced_linear: above(&linear_report),
        unbalanced_reference: above(&reference_report),
        linear,
        reference,
        linear_report,
        reference_report,
        epsilon,
        epsilon_mean,
        epsilon_max,
    })
}
