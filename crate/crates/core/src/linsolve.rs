//! Non-iterative linearized load flow.
//!
//! With `D` the reduced impedance matrix, every non-slack voltage obeys
//! `V_M = 1_M V_S + D I_M(V)`. The constant-impedance and constant-current
//! parts of `I_M` are linear in `V` and are kept exactly. The constant-power
//! part is handled by multiplying its row by `V_k*` and replacing the
//! non-holomorphic `V_k V_k*` with its first-order Wirtinger expansion about
//! the linearization point `v0`:
//!
//! ```text
//! V V* ~ v0* V + v0 V* - |v0|^2
//! ```
//!
//! Dividing back by `v0*` gives, per row,
//!
//! ```text
//! V_k + beta_k V_k* + (D Y_Z V)_k = v0_k + (D (J_I + J_P(v0)))_k,
//! beta_k = (v0_k - V_S,k) / v0_k*
//! ```
//!
//! `Mode::Full` solves this conjugate-linear system by stacking real and
//! imaginary parts. `Mode::Simple` drops the conjugate term and anchors the
//! right-hand side at `V_S`, which is the superposed Z/I/P system
//! `sys_A V_M = sys_B`. At `v0 = V_S` the two modes coincide.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loads::LoadTable;
use crate::network::{phase_rotation, Network};

/// Diagonal entries of `sys_A` below this magnitude are treated as singular.
pub const MIN_PIVOT: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    LinearSimple,
    LinearFull,
    Bfs,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::LinearSimple => "linear-simple",
            Method::LinearFull => "linear-full",
            Method::Bfs => "bfs",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "linear-simple" => Ok(Method::LinearSimple),
            "linear-full" => Ok(Method::LinearFull),
            "bfs" => Ok(Method::Bfs),
            other => Err(format!(
                "unknown method '{other}' (expected linear-simple, linear-full or bfs)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simple,
    Full,
}

impl Mode {
    pub fn method(self) -> Method {
        match self {
            Mode::Simple => Method::LinearSimple,
            Mode::Full => Method::LinearFull,
        }
    }
}

/// Node voltages of a solved feeder, node-major with `phase_count` entries
/// per node; the slack node comes first.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub node_ids: Vec<String>,
    pub phase_count: usize,
    pub voltages: Vec<Complex64>,
    pub method: Method,
    pub iterations: usize,
    pub converged: bool,
}

impl Solution {
    pub fn voltage(&self, node: usize, phase: usize) -> Complex64 {
        self.voltages[node * self.phase_count + phase]
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.voltages.iter().map(|v| v.norm()).collect()
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }
}

/// Expansion point of the linearization, one phasor per phase.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationPoint {
    pub phases: Vec<Complex64>,
}

impl LinearizationPoint {
    /// The slack phasors themselves.
    pub fn at_slack(network: &Network) -> Self {
        LinearizationPoint {
            phases: network.feeder().slack_voltage.clone(),
        }
    }

    /// `v0` on phase a, rotated by the nominal sequence on b and c.
    pub fn uniform(v0: Complex64, phase_count: usize) -> Self {
        LinearizationPoint {
            phases: phase_rotation(phase_count).iter().map(|r| v0 * r).collect(),
        }
    }
}

/// Coefficients of `V V* ~ c_v V + c_vbar V* + c_0` about `v0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VsqCoefficients {
    pub c_v: Complex64,
    pub c_vbar: Complex64,
    pub c_0: Complex64,
}

impl VsqCoefficients {
    pub fn eval(&self, v: Complex64) -> Complex64 {
        self.c_v * v + self.c_vbar * v.conj() + self.c_0
    }
}

/// Wirtinger expansion of `f(V) = V V*`: `f'_V = V*`, `f'_V* = V`.
pub fn linearize_vsq(v0: Complex64) -> VsqCoefficients {
    VsqCoefficients {
        c_v: v0.conj(),
        c_vbar: v0,
        c_0: Complex64::new(-v0.norm_sqr(), 0.0),
    }
}

/// The assembled linear system for the non-slack voltages.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub d: DMatrix<Complex64>,
    pub v0: LinearizationPoint,
    /// Coefficient of `V_k*` per phase, `(v0 - V_S) / v0*`. Only used in
    /// full mode; equals `1 - V_S` at `v0 = 1`.
    pub conj_coeff: Vec<Complex64>,
    /// `I - D Y_Z`; diagonal unless constant-impedance loads couple nodes.
    pub sys_a: DMatrix<Complex64>,
    pub sys_b: DVector<Complex64>,
    pub mode: Mode,
    node_ids: Vec<String>,
    slack: Vec<Complex64>,
    diagonal: bool,
}

impl LinearModel {
    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }
}

pub fn assemble(network: &Network, v0: &LinearizationPoint, mode: Mode) -> Result<LinearModel> {
    let feeder = network.feeder();
    let p = feeder.phase_count;
    if v0.phases.len() != p {
        return Err(Error::Dimension {
            expected: p,
            found: v0.phases.len(),
        });
    }
    if let Some(bad) = v0
        .phases
        .iter()
        .find(|v| v.norm() <= 0.0 || !v.norm().is_finite())
    {
        return Err(Error::Singular(format!(
            "linearization point {bad} has zero magnitude"
        )));
    }
    let d = network.reduced_impedance().d.clone();
    let size = d.nrows();
    let loads = LoadTable::new(feeder);

    let mut sys_a = DMatrix::<Complex64>::identity(size, size);
    let mut injections = DVector::<Complex64>::zeros(size);
    let mut diagonal = true;
    for k in 1..feeder.node_count() {
        let parts = loads.linear_parts(k, &v0.phases)?;
        let base = (k - 1) * p;
        for ph in 0..p {
            injections[base + ph] = parts.j_i[ph] + parts.j_p[ph];
        }
        // sys_a -= D[:, block k] * Y_Z(k)
        for c in 0..p {
            for r in 0..p {
                let y = parts.y_z[r * p + c];
                if y == ZERO {
                    continue;
                }
                diagonal = false;
                for i in 0..size {
                    sys_a[(i, base + c)] -= d[(i, base + r)] * y;
                }
            }
        }
    }

    let anchor = match mode {
        Mode::Simple => &feeder.slack_voltage,
        Mode::Full => &v0.phases,
    };
    let mut sys_b = &d * &injections;
    for i in 0..size {
        sys_b[i] += anchor[i % p];
    }

    let conj_coeff = v0
        .phases
        .iter()
        .zip(&feeder.slack_voltage)
        .map(|(&v0, &vs)| {
            let c = linearize_vsq(v0);
            (c.c_vbar - vs) / c.c_v
        })
        .collect();

    if let Some(i) = (0..size).find(|&i| sys_a[(i, i)].norm() < MIN_PIVOT) {
        return Err(Error::Singular(format!(
            "sys_A diagonal entry {i} has magnitude {:e}",
            sys_a[(i, i)].norm()
        )));
    }

    Ok(LinearModel {
        d,
        v0: v0.clone(),
        conj_coeff,
        sys_a,
        sys_b,
        mode,
        node_ids: feeder.nodes.clone(),
        slack: feeder.slack_voltage.clone(),
        diagonal,
    })
}

/// Solves an assembled model. Simple mode is a single (usually diagonal)
/// complex solve; full mode solves the stacked real system.
pub fn solve_linear(model: &LinearModel) -> Result<Solution> {
    let v_m = match model.mode {
        Mode::Simple => solve_simple(model)?,
        Mode::Full => solve_stacked(model)?,
    };
    let mut voltages = model.slack.clone();
    voltages.extend(v_m.iter());
    Ok(Solution {
        node_ids: model.node_ids.clone(),
        phase_count: model.slack.len(),
        voltages,
        method: model.mode.method(),
        iterations: 0,
        converged: true,
    })
}

fn solve_simple(model: &LinearModel) -> Result<DVector<Complex64>> {
    if model.diagonal {
        return Ok(model.sys_b.zip_map(&model.sys_a.diagonal(), |b, a| b / a));
    }
    model
        .sys_a
        .clone()
        .lu()
        .solve(&model.sys_b)
        .ok_or_else(|| Error::Singular("sys_A is singular".into()))
}

fn solve_stacked(model: &LinearModel) -> Result<DVector<Complex64>> {
    let n = model.sys_b.len();
    let p = model.slack.len();
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let mut rhs = DVector::<f64>::zeros(2 * n);
    // (A + diag(beta) conj) V = b, with V = x + jy
    for i in 0..n {
        for j in 0..n {
            let a = model.sys_a[(i, j)];
            m[(i, j)] = a.re;
            m[(i, n + j)] = -a.im;
            m[(n + i, j)] = a.im;
            m[(n + i, n + j)] = a.re;
        }
        let beta = model.conj_coeff[i % p];
        m[(i, i)] += beta.re;
        m[(i, n + i)] += beta.im;
        m[(n + i, i)] += beta.im;
        m[(n + i, n + i)] -= beta.re;
        rhs[i] = model.sys_b[i].re;
        rhs[n + i] = model.sys_b[i].im;
    }
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("stacked real system is singular".into()))?;
    Ok(DVector::from_fn(n, |i, _| Complex64::new(x[i], x[n + i])))
}

/// Full (conjugate-linear) solve at the given linearization point.
pub fn solve_linear_full(network: &Network, v0: &LinearizationPoint) -> Result<Solution> {
    solve_linear(&assemble(network, v0, Mode::Full)?)
}

/// Three-phase entry point; rejects single-phase networks.
pub fn solve_three_phase(
    network: &Network,
    v0: &LinearizationPoint,
    mode: Mode,
) -> Result<Solution> {
    if network.phase_count() != 3 {
        return Err(Error::Unsupported(
            "solve_three_phase needs a three-phase feeder".into(),
        ));
    }
    solve_linear(&assemble(network, v0, mode)?)
}

/// Solves with the default linearization point `v0 = V_S`.
pub fn solve(network: &Network, mode: Mode) -> Result<Solution> {
    solve_linear(&assemble(
        network,
        &LinearizationPoint::at_slack(network),
        mode,
    )?)
}
