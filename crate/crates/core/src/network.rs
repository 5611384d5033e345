//! Radial feeder description and the incidence-matrix machinery built on it.
//!
//! Branches may be stored in either orientation. The incidence row of a
//! branch carries `+1` at its `from` node and `-1` at its `to` node. All
//! linear solves against `A_M` walk the tree rooted at the slack node, so no
//! dense inverse is ever formed.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::loads::{Connection, ZipLoad};

/// Smallest accepted branch impedance magnitude (p.u.).
pub const MIN_IMPEDANCE: f64 = 1e-9;
/// Tolerance on `z_ij - z_ji` for 3x3 branch impedances.
pub const SYMMETRY_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Unit phasors of the nominal phase sequence: `[1]` for single-phase,
/// `[1, e^(-j2pi/3), e^(+j2pi/3)]` for three-phase.
pub fn phase_rotation(phase_count: usize) -> Vec<Complex64> {
    let h = 3f64.sqrt() / 2.0;
    [ONE, Complex64::new(-0.5, -h), Complex64::new(-0.5, h)][..phase_count].to_vec()
}

pub const PHASE_NAMES: [&str; 3] = ["a", "b", "c"];

#[derive(Debug, Clone, PartialEq)]
pub enum Impedance {
    Scalar(Complex64),
    /// Row-major 3x3 phase impedance matrix.
    Matrix([[Complex64; 3]; 3]),
}

impl Impedance {
    /// The `p x p` phase block of this impedance. A scalar in a
    /// three-phase feeder is an uncoupled `z * I3`.
    pub fn block(&self, phase_count: usize) -> DMatrix<Complex64> {
        match self {
            Impedance::Scalar(z) => DMatrix::from_diagonal_element(phase_count, phase_count, *z),
            Impedance::Matrix(m) => DMatrix::from_fn(3, 3, |i, j| m[i][j]),
        }
    }

    fn check(&self, phase_count: usize) -> std::result::Result<(), String> {
        match self {
            Impedance::Scalar(z) => {
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err("impedance is not finite".into());
                }
                if z.norm() < MIN_IMPEDANCE {
                    return Err(format!(
                        "|z| = {:e} below minimum {MIN_IMPEDANCE:e}",
                        z.norm()
                    ));
                }
                Ok(())
            }
            Impedance::Matrix(m) => {
                if phase_count != 3 {
                    return Err("3x3 impedance in a single-phase feeder".into());
                }
                if m.iter()
                    .flatten()
                    .any(|z| !(z.re.is_finite() && z.im.is_finite()))
                {
                    return Err("impedance is not finite".into());
                }
                for (i, row) in m.iter().enumerate() {
                    if row[i].norm() < MIN_IMPEDANCE {
                        return Err(format!("|z_{i}{i}| below minimum {MIN_IMPEDANCE:e}"));
                    }
                    for (j, &mij) in row.iter().enumerate().take(i) {
                        if (mij - m[j][i]).norm() > SYMMETRY_TOL {
                            return Err(format!("impedance matrix not symmetric at ({i},{j})"));
                        }
                    }
                }
                let block = self.block(3);
                let scale = block.iter().map(|z| z.norm()).fold(0.0, f64::max);
                let det = block.clone().lu().determinant();
                if det.norm() <= 1e-12 * scale.powi(3) {
                    return Err("impedance matrix is singular".into());
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: String,
    pub from: String,
    pub to: String,
    pub impedance: Impedance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnitSystem {
    PerUnit,
    /// Volts, ohms and volt-amperes; loads are specified at `v_base`.
    Physical {
        v_base: f64,
        s_base: Option<f64>,
    },
}

/// A radial feeder as read from a file. Plain data; see [`validate_radial`]
/// and [`Network::new`] for the checks applied before solving.
#[derive(Debug, Clone, PartialEq)]
pub struct Feeder {
    pub name: String,
    pub phase_count: usize,
    /// Node identifiers; the slack node is `nodes[0]`.
    pub nodes: Vec<String>,
    /// Slack phasor per phase.
    pub slack_voltage: Vec<Complex64>,
    pub units: UnitSystem,
    pub branches: Vec<Branch>,
    pub loads: Vec<ZipLoad>,
}

impl Feeder {
    pub fn slack_id(&self) -> &str {
        &self.nodes[0]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// `h = 1 / V_base`; unity in per-unit analysis.
    pub fn h(&self) -> f64 {
        match self.units {
            UnitSystem::PerUnit => 1.0,
            UnitSystem::Physical { v_base, .. } => 1.0 / v_base,
        }
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    PhaseCount(usize),
    SlackVoltage(String),
    DuplicateNode(String),
    DuplicateBranch(String),
    UnknownNode { branch: String, node: String },
    SelfLoop(String),
    CountMismatch { nodes: usize, branches: usize },
    Cycle { branch: String },
    Disconnected { nodes: Vec<String> },
    BadImpedance { branch: String, reason: String },
    BadLoad { index: usize, reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "feeder has no nodes"),
            Violation::PhaseCount(p) => write!(f, "phase count must be 1 or 3, got {p}"),
            Violation::SlackVoltage(r) => write!(f, "slack voltage: {r}"),
            Violation::DuplicateNode(n) => write!(f, "duplicate node '{n}'"),
            Violation::DuplicateBranch(b) => write!(f, "duplicate branch id '{b}'"),
            Violation::UnknownNode { branch, node } => {
                write!(f, "branch '{branch}' references unknown node '{node}'")
            }
            Violation::SelfLoop(b) => write!(f, "branch '{b}' connects a node to itself"),
            Violation::CountMismatch { nodes, branches } => {
                write!(f, "node count {nodes} != branch count {branches} + 1")
            }
            Violation::Cycle { branch } => write!(f, "cycle detected at branch '{branch}'"),
            Violation::Disconnected { nodes } => {
                write!(f, "disconnected from slack: {}", nodes.join(", "))
            }
            Violation::BadImpedance { branch, reason } => {
                write!(f, "branch '{branch}': {reason}")
            }
            Violation::BadLoad { index, reason } => write!(f, "load #{index}: {reason}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every structural invariant: `n = m + 1`, a connected acyclic
/// branch graph rooted at the slack, admissible impedances and loads.
pub fn validate_radial(feeder: &Feeder) -> ValidationReport {
    let mut v = Vec::new();
    if feeder.nodes.is_empty() {
        v.push(Violation::Empty);
        return ValidationReport { violations: v };
    }
    if feeder.phase_count != 1 && feeder.phase_count != 3 {
        v.push(Violation::PhaseCount(feeder.phase_count));
    }
    if feeder.slack_voltage.len() != feeder.phase_count {
        v.push(Violation::SlackVoltage(format!(
            "expected {} phasors, found {}",
            feeder.phase_count,
            feeder.slack_voltage.len()
        )));
    }
    for s in &feeder.slack_voltage {
        if !(s.re.is_finite() && s.im.is_finite()) || s.norm() <= 0.0 {
            v.push(Violation::SlackVoltage(format!(
                "|V_S| must be > 0, got {s}"
            )));
        }
    }
    if let UnitSystem::Physical { v_base, .. } = feeder.units {
        if !(v_base.is_finite() && v_base > 0.0) {
            v.push(Violation::SlackVoltage(format!(
                "v_base must be > 0, got {v_base}"
            )));
        }
    }

    let mut index = HashMap::new();
    for (i, n) in feeder.nodes.iter().enumerate() {
        if index.insert(n.as_str(), i).is_some() {
            v.push(Violation::DuplicateNode(n.clone()));
        }
    }
    let mut seen = HashSet::new();
    for b in &feeder.branches {
        if !seen.insert(b.id.as_str()) {
            v.push(Violation::DuplicateBranch(b.id.clone()));
        }
        if let Err(reason) = b.impedance.check(feeder.phase_count) {
            v.push(Violation::BadImpedance {
                branch: b.id.clone(),
                reason,
            });
        }
    }

    let n = feeder.nodes.len();
    let m = feeder.branches.len();
    if n != m + 1 {
        v.push(Violation::CountMismatch {
            nodes: n,
            branches: m,
        });
    }

    // union-find for cycles, then reachability from the slack
    let mut uf: Vec<usize> = (0..n).collect();
    fn find(uf: &mut [usize], mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    for b in &feeder.branches {
        let (f, t) = match (index.get(b.from.as_str()), index.get(b.to.as_str())) {
            (Some(&f), Some(&t)) => (f, t),
            (f, t) => {
                if f.is_none() {
                    v.push(Violation::UnknownNode {
                        branch: b.id.clone(),
                        node: b.from.clone(),
                    });
                }
                if t.is_none() {
                    v.push(Violation::UnknownNode {
                        branch: b.id.clone(),
                        node: b.to.clone(),
                    });
                }
                continue;
            }
        };
        if f == t {
            v.push(Violation::SelfLoop(b.id.clone()));
            continue;
        }
        let (rf, rt) = (find(&mut uf, f), find(&mut uf, t));
        if rf == rt {
            v.push(Violation::Cycle {
                branch: b.id.clone(),
            });
        } else {
            uf[rf] = rt;
        }
    }
    let root = find(&mut uf, 0);
    let detached: Vec<String> = (0..n)
        .filter(|&i| find(&mut uf, i) != root)
        .map(|i| feeder.nodes[i].clone())
        .collect();
    if !detached.is_empty() {
        v.push(Violation::Disconnected { nodes: detached });
    }

    for (i, load) in feeder.loads.iter().enumerate() {
        let bad = |reason: String| Violation::BadLoad { index: i, reason };
        match index.get(load.node.as_str()) {
            None => v.push(bad(format!("unknown node '{}'", load.node))),
            Some(0) => v.push(bad(format!("load on slack node '{}'", load.node))),
            Some(_) => {}
        }
        if load.connection == Connection::Delta && feeder.phase_count != 3 {
            v.push(bad("delta connection in a single-phase feeder".into()));
        }
        if !load.is_finite() {
            v.push(bad("non-finite power component".into()));
        }
    }

    ValidationReport { violations: v }
}

/// Parent pointers and a slack-rooted traversal order of a radial feeder.
#[derive(Debug, Clone)]
pub struct Topology {
    /// Node indices, parents before children; `order[0] == 0`.
    pub order: Vec<usize>,
    /// Parent node of each node (`None` for the slack).
    pub parent: Vec<Option<usize>>,
    /// Branch connecting each non-slack node to its parent.
    pub parent_branch: Vec<Option<usize>>,
    /// Child endpoint of each branch.
    pub branch_child: Vec<usize>,
    /// `+1` when the branch is stored parent-to-child, `-1` otherwise.
    pub branch_sign: Vec<f64>,
    pub children: Vec<Vec<usize>>,
}

impl Topology {
    pub fn build(feeder: &Feeder) -> Result<Self> {
        let report = validate_radial(feeder);
        if !report.ok() {
            return Err(Error::Validation(report.violations));
        }
        let n = feeder.node_count();
        let index: HashMap<&str, usize> = feeder
            .nodes
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (bi, b) in feeder.branches.iter().enumerate() {
            let (f, t) = (index[b.from.as_str()], index[b.to.as_str()]);
            adj[f].push((t, bi));
            adj[t].push((f, bi));
        }
        let mut parent = vec![None; n];
        let mut parent_branch = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut branch_child = vec![0; feeder.branch_count()];
        let mut branch_sign = vec![0.0; feeder.branch_count()];
        let mut order = Vec::with_capacity(n);
        let mut visited = vec![false; n];
        let mut queue = VecDeque::from([0]);
        visited[0] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(w, bi) in &adj[u] {
                if visited[w] {
                    continue;
                }
                visited[w] = true;
                parent[w] = Some(u);
                parent_branch[w] = Some(bi);
                children[u].push(w);
                branch_child[bi] = w;
                branch_sign[bi] = if index[feeder.branches[bi].from.as_str()] == u {
                    1.0
                } else {
                    -1.0
                };
                queue.push_back(w);
            }
        }
        Ok(Topology {
            order,
            parent,
            parent_branch,
            branch_child,
            branch_sign,
            children,
        })
    }

    /// Nodes on the path from the slack to `node`, excluding the slack.
    pub fn path_branches(&self, mut node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        while let Some(b) = self.parent_branch[node] {
            out.push(b);
            node = self.parent[node].unwrap();
        }
        out
    }
}

/// Signed branch-node incidence matrix (`m x n`), rows in feeder branch order.
#[derive(Debug, Clone)]
pub struct IncidenceModel {
    pub matrix: DMatrix<f64>,
    pub branch_order: Vec<String>,
    topology: Topology,
}

impl IncidenceModel {
    /// Slack column `A_S`.
    pub fn a_s(&self) -> Vec<f64> {
        self.matrix.column(0).iter().copied().collect()
    }

    /// Non-slack columns `A_M` (square for a radial feeder).
    pub fn a_m(&self) -> DMatrix<f64> {
        self.matrix.columns(1, self.matrix.ncols() - 1).into_owned()
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Solves `A_M y = x` where `x` is indexed by branch and `y` by non-slack
    /// node, in blocks of `p` phases.
    pub fn solve_am<T>(&self, x: &[T], p: usize) -> Vec<T>
    where
        T: Copy + Default + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let t = &self.topology;
        let mut y = vec![T::default(); x.len()];
        for &c in t.order.iter().skip(1) {
            let b = t.parent_branch[c].unwrap();
            let q = t.parent[c].unwrap();
            let s = t.branch_sign[b];
            for ph in 0..p {
                let up = if q == 0 {
                    T::default()
                } else {
                    y[(q - 1) * p + ph]
                };
                y[(c - 1) * p + ph] = up - x[b * p + ph] * s;
            }
        }
        y
    }

    /// Solves `A_M^T y = x` where `x` is indexed by non-slack node and `y` by
    /// branch.
    pub fn solve_am_t<T>(&self, x: &[T], p: usize) -> Vec<T>
    where
        T: Copy
            + Default
            + std::ops::Sub<Output = T>
            + std::ops::Add<Output = T>
            + std::ops::Mul<f64, Output = T>,
    {
        let t = &self.topology;
        let mut y = vec![T::default(); x.len()];
        for &c in t.order.iter().skip(1).rev() {
            let b = t.parent_branch[c].unwrap();
            for ph in 0..p {
                let mut acc = T::default();
                for &g in &t.children[c] {
                    let gb = t.parent_branch[g].unwrap();
                    acc = acc + y[gb * p + ph] * t.branch_sign[gb];
                }
                y[b * p + ph] = (acc - x[(c - 1) * p + ph]) * t.branch_sign[b];
            }
        }
        y
    }
}

pub fn build_incidence(feeder: &Feeder) -> Result<IncidenceModel> {
    let topology = Topology::build(feeder)?;
    let n = feeder.node_count();
    let m = feeder.branch_count();
    let mut matrix = DMatrix::zeros(m, n);
    for (bi, b) in feeder.branches.iter().enumerate() {
        matrix[(bi, feeder.node_index(&b.from).unwrap())] = 1.0;
        matrix[(bi, feeder.node_index(&b.to).unwrap())] = -1.0;
    }
    Ok(IncidenceModel {
        matrix,
        branch_order: feeder.branches.iter().map(|b| b.id.clone()).collect(),
        topology,
    })
}

/// `D = A_M^-1 Z A_M^-T`, the inverse of the slack-reduced admittance matrix.
/// Indexed by `(node - 1) * p + phase`.
#[derive(Debug, Clone)]
pub struct ReducedImpedance {
    pub d: DMatrix<Complex64>,
    pub phase_count: usize,
}

pub fn reduced_impedance(inc: &IncidenceModel, feeder: &Feeder) -> Result<ReducedImpedance> {
    let p = feeder.phase_count;
    let blocks = impedance_blocks(feeder)?;
    let size = p * (feeder.node_count() - 1);
    let mut d = DMatrix::zeros(size, size);
    let mut unit = vec![ZERO; size];
    for j in 0..size {
        unit[j] = ONE;
        let y = inc.solve_am_t(&unit, p);
        unit[j] = ZERO;
        let mut w = vec![ZERO; y.len()];
        for (b, z) in blocks.iter().enumerate() {
            for r in 0..p {
                w[b * p + r] = (0..p).map(|c| z[(r, c)] * y[b * p + c]).sum();
            }
        }
        let col = inc.solve_am(&w, p);
        d.column_mut(j).copy_from_slice(&col);
    }
    Ok(ReducedImpedance { d, phase_count: p })
}

fn impedance_blocks(feeder: &Feeder) -> Result<Vec<DMatrix<Complex64>>> {
    feeder
        .branches
        .iter()
        .map(|b| {
            b.impedance
                .check(feeder.phase_count)
                .map_err(|r| Error::Singular(format!("branch '{}': {r}", b.id)))?;
            Ok(b.impedance.block(feeder.phase_count))
        })
        .collect()
}

fn admittance_blocks(feeder: &Feeder) -> Result<Vec<DMatrix<Complex64>>> {
    impedance_blocks(feeder)?
        .into_iter()
        .zip(&feeder.branches)
        .map(|(z, b)| {
            z.try_inverse()
                .ok_or_else(|| Error::Singular(format!("branch '{}' impedance", b.id)))
        })
        .collect()
}

/// Full `pn x pn` bus admittance matrix `A^T C A` (no shunts).
pub fn ybus(inc: &IncidenceModel, feeder: &Feeder) -> Result<DMatrix<Complex64>> {
    let p = feeder.phase_count;
    let n = feeder.node_count();
    let mut y = DMatrix::zeros(p * n, p * n);
    for (bi, yb) in admittance_blocks(feeder)?.iter().enumerate() {
        let row = inc.matrix.row(bi);
        let ends: Vec<(usize, f64)> = (0..n)
            .filter(|&k| row[k] != 0.0)
            .map(|k| (k, row[k]))
            .collect();
        for &(i, si) in &ends {
            for &(j, sj) in &ends {
                for r in 0..p {
                    for c in 0..p {
                        y[(i * p + r, j * p + c)] += yb[(r, c)] * (si * sj);
                    }
                }
            }
        }
    }
    Ok(y)
}

/// A validated feeder with its topology and per-branch phase blocks. The
/// reduced impedance matrix is built on first use.
#[derive(Debug)]
pub struct Network {
    feeder: Feeder,
    incidence: IncidenceModel,
    z_blocks: Vec<DMatrix<Complex64>>,
    y_blocks: Vec<DMatrix<Complex64>>,
    reduced: OnceLock<ReducedImpedance>,
}

impl Network {
    pub fn new(feeder: Feeder) -> Result<Self> {
        let incidence = build_incidence(&feeder)?;
        let z_blocks = impedance_blocks(&feeder)?;
        let y_blocks = admittance_blocks(&feeder)?;
        Ok(Network {
            feeder,
            incidence,
            z_blocks,
            y_blocks,
            reduced: OnceLock::new(),
        })
    }

    pub fn feeder(&self) -> &Feeder {
        &self.feeder
    }

    pub fn incidence(&self) -> &IncidenceModel {
        &self.incidence
    }

    pub fn topology(&self) -> &Topology {
        self.incidence.topology()
    }

    pub fn phase_count(&self) -> usize {
        self.feeder.phase_count
    }

    pub fn z_block(&self, branch: usize) -> &DMatrix<Complex64> {
        &self.z_blocks[branch]
    }

    pub fn y_block(&self, branch: usize) -> &DMatrix<Complex64> {
        &self.y_blocks[branch]
    }

    pub fn reduced_impedance(&self) -> &ReducedImpedance {
        self.reduced.get_or_init(|| {
            reduced_impedance(&self.incidence, &self.feeder)
                .expect("impedances checked in Network::new")
        })
    }

    /// Slack phasors repeated at every node: the no-load operating point.
    pub fn flat_voltages(&self) -> Vec<Complex64> {
        let n = self.feeder.node_count();
        (0..n)
            .flat_map(|_| self.feeder.slack_voltage.iter().copied())
            .collect()
    }

    /// Nodal injections `A^T Z^-1 A V` implied by the branch flows of `v`.
    pub fn network_injections(&self, v: &[Complex64]) -> Vec<Complex64> {
        let p = self.phase_count();
        let mut out = vec![ZERO; v.len()];
        for (bi, b) in self.feeder.branches.iter().enumerate() {
            let f = self.feeder.node_index(&b.from).unwrap();
            let t = self.feeder.node_index(&b.to).unwrap();
            let current = self.branch_current(bi, &v[f * p..f * p + p], &v[t * p..t * p + p]);
            for ph in 0..p {
                out[f * p + ph] += current[ph];
                out[t * p + ph] -= current[ph];
            }
        }
        out
    }

    /// `I_F = Z^-1 (V_from - V_to)` for one branch.
    pub(crate) fn branch_current(
        &self,
        branch: usize,
        v_from: &[Complex64],
        v_to: &[Complex64],
    ) -> Vec<Complex64> {
        let y = &self.y_blocks[branch];
        let p = v_from.len();
        (0..p)
            .map(|r| (0..p).map(|c| y[(r, c)] * (v_from[c] - v_to[c])).sum())
            .collect()
    }
}
