//! Backward-forward sweep reference solver.
//!
//! Each iteration evaluates the exact ZIP injections at the present
//! voltages, accumulates branch currents from the leaves toward the slack,
//! then walks back out updating `V_child = V_parent - Z I_branch`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linsolve::{self, Method, Mode, Solution};
use crate::loads::LoadTable;
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfsOptions {
    /// Stop once the largest per-node voltage update is below this (p.u.).
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Start from the slack phasors everywhere; otherwise warm-start from
    /// the simple linear solution.
    pub flat_start: bool,
}

impl Default for BfsOptions {
    fn default() -> Self {
        BfsOptions {
            tolerance: 1e-8,
            max_iterations: 100,
            flat_start: true,
        }
    }
}

pub fn solve_bfs(network: &Network, opts: &BfsOptions) -> Result<Solution> {
    if opts.tolerance.is_nan() || opts.tolerance <= 0.0 || opts.max_iterations == 0 {
        return Err(Error::Unsupported(format!(
            "BFS needs tolerance > 0 and max_iterations >= 1 (got {:e}, {})",
            opts.tolerance, opts.max_iterations
        )));
    }
    let feeder = network.feeder();
    let topo = network.topology();
    let p = feeder.phase_count;
    let n = feeder.node_count();
    let loads = LoadTable::new(feeder);

    let mut v = if opts.flat_start {
        network.flat_voltages()
    } else {
        linsolve::solve(network, Mode::Simple)?.voltages
    };
    let mut current = vec![Complex64::new(0.0, 0.0); n * p];
    let mut delta = f64::INFINITY;

    for iteration in 1..=opts.max_iterations {
        let inj = loads.injections(&v)?;

        // backward: current drawn through each node's parent branch
        for &c in topo.order.iter().skip(1).rev() {
            for ph in 0..p {
                let mut acc = -inj[c * p + ph];
                for &g in &topo.children[c] {
                    acc += current[g * p + ph];
                }
                current[c * p + ph] = acc;
            }
        }

        // forward
        delta = 0.0;
        for &c in topo.order.iter().skip(1) {
            let b = topo.parent_branch[c].unwrap();
            let q = topo.parent[c].unwrap();
            let z = network.z_block(b);
            for r in 0..p {
                let drop: Complex64 = (0..p).map(|k| z[(r, k)] * current[c * p + k]).sum();
                let updated = v[q * p + r] - drop;
                delta = delta.max((updated - v[c * p + r]).norm());
                v[c * p + r] = updated;
            }
        }

        if !delta.is_finite() {
            break;
        }
        if delta < opts.tolerance {
            return Ok(solution(network, v, iteration, true));
        }
    }

    Err(Error::Convergence {
        iterations: opts.max_iterations,
        last_delta: delta,
        last: Box::new(solution(network, v, opts.max_iterations, false)),
    })
}

fn solution(
    network: &Network,
    voltages: Vec<Complex64>,
    iterations: usize,
    converged: bool,
) -> Solution {
    Solution {
        node_ids: network.feeder().nodes.clone(),
        phase_count: network.phase_count(),
        voltages,
        method: Method::Bfs,
        iterations,
        converged,
    }
}

/// Largest nodal mismatch `|(Y_bus V)_k - I_k(V)|` over the non-slack
/// nodes. Infinite if a load cannot be evaluated at `sol`.
pub fn residual(network: &Network, sol: &Solution) -> Result<f64> {
    let p = network.phase_count();
    let expected = p * network.feeder().node_count();
    if sol.voltages.len() != expected {
        return Err(Error::Dimension {
            expected,
            found: sol.voltages.len(),
        });
    }
    let Ok(inj) = LoadTable::new(network.feeder()).injections(&sol.voltages) else {
        return Ok(f64::INFINITY);
    };
    let net = network.network_injections(&sol.voltages);
    Ok(net
        .iter()
        .zip(&inj)
        .skip(p)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}
