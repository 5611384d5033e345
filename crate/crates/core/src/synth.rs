//! Random radial feeders for property tests and benchmarks.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::loads::{Connection, PhaseSel, ZipLoad};
use crate::network::{phase_rotation, Branch, Feeder, Impedance, UnitSystem};

/// Share of each node's load assigned to the Z, I and P components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZipMix {
    pub z: f64,
    pub i: f64,
    pub p: f64,
}

impl ZipMix {
    pub const POWER: ZipMix = ZipMix {
        z: 0.0,
        i: 0.0,
        p: 1.0,
    };
    pub const IMPEDANCE: ZipMix = ZipMix {
        z: 1.0,
        i: 0.0,
        p: 0.0,
    };
    pub const CURRENT: ZipMix = ZipMix {
        z: 0.0,
        i: 1.0,
        p: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomFeederConfig {
    pub nodes: usize,
    pub resistance: (f64, f64),
    pub reactance: (f64, f64),
    /// Per-node apparent power is uniform in `[0, max_load]`.
    pub max_load: f64,
    /// Load power factor is uniform in this range (lagging).
    pub power_factor: (f64, f64),
    pub mix: ZipMix,
    pub slack: Complex64,
}

impl Default for RandomFeederConfig {
    fn default() -> Self {
        RandomFeederConfig {
            nodes: 20,
            resistance: (0.001, 0.004),
            reactance: (0.001, 0.004),
            max_load: 0.05,
            power_factor: (0.85, 1.0),
            mix: ZipMix::POWER,
            slack: Complex64::new(1.0, 0.0),
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// A random recursive tree: node `k` hangs off a uniformly chosen earlier
/// node. Branches are stored parent to child.
fn random_tree<R: Rng>(rng: &mut R, nodes: usize) -> Vec<(usize, usize)> {
    (1..nodes).map(|k| (rng.random_range(0..k), k)).collect()
}

fn node_id(k: usize) -> String {
    format!("n{k}")
}

pub fn random_feeder<R: Rng>(rng: &mut R, cfg: &RandomFeederConfig) -> Feeder {
    assert!(cfg.nodes >= 2, "a feeder needs at least two nodes");
    let branches = random_tree(rng, cfg.nodes)
        .into_iter()
        .map(|(f, t)| Branch {
            id: format!("b{t}"),
            from: node_id(f),
            to: node_id(t),
            impedance: Impedance::Scalar(Complex64::new(
                uniform(rng, cfg.resistance),
                uniform(rng, cfg.reactance),
            )),
        })
        .collect();
    let loads = (1..cfg.nodes)
        .map(|k| {
            let s = random_power(rng, cfg);
            ZipLoad {
                node: node_id(k),
                phase: PhaseSel::All,
                connection: Connection::Wye,
                s_z: s * cfg.mix.z,
                s_i: s * cfg.mix.i,
                s_p: s * cfg.mix.p,
            }
        })
        .filter(|l| !l.is_zero())
        .collect();
    Feeder {
        name: format!("random-{}", cfg.nodes),
        phase_count: 1,
        nodes: (0..cfg.nodes).map(node_id).collect(),
        slack_voltage: vec![cfg.slack],
        units: UnitSystem::PerUnit,
        branches,
        loads,
    }
}

fn random_power<R: Rng>(rng: &mut R, cfg: &RandomFeederConfig) -> Complex64 {
    let mag = uniform(rng, (0.0, cfg.max_load));
    let pf = uniform(rng, cfg.power_factor);
    Complex64::new(mag * pf, mag * (1.0 - pf * pf).sqrt())
}

/// Symmetric coupled line: self impedance on the diagonal, `mutual` off it.
pub fn coupled_impedance(self_z: Complex64, mutual: Complex64) -> Impedance {
    let mut m = [[mutual; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = self_z;
    }
    Impedance::Matrix(m)
}

/// Three-phase counterpart of [`random_feeder`] with balanced coupled lines
/// (mutual impedance a fixed fraction of self) and balanced wye loads.
pub fn random_balanced_three_phase<R: Rng>(rng: &mut R, cfg: &RandomFeederConfig) -> Feeder {
    let mut f = random_feeder(rng, cfg);
    f.phase_count = 3;
    f.slack_voltage = phase_rotation(3).iter().map(|r| cfg.slack * r).collect();
    for b in &mut f.branches {
        if let Impedance::Scalar(z) = b.impedance {
            b.impedance = coupled_impedance(z, z * 0.35);
        }
    }
    f.name = format!("random-3ph-{}", cfg.nodes);
    f
}
