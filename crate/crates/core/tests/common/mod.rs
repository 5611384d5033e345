#![allow(dead_code)]

use radialpf::synth::{self, RandomFeederConfig, ZipMix};
use radialpf::{Complex64, Feeder, Network};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn feeder(seed: u64, nodes: usize, mix: ZipMix) -> Feeder {
    synth::random_feeder(
        &mut synth::rng(seed),
        &RandomFeederConfig {
            nodes,
            mix,
            ..Default::default()
        },
    )
}

pub fn network(f: Feeder) -> Network {
    Network::new(f).expect("generated feeder is valid")
}

/// Flips the stored direction of every branch whose index has the given bit
/// pattern; the physical feeder is unchanged.
pub fn reorient(mut f: Feeder, mask: u64) -> Feeder {
    for (i, b) in f.branches.iter_mut().enumerate() {
        if mask >> (i % 64) & 1 == 1 {
            std::mem::swap(&mut b.from, &mut b.to);
        }
    }
    f
}

/// Parent of each node, found by a plain depth-first walk from node 0.
pub fn parents(f: &Feeder) -> Vec<Option<(usize, usize)>> {
    let n = f.nodes.len();
    let idx = |id: &str| f.nodes.iter().position(|x| x == id).unwrap();
    let mut out = vec![None; n];
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for (bi, b) in f.branches.iter().enumerate() {
            let (a, z) = (idx(&b.from), idx(&b.to));
            let other = if a == u {
                z
            } else if z == u {
                a
            } else {
                continue;
            };
            if !seen[other] {
                seen[other] = true;
                out[other] = Some((u, bi));
                stack.push(other);
            }
        }
    }
    out
}

/// Branch indices between `node` and the slack.
pub fn path(par: &[Option<(usize, usize)>], mut node: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while let Some((q, b)) = par[node] {
        out.push(b);
        node = q;
    }
    out
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
