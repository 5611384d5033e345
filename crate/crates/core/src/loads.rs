//! ZIP loads and their nodal current injections.
//!
//! Load powers are consumption-positive. Injections carry the opposite sign,
//! so a consuming load draws a negative injection from its node.

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::network::{phase_rotation, Feeder, PHASE_NAMES};

/// Below this magnitude a constant-power term is not evaluated.
pub const MIN_LOAD_VOLTAGE: f64 = 1e-6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseSel {
    A,
    B,
    C,
    All,
}

impl PhaseSel {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseSel::A => "a",
            PhaseSel::B => "b",
            PhaseSel::C => "c",
            PhaseSel::All => "all",
        }
    }

    fn indices(self) -> &'static [usize] {
        match self {
            PhaseSel::A => &[0],
            PhaseSel::B => &[1],
            PhaseSel::C => &[2],
            PhaseSel::All => &[0, 1, 2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connection {
    Wye,
    /// Phase-to-phase. The phase selector names the leg: `a` is ab,
    /// `b` is bc, `c` is ca.
    Delta,
}

/// A load with constant-impedance, constant-current and constant-power
/// parts, each given as the complex power drawn at nominal voltage.
#[derive(Debug, Clone, PartialEq)]
pub struct ZipLoad {
    pub node: String,
    pub phase: PhaseSel,
    pub connection: Connection,
    pub s_z: Complex64,
    pub s_i: Complex64,
    pub s_p: Complex64,
}

impl ZipLoad {
    pub fn constant_power(node: impl Into<String>, s_p: Complex64) -> Self {
        ZipLoad {
            node: node.into(),
            phase: PhaseSel::All,
            connection: Connection::Wye,
            s_z: ZERO,
            s_i: ZERO,
            s_p,
        }
    }

    pub fn terms(&self) -> ZipTerms {
        ZipTerms {
            s_z: self.s_z,
            s_i: self.s_i,
            s_p: self.s_p,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms().is_zero()
    }

    pub fn is_finite(&self) -> bool {
        [self.s_z, self.s_i, self.s_p]
            .iter()
            .all(|s| s.re.is_finite() && s.im.is_finite())
    }
}

/// The three power components of a ZIP load (or a sum of loads sharing a
/// node and phase; the injection is linear in each component).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZipTerms {
    pub s_z: Complex64,
    pub s_i: Complex64,
    pub s_p: Complex64,
}

impl ZipTerms {
    pub fn is_zero(&self) -> bool {
        self.s_z == ZERO && self.s_i == ZERO && self.s_p == ZERO
    }

    fn add(&mut self, other: ZipTerms) {
        self.s_z += other.s_z;
        self.s_i += other.s_i;
        self.s_p += other.s_p;
    }

    /// `-(h^2 S_Z* v + h S_I* u + S_P* / v*)`, where `u` is the unit phasor
    /// the constant current is referenced to. `None` on voltage collapse.
    pub fn injection(&self, v: Complex64, h: f64, reference: Complex64) -> Option<Complex64> {
        let mut i = self.s_z.conj() * v * (h * h) + self.s_i.conj() * reference * h;
        if self.s_p != ZERO {
            if v.norm() <= MIN_LOAD_VOLTAGE {
                return None;
            }
            i += self.s_p.conj() / v.conj();
        }
        Some(-i)
    }
}

/// Nodal injection of a single-phase (or phase-a) ZIP load at voltage `v`.
pub fn injection_current(load: &ZipLoad, v: Complex64, h: f64) -> Result<Complex64> {
    injection_current_ref(load, v, h, Complex64::new(1.0, 0.0))
}

/// As [`injection_current`], with the constant-current part referenced to
/// the unit phasor `reference` (the nominal angle of the phase it sits on).
pub fn injection_current_ref(
    load: &ZipLoad,
    v: Complex64,
    h: f64,
    reference: Complex64,
) -> Result<Complex64> {
    load.terms()
        .injection(v, h, reference)
        .ok_or_else(|| Error::VoltageCollapse {
            node: load.node.clone(),
            phase: load.phase.as_str().into(),
            magnitude: v.norm(),
        })
}

/// Phase-to-line map `[[1,-1,0],[0,1,-1],[-1,0,1]]`.
pub fn line_map() -> Matrix3<f64> {
    Matrix3::new(1.0, -1.0, 0.0, 0.0, 1.0, -1.0, -1.0, 0.0, 1.0)
}

pub fn line_voltages(v_abc: &[Complex64]) -> [Complex64; 3] {
    [
        v_abc[0] - v_abc[1],
        v_abc[1] - v_abc[2],
        v_abc[2] - v_abc[0],
    ]
}

/// Leg injections mapped to phases: `M^T x`.
pub fn legs_to_phases(x: [Complex64; 3]) -> [Complex64; 3] {
    [x[0] - x[2], x[1] - x[0], x[2] - x[1]]
}

/// Nominal line-voltage unit phasors for legs ab, bc, ca.
pub fn leg_references() -> [Complex64; 3] {
    let u = phase_rotation(3);
    let l = line_voltages(&u);
    l.map(|x| x / x.norm())
}

/// `h` seen by a delta leg: `h / sqrt(3)`, so a leg drawing its rated power
/// at nominal line voltage is specified in the same base as a wye load.
pub fn delta_h(h: f64) -> f64 {
    h / 3f64.sqrt()
}

fn leg_terms(loads: &[ZipLoad]) -> [ZipTerms; 3] {
    let mut legs = [ZipTerms::default(); 3];
    for l in loads.iter().filter(|l| l.connection == Connection::Delta) {
        for &k in l.phase.indices() {
            legs[k].add(l.terms());
        }
    }
    legs
}

/// Phase injections `(I_a, I_b, I_c)` of the delta loads at one node, given
/// its phase voltages. Non-delta loads in `loads` are ignored.
pub fn delta_to_wye_injections(
    loads: &[ZipLoad],
    v_abc: [Complex64; 3],
    h: f64,
) -> Result<[Complex64; 3]> {
    let node = loads.first().map(|l| l.node.clone()).unwrap_or_default();
    delta_injections(&leg_terms(loads), &v_abc, h).map_err(|(leg, magnitude)| {
        Error::VoltageCollapse {
            node,
            phase: LEG_NAMES[leg].into(),
            magnitude,
        }
    })
}

pub const LEG_NAMES: [&str; 3] = ["ab", "bc", "ca"];

fn delta_injections(
    legs: &[ZipTerms; 3],
    v_abc: &[Complex64],
    h: f64,
) -> std::result::Result<[Complex64; 3], (usize, f64)> {
    let vl = line_voltages(v_abc);
    let refs = leg_references();
    let hd = delta_h(h);
    let mut x = [ZERO; 3];
    for k in 0..3 {
        if legs[k].is_zero() {
            continue;
        }
        x[k] = legs[k]
            .injection(vl[k], hd, refs[k])
            .ok_or((k, vl[k].norm()))?;
    }
    Ok(legs_to_phases(x))
}

/// Loads aggregated per node: wye terms per phase and delta terms per leg.
#[derive(Debug, Clone)]
pub struct LoadTable {
    phase_count: usize,
    h: f64,
    wye: Vec<Vec<ZipTerms>>,
    delta: Vec<Option<[ZipTerms; 3]>>,
    names: Vec<String>,
}

/// Linear decomposition of one node's injection:
/// `I(V) = y_z V + j_i + j_p(V)`, with `j_p` evaluated at a fixed point.
#[derive(Debug, Clone)]
pub struct NodeLinearParts {
    /// Row-major `p x p` block.
    pub y_z: Vec<Complex64>,
    pub j_i: Vec<Complex64>,
    pub j_p: Vec<Complex64>,
}

impl LoadTable {
    pub fn new(feeder: &Feeder) -> Self {
        let n = feeder.node_count();
        let p = feeder.phase_count;
        let mut wye = vec![vec![ZipTerms::default(); p]; n];
        let mut delta: Vec<Option<[ZipTerms; 3]>> = vec![None; n];
        for load in &feeder.loads {
            if load.is_zero() {
                continue;
            }
            let Some(k) = feeder.node_index(&load.node) else {
                continue;
            };
            match load.connection {
                Connection::Wye => {
                    let phases: &[usize] = if p == 1 { &[0] } else { load.phase.indices() };
                    for &ph in phases {
                        wye[k][ph].add(load.terms());
                    }
                }
                Connection::Delta => {
                    let legs = delta[k].get_or_insert([ZipTerms::default(); 3]);
                    for &leg in load.phase.indices() {
                        legs[leg].add(load.terms());
                    }
                }
            }
        }
        LoadTable {
            phase_count: p,
            h: feeder.h(),
            wye,
            delta,
            names: feeder.nodes.clone(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.wye.iter().flatten().all(ZipTerms::is_zero)
            && self.delta.iter().flatten().flatten().all(ZipTerms::is_zero)
    }

    /// Exact nodal injections at voltages `v` (node-major, `p` per node).
    /// The slack entries are zero.
    pub fn injections(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        let p = self.phase_count;
        let refs = phase_rotation(p);
        let mut out = vec![ZERO; v.len()];
        for k in 1..self.wye.len() {
            let vk = &v[k * p..k * p + p];
            for ph in 0..p {
                let t = &self.wye[k][ph];
                if t.is_zero() {
                    continue;
                }
                out[k * p + ph] = t.injection(vk[ph], self.h, refs[ph]).ok_or_else(|| {
                    Error::VoltageCollapse {
                        node: self.names[k].clone(),
                        phase: phase_label(p, ph),
                        magnitude: vk[ph].norm(),
                    }
                })?;
            }
            if let Some(legs) = &self.delta[k] {
                let inj = delta_injections(legs, vk, self.h).map_err(|(leg, magnitude)| {
                    Error::VoltageCollapse {
                        node: self.names[k].clone(),
                        phase: LEG_NAMES[leg].into(),
                        magnitude,
                    }
                })?;
                for ph in 0..3 {
                    out[k * p + ph] += inj[ph];
                }
            }
        }
        Ok(out)
    }

    /// Splits node `k`'s injection into its exactly-linear parts and the
    /// constant-power currents evaluated at the phase voltages `v0`.
    pub fn linear_parts(&self, k: usize, v0: &[Complex64]) -> Result<NodeLinearParts> {
        let p = self.phase_count;
        let h = self.h;
        let refs = phase_rotation(p);
        let mut y_z = vec![ZERO; p * p];
        let mut j_i = vec![ZERO; p];
        let mut j_p = vec![ZERO; p];
        let collapse = |phase: String, magnitude: f64| Error::VoltageCollapse {
            node: self.names[k].clone(),
            phase,
            magnitude,
        };
        for ph in 0..p {
            let t = &self.wye[k][ph];
            y_z[ph * p + ph] -= t.s_z.conj() * (h * h);
            j_i[ph] -= t.s_i.conj() * refs[ph] * h;
            if t.s_p != ZERO {
                if v0[ph].norm() <= MIN_LOAD_VOLTAGE {
                    return Err(collapse(phase_label(p, ph), v0[ph].norm()));
                }
                j_p[ph] -= t.s_p.conj() / v0[ph].conj();
            }
        }
        if let Some(legs) = &self.delta[k] {
            let m = line_map();
            let hd = delta_h(h);
            let lrefs = leg_references();
            let vl = line_voltages(v0);
            let mut leg_i = [ZERO; 3];
            let mut leg_p = [ZERO; 3];
            for leg in 0..3 {
                let t = &legs[leg];
                let yl = -t.s_z.conj() * (hd * hd);
                // M^T diag(yl) M
                for r in 0..3 {
                    for c in 0..3 {
                        y_z[r * 3 + c] += yl * (m[(leg, r)] * m[(leg, c)]);
                    }
                }
                leg_i[leg] = -t.s_i.conj() * lrefs[leg] * hd;
                if t.s_p != ZERO {
                    if vl[leg].norm() <= MIN_LOAD_VOLTAGE {
                        return Err(collapse(LEG_NAMES[leg].into(), vl[leg].norm()));
                    }
                    leg_p[leg] = -t.s_p.conj() / vl[leg].conj();
                }
            }
            let (pi, pp) = (legs_to_phases(leg_i), legs_to_phases(leg_p));
            for ph in 0..3 {
                j_i[ph] += pi[ph];
                j_p[ph] += pp[ph];
            }
        }
        Ok(NodeLinearParts { y_z, j_i, j_p })
    }
}

pub(crate) fn phase_label(phase_count: usize, ph: usize) -> String {
    if phase_count == 1 {
        "1ph".into()
    } else {
        PHASE_NAMES[ph].into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn load(s_z: Complex64, s_i: Complex64, s_p: Complex64) -> ZipLoad {
        ZipLoad {
            node: "2".into(),
            phase: PhaseSel::A,
            connection: Connection::Wye,
            s_z,
            s_i,
            s_p,
        }
    }

    #[test]
    fn constant_power_at_unity() {
        let i = injection_current(&load(ZERO, ZERO, c(0.1, 0.05)), c(1.0, 0.0), 1.0).unwrap();
        assert_eq!(i, -c(0.1, -0.05));
    }

    #[test]
    fn zero_load_draws_nothing() {
        let i = injection_current(&load(ZERO, ZERO, ZERO), c(0.93, -0.1), 1.0).unwrap();
        assert_eq!(i, ZERO);
    }

    #[test]
    fn constant_impedance_at_half_voltage() {
        let i = injection_current(&load(c(1.0, 0.0), ZERO, ZERO), c(0.5, 0.0), 1.0).unwrap();
        assert_eq!(i, c(-0.5, 0.0));
    }

    #[test]
    fn collapse_is_an_error() {
        let e = injection_current(&load(ZERO, ZERO, c(0.1, 0.0)), c(1e-7, 0.0), 1.0);
        assert!(matches!(e, Err(Error::VoltageCollapse { .. })));
    }

    #[test]
    fn z_term_is_homogeneous() {
        let v = c(0.97, -0.03);
        let one = injection_current(&load(c(0.2, 0.1), ZERO, ZERO), v, 1.0).unwrap();
        let two = injection_current(&load(c(0.4, 0.2), ZERO, ZERO), v, 1.0).unwrap();
        assert_eq!(two, one * 2.0);
    }

    #[test]
    fn i_term_ignores_voltage() {
        let l = load(ZERO, c(0.3, 0.1), ZERO);
        let a = injection_current(&l, c(1.0, 0.0), 1.0).unwrap();
        let b = injection_current(&l, c(0.8, -0.2), 1.0).unwrap();
        assert_eq!(a, b);
    }

    fn delta(phase: PhaseSel, s_p: Complex64) -> ZipLoad {
        ZipLoad {
            node: "n".into(),
            phase,
            connection: Connection::Delta,
            s_z: ZERO,
            s_i: ZERO,
            s_p,
        }
    }

    fn nominal() -> [Complex64; 3] {
        let r = phase_rotation(3);
        [r[0], r[1], r[2]]
    }

    #[test]
    fn delta_without_load() {
        let i = delta_to_wye_injections(&[], nominal(), 1.0).unwrap();
        assert_eq!(i, [ZERO; 3]);
    }

    #[test]
    fn balanced_delta_gives_balanced_currents() {
        let loads = [delta(PhaseSel::All, c(0.3, 0.1))];
        let i = delta_to_wye_injections(&loads, nominal(), 1.0).unwrap();
        let mags = i.map(|x| x.norm());
        assert!((mags[0] - mags[1]).abs() < 1e-12);
        assert!((mags[0] - mags[2]).abs() < 1e-12);
        let rot = phase_rotation(3)[1];
        assert!((i[1] - i[0] * rot).norm() < 1e-12);
        assert!((i[0] + i[1] + i[2]).norm() < 1e-12);
        // three legs at sqrt(3) voltage with h/sqrt(3): total power is 3 S
        let s: Complex64 = nominal().iter().zip(&i).map(|(v, i)| v * i.conj()).sum();
        assert!((s + c(0.9, 0.3)).norm() < 1e-12);
    }

    #[test]
    fn single_leg_current_enters_a_leaves_b() {
        let i =
            delta_to_wye_injections(&[delta(PhaseSel::A, c(0.2, 0.05))], nominal(), 1.0).unwrap();
        assert_eq!(i[0], -i[1]);
        assert_eq!(i[2], ZERO);
    }

    #[test]
    fn delta_h_is_h_over_sqrt3() {
        assert!((delta_h(1.0) - 1.0 / 3f64.sqrt()).abs() < 1e-16);
    }

    #[test]
    fn delta_collapse_names_leg() {
        let v = [c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
        let e = delta_to_wye_injections(&[delta(PhaseSel::A, c(0.1, 0.0))], v, 1.0);
        assert!(matches!(e, Err(Error::VoltageCollapse { ref phase, .. }) if phase == "ab"));
    }
}
