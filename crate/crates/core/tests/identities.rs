mod common;

use common::{c, feeder, network, parents, path, reorient};
use nalgebra::DMatrix;
use proptest::prelude::*;
use radialpf::synth::ZipMix;
use radialpf::{build_incidence, reduced_impedance, ybus, Complex64, Impedance};

fn scalar_z(f: &radialpf::Feeder, b: usize) -> Complex64 {
    match f.branches[b].impedance {
        Impedance::Scalar(z) => z,
        _ => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn ymm_times_d_is_identity(seed in any::<u64>(), n in 2usize..=50) {
        let f = feeder(seed, n, ZipMix::POWER);
        let inc = build_incidence(&f).unwrap();
        let d = reduced_impedance(&inc, &f).unwrap().d;
        let y = ybus(&inc, &f).unwrap();
        let ymm = y.view((1, 1), (n - 1, n - 1)).into_owned();
        let prod = ymm * &d;
        let eye = DMatrix::<Complex64>::identity(n - 1, n - 1);
        let err = (prod - eye).iter().map(|x| x.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10, "max |Y_MM D - I| = {err:e}");
    }

    #[test]
    fn am_inverse_as_is_minus_ones(seed in any::<u64>(), n in 2usize..=50, mask in any::<u64>()) {
        let f = reorient(feeder(seed, n, ZipMix::POWER), mask);
        let inc = build_incidence(&f).unwrap();
        let x = inc.solve_am(&inc.a_s(), 1);
        prop_assert!(x.iter().all(|&v| v == -1.0), "{x:?}");
        // the tree solve inverts the dense A_M
        let am = inc.a_m();
        let col = DMatrix::from_column_slice(n - 1, 1, &x);
        let back = am * col;
        for (k, v) in inc.a_s().iter().enumerate() {
            prop_assert_eq!(back[(k, 0)], *v);
        }
    }

    #[test]
    fn d_is_the_shared_path_impedance(seed in any::<u64>(), n in 2usize..=40, mask in any::<u64>()) {
        let f = reorient(feeder(seed, n, ZipMix::POWER), mask);
        let d = network(f.clone()).reduced_impedance().d.clone();
        let par = parents(&f);
        for k in 1..n {
            let pk = path(&par, k);
            for j in 1..n {
                let pj = path(&par, j);
                let oracle: Complex64 = pk.iter().filter(|b| pj.contains(b)).map(|&b| scalar_z(&f, b)).sum();
                prop_assert!((d[(k - 1, j - 1)] - oracle).norm() < 1e-14);
                prop_assert_eq!(d[(k - 1, j - 1)], d[(j - 1, k - 1)]);
            }
        }
    }

    #[test]
    fn d_ignores_branch_orientation(seed in any::<u64>(), n in 2usize..=30, mask in any::<u64>()) {
        let f = feeder(seed, n, ZipMix::POWER);
        let a = network(f.clone()).reduced_impedance().d.clone();
        let b = network(reorient(f, mask)).reduced_impedance().d.clone();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn branch_flows_reconstruct_injections(seed in any::<u64>(), n in 2usize..=50) {
        // V = V_S + D I for arbitrary non-slack injections; A^T Z^-1 A V gives I back
        let f = feeder(seed, n, ZipMix::POWER);
        let net = network(f);
        let d = &net.reduced_impedance().d;
        let inj: Vec<Complex64> = (1..n).map(|k| c((k as f64 * 0.37).sin() * 0.1, (k as f64 * 0.11).cos() * 0.05)).collect();
        let mut v = vec![c(1.0, 0.0)];
        for k in 0..n - 1 {
            v.push(c(1.0, 0.0) + (0..n - 1).map(|j| d[(k, j)] * inj[j]).sum::<Complex64>());
        }
        let back = net.network_injections(&v);
        for k in 1..n {
            prop_assert!((back[k] - inj[k - 1]).norm() < 1e-12, "node {k}: {} vs {}", back[k], inj[k - 1]);
        }
        // the slack supplies the total
        let total: Complex64 = inj.iter().sum();
        prop_assert!((back[0] + total).norm() < 1e-12);
    }

    #[test]
    fn three_phase_d_matches_ybus(seed in any::<u64>(), n in 2usize..=15) {
        let f = radialpf::synth::random_balanced_three_phase(
            &mut radialpf::synth::rng(seed),
            &radialpf::synth::RandomFeederConfig { nodes: n, ..Default::default() },
        );
        let inc = build_incidence(&f).unwrap();
        let d = reduced_impedance(&inc, &f).unwrap().d;
        let y = ybus(&inc, &f).unwrap();
        let m = 3 * (n - 1);
        let ymm = y.view((3, 3), (m, m)).into_owned();
        let err = (ymm * &d - DMatrix::<Complex64>::identity(m, m)).iter().map(|x| x.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10, "{err:e}");
    }
}

#[test]
fn ybus_rows_sum_to_zero() {
    let f = feeder(11, 25, ZipMix::POWER);
    let inc = build_incidence(&f).unwrap();
    let y = ybus(&inc, &f).unwrap();
    for r in 0..y.nrows() {
        let s: Complex64 = y.row(r).iter().sum();
        assert!(s.norm() < 1e-9 * y[(r, r)].norm());
    }
    assert_eq!(y, y.transpose());
}
