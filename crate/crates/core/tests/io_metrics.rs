mod common;

use common::{c, feeder, network};
use proptest::prelude::*;
use radialpf::io::{self, OutputFormat};
use radialpf::linsolve::{self, Mode};
use radialpf::metrics::{self, LuvrForm};
use radialpf::synth::{self, RandomFeederConfig, ZipMix};
use radialpf::{solve_bfs, BfsOptions, Connection, PhaseSel, UnitSystem};
use serde_json::Value;

fn mixed_three_phase(seed: u64, n: usize) -> radialpf::Feeder {
    let mut f = synth::random_balanced_three_phase(
        &mut synth::rng(seed),
        &RandomFeederConfig {
            nodes: n,
            mix: ZipMix {
                z: 0.2,
                i: 0.3,
                p: 0.5,
            },
            ..Default::default()
        },
    );
    for (k, l) in f.loads.iter_mut().enumerate() {
        l.phase = [PhaseSel::All, PhaseSel::A, PhaseSel::B, PhaseSel::C][k % 4];
        if k % 3 == 0 {
            l.connection = Connection::Delta;
        }
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn feeder_round_trip(seed in any::<u64>(), n in 2usize..=20, three in any::<bool>(), physical in any::<bool>()) {
        let mut f = if three { mixed_three_phase(seed, n) } else { feeder(seed, n, ZipMix { z: 0.2, i: 0.3, p: 0.5 }) };
        if physical {
            f.units = UnitSystem::Physical { v_base: 4160.0, s_base: Some(1e6) };
        }
        let text = io::serialize_feeder(&f);
        let g = io::parse_feeder(&text).unwrap();
        prop_assert_eq!(&f, &g);
        prop_assert_eq!(text, io::serialize_feeder(&g));
    }

    #[test]
    fn solution_json_reparses(seed in any::<u64>(), n in 2usize..=20) {
        let net = network(mixed_three_phase(seed, n));
        let sol = linsolve::solve(&net, Mode::Simple).unwrap();
        let rep = metrics::report(&net, &sol, None).unwrap();
        let doc: Value = serde_json::from_str(&io::write_solution(&sol, &rep, OutputFormat::Json)).unwrap();
        let nodes = doc["nodes"].as_array().unwrap();
        prop_assert_eq!(nodes.len(), sol.voltages.len());
        for (row, v) in nodes.iter().zip(&sol.voltages) {
            let re = row["re"].as_f64().unwrap();
            let im = row["im"].as_f64().unwrap();
            prop_assert!((re - v.re).abs() < 1e-12 && (im - v.im).abs() < 1e-12);
            prop_assert_eq!(row["magnitude"].as_f64().unwrap(), v.norm());
        }
        prop_assert_eq!(doc["p_loss"].as_f64().unwrap(), rep.p_loss);
    }

    #[test]
    fn luvr_is_scale_invariant(a in 0.5f64..1.5, b in 0.5f64..1.5, cc in 0.5f64..1.5, s in 0.1f64..10.0) {
        for form in [LuvrForm::MaxMagnitude, LuvrForm::MaxDeviation] {
            let x = metrics::luvr_of([a, b, cc], form);
            let y = metrics::luvr_of([a * s, b * s, cc * s], form);
            prop_assert!(x >= 0.0);
            prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
        }
    }

    #[test]
    fn three_phase_energy_balance(seed in any::<u64>(), n in 2usize..=15) {
        let net = network(mixed_three_phase(seed, n));
        let sol = solve_bfs(&net, &BfsOptions::default()).unwrap();
        let (pl, ql) = metrics::losses(&metrics::branch_flows(&net, &sol));
        let gap = metrics::slack_power(&net, &sol) - metrics::load_power(&net, &sol).unwrap() - c(pl, ql);
        prop_assert!(gap.norm() < 1e-8, "{gap}");
        prop_assert!(pl >= 0.0);
    }
}

#[test]
fn zero_load_csv_has_slack_magnitude() {
    let f = io::parse_feeder(include_str!("../../../feeders/zero-load.json")).unwrap();
    let net = network(f);
    let sol = linsolve::solve(&net, Mode::Simple).unwrap();
    let rep = metrics::report(&net, &sol, None).unwrap();
    let csv = io::write_solution(&sol, &rep, OutputFormat::Csv);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("node,phase,v_mag,v_angle_deg"));
    for line in lines {
        let mag: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((mag - 1.02).abs() < 1e-12, "{line}");
    }
}

#[test]
fn comparison_csv_epsilon_matches_node_errors() {
    let net = network(mixed_three_phase(3, 12));
    let lin = linsolve::solve(&net, Mode::Full).unwrap();
    let bfs = solve_bfs(&net, &BfsOptions::default()).unwrap();
    let expected = metrics::node_errors(&lin, &bfs).unwrap();
    let cmp = metrics::compare(&net, lin, bfs).unwrap();
    let csv = io::write_comparison(&cmp, OutputFormat::Csv);
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "epsilon").unwrap();
    let parsed: Vec<f64> = lines
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect();
    assert_eq!(parsed, expected);
    // same numbers through the solution writer
    let sol_csv = io::write_solution(&cmp.linear, &cmp.linear_report, OutputFormat::Csv);
    let sol_eps: Vec<f64> = sol_csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert_eq!(sol_eps, expected);
}

#[test]
fn parsing_ignores_locale_style_commas() {
    // decimal commas are not numbers in the file format
    let text = include_str!("../../../feeders/two-bus.json").replace("0.01", "0,01");
    assert!(matches!(
        io::parse_feeder(&text),
        Err(radialpf::Error::Parse { .. })
    ));
}

#[test]
fn losses_are_non_negative_across_methods() {
    for seed in 0..30 {
        let net = network(feeder(seed, 25, ZipMix::POWER));
        for sol in [
            linsolve::solve(&net, Mode::Simple).unwrap(),
            linsolve::solve(&net, Mode::Full).unwrap(),
            solve_bfs(&net, &BfsOptions::default()).unwrap(),
        ] {
            let (p, q) = metrics::losses(&metrics::branch_flows(&net, &sol));
            assert!(p >= 0.0 && q >= 0.0);
        }
    }
}
