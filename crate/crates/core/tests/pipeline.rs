use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tvflow_core::io::{execute_run, load_trajectory, read_manifest, save_trajectory};
use tvflow_core::jko::maximum_principle_check;
use tvflow_core::ot::{w2_exact_1d, w2_histogram_1d, w2_lp_oracle};
use tvflow_core::rof::{rof_objective, taut_string_1d};
use tvflow_core::*;

fn random_density(rng: &mut ChaCha8Rng, grid: TorusGrid) -> Density {
    let v = (0..grid.len()).map(|_| rng.random_range(0.2..2.0)).collect();
    Density::normalized(grid, v).unwrap()
}

#[test]
fn rof_agrees_with_taut_string_and_certifies() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid = TorusGrid::new(1, 48).unwrap();
    for _ in 0..10 {
        let g = ScalarField::new(grid, (0..48).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let s = rof_solve(&g, &RofConfig::default()).unwrap();
        let exact = taut_string_1d(&g).unwrap();
        assert!(rof_objective(&g, &exact) <= rof_objective(&g, &s.u) + 1e-9);
        let rep = check_pair(&s.u, &s.z, 1e-9, 1e-6).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}

#[test]
fn one_dimensional_transport_matches_linear_program() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let grid = TorusGrid::new(1, 24).unwrap();
    for _ in 0..5 {
        let mu = random_density(&mut rng, grid);
        let nu = random_density(&mut rng, grid);
        let exact = w2_exact_1d(&mu, &nu).unwrap().w2_squared;
        let lp = w2_lp_oracle(&mu, &nu).unwrap().w2_squared;
        assert!((exact - lp).abs() <= 1e-10 * (1.0 + lp), "{exact} vs {lp}");
        // the histogram model spreads mass inside cells, so it is only close
        let hist = w2_histogram_1d(&mu, &nu).unwrap().w2_squared;
        assert!(hist.is_finite() && hist >= 0.0);
    }
}

#[test]
fn short_flow_respects_bounds_and_round_trips() {
    let grid = TorusGrid::new(1, 64).unwrap();
    let datum = make_datum(&DatumSpec::preset("step"), grid).unwrap();
    let traj = run_flow(&datum.density, &FlowConfig::new(1e-4, 6, 1e-3, 0.05)).unwrap();
    assert_eq!(traj.len(), 7);
    for (k, s) in traj.steps.iter().enumerate() {
        assert!(s.converged);
        let mp = maximum_principle_check(traj.density(k), &s.rho_next);
        assert!(mp.pass, "step {k}: {mp:?}");
        assert!((s.rho_next.mass() - 1.0).abs() < 1e-12);
    }
    let energy: Vec<f64> = traj.records.iter().map(|r| r.energy).collect();
    assert!(energy.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{energy:?}");

    let dir = tempfile::tempdir().unwrap();
    save_trajectory(dir.path(), &traj).unwrap();
    let back = load_trajectory(dir.path()).unwrap();
    assert_eq!(back.records, traj.records);
    assert_eq!(back.density(6), traj.density(6));
}

#[test]
fn configured_run_writes_manifest_and_snapshots() {
    let cfg = parse_config_str(
        r#"
[grid]
dim = 1
n = 32

[datum]
preset = "bumps"

[time]
tau = 1e-4
steps = 4

[barrier]
eps = 1e-3
c = 0.05
"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let r = execute_run(&cfg, &out, false).unwrap();
    assert!(r.error.is_none());
    assert_eq!(r.trajectory.len(), 5);
    read_manifest(&out).unwrap();
    assert_eq!(load_trajectory(&out).unwrap().records, r.trajectory.records);
    assert!(execute_run(&cfg, &out, false).is_err(), "existing outputs are not overwritten");
}
