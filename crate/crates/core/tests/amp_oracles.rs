mod common;

use ldpglass::amp::{
    initial_iterate, rescale_to_identity, run_amp, state_evolution_mc, Coordinatewise, Scalar, Start, StateEvolution,
};
use ldpglass::disorder::sample_goe;
use ldpglass::harness::random_poly_family;
use ldpglass::poly::frozen_b;

#[test]
fn tanh_chain_oracle_is_sane() {
    let v = common::tanh_chain_variances(5);
    assert_eq!(v[0], 1.0);
    // E[tanh²(Z)] for standard normal Z
    assert!((v[1] - 0.394294).abs() < 1e-5, "{}", v[1]);
    assert!(v.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn state_evolution_matches_tanh_oracle() {
    let f = Coordinatewise::new(Scalar::Tanh, Start::One, 5);
    let se = state_evolution_mc(&f, 4, 0.0, 200_000, 7).unwrap();
    let want = common::tanh_chain_variances(5);
    for t in 1..=5 {
        let got = se.psi[t].x2.mean;
        assert!((got - want[t - 1]).abs() < 0.01, "t = {t}: {got} vs {}", want[t - 1]);
        assert!((se.q[t][t] - want[t - 1]).abs() < 0.01);
    }
}

#[test]
fn amp_run_tracks_state_evolution() {
    for (t, emp, want) in common::tanh_chain_run(4000, 5, 1) {
        assert!((emp - want).abs() <= 0.03, "t = {t}: empirical {emp}, predicted {want}");
    }
}

#[test]
fn rescaling_by_known_variances() {
    let n = 50;
    let f = Coordinatewise::new(Scalar::Tanh, Start::One, 3);
    let dim = 5;
    let q = (0..dim).map(|a| (0..dim).map(|b| if a == b { 4.0 } else { 0.0 }).collect()).collect();
    let se = StateEvolution { q, samples: 0, init_var: 0.0, psi: vec![], projected: false };
    let rf = rescale_to_identity(f, &se).unwrap();
    assert_eq!(rf.scales(), &[1.0, 0.5, 0.5, 0.5, 0.5]);
    let d = sample_goe::<f64>(n, 3).unwrap();
    let u0 = vec![0.1; n];
    let a = run_amp(&d, &f, u0.clone(), 3).unwrap();
    let b = run_amp(&d, &rf, u0, 3).unwrap();
    for t in 1..=3 {
        for (x, y) in a.u[t].iter().zip(&b.u[t]) {
            assert!((0.5 * x - y).abs() < 1e-12, "t = {t}: {x} {y}");
        }
    }
}

#[test]
fn frozen_onsager_matches_empirical() {
    let (n, delta) = (4000, 0.25);
    let q = random_poly_family(3, 3, 0.3, 17).unwrap();
    let fb = frozen_b(&q, delta, 16, 50_000, 4).unwrap();
    let d = sample_goe::<f64>(n, 8).unwrap();
    let u0 = initial_iterate(n, delta, q.truncation, 9);
    let s = run_amp(&d, &q, u0, 3).unwrap();
    assert_eq!(s.b.len(), 3);
    for t in 1..s.b.len() {
        for j in 1..=t {
            let emp = s.b[t][j];
            // per-coordinate sd of the derivative, recovered from the run-to-run spread
            let sd = fb.err[t][j] * ((fb.runs * fb.samples) as f64).sqrt();
            let tol = 5.0 * (fb.err[t][j] + sd / (n as f64).sqrt()) + 1e-12;
            assert!((emp - fb.b[t][j]).abs() <= tol, "b[{t}][{j}]: empirical {emp}, frozen {} ± {tol}", fb.b[t][j]);
        }
    }
}
