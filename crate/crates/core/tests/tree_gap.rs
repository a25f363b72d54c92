use ldpglass::amp::initial_iterate;
use ldpglass::ldp::Ensemble;
use ldpglass::poly::{frozen_b, tree_gap_check, unroll, GapReport, PolyDenoiserFamily, PolyStep};

const DELTA: f64 = 0.25;

/// Two steps, `q¹` linear in `u¹` and `q²` with a `u¹u²` cross term, so
/// the candidate carries closed walks of length three (triangles).
fn family() -> PolyDenoiserFamily {
    let q0 = PolyStep::constant(1.0);
    let q1 = PolyStep::from_monomials(vec![1], &[(vec![1], 0.8), (vec![0], 0.3)]).unwrap();
    let q2 = PolyStep::from_monomials(
        vec![1, 2],
        &[(vec![1, 1], 0.7), (vec![0, 1], -0.4), (vec![1, 0], 0.5), (vec![0, 0], 0.2)],
    )
    .unwrap();
    PolyDenoiserFamily::new(vec![q0, q1, q2], vec![1.0; 3]).unwrap()
}

fn gap(ensemble: Ensemble, n: usize, d: f64, samples: u64) -> GapReport {
    let q = family();
    let b = frozen_b(&q, DELTA, 4, 20_000, 11).unwrap();
    let u0 = initial_iterate(n, DELTA, q.truncation, 5);
    let un = unroll(&q, &b, &u0, 2, DELTA).unwrap();
    assert!(un.h.all_connected() && un.h.all_rooted());
    assert!(un.h.entries.iter().any(|p| !p.is_tree_based()), "family should produce cycles");
    tree_gap_check(&un.h, ensemble, n, d, samples, 3).unwrap()
}

#[test]
fn goe_gap_decays_with_n() {
    let small = gap(Ensemble::Goe, 8, 0.0, 4000);
    let large = gap(Ensemble::Goe, 16, 0.0, 4000);
    let tol = 3.0 * (large.stderr.powi(2) + (0.7 * small.stderr).powi(2)).sqrt();
    assert!(small.mean > 0.0);
    assert!(
        large.mean <= 0.7 * small.mean + tol,
        "gap(16) = {} ± {}, gap(8) = {} ± {}",
        large.mean,
        large.stderr,
        small.mean,
        small.stderr
    );
}

#[test]
fn sparse_gap_decreases_in_d() {
    let lo = gap(Ensemble::Sparse, 16, 4.0, 4000);
    let hi = gap(Ensemble::Sparse, 16, 12.0, 4000);
    let tol = 3.0 * (lo.stderr.powi(2) + hi.stderr.powi(2)).sqrt();
    assert!(
        hi.mean <= lo.mean + tol,
        "gap(d=12) = {} ± {}, gap(d=4) = {} ± {}",
        hi.mean,
        hi.stderr,
        lo.mean,
        lo.stderr
    );
    eprintln!("sparse gap d=4 {:.4e} ± {:.1e}, d=12 {:.4e} ± {:.1e}", lo.mean, lo.stderr, hi.mean, hi.stderr);
}
