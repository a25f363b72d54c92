mod common;

use ldpglass::disorder::{center_rescale, sample_er, sample_goe, Kind, SparseGraph};

fn dense_matvec(a: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
}

#[test]
fn goe_matvec_matches_dense() {
    let n = 200;
    let d = sample_goe::<f64>(n, 4).unwrap();
    assert_eq!(d.kind(), Kind::DenseGoe);
    let a = d.dense_data().unwrap();
    let x: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
    let want = dense_matvec(a, &x);
    for (g, w) in d.matvec(&x).unwrap().iter().zip(&want) {
        assert!((g - w).abs() < 1e-12);
    }
}

#[test]
fn sparse_matvec_matches_dense() {
    let n = 300;
    let g = sample_er(n, 10.0, 2).unwrap();
    let d = center_rescale::<f64>(&g, 10.0).unwrap();
    let a = d.densify(n).unwrap();
    // entries from the edge list alone
    let mu = 10.0 / n as f64;
    let s = (10.0 * (1.0 - mu)).sqrt();
    for i in 0..n {
        for j in 0..n {
            let y = if i != j && g.contains(i, j) { 1.0 } else { 0.0 };
            let want = if i == j { 0.0 } else { -(y - mu) / s };
            assert!((a[i * n + j] - want).abs() < 1e-15);
        }
    }
    let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let want = dense_matvec(&a, &x);
    for (g, w) in d.matvec(&x).unwrap().iter().zip(&want) {
        assert!((g - w).abs() < 1e-10);
    }
}

#[test]
fn single_precision_agrees() {
    let n = 150;
    let g = sample_er(n, 6.0, 5).unwrap();
    let d64 = center_rescale::<f64>(&g, 6.0).unwrap();
    let d32 = center_rescale::<f32>(&g, 6.0).unwrap();
    let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).cos()).collect();
    let x32: Vec<f32> = x.iter().map(|v| *v as f32).collect();
    let a = d64.matvec(&x).unwrap();
    let b = d32.matvec(&x32).unwrap();
    for (p, q) in a.iter().zip(&b) {
        assert!((p - *q as f64).abs() < 1e-4);
    }
}

#[test]
fn rescaled_entries() {
    let g = SparseGraph::new(100, [(0, 1)]).unwrap();
    let d = center_rescale::<f64>(&g, 4.0).unwrap();
    assert!((d.entry(0, 1) - (-0.96 / 3.84f64.sqrt())).abs() < 1e-15);
    assert!((d.entry(0, 1) + 0.489898).abs() < 1e-6);
    assert!((d.entry(2, 3) - 0.020412).abs() < 1e-6);
    assert_eq!(d.entry(5, 5), 0.0);
    assert_eq!(d.entry(1, 0), d.entry(0, 1));
}

#[test]
fn goe_operator_norm_near_two() {
    let d = sample_goe::<f64>(1500, 6).unwrap();
    let norm = d.estimate_operator_norm(200, 1).unwrap();
    assert!(norm > 1.85 && norm < 2.1, "{norm}");
    let entries: f64 = d.dense_data().unwrap().iter().map(|x| x * x).sum();
    // Frobenius norm² ≈ n − 1
    assert!((entries / 1499.0 - 1.0).abs() < 0.01, "{entries}");
}

#[test]
fn er_edge_counts() {
    let (n, d) = (3000, 8.0);
    let pairs = (n * (n - 1) / 2) as f64;
    let p = d / n as f64;
    let mean = pairs * p;
    let sd = (pairs * p * (1.0 - p)).sqrt();
    let mut total = 0.0;
    for seed in 0..10 {
        let g = sample_er(n, d, seed).unwrap();
        let m = g.num_edges() as f64;
        assert!((m - mean).abs() < 5.0 * sd, "seed {seed}: {m} vs {mean}");
        assert!(g.edges().windows(2).all(|w| w[0] < w[1]));
        assert!(g.edges().iter().all(|&(a, b)| a < b && (b as usize) < n));
        total += m;
    }
    assert!((total / 10.0 - mean).abs() < 5.0 * sd / 10f64.sqrt());
    assert_eq!(sample_er(n, d, 3).unwrap(), sample_er(n, d, 3).unwrap());
}

#[test]
fn degenerate_parameters_rejected() {
    assert!(sample_goe::<f64>(0, 1).is_err());
    assert!(sample_er(10, 0.0, 1).is_err());
    assert!(sample_er(10, 10.0, 1).is_err());
    let g = sample_er(50, 5.0, 1).unwrap();
    assert!(center_rescale::<f64>(&g, 6.0).is_err());
}
