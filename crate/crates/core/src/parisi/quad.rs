use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::erf::erfc;

/// Gauss–Hermite rule for the standard normal (weights sum to one).
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch on the Jacobi matrix of the probabilists' Hermite family.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut j = DMatrix::<f64>::zeros(order, order);
        for k in 1..order {
            let b = (k as f64).sqrt();
            j[(k - 1, k)] = b;
            j[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(j);
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(z, w)| w * f(*z)).sum()
    }
}

/// `log P(Z ≤ z)` for a standard normal, accurate in the far left tail.
pub fn log_ndtr(z: f64) -> f64 {
    if z > 6.0 {
        // P(Z > z) is tiny; log1p keeps the precision
        return (-0.5 * erfc(z / std::f64::consts::SQRT_2)).ln_1p();
    }
    if z > -20.0 {
        return (0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln();
    }
    let z2 = z * z;
    let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2) + 105.0 / (z2 * z2 * z2 * z2);
    -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
}
