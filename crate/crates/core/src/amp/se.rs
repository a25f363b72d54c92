use super::family::{DenoiserFamily, Rescaled};
use crate::error::{Error, Result};
use crate::rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_values(vals: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut s, mut s2) = (0usize, 0.0, 0.0);
        for v in vals {
            n += 1;
            s += v;
            s2 += v * v;
        }
        if n == 0 {
            return Self::default();
        }
        let nf = n as f64;
        let mean = s / nf;
        let var = if n > 1 { ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0) } else { 0.0 };
        Self { mean, stderr: (var / nf).sqrt() }
    }
}

/// Predicted `E[ψ(U_t)]` for `ψ(x) = x, x², |x|³`.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct PsiStats {
    pub x: Estimate,
    pub x2: Estimate,
    pub x3abs: Estimate,
}

impl PsiStats {
    pub fn of(vals: &[f64]) -> Self {
        Self {
            x: Estimate::from_values(vals.iter().copied()),
            x2: Estimate::from_values(vals.iter().map(|v| v * v)),
            x3abs: Estimate::from_values(vals.iter().map(|v| v.abs().powi(3))),
        }
    }
}

/// Law of `(U₀, …, U_{T+1})`.
///
/// `q[a][b]` for `a, b ≥ 1` is `E[f^{a−1} f^{b−1}]`; row and column 0 hold
/// the variance of the clamped initialization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateEvolution {
    pub q: Vec<Vec<f64>>,
    pub samples: usize,
    pub init_var: f64,
    pub psi: Vec<PsiStats>,
    /// Set when a Schur complement came out negative and was zeroed.
    pub projected: bool,
}

impl StateEvolution {
    pub fn horizon(&self) -> usize {
        self.q.len() - 2
    }

    /// Largest `|Q_ab|` off the diagonal among indices ≥ 1.
    pub fn max_off_diagonal(&self) -> f64 {
        let m = self.q.len();
        let mut best: f64 = 0.0;
        for a in 1..m {
            for b in 1..m {
                if a != b {
                    best = best.max(self.q[a][b].abs());
                }
            }
        }
        best
    }
}

/// Simulate `U₀ ~ N(0, init_var)` clamped at the family's truncation, then
/// `U_1, …, U_{T+1}` jointly Gaussian with covariance built stage by stage
/// from the empirical Gram matrix of the denoiser outputs.
pub fn state_evolution_mc<F: DenoiserFamily<f64>>(
    f: &F,
    horizon: usize,
    init_var: f64,
    samples: usize,
    seed: u64,
) -> Result<StateEvolution> {
    state_evolution_paths(f, horizon, init_var, samples, seed).map(|r| r.0)
}

/// As [`state_evolution_mc`], also returning the sampled paths `u[t][s]`
/// for `t = 0..=horizon + 1`.
pub fn state_evolution_paths<F: DenoiserFamily<f64>>(
    f: &F,
    horizon: usize,
    init_var: f64,
    samples: usize,
    seed: u64,
) -> Result<(StateEvolution, Vec<Vec<f64>>)> {
    if samples < 10_000 {
        return Err(Error::InvalidParameter(format!("samples = {samples} < 1e4")));
    }
    if horizon > f.horizon() {
        return Err(Error::InvalidParameter(format!("horizon {horizon} beyond family horizon {}", f.horizon())));
    }
    if init_var < 0.0 {
        return Err(Error::InvalidParameter(format!("init_var = {init_var}")));
    }
    let m = f.truncation();
    let dim = horizon + 2;
    let mut r = rng::stream(seed, "state_evolution", 0);
    // u[t][s], g[t][s] (g[0] unused), fv[t][s] = f^t at sample s
    let mut u: Vec<Vec<f64>> = Vec::with_capacity(dim);
    let mut g: Vec<Vec<f64>> = vec![Vec::new()];
    let mut fv: Vec<Vec<f64>> = Vec::with_capacity(dim);
    u.push(
        (0..samples)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut r);
                (z * init_var.sqrt()).clamp(-m, m)
            })
            .collect(),
    );
    let mut l = vec![vec![0.0; dim]; dim];
    let mut q = vec![vec![0.0; dim]; dim];
    q[0][0] = u[0].iter().map(|v| v * v).sum::<f64>() / samples as f64;
    let mut projected = false;
    let mut hist = vec![0.0; dim];
    for t in 0..=horizon {
        let vals: Vec<f64> = (0..samples)
            .map(|s| {
                for (j, h) in hist.iter_mut().enumerate().take(t + 1) {
                    *h = u[j][s];
                }
                f.eval(t, &hist[..=t])
            })
            .collect();
        fv.push(vals);
        let row = t + 1;
        for j in 1..=row {
            let c = fv[t].iter().zip(&fv[j - 1]).map(|(a, b)| a * b).sum::<f64>() / samples as f64;
            q[row][j] = c;
            q[j][row] = c;
        }
        for j in 1..row {
            let acc: f64 = (1..j).map(|k| l[row][k] * l[j][k]).sum();
            l[row][j] = if l[j][j] > 1e-12 { (q[row][j] - acc) / l[j][j] } else { 0.0 };
        }
        let rest = q[row][row] - (1..row).map(|k| l[row][k] * l[row][k]).sum::<f64>();
        if rest < -1e-10 {
            projected = true;
        }
        l[row][row] = rest.max(0.0).sqrt();
        g.push((0..samples).map(|_| StandardNormal.sample(&mut r)).collect());
        let next: Vec<f64> = (0..samples).map(|s| (1..=row).map(|k| l[row][k] * g[k][s]).sum()).collect();
        u.push(next);
    }
    let psi = u.iter().map(|v| PsiStats::of(v)).collect();
    Ok((StateEvolution { q, samples, init_var, psi, projected }, u))
}

/// Rescale so that every iterate has unit predicted variance.
///
/// `a_t = Q_tt^{−1/2}` for `t ≥ 1`; `a_0 = 1` keeps the initialization law.
pub fn rescale_to_identity<F>(f: F, se: &StateEvolution) -> Result<Rescaled<F>> {
    let mut a = vec![1.0];
    for t in 1..se.q.len() {
        let v = se.q[t][t];
        if !(v > 0.0) {
            return Err(Error::Precondition(format!("Q_{t}{t} = {v} is not positive")));
        }
        a.push(1.0 / v.sqrt());
    }
    Ok(Rescaled { inner: f, a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amp::family::{Coordinatewise, Scalar, Start};

    #[test]
    fn constant_start_and_linear_chain() {
        let f = Coordinatewise::new(Scalar::Identity, Start::One, 4);
        let se = state_evolution_mc(&f, 4, 0.0, 20_000, 1).unwrap();
        assert_eq!(se.q[1][1], 1.0);
        for t in 1..6 {
            assert!((se.q[t][t] - 1.0).abs() < 0.05, "{}", se.q[t][t]);
        }
        assert!(se.max_off_diagonal() < 0.05);
        assert!(!se.projected);
        assert_eq!(se.q.len(), 6);
    }

    #[test]
    fn rescaling_gives_unit_diagonal() {
        let f = Coordinatewise::new(Scalar::Tanh, Start::One, 3);
        let se = state_evolution_mc(&f, 3, 0.05, 50_000, 2).unwrap();
        let rf = rescale_to_identity(f, &se).unwrap();
        let se2 = state_evolution_mc(&rf, 3, 0.05, 50_000, 3).unwrap();
        for t in 1..se2.q.len() {
            assert!((se2.q[t][t] - 1.0).abs() < 0.05, "t = {t}: {}", se2.q[t][t]);
        }
        let mut bad = se.clone();
        bad.q[2][2] = 0.0;
        assert!(rescale_to_identity(f, &bad).is_err());
    }
}
