use crate::amp::{increments, initial_iterate, state_evolution_paths, AmpState, DenoiserFamily, IterateStats};
use crate::disorder::DisorderMatrix;
use crate::error::{check_len, Error, Result};
use crate::real::Real;
use crate::rng;
use crate::rounding::{cube_distance, energy};
use serde::{Deserialize, Serialize};

/// Population Onsager coefficients `b̄_{t,j}` with run-to-run error bars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenOnsager {
    /// `b[t][j]` for `j = 0..=t`.
    pub b: Vec<Vec<f64>>,
    /// Standard deviation across runs divided by `√runs`.
    pub err: Vec<Vec<f64>>,
    pub runs: usize,
    pub samples: usize,
}

impl FrozenOnsager {
    /// All coefficients zero; useful for families with no memory.
    pub fn zeros(horizon: usize) -> Self {
        let b: Vec<Vec<f64>> = (0..=horizon).map(|t| vec![0.0; t + 1]).collect();
        Self { err: b.clone(), b, runs: 0, samples: 0 }
    }

    pub fn horizon(&self) -> usize {
        self.b.len() - 1
    }
}

/// `b̄_{t,j}`: mean of `∂q^t/∂u^j` over state-evolution samples of `q`
/// itself, averaged over `runs` independent chains.
pub fn frozen_b<F: DenoiserFamily<f64>>(
    q: &F,
    init_var: f64,
    runs: usize,
    samples: usize,
    seed: u64,
) -> Result<FrozenOnsager> {
    if runs < 2 {
        return Err(Error::InvalidParameter("need at least two runs for error bars".into()));
    }
    let horizon = q.horizon();
    let mut per_run: Vec<Vec<Vec<f64>>> = Vec::with_capacity(runs);
    let mut grad = vec![0.0; horizon + 1];
    let mut hist = vec![0.0; horizon + 1];
    for run in 0..runs {
        let (_, paths) = state_evolution_paths(q, horizon, init_var, samples, rng::sub_seed(seed, "frozen_b", run as u64))?;
        let mut b: Vec<Vec<f64>> = (0..=horizon).map(|t| vec![0.0; t + 1]).collect();
        for s in 0..samples {
            for (j, h) in hist.iter_mut().enumerate() {
                *h = paths[j][s];
            }
            for (t, row) in b.iter_mut().enumerate() {
                q.eval_grad(t, &hist[..=t], &mut grad[..=t]);
                for (x, g) in row.iter_mut().zip(&grad) {
                    *x += g;
                }
            }
        }
        for row in b.iter_mut() {
            for x in row.iter_mut() {
                *x /= samples as f64;
            }
        }
        per_run.push(b);
    }
    let mut b: Vec<Vec<f64>> = (0..=horizon).map(|t| vec![0.0; t + 1]).collect();
    let mut err = b.clone();
    let rf = runs as f64;
    for t in 0..=horizon {
        for j in 0..=t {
            let mean = per_run.iter().map(|r| r[t][j]).sum::<f64>() / rf;
            let var = per_run.iter().map(|r| (r[t][j] - mean).powi(2)).sum::<f64>() / (rf - 1.0);
            b[t][j] = mean;
            err[t][j] = (var / rf).sqrt();
        }
    }
    Ok(FrozenOnsager { b, err, runs, samples })
}

/// `ũ^{t+1} = D q^t(ũ⁰, …, ũ^t) − Σ_{j=1}^{t} b̄_{t,j} q^{j−1}(ũ⁰, …, ũ^{j−1})`
/// from `u⁰ ~ N(0, δ)` clamped, with candidate `ṽ = √δ Σ_{k=1}^{K} w_k q^k`.
pub fn run_poly_amp<S: Real, F: DenoiserFamily<S>>(
    d: &DisorderMatrix<S>,
    q: &F,
    b: &FrozenOnsager,
    delta: f64,
    qbar: f64,
    seed: u64,
) -> Result<AmpState<S>> {
    let u0 = initial_iterate(d.n(), delta, q.truncation(), seed);
    run_poly_amp_from(d, q, b, u0, delta, qbar)
}

/// As [`run_poly_amp`] from an explicit `u⁰` (clamped at the truncation level).
pub fn run_poly_amp_from<S: Real, F: DenoiserFamily<S>>(
    d: &DisorderMatrix<S>,
    q: &F,
    b: &FrozenOnsager,
    u0: Vec<S>,
    delta: f64,
    qbar: f64,
) -> Result<AmpState<S>> {
    check_len(d.n(), u0.len())?;
    let k = increments(delta, qbar)?;
    if k > q.horizon() || k > b.horizon() {
        return Err(Error::InvalidParameter(format!(
            "⌊q̄/δ⌋ = {k} exceeds horizon {} or frozen coefficients {}",
            q.horizon(),
            b.horizon()
        )));
    }
    let m = S::c(q.truncation());
    let u0: Vec<S> = u0.into_iter().map(|x| x.max(-m).min(m)).collect();
    let n = u0.len();
    let mut state = AmpState::new(u0);
    let mut hist = vec![S::zero(); k + 1];
    for t in 0..=k {
        let out: Vec<S> = (0..n)
            .map(|i| {
                for (j, h) in hist.iter_mut().enumerate().take(t + 1) {
                    *h = state.u[j][i];
                }
                q.eval(t, &hist[..=t])
            })
            .collect();
        state.q.push(out);
        state.b.push(b.b[t].iter().map(|x| S::c(*x)).collect());
        if t == k {
            break;
        }
        let mut next = d.matvec(&state.q[t])?;
        for j in 1..=t {
            let c = S::c(b.b[t][j]);
            for (x, y) in next.iter_mut().zip(&state.q[j - 1]) {
                *x -= c * *y;
            }
        }
        state.stats.push(IterateStats::of(t + 1, &next));
        state.u.push(next);
    }
    let mut v = vec![S::zero(); n];
    for t in 1..=k {
        let w = S::c(delta.sqrt() * q.candidate_weight(t));
        for (x, y) in v.iter_mut().zip(&state.q[t]) {
            *x += w * *y;
        }
    }
    state.energy = energy(d, &v)?.f64();
    state.cube_distance = cube_distance(&v).f64() / (n as f64).sqrt();
    state.v = v;
    state.delta = delta;
    state.qbar = qbar;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{center_rescale, SparseGraph};
    use crate::poly::{PolyDenoiserFamily, PolyStep};

    fn power_family(e: u32) -> PolyDenoiserFamily {
        let steps = vec![PolyStep::constant(1.0), PolyStep::from_monomials(vec![1], &[(vec![e], 1.0)]).unwrap()];
        PolyDenoiserFamily::new(steps, vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn frozen_examples() {
        let lin = frozen_b(&power_family(1), 0.0, 4, 20_000, 1).unwrap();
        assert!((lin.b[1][1] - 1.0).abs() < 1e-12);
        let sq = frozen_b(&power_family(2), 0.0, 8, 20_000, 2).unwrap();
        assert!(sq.b[1][1].abs() <= 3.0 * sq.err[1][1], "{:?}", sq);
        let cube = frozen_b(&power_family(3), 0.0, 8, 20_000, 3).unwrap();
        assert!((cube.b[1][1] - 3.0).abs() <= 3.0 * cube.err[1][1], "{:?}", cube);
        let again = frozen_b(&power_family(3), 0.0, 8, 20_000, 3).unwrap();
        assert_eq!(cube, again);
    }

    #[test]
    fn constant_family_on_single_edge() {
        let g = SparseGraph::new(3, [(0, 1)]).unwrap();
        let d = center_rescale::<f64>(&g, 1.5).unwrap();
        let steps = vec![PolyStep::constant(1.0), PolyStep::constant(2.0)];
        let q = PolyDenoiserFamily::new(steps, vec![1.0, 1.0]).unwrap();
        let s = run_poly_amp(&d, &q, &FrozenOnsager::zeros(1), 1.0, 1.0, 4).unwrap();
        assert_eq!(s.v, vec![2.0; 3]);
        let (on, off) = d.sparse_levels().unwrap();
        // 4·(2·on + 4·off) / 6
        let want = 4.0 * (2.0 * on + 4.0 * off) / 6.0;
        assert!((s.energy - want).abs() < 1e-12, "{} {want}", s.energy);
        let t = run_poly_amp(&d, &q, &FrozenOnsager::zeros(1), 1.0, 1.0, 4).unwrap();
        assert_eq!(s.v, t.v);
    }
}
