//! Approximate message passing with empirical Onsager terms, Monte Carlo
//! state evolution, and the incremental candidate construction.
//!
//! The iteration is `u^{t+1} = D f^t(u⁰, …, u^t) − Σ_{j=1}^{t} b_{t,j} f^{j−1}(u⁰, …, u^{j−1})`
//! with `b_{t,j} = (1/n) Σ_i ∂f^t/∂u^j_i`.

mod family;
mod iamp;
mod se;

pub use family::{Coordinatewise, DenoiserFamily, Rescaled, Scalar, Start, DEFAULT_TRUNCATION};
pub use iamp::IampDenoisers;
pub use se::{rescale_to_identity, state_evolution_mc, state_evolution_paths, Estimate, PsiStats, StateEvolution};

use crate::disorder::DisorderMatrix;
use crate::error::{check_len, Error, Result};
use crate::real::Real;
use crate::rng;
use crate::rounding::{cube_distance, energy};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Defaults for the incremental construction.
pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_QBAR: f64 = 0.95;

/// Empirical `(1/n)Σψ(u^t_i)` for `ψ(x) = x, x², |x|³`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterateStats {
    pub t: usize,
    pub mean: f64,
    pub m2: f64,
    pub m3abs: f64,
}

impl IterateStats {
    pub fn of<S: Real>(t: usize, u: &[S]) -> Self {
        let n = u.len().max(1) as f64;
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for x in u {
            let x = x.f64();
            a += x;
            b += x * x;
            c += x.abs().powi(3);
        }
        Self { t, mean: a / n, m2: b / n, m3abs: c / n }
    }
}

#[derive(Clone, Debug)]
pub struct AmpState<S> {
    /// `u⁰, …, u^t`.
    pub u: Vec<Vec<S>>,
    /// Denoiser outputs `f⁰, …`.
    pub q: Vec<Vec<S>>,
    /// `b[t][j] = b_{t,j}` for `j = 0..=t`.
    pub b: Vec<Vec<S>>,
    pub v: Vec<S>,
    pub delta: f64,
    pub qbar: f64,
    pub energy: f64,
    /// `d(v, [−1,1]ⁿ)/√n`.
    pub cube_distance: f64,
    pub stats: Vec<IterateStats>,
}

impl<S: Real> AmpState<S> {
    pub fn new(u0: Vec<S>) -> Self {
        Self {
            stats: vec![IterateStats::of(0, &u0)],
            u: vec![u0],
            q: Vec::new(),
            b: Vec::new(),
            v: Vec::new(),
            delta: 0.0,
            qbar: 0.0,
            energy: 0.0,
            cube_distance: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.u[0].len()
    }

    /// Index of the newest iterate.
    pub fn t(&self) -> usize {
        self.u.len() - 1
    }
}

/// Evaluate `f^t` on every coordinate, with the Onsager row `b_{t,·}`.
pub fn denoise<S: Real, F: DenoiserFamily<S>>(f: &F, state: &AmpState<S>, t: usize) -> (Vec<S>, Vec<S>) {
    let n = state.n();
    let mut hist = vec![S::zero(); t + 1];
    let mut grad = vec![S::zero(); t + 1];
    let mut acc = vec![0.0f64; t + 1];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        for (j, h) in hist.iter_mut().enumerate() {
            *h = state.u[j][i];
        }
        out.push(f.eval_grad(t, &hist, &mut grad));
        for (a, g) in acc.iter_mut().zip(&grad) {
            *a += g.f64();
        }
    }
    let b = acc.iter().map(|a| S::c(a / n as f64)).collect();
    (out, b)
}

/// `b_{t,j}`: empirical mean of `∂f^t/∂u^j` over coordinates.
pub fn onsager<S: Real, F: DenoiserFamily<S>>(f: &F, state: &AmpState<S>, t: usize, j: usize) -> Result<S> {
    if j > t || t > state.t() {
        return Err(Error::InvalidParameter(format!("need j ≤ t ≤ {}, got j = {j}, t = {t}", state.t())));
    }
    Ok(denoise(f, state, t).1[j])
}

/// One iteration: append `f^t`, `b_{t,·}` and `u^{t+1}`.
pub fn amp_step<S: Real, F: DenoiserFamily<S>>(d: &DisorderMatrix<S>, f: &F, state: &mut AmpState<S>) -> Result<()> {
    check_len(d.n(), state.n())?;
    let t = state.t();
    if t > f.horizon() {
        return Err(Error::InvalidParameter(format!("step {t} beyond horizon {}", f.horizon())));
    }
    if state.q.len() == t {
        let (q, b) = denoise(f, state, t);
        state.q.push(q);
        state.b.push(b);
    }
    let mut next = d.matvec(&state.q[t])?;
    for j in 1..=t {
        let c = state.b[t][j];
        if c != S::zero() {
            for (x, y) in next.iter_mut().zip(&state.q[j - 1]) {
                *x -= c * *y;
            }
        }
    }
    state.stats.push(IterateStats::of(t + 1, &next));
    state.u.push(next);
    Ok(())
}

/// `u⁰ ~ N(0, δ)` entrywise, clamped at `±m`.
pub fn initial_iterate<S: Real>(n: usize, delta: f64, m: f64, seed: u64) -> Vec<S> {
    let mut r = rng::stream(seed, "amp_init", 0);
    let sd = delta.sqrt();
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            S::c((z * sd).clamp(-m, m))
        })
        .collect()
}

/// Run `steps` iterations from an explicit `u⁰`.
pub fn run_amp<S: Real, F: DenoiserFamily<S>>(
    d: &DisorderMatrix<S>,
    f: &F,
    u0: Vec<S>,
    steps: usize,
) -> Result<AmpState<S>> {
    check_len(d.n(), u0.len())?;
    let m = S::c(f.truncation());
    let u0 = u0.into_iter().map(|x| x.max(-m).min(m)).collect();
    let mut state = AmpState::new(u0);
    for _ in 0..steps {
        amp_step(d, f, &mut state)?;
    }
    Ok(state)
}

/// Number of increments `⌊q̄/δ⌋`.
pub fn increments(delta: f64, qbar: f64) -> Result<usize> {
    if !(delta > 0.0 && qbar >= delta && qbar <= 1.0) {
        return Err(Error::InvalidParameter(format!("need 0 < δ ≤ q̄ ≤ 1, got δ = {delta}, q̄ = {qbar}")));
    }
    Ok((qbar / delta + 1e-9).floor() as usize)
}

/// Full incremental run: `K = ⌊q̄/δ⌋` iterations and the candidate
/// `v = √δ Σ_{k=1}^{K} w_k f^k`.
pub fn run_iamp<S: Real, F: DenoiserFamily<S>>(
    d: &DisorderMatrix<S>,
    f: &F,
    delta: f64,
    qbar: f64,
    seed: u64,
) -> Result<AmpState<S>> {
    let k = increments(delta, qbar)?;
    if k > f.horizon() {
        return Err(Error::InvalidParameter(format!("⌊q̄/δ⌋ = {k} exceeds horizon {}", f.horizon())));
    }
    let u0 = initial_iterate(d.n(), delta, f.truncation(), seed);
    let mut state = run_amp(d, f, u0, k)?;
    let (q, b) = denoise(f, &state, k);
    state.q.push(q);
    state.b.push(b);
    finish_candidate(d, f, &mut state, delta, qbar)?;
    Ok(state)
}

fn finish_candidate<S: Real, F: DenoiserFamily<S>>(
    d: &DisorderMatrix<S>,
    f: &F,
    state: &mut AmpState<S>,
    delta: f64,
    qbar: f64,
) -> Result<()> {
    let k = state.q.len() - 1;
    let mut v = vec![S::zero(); state.n()];
    for t in 1..=k {
        let w = S::c(delta.sqrt() * f.candidate_weight(t));
        for (x, y) in v.iter_mut().zip(&state.q[t]) {
            *x += w * *y;
        }
    }
    state.energy = energy(d, &v)?.f64();
    state.cube_distance = cube_distance(&v).f64() / (state.n() as f64).sqrt();
    state.v = v;
    state.delta = delta;
    state.qbar = qbar;
    Ok(())
}
