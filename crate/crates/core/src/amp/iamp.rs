//! Incremental denoisers driven by the Parisi solution.
//!
//! With `x⁰ = 0` and `t_k = kδ`, the field follows
//! `x^k = x^{k−1} + δ γ(t_{k−1}) ∂Φ(t_{k−1}, x^{k−1}) + √δ u^k/σ_k`
//! and the increments are the centered martingale differences
//! `f^k = [∂Φ(t_k, x^k) − m_k(x^{k−1})]/√δ`, `m_k` being the conditional
//! mean of `∂Φ(t_k, x^k)` given `x^{k−1}`. `f⁰ ≡ 1`, so `u¹ = D·1`.

use super::family::DenoiserFamily;
use crate::error::{Error, Result};
use crate::parisi::{GaussHermite, ParisiSolution};
use crate::real::Real;
use crate::rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Debug)]
struct Table {
    x_max: f64,
    h: f64,
    v: Vec<f64>,
}

impl Table {
    #[inline]
    fn at(&self, x: f64) -> f64 {
        let u = (x + self.x_max) / self.h;
        let n = self.v.len();
        if u <= 0.0 {
            return self.v[0];
        }
        if u >= (n - 1) as f64 {
            return self.v[n - 1];
        }
        let i = u as usize;
        let f = u - i as f64;
        self.v[i] + f * (self.v[i + 1] - self.v[i])
    }

    fn centered_derivative(&self) -> Table {
        let n = self.v.len();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            d[i] = (self.v[i + 1] - self.v[i - 1]) / (2.0 * self.h);
        }
        d[0] = d[1];
        d[n - 1] = d[n - 2];
        Table { v: d, ..*self }
    }

    fn max_abs(&self) -> f64 {
        self.v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[derive(Clone, Debug)]
pub struct IampDenoisers {
    delta: f64,
    k: usize,
    /// `σ_k` for `k = 1..=K+1` at index `k`.
    sigma: Vec<f64>,
    /// `γ(t_k)` for `k = 0..K`.
    gamma: Vec<f64>,
    d1: Vec<Table>,
    d2: Vec<Table>,
    m: Vec<Table>,
    mp: Vec<Table>,
    lipschitz: f64,
}

impl IampDenoisers {
    /// Tabulate the denoisers and fix the scales `σ_k` by a sequential
    /// Monte Carlo run with `samples` paths.
    pub fn build(sol: &ParisiSolution, delta: f64, qbar: f64, samples: usize, seed: u64) -> Result<Self> {
        if !(delta > 0.0 && qbar > 0.0 && qbar < 1.0 && delta <= qbar) {
            return Err(Error::InvalidParameter(format!("need 0 < δ ≤ q̄ < 1, got δ = {delta}, q̄ = {qbar}")));
        }
        if samples < 1000 {
            return Err(Error::InvalidParameter(format!("samples = {samples} too small")));
        }
        let k = (qbar / delta + 1e-9).floor() as usize;
        let gh = GaussHermite::new(sol.params.gh_order);
        let mut d1 = Vec::with_capacity(k + 1);
        let mut d2 = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let p = sol.profile(j as f64 * delta);
            d1.push(Table { x_max: p.x_max, h: p.h, v: p.dphi });
            d2.push(Table { x_max: p.x_max, h: p.h, v: p.d2phi });
        }
        let gamma: Vec<f64> = (0..k).map(|j| sol.gamma.gamma_at(j as f64 * delta)).collect();
        let sd = delta.sqrt();
        let xs: Vec<f64> = sol.xs().to_vec();
        let mut m = Vec::with_capacity(k);
        let mut mp = Vec::with_capacity(k);
        for j in 1..=k {
            let drift = delta * gamma[j - 1];
            let v: Vec<f64> = xs
                .iter()
                .map(|&x| {
                    let base = x + drift * d1[j - 1].at(x);
                    gh.expect(|z| d1[j].at(base + sd * z))
                })
                .collect();
            let t = Table { x_max: d1[0].x_max, h: d1[0].h, v };
            mp.push(t.centered_derivative());
            m.push(t);
        }
        let mut fam = Self { delta, k, sigma: vec![1.0; k + 2], gamma, d1, d2, m, mp, lipschitz: 0.0 };
        fam.calibrate(samples, seed);
        fam.lipschitz = fam.lipschitz_bound();
        Ok(fam)
    }

    /// `σ_{k+1}² = E[(f^k)²]` along independent Gaussian increments.
    fn calibrate(&mut self, samples: usize, seed: u64) {
        let mut r = rng::stream(seed, "iamp_calibrate", 0);
        let mut x = vec![0.0; samples];
        let mut prev = vec![0.0; samples];
        for k in 1..=self.k {
            let mut acc = 0.0;
            for s in 0..samples {
                let z: f64 = StandardNormal.sample(&mut r);
                prev[s] = x[s];
                x[s] = self.advance(k, x[s], z);
                let f = self.increment(k, prev[s], x[s]);
                acc += f * f;
            }
            self.sigma[k + 1] = (acc / samples as f64).sqrt();
        }
    }

    /// `x^k` from `x^{k−1}` and the normalized increment `z = u^k/σ_k`.
    #[inline]
    fn advance(&self, k: usize, xprev: f64, z: f64) -> f64 {
        xprev + self.delta * self.gamma[k - 1] * self.d1[k - 1].at(xprev) + self.delta.sqrt() * z
    }

    #[inline]
    fn increment(&self, k: usize, xprev: f64, x: f64) -> f64 {
        (self.d1[k].at(x) - self.m[k - 1].at(xprev)) / self.delta.sqrt()
    }

    fn lipschitz_bound(&self) -> f64 {
        let sd = self.delta.sqrt();
        // j2[k] bounds Σ_i (∂x^k/∂u^i)²
        let mut j2 = vec![0.0; self.k + 1];
        let mut best: f64 = 0.0;
        for k in 1..=self.k {
            let grow = self.d2[k - 1].v.iter().fold(0.0f64, |m, c| m.max((1.0 + self.delta * self.gamma[k - 1] * c).abs()));
            j2[k] = j2[k - 1] * grow * grow + self.delta / (self.sigma[k] * self.sigma[k]);
            let l = (self.d2[k].max_abs() * j2[k].sqrt() + self.mp[k - 1].max_abs() * j2[k - 1].sqrt()) / sd;
            best = best.max(l);
        }
        best
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `σ_k`, the predicted standard deviation of `u^k`.
    pub fn sigma(&self, k: usize) -> f64 {
        self.sigma[k]
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigma
    }

    /// `∂Φ(t_K, x^K)`, the field the increments sum up to (up to `∂Φ(0,0)`).
    pub fn final_field(&self, hist: &[f64]) -> f64 {
        let mut x = 0.0;
        for k in 1..hist.len() {
            x = self.advance(k, x, hist[k] / self.sigma[k]);
        }
        self.d1[hist.len() - 1].at(x)
    }
}

impl<S: Real> DenoiserFamily<S> for IampDenoisers {
    fn horizon(&self) -> usize {
        self.k
    }

    fn eval(&self, t: usize, hist: &[S]) -> S {
        if t == 0 {
            return S::one();
        }
        let mut x = 0.0;
        let mut prev = 0.0;
        for k in 1..=t {
            prev = x;
            x = self.advance(k, x, hist[k].f64() / self.sigma[k]);
        }
        S::c(self.increment(t, prev, x))
    }

    fn eval_grad(&self, t: usize, hist: &[S], grad: &mut [S]) -> S {
        for g in grad.iter_mut() {
            *g = S::zero();
        }
        if t == 0 {
            return S::one();
        }
        let sd = self.delta.sqrt();
        // forward-mode sensitivities of x^k with respect to u^1..u^k
        let mut dx = vec![0.0; t + 1];
        let mut dprev = vec![0.0; t + 1];
        let mut x = 0.0;
        let mut prev = 0.0;
        for k in 1..=t {
            let grow = 1.0 + self.delta * self.gamma[k - 1] * self.d2[k - 1].at(x);
            dprev.copy_from_slice(&dx);
            for d in dx.iter_mut().take(k) {
                *d *= grow;
            }
            dx[k] = sd / self.sigma[k];
            prev = x;
            x = self.advance(k, x, hist[k].f64() / self.sigma[k]);
        }
        let c2 = self.d2[t].at(x);
        let mp = self.mp[t - 1].at(prev);
        for j in 1..=t {
            grad[j] = S::c((c2 * dx[j] - mp * dprev[j]) / sd);
        }
        S::c(self.increment(t, prev, x))
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn uses_init(&self) -> bool {
        false
    }
}
