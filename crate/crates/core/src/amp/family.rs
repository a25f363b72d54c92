use crate::real::Real;
use serde::{Deserialize, Serialize};

/// Clamp level applied to `u⁰` before any denoiser sees it.
pub const DEFAULT_TRUNCATION: f64 = 10.0;

/// Sequence of coordinatewise denoisers `f^t(u⁰, …, u^t)`, `t = 0..=horizon`.
pub trait DenoiserFamily<S: Real>: Send + Sync {
    fn horizon(&self) -> usize;

    /// `f^t` at one coordinate; `hist` holds `(u⁰_i, …, u^t_i)`.
    fn eval(&self, t: usize, hist: &[S]) -> S;

    /// `f^t` and its weak partial derivatives `∂f^t/∂u^j`, `j = 0..=t`.
    fn eval_grad(&self, t: usize, hist: &[S], grad: &mut [S]) -> S;

    fn lipschitz(&self) -> f64;

    fn truncation(&self) -> f64 {
        DEFAULT_TRUNCATION
    }

    /// Multiplier of `f^t` inside the candidate `v = √δ Σ_k w_k f^k`.
    fn candidate_weight(&self, _t: usize) -> f64 {
        1.0
    }

    /// Whether some `f^t` reads `u⁰` at all.
    fn uses_init(&self) -> bool {
        true
    }
}

impl<S: Real, F: DenoiserFamily<S> + ?Sized> DenoiserFamily<S> for &F {
    fn horizon(&self) -> usize {
        (**self).horizon()
    }
    fn eval(&self, t: usize, hist: &[S]) -> S {
        (**self).eval(t, hist)
    }
    fn eval_grad(&self, t: usize, hist: &[S], grad: &mut [S]) -> S {
        (**self).eval_grad(t, hist, grad)
    }
    fn lipschitz(&self) -> f64 {
        (**self).lipschitz()
    }
    fn truncation(&self) -> f64 {
        (**self).truncation()
    }
    fn candidate_weight(&self, t: usize) -> f64 {
        (**self).candidate_weight(t)
    }
    fn uses_init(&self) -> bool {
        (**self).uses_init()
    }
}

impl<S: Real, F: DenoiserFamily<S> + ?Sized> DenoiserFamily<S> for Box<F> {
    fn horizon(&self) -> usize {
        (**self).horizon()
    }
    fn eval(&self, t: usize, hist: &[S]) -> S {
        (**self).eval(t, hist)
    }
    fn eval_grad(&self, t: usize, hist: &[S], grad: &mut [S]) -> S {
        (**self).eval_grad(t, hist, grad)
    }
    fn lipschitz(&self) -> f64 {
        (**self).lipschitz()
    }
    fn truncation(&self) -> f64 {
        (**self).truncation()
    }
    fn candidate_weight(&self, t: usize) -> f64 {
        (**self).candidate_weight(t)
    }
    fn uses_init(&self) -> bool {
        (**self).uses_init()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scalar {
    Identity,
    Tanh,
    Clamp(f64),
}

impl Scalar {
    pub fn apply<S: Real>(&self, x: S) -> S {
        match *self {
            Scalar::Identity => x,
            Scalar::Tanh => x.tanh(),
            Scalar::Clamp(m) => x.max(-S::c(m)).min(S::c(m)),
        }
    }

    /// Derivative; zero on the clamp boundary.
    pub fn derivative<S: Real>(&self, x: S) -> S {
        match *self {
            Scalar::Identity => S::one(),
            Scalar::Tanh => {
                let th = x.tanh();
                S::one() - th * th
            }
            Scalar::Clamp(m) => {
                if x.abs() < S::c(m) {
                    S::one()
                } else {
                    S::zero()
                }
            }
        }
    }
}

/// How `f⁰` is formed in a [`Coordinatewise`] family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Start {
    /// `f⁰ ≡ 1`.
    One,
    /// `f⁰ = g(u⁰)` like every later step.
    Apply,
}

/// `f^t = g(u^t)` for a fixed scalar map `g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coordinatewise {
    pub scalar: Scalar,
    pub start: Start,
    pub horizon: usize,
}

impl Coordinatewise {
    pub fn new(scalar: Scalar, start: Start, horizon: usize) -> Self {
        Self { scalar, start, horizon }
    }
}

impl<S: Real> DenoiserFamily<S> for Coordinatewise {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn eval(&self, t: usize, hist: &[S]) -> S {
        if t == 0 && self.start == Start::One {
            return S::one();
        }
        self.scalar.apply(hist[t])
    }

    fn eval_grad(&self, t: usize, hist: &[S], grad: &mut [S]) -> S {
        for g in grad.iter_mut() {
            *g = S::zero();
        }
        if t == 0 && self.start == Start::One {
            return S::one();
        }
        grad[t] = self.scalar.derivative(hist[t]);
        self.scalar.apply(hist[t])
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }

    fn uses_init(&self) -> bool {
        self.start == Start::Apply
    }
}

/// `f̃^t(x₀, …, x_t) = a_{t+1} f^t(x₀/a₀, …, x_t/a_t)`.
#[derive(Clone, Debug)]
pub struct Rescaled<F> {
    pub inner: F,
    pub a: Vec<f64>,
}

impl<F> Rescaled<F> {
    /// `a` must have `horizon + 2` positive entries.
    pub fn scales(&self) -> &[f64] {
        &self.a
    }
}

impl<S: Real, F: DenoiserFamily<S>> DenoiserFamily<S> for Rescaled<F> {
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn eval(&self, t: usize, hist: &[S]) -> S {
        let x: Vec<S> = hist[..=t].iter().zip(&self.a).map(|(h, a)| *h / S::c(*a)).collect();
        self.inner.eval(t, &x) * S::c(self.a[t + 1])
    }

    fn eval_grad(&self, t: usize, hist: &[S], grad: &mut [S]) -> S {
        let x: Vec<S> = hist[..=t].iter().zip(&self.a).map(|(h, a)| *h / S::c(*a)).collect();
        let at = S::c(self.a[t + 1]);
        let v = self.inner.eval_grad(t, &x, grad);
        for (j, g) in grad.iter_mut().enumerate().take(t + 1) {
            *g = *g * at / S::c(self.a[j]);
        }
        v * at
    }

    fn lipschitz(&self) -> f64 {
        let amin = self.a.iter().cloned().fold(f64::INFINITY, f64::min);
        let amax = self.a.iter().cloned().fold(0.0, f64::max);
        self.inner.lipschitz() * amax / amin
    }

    fn truncation(&self) -> f64 {
        self.inner.truncation() * self.a[0]
    }

    fn candidate_weight(&self, t: usize) -> f64 {
        self.inner.candidate_weight(t) / self.a[t + 1]
    }

    fn uses_init(&self) -> bool {
        self.inner.uses_init()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_maps() {
        assert_eq!(Scalar::Clamp(1.0).apply(2.5), 1.0);
        assert_eq!(Scalar::Clamp(1.0).derivative(1.0), 0.0);
        assert_eq!(Scalar::Clamp(1.0).derivative(0.3), 1.0);
        assert!((Scalar::Tanh.derivative(0.4f64) - (1.0 - 0.4f64.tanh().powi(2))).abs() < 1e-15);
    }

    #[test]
    fn rescaled_gradient_matches_difference() {
        let f = Rescaled { inner: Coordinatewise::new(Scalar::Tanh, Start::One, 3), a: vec![1.0, 0.5, 2.0, 0.7, 1.3] };
        let h = [0.1, -0.4, 0.9, 0.2];
        let mut g = [0.0; 4];
        let v = DenoiserFamily::<f64>::eval_grad(&f, 2, &h, &mut g);
        assert!((v - DenoiserFamily::<f64>::eval(&f, 2, &h)).abs() < 1e-15);
        let mut hp = h;
        hp[2] += 1e-6;
        let fd = (DenoiserFamily::<f64>::eval(&f, 2, &hp) - v) / 1e-6;
        assert!((fd - g[2]).abs() < 1e-5);
        assert_eq!(DenoiserFamily::<f64>::candidate_weight(&f, 2), 1.0 / 0.7);
    }
}
