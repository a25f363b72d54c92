//! Zero-temperature Parisi PDE for a piecewise-constant order parameter.
//!
//! Φ solves ∂_tΦ + ½∂²_xΦ + ½γ(t)(∂_xΦ)² = 0 on [0,1] with Φ(1,x) = |x|.
//! On a segment where γ is constant the equation linearizes under the
//! Cole–Hopf transform, so each step is a Gaussian expectation.

mod io;
mod quad;

pub use io::{read_solution, write_solution};
pub use quad::{log_ndtr, GaussHermite};

use crate::error::{Error, Result};
use crate::rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridParams {
    pub x_max: f64,
    pub n_x: usize,
    pub dt: f64,
    pub gh_order: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { x_max: 8.0, n_x: 2001, dt: 1e-3, gh_order: 40 }
    }
}

impl GridParams {
    fn validate(&self) -> Result<()> {
        if self.n_x < 201 {
            return Err(Error::Refused(format!("grid too coarse: n_x = {} < 201", self.n_x)));
        }
        if !(self.x_max > 0.0 && self.dt > 0.0 && self.dt <= 1.0) || self.gh_order < 2 {
            return Err(Error::InvalidParameter(format!("bad grid parameters {self:?}")));
        }
        Ok(())
    }
}

/// Piecewise-constant γ: `γ(t) = γ_k` on `[t_k, t_{k+1})`, zero before the
/// first breakpoint, last piece running to 1.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderParameter {
    atoms: Vec<(f64, f64)>,
}

impl OrderParameter {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        for (k, &(t, g)) in atoms.iter().enumerate() {
            if !(t.is_finite() && g.is_finite() && (0.0..=1.0).contains(&t) && g >= 0.0) {
                return Err(Error::InvalidParameter(format!("atom {k} = ({t}, {g}) not admissible")));
            }
            if k > 0 {
                let (t0, g0) = atoms[k - 1];
                if t <= t0 || g < g0 {
                    return Err(Error::InvalidParameter(format!(
                        "atoms must have increasing t and nondecreasing γ (atom {k})"
                    )));
                }
            }
        }
        Ok(Self { atoms })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn gamma_at(&self, t: f64) -> f64 {
        self.atoms.iter().rev().find(|a| a.0 <= t).map_or(0.0, |a| a.1)
    }

    /// Nonempty `(start, end, γ)` pieces covering `[0, 1]`.
    pub fn segments(&self) -> Vec<(f64, f64, f64)> {
        let mut bps = vec![0.0];
        bps.extend(self.atoms.iter().map(|a| a.0));
        bps.push(1.0);
        let mut gs = vec![0.0];
        gs.extend(self.atoms.iter().map(|a| a.1));
        (0..gs.len())
            .filter(|&i| bps[i + 1] > bps[i] + 1e-12)
            .map(|i| (bps[i], bps[i + 1], gs[i]))
            .collect()
    }

    /// ½∫₀¹ t γ(t) dt.
    pub fn penalty(&self) -> f64 {
        0.5 * self.segments().iter().map(|&(a, b, g)| g * (b * b - a * a) / 2.0).sum::<f64>()
    }
}

/// Uniform x-grid with a Gauss–Hermite rule; performs single time steps.
#[derive(Clone, Debug)]
pub struct Stepper {
    x_max: f64,
    h: f64,
    xs: Vec<f64>,
    gh: GaussHermite,
}

impl Stepper {
    pub fn new(params: &GridParams) -> Result<Self> {
        params.validate()?;
        let n = params.n_x;
        let h = 2.0 * params.x_max / (n - 1) as f64;
        let xs = (0..n).map(|i| -params.x_max + i as f64 * h).collect();
        Ok(Self { x_max: params.x_max, h, xs, gh: GaussHermite::new(params.gh_order) })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Cubic Lagrange interpolation inside the grid, linear extrapolation outside.
    pub fn interp(&self, phi: &[f64], x: f64) -> f64 {
        interp_cubic(phi, (x + self.x_max) / self.h)
    }

    /// Values of `phi` at every grid node shifted by `√dt·z_q`, one column per node.
    fn shifted<F: FnMut(usize, &[f64])>(&self, phi: &[f64], dt: f64, mut sink: F) {
        let n = self.xs.len();
        let sd = dt.sqrt();
        let mut vals = vec![0.0; self.gh.nodes.len()];
        // the shift in grid units is the same for every node
        let shifts: Vec<f64> = self.gh.nodes.iter().map(|z| sd * z / self.h).collect();
        for i in 0..n {
            for (v, s) in vals.iter_mut().zip(&shifts) {
                *v = interp_cubic(phi, i as f64 + s);
            }
            sink(i, &vals);
        }
    }

    /// Gaussian convolution with variance `dt`.
    pub fn heat_step(&self, phi: &[f64], dt: f64) -> Result<Vec<f64>> {
        self.check(phi, dt)?;
        let mut out = vec![0.0; phi.len()];
        let w = &self.gh.weights;
        self.shifted(phi, dt, |i, v| out[i] = v.iter().zip(w).map(|(a, b)| a * b).sum());
        Ok(out)
    }

    /// `(1/γ) log E exp(γ φ(x + √dt Z))`; γ ≤ 0 falls back to the heat step.
    pub fn cole_hopf_step(&self, phi: &[f64], gamma: f64, dt: f64) -> Result<Vec<f64>> {
        if gamma <= 0.0 {
            return self.heat_step(phi, dt);
        }
        self.check(phi, dt)?;
        let mut out = vec![0.0; phi.len()];
        let w = &self.gh.weights;
        self.shifted(phi, dt, |i, v| {
            let m = v.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
            let s: f64 = v.iter().zip(w).map(|(a, b)| b * (gamma * (a - m)).exp()).sum();
            out[i] = m + s.ln() / gamma;
        });
        Ok(out)
    }

    /// Exact step of size `s` from the terminal profile `|x|`.
    pub fn terminal_step(&self, gamma: f64, s: f64) -> Vec<f64> {
        let sig = s.sqrt();
        self.xs
            .iter()
            .map(|&x| {
                if gamma <= 0.0 {
                    x * erf(x / (2.0 * s).sqrt()) + (2.0 * s / PI).sqrt() * (-x * x / (2.0 * s)).exp()
                } else {
                    let c = gamma * gamma * s / 2.0;
                    let a = gamma * x + c + log_ndtr((x + gamma * s) / sig);
                    let b = -gamma * x + c + log_ndtr((-x + gamma * s) / sig);
                    let m = a.max(b);
                    (m + ((a - m).exp() + (b - m).exp()).ln()) / gamma
                }
            })
            .collect()
    }

    fn check(&self, phi: &[f64], dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
        }
        crate::error::check_len(self.xs.len(), phi.len())
    }

    /// Centered first difference, one-sided at the ends.
    pub fn derivative(&self, phi: &[f64]) -> Vec<f64> {
        let n = phi.len();
        (0..n)
            .map(|i| {
                if i == 0 {
                    (phi[1] - phi[0]) / self.h
                } else if i == n - 1 {
                    (phi[n - 1] - phi[n - 2]) / self.h
                } else {
                    (phi[i + 1] - phi[i - 1]) / (2.0 * self.h)
                }
            })
            .collect()
    }

    /// Second difference, copied from the neighbour at the ends.
    pub fn second_derivative(&self, phi: &[f64]) -> Vec<f64> {
        let n = phi.len();
        let h2 = self.h * self.h;
        let mut out: Vec<f64> = (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    0.0
                } else {
                    (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / h2
                }
            })
            .collect();
        out[0] = out[1];
        out[n - 1] = out[n - 2];
        out
    }
}

fn interp_cubic(phi: &[f64], u: f64) -> f64 {
    let n = phi.len();
    let last = (n - 1) as f64;
    if u <= 0.0 {
        return phi[0] + u * (phi[1] - phi[0]);
    }
    if u >= last {
        return phi[n - 1] + (u - last) * (phi[n - 1] - phi[n - 2]);
    }
    let i = (u.floor() as usize).clamp(1, n - 3);
    let f = u - i as f64;
    let (p0, p1, p2, p3) = (phi[i - 1], phi[i], phi[i + 1], phi[i + 2]);
    let w0 = -f * (f - 1.0) * (f - 2.0) / 6.0;
    let w1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
    let w2 = -(f + 1.0) * f * (f - 2.0) / 2.0;
    let w3 = (f + 1.0) * f * (f - 1.0) / 6.0;
    w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3
}

fn interp_linear(v: &[f64], u: f64) -> f64 {
    let n = v.len();
    if u <= 0.0 {
        return v[0];
    }
    if u >= (n - 1) as f64 {
        return v[n - 1];
    }
    let i = u.floor() as usize;
    let f = u - i as f64;
    v[i] * (1.0 - f) + v[(i + 1).min(n - 1)] * f
}

/// Φ and ∂_xΦ on the full space-time grid.
#[derive(Clone, Debug)]
pub struct ParisiSolution {
    pub params: GridParams,
    pub gamma: OrderParameter,
    pub ts: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub dphi: Vec<Vec<f64>>,
    pub functional_value: f64,
    stepper: Stepper,
}

/// One time slice: Φ, ∂Φ and ∂²Φ on the x-grid.
#[derive(Clone, Debug)]
pub struct Profile {
    pub x_max: f64,
    pub h: f64,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub d2phi: Vec<f64>,
}

impl Profile {
    fn u(&self, x: f64) -> f64 {
        (x + self.x_max) / self.h
    }
    pub fn phi_at(&self, x: f64) -> f64 {
        interp_cubic(&self.phi, self.u(x))
    }
    pub fn dphi_at(&self, x: f64) -> f64 {
        interp_linear(&self.dphi, self.u(x))
    }
    pub fn d2phi_at(&self, x: f64) -> f64 {
        let u = self.u(x);
        if u <= 0.0 || u >= (self.d2phi.len() - 1) as f64 {
            return 0.0;
        }
        interp_linear(&self.d2phi, u)
    }
    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.phi.len()).map(move |i| -self.x_max + i as f64 * self.h)
    }
}

impl ParisiSolution {
    pub fn xs(&self) -> &[f64] {
        self.stepper.xs()
    }

    pub fn stepper(&self) -> &Stepper {
        &self.stepper
    }

    /// Bracketing time nodes and the weight on the later one.
    fn locate(&self, t: f64) -> (usize, usize, f64) {
        let t = t.clamp(0.0, 1.0);
        let k = self.ts.partition_point(|&s| s <= t);
        if k == 0 {
            return (0, 0, 0.0);
        }
        if k >= self.ts.len() {
            let l = self.ts.len() - 1;
            return (l, l, 0.0);
        }
        let (a, b) = (self.ts[k - 1], self.ts[k]);
        (k - 1, k, (t - a) / (b - a))
    }

    /// Slice at time `t`, linear in t between nodes.
    pub fn profile(&self, t: f64) -> Profile {
        let (i, j, w) = self.locate(t);
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x * (1.0 - w) + y * w).collect() };
        let phi = mix(&self.phi[i], &self.phi[j]);
        let dphi = mix(&self.dphi[i], &self.dphi[j]);
        let d2phi = self.stepper.second_derivative(&phi);
        Profile { x_max: self.params.x_max, h: self.stepper.h, phi, dphi, d2phi }
    }

    pub fn phi_at(&self, t: f64, x: f64) -> f64 {
        let (i, j, w) = self.locate(t);
        let a = self.stepper.interp(&self.phi[i], x);
        let b = self.stepper.interp(&self.phi[j], x);
        a * (1.0 - w) + b * w
    }

    pub fn dphi_at(&self, t: f64, x: f64) -> f64 {
        let (i, j, w) = self.locate(t);
        let u = (x + self.params.x_max) / self.stepper.h;
        interp_linear(&self.dphi[i], u) * (1.0 - w) + interp_linear(&self.dphi[j], u) * w
    }

    pub fn max_abs_dphi(&self) -> f64 {
        self.dphi.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest discrete second difference over all slices before t = 1.
    pub fn min_second_difference(&self) -> f64 {
        let mut m = f64::INFINITY;
        for p in &self.phi[..self.phi.len() - 1] {
            for i in 1..p.len() - 1 {
                m = m.min(p[i + 1] - 2.0 * p[i] + p[i - 1]);
            }
        }
        m
    }
}

/// Backward sweep; calls `store(t, Φ(t,·))` on every node from t = 1 down.
fn sweep(
    stepper: &Stepper,
    gamma: &OrderParameter,
    dt: f64,
    mut store: impl FnMut(f64, &[f64]),
) -> Result<Vec<f64>> {
    let terminal: Vec<f64> = stepper.xs().iter().map(|x| x.abs()).collect();
    store(1.0, &terminal);
    let mut phi: Option<Vec<f64>> = None;
    for &(a, b, g) in gamma.segments().iter().rev() {
        let len = b - a;
        let m = ((len / dt) - 1e-9).ceil().max(1.0) as usize;
        let s = len / m as f64;
        for k in 0..m {
            let next = match &phi {
                None => stepper.terminal_step(g, s),
                Some(p) => stepper.cole_hopf_step(p, g, s)?,
            };
            let t = if k + 1 == m { a } else { b - (k + 1) as f64 * s };
            store(t, &next);
            phi = Some(next);
        }
    }
    Ok(phi.unwrap_or(terminal))
}

pub fn solve(gamma: &OrderParameter, params: &GridParams) -> Result<ParisiSolution> {
    let stepper = Stepper::new(params)?;
    let mut ts = Vec::new();
    let mut phis = Vec::new();
    sweep(&stepper, gamma, params.dt, |t, p| {
        ts.push(t);
        phis.push(p.to_vec());
    })?;
    ts.reverse();
    phis.reverse();
    let last = phis.len() - 1;
    let dphi = phis
        .iter()
        .enumerate()
        .map(|(k, p)| {
            if k == last {
                stepper.xs().iter().map(|x| if *x == 0.0 { 0.0 } else { x.signum() }).collect()
            } else {
                stepper.derivative(p)
            }
        })
        .collect();
    let functional_value = stepper.interp(&phis[0], 0.0) - gamma.penalty();
    Ok(ParisiSolution {
        params: *params,
        gamma: gamma.clone(),
        ts,
        phi: phis,
        dphi,
        functional_value,
        stepper,
    })
}

/// Discretized Parisi functional without keeping the grid.
pub fn functional_value(gamma: &OrderParameter, params: &GridParams) -> Result<f64> {
    let stepper = Stepper::new(params)?;
    let phi0 = sweep(&stepper, gamma, params.dt, |_, _| {})?;
    Ok(stepper.interp(&phi0, 0.0) - gamma.penalty())
}

/// Time step used inside the descent; the exact segment steps make the
/// functional nearly independent of it.
pub const OPT_DT: f64 = 0.02;

/// Sort-and-clamp projection onto admissible order parameters.
fn project(theta: &mut [f64], k: usize) {
    let (ts, gs) = theta.split_at_mut(k);
    for t in ts.iter_mut() {
        *t = t.clamp(0.0, 0.999);
    }
    ts.sort_by(f64::total_cmp);
    for i in 1..k {
        if ts[i] < ts[i - 1] + 1e-4 {
            ts[i] = ts[i - 1] + 1e-4;
        }
    }
    for g in gs.iter_mut() {
        *g = g.max(0.0);
    }
    gs.sort_by(f64::total_cmp);
}

fn to_order(theta: &[f64], k: usize) -> OrderParameter {
    OrderParameter { atoms: (0..k).map(|i| (theta[i], theta[k + i])).collect() }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Optimized {
    pub gamma: OrderParameter,
    pub functional_value: f64,
    pub evaluations: usize,
}

/// Coordinate descent over `(t_k, γ_k)` with shrinking steps.
pub fn optimize_gamma(k: usize, params: &GridParams, seed: u64) -> Result<Optimized> {
    if k > 8 {
        return Err(Error::InvalidParameter(format!("K = {k} outside 0..=8")));
    }
    let coarse = GridParams { dt: params.dt.max(OPT_DT), ..*params };
    let eval = |th: &[f64]| functional_value(&to_order(th, k), &coarse);
    if k == 0 {
        let v = eval(&[])?;
        return Ok(Optimized { gamma: OrderParameter::zero(), functional_value: v, evaluations: 1 });
    }
    let mut theta: Vec<f64> = (1..=k).map(|i| 0.9 * i as f64 / (k + 1) as f64).collect();
    theta.extend((1..=k).map(|i| 1.5 * i as f64));
    project(&mut theta, k);
    let mut best = eval(&theta)?;
    let mut evals = 1;
    let mut step: Vec<f64> = (0..2 * k).map(|i| if i < k { 0.1 } else { 0.5 }).collect();
    let tol: Vec<f64> = (0..2 * k).map(|i| if i < k { 1e-4 } else { 1e-3 }).collect();
    let mut order: Vec<usize> = (0..2 * k).collect();
    let mut r = rng::stream(seed, "parisi_descent", k as u64);
    let max_evals = 150 * k;
    while evals < max_evals && step.iter().zip(&tol).any(|(s, t)| s > t) {
        order.shuffle(&mut r);
        let mut improved = vec![false; 2 * k];
        for &c in &order {
            if step[c] <= tol[c] {
                continue;
            }
            for dir in [1.0, -1.0] {
                let mut cand = theta.clone();
                cand[c] += dir * step[c];
                project(&mut cand, k);
                if cand == theta {
                    continue;
                }
                let v = eval(&cand)?;
                evals += 1;
                if v < best - 1e-12 {
                    best = v;
                    theta = cand;
                    improved[c] = true;
                    break;
                }
            }
        }
        for c in 0..2 * k {
            if !improved[c] {
                step[c] *= 0.5;
            }
        }
    }
    let gamma = to_order(&theta, k);
    let functional_value = functional_value(&gamma, params)?;
    Ok(Optimized { gamma, functional_value, evaluations: evals })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heat_closed(x: f64, s: f64) -> f64 {
        x * erf(x / (2.0 * s).sqrt()) + (2.0 * s / PI).sqrt() * (-x * x / (2.0 * s)).exp()
    }

    #[test]
    fn heat_step_examples() {
        let st = Stepper::new(&GridParams::default()).unwrap();
        // the kink of |x| defeats Gauss–Hermite, so the first step is closed form
        let s = 0.3;
        let out = st.terminal_step(0.0, s);
        assert!((st.interp(&out, 0.0) - (2.0 * s / PI).sqrt()).abs() < 1e-12);
        let x = 6.0 * s.sqrt();
        assert!((st.interp(&out, x) - heat_closed(x, s)).abs() < 1e-7);
        let smooth = st.terminal_step(0.0, 0.05);
        let out = st.heat_step(&smooth, 0.25).unwrap();
        for x in [0.0, 0.7, -2.0, 6.0 * s.sqrt()] {
            assert!((st.interp(&out, x) - heat_closed(x, s)).abs() < 1e-7, "{x}");
        }
        let lin: Vec<f64> = st.xs().iter().map(|x| 0.7 * x).collect();
        let out = st.heat_step(&lin, 0.5).unwrap();
        assert!(out.iter().zip(&lin).all(|(a, b)| (a - b).abs() < 1e-10));
        assert!(st.heat_step(&lin, 0.0).is_err());
    }

    #[test]
    fn cole_hopf_examples() {
        let st = Stepper::new(&GridParams::default()).unwrap();
        let p0 = st.terminal_step(0.0, 0.05);
        let a = st.heat_step(&p0, 0.1).unwrap();
        let b = st.cole_hopf_step(&p0, 1e-6, 0.1).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-6));
        let c = vec![2.5; st.xs().len()];
        let out = st.cole_hopf_step(&c, 3.0, 0.2).unwrap();
        assert!(out.iter().all(|v| (v - 2.5).abs() < 1e-13));
        // terminal closed form against the same Gaussian expectation on |x|
        let t = st.terminal_step(1.0, 0.25);
        let mid = st.xs().len() / 2;
        let direct = 2.0 * (0.125f64).exp() * (0.5 * statrs::function::erf::erfc(-0.5 / std::f64::consts::SQRT_2));
        assert!((t[mid] - direct.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_gamma_solution() {
        let sol = solve(&OrderParameter::zero(), &GridParams::default()).unwrap();
        assert!((sol.functional_value - (2.0 / PI).sqrt()).abs() < 1e-6);
        let mut err: f64 = 0.0;
        for (i, &x) in sol.xs().iter().enumerate() {
            if x.abs() <= 6.0 {
                err = err.max((sol.phi[0][i] - heat_closed(x, 1.0)).abs());
            }
        }
        assert!(err < 1e-3, "{err}");
        assert!(sol.max_abs_dphi() <= 1.0 + 1e-9);
    }

    #[test]
    fn lipschitz_and_convex_with_atoms() {
        let g = OrderParameter::new(vec![(0.3, 0.8), (0.8, 2.7)]).unwrap();
        let p = GridParams { dt: 0.01, ..GridParams::default() };
        let sol = solve(&g, &p).unwrap();
        assert!(sol.functional_value.is_finite());
        assert!(sol.max_abs_dphi() <= 1.0 + 1e-9);
        assert!(sol.min_second_difference() >= -1e-8, "{}", sol.min_second_difference());
        assert!((sol.phi_at(0.0, 0.0) - sol.functional_value - g.penalty()).abs() < 1e-12);
    }

    #[test]
    fn semigroup() {
        let st = Stepper::new(&GridParams::default()).unwrap();
        let p0 = st.terminal_step(0.0, 0.1);
        let one = st.heat_step(&p0, 0.2).unwrap();
        let two = st.heat_step(&st.heat_step(&p0, 0.1).unwrap(), 0.1).unwrap();
        let mid = st.xs().len() / 2;
        let err = (mid - 500..mid + 500).map(|i| (one[i] - two[i]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn admissibility() {
        assert!(OrderParameter::new(vec![(0.5, 1.0), (0.4, 2.0)]).is_err());
        assert!(OrderParameter::new(vec![(0.2, 2.0), (0.4, 1.0)]).is_err());
        assert!(OrderParameter::new(vec![(0.2, -1.0)]).is_err());
        let g = OrderParameter::new(vec![(0.2, 1.0), (0.6, 3.0)]).unwrap();
        assert_eq!(g.gamma_at(0.1), 0.0);
        assert_eq!(g.gamma_at(0.5), 1.0);
        assert_eq!(g.gamma_at(0.9), 3.0);
        assert_eq!(serde_json::to_string(&g).unwrap(), "[[0.2,1.0],[0.6,3.0]]");
        assert!(Stepper::new(&GridParams { n_x: 101, ..GridParams::default() }).is_err());
    }
}
