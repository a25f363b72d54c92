use crate::amp::DenoiserFamily;
use crate::error::{Error, Result};
use crate::ldp::Ring;
use crate::real::Real;
use serde::{Deserialize, Serialize};

/// Normalized probabilists' Hermite values `h_m(y) = He_m(y)/√(m!)`, `m ≤ deg`.
pub fn hermite_normalized(y: f64, deg: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if deg == 0 {
        return;
    }
    out.push(y);
    // h_{m+1} = (y h_m − √m h_{m−1}) / √(m+1)
    for m in 1..deg {
        let next = (y * out[m] - (m as f64).sqrt() * out[m - 1]) / ((m + 1) as f64).sqrt();
        out.push(next);
    }
}

/// Expansion of `x^e` in the normalized Hermite basis, indexed by degree.
pub fn monomial_to_hermite(e: usize) -> Vec<f64> {
    let mut c = vec![0.0; e + 1];
    let fact = |k: usize| (1..=k).fold(1.0f64, |a, b| a * b as f64);
    for k in 0..=e / 2 {
        let m = e - 2 * k;
        c[m] = fact(e) / (2f64.powi(k as i32) * fact(k) * fact(m)) * fact(m).sqrt();
    }
    c
}

const MAX_DEGREE: usize = 64;

static SQRT: [f64; MAX_DEGREE + 1] = {
    let mut t = [0.0; MAX_DEGREE + 1];
    let mut i = 0;
    while i <= MAX_DEGREE {
        t[i] = sqrt_const(i as f64);
        i += 1;
    }
    t
};

static INV_SQRT: [f64; MAX_DEGREE + 1] = {
    let mut t = [0.0; MAX_DEGREE + 1];
    let mut i = 1;
    while i <= MAX_DEGREE {
        t[i] = 1.0 / sqrt_const(i as f64);
        i += 1;
    }
    t
};

// Newton iteration; exact to the last ulp or so for small integers.
const fn sqrt_const(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut g = x;
    let mut i = 0;
    while i < 64 {
        g = 0.5 * (g + x / g);
        i += 1;
    }
    g
}

#[derive(Default)]
struct Scratch {
    y: Vec<f64>,
    tables: Vec<f64>,
    vals: Vec<f64>,
    dy: Vec<f64>,
}

thread_local! {
    static SCRATCH: std::cell::RefCell<Scratch> = std::cell::RefCell::new(Scratch::default());
}

/// Runs `f` on an `f64` copy of `hist` plus a zeroed gradient buffer.
fn with_f64<S: Real, T>(hist: &[S], f: impl FnOnce(&[f64], &mut [f64]) -> T) -> T {
    thread_local! {
        static BUF: std::cell::RefCell<(Vec<f64>, Vec<f64>)> = Default::default();
    }
    BUF.with(|cell| {
        let (h, g) = &mut *cell.borrow_mut();
        h.clear();
        h.extend(hist.iter().map(|x| x.f64()));
        g.clear();
        g.resize(hist.len(), 0.0);
        f(h, g)
    })
}

/// One polynomial denoiser `q^t`.
///
/// With `y_r = Σ_a frame[r][a] · u^{args[a]}`, `q^t = Σ c · Π_r h_{m_r}(y_r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyStep {
    pub args: Vec<usize>,
    pub frame: Vec<Vec<f64>>,
    pub terms: Vec<(Vec<u32>, f64)>,
    pub degree: u32,
    /// L² error against the target under the fitting law.
    pub residual: f64,
    /// Frame coordinates are clamped to `[−c, c]` before evaluation.
    #[serde(default)]
    pub clamp: Option<f64>,
    /// Output is clipped to `[−b, b]`.
    #[serde(default)]
    pub bound: Option<f64>,
}

impl PolyStep {
    pub fn constant(c: f64) -> Self {
        Self { args: vec![], frame: vec![], terms: vec![(vec![], c)], degree: 0, residual: 0.0, clamp: None, bound: None }
    }

    /// From monomials `c · Π_a (u^{args[a]})^{e_a}`.
    pub fn from_monomials(args: Vec<usize>, monomials: &[(Vec<u32>, f64)]) -> Result<Self> {
        let r = args.len();
        let mut acc: std::collections::BTreeMap<Vec<u32>, f64> = Default::default();
        let mut degree = 0;
        for (e, c) in monomials {
            if e.len() != r {
                return Err(Error::DimensionMismatch { expected: r, got: e.len() });
            }
            degree = degree.max(e.iter().sum());
            let per: Vec<Vec<f64>> = e.iter().map(|&x| monomial_to_hermite(x as usize)).collect();
            let mut stack: Vec<(Vec<u32>, f64)> = vec![(vec![], *c)];
            for p in &per {
                let mut next = Vec::new();
                for (m, v) in &stack {
                    for (k, w) in p.iter().enumerate() {
                        if *w != 0.0 {
                            let mut mm = m.clone();
                            mm.push(k as u32);
                            next.push((mm, v * w));
                        }
                    }
                }
                stack = next;
            }
            for (m, v) in stack {
                *acc.entry(m).or_insert(0.0) += v;
            }
        }
        let frame = (0..r).map(|i| (0..r).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let terms = acc.into_iter().filter(|(_, v)| *v != 0.0).collect();
        Ok(Self { args, frame, terms, degree, residual: 0.0, clamp: None, bound: None })
    }

    pub fn rank(&self) -> usize {
        self.frame.len()
    }

    fn project_into(&self, hist: &[f64], y: &mut [f64]) {
        let c = self.clamp.unwrap_or(f64::INFINITY);
        for (out, row) in y.iter_mut().zip(&self.frame) {
            *out = row.iter().zip(&self.args).map(|(w, a)| w * hist[*a]).sum::<f64>().clamp(-c, c);
        }
    }

    /// Hermite tables `h_k(y_r)` laid out as `r * (degree + 1) + k`.
    fn fill_tables(&self, hist: &[f64], y: &mut Vec<f64>, tables: &mut Vec<f64>) {
        let r = self.rank();
        let w = self.degree as usize + 1;
        y.resize(r, 0.0);
        self.project_into(hist, y);
        tables.resize(r * w, 0.0);
        for (s, &v) in y.iter().enumerate() {
            let t = &mut tables[s * w..(s + 1) * w];
            t[0] = 1.0;
            if w > 1 {
                t[1] = v;
            }
            for m in 1..w - 1 {
                t[m + 1] = (v * t[m] - SQRT[m] * t[m - 1]) * INV_SQRT[m + 1];
            }
        }
    }

    pub fn eval(&self, hist: &[f64]) -> f64 {
        SCRATCH.with(|cell| {
            let sc = &mut *cell.borrow_mut();
            self.fill_tables(hist, &mut sc.y, &mut sc.tables);
            let w = self.degree as usize + 1;
            let tables = &sc.tables;
            let v: f64 = self
                .terms
                .iter()
                .map(|(m, c)| m.iter().enumerate().fold(*c, |p, (r, &k)| p * tables[r * w + k as usize]))
                .sum();
            self.clip(v)
        })
    }

    /// Value and gradient with respect to `hist` (entries outside `args` stay zero).
    pub fn eval_grad(&self, hist: &[f64], grad: &mut [f64]) -> f64 {
        for g in grad.iter_mut() {
            *g = 0.0;
        }
        SCRATCH.with(|cell| {
            let sc = &mut *cell.borrow_mut();
            self.fill_tables(hist, &mut sc.y, &mut sc.tables);
            let r = self.rank();
            let w = self.degree as usize + 1;
            let tables = &sc.tables;
            sc.dy.clear();
            sc.dy.resize(r, 0.0);
            sc.vals.resize(r, 0.0);
            let mut val = 0.0;
            for (m, c) in &self.terms {
                for (s, &k) in m.iter().enumerate() {
                    sc.vals[s] = tables[s * w + k as usize];
                }
                val += c * sc.vals.iter().product::<f64>();
                for s in 0..r {
                    let k = m[s] as usize;
                    if k == 0 {
                        continue;
                    }
                    // h_k' = √k h_{k−1}
                    let mut p = c * SQRT[k] * tables[s * w + k - 1];
                    for (q, v) in sc.vals.iter().enumerate() {
                        if q != s {
                            p *= v;
                        }
                    }
                    sc.dy[s] += p;
                }
            }
            if self.clip(val) != val {
                return self.clip(val);
            }
            let c = self.clamp.unwrap_or(f64::INFINITY);
            for (s, row) in self.frame.iter().enumerate() {
                if sc.y[s].abs() >= c {
                    continue;
                }
                for (wt, a) in row.iter().zip(&self.args) {
                    grad[*a] += wt * sc.dy[s];
                }
            }
            val
        })
    }

    fn clip(&self, v: f64) -> f64 {
        match self.bound {
            Some(b) => v.clamp(-b, b),
            None => v,
        }
    }

    /// Evaluate over any ring, e.g. symbolic polynomials in the disorder.
    ///
    /// Clamp and bound are ignored here: the result is the bare polynomial.
    pub fn eval_ring<S: Real, R: Ring<S>>(&self, hist: &[R]) -> R {
        let deg = self.degree as usize;
        let mut tables: Vec<Vec<R>> = Vec::with_capacity(self.rank());
        for row in &self.frame {
            let mut y = R::constant(S::zero());
            for (w, a) in row.iter().zip(&self.args) {
                if *w != 0.0 {
                    y.add_scaled(&hist[*a], S::c(*w));
                }
            }
            let mut t = vec![R::constant(S::one())];
            if deg >= 1 {
                t.push(y.clone());
            }
            for m in 1..deg {
                let mut next = y.mul(&t[m]).scale(S::c(1.0 / ((m + 1) as f64).sqrt()));
                next.add_scaled(&t[m - 1], S::c(-((m as f64) / ((m + 1) as f64)).sqrt()));
                t.push(next);
            }
            tables.push(t);
        }
        let mut out = R::constant(S::zero());
        for (m, c) in &self.terms {
            let mut p = R::constant(S::c(*c));
            for (r, &k) in m.iter().enumerate() {
                if k > 0 {
                    p = p.mul(&tables[r][k as usize]);
                }
            }
            out = out.add(&p);
        }
        out
    }

    pub fn max_coefficient(&self) -> f64 {
        self.terms.iter().fold(0.0, |a, (_, c)| a.max(c.abs()))
    }
}

/// Polynomial denoisers `q⁰, …, q^T` with candidate weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyDenoiserFamily {
    pub steps: Vec<PolyStep>,
    /// Multiplier of `q^t` in the candidate, as for the fitted family.
    pub weights: Vec<f64>,
    /// Target L² error.
    pub eta: f64,
    /// Largest coefficient magnitude over all steps.
    pub coeff_bound: f64,
    /// Largest gradient norm seen on probe points.
    pub lipschitz_probe: f64,
    pub truncation: f64,
}

impl PolyDenoiserFamily {
    pub fn new(steps: Vec<PolyStep>, weights: Vec<f64>) -> Result<Self> {
        if steps.is_empty() || weights.len() != steps.len() {
            return Err(Error::InvalidParameter("need one weight per step and at least one step".into()));
        }
        for (t, s) in steps.iter().enumerate() {
            if s.args.iter().any(|a| *a > t) {
                return Err(Error::InvalidParameter(format!("step {t} reads a future iterate")));
            }
            if s.frame.iter().any(|r| r.len() != s.args.len()) || s.terms.iter().any(|(m, _)| m.len() != s.rank()) {
                return Err(Error::InvalidParameter(format!("step {t} has inconsistent shapes")));
            }
            if s.degree as usize > MAX_DEGREE {
                return Err(Error::InvalidParameter(format!("step {t} has degree {} > {MAX_DEGREE}", s.degree)));
            }
            if s.terms.iter().any(|(m, _)| m.iter().sum::<u32>() > s.degree) {
                return Err(Error::InvalidParameter(format!("step {t} exceeds its degree")));
            }
        }
        let coeff_bound = steps.iter().fold(0.0f64, |a, s| a.max(s.max_coefficient()));
        Ok(Self {
            steps,
            weights,
            eta: f64::INFINITY,
            coeff_bound,
            lipschitz_probe: f64::NAN,
            truncation: crate::amp::DEFAULT_TRUNCATION,
        })
    }

    pub fn max_degree(&self) -> u32 {
        self.steps.iter().map(|s| s.degree).max().unwrap_or(0)
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.residual).collect()
    }
}

impl<S: Real> DenoiserFamily<S> for PolyDenoiserFamily {
    fn horizon(&self) -> usize {
        self.steps.len() - 1
    }

    fn eval(&self, t: usize, hist: &[S]) -> S {
        with_f64(hist, |h, _| S::c(self.steps[t].eval(h)))
    }

    fn eval_grad(&self, t: usize, hist: &[S], grad: &mut [S]) -> S {
        with_f64(hist, |h, g| {
            let v = self.steps[t].eval_grad(h, g);
            for (a, b) in grad.iter_mut().zip(g.iter()) {
                *a = S::c(*b);
            }
            S::c(v)
        })
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz_probe
    }

    fn truncation(&self) -> f64 {
        self.truncation
    }

    fn candidate_weight(&self, t: usize) -> f64 {
        self.weights[t]
    }

    fn uses_init(&self) -> bool {
        self.steps.iter().any(|s| s.args.contains(&0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldp::Polynomial;

    #[test]
    fn hermite_and_conversion() {
        let mut h = Vec::new();
        hermite_normalized(0.7, 4, &mut h);
        let he4 = 0.7f64.powi(4) - 6.0 * 0.49 + 3.0;
        assert!((h[4] - he4 / 24f64.sqrt()).abs() < 1e-14);
        let c = monomial_to_hermite(3);
        let x: f64 = -1.3;
        hermite_normalized(x, 3, &mut h);
        let back: f64 = c.iter().zip(&h).map(|(a, b)| a * b).sum();
        assert!((back - x.powi(3)).abs() < 1e-13);
    }

    #[test]
    fn monomial_steps_evaluate() {
        // 2 + u1 − 0.5 u1² u2
        let s = PolyStep::from_monomials(vec![1, 2], &[(vec![0, 0], 2.0), (vec![1, 0], 1.0), (vec![2, 1], -0.5)]).unwrap();
        let hist = [9.0, 0.4, -1.1];
        let want = 2.0 + 0.4 - 0.5 * 0.16 * -1.1;
        assert!((s.eval(&hist) - want).abs() < 1e-13);
        let mut g = [0.0; 3];
        s.eval_grad(&hist, &mut g);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - (1.0 - 0.4 * -1.1)).abs() < 1e-13);
        assert!((g[2] - (-0.5 * 0.16)).abs() < 1e-13);
        let r: f64 = s.eval_ring::<f64, f64>(&hist);
        assert!((r - want).abs() < 1e-13);
        let sym: Vec<Polynomial<f64>> = hist.iter().map(|v| Polynomial::constant(*v)).collect();
        let p = s.eval_ring::<f64, Polynomial<f64>>(&sym);
        assert!((p.coeff(&Default::default()) - want).abs() < 1e-13);
    }

    #[test]
    fn clamp_and_bound() {
        // u1³
        let mut s = PolyStep::from_monomials(vec![1], &[(vec![3], 1.0)]).unwrap();
        s.clamp = Some(2.0);
        let mut g = [0.0; 2];
        assert!((s.eval(&[0.0, 3.0]) - 8.0).abs() < 1e-12);
        s.eval_grad(&[0.0, 3.0], &mut g);
        assert_eq!(g, [0.0, 0.0]);
        s.bound = Some(1.0);
        assert_eq!(s.eval(&[0.0, 1.5]), 1.0);
        assert_eq!(s.eval(&[0.0, -1.5]), -1.0);
        assert_eq!(s.eval_grad(&[0.0, 1.5], &mut g), 1.0);
        assert_eq!(g, [0.0, 0.0]);
        s.eval_grad(&[0.0, 0.5], &mut g);
        assert!((g[1] - 0.75).abs() < 1e-12);
        let r: f64 = s.eval_ring::<f64, f64>(&[0.0, 1.5]);
        assert!((r - 3.375).abs() < 1e-12);
    }
}
