//! Symbolic expansion of the frozen iteration into polynomials in the
//! disorder entries, and the tree-projection gap of the result.

use super::family::PolyDenoiserFamily;
use super::frozen::FrozenOnsager;
use crate::error::{check_len, Error, Result};
use crate::ldp::{Ensemble, EntrySampler, Polynomial, PolynomialVector, Ring};
use crate::rng;
use serde::{Deserialize, Serialize};

pub const UNROLL_MAX_N: usize = 16;
pub const UNROLL_MAX_STEPS: usize = 3;
pub const UNROLL_MAX_DEGREE: u32 = 3;
/// Refuse expansions estimated above this many monomials in total.
pub const UNROLL_MAX_TERMS: f64 = 5e6;

/// Coefficient-norm and degree envelope; arithmetic follows the product
/// bound `‖pq‖ ≤ 2^{Δ₁+Δ₂}‖p‖‖q‖` and the triangle inequality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormEnvelope {
    pub norm: f64,
    pub deg: u32,
}

impl Ring<f64> for NormEnvelope {
    fn constant(c: f64) -> Self {
        Self { norm: c.abs(), deg: 0 }
    }
    fn add(&self, other: &Self) -> Self {
        Self { norm: self.norm + other.norm, deg: self.deg.max(other.deg) }
    }
    fn mul(&self, other: &Self) -> Self {
        let deg = self.deg + other.deg;
        Self { norm: 2f64.powi(deg as i32) * self.norm * other.norm, deg }
    }
    fn scale(&self, c: f64) -> Self {
        Self { norm: self.norm * c.abs(), deg: self.deg }
    }
}

/// Frozen iteration over a ring; returns the candidate entries.
fn iterate<R: Ring<f64>>(
    q: &PolyDenoiserFamily,
    b: &FrozenOnsager,
    u0: Vec<R>,
    steps: usize,
    delta: f64,
    mut matvec: impl FnMut(&[R]) -> Vec<R>,
) -> Vec<R> {
    let n = u0.len();
    let mut u: Vec<Vec<R>> = vec![u0];
    let mut qs: Vec<Vec<R>> = Vec::new();
    for t in 0..=steps {
        let out: Vec<R> = (0..n)
            .map(|i| {
                let hist: Vec<R> = (0..=t).map(|j| u[j][i].clone()).collect();
                q.steps[t].eval_ring::<f64, R>(&hist)
            })
            .collect();
        qs.push(out);
        if t == steps {
            break;
        }
        let mut next = matvec(&qs[t]);
        for j in 1..=t {
            let c = b.b[t][j];
            if c != 0.0 {
                for (x, y) in next.iter_mut().zip(&qs[j - 1]) {
                    x.add_scaled(y, -c);
                }
            }
        }
        u.push(next);
    }
    (0..n)
        .map(|i| {
            let mut v = R::constant(0.0);
            for (t, row) in qs.iter().enumerate().skip(1) {
                v.add_scaled(&row[i], delta.sqrt() * q.weights[t]);
            }
            v
        })
        .collect()
}

/// Degree in the disorder of `q^t` given the degrees of its arguments.
fn step_degree(q: &PolyDenoiserFamily, t: usize, udeg: &[u32]) -> u32 {
    let s = &q.steps[t];
    let ydeg: Vec<u32> = s
        .frame
        .iter()
        .map(|row| row.iter().zip(&s.args).filter(|(w, _)| **w != 0.0).map(|(_, a)| udeg[*a]).max().unwrap_or(0))
        .collect();
    s.terms
        .iter()
        .map(|(m, _)| m.iter().zip(&ydeg).map(|(e, d)| e * d).sum::<u32>())
        .max()
        .unwrap_or(0)
}

/// Degree of the unrolled candidate after `steps` increments.
pub fn unrolled_degree(q: &PolyDenoiserFamily, steps: usize) -> u32 {
    let mut udeg = vec![0u32];
    let mut best = 0;
    for t in 0..=steps {
        let d = step_degree(q, t, &udeg);
        if t >= 1 {
            best = best.max(d);
        }
        udeg.push(d + 1);
    }
    best
}

/// A priori size estimate: per coordinate, the smaller of the number of
/// monomials of that degree in all `n(n−1)/2` entries and `n^D`.
pub fn estimate_terms(n: usize, degree: u32) -> f64 {
    let e = (n * n.saturating_sub(1) / 2) as f64;
    let mut binom = 1.0;
    for k in 1..=degree {
        binom *= (e + k as f64) / k as f64;
    }
    n as f64 * binom.min((n as f64).powi(degree as i32))
}

#[derive(Clone, Debug)]
pub struct Unrolled {
    /// `h_i` with `h_i(D) = ṽ_i`.
    pub h: PolynomialVector<f64>,
    /// `h^Tr`.
    pub tree: PolynomialVector<f64>,
    /// Envelope on `max_i ‖h_i‖` computed before expansion.
    pub norm_bound: f64,
    pub max_norm: f64,
    pub degree: u32,
    pub estimated_terms: f64,
}

/// Expand `ṽ` symbolically for an explicit `u⁰`.
pub fn unroll(
    q: &PolyDenoiserFamily,
    b: &FrozenOnsager,
    u0: &[f64],
    steps: usize,
    delta: f64,
) -> Result<Unrolled> {
    let n = u0.len();
    if n > UNROLL_MAX_N || steps > UNROLL_MAX_STEPS || q.max_degree() > UNROLL_MAX_DEGREE {
        return Err(Error::Refused(format!(
            "unroll needs n ≤ {UNROLL_MAX_N}, T ≤ {UNROLL_MAX_STEPS}, Δ_fit ≤ {UNROLL_MAX_DEGREE}; got n = {n}, T = {steps}, Δ_fit = {}",
            q.max_degree()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidDimension(format!("n = {n}")));
    }
    if steps < 1 || steps > q.steps.len() - 1 || steps > b.horizon() {
        return Err(Error::InvalidParameter(format!("steps = {steps} outside the family horizon")));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("δ = {delta}")));
    }
    let degree = unrolled_degree(q, steps);
    let estimated_terms = estimate_terms(n, degree);
    if estimated_terms > UNROLL_MAX_TERMS {
        return Err(Error::Refused(format!("estimated {estimated_terms:.3e} monomials exceeds {UNROLL_MAX_TERMS:.0e}")));
    }
    let m = q.truncation;
    let u0c: Vec<f64> = u0.iter().map(|x| x.clamp(-m, m)).collect();

    let umax = u0c.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let env = iterate(q, b, vec![NormEnvelope::constant(umax)], steps, delta, |x| {
        vec![NormEnvelope { norm: (x[0].deg + 1) as f64 * x[0].norm, deg: x[0].deg + 1 }]
    });
    let norm_bound = env[0].norm;

    let sym0: Vec<Polynomial<f64>> = u0c.iter().map(|x| Polynomial::constant(*x)).collect();
    let h = iterate(q, b, sym0, steps, delta, |x| {
        (0..n)
            .map(|i| {
                let mut acc = Polynomial::zero(0);
                for (j, p) in x.iter().enumerate() {
                    if j != i {
                        acc.add_scaled(&p.mul_var(i.min(j), i.max(j)), 1.0);
                    }
                }
                acc
            })
            .collect()
    });
    let h = PolynomialVector::new(h);
    if !h.all_connected() || !h.all_rooted() {
        return Err(Error::Domain("unrolled polynomial is not connected and rooted".into()));
    }
    let max_norm = h.max_norm();
    if max_norm > norm_bound * (1.0 + 1e-9) {
        return Err(Error::Domain(format!("‖h_i‖ = {max_norm} exceeds the envelope {norm_bound}")));
    }
    let tree = h.tree_project();
    Ok(Unrolled { h, tree, norm_bound, max_norm, degree, estimated_terms })
}


#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GapReport {
    pub ensemble: Ensemble,
    pub n: usize,
    pub d: f64,
    /// `(1/n) Σ_i E[(h_i − h_i^Tr)²]`.
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// Monte Carlo estimate of the mean squared tree-projection gap.
pub fn tree_gap_check(
    h: &PolynomialVector<f64>,
    ensemble: Ensemble,
    n: usize,
    d: f64,
    samples: u64,
    seed: u64,
) -> Result<GapReport> {
    check_len(n, h.len())?;
    if n > UNROLL_MAX_N {
        return Err(Error::Precondition(format!("n = {n} > {UNROLL_MAX_N}")));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let sampler = EntrySampler::new(ensemble, n, d)?;
    let diffs: Vec<Polynomial<f64>> = h.entries.iter().map(|p| p.sub(&p.tree_project())).collect();
    let mut r = rng::stream(seed, "tree_gap", n as u64);
    let mut x = vec![0.0; n * n];
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        for i in 0..n {
            for j in (i + 1)..n {
                x[i * n + j] = sampler.draw(&mut r);
            }
        }
        let val = diffs.iter().map(|p| p.eval_unchecked(|i, j| x[i * n + j]).powi(2)).sum::<f64>() / n as f64;
        s1 += val;
        s2 += val * val;
    }
    let ns = samples as f64;
    let mean = s1 / ns;
    let var = ((s2 / ns - mean * mean) * ns / (ns - 1.0)).max(0.0);
    Ok(GapReport { ensemble, n, d, mean, stderr: (var / ns).sqrt(), samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::sample_goe;
    use crate::ldp::MultiIndex;
    use crate::poly::{run_poly_amp_from, PolyStep};

    #[test]
    fn one_step_is_linear_and_rooted() {
        let steps = vec![PolyStep::constant(1.5), PolyStep::from_monomials(vec![1], &[(vec![1], 1.0)]).unwrap()];
        let q = PolyDenoiserFamily::new(steps, vec![1.0, 2.0]).unwrap();
        let u0 = [0.1, -0.2, 0.3, 0.0];
        let out = unroll(&q, &FrozenOnsager::zeros(1), &u0, 1, 0.25).unwrap();
        // h_i = √δ · 2 · Σ_j 1.5 X_ij
        for (i, p) in out.h.entries.iter().enumerate() {
            assert_eq!(p.len(), 3);
            for j in (0..4).filter(|j| *j != i) {
                assert!((p.coeff(&MultiIndex::edge(i.min(j), i.max(j))) - 1.5).abs() < 1e-15);
            }
        }
        assert!(out.h.all_rooted());
        assert_eq!(out.tree.entries, out.h.entries);
        assert!(out.max_norm <= out.norm_bound);
    }

    #[test]
    fn symbolic_matches_iteration() {
        let a = PolyStep::from_monomials(vec![0, 1], &[(vec![0, 0], 0.3), (vec![1, 1], -0.7), (vec![0, 2], 0.4)]).unwrap();
        let c = PolyStep::from_monomials(vec![1, 2], &[(vec![1, 1], 0.5), (vec![0, 2], -0.2), (vec![1, 0], 1.0)]).unwrap();
        let q = PolyDenoiserFamily::new(vec![PolyStep::constant(1.0), a, c], vec![1.0, 0.8, 1.2]).unwrap();
        let mut b = FrozenOnsager::zeros(2);
        b.b[1][1] = 0.3;
        b.b[2][1] = -0.1;
        b.b[2][2] = 0.6;
        let u0 = vec![0.2, -0.4, 0.1, 0.5, -0.3];
        let out = unroll(&q, &b, &u0, 2, 0.5).unwrap();
        for seed in 0..5 {
            let d = sample_goe::<f64>(5, seed).unwrap();
            let run = run_poly_amp_from(&d, &q, &b, u0.clone(), 0.5, 1.0).unwrap();
            let sym = out.h.eval_vec(&d).unwrap();
            for (x, y) in sym.iter().zip(&run.v) {
                assert!((x - y).abs() < 1e-12, "{x} {y}");
            }
        }
    }

    #[test]
    fn guard_refuses() {
        let steps = vec![PolyStep::constant(1.0), PolyStep::from_monomials(vec![1], &[(vec![1], 1.0)]).unwrap()];
        let q = PolyDenoiserFamily::new(steps, vec![1.0, 1.0]).unwrap();
        assert!(matches!(unroll(&q, &FrozenOnsager::zeros(1), &[0.0; 17], 1, 0.5), Err(Error::Refused(_))));
        assert!(estimate_terms(16, 6) > UNROLL_MAX_TERMS);
    }

    #[test]
    fn tree_based_has_no_gap() {
        let steps = vec![PolyStep::constant(1.0), PolyStep::from_monomials(vec![1], &[(vec![1], 1.0)]).unwrap()];
        let q = PolyDenoiserFamily::new(steps, vec![1.0, 1.0]).unwrap();
        let out = unroll(&q, &FrozenOnsager::zeros(1), &[0.0; 6], 1, 0.5).unwrap();
        let g = tree_gap_check(&out.h, Ensemble::Goe, 6, 0.0, 100, 1).unwrap();
        assert_eq!(g.mean, 0.0);
    }
}
