use super::polynomial::Polynomial;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    Goe,
    Sparse,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GapEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// Draws single entries of either ensemble.
#[derive(Clone, Copy, Debug)]
pub(crate) struct EntrySampler {
    ensemble: Ensemble,
    scale: f64,
    mu: f64,
    on: f64,
    off: f64,
}

impl EntrySampler {
    pub(crate) fn new(ensemble: Ensemble, n: usize, d: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension(format!("n = {n}")));
        }
        match ensemble {
            Ensemble::Goe => Ok(Self { ensemble, scale: (1.0 / n as f64).sqrt(), mu: 0.0, on: 0.0, off: 0.0 }),
            Ensemble::Sparse => {
                if !(d > 0.0 && d < n as f64) {
                    return Err(Error::InvalidParameter(format!("need 0 < d < n, got d = {d}, n = {n}")));
                }
                let mu = d / n as f64;
                let s = (d * (1.0 - mu)).sqrt();
                Ok(Self { ensemble, scale: 0.0, mu, on: -(1.0 - mu) / s, off: mu / s })
            }
        }
    }

    pub(crate) fn draw(&self, r: &mut rng::Rng) -> f64 {
        match self.ensemble {
            Ensemble::Goe => {
                let z: f64 = StandardNormal.sample(r);
                z * self.scale
            }
            Ensemble::Sparse => {
                if r.random::<f64>() < self.mu {
                    self.on
                } else {
                    self.off
                }
            }
        }
    }
}

/// Monte Carlo estimate of `E[p(D) − p^Tr(D)]`, drawing only the entries
/// that occur in `p`.
pub fn projection_gap_estimate<S: Real>(
    p: &Polynomial<S>,
    ensemble: Ensemble,
    n: usize,
    d: f64,
    samples: u64,
    seed: u64,
) -> Result<GapEstimate> {
    if !p.is_connected() {
        return Err(Error::Precondition("polynomial has a disconnected monomial".into()));
    }
    if p.degree_bound() > 6 {
        return Err(Error::Precondition(format!("degree bound {} > 6", p.degree_bound())));
    }
    if n > 2000 {
        return Err(Error::Precondition(format!("n = {n} > 2000")));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    if let Some(m) = p.max_node() {
        if m >= n {
            return Err(Error::Index { index: m, n });
        }
    }
    let sampler = EntrySampler::new(ensemble, n, d)?;
    let diff = p.sub(&p.tree_project());
    if diff.is_empty() {
        return Ok(GapEstimate { mean: 0.0, stderr: 0.0, samples });
    }
    let mut slots: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (a, _) in diff.terms() {
        for (e, _) in a.entries() {
            let k = slots.len();
            slots.entry(e).or_insert(k);
        }
    }
    let terms: Vec<(f64, Vec<(usize, i32)>)> = diff
        .terms()
        .map(|(a, c)| (c.f64(), a.entries().map(|(e, x)| (slots[&e], x as i32)).collect()))
        .collect();
    let mut r = rng::stream(seed, "projection_gap", n as u64);
    let mut vals = vec![0.0; slots.len()];
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        for v in vals.iter_mut() {
            *v = sampler.draw(&mut r);
        }
        let y: f64 = terms
            .iter()
            .map(|(c, f)| f.iter().fold(*c, |m, &(k, x)| m * vals[k].powi(x)))
            .sum();
        sum += y;
        sum2 += y * y;
    }
    let ns = samples as f64;
    let mean = sum / ns;
    let var = ((sum2 / ns - mean * mean) * ns / (ns - 1.0)).max(0.0);
    Ok(GapEstimate { mean, stderr: (var / ns).sqrt(), samples })
}

/// Point estimate of `E[p(D) − p^Tr(D)]`.
pub fn projection_gap_stat<S: Real>(
    p: &Polynomial<S>,
    ensemble: Ensemble,
    n: usize,
    d: f64,
    samples: u64,
    seed: u64,
) -> Result<f64> {
    projection_gap_estimate(p, ensemble, n, d, samples, seed).map(|g| g.mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize, j: usize) -> Polynomial<f64> {
        Polynomial::var(i, j)
    }

    #[test]
    fn tree_polynomials_have_no_gap() {
        let p = x(0, 1).mul(&x(1, 2)).add(&x(0, 1).mul(&x(0, 1)));
        assert_eq!(projection_gap_stat(&p, Ensemble::Goe, 10, 0.0, 1000, 1).unwrap(), 0.0);
    }

    #[test]
    fn disconnected_is_refused() {
        let p = x(0, 1).mul(&x(2, 3));
        assert!(matches!(
            projection_gap_stat(&p, Ensemble::Goe, 10, 0.0, 1000, 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn squared_triangle_scales_like_n_cubed() {
        let sq = |i, j| x(i, j).mul(&x(i, j));
        let p = sq(0, 1).mul(&sq(1, 2)).mul(&sq(0, 2));
        let a = projection_gap_estimate(&p, Ensemble::Goe, 400, 0.0, 200_000, 3).unwrap();
        let b = projection_gap_estimate(&p, Ensemble::Goe, 800, 0.0, 200_000, 3).unwrap();
        let want = 400f64.powi(-3);
        assert!((a.mean - want).abs() < 4.0 * a.stderr, "{a:?}");
        let ratio = a.mean / b.mean;
        assert!((ratio - 8.0).abs() < 0.8, "ratio {ratio}");
    }
}
