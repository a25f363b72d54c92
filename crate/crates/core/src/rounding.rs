//! Clipping, greedy sign rounding and Max-Cut accounting.

use crate::disorder::{DisorderMatrix, SparseGraph};
use crate::error::{check_len, Error, Result};
use crate::real::Real;
use serde::{Deserialize, Serialize};
use std::io::Write;

pub fn clip_to_cube<S: Real>(x: &[S]) -> Vec<S> {
    x.iter().map(|v| v.max(-S::one()).min(S::one())).collect()
}

/// Euclidean distance from `x` to `[-1, 1]^n`.
pub fn cube_distance<S: Real>(x: &[S]) -> S {
    x.iter()
        .map(|v| {
            let e = (v.abs() - S::one()).max(S::zero());
            e * e
        })
        .sum::<S>()
        .sqrt()
}

/// `(1/2n) vᵀ D v`.
pub fn energy<S: Real>(d: &DisorderMatrix<S>, v: &[S]) -> Result<S> {
    let q = d.quadratic_form(v)?;
    Ok(q / (S::c(2.0) * S::of_usize(d.n())))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundingTrace<S> {
    /// Input after clipping.
    pub z: Vec<S>,
    pub sigma: Vec<i8>,
    /// `zᵀ D z` before any step, then after each coordinate.
    pub objective: Vec<S>,
    pub order: Vec<usize>,
}

impl<S: Real> RoundingTrace<S> {
    pub fn sigma_real(&self) -> Vec<S> {
        self.sigma.iter().map(|&s| S::c(s as f64)).collect()
    }

    pub fn final_objective(&self) -> S {
        *self.objective.last().expect("nonempty trace")
    }

    pub fn is_monotone(&self) -> bool {
        self.objective.windows(2).all(|w| w[1] >= w[0])
    }
}

/// One pass over the coordinates in index order. Coordinates already at ±1
/// are kept; an interior `z_i` goes to the sign of its slope `2 (D z)_i`
/// (ties to +1), the objective being linear in `z_i` when the rest is fixed.
/// Each step adds `2 Δ (D z)_i ≥ 0`.
pub fn greedy_sign_round<S: Real>(z: &[S], d: &DisorderMatrix<S>) -> Result<RoundingTrace<S>> {
    let n = d.n();
    check_len(n, z.len())?;
    if let Some(i) = z.iter().position(|v| v.abs() > S::one() || v.is_nan()) {
        return Err(Error::Precondition(format!("z[{i}] outside [-1, 1]")));
    }
    let mut cur = z.to_vec();
    let mut dz = d.matvec(&cur)?;
    let mut obj: S = cur.iter().zip(&dz).map(|(a, b)| *a * *b).sum();
    let mut objective = Vec::with_capacity(n + 1);
    objective.push(obj);
    let two = S::c(2.0);

    // sparse bookkeeping: a = A z and the running sum of z
    let sparse = d.graph().map(|(g, _)| g.adjacency());
    let (mut a, mut total, mu, s) = match (&sparse, d.graph()) {
        (Some(csr), Some((_, dd))) => {
            let mut a = vec![S::zero(); n];
            csr.matvec(&cur, &mut a);
            let mu = dd / n as f64;
            (a, cur.iter().copied().sum::<S>(), S::c(mu), S::c((dd * (1.0 - mu)).sqrt()))
        }
        _ => (Vec::new(), S::zero(), S::zero(), S::one()),
    };

    for i in 0..n {
        if cur[i].abs() == S::one() {
            objective.push(obj);
            continue;
        }
        let slope = match &sparse {
            Some(_) => -(a[i] - mu * (total - cur[i])) / s,
            None => dz[i],
        };
        let target = if slope >= S::zero() { S::one() } else { -S::one() };
        let delta = target - cur[i];
        if delta != S::zero() {
            let gain = two * delta * slope;
            obj += gain.max(S::zero());
            cur[i] = target;
            match &sparse {
                Some(csr) => {
                    for &j in csr.neighbors(i) {
                        a[j as usize] += delta;
                    }
                    total += delta;
                }
                None => {
                    let data = d.dense_data().expect("dense payload");
                    let row = &data[i * n..(i + 1) * n];
                    for (v, r) in dz.iter_mut().zip(row) {
                        *v += delta * *r;
                    }
                }
            }
        }
        objective.push(obj);
    }
    let sigma = cur.iter().map(|v| if *v > S::zero() { 1i8 } else { -1i8 }).collect();
    Ok(RoundingTrace { z: z.to_vec(), sigma, objective, order: (0..n).collect() })
}

/// `σ(x, D)`: clip then round.
pub fn round<S: Real>(x: &[S], d: &DisorderMatrix<S>) -> Result<RoundingTrace<S>> {
    greedy_sign_round(&clip_to_cube(x), d)
}

fn check_signs(g: &SparseGraph, sigma: &[i8]) -> Result<()> {
    check_len(g.n(), sigma.len())?;
    if let Some(i) = sigma.iter().position(|s| *s != 1 && *s != -1) {
        return Err(Error::Domain(format!("sigma[{i}] = {} is not ±1", sigma[i])));
    }
    Ok(())
}

/// Number of edges crossing the partition.
pub fn cut_value(g: &SparseGraph, sigma: &[i8]) -> Result<u64> {
    check_signs(g, sigma)?;
    Ok(g.edges()
        .iter()
        .filter(|(i, j)| sigma[*i as usize] != sigma[*j as usize])
        .count() as u64)
}

/// `σᵀ A σ` for the 0/1 adjacency, in integers.
pub fn adjacency_form(g: &SparseGraph, sigma: &[i8]) -> Result<i64> {
    check_signs(g, sigma)?;
    Ok(g.edges()
        .iter()
        .map(|(i, j)| 2 * (sigma[*i as usize] as i64) * (sigma[*j as usize] as i64))
        .sum())
}

/// Checks `CUT = |E|/2 − σᵀAσ/4` in exact integer arithmetic.
pub fn cut_identity_holds(g: &SparseGraph, sigma: &[i8]) -> Result<bool> {
    let cut = cut_value(g, sigma)? as i64;
    let h = adjacency_form(g, sigma)?;
    Ok(4 * cut == 2 * g.num_edges() as i64 - h)
}

/// `(cut/n − d/4) / √(d/4)`.
pub fn cut_excess(cut: u64, n: usize, d: f64) -> f64 {
    (cut as f64 / n as f64 - d / 4.0) / (d / 4.0).sqrt()
}

/// One ±1 per line.
pub fn write_partition<W: Write>(sigma: &[i8], mut w: W) -> Result<()> {
    for s in sigma {
        writeln!(w, "{}", if *s > 0 { "+1" } else { "-1" })?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionReport {
    pub cut: u64,
    pub edges: usize,
    pub energy_before: f64,
    pub energy_after: f64,
    pub cube_distance: f64,
}
