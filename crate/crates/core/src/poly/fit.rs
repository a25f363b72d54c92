//! Least-squares Hermite fits of a denoiser family.
//!
//! Each `f^t` is fitted on the Gaussian law of its arguments. The arguments
//! are first rotated onto the leading eigenvectors of `E[∇f ∇fᵀ]`; in
//! rotated orthonormal coordinates the tensor Hermite basis stays
//! orthonormal, so the fit is still a Hermite expansion, with the total
//! degree spent on the directions the function actually varies in.

use super::family::{hermite_normalized, PolyDenoiserFamily, PolyStep};
use crate::amp::{DenoiserFamily, StateEvolution};
use crate::error::{Error, Result};
use crate::rng;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Starting total degree Δ_fit.
    pub degree: u32,
    /// Escalation cap.
    pub max_degree: u32,
    /// Target L² residual η.
    pub eta: f64,
    /// Number of directions kept per step.
    pub rank: usize,
    /// Standard deviation of the training law; values above 1 keep the
    /// fitted polynomial tame in the tails.
    pub inflation: f64,
    pub samples: usize,
    /// Tolerance on `|Q_tt − 1|` for the identity-covariance precondition.
    pub identity_tol: f64,
    /// Clamp on frame coordinates at evaluation, in units of the training
    /// standard deviation; `None` keeps the bare polynomial.
    pub frame_clamp: Option<f64>,
    /// Clip each step's output to the largest `|f^t|` seen while fitting.
    pub bound_output: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { degree: 21, max_degree: 21, eta: 0.02, rank: 2, inflation: 1.4, samples: 100_000, identity_tol: 0.1, frame_clamp: Some(4.0), bound_output: true }
    }
}

/// Multi-indices over `r` coordinates with total degree at most `deg`,
/// in graded order.
pub fn graded_indices(r: usize, deg: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=deg {
        let mut cur = vec![0u32; r];
        fill(&mut out, &mut cur, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, left: u32) {
    if pos + 1 >= cur.len() {
        if !cur.is_empty() {
            cur[pos] = left;
            out.push(cur.clone());
        } else if left == 0 {
            out.push(vec![]);
        }
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k;
        fill(out, cur, pos + 1, left - k);
    }
    cur[pos] = 0;
}

/// Fit with default options apart from degree and target.
pub fn fit_poly_denoisers<F: DenoiserFamily<f64>>(
    f: &F,
    se: &StateEvolution,
    delta_fit: u32,
    eta: f64,
    samples: usize,
    seed: u64,
) -> Result<PolyDenoiserFamily> {
    let opts = FitOptions { degree: delta_fit, max_degree: delta_fit.max(FitOptions::default().max_degree), eta, samples, ..Default::default() };
    fit_poly_denoisers_with(f, se, &opts, seed)
}

pub fn fit_poly_denoisers_with<F: DenoiserFamily<f64>>(
    f: &F,
    se: &StateEvolution,
    opts: &FitOptions,
    seed: u64,
) -> Result<PolyDenoiserFamily> {
    let horizon = f.horizon();
    if se.q.len() < horizon + 1 {
        return Err(Error::DimensionMismatch { expected: horizon + 1, got: se.q.len() });
    }
    for t in 1..=horizon {
        if (se.q[t][t] - 1.0).abs() > opts.identity_tol {
            return Err(Error::Precondition(format!("Q_{t}{t} = {:.4} is not close to 1; rescale first", se.q[t][t])));
        }
    }
    if opts.samples < 1000 || opts.rank == 0 || opts.inflation <= 0.0 {
        return Err(Error::InvalidParameter(format!("bad fit options {opts:?}")));
    }
    let use_init = f.uses_init() && se.init_var > 0.0;
    let mut steps = Vec::with_capacity(horizon + 1);
    let mut lip: f64 = 0.0;
    for t in 0..=horizon {
        let mut args: Vec<usize> = (1..=t).collect();
        let mut scale = vec![1.0; t];
        if use_init {
            args.insert(0, 0);
            scale.insert(0, se.init_var.sqrt());
        }
        let step = fit_step(f, t, &args, &scale, opts, seed)?;
        lip = lip.max(step.1);
        steps.push(step.0);
    }
    let weights = (0..=horizon).map(|t| f.candidate_weight(t)).collect();
    let mut fam = PolyDenoiserFamily::new(steps, weights)?;
    fam.eta = opts.eta;
    fam.lipschitz_probe = lip;
    fam.truncation = f.truncation();
    Ok(fam)
}

fn fit_step<F: DenoiserFamily<f64>>(
    f: &F,
    t: usize,
    args: &[usize],
    scale: &[f64],
    opts: &FitOptions,
    seed: u64,
) -> Result<(PolyStep, f64)> {
    let k = args.len();
    let n = opts.samples;
    let mut hist = vec![0.0; t + 1];
    let mut grad = vec![0.0; t + 1];
    if k == 0 {
        let c = f.eval(t, &hist);
        return Ok((PolyStep::constant(c), 0.0));
    }
    // held-out standard samples: values and standardized gradients
    let mut r = rng::stream(seed, "fit_standard", t as u64);
    let mut z = vec![0.0; n * k];
    let mut y = vec![0.0; n];
    let mut c = DMatrix::<f64>::zeros(k, k);
    for s in 0..n {
        for a in 0..k {
            let v: f64 = StandardNormal.sample(&mut r);
            z[s * k + a] = v;
            hist[args[a]] = v * scale[a];
        }
        y[s] = f.eval_grad(t, &hist, &mut grad);
        for a in 0..k {
            let ga = grad[args[a]] * scale[a];
            for b in 0..=a {
                c[(a, b)] += ga * grad[args[b]] * scale[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            c[(b, a)] = c[(a, b)];
        }
    }
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let rank = opts.rank.min(k);
    // rows of w are orthonormal directions in standardized coordinates
    let w: Vec<Vec<f64>> = order[..rank].iter().map(|&i| (0..k).map(|a| eig.eigenvectors[(a, i)]).collect()).collect();
    let frame: Vec<Vec<f64>> = w.iter().map(|row| row.iter().zip(scale).map(|(x, s)| x / s).collect()).collect();

    // training samples from the inflated law
    let mut r = rng::stream(seed, "fit_train", t as u64);
    let mut zt = vec![0.0; n * k];
    let mut yt = vec![0.0; n];
    for s in 0..n {
        for a in 0..k {
            let v: f64 = StandardNormal.sample(&mut r);
            zt[s * k + a] = v * opts.inflation;
            hist[args[a]] = zt[s * k + a] * scale[a];
        }
        yt[s] = f.eval(t, &hist);
    }
    let project = |zz: &[f64], s: usize| -> Vec<f64> {
        w.iter().map(|row| row.iter().enumerate().map(|(a, x)| x * zz[s * k + a]).sum()).collect()
    };
    let py: Vec<Vec<f64>> = (0..n).map(|s| project(&z, s)).collect();
    let pt: Vec<Vec<f64>> = (0..n).map(|s| project(&zt, s)).collect();

    let ymax = y.iter().chain(&yt).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut degree = opts.degree;
    loop {
        let idx = graded_indices(rank, degree);
        let coef = least_squares(&pt, &yt, &idx, degree)?;
        let mut step = PolyStep {
            args: args.to_vec(),
            frame: frame.clone(),
            terms: idx.into_iter().zip(coef).collect(),
            degree,
            residual: 0.0,
            clamp: opts.frame_clamp.map(|k| k * opts.inflation),
            bound: opts.bound_output.then_some(ymax),
        };
        let b = step.bound.unwrap_or(f64::INFINITY);
        let c = step.clamp.unwrap_or(f64::INFINITY);
        let mut h = Vec::new();
        let mut feats = vec![Vec::new(); rank];
        let mut sq = 0.0;
        for s in 0..n {
            for (rr, v) in py[s].iter().enumerate() {
                hermite_normalized(v.clamp(-c, c), degree as usize, &mut h);
                feats[rr].clone_from(&h);
            }
            let q: f64 = step
                .terms
                .iter()
                .map(|(m, c)| m.iter().enumerate().fold(*c, |p, (rr, &e)| p * feats[rr][e as usize]))
                .sum();
            sq += (q.clamp(-b, b) - y[s]).powi(2);
        }
        step.residual = (sq / n as f64).sqrt();
        if step.residual <= opts.eta || degree >= opts.max_degree.min(64) {
            if step.residual > opts.eta {
                return Err(Error::Approximation { step: t, residual: step.residual, target: opts.eta, degree: degree as usize });
            }
            // gradient size on a few standard probes
            let mut lip: f64 = 0.0;
            let mut g = vec![0.0; t + 1];
            for s in 0..n.min(2000) {
                for a in 0..k {
                    hist[args[a]] = z[s * k + a] * scale[a];
                }
                step.eval_grad(&hist, &mut g);
                lip = lip.max(g.iter().map(|x| x * x).sum::<f64>().sqrt());
            }
            return Ok((step, lip));
        }
        degree += 1;
    }
}

fn least_squares(pts: &[Vec<f64>], y: &[f64], idx: &[Vec<u32>], degree: u32) -> Result<Vec<f64>> {
    let p = idx.len();
    let rank = pts.first().map_or(0, |v| v.len());
    let mut ata = vec![0.0; p * p];
    let mut aty = vec![0.0; p];
    let mut h = Vec::new();
    let mut feats = vec![Vec::new(); rank];
    let mut row = vec![0.0; p];
    for (x, &yy) in pts.iter().zip(y) {
        for (r, v) in x.iter().enumerate() {
            hermite_normalized(*v, degree as usize, &mut h);
            feats[r].clone_from(&h);
        }
        for (j, m) in idx.iter().enumerate() {
            row[j] = m.iter().enumerate().fold(1.0, |acc, (r, &e)| acc * feats[r][e as usize]);
        }
        for i in 0..p {
            let ri = row[i];
            aty[i] += ri * yy;
            let base = i * p;
            for j in 0..=i {
                ata[base + j] += ri * row[j];
            }
        }
    }
    let mut m = DMatrix::<f64>::zeros(p, p);
    let mut trace = 0.0;
    for i in 0..p {
        for j in 0..=i {
            m[(i, j)] = ata[i * p + j];
            m[(j, i)] = ata[i * p + j];
        }
        trace += ata[i * p + i];
    }
    let rhs = DVector::from_vec(aty);
    let mut ridge = 1e-12 * trace / p as f64;
    for _ in 0..8 {
        let mut mm = m.clone();
        for i in 0..p {
            mm[(i, i)] += ridge;
        }
        if let Some(ch) = mm.cholesky() {
            return Ok(ch.solve(&rhs).iter().copied().collect());
        }
        ridge *= 100.0;
    }
    Err(Error::Domain("normal equations are singular".into()))
}
