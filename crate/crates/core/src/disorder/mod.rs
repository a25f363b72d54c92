//! Disorder ensembles: dense GOE and the centered, rescaled Erdős–Rényi
//! adjacency matrix, both symmetric with a null diagonal.

mod io;

pub use io::{read_container, read_edge_list, write_container, write_edge_list};

use crate::error::{check_len, Error, Result};
use crate::real::Real;
use crate::rng;
use rand::Rng as _;
use rand_distr::{Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

/// Default size up to which a rescaled sparse matrix may be densified.
pub const DENSIFY_THRESHOLD: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    DenseGoe,
    RescaledSparse,
}

/// Read access to the entries of a symmetric matrix with zero diagonal.
pub trait Entries<S> {
    fn dim(&self) -> usize;
    fn entry(&self, i: usize, j: usize) -> S;
}

/// Simple undirected graph stored as a sorted list of pairs `i < j`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseGraph {
    n: usize,
    edges: Vec<(u32, u32)>,
    d: Option<f64>,
}

impl SparseGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("graph with zero nodes".into()));
        }
        if n > u32::MAX as usize {
            return Err(Error::InvalidDimension(format!("n = {n} exceeds u32 range")));
        }
        let mut es = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at node {a}")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if j >= n {
                return Err(Error::Index { index: j, n });
            }
            es.push((i as u32, j as u32));
        }
        es.sort_unstable();
        if es.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("duplicate edge".into()));
        }
        Ok(Self { n, edges: es, d: None })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Mean-degree parameter the graph was sampled with, if known.
    pub fn sampled_degree(&self) -> Option<f64> {
        self.d
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges.binary_search(&(a as u32, b as u32)).is_ok()
    }

    pub fn adjacency(&self) -> Csr {
        let mut deg = vec![0usize; self.n];
        for &(i, j) in &self.edges {
            deg[i as usize] += 1;
            deg[j as usize] += 1;
        }
        let mut offsets = vec![0usize; self.n + 1];
        for i in 0..self.n {
            offsets[i + 1] = offsets[i] + deg[i];
        }
        let mut fill = offsets.clone();
        let mut nbrs = vec![0u32; offsets[self.n]];
        for &(i, j) in &self.edges {
            nbrs[fill[i as usize]] = j;
            fill[i as usize] += 1;
            nbrs[fill[j as usize]] = i;
            fill[j as usize] += 1;
        }
        for i in 0..self.n {
            nbrs[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Csr { offsets, nbrs }
    }
}

/// Compressed adjacency rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    offsets: Vec<usize>,
    nbrs: Vec<u32>,
}

impl Csr {
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.nbrs[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// `A x` for the 0/1 adjacency matrix.
    pub fn matvec<S: Real>(&self, x: &[S], out: &mut [S]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = S::zero();
            for &j in self.neighbors(i) {
                acc += x[j as usize];
            }
            *o = acc;
        }
    }
}

#[derive(Clone, Debug)]
enum Payload<S> {
    Dense(Vec<S>),
    Sparse {
        graph: SparseGraph,
        csr: Csr,
        d: f64,
        mu: S,
        s: S,
    },
}

/// Symmetric, zero-diagonal disorder matrix.
#[derive(Clone, Debug)]
pub struct DisorderMatrix<S> {
    n: usize,
    payload: Payload<S>,
}

/// GOE sample: upper triangle i.i.d. N(0, 1/n), null diagonal.
pub fn sample_goe<S: Real>(n: usize, seed: u64) -> Result<DisorderMatrix<S>> {
    if n == 0 {
        return Err(Error::InvalidDimension("n = 0".into()));
    }
    let mut r = rng::stream(seed, "goe", 0);
    let sd = 1.0 / (n as f64).sqrt();
    let mut a = vec![S::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let z: f64 = StandardNormal.sample(&mut r);
            let v = S::c(z * sd);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    Ok(DisorderMatrix { n, payload: Payload::Dense(a) })
}

/// Erdős–Rényi graph G(n, d/n), pairs visited in lexicographic order with
/// geometric gaps.
pub fn sample_er(n: usize, d: f64, seed: u64) -> Result<SparseGraph> {
    if n == 0 {
        return Err(Error::InvalidDimension("n = 0".into()));
    }
    if !(d > 0.0 && d < n as f64) {
        return Err(Error::InvalidParameter(format!("need 0 < d < n, got d = {d}, n = {n}")));
    }
    let p = d / n as f64;
    let total = (n as u64) * (n as u64 - 1) / 2;
    let mut r = rng::stream(seed, "er", 0);
    let geo = Geometric::new(p).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut edges = Vec::with_capacity((total as f64 * p * 1.1) as usize + 16);
    let mut row = 0usize;
    let mut row_start = 0u64;
    let mut k = 0u64;
    loop {
        let gap: u64 = geo.sample(&mut r);
        k = match k.checked_add(gap) {
            Some(v) => v,
            None => break,
        };
        if k >= total {
            break;
        }
        while k >= row_start + (n - 1 - row) as u64 {
            row_start += (n - 1 - row) as u64;
            row += 1;
        }
        let col = row + 1 + (k - row_start) as usize;
        edges.push((row as u32, col as u32));
        k += 1;
    }
    Ok(SparseGraph { n, edges, d: Some(d) })
}

/// Centered and rescaled adjacency, stored implicitly.
pub fn center_rescale<S: Real>(g: &SparseGraph, d: f64) -> Result<DisorderMatrix<S>> {
    let n = g.n;
    if !(d > 0.0 && d < n as f64) {
        return Err(Error::InvalidParameter(format!("need 0 < d < n, got d = {d}, n = {n}")));
    }
    if let Some(d0) = g.d {
        if (d0 - d).abs() > 1e-12 * d.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "graph sampled with d = {d0}, rescaled with d = {d}"
            )));
        }
    }
    let mu = d / n as f64;
    let s = (d * (1.0 - mu)).sqrt();
    Ok(DisorderMatrix {
        n,
        payload: Payload::Sparse {
            graph: g.clone(),
            csr: g.adjacency(),
            d,
            mu: S::c(mu),
            s: S::c(s),
        },
    })
}

impl<S: Real> DisorderMatrix<S> {
    /// Dense matrix from row-major data; must be symmetric with zero diagonal.
    pub fn from_dense(n: usize, data: Vec<S>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("n = 0".into()));
        }
        check_len(n * n, data.len())?;
        for i in 0..n {
            if data[i * n + i] != S::zero() {
                return Err(Error::InvalidParameter(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::InvalidParameter(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { n, payload: Payload::Dense(data) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> Kind {
        match self.payload {
            Payload::Dense(_) => Kind::DenseGoe,
            Payload::Sparse { .. } => Kind::RescaledSparse,
        }
    }

    /// Graph and mean degree behind a rescaled sparse matrix.
    pub fn graph(&self) -> Option<(&SparseGraph, f64)> {
        match &self.payload {
            Payload::Sparse { graph, d, .. } => Some((graph, *d)),
            Payload::Dense(_) => None,
        }
    }

    pub fn dense_data(&self) -> Option<&[S]> {
        match &self.payload {
            Payload::Dense(a) => Some(a),
            Payload::Sparse { .. } => None,
        }
    }

    /// Implied entries of a rescaled sparse matrix: `(edge, non-edge)`.
    pub fn sparse_levels(&self) -> Option<(S, S)> {
        match &self.payload {
            Payload::Sparse { mu, s, .. } => Some((-(S::one() - *mu) / *s, *mu / *s)),
            Payload::Dense(_) => None,
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> S {
        if i == j {
            return S::zero();
        }
        match &self.payload {
            Payload::Dense(a) => a[i * self.n + j],
            Payload::Sparse { graph, mu, s, .. } => {
                let y = if graph.contains(i, j) { S::one() } else { S::zero() };
                -(y - *mu) / *s
            }
        }
    }

    /// Row-major dense copy; refused above `threshold`.
    pub fn densify(&self, threshold: usize) -> Result<Vec<S>> {
        if let Payload::Dense(a) = &self.payload {
            return Ok(a.clone());
        }
        if self.n > threshold {
            return Err(Error::Refused(format!(
                "densifying n = {} exceeds threshold {threshold}",
                self.n
            )));
        }
        let n = self.n;
        let mut out = vec![S::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.entry(i, j);
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[S]) -> Result<Vec<S>> {
        let mut out = vec![S::zero(); self.n];
        self.matvec_into(x, &mut out)?;
        Ok(out)
    }

    pub fn matvec_into(&self, x: &[S], out: &mut [S]) -> Result<()> {
        check_len(self.n, x.len())?;
        check_len(self.n, out.len())?;
        let n = self.n;
        match &self.payload {
            Payload::Dense(a) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &a[i * n..(i + 1) * n];
                    let mut acc = S::zero();
                    for (r, v) in row.iter().zip(x) {
                        acc += *r * *v;
                    }
                    *o = acc;
                }
            }
            Payload::Sparse { csr, mu, s, .. } => {
                csr.matvec(x, out);
                let total: S = x.iter().copied().sum();
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = -(*o - *mu * (total - xi)) / *s;
                }
            }
        }
        Ok(())
    }

    /// `xᵀ D x`.
    pub fn quadratic_form(&self, x: &[S]) -> Result<S> {
        let y = self.matvec(x)?;
        Ok(x.iter().zip(&y).map(|(a, b)| *a * *b).sum())
    }

    /// Power-iteration lower estimate of the operator norm. The returned
    /// value is the running maximum of `‖D x_k‖` over unit iterates, so it
    /// never decreases with `iters`.
    pub fn estimate_operator_norm(&self, iters: usize, seed: u64) -> Result<S> {
        if iters == 0 {
            return Err(Error::InvalidParameter("iters must be ≥ 1".into()));
        }
        let mut r = rng::stream(seed, "power", 0);
        let mut x: Vec<S> = (0..self.n)
            .map(|_| S::c(StandardNormal.sample(&mut r)))
            .collect();
        normalize(&mut x);
        let mut best = S::zero();
        let mut y = vec![S::zero(); self.n];
        for _ in 0..iters {
            self.matvec_into(&x, &mut y)?;
            let nrm = norm(&y);
            if nrm > best {
                best = nrm;
            }
            if nrm == S::zero() {
                break;
            }
            for (xi, yi) in x.iter_mut().zip(&y) {
                *xi = *yi / nrm;
            }
        }
        Ok(best)
    }
}

impl<S: Real> Entries<S> for DisorderMatrix<S> {
    fn dim(&self) -> usize {
        self.n
    }
    fn entry(&self, i: usize, j: usize) -> S {
        DisorderMatrix::entry(self, i, j)
    }
}

pub(crate) fn norm<S: Real>(x: &[S]) -> S {
    x.iter().map(|v| *v * *v).sum::<S>().sqrt()
}

fn normalize<S: Real>(x: &mut [S]) {
    let nrm = norm(x);
    if nrm > S::zero() {
        for v in x.iter_mut() {
            *v /= nrm;
        }
    }
}

/// Monte Carlo moment with its standard error.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub k: u32,
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// Estimate `E[Ŷ_ij^k]` from i.i.d. single-entry draws.
pub fn empirical_moments(d: f64, n: usize, k: u32, samples: u64, seed: u64) -> Result<MomentEstimate> {
    if !(1..=8).contains(&k) {
        return Err(Error::InvalidParameter(format!("k = {k} outside 1..=8")));
    }
    if samples < 10_000 {
        return Err(Error::InvalidParameter(format!("samples = {samples} < 1e4")));
    }
    if !(d > 0.0 && d < n as f64) {
        return Err(Error::InvalidParameter(format!("need 0 < d < n, got d = {d}, n = {n}")));
    }
    let mu = d / n as f64;
    let s = (d * (1.0 - mu)).sqrt();
    let on = (-(1.0 - mu) / s).powi(k as i32);
    let off = (mu / s).powi(k as i32);
    let mut r = rng::stream(seed, "moments", k as u64);
    let mut hits = 0u64;
    for _ in 0..samples {
        if r.random::<f64>() < mu {
            hits += 1;
        }
    }
    let ns = samples as f64;
    let frac = hits as f64 / ns;
    let mean = frac * on + (1.0 - frac) * off;
    // variance of a two-point variable with the observed frequency
    let var = frac * (1.0 - frac) * (on - off) * (on - off);
    Ok(MomentEstimate { k, mean, stderr: (var / ns).sqrt(), samples })
}
