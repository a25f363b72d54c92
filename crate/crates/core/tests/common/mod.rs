#![allow(dead_code)]

use ldpglass::disorder::{center_rescale, sample_er, sample_goe, DisorderMatrix, SparseGraph};
use ldpglass::ldp::{in_t_n2, MultiIndex, Polynomial};
use ldpglass::rounding::{self, cut_identity_holds, cut_value};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connectivity and acyclicity of the factor graph by depth-first search
/// on an adjacency matrix; a back edge to a non-parent means a cycle.
pub fn brute_graph(a: &MultiIndex, nodes: usize) -> (bool, bool) {
    let mut adj = vec![vec![false; nodes]; nodes];
    let mut present = vec![false; nodes];
    for ((i, j), _) in a.entries() {
        adj[i][j] = true;
        adj[j][i] = true;
        present[i] = true;
        present[j] = true;
    }
    let verts: Vec<usize> = (0..nodes).filter(|v| present[*v]).collect();
    if verts.is_empty() {
        return (true, true);
    }
    let mut seen = vec![false; nodes];
    let mut acyclic = true;
    let mut stack = vec![(verts[0], usize::MAX)];
    seen[verts[0]] = true;
    while let Some((v, parent)) = stack.pop() {
        for w in 0..nodes {
            if !adj[v][w] || w == parent {
                continue;
            }
            if seen[w] {
                acyclic = false;
            } else {
                seen[w] = true;
                stack.push((w, v));
            }
        }
    }
    let connected = verts.iter().all(|v| seen[*v]);
    (connected, acyclic)
}

pub fn all_pairs(nodes: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..nodes {
        for j in (i + 1)..nodes {
            out.push((i, j));
        }
    }
    out
}

/// Random multi-index with up to `max_edges` distinct pairs, exponents in `1..=max_exp`.
pub fn random_index(r: &mut ChaCha8Rng, nodes: usize, max_edges: usize, max_exp: u32) -> MultiIndex {
    let pairs = all_pairs(nodes);
    let k = r.random_range(0..=max_edges.min(pairs.len()));
    let mut chosen = Vec::new();
    while chosen.len() < k {
        let p = pairs[r.random_range(0..pairs.len())];
        if !chosen.iter().any(|(q, _)| *q == p) {
            chosen.push((p, r.random_range(1..=max_exp)));
        }
    }
    MultiIndex::new(chosen).unwrap()
}

/// Random polynomial with `terms` draws of total degree at most `deg`.
pub fn random_poly(r: &mut ChaCha8Rng, nodes: usize, deg: u32, terms: usize) -> Polynomial<f64> {
    let mut out = Vec::new();
    while out.len() < terms {
        let a = random_index(r, nodes, deg as usize, deg.min(3));
        if a.l1() <= deg {
            out.push((a, 2.0 * r.random::<f64>() - 1.0));
        }
    }
    Polynomial::from_terms(deg, out).unwrap()
}

/// Random connected monomial: grow a walk from `start` over `edges` steps.
pub fn random_connected(r: &mut ChaCha8Rng, nodes: usize, start: usize, edges: usize) -> MultiIndex {
    let mut touched = vec![start];
    let mut a: Vec<((usize, usize), u32)> = Vec::new();
    for _ in 0..edges {
        let u = touched[r.random_range(0..touched.len())];
        let mut w = r.random_range(0..nodes);
        while w == u {
            w = r.random_range(0..nodes);
        }
        let key = (u.min(w), u.max(w));
        match a.iter_mut().find(|(k, _)| *k == key) {
            Some((_, e)) => *e += 1,
            None => a.push((key, 1)),
        }
        if !touched.contains(&w) {
            touched.push(w);
        }
    }
    MultiIndex::new(a).unwrap()
}

/// Dense symmetric zero-diagonal Gaussian matrix, row-major.
pub fn dense_gaussian(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, r);
            a[i * n + j] = z * scale;
            a[j * n + i] = z * scale;
        }
    }
    a
}

/// `Π X_ij^{e}` straight from the definition.
pub fn eval_monomial(a: &MultiIndex, x: &[f64], n: usize) -> f64 {
    a.entries().fold(1.0, |p, ((i, j), e)| p * x[i * n + j].powi(e as i32))
}

pub fn eval_poly(p: &Polynomial<f64>, x: &[f64], n: usize) -> f64 {
    p.terms().map(|(a, c)| c * eval_monomial(a, x, n)).sum()
}

/// Product norm and degree bounds, plus coefficient convolution against a
/// pairwise expansion.
pub fn product_case(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let nodes = 5;
    let (tp, tq) = (r.random_range(1..=15), r.random_range(1..=15));
    let p = random_poly(&mut r, nodes, 3, tp);
    let q = random_poly(&mut r, nodes, 3, tq);
    let pq = p.mul(&q);
    let bound = 2f64.powi((p.degree_bound() + q.degree_bound()) as i32) * p.norm() * q.norm();
    if pq.norm() > bound {
        return Err(format!("‖pq‖ = {} > {bound}", pq.norm()));
    }
    if pq.degree() > p.degree() + q.degree() {
        return Err("degree not additive".into());
    }
    let mut brute: std::collections::BTreeMap<MultiIndex, f64> = Default::default();
    for (a, c) in p.terms() {
        for (b, d) in q.terms() {
            *brute.entry(a.add(b)).or_insert(0.0) += c * d;
        }
    }
    for (a, c) in &brute {
        if (pq.coeff(a) - c).abs() > 1e-12 * (1.0 + c.abs()) {
            return Err(format!("coefficient of {a:?}"));
        }
    }
    if pq.terms().any(|(a, _)| !brute.contains_key(a)) {
        return Err("spurious monomial".into());
    }
    let x = dense_gaussian(&mut r, nodes, 1.0);
    let (ep, eq, epq) = (eval_poly(&p, &x, nodes), eval_poly(&q, &x, nodes), eval_poly(&pq, &x, nodes));
    if (ep * eq - epq).abs() > 1e-9 * (1.0 + epq.abs()) {
        return Err("evaluation does not distribute".into());
    }
    Ok(())
}

/// Sum bound with marker sets `S_ij = {i, j}`: every monomial of `p_ij` is
/// connected, has degree at most Δ and touches both `i` and `j`.
pub fn sum_case(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let nodes = r.random_range(4..=8);
    let delta = r.random_range(1..=4u32);
    let mut parts: std::collections::BTreeMap<(usize, usize), Vec<(MultiIndex, f64)>> = Default::default();
    for _ in 0..r.random_range(1..=60) {
        let i = r.random_range(0..nodes);
        let edges = r.random_range(1..=delta as usize);
        let a = random_connected(&mut r, nodes, i, edges);
        let others: Vec<usize> = a.vertices().into_iter().filter(|v| *v != i).collect();
        let j = others[r.random_range(0..others.len())];
        parts.entry((i.min(j), i.max(j))).or_default().push((a, 2.0 * r.random::<f64>() - 1.0));
    }
    let polys: Vec<Polynomial<f64>> =
        parts.into_values().map(|t| Polynomial::from_terms(delta, t).unwrap()).collect();
    let max = polys.iter().fold(0.0f64, |m, p| m.max(p.norm()));
    let sum = polys.iter().fold(Polynomial::zero(delta), |acc, p| acc.add(p));
    let bound = ((1.0 + delta as f64) / 2f64.sqrt()).powi(2) * max;
    if sum.norm() > bound * (1.0 + 1e-12) {
        return Err(format!("‖Σp‖ = {} > {bound}", sum.norm()));
    }
    Ok(())
}

/// Tree projection: linear, idempotent, and it kills `r·q` whenever `r` is
/// connected with `r^Tr = 0`.
pub fn projection_case(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let nodes = 6;
    let (tp, tq) = (r.random_range(1..=50), r.random_range(1..=50));
    let p = random_poly(&mut r, nodes, 4, tp);
    let q = random_poly(&mut r, nodes, 4, tq);
    let lhs = p.add(&q).tree_project();
    let rhs = p.tree_project().add(&q.tree_project());
    if lhs.sub(&rhs).norm() > 1e-12 {
        return Err("projection not linear".into());
    }
    let pt = p.tree_project();
    if pt.tree_project() != pt {
        return Err("projection not idempotent".into());
    }
    let mut terms = Vec::new();
    let want = r.random_range(1..=6);
    while terms.len() < want {
        let (start, edges) = (r.random_range(0..nodes), r.random_range(2..=5));
        let a = random_connected(&mut r, nodes, start, edges);
        if !ldpglass::ldp::in_t_n2(&a, 64) {
            terms.push((a, 2.0 * r.random::<f64>() - 1.0));
        }
    }
    let rr = Polynomial::from_terms(5, terms).unwrap();
    if !rr.is_connected() || !rr.tree_project().is_empty() {
        return Err("bad witness".into());
    }
    let prod = rr.mul(&q);
    if !prod.tree_project().is_empty() || !q.mul(&rr).tree_project().is_empty() {
        return Err("(rq)^Tr ≠ 0".into());
    }
    Ok(())
}

/// `E[g(√v Z)]` for standard normal `Z`, trapezoid rule on `[−12, 12]`.
pub fn gauss_mean(v: f64, g: impl Fn(f64) -> f64) -> f64 {
    let m = 24_000;
    let h = 24.0 / m as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    (0..=m)
        .map(|k| {
            let z = -12.0 + k as f64 * h;
            let w = if k == 0 || k == m { 0.5 } else { 1.0 };
            w * norm * (-z * z / 2.0).exp() * g(v.sqrt() * z)
        })
        .sum::<f64>()
        * h
}

/// Second moments of the tanh chain `f⁰ ≡ 1`, `f^t = tanh(u^t)`: `U₁` has
/// variance 1 and `E[U²_{t+1}] = E[tanh²(U_t)]`.
pub fn tanh_chain_variances(steps: usize) -> Vec<f64> {
    let mut v = vec![1.0];
    while v.len() < steps {
        let last = *v.last().unwrap();
        v.push(gauss_mean(last, |x| x.tanh().powi(2)));
    }
    v
}

/// `(t, (1/n) Σ (u_i^t)², oracle)` for `t = 1..=steps` on one GOE draw.
pub fn tanh_chain_run(n: usize, steps: usize, seed: u64) -> Vec<(usize, f64, f64)> {
    use ldpglass::amp::{run_amp, Coordinatewise, Scalar, Start};
    let d = ldpglass::disorder::sample_goe::<f64>(n, seed).unwrap();
    let f = Coordinatewise::new(Scalar::Tanh, Start::One, steps);
    let s = run_amp(&d, &f, vec![0.0; n], steps).unwrap();
    let want = tanh_chain_variances(steps);
    (1..=steps)
        .map(|t| (t, s.u[t].iter().map(|x| x * x).sum::<f64>() / n as f64, want[t - 1]))
        .collect()
}

/// Every multi-index on 5 nodes with at most 4 edges and exponents ≤ 3.
pub fn enumerate_small() -> Vec<MultiIndex> {
    let pairs = all_pairs(5);
    let mut out = Vec::new();
    fn rec(pairs: &[(usize, usize)], from: usize, left: usize, cur: &mut Vec<((usize, usize), u32)>, out: &mut Vec<MultiIndex>) {
        out.push(MultiIndex::new(cur.clone()).unwrap());
        if left == 0 {
            return;
        }
        for k in from..pairs.len() {
            for e in 1..=3 {
                cur.push((pairs[k], e));
                rec(pairs, k + 1, left - 1, cur, out);
                cur.pop();
            }
        }
    }
    rec(&pairs, 0, 4, &mut Vec::new(), &mut out);
    out
}

/// `classify` and `in_t_n2` against the brute-force graph routine.
pub fn classification_agrees(a: &MultiIndex) -> Result<(), String> {
    let (conn, acyclic) = brute_graph(a, 5);
    let c = a.classify();
    let max_exp = a.entries().map(|(_, e)| e).max().unwrap_or(0);
    let deg = a.entries().map(|(_, e)| e).sum::<u32>();
    if c.connected != conn || c.tree != (conn && acyclic) || c.max_exp != max_exp || c.deg != deg {
        return Err(format!("{a:?}: {c:?}"));
    }
    for delta in 0..=12 {
        if in_t_n2(a, delta) != (conn && acyclic && max_exp <= 2 && deg <= delta) {
            return Err(format!("{a:?} Δ={delta}"));
        }
    }
    Ok(())
}

fn quad(a: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    (0..n).map(|i| x[i] * (0..n).map(|j| a[i * n + j] * x[j]).sum::<f64>()).sum()
}

/// One randomized instance: rounding is monotone step by step, each
/// recorded objective matches a dense recomputation, and the cut identity
/// holds in integers.
pub fn rounding_instance(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.random_range(5..=120);
    let sparse = seed % 2 == 1;
    let (d, graph): (DisorderMatrix<f64>, Option<SparseGraph>) = if sparse {
        let dd = r.random_range(1.0..(n as f64 - 1.0).min(12.0));
        let g = sample_er(n, dd, seed).map_err(|e| e.to_string())?;
        (center_rescale(&g, dd).map_err(|e| e.to_string())?, Some(g))
    } else {
        (sample_goe(n, seed).map_err(|e| e.to_string())?, None)
    };
    let dense = d.densify(512).map_err(|e| e.to_string())?;
    let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.6..1.6)).collect();
    let tr = rounding::round(&x, &d).map_err(|e| e.to_string())?;
    if tr.objective.windows(2).any(|w| w[1] < w[0]) || !tr.is_monotone() {
        return Err("objective decreased".into());
    }
    // replay the order on the dense matrix
    let mut z = tr.z.clone();
    if (quad(&dense, &z) - tr.objective[0]).abs() > 1e-9 * (1.0 + tr.objective[0].abs()) {
        return Err("initial objective".into());
    }
    for (k, &i) in tr.order.iter().enumerate() {
        z[i] = tr.sigma[i] as f64;
        let q = quad(&dense, &z);
        if (q - tr.objective[k + 1]).abs() > 1e-9 * (1.0 + q.abs()) {
            return Err(format!("objective after step {k}"));
        }
    }
    if tr.sigma.iter().any(|s| *s != 1 && *s != -1) {
        return Err("non-sign output".into());
    }
    if let Some(g) = graph {
        for sigma in [tr.sigma.clone(), (0..n).map(|_| if r.random::<bool>() { 1 } else { -1 }).collect()] {
            let cut = cut_value(&g, &sigma).map_err(|e| e.to_string())?;
            let brute = g.edges().iter().filter(|(i, j)| sigma[*i as usize] != sigma[*j as usize]).count() as u64;
            let form: i64 = g.edges().iter().map(|(i, j)| 2 * (sigma[*i as usize] * sigma[*j as usize]) as i64).sum();
            if cut != brute || 4 * cut as i64 != 2 * g.num_edges() as i64 - form {
                return Err("cut identity".into());
            }
            if !cut_identity_holds(&g, &sigma).map_err(|e| e.to_string())? {
                return Err("cut_identity_holds disagrees".into());
            }
        }
    }
    Ok(())
}

