use super::multi_index::{in_t_n2, MultiIndex};
use crate::disorder::Entries;
use crate::error::{check_len, Error, Result};
use crate::real::Real;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

/// Coefficients with absolute value below this are dropped after arithmetic.
pub const PRUNE: f64 = 1e-15;

/// Commutative ring operations used to run the same iteration on numbers
/// and on symbolic polynomials.
pub trait Ring<S: Real>: Clone {
    fn constant(c: S) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn scale(&self, c: S) -> Self;
    fn add_scaled(&mut self, other: &Self, c: S) {
        *self = self.add(&other.scale(c));
    }
}

impl<S: Real> Ring<S> for S {
    fn constant(c: S) -> Self {
        c
    }
    fn add(&self, other: &Self) -> Self {
        *self + *other
    }
    fn mul(&self, other: &Self) -> Self {
        *self * *other
    }
    fn scale(&self, c: S) -> Self {
        *self * c
    }
    fn add_scaled(&mut self, other: &Self, c: S) {
        *self += *other * c;
    }
}

/// Sparse polynomial in the entries `X_ij`, `i < j`, with a degree bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<S> {
    terms: BTreeMap<MultiIndex, S>,
    degree_bound: u32,
}

impl<S: Real> Polynomial<S> {
    pub fn zero(degree_bound: u32) -> Self {
        Self { terms: BTreeMap::new(), degree_bound }
    }

    pub fn constant(c: S) -> Self {
        let mut p = Self::zero(0);
        p.insert(MultiIndex::empty(), c);
        p
    }

    pub fn var(i: usize, j: usize) -> Self {
        let mut p = Self::zero(1);
        p.insert(MultiIndex::edge(i, j), S::one());
        p
    }

    pub fn from_terms(degree_bound: u32, terms: impl IntoIterator<Item = (MultiIndex, S)>) -> Result<Self> {
        let mut p = Self::zero(degree_bound);
        for (a, c) in terms {
            if a.l1() > degree_bound {
                return Err(Error::InvalidParameter(format!(
                    "monomial of degree {} exceeds bound {degree_bound}",
                    a.l1()
                )));
            }
            let e = p.terms.entry(a).or_insert(S::zero());
            *e += c;
        }
        p.prune();
        Ok(p)
    }

    fn insert(&mut self, a: MultiIndex, c: S) {
        if c.abs().f64() >= PRUNE {
            self.terms.insert(a, c);
        }
    }

    pub fn prune(&mut self) {
        self.terms.retain(|_, c| c.abs().f64() >= PRUNE);
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &S)> {
        self.terms.iter()
    }

    pub fn coeff(&self, a: &MultiIndex) -> S {
        self.terms.get(a).copied().unwrap_or(S::zero())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Deg(p) as carried by the polynomial (an upper bound on ‖α‖₁).
    pub fn degree_bound(&self) -> u32 {
        self.degree_bound
    }

    /// Largest ‖α‖₁ actually present.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|a| a.l1()).max().unwrap_or(0)
    }

    /// ‖p‖ = max |c_α|.
    pub fn norm(&self) -> S {
        self.terms.values().fold(S::zero(), |m, c| m.max(c.abs()))
    }

    pub fn max_node(&self) -> Option<usize> {
        self.terms.keys().filter_map(|a| a.max_node()).max()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.degree_bound = self.degree_bound.max(other.degree_bound);
        for (a, c) in &other.terms {
            *out.terms.entry(a.clone()).or_insert(S::zero()) += *c;
        }
        out.prune();
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-S::one()))
    }

    pub fn scale(&self, c: S) -> Self {
        let mut out = Self::zero(self.degree_bound);
        if c != S::zero() {
            for (a, v) in &self.terms {
                out.insert(a.clone(), *v * c);
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms: BTreeMap<MultiIndex, S> = BTreeMap::new();
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                *terms.entry(a.add(b)).or_insert(S::zero()) += *x * *y;
            }
        }
        let mut out = Self { terms, degree_bound: self.degree_bound + other.degree_bound };
        out.prune();
        debug_assert!(
            out.norm().f64()
                <= 2f64.powi(out.degree_bound as i32)
                    * self.norm().f64()
                    * other.norm().f64()
                    * (1.0 + 1e-9)
                    + 1e-300,
            "coefficient bound for products violated"
        );
        out
    }

    /// `X_ij · p`.
    pub fn mul_var(&self, i: usize, j: usize) -> Self {
        let mut out = Self::zero(self.degree_bound + 1);
        for (a, c) in &self.terms {
            out.terms.insert(a.times_edge(i, j), *c);
        }
        out
    }

    /// Restriction to monomials in 𝒯_{n,2,Deg(p)}.
    pub fn tree_project(&self) -> Self {
        let mut out = Self::zero(self.degree_bound);
        for (a, c) in &self.terms {
            if in_t_n2(a, self.degree_bound) {
                out.terms.insert(a.clone(), *c);
            }
        }
        out
    }

    /// Every monomial has a connected factor graph.
    pub fn is_connected(&self) -> bool {
        self.terms.keys().all(|a| a.is_connected())
    }

    /// Every monomial is in 𝒯_{n,2,Deg(p)}.
    pub fn is_tree_based(&self) -> bool {
        self.terms.keys().all(|a| in_t_n2(a, self.degree_bound))
    }

    /// Every monomial contains node `v` (`v ∈ p`).
    pub fn contains_node(&self, v: usize) -> bool {
        self.terms.keys().all(|a| a.contains_node(v))
    }

    pub fn eval<E: Entries<S> + ?Sized>(&self, d: &E) -> Result<S> {
        if let Some(m) = self.max_node() {
            if m >= d.dim() {
                return Err(Error::Index { index: m, n: d.dim() });
            }
        }
        Ok(self.eval_unchecked(|i, j| d.entry(i, j)))
    }

    /// Evaluate with an entry oracle; indices are not validated.
    pub fn eval_unchecked(&self, entry: impl Fn(usize, usize) -> S) -> S {
        let mut acc = S::zero();
        for (a, c) in &self.terms {
            let mut m = *c;
            for ((i, j), e) in a.entries() {
                m = m * entry(i, j).powi(e as i32);
            }
            acc += m;
        }
        acc
    }

    /// One term per line: `coeff i1 j1 e1 i2 j2 e2 ...`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (a, c) in &self.terms {
            write!(w, "{}", c.f64())?;
            for ((i, j), e) in a.entries() {
                write!(w, " {i} {j} {e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut terms = Vec::new();
        for (ln, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = t.split_whitespace().collect();
            if fields.len() % 3 != 1 {
                return Err(Error::Format(format!("line {}: expected coeff then triples", ln + 1)));
            }
            let bad = |e: String| Error::Format(format!("line {}: {e}", ln + 1));
            let c: f64 = fields[0].parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
            let mut entries = Vec::new();
            for tr in fields[1..].chunks(3) {
                let p = |s: &str| s.parse::<usize>().map_err(|e| bad(e.to_string()));
                entries.push(((p(tr[0])?, p(tr[1])?), p(tr[2])? as u32));
            }
            terms.push((MultiIndex::new(entries)?, S::c(c)));
        }
        let deg = terms.iter().map(|(a, _)| a.l1()).max().unwrap_or(0);
        Self::from_terms(deg, terms)
    }
}

impl<S: Real> Ring<S> for Polynomial<S> {
    fn constant(c: S) -> Self {
        Polynomial::constant(c)
    }
    fn add(&self, other: &Self) -> Self {
        Polynomial::add(self, other)
    }
    fn mul(&self, other: &Self) -> Self {
        Polynomial::mul(self, other)
    }
    fn scale(&self, c: S) -> Self {
        Polynomial::scale(self, c)
    }
    fn add_scaled(&mut self, other: &Self, c: S) {
        if c == S::zero() {
            return;
        }
        self.degree_bound = self.degree_bound.max(other.degree_bound);
        for (a, v) in &other.terms {
            *self.terms.entry(a.clone()).or_insert(S::zero()) += *v * c;
        }
        self.prune();
    }
}

/// Vector `(p_i)` of polynomials with per-entry rootedness flags.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialVector<S> {
    pub entries: Vec<Polynomial<S>>,
    pub rooted: Vec<bool>,
}

impl<S: Real> PolynomialVector<S> {
    /// Wrap polynomials and record `i ∈ p_i` for every entry.
    pub fn new(entries: Vec<Polynomial<S>>) -> Self {
        let rooted = entries.iter().enumerate().map(|(i, p)| p.contains_node(i)).collect();
        Self { entries, rooted }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn all_rooted(&self) -> bool {
        self.rooted.iter().all(|r| *r)
    }

    pub fn all_connected(&self) -> bool {
        self.entries.iter().all(|p| p.is_connected())
    }

    pub fn max_norm(&self) -> S {
        self.entries.iter().fold(S::zero(), |m, p| m.max(p.norm()))
    }

    pub fn total_terms(&self) -> usize {
        self.entries.iter().map(|p| p.len()).sum()
    }

    pub fn tree_project(&self) -> Self {
        Self::new(self.entries.iter().map(|p| p.tree_project()).collect())
    }

    pub fn eval_vec<E: Entries<S> + ?Sized>(&self, d: &E) -> Result<Vec<S>> {
        check_len(d.dim(), self.entries.len())?;
        self.entries.iter().map(|p| p.eval(d)).collect()
    }

    /// Entries separated by a line `## i`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, p) in self.entries.iter().enumerate() {
            writeln!(w, "## {i}")?;
            p.write_text(&mut w)?;
        }
        Ok(())
    }
}
