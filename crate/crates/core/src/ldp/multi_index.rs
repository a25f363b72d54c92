use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Exponent map α over unordered pairs `i < j`, stored sorted by pair.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<(u32, u32, u32)>);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub connected: bool,
    pub tree: bool,
    pub max_exp: u32,
    pub deg: u32,
    pub support: usize,
    pub vertices: Vec<usize>,
}

impl MultiIndex {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Build from `((i, j), e)` entries; repeated pairs add up, zero
    /// exponents are dropped.
    pub fn new(entries: impl IntoIterator<Item = ((usize, usize), u32)>) -> Result<Self> {
        let mut v: Vec<(u32, u32, u32)> = Vec::new();
        for ((a, b), e) in entries {
            if a == b {
                return Err(Error::InvalidParameter(format!("diagonal pair ({a},{a})")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if e > 0 {
                v.push((i as u32, j as u32, e));
            }
        }
        v.sort_unstable();
        let mut out: Vec<(u32, u32, u32)> = Vec::with_capacity(v.len());
        for (i, j, e) in v {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += e,
                _ => out.push((i, j, e)),
            }
        }
        Ok(Self(out))
    }

    pub fn edge(i: usize, j: usize) -> Self {
        Self::new([((i, j), 1)]).expect("off-diagonal pair")
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), u32)> + '_ {
        self.0.iter().map(|&(i, j, e)| ((i as usize, j as usize), e))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponent(&self, i: usize, j: usize) -> u32 {
        let (a, b) = if i < j { (i as u32, j as u32) } else { (j as u32, i as u32) };
        match self.0.binary_search_by(|t| (t.0, t.1).cmp(&(a, b))) {
            Ok(k) => self.0[k].2,
            Err(_) => 0,
        }
    }

    /// ‖α‖₁
    pub fn l1(&self) -> u32 {
        self.0.iter().map(|t| t.2).sum()
    }

    /// ‖α‖₀
    pub fn l0(&self) -> usize {
        self.0.len()
    }

    pub fn max_exp(&self) -> u32 {
        self.0.iter().map(|t| t.2).max().unwrap_or(0)
    }

    pub fn max_node(&self) -> Option<usize> {
        self.0.iter().map(|t| t.1 as usize).max()
    }

    /// V_α, sorted.
    pub fn vertices(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .0
            .iter()
            .flat_map(|t| [t.0 as usize, t.1 as usize])
            .collect();
        set.into_iter().collect()
    }

    /// Node membership; the constant monomial contains every node.
    pub fn contains_node(&self, v: usize) -> bool {
        self.0.is_empty() || self.0.iter().any(|t| t.0 as usize == v || t.1 as usize == v)
    }

    /// Exponent-wise sum (monomial product).
    pub fn add(&self, other: &Self) -> Self {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut p, mut q) = (0, 0);
        while p < a.len() && q < b.len() {
            let ka = (a[p].0, a[p].1);
            let kb = (b[q].0, b[q].1);
            if ka < kb {
                out.push(a[p]);
                p += 1;
            } else if kb < ka {
                out.push(b[q]);
                q += 1;
            } else {
                out.push((ka.0, ka.1, a[p].2 + b[q].2));
                p += 1;
                q += 1;
            }
        }
        out.extend_from_slice(&a[p..]);
        out.extend_from_slice(&b[q..]);
        Self(out)
    }

    /// Multiply by the single variable `X_ij`.
    pub fn times_edge(&self, i: usize, j: usize) -> Self {
        let (a, b) = if i < j { (i as u32, j as u32) } else { (j as u32, i as u32) };
        let mut v = self.0.clone();
        match v.binary_search_by(|t| (t.0, t.1).cmp(&(a, b))) {
            Ok(k) => v[k].2 += 1,
            Err(k) => v.insert(k, (a, b, 1)),
        }
        Self(v)
    }

    /// Factor-graph classification. Connectivity by union–find over V_α;
    /// a connected graph is a tree iff |E| = |V| − 1.
    pub fn classify(&self) -> Classification {
        let vertices = self.vertices();
        let mut parent: Vec<usize> = (0..vertices.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let idx = |v: u32| vertices.binary_search(&(v as usize)).expect("vertex");
        let mut components = vertices.len();
        for &(i, j, _) in &self.0 {
            let (a, b) = (find(&mut parent, idx(i)), find(&mut parent, idx(j)));
            if a != b {
                parent[a] = b;
                components -= 1;
            }
        }
        let connected = components <= 1;
        let tree = connected && (self.0.is_empty() || self.0.len() + 1 == vertices.len());
        Classification {
            connected,
            tree,
            max_exp: self.max_exp(),
            deg: self.l1(),
            support: self.l0(),
            vertices,
        }
    }

    pub fn is_connected(&self) -> bool {
        self.classify().connected
    }
}

/// Membership in 𝒯_{n,2,Δ}: tree, exponents at most 2, total degree ≤ Δ.
pub fn in_t_n2(a: &MultiIndex, delta: u32) -> bool {
    a.max_exp() <= 2 && a.l1() <= delta && a.classify().tree
}
