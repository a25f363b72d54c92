//! Binary container and text edge lists.
//!
//! Container layout (little endian): magic `LDPG`, u32 version, u8 kind
//! (0 dense, 1 sparse), u64 n, f64 d, then either u64 edge count followed by
//! u32 pairs, or n*n row-major f64 values.

use super::{center_rescale, DisorderMatrix, Kind, Payload, SparseGraph};
use crate::error::{Error, Result};
use crate::real::Real;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{BufRead, Read, Write};

const MAGIC: &[u8; 4] = b"LDPG";
const VERSION: u32 = 1;

pub fn write_container<S: Real, W: Write>(m: &DisorderMatrix<S>, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    match &m.payload {
        Payload::Dense(a) => {
            w.write_u8(0)?;
            w.write_u64::<LittleEndian>(m.n as u64)?;
            w.write_f64::<LittleEndian>(0.0)?;
            for v in a {
                w.write_f64::<LittleEndian>(v.f64())?;
            }
        }
        Payload::Sparse { graph, d, .. } => {
            w.write_u8(1)?;
            w.write_u64::<LittleEndian>(m.n as u64)?;
            w.write_f64::<LittleEndian>(*d)?;
            w.write_u64::<LittleEndian>(graph.edges.len() as u64)?;
            for &(i, j) in &graph.edges {
                w.write_u32::<LittleEndian>(i)?;
                w.write_u32::<LittleEndian>(j)?;
            }
        }
    }
    Ok(())
}

pub fn read_container<S: Real, R: Read>(mut r: R) -> Result<DisorderMatrix<S>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = match r.read_u8()? {
        0 => Kind::DenseGoe,
        1 => Kind::RescaledSparse,
        k => return Err(Error::Format(format!("unknown kind tag {k}"))),
    };
    let n = r.read_u64::<LittleEndian>()? as usize;
    let d = r.read_f64::<LittleEndian>()?;
    match kind {
        Kind::DenseGoe => {
            let mut a = Vec::with_capacity(n * n);
            for _ in 0..n * n {
                a.push(S::c(r.read_f64::<LittleEndian>()?));
            }
            DisorderMatrix::from_dense(n, a)
        }
        Kind::RescaledSparse => {
            let m = r.read_u64::<LittleEndian>()? as usize;
            let mut edges = Vec::with_capacity(m);
            for _ in 0..m {
                let i = r.read_u32::<LittleEndian>()? as usize;
                let j = r.read_u32::<LittleEndian>()? as usize;
                edges.push((i, j));
            }
            let g = SparseGraph::new(n, edges)?;
            center_rescale(&g, d)
        }
    }
}

/// One `i j` pair per line, 0-indexed.
pub fn write_edge_list<W: Write>(g: &SparseGraph, mut w: W) -> Result<()> {
    for &(i, j) in &g.edges {
        writeln!(w, "{i} {j}")?;
    }
    Ok(())
}

/// Parse an edge list; blank lines and `#` comments are skipped.
pub fn read_edge_list<R: BufRead>(r: R, n: usize) -> Result<SparseGraph> {
    let mut edges = Vec::new();
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut it = t.split_whitespace();
        let mut next = || -> Result<usize> {
            it.next()
                .ok_or_else(|| Error::Format(format!("line {}: expected two indices", ln + 1)))?
                .parse::<usize>()
                .map_err(|e| Error::Format(format!("line {}: {e}", ln + 1)))
        };
        let i = next()?;
        let j = next()?;
        edges.push((i, j));
    }
    SparseGraph::new(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{sample_er, sample_goe};

    #[test]
    fn container_round_trip() {
        let m = sample_goe::<f64>(7, 2).unwrap();
        let mut buf = Vec::new();
        write_container(&m, &mut buf).unwrap();
        let back: DisorderMatrix<f64> = read_container(&buf[..]).unwrap();
        assert_eq!(back.dense_data(), m.dense_data());

        let g = sample_er(40, 4.0, 3).unwrap();
        let s = center_rescale::<f64>(&g, 4.0).unwrap();
        let mut buf = Vec::new();
        write_container(&s, &mut buf).unwrap();
        let back: DisorderMatrix<f64> = read_container(&buf[..]).unwrap();
        assert_eq!(back.graph().unwrap().0.edges(), g.edges());
        assert_eq!(back.graph().unwrap().1, 4.0);
        buf[0] = b'X';
        assert!(read_container::<f64, _>(&buf[..]).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let g = sample_er(30, 3.0, 1).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        let back = read_edge_list(&buf[..], 30).unwrap();
        assert_eq!(back.edges(), g.edges());
        assert!(read_edge_list("0 0\n".as_bytes(), 3).is_err());
        assert!(read_edge_list("0 5\n".as_bytes(), 3).is_err());
        assert!(read_edge_list("0 1\n1 0\n".as_bytes(), 3).is_err());
    }
}
