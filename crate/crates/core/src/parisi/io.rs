//! Binary dump: magic `LDPP`, u32 version, f64 x_max, u64 n_x, f64 dt,
//! u64 gh_order, u64 atom count and (t, γ) pairs, f64 functional value,
//! u64 time-node count, the time nodes, then Φ and ∂Φ row-major by time.

use super::{GridParams, OrderParameter, ParisiSolution, Stepper};
use crate::error::{Error, Result};
use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use std::io::{Read, Write};

const MAGIC: &[u8; 4] = b"LDPP";
const VERSION: u32 = 1;

pub fn write_solution<W: Write>(s: &ParisiSolution, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    w.write_f64::<LE>(s.params.x_max)?;
    w.write_u64::<LE>(s.params.n_x as u64)?;
    w.write_f64::<LE>(s.params.dt)?;
    w.write_u64::<LE>(s.params.gh_order as u64)?;
    w.write_u64::<LE>(s.gamma.len() as u64)?;
    for &(t, g) in s.gamma.atoms() {
        w.write_f64::<LE>(t)?;
        w.write_f64::<LE>(g)?;
    }
    w.write_f64::<LE>(s.functional_value)?;
    w.write_u64::<LE>(s.ts.len() as u64)?;
    for t in &s.ts {
        w.write_f64::<LE>(*t)?;
    }
    for rows in [&s.phi, &s.dphi] {
        for row in rows.iter() {
            for v in row {
                w.write_f64::<LE>(*v)?;
            }
        }
    }
    Ok(())
}

pub fn read_solution<R: Read>(mut r: R) -> Result<ParisiSolution> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = r.read_u32::<LE>()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let params = GridParams {
        x_max: r.read_f64::<LE>()?,
        n_x: r.read_u64::<LE>()? as usize,
        dt: r.read_f64::<LE>()?,
        gh_order: r.read_u64::<LE>()? as usize,
    };
    let stepper = Stepper::new(&params)?;
    let k = r.read_u64::<LE>()? as usize;
    let mut atoms = Vec::with_capacity(k);
    for _ in 0..k {
        atoms.push((r.read_f64::<LE>()?, r.read_f64::<LE>()?));
    }
    let gamma = OrderParameter::new(atoms)?;
    let functional_value = r.read_f64::<LE>()?;
    let nt = r.read_u64::<LE>()? as usize;
    if nt == 0 || nt > 10_000_000 {
        return Err(Error::Format(format!("implausible time-node count {nt}")));
    }
    let mut ts = vec![0.0; nt];
    r.read_f64_into::<LE>(&mut ts)?;
    let mut read_rows = || -> Result<Vec<Vec<f64>>> {
        (0..nt)
            .map(|_| {
                let mut row = vec![0.0; params.n_x];
                r.read_f64_into::<LE>(&mut row)?;
                Ok(row)
            })
            .collect()
    };
    let phi = read_rows()?;
    let dphi = read_rows()?;
    Ok(ParisiSolution { params, gamma, ts, phi, dphi, functional_value, stepper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parisi::solve;

    #[test]
    fn round_trip() {
        let g = OrderParameter::new(vec![(0.5, 1.2)]).unwrap();
        let p = GridParams { n_x: 401, dt: 0.05, ..GridParams::default() };
        let s = solve(&g, &p).unwrap();
        let mut buf = Vec::new();
        write_solution(&s, &mut buf).unwrap();
        let back = read_solution(&buf[..]).unwrap();
        assert_eq!(back.ts, s.ts);
        assert_eq!(back.phi, s.phi);
        assert_eq!(back.dphi, s.dphi);
        assert_eq!(back.gamma, s.gamma);
        assert_eq!(back.functional_value, s.functional_value);
        buf[0] = b'X';
        assert!(read_solution(&buf[..]).is_err());
    }
}
