use std::io::{Read, Write};

use super::solver::GridSolution;
use crate::error::{Error, Result};

pub const SLAB_MAGIC: &[u8; 4] = b"LFK1";
pub const SLAB_VERSION: u32 = 1;

/// `t,p,u` rows in time-major order.
pub fn write_slab_csv<W: Write>(sol: &GridSolution, mut w: W) -> Result<()> {
    writeln!(w, "t,p,u")?;
    for (t, row) in sol.times.iter().zip(&sol.values) {
        for (i, u) in row.iter().enumerate() {
            writeln!(w, "{},{},{}", t, sol.grid.point(i), u)?;
        }
    }
    Ok(())
}

/// Magic, `u32` version, `u64` rows and cols, then little-endian `f64`
/// row-major. Times and grid travel in the run sidecar.
pub fn write_slab_bin<W: Write>(sol: &GridSolution, mut w: W) -> Result<()> {
    w.write_all(SLAB_MAGIC)?;
    w.write_all(&SLAB_VERSION.to_le_bytes())?;
    w.write_all(&(sol.rows() as u64).to_le_bytes())?;
    w.write_all(&(sol.grid.len as u64).to_le_bytes())?;
    for row in &sol.values {
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Decoded binary slab.
#[derive(Debug, Clone, PartialEq)]
pub struct Slab {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

pub fn read_slab_bin<R: Read>(mut r: R) -> Result<Slab> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SLAB_MAGIC {
        return Err(Error::Io("not an LFK1 slab".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != SLAB_VERSION {
        return Err(Error::Io(format!("unsupported slab version {version}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let rows = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let cols = u64::from_le_bytes(b8) as usize;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        r.read_exact(&mut b8)?;
        data.push(f64::from_le_bytes(b8));
    }
    Ok(Slab { rows, cols, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fk::{BoundaryData, ProblemSpec, RateFunction};
    use crate::levy::LevyModel;
    use crate::pide::{solve_pide, GridParams};

    #[test]
    fn binary_round_trip() {
        let spec = ProblemSpec::forward(LevyModel::brownian(1.0), RateFunction::quadratic(0.5), BoundaryData::One, 0.1);
        let sol = solve_pide(&spec, &GridParams::new(3.0, 31, 0.05)).unwrap();
        let mut buf = Vec::new();
        write_slab_bin(&sol, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"LFK1");
        let slab = read_slab_bin(&buf[..]).unwrap();
        assert_eq!((slab.rows, slab.cols), (sol.rows(), 31));
        assert_eq!(slab.data[31 + 5], sol.values[1][5]);
        let mut csv = Vec::new();
        write_slab_csv(&sol, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + sol.rows() * 31);
    }
}
