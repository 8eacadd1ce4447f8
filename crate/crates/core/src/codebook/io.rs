//! Little-endian binary codebook files.
//!
//! Layout:
//!
//! ```text
//! magic "RISJRCCB", u32 version
//! u64 D, u64 n_axis, f64 spacing, f64 v_bx, f64 v_by, f64 v_ux, f64 v_uy
//! f64 x D                       grid points
//! u64 N_s, u64 x N_s            schedule L_s
//! per stage, x beams then y beams, 2^s each:
//!   u64 L_s, u64 iterations, f64 residual, f64 normalized residual,
//!   (f64 re, f64 im) x n_axis
//! u64 warning count, per warning: u64 stage, u8 axis, u64 index, f64 residual
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array1;
use num_complex::Complex;

use super::{Axis, AxisBeam, Codebook, DesignWarning, Grid, StageBook};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAGIC: &[u8; 8] = b"RISJRCCB";
const VERSION: u32 = 1;
// guards allocation on corrupt headers
const MAX_DIM: u64 = 1 << 20;

fn put_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_dim<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = get_u64(r)?;
    if v > MAX_DIM {
        return Err(Error::CodebookFormat(format!("{what} = {v} is implausibly large")));
    }
    Ok(v as usize)
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn write_codebook<T: Real, W: Write>(cb: &Codebook<T>, w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    put_u64(w, cb.grid.len() as u64)?;
    put_u64(w, cb.n_axis as u64)?;
    for v in [cb.spacing, cb.v_b.0, cb.v_b.1, cb.v_u.0, cb.v_u.1] {
        put_f64(w, v.to_f64_lossy())?;
    }
    for &p in cb.grid.points() {
        put_f64(w, p.to_f64_lossy())?;
    }
    put_u64(w, cb.schedule.len() as u64)?;
    for &l in &cb.schedule {
        put_u64(w, l as u64)?;
    }
    for stage in &cb.stages {
        for beam in stage.x_beams.iter().chain(&stage.y_beams) {
            put_u64(w, beam.sensing_len as u64)?;
            put_u64(w, beam.iterations as u64)?;
            put_f64(w, beam.residual.to_f64_lossy())?;
            put_f64(w, beam.normalized_residual.to_f64_lossy())?;
            for z in &beam.w {
                put_f64(w, z.re.to_f64_lossy())?;
                put_f64(w, z.im.to_f64_lossy())?;
            }
        }
    }
    put_u64(w, cb.warnings.len() as u64)?;
    for warn in &cb.warnings {
        put_u64(w, warn.stage as u64)?;
        w.write_all(&[matches!(warn.axis, Axis::Y) as u8])?;
        put_u64(w, warn.index as u64)?;
        put_f64(w, warn.normalized_residual)?;
    }
    Ok(())
}

pub fn read_codebook<T: Real, R: Read>(r: &mut R) -> Result<Codebook<T>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::CodebookFormat("not a codebook file (bad magic)".into()));
    }
    let mut vb = [0u8; 4];
    r.read_exact(&mut vb)?;
    let version = u32::from_le_bytes(vb);
    if version != VERSION {
        return Err(Error::CodebookFormat(format!("unsupported codebook version {version}")));
    }
    let d = get_dim(r, "grid size")?;
    let n_axis = get_dim(r, "axis length")?;
    let spacing = T::lit(get_f64(r)?);
    let v_b = (T::lit(get_f64(r)?), T::lit(get_f64(r)?));
    let v_u = (T::lit(get_f64(r)?), T::lit(get_f64(r)?));
    let points = (0..d).map(|_| get_f64(r).map(T::lit)).collect::<Result<Vec<T>>>()?;
    let grid = Grid::from_points(points).map_err(|e| Error::CodebookFormat(e.to_string()))?;
    let n_stages = get_dim(r, "stage count")?;
    if n_stages >= 32 {
        return Err(Error::CodebookFormat(format!("{n_stages} stages is implausibly many")));
    }
    let schedule = (0..n_stages).map(|_| get_dim(r, "sensing length")).collect::<Result<Vec<_>>>()?;
    let mut stages = Vec::with_capacity(n_stages);
    for (si, &l_s) in schedule.iter().enumerate() {
        let s = si + 1;
        let mut axes = [Vec::new(), Vec::new()];
        for beams in &mut axes {
            for _ in 0..(1usize << s) {
                let sensing_len = get_dim(r, "beam sensing length")?;
                if sensing_len != l_s || sensing_len > n_axis {
                    return Err(Error::CodebookFormat(format!(
                        "stage {s} beam has sensing length {sensing_len}, schedule says {l_s}"
                    )));
                }
                let iterations = get_dim(r, "iterations")?;
                let residual = T::lit(get_f64(r)?);
                let normalized_residual = T::lit(get_f64(r)?);
                let mut w = Array1::from_elem(n_axis, Complex::new(T::zero(), T::zero()));
                for z in w.iter_mut() {
                    *z = Complex::new(T::lit(get_f64(r)?), T::lit(get_f64(r)?));
                }
                beams.push(AxisBeam {
                    w,
                    sensing_len,
                    residual,
                    normalized_residual,
                    iterations,
                });
            }
        }
        let [x_beams, y_beams] = axes;
        stages.push(StageBook {
            stage: s,
            sensing_len: l_s,
            comm_len: n_axis - l_s,
            x_beams,
            y_beams,
        });
    }
    let n_warn = get_dim(r, "warning count")?;
    let mut warnings = Vec::with_capacity(n_warn);
    for _ in 0..n_warn {
        let stage = get_dim(r, "warning stage")?;
        let mut axis = [0u8; 1];
        r.read_exact(&mut axis)?;
        let index = get_dim(r, "warning index")?;
        warnings.push(DesignWarning {
            stage,
            axis: if axis[0] == 0 { Axis::X } else { Axis::Y },
            index,
            normalized_residual: get_f64(r)?,
        });
    }
    Ok(Codebook {
        grid,
        n_axis,
        spacing,
        v_b,
        v_u,
        schedule,
        stages,
        warnings,
    })
}

pub fn save<T: Real>(cb: &Codebook<T>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_codebook(cb, &mut w)?;
    Ok(w.flush()?)
}

pub fn load<T: Real>(path: &Path) -> Result<Codebook<T>> {
    read_codebook(&mut BufReader::new(File::open(path)?))
}
