use std::collections::BTreeMap;
use std::io::{Read, Write};

use num_complex::Complex64;

use super::grid::Grid;
use super::series::FourierSeries;
use crate::error::{Error, Result};

pub const FTS_MAGIC: &[u8; 4] = b"FTS1";
const FLAG_HERMITIAN: u32 = 1;
const FLAG_ONE_OVER_N: u32 = 2;

/// One coefficient block: a series, its frequency, and free-form metadata
/// (`role`, `rows`, `cols`, model parameters, ...).
#[derive(Clone, Debug)]
pub struct FtsBlock {
    pub series: FourierSeries,
    pub omega: Vec<f64>,
    pub meta: BTreeMap<String, String>,
}

impl FtsBlock {
    pub fn new(series: FourierSeries, omega: Vec<f64>) -> Self {
        FtsBlock { series, omega, meta: BTreeMap::new() }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta.get(key).and_then(|v| v.parse().ok())
    }
}

pub fn write_fts<W: Write>(w: &mut W, block: &FtsBlock) -> Result<()> {
    let s = &block.series;
    let grid = s.grid();
    w.write_all(FTS_MAGIC)?;
    w.write_all(&(grid.ndim() as u32).to_le_bytes())?;
    w.write_all(&(s.dim_range() as u32).to_le_bytes())?;
    for &n in grid.dims() {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    for &o in &block.omega {
        w.write_all(&o.to_le_bytes())?;
    }
    w.write_all(&(FLAG_HERMITIAN | FLAG_ONE_OVER_N).to_le_bytes())?;
    let mut meta = block.meta.clone();
    meta.insert("rows".into(), s.rows().to_string());
    meta.insert("cols".into(), s.cols().to_string());
    let text: String = meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    w.write_all(&(text.len() as u32).to_le_bytes())?;
    w.write_all(text.as_bytes())?;
    for z in s.coeffs() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Reads one block; `Ok(None)` at a clean end of stream.
pub fn read_fts<R: Read>(r: &mut R) -> Result<Option<FtsBlock>> {
    let mut magic = [0u8; 4];
    match r.read(&mut magic[..1])? {
        0 => return Ok(None),
        _ => r.read_exact(&mut magic[1..])?,
    }
    if &magic != FTS_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let l = read_u32(r)? as usize;
    let m = read_u32(r)? as usize;
    if l == 0 || l > 8 || m == 0 || m > 4096 {
        return Err(Error::Format(format!("implausible header l={l} m={m}")));
    }
    let dims: Vec<usize> = (0..l).map(|_| read_u32(r).map(|x| x as usize)).collect::<Result<_>>()?;
    let omega: Vec<f64> = (0..l).map(|_| read_f64(r)).collect::<Result<_>>()?;
    let flags = read_u32(r)?;
    if flags != FLAG_HERMITIAN | FLAG_ONE_OVER_N {
        return Err(Error::Format(format!("unsupported normalization flags {flags:#x}")));
    }
    let meta_len = read_u32(r)? as usize;
    if meta_len > 1 << 20 {
        return Err(Error::Format("metadata too long".into()));
    }
    let mut buf = vec![0u8; meta_len];
    r.read_exact(&mut buf)?;
    let text = String::from_utf8(buf).map_err(|_| Error::Format("metadata is not UTF-8".into()))?;
    let mut meta = BTreeMap::new();
    for line in text.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad metadata line '{line}'")))?;
        meta.insert(k.to_string(), v.to_string());
    }
    let grid = Grid::new(&dims).map_err(|e| Error::Format(e.to_string()))?;
    let rows: usize = meta.remove("rows").and_then(|v| v.parse().ok()).unwrap_or(m);
    let cols: usize = meta.remove("cols").and_then(|v| v.parse().ok()).unwrap_or(1);
    if rows * cols != m {
        return Err(Error::Format(format!("shape {rows}x{cols} does not match m={m}")));
    }
    let count = grid.spectral_len() * m;
    let mut coeffs = Vec::with_capacity(count);
    for _ in 0..count {
        let re = read_f64(r)?;
        let im = read_f64(r)?;
        coeffs.push(Complex64::new(re, im));
    }
    let series = FourierSeries::from_coeffs(&grid, rows, cols, coeffs)?;
    Ok(Some(FtsBlock { series, omega, meta }))
}

/// Reads every block of a concatenated stream.
pub fn read_all_fts<R: Read>(r: &mut R) -> Result<Vec<FtsBlock>> {
    let mut out = Vec::new();
    while let Some(b) = read_fts(r)? {
        out.push(b);
    }
    Ok(out)
}
