use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::FourierTaylorSeries;
use crate::error::{Error, Result};
use crate::fourier::{read_fts, write_fts, FtsBlock, RotationVector};
use crate::geometry::WindingMatrix;

pub const FTT_MAGIC: &[u8; 4] = b"FTT1";

/// Scalars stored ahead of the coefficient blocks of a whisker file.
#[derive(Clone, Debug, PartialEq)]
pub struct FttHeader {
    pub mu: f64,
    pub rho: f64,
    pub lambda: Vec<f64>,
    /// `stable` or `unstable`.
    pub branch: String,
    /// Free-form `key=value` entries (model name, parameters, ...).
    pub extras: BTreeMap<String, String>,
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn split_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Format(format!("bad {what} entry '{x}'"))))
        .collect()
}

/// Layout: `FTT1`, `mu`, `rho`, `s_max` (f64 LE), the number of orders
/// `L + 1` (u32 LE), a length-prefixed `key=value` text block, then one
/// coefficient block per order in the series format.
pub fn write_ftt<W: Write>(out: &mut W, w: &FourierTaylorSeries, header: &FttHeader) -> Result<()> {
    out.write_all(FTT_MAGIC)?;
    for x in [header.mu, header.rho, w.s_max] {
        out.write_all(&x.to_le_bytes())?;
    }
    out.write_all(&(w.orders.len() as u32).to_le_bytes())?;
    let mut meta = header.extras.clone();
    meta.insert("branch".into(), header.branch.clone());
    meta.insert("lambda".into(), join(&header.lambda));
    meta.insert("winding".into(), join(w.winding.entries()));
    meta.insert("angle_slots".into(), join(&w.angle_slots));
    meta.insert("diophantine_nu".into(), w.omega.diophantine_nu.to_string());
    meta.insert("diophantine_tau".into(), w.omega.diophantine_tau.to_string());
    let text: String = meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    out.write_all(&(text.len() as u32).to_le_bytes())?;
    out.write_all(text.as_bytes())?;
    for (n, o) in w.orders.iter().enumerate() {
        let block = FtsBlock::new(o.to_coeffs()?, w.omega.omega.clone()).with_meta("order", n);
        write_fts(out, &block)?;
    }
    Ok(())
}

fn read_bytes<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_ftt<R: Read>(r: &mut R) -> Result<(FourierTaylorSeries, FttHeader)> {
    let magic: [u8; 4] = read_bytes(r)?;
    if &magic != FTT_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mu = f64::from_le_bytes(read_bytes(r)?);
    let rho = f64::from_le_bytes(read_bytes(r)?);
    let s_max = f64::from_le_bytes(read_bytes(r)?);
    let len = u32::from_le_bytes(read_bytes(r)?) as usize;
    if len == 0 || len > 1 << 12 {
        return Err(Error::Format(format!("implausible number of orders {len}")));
    }
    let meta_len = u32::from_le_bytes(read_bytes(r)?) as usize;
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
    let mut take = |k: &str| meta.remove(k).ok_or_else(|| Error::Format(format!("missing '{k}'")));
    let branch = take("branch")?;
    let lambda: Vec<f64> = split_list(&take("lambda")?, "lambda")?;
    let winding: Vec<i64> = split_list(&take("winding")?, "winding")?;
    let angle_slots: Vec<usize> = split_list(&take("angle_slots")?, "angle slot")?;
    let nu: f64 = take("diophantine_nu")?.parse().map_err(|_| Error::Format("bad diophantine_nu".into()))?;
    let tau: f64 = take("diophantine_tau")?.parse().map_err(|_| Error::Format("bad diophantine_tau".into()))?;
    let l = angle_slots.len();
    let winding = WindingMatrix::new(l, winding).map_err(|e| Error::Format(e.to_string()))?;

    let mut orders = Vec::with_capacity(len);
    let mut omega = None;
    for n in 0..len {
        let block = read_fts(r)?.ok_or_else(|| Error::Format(format!("missing order {n}")))?;
        if block.series.dim_domain() != l {
            return Err(Error::Format(format!("order {n} has the wrong number of angles")));
        }
        omega.get_or_insert(block.omega.clone());
        orders.push(block.series.to_grid()?);
    }
    let omega = RotationVector::new(omega.expect("at least one order"), nu, tau)
        .map_err(|e| Error::Format(e.to_string()))?;
    let w = FourierTaylorSeries { orders, s_max, winding, angle_slots, omega };
    Ok((w, FttHeader { mu, rho, lambda, branch, extras: meta }))
}
