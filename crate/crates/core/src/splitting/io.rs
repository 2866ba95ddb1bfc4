use std::io::{Read, Write};

use super::InvariantSplitting;
use crate::error::{Error, Result};
use crate::fourier::{read_all_fts, write_fts, FtsBlock};

/// Writes each projection as a matrix-valued block tagged `role=pi_s`,
/// `pi_cu`, `pi_u`, `pi_cs`.
pub fn write_splitting<W: Write>(out: &mut W, split: &InvariantSplitting, omega: &[f64]) -> Result<()> {
    let mut parts = vec![("pi_s", &split.pi_s), ("pi_cu", &split.pi_cu)];
    if let (Some(u), Some(cs)) = (&split.pi_u, &split.pi_cs) {
        parts.push(("pi_u", u));
        parts.push(("pi_cs", cs));
    }
    for (role, pi) in parts {
        write_fts(out, &FtsBlock::new(pi.to_coeffs()?, omega.to_vec()).with_meta("role", role))?;
    }
    Ok(())
}

/// Reads a splitting; returns it with the frequency stored alongside.
pub fn read_splitting<R: Read>(r: &mut R) -> Result<(InvariantSplitting, Vec<f64>)> {
    let blocks = read_all_fts(r)?;
    let find = |role: &str| -> Result<Option<_>> {
        blocks
            .iter()
            .find(|b| b.meta.get("role").map(|s| s.as_str()) == Some(role))
            .map(|b| {
                b.series.check_finite(role)?;
                b.series.to_grid()
            })
            .transpose()
    };
    let pi_s = find("pi_s")?.ok_or_else(|| Error::Format("no block with role=pi_s".into()))?;
    let pi_cu = find("pi_cu")?.ok_or_else(|| Error::Format("no block with role=pi_cu".into()))?;
    let (pi_u, pi_cs) = (find("pi_u")?, find("pi_cs")?);
    if pi_u.is_some() != pi_cs.is_some() {
        return Err(Error::Format("pi_u and pi_cs must be stored together".into()));
    }
    let square = |p: &crate::fourier::FourierSeries| p.rows() == pi_s.rows() && p.cols() == pi_s.rows() && p.grid() == pi_s.grid();
    if ![Some(&pi_cu), pi_u.as_ref(), pi_cs.as_ref()].into_iter().flatten().all(square) || pi_s.cols() != pi_s.rows() {
        return Err(Error::Format("projections have inconsistent shapes".into()));
    }
    let omega = blocks[0].omega.clone();
    Ok((InvariantSplitting { pi_s, pi_cu, pi_u, pi_cs }, omega))
}
