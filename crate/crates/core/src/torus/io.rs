use std::io::{Read, Write};

use super::TorusEmbedding;
use crate::error::{Error, Result};
use crate::fourier::{read_all_fts, write_fts, FtsBlock, RotationVector};
use crate::geometry::{SymplecticMapModel, WindingMatrix};

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub(crate) fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Format(format!("bad {what} entry '{x}'"))))
        .collect()
}

fn required<'a>(block: &'a FtsBlock, key: &str) -> Result<&'a str> {
    block.meta.get(key).map(|s| s.as_str()).ok_or_else(|| Error::Format(format!("missing '{key}'")))
}

/// Model identification stored with every persisted object.
pub(crate) fn model_meta(block: FtsBlock, model: &SymplecticMapModel) -> FtsBlock {
    block.with_meta("model", model.name()).with_meta("epsilon", model.epsilon).with_meta("a", model.a)
}

pub(crate) fn model_from_meta(block: &FtsBlock) -> Result<SymplecticMapModel> {
    let num = |k: &str| -> Result<f64> {
        required(block, k)?.parse().map_err(|_| Error::Format(format!("bad '{k}'")))
    };
    SymplecticMapModel::from_name(required(block, "model")?, num("a")?, num("epsilon")?)
        .map_err(|e| Error::Format(e.to_string()))
}

/// Writes the torus as one series block with `role=torus`. The model, the
/// winding, the angle slots, the counterterm and the Diophantine constants
/// go into the block metadata. The reference embedding is not stored.
pub fn write_torus<W: Write>(out: &mut W, torus: &TorusEmbedding, model: &SymplecticMapModel) -> Result<()> {
    let block = FtsBlock::new(torus.k.to_coeffs()?, torus.omega.omega.clone())
        .with_meta("role", "torus")
        .with_meta("winding", join(torus.winding.entries()))
        .with_meta("angle_slots", join(&torus.angle_slots))
        .with_meta("lambda", join(&torus.lambda))
        .with_meta("diophantine_nu", torus.omega.diophantine_nu)
        .with_meta("diophantine_tau", torus.omega.diophantine_tau);
    write_fts(out, &model_meta(block, model))
}

/// Reads a torus file together with the model it was computed for.
pub fn read_torus<R: Read>(r: &mut R) -> Result<(TorusEmbedding, SymplecticMapModel)> {
    let blocks = read_all_fts(r)?;
    let block = blocks
        .iter()
        .find(|b| b.meta.get("role").map(|s| s.as_str()) == Some("torus"))
        .ok_or_else(|| Error::Format("no block with role=torus".into()))?;
    let model = model_from_meta(block)?;
    let winding: Vec<i64> = parse_list(required(block, "winding")?, "winding")?;
    let slots: Vec<usize> = parse_list(required(block, "angle_slots")?, "angle slot")?;
    let lambda: Vec<f64> = parse_list(required(block, "lambda")?, "lambda")?;
    let nu: f64 = required(block, "diophantine_nu")?.parse().map_err(|_| Error::Format("bad diophantine_nu".into()))?;
    let tau: f64 = required(block, "diophantine_tau")?.parse().map_err(|_| Error::Format("bad diophantine_tau".into()))?;
    let l = slots.len();
    let fmt = |e: Error| Error::Format(e.to_string());
    let winding = WindingMatrix::new(l, winding).map_err(fmt)?;
    let omega = RotationVector::new(block.omega.clone(), nu, tau).map_err(fmt)?;
    if block.series.rows() != model.dim() || slots.iter().any(|&s| s >= model.d()) {
        return Err(Error::Format("torus dimension does not match its model".into()));
    }
    block.series.check_finite("torus file")?;
    let mut torus = TorusEmbedding::new(block.series.to_grid()?, winding, omega, slots).map_err(fmt)?;
    if lambda.len() != l {
        return Err(Error::Format(format!("expected {l} counterterm entries, found {}", lambda.len())));
    }
    torus.lambda = lambda;
    Ok((torus, model))
}
