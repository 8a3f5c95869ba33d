//! Multi-head cross-attention with fixed weights. It exercises the shapes and
//! normalization of the learned decoder's attention block; tracking does not
//! use it.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Deterministic pseudo-random weights in `[-1, 1] / √rows`.
fn fixed_weights(rows: usize, cols: usize, salt: u64) -> DMatrix<f64> {
    let scale = 1.0 / (rows as f64).sqrt();
    DMatrix::from_fn(rows, cols, |r, c| {
        let mut z = (r as u64) << 32 ^ (c as u64) ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        scale * ((z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0)
    })
}

/// Elementwise feature encoding `x + 0.1·sin(x)`. It depends only on the row
/// content, so attention stays equivariant to reordering keys and values.
fn encode(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.map(|v| v + 0.1 * v.sin())
}

fn ffn(x: &DMatrix<f64>, salt: u64) -> DMatrix<f64> {
    let d = x.ncols();
    let hidden = (x * fixed_weights(d, 2 * d, salt)).map(|v| v.max(0.0));
    hidden * fixed_weights(2 * d, d, salt + 1)
}

/// Row-wise softmax in place.
fn softmax_rows(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let max = row.max();
        row.apply(|v| *v = (*v - max).exp());
        let total = row.sum();
        row /= total;
    }
}

/// Cross-attention of `queries` (N×D) over `observation` (M×D) with `heads`
/// heads. Returns the updated N×D block and the per-head N×M attention maps.
pub fn attention_shapecheck(
    queries: &DMatrix<f64>,
    observation: &DMatrix<f64>,
    heads: usize,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    let d = queries.ncols();
    if observation.ncols() != d {
        return Err(Error::GeometryMismatch(format!(
            "query width {d} but observation width {}",
            observation.ncols()
        )));
    }
    if heads == 0 || d % heads != 0 {
        return Err(Error::GeometryMismatch(format!("{heads} heads do not divide width {d}")));
    }
    if queries.nrows() == 0 || observation.nrows() == 0 {
        return Err(Error::GeometryMismatch("empty feature block".into()));
    }
    let values = ffn(observation, 10);
    let keys = encode(&values);
    let q = encode(queries) * fixed_weights(d, d, 1);
    let k = keys * fixed_weights(d, d, 2);
    let v = values * fixed_weights(d, d, 3);
    let dh = d / heads;
    let mut merged = DMatrix::zeros(queries.nrows(), d);
    let mut maps = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = h * dh..(h + 1) * dh;
        let qh = q.columns(cols.start, dh);
        let kh = k.columns(cols.start, dh);
        let vh = v.columns(cols.start, dh);
        let mut att = (qh * kh.transpose()) / (dh as f64).sqrt();
        softmax_rows(&mut att);
        merged.columns_mut(cols.start, dh).copy_from(&(&att * vh));
        maps.push(att);
    }
    Ok((merged * fixed_weights(d, d, 4), maps))
}
