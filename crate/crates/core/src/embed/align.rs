use nalgebra::DMatrix;

use super::{EmbedError, EmbeddingMatrix, Result};
use crate::scenario::canon_interp;

/// Linearly interpolates each column of `e` onto `target_len` evenly spaced
/// rows. Row `0` and the last row are kept exactly.
pub fn align_embedding(e: &EmbeddingMatrix, target_len: usize) -> Result<EmbeddingMatrix> {
    let t = e.rows();
    if t < 2 {
        return Err(EmbedError::TooShort { rows: t });
    }
    if target_len < 2 {
        return Err(EmbedError::TooShort { rows: target_len });
    }
    if t == target_len {
        return Ok(e.clone());
    }
    let grid: Vec<f64> = (0..t).map(|i| i as f64).collect();
    let mut out = DMatrix::zeros(target_len, e.cols());
    for d in 0..e.cols() {
        let (_, col) = canon_interp(&grid, e.column(d), target_len);
        out.set_column(d, &nalgebra::DVector::from_vec(col));
    }
    EmbeddingMatrix::new(out, e.meta.clone())
}
