use super::Field;
use crate::error::{Error, Result};

/// Discrete Schwarz rearrangement about the box center.
///
/// Values sorted in decreasing order are assigned to grid points sorted by
/// distance from the center; equal radii are ordered lexicographically by
/// index. The result is a permutation of the input values.
pub fn schwarz_rearrange(u: &Field) -> Result<Field> {
    if let Some(i) = u.values().iter().position(|&v| v < 0.0) {
        return Err(Error::domain(format!(
            "Schwarz rearrangement needs a nonnegative field (value {} at index {i})",
            u.values()[i]
        )));
    }
    let grid = *u.grid();
    let mut sorted = u.values().to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));

    let center = grid.n() / 2;
    let mut order: Vec<(u64, usize)> = (0..grid.len())
        .map(|idx| {
            let [i, j] = grid.multi_index(idx);
            let di = i as i64 - center as i64;
            let dj = if grid.dim() == 1 { 0 } else { j as i64 - center as i64 };
            ((di * di + dj * dj) as u64, idx)
        })
        .collect();
    order.sort_unstable();

    let mut out = vec![0.0; grid.len()];
    for ((_, idx), v) in order.into_iter().zip(sorted) {
        out[idx] = v;
    }
    Ok(Field::from_vec_unchecked(grid, out))
}
