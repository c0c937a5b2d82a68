//! Range-to-list transformations: flat variable lists, row/column/diagonal
//! groupings of a rectangle, and result-list length normalization.

use thiserror::Error;

use crate::grid::{CellAddr, RangeSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RangeError {
    #[error("a rectangular C_TL:C_BR range is required")]
    MatrixRequired,
    #[error("result list is empty")]
    EmptyList,
    #[error("requested length must be at least 1")]
    ZeroLength,
}

pub type AddrList = Vec<CellAddr>;
pub type AddrGroups = Vec<AddrList>;

/// Rect bounds as (sheet, col_lo, col_hi, row_lo, row_hi).
fn bounds(spec: &RangeSpec) -> Result<(usize, u16, u16, u32, u32), RangeError> {
    match spec {
        RangeSpec::Rect { top_left, bottom_right } => Ok((
            top_left.sheet,
            top_left.col,
            bottom_right.col,
            top_left.row,
            bottom_right.row,
        )),
        _ => Err(RangeError::MatrixRequired),
    }
}

/// Every cell named by `spec`: rectangles row-major, enumerations in
/// written order.
pub fn flatten(spec: &RangeSpec) -> AddrList {
    let mut out = Vec::with_capacity(spec.cell_count());
    flatten_into(spec, &mut out);
    out
}

fn flatten_into(spec: &RangeSpec, out: &mut AddrList) {
    match spec {
        RangeSpec::Single(a) => out.push(*a),
        RangeSpec::Rect { top_left, bottom_right } => {
            for row in top_left.row..=bottom_right.row {
                for col in top_left.col..=bottom_right.col {
                    out.push(CellAddr::new(top_left.sheet, col, row));
                }
            }
        }
        RangeSpec::Enumeration(items) => items.iter().for_each(|i| flatten_into(i, out)),
    }
}

/// One group per row, top to bottom.
pub fn rows(spec: &RangeSpec) -> Result<AddrGroups, RangeError> {
    let (sheet, c0, c1, r0, r1) = bounds(spec)?;
    Ok((r0..=r1)
        .map(|r| (c0..=c1).map(|c| CellAddr::new(sheet, c, r)).collect())
        .collect())
}

/// One group per column, left to right.
pub fn cols(spec: &RangeSpec) -> Result<AddrGroups, RangeError> {
    let (sheet, c0, c1, r0, r1) = bounds(spec)?;
    Ok((c0..=c1)
        .map(|c| (r0..=r1).map(|r| CellAddr::new(sheet, c, r)).collect())
        .collect())
}

/// Down-right diagonals (constant col - row), starting at the top-right
/// corner cell, sweeping left along the top row and then down the left
/// column. Cells within a group run top to bottom.
pub fn diagonals(spec: &RangeSpec) -> Result<AddrGroups, RangeError> {
    let (sheet, c0, c1, r0, r1) = bounds(spec)?;
    let width = (c1 - c0) as i64 + 1;
    let height = (r1 - r0) as i64 + 1;
    let mut groups = Vec::with_capacity((width + height - 1) as usize);
    for d in (-(height - 1)..width).rev() {
        let (mut c, mut r) = if d >= 0 { (d, 0) } else { (0, -d) };
        let mut group = Vec::new();
        while c < width && r < height {
            group.push(CellAddr::new(sheet, c0 + c as u16, r0 + r as u32));
            c += 1;
            r += 1;
        }
        groups.push(group);
    }
    Ok(groups)
}

/// Down-left diagonals (constant col + row), starting at the top-left
/// corner cell, sweeping right along the top row and then down the right
/// column. Cells within a group run top to bottom.
pub fn back_diagonals(spec: &RangeSpec) -> Result<AddrGroups, RangeError> {
    let (sheet, c0, c1, r0, r1) = bounds(spec)?;
    let width = (c1 - c0) as i64 + 1;
    let height = (r1 - r0) as i64 + 1;
    let mut groups = Vec::with_capacity((width + height - 1) as usize);
    for s in 0..(width + height - 1) {
        let (mut c, mut r) = if s < width { (s, 0) } else { (width - 1, s - width + 1) };
        let mut group = Vec::new();
        while c >= 0 && r < height {
            group.push(CellAddr::new(sheet, c0 + c as u16, r0 + r as u32));
            c -= 1;
            r += 1;
        }
        groups.push(group);
    }
    Ok(groups)
}

/// Truncates `list` to `n` items, or pads it by repeating its last item.
pub fn set_len<T: Clone>(list: &[T], n: usize) -> Result<Vec<T>, RangeError> {
    let last = list.last().ok_or(RangeError::EmptyList)?;
    if n == 0 {
        return Err(RangeError::ZeroLength);
    }
    let mut out: Vec<T> = list.iter().take(n).cloned().collect();
    out.resize(n, last.clone());
    Ok(out)
}
