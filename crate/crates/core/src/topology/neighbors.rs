use super::Grid;
use crate::error::{Error, Result};

/// Moore neighborhoods with hard boundaries: every active cell within
/// Chebyshev distance `radius`, excluding the cell itself, scanned row-major.
/// Inactive cells get empty lists.
pub fn moore_neighbors(grid: &Grid, radius: usize) -> Result<Vec<Vec<usize>>> {
    if !(1..=2).contains(&radius) {
        return Err(Error::Topology(format!("unsupported Moore radius {radius}")));
    }
    let (rows, cols) = (grid.rows() as isize, grid.cols() as isize);
    let r = radius as isize;
    let mut out = vec![Vec::new(); grid.len()];
    for (i, list) in out.iter_mut().enumerate() {
        if !grid.is_active(i) {
            continue;
        }
        let (row, col) = grid.coords(i);
        let (row, col) = (row as isize, col as isize);
        for dr in -r..=r {
            for dc in -r..=r {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (nr, nc) = (row + dr, col + dc);
                if nr < 0 || nc < 0 || nr >= rows || nc >= cols {
                    continue;
                }
                let j = grid.index(nr as usize, nc as usize);
                if grid.is_active(j) {
                    list.push(j);
                }
            }
        }
    }
    Ok(out)
}
