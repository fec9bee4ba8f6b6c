use super::{build_grid, Grid, Zone, ZoneMap};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// T-shaped layout on a `2*block x 3*block` canvas (rows x cols).
///
/// Top row of blocks, left to right: LEFT, MAIN, RIGHT. The block under MAIN
/// is NOOP. Everything else is inactive.
pub const T_SHAPE_LAYOUT: [(usize, usize, Zone); 4] = [
    (0, 0, Zone::Left),
    (0, 1, Zone::Main),
    (0, 2, Zone::Right),
    (1, 1, Zone::Noop),
];

/// Quadrant assignment for full grids: `(block_row, block_col, zone)`.
pub const QUADRANT_LAYOUT: [(usize, usize, Zone); 4] = [
    (0, 0, Zone::Noop),
    (0, 1, Zone::Left),
    (1, 0, Zone::Main),
    (1, 1, Zone::Right),
];

pub fn gen_t_shape(block: usize) -> Result<(Grid, ZoneMap)> {
    if block == 0 {
        return Err(Error::Topology("block size must be >= 1".into()));
    }
    let (rows, cols) = (2 * block, 3 * block);
    let mut active = vec![false; rows * cols];
    let mut assignment = vec![None; rows * cols];
    for &(br, bc, zone) in &T_SHAPE_LAYOUT {
        for r in br * block..(br + 1) * block {
            for c in bc * block..(bc + 1) * block {
                active[r * cols + c] = true;
                assignment[r * cols + c] = Some(zone);
            }
        }
    }
    Ok((build_grid(rows, cols, Some(active))?, ZoneMap { assignment }))
}

/// Splits a grid with even dimensions into four quadrant zones.
pub fn quadrant_zones(grid: &Grid) -> Result<ZoneMap> {
    let (rows, cols) = (grid.rows(), grid.cols());
    if rows % 2 != 0 || cols % 2 != 0 {
        return Err(Error::Topology(format!(
            "quadrants need even dimensions, got {rows}x{cols}"
        )));
    }
    let mut assignment = vec![None; grid.len()];
    for (i, a) in assignment.iter_mut().enumerate() {
        if !grid.is_active(i) {
            continue;
        }
        let (r, c) = grid.coords(i);
        let (br, bc) = (r / (rows / 2), c / (cols / 2));
        *a = QUADRANT_LAYOUT
            .iter()
            .find(|&&(qr, qc, _)| qr == br && qc == bc)
            .map(|&(_, _, z)| z);
    }
    Ok(ZoneMap { assignment })
}

/// The 3x3 block at the geometric center of a zone's bounding box, row-major.
/// For even extents the block starts at `min + (extent - 3) / 2`.
pub fn zone_patch(grid: &Grid, zones: &ZoneMap, zone: Zone) -> Result<Vec<usize>> {
    let cells = zones.cells(zone);
    if cells.is_empty() {
        return Err(Error::Topology(format!("zone {zone} is empty")));
    }
    let coords: Vec<(usize, usize)> = cells.iter().map(|&i| grid.coords(i)).collect();
    let rmin = coords.iter().map(|c| c.0).min().unwrap_or(0);
    let rmax = coords.iter().map(|c| c.0).max().unwrap_or(0);
    let cmin = coords.iter().map(|c| c.1).min().unwrap_or(0);
    let cmax = coords.iter().map(|c| c.1).max().unwrap_or(0);
    let (h, w) = (rmax - rmin + 1, cmax - cmin + 1);
    if h < 3 || w < 3 {
        return Err(Error::Topology(format!("zone {zone} is smaller than 3x3")));
    }
    let (r0, c0) = (rmin + (h - 3) / 2, cmin + (w - 3) / 2);
    let mut patch = Vec::with_capacity(9);
    for r in r0..r0 + 3 {
        for c in c0..c0 + 3 {
            let i = grid.index(r, c);
            if zones.assignment[i] != Some(zone) {
                return Err(Error::Topology(format!(
                    "zone {zone} does not contain its central 3x3 patch"
                )));
            }
            patch.push(i);
        }
    }
    Ok(patch)
}

/// Directed cross-zone wiring between the central patches of the motor zones.
///
/// For LEFT, MAIN, RIGHT in that order, each patch cell (row-major) samples
/// `targets_per_zone` distinct cells from each other motor patch (same zone
/// order) and appends them to its own receiver-side list. NOOP is never wired.
pub fn gen_patch_longrange(
    grid: &Grid,
    zones: &ZoneMap,
    targets_per_zone: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<usize>>> {
    let patches: Vec<Vec<usize>> = Zone::MOTOR
        .iter()
        .map(|&z| zone_patch(grid, zones, z))
        .collect::<Result<_>>()?;
    if targets_per_zone > 9 {
        return Err(Error::Topology(format!(
            "patch of 9 cells cannot supply {targets_per_zone} distinct targets"
        )));
    }
    let mut lists = vec![Vec::new(); grid.len()];
    for (zi, patch) in patches.iter().enumerate() {
        for &cell in patch {
            for (zj, other) in patches.iter().enumerate() {
                if zi == zj {
                    continue;
                }
                lists[cell].extend(rng.sample_without_replacement(other, targets_per_zone));
            }
        }
    }
    Ok(lists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{moore_neighbors, validate_topology, Topology};

    #[test]
    fn t_shape_block8() {
        let (g, z) = gen_t_shape(8).unwrap();
        assert_eq!((g.rows(), g.cols()), (16, 24));
        assert_eq!(g.active_count(), 256);
        assert_eq!(z.zone_sizes(), [64; 4]);
        assert_eq!(z.assignment[g.index(0, 0)], Some(Zone::Left));
        assert_eq!(z.assignment[g.index(0, 8)], Some(Zone::Main));
        assert_eq!(z.assignment[g.index(0, 23)], Some(Zone::Right));
        assert_eq!(z.assignment[g.index(15, 8)], Some(Zone::Noop));
        assert_eq!(z.assignment[g.index(15, 0)], None);
        assert!(!g.is_active(g.index(8, 0)));
    }

    #[test]
    fn t_shape_block1_and_counts() {
        let (g, z) = gen_t_shape(1).unwrap();
        assert_eq!(g.active_count(), 4);
        assert_eq!(z.zone_sizes(), [1; 4]);
        for b in 1..6 {
            let (g, z) = gen_t_shape(b).unwrap();
            assert_eq!(g.active_count(), 4 * b * b);
            assert_eq!(z.zone_sizes(), [b * b; 4]);
        }
        assert!(gen_t_shape(0).is_err());
    }

    #[test]
    fn quadrants_of_sixteen() {
        let g = build_grid(16, 16, None).unwrap();
        let z = quadrant_zones(&g).unwrap();
        assert_eq!(z.zone_sizes(), [64; 4]);
        assert_eq!(z.assignment[0], Some(Zone::Noop));
        assert_eq!(z.assignment[15], Some(Zone::Left));
        assert_eq!(z.assignment[g.index(15, 0)], Some(Zone::Main));
        assert_eq!(z.assignment[255], Some(Zone::Right));
        assert!(z.is_control_ready());
        assert!(quadrant_zones(&build_grid(3, 4, None).unwrap()).is_err());
    }

    #[test]
    fn patch_wiring_degrees() {
        for layout in 0..2 {
            let (g, z) = if layout == 0 {
                gen_t_shape(8).unwrap()
            } else {
                let g = build_grid(16, 16, None).unwrap();
                let z = quadrant_zones(&g).unwrap();
                (g, z)
            };
            let lists = gen_patch_longrange(&g, &z, 6, &mut Rng::new(42)).unwrap();
            let patch_cells: Vec<usize> = Zone::MOTOR
                .iter()
                .flat_map(|&zz| zone_patch(&g, &z, zz).unwrap())
                .collect();
            for (i, l) in lists.iter().enumerate() {
                if patch_cells.contains(&i) {
                    assert_eq!(l.len(), 12);
                    let own = z.assignment[i];
                    assert!(l.iter().all(|&j| z.assignment[j] != own));
                    assert!(l.iter().all(|&j| patch_cells.contains(&j)));
                } else {
                    assert!(l.is_empty());
                }
                if z.assignment[i] == Some(Zone::Noop) {
                    assert!(l.is_empty());
                }
            }
            let t = Topology {
                local: moore_neighbors(&g, 1).unwrap(),
                long_range: lists,
                zones: Some(z),
                grid: g,
            };
            assert!(validate_topology(&t).is_empty());
        }
    }

    #[test]
    fn patch_center_for_even_zone() {
        let (g, z) = gen_t_shape(8).unwrap();
        let p = zone_patch(&g, &z, Zone::Left).unwrap();
        assert_eq!(p[0], g.index(2, 2));
        assert_eq!(p[8], g.index(4, 4));
    }

    #[test]
    fn patch_requires_enough_targets() {
        let (g, z) = gen_t_shape(8).unwrap();
        assert!(gen_patch_longrange(&g, &z, 10, &mut Rng::new(0)).is_err());
        let (g, z) = gen_t_shape(2).unwrap();
        assert!(gen_patch_longrange(&g, &z, 6, &mut Rng::new(0)).is_err());
    }
}
