//! Grids, neighborhoods, long-range wiring, and action zones.

mod io;
mod neighbors;
mod scale_free;
mod zones;

pub use io::{parse_topology, write_topology};
pub use neighbors::moore_neighbors;
pub use scale_free::{gen_scale_free_longrange, zipf_draw, ScaleFreeConfig, ScaleFreeGraph};
pub use zones::{gen_patch_longrange, gen_t_shape, quadrant_zones, zone_patch};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Rectangular canvas with an active-cell mask. Cell `i` sits at `(i / cols, i % cols)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    active: Vec<bool>,
}

impl Grid {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active.get(i).copied().unwrap_or(false)
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Active cell indices in ascending order.
    pub fn active_cells(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.active[i]).collect()
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i / self.cols, i % self.cols)
    }

    pub fn chebyshev(&self, a: usize, b: usize) -> usize {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        ra.abs_diff(rb).max(ca.abs_diff(cb))
    }

    /// Normalized position in `[0, 1]^2` as `(row, col)`; a unit dimension maps to 0.
    pub fn position(&self, i: usize) -> [f64; 2] {
        let (r, c) = self.coords(i);
        let norm = |v: usize, n: usize| if n > 1 { v as f64 / (n - 1) as f64 } else { 0.0 };
        [norm(r, self.rows), norm(c, self.cols)]
    }
}

/// Builds a grid; `active = None` means every cell is active.
pub fn build_grid(rows: usize, cols: usize, active: Option<Vec<bool>>) -> Result<Grid> {
    if rows == 0 || cols == 0 {
        return Err(Error::Topology(format!("grid {rows}x{cols} has no cells")));
    }
    let active = active.unwrap_or_else(|| vec![true; rows * cols]);
    if active.len() != rows * cols {
        return Err(Error::Topology(format!(
            "mask length {} does not match {rows}x{cols}",
            active.len()
        )));
    }
    if !active.iter().any(|&a| a) {
        return Err(Error::Topology("grid has no active cells".into()));
    }
    Ok(Grid { rows, cols, active })
}

/// Action zone; the discriminant is the environment action index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Zone {
    Noop = 0,
    Left = 1,
    Main = 2,
    Right = 3,
}

impl Zone {
    pub const ALL: [Zone; 4] = [Zone::Noop, Zone::Left, Zone::Main, Zone::Right];
    pub const MOTOR: [Zone; 3] = [Zone::Left, Zone::Main, Zone::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Zone> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Zone::Noop => "NOOP",
            Zone::Left => "LEFT",
            Zone::Main => "MAIN",
            Zone::Right => "RIGHT",
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Zone {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NOOP" => Ok(Zone::Noop),
            "LEFT" => Ok(Zone::Left),
            "MAIN" => Ok(Zone::Main),
            "RIGHT" => Ok(Zone::Right),
            other => Err(Error::Topology(format!("unknown zone {other:?}"))),
        }
    }
}

/// Zone assignment per grid cell (`None` = unzoned).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneMap {
    pub assignment: Vec<Option<Zone>>,
}

impl ZoneMap {
    pub fn cells(&self, zone: Zone) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == Some(zone))
            .collect()
    }

    pub fn zone_sizes(&self) -> [usize; 4] {
        let mut out = [0; 4];
        for z in self.assignment.iter().flatten() {
            out[z.index()] += 1;
        }
        out
    }

    /// Every action zone has at least one cell.
    pub fn is_control_ready(&self) -> bool {
        self.zone_sizes().iter().all(|&n| n > 0)
    }
}

/// Grid plus per-cell local and long-range neighbor lists (grid indices).
///
/// Lists exclude the cell itself; self-inclusion happens at aggregation time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub grid: Grid,
    pub local: Vec<Vec<usize>>,
    pub long_range: Vec<Vec<usize>>,
    pub zones: Option<ZoneMap>,
}

impl Topology {
    /// Local Moore neighborhood, no long-range edges, no zones.
    pub fn moore(grid: Grid, radius: usize) -> Result<Self> {
        let local = moore_neighbors(&grid, radius)?;
        let n = grid.len();
        Ok(Self {
            grid,
            local,
            long_range: vec![Vec::new(); n],
            zones: None,
        })
    }

    pub fn with_long_range(mut self, long_range: Vec<Vec<usize>>) -> Self {
        self.long_range = long_range;
        self
    }

    pub fn with_zones(mut self, zones: ZoneMap) -> Self {
        self.zones = Some(zones);
        self
    }

    /// Relabels active cells `0..N` in ascending grid order.
    pub fn compact(&self) -> Result<CellGraph> {
        let violations = validate_topology(self);
        if let Some(v) = violations.first() {
            return Err(Error::Topology(format!(
                "{} violation(s), first: cell {} {}",
                violations.len(),
                v.cell,
                v.rule
            )));
        }
        let cells = self.grid.active_cells();
        let mut compact = vec![usize::MAX; self.grid.len()];
        for (k, &g) in cells.iter().enumerate() {
            compact[g] = k;
        }
        let remap = |lists: &[Vec<usize>]| -> Vec<Vec<usize>> {
            cells
                .iter()
                .map(|&g| lists[g].iter().map(|&j| compact[j]).collect())
                .collect()
        };
        Ok(CellGraph {
            local: remap(&self.local),
            long_range: remap(&self.long_range),
            zones: self
                .zones
                .as_ref()
                .map(|z| cells.iter().map(|&g| z.assignment[g]).collect()),
            positions: cells.iter().map(|&g| self.grid.position(g)).collect(),
            local_padding: vec![0; cells.len()],
            grid_index: cells,
        })
    }
}

/// Active cells relabelled `0..N`, the form the model consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGraph {
    pub grid_index: Vec<usize>,
    pub local: Vec<Vec<usize>>,
    pub long_range: Vec<Vec<usize>>,
    pub zones: Option<Vec<Option<Zone>>>,
    pub positions: Vec<[f64; 2]>,
    /// Virtual zero-state neighbors per cell: window slots that fall outside
    /// the grid or on inactive cells.
    pub local_padding: Vec<usize>,
}

impl CellGraph {
    /// Pads every local domain up to the full `(2r+1)^2 - 1` Moore window.
    pub fn with_window_padding(mut self, radius: usize) -> Self {
        let window = (2 * radius + 1) * (2 * radius + 1) - 1;
        self.local_padding = self.local.iter().map(|l| window.saturating_sub(l.len())).collect();
        self
    }

    pub fn len(&self) -> usize {
        self.grid_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid_index.is_empty()
    }

    /// Members of each action zone, indexed by [`Zone::index`].
    pub fn zone_members(&self) -> Option<[Vec<usize>; 4]> {
        let zones = self.zones.as_ref()?;
        let mut out: [Vec<usize>; 4] = Default::default();
        for (i, z) in zones.iter().enumerate() {
            if let Some(z) = z {
                out[z.index()].push(i);
            }
        }
        Some(out)
    }

    /// Applies a relabelling `new = perm[old]`, keeping list order.
    pub fn permuted(&self, perm: &[usize]) -> CellGraph {
        let n = self.len();
        let mut inv = vec![0; n];
        for (old, &new) in perm.iter().enumerate() {
            inv[new] = old;
        }
        let map_lists = |lists: &[Vec<usize>]| -> Vec<Vec<usize>> {
            (0..n)
                .map(|new| lists[inv[new]].iter().map(|&j| perm[j]).collect())
                .collect()
        };
        CellGraph {
            grid_index: (0..n).map(|new| self.grid_index[inv[new]]).collect(),
            local: map_lists(&self.local),
            long_range: map_lists(&self.long_range),
            zones: self
                .zones
                .as_ref()
                .map(|z| (0..n).map(|new| z[inv[new]]).collect()),
            positions: (0..n).map(|new| self.positions[inv[new]]).collect(),
            local_padding: (0..n).map(|new| self.local_padding[inv[new]]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub cell: usize,
    pub rule: &'static str,
}

/// Lists every broken topology invariant; empty means the topology is valid.
pub fn validate_topology(t: &Topology) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = t.grid.len();
    if t.grid.active_count() == 0 {
        out.push(Violation {
            cell: 0,
            rule: "no active cells",
        });
    }
    if t.local.len() != n || t.long_range.len() != n {
        out.push(Violation {
            cell: 0,
            rule: "list count differs from grid size",
        });
        return out;
    }
    for lists in [&t.local, &t.long_range] {
        for (i, list) in lists.iter().enumerate() {
            if !t.grid.is_active(i) && !list.is_empty() {
                out.push(Violation {
                    cell: i,
                    rule: "inactive source",
                });
            }
            for (k, &j) in list.iter().enumerate() {
                if j >= n {
                    out.push(Violation {
                        cell: i,
                        rule: "index out of range",
                    });
                } else if !t.grid.is_active(j) {
                    out.push(Violation {
                        cell: i,
                        rule: "inactive target",
                    });
                }
                if j == i {
                    out.push(Violation {
                        cell: i,
                        rule: "self loop",
                    });
                }
                if list[..k].contains(&j) {
                    out.push(Violation {
                        cell: i,
                        rule: "duplicate entry",
                    });
                }
            }
        }
    }
    if let Some(z) = &t.zones {
        if z.assignment.len() != n {
            out.push(Violation {
                cell: 0,
                rule: "zone map size differs from grid size",
            });
        } else {
            for (i, a) in z.assignment.iter().enumerate() {
                if a.is_some() && !t.grid.is_active(i) {
                    out.push(Violation {
                        cell: i,
                        rule: "zone on inactive cell",
                    });
                }
            }
        }
    }
    out
}
