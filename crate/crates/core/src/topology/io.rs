//! Line-oriented topology text format.
//!
//! ```text
//! grid L M
//! cell i : n j1 j2 ... ; l k1 k2 ... ; zone Z
//! ```
//!
//! One `cell` line per active cell in ascending order. `Z` is one of
//! `NOOP LEFT MAIN RIGHT`, or `-` for an unzoned cell.

use std::fmt::Write as _;

use super::{build_grid, Topology, Zone, ZoneMap};
use crate::error::{Error, Result};

pub fn write_topology(t: &Topology) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "grid {} {}", t.grid.rows(), t.grid.cols());
    for i in t.grid.active_cells() {
        let _ = write!(out, "cell {i} : n");
        for j in &t.local[i] {
            let _ = write!(out, " {j}");
        }
        out.push_str(" ; l");
        for k in &t.long_range[i] {
            let _ = write!(out, " {k}");
        }
        let zone = t
            .zones
            .as_ref()
            .and_then(|z| z.assignment[i])
            .map_or("-", Zone::as_str);
        let _ = writeln!(out, " ; zone {zone}");
    }
    out
}

pub fn parse_topology(text: &str) -> Result<Topology> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing grid header".into(),
    })?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let bad = |line: usize, msg: &str| Error::Parse {
        line: line + 1,
        msg: msg.to_string(),
    };
    if h.len() != 3 || h[0] != "grid" {
        return Err(bad(0, "expected `grid L M`"));
    }
    let rows: usize = h[1].parse().map_err(|_| bad(0, "bad row count"))?;
    let cols: usize = h[2].parse().map_err(|_| bad(0, "bad column count"))?;
    let n = rows * cols;
    let mut active = vec![false; n];
    let mut local = vec![Vec::new(); n];
    let mut long_range = vec![Vec::new(); n];
    let mut assignment = vec![None; n];
    let mut any_zone = false;

    for (ln, line) in lines {
        let (head, rest) = line.split_once(':').ok_or_else(|| bad(ln, "missing ':'"))?;
        let head: Vec<&str> = head.split_whitespace().collect();
        if head.len() != 2 || head[0] != "cell" {
            return Err(bad(ln, "expected `cell i :`"));
        }
        let i: usize = head[1].parse().map_err(|_| bad(ln, "bad cell index"))?;
        if i >= n {
            return Err(bad(ln, "cell index out of range"));
        }
        if active[i] {
            return Err(bad(ln, "duplicate cell line"));
        }
        active[i] = true;
        let parts: Vec<&str> = rest.split(';').collect();
        if parts.len() != 3 {
            return Err(bad(ln, "expected three ';'-separated sections"));
        }
        let parse_list = |sec: &str, tag: &str| -> Result<Vec<usize>> {
            let mut it = sec.split_whitespace();
            if it.next() != Some(tag) {
                return Err(bad(ln, &format!("section must start with `{tag}`")));
            }
            it.map(|t| t.parse().map_err(|_| bad(ln, "bad neighbor index")))
                .collect()
        };
        local[i] = parse_list(parts[0], "n")?;
        long_range[i] = parse_list(parts[1], "l")?;
        let z: Vec<&str> = parts[2].split_whitespace().collect();
        if z.len() != 2 || z[0] != "zone" {
            return Err(bad(ln, "expected `zone Z`"));
        }
        if z[1] != "-" {
            assignment[i] = Some(z[1].parse::<Zone>().map_err(|_| bad(ln, "unknown zone"))?);
            any_zone = true;
        }
    }
    let grid = build_grid(rows, cols, Some(active))?;
    Ok(Topology {
        grid,
        local,
        long_range,
        zones: any_zone.then_some(ZoneMap { assignment }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::topology::{gen_patch_longrange, gen_t_shape, moore_neighbors, Grid};

    fn tshape_lr() -> Topology {
        let (g, z): (Grid, ZoneMap) = gen_t_shape(8).unwrap();
        let lr = gen_patch_longrange(&g, &z, 6, &mut Rng::new(3)).unwrap();
        Topology {
            local: moore_neighbors(&g, 1).unwrap(),
            long_range: lr,
            zones: Some(z),
            grid: g,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let t = tshape_lr();
        let text = write_topology(&t);
        let back = parse_topology(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(write_topology(&back), text);
    }

    #[test]
    fn line_shape() {
        let g = build_grid(2, 2, None).unwrap();
        let t = Topology::moore(g, 1).unwrap();
        let text = write_topology(&t);
        assert_eq!(text.lines().next(), Some("grid 2 2"));
        assert_eq!(text.lines().nth(1), Some("cell 0 : n 1 2 3 ; l ; zone -"));
        assert_eq!(parse_topology(&text).unwrap(), t);
    }

    #[test]
    fn malformed_input_reports_line() {
        let err = parse_topology("grid 2 2\ncell 0 : n 1 ; l ; zone UP\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(parse_topology("").is_err());
        assert!(parse_topology("grid 2\n").is_err());
    }
}
