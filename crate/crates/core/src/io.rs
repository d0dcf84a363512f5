//! Plain-text persistence of grid maps (`.gmap`) and integer chains.
//!
//! ```text
//! gmap 1 <n> <m> <target> <k>      target: circle | sphere | ambient
//! <value> [<value> <value>]        one vertex per line, 17 significant digits
//!
//! chain 1 <n> <m> <dim>
//! <cell-index> <coefficient>       nonzero terms in index order
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::complex::{CubicalComplex, TorusGrid};
use crate::cycles::Chain;
use crate::error::{Error, Result};
use crate::maps::{GridMap, Target};

fn fmt_value(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Format(format!("line {line}: bad number {s:?}")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.parse::<usize>().map_err(|_| Error::Format(format!("malformed header: bad {what} {s:?}")))
}

/// Serializes a map; grids with a nonzero offset are rejected since the
/// header does not carry it.
pub fn write_map(u: &GridMap) -> Result<String> {
    let grid = u.grid();
    if grid.offset().iter().any(|&o| o != 0.0) {
        return Err(Error::Format("gmap files store unit grids with zero offset".into()));
    }
    let (name, k) = match u.target() {
        Target::Circle => ("circle", 2),
        Target::Sphere => ("sphere", 3),
        Target::Ambient(d) => ("ambient", d),
    };
    let w = u.target().width();
    let mut out = format!("gmap 1 {} {} {name} {k}\n", grid.n(), grid.m());
    for chunk in u.values().chunks(w) {
        let line: Vec<String> = chunk.iter().map(|&x| fmt_value(x)).collect();
        writeln!(out, "{}", line.join(" ")).expect("writing to a string");
    }
    Ok(out)
}

/// Parses a map written by [`write_map`].
pub fn read_map(text: &str) -> Result<GridMap> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Format("malformed header: empty file".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 6 || h[0] != "gmap" || h[1] != "1" {
        return Err(Error::Format(format!("malformed header {header:?}")));
    }
    let n = parse_usize(h[2], "dimension")?;
    let m = parse_usize(h[3], "grid size")?;
    let k = parse_usize(h[5], "k")?;
    let target = match (h[4], k) {
        ("circle", 2) => Target::Circle,
        ("sphere", 3) => Target::Sphere,
        ("ambient", 2 | 3) => Target::Ambient(k),
        _ => return Err(Error::Format(format!("malformed header: target {} with k = {k}", h[4]))),
    };
    let grid = TorusGrid::unit(n, m).map_err(|e| Error::Format(format!("malformed header: {e}")))?;
    let width = target.width();
    let expected = grid.num_vertices();
    let mut values = Vec::with_capacity(expected * width);
    let mut count = 0;
    for (i, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != width {
            return Err(Error::Format(format!("line {}: expected {width} values, found {}", i + 1, fields.len())));
        }
        for f in fields {
            values.push(parse_f64(f, i + 1)?);
        }
        count += 1;
    }
    if count != expected {
        return Err(Error::Format(format!("count mismatch: expected {expected} vertex values, found {count}")));
    }
    match target {
        Target::Circle => {
            if let Some(i) = values.iter().position(|a| !(0.0..crate::maps::TWO_PI).contains(a)) {
                return Err(Error::Format(format!("vertex {i}: angle {} outside [0, 2pi)", values[i])));
            }
            GridMap::circle(grid, values)
        }
        Target::Sphere => {
            let vecs: Vec<[f64; 3]> = values.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            for (i, v) in vecs.iter().enumerate() {
                let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if (norm - 1.0).abs() > 1e-9 {
                    return Err(Error::Format(format!("vertex {i}: sphere value has norm {norm}")));
                }
            }
            Ok(GridMap::sphere_unchecked(grid, values))
        }
        Target::Ambient(d) => GridMap::ambient(grid, d, values),
    }
}

pub fn save_map(path: &Path, u: &GridMap) -> Result<()> {
    std::fs::write(path, write_map(u)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn load_map(path: &Path) -> Result<GridMap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_map(&text)
}

pub fn write_chain(c: &Chain) -> String {
    let grid = c.complex().grid();
    let mut out = format!("chain 1 {} {} {}\n", grid.n(), grid.m(), c.dim());
    for (i, v) in c.terms() {
        writeln!(out, "{i} {v}").expect("writing to a string");
    }
    out
}

/// Parses a chain onto the zero-offset complex of the header's size.
pub fn read_chain(text: &str) -> Result<Chain> {
    read_chain_with(text, None)
}

/// Parses a chain onto `complex` (for instance a dual complex, whose offset
/// the header does not record); sizes must match.
pub fn read_chain_on(text: &str, complex: &CubicalComplex) -> Result<Chain> {
    read_chain_with(text, Some(complex))
}

fn read_chain_with(text: &str, complex: Option<&CubicalComplex>) -> Result<Chain> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Format("malformed header: empty file".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 5 || h[0] != "chain" || h[1] != "1" {
        return Err(Error::Format(format!("malformed header {header:?}")));
    }
    let n = parse_usize(h[2], "dimension")?;
    let m = parse_usize(h[3], "grid size")?;
    let dim = parse_usize(h[4], "chain dimension")?;
    let cx = match complex {
        Some(c) if c.n() == n && c.grid().m() == m => c.clone(),
        Some(c) => {
            return Err(Error::Format(format!("chain on T^{n} with m = {m}, complex has T^{} with m = {}", c.n(), c.grid().m())))
        }
        None => CubicalComplex::build(n, m, &vec![0.0; n]).map_err(|e| Error::Format(format!("malformed header: {e}")))?,
    };
    let mut terms = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Format(format!("line {}: expected `cell-index coefficient`", i + 1));
        if f.len() != 2 {
            return Err(bad());
        }
        terms.push((f[0].parse::<usize>().map_err(|_| bad())?, f[1].parse::<i64>().map_err(|_| bad())?));
    }
    Chain::from_terms(&cx, dim, terms)
}

pub fn save_chain(path: &Path, c: &Chain) -> Result<()> {
    std::fs::write(path, write_chain(c)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn load_chain(path: &Path) -> Result<Chain> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_chain(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{hedgehog, vortex_pair};
    use proptest::prelude::*;

    #[test]
    fn constant_map_round_trips() {
        let u = GridMap::constant_circle(TorusGrid::unit(2, 4).unwrap(), 1.25);
        assert_eq!(read_map(&write_map(&u).unwrap()).unwrap(), u);
    }

    #[test]
    fn sphere_and_ambient_round_trip() {
        let s = hedgehog(TorusGrid::unit(3, 4).unwrap(), [0.4, 0.4, 0.4]).unwrap();
        assert_eq!(read_map(&write_map(&s).unwrap()).unwrap().values(), s.values());
        let a = vortex_pair(TorusGrid::unit(2, 8).unwrap(), [0.3, 0.3], [0.6, 0.6]).unwrap().to_ambient();
        assert_eq!(read_map(&write_map(&a).unwrap()).unwrap(), a);
    }

    #[test]
    fn truncated_file_names_counts() {
        let u = GridMap::random_circle(TorusGrid::unit(2, 4).unwrap(), 3);
        let text = write_map(&u).unwrap();
        let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        match read_map(&cut) {
            Err(Error::Format(msg)) => assert!(msg.contains("expected 16") && msg.contains("found 9"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_headers_and_norms_are_rejected() {
        assert!(matches!(read_map("gmap 2 2 4 circle 2\n"), Err(Error::Format(_))));
        assert!(matches!(read_map("map 1 2 4 circle 2\n"), Err(Error::Format(_))));
        assert!(matches!(read_map("gmap 1 2 4 circle 3\n"), Err(Error::Format(_))));
        let mut text = String::from("gmap 1 2 3 sphere 3\n");
        for i in 0..9 {
            text.push_str(if i == 4 { "1.01 0 0\n" } else { "0 0 1\n" });
        }
        match read_map(&text) {
            Err(Error::Format(msg)) => assert!(msg.contains("norm"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn chains_round_trip() {
        let u = vortex_pair(TorusGrid::unit(2, 8).unwrap(), [0.3, 0.3], [0.6, 0.6]).unwrap();
        let t = crate::cycles::jacobian_cycle(&u).unwrap();
        let back = read_chain_on(&write_chain(&t), t.complex()).unwrap();
        assert_eq!(back, t);
        let plain = read_chain(&write_chain(&t)).unwrap();
        assert_eq!(plain.terms().collect::<Vec<_>>(), t.terms().collect::<Vec<_>>());
        assert!(matches!(read_chain("chain 1 2 4 1\n3\n"), Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn circle_values_round_trip_bitwise(angles in proptest::collection::vec(0.0..crate::maps::TWO_PI, 16)) {
            let u = GridMap::circle(TorusGrid::unit(2, 4).unwrap(), angles).unwrap();
            let back = read_map(&write_map(&u).unwrap()).unwrap();
            prop_assert!(back.values().iter().zip(u.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
