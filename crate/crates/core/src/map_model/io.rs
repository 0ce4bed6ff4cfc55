//! Text format: header `m n R h count`, then one line per node with `m`
//! coordinates, `n` values and optionally `n` residual components.

use std::fmt::Write as _;
use std::path::Path;

use super::domain::GridDomain;
use super::sampled::{compute_tension, from_node_values, SampledMap};
use crate::error::Result;
use crate::textio::{as_count, content_lines, numbers, parse_err};

/// Parses a map file. Nodes may appear in any order but must fill the lattice ball.
pub fn parse_map(text: &str) -> Result<SampledMap> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let hv = numbers(hline, header)?;
    if hv.len() != 5 {
        return Err(parse_err(hline, "header must be `m n R h count`"));
    }
    let as_count = |x: f64, what: &str| as_count(hline, x, what);
    let m = as_count(hv[0], "m")?;
    let n = as_count(hv[1], "n")?;
    let (radius, h) = (hv[2], hv[3]);
    let count = as_count(hv[4], "count")?;
    if m < 2 || n == 0 {
        return Err(parse_err(hline, "need m >= 2 and n >= 1"));
    }

    let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(count);
    let mut with_residual = None;
    for (no, line) in lines {
        let v = numbers(no, line)?;
        let has_res = match v.len() {
            l if l == m + n => false,
            l if l == m + 2 * n => true,
            l => {
                return Err(parse_err(
                    no,
                    format!("expected {} or {} fields, found {l}", m + n, m + 2 * n),
                ))
            }
        };
        if *with_residual.get_or_insert(has_res) != has_res {
            return Err(parse_err(no, "residual columns must be present on every node or none"));
        }
        rows.push((no, v));
    }
    if rows.len() != count {
        let at = rows.last().map_or(hline, |(no, _)| *no);
        return Err(parse_err(
            at,
            format!("header declares {count} nodes, file has {}", rows.len()),
        ));
    }
    if count == 0 {
        return Err(parse_err(hline, "no nodes"));
    }

    // The node set is symmetric about the origin, so its mean recovers it.
    let mut origin = vec![0.0; m];
    for (_, v) in &rows {
        for d in 0..m {
            origin[d] += v[d];
        }
    }
    for (d, o) in origin.iter_mut().enumerate() {
        *o /= count as f64;
        // Snap to the lattice through the first node.
        let first = rows[0].1[d];
        *o = first + ((*o - first) / h).round() * h;
    }
    let domain = GridDomain::new(m, radius, h, origin).map_err(|e| parse_err(hline, e.to_string()))?;
    let expected = domain.node_count();
    if expected != count {
        return Err(parse_err(
            hline,
            format!("a lattice ball with these parameters has {expected} nodes, header declares {count}"),
        ));
    }

    let hw = domain.half_width();
    let w = (2 * hw + 1) as usize;
    let mut slot_row = vec![usize::MAX; w.pow(m as u32)];
    for (r, (no, v)) in rows.iter().enumerate() {
        let idx = domain.nearest_index(&v[..m]);
        let mut pos = vec![0.0; m];
        domain.position(&idx, &mut pos);
        let off = crate::vecmath::dist(&pos, &v[..m]);
        if off > 1e-6 * h || !domain.contains(&pos) || idx.iter().any(|i| i.abs() > hw) {
            return Err(parse_err(*no, "coordinates are not a lattice node of the domain ball"));
        }
        let slot = idx.iter().fold(0i64, |s, &i| s * w as i64 + (i + hw)) as usize;
        if slot_row[slot] != usize::MAX {
            return Err(parse_err(*no, "duplicate node"));
        }
        slot_row[slot] = r;
        let len = crate::vecmath::norm(&v[m..m + n]);
        if (len - 1.0).abs() > 1e-6 {
            return Err(parse_err(*no, format!("value has norm {len}, expected 1")));
        }
    }

    let mut values = Vec::with_capacity(count * n);
    let mut residuals = with_residual.unwrap_or(false).then(|| Vec::with_capacity(count * n));
    let mut missing = None;
    domain.for_each_node(|idx, _| {
        let slot = idx.iter().fold(0i64, |s, &i| s * w as i64 + (i + hw)) as usize;
        let r = slot_row[slot];
        if r == usize::MAX {
            missing.get_or_insert(idx.to_vec());
            return;
        }
        let v = &rows[r].1;
        let len = crate::vecmath::norm(&v[m..m + n]);
        values.extend(v[m..m + n].iter().map(|x| x / len));
        if let Some(res) = residuals.as_mut() {
            res.extend_from_slice(&v[m + n..m + 2 * n]);
        }
    });
    if let Some(idx) = missing {
        return Err(parse_err(hline, format!("lattice node {idx:?} is missing")));
    }
    from_node_values(&domain, n, values, residuals)
}

pub fn read_map(path: &Path) -> Result<SampledMap> {
    parse_map(&std::fs::read_to_string(path)?)
}

/// Serializes every node with its residual, in lexicographic node order.
#[must_use]
pub fn format_map(map: &SampledMap) -> String {
    let d = map.domain();
    let n = map.target_dim();
    let values = map.node_values();
    let tension = compute_tension(map);
    let mut out = String::new();
    let count = values.len() / n;
    let _ = writeln!(out, "{} {} {} {} {}", d.dim(), n, d.radius(), d.spacing(), count);
    let mut k = 0;
    d.for_each_node(|_, p| {
        let fields = p
            .iter()
            .chain(&values[k * n..(k + 1) * n])
            .chain(&tension.values[k * n..(k + 1) * n])
            .map(f64::to_string)
            .collect::<Vec<_>>();
        let _ = writeln!(out, "{}", fields.join(" "));
        k += 1;
    });
    out
}

pub fn write_map(map: &SampledMap, path: &Path) -> Result<()> {
    std::fs::write(path, format_map(map))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::map_model::{sample_map, CatalogEntry};

    #[test]
    fn round_trip() {
        let d = GridDomain::centered(3, 3.0, 8).unwrap();
        let u = sample_map(&CatalogEntry::perturbed(3, 0.1).unwrap(), &d).unwrap();
        let text = format_map(&u);
        let v = parse_map(&text).unwrap();
        assert_eq!(v.domain(), u.domain());
        let (a, b) = (u.node_values(), v.node_values());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn count_mismatch_names_a_line() {
        let d = GridDomain::centered(2, 2.0, 8).unwrap();
        let u = sample_map(&CatalogEntry::parse("constant", 2).unwrap(), &d).unwrap();
        let text = format_map(&u);
        let mut lines: Vec<&str> = text.lines().collect();
        lines.pop();
        let err = parse_map(&lines.join("\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn malformed_field_is_reported_with_its_line() {
        let text = "2 2 1 0.125 1\n0 0 1 x\n";
        match parse_map(text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
    }
}
