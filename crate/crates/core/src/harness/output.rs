//! CSV and SVG writers, plus readers for the policy and distribution files.
//!
//! Floats are written with Rust's shortest round-trip formatting, so files
//! read back to the same bits and reruns are byte-identical. Missing values
//! are empty fields.

use std::fmt::Write as _;
use std::path::Path;

use crate::envs::GridCrowd;
use crate::error::{Error, Result};
use crate::trace::IterRecord;
use crate::types::{Dist, Policy};

pub const METRICS_HEADER: &str = "k,exploitability_reg,exploitability_unreg,mu_drift_l1,value,wall_ms";

/// Color at zero mass; cells interpolate linearly toward [`HEAT_HIGH`] at the
/// snapshot's maximum mass.
pub const HEAT_LOW: [u8; 3] = [0xff, 0xff, 0xff];
pub const HEAT_HIGH: [u8; 3] = [0x08, 0x30, 0x6b];
const WALL_FILL: &str = "#808080";
const CELL_PX: usize = 40;

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn float(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

pub fn metrics_row(r: &IterRecord, timing: bool) -> String {
    format!(
        "{},{},{},{},{},{}",
        r.k,
        opt(r.exploitability),
        opt(r.exploitability_unreg),
        float(r.mu_drift),
        float(r.value),
        if timing { float(r.wall_ms) } else { "0".into() }
    )
}

pub fn metrics_csv<'a>(records: impl IntoIterator<Item = &'a IterRecord>, timing: bool) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&metrics_row(r, timing));
        out.push('\n');
    }
    out
}

/// Column-wise arithmetic mean over seeds, row by row. A field is left empty
/// unless every seed has it.
pub fn summary_csv(per_seed: &[Vec<IterRecord>], timing: bool) -> Result<String> {
    let Some(first) = per_seed.first() else {
        return Err(Error::invalid("summary needs at least one seed"));
    };
    if per_seed.iter().any(|s| s.len() != first.len()) {
        return Err(Error::invalid("seeds produced different record counts"));
    }
    let n = per_seed.len() as f64;
    let mean = |f: &dyn Fn(&IterRecord) -> Option<f64>, i: usize| -> Option<f64> {
        let vals: Option<Vec<f64>> = per_seed.iter().map(|s| f(&s[i]).filter(|x| !x.is_nan())).collect();
        vals.map(|v| v.iter().sum::<f64>() / n)
    };
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for (i, r) in first.iter().enumerate() {
        let wall = if timing {
            opt(mean(&|r| Some(r.wall_ms), i))
        } else {
            "0".into()
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.k,
            opt(mean(&|r| r.exploitability, i)),
            opt(mean(&|r| r.exploitability_unreg, i)),
            opt(mean(&|r| Some(r.mu_drift), i)),
            opt(mean(&|r| Some(r.value), i)),
            wall
        )
        .expect("writing to a String");
    }
    Ok(out)
}

/// `state,mu`, or `state,x,y,mu` when a grid is given.
pub fn mu_csv(mu: &Dist, grid: Option<&GridCrowd>) -> String {
    let mut out = String::from(if grid.is_some() { "state,x,y,mu\n" } else { "state,mu\n" });
    for (s, &m) in mu.as_slice().iter().enumerate() {
        match grid {
            Some(g) => {
                let (x, y) = g.cell_of(s);
                writeln!(out, "{s},{x},{y},{m}")
            }
            None => writeln!(out, "{s},{m}"),
        }
        .expect("writing to a String");
    }
    out
}

/// `state,a0,a1,...`, one row per state.
pub fn policy_csv(pi: &Policy) -> String {
    let mut out = String::from("state");
    for a in 0..pi.n_actions() {
        write!(out, ",a{a}").expect("writing to a String");
    }
    out.push('\n');
    for s in 0..pi.n_states() {
        write!(out, "{s}").expect("writing to a String");
        for p in pi.row(s) {
            write!(out, ",{p}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

fn cell_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        line,
        msg: msg.into(),
    }
}

/// Header and data rows of a comma-separated file, with 1-based line numbers.
fn read_rows(path: &Path) -> Result<(String, Vec<csv::StringRecord>, Vec<usize>)> {
    let label = path.display().to_string();
    let file = std::fs::File::open(path).map_err(Error::io(path))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header_len = reader
        .headers()
        .map_err(|e| cell_err(&label, 1, e.to_string()))?
        .len();
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            cell_err(&label, line, e.to_string())
        })?;
        lines.push(rec.position().map_or(0, |p| p.line() as usize));
        rows.push(rec);
    }
    if header_len == 0 {
        return Err(cell_err(&label, 1, "missing header"));
    }
    Ok((label, rows, lines))
}

fn parse_field(path: &str, line: usize, f: &str) -> Result<f64> {
    f.parse::<f64>()
        .map_err(|_| cell_err(path, line, format!("not a number: `{f}`")))
}

fn check_state(path: &str, line: usize, f: &str, expected: usize) -> Result<()> {
    match f.parse::<usize>() {
        Ok(s) if s == expected => Ok(()),
        _ => Err(cell_err(path, line, format!("expected state {expected}, got `{f}`"))),
    }
}

/// Reads a file written by [`mu_csv`]; the last column is the mass.
pub fn read_mu_csv(path: &Path) -> Result<Dist> {
    let (label, rows, lines) = read_rows(path)?;
    let mut mass = Vec::with_capacity(rows.len());
    for (rec, &line) in rows.iter().zip(&lines) {
        if rec.len() < 2 {
            return Err(cell_err(&label, line, "expected at least two columns"));
        }
        check_state(&label, line, &rec[0], mass.len())?;
        mass.push(parse_field(&label, line, &rec[rec.len() - 1])?);
    }
    Dist::from_stored(mass).map_err(|e| cell_err(&label, 0, e.to_string()))
}

/// Reads a file written by [`policy_csv`].
pub fn read_policy_csv(path: &Path) -> Result<Policy> {
    let (label, rows, lines) = read_rows(path)?;
    let n_actions = rows.first().map_or(0, |r| r.len().saturating_sub(1));
    if n_actions == 0 {
        return Err(cell_err(&label, 1, "expected `state,a0,...` with at least one row"));
    }
    let mut probs = Vec::with_capacity(rows.len() * n_actions);
    for (s, (rec, &line)) in rows.iter().zip(&lines).enumerate() {
        check_state(&label, line, &rec[0], s)?;
        for f in rec.iter().skip(1) {
            probs.push(parse_field(&label, line, f)?);
        }
    }
    Policy::from_stored(rows.len(), n_actions, probs).map_err(|e| cell_err(&label, 0, e.to_string()))
}

fn heat_color(m: f64, max: f64) -> String {
    let t = if max > 0.0 { (m / max).clamp(0.0, 1.0) } else { 0.0 };
    let c: Vec<u8> = (0..3)
        .map(|i| (HEAT_LOW[i] as f64 + t * (HEAT_HIGH[i] as f64 - HEAT_LOW[i] as f64)).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// SVG 1.1 heatmap of `mu` over the grid. The color of a cell is linear in
/// its mass, from white at 0 to dark blue at the snapshot maximum; walls are
/// grey. The raw values are embedded as CSV inside `<metadata>` and per cell
/// in `<title>`.
pub fn heatmap_svg(grid: &GridCrowd, mu: &Dist, caption: &str) -> String {
    let (w, h) = (grid.width(), grid.height());
    let max = mu.as_slice().iter().copied().fold(0.0, f64::max);
    let (pw, ph) = (w * CELL_PX, h * CELL_PX + 24);
    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{pw}" height="{ph}" viewBox="0 0 {pw} {ph}">"#
    )
    .unwrap();
    writeln!(out, "<metadata><![CDATA[\nscale=linear,low=#ffffff@0,high=#08306b@{max}").unwrap();
    out.push_str(&mu_csv(mu, Some(grid)));
    writeln!(out, "]]></metadata>").unwrap();
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x * CELL_PX, y * CELL_PX);
            match grid.state_of(x, y) {
                Some(s) => writeln!(
                    out,
                    r##"<rect x="{px}" y="{py}" width="{CELL_PX}" height="{CELL_PX}" fill="{}" stroke="#cccccc"><title>{x}:{y} {}</title></rect>"##,
                    heat_color(mu[s], max),
                    mu[s]
                ),
                None => writeln!(
                    out,
                    r#"<rect x="{px}" y="{py}" width="{CELL_PX}" height="{CELL_PX}" fill="{WALL_FILL}"/>"#
                ),
            }
            .unwrap();
        }
    }
    writeln!(
        out,
        r#"<text x="4" y="{}" font-family="sans-serif" font-size="12">{} (max {:.4})</text>"#,
        h * CELL_PX + 16,
        escape(caption),
        max
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::GridSpec;

    fn rec(k: usize, phi: Option<f64>) -> IterRecord {
        IterRecord {
            k,
            exploitability: phi,
            exploitability_unreg: None,
            mu_drift: 0.5,
            value: 1.0,
            wall_ms: 12.0,
        }
    }

    #[test]
    fn metrics_hide_time_by_default() {
        let csv = metrics_csv(&[rec(0, Some(0.25)), rec(1, None)], false);
        assert_eq!(csv, format!("{METRICS_HEADER}\n0,0.25,,0.5,1,0\n1,,,0.5,1,0\n"));
    }

    #[test]
    fn summary_is_mean_and_drops_partial_fields() {
        let a = vec![rec(0, Some(1.0)), rec(1, Some(2.0))];
        let b = vec![rec(0, Some(3.0)), rec(1, None)];
        let csv = summary_csv(&[a, b], false).unwrap();
        assert_eq!(csv, format!("{METRICS_HEADER}\n0,2,,0.5,1,0\n1,,,0.5,1,0\n"));
    }

    #[test]
    fn heat_colors_are_linear() {
        assert_eq!(heat_color(0.0, 1.0), "#ffffff");
        assert_eq!(heat_color(1.0, 1.0), "#08306b");
        assert_eq!(heat_color(0.5, 1.0), "#8498b5");
        assert_eq!(heat_color(0.3, 0.0), "#ffffff");
    }

    #[test]
    fn svg_embeds_values() {
        let g = GridCrowd::new(GridSpec::five_by_five(true)).unwrap();
        let mu = g.nu();
        let svg = heatmap_svg(&g, &mu, "step 0");
        assert!(svg.contains("0,0,0,1\n"));
        assert_eq!(svg.matches("<rect").count(), 25);
        assert_eq!(svg.matches(WALL_FILL).count(), 3);
    }
}
