//! Portable graymaps and whitespace-delimited record streams.

use std::fmt::Write as _;

use crate::cutlocus::CutLocusEstimate;
use crate::field::{CellLabel, FieldGrid};
use crate::flow::FlowCurve;

/// Shortest round-trip formatting, with `inf`, `-inf` and `nan` spelled out.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 {
        "0".into()
    } else {
        format!("{x:e}")
    }
}

/// Record stream: a `# col col ...` header line followed by one line per row.
pub fn records<I, R>(columns: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = format!("# {}\n", columns.join(" "));
    for row in rows {
        let cells: Vec<String> = row.into_iter().collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

/// Ordered key-value record. Values must not contain newlines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        let v: String = value.into();
        self.entries.push((key.into(), v.replace(['\n', '\r'], " ")));
        self
    }

    pub fn num(&mut self, key: &str, value: f64) -> &mut Self {
        self.text(key, fmt_f64(value))
    }

    pub fn int(&mut self, key: &str, value: usize) -> &mut Self {
        self.text(key, value.to_string())
    }

    pub fn point(&mut self, key: &str, p: [f64; 2]) -> &mut Self {
        self.text(key, format!("{} {}", fmt_f64(p[0]), fmt_f64(p[1])))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# key value\n");
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} {v}");
        }
        out
    }
}

/// Graymap of `values` laid out row by row from the bottom row up, as grid
/// rows are stored; the image is written top row first. Finite values are
/// scaled linearly onto `0..=max_gray`, non-finite values become 0.
pub fn pgm(width: usize, height: usize, values: &[f64], binary: bool) -> Vec<u8> {
    pgm_with(width, height, values, binary, |_| None)
}

fn pgm_with(width: usize, height: usize, values: &[f64], binary: bool, overlay: impl Fn(usize) -> Option<u8>) -> Vec<u8> {
    assert_eq!(values.len(), width * height, "raster size mismatch");
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut pixels = Vec::with_capacity(values.len());
    for row in (0..height).rev() {
        for col in 0..width {
            let k = row * width + col;
            let g = overlay(k).unwrap_or_else(|| {
                let v = values[k];
                if v.is_finite() { (1.0 + 253.0 * (v - lo) / span).round() as u8 } else { 0 }
            });
            pixels.push(g);
        }
    }
    let mut out = format!("{} {width} {height} 255\n", if binary { "P5" } else { "P2" }).into_bytes();
    if binary {
        out.extend(pixels);
    } else {
        for line in pixels.chunks(width.max(1)) {
            let row: Vec<String> = line.iter().map(u8::to_string).collect();
            out.extend(row.join(" ").into_bytes());
            out.push(b'\n');
        }
    }
    out
}

/// Graymap of `d_A` over the grid.
pub fn field_pgm(grid: &FieldGrid, binary: bool) -> Vec<u8> {
    let [w, h] = grid.region.resolution;
    let values: Vec<f64> = grid.cells.iter().map(|c| c.distance).collect();
    pgm(w, h, &values, binary)
}

/// `d_A` graymap with cut-locus candidates drawn at full intensity.
pub fn cutlocus_pgm(est: &CutLocusEstimate, binary: bool) -> Vec<u8> {
    let grid = &est.grid;
    let [w, h] = grid.region.resolution;
    let values: Vec<f64> = grid.cells.iter().map(|c| c.distance).collect();
    pgm_with(w, h, &values, binary, |k| (grid.cells[k].label == CellLabel::CutCandidate).then_some(255))
}

pub fn field_records(grid: &FieldGrid) -> String {
    let cols = ["i", "j", "x", "y", "d_a", "grad_norm", "grad_angle", "footpoints", "label"];
    records(
        &cols,
        grid.cells.iter().map(|c| {
            let (angle, count) = c.gradient.as_ref().map_or((f64::NAN, 0), |g| (g.grad_angle().unwrap_or(f64::NAN), g.footpoint_count));
            vec![
                c.i.to_string(),
                c.j.to_string(),
                fmt_f64(c.coords[0]),
                fmt_f64(c.coords[1]),
                fmt_f64(c.distance),
                fmt_f64(c.grad_norm()),
                fmt_f64(angle),
                count.to_string(),
                c.label.as_str().to_string(),
            ]
        }),
    )
}

pub fn cutlocus_records(est: &CutLocusEstimate) -> String {
    records(
        &["x", "y", "grad_norm"],
        est.samples.iter().map(|c| vec![fmt_f64(c.point.x()), fmt_f64(c.point.y()), fmt_f64(c.grad_norm)]),
    )
}

pub fn flow_records(curve: &FlowCurve) -> String {
    let mut out = format!("# termination {}\n", curve.termination.as_str());
    out.push_str(&records(
        &["t", "x", "y", "value", "grad_norm", "grad_angle", "arclength"],
        curve.nodes.iter().zip(&curve.arclength).map(|(n, s)| {
            vec![
                fmt_f64(n.t),
                fmt_f64(n.point.x()),
                fmt_f64(n.point.y()),
                fmt_f64(n.value),
                fmt_f64(n.grad_norm),
                fmt_f64(n.grad_angle.unwrap_or(f64::NAN)),
                fmt_f64(*s),
            ]
        }),
    ));
    out
}
