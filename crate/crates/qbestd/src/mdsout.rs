//! MDS artifacts: coordinate and ellipse CSVs, an SVG scatter plot and a
//! metadata record.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qbestd_core::analysis::{ellipse_95, EllipseParams, MdsEmbedding};
use serde::{Deserialize, Serialize};

use crate::report::{csv_field, write_text};
use crate::{Error, Result};

pub const METHOD: &str = "classical (Torgerson) MDS on Euclidean distances between segment-mean feature vectors";
pub const ELLIPSE_KIND: &str =
    "95% data ellipse: sample covariance scaled by the chi-square 2-df 0.95 quantile (5.991464); not a confidence region for the mean";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdsMetadata {
    pub method: String,
    pub ellipse: String,
    pub n_tokens: usize,
    pub classes: BTreeMap<String, usize>,
    pub stress: f64,
    pub eigenvalues: Vec<f64>,
    pub negative_eigenvalues: usize,
    pub diagnostics: Vec<String>,
}

impl MdsMetadata {
    pub fn new(labels: &[String], emb: &MdsEmbedding, diagnostics: Vec<String>) -> Self {
        let mut classes = BTreeMap::new();
        for l in labels {
            *classes.entry(l.clone()).or_insert(0) += 1;
        }
        Self {
            method: METHOD.into(),
            ellipse: ELLIPSE_KIND.into(),
            n_tokens: labels.len(),
            classes,
            stress: emb.stress,
            eigenvalues: emb.eigenvalues.clone(),
            // tiny negatives are rounding noise from the eigensolver
            negative_eigenvalues: emb
                .eigenvalues
                .iter()
                .filter(|&&v| v < -1e-9 * emb.eigenvalues.first().map_or(1.0, |m| m.abs().max(1.0)))
                .count(),
            diagnostics,
        }
    }
}

/// Groups 2-D points by label (sorted) and fits one ellipse per class with
/// at least three tokens; smaller classes produce a diagnostic instead.
pub fn class_ellipses(labels: &[String], emb: &MdsEmbedding) -> (Vec<EllipseParams>, Vec<String>) {
    let mut groups: BTreeMap<&str, Vec<[f64; 2]>> = BTreeMap::new();
    for (l, p) in labels.iter().zip(&emb.points) {
        groups.entry(l).or_default().push(xy(p));
    }
    let mut ellipses = Vec::new();
    let mut diags = Vec::new();
    for (label, pts) in groups {
        match ellipse_95(label, &pts) {
            Ok(e) => {
                if e.degenerate {
                    diags.push(format!("class {label}: points are collinear; ellipse has zero minor axis"));
                }
                ellipses.push(e);
            }
            Err(e) => diags.push(format!("class {label}: no ellipse ({e})")),
        }
    }
    (ellipses, diags)
}

fn xy(p: &[f64]) -> [f64; 2] {
    [p.first().copied().unwrap_or(0.0), p.get(1).copied().unwrap_or(0.0)]
}

#[derive(Debug, Clone)]
pub struct MdsPaths {
    pub coordinates: PathBuf,
    pub ellipses: PathBuf,
    pub svg: PathBuf,
    pub metadata: PathBuf,
}

impl MdsPaths {
    pub fn for_prefix(prefix: &Path) -> Self {
        let with = |suffix: &str| {
            let mut s = prefix.as_os_str().to_os_string();
            s.push(suffix);
            PathBuf::from(s)
        };
        Self {
            coordinates: with("_coords.csv"),
            ellipses: with("_ellipses.csv"),
            svg: with(".svg"),
            metadata: with("_meta.json"),
        }
    }
}

pub fn emit_mds_outputs(
    labels: &[String],
    emb: &MdsEmbedding,
    ellipses: &[EllipseParams],
    meta: &MdsMetadata,
    prefix: &Path,
) -> Result<MdsPaths> {
    if emb.points.is_empty() {
        return Err(Error::Invalid("MDS embedding is empty".into()));
    }
    if labels.len() != emb.points.len() {
        return Err(Error::Invalid(format!(
            "{} labels for {} embedded points",
            labels.len(),
            emb.points.len()
        )));
    }
    let paths = MdsPaths::for_prefix(prefix);
    write_text(&paths.coordinates, &format_coordinates(labels, emb))?;
    write_text(&paths.ellipses, &format_ellipses(ellipses))?;
    write_text(&paths.svg, &render_svg(labels, emb, ellipses))?;
    let mut json = serde_json::to_string_pretty(meta).expect("metadata serializes");
    json.push('\n');
    write_text(&paths.metadata, &json)?;
    Ok(paths)
}

pub fn format_coordinates(labels: &[String], emb: &MdsEmbedding) -> String {
    let mut out = String::from("label,x,y\n");
    for (l, p) in labels.iter().zip(&emb.points) {
        let [x, y] = xy(p);
        let _ = writeln!(out, "{},{x:.9},{y:.9}", csv_field(l));
    }
    out
}

pub fn format_ellipses(ellipses: &[EllipseParams]) -> String {
    let mut out = String::from("label,cx,cy,a,b,theta\n");
    for e in ellipses {
        let _ = writeln!(
            out,
            "{},{:.9},{:.9},{:.9},{:.9},{:.9}",
            csv_field(&e.label),
            e.center[0],
            e.center[1],
            e.semi_axes[0],
            e.semi_axes[1],
            e.rotation_radians
        );
    }
    out
}

/// Reads a coordinates CSV back. Labels containing commas are not supported.
pub fn read_coordinates(path: &Path) -> Result<Vec<(String, f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let corrupt = |msg: String| Error::Corrupt {
        path: path.to_path_buf(),
        msg,
    };
    let mut lines = text.lines();
    if lines.next() != Some("label,x,y") {
        return Err(corrupt("expected header label,x,y".into()));
    }
    lines
        .enumerate()
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| s.parse::<f64>().map_err(|_| corrupt(format!("line {}: bad number {s:?}", n + 2)));
            match f.as_slice() {
                [l, x, y] => Ok((l.to_string(), parse(x)?, parse(y)?)),
                _ => Err(corrupt(format!("line {}: expected 3 columns", n + 2))),
            }
        })
        .collect()
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
const SIZE: f64 = 640.0;
const MARGIN: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Self-contained SVG: one dot per token, one ellipse per fitted class and
/// one text label at each class mean. Data y points up.
pub fn render_svg(labels: &[String], emb: &MdsEmbedding, ellipses: &[EllipseParams]) -> String {
    let pts: Vec<[f64; 2]> = emb.points.iter().map(|p| xy(p)).collect();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    let mut grow = |x: f64, y: f64| {
        lo = [lo[0].min(x), lo[1].min(y)];
        hi = [hi[0].max(x), hi[1].max(y)];
    };
    for p in &pts {
        grow(p[0], p[1]);
    }
    for e in ellipses {
        // bounding box of the major-axis circle is enough for framing
        let r = e.semi_axes[0];
        grow(e.center[0] - r, e.center[1] - r);
        grow(e.center[0] + r, e.center[1] + r);
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let sx = |x: f64| SIZE / 2.0 + (x - mid[0]) * scale;
    let sy = |y: f64| SIZE / 2.0 - (y - mid[1]) * scale;

    let mut classes: Vec<&str> = labels.iter().map(String::as_str).collect();
    classes.sort_unstable();
    classes.dedup();
    let color = |label: &str| PALETTE[classes.binary_search(&label).unwrap_or(0) % PALETTE.len()];

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    for e in ellipses {
        let (cx, cy) = (sx(e.center[0]), sy(e.center[1]));
        let _ = writeln!(
            s,
            "<ellipse cx=\"{cx:.3}\" cy=\"{cy:.3}\" rx=\"{:.3}\" ry=\"{:.3}\" transform=\"rotate({:.3} {cx:.3} {cy:.3})\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
            e.semi_axes[0] * scale,
            e.semi_axes[1] * scale,
            -e.rotation_radians.to_degrees(),
            color(&e.label)
        );
    }
    for (l, p) in labels.iter().zip(&pts) {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.7\"/>",
            sx(p[0]),
            sy(p[1]),
            color(l)
        );
    }
    for c in &classes {
        let members: Vec<&[f64; 2]> = labels.iter().zip(&pts).filter(|(l, _)| l == c).map(|(_, p)| p).collect();
        let n = members.len() as f64;
        let mx = members.iter().map(|p| p[0]).sum::<f64>() / n;
        let my = members.iter().map(|p| p[1]).sum::<f64>() / n;
        let _ = writeln!(
            s,
            "<text x=\"{:.3}\" y=\"{:.3}\" font-family=\"sans-serif\" font-size=\"16\" font-weight=\"bold\" text-anchor=\"middle\" fill=\"{}\">{}</text>",
            sx(mx),
            sy(my),
            color(c),
            escape(c)
        );
    }
    s.push_str("</svg>\n");
    s
}
