//! Two-axis scatter of the embedding as CSV and as a standalone SVG.

use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ScatterPoint {
    pub node_id: String,
    /// `user` or `claim`.
    pub node_type: String,
    pub x: f64,
    pub y: f64,
    pub label: Option<String>,
}

pub const SCATTER_HEADER: [&str; 5] = ["node_id", "node_type", "x", "y", "label"];
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const UNLABELED: &str = "#9e9e9e";

/// CSV with header `node_id,node_type,x,y,label`; coordinates have six
/// decimals and unlabeled nodes get `-`.
pub fn scatter_csv(points: &[ScatterPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Data(format!("scatter csv: {e}"));
    w.write_record(SCATTER_HEADER).map_err(err)?;
    for p in points {
        w.write_record([
            p.node_id.as_str(),
            p.node_type.as_str(),
            &format!("{:.6}", p.x),
            &format!("{:.6}", p.y),
            p.label.as_deref().unwrap_or("-"),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(format!("scatter csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Self-contained SVG: users as circles, claims as squares, colored by
/// label, with the diagonal `y = x` separating the two axes.
pub fn scatter_svg(points: &[ScatterPoint], x_name: &str, y_name: &str) -> String {
    const SIZE: f64 = 480.0;
    const PAD: f64 = 40.0;
    let max = points
        .iter()
        .flat_map(|p| [p.x, p.y])
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let min = points
        .iter()
        .flat_map(|p| [p.x, p.y])
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::min);
    let span = if max > min { max - min } else { 1.0 };
    let sx = |v: f64| PAD + (v - min) / span * (SIZE - 2.0 * PAD);
    let sy = |v: f64| SIZE - PAD - (v - min) / span * (SIZE - 2.0 * PAD);

    let mut labels: Vec<&str> = points.iter().filter_map(|p| p.label.as_deref()).collect();
    labels.sort_unstable();
    labels.dedup();
    let color = |label: Option<&str>| match label {
        Some(l) => PALETTE[labels.binary_search(&l).expect("collected") % PALETTE.len()],
        None => UNLABELED,
    };

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#444\" stroke-dasharray=\"4 4\"/>\n\
         <line x1=\"{PAD}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{:.2}\" stroke=\"black\"/>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n\
         <text x=\"12\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 12 {:.2})\">{}</text>\n",
        sx(min),
        sy(min),
        sx(max.max(min + span)),
        sy(max.max(min + span)),
        SIZE - PAD,
        SIZE - PAD,
        SIZE - PAD,
        SIZE - PAD,
        SIZE / 2.0,
        SIZE - 10.0,
        escape(x_name),
        SIZE / 2.0,
        SIZE / 2.0,
        escape(y_name),
    );
    for p in points {
        let (x, y) = (sx(p.x), sy(p.y));
        let fill = color(p.label.as_deref());
        let title = escape(&p.node_id);
        if p.node_type == "claim" {
            svg.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"6\" height=\"6\" fill=\"{fill}\" fill-opacity=\"0.7\"><title>{title}</title></rect>\n",
                x - 3.0,
                y - 3.0
            ));
        } else {
            svg.push_str(&format!(
                "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{fill}\" fill-opacity=\"0.7\"><title>{title}</title></circle>\n"
            ));
        }
    }
    for (i, l) in labels.iter().enumerate() {
        let y = PAD + 14.0 * i as f64;
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"{}\"/><text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>\n",
            SIZE - PAD - 60.0,
            PALETTE[i % PALETTE.len()],
            SIZE - PAD - 52.0,
            y + 4.0,
            escape(l)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes the CSV and, when `svg_path` is given, the SVG.
pub fn emit_scatter(
    points: &[ScatterPoint],
    axis_names: (&str, &str),
    csv_path: &Path,
    svg_path: Option<&Path>,
) -> Result<()> {
    write_atomic(csv_path, scatter_csv(points)?.as_bytes())?;
    if let Some(p) = svg_path {
        write_atomic(p, scatter_svg(points, axis_names.0, axis_names.1).as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points() -> Vec<ScatterPoint> {
        vec![
            ScatterPoint {
                node_id: "alice".into(),
                node_type: "user".into(),
                x: 1.25,
                y: 0.0,
                label: Some("R".into()),
            },
            ScatterPoint {
                node_id: "claim, with comma".into(),
                node_type: "claim".into(),
                x: 0.1234567,
                y: 2.0,
                label: Some("D".into()),
            },
            ScatterPoint {
                node_id: "bob".into(),
                node_type: "user".into(),
                x: 0.0,
                y: 0.0,
                label: None,
            },
        ]
    }

    #[test]
    fn csv_rows_and_round_trip() {
        let text = scatter_csv(&points()).unwrap();
        let mut r = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(r.headers().unwrap(), SCATTER_HEADER.as_slice());
        let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 3);
        assert_eq!(&rows[2][4], "-");
        assert_eq!(&rows[1][0], "claim, with comma");
        for (row, p) in rows.iter().zip(points()) {
            let x: f64 = row[2].parse().unwrap();
            let y: f64 = row[3].parse().unwrap();
            assert!((x - p.x).abs() <= 5e-7 && (y - p.y).abs() <= 5e-7);
        }
    }

    #[test]
    fn svg_has_every_point_and_the_diagonal() {
        let svg = scatter_svg(&points(), "axis 0", "axis 2");
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<title>").count(), 3);
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("claim, with comma"));
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("s.csv");
        let svg = dir.path().join("s.svg");
        emit_scatter(&points(), ("a", "b"), &csv, Some(&svg)).unwrap();
        assert!(csv.exists() && svg.exists());
        let err = emit_scatter(&points(), ("a", "b"), Path::new("/proc/none/s.csv"), None);
        assert!(err.is_err());
    }
}
