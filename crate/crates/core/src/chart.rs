//! Static SVG charts for sweep results.

use std::path::Path;

use plotters::prelude::*;

use crate::{Error, Result};

/// One line per series over (x, y) points; x positions are often just
/// 0..n with `x_ticks` carrying the labels.
pub fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
    x_ticks: Option<&[String]>,
) -> Result<()> {
    if series.iter().all(|(_, pts)| pts.is_empty()) {
        return Err(Error::config("chart needs at least one data point"));
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io_path(parent, e))?;
    }
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, pts) in series {
        for &(x, y) in pts {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if x_min == x_max {
        x_max = x_min + 1.0;
    }
    let pad = ((y_max - y_min) * 0.1).max(1.0);
    let (y_lo, y_hi) = (y_min - pad, y_max + pad);

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| Error::Eval(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(42)
        .y_label_area_size(54)
        .build_cartesian_2d(x_min..x_max, y_lo..y_hi)
        .map_err(|e| Error::Eval(e.to_string()))?;
    let ticks = x_ticks.map(|t| t.to_vec());
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .x_label_formatter(&move |x: &f64| {
            if let Some(t) = &ticks {
                let i = x.round() as i64;
                if (x - i as f64).abs() < 1e-9 && i >= 0 && (i as usize) < t.len() {
                    return t[i as usize].clone();
                }
                return String::new();
            }
            format!("{x:.2}")
        })
        .draw()
        .map_err(|e| Error::Eval(e.to_string()))?;
    let palette = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = palette[i % palette.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color))
            .map_err(|e| Error::Eval(e.to_string()))?
            .label(name.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
        chart
            .draw_series(pts.iter().map(|&(x, y)| Circle::new((x, y), 3, color.filled())))
            .map_err(|e| Error::Eval(e.to_string()))?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(|e| Error::Eval(e.to_string()))?;
    root.present().map_err(|e| Error::Eval(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn writes_an_svg_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("chart.svg");
        let series = vec![(
            "bleu1".to_string(),
            vec![(0.0, 50.0), (1.0, 75.0), (2.0, 90.0)],
        )];
        let ticks = vec!["small".to_string(), "medium".to_string(), "large".to_string()];
        line_chart(&path, "demo", "size", "BLEU-1", &series, Some(&ticks)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<?xml") || text.contains("<svg"));
        assert!(text.contains("BLEU-1"));
    }

    #[test]
    fn rejects_empty_series() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("chart.svg");
        assert!(line_chart(&path, "t", "x", "y", &[("a".into(), vec![])], None).is_err());
    }
}
