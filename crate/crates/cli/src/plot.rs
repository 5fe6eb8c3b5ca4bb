//! SVG line plots of aggregated metrics with one-standard-deviation bands.

use std::path::Path;

use anyhow::{anyhow, Result};
use plotters::prelude::*;

use crate::aggregate::Band;

const COLORS: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

/// One labelled curve.
pub struct Curve<'a> {
    pub label: String,
    pub band: &'a Band,
}

fn y_range(curves: &[Curve]) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in curves {
        for (m, s) in c.band.mean.iter().zip(&c.band.std) {
            lo = lo.min(m - s);
            hi = hi.max(m + s);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}

pub fn plot_metric(path: &Path, title: &str, y_label: &str, curves: &[Curve]) -> Result<()> {
    let len = curves.iter().map(|c| c.band.mean.len()).max().unwrap_or(0).max(2);
    let (lo, hi) = y_range(curves);
    let root = SVGBackend::new(path, (800, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0f64..(len - 1) as f64, lo..hi)
        .map_err(|e| anyhow!("{e}"))?;
    chart
        .configure_mesh()
        .x_desc("episode")
        .y_desc(y_label)
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    for (i, curve) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let band = curve.band;
        let upper = band
            .mean
            .iter()
            .zip(&band.std)
            .enumerate()
            .map(|(x, (m, s))| (x as f64, m + s));
        let lower = band
            .mean
            .iter()
            .zip(&band.std)
            .enumerate()
            .rev()
            .map(|(x, (m, s))| (x as f64, m - s));
        chart
            .draw_series(std::iter::once(Polygon::new(
                upper.chain(lower).collect::<Vec<_>>(),
                color.mix(0.2),
            )))
            .map_err(|e| anyhow!("{e}"))?;
        chart
            .draw_series(LineSeries::new(
                band.mean.iter().enumerate().map(|(x, m)| (x as f64, *m)),
                color.stroke_width(2),
            ))
            .map_err(|e| anyhow!("{e}"))?
            .label(curve.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    root.present().map_err(|e| anyhow!("{e}"))?;
    Ok(())
}
