use plotters::coord::Shift;
use plotters::prelude::*;

use crate::CliError;

pub struct Curve<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    pub markers: bool,
}

impl<'a> Curve<'a> {
    pub fn line(label: &'a str, x: &[f64], y: &[f64]) -> Self {
        Curve { label, points: x.iter().copied().zip(y.iter().copied()).collect(), markers: false }
    }

    pub fn markers(label: &'a str, x: &[f64], y: &[f64]) -> Self {
        Curve { label, points: x.iter().copied().zip(y.iter().copied()).collect(), markers: true }
    }
}

const COLORS: [RGBColor; 4] = [RGBColor(31, 119, 180), RGBColor(214, 39, 40), RGBColor(44, 160, 44), RGBColor(255, 127, 14)];

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 * lo.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.03 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn draw(root: &DrawingArea<SVGBackend, Shift>, title: &str, labels: (&str, &str), curves: &[Curve]) -> Result<(), Box<dyn std::error::Error>> {
    root.fill(&WHITE)?;
    let (x0, x1) = bounds(curves.iter().flat_map(|c| c.points.iter().map(|p| p.0)));
    let (y0, y1) = bounds(curves.iter().flat_map(|c| c.points.iter().map(|p| p.1)));
    let mut chart = ChartBuilder::on(root)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(55)
        .build_cartesian_2d(x0..x1, y0..y1)?;
    chart.configure_mesh().x_desc(labels.0).y_desc(labels.1).draw()?;
    for (k, c) in curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts = c.points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite());
        if c.markers {
            chart
                .draw_series(pts.map(|p| Circle::new(p, 2, color.filled())))?
                .label(c.label)
                .legend(move |(x, y)| Circle::new((x + 8, y), 3, color.filled()));
        } else {
            chart
                .draw_series(LineSeries::new(pts, color.stroke_width(2)))?
                .label(c.label)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
        }
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
    root.present()?;
    Ok(())
}

/// Render line and marker series to an SVG document. Plot data already in
/// transformed coordinates (for example `log t`) for log-style views.
pub fn svg(title: &str, x_label: &str, y_label: &str, curves: &[Curve]) -> Result<String, CliError> {
    let mut out = String::new();
    {
        let root = SVGBackend::with_string(&mut out, (720, 460)).into_drawing_area();
        draw(&root, title, (x_label, y_label), curves).map_err(|e| CliError::Numerical(format!("plot: {e}")))?;
    }
    Ok(out)
}
