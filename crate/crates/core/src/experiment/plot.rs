use plotters::prelude::*;

use super::config::{Scenario, ScenarioConfig};
use super::confocal::ConfocalImage;
use super::run::{Readout, RunReport};
use super::ExperimentError;

struct Series<'a> {
    label: &'a str,
    points: Vec<(f64, f64)>,
    markers: bool,
    color: RGBColor,
}

fn bounds(series: &[Series<'_>]) -> Option<((f64, f64), (f64, f64))> {
    let pts = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return None;
    }
    let pad = |a: f64, b: f64| {
        let d = if b > a {
            0.05 * (b - a)
        } else {
            a.abs().max(1.0) * 0.05
        };
        (a - d, b + d)
    };
    Some((pad(x0, x1), pad(y0, y1)))
}

fn line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series<'_>],
) -> Result<Option<String>, ExperimentError> {
    let Some(((x0, x1), (y0, y1))) = bounds(series) else {
        return Ok(None);
    };
    let mut svg = String::new();
    let draw = |svg: &mut String| -> Result<(), Box<dyn std::error::Error>> {
        let root = SVGBackend::with_string(svg, (800, 500)).into_drawing_area();
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d(x0..x1, y0..y1)?;
        chart
            .configure_mesh()
            .x_desc(x_label)
            .y_desc(y_label)
            .draw()?;
        for s in series {
            let color = s.color;
            if s.markers {
                chart
                    .draw_series(s.points.iter().map(|&p| Circle::new(p, 3, color.filled())))?
                    .label(s.label)
                    .legend(move |(x, y)| Circle::new((x + 10, y), 3, color.filled()));
            } else {
                chart
                    .draw_series(LineSeries::new(
                        s.points.iter().copied(),
                        color.stroke_width(2),
                    ))?
                    .label(s.label)
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
            }
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()?;
        root.present()?;
        Ok(())
    };
    draw(&mut svg).map_err(|e| ExperimentError::Io(format!("plot {title}: {e}")))?;
    Ok(Some(svg))
}

/// Pixel map on a grey-to-yellow scale between the image extremes.
fn heatmap(title: &str, img: &ConfocalImage) -> Result<String, ExperimentError> {
    let (lo, hi) = img
        .current_a
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let step = if img.xs_um.len() > 1 {
        img.xs_um[1] - img.xs_um[0]
    } else {
        1.0
    };
    let x1 = img.xs_um.last().copied().unwrap_or(0.0) + step;
    let y1 = img.ys_um.last().copied().unwrap_or(0.0) + step;
    let mut svg = String::new();
    let draw = |svg: &mut String| -> Result<(), Box<dyn std::error::Error>> {
        let root = SVGBackend::with_string(svg, (620, 560)).into_drawing_area();
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(50)
            .build_cartesian_2d(0.0..x1, 0.0..y1)?;
        chart
            .configure_mesh()
            .disable_mesh()
            .x_desc("x (µm)")
            .y_desc("y (µm)")
            .draw()?;
        let cells = img.ys_um.iter().enumerate().flat_map(|(iy, &y)| {
            img.xs_um.iter().enumerate().map(move |(ix, &x)| {
                let v = ((img.at(ix, iy) - lo) / span).clamp(0.0, 1.0);
                let c = RGBColor(
                    (40.0 + 215.0 * v) as u8,
                    (40.0 + 200.0 * v) as u8,
                    (60.0 * (1.0 - v)) as u8,
                );
                Rectangle::new([(x, y), (x + step, y + step)], c.filled())
            })
        });
        chart.draw_series(cells)?;
        root.present()?;
        Ok(())
    };
    draw(&mut svg).map_err(|e| ExperimentError::Io(format!("plot {title}: {e}")))?;
    Ok(svg)
}

fn color(r: Readout) -> RGBColor {
    match r {
        Readout::Electrical => RGBColor(31, 119, 180),
        Readout::Optical => RGBColor(214, 39, 40),
    }
}

/// `(name, svg)` for every plot that applies to the report.
pub(super) fn render_all(
    cfg: &ScenarioConfig,
    report: &RunReport,
) -> Result<Vec<(String, String)>, ExperimentError> {
    let mut out = Vec::new();
    let (x_label, x_scale) = match cfg.scenario {
        Scenario::PdmrSweep => ("RF frequency (MHz)", 1e-6),
        Scenario::RabiSweep => ("MW pulse length (ns)", 1e9),
        Scenario::HahnEcho => ("echo time 2τ (µs)", 1e6),
        _ => ("", 1.0),
    };
    for f in &report.fits {
        let (x, y) = report.series(f.readout);
        let mut series = vec![Series {
            label: "data",
            points: x.iter().zip(&y).map(|(a, b)| (a * x_scale, *b)).collect(),
            markers: true,
            color: color(f.readout),
        }];
        if let (Ok(fit), Some(lo), Some(hi)) = (
            &f.outcome,
            x.iter().copied().reduce(f64::min),
            x.iter().copied().reduce(f64::max),
        ) {
            let n = 400;
            let curve = (0..=n)
                .map(|i| lo + (hi - lo) * i as f64 / n as f64)
                .map(|t| (t * x_scale, fit.evaluate(t)));
            series.push(Series {
                label: "fit",
                points: curve.collect(),
                markers: false,
                color: BLACK,
            });
        }
        let title = format!("{} ({})", cfg.scenario, f.readout.name());
        if let Some(svg) = line_plot(&title, x_label, "contrast (%)", &series)? {
            out.push((format!("sweep_{}", f.readout.name()), svg));
        }
    }
    for (r, spec) in &report.spectra {
        let pts = spec
            .freqs
            .iter()
            .zip(&spec.amplitudes)
            .map(|(f, a)| (f * 1e-3, *a))
            .collect();
        let series = [Series {
            label: "residual FFT",
            points: pts,
            markers: false,
            color: color(*r),
        }];
        if let Some(svg) = line_plot(
            "echo residual spectrum",
            "frequency (kHz)",
            "amplitude (%)",
            &series,
        )? {
            out.push((format!("spectrum_{}", r.name()), svg));
        }
    }
    if !report.wavelengths.is_empty() {
        let mut series = Vec::new();
        for r in [Readout::Electrical, Readout::Optical] {
            let pts: Vec<(f64, f64)> = report
                .wavelengths
                .iter()
                .filter_map(|w| {
                    let c = if r == Readout::Electrical {
                        &w.electrical
                    } else {
                        &w.optical
                    };
                    match c {
                        Some(Ok(c)) => Some((w.wavelength_nm, c.contrast_percent)),
                        _ => None,
                    }
                })
                .collect();
            if !pts.is_empty() {
                series.push(Series {
                    label: r.name(),
                    points: pts,
                    markers: true,
                    color: color(r),
                });
            }
        }
        if let Some(svg) = line_plot(
            "Rabi contrast vs wavelength",
            "wavelength (nm)",
            "contrast (%)",
            &series,
        )? {
            out.push(("wavelength".to_string(), svg));
        }
    }
    for img in &report.confocal {
        // line cut through the row containing the brightest pixel
        let (imax, _) =
            img.current_a
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |b, (i, &v)| if v > b.1 { (i, v) } else { b },
                );
        let iy = imax / img.xs_um.len();
        let pts = img
            .xs_um
            .iter()
            .enumerate()
            .map(|(ix, &x)| (x, img.at(ix, iy) * 1e9))
            .collect();
        let label = format!("y = {:.2} µm", img.ys_um[iy]);
        let series = [Series {
            label: &label,
            points: pts,
            markers: false,
            color: RGBColor(44, 160, 44),
        }];
        let title = format!("photocurrent line cut, {} µm spot", img.spot_diameter_um);
        if let Some(svg) = line_plot(&title, "x (µm)", "current (nA)", &series)? {
            out.push((format!("confocal_{}um_cut", img.spot_diameter_um), svg));
        }
        let title = format!(
            "photocurrent map, {} µm spot, {:.2}-{:.2} nA",
            img.spot_diameter_um,
            img.current_a.iter().copied().fold(f64::INFINITY, f64::min) * 1e9,
            img.max() * 1e9
        );
        out.push((
            format!("confocal_{}um", img.spot_diameter_um),
            heatmap(&title, img)?,
        ));
    }
    Ok(out)
}
