//! Output directory: CSV tables tagged with the config hash, SVG plots and
//! the run summary.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use plotters::prelude::*;
use serde::Serialize;

/// One checked inequality.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Verdict {
    /// `lhs <= rhs * (1 + tolerance)`.
    pub fn le(name: &str, inequality: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            inequality: inequality.into(),
            lhs,
            rhs,
            tolerance,
            pass: lhs <= rhs * (1.0 + tolerance),
        }
    }

    pub fn holds(name: &str, inequality: &str, pass: bool) -> Self {
        Self { name: name.into(), inequality: inequality.into(), lhs: f64::NAN, rhs: f64::NAN, tolerance: 0.0, pass }
    }
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    config_hash: &'a str,
    seed: u64,
    verdicts: &'a [Verdict],
    values: &'a serde_json::Map<String, serde_json::Value>,
}

pub struct Output {
    dir: PathBuf,
    hash: String,
    pub values: serde_json::Map<String, serde_json::Value>,
    pub verdicts: Vec<Verdict>,
}

pub fn fmt(x: f64) -> String {
    format!("{x}")
}

impl Output {
    pub fn new(dir: &Path, hash: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), hash: hash.to_string(), values: Default::default(), verdicts: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `name` with a `config_hash` column in front of `header`.
    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        let mut head = vec!["config_hash"];
        head.extend_from_slice(header);
        w.write_record(&head)?;
        for r in rows {
            let mut rec = vec![self.hash.clone()];
            rec.extend(r.iter().cloned());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn value(&mut self, key: &str, v: impl Serialize) {
        self.values.insert(key.into(), serde_json::to_value(v).unwrap_or(serde_json::Value::Null));
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn finish(&self, experiment: &str, seed: u64) -> Result<()> {
        let s = Summary {
            experiment,
            config_hash: &self.hash,
            seed,
            verdicts: &self.verdicts,
            values: &self.values,
        };
        let text = serde_json::to_string_pretty(&s)?;
        fs::write(self.path("summary.json"), text + "\n")?;
        Ok(())
    }

    /// Line plot of one or more series; `log` selects log-log axes.
    pub fn plot(&self, name: &str, title: &str, axes: (&str, &str), series: &[(&str, Vec<(f64, f64)>)], log: bool) -> Result<()> {
        let pts: Vec<(f64, f64)> = series
            .iter()
            .flat_map(|s| s.1.iter().copied())
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log || (*x > 0.0 && *y > 0.0)))
            .collect();
        if pts.is_empty() {
            return Ok(());
        }
        let span = |v: Vec<f64>| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if log {
                (lo / 1.2, hi * 1.2)
            } else {
                let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
                (lo - pad, hi + pad)
            }
        };
        let (x0, x1) = span(pts.iter().map(|p| p.0).collect());
        let (y0, y1) = span(pts.iter().map(|p| p.1).collect());
        let path = self.path(name);
        let root = SVGBackend::new(&path, (640, 480)).into_drawing_area();
        root.fill(&WHITE)?;
        let colors = [BLUE, RED, GREEN, BLACK, MAGENTA, CYAN];
        macro_rules! draw {
            ($chart:expr) => {{
                let mut chart = $chart;
                chart.configure_mesh().x_desc(axes.0).y_desc(axes.1).draw()?;
                for (i, (label, s)) in series.iter().enumerate() {
                    let c = colors[i % colors.len()];
                    let s: Vec<(f64, f64)> =
                        s.iter().copied().filter(|(x, y)| !log || (*x > 0.0 && *y > 0.0)).collect();
                    chart.draw_series(LineSeries::new(s.clone(), c))?.label(*label);
                    chart.draw_series(s.iter().map(|&p| Circle::new(p, 3, c.filled())))?;
                }
                chart.configure_series_labels().border_style(BLACK).draw()?;
            }};
        }
        let mut b = ChartBuilder::on(&root);
        b.caption(title, ("sans-serif", 20)).margin(10).x_label_area_size(40).y_label_area_size(60);
        if log {
            draw!(b.build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale())?);
        } else {
            draw!(b.build_cartesian_2d(x0..x1, y0..y1)?);
        }
        root.present()?;
        Ok(())
    }
}
