//! CSV and SVG output for Dolan-More curves.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::benchmark::profile::DolanMoreCurve;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveFormat {
    Csv,
    Svg,
}

impl FromStr for CurveFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(CurveFormat::Csv),
            "svg" => Ok(CurveFormat::Svg),
            _ => Err(Error::Usage(format!(
                "unknown curve format {s:?} (expected csv or svg)"
            ))),
        }
    }
}

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

pub fn emit_curves(curves: &[DolanMoreCurve], format: CurveFormat) -> Result<String> {
    let Some(first) = curves.first() else {
        return Err(Error::Config("no curves to emit".into()));
    };
    if curves
        .iter()
        .any(|c| c.betas != first.betas || c.p.len() != c.betas.len())
    {
        return Err(Error::MismatchedGrids);
    }
    if curves
        .iter()
        .flat_map(|c| &c.p)
        .any(|p| !(0.0..=1.0).contains(p))
    {
        return Err(Error::Config("curve value outside [0, 1]".into()));
    }
    Ok(match format {
        CurveFormat::Csv => to_csv(curves),
        CurveFormat::Svg => to_svg(curves),
    })
}

fn to_csv(curves: &[DolanMoreCurve]) -> String {
    let mut out = String::from("beta,method,p\n");
    for c in curves {
        for (b, p) in c.betas.iter().zip(&c.p) {
            let _ = writeln!(out, "{b},{},{p}", c.method);
        }
    }
    out
}

fn to_svg(curves: &[DolanMoreCurve]) -> String {
    let (width, height) = (640.0, 420.0);
    let (left, right, top, bottom) = (60.0, 170.0, 20.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let betas = &curves[0].betas;
    let log_max = betas.last().copied().unwrap_or(1.0).ln().max(1e-12);
    let x = |b: f64| left + plot_w * b.ln() / log_max;
    let y = |p: f64| top + plot_h * (1.0 - p);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for tick in 0..=4 {
        let p = tick as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{p:.2}</text>"#,
            left - 6.0,
            y(p) + 4.0
        );
    }
    let beta_top = betas.last().copied().unwrap_or(1.0);
    let mut tick = 1.0;
    while tick <= beta_top * (1.0 + 1e-9) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{tick}</text>"#,
            x(tick),
            top + plot_h + 16.0
        );
        tick *= if beta_top > 100.0 { 10.0 } else { 2.0 };
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">β (log scale)</text>"#,
        left + plot_w / 2.0,
        height - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">p(β)</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = String::new();
        for (k, (b, p)) in c.betas.iter().zip(&c.p).enumerate() {
            // step function: hold the previous value until the next beta
            if k > 0 {
                let _ = write!(pts, "{:.2},{:.2} ", x(*b), y(c.p[k - 1]));
            }
            let _ = write!(pts, "{:.2},{:.2} ", x(*b), y(*p));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.trim_end()
        );
        let ly = top + 14.0 + 16.0 * i as f64;
        let lx = width - right + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&c.method)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
