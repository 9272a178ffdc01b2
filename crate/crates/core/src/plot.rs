//! Minimal SVG line plots of spectra: logarithmic frequency axis, dBm axis.

use std::fmt::Write as _;

use crate::spectral::Spectrum;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

fn fmt_hz(f: f64) -> String {
    match f {
        f if f >= 1e6 => format!("{}M", f / 1e6),
        f if f >= 1e3 => format!("{}k", f / 1e3),
        f => format!("{f}"),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders the spectra over `band_hz` (clipped to positive frequencies).
/// The vertical range covers the data in band, rounded out to 10 dB.
pub fn spectrum_svg(title: &str, series: &[(&str, &Spectrum)], band_hz: (f64, f64)) -> String {
    let lo = band_hz.0.max(1.0);
    let hi = band_hz.1.max(lo * 10.0);
    let in_band = |s: &Spectrum| {
        s.frequencies()
            .zip(s.power_dbm.iter().copied())
            .filter(move |(f, _)| *f >= lo && *f <= hi)
            .collect::<Vec<_>>()
    };
    let points: Vec<Vec<(f64, f64)>> = series.iter().map(|(_, s)| in_band(s)).collect();
    let (mut ymin, mut ymax) = points
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, p)| {
            (a.min(*p), b.max(*p))
        });
    if !ymin.is_finite() {
        (ymin, ymax) = (-100.0, 0.0);
    }
    ymax = (ymax / 10.0).ceil() * 10.0;
    ymin = ((ymin / 10.0).floor() * 10.0).min(ymax - 10.0);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |f: f64| MARGIN_LEFT + (f.log10() - lo.log10()) / (hi.log10() - lo.log10()) * plot_w;
    let y_of = |p: f64| MARGIN_TOP + (ymax - p) / (ymax - ymin) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    // Decade and 2/5 gridlines.
    let mut decade = 10f64.powf(lo.log10().floor());
    while decade <= hi {
        for m in [1.0, 2.0, 5.0] {
            let f = decade * m;
            if f < lo || f > hi {
                continue;
            }
            let x = x_of(f);
            let stroke = if m == 1.0 { "#bbb" } else { "#e5e5e5" };
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{MARGIN_TOP}" x2="{x:.2}" y2="{:.2}" stroke="{stroke}"/>"#,
                MARGIN_TOP + plot_h
            );
            let _ = writeln!(
                svg,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                MARGIN_TOP + plot_h + 16.0,
                fmt_hz(f)
            );
        }
        decade *= 10.0;
    }
    let step = if ymax - ymin > 100.0 { 20.0 } else { 10.0 };
    let mut p = ymin;
    while p <= ymax {
        let y = y_of(p);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/>"##,
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{p}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
        p += step;
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">Frequency (Hz)</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">Power (dBm)</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    for (k, ((name, _), pts)) in series.iter().zip(&points).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut path = String::new();
        for (f, p) in pts {
            let _ = write!(path, "{:.2},{:.2} ", x_of(*f), y_of(*p));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#,
            path.trim_end()
        );
        let ly = MARGIN_TOP + 16.0 + 16.0 * k as f64;
        let lx = MARGIN_LEFT + plot_w - 150.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0,
            lx + 26.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_polyline_per_series() {
        let a =
            Spectrum::measured(0.0, 10e3, (0..500).map(|k| -(k as f64) / 5.0).collect()).unwrap();
        let b = Spectrum::measured(0.0, 10e3, vec![-50.0; 500]).unwrap();
        let svg = spectrum_svg("A & B", &[("a", &a), ("b", &b)], (10e3, 5e6));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("A &amp; B"));
        assert!(svg.contains(">100k<") && svg.contains(">1M<"));
    }

    #[test]
    fn empty_band_still_valid() {
        let a = Spectrum::measured(0.0, 1.0, vec![0.0; 4]).unwrap();
        let svg = spectrum_svg("t", &[("a", &a)], (1e3, 1e4));
        assert!(svg.contains("<polyline"));
    }
}
