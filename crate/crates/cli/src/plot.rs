//! Static plot emission: a gnuplot script over the CSV outputs and a
//! dependency-free SVG line plot.

use std::fmt::Write as _;

/// Gnuplot script plotting columns of `csv_file` (1-based, first column is x).
pub fn gnuplot_script(csv_file: &str, columns: &[(usize, &str)], png: &str, logscale_y: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output '{png}'");
    let _ = writeln!(s, "set xlabel 't'");
    if logscale_y {
        let _ = writeln!(s, "set logscale y");
    }
    let plots: Vec<String> = columns
        .iter()
        .map(|(c, title)| format!("'{csv_file}' using 1:{c} with lines title '{title}'"))
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

/// One polyline per series on shared axes; non-finite points are skipped.
pub fn svg_line_plot(title: &str, x_label: &str, series: &[(&str, &[f64], &[f64])]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const M: f64 = 60.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

    let finite = |v: &&f64| v.is_finite();
    let bounds = |get: &dyn Fn(&(&str, &[f64], &[f64])) -> Vec<f64>| {
        let all: Vec<f64> = series.iter().flat_map(|s| get(s)).collect();
        let lo = all.iter().filter(finite).cloned().fold(f64::INFINITY, f64::min);
        let hi = all.iter().filter(finite).cloned().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = bounds(&|s| s.1.to_vec());
    let (y0, y1) = bounds(&|s| s.2.to_vec());
    let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="16">{}</text>"#,
        W / 2.0,
        M / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
        W / 2.0,
        H - M / 4.0,
        escape(x_label)
    );
    for (v, x, anchor) in [(x0, px(x0), "start"), (x1, px(x1), "end")] {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="{anchor}" font-size="11">{}</text>"#,
            H - M + 15.0,
            short(v)
        );
    }
    for (v, y) in [(y0, py(y0)), (y1, py(y1))] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}" text-anchor="end" font-size="11">{}</text>"#,
            M - 5.0,
            short(v)
        );
    }
    for (i, (name, xs, ys)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = xs
            .iter()
            .zip(ys.iter())
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{}</text>"#,
            W - M - 5.0,
            M + 18.0 * (i + 1) as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn short(v: f64) -> String {
    format!("{v:.3e}")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed_enough() {
        let t = [0.0, 1.0, 2.0];
        let y = [1.0, f64::NAN, 3.0];
        let svg = svg_line_plot("a < b", "t", &[("y", &t, &y)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn gnuplot_lists_columns() {
        let s = gnuplot_script("trajectory.csv", &[(2, "E"), (6, "orbdist")], "out.png", true);
        assert!(s.contains("using 1:2"));
        assert!(s.contains("using 1:6"));
        assert!(s.contains("set logscale y"));
    }
}
