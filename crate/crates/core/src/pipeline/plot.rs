//! Minimal static SVG line charts for run traces.

use std::fmt::Write as _;

use crate::evolve::RunTrace;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders the series as polylines on shared axes.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        w,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            w,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.0}</text>"#,
            sx(xv),
            HEIGHT - MARGIN + 16.0,
            xv
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            MARGIN - 6.0,
            sy(yv) + 4.0,
            yv
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        w,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
        escape(y_label),
        y = HEIGHT / 2.0
    );
    for (k, s) in series.iter().enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            w,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN + 16.0 * k as f64;
        let _ = writeln!(
            w,
            r#"<line x1="{a}" y1="{ly}" x2="{b}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{c}" y="{ty}">{}</text>"#,
            escape(s.name),
            a = WIDTH - MARGIN - 120.0,
            b = WIDTH - MARGIN - 100.0,
            c = WIDTH - MARGIN - 94.0,
            ty = ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Mean and best fitness per generation.
pub fn fitness_chart(trace: &RunTrace, title: &str) -> String {
    let g = |f: fn(&crate::evolve::GenerationRecord) -> f64| -> Vec<(f64, f64)> {
        trace
            .records
            .iter()
            .map(|r| (r.generation as f64, f(r)))
            .collect()
    };
    line_chart(
        title,
        "generation",
        "fitness",
        &[
            Series {
                name: "mean",
                points: g(|r| r.mean_fitness),
            },
            Series {
                name: "best",
                points: g(|r| r.best_fitness),
            },
        ],
    )
}

/// Inter-cluster mutation probability per generation.
pub fn mutation_chart(trace: &RunTrace, title: &str) -> String {
    let points = trace
        .records
        .iter()
        .map(|r| (r.generation as f64, r.p_inter))
        .collect();
    line_chart(
        title,
        "generation",
        "p_inter",
        &[Series {
            name: "p_inter",
            points,
        }],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::GenerationRecord;

    #[test]
    fn renders_polylines() {
        let trace = RunTrace {
            records: (0..3)
                .map(|g| GenerationRecord {
                    generation: g,
                    mean_fitness: 0.1 * g as f64,
                    best_fitness: 0.2 * g as f64,
                    diversity: 1.0,
                    p_inter: 0.7,
                    evaluations: 10,
                })
                .collect(),
        };
        let svg = fitness_chart(&trace, "k=500 <test>");
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("&lt;test&gt;"));
        // A flat series still renders.
        assert_eq!(mutation_chart(&trace, "p").matches("<polyline").count(), 1);
        assert!(!line_chart("empty", "x", "y", &[]).contains("NaN"));
    }
}
