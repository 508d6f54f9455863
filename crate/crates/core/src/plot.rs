//! Minimal deterministic SVG bar charts.

use std::fmt::Write as _;

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Grouped bars: one group per category, one bar per series. Missing values
/// are left blank. Values are drawn on `[0, y_max]`.
pub fn grouped_bars(title: &str, categories: &[String], series: &[(String, Vec<Option<f64>>)], y_max: f64) -> String {
    let (left, top, plot_h, bar_w, gap) = (60.0, 40.0, 240.0, 14.0, 18.0);
    let group_w = bar_w * series.len().max(1) as f64 + gap;
    let width = left + group_w * categories.len().max(1) as f64 + 170.0;
    let height = top + plot_h + 90.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{left:.0}" y="20" font-size="14">{}</text>"#, escape(title));
    let base = top + plot_h;
    for tick in 0..=4 {
        let v = y_max * tick as f64 / 4.0;
        let y = base - plot_h * tick as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{left:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            width - 170.0,
            left - 6.0,
            y + 4.0
        );
    }
    for (ci, cat) in categories.iter().enumerate() {
        let gx = left + gap / 2.0 + ci as f64 * group_w;
        for (si, (_, values)) in series.iter().enumerate() {
            let Some(v) = values.get(ci).copied().flatten() else { continue };
            let h = (v.clamp(0.0, y_max) / y_max) * plot_h;
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{bar_w:.1}" height="{h:.1}" fill="{}"><title>{}: {v:.4}</title></rect>"#,
                gx + si as f64 * bar_w,
                base - h,
                PALETTE[si % PALETTE.len()],
                escape(cat)
            );
        }
        let cx = gx + bar_w * series.len() as f64 / 2.0;
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="end" transform="rotate(-40 {cx:.1} {:.1})">{}</text>"#,
            base + 14.0,
            base + 14.0,
            escape(cat)
        );
    }
    for (si, (name, _)) in series.iter().enumerate() {
        let y = top + 14.0 * si as f64;
        let x = width - 160.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            y - 9.0,
            PALETTE[si % PALETTE.len()],
            x + 14.0,
            y,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_escaped() {
        let cats = vec!["a<b".to_string(), "c".to_string()];
        let series = vec![("s&1".to_string(), vec![Some(0.5), None])];
        let a = grouped_bars("t", &cats, &series, 1.0);
        assert_eq!(a, grouped_bars("t", &cats, &series, 1.0));
        assert!(a.contains("a&lt;b") && a.contains("s&amp;1"));
        assert_eq!(a.matches("<rect").count(), 2);
    }
}
