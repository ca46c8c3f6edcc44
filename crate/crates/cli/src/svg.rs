//! Two-line SVG chart: statistic in black, critical value in red, causal
//! episodes shaded.

use std::fmt::Write as _;

use tvgc_core::dating::CausalEpisode;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 40.0;

pub struct Chart<'a> {
    pub title: &'a str,
    /// Observation index of the first point.
    pub first_index: usize,
    pub statistic: &'a [Option<f64>],
    pub critical_value: &'a [f64],
    pub episodes: &'a [CausalEpisode],
    pub first_label: &'a str,
    pub last_label: &'a str,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart<'_> {
    pub fn render(&self) -> String {
        let n = self.statistic.len().max(1);
        let top = self
            .statistic
            .iter()
            .flatten()
            .chain(self.critical_value)
            .fold(0.0f64, |m, &v| m.max(v))
            .max(1e-12)
            * 1.05;
        let x = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / (n.max(2) - 1) as f64;
        let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v.max(0.0) / top);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="13">{}</text>"#,
            escape(self.title)
        );
        for e in self.episodes {
            let a = e.start_index.saturating_sub(self.first_index);
            let b = e.end_index.saturating_sub(self.first_index).min(n - 1);
            let (x0, x1) = (x(a), x(b));
            let _ = writeln!(
                s,
                r#"<rect class="episode" x="{x0:.2}" y="{MARGIN:.2}" width="{:.2}" height="{:.2}" fill="grey" fill-opacity="0.3"/>"#,
                (x1 - x0).max(1.0),
                HEIGHT - 2.0 * MARGIN
            );
        }
        let _ = writeln!(
            s,
            r#"<line x1="{MARGIN}" y1="{0}" x2="{1}" y2="{0}" stroke="grey"/>"#,
            HEIGHT - MARGIN,
            WIDTH - MARGIN
        );
        let _ = writeln!(
            s,
            r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{}" stroke="grey"/>"#,
            HEIGHT - MARGIN
        );
        // statistic, broken at missing points
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, s: &mut String| {
            if run.len() > 1 {
                let _ = writeln!(
                    s,
                    r#"<polyline class="statistic" fill="none" stroke="black" stroke-dasharray="6 3" points="{}"/>"#,
                    run.join(" ")
                );
            }
            run.clear();
        };
        for (i, v) in self.statistic.iter().enumerate() {
            match v {
                Some(v) => run.push(format!("{:.2},{:.2}", x(i), y(*v))),
                None => flush(&mut run, &mut s),
            }
        }
        flush(&mut run, &mut s);
        let cv: Vec<String> = self
            .critical_value
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{:.2},{:.2}", x(i), y(*v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="critical-value" fill="none" stroke="red" stroke-dasharray="2 2" points="{}"/>"#,
            cv.join(" ")
        );
        let base = HEIGHT - MARGIN + 16.0;
        let _ = writeln!(
            s,
            r#"<text x="{MARGIN}" y="{base}" font-family="sans-serif" font-size="11">{}</text>"#,
            escape(self.first_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{base}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN,
            escape(self.last_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{:.2}</text>"#,
            MARGIN - 4.0,
            MARGIN + 4.0,
            top
        );
        s.push_str("</svg>\n");
        s
    }
}
