//! Minimal SVG emission: trajectory overlay, GWD over time and the
//! trajectory-metric decomposition.

use std::fmt::Write as _;

use ettrack_core::metrics::TmTrajectory;

const COLORS: [&str; 8] = [
    "#d62728", "#1f77b4", "#2ca02c", "#bcbd22", "#9467bd", "#ff7f0e", "#17becf", "#8c564b",
];

struct Frame {
    width: f64,
    height: f64,
    margin: f64,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, wx: f64) -> f64 {
        self.margin + (wx - self.x_min) / (self.x_max - self.x_min) * (self.width - 2.0 * self.margin)
    }

    fn y(&self, wy: f64) -> f64 {
        // world y grows upward, screen y downward
        self.height
            - self.margin
            - (wy - self.y_min) / (self.y_max - self.y_min) * (self.height - 2.0 * self.margin)
    }

    fn scale(&self) -> f64 {
        (self.width - 2.0 * self.margin) / (self.x_max - self.x_min)
    }
}

fn svg_open(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(
        out,
        "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{title}</text>",
        width / 2.0
    );
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str, dashed: bool, width: f64) {
    if pts.len() < 2 {
        return;
    }
    let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let dash = if dashed { " stroke-dasharray=\"6,4\"" } else { "" };
    let _ = writeln!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"{dash}/>",
        path.join(" ")
    );
}

/// Truth (solid) and estimates (dashed) with extent ellipses every
/// `ellipse_every` steps.
pub fn trajectory_overlay_svg(
    truth: &[(String, TmTrajectory)],
    estimates: &[(String, TmTrajectory)],
    ellipse_every: usize,
) -> String {
    let all_states = truth
        .iter()
        .chain(estimates)
        .flat_map(|(_, t)| t.states.iter());
    let (mut x_min, mut x_max, mut y_min, mut y_max) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (r, _) in all_states {
        x_min = x_min.min(r[0]);
        x_max = x_max.max(r[0]);
        y_min = y_min.min(r[1]);
        y_max = y_max.max(r[1]);
    }
    if !x_min.is_finite() {
        (x_min, x_max, y_min, y_max) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = 0.05 * ((x_max - x_min).max(y_max - y_min)).max(1.0);
    let frame = Frame {
        width: 720.0,
        height: 720.0,
        margin: 40.0,
        x_min: x_min - pad,
        x_max: x_max + pad,
        y_min: y_min - pad,
        y_max: y_max + pad,
    };

    let mut out = String::new();
    svg_open(&mut out, frame.width, frame.height, "trajectories");
    for (idx, (name, t)) in truth.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        draw_trajectory(&mut out, t, &frame, color, false, ellipse_every);
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{name}</text>",
            frame.margin,
            34.0 + 14.0 * idx as f64
        );
    }
    for (_, t) in estimates {
        draw_trajectory(&mut out, t, &frame, "#333333", true, ellipse_every);
    }
    out.push_str("</svg>\n");
    out
}

fn draw_trajectory(
    out: &mut String,
    t: &TmTrajectory,
    frame: &Frame,
    color: &str,
    dashed: bool,
    ellipse_every: usize,
) {
    let pts: Vec<(f64, f64)> = t
        .states
        .iter()
        .map(|(r, _)| (frame.x(r[0]), frame.y(r[1])))
        .collect();
    polyline(out, &pts, color, dashed, 1.5);
    if ellipse_every == 0 {
        return;
    }
    for (offset, (r, x)) in t.states.iter().enumerate() {
        if offset % ellipse_every != 0 {
            continue;
        }
        // principal axes of the extent matrix
        let eig = nalgebra::SymmetricEigen::new(*x);
        let (l1, l2) = (eig.eigenvalues[0].max(0.0).sqrt(), eig.eigenvalues[1].max(0.0).sqrt());
        let angle = eig.eigenvectors[(1, 0)].atan2(eig.eigenvectors[(0, 0)]);
        let (cx, cy) = (frame.x(r[0]), frame.y(r[1]));
        let s = frame.scale();
        let _ = writeln!(
            out,
            "<ellipse cx=\"{cx:.2}\" cy=\"{cy:.2}\" rx=\"{:.2}\" ry=\"{:.2}\" transform=\"rotate({:.2} {cx:.2} {cy:.2})\" fill=\"none\" stroke=\"{color}\" stroke-width=\"0.8\" opacity=\"0.7\"/>",
            l1 * s,
            l2 * s,
            -angle.to_degrees()
        );
    }
}

/// Simple multi-series line chart over time steps.
pub fn line_chart_svg(title: &str, y_label: &str, series: &[(String, Vec<f64>)]) -> String {
    let (width, height, margin) = (720.0, 420.0, 50.0);
    let steps = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let y_max = series
        .iter()
        .flat_map(|(_, v)| v.iter())
        .filter(|v| v.is_finite())
        .fold(1e-9f64, |a, &b| a.max(b));

    let mut out = String::new();
    svg_open(&mut out, width, height, title);
    // axes
    let _ = writeln!(
        out,
        "<line x1=\"{margin}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        height - margin,
        width - margin,
        height - margin
    );
    let _ = writeln!(
        out,
        "<line x1=\"{margin}\" y1=\"{margin}\" x2=\"{margin}\" y2=\"{:.1}\" stroke=\"black\"/>",
        height - margin
    );
    let _ = writeln!(
        out,
        "<text x=\"14\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 14 {:.1})\">{y_label}</text>",
        height / 2.0,
        height / 2.0
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">time step</text>",
        width / 2.0,
        height - 14.0
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\">{y_max:.1}</text>",
        6.0, margin
    );

    for (idx, (name, values)) in series.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let pts: Vec<(f64, f64)> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(k, &v)| {
                let x = margin + k as f64 / (steps.max(2) - 1) as f64 * (width - 2.0 * margin);
                let y = height - margin - (v / y_max).min(1.0) * (height - 2.0 * margin);
                (x, y)
            })
            .collect();
        polyline(&mut out, &pts, color, false, 1.5);
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{name}</text>",
            width - margin - 120.0,
            margin + 14.0 * (idx + 1) as f64
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Vector2};

    /// Tiny well-formedness check: every opened tag is closed or
    /// self-closing, quotes balance.
    pub(crate) fn assert_well_formed_xml(text: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = text;
        while let Some(start) = rest.find('<') {
            let end = rest[start..].find('>').expect("unclosed tag") + start;
            let tag = &rest[start + 1..end];
            rest = &rest[end + 1..];
            if let Some(name) = tag.strip_prefix('/') {
                let open = stack.pop().expect("closing tag without opener");
                assert_eq!(open, name, "mismatched closing tag");
            } else if !tag.ends_with('/') && !tag.starts_with('?') && !tag.starts_with('!') {
                let name: String = tag.split_whitespace().next().unwrap().to_string();
                stack.push(name);
            }
            assert_eq!(
                tag.matches('"').count() % 2,
                0,
                "unbalanced quotes in tag {tag}"
            );
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
    }

    fn toy_traj(y: f64) -> TmTrajectory {
        TmTrajectory {
            start_time: 1,
            states: (0..10)
                .map(|k| {
                    (
                        Vector2::new(k as f64 * 5.0, y),
                        Matrix2::new(16.0, 0.0, 0.0, 9.0),
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn overlay_is_well_formed() {
        let svg = trajectory_overlay_svg(
            &[("target 1".into(), toy_traj(0.0))],
            &[("estimate".into(), toy_traj(0.5))],
            4,
        );
        assert_well_formed_xml(&svg);
        assert!(svg.contains("<ellipse"));
    }

    #[test]
    fn overlay_without_estimates_still_renders() {
        let svg = trajectory_overlay_svg(&[("target".into(), toy_traj(2.0))], &[], 4);
        assert_well_formed_xml(&svg);
    }

    #[test]
    fn chart_is_well_formed() {
        let svg = line_chart_svg(
            "gwd",
            "gwd",
            &[
                ("target 1".into(), vec![10.0, 5.0, 2.5, 2.0]),
                ("target 2".into(), vec![9.0, f64::NAN, 3.0, 1.0]),
            ],
        );
        assert_well_formed_xml(&svg);
    }
}
