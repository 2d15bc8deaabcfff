use std::fmt::Write;

use dovs_core::sim::Trace;

use crate::BenchError;

pub const DEFAULT_SCALE: f64 = 60.0;
const MARGIN: f64 = 10.0;
const X_HALF: f64 = 5.0;

struct Frame {
    x_min: f64,
    y_max: f64,
    scale: f64,
}

impl Frame {
    fn map(&self, (x, y): (f64, f64)) -> (f64, f64) {
        ((x - self.x_min) * self.scale + MARGIN, (self.y_max - y) * self.scale + MARGIN)
    }
}

/// Drop repeated and collinear interior points.
fn simplify(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        if out.last().is_some_and(|&q| (p.0 - q.0).abs() < 1e-12 && (p.1 - q.1).abs() < 1e-12) {
            continue;
        }
        if out.len() >= 2 {
            let a = out[out.len() - 2];
            let b = out[out.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            let forward = (b.0 - a.0) * (p.0 - b.0) + (b.1 - a.1) * (p.1 - b.1) > 0.0;
            if cross.abs() < 1e-9 && forward {
                out.pop();
            }
        }
        out.push(p);
    }
    out
}

fn path(svg: &mut String, class: &str, frame: &Frame, points: &[(f64, f64)]) {
    let pts = simplify(points);
    if pts.len() < 2 {
        return;
    }
    let mut d = String::new();
    for (k, &p) in pts.iter().enumerate() {
        let (x, y) = frame.map(p);
        let _ = write!(d, "{}{x:.3} {y:.3}", if k == 0 { "M " } else { " L " });
    }
    let _ = writeln!(svg, r#"<path class="{class}" d="{d}"/>"#);
}

fn cross_mark(svg: &mut String, class: &str, frame: &Frame, p: (f64, f64)) {
    let (x, y) = frame.map(p);
    let h = X_HALF;
    let _ = writeln!(
        svg,
        r#"<path class="{class} end" d="M {:.3} {:.3} L {:.3} {:.3} M {:.3} {:.3} L {:.3} {:.3}"/>"#,
        x - h,
        y - h,
        x + h,
        y + h,
        x - h,
        y + h,
        x + h,
        y - h
    );
}

/// Render a recorded episode: arena outline, goal, robot and obstacle paths,
/// and an X at every final position. `scale` is pixels per metre.
pub fn export_trajectory_svg(trace: &Trace, scale: f64) -> Result<String, BenchError> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(BenchError::Usage(format!("scale must be positive, got {scale}")));
    }
    let n_obs = trace.world.obstacles.len();
    if let Some(s) = trace.steps.iter().find(|s| s.obstacles.len() != n_obs) {
        return Err(BenchError::MalformedTrace(format!(
            "step {} has {} obstacles, header has {n_obs}",
            s.step,
            s.obstacles.len()
        )));
    }
    let arena = trace.world.arena;
    let frame = Frame {
        x_min: arena.x_min,
        y_max: arena.y_max,
        scale,
    };
    let w = arena.width() * scale + 2.0 * MARGIN;
    let h = arena.height() * scale + 2.0 * MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.3}" height="{h:.3}" viewBox="0 0 {w:.3} {h:.3}">"#
    );
    svg.push_str(
        "<style>.arena{fill:none;stroke:#000;stroke-width:2}.robot{fill:none;stroke:#1f5fbf;stroke-width:2}\
         .obstacle{fill:none;stroke:#c03030;stroke-width:1.5}.goal{fill:#2a9d2a}</style>\n",
    );
    let _ = writeln!(
        svg,
        r#"<rect class="arena" x="{MARGIN:.3}" y="{MARGIN:.3}" width="{:.3}" height="{:.3}"/>"#,
        arena.width() * scale,
        arena.height() * scale
    );
    let (gx, gy) = frame.map(trace.world.goal);
    let _ = writeln!(svg, r#"<circle class="goal" cx="{gx:.3}" cy="{gy:.3}" r="{:.3}"/>"#, 0.1 * scale);

    let start = trace.world.robot.pose;
    let robot: Vec<(f64, f64)> = std::iter::once((start.x, start.y))
        .chain(trace.steps.iter().map(|s| (s.robot.x, s.robot.y)))
        .collect();
    for k in 0..n_obs {
        let p0 = trace.world.obstacles[k].pose;
        let pts: Vec<(f64, f64)> = std::iter::once((p0.x, p0.y))
            .chain(trace.steps.iter().map(|s| (s.obstacles[k].x, s.obstacles[k].y)))
            .collect();
        path(&mut svg, "obstacle", &frame, &pts);
        cross_mark(&mut svg, "obstacle", &frame, pts[pts.len() - 1]);
    }
    path(&mut svg, "robot", &frame, &robot);
    cross_mark(&mut svg, "robot", &frame, robot[robot.len() - 1]);
    svg.push_str("</svg>\n");
    Ok(svg)
}
