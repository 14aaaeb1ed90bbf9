//! Run artifacts: `log.csv`, `metrics.json` and `trajectory.svg`, plus the
//! parser that replays a log back into rows.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::geometry::Pose2D;
use crate::sim::{LogRow, Metrics, SimLog};
use crate::world::{ObjectLabel, Shape, World};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("output io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("metrics serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("log parse error at line {line}: {reason}")]
    LogParse { line: usize, reason: String },
}

pub const LOG_COLUMNS: [&str; 28] = [
    "t", "gt_x", "gt_y", "gt_psi", "gt_u", "gt_v", "gt_omega", "est_x", "est_y", "est_psi",
    "est_u", "est_v", "est_omega", "cmd_fx", "cmd_fyaw", "f_right", "f_left", "rev_right",
    "rev_left", "v_des", "omega_des", "goal_active", "goal_x", "goal_y", "goal_psi", "bt_status",
    "fused_count", "clearance",
];

fn write_row(out: &mut impl Write, row: &LogRow) -> std::io::Result<()> {
    let (goal_active, gx, gy, gpsi) = match row.goal {
        Some(g) => (1, g.x, g.y, g.psi),
        None => (0, 0.0, 0.0, 0.0),
    };
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        row.t,
        row.gt[0],
        row.gt[1],
        row.gt[2],
        row.gt[3],
        row.gt[4],
        row.gt[5],
        row.est[0],
        row.est[1],
        row.est[2],
        row.est[3],
        row.est[4],
        row.est[5],
        row.cmd_fx,
        row.cmd_fyaw,
        row.f_right,
        row.f_left,
        row.rev_right,
        row.rev_left,
        row.v_des,
        row.omega_des,
        goal_active,
        gx,
        gy,
        gpsi,
        row.bt_status,
        row.fused_count,
        row.clearance,
    )
}

/// Serialize the log to CSV text (header + one line per tick).
pub fn log_to_csv(log: &SimLog) -> String {
    let mut buf = Vec::new();
    writeln!(&mut buf, "{}", LOG_COLUMNS.join(",")).unwrap();
    for row in &log.rows {
        write_row(&mut buf, row).unwrap();
    }
    String::from_utf8(buf).expect("csv is ascii")
}

/// Parse `log.csv` back into rows.
pub fn parse_log_csv(text: &str) -> Result<Vec<LogRow>, OutputError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(OutputError::LogParse {
        line: 1,
        reason: "empty file".into(),
    })?;
    if header != LOG_COLUMNS.join(",") {
        return Err(OutputError::LogParse {
            line: 1,
            reason: "unexpected header".into(),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != LOG_COLUMNS.len() {
            return Err(OutputError::LogParse {
                line: idx + 1,
                reason: format!("expected {} fields, got {}", LOG_COLUMNS.len(), fields.len()),
            });
        }
        let f = |i: usize| -> Result<f64, OutputError> {
            fields[i].parse().map_err(|e| OutputError::LogParse {
                line: idx + 1,
                reason: format!("column {}: {e}", LOG_COLUMNS[i]),
            })
        };
        let goal_active = fields[21] == "1";
        rows.push(LogRow {
            t: f(0)?,
            gt: [f(1)?, f(2)?, f(3)?, f(4)?, f(5)?, f(6)?],
            est: [f(7)?, f(8)?, f(9)?, f(10)?, f(11)?, f(12)?],
            cmd_fx: f(13)?,
            cmd_fyaw: f(14)?,
            f_right: f(15)?,
            f_left: f(16)?,
            rev_right: f(17)?,
            rev_left: f(18)?,
            v_des: f(19)?,
            omega_des: f(20)?,
            goal: if goal_active {
                Some(Pose2D::new(f(22)?, f(23)?, f(24)?))
            } else {
                None
            },
            bt_status: fields[25].to_string(),
            fused_count: fields[26].parse().map_err(|e| OutputError::LogParse {
                line: idx + 1,
                reason: format!("column fused_count: {e}"),
            })?,
            clearance: f(27)?,
        });
    }
    Ok(rows)
}

/// Position RMSE between ground truth and estimate over parsed rows.
pub fn rmse_from_rows(rows: &[LogRow]) -> f64 {
    let sum: f64 = rows
        .iter()
        .map(|r| {
            let dx = r.gt[0] - r.est[0];
            let dy = r.gt[1] - r.est[1];
            dx * dx + dy * dy
        })
        .sum();
    (sum / rows.len() as f64).sqrt()
}

/// Write `log.csv`, `metrics.json` and `trajectory.svg` into `out_dir`.
pub fn emit_outputs(
    log: &SimLog,
    metrics: &Metrics,
    world: &World,
    out_dir: &Path,
) -> Result<(), OutputError> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("log.csv"), log_to_csv(log))?;
    std::fs::write(
        out_dir.join("metrics.json"),
        serde_json::to_string_pretty(metrics)?,
    )?;
    std::fs::write(out_dir.join("trajectory.svg"), trajectory_svg(log, world))?;
    Ok(())
}

fn label_color(label: ObjectLabel) -> &'static str {
    match label {
        ObjectLabel::RedBuoy => "#d03030",
        ObjectLabel::GreenBuoy => "#20a040",
        ObjectLabel::WhiteBuoy => "#cccccc",
        ObjectLabel::YellowBuoy => "#d0c020",
        ObjectLabel::BlackBuoy => "#202020",
        ObjectLabel::Dock => "#806040",
    }
}

/// Render ground truth, estimate and planned paths over the world. One
/// `<polyline>` per path entity.
pub fn trajectory_svg(log: &SimLog, world: &World) -> String {
    // world-frame bounding box over everything drawn
    fn grow(min: &mut (f64, f64), max: &mut (f64, f64), x: f64, y: f64) {
        min.0 = min.0.min(x);
        min.1 = min.1.min(y);
        max.0 = max.0.max(x);
        max.1 = max.1.max(y);
    }
    let mut min = (f64::INFINITY, f64::INFINITY);
    let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for r in &log.rows {
        grow(&mut min, &mut max, r.gt[0], r.gt[1]);
        grow(&mut min, &mut max, r.est[0], r.est[1]);
    }
    for p in &log.planned_paths {
        for q in &p.points {
            grow(&mut min, &mut max, q.x, q.y);
        }
    }
    for b in &world.buoys {
        grow(&mut min, &mut max, b.x - b.radius, b.y - b.radius);
        grow(&mut min, &mut max, b.x + b.radius, b.y + b.radius);
    }
    for s in &world.obstacles {
        match s {
            Shape::Circle { x, y, radius } => {
                grow(&mut min, &mut max, x - radius, y - radius);
                grow(&mut min, &mut max, x + radius, y + radius);
            }
            Shape::Polygon { vertices } => {
                for v in vertices {
                    grow(&mut min, &mut max, v[0], v[1]);
                }
            }
        }
    }
    if !min.0.is_finite() {
        grow(&mut min, &mut max, 0.0, 0.0);
        grow(&mut min, &mut max, 1.0, 1.0);
    }
    let pad = 2.0;
    let (x0, y0) = (min.0 - pad, min.1 - pad);
    let (x1, y1) = (max.0 + pad, max.1 + pad);
    let scale = 900.0 / (x1 - x0).max(y1 - y0);
    let w = ((x1 - x0) * scale).ceil();
    let h = ((y1 - y0) * scale).ceil();
    // svg y grows downward
    let tx = |x: f64| (x - x0) * scale;
    let ty = |y: f64| (y1 - y) * scale;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#f6f9fc\"/>\n");

    for s in &world.obstacles {
        match s {
            Shape::Circle { x, y, radius } => svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"#8a97a6\"/>\n",
                tx(*x),
                ty(*y),
                radius * scale
            )),
            Shape::Polygon { vertices } => {
                let pts: Vec<String> = vertices
                    .iter()
                    .map(|v| format!("{:.2},{:.2}", tx(v[0]), ty(v[1])))
                    .collect();
                svg.push_str(&format!(
                    "<polygon points=\"{}\" fill=\"#8a97a6\"/>\n",
                    pts.join(" ")
                ));
            }
        }
    }
    for b in &world.buoys {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"{}\"/>\n",
            tx(b.x),
            ty(b.y),
            (b.radius * scale).max(3.0),
            label_color(b.label)
        ));
    }

    let polyline = |points: &mut dyn Iterator<Item = (f64, f64)>, style: &str| -> String {
        let pts: Vec<String> = points
            .map(|(x, y)| format!("{:.2},{:.2}", tx(x), ty(y)))
            .collect();
        format!(
            "<polyline points=\"{}\" fill=\"none\" {style}/>\n",
            pts.join(" ")
        )
    };
    for p in &log.planned_paths {
        svg.push_str(&polyline(
            &mut p.points.iter().map(|q| (q.x, q.y)),
            "stroke=\"#76c893\" stroke-width=\"1\" stroke-dasharray=\"4 3\" class=\"planned\"",
        ));
    }
    svg.push_str(&polyline(
        &mut log.rows.iter().map(|r| (r.gt[0], r.gt[1])),
        "stroke=\"#1f6fb2\" stroke-width=\"2\" class=\"ground-truth\"",
    ));
    svg.push_str(&polyline(
        &mut log.rows.iter().map(|r| (r.est[0], r.est[1])),
        "stroke=\"#e08020\" stroke-width=\"1.2\" class=\"estimate\"",
    ));
    svg.push_str("</svg>\n");
    svg
}
