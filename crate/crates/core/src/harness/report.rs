use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{HarnessError, RunSummary};
use crate::learner::CurvePoint;

pub const SUMMARY_CSV_HEADER: [&str; 6] = [
    "policy",
    "episodes",
    "avg_time",
    "avg_reward",
    "reward_rate",
    "rescuing_cost",
];

/// CSV rendering. Floats use the shortest representation that parses back
/// to the same value, so the CSV and JSON columns agree exactly.
pub fn summary_csv(summaries: &[RunSummary]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_CSV_HEADER).expect("write to memory");
    for s in summaries {
        w.write_record([
            s.policy.clone(),
            s.episodes.to_string(),
            s.avg_time.to_string(),
            s.avg_reward.to_string(),
            s.reward_rate.to_string(),
            s.rescuing_cost.map(|c| c.to_string()).unwrap_or_default(),
        ])
        .expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 csv")
}

pub fn summary_json(summaries: &[RunSummary]) -> String {
    let mut text = serde_json::to_string_pretty(summaries).expect("summaries serialize");
    text.push('\n');
    text
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

/// Reward-per-episode polyline with a trailing moving average on top.
pub fn learning_curve_svg(policy: &str, curve: &[CurvePoint]) -> String {
    let rewards: Vec<f64> = curve.iter().map(|p| p.reward).collect();
    let window = 50usize;
    let smooth: Vec<f64> = (0..rewards.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            rewards[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect();
    let lo = rewards.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let hi = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(lo + 1.0);
    let n = rewards.len().max(2) - 1;
    let x = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / n as f64;
    let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);
    let points = |vals: &[f64]| {
        let mut s = String::new();
        for (i, v) in vals.iter().enumerate() {
            let _ = write!(s, "{:.2},{:.2} ", x(i), y(*v));
        }
        s.trim_end().to_string()
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{m},{m} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{} learning curve</text>"#,
        WIDTH / 2.0,
        escape(policy)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">episode (0..{})</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        rewards.len().saturating_sub(1)
    );
    let _ = writeln!(
        svg,
        r#"<text x="8" y="{:.2}" font-family="sans-serif" font-size="12">{hi}</text>"#,
        MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="8" y="{:.2}" font-family="sans-serif" font-size="12">{lo}</text>"#,
        HEIGHT - MARGIN
    );
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#9ecae1" stroke-width="1"/>"##,
        points(&rewards)
    );
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#08519c" stroke-width="2"/>"##,
        points(&smooth)
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf, HarnessError> {
    std::fs::write(&path, contents).map_err(|source| HarnessError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes `summary.csv`, `summary.json` and one `learning_curve_<policy>.svg`
/// per summary that carries a learning curve. Returns the written paths.
pub fn emit_report(summaries: &[RunSummary], out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if summaries.is_empty() {
        return Err(HarnessError::NoSummaries);
    }
    std::fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut written = vec![
        write_file(out_dir.join("summary.csv"), &summary_csv(summaries))?,
        write_file(out_dir.join("summary.json"), &summary_json(summaries))?,
    ];
    for s in summaries {
        if let Some(curve) = &s.learning_curve {
            let name = format!("learning_curve_{}.svg", s.policy);
            written.push(write_file(out_dir.join(name), &learning_curve_svg(&s.policy, curve))?);
        }
    }
    Ok(written)
}
