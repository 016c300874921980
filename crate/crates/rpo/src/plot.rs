//! Merging experiment summaries into plot-ready data and an SVG chart.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{io_err, parse_err, HarnessError, Result};
use crate::harness::{plot_rows, RoundSummary, SUMMARY_HEADER};

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSummary {
    pub path: PathBuf,
    pub variant: String,
    pub env: String,
    pub mu_star: f64,
    pub rounds: Vec<RoundSummary>,
}

pub fn parse_summary(text: &str, path: &Path) -> Result<LoadedSummary> {
    let name = path.display().to_string();
    let (mut env, mut mu_star) = (String::new(), None);
    let mut rounds = Vec::new();
    let mut variant = String::new();
    let mut saw_header = false;
    for (i, line) in text.lines().enumerate() {
        if let Some(meta) = line.strip_prefix("# ") {
            if let Some((k, v)) = meta.split_once('=') {
                match k {
                    "env" => env = v.to_string(),
                    "mu_star" => {
                        mu_star = Some(v.parse::<f64>().map_err(|_| parse_err(&name, i + 1, "invalid mu_star"))?)
                    }
                    _ => {}
                }
            }
            continue;
        }
        if !saw_header {
            if line != SUMMARY_HEADER {
                return Err(parse_err(&name, i + 1, "missing summary header"));
            }
            saw_header = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let [v, round, mean, ci, norm] = cols.as_slice() else {
            return Err(parse_err(&name, i + 1, "expected 5 columns"));
        };
        let f = |s: &str| s.parse::<f64>().map_err(|_| parse_err(&name, i + 1, format!("not a number: {s:?}")));
        variant = v.to_string();
        rounds.push(RoundSummary {
            round: round.parse().map_err(|_| parse_err(&name, i + 1, "invalid round"))?,
            mean_rev: f(mean)?,
            ci_half: f(ci)?,
            norm_rev: f(norm)?,
        });
    }
    let mu_star = mu_star.ok_or_else(|| parse_err(&name, 0, "missing mu_star"))?;
    Ok(LoadedSummary { path: path.to_path_buf(), variant, env, mu_star, rounds })
}

/// `summary.csv` in `dir` and in each immediate subdirectory, sorted by path.
pub fn find_summaries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let direct = dir.join("summary.csv");
    if direct.is_file() {
        found.push(direct);
    }
    let entries = fs::read_dir(dir).map_err(io_err(dir))?;
    for entry in entries {
        let p = entry.map_err(io_err(dir))?.path().join("summary.csv");
        if p.is_file() {
            found.push(p);
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(HarnessError::MissingInputs(dir.to_path_buf()));
    }
    Ok(found)
}

pub fn load_summaries(dir: &Path) -> Result<Vec<LoadedSummary>> {
    let summaries = find_summaries(dir)?
        .into_iter()
        .map(|p| {
            let text = fs::read_to_string(&p).map_err(io_err(&p))?;
            parse_summary(&text, &p)
        })
        .collect::<Result<Vec<_>>>()?;
    let first = &summaries[0];
    if let Some(other) = summaries.iter().find(|s| s.rounds.len() != first.rounds.len()) {
        return Err(HarnessError::RoundMismatch(format!(
            "{} has {} rounds, {} has {}",
            first.path.display(),
            first.rounds.len(),
            other.path.display(),
            other.rounds.len()
        )));
    }
    Ok(summaries)
}

/// Series label: the variant, qualified by environment when several
/// summaries share a variant.
pub fn label(summary: &LoadedSummary, all: &[LoadedSummary]) -> String {
    let shared = all.iter().filter(|s| s.variant == summary.variant).count() > 1;
    if shared {
        format!("{}@{}", summary.variant, summary.env)
    } else {
        summary.variant.clone()
    }
}

pub fn merged_rows(summaries: &[LoadedSummary]) -> Vec<(String, usize, f64, f64, f64)> {
    summaries
        .iter()
        .flat_map(|s| plot_rows(&label(s, summaries), s.mu_star, &s.rounds))
        .collect()
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Line chart of normalized revenue per round, one series per label, with
/// shaded confidence bands.
pub fn render_svg(rows: &[(String, usize, f64, f64, f64)]) -> String {
    let (w, h, pad) = (720.0, 420.0, 50.0);
    let mut labels: Vec<&str> = Vec::new();
    for (l, ..) in rows {
        if !labels.contains(&l.as_str()) {
            labels.push(l);
        }
    }
    let max_round = rows.iter().map(|r| r.1).max().unwrap_or(1).max(2) as f64;
    let lo = rows.iter().map(|r| r.3).fold(f64::INFINITY, f64::min).min(1.0);
    let hi = rows.iter().map(|r| r.4).fold(f64::NEG_INFINITY, f64::max).max(1.0);
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (0.0, 1.0) };
    let x = |round: f64| pad + (round - 1.0) / (max_round - 1.0) * (w - 2.0 * pad);
    let y = |v: f64| h - pad - (v - lo) / (hi - lo) * (h - 2.0 * pad);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.3}</text>"#, pad - 4.0, y(v) + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">round</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(svg, r#"<text x="{pad}" y="{}">normalized revenue</text>"#, pad - 16.0);
    for (i, l) in labels.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let series: Vec<_> = rows.iter().filter(|r| r.0 == *l).collect();
        let mut band = String::new();
        for r in &series {
            let _ = write!(band, "{:.1},{:.1} ", x(r.1 as f64), y(r.4));
        }
        for r in series.iter().rev() {
            let _ = write!(band, "{:.1},{:.1} ", x(r.1 as f64), y(r.3));
        }
        let _ = writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, band.trim_end());
        let line: Vec<String> = series.iter().map(|r| format!("{:.1},{:.1}", x(r.1 as f64), y(r.2))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" "));
        let ly = pad + 16.0 * i as f64;
        let _ = writeln!(svg, r#"<text x="{}" y="{ly}" fill="{color}">{l}</text>"#, w - pad - 120.0);
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(variant: &str, rounds: usize) -> String {
        let mut s = format!("# env=perfect\n# variant={variant}\n# mu_star=0.25\n{SUMMARY_HEADER}\n");
        for r in 1..=rounds {
            s.push_str(&format!("{variant},{r},0.2,0.01,0.8\n"));
        }
        s
    }

    fn write(dir: &Path, sub: &str, text: &str) {
        let d = dir.join(sub);
        fs::create_dir_all(&d).unwrap();
        fs::write(d.join("summary.csv"), text).unwrap();
    }

    #[test]
    fn merges_three_variants() {
        let dir = tempfile::tempdir().unwrap();
        for v in ["I", "II", "V"] {
            write(dir.path(), v, &summary(v, 7));
        }
        let s = load_summaries(dir.path()).unwrap();
        let rows = merged_rows(&s);
        assert_eq!(rows.len(), 21);
        assert!((rows[0].3 - (0.8 - 0.04)).abs() < 1e-12);
        assert!(render_svg(&rows).contains("<polyline"));
    }

    #[test]
    fn single_summary_passes_through() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("summary.csv"), summary("III", 4)).unwrap();
        let rows = merged_rows(&load_summaries(dir.path()).unwrap());
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[3].0, "III");
        assert_eq!(rows[3].1, 4);
    }

    #[test]
    fn mismatched_rounds() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a", &summary("I", 5));
        write(dir.path(), "b", &summary("V", 6));
        let err = load_summaries(dir.path()).unwrap_err();
        assert!(err.to_string().starts_with("round-count mismatch"), "{err}");
    }

    #[test]
    fn missing_inputs() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_summaries(dir.path()), Err(HarnessError::MissingInputs(_))));
    }
}
