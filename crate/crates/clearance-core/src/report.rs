//! Report artifacts: CSV tables, JSON summaries, and the optional SVG bar
//! chart. All writers are deterministic byte-for-byte given equal inputs
//! (floats use the shortest round-trip representation), which is what makes
//! reruns under a recorded seed diffable.

use std::path::Path;

use serde::Serialize;

use crate::dataset::Dataset;
use crate::eval::{GridResult, SweepResult};
use crate::linkage::{LinkResult, WpRecord};
use crate::shap::{RankedFeature, ShapExplanation};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv write error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json write error: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Serialize any summary as pretty JSON.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), ReportError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path.as_ref(), text).map_err(io_err(path.as_ref()))
}

/// Per-point attributions: one row per (observation, feature).
pub fn write_explanations_csv(
    path: impl AsRef<Path>,
    explanations: &[ShapExplanation],
    feature_names: &[String],
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record([
        "row_id",
        "feature",
        "phi",
        "base_value",
        "margin",
        "probability",
    ])?;
    for e in explanations {
        for (name, phi) in feature_names.iter().zip(&e.phi) {
            w.write_record([
                e.row_id.as_str(),
                name,
                &phi.to_string(),
                &e.base_value.to_string(),
                &e.prediction.to_string(),
                &e.probability().to_string(),
            ])?;
        }
    }
    w.flush().map_err(io_err(path.as_ref()))?;
    Ok(())
}

/// Global importance table.
pub fn write_shap_summary_csv(
    path: impl AsRef<Path>,
    ranking: &[RankedFeature],
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["feature", "mean_abs_phi", "rank"])?;
    for r in ranking {
        w.write_record([
            r.feature.as_str(),
            &r.mean_abs_phi.to_string(),
            &r.rank.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path.as_ref()))?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Horizontal bar chart of the top-ranked features.
pub fn write_shap_summary_svg(
    path: impl AsRef<Path>,
    ranking: &[RankedFeature],
    top_n: usize,
) -> Result<(), ReportError> {
    let top = &ranking[..top_n.min(ranking.len())];
    let max = top
        .iter()
        .map(|r| r.mean_abs_phi)
        .fold(f64::MIN, f64::max)
        .max(1e-12);
    let bar_h = 22;
    let gap = 6;
    let label_w = 320;
    let plot_w = 560;
    let height = top.len() * (bar_h + gap) + 40;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{height}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n",
        label_w + plot_w + 80
    ));
    svg.push_str(
        "<text x=\"8\" y=\"20\" font-weight=\"bold\">mean |attribution| (log-odds)</text>\n",
    );
    for (i, r) in top.iter().enumerate() {
        let y = 34 + i * (bar_h + gap);
        let w = (r.mean_abs_phi / max * plot_w as f64).round() as usize;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            label_w - 8,
            y + bar_h - 6,
            xml_escape(&r.feature)
        ));
        svg.push_str(&format!(
            "<rect x=\"{label_w}\" y=\"{y}\" width=\"{w}\" height=\"{bar_h}\" fill=\"#4878a8\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{:.4}</text>\n",
            label_w + w + 6,
            y + bar_h - 6,
            r.mean_abs_phi
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path.as_ref(), svg).map_err(io_err(path.as_ref()))?;
    Ok(())
}

/// One row per configuration-fold.
pub fn write_grid_csv(path: impl AsRef<Path>, grid: &GridResult) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record([
        "config_index",
        "config",
        "fold",
        "balanced_accuracy",
        "precision",
        "error",
    ])?;
    for (i, entry) in grid.entries.iter().enumerate() {
        let config = entry.hyperparameters.describe();
        match &entry.cv {
            Some(cv) => {
                for f in &cv.folds {
                    w.write_record([
                        &i.to_string(),
                        &config,
                        &f.fold.to_string(),
                        &f.balanced_accuracy.to_string(),
                        &f.precision.map(|p| p.to_string()).unwrap_or_default(),
                        f.precision_error.as_deref().unwrap_or(""),
                    ])?;
                }
            }
            None => {
                w.write_record([
                    &i.to_string(),
                    &config,
                    "",
                    "",
                    "",
                    entry.error.as_deref().unwrap_or("failed"),
                ])?;
            }
        }
    }
    w.flush().map_err(io_err(path.as_ref()))?;
    Ok(())
}

/// One row per state.
pub fn write_sweep_csv(path: impl AsRef<Path>, sweep: &SweepResult) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record([
        "state",
        "n_records",
        "best_config",
        "cv_balanced_accuracy",
        "cv_precision",
        "test_balanced_accuracy",
        "test_precision",
        "skipped",
    ])?;
    for s in &sweep.states {
        w.write_record([
            s.state.as_str(),
            &s.n_records.to_string(),
            &s.best.as_ref().map(|h| h.describe()).unwrap_or_default(),
            &s.cv_balanced_accuracy
                .map(|v| v.to_string())
                .unwrap_or_default(),
            &s.cv_precision.map(|v| v.to_string()).unwrap_or_default(),
            &s.test_balanced_accuracy
                .map(|v| v.to_string())
                .unwrap_or_default(),
            &s.test_precision.map(|v| v.to_string()).unwrap_or_default(),
            s.skipped.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush().map_err(io_err(path.as_ref()))?;
    Ok(())
}

/// Yearly solved/unsolved counts (the time-trend source table).
pub fn write_yearly_counts_csv(path: impl AsRef<Path>, d: &Dataset) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["year", "solved", "unsolved"])?;
    for (year, solved, unsolved) in d.yearly_counts() {
        w.write_record([
            &year.to_string(),
            &solved.to_string(),
            &unsolved.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path.as_ref()))?;
    Ok(())
}

/// Per-state totals and solved ratios.
pub fn write_state_ratios_csv(path: impl AsRef<Path>, d: &Dataset) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["state", "total", "solved", "solved_ratio"])?;
    for (state, (total, solved)) in d.state_counts() {
        w.write_record([
            state.as_str(),
            &total.to_string(),
            &solved.to_string(),
            &(solved as f64 / total as f64).to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path.as_ref()))?;
    Ok(())
}

/// Matched linkage pairs, one row each.
pub fn write_pairs_csv(
    path: impl AsRef<Path>,
    link: &LinkResult,
    map: &Dataset,
    wp: &[WpRecord],
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["key", "map_id", "map_solved", "wp_city", "wp_solved"])?;
    for p in &link.pairs {
        w.write_record([
            p.key.as_str(),
            map.records[p.a_index].id.as_str(),
            if p.a_solved { "Yes" } else { "No" },
            wp[p.b_index].city.as_str(),
            if p.b_solved { "Yes" } else { "No" },
        ])?;
    }
    w.flush().map_err(io_err(path.as_ref()))?;
    Ok(())
}
