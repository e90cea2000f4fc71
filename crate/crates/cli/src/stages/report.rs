//! Paper-style tables and plot-ready CSVs assembled from earlier stage outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use crimeflow::flownet::read_edge_list;
use crimeflow::forecast::EvalReport;
use crimeflow::panel::Panel;

use super::explain::{self, ExplainReport};
use super::features::panel_file;
use super::network::sp_file;
use super::{forecast, rel, years_on_disk, EXPLAIN_DIR, FEATURES_DIR, FORECAST_DIR, NETWORK_DIR, REPORT_DIR};
use crate::args::ReportArgs;
use crate::error::{CliError, Result};
use crate::fsio::{read_json, Stage};
use crate::Context;

pub const TABLE1: &str = "table1.txt";
pub const TABLE2: &str = "table2.txt";
pub const PROFILES: &str = "temporal_profiles.csv";

pub fn edges_file(year: i32) -> String {
    format!("edges_{year}.csv")
}

fn label(regressor: &str) -> &str {
    match regressor {
        "past_crime" => "Past crime",
        "checkins" => "check-ins",
        "passthrough_flow" => "pass-through flow",
        "inout_flow" => "incoming/outgoing flow",
        "selfloop_flow" => "self-loop flow",
        other => other,
    }
}

fn fmt_p(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

pub fn table1(r: &ExplainReport) -> String {
    let suite = &r.suite;
    let mut s = String::new();
    writeln!(s, "Negative binomial panel models, {} ({} tracts x 168 hours)", r.year, r.n_tracts).unwrap();
    writeln!(s).unwrap();
    let rows: Vec<(String, String, String)> = suite
        .models
        .iter()
        .map(|m| {
            let best = if suite.best_model.as_deref() == Some(&m.model) { " *" } else { "" };
            let regs: Vec<&str> = m.regressors.iter().map(|x| label(x)).collect();
            (m.model.clone(), regs.join(", "), format!("{:.2}{best}", m.aic))
        })
        .collect();
    let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(5);
    let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max(10);
    writeln!(s, "{:<w0$}  {:<w1$}  AIC", "Model", "Regressors").unwrap();
    for (m, regs, aic) in &rows {
        writeln!(s, "{m:<w0$}  {regs:<w1$}  {aic}").unwrap();
    }
    writeln!(s, "(* lowest AIC)").unwrap();

    if !suite.lr_tests.is_empty() {
        writeln!(s, "\nLikelihood-ratio tests").unwrap();
        for t in &suite.lr_tests {
            writeln!(
                s,
                "  {} vs {}: chi2 = {:.3}, df = {}, p = {}",
                t.full,
                t.nested,
                t.statistic,
                t.df,
                fmt_p(t.p_value)
            )
            .unwrap();
        }
    }

    writeln!(s, "\nCoefficients").unwrap();
    for m in &suite.models {
        let theta = if m.poisson_limit {
            "Poisson limit".to_string()
        } else {
            format!("theta = {:.4}", m.dispersion)
        };
        let note = if m.aliased.is_empty() {
            String::new()
        } else {
            format!(", dropped: {}", m.aliased.join(", "))
        };
        writeln!(s, "  Model {} (logL = {:.3}, {theta}{note})", m.model, m.log_likelihood).unwrap();
        for c in m.coefficients.iter().filter(|c| m.regressors.contains(&c.name)) {
            let irr = m.irr_per_100.iter().find(|i| i.regressor == c.name);
            let irr = irr.map_or(String::new(), |i| {
                format!(
                    "  IRR/100 = {:.4} [{:.4}, {:.4}] ({:+.2}%)",
                    i.rate_ratio, i.ci_low, i.ci_high, i.percent_change
                )
            });
            writeln!(
                s,
                "    {:<24} {:>12.6} (SE {:.6}, p = {}){irr}",
                c.name,
                c.estimate,
                c.std_error,
                fmt_p(c.p_value)
            )
            .unwrap();
        }
    }
    s
}

pub fn table2(r: &EvalReport) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "Hourly crime prediction: train {}, evaluate {} ({} tracts x 168 hours)",
        r.train_year, r.eval_year, r.n_tracts
    )
    .unwrap();
    writeln!(s).unwrap();
    let wm = r.models.iter().map(|m| m.model.len()).max().unwrap_or(0).max(5);
    let wp = r.models.iter().map(|m| m.predictors.len()).max().unwrap_or(0).max(10);
    writeln!(
        s,
        "{:<wm$}  {:<wp$}  {:>10}  {:>9}  {:>10}  {:>8}",
        "Model", "Predictors", "MSE", "Improv.%", "MAE", "R2"
    )
    .unwrap();
    for m in &r.models {
        let imp = m.improvement_pct.map_or("-".into(), |v| format!("{v:.2}"));
        let r2 = m.metrics.r2.map_or("-".into(), |v| format!("{v:.4}"));
        writeln!(
            s,
            "{:<wm$}  {:<wp$}  {:>10.4}  {:>9}  {:>10.4}  {:>8}",
            m.model, m.predictors, m.metrics.mse, imp, m.metrics.mae, r2
        )
        .unwrap();
    }

    if !r.tests.is_empty() {
        writeln!(s, "\nWilcoxon signed-rank tests on squared errors").unwrap();
        for t in &r.tests {
            let w = &t.wilcoxon;
            writeln!(
                s,
                "  {} ({}) vs {} ({}): MSE {:.4} vs {:.4}, W = {}, n = {}, p = {}{}",
                t.kind.short(),
                t.with_passthrough,
                t.kind.short(),
                t.without,
                t.mse_with,
                t.mse_without,
                w.statistic,
                w.n,
                fmt_p(w.p_value),
                if w.exact { " (exact)" } else { "" }
            )
            .unwrap();
        }
    }

    writeln!(s, "\nCrimes gained per week over the historical profile").unwrap();
    for m in r.models.iter().skip(1) {
        writeln!(s, "  {:<wm$}  {:+}", m.model, m.crimes_gained).unwrap();
    }
    s
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io {
        context: "writing report CSV".into(),
        source: std::io::Error::other(e),
    }
}

fn write_profiles(panels: &[Panel], out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["year", "hour", "crime", "checkins", "inout_flow", "selfloop_flow", "passthrough_flow"])
        .map_err(csv_err)?;
    for p in panels {
        let mut totals = vec![[0u64; 5]; 168];
        for r in p.rows() {
            let row = &mut totals[r.t];
            for (acc, v) in row.iter_mut().zip([r.crime, r.checkins, r.inout_flow, r.selfloop_flow, r.passthrough_flow]) {
                *acc += v;
            }
        }
        for (t, row) in totals.iter().enumerate() {
            let mut rec = vec![p.year.to_string(), t.to_string()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| CliError::io("writing report CSV", e))
}

/// Routed edges summed over the week, with endpoint centroids for plotting.
fn write_edges(
    edges: &[crimeflow::flownet::EdgeRow],
    centroids: &BTreeMap<String, (f64, f64)>,
    out: &mut dyn Write,
) -> Result<()> {
    let mut weekly: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for e in edges {
        *weekly.entry((e.src.as_str(), e.dst.as_str())).or_default() += e.weight;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["src", "dst", "weight", "src_x", "src_y", "dst_x", "dst_y"]).map_err(csv_err)?;
    for ((src, dst), weight) in weekly {
        let (Some(a), Some(b)) = (centroids.get(src), centroids.get(dst)) else {
            return Err(CliError::Config(format!("edge {src} -> {dst} names a tract missing from the panels")));
        };
        w.write_record([
            src.to_string(),
            dst.to_string(),
            weight.to_string(),
            a.0.to_string(),
            a.1.to_string(),
            b.0.to_string(),
            b.1.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io("writing report CSV", e))
}

pub fn run(ctx: &Context, _a: &ReportArgs) -> Result<()> {
    let mut stage = Stage::new("report", &ctx.out_dir, ctx.seed, ctx.threads, serde_json::json!({}));
    let fit_path = ctx.out_dir.join(EXPLAIN_DIR).join(explain::REPORT);
    let eval_path = ctx.out_dir.join(FORECAST_DIR).join(forecast::REPORT);
    if !fit_path.is_file() && !eval_path.is_file() {
        return Err(CliError::missing("model results", "explain` or `forecast", fit_path));
    }
    if fit_path.is_file() {
        stage.input(&fit_path)?;
        let r: ExplainReport = read_json(&fit_path)?;
        let text = table1(&r);
        stage.write(&rel(REPORT_DIR, TABLE1), |w| {
            w.write_all(text.as_bytes()).map_err(|e| CliError::io("writing table 1", e))
        })?;
    }
    if eval_path.is_file() {
        stage.input(&eval_path)?;
        let r: EvalReport = read_json(&eval_path)?;
        let text = table2(&r);
        stage.write(&rel(REPORT_DIR, TABLE2), |w| {
            w.write_all(text.as_bytes()).map_err(|e| CliError::io("writing table 2", e))
        })?;
    }

    let features = ctx.out_dir.join(FEATURES_DIR);
    let mut panels = Vec::new();
    for year in years_on_disk(&features, "panel_", ".csv") {
        let path = features.join(panel_file(year));
        stage.input(&path)?;
        panels.push(Panel::read_csv(&path, year)?);
    }
    if !panels.is_empty() {
        stage.write(&rel(REPORT_DIR, PROFILES), |w| write_profiles(&panels, w))?;
        let centroids: BTreeMap<String, (f64, f64)> =
            panels[0].rows().iter().map(|r| (r.tract_id.clone(), (r.x, r.y))).collect();
        let network = ctx.out_dir.join(NETWORK_DIR);
        for p in &panels {
            let path = network.join(sp_file(p.year));
            if !path.is_file() {
                continue;
            }
            stage.input(&path)?;
            let edges = read_edge_list(&path)?;
            stage.write(&rel(REPORT_DIR, &edges_file(p.year)), |w| write_edges(&edges, &centroids, w))?;
        }
    }
    stage.finish()?;
    Ok(())
}
