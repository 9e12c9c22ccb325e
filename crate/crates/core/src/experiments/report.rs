use std::fmt::Write;

use super::categories::CategoryReport;
use super::run::ExperimentReport;
use crate::metrics::RocPoint;
use crate::models::{EpochRecord, ModelKind};
use crate::serial::csv_f64;

fn models_of(report: &ExperimentReport) -> Vec<ModelKind> {
    report.conditions.first().map(|c| c.models.iter().map(|m| m.model).collect()).unwrap_or_default()
}

fn fraction(x: Option<f64>) -> String {
    x.map_or_else(|| "all".to_string(), |x| format!("{x:.1}"))
}

/// Right-aligns every column of `rows` (the first row is the header).
fn align(rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..rows[0].len()).map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(c, &w)| format!("{c:>w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// One line per condition: dataset statistics followed by each model's AUC.
pub fn render_table(report: &ExperimentReport) -> String {
    let models = models_of(report);
    let mut header: Vec<String> =
        ["X", "removed", "train", "buy%", "cold", "cold buy%", "warm", "warm buy%", "%cold"].map(String::from).to_vec();
    header.extend(models.iter().map(|m| format!("AUC {m}")));
    let mut rows = vec![header];
    for c in &report.conditions {
        let s = &c.stats;
        let mut row = vec![
            fraction(s.removal_fraction),
            s.removed_sessions.to_string(),
            s.train_sessions.to_string(),
            format!("{:.2}", s.train_buy_pct),
            s.cold_sessions.to_string(),
            format!("{:.2}", s.cold_buy_pct),
            s.warm_sessions.to_string(),
            format!("{:.2}", s.warm_buy_pct),
            format!("{:.1}", s.cold_pct),
        ];
        row.extend(
            models
                .iter()
                .map(|&k| c.models.iter().find(|m| m.model == k).map_or_else(|| "-".into(), |m| format!("{:.4}", m.auc))),
        );
        rows.push(row);
    }
    let mut out = format!("protocol {} (seed {}, {} test sessions)\n", report.protocol, report.seed, report.test_sessions);
    out.push_str(&align(&rows));
    for c in &report.conditions {
        for d in &c.delong {
            let _ = writeln!(
                out,
                "X={} DeLong {} vs {}: z={:.3} p={:.4}",
                fraction(c.stats.removal_fraction),
                d.model_a,
                d.model_b,
                d.z,
                d.p_value
            );
        }
        for w in &c.warnings {
            let _ = writeln!(out, "X={} warning: {w}", fraction(c.stats.removal_fraction));
        }
    }
    out
}

/// Machine-readable counterpart of [`render_table`], one row per condition
/// and model.
pub fn report_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "protocol,x,model,removed_sessions,train_sessions,train_buy_pct,cold_sessions,cold_buy_pct,warm_sessions,warm_buy_pct,cold_pct,auc,average_precision,auc_no_cold,auc_mostly_cold,best_epoch\n",
    );
    let opt = |v: Option<f64>| v.map(csv_f64).unwrap_or_default();
    for c in &report.conditions {
        let s = &c.stats;
        for m in &c.models {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                report.protocol,
                s.removal_fraction.map(csv_f64).unwrap_or_default(),
                m.model,
                s.removed_sessions,
                s.train_sessions,
                csv_f64(s.train_buy_pct),
                s.cold_sessions,
                csv_f64(s.cold_buy_pct),
                s.warm_sessions,
                csv_f64(s.warm_buy_pct),
                csv_f64(s.cold_pct),
                csv_f64(m.auc),
                csv_f64(m.average_precision),
                opt(m.auc_no_cold),
                opt(m.auc_mostly_cold),
                m.best_epoch
            );
        }
    }
    out
}

pub fn category_csv(report: &CategoryReport) -> String {
    let mut out = String::from("category,item_count,mean_description_length,session_count,positives,model,auc\n");
    for r in &report.rows {
        for a in &r.aucs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.category.0,
                r.item_count,
                csv_f64(r.mean_description_length),
                r.session_count,
                r.positives,
                a.model,
                a.auc.map(csv_f64).unwrap_or_default()
            );
        }
    }
    out
}

/// Per-category table; undefined AUCs print as `n/a`.
pub fn render_category_table(report: &CategoryReport) -> String {
    let models: Vec<ModelKind> = report.rows.first().map(|r| r.aucs.iter().map(|a| a.model).collect()).unwrap_or_default();
    let mut header: Vec<String> = ["category", "items", "desc len", "sessions", "buys"].map(String::from).to_vec();
    header.extend(models.iter().map(|m| format!("AUC {m}")));
    let mut rows = vec![header];
    for r in &report.rows {
        let mut row = vec![
            r.category.0.to_string(),
            r.item_count.to_string(),
            format!("{:.1}", r.mean_description_length),
            r.session_count.to_string(),
            r.positives.to_string(),
        ];
        row.extend(r.aucs.iter().map(|a| a.auc.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))));
        rows.push(row);
    }
    let mut out = align(&rows);
    if report.uncategorized > 0 {
        let _ = writeln!(out, "{} sessions without catalogued items", report.uncategorized);
    }
    out
}

pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("fpr,tpr,threshold\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", csv_f64(p.fpr), csv_f64(p.tpr), csv_f64(p.threshold));
    }
    out
}

pub fn trace_csv(trace: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_auc\n");
    for r in trace {
        let _ = writeln!(out, "{},{},{}", r.epoch, csv_f64(r.train_loss), csv_f64(r.val_auc));
    }
    out
}
