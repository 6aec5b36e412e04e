//! CSV and plain-text renderings of rankings and meta statistics.
//!
//! CSV files use ',' separators, '.' decimals, LF line endings and 17
//! significant digits, so every float re-parses to the same bits. Missing
//! values are empty fields.
//!
//! Ranking CSV columns, in order: `method`, one column per metric id,
//! `mu_hat`, `median_rank`, `sigma_hat`, `flag`.

use std::fmt::Write as _;

use crate::data::Criterion;
use crate::error::{Error, Result};
use crate::meta::{LeveneProportions, MetaStatsResult, NamedMatrix, SdTable};
use crate::ranking::{AgreementFlag, MethodSummary, RankingTable};

pub const SUMMARY_COLUMNS: [&str; 4] = ["mu_hat", "median_rank", "sigma_hat", "flag"];

/// 17 significant digits; NaN becomes an empty field.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.16e}")
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse().map_err(|_| Error::Config(format!("not a number: {s:?}")))
}

fn to_csv(rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

pub fn ranking_csv(table: &RankingTable) -> Result<String> {
    let mut header = vec!["method".to_string()];
    header.extend(table.metric_ids.iter().cloned());
    header.extend(SUMMARY_COLUMNS.iter().map(|s| s.to_string()));
    let mut rows = vec![header];
    for (f, method) in table.method_ids.iter().enumerate() {
        let s = &table.summary[f];
        let mut row = vec![method.clone()];
        row.extend(table.ranks.iter().map(|r| fmt_f64(r[f])));
        row.extend([fmt_f64(s.mu_hat), fmt_f64(s.median_rank), fmt_f64(s.sigma_hat), s.flag.as_str().to_string()]);
        rows.push(row);
    }
    to_csv(rows)
}

fn parse_flag(s: &str) -> Result<AgreementFlag> {
    [AgreementFlag::HighAgreement, AgreementFlag::Neutral, AgreementFlag::HighDisagreement]
        .into_iter()
        .find(|f| f.as_str() == s)
        .ok_or_else(|| Error::Config(format!("unknown agreement flag {s:?}")))
}

/// Inverse of [`ranking_csv`].
pub fn parse_ranking_csv(text: &str, modality: &str, criterion: Criterion) -> Result<RankingTable> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let n = header.len();
    if n < 1 + SUMMARY_COLUMNS.len() || header[0] != "method" || header[n - 4..] != SUMMARY_COLUMNS {
        return Err(Error::Config("ranking CSV header does not match the fixed column order".into()));
    }
    let metric_ids = header[1..n - 4].to_vec();
    let mut method_ids = Vec::new();
    let mut ranks = vec![Vec::new(); metric_ids.len()];
    let mut summary = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        method_ids.push(rec[0].to_string());
        for (e, row) in ranks.iter_mut().enumerate() {
            row.push(parse_f64(&rec[1 + e])?);
        }
        summary.push(MethodSummary {
            mu_hat: parse_f64(&rec[n - 4])?,
            median_rank: parse_f64(&rec[n - 3])?,
            sigma_hat: parse_f64(&rec[n - 2])?,
            flag: parse_flag(&rec[n - 1])?,
        });
    }
    Ok(RankingTable {
        modality: modality.to_string(),
        criterion,
        metric_ids,
        method_ids,
        ranks,
        summary,
    })
}

pub fn matrix_csv(m: &NamedMatrix) -> Result<String> {
    let mut rows = vec![std::iter::once(m.label.clone()).chain(m.ids.iter().cloned()).collect()];
    for (id, row) in m.ids.iter().zip(&m.values) {
        rows.push(std::iter::once(id.clone()).chain(row.iter().map(|&v| fmt_f64(v))).collect());
    }
    to_csv(rows)
}

fn sd_csv(tables: &[SdTable]) -> Result<String> {
    let Some(first) = tables.first() else {
        return to_csv(vec![vec!["criterion".into()]]);
    };
    let mut rows = vec![std::iter::once("criterion".to_string()).chain(first.group_ids.iter().cloned()).collect()];
    for t in tables {
        rows.push(std::iter::once(t.criterion.as_str().to_string()).chain(t.values.iter().map(|&v| fmt_f64(v))).collect());
    }
    to_csv(rows)
}

fn levene_csv(l: &LeveneProportions) -> Result<String> {
    let mut rows = vec![std::iter::once("criterion".to_string()).chain(l.methods.iter().cloned()).collect()];
    for (c, row) in l.criteria.iter().zip(&l.rho) {
        rows.push(std::iter::once(c.as_str().to_string()).chain(row.iter().map(|&v| fmt_f64(v))).collect());
    }
    rows.push(std::iter::once("weighted".to_string()).chain(l.weighted.iter().map(|&v| fmt_f64(v))).collect());
    to_csv(rows)
}

fn correlation_csv(methods: &[String], m: &[Vec<Option<f64>>]) -> Result<String> {
    let mut rows = vec![std::iter::once("method".to_string()).chain(methods.iter().cloned()).collect()];
    for (id, row) in methods.iter().zip(m) {
        rows.push(std::iter::once(id.clone()).chain(row.iter().map(|v| v.map_or(String::new(), fmt_f64))).collect());
    }
    to_csv(rows)
}

/// Every meta-statistics table as `(file name, CSV text)`, in a fixed order.
pub fn meta_csvs(meta: &MetaStatsResult) -> Result<Vec<(String, String)>> {
    let mut out = vec![
        ("sd_by_architecture.csv".to_string(), sd_csv(&meta.sd_by_architecture)?),
        ("sd_by_dataset.csv".to_string(), sd_csv(&meta.sd_by_dataset)?),
        ("levene_proportions.csv".to_string(), levene_csv(&meta.levene)?),
        ("method_rank_correlation.csv".to_string(), correlation_csv(&meta.levene.methods, &meta.method_correlation)?),
        ("kendall_tau.csv".to_string(), matrix_csv(&meta.kendall_tau)?),
    ];
    for m in &meta.metric_distances {
        out.push((format!("metric_distance_{}.csv", m.label), matrix_csv(m)?));
    }
    for m in &meta.architecture_distances {
        out.push((format!("architecture_distance_{}.csv", m.label), matrix_csv(m)?));
    }
    for m in &meta.wmw {
        out.push((format!("wmw_{}.csv", m.label), matrix_csv(m)?));
    }
    Ok(out)
}

fn text_table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let _ = writeln!(out, "{}", line(header));
    for r in rows {
        let _ = writeln!(out, "{}", line(r));
    }
    let _ = writeln!(out);
}

/// Human-readable summary of the rankings and the main meta statistics.
pub fn render_text(tables: &[RankingTable], meta: Option<&MetaStatsResult>) -> String {
    let mut out = String::new();
    for t in tables {
        let _ = writeln!(out, "{} / {}", t.modality, t.criterion.as_str());
        let mut header = vec!["method".to_string()];
        header.extend(t.metric_ids.iter().cloned());
        header.extend(SUMMARY_COLUMNS.iter().map(|s| s.to_string()));
        let rows: Vec<Vec<String>> = t
            .method_ids
            .iter()
            .enumerate()
            .map(|(f, m)| {
                let s = &t.summary[f];
                let mut row = vec![m.clone()];
                row.extend(t.ranks.iter().map(|r| format!("{:.1}", r[f])));
                row.extend([format!("{:.2}", s.mu_hat), format!("{:.1}", s.median_rank), format!("{:.2}", s.sigma_hat), s.flag.as_str().to_string()]);
                row
            })
            .collect();
        text_table(&mut out, &header, &rows);
    }
    if let Some(meta) = meta {
        let _ = writeln!(out, "accepted Levene tests (alpha-level share per method)");
        let l = &meta.levene;
        let mut header = vec!["criterion".to_string()];
        header.extend(l.methods.iter().cloned());
        let mut rows: Vec<Vec<String>> = l
            .criteria
            .iter()
            .zip(&l.rho)
            .map(|(c, r)| std::iter::once(c.as_str().to_string()).chain(r.iter().map(|v| format!("{v:.2}"))).collect())
            .collect();
        rows.push(std::iter::once("weighted".to_string()).chain(l.weighted.iter().map(|v| format!("{v:.2}"))).collect());
        text_table(&mut out, &header, &rows);
        for sd in &meta.sd_by_architecture {
            let _ = writeln!(out, "mean SD between {} metrics by architecture", sd.criterion.as_str());
            text_table(&mut out, &sd.group_ids, &[sd.values.iter().map(|v| format!("{v:.2}")).collect()]);
        }
    }
    out
}
