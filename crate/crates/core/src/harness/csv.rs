//! Deterministic rendering and parsing of run records and summaries.
//!
//! Floats are written with the shortest round-trip representation, so
//! write/parse cycles are bit-exact and output bytes are stable across
//! invocations.

use super::{HarnessError, OutputFormat, RunRecord, SummaryTable};
use std::fmt::Write as _;

const PER_RUN_HEADER: &str = "method_index,method,gamma_e,seed,cumulative_reward,attempted_updates,successful_updates,invariant_violations,mistake_count,optimism_violations,escape_count_greedy,escape_count_acting";

fn opt_f64(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_u64(value: Option<u64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Renders one CSV row per run record.
pub fn per_run_csv(records: &[RunRecord]) -> String {
    let mut out = String::new();
    out.push_str(PER_RUN_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method_index,
            r.method,
            opt_f64(r.gamma_e),
            r.seed_index,
            r.cumulative_reward,
            r.attempted_updates,
            r.successful_updates,
            r.invariant_violations,
            opt_u64(r.mistake_count),
            opt_u64(r.optimism_violations),
            opt_u64(r.escape_count_greedy),
            opt_u64(r.escape_count_acting),
        )
        .expect("string write cannot fail");
    }
    out
}

fn parse_field<T: std::str::FromStr>(
    field: &str,
    name: &str,
    line: usize,
) -> Result<T, HarnessError> {
    field.parse().map_err(|_| HarnessError::Csv {
        line,
        message: format!("cannot parse `{field}` as {name}"),
    })
}

fn parse_opt<T: std::str::FromStr>(
    field: &str,
    name: &str,
    line: usize,
) -> Result<Option<T>, HarnessError> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_field(field, name, line).map(Some)
    }
}

/// Parses the output of [`per_run_csv`] back into records (without reward
/// streams).
pub fn parse_per_run_csv(text: &str) -> Result<Vec<RunRecord>, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == PER_RUN_HEADER => {}
        Some((_, header)) => {
            return Err(HarnessError::Csv {
                line: 1,
                message: format!("unexpected header `{header}`"),
            })
        }
        None => {
            return Err(HarnessError::Csv {
                line: 1,
                message: "empty document".to_string(),
            })
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(HarnessError::Csv {
                line: i + 1,
                message: format!("expected 12 fields, got {}", fields.len()),
            });
        }
        records.push(RunRecord {
            method_index: parse_field(fields[0], "method_index", i + 1)?,
            method: fields[1].to_string(),
            gamma_e: parse_opt(fields[2], "gamma_e", i + 1)?,
            seed_index: parse_field(fields[3], "seed", i + 1)?,
            cumulative_reward: parse_field(fields[4], "cumulative_reward", i + 1)?,
            rewards: None,
            attempted_updates: parse_field(fields[5], "attempted_updates", i + 1)?,
            successful_updates: parse_field(fields[6], "successful_updates", i + 1)?,
            invariant_violations: parse_field(fields[7], "invariant_violations", i + 1)?,
            mistake_count: parse_opt(fields[8], "mistake_count", i + 1)?,
            optimism_violations: parse_opt(fields[9], "optimism_violations", i + 1)?,
            escape_count_greedy: parse_opt(fields[10], "escape_count_greedy", i + 1)?,
            escape_count_acting: parse_opt(fields[11], "escape_count_acting", i + 1)?,
        });
    }
    Ok(records)
}

/// Summary CSV with the columns `method,gamma_e,mean,ci_half_width,n_runs`.
pub fn summary_csv(table: &SummaryTable) -> String {
    let mut out = String::from("method,gamma_e,mean,ci_half_width,n_runs\n");
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.method,
            opt_f64(row.gamma_e),
            row.mean,
            opt_f64(row.ci_half_width),
            row.n_runs,
        )
        .expect("string write cannot fail");
    }
    out
}

/// Aligned-text summary table with `mean±half-width` at two decimals.
pub fn render_table(table: &SummaryTable) -> String {
    let mut rows: Vec<[String; 4]> = vec![[
        "method".to_string(),
        "gamma_E".to_string(),
        "cumulative_reward".to_string(),
        "n_runs".to_string(),
    ]];
    for row in &table.rows {
        let gamma_e = row
            .gamma_e
            .map(|g| g.to_string())
            .unwrap_or_else(|| "-".to_string());
        let reward = match row.ci_half_width {
            Some(hw) => format!("{:.2}\u{b1}{:.2}", row.mean, hw),
            None => format!("{:.2}\u{b1}n/a", row.mean),
        };
        rows.push([row.method.clone(), gamma_e, reward, row.n_runs.to_string()]);
    }
    let mut widths = [0usize; 4];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in &rows {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(cell);
            if i < 3 {
                for _ in cell.chars().count()..widths[i] {
                    line.push(' ');
                }
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Renders a summary in the requested format.
pub fn emit_table(table: &SummaryTable, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => summary_csv(table),
        OutputFormat::Table => render_table(table),
    }
}
