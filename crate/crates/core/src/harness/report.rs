//! Text and CSV rendering of results tables, and the intervention
//! distribution comparison.

use std::fmt::Write as _;

use serde::Serialize;

use super::experiment::{Cell, Condition, ResultRow, ResultsTable, COLUMNS};
use super::HarnessError;
use crate::domain::{InterventionAction, MetaGroup, N_ACTIONS};
use crate::stats::{chi_square_independence, ChiSquareResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            other => Err(HarnessError::Config(format!(
                "unknown format {other:?} (expected text or csv)"
            ))),
        }
    }
}

/// Rounds half away from zero at `digits` decimals. Values within 1e-9 of a
/// half step count as exactly half, so 76.45 becomes 76.5 even though its
/// binary value sits just below.
pub fn round_half_up(x: f64, digits: u32) -> f64 {
    let f = 10f64.powi(digits as i32);
    let scaled = x.abs() * f;
    let floor = scaled.floor();
    let r = if scaled - floor >= 0.5 - 1e-9 {
        floor + 1.0
    } else {
        floor
    };
    (r / f).copysign(x)
}

fn fmt_num(x: f64, digits: u32) -> String {
    let r = round_half_up(x, digits);
    // Avoid "-0.0".
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r:.*}", digits as usize)
}

/// Scores get one decimal, learning gains two.
fn digits_for(column: &str) -> u32 {
    if column.contains("NLG") {
        2
    } else {
        1
    }
}

fn text_cell(cell: &Option<Cell>, digits: u32) -> String {
    match cell {
        None => "-".into(),
        Some(c) => match c.sd {
            Some(sd) => format!("{} ({})", fmt_num(c.mean, digits), fmt_num(sd, digits)),
            None => fmt_num(c.mean, digits),
        },
    }
}

fn csv_header() -> String {
    let mut h = String::from("group,condition,n");
    for c in COLUMNS {
        let k = c.to_lowercase();
        write!(h, ",{k}_mean,{k}_sd").expect("string write");
    }
    h
}

pub fn render_report(table: &ResultsTable, format: Format) -> String {
    match format {
        Format::Csv => render_csv(&table.rows),
        Format::Text => render_text(table),
    }
}

pub fn render_csv(rows: &[ResultRow]) -> String {
    let mut out = csv_header();
    out.push('\n');
    for r in rows {
        write!(out, "{},{},{}", r.group.name(), r.condition.name(), r.n).expect("string write");
        for (col, cell) in COLUMNS.iter().zip(&r.cells) {
            let d = digits_for(col);
            let (m, s) = match cell {
                None => (String::new(), String::new()),
                Some(c) => (
                    fmt_num(c.mean, d),
                    c.sd.map(|v| fmt_num(v, d)).unwrap_or_default(),
                ),
            };
            write!(out, ",{m},{s}").expect("string write");
        }
        out.push('\n');
    }
    out
}

fn render_text(table: &ResultsTable) -> String {
    let mut lines: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["Group".to_string(), "Cond".into(), "n".into()];
    header.extend(COLUMNS.iter().map(|c| c.to_string()));
    lines.push(header);
    for r in &table.rows {
        let mut l = vec![
            r.group.name().to_string(),
            r.condition.name().into(),
            r.n.to_string(),
        ];
        for (col, cell) in COLUMNS.iter().zip(&r.cells) {
            l.push(text_cell(cell, digits_for(col)));
        }
        lines.push(l);
    }
    let widths: Vec<usize> = (0..lines[0].len())
        .map(|i| {
            lines
                .iter()
                .map(|l| l[i].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for l in &lines {
        let row: Vec<String> = l
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:<w$}"))
            .collect();
        out.push_str(row.join("  ").trim_end());
        out.push('\n');
    }
    if !table.action_counts.is_empty() {
        out.push('\n');
        out.push_str(&render_distribution(
            action_distribution_report(table).as_ref().ok(),
        ));
    }
    out
}

fn render_distribution(d: Option<&ActionDistribution>) -> String {
    let Some(d) = d else {
        return "Interventions: none recorded\n".into();
    };
    let mut out = String::from("Interventions (experimental, decision slots)\n");
    let names: Vec<&str> = InterventionAction::ALL.iter().map(|a| a.token()).collect();
    writeln!(
        out,
        "Group    {:>7} {:>7} {:>7}",
        names[0], names[1], names[2]
    )
    .expect("write");
    for (g, c) in d.groups.iter().zip(&d.counts) {
        writeln!(out, "{:<8} {:>7} {:>7} {:>7}", g.name(), c[0], c[1], c[2]).expect("write");
    }
    match (&d.chi_square, &d.notice) {
        (Some(t), _) => writeln!(
            out,
            "chi2({}, N={}) = {}, p = {}",
            t.df,
            t.n,
            fmt_num(t.chi2, 2),
            fmt_num(t.p, 3)
        )
        .expect("write"),
        (None, Some(n)) => writeln!(out, "{n}").expect("write"),
        (None, None) => {}
    }
    out
}

/// Parses the CSV written by [`render_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>, HarnessError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Csv("missing header".into()))?;
    if header != csv_header() {
        return Err(HarnessError::Csv("unexpected header".into()));
    }
    let num = |s: &str, line: usize| -> Result<Option<f64>, HarnessError> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| HarnessError::Csv(format!("line {line}: bad number {s:?}")))
        }
    };
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let ln = k + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 + 2 * COLUMNS.len() {
            return Err(HarnessError::Csv(format!("line {ln}: wrong field count")));
        }
        let group: MetaGroup = f[0]
            .parse()
            .map_err(|_| HarnessError::Csv(format!("line {ln}: bad group {:?}", f[0])))?;
        let condition: Condition = f[1].parse()?;
        let n: usize = f[2]
            .parse()
            .map_err(|_| HarnessError::Csv(format!("line {ln}: bad n {:?}", f[2])))?;
        let mut cells = [None; 7];
        for (i, cell) in cells.iter_mut().enumerate() {
            if let Some(mean) = num(f[3 + 2 * i], ln)? {
                *cell = Some(Cell {
                    mean,
                    sd: num(f[4 + 2 * i], ln)?,
                    n,
                });
            }
        }
        rows.push(ResultRow {
            group,
            condition,
            n,
            cells,
        });
    }
    Ok(rows)
}

/// Intervention counts by group with the chi-square test of independence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionDistribution {
    pub groups: Vec<MetaGroup>,
    pub counts: Vec<[u64; N_ACTIONS]>,
    pub chi_square: Option<ChiSquareResult>,
    /// Why the test was skipped.
    pub notice: Option<String>,
}

/// Compares intervention mixes across groups. Groups with no decisions and
/// actions never used by anyone are dropped before testing; fewer than two of
/// either skips the test with a notice.
pub fn action_distribution(
    counts: &[(MetaGroup, [u64; N_ACTIONS])],
) -> Result<ActionDistribution, HarnessError> {
    let kept: Vec<&(MetaGroup, [u64; N_ACTIONS])> = counts
        .iter()
        .filter(|(_, c)| c.iter().sum::<u64>() > 0)
        .collect();
    if kept.is_empty() {
        return Err(HarnessError::EmptyCounts);
    }
    let used: Vec<usize> = (0..N_ACTIONS)
        .filter(|&a| kept.iter().any(|(_, c)| c[a] > 0))
        .collect();
    let mut out = ActionDistribution {
        groups: kept.iter().map(|(g, _)| *g).collect(),
        counts: kept.iter().map(|(_, c)| *c).collect(),
        chi_square: None,
        notice: None,
    };
    if kept.len() < 2 {
        out.notice = Some("chi-square skipped: only one experimental group".into());
    } else if used.len() < 2 {
        out.notice = Some("chi-square skipped: only one action was used".into());
    } else {
        let table: Vec<Vec<u64>> = kept
            .iter()
            .map(|(_, c)| used.iter().map(|&a| c[a]).collect())
            .collect();
        out.chi_square = Some(chi_square_independence(&table)?);
    }
    Ok(out)
}

pub fn action_distribution_report(
    table: &ResultsTable,
) -> Result<ActionDistribution, HarnessError> {
    action_distribution(&table.action_counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Protocol;

    #[test]
    fn half_up_rounding() {
        assert_eq!(fmt_num(76.49, 1), "76.5");
        assert_eq!(fmt_num(76.45, 1), "76.5");
        assert_eq!(fmt_num(76.44, 1), "76.4");
        assert_eq!(fmt_num(0.445, 2), "0.45");
        assert_eq!(fmt_num(-0.125, 2), "-0.13");
        assert_eq!(fmt_num(-0.001, 1), "0.0");
    }

    #[test]
    fn injected_counts_reproduce_published_chi_square() {
        use MetaGroup::*;
        let d = action_distribution(&[(Default, [94, 65, 127]), (StrOnly, [82, 74, 156])]).unwrap();
        let t = d.chi_square.unwrap();
        assert!((t.chi2 - 3.25).abs() <= 0.05);
        assert_eq!(t.df, 2);
        assert!((t.p - 0.20).abs() <= 0.01);
    }

    #[test]
    fn degenerate_distributions() {
        use MetaGroup::*;
        let one = action_distribution(&[(Default, [3, 4, 5])]).unwrap();
        assert!(one.chi_square.is_none() && one.notice.is_some());
        let prop = action_distribution(&[(Default, [2, 4, 6]), (StrTime, [1, 2, 3])]).unwrap();
        assert_eq!(prop.chi_square.unwrap().chi2, 0.0);
        let single_action =
            action_distribution(&[(Default, [5, 0, 0]), (StrOnly, [7, 0, 0])]).unwrap();
        assert!(single_action.chi_square.is_none());
        assert!(matches!(
            action_distribution(&[(Default, [0, 0, 0])]),
            Err(HarnessError::EmptyCounts)
        ));
    }

    fn empty_table() -> ResultsTable {
        ResultsTable {
            protocol: Protocol::Exp1Static,
            rows: vec![],
            action_counts: vec![],
            students: vec![],
        }
    }

    #[test]
    fn empty_table_renders_header_only() {
        let t = empty_table();
        assert_eq!(render_report(&t, Format::Csv).lines().count(), 1);
        assert_eq!(render_report(&t, Format::Text).lines().count(), 1);
    }

    #[test]
    fn csv_round_trip() {
        let cell = |m: f64, sd: Option<f64>| Some(Cell { mean: m, sd, n: 3 });
        let rows = vec![ResultRow {
            group: MetaGroup::StrOnly,
            condition: Condition::Control,
            n: 3,
            cells: [
                cell(55.55, Some(10.04)),
                cell(60.0, None),
                cell(0.4817, Some(0.2)),
                None,
                cell(-0.05, Some(0.3)),
                cell(70.0, Some(1.0)),
                cell(80.0, Some(2.0)),
            ],
        }];
        let text = render_csv(&rows);
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(render_csv(&parsed), text);
        assert_eq!(parsed[0].cells[0].unwrap().mean, 55.6);
        assert_eq!(parsed[0].cells[2].unwrap().mean, 0.48);
        assert!(parsed[0].cells[3].is_none());
        assert!(parse_csv("nonsense").is_err());
    }
}
