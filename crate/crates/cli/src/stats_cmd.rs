//! `metatutor stats`: fixed-field text reports for the group comparisons.
//!
//! Group files hold either raw observations (one number per line) or a single
//! summary line `mean sd n`. Contingency tables are one row of counts per line.
//! NLG files hold `pre post` or `pre post max` per line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use metatutor_core::stats::{
    bonferroni, chi_square_independence, nlg, one_way_anova, one_way_anova_summaries, t_test_ind,
    t_test_samples, welch_t_test, Summary, TTestResult,
};

use crate::error::CliError;
use crate::files::{data_lines, fields, parse_f64, read_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Test {
    Ttest,
    Anova,
    Chi2,
    Nlg,
    /// Per-comparison alpha; needs --alpha and --comparisons, no input files.
    Bonferroni,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, value_enum)]
    test: Test,
    #[arg(long = "in", num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// Unequal-variance t-test (the default pools the variances).
    #[arg(long)]
    welch: bool,
    /// Maximum score for NLG rows that do not give one.
    #[arg(long, default_value_t = 1.0)]
    max_score: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    comparisons: Option<usize>,
}

enum Group {
    Raw(Vec<f64>),
    Summary(Summary),
}

impl Group {
    fn summary(&self) -> Result<Summary, CliError> {
        match self {
            Group::Raw(v) => Ok(Summary::of(v)?),
            Group::Summary(s) => Ok(*s),
        }
    }
}

fn read_group(path: &Path) -> Result<Group, CliError> {
    let text = read_text(path)?;
    let lines: Vec<(usize, &str)> = data_lines(&text).collect();
    if let [(i, line)] = lines[..] {
        let f: Vec<&str> = fields(line).collect();
        if f.len() == 3 {
            let mean = parse_f64(path, i, f[0])?;
            let sd = parse_f64(path, i, f[1])?;
            let n = f[2].parse::<usize>().map_err(|_| {
                CliError::Invalid(format!("{}:{i}: n must be a whole number", path.display()))
            })?;
            if sd < 0.0 {
                return Err(CliError::Invalid(format!(
                    "{}:{i}: sd must be >= 0",
                    path.display()
                )));
            }
            return Ok(Group::Summary(Summary::new(mean, sd, n)));
        }
    }
    let mut values = Vec::with_capacity(lines.len());
    for (i, line) in lines {
        let f: Vec<&str> = fields(line).collect();
        if f.len() != 1 {
            return Err(CliError::Invalid(format!(
                "{}:{i}: expected one value per line, or a single `mean sd n` line",
                path.display()
            )));
        }
        values.push(parse_f64(path, i, f[0])?);
    }
    Ok(Group::Raw(values))
}

fn read_table(path: &Path) -> Result<Vec<Vec<u64>>, CliError> {
    let text = read_text(path)?;
    data_lines(&text)
        .map(|(i, line)| {
            fields(line)
                .map(|f| {
                    f.parse::<u64>().map_err(|_| {
                        CliError::Invalid(format!(
                            "{}:{i}: {f:?} is not a non-negative count",
                            path.display()
                        ))
                    })
                })
                .collect()
        })
        .collect()
}

fn need_inputs(a: &StatsArgs, min: usize, max: Option<usize>) -> Result<(), CliError> {
    let n = a.inputs.len();
    let ok = n >= min && max.is_none_or(|m| n <= m);
    if ok {
        return Ok(());
    }
    let wanted = match max {
        Some(m) if m == min => format!("exactly {min}"),
        Some(m) => format!("{min} to {m}"),
        None => format!("at least {min}"),
    };
    Err(CliError::Invalid(format!(
        "--test {} takes {wanted} input file(s), got {n}",
        a.test
            .to_possible_value()
            .expect("no skipped variants")
            .get_name()
    )))
}

fn field(out: &mut String, key: &str, value: impl std::fmt::Display) {
    writeln!(out, "{key:<9}{value}").expect("string write");
}

fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x:.0}")
    } else {
        format!("{x:.6}")
    }
}

fn ttest(a: &StatsArgs) -> Result<String, CliError> {
    need_inputs(a, 2, Some(2))?;
    let g1 = read_group(&a.inputs[0])?;
    let g2 = read_group(&a.inputs[1])?;
    let r: TTestResult = match (&g1, &g2, a.welch) {
        (Group::Raw(x), Group::Raw(y), false) => t_test_samples(x, y)?,
        (_, _, false) => t_test_ind(&g1.summary()?, &g2.summary()?)?,
        (_, _, true) => welch_t_test(&g1.summary()?, &g2.summary()?)?,
    };
    let mut out = String::new();
    field(
        &mut out,
        "test",
        if a.welch {
            "ttest-welch"
        } else {
            "ttest-pooled"
        },
    );
    field(&mut out, "t", num(r.t));
    field(&mut out, "df", num(r.df));
    field(&mut out, "p", num(r.p));
    field(&mut out, "d", num(r.d));
    if r.infinite_t {
        field(&mut out, "note", "zero pooled variance with unequal means");
    }
    if let Some(m) = a.comparisons {
        let alpha = bonferroni(a.alpha, m)?;
        field(&mut out, "alpha", num(alpha));
        field(&mut out, "signif", if r.p < alpha { "yes" } else { "no" });
    }
    Ok(out)
}

fn anova(a: &StatsArgs) -> Result<String, CliError> {
    need_inputs(a, 2, None)?;
    let groups = a
        .inputs
        .iter()
        .map(|p| read_group(p))
        .collect::<Result<Vec<_>, _>>()?;
    let r = if groups.iter().all(|g| matches!(g, Group::Raw(_))) {
        let raw: Vec<&[f64]> = groups
            .iter()
            .map(|g| match g {
                Group::Raw(v) => v.as_slice(),
                Group::Summary(_) => unreachable!(),
            })
            .collect();
        one_way_anova(&raw)?
    } else {
        let s = groups
            .iter()
            .map(Group::summary)
            .collect::<Result<Vec<_>, _>>()?;
        one_way_anova_summaries(&s)?
    };
    let mut out = String::new();
    field(&mut out, "test", "anova");
    field(&mut out, "F", num(r.f));
    field(&mut out, "df", format!("{}, {}", r.df_between, r.df_within));
    field(&mut out, "p", num(r.p));
    Ok(out)
}

fn chi2(a: &StatsArgs) -> Result<String, CliError> {
    need_inputs(a, 1, Some(1))?;
    let r = chi_square_independence(&read_table(&a.inputs[0])?)?;
    let mut out = String::new();
    field(&mut out, "test", "chi2");
    field(&mut out, "chi2", num(r.chi2));
    field(&mut out, "df", r.df);
    field(&mut out, "n", num(r.n));
    field(&mut out, "p", num(r.p));
    Ok(out)
}

fn nlg_rows(a: &StatsArgs) -> Result<String, CliError> {
    need_inputs(a, 1, None)?;
    let mut out = String::new();
    field(&mut out, "test", "nlg");
    for path in &a.inputs {
        let text = read_text(path)?;
        for (i, line) in data_lines(&text) {
            let f = fields(line)
                .map(|x| parse_f64(path, i, x))
                .collect::<Result<Vec<_>, _>>()?;
            let (pre, post, max) = match f[..] {
                [pre, post] => (pre, post, a.max_score),
                [pre, post, max] => (pre, post, max),
                _ => {
                    return Err(CliError::Invalid(format!(
                        "{}:{i}: expected `pre post` or `pre post max`",
                        path.display()
                    )))
                }
            };
            let g = nlg(pre, post, max)
                .map_err(|e| CliError::in_file(path, format!("line {i}: {e}")))?;
            field(&mut out, "nlg", num(g));
        }
    }
    Ok(out)
}

fn bonferroni_only(a: &StatsArgs) -> Result<String, CliError> {
    need_inputs(a, 0, Some(0))?;
    let m = a
        .comparisons
        .ok_or_else(|| CliError::Invalid("--test bonferroni needs --comparisons".into()))?;
    let mut out = String::new();
    field(&mut out, "test", "bonferroni");
    field(&mut out, "alpha", num(bonferroni(a.alpha, m)?));
    Ok(out)
}

pub fn run(a: &StatsArgs) -> Result<(), CliError> {
    let out = match a.test {
        Test::Ttest => ttest(a)?,
        Test::Anova => anova(a)?,
        Test::Chi2 => chi2(a)?,
        Test::Nlg => nlg_rows(a)?,
        Test::Bonferroni => bonferroni_only(a)?,
    };
    print!("{out}");
    Ok(())
}
