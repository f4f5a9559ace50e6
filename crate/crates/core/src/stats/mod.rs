//! Learning gains, descriptive statistics and the hypothesis tests used to
//! compare groups: pooled/Welch t-tests with Cohen's d, one-way ANOVA and
//! chi-square tests of independence.
//!
//! Zero-variance inputs follow explicit conventions instead of producing NaN:
//!
//! - t-test, equal means: `t = 0`, `p = 1`, `d = 0`.
//! - t-test, unequal means: `t = ±inf`, `p = 0`, `d = ±inf`, `infinite_t = true`.
//! - ANOVA, all groups equal: `F = 0`, `p = 1`.
//! - ANOVA, no within-group spread but different means: `F = inf`, `p = 0`.

mod special;

pub use special::{
    chi2_sf, f_sf, ln_gamma, reg_inc_beta, reg_inc_gamma_lower, reg_inc_gamma_upper, t_two_tailed_p,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
    #[error("pre-test score equals the maximum score; the learning gain is undefined")]
    NlgAtCeiling,
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("contingency table has a zero row or column total")]
    ZeroMarginal,
    #[error("contingency table must be rectangular with at least 2 rows and 2 columns")]
    TableShape,
}

/// A labelled sample of observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub label: String,
    pub values: Vec<f64>,
}

impl SampleSet {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        SampleSet {
            label: label.into(),
            values,
        }
    }
}

/// Mean, sample standard deviation and size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl Summary {
    pub fn new(mean: f64, sd: f64, n: usize) -> Self {
        Summary { mean, sd, n }
    }

    pub fn of(values: &[f64]) -> Result<Self, StatsError> {
        let d = describe(values)?;
        Ok(Summary {
            mean: d.mean,
            sd: d.sd()?,
            n: d.n,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Description {
    pub mean: f64,
    pub n: usize,
    sd: Option<f64>,
}

impl Description {
    /// Sample standard deviation (n − 1 denominator); needs two values.
    pub fn sd(&self) -> Result<f64, StatsError> {
        self.sd.ok_or(StatsError::TooFewValues {
            needed: 2,
            got: self.n,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// Cohen's d on the pooled standard deviation.
    pub d: f64,
    /// Set when the pooled variance is zero but the means differ.
    pub infinite_t: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub chi2: f64,
    pub df: usize,
    pub p: f64,
    pub n: f64,
}

/// Normalized learning gain `(post - pre) / sqrt(max - pre)`.
pub fn nlg(pre: f64, post: f64, max_score: f64) -> Result<f64, StatsError> {
    if pre == max_score {
        return Err(StatsError::NlgAtCeiling);
    }
    if !(0.0..max_score).contains(&pre) || !(0.0..=max_score).contains(&post) {
        return Err(StatsError::Domain(format!(
            "nlg needs 0 <= pre < max and 0 <= post <= max (pre={pre}, post={post}, max={max_score})"
        )));
    }
    Ok((post - pre) / (max_score - pre).sqrt())
}

pub fn mean(values: &[f64]) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::TooFewValues { needed: 1, got: 0 });
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

pub fn describe(values: &[f64]) -> Result<Description, StatsError> {
    let m = mean(values)?;
    let n = values.len();
    let sd = (n >= 2).then(|| {
        let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    Ok(Description { mean: m, n, sd })
}

pub fn describe_set(s: &SampleSet) -> Result<Description, StatsError> {
    describe(&s.values)
}

fn check_summary(s: &Summary) -> Result<(), StatsError> {
    if s.n < 2 {
        return Err(StatsError::TooFewValues {
            needed: 2,
            got: s.n,
        });
    }
    if !(s.sd >= 0.0) || !s.mean.is_finite() {
        return Err(StatsError::Domain(format!(
            "summary needs a finite mean and sd >= 0 (mean={}, sd={})",
            s.mean, s.sd
        )));
    }
    Ok(())
}

/// Pooled-variance (Student) independent-samples t-test.
pub fn t_test_ind(a: &Summary, b: &Summary) -> Result<TTestResult, StatsError> {
    check_summary(a)?;
    check_summary(b)?;
    let (na, nb) = (a.n as f64, b.n as f64);
    let df = na + nb - 2.0;
    let pooled_var = ((na - 1.0) * a.sd * a.sd + (nb - 1.0) * b.sd * b.sd) / df;
    let diff = a.mean - b.mean;
    if pooled_var == 0.0 {
        return Ok(degenerate_t(diff, df));
    }
    let pooled_sd = pooled_var.sqrt();
    let t = diff / (pooled_sd * (1.0 / na + 1.0 / nb).sqrt());
    Ok(TTestResult {
        t,
        df,
        p: t_two_tailed_p(t, df)?,
        d: diff / pooled_sd,
        infinite_t: false,
    })
}

fn degenerate_t(diff: f64, df: f64) -> TTestResult {
    if diff == 0.0 {
        TTestResult {
            t: 0.0,
            df,
            p: 1.0,
            d: 0.0,
            infinite_t: false,
        }
    } else {
        let inf = f64::INFINITY.copysign(diff);
        TTestResult {
            t: inf,
            df,
            p: 0.0,
            d: inf,
            infinite_t: true,
        }
    }
}

pub fn t_test_samples(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    t_test_ind(&Summary::of(a)?, &Summary::of(b)?)
}

/// Welch's unequal-variance t-test. `d` still uses the pooled SD so effect
/// sizes are comparable with [`t_test_ind`].
pub fn welch_t_test(a: &Summary, b: &Summary) -> Result<TTestResult, StatsError> {
    check_summary(a)?;
    check_summary(b)?;
    let (na, nb) = (a.n as f64, b.n as f64);
    let va = a.sd * a.sd / na;
    let vb = b.sd * b.sd / nb;
    let diff = a.mean - b.mean;
    let pooled_var = ((na - 1.0) * a.sd * a.sd + (nb - 1.0) * b.sd * b.sd) / (na + nb - 2.0);
    if va + vb == 0.0 {
        return Ok(degenerate_t(diff, na + nb - 2.0));
    }
    let t = diff / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TTestResult {
        t,
        df,
        p: t_two_tailed_p(t, df)?,
        d: diff / pooled_var.sqrt(),
        infinite_t: false,
    })
}

/// One-way ANOVA across two or more groups.
pub fn one_way_anova(groups: &[&[f64]]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewValues {
            needed: 2,
            got: groups.len(),
        });
    }
    for g in groups {
        if g.len() < 2 {
            return Err(StatsError::TooFewValues {
                needed: 2,
                got: g.len(),
            });
        }
    }
    let n_total: usize = groups.iter().map(|g| g.len()).sum();
    let grand = groups.iter().flat_map(|g| g.iter()).sum::<f64>() / n_total as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (m - grand) * (m - grand);
        ss_within += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    }
    let df_between = groups.len() - 1;
    let df_within = n_total - groups.len();
    let ms_between = ss_between / df_between as f64;
    let ms_within = ss_within / df_within as f64;
    let (f, p) = if ms_within == 0.0 {
        if ms_between == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = ms_between / ms_within;
        (f, f_sf(f, df_between as f64, df_within as f64)?)
    };
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        p,
    })
}

/// One-way ANOVA from per-group summaries. Agrees with [`one_way_anova`] on
/// the raw data up to rounding.
pub fn one_way_anova_summaries(groups: &[Summary]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewValues {
            needed: 2,
            got: groups.len(),
        });
    }
    for g in groups {
        if g.n < 2 {
            return Err(StatsError::TooFewValues {
                needed: 2,
                got: g.n,
            });
        }
        if !(g.sd >= 0.0) || !g.mean.is_finite() || !g.sd.is_finite() {
            return Err(StatsError::Domain(format!(
                "summary needs a finite mean and sd >= 0 (mean={}, sd={})",
                g.mean, g.sd
            )));
        }
    }
    let n_total: usize = groups.iter().map(|g| g.n).sum();
    let grand = groups.iter().map(|g| g.mean * g.n as f64).sum::<f64>() / n_total as f64;
    let ss_between: f64 = groups
        .iter()
        .map(|g| g.n as f64 * (g.mean - grand) * (g.mean - grand))
        .sum();
    let ss_within: f64 = groups.iter().map(|g| (g.n - 1) as f64 * g.sd * g.sd).sum();
    let df_between = groups.len() - 1;
    let df_within = n_total - groups.len();
    let ms_between = ss_between / df_between as f64;
    let ms_within = ss_within / df_within as f64;
    let (f, p) = if ms_within == 0.0 {
        if ms_between == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = ms_between / ms_within;
        (f, f_sf(f, df_between as f64, df_within as f64)?)
    };
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        p,
    })
}

pub fn one_way_anova_sets(groups: &[SampleSet]) -> Result<AnovaResult, StatsError> {
    let refs: Vec<&[f64]> = groups.iter().map(|g| g.values.as_slice()).collect();
    one_way_anova(&refs)
}

/// Pearson chi-square test of independence on an r×c table of counts.
pub fn chi_square_independence(table: &[Vec<u64>]) -> Result<ChiSquareResult, StatsError> {
    let rows = table.len();
    let cols = table.first().map_or(0, |r| r.len());
    if rows < 2 || cols < 2 || table.iter().any(|r| r.len() != cols) {
        return Err(StatsError::TableShape);
    }
    let row_tot: Vec<f64> = table
        .iter()
        .map(|r| r.iter().map(|&c| c as f64).sum())
        .collect();
    let col_tot: Vec<f64> = (0..cols)
        .map(|j| table.iter().map(|r| r[j] as f64).sum())
        .collect();
    if row_tot.iter().chain(col_tot.iter()).any(|&t| t == 0.0) {
        return Err(StatsError::ZeroMarginal);
    }
    let n: f64 = row_tot.iter().sum();
    let mut chi2 = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let expected = row_tot[i] * col_tot[j] / n;
            let diff = obs as f64 - expected;
            chi2 += diff * diff / expected;
        }
    }
    let df = (rows - 1) * (cols - 1);
    Ok(ChiSquareResult {
        chi2,
        df,
        p: chi2_sf(chi2, df as f64)?,
        n,
    })
}

/// Per-comparison significance level for `m` comparisons.
pub fn bonferroni(alpha: f64, m: usize) -> Result<f64, StatsError> {
    if !(alpha > 0.0 && alpha <= 1.0) || m == 0 {
        return Err(StatsError::Domain(format!(
            "bonferroni needs 0 < alpha <= 1 and m >= 1 (alpha={alpha}, m={m})"
        )));
    }
    Ok(alpha / m as f64)
}
