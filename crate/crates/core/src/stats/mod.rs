//! Hypothesis tests, toxicity binning, factor tables and the random-intercept
//! model used for the receptiveness analyses.

mod mixed;

pub use mixed::*;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::strategies::StrategyKind;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("differences have zero variance (mean difference {mean_diff}); t is undefined")]
    ZeroVariance { mean_diff: f64 },
    #[error("toxicity {0} is outside [0, 0.9]")]
    ToxicityOutOfDomain(f64),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("variance ratio optimum not bracketed: {0}")]
    NonConvergence(String),
    #[error("unknown level {0:?}")]
    UnknownLevel(String),
    #[error("invalid model input: {0}")]
    InvalidInput(String),
    #[error("no observations for {0}")]
    EmptyCell(String),
}

/// Two-sided p-value of a standard normal statistic.
pub fn normal_two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

pub const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Paired t-test of `a - b` with `n - 1` degrees of freedom.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::TooFew { needed: 2, got: a.len() });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean_diff = mean(&d);
    let (lo, hi) = d
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    if hi - lo <= 8.0 * f64::EPSILON * scale {
        return Err(StatsError::ZeroVariance { mean_diff });
    }
    let n = d.len();
    let df = (n - 1) as f64;
    let t = mean_diff / (sample_sd(&d) / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    Ok(PairedTTest {
        n,
        mean_diff,
        t,
        p: (2.0 * dist.sf(t.abs())).min(1.0),
        df,
    })
}

/// Half-width of a two-sided 95% t interval for the mean of `xs`.
pub fn t_ci_half_width(xs: &[f64]) -> Result<f64, StatsError> {
    if xs.len() < 2 {
        return Err(StatsError::TooFew { needed: 2, got: xs.len() });
    }
    let df = (xs.len() - 1) as f64;
    let q = StudentsT::new(0.0, 1.0, df).expect("df > 0").inverse_cdf(0.975);
    Ok(q * sample_sd(xs) / (xs.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToxicityBin {
    Low,
    Medium,
    High,
}

impl ToxicityBin {
    pub const ALL: [ToxicityBin; 3] = [ToxicityBin::Low, ToxicityBin::Medium, ToxicityBin::High];

    pub fn as_str(self) -> &'static str {
        match self {
            ToxicityBin::Low => "low",
            ToxicityBin::Medium => "medium",
            ToxicityBin::High => "high",
        }
    }
}

impl fmt::Display for ToxicityBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ToxicityBin {
    type Err = StatsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "low" => Ok(ToxicityBin::Low),
            "medium" | "med" => Ok(ToxicityBin::Medium),
            "high" => Ok(ToxicityBin::High),
            _ => Err(StatsError::UnknownLevel(s.to_string())),
        }
    }
}

/// low `[0, 0.5)`, medium `[0.5, 0.7)`, high `[0.7, 0.9]`.
pub fn toxicity_bin(score: f64) -> Result<ToxicityBin, StatsError> {
    if !(0.0..=0.9).contains(&score) {
        return Err(StatsError::ToxicityOutOfDomain(score));
    }
    Ok(if score < 0.5 {
        ToxicityBin::Low
    } else if score < 0.7 {
        ToxicityBin::Medium
    } else {
        ToxicityBin::High
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRow {
    pub strategy: StrategyKind,
    pub n: usize,
    pub factors: [f64; 4],
    pub average: f64,
}

/// Strategy × factor means; the average row weights each strategy equally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorTable {
    pub rows: Vec<FactorRow>,
    pub average: [f64; 4],
    pub overall: f64,
}

/// Mean coded factor scores for each of the six strategies.
pub fn factor_breakdown(
    scored: &[(StrategyKind, [f64; 4])],
) -> Result<FactorTable, StatsError> {
    let mut cells: BTreeMap<StrategyKind, (usize, [f64; 4])> = BTreeMap::new();
    for (kind, f) in scored.iter().filter(|(k, _)| k.is_strategy()) {
        let cell = cells.entry(*kind).or_insert((0, [0.0; 4]));
        cell.0 += 1;
        for i in 0..4 {
            cell.1[i] += f[i];
        }
    }
    let mut rows = Vec::with_capacity(6);
    for kind in StrategyKind::STRATEGIES {
        let (n, sums) = cells
            .get(&kind)
            .copied()
            .ok_or_else(|| StatsError::EmptyCell(kind.to_string()))?;
        let factors = sums.map(|s| s / n as f64);
        rows.push(FactorRow {
            strategy: kind,
            n,
            factors,
            average: factors.iter().sum::<f64>() / 4.0,
        });
    }
    let mut average = [0.0; 4];
    for (i, a) in average.iter_mut().enumerate() {
        *a = rows.iter().map(|r| r.factors[i]).sum::<f64>() / rows.len() as f64;
    }
    let overall = rows.iter().map(|r| r.average).sum::<f64>() / rows.len() as f64;
    Ok(FactorTable { rows, average, overall })
}
