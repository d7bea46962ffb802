//! Spearman rank correlation and per-factor trend reports.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::metrics::{Metric, Summary};
use crate::scenario::Factor;

pub const SCHEME: &str = "method-by-level-means";

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SpearmanError {
    #[error("inputs have different lengths")]
    LengthMismatch,
    #[error("at least three pairs are needed")]
    TooFew,
    /// One input is constant, so no correlation is defined.
    #[error("one input is constant")]
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    pub p_value: f64,
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    // One rounding of the product keeps perfectly monotone ranks at exactly +-1.
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value of a correlation under the t approximation with
/// `n - 2` degrees of freedom.
pub fn t_test_p_value(rho: f64, n: usize) -> f64 {
    assert!(n >= 3);
    let r2 = rho * rho;
    if r2 >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    // P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2), and df/(df+t^2) = 1 - rho^2.
    beta_reg(df / 2.0, 0.5, 1.0 - r2).clamp(0.0, 1.0)
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<Spearman, SpearmanError> {
    if xs.len() != ys.len() {
        return Err(SpearmanError::LengthMismatch);
    }
    if xs.len() < 3 {
        return Err(SpearmanError::TooFew);
    }
    let rho = pearson(&average_ranks(xs), &average_ranks(ys)).ok_or(SpearmanError::Constant)?;
    Ok(Spearman { rho, p_value: t_test_p_value(rho, xs.len()) })
}

/// Aggregate of one method at one level of a factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub method: String,
    pub level_index: usize,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: String,
    pub level_index: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub factor: Factor,
    pub metric: Metric,
    /// Absent when fewer than three points survive or one side is constant.
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub n: usize,
    pub scheme: String,
    pub insufficient: bool,
    pub undefined: bool,
    pub table: Vec<TableRow>,
}

/// Pools every (method, level) mean of `metric` into one sample with the
/// level index as the ordinal variable. Missing means are dropped.
pub fn correlate_experiment(summaries: &[LevelSummary], factor: Factor, metric: Metric) -> CorrelationReport {
    let mut table: Vec<TableRow> = summaries
        .iter()
        .filter_map(|s| {
            s.summary.metric(metric).map(|st| TableRow {
                method: s.method.clone(),
                level_index: s.level_index,
                mean: st.mean,
                std: st.std,
            })
        })
        .collect();
    table.sort_by(|a, b| a.method.cmp(&b.method).then(a.level_index.cmp(&b.level_index)));
    let xs: Vec<f64> = table.iter().map(|r| r.level_index as f64).collect();
    let ys: Vec<f64> = table.iter().map(|r| r.mean).collect();
    let res = spearman(&xs, &ys);
    CorrelationReport {
        factor,
        metric,
        rho: res.ok().map(|s| s.rho),
        p_value: res.ok().map(|s| s.p_value),
        n: table.len(),
        scheme: SCHEME.to_string(),
        insufficient: table.len() < 3,
        undefined: res == Err(SpearmanError::Constant),
        table,
    }
}
