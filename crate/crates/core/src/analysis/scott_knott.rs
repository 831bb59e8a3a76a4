//! Scott-Knott clustering of group means followed by an effect-size merge.
//!
//! Groups are ordered by mean, best first. A slice of `k` groups is split at
//! the cut maximizing
//!
//! ```text
//! B0 = k1 (mean1 - g)^2 + k2 (mean2 - g)^2
//! ```
//!
//! over group means (`g` is the mean of the slice's means). The split is kept
//! when `lambda = c * B0 / s0^2` exceeds the chi-squared quantile at `1 - alpha`
//! with `k / d` degrees of freedom, where `c = pi / (2 (pi - 2))`, `d = pi - 2`
//! and
//!
//! ```text
//! s0^2 = (sum (mean_i - g)^2 + nu * s_mean^2) / (k + nu)
//! ```
//!
//! `nu` is the pooled within-group degrees of freedom of all groups and
//! `s_mean^2` the within-group mean square times the mean of `1 / n_i`.
//! Afterwards adjacent clusters whose pooled Cohen's |d| is below the effect
//! threshold are merged, smallest |d| first.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    None,
    Log1p,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScottKnottConfig {
    pub alpha: f64,
    /// Adjacent clusters with |d| below this are merged.
    pub effect_threshold: f64,
    pub lambda_factor: f64,
    pub df_divisor: f64,
    pub transform: Transform,
}

impl Default for ScottKnottConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            effect_threshold: 0.2,
            lambda_factor: PI / (2.0 * (PI - 2.0)),
            df_divisor: PI - 2.0,
            transform: Transform::None,
        }
    }
}

impl ScottKnottConfig {
    fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |m: &str| Err(AnalysisError::InvalidConfig(m.into()));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.effect_threshold >= 0.0) {
            return bad("effect threshold must be nonnegative");
        }
        if !(self.lambda_factor > 0.0 && self.df_divisor > 0.0) {
            return bad("lambda factor and df divisor must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankAssignment {
    /// 1 is best.
    pub ranks: BTreeMap<String, usize>,
    /// Group means on the original scale.
    pub means: BTreeMap<String, f64>,
    /// Labels per rank, best first; each ordered by mean.
    pub clusters: Vec<Vec<String>>,
    /// Every observation was identical, so nothing could be separated.
    pub degenerate: bool,
}

struct Group<'a> {
    label: &'a str,
    values: Vec<f64>,
    mean: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Pooled Cohen's |d| between two observation sets.
pub(crate) fn cohens_d(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * sample_var(a) + (nb - 1.0) * sample_var(b)) / (na + nb - 2.0)).sqrt();
    let diff = (mean(a) - mean(b)).abs();
    if pooled == 0.0 {
        return if diff == 0.0 { 0.0 } else { f64::INFINITY };
    }
    diff / pooled
}

struct Splitter<'a> {
    groups: &'a [Group<'a>],
    nu: f64,
    s2_mean: f64,
    cfg: &'a ScottKnottConfig,
}

impl Splitter<'_> {
    /// Clusters of `idx` (indices into `groups`, best first).
    fn split(&self, idx: &[usize], out: &mut Vec<Vec<usize>>) {
        let k = idx.len();
        if k < 2 {
            out.push(idx.to_vec());
            return;
        }
        let means: Vec<f64> = idx.iter().map(|&i| self.groups[i].mean).collect();
        let g = mean(&means);
        let (mut best_cut, mut best_b0) = (0, f64::NEG_INFINITY);
        for cut in 1..k {
            let (l, r) = means.split_at(cut);
            let b0 = l.len() as f64 * (mean(l) - g).powi(2) + r.len() as f64 * (mean(r) - g).powi(2);
            if b0 > best_b0 {
                best_b0 = b0;
                best_cut = cut;
            }
        }
        let spread: f64 = means.iter().map(|m| (m - g).powi(2)).sum();
        let sigma0 = (spread + self.nu * self.s2_mean) / (k as f64 + self.nu);
        let significant = sigma0 > 0.0 && {
            let lambda = self.cfg.lambda_factor * best_b0 / sigma0;
            let chi = ChiSquared::new(k as f64 / self.cfg.df_divisor).expect("positive degrees of freedom");
            lambda > chi.inverse_cdf(1.0 - self.cfg.alpha)
        };
        if significant {
            self.split(&idx[..best_cut], out);
            self.split(&idx[best_cut..], out);
        } else {
            out.push(idx.to_vec());
        }
    }
}

/// Ranks groups of observations; groups need at least two observations each.
pub fn scott_knott_esd(
    groups: &BTreeMap<String, Vec<f64>>,
    cfg: &ScottKnottConfig,
) -> Result<RankAssignment, AnalysisError> {
    cfg.validate()?;
    if groups.is_empty() {
        return Err(AnalysisError::NoGroups);
    }
    if let Some((label, _)) = groups.iter().find(|(_, v)| v.len() < 2) {
        return Err(AnalysisError::TooFewObservations(label.clone()));
    }
    let means: BTreeMap<String, f64> = groups.iter().map(|(k, v)| (k.clone(), mean(v))).collect();

    let mut gs: Vec<Group> = groups
        .iter()
        .map(|(label, v)| {
            let values: Vec<f64> = match cfg.transform {
                Transform::None => v.clone(),
                Transform::Log1p => v.iter().map(|x| x.ln_1p()).collect(),
            };
            Group {
                label,
                mean: mean(&values),
                values,
            }
        })
        .collect();
    gs.sort_by(|a, b| b.mean.total_cmp(&a.mean).then(a.label.cmp(b.label)));

    let first = gs[0].values[0];
    let degenerate = gs.iter().all(|g| g.values.iter().all(|&x| x == first));
    let mut clusters: Vec<Vec<usize>> = if degenerate {
        vec![(0..gs.len()).collect()]
    } else {
        let nu: f64 = gs.iter().map(|g| (g.values.len() - 1) as f64).sum();
        let sse: f64 = gs
            .iter()
            .map(|g| g.values.iter().map(|x| (x - g.mean).powi(2)).sum::<f64>())
            .sum();
        let inv_n = gs.iter().map(|g| 1.0 / g.values.len() as f64).sum::<f64>() / gs.len() as f64;
        let splitter = Splitter {
            groups: &gs,
            nu,
            s2_mean: sse / nu * inv_n,
            cfg,
        };
        let mut out = Vec::new();
        let all: Vec<usize> = (0..gs.len()).collect();
        splitter.split(&all, &mut out);
        out
    };

    // Effect-size merge of adjacent clusters.
    let pooled = |c: &[usize]| -> Vec<f64> { c.iter().flat_map(|&i| gs[i].values.iter().copied()).collect() };
    loop {
        let weakest = (0..clusters.len().saturating_sub(1))
            .map(|i| (i, cohens_d(&pooled(&clusters[i]), &pooled(&clusters[i + 1]))))
            .filter(|&(_, d)| d < cfg.effect_threshold)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((i, _)) = weakest else { break };
        let next = clusters.remove(i + 1);
        clusters[i].extend(next);
    }

    let mut ranks = BTreeMap::new();
    let mut labelled = Vec::with_capacity(clusters.len());
    for (r, c) in clusters.iter().enumerate() {
        let labels: Vec<String> = c.iter().map(|&i| gs[i].label.to_string()).collect();
        for l in &labels {
            ranks.insert(l.clone(), r + 1);
        }
        labelled.push(labels);
    }
    Ok(RankAssignment {
        ranks,
        means,
        clusters: labelled,
        degenerate,
    })
}
