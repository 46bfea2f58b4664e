//! CRB-driven BFI feature selection.
//!
//! For every position of a region of interest the best-scoring element is
//! recorded (`η`). The greedy selector then repeatedly takes the element
//! that is best at the most remaining positions and drops those positions.
//! An exhaustive search over subsets is provided as a reference.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{BasePose, Scenario};
use crate::crb::{element_scores, CrbConfig, ParamKind, PositionParams};
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, seeded_rng, RealMatrix};

/// How scores are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Scores are information (`χ`); larger is better.
    #[default]
    Information,
    /// Scores are treated as bounds; the smallest wins.
    LiteralMin,
}

/// Sensing target, which fixes the position parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `(x, y)`.
    #[default]
    Location,
    Aod,
    Aoa,
    Distance,
}

/// Region of interest: UD positions `(x, y)` in meters around the AP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiGrid {
    pub points: Vec<[f64; 2]>,
    #[serde(default)]
    pub target: Target,
}

impl RoiGrid {
    pub fn from_points(points: Vec<[f64; 2]>, target: Target) -> Result<Self> {
        let roi = Self { points, target };
        roi.validate()?;
        Ok(roi)
    }

    /// `count` points uniform (in area) over the annulus `r_min..r_max`,
    /// full angle.
    pub fn annulus(count: usize, r_min: f64, r_max: f64, target: Target, seed: u64) -> Result<Self> {
        if !(r_min > 0.0 && r_max >= r_min && r_max.is_finite()) {
            return Err(Error::invalid("annulus radii must satisfy 0 < r_min <= r_max"));
        }
        let mut rng = seeded_rng(seed);
        let points = (0..count)
            .map(|_| {
                let u: f64 = rng.random();
                let r = (r_min * r_min + u * (r_max * r_max - r_min * r_min)).sqrt();
                let a = rng.random_range(0.0..2.0 * PI);
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        Self::from_points(points, target)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::invalid("region of interest is empty"));
        }
        for p in &self.points {
            if !(p[0].is_finite() && p[1].is_finite()) || p[0].hypot(p[1]) == 0.0 {
                return Err(Error::invalid(format!("invalid ROI point {p:?}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Scenario anchored at point `r` and the parameter vector to sense there.
    pub fn problem(&self, scenario: &Scenario, r: usize) -> Result<(Scenario, PositionParams)> {
        let [x, y] = self.points[r];
        let base = BasePose::at_point(x, y)?;
        let params = match self.target {
            Target::Location => PositionParams::cartesian(x, y),
            Target::Aod => PositionParams::single(ParamKind::Aod, base.aod),
            Target::Aoa => PositionParams::single(ParamKind::Aoa, base.aoa),
            Target::Distance => PositionParams::single(ParamKind::Distance, base.distance),
        };
        Ok((scenario.clone().with_base(base), params))
    }
}

/// `R × N_BFI` score table on subcarrier `k`, computed in parallel. Position
/// `r` uses Monte-Carlo seed `derive_seed(cfg.seed, r)`, so the table does
/// not depend on the number of worker threads.
pub fn score_map(roi: &RoiGrid, scenario: &Scenario, k: usize, cfg: &CrbConfig) -> Result<RealMatrix> {
    roi.validate()?;
    scenario.validate()?;
    let rows: Vec<Vec<f64>> = (0..roi.len())
        .into_par_iter()
        .map(|r| {
            let (s, x) = roi.problem(scenario, r)?;
            let cfg = CrbConfig {
                seed: derive_seed(cfg.seed, r as u64),
                ..*cfg
            };
            element_scores(&x, &s, k, &cfg)
        })
        .collect::<Result<_>>()?;
    Ok(RealMatrix::from_rows(&rows))
}

/// `η_r`: index of the best element at each position (lowest index on ties).
pub fn best_element_map(scores: &RealMatrix, mode: SelectionMode) -> Result<Vec<usize>> {
    if scores.cols() == 0 {
        return Err(Error::invalid("score table has no elements"));
    }
    (0..scores.rows())
        .map(|r| {
            let row = scores.row(r);
            if row.iter().any(|v| v.is_nan()) {
                return Err(Error::invalid(format!("score table row {r} contains NaN")));
            }
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                let better = match mode {
                    SelectionMode::Information => v > row[best],
                    SelectionMode::LiteralMin => v < row[best],
                };
                if better {
                    best = j;
                }
            }
            Ok(best)
        })
        .collect()
}

/// Greedy selection of `n_sel` out of `n_bfi` elements from `η`. Once no
/// remaining position votes for an unselected element, the rest is filled
/// in ascending index order.
pub fn greedy_select(eta: &[usize], n_bfi: usize, n_sel: usize) -> Result<Vec<usize>> {
    if n_sel == 0 || n_sel > n_bfi {
        return Err(Error::invalid(format!("n_sel must be in 1..={n_bfi}, got {n_sel}")));
    }
    if let Some(&bad) = eta.iter().find(|&&e| e >= n_bfi) {
        return Err(Error::invalid(format!("eta entry {bad} out of range for {n_bfi} elements")));
    }
    let mut remaining: Vec<usize> = eta.to_vec();
    let mut chosen = Vec::with_capacity(n_sel);
    let mut taken = vec![false; n_bfi];
    while chosen.len() < n_sel {
        let mut counts = vec![0usize; n_bfi];
        for &e in &remaining {
            counts[e] += 1;
        }
        let mut best: Option<usize> = None;
        for j in 0..n_bfi {
            if !taken[j] && counts[j] > 0 && best.map_or(true, |b| counts[j] > counts[b]) {
                best = Some(j);
            }
        }
        let pick = match best {
            Some(b) => b,
            None => (0..n_bfi).find(|&j| !taken[j]).expect("n_sel <= n_bfi"),
        };
        taken[pick] = true;
        chosen.push(pick);
        remaining.retain(|&e| e != pick);
    }
    Ok(chosen)
}

/// Number of positions whose best element is in `subset`.
pub fn coverage(eta: &[usize], subset: &[usize]) -> usize {
    eta.iter().filter(|e| subset.contains(e)).count()
}

/// Per-element vote counts over `η`.
pub fn vote_counts(eta: &[usize], n_bfi: usize) -> Vec<usize> {
    let mut counts = vec![0; n_bfi];
    for &e in eta {
        if e < n_bfi {
            counts[e] += 1;
        }
    }
    counts
}

/// Largest number of subsets the exhaustive search will enumerate.
pub const BRUTE_FORCE_BUDGET: u128 = 1_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn check_subset_size(n_bfi: usize, n_sel: usize) -> Result<()> {
    if n_sel == 0 || n_sel > n_bfi {
        return Err(Error::invalid(format!("n_sel must be in 1..={n_bfi}, got {n_sel}")));
    }
    let count = binomial(n_bfi, n_sel);
    if count > BRUTE_FORCE_BUDGET {
        return Err(Error::Budget(count, BRUTE_FORCE_BUDGET));
    }
    Ok(())
}

/// Subset minimizing `Σ_r min_{j∈B} crb_{r,j}`; the first subset in
/// lexicographic order wins ties. In information mode `crb = 1/χ`
/// (`χ = 0` counts as an infinite bound); in literal mode the scores are
/// used as bounds directly.
pub fn brute_force_select(scores: &RealMatrix, n_sel: usize, mode: SelectionMode) -> Result<Vec<usize>> {
    check_subset_size(scores.cols(), n_sel)?;
    let bound = |v: f64| match mode {
        SelectionMode::Information => {
            if v > 0.0 {
                1.0 / v
            } else {
                f64::INFINITY
            }
        }
        SelectionMode::LiteralMin => v,
    };
    let table: Vec<Vec<f64>> = (0..scores.rows())
        .map(|r| scores.row(r).iter().map(|&v| bound(v)).collect())
        .collect();
    if table.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::invalid("score table contains NaN"));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_subset(scores.cols(), n_sel, |subset| {
        let total: f64 = table
            .iter()
            .map(|row| subset.iter().map(|&j| row[j]).fold(f64::INFINITY, f64::min))
            .sum();
        if best.as_ref().map_or(true, |(b, _)| total < *b) {
            best = Some((total, subset.to_vec()));
        }
    });
    Ok(best.expect("at least one subset").1)
}

/// Subset of size `n_sel` with maximum [`coverage`] (lexicographic
/// tie-break).
pub fn brute_force_coverage(eta: &[usize], n_bfi: usize, n_sel: usize) -> Result<Vec<usize>> {
    check_subset_size(n_bfi, n_sel)?;
    let counts = vote_counts(eta, n_bfi);
    let mut best: Option<(usize, Vec<usize>)> = None;
    for_each_subset(n_bfi, n_sel, |subset| {
        let c: usize = subset.iter().map(|&j| counts[j]).sum();
        if best.as_ref().map_or(true, |(b, _)| c > *b) {
            best = Some((c, subset.to_vec()));
        }
    });
    Ok(best.expect("at least one subset").1)
}

/// Selection over all subcarriers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionResult {
    pub mode: SelectionMode,
    pub n_sel: usize,
    /// Selected element indices (0-based, canonical order) per subcarrier.
    pub per_subcarrier: Vec<Vec<usize>>,
    /// Vote counts per element, per subcarrier.
    pub coverage: Vec<Vec<usize>>,
    /// Best element per ROI position, per subcarrier.
    pub eta: Vec<Vec<usize>>,
}

/// Runs the score map and greedy selection on every subcarrier of the
/// scenario's grid.
pub fn select_features(
    roi: &RoiGrid,
    scenario: &Scenario,
    cfg: &CrbConfig,
    n_sel: usize,
    mode: SelectionMode,
) -> Result<SelectionResult> {
    let n_sc = scenario.grid.n_subcarriers;
    let mut out = SelectionResult {
        mode,
        n_sel,
        per_subcarrier: Vec::with_capacity(n_sc),
        coverage: Vec::with_capacity(n_sc),
        eta: Vec::with_capacity(n_sc),
    };
    for k in 1..=n_sc {
        let sc_cfg = CrbConfig {
            seed: derive_seed(cfg.seed, 1_000_000 * k as u64),
            ..*cfg
        };
        let scores = score_map(roi, scenario, k, &sc_cfg)?;
        let eta = best_element_map(&scores, mode)?;
        out.per_subcarrier.push(greedy_select(&eta, scores.cols(), n_sel)?);
        out.coverage.push(vote_counts(&eta, scores.cols()));
        out.eta.push(eta);
    }
    Ok(out)
}
