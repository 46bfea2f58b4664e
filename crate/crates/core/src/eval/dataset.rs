//! Noisy-BFI datasets over a region of interest and positioning metrics.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::{MlpSpec, Positioner};
use crate::bfi::{bfi_element_count, canonical_labels, csi_to_bfi};
use crate::channel::{add_noise, Scenario};
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, seeded_rng};
use crate::select::RoiGrid;
use rand::seq::SliceRandom;

/// How BFI angles become network inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureEncoding {
    /// One input per element, the angle itself.
    #[default]
    Raw,
    /// Two inputs per element, `sin` and `cos` of the angle.
    SinCos,
}

/// Which elements are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    All,
    /// Element indices per subcarrier (as produced by the selector).
    Selected(Vec<Vec<usize>>),
}

/// One feature column: subcarrier (1-based) and element index (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureKey {
    pub k: usize,
    pub element: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub samples_per_position: usize,
    pub encoding: FeatureEncoding,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            samples_per_position: 10,
            encoding: FeatureEncoding::Raw,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub positions: Vec<[f64; 2]>,
    /// ROI index of each sample.
    pub position_index: Vec<usize>,
    pub feature_map: Vec<FeatureKey>,
    pub encoding: FeatureEncoding,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Column names, e.g. `k1_phi_11` (or `k1_phi_11_sin`, `k1_phi_11_cos`).
    pub fn column_names(&self, n_rx: usize, m_tx: usize) -> Vec<String> {
        let labels = canonical_labels(n_rx, m_tx);
        let mut out = Vec::new();
        for key in &self.feature_map {
            let base = format!("k{}_{}", key.k, labels[key.element]);
            match self.encoding {
                FeatureEncoding::Raw => out.push(base),
                FeatureEncoding::SinCos => {
                    out.push(format!("{base}_sin"));
                    out.push(format!("{base}_cos"));
                }
            }
        }
        out
    }

    fn subset(&self, keep: &HashSet<usize>) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep.contains(&self.position_index[i])).collect();
        Self {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            positions: idx.iter().map(|&i| self.positions[i]).collect(),
            position_index: idx.iter().map(|&i| self.position_index[i]).collect(),
            feature_map: self.feature_map.clone(),
            encoding: self.encoding,
            seed: self.seed,
        }
    }

    /// Split by ROI position (never by sample): a seeded `train_fraction` of
    /// the positions goes to the training set.
    pub fn split_by_position(&self, train_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(0.0 < train_fraction && train_fraction < 1.0) {
            return Err(Error::invalid("train fraction must be in (0, 1)"));
        }
        let mut ids: Vec<usize> = self.position_index.clone();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() < 2 {
            return Err(Error::invalid("need at least two positions to split"));
        }
        ids.shuffle(&mut seeded_rng(seed));
        let n_train = ((ids.len() as f64 * train_fraction).round() as usize).clamp(1, ids.len() - 1);
        let train: HashSet<usize> = ids[..n_train].iter().copied().collect();
        let test: HashSet<usize> = ids[n_train..].iter().copied().collect();
        Ok((self.subset(&train), self.subset(&test)))
    }
}

fn feature_keys(scenario: &Scenario, set: &FeatureSet) -> Result<Vec<FeatureKey>> {
    let n_sc = scenario.grid.n_subcarriers;
    let n_bfi = bfi_element_count(scenario.geometry.n_rx, scenario.geometry.n_tx);
    match set {
        FeatureSet::All => Ok((1..=n_sc)
            .flat_map(|k| (0..n_bfi).map(move |element| FeatureKey { k, element }))
            .collect()),
        FeatureSet::Selected(per_sc) => {
            if per_sc.len() != n_sc {
                return Err(Error::invalid(format!(
                    "selection has {} subcarriers, scenario has {n_sc}",
                    per_sc.len()
                )));
            }
            let mut keys = Vec::new();
            for (i, sel) in per_sc.iter().enumerate() {
                let mut sorted = sel.clone();
                sorted.sort_unstable();
                if sorted.windows(2).any(|w| w[0] == w[1]) || sorted.last().is_some_and(|&e| e >= n_bfi) {
                    return Err(Error::invalid(format!("invalid selection on subcarrier {}", i + 1)));
                }
                keys.extend(sorted.into_iter().map(|element| FeatureKey { k: i + 1, element }));
            }
            if keys.is_empty() {
                return Err(Error::invalid("selection is empty"));
            }
            Ok(keys)
        }
    }
}

/// Draws `samples_per_position` noisy CSI realizations at every ROI point,
/// converts them to BFI and keeps the requested elements in canonical
/// order. Position `r` uses seed `derive_seed(cfg.seed, r)`.
pub fn gen_dataset(roi: &RoiGrid, scenario: &Scenario, set: &FeatureSet, cfg: &DatasetConfig) -> Result<Dataset> {
    roi.validate()?;
    scenario.validate()?;
    if cfg.samples_per_position == 0 {
        return Err(Error::invalid("samples_per_position must be positive"));
    }
    let keys = feature_keys(scenario, set)?;
    let n_sc = scenario.grid.n_subcarriers;
    let per_position: Vec<Vec<Vec<f64>>> = (0..roi.len())
        .into_par_iter()
        .map(|r| {
            let (s, x) = roi.problem(scenario, r)?;
            let means = (1..=n_sc).map(|k| s.mean_csi(&x, k)).collect::<Result<Vec<_>>>()?;
            let vars = means.iter().map(|h| s.noise_variance(h)).collect::<Result<Vec<_>>>()?;
            let mut rng = seeded_rng(derive_seed(cfg.seed, r as u64));
            (0..cfg.samples_per_position)
                .map(|_| {
                    let mut values = Vec::with_capacity(n_sc);
                    for (h, &v) in means.iter().zip(&vars) {
                        values.push(csi_to_bfi(&add_noise(h, v, &mut rng)?)?.values());
                    }
                    let mut f = Vec::with_capacity(keys.len() * 2);
                    for key in &keys {
                        let a = values[key.k - 1][key.element];
                        match cfg.encoding {
                            FeatureEncoding::Raw => f.push(a),
                            FeatureEncoding::SinCos => {
                                f.push(a.sin());
                                f.push(a.cos());
                            }
                        }
                    }
                    Ok(f)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut ds = Dataset {
        features: Vec::new(),
        positions: Vec::new(),
        position_index: Vec::new(),
        feature_map: keys,
        encoding: cfg.encoding,
        seed: cfg.seed,
    };
    for (r, samples) in per_position.into_iter().enumerate() {
        for f in samples {
            ds.features.push(f);
            ds.positions.push(roi.points[r]);
            ds.position_index.push(r);
        }
    }
    Ok(ds)
}

/// Summary of Euclidean positioning errors, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorQuantiles {
    pub p10: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub p90: f64,
    pub mean: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn error_quantiles(errors: &[f64]) -> Result<ErrorQuantiles> {
    if errors.is_empty() || errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid("errors must be nonempty and finite"));
    }
    let mut s = errors.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(ErrorQuantiles {
        p10: quantile(&s, 0.1),
        q1: quantile(&s, 0.25),
        median: quantile(&s, 0.5),
        q3: quantile(&s, 0.75),
        p90: quantile(&s, 0.9),
        mean: s.iter().sum::<f64>() / s.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionerReport {
    pub quantiles: ErrorQuantiles,
    /// Per test sample, in test-set order.
    pub errors: Vec<f64>,
}

/// Trains on `train` and reports Euclidean errors on `test`.
pub fn train_eval_positioner(train: &Dataset, test: &Dataset, spec: &MlpSpec) -> Result<PositionerReport> {
    if train.feature_map != test.feature_map || train.encoding != test.encoding {
        return Err(Error::invalid("train and test feature maps differ"));
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("train and test sets must be nonempty"));
    }
    let train_ids: HashSet<usize> = train.position_index.iter().copied().collect();
    if test.position_index.iter().any(|i| train_ids.contains(i)) {
        return Err(Error::invalid("train and test share positions"));
    }
    let model = Positioner::train(&train.features, &train.positions, spec)?;
    let errors: Vec<f64> = test
        .features
        .iter()
        .zip(&test.positions)
        .map(|(f, p)| {
            let y = model.predict(f);
            (y[0] - p[0]).hypot(y[1] - p[1])
        })
        .collect();
    Ok(PositionerReport {
        quantiles: error_quantiles(&errors)?,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::select::Target;
    use rand::Rng;

    fn small_roi(n: usize) -> RoiGrid {
        RoiGrid::annulus(n, 5.0, 10.0, Target::Location, 1).unwrap()
    }

    #[test]
    fn feature_lengths() {
        let s = Scenario::default_multipath(2, 4).unwrap();
        let cfg = DatasetConfig { samples_per_position: 2, ..Default::default() };
        let all = gen_dataset(&small_roi(3), &s, &FeatureSet::All, &cfg).unwrap();
        assert_eq!(all.features[0].len(), 10);
        assert_eq!(all.len(), 6);
        let mut s4 = s.clone();
        s4.grid.n_subcarriers = 4;
        let sel = FeatureSet::Selected(vec![vec![0, 1, 2, 3, 4]; 4]);
        let ds = gen_dataset(&small_roi(3), &s4, &sel, &cfg).unwrap();
        assert_eq!(ds.features[0].len(), 20);
        assert_eq!(ds.column_names(2, 4)[0], "k1_phi_11");
    }

    #[test]
    fn seeds_change_noise_not_positions() {
        let s = Scenario::default_multipath(2, 4).unwrap();
        let a = gen_dataset(&small_roi(4), &s, &FeatureSet::All, &DatasetConfig::default()).unwrap();
        let b_cfg = DatasetConfig { seed: 9, ..Default::default() };
        let b = gen_dataset(&small_roi(4), &s, &FeatureSet::All, &b_cfg).unwrap();
        assert_eq!(a.positions, b.positions);
        assert_ne!(a.features, b.features);
        let again = gen_dataset(&small_roi(4), &s, &FeatureSet::All, &DatasetConfig::default()).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn invalid_selection() {
        let s = Scenario::default_multipath(2, 4).unwrap();
        let cfg = DatasetConfig::default();
        for bad in [vec![vec![10]], vec![vec![1, 1]], vec![vec![0], vec![1]]] {
            assert!(gen_dataset(&small_roi(2), &s, &FeatureSet::Selected(bad), &cfg).is_err());
        }
    }

    #[test]
    fn split_is_by_position() {
        let s = Scenario::default_multipath(2, 4).unwrap();
        let cfg = DatasetConfig { samples_per_position: 3, ..Default::default() };
        let ds = gen_dataset(&small_roi(20), &s, &FeatureSet::All, &cfg).unwrap();
        let (tr, te) = ds.split_by_position(0.8, 4).unwrap();
        assert_eq!(tr.len(), 48);
        assert_eq!(te.len(), 12);
        let tr_ids: HashSet<usize> = tr.position_index.iter().copied().collect();
        assert!(te.position_index.iter().all(|i| !tr_ids.contains(i)));
        assert!(train_eval_positioner(&tr, &tr, &MlpSpec::default()).is_err());
    }

    #[test]
    fn quantiles_by_hand() {
        let q = error_quantiles(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!(q.median, 3.0);
        assert_eq!(q.q1, 2.0);
        assert_eq!(q.q3, 4.0);
        assert!((q.p10 - 1.4).abs() < 1e-12);
        assert_eq!(q.mean, 3.0);
    }

    fn synthetic(n: usize, seed: u64, shuffle: bool) -> Dataset {
        // Features are an invertible linear map of the position.
        let mut rng = seeded_rng(seed);
        let mut positions = Vec::new();
        let mut features = Vec::new();
        for _ in 0..n {
            let p = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
            features.push(vec![p[0] + 0.5 * p[1], p[1] - 0.3 * p[0], 2.0 * p[0]]);
            positions.push(p);
        }
        if shuffle {
            positions.shuffle(&mut rng);
        }
        Dataset {
            features,
            positions,
            position_index: (0..n).collect(),
            feature_map: (0..3).map(|element| FeatureKey { k: 1, element }).collect(),
            encoding: FeatureEncoding::Raw,
            seed,
        }
    }

    #[test]
    fn learns_linear_map() {
        let ds = synthetic(4000, 1, false);
        let (tr, te) = ds.split_by_position(0.8, 0).unwrap();
        let r = train_eval_positioner(&tr, &te, &MlpSpec::default()).unwrap();
        assert!(r.quantiles.median < 0.1, "{:?}", r.quantiles);
    }

    #[test]
    fn shuffled_labels_match_centroid_baseline() {
        let ds = synthetic(1000, 2, true);
        let (tr, te) = ds.split_by_position(0.8, 0).unwrap();
        let spec = MlpSpec { epochs: 50, ..Default::default() };
        let r = train_eval_positioner(&tr, &te, &spec).unwrap();
        let n = tr.len() as f64;
        let c = tr.positions.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0] / n, a[1] + p[1] / n]);
        let base: Vec<f64> = te.positions.iter().map(|p| (p[0] - c[0]).hypot(p[1] - c[1])).collect();
        let base = error_quantiles(&base).unwrap().median;
        let ratio = r.quantiles.median / base;
        assert!((0.75..=1.25).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn deterministic_training() {
        let ds = synthetic(200, 3, false);
        let (tr, te) = ds.split_by_position(0.8, 0).unwrap();
        let spec = MlpSpec { epochs: 5, ..Default::default() };
        assert_eq!(
            train_eval_positioner(&tr, &te, &spec).unwrap(),
            train_eval_positioner(&tr, &te, &spec).unwrap()
        );
    }
}
