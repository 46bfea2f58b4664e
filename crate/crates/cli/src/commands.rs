//! Command implementations. Each returns the list of files it wrote.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use bfisense::bfi::{csi_to_bfi, dequantize, givens_reconstruct, quantize as quantize_bfi, Bfi, QuantizedBfi};
use bfisense::channel::{add_noise, CsiRecord};
use bfisense::crb::{nl_crb, periodic_diff, position_crb, CrbConfig, ParamKind, PositionParams};
use bfisense::eval::{
    gen_dataset, ks_gaussian_pvalue, mc_estimator_variance, train_eval_positioner, Dataset, FeatureSet,
};
use bfisense::numerics::{derive_seed, seeded_rng};
use bfisense::select::{select_features, Target};
use bfisense::{ComplexMatrix, Scenario};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::config::{FeatureChoice, RunConfig};
use crate::{CliError, SimulateArgs};

pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn new(dir: PathBuf) -> Self {
        Self { dir }
    }

    fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<String, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(name.to_owned())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<String, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    fn write_csv(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    /// Run manifest; the only output carrying a timestamp.
    pub fn manifest(&self, command: &str, cfg: &RunConfig, files: &[String]) -> Result<(), CliError> {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        self.write_json(
            "manifest.json",
            &json!({
                "command": command,
                "config_digest": cfg.digest(),
                "seed": cfg.seed,
                "versions": {
                    "bfisense": bfisense::VERSION,
                    "bfisense-cli": env!("CARGO_PKG_VERSION"),
                },
                "timestamp_unix": timestamp,
                "workers": rayon::current_num_threads(),
                "outputs": files,
                "config": cfg,
            }),
        )?;
        Ok(())
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn simulate_csi(cfg: &RunConfig, out: &Output, a: &SimulateArgs) -> Result<Vec<String>, CliError> {
    let scenario = cfg.scenario.build()?;
    let position = match (a.x, a.y) {
        (Some(x), Some(y)) => PositionParams::cartesian(x, y),
        (Some(_), None) => return Err(CliError::Schema("--x requires --y".into())),
        _ => {
            let mut entries = cfg.csi.position.entries().to_vec();
            for (kind, v) in [(ParamKind::Aod, a.aod), (ParamKind::Aoa, a.aoa), (ParamKind::Distance, a.distance)] {
                if let Some(v) = v {
                    match entries.iter_mut().find(|e| e.0 == kind) {
                        Some(e) => e.1 = v,
                        None => entries.push((kind, v)),
                    }
                }
            }
            PositionParams::new(entries)?
        }
    };
    let k = cfg.csi.k;
    let mean = scenario.mean_csi(&position, k)?;
    let matrix = if cfg.csi.noisy {
        let var = scenario.noise_variance(&mean)?;
        add_noise(&mean, var, &mut seeded_rng(cfg.seed))?
    } else {
        mean
    };
    let record = CsiRecord {
        geometry: scenario.geometry,
        grid: scenario.grid,
        k,
        matrix,
    };
    Ok(vec![out.write_json("csi.json", &record)?])
}

/// Accepts a full CSI record or a bare matrix.
fn read_csi(path: &Path) -> Result<ComplexMatrix, CliError> {
    let value: serde_json::Value = read_json(path)?;
    if value.get("matrix").is_some() {
        let record: CsiRecord =
            serde_json::from_value(value).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        record.validate()?;
        Ok(record.matrix)
    } else {
        serde_json::from_value(value).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
    }
}

pub fn csi2bfi(out: &Output, input: &Path) -> Result<Vec<String>, CliError> {
    let h = read_csi(input)?;
    let bfi = csi_to_bfi(&h)?;
    Ok(vec![out.write_json("bfi.json", &bfi)?])
}

pub fn bfi2v(out: &Output, input: &Path) -> Result<Vec<String>, CliError> {
    let bfi: Bfi = read_json(input)?;
    let v = givens_reconstruct(&bfi)?;
    let doc = json!({"m_tx": bfi.m_tx, "n_rx": bfi.n_rx, "matrix": v});
    Ok(vec![out.write_json("steering.json", &doc)?])
}

pub fn quantize(cfg: &RunConfig, out: &Output, input: &Path) -> Result<Vec<String>, CliError> {
    let bfi: Bfi = read_json(input)?;
    let q = quantize_bfi(&bfi, cfg.quantize.b_psi)?;
    let packed = q.pack()?;
    // Parse back as a consistency check of the wire format.
    debug_assert_eq!(QuantizedBfi::unpack(&packed, q.m_tx, q.n_rx)?, q);
    Ok(vec![
        out.write_json("quantized.json", &q)?,
        out.write_bytes("bfi.bin", &packed)?,
        out.write_json("dequantized.json", &dequantize(&q)?)?,
    ])
}

fn crb_cfg(cfg: &RunConfig) -> CrbConfig {
    cfg.crb
}

pub fn crb_map(cfg: &RunConfig, out: &Output) -> Result<Vec<String>, CliError> {
    let scenario = cfg.scenario.build()?;
    let roi = cfg.roi.build(cfg.seed)?;
    let k = cfg.csi.k;
    let base = crb_cfg(cfg);
    let results = (0..roi.len())
        .into_par_iter()
        .map(|r| {
            let (s, x) = roi.problem(&scenario, r)?;
            let c = CrbConfig {
                seed: derive_seed(base.seed, r as u64),
                ..base
            };
            Ok((x.clone(), position_crb(&x, &s, k, &c)?))
        })
        .collect::<Result<Vec<_>, bfisense::Error>>()?;

    let kinds = results[0].0.kinds();
    let labels = results[0].1.model.mean.labels();
    let mut header: Vec<String> = vec!["x".into(), "y".into()];
    if roi.target != Target::Location {
        header.extend(kinds.iter().map(|k| k.name().to_owned()));
    }
    header.extend(kinds.iter().map(|k| format!("crb_{}", k.name())));
    header.extend(kinds.iter().map(|k| format!("nl_crb_{}", k.name())));
    header.extend(labels.iter().map(|l| format!("chi_{l}")));
    let rows = results
        .iter()
        .zip(&roi.points)
        .map(|((x, p), point)| {
            let mut row = vec![num(point[0]), num(point[1])];
            if roi.target != Target::Location {
                row.extend(x.values().into_iter().map(num));
            }
            row.extend(p.fisher.crb_diag.iter().map(|&v| num(v)));
            for &v in &p.fisher.crb_diag {
                row.push(num(nl_crb(v)?));
            }
            row.extend(p.scores.iter().map(|&v| num(v)));
            Ok(row)
        })
        .collect::<Result<Vec<_>, bfisense::Error>>()?;
    Ok(vec![out.write_csv("crb_map.csv", &header, &rows)?])
}

pub fn select(cfg: &RunConfig, out: &Output) -> Result<Vec<String>, CliError> {
    let scenario = cfg.scenario.build()?;
    let roi = cfg.roi.build(cfg.seed)?;
    let result = select_features(&roi, &scenario, &crb_cfg(cfg), cfg.select.n_sel, cfg.select.mode)?;
    Ok(vec![out.write_json("selection.json", &result)?])
}

pub fn ks_test(cfg: &RunConfig, out: &Output) -> Result<Vec<String>, CliError> {
    let scenario = cfg.scenario.build()?;
    let x = &cfg.ks.position;
    let mean = scenario.mean_csi(x, cfg.ks.k)?;
    let theta_bar = csi_to_bfi(&mean)?;
    let var = scenario.noise_variance(&mean)?;
    let mut rng = seeded_rng(cfg.seed);
    let mut columns = vec![Vec::with_capacity(cfg.ks.samples); theta_bar.len()];
    for _ in 0..cfg.ks.samples {
        let theta = csi_to_bfi(&add_noise(&mean, var, &mut rng)?)?;
        for (c, d) in columns.iter_mut().zip(periodic_diff(&theta, &theta_bar)?) {
            c.push(d);
        }
    }
    let header: Vec<String> = ["element", "label", "n", "mean", "std_dev", "statistic", "p_value"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = columns
        .iter()
        .zip(theta_bar.labels())
        .enumerate()
        .map(|(i, (c, l))| {
            let r = ks_gaussian_pvalue(c)?;
            Ok(vec![
                i.to_string(),
                l.to_string(),
                r.n.to_string(),
                num(r.mean),
                num(r.std_dev),
                num(r.statistic),
                num(r.p_value),
            ])
        })
        .collect::<Result<Vec<_>, bfisense::Error>>()?;
    Ok(vec![out.write_csv("ks.csv", &header, &rows)?])
}

pub fn music_mc(cfg: &RunConfig, out: &Output) -> Result<Vec<String>, CliError> {
    let scenario = cfg.scenario.build()?;
    let x = PositionParams::single(ParamKind::Aod, cfg.music.aod);
    let points = mc_estimator_variance(&scenario, &x, &cfg.music.snrs_db, &cfg.music.mc(cfg.seed), &crb_cfg(cfg))?;
    let header: Vec<String> = ["snr_db", "mean", "variance", "crb", "ratio"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![num(p.snr_db), num(p.mean), num(p.variance), num(p.crb), num(p.variance / p.crb)])
        .collect();
    Ok(vec![out.write_csv("music_mc.csv", &header, &rows)?])
}

fn feature_set(cfg: &RunConfig, scenario: &Scenario) -> Result<FeatureSet, CliError> {
    let n_bfi = bfisense::bfi::bfi_element_count(scenario.geometry.n_rx, scenario.geometry.n_tx);
    let n_sel = cfg.select.n_sel;
    Ok(match cfg.evaluate.features {
        FeatureChoice::All => FeatureSet::All,
        FeatureChoice::Proposed => {
            let roi = cfg.roi.build(cfg.seed)?;
            let r = select_features(&roi, scenario, &crb_cfg(cfg), n_sel, cfg.select.mode)?;
            FeatureSet::Selected(r.per_subcarrier)
        }
        FeatureChoice::Random => {
            if n_sel == 0 || n_sel > n_bfi {
                return Err(CliError::Schema(format!("select.n_sel must be in 1..={n_bfi}")));
            }
            let per_sc = (1..=scenario.grid.n_subcarriers)
                .map(|k| {
                    let mut rng = seeded_rng(derive_seed(cfg.seed ^ cfg.dataset.seed, k as u64));
                    let mut s = sample(&mut rng, n_bfi, n_sel).into_vec();
                    s.sort_unstable();
                    s
                })
                .collect();
            FeatureSet::Selected(per_sc)
        }
    })
}

fn dataset_rows(ds: &Dataset) -> Vec<Vec<String>> {
    ds.features
        .iter()
        .zip(&ds.positions)
        .zip(&ds.position_index)
        .map(|((f, p), i)| {
            let mut row = vec![i.to_string(), num(p[0]), num(p[1])];
            row.extend(f.iter().map(|&v| num(v)));
            row
        })
        .collect()
}

pub fn evaluate(cfg: &RunConfig, out: &Output) -> Result<Vec<String>, CliError> {
    let scenario = cfg.scenario.build()?;
    let roi = cfg.roi.build(cfg.seed)?;
    let features = feature_set(cfg, &scenario)?;
    let ds = gen_dataset(&roi, &scenario, &features, &cfg.dataset)?;
    let (train, test) = ds.split_by_position(cfg.evaluate.train_fraction, cfg.dataset.seed)?;
    let report = train_eval_positioner(&train, &test, &cfg.mlp)?;

    let mut header: Vec<String> = vec!["position".into(), "x".into(), "y".into()];
    header.extend(ds.column_names(scenario.geometry.n_rx, scenario.geometry.n_tx));
    let dataset = out.write_csv("dataset.csv", &header, &dataset_rows(&ds))?;

    let err_header: Vec<String> = ["position", "x", "y", "error"].iter().map(|s| s.to_string()).collect();
    let err_rows: Vec<Vec<String>> = test
        .position_index
        .iter()
        .zip(&test.positions)
        .zip(&report.errors)
        .map(|((i, p), e)| vec![i.to_string(), num(p[0]), num(p[1]), num(*e)])
        .collect();
    let errors = out.write_csv("errors.csv", &err_header, &err_rows)?;

    let selection = match &features {
        FeatureSet::All => serde_json::Value::Null,
        FeatureSet::Selected(s) => json!(s),
    };
    let results = out.write_json(
        "results.json",
        &json!({
            "features": cfg.evaluate.features,
            "selection": selection,
            "n_train": train.len(),
            "n_test": test.len(),
            "quantiles": report.quantiles,
            "config_digest": cfg.digest(),
        }),
    )?;
    Ok(vec![dataset, errors, results])
}
