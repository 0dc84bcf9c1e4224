use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lm::{lm_train, LmOptions, TrainReport, TrainingSet};
use super::mlp::{MlpNetwork, Normalizer};
use crate::controllers::MppEstimate;
use crate::error::{Error, Result};
use crate::pv_model::{mpp_oracle, EnvConditions, PanelParams};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_HIDDEN: usize = 10;
/// Fraction of rows held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.2;

/// One oracle-labeled sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataRow {
    /// Irradiance [W/m²].
    pub g: f64,
    /// Cell temperature [K].
    pub t: f64,
    pub v_mpp: f64,
    pub i_mpp: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub rows: Vec<DataRow>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Seeded shuffle, then the first `1 - VALIDATION_FRACTION` of rows for
    /// training and the rest for validation.
    pub fn split(&self, seed: u64) -> (Dataset, Dataset) {
        let mut rows = self.rows.clone();
        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_val = libm::round(rows.len() as f64 * VALIDATION_FRACTION) as usize;
        let val = rows.split_off(rows.len() - n_val);
        (Dataset { rows }, Dataset { rows: val })
    }
}

/// Evenly spaced values `start, start + step, ..` up to and including `end`.
pub fn grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || end < start {
        return Vec::new();
    }
    let n = ((end - start) / step + 1e-9) as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

/// 200..=1000 W/m² in steps of 50.
pub fn default_g_grid() -> Vec<f64> {
    grid(200.0, 1000.0, 50.0)
}

/// 15..=75 °C in steps of 5, in kelvin.
pub fn default_t_grid() -> Vec<f64> {
    grid(15.0, 75.0, 5.0).into_iter().map(|c| c + 273.15).collect()
}

/// Labels every `(g, t)` pair with the MPP oracle.
pub fn generate_dataset(params: &PanelParams, g_grid: &[f64], t_grid: &[f64]) -> Result<Dataset> {
    let mut rows = Vec::with_capacity(g_grid.len() * t_grid.len());
    for &g in g_grid {
        for &t in t_grid {
            let op = mpp_oracle(params, EnvConditions::new(g, t))?;
            rows.push(DataRow {
                g,
                t,
                v_mpp: op.v,
                i_mpp: op.i,
            });
        }
    }
    Ok(Dataset { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralConfig {
    pub hidden: usize,
    pub lm: LmOptions,
    pub g_grid: Vec<f64>,
    /// Temperatures [K].
    pub t_grid: Vec<f64>,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        NeuralConfig {
            hidden: DEFAULT_HIDDEN,
            lm: LmOptions::default(),
            g_grid: default_g_grid(),
            t_grid: default_t_grid(),
        }
    }
}

impl NeuralConfig {
    pub fn layers(&self) -> [usize; 3] {
        [2, self.hidden, 1]
    }
}

/// Which column a network predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Voltage,
    Current,
}

impl Target {
    fn of(self, row: &DataRow) -> f64 {
        match self {
            Target::Voltage => row.v_mpp,
            Target::Current => row.i_mpp,
        }
    }
}

/// Fits the network's normalizers on `data` and packs it in normalized form.
pub fn prepare(net: &mut MlpNetwork, data: &Dataset, target: Target) -> TrainingSet {
    net.input_norm = [
        Normalizer::fit(data.rows.iter().map(|r| r.g)),
        Normalizer::fit(data.rows.iter().map(|r| r.t)),
    ];
    net.output_norm = Normalizer::fit(data.rows.iter().map(|r| target.of(r)));
    TrainingSet {
        x: data.rows.iter().map(|r| net.normalize_input([r.g, r.t])).collect(),
        y: data
            .rows
            .iter()
            .map(|r| net.output_norm.to_unit(target.of(r)))
            .collect(),
    }
}

/// Largest `|prediction - label| / |label|` over `data`.
pub fn max_relative_error(net: &MlpNetwork, data: &Dataset, target: Target) -> f64 {
    data.rows
        .iter()
        .map(|r| {
            let y = target.of(r);
            libm::fabs(net.forward(r.g, r.t).value - y) / libm::fabs(y)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFit {
    pub net: MlpNetwork,
    pub report: TrainReport,
    pub train_max_rel_err: f64,
    pub val_max_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedEstimators {
    pub v: NetworkFit,
    pub i: NetworkFit,
}

impl TrainedEstimators {
    pub fn estimate(&self, env: EnvConditions) -> MppEstimate {
        estimate_mpp(&self.v.net, &self.i.net, env)
    }

    pub fn networks(&self) -> MppNetworks {
        MppNetworks {
            v: self.v.net.clone(),
            i: self.i.net.clone(),
        }
    }
}

/// The voltage and current estimators used together.
#[derive(Debug, Clone, PartialEq)]
pub struct MppNetworks {
    pub v: MlpNetwork,
    pub i: MlpNetwork,
}

impl MppNetworks {
    pub fn estimate(&self, env: EnvConditions) -> MppEstimate {
        estimate_mpp(&self.v, &self.i, env)
    }
}

/// Trains one network on the training split and scores it on both splits.
pub fn fit_network(
    train: &Dataset,
    val: &Dataset,
    target: Target,
    cfg: &NeuralConfig,
    seed: u64,
) -> Result<NetworkFit> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut net = MlpNetwork::new(&cfg.layers(), seed)?;
    let set = prepare(&mut net, train, target);
    let report = lm_train(&mut net, &set, &cfg.lm)?;
    Ok(NetworkFit {
        train_max_rel_err: max_relative_error(&net, train, target),
        val_max_rel_err: if val.is_empty() {
            0.0
        } else {
            max_relative_error(&net, val, target)
        },
        net,
        report,
    })
}

/// Splits `data` with `seed` and trains the voltage and current networks.
pub fn train_on_dataset(data: &Dataset, cfg: &NeuralConfig, seed: u64) -> Result<TrainedEstimators> {
    let (train, val) = data.split(seed);
    Ok(TrainedEstimators {
        v: fit_network(&train, &val, Target::Voltage, cfg, seed)?,
        i: fit_network(&train, &val, Target::Current, cfg, seed.wrapping_add(1))?,
    })
}

/// Generates the grid dataset for `params` and trains both networks.
pub fn train_estimators(params: &PanelParams, cfg: &NeuralConfig, seed: u64) -> Result<TrainedEstimators> {
    let data = generate_dataset(params, &cfg.g_grid, &cfg.t_grid)?;
    train_on_dataset(&data, cfg, seed)
}

pub fn estimate_mpp(v_net: &MlpNetwork, i_net: &MlpNetwork, env: EnvConditions) -> MppEstimate {
    let v = v_net.forward(env.g, env.t);
    let i = i_net.forward(env.g, env.t);
    MppEstimate {
        v_mpp: v.value,
        i_mpp: i.value,
        extrapolated: v.extrapolated || i.extrapolated,
    }
}
