//! Output files and the network model format.
//!
//! Every file is written to a temporary sibling first and renamed into place,
//! so a crashed run never leaves a truncated output behind.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mppt_core::inverter::InverterSample;
use mppt_core::neural::{Dataset, MlpNetwork, MppNetworks, Normalizer, Target, TrainReport};
use mppt_core::sim::{ComparisonRow, Metrics, SettleTime, SimTrace, TraceRow};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const V_MODEL_FILE: &str = "v_mpp.json";
pub const I_MODEL_FILE: &str = "i_mpp.json";

/// Writes `bytes` to `path` atomically, creating parent directories.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(CliError::io(dir))?;
    tmp.write_all(bytes).map_err(CliError::io(path))?;
    tmp.as_file().sync_all().map_err(CliError::io(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn csv_bytes<H, R>(header: &[H], rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>>
where
    H: AsRef<[u8]>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| CliError::Io {
        path: PathBuf::from("<csv>"),
        source: e.into(),
    };
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(row).map_err(to_err)?;
    }
    w.into_inner().map_err(|e| CliError::Io {
        path: PathBuf::from("<csv>"),
        source: e.into_error(),
    })
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn settle_field(s: SettleTime) -> String {
    s.to_string()
}

pub fn write_trace(path: &Path, trace: &SimTrace) -> Result<()> {
    let rows = trace.rows.iter().map(|r| r.values().map(num));
    write_atomic(path, &csv_bytes(&TraceRow::HEADER, rows)?)
}

/// Parses a file written by [`write_trace`].
pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
        let v: Vec<f64> = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| CliError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
            })?;
        if v.len() != TraceRow::HEADER.len() {
            return Err(CliError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::InvalidData, "wrong column count"),
            });
        }
        out.push(TraceRow {
            t: v[0],
            g: v[1],
            t_cell: v[2],
            v_pv: v[3],
            i_pv: v[4],
            p_pv: v[5],
            duty: v[6],
            v_out: v[7],
            i_l: v[8],
            p_mpp_oracle: v[9],
        });
    }
    Ok(out)
}

/// Human-readable `key = value` summary, one block per segment.
pub fn metrics_text(kind: &str, m: &Metrics) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "controller = {kind}");
    let _ = writeln!(s, "settle_time_s = {}", m.settle_time);
    let _ = writeln!(s, "tracking_efficiency = {}", m.tracking_efficiency);
    let _ = writeln!(s, "steady_state_power_w = {}", m.steady_state_power);
    let _ = writeln!(s, "chatter_w = {}", m.chatter);
    let _ = writeln!(s, "segments = {}", m.segments.len());
    for (k, seg) in m.segments.iter().enumerate() {
        let _ = writeln!(s, "segment.{k}.start_s = {}", seg.start);
        let _ = writeln!(s, "segment.{k}.end_s = {}", seg.end);
        let _ = writeln!(s, "segment.{k}.g = {}", seg.g);
        let _ = writeln!(s, "segment.{k}.t_cell_k = {}", seg.t_cell);
        let _ = writeln!(s, "segment.{k}.p_mpp_w = {}", seg.p_mpp);
        let _ = writeln!(s, "segment.{k}.settle_time_s = {}", seg.settle_time);
        let _ = writeln!(s, "segment.{k}.steady_state_power_w = {}", seg.steady_state_power);
        let _ = writeln!(s, "segment.{k}.chatter_w = {}", seg.chatter);
    }
    s
}

const METRICS_HEADER: [&str; 6] = [
    "controller",
    "settle_time_s",
    "tracking_efficiency",
    "steady_state_power_w",
    "chatter_w",
    "segments",
];

fn metrics_record(kind: &str, m: &Metrics) -> Vec<String> {
    vec![
        kind.to_string(),
        settle_field(m.settle_time),
        num(m.tracking_efficiency),
        num(m.steady_state_power),
        num(m.chatter),
        m.segments.len().to_string(),
    ]
}

pub fn write_metrics(dir: &Path, kind: &str, m: &Metrics) -> Result<()> {
    write_atomic(&dir.join("metrics.txt"), metrics_text(kind, m).as_bytes())?;
    write_atomic(
        &dir.join("metrics.csv"),
        &csv_bytes(&METRICS_HEADER, [metrics_record(kind, m)])?,
    )
}

/// `comparison.csv` with one row per controller and
/// `comparison_segments.csv` with one row per controller and segment.
pub fn write_comparison(dir: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let summary = rows.iter().map(|r| metrics_record(r.kind.name(), &r.metrics));
    write_atomic(&dir.join("comparison.csv"), &csv_bytes(&METRICS_HEADER, summary)?)?;
    let header = [
        "controller",
        "segment",
        "start_s",
        "end_s",
        "g",
        "t_cell_k",
        "p_mpp_w",
        "settle_time_s",
        "steady_state_power_w",
        "chatter_w",
    ];
    let segs = rows.iter().flat_map(|r| {
        r.metrics.segments.iter().enumerate().map(move |(k, s)| {
            vec![
                r.kind.name().to_string(),
                k.to_string(),
                num(s.start),
                num(s.end),
                num(s.g),
                num(s.t_cell),
                num(s.p_mpp),
                settle_field(s.settle_time),
                num(s.steady_state_power),
                num(s.chatter),
            ]
        })
    });
    write_atomic(&dir.join("comparison_segments.csv"), &csv_bytes(&header, segs)?)
}

pub fn write_inverter(path: &Path, samples: &[InverterSample]) -> Result<()> {
    let header = ["t", "u_an", "u_bn", "u_cn", "i_a", "i_b", "i_c"];
    let rows = samples
        .iter()
        .map(|s| [s.t, s.phase.u_an, s.phase.u_bn, s.phase.u_cn, s.i_a, s.i_b, s.i_c].map(num));
    write_atomic(path, &csv_bytes(&header, rows)?)
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let rows = data.rows.iter().map(|r| [r.g, r.t, r.v_mpp, r.i_mpp].map(num));
    write_atomic(path, &csv_bytes(&["g", "t", "v_mpp", "i_mpp"], rows)?)
}

/// Loss per accepted step; row 0 is the initial loss.
pub fn write_train_report(path: &Path, report: &TrainReport) -> Result<()> {
    let rows = std::iter::once(report.initial_loss)
        .chain(report.losses.iter().copied())
        .enumerate()
        .map(|(k, l)| [k.to_string(), num(l)]);
    write_atomic(path, &csv_bytes(&["step", "loss"], rows)?)
}

/// `v,i,p` samples of one I-V curve.
pub fn write_curve(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let rows = points.iter().map(|&(v, i)| [v, i, v * i].map(num));
    write_atomic(path, &csv_bytes(&["v", "i", "p"], rows)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocusPoint {
    pub g: f64,
    pub t_c: f64,
    pub v_mpp: f64,
    pub i_mpp: f64,
    pub p_mpp: f64,
}

pub fn write_locus(path: &Path, points: &[LocusPoint]) -> Result<()> {
    let rows = points.iter().map(|p| [p.g, p.t_c, p.v_mpp, p.i_mpp, p.p_mpp].map(num));
    write_atomic(path, &csv_bytes(&["g", "t_c", "v_mpp", "i_mpp", "p_mpp"], rows)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NormFile {
    min: f64,
    max: f64,
}

impl From<Normalizer> for NormFile {
    fn from(n: Normalizer) -> Self {
        NormFile { min: n.min, max: n.max }
    }
}

impl From<NormFile> for Normalizer {
    fn from(n: NormFile) -> Self {
        Normalizer { min: n.min, max: n.max }
    }
}

/// JSON form of a trained network. `weights[k]` is layer `k`'s row-major
/// `out x in` matrix, `biases[k]` its bias vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    target: String,
    layers: Vec<usize>,
    input_norm: [NormFile; 2],
    output_norm: NormFile,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

fn target_name(t: Target) -> &'static str {
    match t {
        Target::Voltage => "v_mpp",
        Target::Current => "i_mpp",
    }
}

pub fn model_to_json(net: &MlpNetwork, target: Target) -> String {
    let (weights, biases) = net
        .layer_slices()
        .into_iter()
        .map(|(w, b)| (w.to_vec(), b.to_vec()))
        .unzip();
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        target: target_name(target).to_string(),
        layers: net.layers().to_vec(),
        input_norm: net.input_norm.map(NormFile::from),
        output_norm: net.output_norm.into(),
        weights,
        biases,
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}

pub fn model_from_json(text: &str, target: Target) -> std::result::Result<MlpNetwork, String> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(format!("unsupported format_version {}", file.format_version));
    }
    if file.target != target_name(target) {
        return Err(format!(
            "expected target `{}`, found `{}`",
            target_name(target),
            file.target
        ));
    }
    let n_layers = file.layers.len().saturating_sub(1);
    if file.weights.len() != n_layers || file.biases.len() != n_layers {
        return Err("weights and biases must have one entry per layer".into());
    }
    let mut params = Vec::new();
    for (k, (w, b)) in file.weights.iter().zip(&file.biases).enumerate() {
        let (n_in, n_out) = (file.layers[k], file.layers[k + 1]);
        if w.len() != n_in * n_out || b.len() != n_out {
            return Err(format!(
                "layer {k} expects {} weights and {} biases",
                n_in * n_out,
                n_out
            ));
        }
        params.extend_from_slice(w);
        params.extend_from_slice(b);
    }
    MlpNetwork::from_parts(
        &file.layers,
        params,
        file.input_norm.map(Normalizer::from),
        file.output_norm.into(),
    )
    .map_err(|e| e.to_string())
}

pub fn save_networks(dir: &Path, nets: &MppNetworks) -> Result<()> {
    write_atomic(
        &dir.join(V_MODEL_FILE),
        model_to_json(&nets.v, Target::Voltage).as_bytes(),
    )?;
    write_atomic(
        &dir.join(I_MODEL_FILE),
        model_to_json(&nets.i, Target::Current).as_bytes(),
    )
}

pub fn networks_exist(dir: &Path) -> bool {
    dir.join(V_MODEL_FILE).is_file() && dir.join(I_MODEL_FILE).is_file()
}

pub fn load_network(path: &Path, target: Target) -> Result<MlpNetwork> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    model_from_json(&text, target).map_err(|message| CliError::Model {
        path: path.to_path_buf(),
        message,
    })
}

pub fn load_networks(dir: &Path) -> Result<MppNetworks> {
    Ok(MppNetworks {
        v: load_network(&dir.join(V_MODEL_FILE), Target::Voltage)?,
        i: load_network(&dir.join(I_MODEL_FILE), Target::Current)?,
    })
}
