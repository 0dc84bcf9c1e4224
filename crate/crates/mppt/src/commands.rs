use std::io::Write;

use mppt_core::controllers::ControllerKind;
use mppt_core::neural::{generate_dataset, train_on_dataset, MppNetworks, TrainedEstimators};
use mppt_core::pv_model::{mpp_oracle, EnvConditions, PanelAt};
use mppt_core::sim::{compute_metrics, run_comparison, run_inverter, run_scenario, ComparisonRow};

use crate::cli::{Cli, Command, CommonArgs, CompareArgs, SimulateArgs, SweepArgs, TrainArgs};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::formats::{self, LocusPoint};

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(a) => simulate(&mut cfg, &a, out),
        Command::Train(a) => train(&mut cfg, &a, out),
        Command::Compare(a) => compare(&mut cfg, &a, out),
        Command::Sweep(a) => sweep(&mut cfg, &a, out),
    }
}

fn apply_common(cfg: &mut RunConfig, c: &CommonArgs) {
    if let Some(d) = &c.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(d) = &c.model_dir {
        cfg.model_dir = Some(d.clone());
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
}

fn apply_preset(cfg: &mut RunConfig, preset: &Option<String>) {
    if let Some(p) = preset {
        cfg.scenario.preset = Some(p.clone());
        cfg.scenario.duration = None;
        cfg.scenario.segments.clear();
    }
}

fn parse_kind(s: &str) -> Result<ControllerKind> {
    ControllerKind::parse(s.trim())
        .ok_or_else(|| CliError::Config(format!("unknown controller `{s}` (expected cpoa, ampo or ampo_ann)")))
}

fn print(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(CliError::io("<stdout>"))
}

fn train_and_store(cfg: &RunConfig, out: &mut dyn Write) -> Result<TrainedEstimators> {
    let neural = cfg.neural.to_config()?;
    let data = generate_dataset(&cfg.panel, &neural.g_grid, &neural.t_grid)?;
    let trained = train_on_dataset(&data, &neural, cfg.seed)?;
    let dir = cfg.model_dir();
    formats::save_networks(&dir, &trained.networks())?;
    formats::write_dataset(&dir.join("dataset.csv"), &data)?;
    formats::write_train_report(&dir.join("train_v_mpp.csv"), &trained.v.report)?;
    formats::write_train_report(&dir.join("train_i_mpp.csv"), &trained.i.report)?;
    let mut s = format!("dataset: {} rows\n", data.len());
    for (name, fit) in [("v_mpp", &trained.v), ("i_mpp", &trained.i)] {
        s += &format!(
            "{name}: epochs {} loss {:.3e} converged {} max rel err train {:.3e} val {:.3e}\n",
            fit.report.epochs,
            fit.report.final_loss(),
            fit.report.converged,
            fit.train_max_rel_err,
            fit.val_max_rel_err,
        );
    }
    s += &format!("models written to {}\n", dir.display());
    print(out, &s)?;
    Ok(trained)
}

fn simulate(cfg: &mut RunConfig, a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    apply_common(cfg, &a.common);
    apply_preset(cfg, &a.preset);
    if let Some(c) = &a.controller {
        cfg.controller.kind = parse_kind(c)?;
    }
    if a.inverter {
        cfg.inverter.enabled = true;
    }
    cfg.validate()?;
    let sim = cfg.sim_config()?;
    let profile = cfg.scenario.to_profile()?;
    let kind = cfg.controller.kind;

    let networks = if kind == ControllerKind::AmpoAnn {
        let dir = cfg.model_dir();
        Some(if formats::networks_exist(&dir) {
            formats::load_networks(&dir)?
        } else if a.train_if_missing {
            train_and_store(cfg, out)?.networks()
        } else {
            return Err(CliError::Model {
                path: dir.join(formats::V_MODEL_FILE),
                message: "not found; run `mppt train` first or pass --train-if-missing".into(),
            });
        })
    } else {
        None
    };

    let trace = run_scenario(&profile, kind, &sim, networks.as_ref())?;
    let metrics = compute_metrics(&trace)?;
    let dir = &cfg.output_dir;
    formats::write_trace(&dir.join("trace.csv"), &trace)?;
    formats::write_metrics(dir, kind.name(), &metrics)?;
    if cfg.inverter.enabled {
        let inv = &cfg.inverter;
        let samples = run_inverter(&trace, &inv.pwm(), &inv.load(), inv.dt, inv.sample_every)?;
        formats::write_inverter(&dir.join("inverter.csv"), &samples)?;
    }
    print(out, &formats::metrics_text(kind.name(), &metrics))
}

fn train(cfg: &mut RunConfig, a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    apply_common(cfg, &a.common);
    if let Some(e) = a.max_epochs {
        cfg.neural.max_epochs = e;
    }
    if let Some(h) = a.hidden {
        cfg.neural.hidden = h;
    }
    cfg.neural.to_config()?;
    cfg.panel
        .validate()
        .map_err(|e| CliError::Config(format!("panel: {e}")))?;
    train_and_store(cfg, out).map(|_| ())
}

pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut s = format!(
        "{:<10} {:>12} {:>12} {:>14} {:>12}\n",
        "controller", "settle_s", "efficiency", "steady_p_w", "chatter_w"
    );
    for r in rows {
        let m = &r.metrics;
        s += &format!(
            "{:<10} {:>12} {:>12.6} {:>14.4} {:>12.5}\n",
            r.kind.name(),
            m.settle_time
                .seconds()
                .map_or("NotSettled".to_string(), |t| format!("{t:.4}")),
            m.tracking_efficiency,
            m.steady_state_power,
            m.chatter,
        );
    }
    s
}

fn compare(cfg: &mut RunConfig, a: &CompareArgs, out: &mut dyn Write) -> Result<()> {
    apply_common(cfg, &a.common);
    apply_preset(cfg, &a.preset);
    let kinds: Vec<ControllerKind> = a
        .controllers
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(parse_kind)
        .collect::<Result<_>>()?;
    if kinds.is_empty() {
        return Err(CliError::Config("--controllers needs at least one controller".into()));
    }
    cfg.validate()?;
    let sim = cfg.sim_config()?;
    let profile = cfg.scenario.to_profile()?;
    let model_dir = cfg.model_dir();
    let networks: Option<MppNetworks> =
        if kinds.contains(&ControllerKind::AmpoAnn) && formats::networks_exist(&model_dir) {
            Some(formats::load_networks(&model_dir)?)
        } else {
            None
        };
    let rows = run_comparison(&profile, &kinds, &sim, networks.as_ref())?;
    let dir = &cfg.output_dir;
    for r in &rows {
        formats::write_trace(&dir.join(format!("trace_{}.csv", r.kind.name())), &r.trace)?;
    }
    formats::write_comparison(dir, &rows)?;
    print(out, &comparison_table(&rows))
}

/// Parses `min:max:n`; `n = 1` gives just `min`.
fn parse_axis(spec: &str, name: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Config(format!("--grid: {name} axis must be min:max:n, got `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}

pub fn parse_grid(spec: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let Some((g, t)) = spec.split_once(',') else {
        return Err(CliError::Config(format!(
            "--grid must be g_min:g_max:n,t_min:t_max:n, got `{spec}`"
        )));
    };
    let g = parse_axis(g, "irradiance")?;
    if g[0] <= 0.0 {
        return Err(CliError::Config("--grid: irradiance must be positive".into()));
    }
    Ok((g, parse_axis(t, "temperature")?))
}

fn curve_name(g: f64, t_c: f64) -> String {
    format!("curve_g{g}_t{t_c}.csv")
}

fn sweep(cfg: &mut RunConfig, a: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    if let Some(d) = &a.output_dir {
        cfg.output_dir = d.clone();
    }
    let (gs, ts) = parse_grid(&a.grid)?;
    if a.points < 2 {
        return Err(CliError::Config("--points must be at least 2".into()));
    }
    cfg.panel
        .validate()
        .map_err(|e| CliError::Config(format!("panel: {e}")))?;
    let dir = cfg.output_dir.join("sweep");
    let mut locus = Vec::with_capacity(gs.len() * ts.len());
    for &g in &gs {
        for &t_c in &ts {
            let env = EnvConditions::from_celsius(g, t_c);
            env.validate().map_err(|e| CliError::Config(format!("--grid: {e}")))?;
            let panel = PanelAt::new(&cfg.panel, env);
            let v_oc = panel.open_circuit_voltage()?;
            let curve = (0..a.points)
                .map(|k| {
                    let v = v_oc * k as f64 / (a.points - 1) as f64;
                    panel.current(v).map(|i| (v, i))
                })
                .collect::<mppt_core::Result<Vec<_>>>()?;
            formats::write_curve(&dir.join(curve_name(g, t_c)), &curve)?;
            let m = mpp_oracle(&cfg.panel, env)?;
            locus.push(LocusPoint {
                g,
                t_c,
                v_mpp: m.v,
                i_mpp: m.i,
                p_mpp: m.p,
            });
        }
    }
    formats::write_locus(&dir.join("mpp_locus.csv"), &locus)?;
    let mut s = format!(
        "{:>8} {:>8} {:>10} {:>10} {:>10}\n",
        "g", "t_c", "v_mpp", "i_mpp", "p_mpp"
    );
    for p in &locus {
        s += &format!(
            "{:>8} {:>8} {:>10.4} {:>10.4} {:>10.4}\n",
            p.g, p.t_c, p.v_mpp, p.i_mpp, p.p_mpp
        );
    }
    s += &format!("{} curves written to {}\n", locus.len(), dir.display());
    print(out, &s)
}
