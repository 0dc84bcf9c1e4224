use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mppt::formats::read_trace;
use mppt_core::controllers::ControllerKind;
use mppt_core::sim::{compute_metrics, SimTrace};

fn mppt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mppt"))
        .current_dir(dir)
        .args(args)
        .env_remove("MPPT_CONFIG")
        .output()
        .expect("spawn mppt")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn csv_column(path: &Path, name: &str) -> Vec<String> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let idx = rd.headers().unwrap().iter().position(|h| h == name).unwrap();
    rd.records().map(|r| r.unwrap()[idx].to_string()).collect()
}

#[test]
fn simulate_stc_writes_trace_and_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mppt(tmp.path(), &["simulate", "--controller", "ampo"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("tracking_efficiency = "));
    let out = tmp.path().join("out");
    let text = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "t,g,t_cell,v_pv,i_pv,p_pv,duty,v_out,i_l,p_mpp_oracle"
    );
    // floor(0.5 s / 1 ms) + 1
    assert_eq!(text.lines().count(), 1 + 501);
    assert!(out.join("metrics.txt").is_file());
    assert_eq!(csv_column(&out.join("metrics.csv"), "controller"), ["ampo"]);

    let rows = read_trace(&out.join("trace.csv")).unwrap();
    for r in &rows {
        assert!(
            r.p_pv <= r.p_mpp_oracle * (1.0 + 1e-6),
            "row at {} exceeds the MPP",
            r.t
        );
    }
    let m = compute_metrics(&SimTrace {
        kind: ControllerKind::Ampo,
        period: 1e-3,
        rows,
    })
    .unwrap();
    let eff: f64 = csv_column(&out.join("metrics.csv"), "tracking_efficiency")[0]
        .parse()
        .unwrap();
    assert_eq!(eff, m.tracking_efficiency);
}

#[test]
fn unknown_config_key_exits_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("run.toml"),
        "[controller]\nkind = \"ampo\"\ngama = 0.01\n",
    )
    .unwrap();
    let o = mppt(tmp.path(), &["--config", "run.toml", "simulate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("gama"), "{}", stderr(&o));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn invalid_values_and_usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.toml"), "[buck]\ndt = 1e-3\n").unwrap();
    assert_eq!(code(&mppt(tmp.path(), &["--config", "run.toml", "simulate"])), 2);
    assert_eq!(code(&mppt(tmp.path(), &["--config", "missing.toml", "simulate"])), 2);
    assert_eq!(code(&mppt(tmp.path(), &["simulate", "--controller", "hill_climb"])), 2);
    assert_eq!(code(&mppt(tmp.path(), &["simulate", "--preset", "dusk"])), 2);
    assert_eq!(code(&mppt(tmp.path(), &["launch"])), 2);
}

#[test]
fn ampo_ann_trains_when_asked_and_fails_otherwise() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mppt(tmp.path(), &["simulate", "--controller", "ampo_ann"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("--train-if-missing"));

    let o = mppt(
        tmp.path(),
        &["simulate", "--controller", "ampo_ann", "--train-if-missing"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let models = tmp.path().join("out/models");
    assert!(models.join("v_mpp.json").is_file() && models.join("i_mpp.json").is_file());
    assert!(tmp.path().join("out/trace.csv").is_file());

    // Stored models are reused without the flag.
    let o = mppt(tmp.path(), &["simulate", "--controller", "ampo_ann"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn corrupt_model_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let models = tmp.path().join("m");
    fs::create_dir_all(&models).unwrap();
    fs::write(models.join("v_mpp.json"), "{\"format_version\": 1}").unwrap();
    fs::write(models.join("i_mpp.json"), "not json").unwrap();
    let o = mppt(
        tmp.path(),
        &["simulate", "--controller", "ampo_ann", "--model-dir", "m"],
    );
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("v_mpp.json"), "{}", stderr(&o));
}

#[test]
fn train_reports_validation_error_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mppt(tmp.path(), &["train", "--model-dir", "a"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let vals: Vec<f64> = text
        .lines()
        .filter_map(|l| l.split(" val ").nth(1))
        .map(|v| v.trim().parse().unwrap())
        .collect();
    assert_eq!(vals.len(), 2, "{text}");
    assert!(vals.iter().all(|&v| v < 0.01), "{vals:?}");

    assert_eq!(code(&mppt(tmp.path(), &["train", "--model-dir", "b"])), 0);
    for f in [
        "v_mpp.json",
        "i_mpp.json",
        "dataset.csv",
        "train_v_mpp.csv",
        "train_i_mpp.csv",
    ] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    assert_eq!(csv_column(&tmp.path().join("a/dataset.csv"), "g").len(), 221);

    let o = mppt(tmp.path(), &["train", "--model-dir", "c", "--seed", "7"]);
    assert_eq!(code(&o), 0);
    assert_ne!(
        fs::read(tmp.path().join("a/v_mpp.json")).unwrap(),
        fs::read(tmp.path().join("c/v_mpp.json")).unwrap()
    );
}

#[test]
fn zero_epochs_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mppt(tmp.path(), &["train", "--max-epochs", "0"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("not trained"), "{}", stderr(&o));
    assert!(!tmp.path().join("out/models/v_mpp.json").exists());
}

#[test]
fn compare_writes_traces_and_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mppt(tmp.path(), &["compare", "--controllers", "cpoa,ampo,ampo_ann"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = tmp.path().join("out");
    for k in ["cpoa", "ampo", "ampo_ann"] {
        assert!(out.join(format!("trace_{k}.csv")).is_file());
    }
    let table = stdout(&o);
    assert_eq!(table.lines().count(), 4, "{table}");
    let kinds = csv_column(&out.join("comparison.csv"), "controller");
    assert_eq!(kinds, ["cpoa", "ampo", "ampo_ann"]);
    let settle: Vec<f64> = csv_column(&out.join("comparison.csv"), "settle_time_s")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert!(settle[2] < settle[1], "{settle:?}");
}

#[test]
fn compare_rejects_empty_or_unknown_lists() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&mppt(tmp.path(), &["compare", "--controllers", ""])), 2);
    assert_eq!(code(&mppt(tmp.path(), &["compare", "--controllers", ",,"])), 2);
    assert_eq!(code(&mppt(tmp.path(), &["compare", "--controllers", "ampo,po"])), 2);
}

fn locus_power(dir: &Path) -> Vec<f64> {
    csv_column(&dir.join("out/sweep/mpp_locus.csv"), "p_mpp")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect()
}

#[test]
fn sweep_orders_mpp_power() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mppt(tmp.path(), &["sweep", "--grid", "1000:1000:1,25:75:11"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let p = locus_power(tmp.path());
    assert_eq!(p.len(), 11);
    assert!(p.windows(2).all(|w| w[1] < w[0]), "{p:?}");

    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&mppt(tmp.path(), &["sweep", "--grid", "200:1000:9,25:25:1"])), 0);
    let p = locus_power(tmp.path());
    assert_eq!(p.len(), 9);
    assert!(p.windows(2).all(|w| w[1] > w[0]), "{p:?}");
}

#[test]
fn sweep_single_point_writes_one_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mppt(tmp.path(), &["sweep", "--grid", "800:1000:1,40:60:1", "--points", "25"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dir = tmp.path().join("out/sweep");
    let curves: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("curve_"))
        .collect();
    assert_eq!(curves, ["curve_g800_t40.csv"]);
    let v = csv_column(&dir.join(&curves[0]), "v");
    assert_eq!(v.len(), 25);
    assert_eq!(v[0], "0");
    let i = csv_column(&dir.join(&curves[0]), "i");
    assert!(i.last().unwrap().parse::<f64>().unwrap().abs() < 1e-9);
}

#[test]
fn sweep_rejects_bad_grids() {
    let tmp = tempfile::tempdir().unwrap();
    for g in ["200:1000", "200:1000:0,25:25:1", "x:1:1,25:25:1"] {
        assert_eq!(code(&mppt(tmp.path(), &["sweep", "--grid", g])), 2, "{g}");
    }
}

#[test]
fn flags_override_file_and_file_is_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "output_dir = \"from_file\"\n[controller]\nkind = \"cpoa\"\n[scenario]\nduration = 0.1\nsegments = [{ start = 0.0, g = 700, t_c = 40 }]\n";
    let path = tmp.path().join("run.toml");
    fs::write(&path, cfg).unwrap();

    let o = mppt(tmp.path(), &["--config", "run.toml", "simulate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("controller = cpoa"));
    let trace = tmp.path().join("from_file/trace.csv");
    assert_eq!(csv_column(&trace, "t").len(), 101);
    assert_eq!(csv_column(&trace, "g")[0], "700");

    let o = mppt(
        tmp.path(),
        &[
            "--config",
            "run.toml",
            "simulate",
            "--controller",
            "ampo",
            "--preset",
            "stc",
            "--output-dir",
            "flags",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("controller = ampo"));
    assert_eq!(csv_column(&tmp.path().join("flags/trace.csv"), "t").len(), 501);
    assert_eq!(fs::read_to_string(&path).unwrap(), cfg);
}

#[test]
fn config_path_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("env.toml"),
        "output_dir = \"env_out\"\n[scenario]\nduration = 0.05\n",
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mppt"))
        .current_dir(tmp.path())
        .args(["simulate", "--controller", "cpoa"])
        .env("MPPT_CONFIG", "env.toml")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(csv_column(&tmp.path().join("env_out/trace.csv"), "t").len(), 51);
}

#[test]
fn inverter_output_follows_the_dc_link() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[scenario]\nduration = 0.1\n[inverter]\ndt = 1e-5\nsample_every = 1\n";
    fs::write(tmp.path().join("run.toml"), cfg).unwrap();
    let o = mppt(
        tmp.path(),
        &["--config", "run.toml", "simulate", "--controller", "ampo", "--inverter"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = tmp.path().join("out");
    let trace = read_trace(&out.join("trace.csv")).unwrap();
    let mut rd = csv::Reader::from_path(out.join("inverter.csv")).unwrap();
    assert_eq!(
        rd.headers().unwrap().iter().collect::<Vec<_>>(),
        ["t", "u_an", "u_bn", "u_cn", "i_a", "i_b", "i_c"]
    );
    let mut n = 0;
    for rec in rd.records() {
        let v: Vec<f64> = rec.unwrap().iter().map(|s| s.parse().unwrap()).collect();
        let k = trace.partition_point(|r| r.t <= v[0]).max(1) - 1;
        let u_dc = trace[k].v_out;
        assert!((v[1] + v[2] + v[3]).abs() <= 1e-9 * u_dc.max(1.0));
        assert!(v[1..4].iter().all(|x| x.abs() <= 2.0 / 3.0 * u_dc + 1e-9));
        assert!((v[4] + v[5] + v[6]).abs() <= 1e-9);
        n += 1;
    }
    assert_eq!(n, 10_001);
}
