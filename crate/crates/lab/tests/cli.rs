use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pullback_lab::ExperimentConfig;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn pblab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pblab")).args(args).output().expect("spawn pblab")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let path = dir.join(format!("{}.toml", cfg.experiment.name));
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path
}

fn run_dirs(out: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.join("record.json").is_file())
        .collect();
    v.sort();
    v
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn shipped_configs_round_trip_byte_identically() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let once = cfg.to_toml();
        let again = ExperimentConfig::parse(&once).unwrap();
        assert_eq!(again, cfg, "{}", path.display());
        assert_eq!(again.to_toml(), once, "{}", path.display());
        assert_eq!(again.hash(), cfg.hash());
        n += 1;
    }
    assert!(n >= 8);
}

#[test]
fn unknown_keys_are_rejected() {
    let text = std::fs::read_to_string(configs().join("lyapunov_zero.toml")).unwrap();
    let bad = text.replace("kappa = 1.0", "kappa = 1.0\nkapa = 2.0");
    let err = ExperimentConfig::parse(&bad).unwrap_err().to_string();
    assert!(err.contains("kapa"), "{err}");
}

#[test]
fn negative_r0_is_a_usage_error_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let good = std::fs::read_to_string(configs().join("lyapunov_zero.toml")).unwrap();
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, good.replace("r0 = 1.0", "r0 = -1.0")).unwrap();
    let o = pblab(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(text(&o).contains("nonlinearity.r0"), "{}", text(&o));
}

#[test]
fn unknown_experiment_lists_the_available_ones() {
    let text = std::fs::read_to_string(configs().join("lyapunov_zero.toml")).unwrap();
    let err = ExperimentConfig::parse(&text.replace("name = \"lyapunov_zero\"", "name = \"chaos\"")).unwrap_err().to_string();
    assert!(err.contains("chaos") && err.contains("b_case_forwards") && err.contains("absorbing_check"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&pblab(&["frobnicate"])), 2);
    assert_eq!(code(&pblab(&["run"])), 2);
    assert_eq!(code(&pblab(&["run", "--config", "/definitely/not/here.toml"])), 2);
}

#[test]
fn identical_runs_reuse_the_cache_and_reproduce_the_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::load(&configs().join("asymptotic_zero_attractor.toml")).unwrap();
    cfg.experiment.horizon = Some(80.0);
    cfg.output.plot = false;
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let path = write_config(tmp.path(), &cfg);
    let cfg_arg = path.to_str().unwrap();

    let first = pblab(&["run", "--config", cfg_arg, "--out", a.to_str().unwrap()]);
    assert_eq!(code(&first), 0, "{}", text(&first));
    assert!(text(&first).contains("computed"));
    let run = &run_dirs(&a)[0];
    let before = csvs(run);

    let second = pblab(&["run", "--config", cfg_arg, "--out", a.to_str().unwrap()]);
    assert_eq!(code(&second), 0);
    assert!(text(&second).contains("cache hit"), "{}", text(&second));
    assert_eq!(csvs(run), before);

    // fresh computation elsewhere: same bytes
    let third = pblab(&["run", "--config", cfg_arg, "--out", b.to_str().unwrap()]);
    assert!(text(&third).contains("computed"));
    assert_eq!(csvs(&run_dirs(&b)[0]), before);
    assert!(!before.is_empty());
}

#[test]
fn failed_assertion_exits_1_and_report_marks_it() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut cfg = ExperimentConfig::load(&configs().join("absorbing_check.toml")).unwrap();
    // entry takes ~0.4 time units from norm 10·r*
    cfg.experiment.horizon = Some(0.2);
    let path = write_config(tmp.path(), &cfg);
    let o = pblab(&["run", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", text(&o));
    let r = pblab(&["report", out.to_str().unwrap()]);
    assert_eq!(code(&r), 1);
    assert!(text(&r).contains("samples_absorbed") && text(&r).contains("FAIL"));
}

#[test]
fn report_over_passing_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut cfg = ExperimentConfig::load(&configs().join("absorbing_check.toml")).unwrap();
    cfg.experiment.horizon = Some(2.0);
    for seed in [1, 2, 3] {
        cfg.experiment.seed = seed;
        let path = write_config(tmp.path(), &cfg);
        let o = pblab(&["run", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", text(&o));
    }
    let r = pblab(&["report", out.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "{}", text(&r));
    assert_eq!(text(&r).matches("== absorbing_check").count(), 3);

    std::fs::create_dir_all(out.join("broken")).unwrap();
    std::fs::write(out.join("broken/record.json"), "{ not json").unwrap();
    let r = pblab(&["report", out.to_str().unwrap()]);
    assert_eq!(code(&r), 2);
    assert!(text(&r).contains("unreadable"));
}

#[test]
fn empty_directory_has_no_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let r = pblab(&["report", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&r), 2);
    assert!(text(&r).contains("no runs found"));
}

#[test]
fn sweep_writes_one_row_per_distinct_offset() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("sweep_geometric.toml");
    let out = tmp.path().join("out");
    let o = pblab(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let sweep_csv = run_dirs(&out)[0].join("sweep.csv");
    let mut rd = csv::Reader::from_path(&sweep_csv).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 32);
    assert!(rows.iter().all(|r| r.get(20) == Some("")), "no per-row errors expected");

    let dup = tmp.path().join("dup");
    let o = pblab(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dup.to_str().unwrap(), "--offsets", "0,-125,0"]);
    assert_eq!(code(&o), 0);
    assert!(text(&o).contains("duplicate"));
    let n = csv::Reader::from_path(run_dirs(&dup)[0].join("sweep.csv")).unwrap().records().count();
    assert_eq!(n, 2);
}

#[test]
fn empty_sweep_succeeds_with_an_empty_table() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::load(&configs().join("sweep_geometric.toml")).unwrap();
    cfg.experiment.offsets.clear();
    let path = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("out");
    let o = pblab(&["sweep", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let n = csv::Reader::from_path(run_dirs(&out)[0].join("sweep.csv")).unwrap().records().count();
    assert_eq!(n, 0);
}

#[test]
fn commands_write_their_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("sublinear_forwards.toml");
    let c = cfg.to_str().unwrap();
    let o = out.to_str().unwrap();
    for args in [
        vec!["simulate", "--config", c, "--out", o, "--T", "5"],
        vec!["pullback", "--config", c, "--out", o],
        vec!["classify", "--config", c, "--out", o, "--offset", "-10"],
        vec!["forwards", "--config", c, "--out", o, "--T", "20"],
        vec!["liyorke", "--config", c, "--out", o, "--T", "10", "--plot"],
    ] {
        let r = pblab(&args);
        assert_eq!(code(&r), 0, "{args:?}: {}", text(&r));
    }
    let dirs = run_dirs(&out);
    assert_eq!(dirs.len(), 5);
    assert!(dirs.iter().any(|d| d.join("liyorke.svg").is_file()));
    assert!(dirs.iter().any(|d| d.join("classification.json").is_file()));
}
