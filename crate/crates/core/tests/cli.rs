use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use structcorr::io::{parse_dataset, save_dataset, RunManifest};
use structcorr::sim::{apply_missingness, generate_dataset, Distribution, MissingnessSpec, Stage, TruthSpec};

fn structcorr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_structcorr"))
        .args(args)
        .env("STRUCTCORR_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn toy_data(path: &Path) {
    let truth = TruthSpec::preset(Stage::Early, Distribution::Normal, 25, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = generate_dataset(&truth, &mut rng).unwrap();
    let data = apply_missingness(&data, &MissingnessSpec::default_four(), &mut rng).unwrap();
    save_dataset(&data, path).unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn pd_interval_prints_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("params.txt");
    fs::write(&params, "L = 2\nJ = 2\neta.1.2 = 0.5\nrho.1 = 0.5\n").unwrap();
    let out = structcorr(&["pd-interval", p(&params), "gamma"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "-0.500000000000 0.866025403784");

    let json = dir.path().join("params.json");
    fs::write(&json, r#"{"L": 2, "J": 1, "eta.1.2": 0.3}"#).unwrap();
    let out = structcorr(&["pd-interval", p(&json), "eta.1.2"]);
    assert_eq!(stdout(&out).trim(), "-1.000000000000 1.000000000000");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Usage errors.
    assert_eq!(code(&structcorr(&[])), 1);
    assert_eq!(code(&structcorr(&["fit", "--bogus"])), 1);
    assert_eq!(code(&structcorr(&["--help"])), 0);

    // Validation errors.
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "L = 3\nJ = 1\neta.1.2 = 0.9\neta.1.3 = 0.9\neta.2.3 = -0.9\n").unwrap();
    assert_eq!(code(&structcorr(&["pd-interval", p(&bad), "eta.1.2"])), 2);
    assert_eq!(code(&structcorr(&["pd-interval", p(&dir.path().join("nope.txt")), "gamma"])), 2);
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&structcorr(&["fit", "--data", p(&empty), "--out", p(&out)])), 2);
    let late8 = structcorr(&[
        "simulate", "--truth", "late", "--times", "8", "--replicates", "2", "--out", p(&out),
    ]);
    assert_eq!(code(&late8), 2);
}

#[test]
fn fit_weights_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    toy_data(&data);
    let config = dir.path().join("config.txt");
    fs::write(&config, "iterations = 1200\nburn_in = 200\nchains = 4\nseed = 7\n").unwrap();
    let fit_dir = dir.path().join("fit");
    let out = structcorr(&["fit", "--data", p(&data), "--config", p(&config), "--out", p(&fit_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for c in 1..=4 {
        assert!(fit_dir.join(format!("draws_chain{c}.csv")).exists());
    }
    let diag = fs::read_to_string(fit_dir.join("diagnostics.csv")).unwrap();
    assert!(diag.starts_with("chain,parameter,acceptance_rate,pd_rate,final_kappa"));
    // 4 sds and 11 correlations per chain.
    assert_eq!(diag.lines().count(), 1 + 4 * 15);

    let manifest = RunManifest::load(&fit_dir.join("manifest.json")).unwrap();
    assert_eq!(manifest.command, "fit");
    assert_eq!(manifest.seed, 7);
    assert_eq!(manifest.config.iterations, 1200);
    assert_eq!(manifest.data_sha256.as_ref().unwrap().len(), 64);

    let header = fs::read_to_string(fit_dir.join("draws_chain1.csv")).unwrap();
    let first = header.lines().next().unwrap();
    assert!(first.starts_with("iteration,mu.1,mu.2,mu.3,mu.4,sd.1"));
    assert!(first.ends_with("rho.4,gamma"));
    assert_eq!(header.lines().count(), 1 + 1000);

    let weights = dir.path().join("weights.csv");
    let bary = dir.path().join("bary.csv");
    let out = structcorr(&[
        "weights", "--draws", p(&fit_dir), "--out", p(&weights), "--barycentric", p(&bary),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&weights).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "quantity,estimate,lower,upper");
    assert!(rows[1].starts_with("w.SOL,") && rows[4].starts_with("w.DEL,"));
    assert!(rows.iter().any(|r| r.starts_with("SRM_opt,")));
    assert!(rows.iter().any(|r| r.starts_with("SRM_equal,")));
    let sum: f64 = rows[1..5]
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((sum - 1.0).abs() < 1e-9);
    assert_eq!(fs::read_to_string(&bary).unwrap().lines().count(), 1 + 4000);

    // Replay reproduces every draw file bitwise.
    let replay_dir = dir.path().join("replay");
    let out = structcorr(&[
        "fit", "--replay", p(&fit_dir.join("manifest.json")), "--out", p(&replay_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for c in 1..=4 {
        let name = format!("draws_chain{c}.csv");
        assert_eq!(fs::read(fit_dir.join(&name)).unwrap(), fs::read(replay_dir.join(&name)).unwrap());
    }

    // A changed data file is refused.
    let mut bytes = fs::read(&data).unwrap();
    bytes.extend_from_slice(b"zz,1,1,1,1,1\n");
    fs::write(&data, bytes).unwrap();
    let out = structcorr(&["fit", "--replay", p(&fit_dir.join("manifest.json")), "--out", p(&replay_dir)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn simulate_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let miss = dir.path().join("miss.txt");
    fs::write(&miss, "column_probs = 0.05, 0.05, 0.75, 0.75\nrow_dist = 0.1, 0.6, 0.1, 0.2\n").unwrap();
    let out = structcorr(&[
        "simulate", "--truth", "non", "--dist", "t10", "--miss", p(&miss), "--replicates", "3",
        "--subjects", "20", "--times", "2", "--iterations", "600", "--burn-in", "100", "--chains", "2",
        "--out", p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let opchar = fs::read_to_string(out_dir.join("opchar.csv")).unwrap();
    let rows: Vec<&str> = opchar.lines().collect();
    assert_eq!(rows[0], "quantity,truth,coverage,bias,rmse");
    assert_eq!(rows.len(), 1 + 5);
    assert!(rows[5].starts_with("SRM,"));
    let diag = fs::read_to_string(out_dir.join("diagnostics.csv")).unwrap();
    assert!(diag.starts_with("parameter,acceptance_rate,pd_rate"));
    assert_eq!(fs::read_to_string(out_dir.join("replicates.csv")).unwrap().lines().count(), 4);
    let manifest = RunManifest::load(&out_dir.join("manifest.json")).unwrap();
    assert_eq!(manifest.extra["distribution"], "t10");
}

#[test]
fn written_dataset_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    toy_data(&path);
    let a = parse_dataset(&path).unwrap();
    let copy = dir.path().join("e.csv");
    save_dataset(&a, &copy).unwrap();
    assert_eq!(parse_dataset(&copy).unwrap(), a);
}
