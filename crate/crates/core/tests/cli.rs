use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dynsync::signal::{read_measurements, read_signal, write_measurements, write_signal};

fn dynsync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynsync")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bad_config_exits_with_2() {
    for args in [
        &["sweep-t", "--n", "1"][..],
        &["sweep-t", "--runs", "0"],
        &["sweep-t", "--estimators", "nope"],
        &["sweep-t", "--selection", "fixed-tau=x"],
        &["sweep-noise", "--model", "outliers", "--eta", "1.5"],
    ] {
        assert_eq!(dynsync(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn config_file_errors_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "n = 5\nbogus line\n").unwrap();
    let out = dynsync(&["sweep-t", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "n = 4\nt = 3\nt = 5\nruns = 1\nestimators = naive-spectral\nsigma = 0.5\n").unwrap();
    let out = dynsync(&["sweep-t", "--config", path(&cfg), "--n", "6", "--seed", "3"]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.contains("# n = 6\n"));
    assert!(csv.contains("# t = 3,5\n"));
    assert!(csv.contains("# seed = 3\n"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("run,")).count(), 2);
}

#[test]
fn sweeps_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = ["--n", "5", "--t", "4,6", "--runs", "2", "--sigma", "0,1", "--seed", "11"];
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        let mut full = vec!["sweep-noise", "--out", path(out), "--threads", threads];
        full.extend(args);
        assert!(dynsync(&full).status.success());
    }
    let (ta, tb) = (fs::read_to_string(&a).unwrap(), fs::read_to_string(&b).unwrap());
    assert_eq!(ta.lines().filter(|l| !l.starts_with("# threads")).collect::<Vec<_>>(), tb.lines().filter(|l| !l.starts_with("# threads")).collect::<Vec<_>>());
}

#[test]
fn noiseless_rows_are_exact_under_oracle_selection() {
    let out = dynsync(&["sweep-noise", "--n", "6", "--t", "10", "--runs", "2", "--sigma", "0", "--selection", "oracle"]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    for line in csv.lines().filter(|l| l.starts_with("run,")) {
        let f: Vec<&str> = line.split(',').collect();
        if f[3] != "naive-spectral" && f[3] != "gtrs" {
            assert_eq!(f[7], "10", "{line}");
        }
        if f[3] != "naive-spectral" {
            assert!(f[9].parse::<f64>().unwrap() < 1e-6, "{line}");
        }
    }
}

#[test]
fn generate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    assert!(dynsync(&["generate", "--n", "6", "--t", "8", "--sigma", "0.3", "--seed", "2", "--out", d]).status.success());
    let meas = dir.path().join("measurements.csv");
    let truth = dir.path().join("truth.csv");
    let est = dir.path().join("est.csv");
    let out = dynsync(&[
        "estimate", "--input", path(&meas), "--truth", path(&truth), "--estimators", "gmd-ltrs", "--selection", "oracle", "--out", path(&est),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rmse="));
    let g = read_signal(fs::File::open(&est).map(std::io::BufReader::new).unwrap()).unwrap();
    assert_eq!((g.n(), g.t()), (6, 8));
    let bad = dynsync(&["estimate", "--input", path(&meas), "--estimators", "ltrs-gs", "--selection", "oracle"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn ppm_bench_has_a_delta_column() {
    let out = dynsync(&["ppm-bench", "--n", "4", "--t", "3", "--runs", "1", "--sigma", "0.5", "--ppm-inits", "naive-spectral,ltrs-gs"]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.split(',').any(|c| c == "delta"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("run,")).count(), 2);
}

#[test]
fn files_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    assert!(dynsync(&["generate", "--model", "outliers", "--n", "5", "--t", "4", "--eta", "0.3", "--p", "0.7", "--out", path(dir.path())]).status.success());
    let open = |name: &str| std::io::BufReader::new(fs::File::open(dir.path().join(name)).unwrap());
    let a = read_measurements(open("measurements.csv")).unwrap();
    let g = read_signal(open("truth.csv")).unwrap();
    let (mut wa, mut wg) = (Vec::new(), Vec::new());
    write_measurements(&mut wa, &a).unwrap();
    write_signal(&mut wg, &g).unwrap();
    assert_eq!(read_measurements(&wa[..]).unwrap(), a);
    assert_eq!(read_signal(&wg[..]).unwrap(), g);
    assert_eq!(wa, fs::read(dir.path().join("measurements.csv")).unwrap());
}

#[test]
fn selftest_passes() {
    let out = dynsync(&["selftest"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}
