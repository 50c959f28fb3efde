//! CLI acceptance: fixed-seed runs reproduce byte-identical artifacts
//! (criterion 10), spec'd exit codes, and artifact round-trips.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pcfilter")
}

struct Workdir(PathBuf);

impl Workdir {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!(
            "pcfilter-accept-{tag}-{}",
            std::process::id()
        ));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        Workdir(dir)
    }

    fn write(&self, name: &str, content: &str) -> PathBuf {
        let p = self.0.join(name);
        fs::write(&p, content).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}

impl Drop for Workdir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary should execute")
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut map = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        map.insert(
            entry.file_name().to_string_lossy().into_owned(),
            fs::read(entry.path()).unwrap(),
        );
    }
    map
}

fn assert_identical_runs(tag: &str, subcommand: &str, config: &Path, work: &Workdir) {
    let out_a = work.path(&format!("{tag}-a"));
    let out_b = work.path(&format!("{tag}-b"));
    for out in [&out_a, &out_b] {
        let status = run(&[
            subcommand,
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(
            status.status.success(),
            "{subcommand} failed: {}",
            String::from_utf8_lossy(&status.stderr)
        );
    }
    let a = dir_contents(&out_a);
    let b = dir_contents(&out_b);
    assert_eq!(
        a.keys().collect::<Vec<_>>(),
        b.keys().collect::<Vec<_>>(),
        "{subcommand}: artifact sets differ"
    );
    for (name, bytes) in &a {
        assert_eq!(
            bytes, &b[name],
            "{subcommand}: artifact {name} differs between identical runs"
        );
    }
    assert!(!a.is_empty(), "{subcommand} produced no artifacts");
}

const WEIGHTS_ONE: &str = "blocked 1\n1 0\n";

#[test]
fn criterion_10_byte_identical_artifacts() {
    let work = Workdir::new("determinism");
    work.write("weights.txt", WEIGHTS_ONE);

    let factorize = work.write(
        "factorize.cfg",
        "K = 1\nF = 64\nL = 1\nf = ma(1.0, 0.5)\nseed = 5\n",
    );
    assert_identical_runs("factorize", "factorize", &factorize, &work);

    let filter = work.write(
        "filter.cfg",
        "K = 1\nF = 64\nL = 1\nLb = 24\nf = ma(1.0, 0.5)\ng = white(1.0)\nweights = weights.txt\nroute = via_g\nseed = 5\n",
    );
    assert_identical_runs("filter", "filter", &filter, &work);

    let minimax = work.write(
        "minimax.cfg",
        "K = 1\nF = 128\nL = 2\nLb = 32\nweights = weights.txt\np = 1.0\nq = 1.0\nmode = full\nopt_order = 2\nrestarts = 2\nsolver_iters = 30\nprobes = 50\nseed = 5\n",
    );
    assert_identical_runs("minimax", "minimax", &minimax, &work);

    let simulate = work.write(
        "simulate.cfg",
        "K = 1\nF = 64\nL = 1\nf = ma(1.0, 0.5)\ng = white(0.5)\nhorizon = 8\nn_paths = 2\nseed = 5\n",
    );
    assert_identical_runs("simulate", "simulate", &simulate, &work);
    // simulated artifacts round-trip through the blocked parser
    let obs =
        pcfilter::textio::read_blocked_file(&work.path("simulate-a").join("observations_p0.txt"))
            .unwrap();
    assert_eq!(obs.k, 1);
    assert_eq!(obs.blocks.len(), 8);

    let verify = work.write(
        "verify.cfg",
        "K = 1\nF = 256\nL = 1\nLb = 48\nf = ma(1.0, 0.5)\ng = white(1.0)\nweights = weights.txt\noracle_horizon = 40\nmc_paths = 2000\nseed = 5\n",
    );
    assert_identical_runs("verify", "verify", &verify, &work);

    println!("criterion 10 (deterministic artifacts): PASS — all five subcommands byte-identical under a fixed seed");
}

#[test]
fn filter_reports_the_hand_value_on_the_white_problem() {
    let work = Workdir::new("white");
    work.write("weights.txt", WEIGHTS_ONE);
    let cfg = work.write(
        "problem.cfg",
        "K = 1\nF = 64\nL = 0\nLb = 8\nf = white(1.0)\ng = white(1.0)\nweights = weights.txt\nseed = 1\n",
    );
    let out = work.path("out");
    let result = run(&[
        "filter",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--json-like",
    ]);
    assert!(result.status.success());
    let report = pcfilter::textio::read_report_file(&out.join("filter.report.txt")).unwrap();
    let delta: f64 = report
        .iter()
        .find(|(k, _)| k == "delta")
        .map(|(_, v)| v.parse().unwrap())
        .expect("report has delta");
    assert!((delta - 0.5).abs() < 1e-10, "delta = {delta}");

    // artifacts round-trip through their own parsers
    let h = pcfilter::textio::read_blocked_file(&out.join("h.txt")).unwrap();
    assert_eq!(h.blocks.len(), 1);
    assert!((h.blocks[0][0] - pcfilter::C64::new(0.5, 0.0)).norm() < 1e-10);

    // machine mode: bare key=value lines
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.lines().any(|l| l == "route=via_g"), "{stdout}");
    assert!(stdout.lines().all(|l| !l.starts_with('#')));
}

#[test]
fn verify_agrees_on_the_white_problem() {
    let work = Workdir::new("verify");
    work.write("weights.txt", WEIGHTS_ONE);
    let cfg = work.write(
        "problem.cfg",
        "K = 1\nF = 64\nL = 0\nLb = 8\nf = white(1.0)\ng = white(1.0)\nweights = weights.txt\noracle_horizon = 20\nmc_paths = 4000\nseed = 2\n",
    );
    let out = work.path("out");
    let result = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let report = pcfilter::textio::read_report_file(&out.join("verify.report.txt")).unwrap();
    let verdicts: Vec<&(String, String)> =
        report.iter().filter(|(k, _)| k.starts_with("check_")).collect();
    assert_eq!(verdicts.len(), 5);
    assert!(verdicts.iter().all(|(_, v)| v == "pass"), "{verdicts:?}");
}

#[test]
fn factor_file_sources_and_class_files_are_accepted() {
    let work = Workdir::new("sources");
    work.write("weights.txt", WEIGHTS_ONE);
    // factor polynomial artifact: scalar (1, 0.5)
    work.write("factor.txt", "ma 1 1 1\n1 0\n0.5 0\n");
    let cfg = work.write(
        "problem.cfg",
        "K = 1\nF = 64\nL = 1\nf = mafile:factor.txt\nseed = 4\n",
    );
    let out = work.path("out");
    let result = run(&[
        "factorize",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let d = pcfilter::textio::read_ma_file(&out.join("d.ma.txt")).unwrap();
    assert!((d.coeff(0)[(0, 0)] - pcfilter::C64::new(1.0, 0.0)).norm() < 1e-8);
    assert!((d.coeff(1)[(0, 0)] - pcfilter::C64::new(0.5, 0.0)).norm() < 1e-8);

    // moment class supplied as its own file
    work.write("class.txt", "K = 1\np = 1.0\nq = 1.0\n");
    let cfg = work.write(
        "minimax.cfg",
        "K = 1\nF = 128\nL = 2\nLb = 32\nweights = weights.txt\nclass = class.txt\nopt_order = 2\nrestarts = 1\nsolver_iters = 20\nprobes = 20\nseed = 9\n",
    );
    let out2 = work.path("out2");
    let result = run(&[
        "minimax",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
        "--json-like",
    ]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("delta0=0.4999999999999999"), "{stdout}");
}

#[test]
fn minimax_given_f_mode_returns_certified_white_noise() {
    let work = Workdir::new("givenf");
    work.write("weights.txt", WEIGHTS_ONE);
    let cfg = work.write(
        "problem.cfg",
        "K = 1\nF = 128\nL = 2\nLb = 32\nf = white(1.0)\nweights = weights.txt\np = 1.0\nq = 0.7\nmode = given_f\nopt_order = 2\nrestarts = 2\nsolver_iters = 40\nprobes = 50\nseed = 9\n",
    );
    let out = work.path("out");
    let result = run(&[
        "minimax",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let report = pcfilter::textio::read_report_file(&out.join("minimax.report.txt")).unwrap();
    let get = |key: &str| {
        report
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .unwrap_or_else(|| panic!("report missing {key}"))
    };
    assert_eq!(get("certified"), "true");
    let delta0: f64 = get("delta0").parse().unwrap();
    assert!((delta0 - 0.7 / 1.7).abs() < 1e-8, "delta0 = {delta0}");
    // least favorable noise is white at its moment
    let g0 = pcfilter::textio::read_density_file(&out.join("g0.density.txt")).unwrap();
    for v in g0.values() {
        assert!((v[(0, 0)] - pcfilter::C64::new(0.7, 0.0)).norm() < 1e-6);
    }
}

#[test]
fn missing_weights_file_exits_3_and_names_the_file() {
    let work = Workdir::new("missing");
    let cfg = work.write(
        "problem.cfg",
        "K = 1\nF = 64\nL = 0\nf = white(1.0)\ng = white(1.0)\nweights = nowhere.txt\n",
    );
    let result = run(&["filter", "--config", cfg.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("nowhere.txt"), "{stderr}");
}

#[test]
fn domain_errors_exit_1() {
    let work = Workdir::new("domain");
    work.write("weights.txt", WEIGHTS_ONE);
    let cfg = work.write(
        "problem.cfg",
        "K = 1\nF = 64\nL = 0\nf = zero\ng = zero\nweights = weights.txt\n",
    );
    let result = run(&["filter", "--config", cfg.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&result.stderr).contains("positive"));
}

#[test]
fn bad_flags_exit_3() {
    let result = run(&["filter", "--no-such-flag"]);
    assert_eq!(result.status.code(), Some(3));
}

#[test]
fn unknown_config_key_is_rejected() {
    let work = Workdir::new("badkey");
    let cfg = work.write("problem.cfg", "K = 1\nbogus_key = 1\n");
    let result = run(&["factorize", "--config", cfg.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&result.stderr).contains("bogus_key"));
}
