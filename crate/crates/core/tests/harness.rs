use ehcs::harness::output::strip_header;
use ehcs::harness::*;

const MSE: &str = r#"
kind = "mse-sweep"
master_seed = 21
trials = 4

[network]
n = 64
p = 0.8

[network.power]
model = "truncated-gaussian"
mu = 0.2
d = 2

[sweep]
m = [20, 32]
k = [2, 3]
snr_db = [25, inf]
"#;

fn spec_of(kind: &str) -> ExperimentSpec {
    let text = match kind {
        "mse-sweep" => MSE.to_string(),
        "homog-vs-inhomog" => MSE.replace("mse-sweep", "homog-vs-inhomog"),
        "eig-cdf" => r#"
kind = "eig-cdf"
master_seed = 22
trials = 6
[network]
n = 40
p = 0.8
[network.power]
model = "truncated-gaussian"
mu = 0.2
[sweep]
d = [1, 2]
k = [2, 3]
supports = 50
"#
        .into(),
        "tail-scaling" => r#"
kind = "tail-scaling"
master_seed = 23
trials = 2000
[network]
p = 0.8
[network.power]
model = "truncated-gaussian"
mu = 0.2
[sweep]
k = [2, 3]
t = [0.2, 0.3]
d = [1]
n = [40, 60]
supports = 4
[tail]
batch = 500
"#
        .into(),
        "ld-verify" => r#"
kind = "ld-verify"
master_seed = 24
trials = 1000
[network]
p = 0.8
[network.power]
model = "truncated-gaussian"
mu = 0.2
[sweep]
k = [2]
t = [0.3]
d = [1]
n = [30, 60]
[tail]
batch = 500
"#
        .into(),
        "delay-curve" => r#"
kind = "delay-curve"
master_seed = 0
[network]
n = 500
p = 0.8
[network.power]
model = "truncated-gaussian"
mu = 0.2
d = 2
[sweep]
k = [5]
snr_db = [20, 30]
epsilon = { start = 0.001, stop = 1, points = 30, scale = "log" }
"#
        .into(),
        other => panic!("unknown kind {other}"),
    };
    ExperimentSpec::from_toml_str(&text).unwrap()
}

fn bodies(out: &RunOutput) -> Vec<String> {
    let mut names: Vec<String> = out.tables.iter().map(|t| t.name.clone()).collect();
    names.push("trials".into());
    names.iter().filter_map(|n| out.csv(n)).map(|c| strip_header(&c).to_string()).collect()
}

#[test]
fn csv_bodies_do_not_depend_on_workers() {
    for kind in ExperimentKind::ALL {
        let mut spec = spec_of(kind.as_str());
        spec.workers = 1;
        let one = run(&spec).unwrap();
        spec.workers = 3;
        let three = run(&spec).unwrap();
        assert_eq!(one.workers, 1);
        assert_eq!(bodies(&one), bodies(&three), "{kind}");
        assert!(!one.main().rows.is_empty(), "{kind}");
    }
}

#[test]
fn replay_reproduces_records_bit_for_bit() {
    for kind in ["mse-sweep", "homog-vs-inhomog", "eig-cdf"] {
        let spec = spec_of(kind);
        let out = run(&spec).unwrap();
        for r in out.records.iter().step_by(5) {
            let again = replay(&spec, r.grid_index, r.trial).unwrap();
            let twin = again.iter().find(|x| x.arm == r.arm).unwrap();
            assert_eq!(twin.mse.map(f64::to_bits), r.mse.map(f64::to_bits), "{kind}");
            assert_eq!(twin.rho_max.map(f64::to_bits), r.rho_max.map(f64::to_bits), "{kind}");
            assert_eq!(twin.seed, r.seed);
            assert_eq!(twin.iterations, r.iterations);
        }
    }
    let spec = spec_of("tail-scaling");
    let a = replay(&spec, 1, 17).unwrap();
    let b = replay(&spec, 1, 17).unwrap();
    assert_eq!(a[0].rho_max.unwrap().to_bits(), b[0].rho_max.unwrap().to_bits());
    assert!(replay(&spec_of("delay-curve"), 0, 0).is_err());
    assert!(replay(&spec, 999, 0).is_err());
}

#[test]
fn seed_changes_results() {
    let mut spec = spec_of("mse-sweep");
    let a = run(&spec).unwrap();
    spec.master_seed += 1;
    let b = run(&spec).unwrap();
    assert_ne!(bodies(&a), bodies(&b));
    assert_ne!(a.spec_hash, b.spec_hash);
}

#[test]
fn outputs_carry_headers_and_sidecar() {
    let spec = spec_of("eig-cdf");
    let out = run(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let main = dir.path().join("cdf.csv");
    let files = out.write(&main).unwrap();
    assert!(files.len() >= 3);
    for f in files.iter().filter(|f| f.extension().is_some_and(|e| e == "csv")) {
        let text = std::fs::read_to_string(f).unwrap();
        assert!(text.starts_with(&format!("# ehcs {TOOLKIT_VERSION}\n# kind: eig-cdf\n")));
        assert!(text.contains(&format!("# spec-sha256: {}\n", spec.spec_hash())));
        assert!(text.contains("# master-seed: 22\n"));
    }
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("cdf.json")).unwrap()).unwrap();
    assert_eq!(sidecar["kind"], "eig-cdf");
    assert_eq!(sidecar["master_seed"], 22);
    let trials = std::fs::read_to_string(dir.path().join("cdf.trials.csv")).unwrap();
    assert!(strip_header(&trials).starts_with(&TrialRecord::COLUMNS.join(",")));
}

#[test]
fn delay_table_marks_infinite_delays() {
    let out = run(&spec_of("delay-curve")).unwrap();
    let csv = out.csv("main").unwrap();
    assert!(csv.lines().any(|l| l.ends_with(",inf")));
    let eps = out.main().column("epsilon");
    let th = out.main().column("epsilon_th");
    let delay = out.main().column("delay");
    for i in 0..eps.len() {
        if eps[i] <= th[i] {
            assert!(delay[i].is_infinite());
        }
    }
}

#[test]
fn config_errors_point_at_lines() {
    let cases = [
        (MSE.replace("p = 0.8", "p = 1.5"), 8),
        (MSE.replace("trials = 4", "trails = 4"), 4),
        (format!("{MSE}t = [0.1]\n"), 19),
        (MSE.replace("model = \"truncated-gaussian\"", "model = \"lognormal\""), 11),
    ];
    for (text, line) in cases {
        match ExperimentSpec::from_toml_str(&text) {
            Err(ehcs::Error::Config { line: l, message }) => assert_eq!(l, line, "{message}"),
            other => panic!("expected a config error, got {other:?}"),
        }
    }
    assert!(ExperimentSpec::from_toml_str(&MSE.replace("master_seed = 21\n", "")).is_err());
    assert!(ExperimentSpec::from_toml_str(&MSE.replace("k = [2, 3]", "k = [40]")).is_err());
}

#[test]
fn spec_hash_ignores_workers() {
    let mut spec = spec_of("mse-sweep");
    let h = spec.spec_hash();
    spec.workers = 7;
    assert_eq!(spec.spec_hash(), h);
}
