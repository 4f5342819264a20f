//! End-to-end checks of the installed binary: artifact schemas, the
//! determinism contract, CSV canonicalization, and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_easvar"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// report.json minus its only nondeterministic line.
fn strip_timestamp(text: &str) -> String {
    text.lines()
        .filter(|line| !line.contains("\"timestamp\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn write(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path
}

const SELECT_CONFIG: &str = "# deterministic fixture\n\
    seed = 4\n\
    steps = 400\n\
    burn_in = 120\n\
    mass_draws = 60\n\
    output_dir = out\n\
    dot_threshold = 0.1\n";

#[test]
fn simulate_writes_states_and_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "simulate", "--pattern", "band", "--p", "3", "--n", "60", "--seed", "11",
            "--output", "data.csv", "--truth", "truth.json",
        ],
    );
    assert_code(&out, 0);

    let csv = fs::read_to_string(tmp.path().join("data.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 62, "header plus n+1 states");
    assert_eq!(lines[0], "x1,x2,x3");
    assert_eq!(lines[1], "0,0,0", "zero initial state");

    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth["pattern"], "band");
    assert_eq!(truth["a0"].as_array().unwrap().len(), 3);
    let graph: Vec<u64> = truth["graph"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert!(!graph.is_empty());
    assert!(graph.iter().all(|&i| (1..=9).contains(&i)));
}

#[test]
fn select_emits_consistent_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = run_in(
        tmp.path(),
        &[
            "simulate", "--pattern", "band", "--p", "3", "--n", "60", "--seed", "11",
            "--output", "data.csv",
        ],
    );
    assert_code(&sim, 0);
    write(tmp.path(), "run.cfg", SELECT_CONFIG);
    let out = run_in(
        tmp.path(),
        &["select", "--input", "data.csv", "--config", "run.cfg"],
    );
    assert_code(&out, 0);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["seed"], 4);
    assert_eq!(report["config"]["steps"], "400");
    assert_eq!(report["config"]["dot_threshold"], "0.1");
    assert!(!report["map_graph"].as_array().unwrap().is_empty());
    assert_eq!(report["map_graph_size"], report["map_graph"].as_array().unwrap().len());

    let inclusion = report["inclusion"].as_array().unwrap();
    assert_eq!(inclusion.len(), 3);
    for row in inclusion {
        for cell in row.as_array().unwrap() {
            let v = cell.as_f64().unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }
    let total: f64 = report["visits"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["frequency"].as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9, "visit frequencies sum to 1");
    assert!(report["metrics"]["l2_err"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["conditions"]["cond1_threshold"], 8.0);
    assert!(report["notes"]
        .as_array()
        .unwrap()
        .iter()
        .any(|n| n.as_str().unwrap().contains("conditions 4-5")));

    let dot = fs::read_to_string(tmp.path().join("out/inclusion.dot")).unwrap();
    assert!(dot.starts_with("digraph inclusion {"));
    assert!(dot.contains("\"x1\""));

    let metrics = fs::read_to_string(tmp.path().join("out/metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,l2_err,lf_err,est_err,g_size,fpr,fnr,r_hat_go,map_equals_oracle"
    );
    assert!(lines.next().unwrap().starts_with("eas,"));
}

#[test]
fn equal_configs_and_echoed_configs_reproduce_reports() {
    let base = tempfile::tempdir().unwrap();
    let data = base.path().join("data.csv");
    let sim = run_in(
        base.path(),
        &[
            "simulate", "--pattern", "random", "--p", "3", "--n", "50", "--seed", "21",
            "--output", "data.csv",
        ],
    );
    assert_code(&sim, 0);
    let data_flag = data.to_str().unwrap();

    let run_a = tempfile::tempdir().unwrap();
    let run_b = tempfile::tempdir().unwrap();
    for dir in [&run_a, &run_b] {
        write(dir.path(), "run.cfg", SELECT_CONFIG);
        let out = run_in(
            dir.path(),
            &["select", "--input", data_flag, "--config", "run.cfg"],
        );
        assert_code(&out, 0);
    }
    let report_a = fs::read_to_string(run_a.path().join("out/report.json")).unwrap();
    let report_b = fs::read_to_string(run_b.path().join("out/report.json")).unwrap();
    assert_eq!(
        strip_timestamp(&report_a),
        strip_timestamp(&report_b),
        "equal configs must give byte-identical reports modulo timestamp"
    );
    assert_eq!(
        fs::read(run_a.path().join("out/inclusion.dot")).unwrap(),
        fs::read(run_b.path().join("out/inclusion.dot")).unwrap()
    );
    assert_eq!(
        fs::read(run_a.path().join("out/metrics.csv")).unwrap(),
        fs::read(run_b.path().join("out/metrics.csv")).unwrap()
    );

    // Feeding the echoed config back reproduces the run.
    let report: serde_json::Value = serde_json::from_str(&report_a).unwrap();
    let echoed: String = report["config"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| format!("{k} = {}\n", v.as_str().unwrap()))
        .collect();
    let run_c = tempfile::tempdir().unwrap();
    write(run_c.path(), "echo.cfg", &echoed);
    let out = run_in(
        run_c.path(),
        &["select", "--input", data_flag, "--config", "echo.cfg"],
    );
    assert_code(&out, 0);
    let report_c = fs::read_to_string(run_c.path().join("out/report.json")).unwrap();
    assert_eq!(strip_timestamp(&report_a), strip_timestamp(&report_c));
}

#[test]
fn ingest_differences_prepend_zero_state() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "raw.csv", "a,b\n1,2\n3,5\n6,9\n");
    let out = run_in(
        tmp.path(),
        &["ingest", "--input", "raw.csv", "--difference", "--output", "diff.csv"],
    );
    assert_code(&out, 0);
    assert_eq!(
        fs::read_to_string(tmp.path().join("diff.csv")).unwrap(),
        "a,b\n0,0\n2,3\n3,4\n"
    );
}

#[test]
fn ingest_reexport_is_canonical_and_lossless() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "raw.csv",
        "s1,s2\n0.1,17\n1e-7,-3.25\n0.30000000000000004,2.5\n",
    );
    let first = run_in(
        tmp.path(),
        &["ingest", "--input", "raw.csv", "--output", "canon.csv"],
    );
    assert_code(&first, 0);
    let canon = fs::read_to_string(tmp.path().join("canon.csv")).unwrap();
    // Values survive bit-exactly in canonical text.
    assert_eq!(canon, "s1,s2\n0.1,17\n0.0000001,-3.25\n0.30000000000000004,2.5\n");

    // Canonical text is a fixed point of ingestion.
    let second = run_in(
        tmp.path(),
        &["ingest", "--input", "canon.csv", "--output", "again.csv"],
    );
    assert_code(&second, 0);
    assert_eq!(
        fs::read(tmp.path().join("canon.csv")).unwrap(),
        fs::read(tmp.path().join("again.csv")).unwrap()
    );

    // Without --output the canonical form goes to stdout.
    let stdout = run_in(tmp.path(), &["ingest", "--input", "raw.csv"]);
    assert_code(&stdout, 0);
    assert_eq!(String::from_utf8_lossy(&stdout.stdout), canon);
}

#[test]
fn check_reports_condition_and_note() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = run_in(
        tmp.path(),
        &[
            "simulate", "--pattern", "band", "--p", "4", "--n", "100", "--seed", "3",
            "--output", "data.csv",
        ],
    );
    assert_code(&sim, 0);
    let out = run_in(tmp.path(), &["check", "--input", "data.csv"]);
    assert_code(&out, 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("condition 1: value"));
    assert!(text.contains("conditions 4-5: informational"));
}

#[test]
fn bench_tabulates_methods_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "bench.cfg",
        "seed = 5\nsteps = 200\nburn_in = 50\nmass_draws = 40\n",
    );
    let args = [
        "bench", "--design", "p=3,n=40,pattern=band,seeds=2", "--methods", "oracle,eas,enet",
        "--config", "bench.cfg",
    ];
    let out = run_in(tmp.path(), &args);
    assert_code(&out, 0);

    let csv = fs::read_to_string(tmp.path().join("bench.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 7, "header plus 2 seeds x 3 methods");
    assert!(lines[0].starts_with("seed_index,method,l2_err"));
    assert!(lines[1].starts_with("0,oracle,"));
    assert!(lines[2].starts_with("0,eas,"));

    let table: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("bench.json")).unwrap()).unwrap();
    assert_eq!(table["rows"].as_array().unwrap().len(), 2);

    let summary = String::from_utf8_lossy(&out.stdout);
    assert!(summary.contains("condition 1"));
    assert!(summary.contains("map=oracle"));

    // No timestamps anywhere: a rerun is byte-identical.
    let json_first = fs::read(tmp.path().join("bench.json")).unwrap();
    let rerun = run_in(tmp.path(), &args);
    assert_code(&rerun, 0);
    assert_eq!(fs::read(tmp.path().join("bench.json")).unwrap(), json_first);
}

#[test]
fn monthly_price_shaped_files_parse_and_check() {
    // Two 144-row splits of eight positive, drifting series: the shape of a
    // monthly closing-price export. Differencing makes them usable.
    let tmp = tempfile::tempdir().unwrap();
    for split in 0..2u64 {
        let mut state = 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(split + 1);
        let mut step = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut prices = [50.0f64; 8];
        let mut text = String::from("s1,s2,s3,s4,s5,s6,s7,s8\n");
        for _ in 0..144 {
            let row: Vec<String> = prices.iter().map(|v| format!("{v:.2}")).collect();
            text.push_str(&row.join(","));
            text.push('\n');
            for price in &mut prices {
                *price += 4.0 * step() - 1.9;
            }
        }
        let name = format!("prices{split}.csv");
        write(tmp.path(), &name, &text);
        let out = run_in(tmp.path(), &["check", "--input", &name, "--difference"]);
        assert_code(&out, 0);
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(stdout.contains("p = 8, transitions n = 143"), "{stdout}");
        assert!(stdout.contains("condition 1: value"));
    }
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    let tmp = tempfile::tempdir().unwrap();

    // 2: malformed cell.
    write(tmp.path(), "bad.csv", "a,b\n1,2\n3,oops\n");
    let out = run_in(tmp.path(), &["ingest", "--input", "bad.csv"]);
    assert_code(&out, 2);

    // 2: too short to use.
    write(tmp.path(), "short.csv", "a,b\n1,2\n");
    let out = run_in(tmp.path(), &["check", "--input", "short.csv"]);
    assert_code(&out, 2);
    write(tmp.path(), "short3.csv", "a,b\n1,2\n3,4\n");
    let out = run_in(
        tmp.path(),
        &["check", "--input", "short3.csv", "--difference"],
    );
    assert_code(&out, 2);

    // 2: missing file surfaces as unreadable input.
    let out = run_in(tmp.path(), &["check", "--input", "nope.csv"]);
    assert_code(&out, 2);

    // 3: degenerate data admits no graph with positive mass.
    let constant = format!("a,b\n{}", "1,1\n".repeat(12));
    write(tmp.path(), "flat.csv", &constant);
    let out = run_in(tmp.path(), &["select", "--input", "flat.csv"]);
    assert_code(&out, 3);

    // 4: unknown config key.
    write(tmp.path(), "bad.cfg", "frobs = 1\n");
    write(tmp.path(), "ok.csv", "a,b\n1,2\n2,1\n1,3\n4,1\n");
    let out = run_in(
        tmp.path(),
        &["select", "--input", "ok.csv", "--config", "bad.cfg"],
    );
    assert_code(&out, 4);

    // 4: duplicate config key.
    write(tmp.path(), "dup.cfg", "steps = 5\nsteps = 6\n");
    let out = run_in(
        tmp.path(),
        &["select", "--input", "ok.csv", "--config", "dup.cfg"],
    );
    assert_code(&out, 4);
}
