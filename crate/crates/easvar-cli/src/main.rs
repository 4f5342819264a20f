//! Command-line surface for VAR(1) graph selection.
//!
//! Five subcommands cover the working loop: `simulate` writes a synthetic
//! series, `select` runs the admissible-subset chain on a CSV and emits a
//! JSON report plus DOT inclusion graph, `check` reports the one condition
//! verifiable from data alone, `bench` scores methods over seeded
//! replicates, and `ingest` canonicalizes a CSV.
//!
//! Exit codes: 0 success, 2 input parse error, 3 numerical degeneracy,
//! 4 configuration error. All randomness flows from the single `seed`
//! key, so equal configurations give byte-identical reports up to the
//! timestamp field.
//!
//! CSV convention: header row of series names, one row per time instant,
//! columns in series order; the matrix is transposed internally so columns
//! become time. `--difference` replaces each row with its change from the
//! previous row and prepends the zero initial state.

mod config;

use std::error::Error;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use easvar::baselines::enet_var;
use easvar::bench::{
    check_condition1, compute_metrics, mean_se, run_experiment, ConditionReport, Design,
    ExperimentTable, Method, MetricRecord, ASYMPTOTIC_NOTE, COND1_PRACTICAL_THRESHOLD,
};
use easvar::eas::calibrate_d;
use easvar::gimh::run_chain;
use easvar::model::simulate_var;
use easvar::patterns::{generate_pattern, PatternKind};
use easvar::report::{inclusion_dot, RunReport};
use easvar::{EasError, EasParams, NoiseScale, TimeSeriesData};
use ndarray::Array2;

use crate::config::{ConfigError, Overrides, RunSettings};

#[derive(Parser)]
#[command(
    name = "easvar",
    version,
    about = "Graph selection for stable VAR(1) models via epsilon-admissible subsets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a sparse stable VAR(1) and write the series as CSV.
    Simulate {
        /// Sparsity pattern: band, cluster, hub, random, or scale-free.
        #[arg(long, default_value = "random")]
        pattern: String,
        /// Number of series.
        #[arg(long)]
        p: usize,
        /// Number of transitions; the CSV gets n+1 rows including the zero
        /// initial state.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        output: PathBuf,
        /// Optional JSON dump of the generating matrix and graph.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run graph selection on a CSV series and write report artifacts.
    Select {
        /// Input CSV (header row, one row per time instant).
        #[arg(long)]
        input: PathBuf,
        /// Flat key = value config file; flags below override its keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// First-difference the series before fitting.
        #[arg(long)]
        difference: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        /// Importance draws per mass estimate.
        #[arg(long)]
        mass_draws: Option<usize>,
        /// Residual floor; 0 calibrates it from the elastic-net baseline.
        #[arg(long)]
        d: Option<f64>,
        /// Smallest inclusion probability drawn in inclusion.dot.
        #[arg(long)]
        dot_threshold: Option<f64>,
    },
    /// Report the finite-sample identifiability condition of a CSV series.
    Check {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        difference: bool,
    },
    /// Score selection methods on synthetic replicates and tabulate.
    Bench {
        /// Replicate layout, e.g. p=4,n=120,pattern=random,seeds=20.
        #[arg(long, default_value = "p=4,n=120,pattern=random,seeds=20")]
        design: String,
        /// Comma list among oracle, eas, lasso, enet; default all four.
        #[arg(long)]
        methods: Option<String>,
        /// Flat key = value config file for chain and baseline knobs.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Base seed; replicate seeds derive from it.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Parse a CSV, canonicalize the numbers, and re-export it.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        difference: bool,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Input data failure: malformed CSV payload. Exits with the parse error
/// code.
#[derive(Debug)]
struct ParseError(String);

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse: {}", self.0)
    }
}

impl Error for ParseError {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 4;
    }
    if let Some(e) = err.downcast_ref::<EasError>() {
        return match e {
            EasError::InvalidParameter(_) => 4,
            EasError::DimensionMismatch(_) => 2,
            EasError::RankDeficient { .. } | EasError::Degenerate(_) => 3,
        };
    }
    if err.downcast_ref::<ParseError>().is_some() || err.downcast_ref::<csv::Error>().is_some() {
        return 2;
    }
    1
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Simulate {
            pattern,
            p,
            n,
            seed,
            output,
            truth,
        } => cmd_simulate(&pattern, p, n, seed, &output, truth.as_deref()),
        Command::Select {
            input,
            config,
            output_dir,
            difference,
            seed,
            steps,
            burn_in,
            mass_draws,
            d,
            dot_threshold,
        } => {
            let flags = Overrides {
                seed,
                difference,
                output_dir,
                dot_threshold,
                d,
                steps,
                burn_in,
                mass_draws,
            };
            let settings = load_settings(config.as_deref(), &flags)?;
            cmd_select(&input, &settings)
        }
        Command::Check { input, difference } => cmd_check(&input, difference),
        Command::Bench {
            design,
            methods,
            config,
            seed,
            output_dir,
        } => {
            let flags = Overrides {
                seed,
                output_dir,
                ..Overrides::default()
            };
            let settings = load_settings(config.as_deref(), &flags)?;
            cmd_bench(&design, methods.as_deref(), &settings)
        }
        Command::Ingest {
            input,
            difference,
            output,
        } => cmd_ingest(&input, difference, output.as_deref()),
    }
}

fn load_settings(path: Option<&Path>, flags: &Overrides) -> anyhow::Result<RunSettings> {
    let text = match path {
        Some(p) => Some(
            fs::read_to_string(p)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?,
        ),
        None => None,
    };
    Ok(RunSettings::from_sources(text.as_deref(), flags)?)
}

fn cmd_simulate(
    pattern: &str,
    p: usize,
    n: usize,
    seed: u64,
    output: &Path,
    truth: Option<&Path>,
) -> anyhow::Result<()> {
    let kind: PatternKind = pattern.parse()?;
    let (a0, g_o) = generate_pattern(kind, p, seed)?;
    let data = simulate_var(&a0, &NoiseScale::identity(p)?, n, seed)?;
    let names: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    let file = fs::File::create(output)
        .with_context(|| format!("cannot create {}", output.display()))?;
    export_csv(&names, &data, file)?;
    if let Some(path) = truth {
        let rows: Vec<Vec<f64>> = a0.matrix().outer_iter().map(|r| r.to_vec()).collect();
        let doc = serde_json::json!({
            "pattern": kind.to_string(),
            "p": p,
            "n": n,
            "seed": seed,
            "a0": rows,
            "graph": g_o.vec_indices(),
        });
        fs::write(path, serde_json::to_string_pretty(&doc)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    println!(
        "wrote {} series, {} states ({} transitions) to {}",
        p,
        n + 1,
        n,
        output.display()
    );
    Ok(())
}

fn cmd_select(input: &Path, settings: &RunSettings) -> anyhow::Result<()> {
    let (names, data) = ingest_csv(input, settings.difference)?;
    let (_, baseline) = enet_var(&data, &settings.enet)?;
    let d = if settings.eas.d > 0.0 {
        settings.eas.d
    } else {
        calibrate_d(&data, &baseline)?
    };
    let params = EasParams {
        d,
        ..settings.eas.clone()
    };
    let result = run_chain(&data, &params, &settings.chain)?;

    // No held-out window on user data, so the fit metrics are in-sample.
    let metrics = compute_metrics(
        &data,
        &result.a_bma.view(),
        Some(&result.map_graph),
        None,
        Some(&result),
    )?;
    let (cond1_value, cond1_pass) = check_condition1(&data);

    let mut report = RunReport::from_chain(&result, settings.seed, settings.echo());
    report.metrics = Some(metrics.clone());
    report.conditions = Some(ConditionReport {
        cond1_value,
        cond1_threshold: COND1_PRACTICAL_THRESHOLD,
        cond1_pass,
        cond2_pass: None,
        cond3_pass: None,
    });
    report.notes.push("fit metrics are in-sample".to_string());
    report.notes.push(ASYMPTOTIC_NOTE.to_string());

    let dir = &settings.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    fs::write(dir.join("report.json"), report.to_json()?)?;
    let dot = inclusion_dot(
        &result.inclusion.view(),
        Some(&names),
        settings.dot_threshold,
    )?;
    fs::write(dir.join("inclusion.dot"), dot)?;
    let file = fs::File::create(dir.join("metrics.csv"))?;
    write_metrics_csv(&[("eas".to_string(), metrics)], file)?;

    println!(
        "MAP graph: {} edges, vec indices {:?}",
        report.map_graph_size, report.map_graph
    );
    println!(
        "acceptance rate {:.3}; {} distinct graphs visited",
        report.acceptance_rate,
        report.visits.len()
    );
    println!(
        "condition 1: value {:.4} vs threshold {}: {}",
        cond1_value,
        COND1_PRACTICAL_THRESHOLD,
        verdict(cond1_pass)
    );
    println!(
        "wrote report.json, inclusion.dot, metrics.csv to {}",
        dir.display()
    );
    Ok(())
}

fn cmd_check(input: &Path, difference: bool) -> anyhow::Result<()> {
    let (names, data) = ingest_csv(input, difference)?;
    let (value, pass) = check_condition1(&data);
    println!(
        "series: {} (p = {}, transitions n = {})",
        names.join(", "),
        data.p(),
        data.n()
    );
    println!(
        "condition 1: value {:.4} vs practical threshold {}: {}",
        value,
        COND1_PRACTICAL_THRESHOLD,
        verdict(pass)
    );
    println!("{ASYMPTOTIC_NOTE}");
    Ok(())
}

fn cmd_bench(
    design_spec: &str,
    methods_spec: Option<&str>,
    settings: &RunSettings,
) -> anyhow::Result<()> {
    let design = parse_design(design_spec, settings.seed)?;
    let methods = parse_methods(methods_spec)?;
    let table = run_experiment(
        &design,
        &methods,
        &settings.eas,
        &settings.chain,
        &settings.enet,
    )?;

    let dir = &settings.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    fs::write(dir.join("bench.json"), serde_json::to_string_pretty(&table)?)?;
    let file = fs::File::create(dir.join("bench.csv"))?;
    write_bench_csv(&table, file)?;

    println!(
        "design: p={} n={} pattern={} seeds={} base seed {}",
        design.p, design.n, design.pattern, design.seeds, design.base_seed
    );
    let failures = table.rows.iter().filter(|r| r.error.is_some()).count();
    if failures > 0 {
        println!("{failures} seed(s) failed; see the error column");
    }
    for method in &methods {
        let name = method.name();
        let mut line = format!(
            "{name:>6}: l2 {}, est err {}, fpr {}, fnr {}",
            fmt_stat(&table.metric_values(name, |r| Some(r.l2_err))),
            fmt_stat(&table.metric_values(name, |r| r.est_err)),
            fmt_stat(&table.metric_values(name, |r| r.fpr)),
            fmt_stat(&table.metric_values(name, |r| r.fnr)),
        );
        if let Some(rate) = table.map_match_rate(name) {
            line.push_str(&format!(", map=oracle {rate:.2}"));
        }
        println!("{line}");
    }
    let (c1_mean, c1_se) = mean_se(&table.cond1_values());
    println!("condition 1: value {c1_mean:.3} +- {c1_se:.3}");
    if let Some(rate) = table.cond2_pass_rate() {
        println!("condition 2: satisfied on {rate:.2} of seeds");
    }
    println!("{ASYMPTOTIC_NOTE}");
    println!("wrote bench.json, bench.csv to {}", dir.display());
    Ok(())
}

fn cmd_ingest(input: &Path, difference: bool, output: Option<&Path>) -> anyhow::Result<()> {
    let (names, data) = ingest_csv(input, difference)?;
    match output {
        Some(path) => {
            let file = fs::File::create(path)
                .with_context(|| format!("cannot create {}", path.display()))?;
            export_csv(&names, &data, file)?;
        }
        None => export_csv(&names, &data, std::io::stdout().lock())?,
    }
    Ok(())
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

/// Read a CSV of time rows into series columns. With `difference`, each
/// row becomes its change from the previous row and a zero initial state
/// is prepended, matching the model convention.
fn ingest_csv(path: &Path, difference: bool) -> anyhow::Result<(Vec<String>, TimeSeriesData)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let p = names.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(p);
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                ParseError(format!(
                    "{}: row {}, column {}: not a number: {cell:?}",
                    path.display(),
                    i + 2,
                    c + 1
                ))
            })?;
            if !value.is_finite() {
                return Err(ParseError(format!(
                    "{}: row {}, column {}: non-finite value {cell:?}",
                    path.display(),
                    i + 2,
                    c + 1
                ))
                .into());
            }
            row.push(value);
        }
        rows.push(row);
    }
    let t = rows.len();
    let usable = if difference { t.saturating_sub(1) } else { t };
    if usable < 2 {
        return Err(ParseError(format!(
            "{}: fewer than 2 usable time points",
            path.display()
        ))
        .into());
    }
    let mut series = Array2::zeros((p, t));
    if difference {
        for i in 1..t {
            for j in 0..p {
                series[[j, i]] = rows[i][j] - rows[i - 1][j];
            }
        }
    } else {
        for (i, row) in rows.iter().enumerate() {
            for j in 0..p {
                series[[j, i]] = row[j];
            }
        }
    }
    let data = TimeSeriesData::from_series(series)?;
    Ok((names, data))
}

/// Write series columns back as time rows. `{}` formatting keeps the
/// shortest digit string that round-trips, so ingest-export is lossless.
fn export_csv<W: Write>(names: &[String], data: &TimeSeriesData, out: W) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(names)?;
    let series = data.series();
    for t in 0..series.ncols() {
        let row: Vec<String> = (0..series.nrows()).map(|j| series[[j, t]].to_string()).collect();
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

fn opt_string<T: ToString>(value: &Option<T>) -> String {
    value.as_ref().map(T::to_string).unwrap_or_default()
}

fn metric_fields(m: &MetricRecord) -> [String; 8] {
    [
        m.l2_err.to_string(),
        m.lf_err.to_string(),
        opt_string(&m.est_err),
        opt_string(&m.g_size),
        opt_string(&m.fpr),
        opt_string(&m.fnr),
        opt_string(&m.r_hat_go),
        opt_string(&m.map_equals_oracle),
    ]
}

fn write_metrics_csv<W: Write>(rows: &[(String, MetricRecord)], out: W) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record([
        "method",
        "l2_err",
        "lf_err",
        "est_err",
        "g_size",
        "fpr",
        "fnr",
        "r_hat_go",
        "map_equals_oracle",
    ])?;
    for (method, metrics) in rows {
        let mut record = vec![method.clone()];
        record.extend(metric_fields(metrics));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

fn write_bench_csv<W: Write>(table: &ExperimentTable, out: W) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record([
        "seed_index",
        "method",
        "l2_err",
        "lf_err",
        "est_err",
        "g_size",
        "fpr",
        "fnr",
        "r_hat_go",
        "map_equals_oracle",
        "oracle_size",
        "cond1_value",
        "cond1_pass",
        "cond2_pass",
        "error",
    ])?;
    for row in &table.rows {
        let tail = [
            row.oracle_size.to_string(),
            row.cond1_value.to_string(),
            row.cond1_pass.to_string(),
            opt_string(&row.cond2_pass),
            row.error.clone().unwrap_or_default(),
        ];
        if row.error.is_some() {
            let mut record = vec![row.seed_index.to_string(), String::new()];
            record.extend(std::iter::repeat_with(String::new).take(8));
            record.extend(tail.clone());
            writer.write_record(&record)?;
            continue;
        }
        for result in &row.results {
            let mut record = vec![row.seed_index.to_string(), result.method.clone()];
            record.extend(metric_fields(&result.metrics));
            record.extend(tail.clone());
            writer.write_record(&record)?;
        }
    }
    writer.flush()?;
    Ok(())
}

fn fmt_stat(values: &[f64]) -> String {
    if values.is_empty() {
        return "n/a".to_string();
    }
    let (mean, se) = mean_se(values);
    format!("{mean:.3} +- {se:.3}")
}

/// Parse a `key=value` comma list like `p=4,n=120,pattern=random,seeds=20`;
/// absent keys keep the default desk-scale design.
fn parse_design(spec: &str, base_seed: u64) -> Result<Design, ConfigError> {
    let mut design = Design {
        p: 4,
        n: 120,
        pattern: PatternKind::Random,
        seeds: 20,
        base_seed,
    };
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("design: expected key=value, got {part:?}")))?;
        let value = value.trim();
        match key.trim() {
            "p" => design.p = parse_num(value)?,
            "n" => design.n = parse_num(value)?,
            "seeds" => design.seeds = parse_num(value)?,
            "pattern" => {
                design.pattern = value
                    .parse()
                    .map_err(|e| ConfigError(format!("design: {e}")))?
            }
            other => return Err(ConfigError(format!("design: unknown key {other:?}"))),
        }
    }
    Ok(design)
}

fn parse_num(value: &str) -> Result<usize, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError(format!("design: cannot parse {value:?}")))
}

fn parse_methods(spec: Option<&str>) -> Result<Vec<Method>, ConfigError> {
    match spec {
        None => Ok(Method::ALL.to_vec()),
        Some(list) => list
            .split(',')
            .map(|m| {
                m.trim()
                    .parse()
                    .map_err(|e| ConfigError(format!("methods: {e}")))
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_strings_parse_and_reject() {
        let d = parse_design("p=6,n=90,pattern=band,seeds=3", 11).unwrap();
        assert_eq!((d.p, d.n, d.seeds, d.base_seed), (6, 90, 3, 11));
        assert!(matches!(d.pattern, PatternKind::Band));

        let d = parse_design("p=8", 0).unwrap();
        assert_eq!((d.n, d.seeds), (120, 20));

        assert!(parse_design("q=4", 0).is_err());
        assert!(parse_design("p", 0).is_err());
        assert!(parse_design("pattern=spiral", 0).is_err());
    }

    #[test]
    fn method_lists_parse_and_reject() {
        let all = parse_methods(None).unwrap();
        assert_eq!(all.len(), 4);
        let two = parse_methods(Some("eas, oracle")).unwrap();
        assert_eq!(two.len(), 2);
        assert!(parse_methods(Some("ridge")).is_err());
    }

    #[test]
    fn exit_codes_follow_error_class() {
        let cfg: anyhow::Error = ConfigError("x".into()).into();
        assert_eq!(exit_code(&cfg), 4);
        let parse: anyhow::Error = ParseError("x".into()).into();
        assert_eq!(exit_code(&parse), 2);
        assert_eq!(exit_code(&EasError::invalid("x").into()), 4);
        assert_eq!(exit_code(&EasError::dim("x").into()), 2);
        assert_eq!(exit_code(&EasError::degenerate("x").into()), 3);
        let rank: anyhow::Error = EasError::RankDeficient {
            equation: 0,
            detail: "x".into(),
        }
        .into();
        assert_eq!(exit_code(&rank), 3);
        // Context wrapping keeps the class visible.
        let wrapped = parse_design("q=1", 0)
            .map_err(anyhow::Error::from)
            .context("while parsing")
            .unwrap_err();
        assert_eq!(exit_code(&wrapped), 4);
    }

    #[test]
    fn metric_rows_serialize_options_as_empty() {
        let m = MetricRecord {
            l2_err: 0.5,
            lf_err: 1.25,
            est_err: None,
            g_size: Some(3),
            fpr: None,
            fnr: None,
            r_hat_go: None,
            map_equals_oracle: None,
        };
        let mut out = Vec::new();
        write_metrics_csv(&[("eas".to_string(), m)], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "method,l2_err,lf_err,est_err,g_size,fpr,fnr,r_hat_go,map_equals_oracle"
        );
        assert_eq!(lines.next().unwrap(), "eas,0.5,1.25,,3,,,,");
    }
}
