use std::path::Path;

use anyhow::anyhow;
use conest::model::null_log_evidence;
use conest::stats::{quantile, weighted_quantiles};
use conest::{
    generate_null, generate_survey, run_all, Dataset, LineModel, RunConfig, RunReport, SurveySpec,
};

use crate::error::{CliError, CliResult};
use crate::io::{self, num};
use crate::SurveyArgs;

pub const QUANTILES: [f64; 5] = [0.025, 0.16, 0.5, 0.84, 0.975];
const QUANTILE_LABELS: [&str; 5] = ["2.5", "16", "50", "84", "97.5"];
const PARAMS: [&str; 3] = ["amp", "width", "loc"];

pub fn summary_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "dataset_id",
        "ln_z1",
        "ln_z1_err",
        "ln_z0",
        "ln_b",
        "n_iter",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for p in PARAMS {
        for q in QUANTILE_LABELS {
            h.push(format!("{p}_q{q}"));
        }
    }
    h
}

fn survey_spec(args: &SurveyArgs, n: usize, seed: u64) -> SurveySpec {
    SurveySpec {
        n_datasets: n,
        pixel_width: args.pixel_width,
        location_min: args.location_min,
        location_max: args.location_max,
        seed,
        ..Default::default()
    }
}

pub fn generate(n: usize, seed: u64, survey: &SurveyArgs, out: &Path) -> CliResult<()> {
    let (datasets, truth) = generate_survey(&survey_spec(survey, n, seed))?;
    io::write_survey(&out.join("survey.csv"), &datasets)?;
    io::write_truth(&out.join("truth.csv"), &truth)?;
    println!(
        "wrote {} spectra of {} pixels to {}",
        datasets.len(),
        datasets[0].len(),
        out.display()
    );
    Ok(())
}

fn analyse(datasets: &[Dataset], config: &RunConfig) -> CliResult<RunReport> {
    let model = LineModel::for_datasets(datasets).map_err(|e| CliError::Input(e.into()))?;
    Ok(run_all(&model, datasets, config)?)
}

/// Per-data-set results of a run, in input order. Failed data sets carry the
/// failure reason instead of a summary row.
pub struct Analysis {
    pub report: RunReport,
    pub ln_z0: Vec<f64>,
}

impl Analysis {
    pub fn failures(&self) -> Vec<String> {
        self.report
            .outcomes
            .iter()
            .filter_map(|o| {
                o.as_ref()
                    .err()
                    .map(|f| format!("dataset {}: {}", f.dataset, f.reason))
            })
            .collect()
    }
}

pub fn run_analysis(datasets: &[Dataset], config: &RunConfig) -> CliResult<Analysis> {
    let report = analyse(datasets, config)?;
    let ln_z0 = datasets.iter().map(null_log_evidence).collect();
    Ok(Analysis { report, ln_z0 })
}

pub fn run(survey: &Path, config: &RunConfig, out: &Path) -> CliResult<()> {
    let datasets = io::read_survey(survey)?;
    let analysis = run_analysis(&datasets, config)?;

    let mut rows = Vec::new();
    for (outcome, d) in analysis.report.outcomes.iter().zip(&datasets) {
        let Ok(r) = outcome else { continue };
        let ln_z0 = analysis.ln_z0[r.dataset];
        let mut row = vec![
            d.id().to_string(),
            num(r.ln_z),
            num(r.ln_z_err),
            num(ln_z0),
            num(r.ln_z - ln_z0),
            r.n_iterations.to_string(),
        ];
        for p in 0..3 {
            let values: Vec<f64> = r.samples.iter().map(|s| s[p]).collect();
            row.extend(
                weighted_quantiles(&values, &r.weights, &QUANTILES)
                    .into_iter()
                    .map(num),
            );
        }
        rows.push(row);

        let post_rows = r
            .equal_weighted
            .iter()
            .map(|s| s.iter().map(|&x| num(x)).collect::<Vec<_>>());
        io::write_csv(
            &out.join("posteriors").join(format!("{}.csv", d.id())),
            &["amplitude", "width_nm", "location_nm"],
            post_rows,
        )?;
    }
    let header = summary_header();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_csv(&out.join("summary.csv"), &header, rows)?;

    let t = &analysis.report.telemetry;
    println!("total model evaluations: {}", t.total_evaluations());
    println!(
        "  initial {}, superset {}, focused {}; {} iterations, {} clusters at most",
        t.draws.initial, t.draws.superset, t.draws.focused, t.iterations, t.max_clusters
    );
    println!("wrote {}", out.join("summary.csv").display());
    fail_on(analysis.failures())
}

fn fail_on(failures: Vec<String>) -> CliResult<()> {
    if failures.is_empty() {
        return Ok(());
    }
    for f in &failures {
        log::error!("{f}");
    }
    Err(CliError::Runtime(anyhow!(
        "{} data set(s) failed; see messages above",
        failures.len()
    )))
}

pub fn scaling(survey: &Path, sizes: &[usize], config: &RunConfig, out: &Path) -> CliResult<()> {
    let datasets = io::read_survey(survey)?;
    if let Some(&n) = sizes.iter().find(|&&n| n > datasets.len()) {
        return Err(CliError::Usage(format!(
            "size {n} exceeds the {} data sets in {}",
            datasets.len(),
            survey.display()
        )));
    }
    let mut rows = Vec::new();
    for &n in sizes {
        let report = analyse(&datasets[..n], config)?;
        let evals = report.telemetry.total_evaluations();
        println!("N = {n}: {evals} model evaluations");
        rows.push(vec![
            n.to_string(),
            evals.to_string(),
            num(evals as f64 / n as f64),
        ]);
    }
    let path = out.join("scaling.csv");
    io::write_csv(
        &path,
        &["n", "evaluations", "evaluations_per_dataset"],
        rows,
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn calibrate_null(
    n: usize,
    seed: u64,
    q: f64,
    survey: &SurveyArgs,
    config: &RunConfig,
    out: &Path,
) -> CliResult<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(CliError::Usage(format!(
            "quantile must lie in [0, 1], got {q}"
        )));
    }
    let datasets = generate_null(&survey_spec(survey, n, seed))?;
    let analysis = run_analysis(&datasets, config)?;
    let mut ln_b = Vec::new();
    let mut rows = Vec::new();
    for outcome in &analysis.report.outcomes {
        let Ok(r) = outcome else { continue };
        let z0 = analysis.ln_z0[r.dataset];
        ln_b.push(r.ln_z - z0);
        rows.push(vec![
            datasets[r.dataset].id().to_string(),
            num(r.ln_z),
            num(r.ln_z_err),
            num(z0),
            num(r.ln_z - z0),
        ]);
    }
    io::write_csv(
        &out.join("null_bf.csv"),
        &["dataset_id", "ln_z1", "ln_z1_err", "ln_z0", "ln_b"],
        rows,
    )?;
    let threshold = quantile(&ln_b, q).expect("at least one data set");
    io::write_csv(
        &out.join("null_threshold.csv"),
        &["quantile", "ln_b", "b", "n"],
        [vec![
            num(q),
            num(threshold),
            num(threshold.exp()),
            ln_b.len().to_string(),
        ]],
    )?;
    println!(
        "{q} quantile of ln B over {} null spectra: {threshold:.4} (B = {:.3})",
        ln_b.len(),
        threshold.exp()
    );
    println!(
        "total model evaluations: {}",
        analysis.report.telemetry.total_evaluations()
    );
    fail_on(analysis.failures())
}
