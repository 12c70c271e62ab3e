//! Figures as SVG plus the CSV behind each one.

use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};
use crate::io::{self, num, read_table, Table};
use crate::svg::{counts, edges, Axis, Chart};

pub struct ReportInputs {
    pub summary: PathBuf,
    pub truth: Option<PathBuf>,
    pub scaling: Option<PathBuf>,
    pub null: Option<PathBuf>,
    /// Detection threshold on ln B.
    pub ln_b_threshold: f64,
    pub out: PathBuf,
}

fn col<'a>(t: &'a Table, name: &str, path: &Path) -> CliResult<&'a [f64]> {
    t.column(name)
        .map_err(|e| CliError::Input(e.context(path.display().to_string())))
}

fn write_svg(path: &Path, chart: &Chart) -> CliResult<()> {
    let svg = chart.render();
    io::write_atomic(path, |w| Ok(w.write_all(svg.as_bytes())?))
}

pub fn report(inp: &ReportInputs) -> CliResult<()> {
    let summary = read_table(
        &inp.summary,
        "results summary",
        &["dataset_id", "ln_b", "loc_q16", "loc_q50", "loc_q84"],
    )?;
    let mut written = Vec::new();

    if let Some(path) = &inp.scaling {
        let t = read_table(path, "scaling table", &["n", "evaluations"])?;
        written.extend(scaling(&t, path, &inp.out)?);
    }

    let null = match &inp.null {
        Some(path) => Some((
            read_table(path, "null Bayes factor table", &["ln_b"])?,
            path,
        )),
        None => None,
    };
    written.extend(bayes_factors(
        &summary,
        &inp.summary,
        null.as_ref().map(|(t, p)| (t, p.as_path())),
        inp,
    )?);
    written.extend(error_bars(&summary, &inp.summary, &inp.out)?);

    if let Some(path) = &inp.truth {
        let truth = io::read_truth(path)?;
        written.extend(recovery(&summary, &inp.summary, &truth, inp)?);
    }
    for w in written {
        println!("wrote {}", w.display());
    }
    Ok(())
}

fn scaling(t: &Table, path: &Path, out: &Path) -> CliResult<Vec<PathBuf>> {
    let n = col(t, "n", path)?;
    let evals = col(t, "evaluations", path)?;
    if n.is_empty() {
        return Err(CliError::Input(anyhow::anyhow!(
            "{}: no rows",
            path.display()
        )));
    }
    // linear baseline anchored at the smallest N
    let i0 = (0..n.len())
        .min_by(|&a, &b| n[a].total_cmp(&n[b]))
        .expect("non-empty");
    let per = evals[i0] / n[i0];
    let baseline: Vec<f64> = n.iter().map(|&x| per * x).collect();
    let csv_path = out.join("scaling_plot.csv");
    io::write_csv(
        &csv_path,
        &["n", "evaluations", "linear_baseline"],
        (0..n.len()).map(|i| vec![num(n[i]), num(evals[i]), num(baseline[i])]),
    )?;
    let (nmin, nmax) = (
        n.iter().cloned().fold(f64::INFINITY, f64::min),
        n.iter().cloned().fold(0.0, f64::max),
    );
    let ymax = evals.iter().chain(&baseline).cloned().fold(0.0, f64::max);
    let ymin = evals.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut c = Chart::new(
        "Model evaluations for N data sets",
        "number of data sets N",
        "model evaluations",
        Axis::log(nmin, nmax),
        Axis::log(ymin / 2.0, ymax * 2.0),
    );
    let mut order: Vec<usize> = (0..n.len()).collect();
    order.sort_by(|&a, &b| n[a].total_cmp(&n[b]));
    let xs: Vec<f64> = order.iter().map(|&i| n[i]).collect();
    c.line(
        &xs,
        &order.iter().map(|&i| baseline[i]).collect::<Vec<_>>(),
        "black",
        "independent analyses",
    );
    c.points(
        &xs,
        &order.iter().map(|&i| evals[i]).collect::<Vec<_>>(),
        "#d62728",
        "collaborative",
    );
    let svg = out.join("scaling.svg");
    write_svg(&svg, &c)?;
    Ok(vec![csv_path, svg])
}

fn bayes_factors(
    summary: &Table,
    spath: &Path,
    null: Option<(&Table, &Path)>,
    inp: &ReportInputs,
) -> CliResult<Vec<PathBuf>> {
    // log10 B, truncated at 10^4
    let to_log10 = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|x| (x / std::f64::consts::LN_10).min(4.0))
            .collect()
    };
    let survey = to_log10(col(summary, "ln_b", spath)?);
    let null_vals = match null {
        Some((t, p)) => Some(to_log10(col(t, "ln_b", p)?)),
        None => None,
    };
    let e = edges(-1.0, 4.0, 50);
    let cs = counts(&survey, &e);
    let cn = null_vals.as_ref().map(|v| counts(v, &e));
    let csv_path = inp.out.join("lnb_hist.csv");
    io::write_csv(
        &csv_path,
        &["log10_b_lo", "log10_b_hi", "survey", "null"],
        (0..cs.len()).map(|i| {
            vec![
                num(e[i]),
                num(e[i + 1]),
                num(cs[i]),
                cn.as_ref().map_or(String::new(), |c| num(c[i])),
            ]
        }),
    )?;
    let ymax = cs
        .iter()
        .chain(cn.iter().flatten())
        .cloned()
        .fold(1.0, f64::max);
    let mut c = Chart::new(
        "Bayes factors, line vs no line",
        "log10 B (truncated at 4)",
        "number of spectra",
        Axis::linear(-1.0, 4.0),
        Axis::log(0.5, ymax * 2.0),
    );
    c.histogram(&e, &cs, "black", "survey");
    if let Some(cn) = &cn {
        c.histogram(&e, cn, "#d62728", "signal-free simulation");
    }
    c.vline(
        inp.ln_b_threshold / std::f64::consts::LN_10,
        "#1f77b4",
        "detection threshold",
    );
    let svg = inp.out.join("lnb_hist.svg");
    write_svg(&svg, &c)?;
    Ok(vec![csv_path, svg])
}

fn error_bars(summary: &Table, spath: &Path, out: &Path) -> CliResult<Vec<PathBuf>> {
    let id = col(summary, "dataset_id", spath)?;
    let q16 = col(summary, "loc_q16", spath)?;
    let q50 = col(summary, "loc_q50", spath)?;
    let q84 = col(summary, "loc_q84", spath)?;
    let csv_path = out.join("location_errorbars.csv");
    io::write_csv(
        &csv_path,
        &["dataset_id", "median", "minus", "plus"],
        (0..id.len()).map(|i| {
            vec![
                num(id[i]),
                num(q50[i]),
                num(q50[i] - q16[i]),
                num(q84[i] - q50[i]),
            ]
        }),
    )?;
    // plot the first 100 spectra to keep the figure legible
    let k = id.len().min(100);
    let xmax = id[..k].iter().cloned().fold(1.0, f64::max);
    let mut c = Chart::new(
        "Line location posteriors (median, 1-sigma quantiles)",
        "dataset id",
        "location [nm]",
        Axis::linear(-1.0, xmax + 1.0),
        Axis::linear(600.0, 1000.0),
    );
    c.error_bars(
        &id[..k],
        &q50[..k],
        &q16[..k],
        &q84[..k],
        "#1f77b4",
        "posterior",
    );
    let svg = out.join("location_errorbars.svg");
    write_svg(&svg, &c)?;
    Ok(vec![csv_path, svg])
}

fn recovery(
    summary: &Table,
    spath: &Path,
    truth: &[conest::TruthRow],
    inp: &ReportInputs,
) -> CliResult<Vec<PathBuf>> {
    let ln_b = col(summary, "ln_b", spath)?;
    let q50 = col(summary, "loc_q50", spath)?;
    let recovered: Vec<f64> = (0..ln_b.len())
        .filter(|&i| ln_b[i] > inp.ln_b_threshold)
        .map(|i| q50[i])
        .collect();
    let input: Vec<f64> = truth.iter().map(|t| t.location).collect();
    let e = edges(600.0, 800.0, 40);
    let cr = counts(&recovered, &e);
    let ci = counts(&input, &e);
    // compare shapes: scale the input histogram to the detected count
    let scale = recovered.len() as f64 / input.len().max(1) as f64;
    let csv_path = inp.out.join("location_hist.csv");
    io::write_csv(
        &csv_path,
        &[
            "location_lo",
            "location_hi",
            "recovered",
            "input",
            "input_scaled",
        ],
        (0..cr.len()).map(|i| {
            vec![
                num(e[i]),
                num(e[i + 1]),
                num(cr[i]),
                num(ci[i]),
                num(ci[i] * scale),
            ]
        }),
    )?;
    let scaled: Vec<f64> = ci.iter().map(|c| c * scale).collect();
    let ymax = cr.iter().chain(&scaled).cloned().fold(1.0, f64::max);
    let mut c = Chart::new(
        "Recovered line locations of detected lines",
        "location [nm]",
        "number of spectra",
        Axis::linear(600.0, 800.0),
        Axis::linear(0.0, ymax * 1.15),
    );
    c.histogram(&e, &scaled, "black", "input (scaled)");
    c.histogram(&e, &cr, "#1f77b4", "recovered median, B above threshold");
    let svg = inp.out.join("location_hist.svg");
    write_svg(&svg, &c)?;
    Ok(vec![csv_path, svg])
}
