//! Command-line interface: `estimate`, `simulate` and `distance`.
//!
//! Exit codes: 0 success, 2 input or usage errors, 3 numerical failures,
//! 4 replicate failures under `simulate --strict`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::factorspace::{
    fit_factor_model, select_r_ratio, FactorCount, FitOptions, Penalty, Regression,
};
use crate::io::{self, PanelFile};
use crate::metrics::space_distance_mixed;
use crate::montecarlo::run_table;
use crate::numerics::orthonormalize;
use crate::panel::{FactorFit, Panel};
use crate::regress::{default_sieve_order, IvConfig, SieveBasis};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_REPLICATES: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "tsfactor", version, about = "Factor models for time series with regressors")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the regression and factor model to CSV data.
    Estimate(EstimateArgs),
    /// Run Monte Carlo experiments described by a TOML file.
    Simulate(SimulateArgs),
    /// Distance between the column spaces of two bases.
    Distance(DistanceArgs),
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Observations, one row per time point.
    #[arg(long)]
    y: PathBuf,
    /// Regressors (`ols`, `iv`), or the scalar sieve input (`sieve`).
    #[arg(long)]
    z: Option<PathBuf>,
    /// Instruments for `iv`.
    #[arg(long)]
    w: Option<PathBuf>,
    /// ols | iv | sieve | none. Defaults to `ols` with --z, else `none`.
    #[arg(long)]
    method: Option<String>,
    /// Number of lags in the autocovariance statistic.
    #[arg(long)]
    kbar: Option<usize>,
    /// Number of factors: `auto` or a positive integer.
    #[arg(long, default_value = "auto")]
    r: String,
    /// Ratio penalty: a nonnegative number or `heuristic`.
    #[arg(long)]
    ct: Option<String>,
    /// Sieve basis size.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Two-column CSV (series_label, group_label).
    #[arg(long)]
    sectors: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Exit with code 4 if any replicate failed.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct DistanceArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Orthonormalize the columns of both inputs first.
    #[arg(long)]
    orthonormalize: bool,
}

/// Parse `std::env::args` and run. Returns the process exit code.
pub fn main_exit_code() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.verbose {
        log::LevelFilter::Info
    } else {
        log::LevelFilter::Warn
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    let (stage, outcome) = match cli.command {
        Command::Estimate(a) => ("estimate", cmd_estimate(&a)),
        Command::Simulate(a) => ("simulate", cmd_simulate(&a)),
        Command::Distance(a) => ("distance", cmd_distance(&a)),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("tsfactor {stage}: {e}");
            if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_NUMERIC
            }
        }
    }
}

/// Report which stage failed; the error itself is printed by [`run`].
fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.inspect_err(|_| eprintln!("tsfactor: {name} failed"))
}

fn read_auto(path: &Path) -> Result<Panel> {
    let header = io::detect_header(path, b',')?;
    io::read_panel(&PanelFile::new(path).header(header))
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn labels_or(labels: Option<&[String]>, prefix: &str, n: usize) -> Vec<String> {
    labels
        .map(<[String]>::to_vec)
        .unwrap_or_else(|| (1..=n).map(|i| format!("{prefix}{i}")).collect())
}

fn cmd_estimate(a: &EstimateArgs) -> Result<i32> {
    let method = a
        .method
        .clone()
        .unwrap_or_else(|| if a.z.is_some() { "ols" } else { "none" }.to_string());
    if !["ols", "iv", "sieve", "none"].contains(&method.as_str()) {
        return Err(usage(format!("--method must be ols|iv|sieve|none, got {method:?}")));
    }
    if method != "none" && a.z.is_none() {
        return Err(usage(format!("--method {method} needs --z")));
    }
    if method == "iv" && a.w.is_none() {
        return Err(usage("--method iv needs --w"));
    }
    let r = match a.r.as_str() {
        "auto" => FactorCount::Auto,
        s => match s.parse::<usize>() {
            Ok(n) if n >= 1 => FactorCount::Fixed(n),
            _ => return Err(usage(format!("--r must be auto or a positive integer, got {s:?}"))),
        },
    };
    let penalty = match a.ct.as_deref() {
        None => Penalty::None,
        Some("heuristic") => Penalty::Heuristic,
        Some(s) => match s.parse::<f64>() {
            Ok(c) if c >= 0.0 && c.is_finite() => Penalty::Value(c),
            _ => return Err(usage(format!("--ct must be a nonnegative number or heuristic, got {s:?}"))),
        },
    };
    if a.kbar == Some(0) {
        return Err(usage("--kbar must be at least 1"));
    }

    let y = stage("reading --y", read_auto(&a.y))?;
    let z = a.z.as_deref().map(|p| stage("reading --z", read_auto(p))).transpose()?;
    let w = a.w.as_deref().map(|p| stage("reading --w", read_auto(p))).transpose()?;
    let opts = FitOptions {
        k_bar: a.kbar,
        r,
        penalty,
        ..FitOptions::default()
    };
    let iv_cfg = IvConfig::default();
    let basis = SieveBasis::polynomial(a.m.unwrap_or_else(|| default_sieve_order(y.len())));
    let regression = match method.as_str() {
        "none" => Regression::None,
        "ols" => Regression::Ols { z: z.as_ref().unwrap() },
        "iv" => Regression::Iv {
            z: z.as_ref().unwrap(),
            w: w.as_ref().unwrap(),
            cfg: &iv_cfg,
        },
        _ => Regression::Sieve {
            u: z.as_ref().unwrap(),
            basis: &basis,
        },
    };
    let fit = stage("model fit", fit_factor_model(&y, regression, &opts))?;
    log::info!(
        "p = {}, T = {}, r_hat = {}, r_used = {}",
        y.dim(),
        y.len(),
        fit.r_ratio,
        fit.r_used
    );

    fs::create_dir_all(&a.out).map_err(|source| Error::Io {
        path: a.out.clone(),
        source,
    })?;
    write_fit(&a.out, &y, z.as_ref(), &fit)?;
    if let Some(path) = &a.sectors {
        let series = labels_or(y.series_labels(), "s", y.dim());
        let groups = stage("reading --sectors", read_sectors(path, &series))?;
        write_sectors(&a.out, &y, &fit, &groups)?;
    }
    Ok(0)
}

fn write_fit(out: &Path, y: &Panel, z: Option<&Panel>, fit: &FactorFit) -> Result<()> {
    let series = labels_or(y.series_labels(), "s", y.dim());
    let time = labels_or(y.time_labels(), "", y.len());
    let m = fit.d_hat.ncols();
    let reg_labels = match z {
        Some(z) if z.dim() == m => labels_or(z.series_labels(), "z", m),
        _ => labels_or(None, "l", m),
    };
    io::write_matrix(
        &out.join("dhat.csv"),
        &fit.d_hat,
        Some(&reg_labels),
        "",
        Some(("series", &series)),
    )?;
    io::write_index_values(&out.join("eigenvalues.csv"), &fit.eigenvalues.to_vec())?;
    if fit.eigenvalues.len() >= 2 {
        let plain = select_r_ratio(fit.eigenvalues.view(), fit.r_max, 0.0)?;
        io::write_index_values(&out.join("ratios.csv"), &plain.ratios)?;
        if fit.c_t > 0.0 {
            let adj = select_r_ratio(fit.eigenvalues.view(), fit.r_max, fit.c_t)?;
            io::write_index_values(&out.join("ratios_adjusted.csv"), &adj.ratios)?;
        }
    } else {
        io::write_index_values(&out.join("ratios.csv"), &[])?;
    }
    io::write_matrix(&out.join("loadings.csv"), &fit.loadings, None, "f", Some(("series", &series)))?;
    io::write_matrix(
        &out.join("factors.csv"),
        &fit.factors.t().to_owned(),
        None,
        "f",
        Some(("time", &time)),
    )?;
    io::write_matrix(
        &out.join("common.csv"),
        &fit.common.t().to_owned(),
        Some(&series),
        "",
        Some(("time", &time)),
    )?;
    let r_hat = fit.r_adjusted.unwrap_or(fit.r_ratio);
    io::write_text(&out.join("rhat.txt"), &format!("{r_hat}\n"))
}

/// Group name -> series indices, in file order of first appearance; series
/// missing from the mapping go to `other`.
fn read_sectors(path: &Path, series: &[String]) -> Result<Vec<(String, Vec<usize>)>> {
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let index: BTreeMap<&str, usize> = series.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    let mut assigned = vec![false; series.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: row + 1,
            col: 0,
            msg: e.to_string(),
        })?;
        if rec.len() != 2 {
            return Err(Error::RaggedRows {
                row: row + 1,
                found: rec.len(),
                expected: 2,
            });
        }
        let Some(&i) = index.get(&rec[0]) else {
            if row == 0 {
                continue; // header
            }
            return Err(Error::Parse {
                row: row + 1,
                col: 1,
                msg: format!("unknown series {:?}", &rec[0]),
            });
        };
        if assigned[i] {
            return Err(Error::Parse {
                row: row + 1,
                col: 1,
                msg: format!("series {:?} listed twice", &rec[0]),
            });
        }
        assigned[i] = true;
        match groups.iter_mut().find(|(g, _)| g == &rec[1]) {
            Some((_, members)) => members.push(i),
            None => groups.push((rec[1].to_string(), vec![i])),
        }
    }
    let rest: Vec<usize> = (0..series.len()).filter(|&i| !assigned[i]).collect();
    if !rest.is_empty() {
        match groups.iter_mut().find(|(g, _)| g == "other") {
            Some((_, members)) => members.extend(rest),
            None => groups.push(("other".into(), rest)),
        }
    }
    Ok(groups)
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Per-group loadings and common component, plus the group averages of the
/// common component side by side in `sector_latent.csv`.
fn write_sectors(out: &Path, y: &Panel, fit: &FactorFit, groups: &[(String, Vec<usize>)]) -> Result<()> {
    let series = labels_or(y.series_labels(), "s", y.dim());
    let time = labels_or(y.time_labels(), "", y.len());
    let mut latent = Array2::zeros((y.len(), groups.len()));
    for (g, (name, members)) in groups.iter().enumerate() {
        let labels: Vec<String> = members.iter().map(|&i| series[i].clone()).collect();
        let load = fit.loadings.select(Axis(0), members);
        let common = fit.common.select(Axis(0), members);
        let tag = file_safe(name);
        io::write_matrix(
            &out.join(format!("loadings_{tag}.csv")),
            &load,
            None,
            "f",
            Some(("series", &labels)),
        )?;
        io::write_matrix(
            &out.join(format!("common_{tag}.csv")),
            &common.t().to_owned(),
            Some(&labels),
            "",
            Some(("time", &time)),
        )?;
        let mean: Array1<f64> = common.mean_axis(Axis(0)).expect("groups are nonempty");
        latent.column_mut(g).assign(&mean);
    }
    let names: Vec<String> = groups.iter().map(|(n, _)| n.clone()).collect();
    io::write_matrix(&out.join("sector_latent.csv"), &latent, Some(&names), "", Some(("time", &time)))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    let specs = stage("reading --spec", io::read_experiments(&a.spec))?;
    log::info!("{} cells", specs.len());
    let cells = stage("simulation", run_table(&specs, a.workers))?;
    fs::create_dir_all(&a.out).map_err(|source| Error::Io {
        path: a.out.clone(),
        source,
    })?;
    io::write_results_table(&a.out.join("table.csv"), &cells)?;
    io::write_boxplots(&a.out.join("boxplots.csv"), &cells)?;
    io::write_replicates(&a.out.join("replicates.csv"), &cells)?;
    let failed: usize = cells.iter().map(|c| c.errors_count()).sum();
    if failed > 0 {
        for c in &cells {
            for (i, msg) in &c.failures {
                eprintln!(
                    "tsfactor simulate: {} p={} T={} replicate {}: {msg}",
                    c.spec.design.as_str(),
                    c.spec.p,
                    c.t_len,
                    i + 1
                );
            }
        }
        if a.strict {
            return Ok(EXIT_REPLICATES);
        }
    }
    Ok(0)
}

fn read_basis(path: &Path, orth: bool) -> Result<Array2<f64>> {
    let header = io::detect_header(path, b',')?;
    let m = io::read_table(path, header, b',')?.values;
    if orth {
        orthonormalize(m.view())
    } else {
        Ok(m)
    }
}

/// `v` with 10 significant digits, trailing zeros dropped.
pub fn format_significant(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (9 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn cmd_distance(a: &DistanceArgs) -> Result<i32> {
    let h1 = stage("reading --a", read_basis(&a.a, a.orthonormalize))?;
    let h2 = stage("reading --b", read_basis(&a.b, a.orthonormalize))?;
    let d = space_distance_mixed(h1.view(), h2.view())?;
    println!("{}", format_significant(d.value));
    Ok(0)
}
