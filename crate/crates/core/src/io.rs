//! CSV panels, TOML experiment configuration and result tables.
//!
//! # Panel CSV
//!
//! Comma-separated, rectangular. With the default `time_rows` orientation
//! each row is one time point and each column one series; `series_rows` is the
//! transpose. An optional header row carries column labels. If the first cell
//! of the first data row does not parse as a number, the first column is read
//! as row labels (dates, series names).
//!
//! # Experiment configuration (TOML)
//!
//! ```toml
//! design = "stationary"        # stationary | endogenous | nonstationary | nonlinear
//! delta = ["strong", "weak"]   # strong | weak | 0 | 0.5
//! estimator = ["known_d", "ols"]  # known_d | ols | iv | sieve
//! p = 100
//! t_rule = ["half_p", "p", "one_half_p"]   # or `T = 150` / `T = [50, 100]`
//! replicates = 200
//! k_bar = 1                    # integer or "sieve" (floor(2 T^{1/5}))
//! r = "auto"                   # "auto" or a fixed integer
//! sieve_m = 5                  # optional, default floor(2 T^{1/5})
//! seed = 7
//! burn_in = 100
//!
//! [[cell]]                     # optional; each table overrides the keys above
//! design = "nonlinear"
//! ```
//!
//! Any of `design`, `delta`, `estimator`, `p`, `T`/`t_rule` may be an array;
//! cells are the cartesian product in the order design, delta, estimator, p, T.
//! Unknown keys are rejected. Defaults: `delta = "strong"`, `replicates = 200`,
//! `estimator = "ols"` (`"sieve"` for the nonlinear design), `k_bar = 1`
//! (`"sieve"` for the nonlinear design), `r = "auto"`, `burn_in = 100`.
//!
//! A file containing an `[estimate]` table is an estimation config instead,
//! with keys `method`, `k_bar`, `r`, `c_t`, `m`, `ridge`, `r_max`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use toml::{Table, Value};

use crate::dgp::{Design, Strength};
use crate::error::{Error, Result};
use crate::montecarlo::{CellResult, Estimator, ExperimentSpec, FiveNumber, KBarRule, RMode, TRule};
use crate::panel::Panel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    SeriesRows,
    #[default]
    TimeRows,
}

/// Where and how a panel is stored.
#[derive(Debug, Clone)]
pub struct PanelFile {
    pub path: PathBuf,
    pub orientation: Orientation,
    pub header: bool,
    pub delimiter: u8,
}

impl PanelFile {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        PanelFile {
            path: path.into(),
            orientation: Orientation::TimeRows,
            header: true,
            delimiter: b',',
        }
    }

    pub fn orientation(mut self, o: Orientation) -> Self {
        self.orientation = o;
        self
    }

    pub fn header(mut self, header: bool) -> Self {
        self.header = header;
        self
    }
}

/// A numeric table exactly as laid out in a file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub values: Array2<f64>,
    /// Column labels, excluding the row-label column.
    pub col_labels: Option<Vec<String>>,
    pub row_labels: Option<Vec<String>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::RaggedRows {
            row,
            found: len as usize,
            expected: expected_len as usize,
        },
        other => Error::Parse {
            row,
            col: 0,
            msg: format!("{other:?}"),
        },
    }
}

fn parse_cell(text: &str, row: usize, col: usize) -> Result<f64> {
    let trimmed = text.trim();
    let v: f64 = trimmed.parse().map_err(|_| Error::Parse {
        row,
        col,
        msg: format!("cannot parse {trimmed:?} as a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFinite {
            row,
            col,
            text: trimmed.to_string(),
        });
    }
    Ok(v)
}

/// Read a rectangular numeric CSV. Row and column numbers in errors are 1-based
/// file positions.
pub fn read_table(path: &Path, header: bool, delimiter: u8) -> Result<CsvTable> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut records = Vec::new();
    for rec in rdr.records() {
        records.push(rec.map_err(|e| csv_err(path, e))?);
    }
    let mut iter = records.into_iter();
    let head: Option<Vec<String>> = if header {
        Some(
            iter.next()
                .ok_or(Error::Empty)?
                .iter()
                .map(str::to_string)
                .collect(),
        )
    } else {
        None
    };
    let rows: Vec<csv::StringRecord> = iter.collect();
    let first = rows.first().ok_or(Error::Empty)?;
    let labelled = first.get(0).map(|c| c.trim().parse::<f64>().is_err()).unwrap_or(false);
    let skip = usize::from(labelled);
    let ncols = first.len() - skip;
    if ncols == 0 {
        return Err(Error::Empty);
    }
    let row_offset = 1 + usize::from(header);
    let mut values = Array2::zeros((rows.len(), ncols));
    let mut row_labels = labelled.then(Vec::new);
    for (i, rec) in rows.iter().enumerate() {
        if let Some(labels) = row_labels.as_mut() {
            labels.push(rec.get(0).unwrap_or_default().to_string());
        }
        for j in 0..ncols {
            values[[i, j]] = parse_cell(&rec[j + skip], i + row_offset, j + skip + 1)?;
        }
    }
    let col_labels = head.map(|h| h.into_iter().skip(skip).collect::<Vec<_>>());
    if let Some(cl) = &col_labels {
        if cl.len() != ncols {
            return Err(Error::RaggedRows {
                row: 1,
                found: cl.len() + skip,
                expected: ncols + skip,
            });
        }
    }
    Ok(CsvTable {
        values,
        col_labels,
        row_labels,
    })
}

/// True when the first record has a non-numeric cell outside the first
/// column (or a non-numeric single cell), i.e. looks like a header row.
pub fn detect_header(path: &Path, delimiter: u8) -> Result<bool> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let Some(first) = rdr.records().next() else {
        return Err(Error::Empty);
    };
    let first = first.map_err(|e| csv_err(path, e))?;
    let numeric = |c: &str| c.parse::<f64>().is_ok();
    Ok(if first.len() == 1 {
        !numeric(&first[0])
    } else {
        first.iter().skip(1).any(|c| !numeric(c))
    })
}

/// Read a panel, transposing `time_rows` files into series x time storage.
pub fn read_panel(file: &PanelFile) -> Result<Panel> {
    let table = read_table(&file.path, file.header, file.delimiter)?;
    let (data, series, time) = match file.orientation {
        Orientation::TimeRows => (table.values.reversed_axes(), table.col_labels, table.row_labels),
        Orientation::SeriesRows => (table.values, table.row_labels, table.col_labels),
    };
    let data = data.as_standard_layout().to_owned();
    let mut panel = Panel::new(data)?;
    if let Some(s) = series {
        panel = panel.with_series_labels(s)?;
    }
    if let Some(t) = time {
        panel = panel.with_time_labels(t)?;
    }
    Ok(panel)
}

/// Shortest decimal that round-trips (at most 17 significant digits).
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Write a numeric table with optional labels. Missing column labels become
/// `{prefix}1..{prefix}n`.
pub fn write_matrix(
    path: &Path,
    values: &Array2<f64>,
    col_labels: Option<&[String]>,
    col_prefix: &str,
    row_labels: Option<(&str, &[String])>,
) -> Result<()> {
    let mut out = String::new();
    let mut head: Vec<String> = Vec::new();
    if let Some((name, _)) = row_labels {
        head.push(name.to_string());
    }
    match col_labels {
        Some(l) => head.extend(l.iter().cloned()),
        None => head.extend((1..=values.ncols()).map(|j| format!("{col_prefix}{j}"))),
    }
    out.push_str(&head.join(","));
    out.push('\n');
    for (i, row) in values.rows().into_iter().enumerate() {
        let mut cells: Vec<String> = Vec::with_capacity(row.len() + 1);
        if let Some((_, labels)) = row_labels {
            cells.push(labels[i].clone());
        }
        cells.extend(row.iter().map(|v| format_number(*v)));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

/// Write a panel in the file's orientation. Unlabelled series get `s1..sp`.
pub fn write_panel(panel: &Panel, file: &PanelFile) -> Result<()> {
    let series = panel.series_labels();
    let time = panel.time_labels();
    match file.orientation {
        Orientation::TimeRows => {
            let values = panel.data().t().to_owned();
            write_matrix(&file.path, &values, series, "s", time.map(|t| ("time", t)))
        }
        Orientation::SeriesRows => {
            write_matrix(&file.path, panel.data(), time, "t", series.map(|s| ("series", s)))
        }
    }
}

/// Two-column `(index, value)` file with 1-based indices.
pub fn write_index_values(path: &Path, values: &[f64]) -> Result<()> {
    let mut out = String::from("index,value\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, format_number(*v)));
    }
    write_text(path, &out)
}

// ---------------------------------------------------------------------------
// configuration

/// Settings for estimation on user data.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    pub method: String,
    pub k_bar: Option<usize>,
    /// `None` = automatic.
    pub r: Option<usize>,
    /// `None` = plain ratio; `Some(None)` = heuristic penalty.
    pub c_t: Option<Option<f64>>,
    pub m: Option<usize>,
    pub ridge: f64,
    pub r_max: Option<usize>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            method: "ols".into(),
            k_bar: None,
            r: None,
            c_t: None,
            m: None,
            ridge: 0.0,
            r_max: None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum SpecFile {
    Experiments(Vec<ExperimentSpec>),
    Estimate(EstimateConfig),
}

const GRID_KEYS: &[&str] = &[
    "design",
    "delta",
    "estimator",
    "p",
    "T",
    "t_rule",
    "replicates",
    "k_bar",
    "r",
    "sieve_m",
    "seed",
    "burn_in",
];

fn bad(key: &str, msg: impl Into<String>) -> Error {
    Error::BadValue {
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn as_list(v: &Value) -> Vec<&Value> {
    match v {
        Value::Array(a) => a.iter().collect(),
        other => vec![other],
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(bad(key, format!("expected a nonnegative integer, got {v}"))),
    }
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| bad(key, format!("expected a string, got {v}")))
}

fn parse_design(key: &str, v: &Value) -> Result<Design> {
    let s = as_str(key, v)?;
    Design::parse(s).ok_or_else(|| bad(key, format!("unknown design {s:?}")))
}

fn parse_strength(key: &str, v: &Value) -> Result<Strength> {
    match v {
        Value::String(s) if s == "strong" => Ok(Strength::Strong),
        Value::String(s) if s == "weak" => Ok(Strength::Weak),
        Value::Integer(0) => Ok(Strength::Strong),
        Value::Float(f) if *f == 0.0 => Ok(Strength::Strong),
        Value::Float(f) if *f == 0.5 => Ok(Strength::Weak),
        _ => Err(bad(key, format!("expected strong|weak|0|0.5, got {v}"))),
    }
}

fn parse_estimator(key: &str, v: &Value) -> Result<Estimator> {
    let s = as_str(key, v)?;
    Estimator::parse(s).ok_or_else(|| bad(key, format!("unknown estimator {s:?}")))
}

fn parse_t_rule(key: &str, v: &Value) -> Result<TRule> {
    match as_str(key, v)? {
        "half_p" => Ok(TRule::HalfP),
        "p" => Ok(TRule::P),
        "one_half_p" => Ok(TRule::OneHalfP),
        s => Err(bad(key, format!("expected half_p|p|one_half_p, got {s:?}"))),
    }
}

fn expand_grid(table: &Table, path: &str) -> Result<Vec<ExperimentSpec>> {
    let key = |k: &str| if path.is_empty() { k.to_string() } else { format!("{path}.{k}") };
    for k in table.keys() {
        if !GRID_KEYS.contains(&k.as_str()) {
            return Err(Error::UnknownKey(key(k)));
        }
    }
    let get = |k: &str| table.get(k);
    let designs = match get("design") {
        Some(v) => as_list(v)
            .into_iter()
            .map(|x| parse_design(&key("design"), x))
            .collect::<Result<Vec<_>>>()?,
        None => return Err(Error::MissingRequired(key("design"))),
    };
    let strengths = match get("delta") {
        Some(v) => as_list(v)
            .into_iter()
            .map(|x| parse_strength(&key("delta"), x))
            .collect::<Result<Vec<_>>>()?,
        None => vec![Strength::Strong],
    };
    let estimators: Option<Vec<Estimator>> = get("estimator")
        .map(|v| {
            as_list(v)
                .into_iter()
                .map(|x| parse_estimator(&key("estimator"), x))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let ps = match get("p") {
        Some(v) => as_list(v)
            .into_iter()
            .map(|x| as_usize(&key("p"), x))
            .collect::<Result<Vec<_>>>()?,
        None => return Err(Error::MissingRequired(key("p"))),
    };
    let t_rules = match (get("T"), get("t_rule")) {
        (Some(_), Some(_)) => return Err(bad(&key("T"), "give either T or t_rule, not both")),
        (Some(v), None) => as_list(v)
            .into_iter()
            .map(|x| as_usize(&key("T"), x).map(TRule::Explicit))
            .collect::<Result<Vec<_>>>()?,
        (None, Some(v)) => as_list(v)
            .into_iter()
            .map(|x| parse_t_rule(&key("t_rule"), x))
            .collect::<Result<Vec<_>>>()?,
        (None, None) => return Err(Error::MissingRequired(key("T"))),
    };
    let seed = match get("seed") {
        Some(Value::Integer(i)) => *i as u64,
        Some(v) => return Err(bad(&key("seed"), format!("expected an integer, got {v}"))),
        None => return Err(Error::MissingRequired(key("seed"))),
    };
    let replicates = get("replicates").map(|v| as_usize(&key("replicates"), v)).transpose()?;
    let burn_in = get("burn_in").map(|v| as_usize(&key("burn_in"), v)).transpose()?;
    let sieve_m = get("sieve_m").map(|v| as_usize(&key("sieve_m"), v)).transpose()?;
    let k_bar = match get("k_bar") {
        None => None,
        Some(Value::String(s)) if s == "sieve" => Some(KBarRule::Sieve),
        Some(v) => match as_usize(&key("k_bar"), v)? {
            0 => return Err(bad(&key("k_bar"), "must be at least 1")),
            k => Some(KBarRule::Fixed(k)),
        },
    };
    let r_mode = match get("r") {
        None => RMode::AutoRatio,
        Some(Value::String(s)) if s == "auto" => RMode::AutoRatio,
        Some(v) => match as_usize(&key("r"), v)? {
            0 => return Err(bad(&key("r"), "must be at least 1")),
            r => RMode::Fixed(r),
        },
    };

    let mut out = Vec::new();
    for &design in &designs {
        let ests = estimators.clone().unwrap_or_else(|| {
            vec![if design == Design::Nonlinear {
                Estimator::Sieve
            } else {
                Estimator::Ols
            }]
        });
        for &strength in &strengths {
            for &estimator in &ests {
                for &p in &ps {
                    for &t_rule in &t_rules {
                        let mut spec = ExperimentSpec::new(design, strength, p, t_rule, estimator, seed);
                        if let Some(r) = replicates {
                            spec.replicates = r;
                        }
                        if let Some(b) = burn_in {
                            spec.burn_in = b;
                        }
                        spec.k_bar = k_bar;
                        spec.r_mode = r_mode;
                        spec.sieve_m = sieve_m;
                        spec.validate().map_err(|e| bad(path_or(path, "cell"), e.to_string()))?;
                        out.push(spec);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn path_or<'a>(path: &'a str, fallback: &'a str) -> &'a str {
    if path.is_empty() {
        fallback
    } else {
        path
    }
}

/// Parse experiment cells from TOML text.
pub fn parse_experiments(text: &str) -> Result<Vec<ExperimentSpec>> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| {
        let (row, col) = e
            .span()
            .map(|s| line_col(text, s.start))
            .unwrap_or((0, 0));
        Error::Parse {
            row,
            col,
            msg: e.message().to_string(),
        }
    })?;
    experiments_from_table(&table)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let row = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
    (row, col)
}

fn experiments_from_table(table: &Table) -> Result<Vec<ExperimentSpec>> {
    let mut base = table.clone();
    let cells = base.remove("cell");
    match cells {
        None => expand_grid(&base, ""),
        Some(Value::Array(items)) => {
            let mut out = Vec::new();
            for (i, item) in items.iter().enumerate() {
                let Value::Table(t) = item else {
                    return Err(bad(&format!("cell[{i}]"), "expected a table"));
                };
                let mut merged = base.clone();
                for (k, v) in t {
                    merged.insert(k.clone(), v.clone());
                }
                out.extend(expand_grid(&merged, &format!("cell[{i}]"))?);
            }
            if out.is_empty() {
                return Err(Error::Empty);
            }
            Ok(out)
        }
        Some(_) => Err(bad("cell", "expected an array of tables ([[cell]])")),
    }
}

fn estimate_from_table(t: &Table) -> Result<EstimateConfig> {
    const KEYS: &[&str] = &["method", "k_bar", "r", "c_t", "m", "ridge", "r_max"];
    let key = |k: &str| format!("estimate.{k}");
    for k in t.keys() {
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::UnknownKey(key(k)));
        }
    }
    let mut cfg = EstimateConfig::default();
    if let Some(v) = t.get("method") {
        let s = as_str(&key("method"), v)?;
        if !["none", "ols", "iv", "sieve"].contains(&s) {
            return Err(bad(&key("method"), format!("unknown method {s:?}")));
        }
        cfg.method = s.to_string();
    }
    cfg.k_bar = t.get("k_bar").map(|v| as_usize(&key("k_bar"), v)).transpose()?;
    cfg.m = t.get("m").map(|v| as_usize(&key("m"), v)).transpose()?;
    cfg.r_max = t.get("r_max").map(|v| as_usize(&key("r_max"), v)).transpose()?;
    cfg.r = match t.get("r") {
        None => None,
        Some(Value::String(s)) if s == "auto" => None,
        Some(v) => Some(as_usize(&key("r"), v)?),
    };
    cfg.c_t = match t.get("c_t") {
        None => None,
        Some(Value::String(s)) if s == "heuristic" => Some(None),
        Some(Value::Float(f)) if *f >= 0.0 => Some(Some(*f)),
        Some(Value::Integer(i)) if *i >= 0 => Some(Some(*i as f64)),
        Some(v) => return Err(bad(&key("c_t"), format!("expected a nonnegative number or \"heuristic\", got {v}"))),
    };
    cfg.ridge = match t.get("ridge") {
        None => 0.0,
        Some(Value::Float(f)) if *f >= 0.0 => *f,
        Some(Value::Integer(i)) if *i >= 0 => *i as f64,
        Some(v) => return Err(bad(&key("ridge"), format!("expected a nonnegative number, got {v}"))),
    };
    Ok(cfg)
}

/// Read a configuration file: experiment cells, or an `[estimate]` table.
pub fn read_spec(path: &Path) -> Result<SpecFile> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_spec(&text)
}

pub fn parse_spec(text: &str) -> Result<SpecFile> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| {
        let (row, col) = e.span().map(|s| line_col(text, s.start)).unwrap_or((0, 0));
        Error::Parse {
            row,
            col,
            msg: e.message().to_string(),
        }
    })?;
    match table.get("estimate") {
        Some(Value::Table(t)) => {
            if let Some(k) = table.keys().find(|k| *k != "estimate") {
                return Err(Error::UnknownKey(k.clone()));
            }
            Ok(SpecFile::Estimate(estimate_from_table(t)?))
        }
        Some(_) => Err(bad("estimate", "expected a table")),
        None => Ok(SpecFile::Experiments(experiments_from_table(&table)?)),
    }
}

/// Read experiment cells; an estimation config is an error here.
pub fn read_experiments(path: &Path) -> Result<Vec<ExperimentSpec>> {
    match read_spec(path)? {
        SpecFile::Experiments(v) => Ok(v),
        SpecFile::Estimate(_) => Err(bad("estimate", "expected experiment cells, found an estimation config")),
    }
}

// ---------------------------------------------------------------------------
// result tables

pub const TABLE_COLUMNS: &[&str] = &[
    "design",
    "delta",
    "estimator",
    "p",
    "T",
    "replicates",
    "freq_r_correct",
    "d2_min",
    "d2_q1",
    "d2_median",
    "d2_q3",
    "d2_max",
    "coef_err_median",
    "errors_count",
    "wall_time_s",
];

fn opt_num(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

fn delta_str(s: Strength) -> &'static str {
    match s {
        Strength::Strong => "0",
        Strength::Weak => "0.5",
    }
}

/// The summary table, one row per cell.
pub fn write_results_table(path: &Path, cells: &[CellResult]) -> Result<()> {
    let mut out = TABLE_COLUMNS.join(",");
    out.push('\n');
    for c in cells {
        let d2 = c.d2_summary;
        let row = [
            c.spec.design.as_str().to_string(),
            delta_str(c.spec.strength).to_string(),
            c.spec.estimator.as_str().to_string(),
            c.spec.p.to_string(),
            c.t_len.to_string(),
            c.spec.replicates.to_string(),
            format_number(c.freq_r_correct),
            opt_num(d2.map(|s| s.min)),
            opt_num(d2.map(|s| s.q1)),
            opt_num(d2.map(|s| s.median)),
            opt_num(d2.map(|s| s.q3)),
            opt_num(d2.map(|s| s.max)),
            opt_num(c.coef_error_summary.map(|s| s.median)),
            c.errors_count().to_string(),
            format!("{:.3}", c.wall_time),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

/// Five-number summaries per cell and statistic, for boxplots.
pub fn write_boxplots(path: &Path, cells: &[CellResult]) -> Result<()> {
    let mut out = String::from("cell,design,delta,estimator,p,T,statistic,min,q1,median,q3,max\n");
    for (i, c) in cells.iter().enumerate() {
        let stats: [(&str, Option<FiveNumber>); 2] = [("d2", c.d2_summary), ("coef_err", c.coef_error_summary)];
        for (name, s) in stats {
            let Some(s) = s else { continue };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                i + 1,
                c.spec.design.as_str(),
                delta_str(c.spec.strength),
                c.spec.estimator.as_str(),
                c.spec.p,
                c.t_len,
                name,
                format_number(s.min),
                format_number(s.q1),
                format_number(s.median),
                format_number(s.q3),
                format_number(s.max)
            ));
        }
    }
    write_text(path, &out)
}

/// Per-replicate outcomes, for custom plots.
pub fn write_replicates(path: &Path, cells: &[CellResult]) -> Result<()> {
    let mut out = String::from("cell,replicate,seed,r_hat,d2,coef_err\n");
    for (i, c) in cells.iter().enumerate() {
        for r in &c.replicates {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i + 1,
                r.index + 1,
                r.seed,
                r.r_hat,
                format_number(r.d2),
                opt_num(r.coef_error)
            ));
        }
    }
    write_text(path, &out)
}
