//! Seeded Monte Carlo experiments over the simulation designs.
//!
//! Replicate `i` of a cell draws its data from
//! `replicate_seed(master_seed, i)`, so a cell's output depends only on its
//! [`ExperimentSpec`], never on the number of worker threads or on scheduling order.

use std::time::Instant;

use rayon::prelude::*;

use crate::dgp::{generate, Design, DgpConfig, Simulated, Strength};
use crate::error::{Error, Result};
use crate::factorspace::{fit_residuals_with_stat, FactorCount, FitOptions};
use crate::metrics::{coef_error, space_distance_mixed};
use crate::panel::{FitMethod, Panel};
use crate::regress::{default_sieve_order, iv_fit, ols_fit, residuals, sieve_fit, IvConfig, SieveBasis};

/// Sample-size rule relative to the dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TRule {
    HalfP,
    P,
    OneHalfP,
    Explicit(usize),
}

impl TRule {
    pub fn resolve(self, p: usize) -> usize {
        match self {
            TRule::HalfP => p / 2,
            TRule::P => p,
            TRule::OneHalfP => 3 * p / 2,
            TRule::Explicit(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    /// Residuals from the true regression part.
    KnownD,
    Ols,
    Iv,
    Sieve,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::KnownD => "known_d",
            Estimator::Ols => "ols",
            Estimator::Iv => "iv",
            Estimator::Sieve => "sieve",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "known_d" => Estimator::KnownD,
            "ols" => Estimator::Ols,
            "iv" => Estimator::Iv,
            "sieve" => Estimator::Sieve,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KBarRule {
    Fixed(usize),
    /// `floor(2 T^{1/5})`
    Sieve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RMode {
    /// Loadings use the ratio estimate; loading error is the mixed-dimension distance.
    AutoRatio,
    Fixed(usize),
}

/// One cell of a simulation table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub design: Design,
    pub strength: Strength,
    pub p: usize,
    pub t_rule: TRule,
    pub replicates: usize,
    pub estimator: Estimator,
    /// `None`: 1 for linear designs, the sieve rule for the nonlinear design.
    pub k_bar: Option<KBarRule>,
    pub r_mode: RMode,
    /// Sieve size; `None` means `floor(2 T^{1/5})`.
    pub sieve_m: Option<usize>,
    pub master_seed: u64,
    pub burn_in: usize,
}

impl ExperimentSpec {
    pub fn new(design: Design, strength: Strength, p: usize, t_rule: TRule, estimator: Estimator, master_seed: u64) -> Self {
        ExperimentSpec {
            design,
            strength,
            p,
            t_rule,
            replicates: 200,
            estimator,
            k_bar: None,
            r_mode: RMode::AutoRatio,
            sieve_m: None,
            master_seed,
            burn_in: 100,
        }
    }

    pub fn t_len(&self) -> usize {
        self.t_rule.resolve(self.p)
    }

    pub fn k_bar(&self) -> usize {
        let rule = self.k_bar.unwrap_or(match self.design {
            Design::Nonlinear => KBarRule::Sieve,
            _ => KBarRule::Fixed(1),
        });
        match rule {
            KBarRule::Fixed(k) => k,
            KBarRule::Sieve => default_sieve_order(self.t_len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        if self.t_len() < 10 {
            return Err(Error::InvalidArgument(format!(
                "T resolves to {} (< 10) for p = {}",
                self.t_len(),
                self.p
            )));
        }
        let ok = match (self.estimator, self.design) {
            (Estimator::KnownD, _) => true,
            (Estimator::Ols, d) => d != Design::Nonlinear,
            (Estimator::Iv, d) => d == Design::Endogenous,
            (Estimator::Sieve, d) => d == Design::Nonlinear,
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "estimator {} does not apply to the {} design",
                self.estimator.as_str(),
                self.design.as_str()
            )));
        }
        if let RMode::Fixed(0) = self.r_mode {
            return Err(Error::InvalidArgument("fixed r must be at least 1".into()));
        }
        DgpConfig::new(self.design, self.p, self.t_len(), self.strength, 0).validate()
    }

    fn dgp_config(&self, seed: u64) -> DgpConfig {
        let mut cfg = DgpConfig::new(self.design, self.p, self.t_len(), self.strength, seed);
        cfg.burn_in = self.burn_in;
        cfg
    }
}

/// SplitMix64 output function.
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index`: `splitmix64(master + (index + 1) * 0x9E3779B97F4A7C15)`.
pub fn replicate_seed(master_seed: u64, index: usize) -> u64 {
    splitmix64(master_seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Minimum, quartiles and maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data: position `h = (n-1) q`.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Five-number summary with linearly interpolated quartiles.
pub fn summarize_boxplot(values: &[f64]) -> Result<FiveNumber> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(FiveNumber {
        min: v[0],
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
    })
}

/// Outcome of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub index: usize,
    pub seed: u64,
    pub r_hat: usize,
    /// Squared loading-space distance to the truth.
    pub d2: f64,
    /// `p^{-1/2} ||D_hat - D||_F`; absent for known-`D` and sieve fits.
    pub coef_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub spec: ExperimentSpec,
    pub t_len: usize,
    pub k_bar: usize,
    pub replicates: Vec<Replicate>,
    /// `(replicate index, message)` for replicates whose fit failed.
    pub failures: Vec<(usize, String)>,
    pub freq_r_correct: f64,
    pub d2_summary: Option<FiveNumber>,
    pub coef_error_summary: Option<FiveNumber>,
    pub wall_time: f64,
}

impl CellResult {
    pub fn errors_count(&self) -> usize {
        self.failures.len()
    }

    /// Equality of everything except timing.
    pub fn same_outcome(&self, other: &CellResult) -> bool {
        self.spec == other.spec
            && self.replicates == other.replicates
            && self.failures == other.failures
            && self.freq_r_correct.to_bits() == other.freq_r_correct.to_bits()
            && self.d2_summary == other.d2_summary
            && self.coef_error_summary == other.coef_error_summary
    }
}

/// `(r_hat, D^2, coefficient error)` of one replicate.
pub type Score = (usize, f64, Option<f64>);

/// Fit one simulated dataset according to the cell's estimator and score it.
pub fn score_replicate(spec: &ExperimentSpec, sim: &Simulated) -> Result<Score> {
    let truth = &sim.truth;
    let p = sim.y.dim();
    let need = |opt: &Option<Panel>, what: &str| -> Result<Panel> {
        opt.clone()
            .ok_or_else(|| Error::InvalidArgument(format!("design provides no {what}")))
    };
    let (d_hat, eta, method) = match spec.estimator {
        Estimator::KnownD => (truth.d_true.clone(), sim.oracle_residuals()?, FitMethod::KnownD),
        Estimator::Ols => {
            let z = need(&sim.z, "regressors")?;
            let d = ols_fit(&sim.y, &z, 0.0)?;
            let eta = residuals(&sim.y, &z, d.view())?;
            (d, eta, FitMethod::Ols)
        }
        Estimator::Iv => {
            let z = need(&sim.z, "regressors")?;
            let w = need(&sim.w, "instruments")?;
            let d = iv_fit(&sim.y, &z, &w, &IvConfig::default())?;
            let eta = residuals(&sim.y, &z, d.view())?;
            (d, eta, FitMethod::Iv)
        }
        Estimator::Sieve => {
            let u = need(&sim.u, "sieve input")?;
            let m = spec.sieve_m.unwrap_or_else(|| default_sieve_order(sim.y.len()));
            let (d, z) = sieve_fit(&sim.y, &u, &SieveBasis::polynomial(m), 0.0)?;
            let eta = residuals(&sim.y, &z, d.view())?;
            (d, eta, FitMethod::Sieve)
        }
    };
    let opts = FitOptions {
        k_bar: Some(spec.k_bar()),
        r: match spec.r_mode {
            RMode::AutoRatio => FactorCount::Auto,
            RMode::Fixed(r) => FactorCount::Fixed(r.min(p)),
        },
        ..FitOptions::default()
    };
    let coef = match spec.estimator {
        Estimator::Ols | Estimator::Iv => Some(coef_error(d_hat.view(), truth.d_true.view())?),
        _ => None,
    };
    let (fit, _) = fit_residuals_with_stat(d_hat, &eta, method, &opts)?;
    let dist = space_distance_mixed(fit.loadings.view(), truth.a_basis.view())?;
    Ok((fit.r_ratio, dist.value * dist.value, coef))
}

/// Run every replicate of one cell on `workers` threads (0 = rayon default).
pub fn run_cell(spec: &ExperimentSpec, workers: usize) -> Result<CellResult> {
    spec.validate()?;
    let start = Instant::now();
    let one = |i: usize| -> (usize, u64, Result<Score>) {
        let seed = replicate_seed(spec.master_seed, i);
        let out = generate(&spec.dgp_config(seed)).and_then(|sim| score_replicate(spec, &sim));
        (i, seed, out)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let raw: Vec<_> = pool.install(|| (0..spec.replicates).into_par_iter().map(one).collect());

    let r_true = crate::dgp::N_FACTORS;
    let mut replicates = Vec::with_capacity(raw.len());
    let mut failures = Vec::new();
    for (index, seed, out) in raw {
        match out {
            Ok((r_hat, d2, coef_error)) => replicates.push(Replicate {
                index,
                seed,
                r_hat,
                d2,
                coef_error,
            }),
            Err(e) => failures.push((index, e.to_string())),
        }
    }
    let hits = replicates.iter().filter(|r| r.r_hat == r_true).count();
    let freq_r_correct = hits as f64 / spec.replicates as f64;
    let d2: Vec<f64> = replicates.iter().map(|r| r.d2).collect();
    let coef: Vec<f64> = replicates.iter().filter_map(|r| r.coef_error).collect();
    Ok(CellResult {
        spec: spec.clone(),
        t_len: spec.t_len(),
        k_bar: spec.k_bar(),
        d2_summary: summarize_boxplot(&d2).ok(),
        coef_error_summary: summarize_boxplot(&coef).ok(),
        replicates,
        failures,
        freq_r_correct,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Run cells in order.
pub fn run_table(specs: &[ExperimentSpec], workers: usize) -> Result<Vec<CellResult>> {
    if specs.is_empty() {
        return Err(Error::Empty);
    }
    specs.iter().map(|s| run_cell(s, workers)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boxplot_hand_cases() {
        let s = summarize_boxplot(&[5.0, 3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!(
            s,
            FiveNumber {
                min: 1.0,
                q1: 2.0,
                median: 3.0,
                q3: 4.0,
                max: 5.0
            }
        );
        let c = summarize_boxplot(&[2.5; 4]).unwrap();
        assert!([c.min, c.q1, c.median, c.q3, c.max].iter().all(|v| *v == 2.5));
        let one = summarize_boxplot(&[-1.0]).unwrap();
        assert!([one.min, one.q1, one.median, one.q3, one.max].iter().all(|v| *v == -1.0));
        // h = 0.75 for n = 4: 1 + 0.75 * (2 - 1)
        let four = summarize_boxplot(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(four.q1, 1.75);
        assert_eq!(four.median, 2.5);
        assert!(matches!(summarize_boxplot(&[]), Err(Error::Empty)));
    }

    #[test]
    fn t_rules() {
        assert_eq!(TRule::HalfP.resolve(100), 50);
        assert_eq!(TRule::P.resolve(100), 100);
        assert_eq!(TRule::OneHalfP.resolve(100), 150);
        assert_eq!(TRule::Explicit(77).resolve(100), 77);
    }

    #[test]
    fn seeds_differ_by_index() {
        let s: Vec<u64> = (0..100).map(|i| replicate_seed(7, i)).collect();
        let mut d = s.clone();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), 100);
        assert_eq!(replicate_seed(7, 3), replicate_seed(7, 3));
        assert_ne!(replicate_seed(7, 3), replicate_seed(8, 3));
    }

    #[test]
    fn spec_validation() {
        let mut s = ExperimentSpec::new(Design::Nonlinear, Strength::Strong, 20, TRule::P, Estimator::Ols, 1);
        assert!(s.validate().is_err());
        s.estimator = Estimator::Sieve;
        assert!(s.validate().is_ok());
        s.replicates = 0;
        assert!(s.validate().is_err());
        let s = ExperimentSpec::new(Design::Stationary, Strength::Strong, 20, TRule::Explicit(5), Estimator::Ols, 1);
        assert!(s.validate().is_err());
        let s = ExperimentSpec::new(Design::Stationary, Strength::Strong, 20, TRule::P, Estimator::Iv, 1);
        assert!(s.validate().is_err());
    }

    #[test]
    fn single_replicate_frequency_is_binary() {
        let mut s = ExperimentSpec::new(Design::Stationary, Strength::Strong, 30, TRule::P, Estimator::Ols, 11);
        s.replicates = 1;
        let r = run_cell(&s, 1).unwrap();
        assert!(r.freq_r_correct == 0.0 || r.freq_r_correct == 1.0);
        assert_eq!(r.errors_count(), 0);
    }

    #[test]
    fn default_lag_rule_by_design() {
        let s = ExperimentSpec::new(Design::Nonlinear, Strength::Strong, 100, TRule::OneHalfP, Estimator::Sieve, 1);
        assert_eq!(s.k_bar(), 5);
        let s = ExperimentSpec::new(Design::Stationary, Strength::Strong, 100, TRule::OneHalfP, Estimator::Ols, 1);
        assert_eq!(s.k_bar(), 1);
    }
}
