//! Seeded simulation designs with ground truth for scoring.
//!
//! Four designs share the factor block: `r = 3` factors, loadings with
//! i.i.d. `U(-2, 2)` entries (weak case: all but `floor(sqrt(p))` entries of
//! each column zeroed at random) and `N(0, I_p)` noise.
//!
//! * `Stationary`: `z_t` bivariate VAR(1) with coefficients
//!   `[[5/8, 1/8], [1/8, 5/8]]`, `x_t` VAR(1) with diagonal `(0.6, -0.5, 0.3)`.
//! * `Endogenous`: `z_1 = 0.3 x_1 + 0.5 u + 0.5 u^2`, `z_2 = 0.3 x_2 - 0.5 u + 0.5 u^2`
//!   with `u_t = 0.5 u_{t-1} + e_t`; instruments `w_t = (u_t, u_t^2)`.
//! * `Nonstationary`: `x_1` is AR(1) with coefficient 0.8 around the trend
//!   `2t/T`, `x_2 = 3t/T`, `x_3` a random walk with step sd `sqrt(10/T)`.
//! * `Nonlinear`: `y_t = g(u_t) + A x_t + e_t` where the first `p/2` series use
//!   `exp(a u)/(1 + exp(a u))`, `a ~ N(0, 4)`, and the rest `sin(b u)`, `b ~ U(-2, 2)`.
//!
//! Random draws happen in a fixed order: regression parameters (`D` row-major,
//! or the `g` parameters), then `A` row-major, then the weak-case zero
//! pattern column by column, then `burn_in` warm-up steps of the stationary
//! recursions, then for each kept `t` the driving innovations followed by the
//! `p` noise terms. Stationary recursions start at zero and discard `burn_in`
//! steps. The nonstationary trend recursion starts at `x_{1,0} = 0`; the
//! lagged deviation uses the trend at `t - 1`.

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::numerics::orthonormalize;
use crate::panel::Panel;

pub const N_FACTORS: usize = 3;
const X_AR: [f64; 3] = [0.6, -0.5, 0.3];
const Z_VAR: [[f64; 2]; 2] = [[5.0 / 8.0, 1.0 / 8.0], [1.0 / 8.0, 5.0 / 8.0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Design {
    Stationary,
    Endogenous,
    Nonstationary,
    Nonlinear,
}

impl Design {
    pub fn as_str(self) -> &'static str {
        match self {
            Design::Stationary => "stationary",
            Design::Endogenous => "endogenous",
            Design::Nonstationary => "nonstationary",
            Design::Nonlinear => "nonlinear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "stationary" => Design::Stationary,
            "endogenous" => Design::Endogenous,
            "nonstationary" => Design::Nonstationary,
            "nonlinear" => Design::Nonlinear,
            _ => return None,
        })
    }
}

/// Factor strength: `delta = 0` (dense loadings) or `delta = 0.5` (sparse).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strength {
    Strong,
    Weak,
}

impl Strength {
    pub fn delta(self) -> f64 {
        match self {
            Strength::Strong => 0.0,
            Strength::Weak => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpConfig {
    pub design: Design,
    pub p: usize,
    pub t_len: usize,
    pub strength: Strength,
    pub seed: u64,
    pub burn_in: usize,
}

impl DgpConfig {
    pub fn new(design: Design, p: usize, t_len: usize, strength: Strength, seed: u64) -> Self {
        DgpConfig {
            design,
            p,
            t_len,
            strength,
            seed,
            burn_in: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 4 {
            return Err(Error::InvalidArgument(format!("p must be at least 4, got {}", self.p)));
        }
        if self.t_len < 10 {
            return Err(Error::InvalidArgument(format!(
                "T must be at least 10, got {}",
                self.t_len
            )));
        }
        Ok(())
    }
}

/// Parameters of the nonlinear regression function.
#[derive(Debug, Clone, PartialEq)]
pub struct GParams {
    /// Slopes of the logistic series (the first `logistic.len()` rows).
    pub logistic: Vec<f64>,
    /// Frequencies of the sine series (the remaining rows).
    pub sine: Vec<f64>,
}

impl GParams {
    /// `g(u)` for every series.
    pub fn eval(&self, u: f64) -> Array1<f64> {
        self.logistic
            .iter()
            .map(|a| logistic(a * u))
            .chain(self.sine.iter().map(|b| (b * u).sin()))
            .collect()
    }
}

fn logistic(v: f64) -> f64 {
    // exp(v)/(1+exp(v)) without overflow
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// What generated a simulated panel.
#[derive(Debug, Clone)]
pub struct DgpTruth {
    /// `p x m` regression coefficients (`p x 0` for the nonlinear design).
    pub d_true: Array2<f64>,
    /// Raw loadings, `p x r`.
    pub a_true: Array2<f64>,
    /// Orthonormal basis of the column space of `a_true`.
    pub a_basis: Array2<f64>,
    pub x_true: Array2<f64>,
    pub r_true: usize,
    pub delta: f64,
    pub design: Design,
    pub g_params: Option<GParams>,
}

impl DgpTruth {
    /// `A x_t` for every `t`.
    pub fn common(&self) -> Array2<f64> {
        self.a_true.dot(&self.x_true)
    }
}

/// One simulated dataset.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub y: Panel,
    /// Regressors (all linear designs).
    pub z: Option<Panel>,
    /// Instruments (endogenous design).
    pub w: Option<Panel>,
    /// Sieve input (nonlinear design).
    pub u: Option<Panel>,
    pub truth: DgpTruth,
}

impl Simulated {
    /// `y - D z` (or `y - g(u)`) using the true regression part.
    pub fn oracle_residuals(&self) -> Result<Panel> {
        let truth = &self.truth;
        if let (Some(g), Some(u)) = (&truth.g_params, &self.u) {
            let mut eta = self.y.data().clone();
            for (t, &ut) in u.data().row(0).iter().enumerate() {
                let gt = g.eval(ut);
                let mut col = eta.column_mut(t);
                col -= &gt;
            }
            return Panel::new(eta);
        }
        match &self.z {
            Some(z) => crate::regress::residuals(&self.y, z, truth.d_true.view()),
            None => Ok(self.y.clone()),
        }
    }
}

/// Generate a dataset for any design.
pub fn generate(cfg: &DgpConfig) -> Result<Simulated> {
    match cfg.design {
        Design::Stationary => gen_stationary(cfg),
        Design::Endogenous => gen_endogenous(cfg),
        Design::Nonstationary => gen_nonstationary(cfg),
        Design::Nonlinear => gen_nonlinear(cfg),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let dist = Uniform::new(-2.0, 2.0);
    let mut out = Array2::zeros((rows, cols));
    for v in out.iter_mut() {
        *v = dist.sample(rng);
    }
    out
}

/// `floor(sqrt(p))` computed exactly.
fn isqrt(p: usize) -> usize {
    let mut s = (p as f64).sqrt() as usize;
    while s * s > p {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= p {
        s += 1;
    }
    s
}

fn draw_loadings(rng: &mut ChaCha8Rng, p: usize, strength: Strength) -> Array2<f64> {
    let mut a = uniform_matrix(rng, p, N_FACTORS);
    if strength == Strength::Weak {
        let n_zero = p - isqrt(p);
        for j in 0..N_FACTORS {
            for i in sample(rng, p, n_zero).iter() {
                a[[i, j]] = 0.0;
            }
        }
    }
    a
}

fn truth(
    cfg: &DgpConfig,
    d_true: Array2<f64>,
    a_true: Array2<f64>,
    x_true: Array2<f64>,
    g_params: Option<GParams>,
) -> Result<DgpTruth> {
    let a_basis = orthonormalize(a_true.view())?;
    Ok(DgpTruth {
        d_true,
        a_true,
        a_basis,
        x_true,
        r_true: N_FACTORS,
        delta: cfg.strength.delta(),
        design: cfg.design,
        g_params,
    })
}

fn step_z(rng: &mut ChaCha8Rng, z: &mut [f64; 2]) {
    let e = [normal(rng), normal(rng)];
    *z = [
        Z_VAR[0][0] * z[0] + Z_VAR[0][1] * z[1] + e[0],
        Z_VAR[1][0] * z[0] + Z_VAR[1][1] * z[1] + e[1],
    ];
}

fn step_x(rng: &mut ChaCha8Rng, x: &mut [f64; 3]) {
    for (xi, phi) in x.iter_mut().zip(X_AR) {
        *xi = phi * *xi + normal(rng);
    }
}

fn step_u(rng: &mut ChaCha8Rng, u: &mut f64) {
    *u = 0.5 * *u + normal(rng);
}

/// `y[:, t] = regression + A x_t + noise`, drawing the `p` noise terms.
fn fill_observation(rng: &mut ChaCha8Rng, y: &mut Array2<f64>, t: usize, mean: &Array1<f64>) {
    for i in 0..y.nrows() {
        y[[i, t]] = mean[i] + normal(rng);
    }
}

/// Stationary VAR(1) regressors and factors.
pub fn gen_stationary(cfg: &DgpConfig) -> Result<Simulated> {
    cfg.validate()?;
    let (p, t_len) = (cfg.p, cfg.t_len);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = uniform_matrix(&mut rng, p, 2);
    let a = draw_loadings(&mut rng, p, cfg.strength);

    let (mut zs, mut xs) = ([0.0; 2], [0.0; 3]);
    for _ in 0..cfg.burn_in {
        step_z(&mut rng, &mut zs);
        step_x(&mut rng, &mut xs);
    }
    let mut z = Array2::zeros((2, t_len));
    let mut x = Array2::zeros((N_FACTORS, t_len));
    let mut y = Array2::zeros((p, t_len));
    for t in 0..t_len {
        step_z(&mut rng, &mut zs);
        step_x(&mut rng, &mut xs);
        z.column_mut(t).assign(&Array1::from(zs.to_vec()));
        x.column_mut(t).assign(&Array1::from(xs.to_vec()));
        let mean = d.dot(&z.column(t)) + a.dot(&x.column(t));
        fill_observation(&mut rng, &mut y, t, &mean);
    }
    Ok(Simulated {
        y: Panel::new(y)?,
        z: Some(Panel::new(z)?),
        w: None,
        u: None,
        truth: truth(cfg, d, a, x, None)?,
    })
}

/// Regressors correlated with the factors, plus instruments `(u_t, u_t^2)`.
pub fn gen_endogenous(cfg: &DgpConfig) -> Result<Simulated> {
    cfg.validate()?;
    let (p, t_len) = (cfg.p, cfg.t_len);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = uniform_matrix(&mut rng, p, 2);
    let a = draw_loadings(&mut rng, p, cfg.strength);

    let (mut us, mut xs) = (0.0, [0.0; 3]);
    for _ in 0..cfg.burn_in {
        step_u(&mut rng, &mut us);
        step_x(&mut rng, &mut xs);
    }
    let mut z = Array2::zeros((2, t_len));
    let mut w = Array2::zeros((2, t_len));
    let mut x = Array2::zeros((N_FACTORS, t_len));
    let mut y = Array2::zeros((p, t_len));
    for t in 0..t_len {
        step_u(&mut rng, &mut us);
        step_x(&mut rng, &mut xs);
        let u2 = us * us;
        z[[0, t]] = 0.3 * xs[0] + 0.5 * us + 0.5 * u2;
        z[[1, t]] = 0.3 * xs[1] - 0.5 * us + 0.5 * u2;
        w[[0, t]] = us;
        w[[1, t]] = u2;
        x.column_mut(t).assign(&Array1::from(xs.to_vec()));
        let mean = d.dot(&z.column(t)) + a.dot(&x.column(t));
        fill_observation(&mut rng, &mut y, t, &mean);
    }
    Ok(Simulated {
        y: Panel::new(y)?,
        z: Some(Panel::new(z)?),
        w: Some(Panel::new(w)?),
        u: None,
        truth: truth(cfg, d, a, x, None)?,
    })
}

/// Trending, deterministic and random-walk factors with stationary regressors.
pub fn gen_nonstationary(cfg: &DgpConfig) -> Result<Simulated> {
    cfg.validate()?;
    let (p, t_len) = (cfg.p, cfg.t_len);
    let tf = t_len as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = uniform_matrix(&mut rng, p, 2);
    let a = draw_loadings(&mut rng, p, cfg.strength);

    let mut zs = [0.0; 2];
    for _ in 0..cfg.burn_in {
        step_z(&mut rng, &mut zs);
    }
    let walk_sd = (10.0 / tf).sqrt();
    let (mut x1, mut x3) = (0.0, 0.0);
    let mut z = Array2::zeros((2, t_len));
    let mut x = Array2::zeros((N_FACTORS, t_len));
    let mut y = Array2::zeros((p, t_len));
    for t in 0..t_len {
        let step = (t + 1) as f64;
        step_z(&mut rng, &mut zs);
        let e1 = normal(&mut rng);
        let e3 = normal(&mut rng);
        x1 = 2.0 * step / tf + 0.8 * (x1 - 2.0 * (step - 1.0) / tf) + e1;
        x3 += walk_sd * e3;
        z.column_mut(t).assign(&Array1::from(zs.to_vec()));
        x[[0, t]] = x1;
        x[[1, t]] = 3.0 * step / tf;
        x[[2, t]] = x3;
        let mean = d.dot(&z.column(t)) + a.dot(&x.column(t));
        fill_observation(&mut rng, &mut y, t, &mean);
    }
    Ok(Simulated {
        y: Panel::new(y)?,
        z: Some(Panel::new(z)?),
        w: None,
        u: None,
        truth: truth(cfg, d, a, x, None)?,
    })
}

/// Logistic/sine regression function of a scalar AR(1) input.
pub fn gen_nonlinear(cfg: &DgpConfig) -> Result<Simulated> {
    cfg.validate()?;
    let (p, t_len) = (cfg.p, cfg.t_len);
    if p % 2 == 1 {
        log::warn!("odd p = {p}: the first {} series use the logistic function", p / 2);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_logistic = p / 2;
    let logistic_params: Vec<f64> = (0..n_logistic).map(|_| 2.0 * normal(&mut rng)).collect();
    let slope = Uniform::new(-2.0, 2.0);
    let sine_params: Vec<f64> = (n_logistic..p).map(|_| slope.sample(&mut rng)).collect();
    let g = GParams {
        logistic: logistic_params,
        sine: sine_params,
    };
    let a = draw_loadings(&mut rng, p, cfg.strength);

    let (mut us, mut xs) = (0.0, [0.0; 3]);
    for _ in 0..cfg.burn_in {
        step_u(&mut rng, &mut us);
        step_x(&mut rng, &mut xs);
    }
    let mut u = Array2::zeros((1, t_len));
    let mut x = Array2::zeros((N_FACTORS, t_len));
    let mut y = Array2::zeros((p, t_len));
    for t in 0..t_len {
        step_u(&mut rng, &mut us);
        step_x(&mut rng, &mut xs);
        u[[0, t]] = us;
        x.column_mut(t).assign(&Array1::from(xs.to_vec()));
        let mean = g.eval(us) + a.dot(&x.column(t));
        fill_observation(&mut rng, &mut y, t, &mean);
    }
    Ok(Simulated {
        y: Panel::new(y)?,
        z: None,
        w: None,
        u: Some(Panel::new(u)?),
        truth: truth(cfg, Array2::zeros((p, 0)), a, x, Some(g))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::space_distance;

    fn cfg(design: Design, p: usize, t: usize, strength: Strength, seed: u64) -> DgpConfig {
        DgpConfig::new(design, p, t, strength, seed)
    }

    #[test]
    fn stationary_shapes() {
        let sim = gen_stationary(&cfg(Design::Stationary, 8, 20, Strength::Strong, 1)).unwrap();
        assert_eq!((sim.y.dim(), sim.y.len()), (8, 20));
        let z = sim.z.as_ref().unwrap();
        assert_eq!((z.dim(), z.len()), (2, 20));
        assert_eq!(sim.truth.r_true, 3);
        assert_eq!(sim.truth.d_true.dim(), (8, 2));
    }

    #[test]
    fn weak_loadings_sparsity() {
        for p in [16, 20, 50] {
            let sim = gen_stationary(&cfg(Design::Stationary, p, 30, Strength::Weak, 3)).unwrap();
            for col in sim.truth.a_true.columns() {
                let nz = col.iter().filter(|v| **v != 0.0).count();
                assert_eq!(nz, isqrt(p));
            }
        }
        assert_eq!(isqrt(99), 9);
        assert_eq!(isqrt(100), 10);
    }

    #[test]
    fn determinism_and_seed_sensitivity() {
        for design in [Design::Stationary, Design::Endogenous, Design::Nonstationary, Design::Nonlinear] {
            let a = generate(&cfg(design, 10, 30, Strength::Strong, 5)).unwrap();
            let b = generate(&cfg(design, 10, 30, Strength::Strong, 5)).unwrap();
            let c = generate(&cfg(design, 10, 30, Strength::Strong, 6)).unwrap();
            assert_eq!(a.y, b.y);
            assert_eq!(a.truth.a_true, b.truth.a_true);
            assert_ne!(a.y, c.y);
        }
    }

    #[test]
    fn basis_spans_raw_loadings() {
        let sim = gen_stationary(&cfg(Design::Stationary, 30, 20, Strength::Weak, 9)).unwrap();
        let raw = orthonormalize(sim.truth.a_true.view()).unwrap();
        let d = space_distance(raw.view(), sim.truth.a_basis.view()).unwrap();
        assert!(d.value < 1e-10);
    }

    #[test]
    fn endogenous_regressors_correlate_with_factors() {
        let sim = gen_endogenous(&cfg(Design::Endogenous, 10, 400, Strength::Strong, 2)).unwrap();
        let z = sim.z.unwrap();
        let w = sim.w.unwrap();
        assert_eq!(w.data().row(1), w.data().row(0).mapv(|v| v * v));
        let corr = |a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>| {
            let (ma, mb) = (a.mean().unwrap(), b.mean().unwrap());
            let (da, db) = (a.mapv(|v| v - ma), b.mapv(|v| v - mb));
            da.dot(&db) / (da.dot(&da) * db.dot(&db)).sqrt()
        };
        let x = &sim.truth.x_true;
        assert!(corr(z.data().row(0), x.row(0)).abs() > 0.05);
        assert!(corr(z.data().row(1), x.row(1)).abs() > 0.05);
    }

    #[test]
    fn nonstationary_factors() {
        let t = 500;
        let sim = gen_nonstationary(&cfg(Design::Nonstationary, 10, t, Strength::Strong, 4)).unwrap();
        let x = &sim.truth.x_true;
        for s in 0..t {
            assert_eq!(x[[1, s]], 3.0 * (s + 1) as f64 / t as f64);
        }
        assert_eq!(x[[1, t - 1]], 3.0);
        let inc: Vec<f64> = (0..t).map(|s| x[[2, s]] - if s == 0 { 0.0 } else { x[[2, s - 1]] }).collect();
        let mean = inc.iter().sum::<f64>() / t as f64;
        let var = inc.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (t - 1) as f64;
        let target = 10.0 / t as f64;
        assert!((var - target).abs() < 0.3 * target, "increment variance {var}");
    }

    #[test]
    fn nonlinear_ranges() {
        let sim = gen_nonlinear(&cfg(Design::Nonlinear, 12, 50, Strength::Strong, 8)).unwrap();
        let g = sim.truth.g_params.as_ref().unwrap();
        assert_eq!(g.logistic.len(), 6);
        assert_eq!(g.sine.len(), 6);
        for &u in sim.u.as_ref().unwrap().data().iter() {
            let vals = g.eval(u);
            assert!(vals.iter().take(6).all(|v| *v > 0.0 && *v < 1.0));
            assert!(vals.iter().skip(6).all(|v| (-1.0..=1.0).contains(v)));
        }
        // y - g(u) - A x is pure noise
        let eta = sim.oracle_residuals().unwrap();
        let noise = eta.data() - &sim.truth.common();
        let var = noise.mapv(|v| v * v).mean().unwrap();
        assert!((var - 1.0).abs() < 0.15);
    }

    #[test]
    fn rejects_tiny_configs() {
        assert!(generate(&cfg(Design::Stationary, 3, 20, Strength::Strong, 0)).is_err());
        assert!(generate(&cfg(Design::Stationary, 8, 9, Strength::Strong, 0)).is_err());
    }
}
