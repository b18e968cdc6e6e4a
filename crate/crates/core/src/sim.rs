//! Simulation designs, outlier injection and repeated-fit experiments.
//!
//! Every replicate draws from its own ChaCha8 stream (`master_seed`, stream =
//! replicate index), so results do not depend on scheduling.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Gamma, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{loess_fit_predict, LoessConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fit::{fit, Hyperparams, ModelConfig};
use crate::kernel::{kernel_matrix, KernelParams};
use crate::linalg::{Cholesky, Matrix};
use crate::predict::predict_f;

/// Data-generating process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    /// `f ~ GP(h, k)`, `ε ~ N(0, φ)`.
    C1,
    /// As `C1`, second parameter set.
    C2,
    /// `f ~ GP(h, k)`, `ε ~ φ t₂`.
    C3,
    /// As `C3`, second parameter set.
    C4,
    /// `(f, ε)` jointly extended-t with one shared scale.
    C5,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanFn {
    Zero,
    Cos,
    Cos2,
    H1,
    H2,
}

impl MeanFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            MeanFn::Zero => 0.0,
            MeanFn::Cos => x[0].cos(),
            MeanFn::Cos2 => (2.0 * x[0]).cos(),
            MeanFn::H1 => 0.5 * x[0] * x[0].abs().cbrt() - 3.0 * x[1].cos() + x[2].ln(),
            MeanFn::H2 => 0.2 * x[0].powi(3) + x[1].sin() + 0.2 * x[2].exp(),
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            MeanFn::Zero => None,
            MeanFn::Cos | MeanFn::Cos2 => Some(1),
            MeanFn::H1 | MeanFn::H2 => Some(3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    /// `n_dense` points evenly spaced on `[dense_lo, dense_hi]` plus one point at
    /// `sparse_x`; test points are `n_test` interior points of `(0, test_hi)`.
    Sparse { n_dense: usize, dense_lo: f64, dense_hi: f64, sparse_x: f64, n_test: usize, test_hi: f64 },
    /// `grid_size` index-aligned points evenly spaced inside each open
    /// interval; `n_train` taken at random for training, the rest for testing.
    GridSplit { domains: Vec<(f64, f64)>, grid_size: usize, n_train: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum NoiseLaw {
    Normal { variance: f64 },
    /// `scale · t₂`.
    ScaledT2 { scale: f64 },
    /// Standard Cauchy (`t₁`).
    Cauchy,
    Constant { delta: f64 },
}

impl NoiseLaw {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseLaw::Normal { variance } => variance.sqrt() * rng.sample::<f64, _>(StandardNormal),
            NoiseLaw::ScaledT2 { scale } => scale * StudentT::new(2.0).expect("t2").sample(rng),
            NoiseLaw::Cauchy => Cauchy::new(0.0, 1.0).expect("cauchy").sample(rng),
            NoiseLaw::Constant { delta } => delta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "placement", content = "indices", rename_all = "snake_case")]
pub enum Placement {
    Random,
    /// Training-row indices; `usize::MAX` stands for the last row.
    Fixed(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierSpec {
    pub count: usize,
    pub placement: Placement,
    pub noise: NoiseLaw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub name: String,
    pub case: Case,
    /// `(φ, θ0, θ1.., θ2..)`.
    pub beta_true: Vec<f64>,
    pub mean_fn: MeanFn,
    pub design: Design,
    pub outliers: Option<OutlierSpec>,
    /// `(ν, ω)` of the shared scale under `C5`.
    pub etp_nu_omega: Option<(f64, f64)>,
    /// Inputs at which every method's prediction is recorded per replicate.
    #[serde(default)]
    pub probes: Vec<Vec<f64>>,
}

const BETA1_1D: [f64; 4] = [0.1, 0.01, 10.0, 0.01];
const BETA2_1D: [f64; 4] = [0.2, 0.2, 10.0, 0.1];
const BETA3_1D: [f64; 4] = [0.1, 0.02, 10.0, 0.02];
const BETA1_3D: [f64; 8] = [0.1, 0.01, 10.0, 10.0, 10.0, 0.01, 0.01, 0.01];
const BETA2_3D: [f64; 8] = [0.2, 0.05, 10.0, 10.0, 10.0, 0.05, 0.05, 0.05];
const BETA3_3D: [f64; 8] = [0.1, 0.02, 10.0, 10.0, 10.0, 0.02, 0.02, 0.02];
const SPARSE_BETA: [f64; 4] = [0.1, 0.05, 10.0, 0.05];
pub const FIG3_PROBES: [f64; 5] = [0.0, 1.0, 1.5, 1.8, 2.0];

impl SimScenario {
    fn sparse(name: String, n: usize, outliers: Option<OutlierSpec>, probes: Vec<Vec<f64>>) -> Self {
        Self {
            name,
            case: Case::C1,
            beta_true: SPARSE_BETA.to_vec(),
            mean_fn: MeanFn::Zero,
            design: Design::Sparse { n_dense: n - 1, dense_lo: 0.0, dense_hi: 1.5, sparse_x: 2.0, n_test: 30, test_hi: 2.0 },
            outliers,
            etp_nu_omega: None,
            probes,
        }
    }

    fn case_beta(case: Case, dim: usize) -> Vec<f64> {
        let (b1, b2, b3): (&[f64], &[f64], &[f64]) =
            if dim == 1 { (&BETA1_1D, &BETA2_1D, &BETA3_1D) } else { (&BETA1_3D, &BETA2_3D, &BETA3_3D) };
        match case {
            Case::C1 | Case::C3 => b1.to_vec(),
            Case::C2 | Case::C4 => b2.to_vec(),
            Case::C5 => b3.to_vec(),
        }
    }

    /// Scenario for one row of the output-outlier study. `clean` drops the
    /// injected `t₁` errors of cases 1, 2 and 5.
    pub fn robustness(case: Case, mean_fn: MeanFn, clean: bool) -> Result<Self> {
        let dim = mean_fn.dim().ok_or_else(|| Error::Scenario("robustness study needs a non-zero mean".into()))?;
        let (design, count) = if dim == 1 {
            (Design::GridSplit { domains: vec![(0.0, 3.0)], grid_size: 40, n_train: 10 }, 1)
        } else {
            (Design::GridSplit { domains: vec![(-2.0, 2.0), (0.0, 3.0), (1.0, 2.0)], grid_size: 80, n_train: 30 }, 2)
        };
        let outliers = match case {
            Case::C1 | Case::C2 | Case::C5 if !clean => {
                Some(OutlierSpec { count, placement: Placement::Random, noise: NoiseLaw::Cauchy })
            }
            _ => None,
        };
        let table = if dim == 1 { "table2" } else { "table3" };
        let fname = match mean_fn {
            MeanFn::Cos => "cosx",
            MeanFn::Cos2 => "cos2x",
            MeanFn::H1 => "h1",
            MeanFn::H2 => "h2",
            MeanFn::Zero => unreachable!(),
        };
        let tag = if clean { "clean-" } else { "" };
        let k = case as usize + 1;
        Ok(Self {
            name: format!("{table}-{tag}case{k}-{fname}"),
            case,
            beta_true: Self::case_beta(case, dim),
            mean_fn,
            design,
            outliers,
            etp_nu_omega: (case == Case::C5).then_some((2.0, 2.0)),
            probes: Vec::new(),
        })
    }

    /// Look up a named scenario.
    pub fn named(name: &str) -> Result<Self> {
        let unknown = || Error::Scenario(format!("unknown scenario '{name}'"));
        let parts: Vec<&str> = name.split('-').collect();
        let parse_case = |s: &str| -> Option<Case> {
            match s {
                "case1" => Some(Case::C1),
                "case2" => Some(Case::C2),
                "case3" => Some(Case::C3),
                "case4" => Some(Case::C4),
                "case5" => Some(Case::C5),
                _ => None,
            }
        };
        match parts.as_slice() {
            ["table1", law, s2] => {
                let sigma2: f64 = s2.parse().map_err(|_| unknown())?;
                if !(sigma2 > 0.0) {
                    return Err(unknown());
                }
                let noise = match *law {
                    "normal" => NoiseLaw::Normal { variance: sigma2 },
                    "t" => NoiseLaw::ScaledT2 { scale: sigma2.sqrt() },
                    _ => return Err(unknown()),
                };
                let spec = OutlierSpec { count: 1, placement: Placement::Fixed(vec![usize::MAX]), noise };
                Ok(Self::sparse(name.to_string(), 10, Some(spec), Vec::new()))
            }
            ["fig1"] => Ok(Self::sparse(name.to_string(), 10, None, Vec::new())),
            ["fig3"] => Self::named("fig3-n10-d2").map(|s| Self { name: name.to_string(), ..s }),
            ["fig3", ..] => {
                // fig3-n<size>-d<delta>, delta may be negative
                let (n, d) = name.strip_prefix("fig3-n").and_then(|r| r.split_once("-d")).ok_or_else(unknown)?;
                let n: usize = n.parse().ok().filter(|&v| v >= 3).ok_or_else(unknown)?;
                let delta: f64 = d.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(unknown)?;
                let spec = OutlierSpec { count: 1, placement: Placement::Fixed(vec![usize::MAX]), noise: NoiseLaw::Constant { delta } };
                let probes = FIG3_PROBES.iter().map(|&u| vec![u]).collect();
                Ok(Self::sparse(name.to_string(), n, Some(spec), probes))
            }
            [table @ ("table2" | "table3"), rest @ ..] => {
                let (clean, rest) = match rest {
                    ["clean", r @ ..] => (true, r),
                    r => (false, r),
                };
                let [c, f] = rest else { return Err(unknown()) };
                let case = parse_case(c).ok_or_else(unknown)?;
                let mean_fn = match (*table, *f) {
                    ("table2", "cosx") => MeanFn::Cos,
                    ("table2", "cos2x") => MeanFn::Cos2,
                    ("table3", "h1") => MeanFn::H1,
                    ("table3", "h2") => MeanFn::H2,
                    _ => return Err(unknown()),
                };
                if clean && !matches!(case, Case::C1 | Case::C2) {
                    return Err(unknown());
                }
                Self::robustness(case, mean_fn, clean)
            }
            _ => Err(unknown()),
        }
    }

    /// Every built-in scenario name.
    pub fn names() -> Vec<String> {
        let mut out = Vec::new();
        for law in ["normal", "t"] {
            for s in 1..=4 {
                out.push(format!("table1-{law}-{s}"));
            }
        }
        for f in ["cosx", "cos2x"] {
            for c in 1..=5 {
                out.push(format!("table2-case{c}-{f}"));
            }
            for c in 1..=2 {
                out.push(format!("table2-clean-case{c}-{f}"));
            }
        }
        for f in ["h1", "h2"] {
            for c in 1..=5 {
                out.push(format!("table3-case{c}-{f}"));
            }
            for c in 1..=2 {
                out.push(format!("table3-clean-case{c}-{f}"));
            }
        }
        out.push("fig1".into());
        out.push("fig3".into());
        for n in [10, 50] {
            for d in [-2, -1, 0, 1, 2] {
                out.push(format!("fig3-n{n}-d{d}"));
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        match &self.design {
            Design::Sparse { .. } => 1,
            Design::GridSplit { domains, .. } => domains.len(),
        }
    }

    pub fn beta(&self) -> Result<Hyperparams<f64>> {
        let b = Hyperparams::from_slice(&self.beta_true)?;
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dim();
        if self.beta_true.len() != 2 + 2 * p {
            return Err(Error::Scenario(format!("beta_true needs {} entries for {p} covariates", 2 + 2 * p)));
        }
        self.beta()?;
        if let Some(d) = self.mean_fn.dim() {
            if d != p {
                return Err(Error::Scenario(format!("mean function expects {d} covariates, design has {p}")));
            }
        }
        match &self.design {
            Design::Sparse { n_dense, dense_lo, dense_hi, sparse_x, n_test, test_hi } => {
                if *n_dense < 2 || *n_test == 0 || !(dense_hi > dense_lo) || !(test_hi > &0.0) {
                    return Err(Error::Scenario("degenerate sparse design".into()));
                }
                if !sparse_x.is_finite() {
                    return Err(Error::Scenario("sparse point must be finite".into()));
                }
            }
            Design::GridSplit { domains, grid_size, n_train } => {
                if domains.is_empty() || domains.iter().any(|(lo, hi)| !(hi > lo)) {
                    return Err(Error::Scenario("empty or reversed domain".into()));
                }
                if *n_train < 2 || n_train >= grid_size {
                    return Err(Error::Scenario(format!("cannot split {grid_size} grid points with {n_train} for training")));
                }
            }
        }
        match (self.case, self.etp_nu_omega) {
            (Case::C5, Some((nu, omega))) if nu > 0.0 && omega > 0.0 => {}
            (Case::C5, _) => return Err(Error::Scenario("case 5 needs positive (nu, omega)".into())),
            (_, Some(_)) => return Err(Error::Scenario("(nu, omega) only applies to case 5".into())),
            _ => {}
        }
        if self.probes.iter().any(|u| u.len() != p) {
            return Err(Error::Scenario("probe dimension differs from design".into()));
        }
        Ok(())
    }
}

/// Gaussian process or extended t-process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathKind {
    Gp,
    Etp { nu: f64, omega: f64 },
}

fn gaussian_draw<R: Rng + ?Sized>(cov: &Matrix<f64>, rng: &mut R) -> Result<Vec<f64>> {
    let n = cov.rows();
    if cov.max_abs() == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let (chol, _) = Cholesky::with_jitter(cov, 0.0, 20)?;
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    Ok(chol.mul_lower(&z))
}

/// `r ~ IG(ν, ω)` as the reciprocal of a `Gamma(ν, rate ω)` draw.
pub fn draw_inverse_gamma<R: Rng + ?Sized>(nu: f64, omega: f64, rng: &mut R) -> Result<f64> {
    let g = Gamma::new(nu, 1.0 / omega).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(1.0 / g.sample(rng))
}

/// One zero-mean path of the process at the rows of `x`.
pub fn sample_path<R: Rng + ?Sized>(kind: PathKind, x: &Matrix<f64>, params: &KernelParams<f64>, rng: &mut R) -> Result<Vec<f64>> {
    let k = kernel_matrix(x, params, 0.0)?;
    match kind {
        PathKind::Gp => gaussian_draw(&k, rng),
        PathKind::Etp { nu, omega } => {
            let r = draw_inverse_gamma(nu, omega, rng)?;
            Ok(gaussian_draw(&k, rng)?.into_iter().map(|v| r.sqrt() * v).collect())
        }
    }
}

/// Training set plus held-out inputs with the true mean as response.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub train: Dataset<f64>,
    pub test: Dataset<f64>,
}

fn open_grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (1..=m).map(|j| lo + (hi - lo) * j as f64 / (m + 1) as f64).collect()
}

fn closed_grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (0..m).map(|j| lo + (hi - lo) * j as f64 / (m - 1) as f64).collect()
}

/// Draw one dataset from the scenario's design and process model, before
/// any outlier injection.
pub fn generate_dataset<R: Rng + ?Sized>(scenario: &SimScenario, rng: &mut R) -> Result<Generated> {
    scenario.validate()?;
    let beta = scenario.beta()?;
    let (train_x, test_x) = match &scenario.design {
        Design::Sparse { n_dense, dense_lo, dense_hi, sparse_x, n_test, test_hi } => {
            let mut xs = closed_grid(*dense_lo, *dense_hi, *n_dense);
            xs.push(*sparse_x);
            let n = xs.len();
            (Matrix::from_row_major(n, 1, xs)?, Matrix::from_row_major(*n_test, 1, open_grid(0.0, *test_hi, *n_test))?)
        }
        Design::GridSplit { domains, grid_size, n_train } => {
            let axes: Vec<Vec<f64>> = domains.iter().map(|&(lo, hi)| open_grid(lo, hi, *grid_size)).collect();
            let mut chosen = sample_indices(rng, *grid_size, *n_train).into_vec();
            chosen.sort_unstable();
            let rest: Vec<usize> = (0..*grid_size).filter(|i| chosen.binary_search(i).is_err()).collect();
            let build = |idx: &[usize]| Matrix::from_fn(idx.len(), axes.len(), |i, l| axes[l][idx[i]]);
            (build(&chosen), build(&rest))
        }
    };
    let n = train_x.rows();
    let h: Vec<f64> = (0..n).map(|i| scenario.mean_fn.eval(train_x.row(i))).collect();
    let phi = beta.phi;
    let noise: Vec<f64>;
    let f: Vec<f64>;
    match scenario.case {
        Case::C1 | Case::C2 => {
            f = sample_path(PathKind::Gp, &train_x, &beta.kernel, rng)?;
            noise = (0..n).map(|_| phi.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
        }
        Case::C3 | Case::C4 => {
            f = sample_path(PathKind::Gp, &train_x, &beta.kernel, rng)?;
            let t2 = StudentT::new(2.0).expect("t2");
            noise = (0..n).map(|_| phi * t2.sample(rng)).collect();
        }
        Case::C5 => {
            let (nu, omega) = scenario.etp_nu_omega.expect("validated");
            let r = draw_inverse_gamma(nu, omega, rng)?;
            let base = sample_path(PathKind::Gp, &train_x, &beta.kernel, rng)?;
            f = base.into_iter().map(|v| r.sqrt() * v).collect();
            noise = (0..n).map(|_| (r * phi).sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
        }
    }
    let y = (0..n).map(|i| h[i] + f[i] + noise[i]).collect();
    let truth = (0..test_x.rows()).map(|j| scenario.mean_fn.eval(test_x.row(j))).collect();
    Ok(Generated { train: Dataset::new(train_x, y)?, test: Dataset::new(test_x, truth)? })
}

/// Add the specified disturbance to the chosen training responses. Returns
/// the disturbed dataset and the rows that were changed.
pub fn inject_outliers<R: Rng + ?Sized>(train: &Dataset<f64>, spec: &OutlierSpec, rng: &mut R) -> Result<(Dataset<f64>, Vec<usize>)> {
    let n = train.len();
    if spec.count > n {
        return Err(Error::Scenario(format!("cannot disturb {} of {n} points", spec.count)));
    }
    let rows: Vec<usize> = match &spec.placement {
        Placement::Random => sample_indices(rng, n, spec.count).into_vec(),
        Placement::Fixed(idx) => {
            let rows: Vec<usize> = idx.iter().map(|&i| if i == usize::MAX { n - 1 } else { i }).collect();
            if rows.len() != spec.count || rows.iter().any(|&i| i >= n) {
                return Err(Error::Scenario("fixed outlier rows do not match the count or the data".into()));
            }
            rows
        }
    };
    let mut out = train.clone();
    for &i in &rows {
        out.y[i] += spec.noise.draw(rng);
    }
    Ok((out, rows))
}

/// Mean squared deviation between predictions and truth.
pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), found: pred.len() });
    }
    if pred.is_empty() {
        return Err(Error::InvalidParameter("no predictions".into()));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Loess,
    Gpr,
    Etpr,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Loess, Method::Gpr, Method::Etpr];
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Loess => "LOESS",
            Method::Gpr => "GPR",
            Method::Etpr => "eTPR",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub methods: Vec<Method>,
    pub reps: usize,
    pub master_seed: u64,
    pub nu: f64,
    pub loess: LoessConfig<f64>,
    pub jitter: f64,
}

impl ExperimentSettings {
    pub fn new(methods: &[Method], reps: usize, master_seed: u64) -> Self {
        Self { methods: methods.to_vec(), reps, master_seed, nu: 1.05, loess: LoessConfig::default(), jitter: 1e-8 }
    }
}

/// One method's outcome on one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: Method,
    pub mse: Option<f64>,
    pub converged: bool,
    /// Predictions at the scenario's probe inputs.
    pub probes: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub rep: usize,
    /// Stream id of this replicate's generator under the master seed.
    pub stream: u64,
    pub outlier_rows: Vec<usize>,
    pub methods: Vec<MethodRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_mse: f64,
    pub sd_mse: f64,
    pub succeeded: usize,
    pub failed: usize,
    pub unconverged: usize,
    pub mean_probes: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scenario: SimScenario,
    pub settings: ExperimentSettings,
    pub reps: usize,
    pub summaries: Vec<MethodSummary>,
    pub records: Vec<ReplicateRecord>,
}

impl ExperimentResult {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    pub fn failed_replicates(&self) -> usize {
        self.records.iter().filter(|r| r.methods.iter().any(|m| m.mse.is_none())).count()
    }
}

/// Generator for replicate `rep` under `master_seed`.
pub fn replicate_rng(master_seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(rep as u64);
    rng
}

fn run_method(
    method: Method,
    train: &Dataset<f64>,
    inputs: &Matrix<f64>,
    settings: &ExperimentSettings,
    opt_seed: u64,
) -> std::result::Result<(Vec<f64>, bool), Error> {
    match method {
        Method::Loess => Ok((loess_fit_predict(train, inputs, &settings.loess)?, true)),
        Method::Gpr | Method::Etpr => {
            let mut cfg = if method == Method::Gpr { ModelConfig::gpr() } else { ModelConfig::etpr().with_nu(settings.nu) };
            cfg.jitter = settings.jitter;
            cfg.optimizer.seed = opt_seed;
            let model = fit(train, &cfg)?;
            let preds = predict_f(&model, train, inputs)?;
            Ok((preds.iter().map(|p| p.mean).collect(), model.converged))
        }
    }
}

fn run_replicate(scenario: &SimScenario, settings: &ExperimentSettings, rep: usize) -> Result<ReplicateRecord> {
    let mut rng = replicate_rng(settings.master_seed, rep);
    let data = generate_dataset(scenario, &mut rng)?;
    let (train, outlier_rows) = match &scenario.outliers {
        Some(spec) => inject_outliers(&data.train, spec, &mut rng)?,
        None => (data.train.clone(), Vec::new()),
    };
    let opt_seed: u64 = rng.gen();
    let m = data.test.len();
    let mut inputs = data.test.x.as_slice().to_vec();
    for u in &scenario.probes {
        inputs.extend_from_slice(u);
    }
    let inputs = Matrix::from_row_major(m + scenario.probes.len(), scenario.dim(), inputs)?;
    let methods = settings
        .methods
        .iter()
        .map(|&method| match run_method(method, &train, &inputs, settings, opt_seed) {
            Ok((pred, converged)) => {
                let mse = mse(&pred[..m], &data.test.y).ok().filter(|v| v.is_finite());
                MethodRecord { method, mse, converged, probes: pred[m..].to_vec(), error: None }
            }
            Err(e) => MethodRecord { method, mse: None, converged: false, probes: Vec::new(), error: Some(e.to_string()) },
        })
        .collect();
    Ok(ReplicateRecord { rep, stream: rep as u64, outlier_rows, methods })
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 { (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, sd)
}

/// Repeat generate → inject → fit → predict `settings.reps` times and
/// aggregate per-method MSEs. Individual fit failures are recorded in the
/// per-replicate records and excluded from the aggregates.
pub fn run_experiment(scenario: &SimScenario, settings: &ExperimentSettings) -> Result<ExperimentResult> {
    if settings.reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    if settings.methods.is_empty() {
        return Err(Error::InvalidParameter("no methods requested".into()));
    }
    if !(settings.nu > 1.0) {
        return Err(Error::InvalidParameter(format!("nu must exceed 1, got {}", settings.nu)));
    }
    scenario.validate()?;
    let records = (0..settings.reps)
        .into_par_iter()
        .map(|rep| run_replicate(scenario, settings, rep))
        .collect::<Result<Vec<_>>>()?;
    let summaries = settings
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let ok: Vec<&MethodRecord> = records.iter().map(|r| &r.methods[k]).filter(|m| m.mse.is_some()).collect();
            let mses: Vec<f64> = ok.iter().map(|m| m.mse.unwrap()).collect();
            let (mean_mse, sd_mse) = mean_sd(&mses);
            let mean_probes = (0..scenario.probes.len()).map(|j| mean_sd(&ok.iter().map(|m| m.probes[j]).collect::<Vec<_>>()).0).collect();
            MethodSummary {
                method,
                mean_mse,
                sd_mse,
                succeeded: ok.len(),
                failed: settings.reps - ok.len(),
                unconverged: ok.iter().filter(|m| !m.converged).count(),
                mean_probes,
            }
        })
        .collect();
    Ok(ExperimentResult { scenario: scenario.clone(), settings: settings.clone(), reps: settings.reps, summaries, records })
}

/// Fraction of replicates in which eTPR's prediction at probe `j` is strictly
/// closer to `target` than GPR's. Replicates where either fit failed count as
/// misses.
pub fn shrinkage_fraction(result: &ExperimentResult, probe: usize, target: f64) -> Option<f64> {
    let ie = result.settings.methods.iter().position(|&m| m == Method::Etpr)?;
    let ig = result.settings.methods.iter().position(|&m| m == Method::Gpr)?;
    let wins = result
        .records
        .iter()
        .filter(|r| {
            let (e, g) = (&r.methods[ie], &r.methods[ig]);
            e.probes.len() > probe && g.probes.len() > probe && (e.probes[probe] - target).abs() < (g.probes[probe] - target).abs()
        })
        .count();
    Some(wins as f64 / result.records.len() as f64)
}

/// One row of curve data for a Figure-1 style plot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub method: Method,
    pub x: f64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    /// Bands for LOESS come from the local residual spread and are approximate.
    pub approximate: bool,
}

/// Draw one dataset from a 1-D scenario and emit prediction curves with
/// 95% bands on an evenly spaced grid.
pub fn figure_curves(scenario: &SimScenario, settings: &ExperimentSettings, grid: &[f64]) -> Result<(Dataset<f64>, Vec<CurvePoint>)> {
    if scenario.dim() != 1 {
        return Err(Error::Scenario("curves are only produced for one covariate".into()));
    }
    let mut rng = replicate_rng(settings.master_seed, 0);
    let data = generate_dataset(scenario, &mut rng)?;
    let train = match &scenario.outliers {
        Some(spec) => inject_outliers(&data.train, spec, &mut rng)?.0,
        None => data.train,
    };
    let opt_seed: u64 = rng.gen();
    let u = Matrix::from_row_major(grid.len(), 1, grid.to_vec())?;
    let z = 1.96;
    let mut out = Vec::new();
    for &method in &settings.methods {
        match method {
            Method::Loess => {
                for (x, (m, lo, hi)) in grid.iter().zip(crate::baselines::loess_band(&train, &u, &settings.loess, z)?) {
                    out.push(CurvePoint { method, x: *x, mean: m, lo, hi, approximate: true });
                }
            }
            Method::Gpr | Method::Etpr => {
                let mut cfg = if method == Method::Gpr { ModelConfig::gpr() } else { ModelConfig::etpr().with_nu(settings.nu) };
                cfg.jitter = settings.jitter;
                cfg.optimizer.seed = opt_seed;
                let model = fit(&train, &cfg)?;
                for (x, p) in grid.iter().zip(predict_f(&model, &train, &u)?) {
                    let half = z * p.var_f.sqrt();
                    out.push(CurvePoint { method, x: *x, mean: p.mean, lo: p.mean - half, hi: p.mean + half, approximate: false });
                }
            }
        }
    }
    Ok((train, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_kernel_gives_zero_path() {
        let x = Matrix::from_row_major(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let p = KernelParams::from_slice(&[0.0, 1.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_path(PathKind::Gp, &x, &p, &mut rng).unwrap(), vec![0.0; 4]);
        assert_eq!(sample_path(PathKind::Etp { nu: 2.0, omega: 2.0 }, &x, &p, &mut rng).unwrap(), vec![0.0; 4]);
    }

    fn empirical_cov(kind: PathKind, draws: usize) -> (Matrix<f64>, Matrix<f64>) {
        let x = Matrix::from_row_major(3, 1, vec![0.0, 0.4, 1.0]).unwrap();
        let p = KernelParams::new(1.0, vec![2.0], vec![0.3]).unwrap();
        let k = kernel_matrix(&x, &p, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut acc = Matrix::zeros(3, 3);
        for _ in 0..draws {
            let f = sample_path(kind, &x, &p, &mut rng).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    acc[(i, j)] += f[i] * f[j];
                }
            }
        }
        (acc.scale(1.0 / draws as f64), k)
    }

    #[test]
    fn gp_paths_have_kernel_covariance() {
        let (c, k) = empirical_cov(PathKind::Gp, 100_000);
        assert!(c.sub(&k).max_abs() < 0.02 * k.max_abs(), "{c:?}");
    }

    #[test]
    fn etp_paths_have_scaled_kernel_covariance() {
        // ω/(ν−1) = 1 at (3, 2)
        let (c, k) = empirical_cov(PathKind::Etp { nu: 3.0, omega: 2.0 }, 400_000);
        assert!(c.sub(&k).max_abs() < 0.02 * k.max_abs(), "{c:?}");
    }

    #[test]
    fn sparse_design_layout() {
        let s = SimScenario::named("fig1").unwrap();
        let g = generate_dataset(&s, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let xs: Vec<f64> = g.train.x.as_slice().to_vec();
        assert_eq!(xs.len(), 10);
        assert_eq!(xs[0], 0.0);
        assert!((xs[8] - 1.5).abs() < 1e-15);
        assert_eq!(xs[9], 2.0);
        assert!((xs[1] - 1.5 / 8.0).abs() < 1e-15);
        assert_eq!(g.test.len(), 30);
        assert!(g.test.x.as_slice().iter().all(|&u| u > 0.0 && u < 2.0));
        assert!(g.test.y.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn grid_split_layouts() {
        let s = SimScenario::named("table2-case1-cosx").unwrap();
        let g = generate_dataset(&s, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!((g.train.len(), g.test.len()), (10, 30));
        let mut all: Vec<f64> = g.train.x.as_slice().iter().chain(g.test.x.as_slice()).copied().collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let grid = open_grid(0.0, 3.0, 40);
        assert_eq!(all, grid);
        for j in 0..g.test.len() {
            assert_eq!(g.test.y[j], g.test.x[(j, 0)].cos());
        }

        let s = SimScenario::named("table3-case5-h2").unwrap();
        let g = generate_dataset(&s, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!((g.train.len(), g.test.len(), g.train.dim()), (30, 50, 3));
        for i in 0..30 {
            let r = g.train.x.row(i);
            assert!(r[0] > -2.0 && r[0] < 2.0 && r[1] > 0.0 && r[1] < 3.0 && r[2] > 1.0 && r[2] < 2.0);
            // index-aligned grids: x2 and x3 are affine in x1
            assert!(((r[1] - 0.0) / 3.0 - (r[0] + 2.0) / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_shift_leaves_data_unchanged() {
        let s = SimScenario::named("fig3-n10-d0").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = generate_dataset(&s, &mut rng).unwrap();
        let (d, rows) = inject_outliers(&g.train, s.outliers.as_ref().unwrap(), &mut rng).unwrap();
        assert_eq!(d, g.train);
        assert_eq!(rows, vec![9]);
    }

    #[test]
    fn fixed_normal_outlier_only_touches_sparse_point() {
        let s = SimScenario::named("table1-normal-4").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = generate_dataset(&s, &mut rng).unwrap();
        let (d, _) = inject_outliers(&g.train, s.outliers.as_ref().unwrap(), &mut rng).unwrap();
        for i in 0..9 {
            assert_eq!(d.y[i], g.train.y[i]);
        }
        assert_ne!(d.y[9], g.train.y[9]);
        assert_eq!(d.x[(9, 0)], 2.0);
    }

    #[test]
    fn random_outliers_are_distinct_rows() {
        let s = SimScenario::named("table3-case1-h1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = generate_dataset(&s, &mut rng).unwrap();
        let (d, rows) = inject_outliers(&g.train, s.outliers.as_ref().unwrap(), &mut rng).unwrap();
        assert_eq!(rows.len(), 2);
        assert_ne!(rows[0], rows[1]);
        let changed: Vec<usize> = (0..d.len()).filter(|&i| d.y[i] != g.train.y[i]).collect();
        let mut sorted = rows.clone();
        sorted.sort_unstable();
        assert_eq!(changed, sorted);
        let spec = OutlierSpec { count: 31, placement: Placement::Random, noise: NoiseLaw::Cauchy };
        assert!(inject_outliers(&g.train, &spec, &mut rng).is_err());
    }

    #[test]
    fn mse_values() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a: Vec<f64> = (0..17).map(|_| rng.gen()).collect();
        let b: Vec<f64> = (0..17).map(|_| rng.gen()).collect();
        let want = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / 17.0;
        assert!((mse(&a, &b).unwrap() - want).abs() < 1e-15);
        assert!(mse(&a, &b[..3]).is_err());
    }

    #[test]
    fn scenario_names_resolve() {
        for n in SimScenario::names() {
            let s = SimScenario::named(&n).unwrap();
            s.validate().unwrap();
            assert!(s.name == n);
        }
        assert_eq!(SimScenario::named("fig3-n10-d-2").unwrap().outliers.unwrap().noise, NoiseLaw::Constant { delta: -2.0 });
        for bad in ["table9-case1-cosx", "table2-case6-cosx", "table2-case1-h1", "table1-normal-x", "table2-clean-case3-cosx", ""] {
            assert!(SimScenario::named(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn scenario_round_trips_through_json() {
        let s = SimScenario::named("table2-case5-cos2x").unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<SimScenario>(&j).unwrap(), s);
    }

    #[test]
    fn single_replicate_is_reproducible() {
        let s = SimScenario::named("table1-normal-4").unwrap();
        let settings = ExperimentSettings::new(&[Method::Gpr], 1, 11);
        let a = run_experiment(&s, &settings).unwrap();
        let b = run_experiment(&s, &settings).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 1);
        assert!(a.records[0].methods[0].mse.is_some());
    }

    #[test]
    fn aggregates_do_not_depend_on_schedule() {
        let s = SimScenario::named("table2-case3-cosx").unwrap();
        let settings = ExperimentSettings::new(&Method::ALL, 6, 3);
        let par = run_experiment(&s, &settings).unwrap();
        let serial: Vec<ReplicateRecord> = (0..6).rev().map(|r| run_replicate(&s, &settings, r).unwrap()).rev().collect();
        assert_eq!(par.records, serial);
        let mses: Vec<f64> = serial.iter().filter_map(|r| r.methods[2].mse).collect();
        assert_eq!(par.summary(Method::Etpr).unwrap().mean_mse, mean_sd(&mses).0);
        assert!(run_experiment(&s, &ExperimentSettings::new(&Method::ALL, 0, 3)).is_err());
    }

    #[test]
    fn curves_cover_grid() {
        let s = SimScenario::named("fig1").unwrap();
        let grid: Vec<f64> = (0..21).map(|i| i as f64 * 0.1).collect();
        let (_, c) = figure_curves(&s, &ExperimentSettings::new(&Method::ALL, 1, 1), &grid).unwrap();
        assert_eq!(c.len(), 63);
        assert!(c.iter().all(|p| p.lo <= p.mean && p.mean <= p.hi));
        assert!(c.iter().filter(|p| p.method == Method::Loess).all(|p| p.approximate));
    }
}
