//! Weighted nonlinear least squares with numeric Jacobians.
//!
//! The minimizer is a Levenberg-Marquardt damped Gauss-Newton iteration on
//! `½·Σ r²`, where `r` is the vector of already-weighted residuals returned
//! by an [`Objective`]. Strictly positive parameters may be fitted in log
//! space by declaring [`Transform::Log`]; the engine then works on `ln p`
//! internally and maps standard errors back with the first-order delta rule.
//!
//! Everything here is deterministic: no randomized restarts, and identical
//! inputs produce bit-identical results.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate in which the engine moves a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    Linear,
    /// Parameter must stay strictly positive; fitted as `ln p`.
    Log,
}

impl Transform {
    fn to_internal(self, p: f64) -> f64 {
        match self {
            Transform::Linear => p,
            Transform::Log => p.ln(),
        }
    }

    fn to_external(self, x: f64) -> f64 {
        match self {
            Transform::Linear => x,
            Transform::Log => x.exp(),
        }
    }

    /// dp/dx at internal coordinate `x`.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Transform::Linear => 1.0,
            Transform::Log => x.exp(),
        }
    }
}

/// A weighted residual function of a fixed number of parameters.
pub trait Objective {
    fn n_params(&self) -> usize;

    /// Weighted residuals at `params` (external coordinates).
    fn residuals(&self, params: &[f64]) -> Vec<f64>;

    fn transforms(&self) -> Vec<Transform> {
        vec![Transform::Linear; self.n_params()]
    }

    fn param_names(&self) -> Vec<String> {
        (0..self.n_params()).map(|i| format!("p{i}")).collect()
    }

    fn param_units(&self) -> Vec<String> {
        vec![String::new(); self.n_params()]
    }
}

/// Closure-backed [`Objective`].
pub struct FnObjective<F> {
    n_params: usize,
    f: F,
    transforms: Option<Vec<Transform>>,
    names: Option<Vec<String>>,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    pub fn new(n_params: usize, f: F) -> Self {
        Self {
            n_params,
            f,
            transforms: None,
            names: None,
        }
    }

    pub fn with_transforms(mut self, transforms: Vec<Transform>) -> Self {
        assert_eq!(transforms.len(), self.n_params);
        self.transforms = Some(transforms);
        self
    }

    pub fn with_names(mut self, names: &[&str]) -> Self {
        assert_eq!(names.len(), self.n_params);
        self.names = Some(names.iter().map(|s| s.to_string()).collect());
        self
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    fn n_params(&self) -> usize {
        self.n_params
    }

    fn residuals(&self, params: &[f64]) -> Vec<f64> {
        (self.f)(params)
    }

    fn transforms(&self) -> Vec<Transform> {
        self.transforms
            .clone()
            .unwrap_or_else(|| vec![Transform::Linear; self.n_params])
    }

    fn param_names(&self) -> Vec<String> {
        self.names
            .clone()
            .unwrap_or_else(|| (0..self.n_params).map(|i| format!("p{i}")).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative tolerance on the (actual and predicted) ssr reduction.
    pub ssr_tolerance: f64,
    /// Relative tolerance on the Gauss-Newton parameter step.
    pub step_tolerance: f64,
    /// Relative step for central finite differences.
    pub fd_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            ssr_tolerance: 1e-12,
            step_tolerance: 1e-10,
            fd_step: 1e-6,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::NonPositiveInput {
                name: "max_iterations",
                value: 0.0,
            });
        }
        for (name, v) in [
            ("ssr_tolerance", self.ssr_tolerance),
            ("step_tolerance", self.step_tolerance),
            ("fd_step", self.fd_step),
        ] {
            if !(v > 0.0) {
                return Err(Error::NonPositiveInput { name, value: v });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ZeroResidual,
    SsrTolerance,
    StepTolerance,
    /// Damping grew without bound: no step reduces the objective any further.
    NoFurtherReduction,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<ParamEstimate>,
    pub ssr: f64,
    pub dof: usize,
    pub converged: bool,
    pub iterations: usize,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Unit vector (internal coordinates) spanning the Jacobian's null space, if rank deficient.
    #[serde(skip)]
    pub singular_direction: Option<Vec<f64>>,
    /// Covariance in internal (possibly log) coordinates.
    #[serde(skip)]
    pub internal_covariance: Option<Vec<Vec<f64>>>,
    /// Objective value after every accepted damped step, starting with the initial point.
    #[serde(skip)]
    pub ssr_trace: Vec<f64>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<&ParamEstimate> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> f64 {
        self.get(name)
            .unwrap_or_else(|| panic!("no parameter named {name}"))
            .value
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(|p| p.std_error)
    }

    pub fn values(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.value).collect()
    }
}

/// Central-difference Jacobian of `f` at `at`.
///
/// The step for coordinate `j` is `rel_step · max(|at_j|, 1)` rounded to the
/// nearest power of two, so that `at_j ± h` is exact in floating point.
pub fn numeric_jacobian<F>(f: F, at: &[f64], rel_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let r0 = f(at);
    let m = r0.len();
    let n = at.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = at.to_vec();
    for j in 0..n {
        let h = (rel_step * at[j].abs().max(1.0)).log2().round().exp2();
        probe[j] = at[j] + h;
        let plus = f(&probe);
        probe[j] = at[j] - h;
        let minus = f(&probe);
        probe[j] = at[j];
        if plus.len() != m || minus.len() != m {
            return Err(Error::InvalidDataset(
                "residual vector changed length".into(),
            ));
        }
        for i in 0..m {
            let d = (plus[i] - minus[i]) / (2.0 * h);
            if !d.is_finite() {
                let mut bad = at.to_vec();
                bad[j] = if plus[i].is_finite() { at[j] - h } else { at[j] + h };
                return Err(Error::NonFiniteResidual(bad));
            }
            jac[(i, j)] = d;
        }
    }
    Ok(jac)
}

/// Parameter covariance from the local quadratic approximation of the objective.
pub struct Covariance {
    /// Covariance in internal coordinates.
    pub internal: DMatrix<f64>,
    /// Standard errors in external coordinates.
    pub std_errors: Vec<f64>,
}

/// Singular values below this fraction of the largest count as zero.
const RANK_TOLERANCE: f64 = 1e-10;

/// Standard errors `sqrt(diag((ssr/dof)·(JᵀJ)⁻¹))` at the external point `at`.
pub fn covariance<O: Objective + ?Sized>(
    obj: &O,
    at: &[f64],
    ssr: f64,
    dof: usize,
    fd_step: f64,
) -> Result<Covariance> {
    if dof < 1 {
        return Err(Error::InsufficientData("covariance needs dof >= 1".into()));
    }
    let transforms = obj.transforms();
    let x: Vec<f64> = at
        .iter()
        .zip(&transforms)
        .map(|(&p, t)| t.to_internal(p))
        .collect();
    let jac = numeric_jacobian(|x| obj.residuals(&to_external(&transforms, x)), &x, fd_step)?;
    covariance_from_jacobian(&jac, &transforms, &x, ssr, dof)
}

fn covariance_from_jacobian(
    jac: &DMatrix<f64>,
    transforms: &[Transform],
    x: &[f64],
    ssr: f64,
    dof: usize,
) -> Result<Covariance> {
    let n = x.len();
    let svd = jac.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let s = &svd.singular_values;
    let s_max = s.iter().cloned().fold(0.0, f64::max);
    let (k_min, s_min) = s
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
    if s.len() < n || !(s_max > 0.0) || s_min <= RANK_TOLERANCE * s_max {
        let direction = if s.len() < n {
            vec![0.0; n]
        } else {
            v_t.row(k_min).iter().cloned().collect()
        };
        return Err(Error::SingularJacobian { direction });
    }
    let scale = ssr / dof as f64;
    let mut internal = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let row = v_t.row(k);
        let w = scale / (s[k] * s[k]);
        for a in 0..n {
            for b in 0..n {
                internal[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    let std_errors = (0..n)
        .map(|i| internal[(i, i)].max(0.0).sqrt() * transforms[i].derivative(x[i]).abs())
        .collect();
    Ok(Covariance {
        internal,
        std_errors,
    })
}

fn to_external(transforms: &[Transform], x: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(transforms)
        .map(|(&v, t)| t.to_external(v))
        .collect()
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn all_finite(r: &[f64]) -> bool {
    r.iter().all(|v| v.is_finite())
}

/// Solves `(JᵀJ + λ·D)·δ = −Jᵀr` with Marquardt scaling `D = diag(JᵀJ)` (floored).
fn damped_step(jtj: &DMatrix<f64>, grad: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let n = jtj.nrows();
    let max_diag = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
    let floor = (max_diag * 1e-12).max(f64::MIN_POSITIVE);
    let mut a = jtj.clone();
    for i in 0..n {
        a[(i, i)] += lambda * jtj[(i, i)].max(floor);
    }
    a.cholesky().map(|c| -c.solve(grad))
}

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_UP: f64 = 10.0;
const LAMBDA_DOWN: f64 = 0.1;
const LAMBDA_MAX: f64 = 1e16;
/// Damping used for the convergence probe (effectively a Gauss-Newton step).
const LAMBDA_PROBE: f64 = 1e-12;
/// Largest accepted change of a log-space coordinate per step (a factor e²).
const MAX_LOG_STEP: f64 = 2.0;

/// Minimizes `½·Σ r²` starting from `init` (external coordinates).
pub fn least_squares<O: Objective + ?Sized>(
    obj: &O,
    init: &[f64],
    opts: &FitOptions,
) -> Result<FitResult> {
    opts.validate()?;
    let n = obj.n_params();
    if init.len() != n {
        return Err(Error::InvalidDataset(format!(
            "expected {n} initial parameters, got {}",
            init.len()
        )));
    }
    let transforms = obj.transforms();
    for (i, (&p, t)) in init.iter().zip(&transforms).enumerate() {
        if !p.is_finite() || (*t == Transform::Log && p <= 0.0) {
            return Err(Error::NonPositiveInput {
                name: "initial parameter",
                value: init[i],
            });
        }
    }
    let eval = |x: &[f64]| obj.residuals(&to_external(&transforms, x));

    let mut x: Vec<f64> = init
        .iter()
        .zip(&transforms)
        .map(|(&p, t)| t.to_internal(p))
        .collect();
    let mut r = eval(&x);
    if !all_finite(&r) {
        return Err(Error::NonFiniteResidual(init.to_vec()));
    }
    let m = r.len();
    if m <= n {
        return Err(Error::InsufficientData(format!(
            "{m} residuals for {n} parameters; need at least {}",
            n + 1
        )));
    }
    let dof = m - n;
    let mut ssr = sum_sq(&r);
    let mut trace = vec![ssr];
    let mut lambda = LAMBDA_INIT;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        if ssr == 0.0 {
            termination = Termination::ZeroResidual;
            break;
        }
        let jac = numeric_jacobian(eval, &x, opts.fd_step)?;
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &rv;
        let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();

        if let Some(probe) = damped_step(&jtj, &grad, LAMBDA_PROBE) {
            let predicted = ssr - (&rv + &jac * &probe).norm_squared();
            let done = if probe.norm() <= opts.step_tolerance * (x_norm + opts.step_tolerance) {
                Some(Termination::StepTolerance)
            } else if predicted <= opts.ssr_tolerance * ssr {
                Some(Termination::SsrTolerance)
            } else {
                None
            };
            if let Some(reason) = done {
                // Final Gauss-Newton polish. Its effect on ssr is below rounding
                // noise, so it is accepted within the tolerance band and kept out
                // of the trace of damped steps.
                let trial: Vec<f64> = x.iter().zip(probe.iter()).map(|(a, b)| a + b).collect();
                let r_trial = eval(&trial);
                if all_finite(&r_trial) {
                    let ssr_trial = sum_sq(&r_trial);
                    if ssr_trial <= ssr * (1.0 + opts.ssr_tolerance) {
                        x = trial;
                        ssr = ssr_trial;
                    }
                }
                termination = reason;
                break;
            }
        }

        loop {
            let Some(step) = damped_step(&jtj, &grad, lambda) else {
                lambda *= LAMBDA_UP;
                if lambda > LAMBDA_MAX {
                    termination = Termination::NoFurtherReduction;
                    break 'outer;
                }
                continue;
            };
            let too_far = step
                .iter()
                .zip(&transforms)
                .any(|(d, t)| *t == Transform::Log && d.abs() > MAX_LOG_STEP);
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let r_trial = if too_far { Vec::new() } else { eval(&trial) };
            let ssr_trial = if !too_far && all_finite(&r_trial) {
                sum_sq(&r_trial)
            } else {
                f64::INFINITY
            };
            if ssr_trial < ssr {
                let predicted = ssr - (&rv + &jac * &step).norm_squared();
                let actual = ssr - ssr_trial;
                x = trial;
                r = r_trial;
                ssr = ssr_trial;
                trace.push(ssr);
                lambda = (lambda * LAMBDA_DOWN).max(f64::MIN_POSITIVE);
                if actual <= opts.ssr_tolerance * (ssr + actual)
                    && predicted <= opts.ssr_tolerance * (ssr + actual)
                {
                    termination = Termination::SsrTolerance;
                    break 'outer;
                }
                break;
            }
            lambda *= LAMBDA_UP;
            if lambda > LAMBDA_MAX {
                termination = Termination::NoFurtherReduction;
                break 'outer;
            }
        }
    }

    let params = to_external(&transforms, &x);
    let names = obj.param_names();
    let units = obj.param_units();
    let converged = termination != Termination::MaxIterations;
    let mut result = FitResult {
        parameters: names
            .into_iter()
            .zip(units)
            .zip(&params)
            .map(|((name, unit), &value)| ParamEstimate {
                name,
                value,
                std_error: None,
                unit,
            })
            .collect(),
        ssr,
        dof,
        converged,
        iterations,
        termination,
        warnings: Vec::new(),
        singular_direction: None,
        internal_covariance: None,
        ssr_trace: trace,
    };
    if !converged {
        return Err(Error::FitDidNotConverge(Box::new(result)));
    }

    let jac = numeric_jacobian(eval, &x, opts.fd_step)?;
    match covariance_from_jacobian(&jac, &transforms, &x, ssr, dof) {
        Ok(cov) => {
            for (p, se) in result.parameters.iter_mut().zip(&cov.std_errors) {
                p.std_error = Some(*se);
            }
            result.internal_covariance = Some(
                (0..n)
                    .map(|i| (0..n).map(|j| cov.internal[(i, j)]).collect())
                    .collect(),
            );
        }
        Err(Error::SingularJacobian { direction }) => {
            result.warnings.push(format!(
                "jacobian is rank deficient along {direction:?}; standard errors unavailable"
            ));
            result.singular_direction = Some(direction);
        }
        Err(e) => return Err(e),
    }
    Ok(result)
}
