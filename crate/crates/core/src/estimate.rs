//! Maximum-likelihood fitting, standard errors and significance pruning.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::covariates::CovariateCoder;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::{CompiledModel, ParamKind};
use crate::linalg::{spd_inverse, Matrix};
use crate::model::{Model, ModelSpec, ParameterSet, THRESHOLDS};
use crate::optim::{minimize, BfgsOptions};
use crate::schema::AttributeSchema;
use crate::stats::{chi2_sf, two_sided_p};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub bfgs: BfgsOptions,
    /// Warm start; entries it lacks use the default start values.
    pub start: Option<ParameterSet>,
    /// Warm start in the optimizer's coordinates, by parameter name; applied after `start`.
    pub start_theta: Option<BTreeMap<String, f64>>,
    /// Covariate coding; fitted to the dataset's respondents when absent.
    pub coder: Option<CovariateCoder>,
    pub standard_errors: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { bfgs: BfgsOptions::default(), start: None, start_theta: None, coder: None, standard_errors: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Log-likelihood after each accepted step.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub model: Model,
    pub log_likelihood: f64,
    pub n_params: usize,
    pub n_obs: usize,
    /// Estimated parameters in optimizer order.
    pub names: Vec<String>,
    pub theta: Vec<f64>,
    /// Natural-scale standard errors by reporting id, when the Hessian allowed them.
    pub std_errors: Option<BTreeMap<String, f64>>,
    /// Why some or all standard errors are unavailable.
    pub std_error_note: Option<String>,
    pub convergence: Convergence,
}

impl EstimationResult {
    pub fn params(&self) -> &ParameterSet {
        &self.model.params
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.model.spec
    }

    /// Natural-scale estimate by reporting id.
    pub fn estimate(&self, id: &str) -> Option<f64> {
        self.model.params.flat().get(id).copied()
    }

    pub fn std_error(&self, id: &str) -> Option<f64> {
        self.std_errors.as_ref()?.get(id).copied()
    }

    /// Two-sided Wald p-value of a coefficient.
    pub fn wald_p(&self, id: &str) -> Option<f64> {
        let se = self.std_error(id)?;
        let b = self.estimate(id)?;
        if se > 0.0 && se.is_finite() {
            Some(two_sided_p(b / se))
        } else {
            None
        }
    }

    pub fn aic(&self) -> f64 {
        2.0 * self.n_params as f64 - 2.0 * self.log_likelihood
    }
}

/// Fits a specification by maximum likelihood.
pub fn fit(schema: &AttributeSchema, data: &Dataset, spec: &ModelSpec, opts: &FitOptions) -> Result<EstimationResult> {
    let coder = match opts.coder {
        Some(c) => c,
        None => CovariateCoder::fit(data.respondents().values())?,
    };
    let mut cm = CompiledModel::new(schema, spec, &coder, data)?;
    let default = cm.start_theta();
    let mut theta0 = match &opts.start {
        Some(p) => {
            cm.set_fixed_scales(p);
            cm.theta_from_params(p, Some(&default))?
        }
        None => default,
    };
    if let Some(named) = &opts.start_theta {
        for (i, name) in cm.names().iter().enumerate() {
            if let Some(v) = named.get(name) {
                theta0[i] = *v;
            }
        }
    }
    let n = cm.dim();
    let mut g = vec![0.0; n];
    let ll0 = cm.log_likelihood_grad(&theta0, &mut g);
    if !ll0.is_finite() || g.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(format!("log-likelihood is not finite at the start ({ll0})")));
    }
    let h0 = spd_inverse(&cm.bhhh(&theta0));
    let objective = |x: &[f64], grad: &mut [f64]| {
        let ll = cm.log_likelihood_grad(x, grad);
        grad.iter_mut().for_each(|v| *v = -*v);
        -ll
    };
    let r = minimize(objective, &theta0, h0, &opts.bfgs);
    if !r.f.is_finite() {
        return Err(Error::Numerical("optimizer left the finite region".into()));
    }
    let params = cm.params_from_theta(&r.x);
    let convergence = Convergence {
        converged: r.converged,
        iterations: r.iterations,
        gradient_norm: r.grad.iter().fold(0.0, |m, v| f64::max(m, libm::fabs(*v))),
        history: r.history.iter().map(|f| -f).collect(),
    };
    let (std_errors, std_error_note) = if opts.standard_errors {
        match standard_errors(&cm, &r.x) {
            Ok((se, boundary)) if boundary.is_empty() => (Some(se), None),
            Ok((se, boundary)) => (Some(se), Some(format!("at the boundary, no standard error: {}", boundary.join(", ")))),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, Some("not requested".to_string()))
    };
    Ok(EstimationResult {
        model: Model { spec: spec.clone(), scaling: coder, params },
        log_likelihood: -r.f,
        n_params: n,
        n_obs: cm.n_obs(),
        names: cm.names().to_vec(),
        theta: r.x,
        std_errors,
        std_error_note,
        convergence,
    })
}

/// Observed information by central differences of the analytic gradient.
pub fn hessian(cm: &CompiledModel, theta: &[f64]) -> Matrix {
    let n = theta.len();
    let mut h = Matrix::zeros(n);
    let mut x = theta.to_vec();
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    for j in 0..n {
        let step = 1e-5 * f64::max(1.0, libm::fabs(theta[j]));
        x[j] = theta[j] + step;
        cm.log_likelihood_grad(&x, &mut gp);
        x[j] = theta[j] - step;
        cm.log_likelihood_grad(&x, &mut gm);
        x[j] = theta[j];
        for i in 0..n {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    h.symmetrize();
    h
}

/// Curvature below which a parameter counts as sitting on the boundary of the
/// parameter space (for instance the increment of a threshold whose quantity
/// category was never observed).
pub const BOUNDARY_INFORMATION: f64 = 1e-6;

/// Natural-scale standard errors from the inverse observed information.
/// Parameters with negligible curvature are excluded from the inversion and
/// listed in the second return value; their standard errors (and those of
/// thresholds built from them) are omitted.
pub fn standard_errors(cm: &CompiledModel, theta: &[f64]) -> Result<(BTreeMap<String, f64>, Vec<String>)> {
    let mut info = hessian(cm, theta);
    info.scale(-1.0);
    let n = theta.len();
    let keep: Vec<usize> = (0..n).filter(|i| info[(*i, *i)] > BOUNDARY_INFORMATION).collect();
    let boundary: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
    let mut reduced = Matrix::zeros(keep.len());
    for (a, &i) in keep.iter().enumerate() {
        for (b, &j) in keep.iter().enumerate() {
            reduced[(a, b)] = info[(i, j)];
        }
    }
    let inv = spd_inverse(&reduced)
        .ok_or_else(|| Error::Numerical("observed information is not positive definite".into()))?;
    let mut cov = Matrix::zeros(n);
    for (a, &i) in keep.iter().enumerate() {
        for (b, &j) in keep.iter().enumerate() {
            cov[(i, j)] = inv[(a, b)];
        }
    }
    let mut out = BTreeMap::new();
    for &i in &keep {
        let name = cm.name(i).to_string();
        let var = match cm.kind(i) {
            ParamKind::Threshold => {
                let (g, j) = cm.threshold_slot(i).expect("threshold slot");
                let r = cm.delta_range(g);
                // τ_j = Σ_{k≤j} exp(δ_k)
                let idx: Vec<usize> = (r.start..r.start + j - 1).collect();
                if idx.iter().any(|k| boundary.contains(k)) {
                    continue;
                }
                let mut v = 0.0;
                for &a in &idx {
                    for &b in &idx {
                        v += libm::exp(theta[a]) * libm::exp(theta[b]) * cov[(a, b)];
                    }
                }
                v
            }
            _ => cov[(i, i)],
        };
        if !(var >= 0.0) {
            return Err(Error::Numerical(format!("negative variance for `{name}`")));
        }
        out.insert(name, libm::sqrt(var));
    }
    debug_assert!(THRESHOLDS == 10);
    Ok((out, boundary.iter().map(|i| cm.name(*i).to_string()).collect()))
}

/// One accepted removal.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneStep {
    pub parameter: String,
    pub wald_p: f64,
    pub lr_statistic: f64,
    pub lr_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneOutcome {
    pub result: EstimationResult,
    pub removed: Vec<PruneStep>,
}

/// Backward elimination. Coefficients are ranked by Wald p-value (ties: smaller
/// `|β|/SE`, then id); each with `p ≥ alpha` is tried in turn and removed when a
/// likelihood-ratio refit also gives `p ≥ alpha`. Stops when no candidate passes.
/// Coefficients on the columns in `keep` are never removed.
pub fn prune(
    schema: &AttributeSchema,
    data: &Dataset,
    spec: &ModelSpec,
    opts: &FitOptions,
    alpha: f64,
    keep: &[String],
) -> Result<PruneOutcome> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Spec(format!("significance level {alpha} is outside [0, 1]")));
    }
    let mut o = opts.clone();
    o.standard_errors = true;
    let mut current = fit(schema, data, spec, &o)?;
    let mut removed = Vec::new();
    loop {
        let se = current
            .std_errors
            .clone()
            .ok_or_else(|| Error::Numerical(format!("cannot prune: {}", current.std_error_note.clone().unwrap_or_default())))?;
        let mut candidates: Vec<(f64, f64, String)> = Vec::new();
        for (i, name) in current.names.iter().enumerate() {
            let kind = match i {
                _ if current.model.params.beta.contains_key(name) => ParamKind::Beta,
                _ if current.model.params.gamma.contains_key(name) => ParamKind::Gamma,
                _ => continue,
            };
            if kind == ParamKind::Beta && keep.iter().any(|k| name == k || name.starts_with(&format!("{k}@"))) {
                continue;
            }
            let b = current.theta[i];
            let Some(&s) = se.get(name) else { continue };
            let z = libm::fabs(b / s);
            let p = two_sided_p(z);
            if p >= alpha {
                candidates.push((p, z, name.clone()));
            }
        }
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.1.partial_cmp(&b.1).unwrap_or(core::cmp::Ordering::Equal))
                .then(a.2.cmp(&b.2))
        });
        let mut next = None;
        for (p, _, name) in candidates {
            let reduced = current.model.spec.without_param(schema, &name)?;
            let mut ro = o.clone();
            ro.start_theta = Some(current.names.iter().cloned().zip(current.theta.iter().copied()).collect());
            ro.coder = Some(current.model.scaling);
            let refit = fit(schema, data, &reduced, &ro)?;
            let lr = 2.0 * (current.log_likelihood - refit.log_likelihood);
            let lr_p = chi2_sf(f64::max(lr, 0.0), 1.0);
            if lr_p >= alpha {
                removed.push(PruneStep { parameter: name, wald_p: p, lr_statistic: lr, lr_p });
                next = Some(refit);
                break;
            }
        }
        match next {
            Some(r) => current = r,
            None => break,
        }
        if current.model.spec.bindings.is_empty() && current.model.spec.covariates.is_empty() {
            break;
        }
    }
    Ok(PruneOutcome { result: current, removed })
}
