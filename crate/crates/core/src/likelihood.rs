//! Scale-adjusted ordered logit log-likelihood and its analytic gradient.
//!
//! For an observation in cell `c` with latent index `W`, the probability of
//! quantity `j` is `Λ(τ_{j+1}/λ_c − W) − Λ(τ_j/λ_c − W)` with `τ_0 = −∞`,
//! `τ_1 = 0`, `τ_11 = +∞` and `λ_c = exp(μ_c)`.
//!
//! Estimation works on an unconstrained vector `θ` laid out as
//! `[ASC | β | γ | δ | μ]`, where each threshold group contributes nine
//! `δ_j = ln(τ_j − τ_{j−1})`, `j = 2..10`, and `μ` holds the free log scales.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, expm1, log};

use crate::covariates::{covariate_index, CovariateCoder};
use crate::dataset::{Dataset, CATEGORIES, MAX_QUANTITY};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math::{log_logistic, logistic, CompensatedSum};
use crate::model::{ModelSpec, ParameterSet, ScaleLayout, THRESHOLDS};
use crate::schema::{AttributeSchema, Cell};

const DELTAS: usize = THRESHOLDS - 1;

/// Threshold increments are floored at `exp(DELTA_FLOOR)` so adjacent
/// thresholds stay distinct in floating point; below the floor the increment
/// is constant and its gradient zero.
pub const DELTA_FLOOR: f64 = -30.0;

fn increment(delta: f64) -> f64 {
    if delta > DELTA_FLOOR {
        exp(delta)
    } else {
        exp(DELTA_FLOOR)
    }
}

fn increment_slope(delta: f64) -> f64 {
    if delta > DELTA_FLOOR {
        exp(delta)
    } else {
        0.0
    }
}

/// Probabilities of quantities `0..=10` for latent index `w`.
pub fn category_probabilities(w: f64, tau: &[f64], lambda: f64) -> [f64; CATEGORIES] {
    let mut p = [0.0; CATEGORIES];
    let mut lower = f64::NEG_INFINITY;
    for (j, pj) in p.iter_mut().enumerate() {
        let upper = if j == CATEGORIES - 1 { f64::INFINITY } else { tau[j] / lambda - w };
        *pj = exp(ordered_term(lower, upper).0);
        lower = upper;
    }
    p
}

/// `(ln p, ∂ln p/∂a, ∂ln p/∂b)` for `p = Λ(b) − Λ(a)`.
fn ordered_term(a: f64, b: f64) -> (f64, f64, f64) {
    if a == f64::NEG_INFINITY {
        return (log_logistic(b), 0.0, logistic(-b));
    }
    if b == f64::INFINITY {
        return (log_logistic(-a), -logistic(a), 0.0);
    }
    let gap = log(-expm1(a - b));
    let (lb, lna) = (log_logistic(b), log_logistic(-a));
    let dlb = exp(log_logistic(-b) - lna - gap);
    let dla = -exp(log_logistic(a) - lb - gap);
    (lb + lna + gap, dla, dlb)
}

/// Parameter values in a compiled layout, natural scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Natural {
    pub asc: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub tau: Vec<[f64; THRESHOLDS]>,
    pub lambda: Vec<f64>,
}

/// A dataset compiled against a specification.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    names: Vec<String>,
    cells: Vec<Cell>,
    group_keys: Vec<String>,
    beta_ids: Vec<String>,
    gamma_ids: Vec<String>,
    free_mu: Vec<usize>,
    cell_group: Vec<usize>,
    cell_mu: Vec<Option<usize>>,
    mu_fixed: Vec<f64>,
    obs_cell: Vec<u32>,
    obs_q: Vec<u8>,
    obs_resp: Vec<u32>,
    term_start: Vec<u32>,
    term_param: Vec<u32>,
    term_x: Vec<f64>,
    z: Vec<f64>,
    n_resp: usize,
}

impl CompiledModel {
    pub fn new(
        schema: &AttributeSchema,
        spec: &ModelSpec,
        coder: &CovariateCoder,
        data: &Dataset,
    ) -> Result<CompiledModel> {
        spec.validate(schema)?;
        if data.is_empty() {
            return Err(Error::Data("dataset has no observations".into()));
        }
        let columns = schema.columns();
        let cells: Vec<Cell> = data.cells().into_iter().collect();
        let cell_index: BTreeMap<&Cell, usize> = cells.iter().enumerate().map(|(i, c)| (c, i)).collect();

        let mut group_keys: Vec<String> = Vec::new();
        let mut cell_group = Vec::new();
        for c in &cells {
            let k = spec.threshold_key(c);
            let g = match group_keys.iter().position(|x| *x == k) {
                Some(g) => g,
                None => {
                    group_keys.push(k);
                    group_keys.len() - 1
                }
            };
            cell_group.push(g);
        }

        let mut free_mu = Vec::new();
        let mut cell_mu = vec![None; cells.len()];
        if let Some(season) = spec.scale.free_season() {
            for (i, c) in cells.iter().enumerate() {
                let reference = Cell::new(c.cut.clone(), season.other());
                if c.season == season && cell_index.contains_key(&reference) {
                    cell_mu[i] = Some(free_mu.len());
                    free_mu.push(i);
                }
            }
        }
        debug_assert!(spec.scale != ScaleLayout::Fixed || free_mu.is_empty());

        // coefficient slots per cell
        let mut beta_ids: Vec<String> = Vec::new();
        let mut cell_terms: Vec<Vec<(usize, u32)>> = Vec::new();
        for c in &cells {
            let mut terms = Vec::new();
            for (k, col) in columns.iter().enumerate() {
                if let Some(id) = spec.param_for(schema, &col.id, c) {
                    let p = match beta_ids.iter().position(|x| *x == id) {
                        Some(p) => p,
                        None => {
                            beta_ids.push(id);
                            beta_ids.len() - 1
                        }
                    };
                    terms.push((k, p as u32));
                }
            }
            cell_terms.push(terms);
        }

        let gamma_ids = spec.covariates.clone();
        let gamma_cols: Vec<usize> = gamma_ids.iter().map(|g| covariate_index(g).expect("validated")).collect();
        let slots: BTreeMap<u32, usize> = data.respondents().keys().enumerate().map(|(i, k)| (*k, i)).collect();
        let mut z = Vec::with_capacity(slots.len() * gamma_cols.len());
        for p in data.respondents().values() {
            let coded = coder.encode(p);
            z.extend(gamma_cols.iter().map(|k| coded[*k]));
        }

        let n = data.len();
        let mut obs_cell = Vec::with_capacity(n);
        let mut obs_q = Vec::with_capacity(n);
        let mut obs_resp = Vec::with_capacity(n);
        let mut term_start = Vec::with_capacity(n + 1);
        let mut term_param = Vec::new();
        let mut term_x = Vec::new();
        let mut range: Vec<(f64, f64)> = vec![(f64::INFINITY, f64::NEG_INFINITY); beta_ids.len()];
        for o in data.observations() {
            let c = cell_index[&o.row.cell()];
            obs_cell.push(c as u32);
            obs_q.push(o.quantity);
            obs_resp.push(slots[&o.respondent] as u32);
            term_start.push(term_param.len() as u32);
            for (k, p) in &cell_terms[c] {
                let x = o.row.coded[*k];
                let r = &mut range[*p as usize];
                r.0 = r.0.min(x);
                r.1 = r.1.max(x);
                if x != 0.0 {
                    term_param.push(*p);
                    term_x.push(x);
                }
            }
        }
        term_start.push(term_param.len() as u32);

        for (p, (lo, hi)) in range.iter().enumerate() {
            if !(hi > lo) {
                return Err(Error::Unidentified {
                    parameter: beta_ids[p].clone(),
                    reason: format!("its column is constant ({lo}) over the observations it covers"),
                });
            }
        }
        let k = gamma_cols.len();
        for (g, id) in gamma_ids.iter().enumerate() {
            let vals = (0..slots.len()).map(|r| z[r * k + g]);
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            if !(hi > lo) {
                return Err(Error::Unidentified {
                    parameter: id.clone(),
                    reason: format!("the covariate is constant ({lo}) across respondents"),
                });
            }
        }

        let mut names = Vec::new();
        names.extend(cells.iter().map(|c| format!("asc@{c}")));
        names.extend(beta_ids.iter().cloned());
        names.extend(gamma_ids.iter().cloned());
        for g in &group_keys {
            names.extend((2..=THRESHOLDS).map(|j| format!("tau@{g}#{j}")));
        }
        names.extend(free_mu.iter().map(|c| format!("mu@{}", cells[*c])));

        Ok(CompiledModel {
            names,
            mu_fixed: vec![0.0; cells.len()],
            cells,
            group_keys,
            beta_ids,
            gamma_ids,
            free_mu,
            cell_group,
            cell_mu,
            obs_cell,
            obs_q,
            obs_resp,
            term_start,
            term_param,
            term_x,
            z,
            n_resp: slots.len(),
        })
    }

    /// Parameter names in `θ` order. Threshold entries name the natural threshold
    /// whose increment the slot carries.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn n_obs(&self) -> usize {
        self.obs_q.len()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn group_keys(&self) -> &[String] {
        &self.group_keys
    }

    pub fn beta_ids(&self) -> &[String] {
        &self.beta_ids
    }

    /// Free log scales, by cell.
    pub fn free_scale_cells(&self) -> Vec<&Cell> {
        self.free_mu.iter().map(|c| &self.cells[*c]).collect()
    }

    fn off_beta(&self) -> usize {
        self.cells.len()
    }
    fn off_gamma(&self) -> usize {
        self.off_beta() + self.beta_ids.len()
    }
    fn off_delta(&self) -> usize {
        self.off_gamma() + self.gamma_ids.len()
    }
    fn off_mu(&self) -> usize {
        self.off_delta() + DELTAS * self.group_keys.len()
    }

    /// Range of `θ` holding the increments of a threshold group.
    pub fn delta_range(&self, group: usize) -> core::ops::Range<usize> {
        let s = self.off_delta() + DELTAS * group;
        s..s + DELTAS
    }

    /// Sets scales that are not estimated from a parameter set.
    pub fn set_fixed_scales(&mut self, params: &ParameterSet) {
        for (i, c) in self.cells.iter().enumerate() {
            self.mu_fixed[i] = params.mu.get(c).copied().unwrap_or(0.0);
        }
    }

    pub fn natural(&self, theta: &[f64]) -> Natural {
        assert_eq!(theta.len(), self.dim());
        let asc = theta[..self.off_beta()].to_vec();
        let beta = theta[self.off_beta()..self.off_gamma()].to_vec();
        let gamma = theta[self.off_gamma()..self.off_delta()].to_vec();
        let tau = (0..self.group_keys.len())
            .map(|g| {
                let d = &theta[self.delta_range(g)];
                let mut t = [0.0; THRESHOLDS];
                for j in 1..THRESHOLDS {
                    t[j] = t[j - 1] + increment(d[j - 1]);
                }
                t
            })
            .collect();
        let lambda = (0..self.cells.len())
            .map(|c| match self.cell_mu[c] {
                Some(m) => exp(theta[self.off_mu() + m]),
                None => exp(self.mu_fixed[c]),
            })
            .collect();
        Natural { asc, beta, gamma, tau, lambda }
    }

    pub fn natural_from_params(&self, params: &ParameterSet) -> Result<Natural> {
        params.check_thresholds()?;
        let missing = |id: String| Error::Spec(format!("parameter set lacks `{id}`"));
        let asc = self
            .cells
            .iter()
            .map(|c| params.asc.get(c).copied().ok_or_else(|| missing(format!("asc@{c}"))))
            .collect::<Result<Vec<_>>>()?;
        let beta = self
            .beta_ids
            .iter()
            .map(|id| params.beta.get(id).copied().ok_or_else(|| missing(id.clone())))
            .collect::<Result<Vec<_>>>()?;
        let gamma = self
            .gamma_ids
            .iter()
            .map(|id| params.gamma.get(id).copied().ok_or_else(|| missing(id.clone())))
            .collect::<Result<Vec<_>>>()?;
        let tau = self
            .group_keys
            .iter()
            .map(|k| {
                let t = params.tau.get(k).ok_or_else(|| missing(format!("tau@{k}")))?;
                let mut a = [0.0; THRESHOLDS];
                a.copy_from_slice(t);
                Ok(a)
            })
            .collect::<Result<Vec<_>>>()?;
        let lambda = self.cells.iter().map(|c| params.lambda(c)).collect();
        Ok(Natural { asc, beta, gamma, tau, lambda })
    }

    /// Unconstrained vector for a parameter set. Entries the set lacks come from `fallback`.
    pub fn theta_from_params(&self, params: &ParameterSet, fallback: Option<&[f64]>) -> Result<Vec<f64>> {
        params.check_thresholds()?;
        let mut theta = match fallback {
            Some(f) if f.len() == self.dim() => f.to_vec(),
            Some(_) => return Err(Error::Spec("fallback vector has the wrong length".into())),
            None => vec![f64::NAN; self.dim()],
        };
        for (i, c) in self.cells.iter().enumerate() {
            if let Some(v) = params.asc.get(c) {
                theta[i] = *v;
            }
        }
        for (i, id) in self.beta_ids.iter().enumerate() {
            if let Some(v) = params.beta.get(id) {
                theta[self.off_beta() + i] = *v;
            }
        }
        for (i, id) in self.gamma_ids.iter().enumerate() {
            if let Some(v) = params.gamma.get(id) {
                theta[self.off_gamma() + i] = *v;
            }
        }
        for (g, k) in self.group_keys.iter().enumerate() {
            if let Some(t) = params.tau.get(k) {
                let r = self.delta_range(g);
                for j in 1..THRESHOLDS {
                    theta[r.start + j - 1] = log(t[j] - t[j - 1]);
                }
            }
        }
        for (m, c) in self.free_mu.iter().enumerate() {
            if let Some(v) = params.mu.get(&self.cells[*c]) {
                theta[self.off_mu() + m] = *v;
            } else if fallback.is_none() {
                theta[self.off_mu() + m] = 0.0;
            }
        }
        if let Some(i) = theta.iter().position(|x| x.is_nan()) {
            return Err(Error::Spec(format!("parameter set lacks `{}`", self.names[i])));
        }
        Ok(theta)
    }

    pub fn params_from_theta(&self, theta: &[f64]) -> ParameterSet {
        let nat = self.natural(theta);
        let mut p = ParameterSet::default();
        for (i, c) in self.cells.iter().enumerate() {
            p.asc.insert(c.clone(), nat.asc[i]);
            let mu = match self.cell_mu[i] {
                Some(m) => theta[self.off_mu() + m],
                None => self.mu_fixed[i],
            };
            p.mu.insert(c.clone(), mu);
        }
        for (i, id) in self.beta_ids.iter().enumerate() {
            p.beta.insert(id.clone(), nat.beta[i]);
        }
        for (i, id) in self.gamma_ids.iter().enumerate() {
            p.gamma.insert(id.clone(), nat.gamma[i]);
        }
        for (g, k) in self.group_keys.iter().enumerate() {
            p.tau.insert(k.clone(), nat.tau[g].to_vec());
        }
        p
    }

    fn covariate_utility(&self, gamma: &[f64]) -> Vec<f64> {
        let k = gamma.len();
        (0..self.n_resp)
            .map(|r| self.z[r * k..(r + 1) * k].iter().zip(gamma).map(|(z, g)| z * g).sum())
            .collect()
    }

    /// Visits every observation with `(index, ln p, ∂/∂a, ∂/∂b, lower cut, upper cut)`.
    fn pass(&self, nat: &Natural, mut visit: impl FnMut(usize, f64, f64, f64, f64, f64)) {
        let gz = self.covariate_utility(&nat.gamma);
        for i in 0..self.n_obs() {
            let c = self.obs_cell[i] as usize;
            let mut w = nat.asc[c] + gz[self.obs_resp[i] as usize];
            for t in self.term_start[i] as usize..self.term_start[i + 1] as usize {
                w += nat.beta[self.term_param[t] as usize] * self.term_x[t];
            }
            let lambda = nat.lambda[c];
            let tau = &nat.tau[self.cell_group[c]];
            let q = self.obs_q[i] as usize;
            let lo = if q == 0 { f64::NEG_INFINITY } else { tau[q - 1] / lambda };
            let hi = if q == MAX_QUANTITY as usize { f64::INFINITY } else { tau[q] / lambda };
            let (lp, da, db) = ordered_term(lo - w, hi - w);
            visit(i, lp, da, db, lo, hi);
        }
    }

    pub fn log_likelihood(&self, nat: &Natural) -> f64 {
        let mut s = CompensatedSum::default();
        self.pass(nat, |_, lp, _, _, _, _| s.add(lp));
        s.value()
    }

    /// Log-likelihood contribution of each observation.
    pub fn observation_log_likelihoods(&self, nat: &Natural) -> Vec<f64> {
        let mut out = vec![0.0; self.n_obs()];
        self.pass(nat, |i, lp, _, _, _, _| out[i] = lp);
        out
    }

    /// Log-likelihood at `θ`, with its gradient written to `grad`.
    pub fn log_likelihood_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let nat = self.natural(theta);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (ob, og, om) = (self.off_beta(), self.off_gamma(), self.off_mu());
        let mut tg = vec![[0.0; THRESHOLDS]; self.group_keys.len()];
        let mut rg = vec![0.0; self.n_resp];
        let mut s = CompensatedSum::default();
        self.pass(&nat, |i, lp, da, db, lo, hi| {
            s.add(lp);
            let c = self.obs_cell[i] as usize;
            let dw = -(da + db);
            grad[c] += dw;
            for t in self.term_start[i] as usize..self.term_start[i + 1] as usize {
                grad[ob + self.term_param[t] as usize] += dw * self.term_x[t];
            }
            rg[self.obs_resp[i] as usize] += dw;
            let lambda = nat.lambda[c];
            let q = self.obs_q[i] as usize;
            let g = &mut tg[self.cell_group[c]];
            if lo.is_finite() {
                g[q - 1] += da / lambda;
            }
            if hi.is_finite() {
                g[q] += db / lambda;
            }
            if let Some(m) = self.cell_mu[c] {
                let mut d = 0.0;
                if lo.is_finite() {
                    d -= da * lo;
                }
                if hi.is_finite() {
                    d -= db * hi;
                }
                grad[om + m] += d;
            }
        });
        let k = self.gamma_ids.len();
        for (r, d) in rg.iter().enumerate() {
            for g in 0..k {
                grad[og + g] += d * self.z[r * k + g];
            }
        }
        for (grp, t) in tg.iter().enumerate() {
            let range = self.delta_range(grp);
            let mut tail = 0.0;
            for j in (1..THRESHOLDS).rev() {
                tail += t[j];
                grad[range.start + j - 1] = increment_slope(theta[range.start + j - 1]) * tail;
            }
        }
        s.value()
    }

    /// Outer-product-of-scores matrix at `θ`, summed over observations.
    pub fn bhhh(&self, theta: &[f64]) -> Matrix {
        let nat = self.natural(theta);
        let n = self.dim();
        let mut m = Matrix::zeros(n);
        let (ob, og, om) = (self.off_beta(), self.off_gamma(), self.off_mu());
        let k = self.gamma_ids.len();
        let mut sv: Vec<(usize, f64)> = Vec::new();
        self.pass(&nat, |i, _, da, db, lo, hi| {
            sv.clear();
            let c = self.obs_cell[i] as usize;
            let r = self.obs_resp[i] as usize;
            let dw = -(da + db);
            sv.push((c, dw));
            for t in self.term_start[i] as usize..self.term_start[i + 1] as usize {
                sv.push((ob + self.term_param[t] as usize, dw * self.term_x[t]));
            }
            for g in 0..k {
                sv.push((og + g, dw * self.z[r * k + g]));
            }
            let lambda = nat.lambda[c];
            let q = self.obs_q[i] as usize;
            let range = self.delta_range(self.cell_group[c]);
            let mut t = [0.0; THRESHOLDS];
            if lo.is_finite() {
                t[q - 1] += da / lambda;
            }
            if hi.is_finite() {
                t[q] += db / lambda;
            }
            let mut tail = 0.0;
            for j in (1..THRESHOLDS).rev() {
                tail += t[j];
                if tail != 0.0 {
                    sv.push((range.start + j - 1, increment_slope(theta[range.start + j - 1]) * tail));
                }
            }
            if let Some(mi) = self.cell_mu[c] {
                let mut d = 0.0;
                if lo.is_finite() {
                    d -= da * lo;
                }
                if hi.is_finite() {
                    d -= db * hi;
                }
                sv.push((om + mi, d));
            }
            for &(a, va) in sv.iter() {
                for &(b, vb) in sv.iter() {
                    m[(a, b)] += va * vb;
                }
            }
        });
        m
    }

    /// Name of parameter `i`.
    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    /// Start values: zero coefficients and unit scales, thresholds from the
    /// empirical quantity distribution of each threshold group and intercepts
    /// matching each cell's zero-purchase share.
    pub fn start_theta(&self) -> Vec<f64> {
        let mut theta = vec![0.0; self.dim()];
        let mut g_counts = vec![[0usize; CATEGORIES]; self.group_keys.len()];
        let mut c_counts = vec![[0usize; CATEGORIES]; self.cells.len()];
        for i in 0..self.n_obs() {
            let c = self.obs_cell[i] as usize;
            g_counts[self.cell_group[c]][self.obs_q[i] as usize] += 1;
            c_counts[c][self.obs_q[i] as usize] += 1;
        }
        let cdf = |counts: &[usize; CATEGORIES], j: usize| {
            let total: usize = counts.iter().sum();
            let below: usize = counts[..=j].iter().sum();
            let f = (below as f64 + 0.5) / (total as f64 + 1.0);
            f.clamp(1e-4, 1.0 - 1e-4)
        };
        let logit = crate::math::logit;
        for (c, counts) in c_counts.iter().enumerate() {
            theta[c] = -logit(cdf(counts, 0));
        }
        for (g, counts) in g_counts.iter().enumerate() {
            let base = logit(cdf(counts, 0));
            let range = self.delta_range(g);
            let mut prev = 0.0;
            for j in 1..THRESHOLDS {
                let t = (logit(cdf(counts, j)) - base).max(prev + 0.1);
                theta[range.start + j - 1] = log(t - prev);
                prev = t;
            }
        }
        theta
    }

    /// Per-parameter kind, for reports.
    pub fn kind(&self, i: usize) -> ParamKind {
        if i < self.off_beta() {
            ParamKind::Asc
        } else if i < self.off_gamma() {
            ParamKind::Beta
        } else if i < self.off_delta() {
            ParamKind::Gamma
        } else if i < self.off_mu() {
            ParamKind::Threshold
        } else {
            ParamKind::Scale
        }
    }

    /// Group and position (`2..=10`) of a threshold slot of `θ`.
    pub fn threshold_slot(&self, i: usize) -> Option<(usize, usize)> {
        if self.kind(i) != ParamKind::Threshold {
            return None;
        }
        let k = i - self.off_delta();
        Some((k / DELTAS, k % DELTAS + 2))
    }

    pub fn describe(&self) -> String {
        format!(
            "{} observations, {} cells, {} coefficients, {} covariates, {} threshold groups, {} free scales",
            self.n_obs(),
            self.cells.len(),
            self.beta_ids.len(),
            self.gamma_ids.len(),
            self.group_keys.len(),
            self.free_mu.len()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Asc,
    Beta,
    Gamma,
    Threshold,
    Scale,
}

/// Log-likelihood of a parameter set on a dataset.
pub fn log_likelihood(
    schema: &AttributeSchema,
    spec: &ModelSpec,
    coder: &CovariateCoder,
    params: &ParameterSet,
    data: &Dataset,
) -> Result<f64> {
    let mut m = CompiledModel::new(schema, spec, coder, data)?;
    m.set_fixed_scales(params);
    let nat = m.natural_from_params(params)?;
    Ok(m.log_likelihood(&nat))
}

/// Gradient of the log-likelihood in the unconstrained layout of [`CompiledModel`],
/// keyed by parameter name.
pub fn gradient(
    schema: &AttributeSchema,
    spec: &ModelSpec,
    coder: &CovariateCoder,
    params: &ParameterSet,
    data: &Dataset,
) -> Result<BTreeMap<String, f64>> {
    let mut m = CompiledModel::new(schema, spec, coder, data)?;
    m.set_fixed_scales(params);
    let theta = m.theta_from_params(params, None)?;
    let mut g = vec![0.0; m.dim()];
    m.log_likelihood_grad(&theta, &mut g);
    Ok(m.names().iter().map(|n| n.to_string()).zip(g).collect())
}
