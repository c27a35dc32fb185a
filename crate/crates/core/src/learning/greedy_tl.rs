//! GreedyTL: greedy forward selection over raw features and source hypotheses, followed by a
//! ridge fit on the selected atoms and a collapse back to a plain linear model.
//!
//! For class `c` every training point is mapped to `p = d + S` atoms: the `d` raw features
//! and, for each source model `s`, the score `s` assigns to class `c`. An unpenalized
//! intercept is always part of the fit and does not count against the budget. Selection is
//! joint over classes: each step adds the atom that lowers the summed regularized
//! least-squares risk
//!
//! ```text
//! sum_c  min_w ||A_c w - y_c||^2 + lambda ||w||^2 ,   y_c in {-1, +1}
//! ```
//!
//! the most. Risk reductions are evaluated with an incrementally grown Cholesky factor of
//! each class's Gram matrix, so a candidate costs O(|selected|) per class and step.

use super::{subsample_per_class, LinearModel};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyTLConfig {
    /// Maximum number of selected atoms; `None` means every atom may be selected.
    pub budget: Option<usize>,
    pub lambda: f64,
    /// Fit on at most this many random points per class.
    pub per_class_sample: Option<usize>,
    pub seed: u64,
}

impl Default for GreedyTLConfig {
    fn default() -> Self {
        GreedyTLConfig {
            budget: None,
            lambda: 1.0,
            per_class_sample: None,
            seed: 0,
        }
    }
}

impl GreedyTLConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("greedy_tl lambda must be > 0, got {}", self.lambda)));
        }
        if self.per_class_sample == Some(0) {
            return Err(Error::config("greedy_tl per-class sample must be >= 1"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        GreedyTLConfig { seed, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Atom {
    Feature(usize),
    /// Index into [`GreedyFit::sources`].
    Source(usize),
}

/// Everything GreedyTL decided, kept so the collapsed model can be checked against the
/// atom combination it came from.
#[derive(Debug, Clone)]
pub struct GreedyFit {
    /// Selected atoms in selection order.
    pub selected: Vec<Atom>,
    /// Per class: intercept followed by one coefficient per selected atom.
    pub coefficients: Vec<Vec<f64>>,
    /// Summed risk with the intercept only, then after every selection step.
    pub risk_trace: Vec<f64>,
    /// Distinct source models that were offered as atoms.
    pub sources: Vec<LinearModel>,
    pub model: LinearModel,
}

impl GreedyFit {
    /// Class scores computed from the atoms directly rather than through the collapsed model.
    pub fn direct_scores(&self, x: &[f64]) -> Vec<f64> {
        (0..self.model.num_classes())
            .map(|c| {
                let coef = &self.coefficients[c];
                let mut s = coef[0];
                for (atom, w) in self.selected.iter().zip(&coef[1..]) {
                    s += w * match *atom {
                        Atom::Feature(f) => x[f],
                        Atom::Source(j) => self.sources[j].score(c, x),
                    };
                }
                s
            })
            .collect()
    }
}

/// Runs GreedyTL and returns the collapsed model.
pub fn greedy_tl(data: &Dataset, sources: &[LinearModel], cfg: &GreedyTLConfig) -> Result<LinearModel> {
    greedy_tl_fit(data, sources, cfg).map(|fit| fit.model)
}

/// Runs GreedyTL and returns the full selection record.
pub fn greedy_tl_fit(data: &Dataset, sources: &[LinearModel], cfg: &GreedyTLConfig) -> Result<GreedyFit> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::domain("greedy_tl needs at least one observation"));
    }
    let k = data.num_classes();
    let d = data.feature_dim();
    if let Some(bad) = sources.iter().position(|s| s.num_classes() != k || s.feature_dim() != d) {
        return Err(Error::domain(format!(
            "source {bad} has shape {}x{}, data needs {k}x{d}",
            sources[bad].num_classes(),
            sources[bad].feature_dim()
        )));
    }

    let sampled;
    let data = match cfg.per_class_sample {
        Some(n) => {
            sampled = subsample_per_class(data, n, &mut rng_from(cfg.seed));
            &sampled
        }
        None => data,
    };

    // Identical sources would be identical atoms; keep the first copy.
    let mut distinct: Vec<LinearModel> = Vec::with_capacity(sources.len());
    for s in sources {
        if !distinct.iter().any(|t| t.weights() == s.weights()) {
            distinct.push(s.clone());
        }
    }
    let n_src = distinct.len();
    let p = d + n_src;
    let budget = cfg.budget.unwrap_or(p).min(p);

    let problems = build_problems(data, &distinct, cfg.lambda);
    let mut states: Vec<CholeskyState> = problems.iter().map(CholeskyState::with_intercept).collect();

    let mut selected_idx: Vec<usize> = Vec::with_capacity(budget);
    let mut available = vec![true; p];
    let mut risk = states.iter().map(|s| s.risk).sum::<f64>();
    let mut risk_trace = vec![risk];

    while selected_idx.len() < budget {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..p).filter(|&j| available[j]) {
            let gain: f64 = states.iter().zip(&problems).map(|(s, g)| s.reduction(g, j)).sum();
            if best.is_none_or(|(_, b)| gain > b) {
                best = Some((j, gain));
            }
        }
        let Some((j, gain)) = best else { break };
        if !(gain > 1e-12 * risk.abs().max(1.0)) {
            break;
        }
        for (s, g) in states.iter_mut().zip(&problems) {
            s.add(g, j, &available);
        }
        available[j] = false;
        selected_idx.push(j);
        risk = states.iter().map(|s| s.risk).sum();
        risk_trace.push(risk);
    }

    let coefficients: Vec<Vec<f64>> = states.iter().map(CholeskyState::solve).collect();
    let selected: Vec<Atom> = selected_idx
        .iter()
        .map(|&j| if j < d { Atom::Feature(j) } else { Atom::Source(j - d) })
        .collect();

    let mut model = LinearModel::zeros(k, d);
    for (c, coef) in coefficients.iter().enumerate() {
        let row = model.row_mut(c);
        row[d] = coef[0];
        for (atom, w) in selected.iter().zip(&coef[1..]) {
            match *atom {
                Atom::Feature(f) => row[f] += w,
                Atom::Source(s) => {
                    for (r, v) in row.iter_mut().zip(distinct[s].row(c)) {
                        *r += w * v;
                    }
                }
            }
        }
    }
    if model.weights().iter().any(|w| !w.is_finite()) {
        return Err(Error::domain("greedy_tl produced non-finite weights"));
    }

    Ok(GreedyFit {
        selected,
        coefficients,
        risk_trace,
        sources: distinct,
        model,
    })
}

/// Regularized normal equations of one class. Index `p` is the intercept.
struct Problem {
    p: usize,
    /// `(p + 1) x (p + 1)` row-major, ridge already on the atom diagonal.
    gram: Vec<f64>,
    rhs: Vec<f64>,
    yy: f64,
}

impl Problem {
    #[inline]
    fn g(&self, a: usize, b: usize) -> f64 {
        self.gram[a * (self.p + 1) + b]
    }
}

fn build_problems(data: &Dataset, sources: &[LinearModel], lambda: f64) -> Vec<Problem> {
    let k = data.num_classes();
    let d = data.feature_dim();
    let s = sources.len();
    let p = d + s;
    let n = data.len();
    let q = p + 1;

    // Raw block including the intercept column at index d, shared by every class.
    let mut raw = vec![0.0; (d + 1) * (d + 1)];
    let mut xa = vec![0.0; d + 1];
    for o in data {
        xa[..d].copy_from_slice(&o.features);
        xa[d] = 1.0;
        for a in 0..=d {
            let va = xa[a];
            if va == 0.0 {
                continue;
            }
            let row = &mut raw[a * (d + 1)..(a + 1) * (d + 1)];
            for b in a..=d {
                row[b] += va * xa[b];
            }
        }
    }
    for a in 0..=d {
        for b in 0..a {
            raw[a * (d + 1) + b] = raw[b * (d + 1) + a];
        }
    }

    // map atom index to the raw-block index (intercept sits at d in the raw block, p overall)
    let raw_index = |a: usize| if a == p { d } else { a };

    (0..k)
        .map(|c| {
            // source scores for this class, one column per source
            let scores: Vec<Vec<f64>> = sources
                .iter()
                .map(|m| data.iter().map(|o| m.score(c, &o.features)).collect())
                .collect();
            let ys: Vec<f64> = data.iter().map(|o| if o.label == c { 1.0 } else { -1.0 }).collect();

            let mut gram = vec![0.0; q * q];
            for a in (0..d).chain(std::iter::once(p)) {
                for b in (0..d).chain(std::iter::once(p)) {
                    gram[a * q + b] = raw[raw_index(a) * (d + 1) + raw_index(b)];
                }
            }
            for (j, col) in scores.iter().enumerate() {
                let sj = d + j;
                let mut cross = vec![0.0; d];
                for (sc, ob) in col.iter().zip(data.iter()) {
                    for (acc, x) in cross.iter_mut().zip(&ob.features) {
                        *acc += sc * x;
                    }
                }
                for (a, v) in cross.into_iter().enumerate() {
                    gram[sj * q + a] = v;
                    gram[a * q + sj] = v;
                }
                let v: f64 = col.iter().sum();
                gram[sj * q + p] = v;
                gram[p * q + sj] = v;
                for (l, other) in scores.iter().enumerate().take(j + 1) {
                    let v: f64 = col.iter().zip(other).map(|(x, y)| x * y).sum();
                    gram[sj * q + d + l] = v;
                    gram[(d + l) * q + sj] = v;
                }
            }
            for a in 0..p {
                gram[a * q + a] += lambda;
            }

            let mut rhs = vec![0.0; q];
            for (o, y) in data.iter().zip(&ys) {
                for (r, x) in rhs[..d].iter_mut().zip(&o.features) {
                    *r += x * y;
                }
                rhs[p] += y;
            }
            for (j, col) in scores.iter().enumerate() {
                rhs[d + j] = col.iter().zip(&ys).map(|(s, y)| s * y).sum();
            }
            Problem {
                p,
                gram,
                rhs,
                yy: n as f64,
            }
        })
        .collect()
}

/// Incremental Cholesky factor of the Gram matrix restricted to the selected atoms.
struct CholeskyState {
    /// Selected indices in order (intercept first).
    order: Vec<usize>,
    /// Rows of the lower-triangular factor; row `i` has `i + 1` entries.
    factor: Vec<Vec<f64>>,
    /// `L^{-1} b_S`.
    z: Vec<f64>,
    /// Per candidate atom: `L^{-1} G_{S, j}`.
    proj: Vec<Vec<f64>>,
    risk: f64,
}

impl CholeskyState {
    fn with_intercept(g: &Problem) -> Self {
        let p = g.p;
        let diag = g.g(p, p).sqrt();
        let z0 = g.rhs[p] / diag;
        let proj = (0..p).map(|j| vec![g.g(p, j) / diag]).collect();
        CholeskyState {
            order: vec![p],
            factor: vec![vec![diag]],
            z: vec![z0],
            proj,
            risk: g.yy - z0 * z0,
        }
    }

    /// Risk decrease from adding atom `j`.
    fn reduction(&self, g: &Problem, j: usize) -> f64 {
        let v = &self.proj[j];
        let schur = g.g(j, j) - dot(v, v);
        if schur <= 0.0 {
            return 0.0;
        }
        let r = g.rhs[j] - dot(v, &self.z);
        r * r / schur
    }

    fn add(&mut self, g: &Problem, k: usize, available: &[bool]) {
        let vk = self.proj[k].clone();
        let diag = (g.g(k, k) - dot(&vk, &vk)).max(f64::MIN_POSITIVE).sqrt();
        let zk = (g.rhs[k] - dot(&vk, &self.z)) / diag;
        for j in 0..g.p {
            if j != k && available[j] {
                let e = (g.g(k, j) - dot(&vk, &self.proj[j])) / diag;
                self.proj[j].push(e);
            }
        }
        let mut row = vk;
        row.push(diag);
        self.factor.push(row);
        self.z.push(zk);
        self.order.push(k);
        self.risk = g.yy - dot(&self.z, &self.z);
    }

    /// Back-substitution `L^T w = z`.
    fn solve(&self) -> Vec<f64> {
        let m = self.z.len();
        let mut w = vec![0.0; m];
        for i in (0..m).rev() {
            let mut acc = self.z[i];
            for (r, wr) in w.iter().enumerate().skip(i + 1) {
                acc -= self.factor[r][i] * wr;
            }
            w[i] = acc / self.factor[i][i];
        }
        w
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
