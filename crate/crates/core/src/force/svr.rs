//! ε-insensitive support vector regression solved by SMO.
//!
//! The dual is written over 2l variables `α = [α⁺; α⁻]` with labels
//! `y = [+1; −1]` and linear term `p = [ε − z; ε + z]`:
//!
//! ```text
//! min ½ αᵀQα + pᵀα   s.t.  yᵀα = 0,  0 ≤ α ≤ C,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! Working pairs are chosen with second-order information and the solver
//! stops when the maximal KKT violation `m(α) − M(α)` drops below the
//! tolerance.

use serde::{Deserialize, Serialize};

use super::feature::FeatureSet;
use super::model::ForceModel;
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

/// Row-major design matrix with targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    dim: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            x: Vec::new(),
            y: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[f64], target: f64) {
        assert_eq!(row.len(), self.dim);
        self.x.extend_from_slice(row);
        self.y.push(target);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    /// Same samples in a canonical order (lexicographic on features, then target).
    fn canonical(&self) -> Dataset {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.row(a)
                .iter()
                .zip(self.row(b))
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(self.y[a].total_cmp(&self.y[b]))
        });
        let mut out = Dataset::new(self.dim);
        for i in idx {
            out.push(self.row(i), self.y[i]);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    /// RBF width; `None` selects `1/(dim · median pairwise squared distance)`.
    pub gamma: Option<f64>,
    pub tolerance: f64,
    /// Iteration cap; `None` uses `max(10⁷, 100·l)`.
    pub max_iter: Option<usize>,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self {
            c: 10.0,
            epsilon: 0.01,
            gamma: None,
            tolerance: 1e-3,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub iterations: usize,
    /// Final maximal KKT violation.
    pub gap: f64,
    pub n_samples: usize,
    pub gamma: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// `1/(dim · median ‖x_i − x_j‖²)` over (at most 2000 evenly strided) samples.
pub fn default_gamma(ds: &Dataset) -> f64 {
    let n = ds.len();
    let stride = n.div_ceil(2000).max(1);
    let pick: Vec<usize> = (0..n).step_by(stride).collect();
    let mut d: Vec<f64> = Vec::with_capacity(pick.len() * pick.len() / 2);
    for (a, &i) in pick.iter().enumerate() {
        for &j in &pick[a + 1..] {
            d.push(sq_dist(ds.row(i), ds.row(j)));
        }
    }
    let median = if d.is_empty() {
        0.0
    } else {
        let mid = d.len() / 2;
        *d.select_nth_unstable_by(mid, f64::total_cmp).1
    };
    if median > 0.0 {
        1.0 / (ds.dim() as f64 * median)
    } else {
        1.0 / ds.dim().max(1) as f64
    }
}

struct Smo<'a> {
    l: usize,
    k: &'a [f64],
    c: f64,
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

impl Smo<'_> {
    #[inline]
    fn y(&self, t: usize) -> f64 {
        if t < self.l {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    fn kernel_row(&self, t: usize) -> &[f64] {
        let r = t % self.l;
        &self.k[r * self.l..(r + 1) * self.l]
    }

    #[inline]
    fn q(&self, i: usize, j: usize) -> f64 {
        self.y(i) * self.y(j) * self.kernel_row(i)[j % self.l]
    }

    /// Second-order working set selection. Returns the pair and the current gap.
    fn select(&self) -> (Option<(usize, usize)>, f64) {
        let n = 2 * self.l;
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if self.y(t) > 0.0 {
                if self.alpha[t] < self.c && -self.grad[t] >= gmax {
                    gmax = -self.grad[t];
                    i = t;
                }
            } else if self.alpha[t] > 0.0 && self.grad[t] >= gmax {
                gmax = self.grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            return (None, 0.0);
        }
        let ki = self.kernel_row(i);
        let yi = self.y(i);
        let mut gmax2 = f64::NEG_INFINITY;
        let mut best = f64::INFINITY;
        let mut j = usize::MAX;
        for t in 0..n {
            let kit = ki[t % self.l];
            if self.y(t) > 0.0 {
                if self.alpha[t] > 0.0 {
                    let diff = gmax + self.grad[t];
                    gmax2 = gmax2.max(self.grad[t]);
                    if diff > 0.0 {
                        // Q_ii + Q_tt − 2 y_i Q_it with unit-diagonal RBF
                        let quad = 2.0 - 2.0 * yi * (yi * kit);
                        let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                        if obj <= best {
                            best = obj;
                            j = t;
                        }
                    }
                }
            } else if self.alpha[t] < self.c {
                let diff = gmax - self.grad[t];
                gmax2 = gmax2.max(-self.grad[t]);
                if diff > 0.0 {
                    let quad = 2.0 + 2.0 * yi * (-yi * kit);
                    let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best {
                        best = obj;
                        j = t;
                    }
                }
            }
        }
        let gap = gmax + gmax2;
        if j == usize::MAX {
            (None, gap.max(0.0))
        } else {
            (Some((i, j)), gap)
        }
    }

    fn update(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let qij = self.q(i, j);
        let (mut ai, mut aj) = (old_i, old_j);
        if self.y(i) != self.y(j) {
            let quad = (2.0 + 2.0 * qij).max(TAU);
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (2.0 - 2.0 * qij).max(TAU);
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let di = (ai - old_i) * self.y(i);
        let dj = (aj - old_j) * self.y(j);
        let l = self.l;
        let ki = &self.k[(i % l) * l..(i % l + 1) * l];
        let kj = &self.k[(j % l) * l..(j % l + 1) * l];
        // G_t += y_t (y_i K_it Δα_i + y_j K_jt Δα_j)
        for r in 0..l {
            let s = ki[r] * di + kj[r] * dj;
            self.grad[r] += s;
            self.grad[r + l] -= s;
        }
    }

    /// Offset ρ such that the decision function is `Σ coef·K − ρ`.
    fn rho(&self) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum, mut free) = (0.0, 0usize);
        for t in 0..2 * self.l {
            let yg = self.y(t) * self.grad[t];
            let a = self.alpha[t];
            if a >= self.c {
                if self.y(t) < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if a <= 0.0 {
                if self.y(t) > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                sum += yg;
                free += 1;
            }
        }
        if free > 0 {
            sum / free as f64
        } else {
            (ub + lb) / 2.0
        }
    }
}

fn gram(ds: &Dataset, gamma: f64) -> Vec<f64> {
    let l = ds.len();
    let mut k = vec![0.0; l * l];
    for i in 0..l {
        k[i * l + i] = 1.0;
        for j in i + 1..l {
            let v = (-gamma * sq_dist(ds.row(i), ds.row(j))).exp();
            k[i * l + j] = v;
            k[j * l + i] = v;
        }
    }
    k
}

/// Fit an RBF ε-SVR. The result does not depend on sample order.
///
/// On hitting the iteration cap, returns [`Error::NotConverged`] carrying the
/// model built from the last iterate.
pub fn train(ds: &Dataset, params: &SvrParams, feature_set: FeatureSet) -> Result<(ForceModel, TrainReport)> {
    if ds.dim() != feature_set.dim() {
        return Err(Error::InvalidArgument(format!(
            "dataset has dimension {} but feature set `{}` needs {}",
            ds.dim(),
            feature_set.tag(),
            feature_set.dim()
        )));
    }
    if ds.is_empty() {
        return Err(Error::InsufficientSamples { have: 0, need: 1 });
    }
    if !(params.c > 0.0) || !(params.epsilon >= 0.0) || !(params.tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need C > 0, ε ≥ 0 and tolerance > 0 (got {}, {}, {})",
            params.c, params.epsilon, params.tolerance
        )));
    }
    if ds.x.iter().chain(&ds.y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite feature or target".into()));
    }
    let ds = ds.canonical();
    let gamma = params.gamma.unwrap_or_else(|| default_gamma(&ds));
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let l = ds.len();
    let k = gram(&ds, gamma);
    let mut grad = Vec::with_capacity(2 * l);
    grad.extend(ds.y.iter().map(|z| params.epsilon - z));
    grad.extend(ds.y.iter().map(|z| params.epsilon + z));
    let mut smo = Smo {
        l,
        k: &k,
        c: params.c,
        alpha: vec![0.0; 2 * l],
        grad,
    };
    let cap = params.max_iter.unwrap_or_else(|| (100 * l).max(10_000_000));
    let mut iterations = 0;
    let mut gap;
    loop {
        let (pair, g) = smo.select();
        gap = g;
        let Some((i, j)) = pair.filter(|_| g >= params.tolerance) else {
            break;
        };
        if iterations >= cap {
            break;
        }
        smo.update(i, j);
        iterations += 1;
    }
    let rho = smo.rho();
    let mut sv = Vec::new();
    let mut coef = Vec::new();
    for t in 0..l {
        let a = smo.alpha[t] - smo.alpha[t + l];
        if a != 0.0 {
            sv.extend_from_slice(ds.row(t));
            coef.push(a);
        }
    }
    let model = ForceModel::new(feature_set, gamma, params.c, params.epsilon, -rho, sv, coef)?;
    let report = TrainReport {
        iterations,
        gap,
        n_samples: l,
        gamma,
    };
    if gap >= params.tolerance {
        return Err(Error::NotConverged {
            iterations,
            gap,
            best: Box::new(model),
        });
    }
    Ok((model, report))
}

/// Largest violation of the ε-SVR optimality conditions by `model` on `ds`.
///
/// With `r_i = z_i − f(x_i)` and `β_i` the coefficient of sample i
/// (0 if it is not a support vector): `β_i = 0` needs `|r_i| ≤ ε`,
/// `0 < β_i < C` needs `r_i = ε`, `β_i = C` needs `r_i ≥ ε`, and
/// symmetrically for negative `β_i`.
pub fn kkt_residual(model: &ForceModel, ds: &Dataset) -> f64 {
    let eps = model.epsilon;
    let c = model.c;
    let mut worst: f64 = 0.0;
    for i in 0..ds.len() {
        let x = ds.row(i);
        let r = ds.target(i) - model.predict_raw(x);
        let beta: f64 = (0..model.n_sv())
            .filter(|&j| model.support_vector(j) == x)
            .map(|j| model.coefficients()[j])
            .sum();
        let tol_c = 1e-9 * c.max(1.0);
        let v = if beta.abs() <= tol_c {
            (r.abs() - eps).max(0.0)
        } else if beta >= c - tol_c {
            (eps - r).max(0.0)
        } else if beta <= -c + tol_c {
            (r + eps).max(0.0)
        } else if beta > 0.0 {
            (r - eps).abs()
        } else {
            (r + eps).abs()
        };
        worst = worst.max(v);
    }
    worst
}
