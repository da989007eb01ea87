use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::{Context, Hooks, TrainHistory};
use crate::data::{Rows, TripletDataset};
use crate::error::{Error, Result};
use crate::network::{LossTerms, Model};
use crate::numerics::Rng;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LbfgsConfig {
    /// Number of (s, y) pairs kept.
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop once the gradient's largest absolute entry is this small.
    pub gradient_tolerance: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    /// Examples per mega-batch; 0 means the full training set.
    pub mega_batch: usize,
    /// Iterations spent on one mega-batch before moving to the next, with
    /// fresh curvature memory. `None` keeps one fixed mega-batch throughout.
    pub batch_iterations: Option<usize>,
    /// Seeds the mega-batch sampling order.
    pub seed: u64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            max_iterations: 200,
            gradient_tolerance: 1e-5,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 30,
            mega_batch: 10_000,
            batch_iterations: None,
            seed: 0,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(Error::contract("L-BFGS memory must be at least 1"));
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return Err(Error::contract("Armijo constant must lie in (0, 1)"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::contract("backtrack factor must lie in (0, 1)"));
        }
        if self.batch_iterations == Some(0) {
            return Err(Error::contract("batch_iterations must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LbfgsStatus {
    Converged,
    MaxIterations,
    /// No step satisfied the Armijo condition; the last accepted point is
    /// returned.
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub loss: LossTerms,
    pub gradient: Vec<f64>,
    pub history: TrainHistory,
    pub status: LbfgsStatus,
    pub iterations: usize,
    pub evaluations: usize,
}

/// One stored curvature pair with `rho = 1 / (sᵀy)`.
#[derive(Clone, Debug)]
pub struct CurvaturePair {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub rho: f64,
}

impl CurvaturePair {
    pub fn new(s: Vec<f64>, y: Vec<f64>) -> Self {
        let rho = 1.0 / dot(&s, &y);
        CurvaturePair { s, y, rho }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(libm::fabs(*x)))
}

/// Two-loop recursion: returns `H g`, where `H` is the limited-memory
/// inverse-Hessian estimate built from `pairs` (oldest first) with initial
/// scaling `γ = sᵀy / yᵀy` from the newest pair.
pub fn two_loop_direction<'a>(
    grad: &[f64],
    pairs: impl DoubleEndedIterator<Item = &'a CurvaturePair> + Clone,
) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::new();
    for p in pairs.clone().rev() {
        let a = p.rho * dot(&p.s, &q);
        for (qi, yi) in q.iter_mut().zip(&p.y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let gamma = pairs
        .clone()
        .next_back()
        .map_or(1.0, |p| dot(&p.s, &p.y) / dot(&p.y, &p.y));
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for (p, a) in pairs.zip(alphas.into_iter().rev()) {
        let b = p.rho * dot(&p.y, &q);
        for (qi, si) in q.iter_mut().zip(&p.s) {
            *qi += (a - b) * si;
        }
    }
    q
}

/// Minimizes a smooth objective with L-BFGS and Armijo backtracking.
///
/// `objective` returns the loss terms and gradient at a point; only
/// `total` is minimized. Accepted losses never increase. Pairs with
/// `sᵀy <= 1e-10` are skipped. The trial step is 1, or `1 / ‖g‖` while no
/// curvature pairs are stored.
pub fn lbfgs_minimize<F>(mut objective: F, x0: Vec<f64>, cfg: &LbfgsConfig, hooks: &dyn Hooks) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(LossTerms, Vec<f64>)>,
{
    cfg.validate()?;
    let mut x = x0;
    let (mut f, mut g) = objective(&x)?;
    let mut evaluations = 1;
    if !f.total.is_finite() || !g.iter().all(|v| v.is_finite()) {
        return Err(Error::non_finite("L-BFGS objective at the starting point"));
    }
    let mut history = TrainHistory::default();
    let record = history.push(0, f, hooks.seconds());
    hooks.on_record("lbfgs", &record);

    let mut pairs: VecDeque<CurvaturePair> = VecDeque::with_capacity(cfg.memory);
    let mut status = LbfgsStatus::MaxIterations;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        if inf_norm(&g) <= cfg.gradient_tolerance {
            status = LbfgsStatus::Converged;
            break;
        }
        let mut dir: Vec<f64> = two_loop_direction(&g, pairs.iter()).into_iter().map(|v| -v).collect();
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            // Not a descent direction: drop the memory and go downhill.
            pairs.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
        }

        // Without curvature memory the direction is the raw gradient, whose
        // scale says nothing about a good step length.
        let mut step = if pairs.is_empty() {
            (1.0 / libm::sqrt(dot(&g, &g))).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let candidate: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let (fc, gc) = objective(&candidate)?;
            evaluations += 1;
            if fc.total.is_finite()
                && gc.iter().all(|v| v.is_finite())
                && fc.total <= f.total + cfg.armijo_c1 * step * slope
            {
                accepted = Some((candidate, fc, gc));
                break;
            }
            step *= cfg.backtrack_factor;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            status = LbfgsStatus::LineSearchFailed;
            break;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-10 {
            if pairs.len() == cfg.memory {
                pairs.pop_front();
            }
            pairs.push_back(CurvaturePair::new(s, y));
        }
        x = x_new;
        f = f_new;
        g = g_new;
        iterations += 1;
        let record = history.push(iterations, f, hooks.seconds());
        hooks.on_record("lbfgs", &record);
    }
    if status == LbfgsStatus::MaxIterations && inf_norm(&g) <= cfg.gradient_tolerance {
        status = LbfgsStatus::Converged;
    }
    Ok(LbfgsOutcome {
        x,
        loss: f,
        gradient: g,
        history,
        status,
        iterations,
        evaluations,
    })
}

/// Fine-tunes `model` on the mean loss over mega-batches of `data`.
pub fn lbfgs_train<M: Model>(
    model: &M,
    data: &TripletDataset,
    cfg: &LbfgsConfig,
    ctx: Context<'_>,
) -> Result<(M, TrainHistory, LbfgsStatus)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::contract("cannot train on an empty dataset"));
    }
    let n = data.len();
    let batch_size = if cfg.mega_batch == 0 { n } else { cfg.mega_batch.min(n) };
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = Rng::new(cfg.seed);
    if batch_size < n {
        rng.shuffle(&mut order);
    }
    let per_batch = cfg.batch_iterations.unwrap_or(cfg.max_iterations);

    let mut params = model.flatten().0;
    let mut history = TrainHistory::default();
    let mut done = 0;
    let mut cursor = 0;
    let status = loop {
        if cursor + batch_size > n {
            rng.shuffle(&mut order);
            cursor = 0;
        }
        let batch = if batch_size == n {
            data.clone()
        } else {
            data.select(&order[cursor..cursor + batch_size])?
        };
        cursor += batch_size;
        let scale = 1.0 / batch.len() as f64;
        let budget = per_batch.min(cfg.max_iterations - done);
        let inner_cfg = LbfgsConfig {
            max_iterations: budget,
            ..cfg.clone()
        };
        let outcome = lbfgs_minimize(
            |x| {
                let (terms, grad) = model.with_params(x)?.loss_and_gradient(&batch, ctx.exec)?;
                Ok((terms.scaled(scale), grad.0.into_iter().map(|g| g * scale).collect()))
            },
            params,
            &inner_cfg,
            &Offset {
                inner: ctx.hooks,
                by: done,
            },
        )?;
        for r in &outcome.history.records {
            // Each batch restarts at iteration 0; after the first batch that
            // point duplicates the previous batch's last iteration.
            let iteration = done + r.iteration;
            if history.last().map_or(true, |last| last.iteration < iteration) {
                history.records.push(super::HistoryRecord { iteration, ..*r });
            }
        }
        params = outcome.x;
        done += outcome.iterations;
        let full_batch_finished = batch_size == n && outcome.status != LbfgsStatus::MaxIterations;
        if done >= cfg.max_iterations || full_batch_finished || outcome.iterations == 0 {
            break outcome.status;
        }
    };
    Ok((model.with_params(&params)?, history, status))
}

/// Shifts reported iteration numbers when L-BFGS restarts per mega-batch.
struct Offset<'a> {
    inner: &'a dyn Hooks,
    by: usize,
}

impl Hooks for Offset<'_> {
    fn seconds(&self) -> f64 {
        self.inner.seconds()
    }

    fn on_record(&self, stage: &str, record: &super::HistoryRecord) {
        if self.by > 0 && record.iteration == 0 {
            return;
        }
        let shifted = super::HistoryRecord {
            iteration: record.iteration + self.by,
            ..*record
        };
        self.inner.on_record(stage, &shifted);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::Silent;
    use alloc::vec;

    fn plain(f: f64, g: Vec<f64>) -> Result<(LossTerms, Vec<f64>)> {
        Ok((
            LossTerms {
                total: f,
                image: f,
                label: 0.0,
            },
            g,
        ))
    }

    #[test]
    fn quadratic_converges_immediately() {
        let a = [3.0, -1.0, 0.5, 10.0];
        let cfg = LbfgsConfig {
            gradient_tolerance: 1e-12,
            ..LbfgsConfig::default()
        };
        let out = lbfgs_minimize(
            |x| {
                let g: Vec<f64> = x.iter().zip(&a).map(|(xi, ai)| xi - ai).collect();
                plain(0.5 * dot(&g, &g), g)
            },
            vec![0.0; 4],
            &cfg,
            &Silent,
        )
        .unwrap();
        assert!(out.iterations <= 3);
        assert_eq!(out.status, LbfgsStatus::Converged);
        for (xi, ai) in out.x.iter().zip(&a) {
            assert!((xi - ai).abs() <= 1e-10);
        }
    }

    fn rosenbrock(x: &[f64]) -> Result<(LossTerms, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        plain(f, g)
    }

    #[test]
    fn rosenbrock_reaches_the_valley_floor() {
        let cfg = LbfgsConfig {
            gradient_tolerance: 1e-10,
            ..LbfgsConfig::default()
        };
        let out = lbfgs_minimize(rosenbrock, vec![-1.2, 1.0], &cfg, &Silent).unwrap();
        let err = ((out.x[0] - 1.0).powi(2) + (out.x[1] - 1.0).powi(2)).sqrt();
        assert!(err <= 1e-6, "{:?} after {} iterations", out.x, out.iterations);
        assert!(out.iterations <= 200);
        let losses: Vec<f64> = out.history.records.iter().map(|r| r.loss).collect();
        assert!(losses.windows(2).all(|w| w[1] <= w[0]));
        let its: Vec<usize> = out.history.records.iter().map(|r| r.iteration).collect();
        assert!(its.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let err = lbfgs_minimize(
            |_| plain(f64::NAN, vec![0.0]),
            vec![0.0],
            &LbfgsConfig::default(),
            &Silent,
        );
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn impossible_descent_reports_line_search_failure() {
        // The gradient claims descent but the function only goes up.
        let out = lbfgs_minimize(
            |x| plain(x[0].abs() + 1.0 + if x[0] == 0.0 { 0.0 } else { 1.0 }, vec![1.0]),
            vec![0.0],
            &LbfgsConfig::default(),
            &Silent,
        )
        .unwrap();
        assert_eq!(out.status, LbfgsStatus::LineSearchFailed);
        assert_eq!(out.x, vec![0.0]);
    }

    /// Symmetric positive definite 4x4 and its A-conjugate directions.
    #[test]
    fn two_loop_recovers_newton_step_on_quadratic() {
        let a = [
            [4.0, 1.0, 0.5, 0.0],
            [1.0, 3.0, 0.2, 0.1],
            [0.5, 0.2, 2.0, 0.3],
            [0.0, 0.1, 0.3, 1.5],
        ];
        let mul = |v: &[f64]| -> Vec<f64> { (0..4).map(|i| dot(&a[i], v)).collect() };
        // Gram-Schmidt in the A inner product.
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for i in 0..4 {
            let mut d = vec![0.0; 4];
            d[i] = 1.0;
            d[(i + 1) % 4] = 0.3;
            for p in &dirs {
                let c = dot(&d, &mul(p)) / dot(p, &mul(p));
                for k in 0..4 {
                    d[k] -= c * p[k];
                }
            }
            dirs.push(d);
        }
        let pairs: Vec<CurvaturePair> = dirs.iter().map(|s| CurvaturePair::new(s.clone(), mul(s))).collect();
        let g = [0.7, -1.2, 0.4, 2.0];
        let hg = two_loop_direction(&g, pairs.iter());
        // A (H g) should give back g.
        let back = mul(&hg);
        for k in 0..4 {
            assert!((back[k] - g[k]).abs() <= 1e-8, "{back:?}");
        }
    }
}
