//! Nonlinear steady states of the single-species logistic model: the closed
//! habitat state eta(mu) at zero flow, the advective state theta(mu, q), and
//! the washout flow speed q*(mu) above which no positive state exists.

use serde::Serialize;

use crate::eigen::sigma1;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::numeric::{bisect, max_abs, max_abs_diff};
use crate::operator::{assemble_samples, DiscreteOperator, TridiagLu};
use crate::profiles::Profile;

const NEWTON_MAX_ITERS: usize = 100;
/// Continuation in q uses steps no larger than this fraction of q*.
const CONTINUATION_FRACTION: f64 = 1.0 / 40.0;

/// A converged positive steady state on a grid.
#[derive(Debug, Clone, Serialize)]
pub struct SteadyState {
    pub field: Vec<f64>,
    pub mu: f64,
    pub q: f64,
    /// Infinity norm of the discrete steady residual at the solution.
    pub residual: f64,
    pub newton_iters: usize,
    pub grid: Grid,
}

impl SteadyState {
    pub fn max(&self) -> f64 {
        self.field.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn min(&self) -> f64 {
        self.field.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.field)
    }

    /// The residual bound a converged state must satisfy: the nominal
    /// 1e-10 * max(field), with a floor at the f64 rounding level of the
    /// operator application (relevant for very large mu / fine grids).
    pub fn residual_bound(&self, operator_norm: f64) -> f64 {
        let scale = self.max();
        (1e-10 * scale).max(64.0 * f64::EPSILON * operator_norm * scale)
    }
}

/// Critical advection: sigma1(mu, q, r) changes sign at q*.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WashoutThreshold {
    pub mu: f64,
    pub qstar: f64,
    pub bracket_width: f64,
}

/// Right-hand side of the discrete steady equation A u + r u (1 - u/K).
fn steady_residual(op: &DiscreteOperator, r: &[f64], k: &[f64], u: &[f64]) -> Vec<f64> {
    let mut out = op.apply(u);
    for i in 0..u.len() {
        out[i] += r[i] * u[i] * (1.0 - u[i] / k[i]);
    }
    out
}

/// Damped Newton on the steady equation, with a short IMEX pre-smoothing
/// fallback when the residual stalls.
fn newton_solve(
    op: &DiscreteOperator,
    r: &[f64],
    k: &[f64],
    start: &[f64],
) -> Result<(Vec<f64>, f64, usize)> {
    let n = op.n();
    let op_norm = op.norm_inf();
    let mut u = start.to_vec();
    let mut f = steady_residual(op, r, k, &u);
    let mut f_norm = max_abs(&f);
    let mut stall: usize = 0;
    let mut stall_ref = f_norm;
    let mut smoothed = false;

    for iter in 0..NEWTON_MAX_ITERS {
        let scale = max_abs(&u).max(1e-12);
        let target = (1e-13 * scale).max(4.0 * f64::EPSILON * op_norm * scale);
        if f_norm <= target {
            return Ok((u, f_norm, iter));
        }

        // residual failed to halve over 5 iterations: pre-smooth by a few
        // implicit-linear / explicit-reaction time steps and restart Newton
        if stall >= 5 && !smoothed {
            smoothed = true;
            stall = 0;
            let slope = r
                .iter()
                .zip(k)
                .zip(&u)
                .map(|((ri, ki), ui)| (ri * (1.0 - 2.0 * ui / ki)).abs())
                .fold(0.0_f64, f64::max)
                .max(1e-6);
            let dt = 0.5 / slope;
            let lu = TridiagLu::factor(op, 1.0 / dt);
            for _ in 0..20 {
                let rhs: Vec<f64> = (0..n)
                    .map(|i| -(u[i] / dt + r[i] * u[i] * (1.0 - u[i] / k[i])))
                    .collect();
                // (A - I/dt) u_new = -(u/dt + reaction)
                u = lu.solve(&rhs);
            }
            f = steady_residual(op, r, k, &u);
            f_norm = max_abs(&f);
            stall_ref = f_norm;
            continue;
        }

        let jac_diag: Vec<f64> = (0..n).map(|i| r[i] * (1.0 - 2.0 * u[i] / k[i])).collect();
        let jac = op.with_diag_added(&jac_diag);
        let lu = TridiagLu::factor(&jac, 0.0);
        let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
        let delta = lu.solve(&neg_f);

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
            let trial_f = steady_residual(op, r, k, &trial);
            let trial_norm = max_abs(&trial_f);
            if trial_norm < f_norm || trial_norm <= target {
                u = trial;
                f = trial_f;
                f_norm = trial_norm;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDiverged { iters: iter, residual: f_norm });
        }
        if f_norm > 0.5 * stall_ref {
            stall += 1;
        } else {
            stall = 0;
            stall_ref = f_norm;
        }
    }
    // allow a stalled-but-tiny residual through
    let scale = max_abs(&u).max(1e-12);
    if f_norm <= (1e-10 * scale).max(64.0 * f64::EPSILON * op_norm * scale) {
        return Ok((u, f_norm, NEWTON_MAX_ITERS));
    }
    Err(Error::NewtonDiverged { iters: NEWTON_MAX_ITERS, residual: f_norm })
}

fn finish_state(
    mu: f64,
    q: f64,
    grid: &Grid,
    field: Vec<f64>,
    residual: f64,
    newton_iters: usize,
) -> Result<SteadyState> {
    let min = field.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if !(min > 0.0) {
        return Err(Error::SignChangingSolution { min });
    }
    Ok(SteadyState { field, mu, q, residual, newton_iters, grid: grid.clone() })
}

/// The closed-habitat steady state: zero flow, zero-flux ends.
///
/// Newton starts from u = K; a second solve from the constant min K guards
/// against silent convergence to a different branch.
pub fn solve_eta(mu: f64, r: &Profile, k: &Profile, grid: &Grid) -> Result<SteadyState> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter {
            module: "steady",
            message: format!("diffusion rate must be positive, got {mu}"),
        });
    }
    let rv = r.evaluate(grid)?;
    let kv = k.evaluate(grid)?;
    let op = assemble_samples(mu, 0.0, &vec![0.0; grid.n()], grid)?;
    let (u, residual, iters) = newton_solve(&op, &rv, &kv, &kv)?;

    let k_min = kv.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let alt_start = vec![k_min; grid.n()];
    let (u_alt, _, _) = newton_solve(&op, &rv, &kv, &alt_start)?;
    let gap = max_abs_diff(&u, &u_alt);
    if gap > 1e-6 * max_abs(&u) {
        return Err(Error::InvalidParameter {
            module: "steady",
            message: format!("two Newton starts reached different states (gap {gap:.3e})"),
        });
    }
    finish_state(mu, 0.0, grid, u, residual, iters)
}

/// The advective steady state theta(mu, q), solved by continuation in q from
/// the closed-habitat state. Requires q < q*(mu); `qstar` may be passed in
/// when already known, otherwise it is located first so the continuation step
/// respects the q*/40 bound.
pub fn solve_theta_with_qstar(
    mu: f64,
    q: f64,
    r: &Profile,
    k: &Profile,
    grid: &Grid,
    qstar: Option<f64>,
) -> Result<SteadyState> {
    if !(q >= 0.0) {
        return Err(Error::InvalidParameter {
            module: "steady",
            message: format!("advection rate must be non-negative, got {q}"),
        });
    }
    if q == 0.0 {
        return solve_eta(mu, r, k, grid);
    }
    let qstar = match qstar {
        Some(v) => v,
        None => find_qstar(mu, r, grid)?.qstar,
    };
    if q >= qstar {
        return Err(Error::Washout);
    }
    let rv = r.evaluate(grid)?;
    let kv = k.evaluate(grid)?;
    let mut path = ThetaPath::new(mu, rv, kv, grid.clone(), qstar)?;
    path.advance_to(q)
}

/// Convenience wrapper that locates q* itself.
pub fn solve_theta(mu: f64, q: f64, r: &Profile, k: &Profile, grid: &Grid) -> Result<SteadyState> {
    solve_theta_with_qstar(mu, q, r, k, grid, None)
}

/// Continuation state for walking theta along increasing q, reusing the last
/// solution as the Newton start. Sweeps keep one of these per mu column.
pub struct ThetaPath {
    mu: f64,
    r: Vec<f64>,
    k: Vec<f64>,
    grid: Grid,
    qstar: f64,
    q: f64,
    theta: Vec<f64>,
    last_residual: f64,
    last_iters: usize,
}

impl ThetaPath {
    pub fn new(mu: f64, r: Vec<f64>, k: Vec<f64>, grid: Grid, qstar: f64) -> Result<Self> {
        let op = assemble_samples(mu, 0.0, &vec![0.0; grid.n()], &grid)?;
        let (theta, residual, iters) = newton_solve(&op, &r, &k, &k.clone())?;
        Ok(Self {
            mu,
            r,
            k,
            grid,
            qstar,
            q: 0.0,
            theta,
            last_residual: residual,
            last_iters: iters,
        })
    }

    /// Resume continuation from a previously converged state at `q`.
    pub fn resume(
        mu: f64,
        r: Vec<f64>,
        k: Vec<f64>,
        grid: Grid,
        qstar: f64,
        q: f64,
        theta: Vec<f64>,
    ) -> Self {
        Self { mu, r, k, grid, qstar, q, theta, last_residual: 0.0, last_iters: 0 }
    }

    pub fn qstar(&self) -> f64 {
        self.qstar
    }

    /// Advance to a target q >= current q and return the state there.
    pub fn advance_to(&mut self, q_target: f64) -> Result<SteadyState> {
        if q_target >= self.qstar {
            return Err(Error::Washout);
        }
        if q_target < self.q {
            // restart from zero flow rather than walking backwards
            let op = assemble_samples(self.mu, 0.0, &vec![0.0; self.grid.n()], &self.grid)?;
            let (theta, residual, iters) = newton_solve(&op, &self.r, &self.k, &self.k.clone())?;
            self.q = 0.0;
            self.theta = theta;
            self.last_residual = residual;
            self.last_iters = iters;
        }
        let max_step = self.qstar * CONTINUATION_FRACTION;
        let mut step = max_step;
        while self.q < q_target {
            let next = (self.q + step).min(q_target);
            let op = assemble_samples(self.mu, next, &vec![0.0; self.grid.n()], &self.grid)?;
            match newton_solve(&op, &self.r, &self.k, &self.theta) {
                Ok((theta, residual, iters)) => {
                    self.q = next;
                    self.theta = theta;
                    self.last_residual = residual;
                    self.last_iters = iters;
                    step = (step * 1.5).min(max_step);
                }
                Err(_) if step > 1e-12 * self.qstar => {
                    step *= 0.5; // theta flattens toward washout; shrink
                }
                Err(e) => return Err(e),
            }
        }
        finish_state(
            self.mu,
            self.q,
            &self.grid,
            self.theta.clone(),
            self.last_residual,
            self.last_iters,
        )
    }
}

/// Locate the washout threshold by bisection on q -> sigma1(mu, q, r), using
/// its strict monotone decrease. The upper bracket doubles from 1 until the
/// growth rate goes negative.
pub fn find_qstar(mu: f64, r: &Profile, grid: &Grid) -> Result<WashoutThreshold> {
    let s0 = sigma1(mu, 0.0, r, grid)?;
    if s0 <= 0.0 {
        return Err(Error::NoGrowthAtRest { sigma1: s0 });
    }
    let mut q_hi = 1.0;
    loop {
        let s = sigma1(mu, q_hi, r, grid)?;
        if s < 0.0 {
            break;
        }
        q_hi *= 2.0;
        if q_hi > 1e9 {
            return Err(Error::InvalidParameter {
                module: "steady",
                message: "washout not reached below q = 1e9".into(),
            });
        }
    }
    let mut eval_err = None;
    let (qstar, bracket) = bisect(
        |q| match sigma1(mu, q, r, grid) {
            Ok(v) => v,
            Err(e) => {
                eval_err = Some(e);
                f64::NAN
            }
        },
        0.0,
        q_hi,
        s0,
        1e-10,
        80,
    );
    if let Some(e) = eval_err {
        return Err(e);
    }
    Ok(WashoutThreshold { mu, qstar, bracket_width: bracket.1 - bracket.0 })
}

/// |q theta(1) - int r theta (1 - theta/K)|: the discrete flux identity,
/// exact up to the Newton residual because the scheme is in flux form.
pub fn flux_identity_residual(state: &SteadyState, r: &[f64], k: &[f64]) -> f64 {
    let n = state.field.len();
    let reaction: Vec<f64> = (0..n)
        .map(|i| r[i] * state.field[i] * (1.0 - state.field[i] / k[i]))
        .collect();
    (state.q * state.field[n - 1] - state.grid.integrate(&reaction)).abs()
}
