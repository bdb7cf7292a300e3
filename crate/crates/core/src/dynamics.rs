//! Time integration of the single-species model and the full predator-prey
//! system, used to validate the steady theory and to cross-check linear
//! verdicts with nonlinear invasion experiments.
//!
//! The scheme is IMEX: the advection-diffusion operator is treated implicitly
//! (one tridiagonal factorization per species, reused every step), the
//! reaction terms explicitly. The explicit part keeps positivity as long as
//! dt times the worst reaction slope stays below one; dt is chosen as
//! min(0.1, 0.5 / slope).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::numeric::linear_fit;
use crate::operator::{assemble_samples, TridiagLu};
use crate::profiles::Profile;

/// Fields are stored at no more than this many sample instants; masses are
/// recorded every step.
const MAX_FIELD_SAMPLES: usize = 200;

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    /// Instants at which full fields were stored.
    pub times: Vec<f64>,
    pub u_fields: Vec<Vec<f64>>,
    /// Present only for two-species runs.
    pub v_fields: Option<Vec<Vec<f64>>>,
    /// Per-step mass records (finer than the field samples).
    pub mass_times: Vec<f64>,
    pub u_mass: Vec<f64>,
    pub v_mass: Option<Vec<f64>>,
    pub dt_used: f64,
}

impl Trajectory {
    pub fn final_u(&self) -> &[f64] {
        self.u_fields.last().expect("at least the initial sample")
    }

    pub fn final_v(&self) -> Option<&[f64]> {
        self.v_fields.as_ref().map(|f| f.last().expect("at least the initial sample").as_slice())
    }
}

fn check_field(t: f64, field: &[f64], cap: f64) -> Result<()> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in field {
        if !v.is_finite() {
            return Err(Error::BlowUp { t, max: v });
        }
        min = min.min(v);
        max = max.max(v);
    }
    if min < -1e-12 {
        return Err(Error::PositivityViolation { t, min });
    }
    if max > cap {
        return Err(Error::BlowUp { t, max });
    }
    Ok(())
}

fn reaction_slope_single(r: &[f64], k: &[f64], u_scale: f64) -> f64 {
    r.iter()
        .zip(k)
        .map(|(ri, ki)| ri * (1.0 + 2.0 * u_scale / ki))
        .fold(0.0_f64, f64::max)
}

/// March the single-species model to time T from `u0`. `dt` overrides the
/// stability-bound default when given.
pub fn integrate_single(
    mu: f64,
    q: f64,
    r: &Profile,
    k: &Profile,
    grid: &Grid,
    u0: &[f64],
    t_final: f64,
    dt: Option<f64>,
) -> Result<Trajectory> {
    let rv = r.evaluate(grid)?;
    let kv = k.evaluate(grid)?;
    let n = grid.n();
    assert_eq!(u0.len(), n);
    if u0.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidParameter {
            module: "dynamics",
            message: "initial state is identically zero".into(),
        });
    }
    let k_max = kv.iter().fold(0.0_f64, |m, &v| m.max(v));
    let u_max0 = u0.iter().fold(0.0_f64, |m, &v| m.max(v));
    let cap = 10.0 * k_max.max(u_max0);
    let slope = reaction_slope_single(&rv, &kv, 1.5 * k_max.max(u_max0));
    let dt = dt.unwrap_or_else(|| (0.5 / slope).min(0.1));
    let steps = (t_final / dt).ceil().max(1.0) as usize;
    let dt = t_final / steps as f64;

    let op = assemble_samples(mu, q, &vec![0.0; n], grid)?;
    // (A - I/dt) u_new = -(u/dt + reaction)
    let lu = TridiagLu::factor(&op, 1.0 / dt);

    let stride = steps.div_ceil(MAX_FIELD_SAMPLES - 1).max(1);
    let mut u = u0.to_vec();
    let mut traj = Trajectory {
        times: vec![0.0],
        u_fields: vec![u.clone()],
        v_fields: None,
        mass_times: vec![0.0],
        u_mass: vec![grid.integrate(&u)],
        v_mass: None,
        dt_used: dt,
    };
    for step in 1..=steps {
        let t = step as f64 * dt;
        let rhs: Vec<f64> = (0..n)
            .map(|i| -(u[i] / dt + rv[i] * u[i] * (1.0 - u[i] / kv[i])))
            .collect();
        u = lu.solve(&rhs);
        check_field(t, &u, cap)?;
        traj.mass_times.push(t);
        traj.u_mass.push(grid.integrate(&u));
        if step % stride == 0 || step == steps {
            traj.times.push(t);
            traj.u_fields.push(u.clone());
        }
    }
    Ok(traj)
}

/// March the two-species system to time T. Reactions use the previous step's
/// fields on both equations. `stop_mass_ratio`, when given, ends the run
/// early once the predator mass leaves [m0/ratio, m0*ratio]; the invasion
/// fit only needs the linear window.
#[allow(clippy::too_many_arguments)]
pub fn integrate_system(
    mu: f64,
    nu: f64,
    q: f64,
    b: f64,
    gamma: f64,
    r: &Profile,
    k: &Profile,
    grid: &Grid,
    u0: &[f64],
    v0: &[f64],
    t_final: f64,
    dt: Option<f64>,
    stop_mass_ratio: Option<f64>,
) -> Result<Trajectory> {
    let rv = r.evaluate(grid)?;
    let kv = k.evaluate(grid)?;
    let n = grid.n();
    assert_eq!(u0.len(), n);
    assert_eq!(v0.len(), n);
    let k_max = kv.iter().fold(0.0_f64, |m, &v| m.max(v));
    let u_max0 = u0.iter().fold(0.0_f64, |m, &v| m.max(v));
    let v_max0 = v0.iter().fold(0.0_f64, |m, &v| m.max(v));
    let u_scale = 1.5 * k_max.max(u_max0);
    let v_scale = v_max0.max(1.0).max(2.0 * gamma);
    let cap = 10.0 * k_max.max(u_max0).max(v_scale);
    let slope_u = reaction_slope_single(&rv, &kv, u_scale) + v_scale;
    let slope_v = b * u_scale + gamma;
    let dt = dt.unwrap_or_else(|| (0.5 / slope_u.max(slope_v)).min(0.1));
    let steps = (t_final / dt).ceil().max(1.0) as usize;
    let dt = t_final / steps as f64;

    let op_u = assemble_samples(mu, q, &vec![0.0; n], grid)?;
    let op_v = assemble_samples(nu, q, &vec![0.0; n], grid)?;
    let lu_u = TridiagLu::factor(&op_u, 1.0 / dt);
    let lu_v = TridiagLu::factor(&op_v, 1.0 / dt);

    let stride = steps.div_ceil(MAX_FIELD_SAMPLES - 1).max(1);
    let mut u = u0.to_vec();
    let mut v = v0.to_vec();
    let m0 = grid.integrate(&v);
    let mut traj = Trajectory {
        times: vec![0.0],
        u_fields: vec![u.clone()],
        v_fields: Some(vec![v.clone()]),
        mass_times: vec![0.0],
        u_mass: vec![grid.integrate(&u)],
        v_mass: Some(vec![m0]),
        dt_used: dt,
    };
    for step in 1..=steps {
        let t = step as f64 * dt;
        let rhs_u: Vec<f64> = (0..n)
            .map(|i| -(u[i] / dt + u[i] * (rv[i] * (1.0 - u[i] / kv[i]) - v[i])))
            .collect();
        let rhs_v: Vec<f64> = (0..n)
            .map(|i| -(v[i] / dt + v[i] * (b * u[i] - gamma)))
            .collect();
        u = lu_u.solve(&rhs_u);
        v = lu_v.solve(&rhs_v);
        check_field(t, &u, cap)?;
        check_field(t, &v, cap)?;
        traj.mass_times.push(t);
        traj.u_mass.push(grid.integrate(&u));
        let mv = grid.integrate(&v);
        traj.v_mass.as_mut().unwrap().push(mv);
        let store = step % stride == 0 || step == steps;
        if store {
            traj.times.push(t);
            traj.u_fields.push(u.clone());
            traj.v_fields.as_mut().unwrap().push(v.clone());
        }
        if let Some(ratio) = stop_mass_ratio {
            if mv > m0 * ratio || mv < m0 / ratio {
                if !store {
                    traj.times.push(t);
                    traj.u_fields.push(u.clone());
                    traj.v_fields.as_mut().unwrap().push(v.clone());
                }
                break;
            }
        }
    }
    Ok(traj)
}

/// Fitted exponential growth rate of a rare predator introduced at the
/// prey-only state.
#[derive(Debug, Clone, Serialize)]
pub struct InvasionRate {
    pub rate: f64,
    /// Time window the fit used.
    pub window: (f64, f64),
    pub samples: usize,
    pub eps_used: f64,
}

/// Introduce a spatially constant predator density `eps` on top of the prey
/// state theta(mu, q) and fit log predator mass against time over the window
/// where the mass stays within a factor 100 of its initial value. If the
/// window holds too few steps, eps is reduced once and the run repeated.
#[allow(clippy::too_many_arguments)]
pub fn invasion_test(
    mu: f64,
    nu: f64,
    q: f64,
    b: f64,
    gamma: f64,
    r: &Profile,
    k: &Profile,
    grid: &Grid,
    eps: f64,
    t_final: f64,
    dt: Option<f64>,
) -> Result<InvasionRate> {
    if !(eps > 0.0 && eps <= 1e-4) {
        return Err(Error::InvalidParameter {
            module: "dynamics",
            message: format!("eps must lie in (0, 1e-4], got {eps}"),
        });
    }
    let theta = crate::steady::solve_theta(mu, q, r, k, grid)?;
    for attempt_eps in [eps, eps / 10.0] {
        let v0 = vec![attempt_eps; grid.n()];
        let traj = integrate_system(
            mu,
            nu,
            q,
            b,
            gamma,
            r,
            k,
            grid,
            &theta.field,
            &v0,
            t_final,
            dt,
            Some(150.0),
        )?;
        let masses = traj.v_mass.as_ref().expect("system run records v mass");
        let m0 = masses[0];
        let mut ts = Vec::new();
        let mut logs = Vec::new();
        for (t, &m) in traj.mass_times.iter().zip(masses) {
            if m >= m0 / 100.0 && m <= m0 * 100.0 && m > 0.0 {
                ts.push(*t);
                logs.push(m.ln());
            }
        }
        // drop the leading transient before the dominant mode takes over
        let skip = ts.len() / 5;
        let ts = &ts[skip..];
        let logs = &logs[skip..];
        if ts.len() < 8 {
            continue;
        }
        let (rate, _) = linear_fit(ts, logs);
        return Ok(InvasionRate {
            rate,
            window: (ts[0], ts[ts.len() - 1]),
            samples: ts.len(),
            eps_used: attempt_eps,
        });
    }
    Err(Error::LinearWindowTooShort)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::max_abs_diff;
    use crate::profiles::p1;
    use crate::steady::{find_qstar, solve_theta};

    fn grid() -> Grid {
        Grid::new(128).unwrap()
    }

    #[test]
    fn settles_on_steady_state_below_washout() {
        let g = grid();
        let (r, k) = p1();
        let qstar = find_qstar(1.0, &r, &g).unwrap().qstar;
        let q = 0.4 * qstar;
        let theta = solve_theta(1.0, q, &r, &k, &g).unwrap();
        let u0 = vec![0.5; g.n()];
        let traj = integrate_single(1.0, q, &r, &k, &g, &u0, 200.0, None).unwrap();
        assert!(max_abs_diff(traj.final_u(), &theta.field) <= 1e-3);
    }

    #[test]
    fn washes_out_above_threshold() {
        let g = grid();
        let (r, k) = p1();
        let qstar = find_qstar(1.0, &r, &g).unwrap().qstar;
        let u0 = vec![1.0; g.n()];
        let traj = integrate_single(1.0, 1.3 * qstar, &r, &k, &g, &u0, 200.0, None).unwrap();
        let max = traj.final_u().iter().fold(0.0_f64, |m, &v| m.max(v));
        assert!(max <= 1e-3, "final max {max}");
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let g = grid();
        let (r, k) = p1();
        let theta = solve_theta(1.0, 0.3, &r, &k, &g).unwrap();
        let traj = integrate_single(1.0, 0.3, &r, &k, &g, &theta.field, 200.0, None).unwrap();
        assert!(max_abs_diff(traj.final_u(), &theta.field) <= 1e-6);
    }

    #[test]
    fn fixed_point_is_dt_independent() {
        // the IMEX fixed point solves the steady equation exactly, so halving
        // dt must not move the settled state
        let g = grid();
        let (r, k) = p1();
        let u0 = vec![1.0; g.n()];
        let a = integrate_single(1.0, 0.3, &r, &k, &g, &u0, 200.0, Some(0.05)).unwrap();
        let b = integrate_single(1.0, 0.3, &r, &k, &g, &u0, 200.0, Some(0.025)).unwrap();
        assert!(max_abs_diff(a.final_u(), b.final_u()) <= 1e-6);
    }

    #[test]
    fn flux_identity_at_late_time() {
        let g = grid();
        let (r, k) = p1();
        let rv = r.evaluate(&g).unwrap();
        let kv = k.evaluate(&g).unwrap();
        let u0 = vec![1.0; g.n()];
        let q = 0.3;
        let traj = integrate_single(1.0, q, &r, &k, &g, &u0, 200.0, None).unwrap();
        let u = traj.final_u();
        let reaction: Vec<f64> =
            (0..g.n()).map(|i| rv[i] * u[i] * (1.0 - u[i] / kv[i])).collect();
        let lhs = q * u[g.n() - 1];
        let rhs = g.integrate(&reaction);
        assert!((lhs - rhs).abs() <= 1e-6, "{lhs} vs {rhs}");
    }

    #[test]
    fn zero_initial_state_rejected() {
        let g = grid();
        let (r, k) = p1();
        assert!(integrate_single(1.0, 0.0, &r, &k, &g, &vec![0.0; g.n()], 1.0, None).is_err());
    }

    #[test]
    fn invasion_rate_matches_linearization() {
        let g = grid();
        let (r, k) = p1();
        let (mu, nu, q, b, gamma) = (1.0, 1.0, 0.1, 1.0, 1.0);
        let theta = solve_theta(mu, q, &r, &k, &g).unwrap();
        let m: Vec<f64> = theta.field.iter().map(|&t| b * t - gamma).collect();
        let sigma = crate::eigen::sigma1_samples(nu, q, &m, &g).unwrap();
        let inv = invasion_test(mu, nu, q, b, gamma, &r, &k, &g, 1e-5, 60.0, None).unwrap();
        assert!(
            (inv.rate - sigma).abs() <= 0.1 * sigma.abs(),
            "fitted {} vs sigma {}",
            inv.rate,
            sigma
        );
        // halving eps barely moves the fitted rate (linear-regime check)
        let inv2 = invasion_test(mu, nu, q, b, gamma, &r, &k, &g, 5e-6, 60.0, None).unwrap();
        assert!((inv2.rate - inv.rate).abs() <= 0.02 * inv.rate.abs());
    }
}
