//! Principal eigen-pairs of the discrete operator, the weighted Rayleigh
//! quotient, and the indefinite-weight eigenvalue used by the zero-flow
//! invasion criterion.

mod lambda;

pub use lambda::{lambda_star, LambdaStar};

use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::numeric::{boundary_values, gradient, max_abs, max_abs_diff, trapezoid_extended};
use crate::operator::{assemble, DiscreteOperator, TridiagLu};
use crate::profiles::Profile;

/// Relative residual bound every accepted eigen-pair satisfies:
/// `||A phi - sigma phi||_inf <= RESIDUAL_TOL * (|sigma| + ||A||_inf)`.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Eigenvector increment tolerance for inverse iteration.
pub const INCREMENT_TOL: f64 = 1e-12;

const MAX_ITERS: usize = 500;

/// Every Nth principal eigensolve on a dense-solvable grid is audited against
/// an independent dense eigensolve.
const CROSS_CHECK_EVERY: u64 = 50;
const CROSS_CHECK_MAX_N: usize = 256;
const CROSS_CHECK_REL_TOL: f64 = 1e-8;

static EIGEN_CALLS: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EigenMethod {
    Dense,
    InverseIteration,
}

/// Principal eigenvalue with its positive eigenfunction (max normalized to 1).
#[derive(Debug, Clone, Serialize)]
pub struct EigenPair {
    pub sigma1: f64,
    pub phi1: Vec<f64>,
    pub residual: f64,
    pub method: EigenMethod,
}

fn rayleigh_discrete(op: &DiscreteOperator, v: &[f64]) -> f64 {
    let av = op.apply(v);
    let num: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
    let den: f64 = v.iter().map(|a| a * a).sum();
    num / den
}

fn residual_inf(op: &DiscreteOperator, v: &[f64], sigma: f64) -> f64 {
    let av = op.apply(v);
    av.iter()
        .zip(v)
        .fold(0.0_f64, |m, (a, x)| m.max((a - sigma * x).abs()))
}

struct IterationOutcome {
    sigma: f64,
    v: Vec<f64>,
    residual: f64,
}

/// Shifted inverse iteration. The first `warmup` steps hold the shift at the
/// Gershgorin bound + 1, which biases the iterate toward the rightmost part
/// of the spectrum; after that the shift tracks the Rayleigh quotient. The
/// fixed Gershgorin shift alone contracts like 1 - O(gap/||A||), far too slow
/// on fine grids, hence the Rayleigh acceleration.
fn inverse_iteration(
    op: &DiscreteOperator,
    warmup: usize,
    tol_scale: f64,
) -> Option<IterationOutcome> {
    let n = op.n();
    let tau0 = op.gershgorin_upper() + 1.0;
    let warm_lu = TridiagLu::factor(op, tau0);
    let mut v = vec![1.0; n];
    let mut sigma = rayleigh_discrete(op, &v);
    for k in 0..MAX_ITERS {
        let w = if k < warmup {
            warm_lu.solve(&v)
        } else {
            TridiagLu::factor(op, sigma).solve(&v)
        };
        // normalize by the (signed) entry of largest magnitude so a positive
        // eigenfunction keeps its orientation
        let mut idx = 0;
        for (i, x) in w.iter().enumerate() {
            if x.abs() > w[idx].abs() {
                idx = i;
            }
        }
        let m = w[idx];
        if m == 0.0 || !m.is_finite() {
            return None;
        }
        let w: Vec<f64> = w.iter().map(|x| x / m).collect();
        let sigma_new = rayleigh_discrete(op, &w);
        let incr = max_abs_diff(&w, &v);
        v = w;
        let drift = (sigma_new - sigma).abs();
        sigma = sigma_new;
        if !sigma.is_finite() {
            return None;
        }
        if incr <= INCREMENT_TOL && drift <= INCREMENT_TOL * (1.0 + sigma.abs()) {
            let residual = residual_inf(op, &v, sigma);
            if residual <= RESIDUAL_TOL * tol_scale {
                return Some(IterationOutcome { sigma, v, residual });
            }
        }
    }
    // report whatever we have; the caller judges the residual
    let residual = residual_inf(op, &v, sigma);
    Some(IterationOutcome { sigma, v, residual })
}

/// Largest eigenvalue of the diagonally-symmetrized operator by Sturm-count
/// bisection. Only valid when `op.symmetrizable()`.
fn sturm_largest(op: &DiscreteOperator) -> f64 {
    let n = op.n();
    let (sub, diag, sup) = op.bands();
    let off2: Vec<f64> = (0..n - 1).map(|i| sup[i] * sub[i + 1]).collect();
    // count of eigenvalues strictly below lambda via the LDL^T pivot signs
    let count_below = |lambda: f64| -> usize {
        let mut count = 0;
        let mut d = diag[0] - lambda;
        if d == 0.0 {
            d = -f64::MIN_POSITIVE;
        }
        if d < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let mut next = diag[i] - lambda - off2[i - 1] / d;
            if next == 0.0 {
                next = -f64::MIN_POSITIVE;
            }
            if next < 0.0 {
                count += 1;
            }
            d = next;
        }
        count
    };
    let mut hi = op.gershgorin_upper() + 1.0;
    let mut lo = -(op.norm_inf() + 1.0);
    for _ in 0..200 {
        if hi - lo <= 1e-14 * (hi.abs() + lo.abs()).max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if count_below(mid) >= n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Principal eigenvalue through the exact diagonal symmetrization: Sturm
/// bisection for the value, then an inverse-iteration eigenvector of the
/// symmetric similar matrix to audit positivity and the residual. The
/// symmetrized eigenvector is the similarity-weighted one, so positivity
/// transfers to the original eigenfunction even when that eigenfunction's
/// dynamic range (~ e^{q/2d}) cannot be represented in f64.
fn sturm_value_checked(op: &DiscreteOperator) -> Result<f64> {
    let n = op.n();
    let (sub, diag, sup) = op.bands();
    let off: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { (sup[i - 1] * sub[i]).sqrt() }).collect();
    let sym_sub = off.clone();
    let sym_sup: Vec<f64> = (0..n).map(|i| if i + 1 < n { off[i + 1] } else { 0.0 }).collect();
    let mut sigma = sturm_largest(op);
    let scale = op.norm_inf();

    let mut psi = vec![1.0; n];
    for _ in 0..6 {
        let lu = TridiagLu::factor_bands(&sym_sub, diag, &sym_sup, sigma + 1e-12 * (sigma.abs() + scale));
        psi = lu.solve(&psi);
        let mut idx = 0;
        for (i, x) in psi.iter().enumerate() {
            if x.abs() > psi[idx].abs() {
                idx = i;
            }
        }
        let m = psi[idx];
        if m == 0.0 || !m.is_finite() {
            return Err(Error::EigenNoConvergence { iters: MAX_ITERS, residual: f64::INFINITY });
        }
        for x in &mut psi {
            *x /= m;
        }
        // Rayleigh polish on the symmetric matrix
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let mut t = diag[i] * psi[i];
            if i > 0 {
                t += sym_sub[i] * psi[i - 1];
            }
            if i + 1 < n {
                t += sym_sup[i] * psi[i + 1];
            }
            num += psi[i] * t;
            den += psi[i] * psi[i];
        }
        sigma = num / den;
    }
    let mut residual = 0.0_f64;
    for i in 0..n {
        let mut t = (diag[i] - sigma) * psi[i];
        if i > 0 {
            t += sym_sub[i] * psi[i - 1];
        }
        if i + 1 < n {
            t += sym_sup[i] * psi[i + 1];
        }
        residual = residual.max(t.abs());
    }
    if !(psi.iter().all(|&x| x > 0.0)) || residual > RESIDUAL_TOL * (sigma.abs() + scale) {
        return Err(Error::EigenNoConvergence { iters: MAX_ITERS, residual });
    }
    Ok(sigma)
}

/// Rough log10 of the principal eigenfunction's dynamic range; above ~290 the
/// normalized eigenfunction underflows somewhere on [0, 1].
fn eigenfunction_log10_range(op: &DiscreteOperator) -> f64 {
    op.q() / (2.0 * op.d()) * std::f64::consts::LOG10_E
}

/// Principal eigenvalue only. Equivalent to `principal_eigen(..).sigma1`
/// except in the strongly advection-dominated regime, where the eigenfunction
/// is not representable and the value is produced (and audited) through the
/// symmetrized form instead.
pub fn principal_value(op: &DiscreteOperator) -> Result<f64> {
    if eigenfunction_log10_range(op) > 250.0 && op.symmetrizable() {
        return sturm_value_checked(op);
    }
    match principal_eigen(op) {
        Ok(pair) => Ok(pair.sigma1),
        Err(Error::EigenNoConvergence { .. }) if op.symmetrizable() => sturm_value_checked(op),
        Err(e) => Err(e),
    }
}

/// Principal eigen-pair of the operator: the eigenvalue of maximal real part
/// together with its strictly positive eigenfunction, normalized to max 1.
///
/// Computed by shifted inverse iteration anchored at the Gershgorin bound,
/// with a symmetrized Sturm-bisection fallback if the iteration stalls or
/// loses positivity. Every call audits the residual; a sampled subset is also
/// cross-checked against an independent dense eigensolve.
pub fn principal_eigen(op: &DiscreteOperator) -> Result<EigenPair> {
    let tol_scale = op.norm_inf();
    let mut last_residual = f64::INFINITY;
    let mut accepted: Option<IterationOutcome> = None;
    for warmup in [4usize, 24, 96] {
        if let Some(out) = inverse_iteration(op, warmup, tol_scale) {
            last_residual = out.residual;
            let positive = out.v.iter().all(|&x| x > 0.0);
            if positive && out.residual <= RESIDUAL_TOL * (out.sigma.abs() + tol_scale) {
                accepted = Some(out);
                break;
            }
        }
    }
    let mut outcome = match accepted {
        Some(o) => o,
        None if op.symmetrizable() => {
            // polish from the Sturm eigenvalue: one factorization slightly
            // above the root keeps the iteration positivity-preserving
            let sigma = sturm_largest(op);
            let lu = TridiagLu::factor(op, sigma + 1e-10 * (1.0 + sigma.abs()));
            let mut v = vec![1.0; op.n()];
            for _ in 0..4 {
                v = lu.solve(&v);
                let m = max_abs(&v);
                if m == 0.0 || !m.is_finite() {
                    return Err(Error::EigenNoConvergence {
                        iters: MAX_ITERS,
                        residual: last_residual,
                    });
                }
                for x in &mut v {
                    *x /= m;
                }
            }
            let sigma = rayleigh_discrete(op, &v);
            let residual = residual_inf(op, &v, sigma);
            IterationOutcome { sigma, v, residual }
        }
        None => {
            return Err(Error::EigenNoConvergence {
                iters: MAX_ITERS,
                residual: last_residual,
            })
        }
    };

    // orient and normalize to max = 1 exactly
    let max = outcome.v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let min = outcome.v.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    if !(min > 0.0) {
        return Err(Error::EigenNoConvergence {
            iters: MAX_ITERS,
            residual: outcome.residual,
        });
    }
    for x in &mut outcome.v {
        *x /= max;
    }
    let residual = residual_inf(op, &outcome.v, outcome.sigma);
    if residual > RESIDUAL_TOL * (outcome.sigma.abs() + tol_scale) {
        return Err(Error::EigenNoConvergence { iters: MAX_ITERS, residual });
    }

    let pair = EigenPair {
        sigma1: outcome.sigma,
        phi1: outcome.v,
        residual,
        method: EigenMethod::InverseIteration,
    };

    let calls = EIGEN_CALLS.fetch_add(1, Ordering::Relaxed);
    if op.n() <= CROSS_CHECK_MAX_N && calls % CROSS_CHECK_EVERY == 0 {
        let reference = dense_sigma1(op);
        let denom = pair.sigma1.abs().max(reference.abs()).max(1.0);
        let rel = (pair.sigma1 - reference).abs() / denom;
        // both routes sit on an eps*||A|| rounding floor, so the tripwire
        // tolerance must scale with the operator norm
        let tol = CROSS_CHECK_REL_TOL.max(256.0 * f64::EPSILON * tol_scale / denom);
        if rel > tol {
            return Err(Error::CrossCheck {
                primary: pair.sigma1,
                reference,
                relative: rel,
            });
        }
    }
    Ok(pair)
}

/// Independent dense route to the principal eigenvalue: Schur eigenvalues of
/// the dense matrix, rightmost one polished by dense-LU inverse iteration.
/// Shares no linear algebra with `principal_eigen`.
pub fn dense_sigma1(op: &DiscreteOperator) -> f64 {
    let n = op.n();
    let dense = op.to_dense();
    let eigs = dense.complex_eigenvalues();
    let mut best = f64::NEG_INFINITY;
    for e in eigs.iter() {
        if e.re > best {
            best = e.re;
        }
    }
    // polish with a couple of dense inverse-iteration sweeps
    let scale = op.norm_inf().max(1.0);
    let mut shift = best + 1e-9 * scale;
    let mut v = nalgebra::DVector::from_element(n, 1.0);
    let mut sigma = best;
    for _ in 0..4 {
        let mut m = dense.clone();
        for i in 0..n {
            m[(i, i)] -= shift;
        }
        let Some(w) = m.lu().solve(&v) else {
            shift += 1e-9 * scale;
            continue;
        };
        let dominant = w.iter().fold(0.0_f64, |m, &x| if x.abs() > m.abs() { x } else { m });
        if dominant == 0.0 || !dominant.is_finite() {
            break;
        }
        v = w / dominant;
        let av = &dense * &v;
        sigma = v.dot(&av) / v.dot(&v);
        shift = sigma + 1e-12 * scale;
    }
    sigma
}

/// The weighted variational quotient
/// `[int e^{-qx/d} (-d w_x^2 + h w^2) dx - q w(0)^2] / int e^{-qx/d} w^2 dx`
/// evaluated by trapezoidal quadrature with one-sided boundary gradients.
/// Maximized (up to quadrature error) by the principal eigenfunction.
pub fn rayleigh_quotient(omega: &[f64], op: &DiscreteOperator) -> Result<f64> {
    let grid = op.grid();
    let n = grid.n();
    assert_eq!(omega.len(), n);
    if max_abs(omega) == 0.0 {
        return Err(Error::InvalidParameter {
            module: "eigensolver",
            message: "trial function is identically zero".into(),
        });
    }
    let (d, q, h) = (op.d(), op.q(), op.h());
    let domega = gradient(omega, grid.dx());
    let weight = |x: f64| (-q * x / d).exp();
    let (w0, _) = boundary_values(omega);

    let num_samples: Vec<f64> = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &x)| weight(x) * (-d * domega[i] * domega[i] + h[i] * omega[i] * omega[i]))
        .collect();
    let den_samples: Vec<f64> = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &x)| weight(x) * omega[i] * omega[i])
        .collect();
    let num = trapezoid_extended(&num_samples, grid) - q * w0 * w0;
    let den = trapezoid_extended(&den_samples, grid);
    if den <= 0.0 || !den.is_finite() {
        return Err(Error::InvalidParameter {
            module: "eigensolver",
            message: format!("degenerate weighted norm {den}"),
        });
    }
    Ok(num / den)
}

/// Principal eigenvalue of `L[d,q,h]` for a profile potential.
pub fn sigma1(d: f64, q: f64, h: &Profile, grid: &Grid) -> Result<f64> {
    principal_value(&assemble(d, q, h, grid)?)
}

/// Principal eigenvalue with the potential given as grid samples.
pub fn sigma1_samples(d: f64, q: f64, h: &[f64], grid: &Grid) -> Result<f64> {
    principal_value(&crate::operator::assemble_samples(d, q, h, grid)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::assemble_samples;
    use crate::profiles::{p2, parse_profile};

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    #[test]
    fn constant_potential_neumann() {
        let g = grid(64);
        let op = assemble_samples(1.0, 0.0, &vec![2.0; 64], &g).unwrap();
        let pair = principal_eigen(&op).unwrap();
        assert!((pair.sigma1 - 2.0).abs() < 1e-10);
        assert!(pair.phi1.iter().all(|&v| (v - 1.0).abs() < 1e-10));
        assert_eq!(pair.phi1.iter().cloned().fold(f64::MIN, f64::max), 1.0);
    }

    #[test]
    fn large_diffusion_limit() {
        // sigma1 -> int h - q as d -> infinity
        let g = grid(256);
        let h = parse_profile("1 + x").unwrap();
        let s = sigma1(1e4, 0.5, &h, &g).unwrap();
        assert!((s - 1.0).abs() < 1e-2, "sigma1 = {s}");
    }

    #[test]
    fn affine_potential_bounds_and_monotone_eigenfunction() {
        // dense oracle at n = 512 plus comparison bounds against constants:
        // potential between 1 and 2 squeezes sigma1 into (1, 2)
        let g = grid(512);
        let h = parse_profile("1 + x").unwrap();
        let op = assemble(1.0, 0.0, &h, &g).unwrap();
        let pair = principal_eigen(&op).unwrap();
        assert!(pair.sigma1 > 1.0 && pair.sigma1 < 2.0, "sigma1 = {}", pair.sigma1);
        for w in pair.phi1.windows(2) {
            assert!(w[1] > w[0]);
        }
        let dense = dense_sigma1(&op);
        assert!(
            (pair.sigma1 - dense).abs() <= 1e-10 * dense.abs().max(1.0),
            "{} vs {dense}",
            pair.sigma1
        );
    }

    #[test]
    fn washout_with_zero_growth() {
        let g = grid(256);
        let s = sigma1_samples(1.0, 1.0, &vec![0.0; 256], &g).unwrap();
        assert!(s < 0.0, "sigma1 = {s}");
    }

    #[test]
    fn strictly_decreasing_in_advection() {
        let g = grid(256);
        let (r, _) = p2();
        let mut prev = f64::INFINITY;
        for q in [0.0, 0.5, 1.0, 2.0] {
            let s = sigma1(1.0, q, &r, &g).unwrap();
            assert!(s < prev, "q={q}: {s} !< {prev}");
            prev = s;
        }
    }

    #[test]
    fn shift_moves_eigenvalue_exactly() {
        let g = grid(128);
        let h = parse_profile("2 + sin(2*x)").unwrap().evaluate(&g).unwrap();
        let op = assemble_samples(1.5, 0.4, &h, &g).unwrap();
        let s0 = principal_eigen(&op).unwrap().sigma1;
        let s1 = principal_eigen(&op.shifted(0.375)).unwrap().sigma1;
        assert!((s1 - s0 - 0.375).abs() < 1e-9);
    }

    #[test]
    fn rayleigh_quotient_constant_trial() {
        let g = grid(128);
        let op = assemble_samples(1.0, 0.0, &vec![3.25; 128], &g).unwrap();
        let rq = rayleigh_quotient(&vec![1.0; 128], &op).unwrap();
        assert!((rq - 3.25).abs() < 1e-10, "rq = {rq}");
    }

    #[test]
    fn rayleigh_quotient_of_eigenfunction_and_supremum_property() {
        let g = grid(2048);
        let h = parse_profile("1 + 0.5*cos(3.141592653589793*x)").unwrap();
        let op = assemble(1.0, 0.5, &h, &g).unwrap();
        let pair = principal_eigen(&op).unwrap();
        let rq = rayleigh_quotient(&pair.phi1, &op).unwrap();
        assert!((rq - pair.sigma1).abs() < 1e-6, "rq = {rq}, sigma1 = {}", pair.sigma1);
        // any trial function stays below sigma1 (+ quadrature slack)
        for trial in [
            g.nodes().iter().map(|&x| 1.0 + x).collect::<Vec<_>>(),
            g.nodes().iter().map(|&x| (1.5 * x).cos() + 1.2).collect::<Vec<_>>(),
            g.nodes().iter().map(|&x| (-2.0 * x).exp()).collect::<Vec<_>>(),
        ] {
            let v = rayleigh_quotient(&trial, &op).unwrap();
            assert!(v <= pair.sigma1 + 1e-6, "{v} vs {}", pair.sigma1);
        }
    }

    #[test]
    fn zero_trial_function_rejected() {
        let g = grid(64);
        let op = assemble_samples(1.0, 0.0, &vec![0.0; 64], &g).unwrap();
        assert!(rayleigh_quotient(&vec![0.0; 64], &op).is_err());
    }

    #[test]
    fn residual_contract_holds() {
        let g = grid(256);
        let h = parse_profile("2 + cos(3*x)").unwrap();
        let op = assemble(0.7, 0.9, &h, &g).unwrap();
        let pair = principal_eigen(&op).unwrap();
        assert!(pair.residual <= RESIDUAL_TOL * (pair.sigma1.abs() + op.norm_inf()));
        assert!(pair.phi1.iter().all(|&v| v > 0.0));
    }
}
