//! The indefinite-weight eigenvalue lambda*(mu): the smallest positive lambda
//! with a nontrivial Neumann solution of `psi_xx + lambda m(x) psi = 0`,
//! where the weight `m = b eta - gamma` changes sign. Its comparison against
//! 1/nu decides predator invasibility at zero flow.
//!
//! Two independent routes are computed and cross-checked on every call:
//! (a) a projected generalized symmetric eigensolve (Householder reduction to
//! the subspace where the weighted mean vanishes, Cholesky of the reduced
//! stiffness, dense symmetric eigendecomposition), and (b) bisection in nu on
//! the sign of the principal growth rate sigma1(nu, 0, m), whose root nu~
//! gives lambda* = 1/nu~. Both act on the same discrete operators, so they
//! must agree to solver precision regardless of grid resolution.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::numeric::bisect;
use crate::operator::assemble_samples;
use crate::steady::SteadyState;

/// Relative disagreement tolerated between the two routes.
const ROUTE_AGREEMENT: f64 = 1e-6;

/// Bisection bracket in nu. The lower end corresponds to lambda* = 1e4 and is
/// extended downward (and the upper end upward) if the sign conditions ask
/// for it.
const NU_LO: f64 = 1e-4;
const NU_HI: f64 = 1e6;

#[derive(Debug, Clone, Serialize)]
pub struct LambdaStar {
    pub mu: f64,
    /// The eigenvalue; 0 when the weighted mean is non-negative, and
    /// meaningless when `defined` is false.
    pub value: f64,
    /// Eigenfunction samples (max-normalized), present only when value > 0.
    pub psi: Option<Vec<f64>>,
    /// Whether the weight is positive somewhere, i.e. the eigenvalue problem
    /// makes sense at all.
    pub defined: bool,
    /// Infinity norm of `psi_xx + lambda m psi` at the solution (0 when no
    /// eigenfunction is attached).
    pub residual: f64,
}

/// Compute lambda*(mu) for the weight b*eta - gamma.
pub fn lambda_star(b: f64, gamma: f64, eta: &SteadyState) -> Result<LambdaStar> {
    if !(b > 0.0) || !(gamma > 0.0) {
        return Err(Error::InvalidParameter {
            module: "eigensolver",
            message: format!("b and gamma must be positive, got b={b}, gamma={gamma}"),
        });
    }
    let grid = &eta.grid;
    let m: Vec<f64> = eta.field.iter().map(|&v| b * v - gamma).collect();
    let m_max = m.iter().fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));
    if !(m_max > 0.0) {
        return Ok(LambdaStar {
            mu: eta.mu,
            value: 0.0,
            psi: None,
            defined: false,
            residual: 0.0,
        });
    }
    if grid.integrate(&m) >= 0.0 {
        return Ok(LambdaStar {
            mu: eta.mu,
            value: 0.0,
            psi: None,
            defined: true,
            residual: 0.0,
        });
    }

    let (lambda_pencil, psi) = pencil_route(&m, grid)?;
    let lambda_bisect = bisection_route(&m, grid)?;
    let rel = (lambda_pencil - lambda_bisect).abs() / lambda_pencil.abs().max(lambda_bisect.abs());
    if rel > ROUTE_AGREEMENT {
        return Err(Error::CrossCheck {
            primary: lambda_bisect,
            reference: lambda_pencil,
            relative: rel,
        });
    }

    // residual of the discrete Neumann equation at the pencil eigenfunction
    let lap = assemble_samples(1.0, 0.0, &vec![0.0; grid.n()], grid)?;
    let lpsi = lap.apply(&psi);
    let residual = lpsi
        .iter()
        .zip(&m)
        .zip(&psi)
        .fold(0.0_f64, |acc, ((l, mi), p)| acc.max((l + lambda_pencil * mi * p).abs()));

    Ok(LambdaStar {
        mu: eta.mu,
        value: lambda_pencil,
        psi: Some(psi),
        defined: true,
        residual,
    })
}

/// Orthonormal basis of the hyperplane orthogonal to `m`, as the trailing
/// columns of the Householder reflector that maps m onto an axis.
fn householder_complement(m: &[f64]) -> DMatrix<f64> {
    let n = m.len();
    let mut v = DVector::from_column_slice(m);
    let norm = v.norm();
    let alpha = -m[0].signum() * norm;
    v[0] -= alpha;
    let vnorm2 = v.norm_squared().max(f64::MIN_POSITIVE);
    DMatrix::from_fn(n, n - 1, |i, j| {
        let jj = j + 1;
        let id = if i == jj { 1.0 } else { 0.0 };
        id - 2.0 * v[i] * v[jj] / vnorm2
    })
}

/// Route (a): every eigenfunction with lambda != 0 has zero weighted mean, so
/// restrict the pencil (stiffness, weight) to that hyperplane, where the
/// stiffness is positive definite, and read lambda* off the largest
/// eigenvalue of the Cholesky-reduced weight matrix.
fn pencil_route(m: &[f64], grid: &Grid) -> Result<(f64, Vec<f64>)> {
    let n = grid.n();
    let lap = assemble_samples(1.0, 0.0, &vec![0.0; n], grid)?;
    let k_dense = -lap.to_dense(); // positive semidefinite stiffness

    let z = householder_complement(m);
    let kz = &k_dense * &z;
    let k_v = z.transpose() * kz;
    let mz = DMatrix::from_fn(n, n - 1, |i, j| m[i] * z[(i, j)]);
    let m_v = z.transpose() * mz;

    let chol = nalgebra::Cholesky::new(k_v).ok_or_else(|| Error::InvalidParameter {
        module: "eigensolver",
        message: "reduced stiffness not positive definite (weight mean too close to zero?)".into(),
    })?;
    let l = chol.l();
    let t1 = l
        .clone()
        .solve_lower_triangular(&m_v)
        .ok_or_else(|| Error::InvalidParameter {
            module: "eigensolver",
            message: "singular triangular solve in pencil route".into(),
        })?;
    let t2 = l
        .clone()
        .solve_lower_triangular(&t1.transpose())
        .ok_or_else(|| Error::InvalidParameter {
            module: "eigensolver",
            message: "singular triangular solve in pencil route".into(),
        })?;
    let g = 0.5 * (&t2 + t2.transpose());

    let eig = nalgebra::SymmetricEigen::new(g);
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = 0;
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        if v > best {
            best = v;
            best_idx = i;
        }
    }
    if !(best > 0.0) {
        return Err(Error::InvalidParameter {
            module: "eigensolver",
            message: "no positive eigenvalue in pencil route despite sign-changing weight".into(),
        });
    }
    let lambda = 1.0 / best;

    let y = eig.eigenvectors.column(best_idx).into_owned();
    let w = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::InvalidParameter {
            module: "eigensolver",
            message: "singular triangular solve recovering eigenfunction".into(),
        })?;
    let mut psi: Vec<f64> = (&z * w).iter().copied().collect();
    let mean: f64 = psi.iter().sum();
    if mean < 0.0 {
        for p in &mut psi {
            *p = -*p;
        }
    }
    let max = psi.iter().fold(0.0_f64, |acc, &p| acc.max(p.abs()));
    for p in &mut psi {
        *p /= max;
    }
    Ok((lambda, psi))
}

/// Route (b): sigma1(nu, 0, m) decreases strictly in nu from max(m) > 0
/// toward the weighted mean < 0; its root nu~ satisfies lambda* = 1/nu~.
fn bisection_route(m: &[f64], grid: &Grid) -> Result<f64> {
    let sigma_at = |nu: f64| -> Result<f64> {
        crate::eigen::sigma1_samples(nu, 0.0, m, grid)
    };
    let mut lo = NU_LO;
    let mut s_lo = sigma_at(lo)?;
    while s_lo <= 0.0 && lo > 1e-9 {
        lo *= 0.1;
        s_lo = sigma_at(lo)?;
    }
    if s_lo <= 0.0 {
        return Err(Error::InvalidParameter {
            module: "eigensolver",
            message: format!("growth rate still non-positive at nu = {lo:.1e}"),
        });
    }
    let mut hi = NU_HI;
    let mut s_hi = sigma_at(hi)?;
    while s_hi >= 0.0 && hi < 1e11 {
        hi *= 10.0;
        s_hi = sigma_at(hi)?;
    }
    if s_hi >= 0.0 {
        return Err(Error::InvalidParameter {
            module: "eigensolver",
            message: format!("growth rate still non-negative at nu = {hi:.1e}"),
        });
    }
    let mut eval_err = None;
    let (t_root, _) = bisect(
        |t: f64| match sigma_at(t.exp()) {
            Ok(v) => v,
            Err(e) => {
                eval_err = Some(e);
                f64::NAN
            }
        },
        lo.ln(),
        hi.ln(),
        s_lo,
        1e-12,
        120,
    );
    if let Some(e) = eval_err {
        return Err(e);
    }
    Ok(1.0 / t_root.exp())
}
