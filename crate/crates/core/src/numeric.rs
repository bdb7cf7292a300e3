//! Small shared numerics: finite differences on cell-centered data, boundary
//! extrapolation, quadrature, bracketing root search, and 1-D minimization.

use crate::grid::Grid;

/// Second-order gradient of cell-centered samples: central differences inside,
/// one-sided three-point stencils at the ends.
pub fn gradient(samples: &[f64], dx: f64) -> Vec<f64> {
    let n = samples.len();
    assert!(n >= 3);
    let mut g = vec![0.0; n];
    g[0] = (-3.0 * samples[0] + 4.0 * samples[1] - samples[2]) / (2.0 * dx);
    for i in 1..n - 1 {
        g[i] = (samples[i + 1] - samples[i - 1]) / (2.0 * dx);
    }
    g[n - 1] = (3.0 * samples[n - 1] - 4.0 * samples[n - 2] + samples[n - 3]) / (2.0 * dx);
    g
}

/// Quadratic extrapolation of cell-centered samples to the domain endpoints
/// x = 0 and x = 1. Nodes sit at (i + 1/2) dx, so the boundary is half a cell
/// outside the first/last node.
pub fn boundary_values(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    assert!(n >= 3);
    let left = (15.0 * samples[0] - 10.0 * samples[1] + 3.0 * samples[2]) / 8.0;
    let right = (15.0 * samples[n - 1] - 10.0 * samples[n - 2] + 3.0 * samples[n - 3]) / 8.0;
    (left, right)
}

/// Trapezoidal quadrature of cell-centered samples extended to the endpoints
/// by quadratic extrapolation. Second order for smooth integrands, unlike a
/// bare trapezoid over the node range which misses the two half-cell strips.
pub fn trapezoid_extended(samples: &[f64], grid: &Grid) -> f64 {
    let n = samples.len();
    debug_assert_eq!(n, grid.n());
    let dx = grid.dx();
    let (f0, f1) = boundary_values(samples);
    // end strips of width dx/2, interior trapezoids of width dx
    let mut acc = 0.25 * dx * (f0 + samples[0]) + 0.25 * dx * (samples[n - 1] + f1);
    for i in 0..n - 1 {
        acc += 0.5 * dx * (samples[i] + samples[i + 1]);
    }
    acc
}

/// Sign-change bisection for a continuous function. `f(lo)` and `f(hi)` must
/// have opposite (non-zero) signs. Returns (root, final bracket).
pub fn bisect<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    width_tol: f64,
    max_iter: usize,
) -> (f64, (f64, f64)) {
    debug_assert!(lo < hi);
    for _ in 0..max_iter {
        if hi - lo <= width_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // dx underflow
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return (mid, (mid, mid));
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi), (lo, hi))
}

/// Golden-section search for the maximum of a unimodal function on [a, b].
/// Returns (argmax, max). `rel_tol` is on the interval width relative to the
/// midpoint magnitude.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= rel_tol * (a.abs() + b.abs()).max(1e-30) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Least-squares slope and intercept of y against x.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && points >= 2);
    let (la, lb) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (la + (lb - la) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn gradient_of_quadratic_is_exact_inside() {
        let g = Grid::new(64).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|x| 1.0 + 2.0 * x + 3.0 * x * x).collect();
        let df = gradient(&f, g.dx());
        for (i, x) in g.nodes().iter().enumerate() {
            assert!((df[i] - (2.0 + 6.0 * x)).abs() < 1e-10, "i={i}");
        }
    }

    #[test]
    fn extended_trapezoid_second_order() {
        // integral of cos(pi x) over [0,1] is 0; of x^2 is 1/3
        let coarse = Grid::new(64).unwrap();
        let fine = Grid::new(256).unwrap();
        let err = |g: &Grid| {
            let f: Vec<f64> = g.nodes().iter().map(|x| x * x).collect();
            (trapezoid_extended(&f, g) - 1.0 / 3.0).abs()
        };
        let (e1, e2) = (err(&coarse), err(&fine));
        assert!(e1 < 1e-4);
        assert!(e2 < e1 / 10.0, "e1={e1:.3e} e2={e2:.3e}");
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let (root, _) = bisect(|x| x * x - 2.0, 0.0, 2.0, -2.0, 1e-12, 200);
        assert!((root - 2.0_f64.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(|x| 1.0 - (x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let (s, b) = linear_fit(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-12);
        assert!((b - 1.0).abs() < 1e-12);
    }
}
