//! Spatial coefficient profiles r(x), K(x) and the structural hypotheses the
//! stability theory puts on them.

pub mod expr;
mod hypotheses;

pub use expr::{parse_expr, Expr};
pub use hypotheses::{check_hypotheses, HypothesisCheck, HypothesisReport};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Number of probe points used to vet a freshly parsed expression.
const PROBE_POINTS: usize = 257;

#[derive(Debug, Clone)]
enum Source {
    /// Expression over the grammar in [`expr`], kept with its text form.
    Expr(Expr),
    /// Samples at strictly increasing abscissae covering [0, 1]; evaluation
    /// interpolates linearly.
    Samples { xs: Vec<f64>, values: Vec<f64> },
}

/// A coefficient function on [0, 1], either closed-form or tabulated.
#[derive(Debug, Clone)]
pub struct Profile {
    source: Source,
}

impl Profile {
    /// Build from an expression, vetting finiteness on a probe grid, which
    /// catches division by zero inside [0, 1] at construction time.
    pub fn from_expr(expr: Expr) -> Result<Self> {
        for i in 0..PROBE_POINTS {
            let x = i as f64 / (PROBE_POINTS - 1) as f64;
            let v = expr.eval(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { x, value: v });
            }
        }
        Ok(Self { source: Source::Expr(expr) })
    }

    pub fn constant(value: f64) -> Self {
        Self { source: Source::Expr(Expr::Num(value)) }
    }

    /// Build from tabulated (x, value) pairs; x must be strictly increasing
    /// and cover [0, 1].
    pub fn from_samples(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.len() != values.len() {
            return Err(Error::InvalidProfile(format!(
                "{} abscissae but {} values",
                xs.len(),
                values.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::InvalidProfile("need at least two samples".into()));
        }
        for w in xs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidProfile(format!(
                    "abscissae not strictly increasing near x = {}",
                    w[0]
                )));
            }
        }
        if xs[0] > 1e-12 || xs[xs.len() - 1] < 1.0 - 1e-12 {
            return Err(Error::InvalidProfile(format!(
                "samples cover [{}, {}], not [0, 1]",
                xs[0],
                xs[xs.len() - 1]
            )));
        }
        for (x, v) in xs.iter().zip(&values) {
            if !x.is_finite() || !v.is_finite() {
                return Err(Error::NonFinite { x: *x, value: *v });
            }
        }
        Ok(Self { source: Source::Samples { xs, values } })
    }

    /// Parse a two-column CSV body `x,value` (optional header line).
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = (cols.next().unwrap_or(""), cols.next().unwrap_or(""));
            if cols.next().is_some() {
                return Err(Error::InvalidProfile(format!(
                    "line {}: expected two columns",
                    lineno + 1
                )));
            }
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(v)) => {
                    xs.push(x);
                    values.push(v);
                }
                _ if lineno == 0 => continue, // header row
                _ => {
                    return Err(Error::InvalidProfile(format!(
                        "line {}: cannot parse `{line}` as x,value",
                        lineno + 1
                    )))
                }
            }
        }
        Self::from_samples(xs, values)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.source {
            Source::Expr(e) => e.eval(x),
            Source::Samples { xs, values } => {
                if x <= xs[0] {
                    return values[0];
                }
                if x >= xs[xs.len() - 1] {
                    return values[values.len() - 1];
                }
                // partition_point: first index with xs[i] > x
                let hi = xs.partition_point(|&t| t <= x);
                let lo = hi - 1;
                let w = (x - xs[lo]) / (xs[hi] - xs[lo]);
                values[lo] * (1.0 - w) + values[hi] * w
            }
        }
    }

    /// Samples at a grid's nodes. Errors on any non-finite value.
    pub fn evaluate(&self, grid: &Grid) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(grid.n());
        for &x in grid.nodes() {
            let v = self.eval(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { x, value: v });
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Strict positivity on a refinement of `grid` (plus the endpoints),
    /// required of growth-rate and carrying-capacity profiles.
    pub fn check_positive(&self, grid: &Grid) -> Result<()> {
        let fine = grid.refined(4);
        let mut min = f64::INFINITY;
        let mut argmin = 0.0;
        for &x in fine.nodes().iter().chain([0.0, 1.0].iter()) {
            let v = self.eval(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { x, value: v });
            }
            if v < min {
                min = v;
                argmin = x;
            }
        }
        if min <= 0.0 {
            return Err(Error::InvalidProfile(format!(
                "profile is not strictly positive: value {min} at x = {argmin}"
            )));
        }
        Ok(())
    }

    /// Extrema sampled densely (including endpoints); `points` >= 2.
    pub fn extrema(&self, points: usize) -> (f64, f64) {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for i in 0..points {
            let v = self.eval(i as f64 / (points - 1) as f64);
            min = min.min(v);
            max = max.max(v);
        }
        (min, max)
    }

    pub fn source_text(&self) -> String {
        match &self.source {
            Source::Expr(e) => e.to_string(),
            Source::Samples { xs, .. } => format!("<{} samples>", xs.len()),
        }
    }
}

/// Parse an expression string into a vetted profile.
pub fn parse_profile(text: &str) -> Result<Profile> {
    Profile::from_expr(parse_expr(text)?)
}

/// r = 1 + x/2, K = 3r/2: proportional pair satisfying every structural
/// hypothesis of the main stability theorem.
pub fn p1() -> (Profile, Profile) {
    (
        parse_profile("1 + 0.5*x").expect("static profile"),
        parse_profile("1.5*(1 + 0.5*x)").expect("static profile"),
    )
}

/// r = 1 + x, K = 2 + cos(pi x)/2: a general pair (K falls while r grows)
/// used wherever only the weaker per-lemma hypotheses are needed.
pub fn p2() -> (Profile, Profile) {
    (
        parse_profile("1 + x").expect("static profile"),
        parse_profile("2 + cos(3.141592653589793*x)/2").expect("static profile"),
    )
}

/// r = K = 1 + x/2: the degenerate equal pair where the first two mortality
/// thresholds coincide.
pub fn p3() -> (Profile, Profile) {
    (
        parse_profile("1 + 0.5*x").expect("static profile"),
        parse_profile("1 + 0.5*x").expect("static profile"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profile_on_any_grid() {
        let p = parse_profile("3").unwrap();
        let g = Grid::new(32).unwrap();
        assert!(p.evaluate(&g).unwrap().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn identity_on_five_nodes() {
        // cell centers of a 5-cell grid would be offset; the stated node set
        // (0, .25, .5, .75, 1) is the sample-source round-trip case instead
        let xs = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let vals = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let p = Profile::from_samples(xs.clone(), vals.clone()).unwrap();
        for (x, v) in xs.iter().zip(&vals) {
            assert_eq!(p.eval(*x), *v);
        }
        // linear interpolation between knots reproduces the identity exactly
        assert_eq!(p.eval(0.125), 0.125);
    }

    #[test]
    fn sampled_round_trip_is_exact() {
        let g = Grid::new(16).unwrap();
        let source = parse_profile("exp(x)*(1 + 0.25*x)").unwrap();
        let vals = source.evaluate(&g).unwrap();
        let tab = Profile::from_samples(
            {
                let mut xs = vec![0.0];
                xs.extend_from_slice(g.nodes());
                xs.push(1.0);
                xs
            },
            {
                let mut vs = vec![source.eval(0.0)];
                vs.extend_from_slice(&vals);
                vs.push(source.eval(1.0));
                vs
            },
        )
        .unwrap();
        assert_eq!(tab.evaluate(&g).unwrap(), vals);
    }

    #[test]
    fn division_by_zero_caught_at_construction() {
        match parse_profile("1/(x - 0.5)") {
            Err(Error::NonFinite { x, .. }) => assert!((x - 0.5).abs() < 1e-12),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn positivity_check() {
        let g = Grid::new(64).unwrap();
        assert!(parse_profile("1 + 0.5*x").unwrap().check_positive(&g).is_ok());
        assert!(parse_profile("x - 0.5").unwrap().check_positive(&g).is_err());
        // dips below zero between coarse nodes; the refined probe must see it
        assert!(parse_profile("0.001 - exp(-(x-0.5)*(x-0.5)*10000)")
            .unwrap()
            .check_positive(&g)
            .is_err());
    }

    #[test]
    fn csv_parsing() {
        let p = Profile::from_csv_str("x,value\n0,1\n0.5,2\n1,1.5\n").unwrap();
        assert_eq!(p.eval(0.25), 1.5);
        assert!(Profile::from_csv_str("0,1\n0.4,2\n").is_err()); // no coverage
        assert!(Profile::from_csv_str("0,1\n0.4,2,9\n1,1\n").is_err()); // 3 cols
        assert!(Profile::from_csv_str("0,1\n0.4,huh\n1,1\n").is_err());
        assert!(Profile::from_csv_str("1,1\n0,0\n").is_err()); // not increasing
    }

    #[test]
    fn canonical_pairs_are_positive() {
        let g = Grid::new(64).unwrap();
        for (r, k) in [p1(), p2(), p3()] {
            r.check_positive(&g).unwrap();
            k.check_positive(&g).unwrap();
        }
    }
}
