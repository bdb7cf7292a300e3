//! Predator mortality thresholds gamma1..gamma4 and the structural roots
//! (mu*, mu_hat, nu*, nu_hat) that organize the stability regions.

use serde::Serialize;

use crate::eigen::lambda_star;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::numeric::{bisect, golden_max, log_space};
use crate::profiles::Profile;
use crate::steady::solve_eta;

/// Log-spaced diffusion-rate scan range.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MuRange {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl MuRange {
    pub fn standard() -> Self {
        Self { min: 1e-3, max: 1e4, points: 40 }
    }

    pub fn values(&self) -> Vec<f64> {
        log_space(self.min, self.max, self.points)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0) || !(self.max > self.min) || self.points < 2 {
            return Err(Error::InvalidParameter {
                module: "thresholds",
                message: format!(
                    "bad mu range: [{}, {}] with {} points",
                    self.min, self.max, self.points
                ),
            });
        }
        Ok(())
    }
}

/// One row of the diffusion scan behind gamma3 and the root search.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MuTableRow {
    pub mu: f64,
    pub int_eta: f64,
    pub max_eta: f64,
    /// lambda*(mu) for the scenario's gamma (filled by `structural_roots`);
    /// None when undefined there or not evaluated.
    pub lambda_star: Option<f64>,
}

/// The four mortality thresholds. gamma3 accounts for the fact that the
/// supremum of the habitat mean dominates both diffusion limits (which equal
/// gamma1/b and gamma2/b), so it is never reported below them even when the
/// scan maximum sits at a truncated endpoint.
#[derive(Debug, Clone, Serialize)]
pub struct GammaThresholds {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
    /// Diffusion rate at which the refined scan attained gamma3/b.
    pub gamma3_argmax_mu: f64,
    pub mu_grid_used: Vec<f64>,
    /// Habitat means at the scan endpoints, so truncation bias is visible.
    pub int_eta_at_endpoints: (f64, f64),
    pub table: Vec<MuTableRow>,
}

/// Compute gamma1 = b int K, gamma2 = b int r / int(r/K), gamma4 = b max K by
/// quadrature/dense sampling, and gamma3 = b sup_mu int eta by a log-grid
/// scan refined with golden-section search.
pub fn gamma_thresholds(
    b: f64,
    r: &Profile,
    k: &Profile,
    grid: &Grid,
    range: &MuRange,
) -> Result<GammaThresholds> {
    if !(b > 0.0) {
        return Err(Error::InvalidParameter {
            module: "thresholds",
            message: format!("b must be positive, got {b}"),
        });
    }
    range.validate()?;
    let rv = r.evaluate(grid)?;
    let kv = k.evaluate(grid)?;
    let ratio: Vec<f64> = rv.iter().zip(&kv).map(|(a, c)| a / c).collect();
    let gamma1 = b * grid.integrate(&kv);
    let gamma2 = b * grid.integrate(&rv) / grid.integrate(&ratio);
    let gamma4 = b * k.extrema(8193).1;

    let mus = range.values();
    let mut table = Vec::with_capacity(mus.len());
    for &mu in &mus {
        let eta = solve_eta(mu, r, k, grid)?;
        table.push(MuTableRow { mu, int_eta: eta.mass(), max_eta: eta.max(), lambda_star: None });
    }
    let mut best = 0;
    for (i, row) in table.iter().enumerate() {
        if row.int_eta > table[best].int_eta {
            best = i;
        }
    }
    // golden refinement in log mu around the discrete maximizer
    let lo = table[best.saturating_sub(1)].mu;
    let hi = table[(best + 1).min(table.len() - 1)].mu;
    let mut solve_err = None;
    let (argmax_t, sup_scan) = golden_max(
        |t: f64| match solve_eta(t.exp(), r, k, grid) {
            Ok(eta) => eta.mass(),
            Err(e) => {
                solve_err = Some(e);
                f64::NEG_INFINITY
            }
        },
        lo.ln(),
        hi.ln(),
        1e-4,
    );
    if let Some(e) = solve_err {
        return Err(e);
    }
    let sup = sup_scan.max(table[best].int_eta);
    let gamma3 = (b * sup).max(gamma1).max(gamma2);

    Ok(GammaThresholds {
        gamma1,
        gamma2,
        gamma3,
        gamma4,
        gamma3_argmax_mu: argmax_t.exp(),
        mu_grid_used: mus,
        int_eta_at_endpoints: (table[0].int_eta, table[table.len() - 1].int_eta),
        table,
    })
}

/// Which mortality interval a given gamma falls into. The case structure
/// presumes gamma1 < gamma2 < gamma3 < gamma4; profile pairs that do not
/// realize that ordering leave some intervals empty, and a gamma fitting no
/// interval is reported as such rather than forced into one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    I,
    II,
    III,
    IV,
    V,
    /// Within tolerance of a threshold.
    Boundary,
    /// No interval of the case structure contains gamma (possible only for
    /// degenerate threshold orderings).
    Unordered,
}

const BOUNDARY_TOL: f64 = 1e-9;

pub fn gamma_regime(gamma: f64, t: &GammaThresholds) -> Regime {
    for edge in [t.gamma1, t.gamma2, t.gamma3] {
        if (gamma - edge).abs() <= BOUNDARY_TOL * edge.abs().max(1.0) {
            return Regime::Boundary;
        }
    }
    // gamma4 is inclusive on the stable side
    if gamma >= t.gamma4 {
        return Regime::V;
    }
    if gamma > 0.0 && gamma <= t.gamma1 {
        return Regime::I;
    }
    if gamma > t.gamma1 && gamma < t.gamma2 {
        return Regime::II;
    }
    if gamma > t.gamma2 && gamma < t.gamma3 {
        return Regime::III;
    }
    if gamma > t.gamma3 && gamma < t.gamma4 {
        return Regime::IV;
    }
    Regime::Unordered
}

/// A refined sign-change bracket with its endpoint values.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RootCertificate {
    pub value: f64,
    pub bracket: (f64, f64),
    pub f_lo: f64,
    pub f_hi: f64,
}

/// A root that may legitimately not exist in the current regime.
#[derive(Debug, Clone, Serialize)]
pub enum RootResult {
    Found(RootCertificate),
    NotApplicable { reason: String },
}

impl RootResult {
    pub fn value(&self) -> Option<f64> {
        match self {
            RootResult::Found(c) => Some(c.value),
            RootResult::NotApplicable { .. } => None,
        }
    }
}

/// Structural quantities behind the theorem cases: roots of b int eta = gamma
/// (smallest and largest), the root of b max eta = gamma, and the reciprocal
/// extrema of lambda*(mu).
#[derive(Debug, Clone, Serialize)]
pub struct StructuralRoots {
    pub mu_star_small: RootResult,
    pub mu_star: RootResult,
    /// Sign changes of b int eta - gamma strictly between the two certified
    /// roots (counted on the scan grid, not refined).
    pub interior_sign_changes: usize,
    pub mu_hat: RootResult,
    /// 1 / sup lambda*(mu); the sup is taken over mu up to the largest root
    /// of b int eta = gamma when one exists (past it lambda* vanishes), and
    /// in any case capped below mu_hat where lambda* blows up.
    pub nu_star: Option<f64>,
    /// 1 / inf lambda*(mu) over (0, mu_hat); None without mu_hat.
    pub nu_hat: Option<f64>,
    /// Scan table with lambda* filled in on the sub-grid where it is defined.
    pub table: Vec<MuTableRow>,
}

const ROOT_BRACKET_WIDTH: f64 = 1e-6;
/// The lambda* scans stay this far below mu_hat.
const MU_HAT_GUARD: f64 = 1e-3;

/// Locate all structural roots for a fixed gamma.
pub fn structural_roots(
    b: f64,
    gamma: f64,
    r: &Profile,
    k: &Profile,
    grid: &Grid,
    range: &MuRange,
) -> Result<StructuralRoots> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter {
            module: "thresholds",
            message: format!("gamma must be positive, got {gamma}"),
        });
    }
    range.validate()?;
    let thresholds = gamma_thresholds(b, r, k, grid, range)?;
    let mut table = thresholds.table.clone();

    let int_eta_minus = |mu: f64| -> Result<f64> { Ok(b * solve_eta(mu, r, k, grid)?.mass() - gamma) };
    let max_eta_minus = |mu: f64| -> Result<f64> { Ok(b * solve_eta(mu, r, k, grid)?.max() - gamma) };

    let refine = |f: &dyn Fn(f64) -> Result<f64>, lo: f64, hi: f64, f_lo: f64| -> Result<RootCertificate> {
        let mut err = None;
        let (value, bracket) = bisect(
            |mu| match f(mu) {
                Ok(v) => v,
                Err(e) => {
                    err = Some(e);
                    f64::NAN
                }
            },
            lo,
            hi,
            f_lo,
            ROOT_BRACKET_WIDTH,
            120,
        );
        if let Some(e) = err {
            return Err(e);
        }
        let f_lo = f(bracket.0)?;
        let f_hi = f(bracket.1)?;
        Ok(RootCertificate { value, bracket, f_lo, f_hi })
    };

    // sign changes of b int eta - gamma on the scan grid
    let fvals: Vec<f64> = table.iter().map(|row| b * row.int_eta - gamma).collect();
    let mut crossings = Vec::new();
    for i in 0..fvals.len() - 1 {
        if fvals[i] == 0.0 || (fvals[i] > 0.0) != (fvals[i + 1] > 0.0) {
            crossings.push(i);
        }
    }
    let (mu_star_small, mu_star, interior) = if crossings.is_empty() {
        let reason = if fvals.iter().all(|&v| v > 0.0) {
            "b*int(eta) stays above gamma on the scanned range".to_string()
        } else {
            "b*int(eta) stays below gamma on the scanned range".to_string()
        };
        (
            RootResult::NotApplicable { reason: reason.clone() },
            RootResult::NotApplicable { reason },
            0,
        )
    } else {
        let first = *crossings.first().unwrap();
        let last = *crossings.last().unwrap();
        let small = refine(
            &int_eta_minus,
            table[first].mu,
            table[first + 1].mu,
            fvals[first],
        )?;
        let large = if last == first {
            small
        } else {
            refine(&int_eta_minus, table[last].mu, table[last + 1].mu, fvals[last])?
        };
        (
            RootResult::Found(small),
            RootResult::Found(large),
            crossings.len().saturating_sub(if last == first { 1 } else { 2 }),
        )
    };

    // root of b max eta = gamma
    let gvals: Vec<f64> = table.iter().map(|row| b * row.max_eta - gamma).collect();
    let mut g_cross = None;
    for i in 0..gvals.len() - 1 {
        if gvals[i] == 0.0 || (gvals[i] > 0.0) != (gvals[i + 1] > 0.0) {
            g_cross = Some(i);
            break;
        }
    }
    let mu_hat = match g_cross {
        Some(i) => RootResult::Found(refine(&max_eta_minus, table[i].mu, table[i + 1].mu, gvals[i])?),
        None => RootResult::NotApplicable {
            reason: if gvals.iter().all(|&v| v > 0.0) {
                "b*max(eta) stays above gamma on the scanned range".to_string()
            } else {
                "b*max(eta) stays below gamma on the scanned range".to_string()
            },
        },
    };

    // lambda* on the admissible sub-grid
    let lambda_cap = match (&mu_hat, &mu_star) {
        (RootResult::Found(h), RootResult::Found(s)) => s.value.min(h.value - MU_HAT_GUARD),
        (RootResult::Found(h), _) => h.value - MU_HAT_GUARD,
        (_, RootResult::Found(s)) => s.value,
        _ => range.max,
    };
    let lambda_at = |mu: f64| -> Result<Option<f64>> {
        let eta = solve_eta(mu, r, k, grid)?;
        let ls = lambda_star(b, gamma, &eta)?;
        Ok(ls.defined.then_some(ls.value))
    };
    let full_cap = match &mu_hat {
        RootResult::Found(h) => h.value - MU_HAT_GUARD,
        _ => range.max,
    };
    for row in table.iter_mut() {
        if row.mu <= full_cap {
            row.lambda_star = lambda_at(row.mu)?;
        }
    }

    // sup of lambda* up to lambda_cap, golden-refined around the scan argmax
    let sup_domain: Vec<(f64, f64)> = table
        .iter()
        .filter(|row| row.mu <= lambda_cap)
        .filter_map(|row| row.lambda_star.map(|v| (row.mu, v)))
        .collect();
    let nu_star = if sup_domain.is_empty() {
        None
    } else {
        let mut best = 0;
        for (i, &(_, v)) in sup_domain.iter().enumerate() {
            if v > sup_domain[best].1 {
                best = i;
            }
        }
        let lo = sup_domain[best.saturating_sub(1)].0;
        let hi = sup_domain[(best + 1).min(sup_domain.len() - 1)].0;
        let mut err = None;
        let (_, sup) = golden_max(
            |t: f64| match lambda_at(t.exp()) {
                Ok(Some(v)) => v,
                Ok(None) => f64::NEG_INFINITY,
                Err(e) => {
                    err = Some(e);
                    f64::NEG_INFINITY
                }
            },
            lo.ln(),
            hi.ln(),
            1e-4,
        );
        if let Some(e) = err {
            return Err(e);
        }
        let sup = sup.max(sup_domain[best].1);
        (sup > 0.0).then(|| 1.0 / sup)
    };

    // inf of lambda* below mu_hat
    let nu_hat = match &mu_hat {
        RootResult::Found(h) => {
            let cap = h.value - MU_HAT_GUARD;
            let inf_domain: Vec<(f64, f64)> = table
                .iter()
                .filter(|row| row.mu <= cap)
                .filter_map(|row| row.lambda_star.and_then(|v| (v > 0.0).then_some((row.mu, v))))
                .collect();
            if inf_domain.is_empty() {
                None
            } else {
                let mut best = 0;
                for (i, &(_, v)) in inf_domain.iter().enumerate() {
                    if v < inf_domain[best].1 {
                        best = i;
                    }
                }
                let lo = inf_domain[best.saturating_sub(1)].0;
                let hi = inf_domain[(best + 1).min(inf_domain.len() - 1)].0;
                let mut err = None;
                let (_, neg_inf) = golden_max(
                    |t: f64| match lambda_at(t.exp()) {
                        Ok(Some(v)) if v > 0.0 => -v,
                        Ok(_) => f64::NEG_INFINITY,
                        Err(e) => {
                            err = Some(e);
                            f64::NEG_INFINITY
                        }
                    },
                    lo.ln(),
                    hi.ln(),
                    1e-4,
                );
                if let Some(e) = err {
                    return Err(e);
                }
                let inf = (-neg_inf).min(inf_domain[best].1);
                (inf > 0.0 && inf.is_finite()).then(|| 1.0 / inf)
            }
        }
        _ => None,
    };

    Ok(StructuralRoots {
        mu_star_small,
        mu_star,
        interior_sign_changes: interior,
        mu_hat,
        nu_star,
        nu_hat,
        table,
    })
}
