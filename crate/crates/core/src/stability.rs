//! Linear stability of the prey-only state against predator invasion: sign
//! classification of the invasion growth rate sigma1(nu, q, b theta - gamma),
//! the critical flow speed where it changes sign, and (mu, q) region sweeps.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::eigen::sigma1_samples;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::numeric::bisect;
use crate::profiles::Profile;
use crate::steady::{find_qstar, solve_eta, ThetaPath};

/// Growth rates within this band of zero are classified Marginal: the
/// discretization cannot certify an exact zero.
pub const TAU_MARGINAL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

/// Sign classification of the invasion growth rate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityVerdict {
    pub sigma: f64,
    pub verdict: Verdict,
    /// |sigma| relative to the marginal band.
    pub margin: f64,
}

impl StabilityVerdict {
    pub fn from_sigma(sigma: f64) -> Self {
        let verdict = if sigma > TAU_MARGINAL {
            Verdict::Unstable
        } else if sigma < -TAU_MARGINAL {
            Verdict::Stable
        } else {
            Verdict::Marginal
        };
        Self { sigma, verdict, margin: sigma.abs() / TAU_MARGINAL }
    }
}

/// Warm-started access to theta(mu, q) at arbitrary q below washout; keeps
/// every converged state keyed by q so nearby requests continue from the
/// closest one below instead of walking up from zero flow each time.
pub struct ThetaCache {
    qstar: f64,
    states: BTreeMap<u64, Vec<f64>>,
    mu: f64,
    r: Vec<f64>,
    k: Vec<f64>,
    grid: Grid,
}

impl ThetaCache {
    pub fn new(mu: f64, r: &Profile, k: &Profile, grid: &Grid, qstar: f64) -> Result<Self> {
        let rv = r.evaluate(grid)?;
        let kv = k.evaluate(grid)?;
        let mut path = ThetaPath::new(mu, rv.clone(), kv.clone(), grid.clone(), qstar)?;
        let eta = path.advance_to(0.0)?;
        let mut states = BTreeMap::new();
        states.insert(0f64.to_bits(), eta.field);
        Ok(Self { qstar, states, mu, r: rv, k: kv, grid: grid.clone() })
    }

    pub fn qstar(&self) -> f64 {
        self.qstar
    }

    /// theta samples at q, continuing from the nearest cached state below.
    pub fn theta_at(&mut self, q: f64) -> Result<Vec<f64>> {
        if q >= self.qstar {
            return Err(Error::Washout);
        }
        if let Some(th) = self.states.get(&q.to_bits()) {
            return Ok(th.clone());
        }
        let (&start_bits, start) = self
            .states
            .range(..=q.to_bits())
            .next_back()
            .expect("cache always holds q = 0");
        let start_q = f64::from_bits(start_bits);
        let mut path = ThetaPath::resume(
            self.mu,
            self.r.clone(),
            self.k.clone(),
            self.grid.clone(),
            self.qstar,
            start_q,
            start.clone(),
        );
        let state = path.advance_to(q)?;
        self.states.insert(q.to_bits(), state.field.clone());
        Ok(state.field)
    }

    /// Invasion growth rate at (nu, q): sigma1 of the operator with potential
    /// b*theta - gamma.
    pub fn invasion_sigma(&mut self, nu: f64, q: f64, b: f64, gamma: f64) -> Result<f64> {
        let theta = self.theta_at(q)?;
        let m: Vec<f64> = theta.iter().map(|&t| b * t - gamma).collect();
        sigma1_samples(nu, q, &m, &self.grid)
    }
}

/// Classify the prey-only state at one parameter point. Fails with a washout
/// error when q >= q*(mu), where no prey state exists.
pub fn classify(
    mu: f64,
    nu: f64,
    q: f64,
    b: f64,
    gamma: f64,
    r: &Profile,
    k: &Profile,
    grid: &Grid,
) -> Result<StabilityVerdict> {
    for (name, v) in [("mu", mu), ("nu", nu), ("b", b), ("gamma", gamma)] {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter {
                module: "stability",
                message: format!("{name} must be positive, got {v}"),
            });
        }
    }
    let qstar = find_qstar(mu, r, grid)?.qstar;
    if q >= qstar {
        return Err(Error::Washout);
    }
    let mut cache = ThetaCache::new(mu, r, k, grid, qstar)?;
    Ok(StabilityVerdict::from_sigma(cache.invasion_sigma(nu, q, b, gamma)?))
}

/// Outcome of the critical flow speed search at fixed (mu, nu).
#[derive(Debug, Clone, Serialize)]
pub enum CriticalQ {
    /// sigma1(nu, 0+, b eta - gamma) <= 0: stable throughout (0, q*).
    None { sigma_at_zero: f64 },
    /// Unique sign change certified by a bisection bracket.
    Found { qtilde: f64, bracket: (f64, f64), qstar: f64 },
}

/// Locate the unique q~ in (0, q*) where the invasion growth rate changes
/// sign, exploiting its strict monotone decrease in q and the -gamma limit
/// at washout.
pub fn critical_q(
    mu: f64,
    nu: f64,
    b: f64,
    gamma: f64,
    r: &Profile,
    k: &Profile,
    grid: &Grid,
) -> Result<CriticalQ> {
    let qstar = find_qstar(mu, r, grid)?.qstar;
    let mut cache = ThetaCache::new(mu, r, k, grid, qstar)?;
    critical_q_cached(&mut cache, nu, b, gamma)
}

pub fn critical_q_cached(
    cache: &mut ThetaCache,
    nu: f64,
    b: f64,
    gamma: f64,
) -> Result<CriticalQ> {
    let qstar = cache.qstar();
    let s0 = cache.invasion_sigma(nu, 0.0, b, gamma)?;
    if s0 <= 0.0 {
        return Ok(CriticalQ::None { sigma_at_zero: s0 });
    }
    // find an upper endpoint with negative growth; the washout limit -gamma
    // guarantees one exists inside (0, q*)
    let mut hi = None;
    for frac in [0.9, 0.98, 0.995, 0.999, 0.9999] {
        let q = frac * qstar;
        let s = cache.invasion_sigma(nu, q, b, gamma)?;
        if s < 0.0 {
            hi = Some(q);
            break;
        }
    }
    let Some(q_hi) = hi else {
        return Err(Error::InvalidParameter {
            module: "stability",
            message: "invasion growth rate still positive at 0.9999 q*".into(),
        });
    };
    let mut err = None;
    let (qtilde, bracket) = bisect(
        |q| match cache.invasion_sigma(nu, q, b, gamma) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        0.0,
        q_hi,
        s0,
        1e-8,
        90,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok(CriticalQ::Found { qtilde, bracket, qstar })
}

/// One cell of a region sweep.
#[derive(Debug, Clone, Serialize)]
pub struct RegionCell {
    pub mu: f64,
    pub q: f64,
    pub outcome: std::result::Result<StabilityVerdict, String>,
}

/// Stability verdicts over a (mu, q) rectangle at fixed (nu, b, gamma). The q
/// samples per column are fixed fractions of that column's q*, so every cell
/// lies in the existence region of theta.
#[derive(Debug, Clone, Serialize)]
pub struct RegionMap {
    pub nu: f64,
    pub b: f64,
    pub gamma: f64,
    pub mu_samples: Vec<f64>,
    pub q_fractions: Vec<f64>,
    pub qstar_curve: Vec<f64>,
    /// cells[i][j]: column i (mu), row j (q fraction).
    pub cells: Vec<Vec<RegionCell>>,
    /// Critical flow speed per column where a sign change exists.
    pub boundary: Vec<Option<f64>>,
    pub failures: usize,
}

impl RegionMap {
    /// Number of Unstable -> Stable transitions walking q upward, ignoring
    /// marginal and failed cells.
    pub fn column_transitions(&self, col: usize) -> usize {
        let mut transitions = 0;
        let mut last: Option<Verdict> = None;
        for cell in &self.cells[col] {
            let Ok(v) = &cell.outcome else { continue };
            if v.verdict == Verdict::Marginal {
                continue;
            }
            if let Some(prev) = last {
                if prev == Verdict::Unstable && v.verdict == Verdict::Stable {
                    transitions += 1;
                }
            }
            last = Some(v.verdict);
        }
        transitions
    }

    /// No Unstable cell may appear above a Stable one within a column
    /// (monotone decrease of the growth rate in q).
    pub fn column_monotone(&self, col: usize) -> bool {
        let mut seen_stable = false;
        for cell in &self.cells[col] {
            let Ok(v) = &cell.outcome else { continue };
            match v.verdict {
                Verdict::Stable => seen_stable = true,
                Verdict::Unstable if seen_stable => return false,
                _ => {}
            }
        }
        true
    }

    pub fn all_stable(&self) -> bool {
        self.cells
            .iter()
            .flatten()
            .all(|c| matches!(&c.outcome, Ok(v) if v.verdict == Verdict::Stable))
    }
}

/// Sweep a (mu, q) rectangle. Columns run in parallel; results are merged in
/// input order so output is independent of scheduling.
pub fn sweep_region(
    mu_samples: &[f64],
    q_fractions: &[f64],
    nu: f64,
    b: f64,
    gamma: f64,
    r: &Profile,
    k: &Profile,
    grid: &Grid,
) -> Result<RegionMap> {
    if mu_samples.is_empty() || q_fractions.is_empty() {
        return Err(Error::InvalidParameter {
            module: "stability",
            message: "empty sweep ranges".into(),
        });
    }
    if q_fractions.iter().any(|&f| !(0.0 < f && f < 1.0)) {
        return Err(Error::InvalidParameter {
            module: "stability",
            message: "q fractions must lie strictly inside (0, 1)".into(),
        });
    }

    struct Column {
        qstar: f64,
        cells: Vec<RegionCell>,
        boundary: Option<f64>,
    }

    let columns: Vec<Result<Column>> = mu_samples
        .par_iter()
        .map(|&mu| -> Result<Column> {
            let qstar = find_qstar(mu, r, grid)?.qstar;
            let mut cache = ThetaCache::new(mu, r, k, grid, qstar)?;
            let mut cells = Vec::with_capacity(q_fractions.len());
            for &frac in q_fractions {
                let q = frac * qstar;
                let outcome = cache
                    .invasion_sigma(nu, q, b, gamma)
                    .map(StabilityVerdict::from_sigma)
                    .map_err(|e| e.to_string());
                cells.push(RegionCell { mu, q, outcome });
            }
            let boundary = match critical_q_cached(&mut cache, nu, b, gamma)? {
                CriticalQ::Found { qtilde, .. } => Some(qtilde),
                CriticalQ::None { .. } => None,
            };
            Ok(Column { qstar, cells, boundary })
        })
        .collect();

    let mut qstar_curve = Vec::with_capacity(mu_samples.len());
    let mut cells = Vec::with_capacity(mu_samples.len());
    let mut boundary = Vec::with_capacity(mu_samples.len());
    let mut failures = 0;
    for col in columns {
        let col = col?;
        failures += col.cells.iter().filter(|c| c.outcome.is_err()).count();
        qstar_curve.push(col.qstar);
        cells.push(col.cells);
        boundary.push(col.boundary);
    }
    Ok(RegionMap {
        nu,
        b,
        gamma,
        mu_samples: mu_samples.to_vec(),
        q_fractions: q_fractions.to_vec(),
        qstar_curve,
        cells,
        boundary,
        failures,
    })
}

/// Sign-change census of mu -> sigma1(nu, 0, b eta(mu) - gamma).
#[derive(Debug, Clone, Serialize)]
pub struct SignChangeReport {
    pub count: usize,
    pub locations: Vec<crate::thresholds::RootCertificate>,
    pub table: Vec<(f64, f64)>,
}

pub fn sign_changes_in_mu(
    nu: f64,
    b: f64,
    gamma: f64,
    r: &Profile,
    k: &Profile,
    grid: &Grid,
    mu_samples: &[f64],
) -> Result<SignChangeReport> {
    let sigma_at = |mu: f64| -> Result<f64> {
        let eta = solve_eta(mu, r, k, grid)?;
        let m: Vec<f64> = eta.field.iter().map(|&t| b * t - gamma).collect();
        sigma1_samples(nu, 0.0, &m, grid)
    };
    let mut table = Vec::with_capacity(mu_samples.len());
    for &mu in mu_samples {
        table.push((mu, sigma_at(mu)?));
    }
    let mut locations = Vec::new();
    for i in 0..table.len() - 1 {
        let (mu_a, s_a) = table[i];
        let (mu_b, s_b) = table[i + 1];
        if s_a == 0.0 || (s_a > 0.0) != (s_b > 0.0) {
            let mut err = None;
            let (value, bracket) = bisect(
                |mu| match sigma_at(mu) {
                    Ok(v) => v,
                    Err(e) => {
                        err = Some(e);
                        f64::NAN
                    }
                },
                mu_a,
                mu_b,
                s_a,
                1e-6,
                90,
            );
            if let Some(e) = err {
                return Err(e);
            }
            locations.push(crate::thresholds::RootCertificate {
                value,
                bracket,
                f_lo: sigma_at(bracket.0)?,
                f_hi: sigma_at(bracket.1)?,
            });
        }
    }
    Ok(SignChangeReport { count: locations.len(), locations, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::log_space;
    use crate::profiles::{p1, p2};

    fn grid() -> Grid {
        Grid::new(128).unwrap()
    }

    #[test]
    fn low_mortality_is_invadable_at_low_flow() {
        let (r, k) = p1();
        let v = classify(1.0, 1.0, 0.01, 1.0, 1.0, &r, &k, &grid()).unwrap();
        assert_eq!(v.verdict, Verdict::Unstable, "sigma = {}", v.sigma);
    }

    #[test]
    fn high_mortality_is_stable_everywhere_sampled() {
        // gamma above b*max K forces a negative potential
        let (r, k) = p2();
        for (mu, q) in [(0.5, 0.1), (2.0, 0.4)] {
            let v = classify(mu, 1.0, q, 1.0, 2.6, &r, &k, &grid()).unwrap();
            assert_eq!(v.verdict, Verdict::Stable);
        }
    }

    #[test]
    fn near_washout_growth_rate_approaches_mortality_plus_transport_loss() {
        // as q -> q* the prey state vanishes and the potential tends to
        // -gamma, so by the shift identity the growth rate tends to
        // sigma1(nu, q*, 0) - gamma; the transport term is itself strictly
        // negative, making the state stable with margin beyond -gamma
        let (r, k) = p1();
        let gamma = 1.0;
        let g = grid();
        let qstar = find_qstar(1.0, &r, &g).unwrap().qstar;
        let q = 0.999 * qstar;
        let mut cache = ThetaCache::new(1.0, &r, &k, &g, qstar).unwrap();
        let s = cache.invasion_sigma(1.0, q, 1.0, gamma).unwrap();
        let transport = sigma1_samples(1.0, q, &vec![0.0; g.n()], &g).unwrap();
        assert!(transport < 0.0);
        let limit = transport - gamma;
        assert!((s - limit).abs() <= 0.15 * gamma, "sigma = {s}, limit = {limit}");
        assert!(s < -gamma + 0.15 * gamma, "still comfortably stable: {s}");
    }

    #[test]
    fn washout_request_is_an_error() {
        let (r, k) = p1();
        let g = grid();
        let qstar = find_qstar(1.0, &r, &g).unwrap().qstar;
        assert!(matches!(
            classify(1.0, 1.0, 1.2 * qstar, 1.0, 1.0, &r, &k, &g),
            Err(Error::Washout)
        ));
    }

    #[test]
    fn critical_q_bisection_certificate() {
        let (r, k) = p1();
        let g = grid();
        let out = critical_q(1.0, 1.0, 1.0, 1.0, &r, &k, &g).unwrap();
        let CriticalQ::Found { qtilde, bracket, qstar } = out else {
            panic!("expected a critical flow speed in the low-mortality regime");
        };
        assert!(bracket.1 - bracket.0 <= 1e-8 * 1.001);
        assert!(0.0 < qtilde && qtilde < qstar);
        let mut cache = ThetaCache::new(1.0, &r, &k, &g, qstar).unwrap();
        let below = cache.invasion_sigma(1.0, qtilde - 1e-4, 1.0, 1.0).unwrap();
        let above = cache.invasion_sigma(1.0, qtilde + 1e-4, 1.0, 1.0).unwrap();
        assert!(below > 0.0 && above < 0.0, "below {below}, above {above}");
    }

    #[test]
    fn critical_q_none_when_stable_at_rest() {
        let (r, k) = p2();
        let out = critical_q(1.0, 1.0, 1.0, 2.6, &r, &k, &grid()).unwrap();
        assert!(matches!(out, CriticalQ::None { sigma_at_zero } if sigma_at_zero < 0.0));
    }

    #[test]
    fn small_sweep_structure() {
        let (r, k) = p1();
        let mus = log_space(0.2, 5.0, 6);
        let fracs: Vec<f64> = (0..8).map(|i| 0.05 + 0.9 * i as f64 / 7.0).collect();
        let map = sweep_region(&mus, &fracs, 1.0, 1.0, 1.0, &r, &k, &grid()).unwrap();
        assert_eq!(map.failures, 0);
        for col in 0..mus.len() {
            assert!(map.column_monotone(col));
            assert_eq!(map.column_transitions(col), 1, "column {col}");
            assert!(map.boundary[col].is_some());
        }
    }

    #[test]
    fn sign_change_census_none_in_stable_regime() {
        let (r, k) = p2();
        let mus = log_space(0.01, 10.0, 10);
        let rep = sign_changes_in_mu(0.5, 1.0, 2.6, &r, &k, &grid(), &mus).unwrap();
        assert_eq!(rep.count, 0);
        assert!(rep.table.iter().all(|&(_, s)| s < 0.0));
    }
}
