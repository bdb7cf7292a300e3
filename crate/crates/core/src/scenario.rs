//! Scenario files: a flat `key = value` format with `[profiles]`, `[rates]`
//! and `[ranges]` sections, deliberately parseable without any ecosystem
//! dependency. `#` starts a comment anywhere on a line.
//!
//! ```text
//! [profiles]
//! r = 1 + 0.5*x
//! K = 1.5*(1 + 0.5*x)     # or K_csv = path/to/K.csv
//!
//! [rates]
//! b = 1
//! gamma = 1
//! mu = 1
//! nu = 1
//! q = 0.1
//!
//! [ranges]
//! grid_n = 256
//! mu_min = 1e-3
//! mu_max = 1e4
//! mu_points = 40
//! mu_sweep_points = 20
//! q_points = 24
//! ```

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::profiles::{parse_profile, Profile};
use crate::thresholds::MuRange;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ProfileSpec {
    Expression(String),
    Csv(PathBuf),
}

impl ProfileSpec {
    pub fn resolve(&self, base_dir: &Path) -> Result<Profile> {
        match self {
            ProfileSpec::Expression(text) => parse_profile(text),
            ProfileSpec::Csv(path) => {
                let full = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
                let text = std::fs::read_to_string(&full)?;
                Profile::from_csv_str(&text)
            }
        }
    }
}

/// Everything a subcommand needs to run: profile specs, rates, and ranges.
/// Entirely deterministic; there is no seed anywhere.
#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub r: ProfileSpec,
    pub k: ProfileSpec,
    pub b: f64,
    pub gamma: f64,
    pub mu: f64,
    pub nu: f64,
    pub q: f64,
    pub grid_n: usize,
    pub mu_range: MuRange,
    /// Columns of a region sweep.
    pub mu_sweep_points: usize,
    /// Rows (q fractions) of a region sweep.
    pub q_points: usize,
}

impl Scenario {
    pub fn parse_str(text: &str) -> Result<Scenario> {
        let mut r = None;
        let mut k = None;
        let mut b = 1.0;
        let mut gamma = 1.0;
        let mut mu = 1.0;
        let mut nu = 1.0;
        let mut q = 0.0;
        let mut grid_n: usize = 256;
        let mut mu_range = MuRange::standard();
        let mut mu_sweep_points: usize = 20;
        let mut q_points: usize = 24;

        let mut section = String::new();
        let mut seen: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Scenario(format!("line {}: {msg}", lineno + 1));
            if let Some(name) = line.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return Err(err("unterminated section header".into()));
                };
                let name = name.trim();
                if !matches!(name, "profiles" | "rates" | "ranges") {
                    return Err(err(format!("unknown section `{name}`")));
                }
                section = name.to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err("expected `key = value`".into()));
            };
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(err(format!("empty value for `{key}`")));
            }
            let qualified = format!("{section}.{key}");
            if seen.contains(&qualified) {
                return Err(err(format!("duplicate key `{key}` in [{section}]")));
            }
            seen.push(qualified);

            let parse_f64 = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| err(format!("`{v}` is not a finite number")))
            };
            let parse_usize = |v: &str| -> Result<usize> {
                v.parse::<usize>().map_err(|_| err(format!("`{v}` is not a count")))
            };

            match (section.as_str(), key) {
                ("profiles", "r") => {
                    parse_profile(value)?;
                    r = Some(ProfileSpec::Expression(value.to_string()));
                }
                ("profiles", "K") => {
                    parse_profile(value)?;
                    k = Some(ProfileSpec::Expression(value.to_string()));
                }
                ("profiles", "r_csv") => r = Some(ProfileSpec::Csv(PathBuf::from(value))),
                ("profiles", "K_csv") => k = Some(ProfileSpec::Csv(PathBuf::from(value))),
                ("rates", "b") => b = parse_f64(value)?,
                ("rates", "gamma") => gamma = parse_f64(value)?,
                ("rates", "mu") => mu = parse_f64(value)?,
                ("rates", "nu") => nu = parse_f64(value)?,
                ("rates", "q") => q = parse_f64(value)?,
                ("ranges", "grid_n") => grid_n = parse_usize(value)?,
                ("ranges", "mu_min") => mu_range.min = parse_f64(value)?,
                ("ranges", "mu_max") => mu_range.max = parse_f64(value)?,
                ("ranges", "mu_points") => mu_range.points = parse_usize(value)?,
                ("ranges", "mu_sweep_points") => mu_sweep_points = parse_usize(value)?,
                ("ranges", "q_points") => q_points = parse_usize(value)?,
                ("", _) => return Err(err(format!("key `{key}` before any section"))),
                _ => return Err(err(format!("unknown key `{key}` in [{section}]"))),
            }
        }

        let scenario = Scenario {
            r: r.ok_or_else(|| Error::Scenario("missing [profiles] r".into()))?,
            k: k.ok_or_else(|| Error::Scenario("missing [profiles] K".into()))?,
            b,
            gamma,
            mu,
            nu,
            q,
            grid_n,
            mu_range,
            mu_sweep_points,
            q_points,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("b", self.b),
            ("gamma", self.gamma),
            ("mu", self.mu),
            ("nu", self.nu),
        ] {
            if !(v > 0.0) {
                return Err(Error::Scenario(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.q >= 0.0) {
            return Err(Error::Scenario(format!("q must be non-negative, got {}", self.q)));
        }
        if self.grid_n < crate::grid::MIN_CELLS {
            return Err(Error::Scenario(format!(
                "grid_n must be at least {}, got {}",
                crate::grid::MIN_CELLS,
                self.grid_n
            )));
        }
        self.mu_range
            .validate()
            .map_err(|e| Error::Scenario(format!("bad mu range: {e}")))?;
        if self.mu_sweep_points < 2 || self.q_points < 2 {
            return Err(Error::Scenario("sweep ranges need at least 2 points".into()));
        }
        Ok(())
    }

    /// Resolve the profile specs (CSV paths relative to `base_dir`) and vet
    /// positivity on the scenario grid.
    pub fn profiles(&self, base_dir: &Path) -> Result<(Profile, Profile)> {
        let grid = self.grid()?;
        let r = self.r.resolve(base_dir)?;
        let k = self.k.resolve(base_dir)?;
        r.check_positive(&grid)?;
        k.check_positive(&grid)?;
        Ok((r, k))
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid_n)
    }

    /// Sweep q fractions, uniformly spanning 0.02 .. 0.98 of q*.
    pub fn q_fractions(&self) -> Vec<f64> {
        let m = self.q_points;
        (0..m)
            .map(|i| 0.02 + 0.96 * i as f64 / (m - 1) as f64)
            .collect()
    }

    /// Sweep mu samples (log-spaced over the scenario mu range).
    pub fn mu_sweep(&self) -> Vec<f64> {
        crate::numeric::log_space(self.mu_range.min, self.mu_range.max, self.mu_sweep_points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P1_TEXT: &str = "\
# proportional pair
[profiles]
r = 1 + 0.5*x
K = 1.5*(1 + 0.5*x)

[rates]
b = 1
gamma = 1
mu = 1
nu = 1
q = 0.1

[ranges]
grid_n = 128
";

    #[test]
    fn parses_canonical_file() {
        let s = Scenario::parse_str(P1_TEXT).unwrap();
        assert_eq!(s.grid_n, 128);
        assert_eq!(s.q, 0.1);
        assert_eq!(s.mu_range.points, 40);
        let (r, k) = s.profiles(Path::new(".")).unwrap();
        assert!((r.eval(0.0) - 1.0).abs() < 1e-15);
        assert!((k.eval(1.0) - 2.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(Scenario::parse_str("").is_err()); // missing profiles
        assert!(Scenario::parse_str("[profiles]\nr = 1+x\n").is_err()); // no K
        assert!(Scenario::parse_str("[profiles\nr = 1\n").is_err());
        assert!(Scenario::parse_str("[wat]\nx = 1\n").is_err());
        assert!(Scenario::parse_str("r = 1\n").is_err()); // before section
        assert!(Scenario::parse_str("[profiles]\nr = 1+x\nK = 1+x\n[rates]\nb = -2\n").is_err());
        assert!(Scenario::parse_str("[profiles]\nr = 1+x\nr = 2\nK = 1\n").is_err());
        assert!(Scenario::parse_str("[profiles]\nr = 1+\nK = 1\n").is_err()); // bad expr
        assert!(
            Scenario::parse_str("[profiles]\nr = 1+x\nK = 1+x\n[ranges]\ngrid_n = 8\n").is_err()
        );
    }

    #[test]
    fn comments_and_spacing_are_tolerated() {
        let text = "  [profiles]  \n r   =   1 + x # growth\nK=2\n";
        let s = Scenario::parse_str(text).unwrap();
        assert_eq!(s.r, ProfileSpec::Expression("1 + x".into()));
        assert_eq!(s.k, ProfileSpec::Expression("2".into()));
    }

    #[test]
    fn csv_profiles_resolve_relative_to_base() {
        let dir = std::env::temp_dir().join("riverine-scenario-test");
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("k.csv"), "0,2\n0.5,2.5\n1,2\n").unwrap();
        let text = "[profiles]\nr = 1 + x\nK_csv = k.csv\n";
        let s = Scenario::parse_str(text).unwrap();
        let (_, k) = s.profiles(&dir).unwrap();
        assert!((k.eval(0.25) - 2.25).abs() < 1e-15);
    }
}
