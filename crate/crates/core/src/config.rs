//! Run configuration: a flat `key = value` text format with command-line
//! overrides.
//!
//! Lines starting with `#` are comments; lists are comma separated; `inf`
//! denotes the uncut momentum cutoff. Unknown keys are rejected so that typos
//! cannot silently fall back to defaults.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::pekar_scf::{ScfConfig, Units};
use crate::radial_core::GridScheme;
use crate::{Error, Result};

/// Unit system of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitSystem {
    /// Choquard coefficient one.
    Reduced,
    /// Phonon energy one, `g = 1/(2π²)`.
    Phonon,
}

impl UnitSystem {
    /// The coupling of this unit system.
    pub fn units(self) -> Units {
        match self {
            UnitSystem::Reduced => Units::reduced(),
            UnitSystem::Phonon => Units::phonon(),
        }
    }
}

/// Every tunable parameter of the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Radial grid nodes.
    pub n: usize,
    /// Radial grid extent.
    pub r_max: f64,
    /// Node placement.
    pub scheme: GridScheme,
    /// Unit system.
    pub units: UnitSystem,
    /// SCF damping.
    pub mixing: f64,
    /// SCF tolerance.
    pub tol: f64,
    /// SCF iteration cap.
    pub max_iter: usize,
    /// Highest explicit angular-momentum sector.
    pub l_max: usize,
    /// Momentum cutoffs (`None` = `∞`).
    pub k_ladder: Vec<Option<f64>>,
    /// Weight parameter `δ`.
    pub delta: f64,
    /// Weight parameter `η`.
    pub eta: f64,
    /// Couplings, strictly increasing.
    pub alpha_ladder: Vec<f64>,
    /// Total momenta `|P|`.
    pub p_list: Vec<f64>,
    /// Admissible ratio `|P|/α`.
    pub c_max: f64,
    /// Output directory.
    pub out_dir: PathBuf,
    /// Seed of randomized spot checks.
    pub seed: u64,
    /// Worker threads (0 = all cores).
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            r_max: 40.0,
            scheme: GridScheme::Uniform,
            units: UnitSystem::Reduced,
            mixing: 0.5,
            tol: 1e-10,
            max_iter: 500,
            l_max: 12,
            k_ladder: vec![Some(20.0), Some(40.0), Some(80.0), Some(160.0), None],
            delta: 0.0,
            eta: 1.0,
            alpha_ladder: vec![5.0, 10.0, 20.0, 40.0],
            p_list: vec![0.0],
            c_max: 1.0,
            out_dir: PathBuf::from("out"),
            seed: 0,
            workers: 0,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| Error::Parameter(format!("{key}: cannot parse '{v}' as a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse::<usize>().map_err(|_| Error::Parameter(format!("{key}: cannot parse '{v}' as a count")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_f64(key, s)).collect()
}

fn parse_cutoff(key: &str, v: &str) -> Result<Option<f64>> {
    match v.trim() {
        "inf" | "∞" => Ok(None),
        s => parse_f64(key, s).map(Some),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Parse a configuration file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("line {}: expected 'key = value'", i + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read and parse a configuration file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Set one key (used for file lines and command-line overrides).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = parse_usize(key, value)?,
            "r_max" => self.r_max = parse_f64(key, value)?,
            "scheme" => self.scheme = value.parse()?,
            "units" => {
                self.units = match value {
                    "reduced" => UnitSystem::Reduced,
                    "phonon" => UnitSystem::Phonon,
                    _ => return Err(Error::Parameter(format!("units: unknown '{value}'"))),
                }
            }
            "mixing" => self.mixing = parse_f64(key, value)?,
            "tol" => self.tol = parse_f64(key, value)?,
            "max_iter" => self.max_iter = parse_usize(key, value)?,
            "l_max" => self.l_max = parse_usize(key, value)?,
            "k_ladder" => {
                self.k_ladder = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_cutoff(key, s))
                    .collect::<Result<_>>()?
            }
            "delta" => self.delta = parse_f64(key, value)?,
            "eta" => self.eta = parse_f64(key, value)?,
            "alpha_ladder" => self.alpha_ladder = parse_list(key, value)?,
            "p_list" => self.p_list = parse_list(key, value)?,
            "c_max" => self.c_max = parse_f64(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = value.parse().map_err(|_| Error::Parameter(format!("seed: '{value}'")))?,
            "workers" => self.workers = parse_usize(key, value)?,
            _ => return Err(Error::Parameter(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    /// Check the invariants: positive tolerances, `L_max ≥ 2`, increasing
    /// α-ladder, admissible parameters.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Parameter(m));
        if self.n < 16 || !(self.r_max > 0.0) {
            return fail(format!("grid needs n ≥ 16 and r_max > 0, got n = {}, r_max = {}", self.n, self.r_max));
        }
        if !(self.tol > 0.0) {
            return fail(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return fail(format!("mixing must lie in (0, 1], got {}", self.mixing));
        }
        if self.max_iter == 0 {
            return fail("max_iter must be positive".into());
        }
        if self.l_max < 2 {
            return fail(format!("l_max must be at least 2, got {}", self.l_max));
        }
        if self.k_ladder.is_empty() || self.k_ladder.iter().flatten().any(|k| !(*k > 0.0)) {
            return fail("k_ladder must hold positive cutoffs or inf".into());
        }
        if self.alpha_ladder.is_empty()
            || self.alpha_ladder[0] <= 0.0
            || self.alpha_ladder.windows(2).any(|w| w[1] <= w[0])
        {
            return fail(format!("alpha_ladder must be positive and strictly increasing: {:?}", self.alpha_ladder));
        }
        if !(0.0..1.0).contains(&self.delta) || !(self.eta > 0.0) || !(self.c_max > 0.0) {
            return fail(format!(
                "need δ ∈ [0,1), η > 0, c > 0; got δ = {}, η = {}, c = {}",
                self.delta, self.eta, self.c_max
            ));
        }
        if self.p_list.iter().any(|p| !p.is_finite()) {
            return fail("p_list must be finite".into());
        }
        Ok(())
    }

    /// SCF settings.
    pub fn scf(&self) -> ScfConfig {
        ScfConfig { mixing: self.mixing, tol: self.tol, max_iter: self.max_iter, units: self.units.units() }
    }

    /// Canonical text form; `parse(to_text())` reproduces the configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let scheme = match self.scheme {
            GridScheme::Uniform => "uniform",
            GridScheme::LogUniform => "log-uniform",
        };
        let units = match self.units {
            UnitSystem::Reduced => "reduced",
            UnitSystem::Phonon => "phonon",
        };
        let ks: Vec<String> =
            self.k_ladder.iter().map(|k| k.map_or_else(|| "inf".to_string(), |k| format!("{k}"))).collect();
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "r_max = {}", self.r_max);
        let _ = writeln!(s, "scheme = {scheme}");
        let _ = writeln!(s, "units = {units}");
        let _ = writeln!(s, "mixing = {}", self.mixing);
        let _ = writeln!(s, "tol = {:e}", self.tol);
        let _ = writeln!(s, "max_iter = {}", self.max_iter);
        let _ = writeln!(s, "l_max = {}", self.l_max);
        let _ = writeln!(s, "k_ladder = {}", ks.join(","));
        let _ = writeln!(s, "delta = {}", self.delta);
        let _ = writeln!(s, "eta = {}", self.eta);
        let _ = writeln!(s, "alpha_ladder = {}", fmt_list(&self.alpha_ladder));
        let _ = writeln!(s, "p_list = {}", fmt_list(&self.p_list));
        let _ = writeln!(s, "c_max = {}", self.c_max);
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "workers = {}", self.workers);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_text() {
        let mut c = RunConfig::default();
        c.set("k_ladder", "20, 40, inf").unwrap();
        c.set("p_list", "0,2.5").unwrap();
        let back = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.k_ladder, vec![Some(20.0), Some(40.0), None]);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let c = RunConfig::parse("# grid\n\nn = 1000  # nodes\nunits = phonon\n").unwrap();
        assert_eq!(c.n, 1000);
        assert_eq!(c.units, UnitSystem::Phonon);
    }

    #[test]
    fn rejects_invalid_settings() {
        assert!(RunConfig::parse("tol = 0").is_err());
        assert!(RunConfig::parse("l_max = 1").is_err());
        assert!(RunConfig::parse("alpha_ladder = 10, 5").is_err());
        assert!(RunConfig::parse("colour = blue").is_err());
        assert!(RunConfig::parse("n 1000").is_err());
    }
}
