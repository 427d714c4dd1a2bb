//! Run configuration: flat `key = value` files with `#` comments.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::checkpoint::sha256_hex;
use crate::md::cells::check_geometry;
use crate::md::potential::CUTOFF;
use crate::{Error, Result};

/// Every recognised key, in canonical order.
pub const KEYS: &[&str] = &[
    "density",
    "n",
    "dt",
    "t_rev",
    "sigma_left",
    "sigma_right",
    "a_nd",
    "t_n_nd",
    "gamma_nd",
    "seed",
    "output",
    "threads",
    "equilibration_time",
    "grid",
    "sample_every",
    "forward_checkpoints",
    "diagnostic_every",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub density: f64,
    pub n: usize,
    pub dt: f64,
    pub t_rev: f64,
    /// Standard deviations of the initial Gaussian velocity components.
    pub sigma_left: f64,
    pub sigma_right: f64,
    pub a_nd: f64,
    pub t_n_nd: f64,
    /// Damping rate; `None` derives `a_nd^2 / (2 t_n_nd)`.
    pub gamma_nd: Option<f64>,
    pub seed: u64,
    pub output: PathBuf,
    /// Worker threads; 0 uses the machine default.
    pub threads: usize,
    pub equilibration_time: f64,
    /// Nodes per axis of the kinetic-energy field.
    pub grid: usize,
    /// Steps between profile and mode samples.
    pub sample_every: u64,
    /// Intermediate checkpoints written by the forward stage.
    pub forward_checkpoints: u64,
    /// Samples between factorization diagnostics (0 disables them).
    pub diagnostic_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            density: 0.7,
            n: 16384,
            dt: 0.0025,
            t_rev: 50.0,
            sigma_left: 0.75,
            sigma_right: 0.85,
            a_nd: 1e-4,
            t_n_nd: 0.5863,
            gamma_nd: None,
            seed: 1,
            output: PathBuf::from("run"),
            threads: 0,
            equilibration_time: 10.0,
            grid: 128,
            sample_every: 100,
            forward_checkpoints: 10,
            diagnostic_every: 10,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {key} = {value:?}")))
}

impl RunConfig {
    /// Side of the square box, `sqrt(n / density)`.
    pub fn box_length(&self) -> f64 {
        (self.n as f64 / self.density).sqrt()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma_nd.unwrap_or(self.a_nd * self.a_nd / (2.0 * self.t_n_nd))
    }

    /// Whole steps covering `t` (rounded to nearest).
    pub fn steps_for(&self, t: f64) -> u64 {
        (t / self.dt).round() as u64
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "density" => self.density = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "dt" => self.dt = parse(key, value)?,
            "t_rev" => self.t_rev = parse(key, value)?,
            "sigma_left" => self.sigma_left = parse(key, value)?,
            "sigma_right" => self.sigma_right = parse(key, value)?,
            "a_nd" => self.a_nd = parse(key, value)?,
            "t_n_nd" => self.t_n_nd = parse(key, value)?,
            "gamma_nd" => {
                self.gamma_nd = if value == "derived" { None } else { Some(parse(key, value)?) };
            }
            "seed" => self.seed = parse(key, value)?,
            "output" => self.output = PathBuf::from(value),
            "threads" => self.threads = parse(key, value)?,
            "equilibration_time" => self.equilibration_time = parse(key, value)?,
            "grid" => self.grid = parse(key, value)?,
            "sample_every" => self.sample_every = parse(key, value)?,
            "forward_checkpoints" => self.forward_checkpoints = parse(key, value)?,
            "diagnostic_every" => self.diagnostic_every = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Defaults overridden by the lines of `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", no + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn value(&self, key: &str) -> Option<String> {
        Some(match key {
            "density" => self.density.to_string(),
            "n" => self.n.to_string(),
            "dt" => self.dt.to_string(),
            "t_rev" => self.t_rev.to_string(),
            "sigma_left" => self.sigma_left.to_string(),
            "sigma_right" => self.sigma_right.to_string(),
            "a_nd" => self.a_nd.to_string(),
            "t_n_nd" => self.t_n_nd.to_string(),
            "gamma_nd" => self.gamma_nd.map_or("derived".to_string(), |g| g.to_string()),
            "seed" => self.seed.to_string(),
            "output" => self.output.display().to_string(),
            "threads" => self.threads.to_string(),
            "equilibration_time" => self.equilibration_time.to_string(),
            "grid" => self.grid.to_string(),
            "sample_every" => self.sample_every.to_string(),
            "forward_checkpoints" => self.forward_checkpoints.to_string(),
            "diagnostic_every" => self.diagnostic_every.to_string(),
            _ => return None,
        })
    }

    /// All keys in canonical order; floats use the shortest exact form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            let _ = writeln!(s, "{key} = {}", self.value(key).unwrap_or_default());
        }
        s
    }

    /// Hash of the physics: every key except `output` and `threads`, which
    /// do not change results.
    pub fn hash(&self) -> String {
        let text: String = self
            .to_text()
            .lines()
            .filter(|l| !l.starts_with("output ") && !l.starts_with("threads "))
            .map(|l| format!("{l}\n"))
            .collect();
        sha256_hex(text.as_bytes())[..16].to_string()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("density", self.density),
            ("dt", self.dt),
            ("t_rev", self.t_rev),
            ("sigma_left", self.sigma_left),
            ("sigma_right", self.sigma_right),
            ("t_n_nd", self.t_n_nd),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k} must be positive, got {v}")));
            }
        }
        for (k, v) in [("a_nd", self.a_nd), ("equilibration_time", self.equilibration_time)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k} must be non-negative, got {v}")));
            }
        }
        if let Some(g) = self.gamma_nd {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("gamma_nd must be non-negative, got {g}")));
            }
        }
        if self.n < 4 || self.n % 2 != 0 {
            return Err(Error::Config(format!("n must be even and at least 4, got {}", self.n)));
        }
        let l = self.box_length();
        check_geometry([0.5 * l, l], CUTOFF)
            .map_err(|_| Error::Config(format!("box {l:.3} too small: each half must exceed {}", 2.0 * CUTOFF)))?;
        if self.grid < 2 {
            return Err(Error::Config("grid must be at least 2".into()));
        }
        if self.sample_every == 0 {
            return Err(Error::Config("sample_every must be positive".into()));
        }
        if self.steps_for(self.t_rev) == 0 {
            return Err(Error::Config("t_rev is shorter than one step".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_derived_values() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert!((c.box_length() - (16384.0f64 / 0.7).sqrt()).abs() < 1e-12);
        assert!((c.gamma() - 1e-8 / (2.0 * 0.5863)).abs() < 1e-24);
        assert_eq!(c.steps_for(c.t_rev), 20000);
    }

    #[test]
    fn parse_overrides_and_comments() {
        let c = RunConfig::parse("# header\nn = 1024  # small\n\ndt=0.005\ngamma_nd = 0.25\n").unwrap();
        assert_eq!(c.n, 1024);
        assert_eq!(c.dt, 0.005);
        assert_eq!(c.gamma(), 0.25);
    }

    #[test]
    fn unknown_duplicate_and_bad_lines_fail() {
        assert!(matches!(RunConfig::parse("colour = red"), Err(Error::Config(_))));
        assert!(RunConfig::parse("n = 100\nn = 200").is_err());
        assert!(RunConfig::parse("n 100").is_err());
        assert!(RunConfig::parse("n = many").is_err());
        assert!(RunConfig::parse("n = 1001").is_err());
        assert!(RunConfig::parse("dt = -1").is_err());
        assert!(RunConfig::parse("n = 20").is_err());
    }

    #[test]
    fn text_round_trips() {
        let mut c = RunConfig::default();
        c.set("a_nd", "3.0000000000000004e-5").unwrap();
        c.set("output", "/tmp/x y").unwrap();
        let back = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn hash_ignores_output_and_threads() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output = "elsewhere".into();
        b.threads = 3;
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }
}
