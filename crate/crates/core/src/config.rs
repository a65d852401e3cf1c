//! Run configuration: a flat `key = value` file plus overrides.
//!
//! Blank lines and lines starting with `#` are ignored. Recognized keys:
//!
//! ```text
//! scenario, preset, integrator, epsilon, collision, nu, n_theta,
//! k, levels, m, h0, cfl, dt, weno_k, cells, velocities, extent, end_time,
//! snapshots, out
//! ```
//!
//! `k` is the number of inner steps per projective level, `weno_k` the WENO
//! stencil parameter, `m` a comma separated list of extrapolation factors and
//! `cells` either `N` or `NxM`.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bgk::FrequencyMode;
use crate::error::{Error, Result};
use crate::scenario::{parse_frequency, CollisionKind, IntegratorKind, Preset};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: String,
    pub preset: Preset,
    pub integrator: Option<IntegratorKind>,
    pub epsilon: Option<f64>,
    pub collision: Option<CollisionKind>,
    pub nu: Option<FrequencyMode<f64>>,
    pub n_theta: Option<usize>,
    pub k: Option<usize>,
    pub levels: Option<usize>,
    pub m: Option<Vec<f64>>,
    pub h0: Option<f64>,
    pub cfl: Option<f64>,
    pub dt: Option<f64>,
    pub weno_k: Option<usize>,
    pub cells: Option<[usize; 2]>,
    pub velocities: Option<usize>,
    pub extent: Option<f64>,
    pub end_time: Option<f64>,
    pub snapshots: Option<usize>,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(scenario: impl Into<String>) -> Self {
        Self {
            scenario: scenario.into(),
            preset: Preset::Desk,
            integrator: None,
            epsilon: None,
            collision: None,
            nu: None,
            n_theta: None,
            k: None,
            levels: None,
            m: None,
            h0: None,
            cfl: None,
            dt: None,
            weno_k: None,
            cells: None,
            velocities: None,
            extent: None,
            end_time: None,
            snapshots: None,
            out: PathBuf::from("out"),
        }
    }

    /// Parses a configuration file. `scenario` must be present.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::new("");
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{line}'", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip(e))))?;
        }
        if cfg.scenario.is_empty() {
            return Err(Error::Config("configuration does not name a scenario".into()));
        }
        Ok(cfg)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scenario" => self.scenario = value.to_string(),
            "preset" => self.preset = value.parse()?,
            "integrator" => self.integrator = Some(value.parse()?),
            "epsilon" => self.epsilon = Some(positive(key, value)?),
            "collision" => self.collision = Some(value.parse()?),
            "nu" => self.nu = Some(parse_frequency(value)?),
            "n_theta" => self.n_theta = Some(count(key, value)?),
            "k" => self.k = Some(number(key, value)?),
            "levels" => self.levels = Some(number(key, value)?),
            "m" => {
                let m = value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Config(format!("m must be a comma separated list of numbers, got '{value}'")))?;
                self.m = Some(m);
            }
            "h0" => self.h0 = Some(positive(key, value)?),
            "cfl" => self.cfl = Some(positive(key, value)?),
            "dt" => self.dt = Some(positive(key, value)?),
            "weno_k" => self.weno_k = Some(count(key, value)?),
            "cells" => {
                let parts: Vec<&str> = value.split('x').collect();
                let c = match parts.as_slice() {
                    [a] => [count(key, a)?, 1],
                    [a, b] => [count(key, a)?, count(key, b)?],
                    _ => return Err(Error::Config(format!("cells must be N or NxM, got '{value}'"))),
                };
                self.cells = Some(c);
            }
            "velocities" => self.velocities = Some(count(key, value)?),
            "extent" => self.extent = Some(positive(key, value)?),
            "end_time" => {
                let t: f64 = parse(key, value)?;
                if !(t >= 0.0) || !t.is_finite() {
                    return Err(Error::Config(format!("end_time must be non-negative, got {value}")));
                }
                self.end_time = Some(t);
            }
            "snapshots" => {
                let n = count(key, value)?;
                if n < 2 {
                    return Err(Error::Config("snapshots must be at least 2".into()));
                }
                self.snapshots = Some(n);
            }
            "out" => self.out = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override string.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{spec}' is not key=value")))?;
        self.set(k.trim(), v.trim())
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(s) => s,
        other => other.to_string(),
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

fn number(key: &str, value: &str) -> Result<usize> {
    parse(key, value)
}

fn count(key: &str, value: &str) -> Result<usize> {
    let n: usize = parse(key, value)?;
    if n == 0 {
        return Err(Error::Config(format!("{key} must be positive")));
    }
    Ok(n)
}

fn positive(key: &str, value: &str) -> Result<f64> {
    let x: f64 = parse(key, value)?;
    if !(x > 0.0) {
        return Err(Error::Config(format!("{key} must be positive, got {value}")));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_file() {
        let cfg = RunConfig::parse(
            "# sod\nscenario = sod_1d1d\nintegrator=rk4\nepsilon = 0.1\nnu = rho\nm = 14.24, 11.83\ncells = 50x20\n\nout = /tmp/x\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario, "sod_1d1d");
        assert_eq!(cfg.integrator, Some(IntegratorKind::Rk4));
        assert_eq!(cfg.epsilon, Some(0.1));
        assert_eq!(cfg.nu, Some(FrequencyMode::Density));
        assert_eq!(cfg.m, Some(vec![14.24, 11.83]));
        assert_eq!(cfg.cells, Some([50, 20]));
        assert_eq!(cfg.out, PathBuf::from("/tmp/x"));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("integrator = rk4\n").is_err());
        assert!(RunConfig::parse("scenario = a\nbogus = 1\n").is_err());
        assert!(RunConfig::parse("scenario = a\nepsilon = -1\n").is_err());
        assert!(RunConfig::parse("scenario = a\nno equals sign\n").is_err());
        let e = RunConfig::parse("scenario = a\n\ncells = 0\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn overrides_replace_values() {
        let mut cfg = RunConfig::parse("scenario = sod_1d1d\nk = 2\n").unwrap();
        cfg.apply_override("k=6").unwrap();
        cfg.apply_override("end_time = 0").unwrap();
        assert_eq!(cfg.k, Some(6));
        assert_eq!(cfg.end_time, Some(0.0));
        assert!(cfg.apply_override("k").is_err());
    }
}
