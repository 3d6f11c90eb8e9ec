//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use statematch::analysis::{AngleParam, FitConfig, ShiftChoice};
use statematch::engine::{phi0_grid, ExperimentPlan};
use statematch::noise::NoiseSpec;
use statematch::CouplingMap;

use crate::presets::Preset;

/// Every setting a command can read. Defaults reproduce the one-iteration
/// benchmark with 50 grid points and 5×2000 shots per point.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub epsilon: f64,
    pub theta0: f64,
    pub phi0: f64,
    pub n_iterations: u32,
    pub phi0_points: usize,
    pub shots: u64,
    pub runs: u32,
    pub device: String,
    pub coupling: Option<CouplingMap>,
    pub layout: Option<Vec<usize>>,
    pub seed: u64,
    pub preset: Option<String>,
    pub dep: Vec<f64>,
    pub gamma: Option<f64>,
    pub damp_all: bool,
    pub alphas: BTreeMap<usize, f64>,
    pub lambdas: BTreeMap<(usize, usize), f64>,
    pub readout: BTreeMap<usize, (f64, f64)>,
    pub fit_shift: ShiftChoice,
    pub fit_bound: f64,
    pub fit_bounds: BTreeMap<AngleParam, f64>,
    pub fit_bounds_from: Option<String>,
    pub fit_refinements: usize,
    /// Key/value pairs as given, for the run manifest.
    pub entries: BTreeMap<String, String>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            epsilon: 0.973,
            theta0: PI / 8.0,
            phi0: 0.0,
            n_iterations: 1,
            phi0_points: 50,
            shots: 2000,
            runs: 5,
            device: "sim".into(),
            coupling: None,
            layout: None,
            seed: 1,
            preset: None,
            dep: Vec::new(),
            gamma: None,
            damp_all: false,
            alphas: BTreeMap::new(),
            lambdas: BTreeMap::new(),
            readout: BTreeMap::new(),
            fit_shift: ShiftChoice::Auto,
            fit_bound: 0.1,
            fit_bounds: BTreeMap::new(),
            fit_bounds_from: None,
            fit_refinements: 5,
            entries: BTreeMap::new(),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| anyhow!("{key}: cannot parse '{v}': {e}"))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("{key}: expected true or false, got '{v}'"),
    }
}

fn pair(key: &str, s: &str) -> Result<(usize, usize)> {
    let (c, t) = s
        .split_once('-')
        .ok_or_else(|| anyhow!("{key}: expected <control>-<target>"))?;
    Ok((num(key, c)?, num(key, t)?))
}

impl Settings {
    /// Parses a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected 'key = value'", i + 1))?;
            let (k, v) = (k.trim(), v.trim());
            if s.entries.contains_key(k) {
                bail!("line {}: duplicate key '{k}'", i + 1);
            }
            s.set(k, v).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "protocol.epsilon" => self.epsilon = num(key, v)?,
            "protocol.theta0" => self.theta0 = num(key, v)?,
            "protocol.phi0" => self.phi0 = num(key, v)?,
            "protocol.n" => self.n_iterations = num(key, v)?,
            "sweep.phi0_points" => self.phi0_points = num(key, v)?,
            "sweep.shots" => self.shots = num(key, v)?,
            "sweep.runs" => self.runs = num(key, v)?,
            "device.label" => {
                if v.is_empty() || v.contains([',', '\n', '"']) {
                    bail!("{key}: label must be non-empty without commas or quotes");
                }
                self.device = v.to_string()
            }
            "device.coupling" => self.coupling = Some(v.parse()?),
            "device.layout" => {
                self.layout = Some(
                    v.split(',')
                        .map(|q| num(key, q.trim()))
                        .collect::<Result<_>>()?,
                )
            }
            "seed" => self.seed = num(key, v)?,
            "noise.preset" => {
                Preset::lookup(v)?;
                self.preset = Some(v.to_string())
            }
            "noise.dep" => self.dep = list(key, v)?,
            "noise.gamma" => self.gamma = Some(num(key, v)?),
            "noise.damp_all" => self.damp_all = flag(key, v)?,
            "fit.shift" => {
                self.fit_shift = match v {
                    "auto" => ShiftChoice::Auto,
                    "dep" => ShiftChoice::Dep,
                    "ad" => ShiftChoice::Ad,
                    _ => bail!("{key}: expected auto, dep or ad, got '{v}'"),
                }
            }
            "fit.bound" => self.fit_bound = num(key, v)?,
            "fit.bounds_from" => {
                Preset::lookup(v)?;
                self.fit_bounds_from = Some(v.to_string())
            }
            "fit.max_refinements" => self.fit_refinements = num(key, v)?,
            _ => {
                if let Some(q) = key.strip_prefix("noise.alpha.") {
                    self.alphas.insert(num(key, q)?, num(key, v)?);
                } else if let Some(p) = key.strip_prefix("noise.lambda.") {
                    self.lambdas.insert(pair(key, p)?, num(key, v)?);
                } else if let Some(q) = key.strip_prefix("noise.readout.") {
                    let vals = list(key, v)?;
                    let [p01, p10] = vals[..] else {
                        bail!("{key}: expected 'p01, p10'");
                    };
                    self.readout.insert(num(key, q)?, (p01, p10));
                } else if let Some(p) = key.strip_prefix("fit.bound.") {
                    let param: AngleParam = p.parse()?;
                    self.fit_bounds.insert(param, num(key, v)?);
                } else {
                    bail!("unknown key '{key}'");
                }
            }
        }
        self.entries.insert(key.to_string(), v.to_string());
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        1usize << self.n_iterations.min(16)
    }

    pub fn plan(&self) -> ExperimentPlan {
        let mut plan = ExperimentPlan::new(
            self.epsilon,
            self.theta0,
            self.n_iterations,
            phi0_grid(self.phi0_points),
            self.shots,
            self.runs,
        );
        plan.device_label = self.device.clone();
        if let Some(c) = &self.coupling {
            plan.coupling = c.clone();
        }
        if let Some(l) = &self.layout {
            plan.layout = l.clone();
        }
        plan
    }

    /// Noise model with the preset (if any) overlaid by explicit keys.
    pub fn noise(&self) -> Result<NoiseSpec> {
        let mut spec = NoiseSpec::ideal();
        if let Some(name) = &self.preset {
            Preset::lookup(name)?.apply(self, &mut spec)?;
        }
        if !self.dep.is_empty() {
            spec.per_step_dep = self.dep.clone();
        }
        if let Some(g) = self.gamma {
            spec.gamma = g;
        }
        spec.damp_all_qubits = self.damp_all;
        spec.alphas.extend(&self.alphas);
        spec.lambdas.extend(&self.lambdas);
        spec.readout.extend(&self.readout);
        spec.validate()?;
        Ok(spec)
    }

    pub fn fit_config(&self) -> Result<FitConfig> {
        let mut bounds = BTreeMap::new();
        if let Some(name) = &self.fit_bounds_from {
            bounds = Preset::lookup(name)?.tolerances(self)?;
        }
        bounds.extend(&self.fit_bounds);
        Ok(FitConfig {
            shift: self.fit_shift,
            default_bound: self.fit_bound,
            bounds,
            coupling: self.coupling.clone(),
            layout: self.layout.clone(),
            max_refinements: self.fit_refinements,
            ..FitConfig::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let s = Settings::parse(
            "# run\nprotocol.epsilon = 0.9\nsweep.phi0_points = 8 # short\nnoise.alpha.0 = 0.01\n\
             noise.lambda.0-1 = -0.02\nnoise.readout.1 = 0.01, 0.03\nfit.bound.alpha.1 = 0.05\n",
        )
        .unwrap();
        assert_eq!(s.epsilon, 0.9);
        assert_eq!(s.phi0_points, 8);
        assert_eq!(s.theta0, PI / 8.0);
        assert_eq!(s.alphas[&0], 0.01);
        assert_eq!(s.lambdas[&(0, 1)], -0.02);
        assert_eq!(s.readout[&1], (0.01, 0.03));
        assert_eq!(s.fit_bounds[&AngleParam::Alpha(1)], 0.05);
        assert_eq!(s.entries.len(), 6);
    }

    #[test]
    fn unknown_and_duplicate_keys_fail() {
        let e = Settings::parse("protocol.epsilom = 0.9\n").unwrap_err();
        assert!(format!("{e:#}").contains("unknown key 'protocol.epsilom'"));
        assert!(format!("{e:#}").contains("line 1"));
        assert!(Settings::parse("seed = 1\nseed = 2\n").is_err());
        assert!(Settings::parse("just words\n").is_err());
        assert!(Settings::parse("noise.readout.0 = 0.1\n").is_err());
        assert!(Settings::parse("fit.shift = maybe\n").is_err());
    }

    #[test]
    fn noise_overlays_preset() {
        let s = Settings::parse("noise.preset = nairobi-n1\nnoise.alpha.0 = 0.0\n").unwrap();
        let spec = s.noise().unwrap();
        assert_eq!(spec.alpha(0), 0.0);
        assert_eq!(spec.alpha(1), 4.45e-2);
        assert_eq!(spec.lambda(0, 1), -1.78e-2);
        assert_eq!(spec.gamma, 1.21e-2);
    }
}
