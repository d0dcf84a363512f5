//! TOML experiment configuration.

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use mpbarrier::complex::TorusGrid;
use mpbarrier::fixtures::{hedgehog, vortex_lines, vortex_map, winding_map, Vortex};
use mpbarrier::maps::GridMap;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub grid: GridSection,
    #[serde(default)]
    pub target: TargetKind,
    #[serde(default)]
    pub sweep: Sweep,
    pub fixture: Option<Fixture>,
    /// Second endpoint for path and barrier experiments.
    pub fixture_v: Option<Fixture>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub energy: EnergyOpts,
    #[serde(default)]
    pub balls: BallOpts,
    #[serde(default)]
    pub flatnorm: FlatOpts,
    #[serde(default)]
    pub width: WidthOpts,
    #[serde(default)]
    pub hanglin: HangLinOpts,
    #[serde(default)]
    pub mountainpass: MountainOpts,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    #[default]
    Circle,
    Sphere,
}

impl TargetKind {
    pub fn k(self) -> usize {
        match self {
            TargetKind::Circle => 2,
            TargetKind::Sphere => 3,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default)]
    pub p: Vec<f64>,
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Fixture {
    Constant { angle: f64 },
    Winding { q: Vec<i64> },
    /// Rows `[x, y, degree]`.
    Vortices {
        points: Vec<[f64; 3]>,
        #[serde(default)]
        q: [i64; 2],
    },
    VortexLines { points: Vec<[f64; 3]> },
    Random,
    Hedgehog { center: [f64; 3] },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyOpts {
    /// Maximum allowed max/min spread of `(k - p) E(retracted) / E`.
    pub spread: f64,
    pub refine: usize,
}

impl Default for EnergyOpts {
    fn default() -> Self {
        Self { spread: 4.0, refine: 4 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BallOpts {
    pub sigma0: f64,
}

impl Default for BallOpts {
    fn default() -> Self {
        Self { sigma0: 0.02 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlatOpts {
    pub trials: usize,
    pub max_coef: i64,
    pub points: usize,
}

impl Default for FlatOpts {
    fn default() -> Self {
        Self { trials: 50, max_coef: 2, points: 4 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WidthOpts {
    pub m: usize,
    pub delta: f64,
    pub cap: f64,
    /// Class to sweep out; derived from the two fixtures when empty.
    pub xi: Vec<i64>,
}

impl Default for WidthOpts {
    fn default() -> Self {
        Self { m: 4, delta: 0.3, cap: 4.0, xi: Vec::new() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HangLinOpts {
    pub samples_per_stage: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub swap_order: String,
}

impl Default for HangLinOpts {
    fn default() -> Self {
        Self { samples_per_stage: 4, beta_min: 0.8, beta_max: 1.2, swap_order: "base_axis".into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MountainOpts {
    pub beads: usize,
    pub iters: usize,
    pub delta: f64,
    /// Also compute the delta-sequence barrier (costly on fine grids).
    pub sequence: bool,
    pub tolerance: f64,
}

impl Default for MountainOpts {
    fn default() -> Self {
        Self { beads: 12, iters: 2000, delta: 0.3, sequence: true, tolerance: 0.25 }
    }
}

/// A parsed configuration with its source text and effective seed.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: Config,
    pub text: String,
    pub hash: String,
}

/// Line of `key` inside `[section]`, for diagnostics.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
        } else if current == section && t.split('=').next().map(str::trim) == Some(key) {
            return Some(i + 1);
        }
    }
    None
}

fn field_error(text: &str, section: &str, key: &str, msg: String) -> anyhow::Error {
    match locate(text, section, key) {
        Some(line) => anyhow::anyhow!("config line {line}, field {section}.{key}: {msg}"),
        None => anyhow::anyhow!("config field {section}.{key}: {msg}"),
    }
}

impl Loaded {
    pub fn parse(text: &str, seed: Option<u64>) -> Result<Self> {
        let mut config: Config = toml::from_str(text).context("invalid config")?;
        if let Some(s) = seed {
            config.seed = s;
        }
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        h.update(format!("\nseed={}", config.seed).as_bytes());
        let hash: String = h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect();
        let loaded = Self { config, text: text.to_string(), hash };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn read(path: &std::path::Path, seed: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, seed).with_context(|| format!("in {}", path.display()))
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        let t = &self.text;
        if !(c.grid.n == 2 || c.grid.n == 3) {
            return Err(field_error(t, "grid", "n", format!("{} is not 2 or 3", c.grid.n)));
        }
        if c.grid.m < 3 {
            return Err(field_error(t, "grid", "m", format!("{} < 3", c.grid.m)));
        }
        if c.target == TargetKind::Sphere && c.grid.n != 3 {
            return Err(field_error(t, "target", "kind", "sphere targets need n = 3".into()));
        }
        let k = c.target.k() as f64;
        for (i, &p) in c.sweep.p.iter().enumerate() {
            if !(p > k - 1.0 && p < k) {
                return Err(field_error(t, "sweep", "p", format!("entry {i} = {p} outside ({}, {k})", k - 1.0)));
            }
        }
        for (i, &e) in c.sweep.epsilon.iter().enumerate() {
            if !(e > 0.0) {
                return Err(field_error(t, "sweep", "epsilon", format!("entry {i} = {e} must be positive")));
            }
        }
        for (i, &s) in c.sweep.sigma.iter().enumerate() {
            if !(s > 0.0) {
                return Err(field_error(t, "sweep", "sigma", format!("entry {i} = {s} must be positive")));
            }
        }
        Ok(())
    }

    /// Nonempty list check for fields an experiment needs.
    pub fn require(&self, section: &str, key: &str, len: usize) -> Result<()> {
        if len == 0 {
            return Err(field_error(&self.text, section, key, "list must be nonempty".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        Ok(TorusGrid::unit(self.config.grid.n, self.config.grid.m)?)
    }

    pub fn map_u(&self) -> Result<GridMap> {
        match &self.config.fixture {
            Some(f) => self.build(f, self.config.seed, "fixture"),
            None => bail!("config section [fixture] is required"),
        }
    }

    pub fn map_v(&self) -> Result<GridMap> {
        match &self.config.fixture_v {
            Some(f) => self.build(f, self.config.seed.wrapping_add(1), "fixture_v"),
            None => bail!("config section [fixture_v] is required"),
        }
    }

    fn build(&self, f: &Fixture, seed: u64, section: &str) -> Result<GridMap> {
        let g = self.grid()?;
        let n = g.n();
        let bad = |key: &str, msg: &str| field_error(&self.text, section, key, msg.to_string());
        let sphere = self.config.target == TargetKind::Sphere;
        if sphere && !matches!(f, Fixture::Hedgehog { .. }) {
            return Err(bad("kind", "only the hedgehog fixture is sphere-valued"));
        }
        let vortices = |pts: &[[f64; 3]]| -> Vec<Vortex> {
            pts.iter().map(|p| Vortex::new(p[0], p[1], p[2].round() as i64)).collect()
        };
        Ok(match f {
            Fixture::Constant { angle } => GridMap::constant_circle(g, *angle),
            Fixture::Winding { q } => {
                if q.len() != n {
                    return Err(bad("q", &format!("needs {n} windings")));
                }
                winding_map(g, q)?
            }
            Fixture::Vortices { points, q } => {
                if n != 2 {
                    return Err(bad("kind", "vortices live on T^2"));
                }
                vortex_map(g, &vortices(points), *q).map_err(|e| bad("points", &e.to_string()))?
            }
            Fixture::VortexLines { points } => {
                if n != 3 {
                    return Err(bad("kind", "vortex lines live on T^3"));
                }
                vortex_lines(g, &vortices(points)).map_err(|e| bad("points", &e.to_string()))?
            }
            Fixture::Random => GridMap::random_circle(g, seed),
            Fixture::Hedgehog { center } => {
                if !sphere {
                    return Err(bad("kind", "the hedgehog needs target kind = \"sphere\""));
                }
                hedgehog(g, *center)?
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_names_line_and_field() {
        let text = "[grid]\nn = 2\nm = 8\n\n[sweep]\np = [1.5, 2.5]\n";
        let err = Loaded::parse(text, None).unwrap_err().to_string();
        assert!(err.contains("line 6") && err.contains("sweep.p"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[grid]\nn = 2\nm = 8\nsize = 3\n";
        let err = format!("{:#}", Loaded::parse(text, None).unwrap_err());
        assert!(err.contains("size"), "{err}");
    }

    #[test]
    fn seed_changes_hash() {
        let text = "[grid]\nn = 2\nm = 8\n";
        let a = Loaded::parse(text, Some(1)).unwrap();
        let b = Loaded::parse(text, Some(2)).unwrap();
        assert_ne!(a.hash, b.hash);
        assert_eq!(a.hash, Loaded::parse(text, Some(1)).unwrap().hash);
    }
}
