//! The run specification: everything a command needs, as one JSON-serializable
//! record. Flags build a `RunSpec`, `tndp run --spec file.json` loads one
//! directly, and every output directory gets the resolved spec echoed into
//! `spec.json` so any artifact can be regenerated.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use tndp::citygraph::{
    generate_city, load_city, load_city_json, CityGraph, ProblemParams, SyntheticCityConfig,
    TimeUnit,
};
use tndp::evolve::EaParams;
use tndp::rng::{seed_rng, substream, TAG_CITY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    GenCity,
    Construct,
    Evolve,
    Eval,
    Sweep,
}

/// Where the city instance comes from: a canonical JSON file, a named
/// benchmark preset, a pair of matrix files, or the synthetic generator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CitySource {
    pub city: Option<PathBuf>,
    pub preset: Option<String>,
    pub times: Option<PathBuf>,
    pub demand: Option<PathBuf>,
    /// Unit of the drive-time matrix entries (matrix-file input only).
    pub time_unit: Option<TimeUnit>,
    /// Directory holding `<preset>/travel_times_minutes.txt` and
    /// `<preset>/demand.txt`.
    pub data_dir: Option<PathBuf>,
    /// Synthetic-city generator; used by gen-city and usable as the instance
    /// source for any other command (seeded from the run spec's first seed).
    pub generate: Option<SyntheticCityConfig>,
}

/// Per-instance problem setting overrides. Presets fill in route count and
/// stop bounds; explicit values win over preset values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemOverrides {
    pub routes: Option<usize>,
    pub min_stops: Option<usize>,
    pub max_stops: Option<usize>,
    /// Seconds added per transfer when riding the network.
    pub transfer_penalty: Option<f64>,
    pub beta: Option<f64>,
}

/// Construction policy choice: `uniform`, `demand`, or `table:<path>`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum PolicySpec {
    #[default]
    Uniform,
    Demand,
    Table(PathBuf),
}

impl FromStr for PolicySpec {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PolicySpec::Uniform),
            "demand" => Ok(PolicySpec::Demand),
            other => {
                if let Some(path) = other.strip_prefix("table:") {
                    if path.is_empty() {
                        bail!("table policy needs a path: table:<path>");
                    }
                    Ok(PolicySpec::Table(PathBuf::from(path)))
                } else {
                    bail!("unknown policy '{other}', expected uniform, demand or table:<path>")
                }
            }
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Uniform => write!(f, "uniform"),
            PolicySpec::Demand => write!(f, "demand"),
            PolicySpec::Table(p) => write!(f, "table:{}", p.display()),
        }
    }
}

impl Serialize for PolicySpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PolicySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

fn default_alphas() -> Vec<f64> {
    vec![1.0]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// One fully-specified run of any command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSpec {
    pub command: CommandKind,
    #[serde(default)]
    pub city: CitySource,
    #[serde(default)]
    pub problem: ProblemOverrides,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub ea: EaParams,
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default)]
    pub enforce_connectivity: bool,
    /// Report operator cost as the sum of both driving directions.
    #[serde(default)]
    pub double_co: bool,
    /// When set, reports fleet size C_o / headway and a daily operating cost
    /// of 200 per bus.
    #[serde(default)]
    pub headway_min: Option<f64>,
    /// Network file to evaluate (eval only).
    #[serde(default)]
    pub network: Option<PathBuf>,
    /// Single-file output (gen-city city JSON; optional eval report copy).
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl RunSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading spec file {}", path.display()))?;
        let spec: RunSpec = serde_json::from_str(&text)
            .with_context(|| format!("parsing spec file {}", path.display()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            bail!("at least one alpha is required");
        }
        for &a in &self.alphas {
            if !(0.0..=1.0).contains(&a) {
                bail!("alpha must lie in [0, 1], got {a}");
            }
        }
        if self.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        if let Some(h) = self.headway_min {
            if !(h > 0.0) {
                bail!("headway must be positive, got {h}");
            }
        }
        Ok(())
    }

    /// Loads, generates or reads the city instance plus its resolved problem
    /// parameters (alpha is set per-cell later; this returns it at the first
    /// requested alpha).
    pub fn resolve_city(&self) -> Result<CityGraph> {
        let src = &self.city;
        let chosen = [
            src.city.is_some(),
            src.preset.is_some(),
            src.times.is_some(),
            src.generate.is_some(),
        ]
        .iter()
        .filter(|&&c| c)
        .count();
        if chosen != 1 {
            bail!("exactly one city source is required: --city, --preset, --times/--demand, or a generator config");
        }

        let preset = match src.preset.as_deref() {
            Some(name) => Some(preset_problem(name)?),
            None => None,
        };
        let params = self.resolve_params(preset.map(|(s, mn, mx)| (s, mn, mx)))?;

        if let Some(path) = &src.city {
            return load_city_json(path, params)
                .with_context(|| format!("loading city {}", path.display()));
        }
        if let Some(name) = src.preset.as_deref() {
            let dir = src
                .data_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("data"))
                .join(name);
            let times = dir.join("travel_times_minutes.txt");
            let demand = dir.join("demand.txt");
            if !times.is_file() || !demand.is_file() {
                bail!(
                    "preset '{name}' needs {} and {} (benchmark data not bundled for all presets)",
                    times.display(),
                    demand.display()
                );
            }
            return load_city(&times, &demand, params, TimeUnit::Minutes)
                .with_context(|| format!("loading preset {name}"));
        }
        if let Some(times) = &src.times {
            let demand = src
                .demand
                .as_ref()
                .context("matrix input needs both --times and --demand")?;
            let unit = src.time_unit.unwrap_or(TimeUnit::Minutes);
            return load_city(times, demand, params, unit)
                .with_context(|| format!("loading matrices {}", times.display()));
        }
        let cfg = src.generate.as_ref().unwrap();
        let mut rng = substream(self.seeds[0], &[TAG_CITY]);
        Ok(generate_city(cfg, params, &mut rng)?)
    }

    /// Problem parameters at `alphas[0]`; callers reset alpha per cell.
    pub fn resolve_params(&self, preset: Option<(usize, usize, usize)>) -> Result<ProblemParams> {
        let o = &self.problem;
        let (ps, pmin, pmax) = match preset {
            Some(t) => (Some(t.0), Some(t.1), Some(t.2)),
            None => (None, None, None),
        };
        let routes = o
            .routes
            .or(ps)
            .context("route count is required (--routes or a preset)")?;
        let min_stops = o
            .min_stops
            .or(pmin)
            .context("minimum stops is required (--min-stops or a preset)")?;
        let max_stops = o
            .max_stops
            .or(pmax)
            .context("maximum stops is required (--max-stops or a preset)")?;
        let mut params = ProblemParams::new(routes, min_stops, max_stops);
        if let Some(p) = o.transfer_penalty {
            params.transfer_penalty = p;
        }
        if let Some(b) = o.beta {
            params.beta = b;
        }
        params.alpha = self.alphas[0];
        Ok(params)
    }

    /// Writes the spec itself into the output directory.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("spec.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Route count and stop bounds for the named benchmark instance.
pub fn preset_problem(name: &str) -> Result<(usize, usize, usize)> {
    match name {
        "mandl" => Ok((6, 2, 8)),
        "mumford0" => Ok((12, 2, 15)),
        "mumford1" => Ok((15, 10, 30)),
        "mumford2" => Ok((56, 10, 22)),
        "mumford3" => Ok((60, 12, 25)),
        other => bail!("unknown preset '{other}' (mandl, mumford0, mumford1, mumford2, mumford3)"),
    }
}

/// Deterministic generator entry for gen-city (plain seed, no substream: the
/// city is the entire artifact).
pub fn generate_for_gen_city(cfg: &SyntheticCityConfig, params: ProblemParams, seed: u64) -> Result<CityGraph> {
    let mut rng = seed_rng(seed);
    Ok(generate_city(cfg, params, &mut rng)?)
}
