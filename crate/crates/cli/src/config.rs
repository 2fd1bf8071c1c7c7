//! Run configuration assembled from flags and config files.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use lightcone_core::blaschke::PairThresholds;
use lightcone_core::detectors::Thresholds;
use lightcone_core::pseudo_linear::EPS_NULL;
use lightcone_core::{catalog_chart, parse_chart, Grid, PairConfig, SurfaceChart};

use crate::json::Json;

/// Tolerance names accepted by `--tol`, with defaults.
pub const TOLERANCES: [(&str, f64); 10] = [
    ("normalization", 1e-10),
    ("structure", 1e-8),
    ("integrability", 1e-7),
    ("zero", 1e-6),
    ("umbilic", 1e-9),
    ("tau", 1e-6),
    ("tau_fixed", 1e-6),
    ("h", 1e-7),
    ("compatibility", 1e-6),
    ("causal", EPS_NULL),
];

pub const DEFAULT_GRID: usize = 20;
/// Fraction of each side trimmed off the chart domain when no `--rect` is given.
pub const DEFAULT_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone)]
pub struct Tolerances(BTreeMap<&'static str, f64>);

impl Tolerances {
    pub fn parse(overrides: &[String]) -> Result<Self> {
        let mut map: BTreeMap<&'static str, f64> = TOLERANCES.iter().copied().collect();
        for item in overrides {
            let (name, value) = item
                .split_once('=')
                .with_context(|| format!("tolerance `{item}` is not name=value"))?;
            let Some((&key, _)) = map.iter().find(|(k, _)| **k == name.trim()) else {
                let known: Vec<&str> = TOLERANCES.iter().map(|(k, _)| *k).collect();
                bail!("unknown tolerance `{}` (known: {})", name.trim(), known.join(", "));
            };
            let v: f64 = value.trim().parse().with_context(|| format!("tolerance `{item}`"))?;
            if !(v.is_finite() && v > 0.0) {
                bail!("tolerance `{item}` must be positive");
            }
            map.insert(key, v);
        }
        Ok(Self(map))
    }

    pub fn get(&self, name: &str) -> f64 {
        self.0[name]
    }

    pub fn detector(&self) -> Thresholds {
        Thresholds {
            zero: self.get("zero"),
            umbilic: self.get("umbilic"),
        }
    }

    pub fn pair(&self) -> PairThresholds {
        PairThresholds {
            tau: self.get("tau"),
            tau_fixed: self.get("tau_fixed"),
            umbilic: self.get("umbilic"),
        }
    }

    pub fn to_json(&self) -> Json {
        let mut j = Json::obj();
        for (k, v) in &self.0 {
            j.push(k, *v);
        }
        j
    }
}

/// Command-specific parameters given on the command line.
#[derive(Debug, Clone, Default)]
pub struct PairFlags {
    pub theta: Option<f64>,
    pub init: Option<Vec<f64>>,
    pub point: Option<Vec<f64>>,
    pub sign: Option<i8>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub chart: SurfaceChart,
    pub pair: PairConfig,
    pub flags: PairFlags,
    pub grid: Grid,
    pub order: usize,
    pub tol: Tolerances,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn echo(&self) -> Json {
        Json::obj()
            .with("chart", self.chart.to_config_text())
            .with("order", self.order)
            .with("tolerances", self.tol.to_json())
    }

    pub fn grid_json(&self) -> Json {
        let g = &self.grid;
        Json::obj()
            .with("nu", g.nu)
            .with("nv", g.nv)
            .with("rect", &g.rect[..])
    }
}

/// Load the chart and pair tables from `--config` or `--chart`.
pub fn load_chart(config: Option<&PathBuf>, name: Option<&str>) -> Result<(SurfaceChart, PairConfig)> {
    match (config, name) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let chart = parse_chart(&text).with_context(|| format!("in {}", path.display()))?;
            let pair = PairConfig::parse(&text).with_context(|| format!("in {}", path.display()))?;
            Ok((chart, pair))
        }
        (None, Some(name)) => Ok((catalog_chart(name)?, PairConfig::default())),
        (Some(_), Some(_)) => bail!("give either --config or --chart, not both"),
        (None, None) => bail!("a chart is required: --config PATH or --chart NAME"),
    }
}

/// `NUxNV`
pub fn parse_grid(text: &str) -> Result<(usize, usize)> {
    let (a, b) = text
        .split_once(['x', 'X'])
        .with_context(|| format!("grid `{text}` is not NUxNV"))?;
    let nu: usize = a.trim().parse().with_context(|| format!("grid `{text}`"))?;
    let nv: usize = b.trim().parse().with_context(|| format!("grid `{text}`"))?;
    if nu < 4 || nv < 4 {
        bail!("grid `{text}`: need at least 4 points per direction");
    }
    Ok((nu, nv))
}

/// Comma-separated floats.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("`{s}` in `{text}` is not a number")))
        .collect()
}

pub fn parse_rect(text: &str) -> Result<[f64; 4]> {
    let v = parse_list(text)?;
    let r: [f64; 4] = v
        .try_into()
        .map_err(|_| anyhow::anyhow!("rect `{text}` needs four values u0,u1,v0,v1"))?;
    Ok(r)
}

pub fn build_grid(chart: &SurfaceChart, dims: (usize, usize), rect: Option<[f64; 4]>) -> Result<Grid> {
    let grid = match rect {
        Some(r) => {
            for (u, v) in [(r[0], r[2]), (r[1], r[3])] {
                if !chart.contains(u, v) {
                    bail!("rect corner ({u}, {v}) lies outside the chart domain {:?}", chart.domain);
                }
            }
            Grid::new(dims.0, dims.1, r)?
        }
        None => Grid::interior(chart.domain, dims.0, dims.1, DEFAULT_MARGIN)?,
    };
    Ok(grid)
}
