//! Run configuration: flat `key = value` lines, `#` comments, comma-separated
//! lists. Relative paths are resolved against the directory of the config
//! file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{build_structured_mesh, refine_mesh, roi_order, Mesh, Partition, Side};
use crate::reconstruction::{ReconSettings, TestVariant};

const KEYS: &[&str] = &[
    "rows",
    "cols",
    "h",
    "gamma",
    "mesh",
    "order",
    "roi",
    "phantom",
    "M",
    "variant",
    "tol_loewner",
    "tol_bisect",
    "bracket_lo",
    "bracket_hi",
    "warm_start",
    "noise",
    "seed",
    "data_refinement",
    "data",
    "result",
    "raster",
    "csv",
    "sweep_step",
    "sweep_t",
    "sweep_M",
    "known",
    "sweep_csv",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Grid {
        rows: usize,
        cols: usize,
        h: f64,
        gamma: Vec<Side>,
    },
    MeshFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: Domain,
    pub order: Option<Vec<usize>>,
    pub roi: Option<Vec<usize>>,
    pub phantom: Option<Vec<f64>>,
    pub m: usize,
    pub variant: TestVariant,
    pub tol_loewner: Option<f64>,
    pub tol_bisect: f64,
    pub bracket_cap: (f64, f64),
    pub warm_start: bool,
    pub noise: f64,
    pub seed: u64,
    pub data_refinement: u32,
    /// Measurement file: written by `simulate`, read by `reconstruct` and `msweep`.
    pub data: Option<PathBuf>,
    pub result: Option<PathBuf>,
    pub raster: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    /// 1-based step of the ordering probed by `msweep`.
    pub sweep_step: usize,
    pub sweep_t: Vec<f64>,
    pub sweep_orders: Vec<usize>,
    /// Values on the earlier ordered pixels for `msweep`; defaults to the phantom.
    pub known: Option<Vec<f64>>,
    pub sweep_csv: Option<PathBuf>,
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{raw}' for '{key}'")))
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

/// Parses `0.04` or a fraction such as `1/24`.
fn parse_length(key: &str, raw: &str) -> Result<f64> {
    let v = match raw.split_once('/') {
        Some((a, b)) => parse_value::<f64>(key, a)? / parse_value::<f64>(key, b)?,
        None => parse_value(key, raw)?,
    };
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Config(format!("'{key}' must be positive, got '{raw}'")));
    }
    Ok(v)
}

fn parse_bool(key: &str, raw: &str) -> Result<bool> {
    match raw.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean '{raw}' for '{key}'"))),
    }
}

/// Splits `key = value` text into a map. Later lines override earlier ones.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        insert_pair(&mut map, k, v)?;
    }
    Ok(map)
}

fn insert_pair(map: &mut BTreeMap<String, String>, key: &str, value: &str) -> Result<()> {
    let key = key.trim();
    if !KEYS.contains(&key) {
        return Err(Error::Config(format!("unknown key '{key}'")));
    }
    map.insert(key.to_string(), value.trim().to_string());
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        RunConfig::from_text(&text, overrides, base)
    }

    /// `overrides` are `key=value` strings applied after the file.
    pub fn from_text(text: &str, overrides: &[String], base: &Path) -> Result<RunConfig> {
        let mut map = parse_pairs(text)?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            insert_pair(&mut map, k, v)?;
        }
        RunConfig::from_map(&map, base)
    }

    fn from_map(map: &BTreeMap<String, String>, base: &Path) -> Result<RunConfig> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let path = |k: &str| {
            get(k).map(|v| {
                let p = PathBuf::from(v);
                if p.is_absolute() {
                    p
                } else {
                    base.join(p)
                }
            })
        };

        let domain = match path("mesh") {
            Some(p) => {
                if ["rows", "cols", "h", "gamma"].iter().any(|k| map.contains_key(*k)) {
                    return Err(Error::Config(
                        "give either 'mesh' or the grid keys rows/cols/h/gamma, not both".into(),
                    ));
                }
                Domain::MeshFile(p)
            }
            None => {
                let need = |k: &str| {
                    get(k).ok_or_else(|| Error::Config(format!("missing key '{k}'")))
                };
                let gamma = need("gamma")?
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(Side::parse)
                    .collect::<Result<Vec<_>>>()?;
                Domain::Grid {
                    rows: parse_value("rows", need("rows")?)?,
                    cols: parse_value("cols", need("cols")?)?,
                    h: parse_length("h", need("h")?)?,
                    gamma,
                }
            }
        };

        let m: usize = match get("M") {
            Some(v) => parse_value("M", v)?,
            None => return Err(Error::Config("missing key 'M'".into())),
        };
        if m == 0 {
            return Err(Error::Config("M must be at least 1".into()));
        }
        let phantom: Option<Vec<f64>> = get("phantom").map(|v| parse_list("phantom", v)).transpose()?;
        if let Some(p) = &phantom {
            if p.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::Config("phantom values must be positive and finite".into()));
            }
        }
        let noise: f64 = get("noise").map(|v| parse_value("noise", v)).transpose()?.unwrap_or(0.0);
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::Config(format!("noise must be nonnegative, got {noise}")));
        }
        let data_refinement: i64 = get("data_refinement")
            .map(|v| parse_value("data_refinement", v))
            .transpose()?
            .unwrap_or(1);
        if data_refinement < 0 {
            return Err(Error::Config("data_refinement must be nonnegative".into()));
        }
        let defaults = ReconSettings::default();
        let opt_f64 = |k: &str| get(k).map(|v| parse_value::<f64>(k, v)).transpose();
        let sweep_orders: Vec<usize> = get("sweep_M")
            .map(|v| parse_list("sweep_M", v))
            .transpose()?
            .unwrap_or_else(|| (1..=m).collect());
        Ok(RunConfig {
            domain,
            order: get("order").map(|v| parse_list("order", v)).transpose()?,
            roi: get("roi").map(|v| parse_list("roi", v)).transpose()?,
            phantom,
            m,
            variant: get("variant")
                .map(|v| v.parse())
                .transpose()?
                .unwrap_or(defaults.variant),
            tol_loewner: opt_f64("tol_loewner")?,
            tol_bisect: opt_f64("tol_bisect")?.unwrap_or(defaults.tol_bisect),
            bracket_cap: (
                opt_f64("bracket_lo")?.unwrap_or(defaults.bracket_cap.0),
                opt_f64("bracket_hi")?.unwrap_or(defaults.bracket_cap.1),
            ),
            warm_start: get("warm_start")
                .map(|v| parse_bool("warm_start", v))
                .transpose()?
                .unwrap_or(defaults.warm_start),
            noise,
            seed: get("seed").map(|v| parse_value("seed", v)).transpose()?.unwrap_or(0),
            data_refinement: data_refinement as u32,
            data: path("data"),
            result: path("result"),
            raster: path("raster"),
            csv: path("csv"),
            sweep_step: get("sweep_step")
                .map(|v| parse_value("sweep_step", v))
                .transpose()?
                .unwrap_or(1),
            sweep_t: get("sweep_t").map(|v| parse_list("sweep_t", v)).transpose()?.unwrap_or_default(),
            sweep_orders,
            known: get("known").map(|v| parse_list("known", v)).transpose()?,
            sweep_csv: path("sweep_csv"),
        })
    }

    pub fn settings(&self) -> ReconSettings {
        ReconSettings {
            variant: self.variant,
            tol_loewner: self.tol_loewner,
            tol_bisect: self.tol_bisect,
            bracket_cap: self.bracket_cap,
            warm_start: self.warm_start,
            ..ReconSettings::default()
        }
    }

    /// Reconstruction mesh and partition, with the configured ordering.
    pub fn build_domain(&self) -> Result<(Mesh, Partition)> {
        let (mesh, partition) = match &self.domain {
            Domain::Grid { rows, cols, h, gamma } => build_structured_mesh(*rows, *cols, *h, gamma)?,
            Domain::MeshFile(p) => Mesh::read_file(p)?,
        };
        let partition = match &self.order {
            Some(order) => partition.with_order(&mesh, order.clone())?,
            None => partition,
        };
        Ok((mesh, partition))
    }

    /// The reconstruction mesh refined `data_refinement` times.
    pub fn build_data_domain(&self) -> Result<(Mesh, Partition)> {
        let (mut mesh, mut partition) = self.build_domain()?;
        for _ in 0..self.data_refinement {
            let (m, p) = refine_mesh(&mesh, &partition)?;
            mesh = m;
            partition = p;
        }
        Ok((mesh, partition))
    }

    /// The ordering to reconstruct: the ROI path when a ROI is given.
    pub fn ordering(&self, mesh: &Mesh, partition: &Partition) -> Result<Vec<usize>> {
        match &self.roi {
            Some(roi) => roi_order(partition, mesh, roi),
            None => Ok(partition.order.clone()),
        }
    }
}
