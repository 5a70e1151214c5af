//! The four commands behind the `eitrecon` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::basis::BoundaryBasis;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::forward::{assemble_system, ConductivityField};
use crate::geometry::{validate_ordering, GridShape};
use crate::nd_map::{add_noise, assemble_nd, NdMatrix};
use crate::reconstruction::{PixelStatus, ReconProblem, ReconResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Simulate,
    Reconstruct,
    Msweep,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_BRACKET_CAP: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// What a command prints and the process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub code: i32,
    pub stdout: String,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_INVALID,
    }
}

pub fn execute(command: Command, config: &RunConfig) -> Result<Report> {
    match command {
        Command::Validate => cmd_validate(config),
        Command::Simulate => cmd_simulate(config),
        Command::Reconstruct => cmd_reconstruct(config),
        Command::Msweep => cmd_msweep(config),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn required<'a>(value: &'a Option<std::path::PathBuf>, key: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Config(format!("missing key '{key}'")))
}

pub fn cmd_validate(config: &RunConfig) -> Result<Report> {
    let mut base = config.clone();
    base.order = None;
    let (mesh, partition) = base.build_domain()?;
    let order = match (&config.roi, &config.order) {
        (None, Some(order)) => order.clone(),
        _ => config.ordering(&mesh, &partition)?,
    };
    let report = validate_ordering(&partition, &mesh, &order);
    Ok(Report {
        code: if report.valid { EXIT_OK } else { EXIT_INVALID },
        stdout: format!("{report}\n"),
    })
}

pub fn cmd_simulate(config: &RunConfig) -> Result<Report> {
    let phantom = config
        .phantom
        .as_ref()
        .ok_or_else(|| Error::Config("simulate needs 'phantom'".into()))?;
    let out = required(&config.data, "data")?;
    let (mesh, partition) = config.build_data_domain()?;
    if phantom.len() != partition.pixel_count {
        return Err(Error::Config(format!(
            "phantom has {} values for {} pixels",
            phantom.len(),
            partition.pixel_count
        )));
    }
    let basis = BoundaryBasis::new(&mesh, config.m)?;
    let field = ConductivityField::from_values(phantom)?;
    let system = assemble_system(&mesh, &partition, &field)?;
    let clean = assemble_nd(&system, &basis, config.m)?;
    let noisy = add_noise(&clean, config.noise, config.seed)?;
    noisy.write_file(out)?;
    Ok(Report {
        code: EXIT_OK,
        stdout: format!(
            "wrote {}x{} matrix to {} ({} triangles, noise {}, seed {})\n",
            config.m,
            config.m,
            out.display(),
            mesh.triangles.len(),
            config.noise,
            config.seed
        ),
    })
}

fn read_measured(config: &RunConfig) -> Result<NdMatrix> {
    let measured = NdMatrix::read_file(required(&config.data, "data")?)?;
    if measured.order() != config.m {
        return Err(Error::Data(format!(
            "data file has order {}, config asks for M = {}",
            measured.order(),
            config.m
        )));
    }
    Ok(measured)
}

pub fn cmd_reconstruct(config: &RunConfig) -> Result<Report> {
    let (mesh, partition) = config.build_domain()?;
    let measured = read_measured(config)?;
    let order = config.ordering(&mesh, &partition)?;
    let problem = ReconProblem::new(&mesh, &partition, Some(order), measured, config.settings())?;
    let result = problem.reconstruct()?;

    let mut stdout = String::new();
    match &config.result {
        Some(p) => result.write_file(p)?,
        None => stdout.push_str(&result.to_text()),
    }
    if let Some(p) = &config.raster {
        let grid = partition
            .grid
            .ok_or_else(|| Error::Config("raster output needs a grid domain".into()))?;
        write_text(p, &pgm(&result, grid))?;
    }
    if let Some(p) = &config.csv {
        write_text(p, &pixel_csv(&result, partition.grid))?;
    }
    let code = match result.status {
        PixelStatus::BracketCapHit => EXIT_BRACKET_CAP,
        _ => EXIT_OK,
    };
    let _ = writeln!(stdout, "status {}", result.status);
    Ok(Report { code, stdout })
}

/// Plain graymap, one cell per pixel, top image row = top grid row. Values
/// map linearly from the smallest reconstructed value (0) to the largest
/// (255); pixels outside the sweep are 0.
pub fn pgm(result: &ReconResult, grid: GridShape) -> String {
    let values = result.values();
    let (lo, hi) = values
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut out = format!("P2\n{} {}\n255\n", grid.cols, grid.rows);
    for row in (0..grid.rows).rev() {
        let line: Vec<String> = (0..grid.cols)
            .map(|col| match values[grid.pixel(row, col)] {
                Some(v) if hi > lo => (255.0 * (v - lo) / (hi - lo)).round().to_string(),
                Some(_) => "255".to_string(),
                None => "0".to_string(),
            })
            .collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

/// `pixel,row,col,value`; row and col are empty without a grid.
pub fn pixel_csv(result: &ReconResult, grid: Option<GridShape>) -> String {
    let mut out = String::from("pixel,row,col,value\n");
    for o in &result.outcomes {
        let (row, col) = match grid {
            Some(g) => {
                let (r, c) = g.row_col(o.pixel);
                (r.to_string(), c.to_string())
            }
            None => (String::new(), String::new()),
        };
        let _ = writeln!(out, "{},{},{},{:e}", o.pixel, row, col, o.value);
    }
    out
}

pub fn cmd_msweep(config: &RunConfig) -> Result<Report> {
    let (mesh, partition) = config.build_domain()?;
    let measured = read_measured(config)?;
    let order = config.ordering(&mesh, &partition)?;
    let step = config.sweep_step;
    if step == 0 || step > order.len() {
        return Err(Error::Config(format!("sweep_step {step} outside 1..={}", order.len())));
    }
    if config.sweep_t.is_empty() {
        return Err(Error::Config("msweep needs 'sweep_t'".into()));
    }
    let known: Vec<f64> = match (&config.known, &config.phantom) {
        (Some(k), _) => k.clone(),
        (None, Some(p)) if p.len() == partition.pixel_count => {
            order[..step - 1].iter().map(|&q| p[q]).collect()
        }
        (None, Some(p)) => {
            return Err(Error::Config(format!(
                "phantom has {} values for {} pixels",
                p.len(),
                partition.pixel_count
            )))
        }
        (None, None) if step == 1 => Vec::new(),
        (None, None) => {
            return Err(Error::Config(
                "msweep beyond the first step needs 'known' or 'phantom'".into(),
            ))
        }
    };
    let problem = ReconProblem::new(&mesh, &partition, Some(order), measured, config.settings())?;
    let mut csv = String::from("t,M,lambda_min,threshold,holds\n");
    for &t in &config.sweep_t {
        for row in problem.m_sweep(step, t, &known, &config.sweep_orders)? {
            let _ = writeln!(
                csv,
                "{:e},{},{:e},{:e},{}",
                row.t, row.order, row.lambda_min, row.threshold, row.holds
            );
        }
    }
    let stdout = match &config.sweep_csv {
        Some(p) => {
            write_text(p, &csv)?;
            format!("wrote {}\n", p.display())
        }
        None => csv,
    };
    Ok(Report {
        code: EXIT_OK,
        stdout,
    })
}
