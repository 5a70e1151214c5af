//! Galerkin matrices of Neumann-to-Dirichlet maps in the boundary basis,
//! synthetic noise and the plain-text matrix format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::basis::BoundaryBasis;
use crate::error::{Error, Result};
use crate::forward::{solve_neumann, LinearSystem};

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub description: String,
    pub refinement_level: u32,
    pub noise_level: f64,
    pub seed: u64,
}

/// Symmetric M×M matrix `A_ij = ⟨Λ g_j, g_i⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct NdMatrix {
    pub matrix: DMatrix<f64>,
    pub provenance: Provenance,
}

impl NdMatrix {
    pub fn new(matrix: DMatrix<f64>, provenance: Provenance) -> Result<NdMatrix> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::Data(format!(
                "measurement matrix must be square and nonempty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data("measurement matrix has non-finite entries".into()));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        Ok(NdMatrix {
            matrix: sym,
            provenance,
        })
    }

    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }

    /// Leading `m`×`m` block: the compression onto `span{g_1..g_m}`.
    pub fn truncate(&self, m: usize) -> Result<NdMatrix> {
        if m == 0 || m > self.order() {
            return Err(Error::Data(format!(
                "cannot truncate order {} to {m}",
                self.order()
            )));
        }
        Ok(NdMatrix {
            matrix: self.matrix.view((0, 0), (m, m)).into_owned(),
            provenance: self.provenance.clone(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// `ndmatrix <M> <noise> <seed>` followed by M rows of 17 significant digits.
    pub fn to_text(&self) -> String {
        let m = self.order();
        let mut out = format!(
            "ndmatrix {} {} {}\n",
            m, self.provenance.noise_level, self.provenance.seed
        );
        for i in 0..m {
            let row: Vec<String> = (0..m).map(|j| format!("{:.16e}", self.matrix[(i, j)])).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str, description: &str) -> Result<NdMatrix> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Data("empty measurement file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "ndmatrix" {
            return Err(Error::Data(format!("bad header '{header}'")));
        }
        let m: usize = h[1]
            .parse()
            .map_err(|_| Error::Data(format!("bad order '{}'", h[1])))?;
        let noise_level: f64 = h[2]
            .parse()
            .map_err(|_| Error::Data(format!("bad noise level '{}'", h[2])))?;
        let seed: u64 = h[3]
            .parse()
            .map_err(|_| Error::Data(format!("bad seed '{}'", h[3])))?;
        let mut values = Vec::with_capacity(m * m);
        for (i, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Data(format!("row {} has a malformed number", i + 1)))?;
            if row.len() != m {
                return Err(Error::Data(format!("row {} has {} entries, expected {m}", i + 1, row.len())));
            }
            values.extend(row);
        }
        if values.len() != m * m {
            return Err(Error::Data(format!("expected {m} rows")));
        }
        NdMatrix::new(
            DMatrix::from_row_slice(m, m, &values),
            Provenance {
                description: description.to_string(),
                refinement_level: 0,
                noise_level,
                seed,
            },
        )
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn read_file(path: &Path) -> Result<NdMatrix> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        NdMatrix::from_text(&text, &format!("file:{}", path.display()))
    }
}

/// Galerkin ND matrix of order `m` for an assembled system. Columns are
/// independent solves and run in parallel.
pub fn assemble_nd(system: &LinearSystem<'_>, basis: &BoundaryBasis, m: usize) -> Result<NdMatrix> {
    if m == 0 || m > basis.m_max {
        return Err(Error::Basis(format!(
            "order {m} outside basis capacity 1..={}",
            basis.m_max
        )));
    }
    let columns: Vec<Vec<f64>> = (1..=m)
        .into_par_iter()
        .map(|j| {
            let mut f = vec![0.0; j];
            f[j - 1] = 1.0;
            let sol = solve_neumann(system, basis, &f)?;
            Ok((1..=m)
                .map(|i| basis.trace_coefficient(i, &sol.nodal))
                .collect())
        })
        .collect::<Result<_>>()?;
    let matrix = DMatrix::from_fn(m, m, |i, j| columns[j][i]);
    NdMatrix::new(
        matrix,
        Provenance {
            description: system.field().describe(),
            refinement_level: system.mesh.refinement_level,
            noise_level: 0.0,
            seed: 0,
        },
    )
}

/// `A + level·‖A‖_F·S/‖S‖_F` with `S = E + Eᵀ`, `E` standard normal from the
/// seeded generator.
pub fn add_noise(a: &NdMatrix, level: f64, seed: u64) -> Result<NdMatrix> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::Config(format!("noise level {level} must be nonnegative")));
    }
    let mut out = a.clone();
    out.provenance.noise_level = level;
    out.provenance.seed = seed;
    if level == 0.0 {
        return Ok(out);
    }
    let m = a.order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = DMatrix::from_fn(m, m, |_, _| StandardNormal.sample(&mut rng));
    let s: DMatrix<f64> = &e + e.transpose();
    let scale = level * a.frobenius_norm() / s.norm();
    out.matrix = &a.matrix + s * scale;
    Ok(out)
}
