//! P1 finite element solver for the Neumann conductivity problem with
//! piecewise constant coefficients.
//!
//! Perfectly insulating pixels are removed from the mesh; each connected
//! group of perfectly conducting triangles shares a single potential. The
//! remaining kernel (constants) is removed by pinning one degree of freedom
//! and shifting the result to zero mean on Γ.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use sprs::{CsMat, FillInReduction, SymmetryCheck, TriMat};
use sprs_ldl::{Ldl, LdlNumeric};

use crate::basis::BoundaryBasis;
use crate::error::{Error, Result};
use crate::geometry::{Mesh, Partition};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PixelConductivity {
    Finite(f64),
    Insulating,
    Conducting,
}

impl fmt::Display for PixelConductivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PixelConductivity::Finite(v) => write!(f, "{v}"),
            PixelConductivity::Insulating => write!(f, "0"),
            PixelConductivity::Conducting => write!(f, "inf"),
        }
    }
}

/// One conductivity entry per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField {
    values: Vec<PixelConductivity>,
}

impl ConductivityField {
    pub fn new(values: Vec<PixelConductivity>) -> Result<ConductivityField> {
        for (p, v) in values.iter().enumerate() {
            if let PixelConductivity::Finite(x) = v {
                if !(x.is_finite() && *x > 0.0) {
                    return Err(Error::Model(format!(
                        "pixel {p}: conductivity {x} must be positive and finite"
                    )));
                }
            }
        }
        Ok(ConductivityField { values })
    }

    pub fn from_values(values: &[f64]) -> Result<ConductivityField> {
        ConductivityField::new(values.iter().map(|&v| PixelConductivity::Finite(v)).collect())
    }

    pub fn uniform(pixels: usize, value: f64) -> Result<ConductivityField> {
        ConductivityField::from_values(&vec![value; pixels])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, pixel: usize) -> PixelConductivity {
        self.values[pixel]
    }

    pub fn set(&mut self, pixel: usize, value: PixelConductivity) {
        self.values[pixel] = value;
    }

    pub fn values(&self) -> &[PixelConductivity] {
        &self.values
    }

    /// Multiplies every finite value by `c`.
    pub fn scaled(&self, c: f64) -> Result<ConductivityField> {
        ConductivityField::new(
            self.values
                .iter()
                .map(|v| match v {
                    PixelConductivity::Finite(x) => PixelConductivity::Finite(c * x),
                    other => *other,
                })
                .collect(),
        )
    }

    pub fn describe(&self) -> String {
        let parts: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        format!("sigma=[{}]", parts.join(","))
    }
}

/// Assembled and factorized stiffness system for one conductivity.
pub struct LinearSystem<'a> {
    pub mesh: &'a Mesh,
    pub partition: &'a Partition,
    field: ConductivityField,
    node_dof: Vec<Option<usize>>,
    dof_count: usize,
    stiffness: CsMat<f64>,
    pinned: usize,
    factor: LdlNumeric<f64, usize>,
}

impl fmt::Debug for LinearSystem<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearSystem")
            .field("dofs", &self.dof_count)
            .field("nnz", &self.stiffness.nnz())
            .field("field", &self.field.describe())
            .finish()
    }
}

/// P1 gradients of the barycentric coordinates and the area of a triangle.
fn p1_gradients(mesh: &Mesh, t: usize) -> ([[f64; 2]; 3], f64) {
    let [a, b, c] = mesh.triangles[t];
    let p = [mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]];
    let area = mesh.area(t);
    let mut grads = [[0.0; 2]; 3];
    for i in 0..3 {
        let (q, r) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        grads[i] = [(q[1] - r[1]) / (2.0 * area), (r[0] - q[0]) / (2.0 * area)];
    }
    (grads, area)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Assembles and factorizes the stiffness system for `sigma`.
pub fn assemble_system<'a>(
    mesh: &'a Mesh,
    partition: &'a Partition,
    sigma: &ConductivityField,
) -> Result<LinearSystem<'a>> {
    use PixelConductivity::*;
    if sigma.len() != partition.pixel_count {
        return Err(Error::Model(format!(
            "{} conductivity values for {} pixels",
            sigma.len(),
            partition.pixel_count
        )));
    }
    let finite: BTreeSet<usize> = (0..sigma.len())
        .filter(|&p| matches!(sigma.get(p), Finite(_)))
        .collect();
    let Some(&first) = finite.iter().next() else {
        return Err(Error::Model("no pixel has a finite conductivity".into()));
    };
    let mut reached = BTreeSet::from([first]);
    let mut stack = vec![first];
    while let Some(p) = stack.pop() {
        for q in partition.neighbors(p) {
            if finite.contains(q) && reached.insert(*q) {
                stack.push(*q);
            }
        }
    }
    if reached.len() != finite.len() {
        return Err(Error::Model("finite-conductivity pixels are not edge-connected".into()));
    }
    if !finite.iter().any(|&p| partition.touches_gamma(p)) {
        return Err(Error::Model(
            "finite-conductivity region is not connected to Gamma".into(),
        ));
    }
    for e in mesh.gamma_edges() {
        let p = partition.element_pixel[mesh.boundary_triangle(e)];
        if sigma.get(p) == Insulating {
            return Err(Error::Model(format!(
                "insulating pixel {p} lies on Gamma; the Neumann-to-Dirichlet map is unbounded there"
            )));
        }
    }

    let nv = mesh.vertices.len();
    let mut parent: Vec<usize> = (0..nv).collect();
    let mut active = vec![false; nv];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        match sigma.get(partition.element_pixel[t]) {
            Insulating => {}
            Finite(_) => tri.iter().for_each(|&v| active[v] = true),
            Conducting => {
                tri.iter().for_each(|&v| active[v] = true);
                let r0 = find(&mut parent, tri[0]);
                for &v in &tri[1..] {
                    let r = find(&mut parent, v);
                    parent[r] = r0;
                }
            }
        }
    }
    let mut root_dof: Vec<Option<usize>> = vec![None; nv];
    let mut node_dof = vec![None; nv];
    let mut dof_count = 0;
    for v in 0..nv {
        if !active[v] {
            continue;
        }
        let r = find(&mut parent, v);
        let d = *root_dof[r].get_or_insert_with(|| {
            dof_count += 1;
            dof_count - 1
        });
        node_dof[v] = Some(d);
    }

    let mut triplets = TriMat::new((dof_count, dof_count));
    let mut graph = vec![Vec::new(); dof_count];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let Finite(s) = sigma.get(partition.element_pixel[t]) else {
            continue;
        };
        let (grads, area) = p1_gradients(mesh, t);
        let dofs = tri.map(|v| node_dof[v].expect("active node"));
        for i in 0..3 {
            for j in 0..3 {
                let k = s * area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                triplets.add_triplet(dofs[i], dofs[j], k);
                if dofs[i] != dofs[j] {
                    graph[dofs[i]].push(dofs[j]);
                }
            }
        }
    }
    let mut seen = vec![false; dof_count];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(d) = queue.pop_front() {
        for &e in &graph[d] {
            if !seen[e] {
                seen[e] = true;
                count += 1;
                queue.push_back(e);
            }
        }
    }
    if count != dof_count {
        return Err(Error::Model(
            "active domain is disconnected; the Neumann problem is singular beyond constants"
                .into(),
        ));
    }
    let stiffness: CsMat<f64> = triplets.to_csc();

    let pinned = dof_count - 1;
    let mut reduced = TriMat::new((pinned, pinned));
    for (&v, (i, j)) in stiffness.iter() {
        if i != pinned && j != pinned {
            reduced.add_triplet(i, j, v);
        }
    }
    let reduced: CsMat<f64> = reduced.to_csc();
    let factor = Ldl::new()
        .check_symmetry(SymmetryCheck::DontCheckSymmetry)
        .fill_in_reduction(FillInReduction::ReverseCuthillMcKee)
        .numeric(reduced.view())
        .map_err(|e| Error::Numeric(format!("factorization failed: {e:?}")))?;
    if let Some(d) = factor.d().iter().find(|d| !(**d > 0.0)) {
        return Err(Error::Numeric(format!(
            "stiffness matrix not positive definite after pinning (pivot {d:e})"
        )));
    }
    Ok(LinearSystem {
        mesh,
        partition,
        field: sigma.clone(),
        node_dof,
        dof_count,
        stiffness,
        pinned,
        factor,
    })
}

impl LinearSystem<'_> {
    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    pub fn active_node_count(&self) -> usize {
        self.node_dof.iter().filter(|d| d.is_some()).count()
    }

    pub fn node_dof(&self, node: usize) -> Option<usize> {
        self.node_dof[node]
    }

    pub fn stiffness(&self) -> &CsMat<f64> {
        &self.stiffness
    }

    pub fn field(&self) -> &ConductivityField {
        &self.field
    }

    /// Solves `K u = b` for a nodal load, returning nodal potentials with the
    /// pinned degree of freedom at zero (inactive nodes read 0).
    pub fn solve_nodal(&self, nodal_load: &[f64]) -> Vec<f64> {
        let mut rhs = vec![0.0; self.dof_count];
        for (v, d) in self.node_dof.iter().enumerate() {
            if let Some(d) = d {
                rhs[*d] += nodal_load[v];
            }
        }
        rhs.truncate(self.pinned);
        let mut dofs = self.factor.solve(&rhs[..]);
        dofs.push(0.0);
        self.node_dof
            .iter()
            .map(|d| d.map_or(0.0, |d| dofs[d]))
            .collect()
    }
}

/// Potential for one Neumann datum.
#[derive(Debug, Clone)]
pub struct NeumannSolution {
    /// Nodal potential (0 on inactive nodes), Γ-mean free.
    pub nodal: Vec<f64>,
    /// `⟨u|_Γ, g_k⟩` for k = 1..=len.
    pub gamma_trace: Vec<f64>,
    /// `∫_P |∇u|²` per pixel, conductivity factored out.
    pub energy_by_pixel: Vec<f64>,
    /// `⟨f, u|_Γ⟩`.
    pub flux_work: f64,
}

/// Solves the Neumann problem for the datum `f = Σ f_k g_k`.
pub fn solve_neumann(
    system: &LinearSystem<'_>,
    basis: &BoundaryBasis,
    f_coeffs: &[f64],
) -> Result<NeumannSolution> {
    if f_coeffs.len() > basis.m_max {
        return Err(Error::Data(format!(
            "{} coefficients for a basis of order {}",
            f_coeffs.len(),
            basis.m_max
        )));
    }
    if basis.load(1).len() != system.mesh.vertices.len() {
        return Err(Error::Data("basis was built on a different mesh".into()));
    }
    let mut load = vec![0.0; system.mesh.vertices.len()];
    for (k, &c) in f_coeffs.iter().enumerate() {
        if c != 0.0 {
            for (l, g) in load.iter_mut().zip(basis.load(k + 1)) {
                *l += c * g;
            }
        }
    }
    let mut nodal = system.solve_nodal(&load);
    let mean = basis.mean(&nodal);
    for (v, u) in nodal.iter_mut().enumerate() {
        if system.node_dof[v].is_some() {
            *u -= mean;
        }
    }
    let gamma_trace = (1..=f_coeffs.len())
        .map(|k| basis.trace_coefficient(k, &nodal))
        .collect();
    let flux_work = load.iter().zip(&nodal).map(|(b, u)| b * u).sum();

    let mesh = system.mesh;
    let mut energy_by_pixel = vec![0.0; system.partition.pixel_count];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = system.partition.element_pixel[t];
        if !matches!(system.field.get(p), PixelConductivity::Finite(_)) {
            continue;
        }
        let (grads, area) = p1_gradients(mesh, t);
        let mut g = [0.0; 2];
        for i in 0..3 {
            g[0] += nodal[tri[i]] * grads[i][0];
            g[1] += nodal[tri[i]] * grads[i][1];
        }
        energy_by_pixel[p] += area * (g[0] * g[0] + g[1] * g[1]);
    }
    Ok(NeumannSolution {
        nodal,
        gamma_trace,
        energy_by_pixel,
        flux_work,
    })
}

/// Dirichlet energy of the solution on one pixel, σ factored out.
pub fn pixel_energy(solution: &NeumannSolution, pixel: usize) -> f64 {
    solution.energy_by_pixel[pixel]
}
