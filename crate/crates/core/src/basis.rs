//! Orthonormal mean-free cosine system on the measurement boundary Γ.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{Mesh, Point};

// 8-point Gauss–Legendre rule on [-1, 1].
const GAUSS_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// A Γ edge placed on the arc-length axis.
#[derive(Debug, Clone, Copy)]
pub struct GammaSegment {
    pub a: usize,
    pub b: usize,
    /// Arc-length coordinate of `a`; `b` sits at `s0 + length`.
    pub s0: f64,
    pub length: f64,
}

/// `g_k(s) = sqrt(2/L) cos(kπ s/L)`, k = 1..=m_max, with `s` the arc length
/// along Γ (arcs concatenated). Also holds the nodal load vectors
/// `∫_Γ g_k φ_i ds` for the mesh the basis was built on.
#[derive(Debug, Clone)]
pub struct BoundaryBasis {
    pub gamma_length: f64,
    pub m_max: usize,
    pub segments: Vec<GammaSegment>,
    /// Quadrature on the reference segment [0, 1]: (position, weight).
    pub quadrature: Vec<(f64, f64)>,
    loads: Vec<Vec<f64>>,
}

impl BoundaryBasis {
    pub fn new(mesh: &Mesh, m_max: usize) -> Result<BoundaryBasis> {
        if m_max == 0 {
            return Err(Error::Basis("basis order must be at least 1".into()));
        }
        let segments = parametrize_gamma(mesh)?;
        let gamma_length: f64 = segments.iter().map(|s| s.length).sum();
        // at least four boundary vertices per period 2L/k
        let capacity = segments.len() / 2;
        if m_max > capacity {
            return Err(Error::Basis(format!(
                "order {m_max} exceeds the {capacity} modes resolvable by {} Gamma edges",
                segments.len()
            )));
        }
        let quadrature: Vec<(f64, f64)> = GAUSS_NODES
            .iter()
            .zip(GAUSS_WEIGHTS)
            .flat_map(|(&x, w)| [(0.5 * (1.0 - x), 0.5 * w), (0.5 * (1.0 + x), 0.5 * w)])
            .collect();
        let mut basis = BoundaryBasis {
            gamma_length,
            m_max,
            segments,
            quadrature,
            loads: Vec::new(),
        };
        let nv = mesh.vertices.len();
        basis.loads = (1..=m_max)
            .map(|k| {
                let mut load = vec![0.0; nv];
                for seg in &basis.segments {
                    for &(x, w) in &basis.quadrature {
                        let g = basis.value(k, seg.s0 + x * seg.length) * w * seg.length;
                        load[seg.a] += g * (1.0 - x);
                        load[seg.b] += g * x;
                    }
                }
                load
            })
            .collect();
        Ok(basis)
    }

    /// `g_k(s)`, 1-based `k`.
    pub fn value(&self, k: usize, s: f64) -> f64 {
        let l = self.gamma_length;
        (2.0 / l).sqrt() * (k as f64 * PI * s / l).cos()
    }

    /// Nodal load vector of `g_k` (1-based), indexed by mesh vertex.
    pub fn load(&self, k: usize) -> &[f64] {
        &self.loads[k - 1]
    }

    /// `∫_Γ f(s) g(s) ds` by composite quadrature over the Γ edges.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.segments
            .iter()
            .map(|seg| {
                self.quadrature
                    .iter()
                    .map(|&(x, w)| w * f(seg.s0 + x * seg.length))
                    .sum::<f64>()
                    * seg.length
            })
            .sum()
    }

    /// `∫_Γ u g_k ds` for a P1 nodal field `u`.
    pub fn trace_coefficient(&self, k: usize, nodal: &[f64]) -> f64 {
        self.load(k).iter().zip(nodal).map(|(l, u)| l * u).sum()
    }

    /// `∫_Γ u ds / |Γ|` for a P1 nodal field.
    pub fn mean(&self, nodal: &[f64]) -> f64 {
        self.segments
            .iter()
            .map(|s| 0.5 * s.length * (nodal[s.a] + nodal[s.b]))
            .sum::<f64>()
            / self.gamma_length
    }

    /// L²(Γ) norm of `u_h - exact` where `u_h` is P1 and `exact` is given as a
    /// function of the boundary point.
    pub fn l2_error(&self, mesh: &Mesh, nodal: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
        self.segments
            .iter()
            .map(|seg| {
                let (pa, pb) = (mesh.vertices[seg.a], mesh.vertices[seg.b]);
                self.quadrature
                    .iter()
                    .map(|&(x, w)| {
                        let p = [pa[0] + x * (pb[0] - pa[0]), pa[1] + x * (pb[1] - pa[1])];
                        let uh = (1.0 - x) * nodal[seg.a] + x * nodal[seg.b];
                        w * (uh - exact(p)).powi(2)
                    })
                    .sum::<f64>()
                    * seg.length
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Orders the Γ edges into arcs with the domain on the left, each arc
/// starting at its free end (or, for a closed loop, at its smallest vertex),
/// arcs sorted by their starting point.
fn parametrize_gamma(mesh: &Mesh) -> Result<Vec<GammaSegment>> {
    // orient edges counterclockwise using the owning triangle
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut has_pred: HashMap<usize, bool> = HashMap::new();
    for e in mesh.gamma_edges() {
        let tri = mesh.triangles[mesh.boundary_triangle(e)];
        let forward = (0..3).any(|k| tri[k] == e.a && tri[(k + 1) % 3] == e.b);
        let (a, b) = if forward { (e.a, e.b) } else { (e.b, e.a) };
        if next.insert(a, b).is_some() {
            return Err(Error::Basis(format!("Gamma branches at vertex {a}")));
        }
        has_pred.insert(b, true);
        has_pred.entry(a).or_insert(false);
    }
    let key = |v: usize| {
        let p = mesh.vertices[v];
        (ordered(p[0]), ordered(p[1]))
    };
    let mut starts: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for (&v, &pred) in &has_pred {
        if !pred {
            starts.insert(key(v), v);
        }
    }
    let mut visited: HashMap<usize, bool> = HashMap::new();
    let mut arcs: Vec<Vec<(usize, usize)>> = Vec::new();
    let walk = |start: usize, visited: &mut HashMap<usize, bool>| {
        let mut arc = Vec::new();
        let mut v = start;
        while let Some(&w) = next.get(&v) {
            if visited.insert(v, true).is_some() {
                break;
            }
            arc.push((v, w));
            v = w;
        }
        arc
    };
    for &s in starts.values() {
        arcs.push(walk(s, &mut visited));
    }
    // closed loops
    loop {
        let remaining = next
            .keys()
            .filter(|v| !visited.contains_key(v))
            .min_by_key(|&&v| key(v))
            .copied();
        match remaining {
            Some(s) => arcs.push(walk(s, &mut visited)),
            None => break,
        }
    }
    let mut segments = Vec::new();
    let mut s0 = 0.0;
    for arc in arcs {
        for (a, b) in arc {
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let length = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
            segments.push(GammaSegment { a, b, s0, length });
            s0 += length;
        }
    }
    Ok(segments)
}

fn ordered(x: f64) -> i64 {
    (x * 1e12).round() as i64
}
