//! Triangle meshes of the unit square, pixel partitions and orderings.
//!
//! A [`Mesh`] is a conforming counterclockwise triangulation whose boundary
//! edges are tagged either as part of the measurement boundary Γ or as
//! insulated. A [`Partition`] assigns every triangle to one pixel; the pixels
//! are reconstructed in `order`, which must start at a pixel touching Γ and
//! keep every prefix union edge-connected.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Gamma,
    Insulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tag: BoundaryTag,
}

/// Sides of the unit square, used to describe Γ for generated meshes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub fn parse(s: &str) -> Result<Side> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bottom" => Ok(Side::Bottom),
            "right" => Ok(Side::Right),
            "top" => Ok(Side::Top),
            "left" => Ok(Side::Left),
            "all" => Err(Error::Config("use the four side names instead of 'all'".into())),
            other => Err(Error::Config(format!("unknown side '{other}'"))),
        }
    }

    pub fn all() -> [Side; 4] {
        [Side::Bottom, Side::Right, Side::Top, Side::Left]
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Bottom => "bottom",
            Side::Right => "right",
            Side::Top => "top",
            Side::Left => "left",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    /// Pixel index of `(row, col)`, rows counted from the bottom.
    pub fn pixel(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn row_col(&self, pixel: usize) -> (usize, usize) {
        (pixel / self.cols, pixel % self.cols)
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn signed_area(p: Point, q: Point, r: Point) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub refinement_level: u32,
    /// Triangles sharing each edge, keyed by sorted vertex pair.
    edges: HashMap<(usize, usize), Vec<usize>>,
}

impl Mesh {
    /// Builds a mesh and checks orientation, conformity and the boundary tags.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        refinement_level: u32,
    ) -> Result<Mesh> {
        if triangles.is_empty() {
            return Err(Error::Mesh("mesh has no triangles".into()));
        }
        let nv = vertices.len();
        let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Mesh(format!("triangle {t} references a missing vertex")));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(Error::Mesh(format!(
                    "triangle {t} is not counterclockwise (signed area {area:e})"
                )));
            }
            for k in 0..3 {
                edges
                    .entry(edge_key(tri[k], tri[(k + 1) % 3]))
                    .or_default()
                    .push(t);
            }
        }
        if let Some((e, ts)) = edges.iter().find(|(_, ts)| ts.len() > 2) {
            return Err(Error::Mesh(format!(
                "edge {e:?} is shared by {} triangles",
                ts.len()
            )));
        }
        let topological: BTreeSet<(usize, usize)> = edges
            .iter()
            .filter(|(_, ts)| ts.len() == 1)
            .map(|(e, _)| *e)
            .collect();
        let mut tagged = BTreeSet::new();
        for be in &boundary_edges {
            let key = edge_key(be.a, be.b);
            if !topological.contains(&key) {
                return Err(Error::Mesh(format!(
                    "boundary edge ({}, {}) is not on the mesh boundary",
                    be.a, be.b
                )));
            }
            if !tagged.insert(key) {
                return Err(Error::Mesh(format!("boundary edge ({}, {}) listed twice", be.a, be.b)));
            }
        }
        if tagged.len() != topological.len() {
            return Err(Error::Mesh(format!(
                "{} boundary edges untagged (hanging vertex or missing tags)",
                topological.len() - tagged.len()
            )));
        }
        if !boundary_edges.iter().any(|e| e.tag == BoundaryTag::Gamma) {
            return Err(Error::Mesh("no boundary edge is tagged Gamma".into()));
        }
        Ok(Mesh {
            vertices,
            triangles,
            boundary_edges,
            refinement_level,
            edges,
        })
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    /// The triangle owning a boundary edge.
    pub fn boundary_triangle(&self, edge: &BoundaryEdge) -> usize {
        self.edges[&edge_key(edge.a, edge.b)][0]
    }

    pub fn gamma_edges(&self) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges
            .iter()
            .filter(|e| e.tag == BoundaryTag::Gamma)
    }

    /// Pairs of triangles sharing an edge.
    pub fn interior_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges
            .values()
            .filter(|ts| ts.len() == 2)
            .map(|ts| (ts[0], ts[1]))
    }

    /// Writes the plain-text mesh format, with the pixel of each triangle.
    pub fn to_text(&self, partition: &Partition) -> String {
        let mut out = format!(
            "mesh {} {} {}\n",
            self.vertices.len(),
            self.triangles.len(),
            self.boundary_edges.len()
        );
        for v in &self.vertices {
            out.push_str(&format!("v {:?} {:?}\n", v[0], v[1]));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            out.push_str(&format!(
                "t {} {} {} {}\n",
                tri[0], tri[1], tri[2], partition.element_pixel[t]
            ));
        }
        for e in &self.boundary_edges {
            let tag = match e.tag {
                BoundaryTag::Gamma => "G",
                BoundaryTag::Insulated => "I",
            };
            out.push_str(&format!("b {} {} {}\n", e.a, e.b, tag));
        }
        out
    }

    /// Parses the plain-text mesh format. The partition gets the canonical
    /// ordering; callers may replace it.
    pub fn from_text(text: &str) -> Result<(Mesh, Partition)> {
        let bad = |line: usize, msg: &str| Error::Mesh(format!("line {}: {msg}", line + 1));
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hl, header) = lines.next().ok_or_else(|| Error::Mesh("empty mesh file".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 4 || head[0] != "mesh" {
            return Err(bad(hl, "expected 'mesh <nv> <nt> <nb>'"));
        }
        let count = |s: &str| s.parse::<usize>().map_err(|_| bad(hl, "bad count"));
        let (nv, nt, nb) = (count(head[1])?, count(head[2])?, count(head[3])?);
        let mut vertices = Vec::with_capacity(nv);
        let mut triangles = Vec::with_capacity(nt);
        let mut pixels = Vec::with_capacity(nt);
        let mut boundary = Vec::with_capacity(nb);
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            let idx = |s: &str| s.parse::<usize>().map_err(|_| bad(ln, "bad index"));
            match (f[0], f.len()) {
                ("v", 3) => {
                    let x = f[1].parse::<f64>().map_err(|_| bad(ln, "bad coordinate"))?;
                    let y = f[2].parse::<f64>().map_err(|_| bad(ln, "bad coordinate"))?;
                    vertices.push([x, y]);
                }
                ("t", 5) => {
                    triangles.push([idx(f[1])?, idx(f[2])?, idx(f[3])?]);
                    pixels.push(idx(f[4])?);
                }
                ("b", 4) => {
                    let tag = match f[3] {
                        "G" => BoundaryTag::Gamma,
                        "I" => BoundaryTag::Insulated,
                        _ => return Err(bad(ln, "boundary tag must be G or I")),
                    };
                    boundary.push(BoundaryEdge {
                        a: idx(f[1])?,
                        b: idx(f[2])?,
                        tag,
                    });
                }
                _ => return Err(bad(ln, "unrecognized record")),
            }
        }
        if vertices.len() != nv || triangles.len() != nt || boundary.len() != nb {
            return Err(Error::Mesh("record counts do not match header".into()));
        }
        let mesh = Mesh::new(vertices, triangles, boundary, 0)?;
        let n = pixels.iter().max().map_or(0, |&p| p + 1);
        let partition = Partition::new(&mesh, pixels, n, None, None)?;
        Ok((mesh, partition))
    }

    pub fn read_file(path: &Path) -> Result<(Mesh, Partition)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Mesh::from_text(&text)
    }
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub pixel_count: usize,
    pub element_pixel: Vec<usize>,
    /// Reconstruction order (pixel indices).
    pub order: Vec<usize>,
    /// Set for generated rectangular grids; used for raster output.
    pub grid: Option<GridShape>,
    adjacency: Vec<BTreeSet<usize>>,
    gamma_pixels: BTreeSet<usize>,
}

impl Partition {
    /// Checks that every triangle maps to a pixel, every pixel is nonempty
    /// and edge-connected. `order = None` selects the canonical ordering.
    pub fn new(
        mesh: &Mesh,
        element_pixel: Vec<usize>,
        pixel_count: usize,
        order: Option<Vec<usize>>,
        grid: Option<GridShape>,
    ) -> Result<Partition> {
        if pixel_count == 0 {
            return Err(Error::Geometry("partition needs at least one pixel".into()));
        }
        if element_pixel.len() != mesh.triangles.len() {
            return Err(Error::Geometry(format!(
                "{} pixel labels for {} triangles",
                element_pixel.len(),
                mesh.triangles.len()
            )));
        }
        let mut owned = vec![0usize; pixel_count];
        for &p in &element_pixel {
            if p >= pixel_count {
                return Err(Error::Geometry(format!("pixel index {p} out of range")));
            }
            owned[p] += 1;
        }
        if let Some(p) = owned.iter().position(|&c| c == 0) {
            return Err(Error::Geometry(format!("pixel {p} owns no triangle")));
        }

        let mut adjacency = vec![BTreeSet::new(); pixel_count];
        // union-find over triangles joined across intra-pixel edges
        let mut parent: Vec<usize> = (0..mesh.triangles.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (s, t) in mesh.interior_edges() {
            let (ps, pt) = (element_pixel[s], element_pixel[t]);
            if ps == pt {
                let (rs, rt) = (find(&mut parent, s), find(&mut parent, t));
                parent[rs] = rt;
            } else {
                adjacency[ps].insert(pt);
                adjacency[pt].insert(ps);
            }
        }
        let mut root_of_pixel: Vec<Option<usize>> = vec![None; pixel_count];
        for t in 0..mesh.triangles.len() {
            let r = find(&mut parent, t);
            let p = element_pixel[t];
            match root_of_pixel[p] {
                None => root_of_pixel[p] = Some(r),
                Some(r0) if r0 != r => {
                    return Err(Error::Geometry(format!("pixel {p} is not edge-connected")))
                }
                _ => {}
            }
        }
        let gamma_pixels = mesh
            .gamma_edges()
            .map(|e| element_pixel[mesh.boundary_triangle(e)])
            .collect();

        let mut partition = Partition {
            pixel_count,
            element_pixel,
            order: Vec::new(),
            grid,
            adjacency,
            gamma_pixels,
        };
        partition.order = match order {
            Some(o) => o,
            None => partition.canonical_order()?,
        };
        Ok(partition)
    }

    pub fn neighbors(&self, pixel: usize) -> &BTreeSet<usize> {
        &self.adjacency[pixel]
    }

    pub fn touches_gamma(&self, pixel: usize) -> bool {
        self.gamma_pixels.contains(&pixel)
    }

    pub fn gamma_pixels(&self) -> impl Iterator<Item = usize> + '_ {
        self.gamma_pixels.iter().copied()
    }

    pub fn triangles_of(&self, pixel: usize) -> impl Iterator<Item = usize> + '_ {
        self.element_pixel
            .iter()
            .enumerate()
            .filter(move |(_, &p)| p == pixel)
            .map(|(t, _)| t)
    }

    /// Graph distance of every pixel from the pixels touching Γ.
    pub fn layers(&self) -> Vec<usize> {
        let mut layer = vec![usize::MAX; self.pixel_count];
        let mut queue: VecDeque<usize> = self.gamma_pixels.iter().copied().collect();
        for &p in &queue {
            layer[p] = 0;
        }
        while let Some(p) = queue.pop_front() {
            for &q in &self.adjacency[p] {
                if layer[q] == usize::MAX {
                    layer[q] = layer[p] + 1;
                    queue.push_back(q);
                }
            }
        }
        layer
    }

    /// Layer-by-layer ordering: starting from the lowest-indexed pixel on Γ,
    /// repeatedly take the neighbour of the ordered set with the smallest
    /// (layer, index). Every prefix is connected.
    pub fn canonical_order(&self) -> Result<Vec<usize>> {
        let start = self
            .gamma_pixels
            .iter()
            .next()
            .copied()
            .ok_or_else(|| Error::Geometry("no pixel touches Gamma".into()))?;
        let layer = self.layers();
        let mut in_order = vec![false; self.pixel_count];
        let mut frontier = BTreeSet::new();
        let mut order = Vec::with_capacity(self.pixel_count);
        let mut next = Some(start);
        while let Some(p) = next {
            in_order[p] = true;
            order.push(p);
            frontier.remove(&(layer[p], p));
            for &q in &self.adjacency[p] {
                if !in_order[q] {
                    frontier.insert((layer[q], q));
                }
            }
            next = frontier.iter().next().map(|&(_, q)| q);
        }
        if order.len() != self.pixel_count {
            return Err(Error::Geometry(
                "pixel adjacency graph is disconnected".into(),
            ));
        }
        Ok(order)
    }

    /// Replaces the ordering after validating it.
    pub fn with_order(mut self, mesh: &Mesh, order: Vec<usize>) -> Result<Partition> {
        let report = validate_ordering(&self, mesh, &order);
        if !report.valid {
            return Err(Error::Geometry(format!("invalid ordering:\n{report}")));
        }
        self.order = order;
        Ok(self)
    }
}

/// Builds a unit-square mesh of right triangles whose edges follow the
/// boundaries of a `rows`×`cols` pixel grid. Pixels are numbered row-major
/// from the bottom-left corner.
pub fn build_structured_mesh(
    rows: usize,
    cols: usize,
    h: f64,
    gamma: &[Side],
) -> Result<(Mesh, Partition)> {
    if gamma.is_empty() {
        return Err(Error::Config("Gamma must contain at least one side".into()));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Config("grid needs at least one row and column".into()));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Config(format!("edge length {h} must be positive")));
    }
    let cells = |pixel_side: f64| -> Result<usize> {
        let k = (pixel_side / h).round();
        if h > pixel_side * (1.0 + 1e-9) || k < 1.0 {
            return Err(Error::Mesh(format!(
                "edge length {h} exceeds pixel side {pixel_side}: fewer than 2 triangles per pixel"
            )));
        }
        Ok(k as usize)
    };
    let (kx, ky) = (cells(1.0 / cols as f64)?, cells(1.0 / rows as f64)?);
    let (nx, ny) = (kx * cols, ky * rows);
    let id = |i: usize, j: usize| j * (nx + 1) + i;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([i as f64 / nx as f64, j as f64 / ny as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    let mut element_pixel = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            let pixel = (j / ky) * cols + i / kx;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
            element_pixel.push(pixel);
            element_pixel.push(pixel);
        }
    }
    let tag = |side: Side| {
        if gamma.contains(&side) {
            BoundaryTag::Gamma
        } else {
            BoundaryTag::Insulated
        }
    };
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge { a: id(i, 0), b: id(i + 1, 0), tag: tag(Side::Bottom) });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge { a: id(nx, j), b: id(nx, j + 1), tag: tag(Side::Right) });
    }
    for i in (0..nx).rev() {
        boundary_edges.push(BoundaryEdge { a: id(i + 1, ny), b: id(i, ny), tag: tag(Side::Top) });
    }
    for j in (0..ny).rev() {
        boundary_edges.push(BoundaryEdge { a: id(0, j + 1), b: id(0, j), tag: tag(Side::Left) });
    }
    let mesh = Mesh::new(vertices, triangles, boundary_edges, 0)?;
    let partition = Partition::new(
        &mesh,
        element_pixel,
        rows * cols,
        None,
        Some(GridShape { rows, cols }),
    )?;
    Ok((mesh, partition))
}

/// Uniform red refinement: every triangle splits into four children that
/// keep the parent's pixel; boundary tags pass to both halves of an edge.
pub fn refine_mesh(mesh: &Mesh, partition: &Partition) -> Result<(Mesh, Partition)> {
    let mut vertices = mesh.vertices.clone();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
        *midpoints.entry(edge_key(a, b)).or_insert_with(|| {
            let (pa, pb) = (vertices[a], vertices[b]);
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    let mut element_pixel = Vec::with_capacity(4 * mesh.triangles.len());
    for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
        let ab = midpoint(a, b, &mut vertices);
        let bc = midpoint(b, c, &mut vertices);
        let ca = midpoint(c, a, &mut vertices);
        triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        element_pixel.extend([partition.element_pixel[t]; 4]);
    }
    let mut boundary_edges = Vec::with_capacity(2 * mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let m = midpoint(e.a, e.b, &mut vertices);
        boundary_edges.push(BoundaryEdge { a: e.a, b: m, tag: e.tag });
        boundary_edges.push(BoundaryEdge { a: m, b: e.b, tag: e.tag });
    }
    let fine = Mesh::new(vertices, triangles, boundary_edges, mesh.refinement_level + 1)?;
    let fine_partition = Partition::new(
        &fine,
        element_pixel,
        partition.pixel_count,
        Some(partition.order.clone()),
        partition.grid,
    )?;
    Ok((fine, fine_partition))
}

/// Per-step outcome of an ordering check.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCheck {
    /// 1-based step.
    pub m: usize,
    pub pixel: usize,
    pub prefix_connected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    pub order: Vec<usize>,
    pub first_touches_gamma: bool,
    pub steps: Vec<StepCheck>,
    /// Problems with the ordering itself (duplicates, bad indices).
    pub problems: Vec<String>,
    pub valid: bool,
}

impl ValidityReport {
    /// The first failing step, 1-based.
    pub fn first_failure(&self) -> Option<usize> {
        if !self.problems.is_empty() {
            return Some(1);
        }
        if !self.first_touches_gamma {
            return Some(1);
        }
        self.steps.iter().find(|s| !s.prefix_connected).map(|s| s.m)
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ordering {:?}", self.order)?;
        for p in &self.problems {
            writeln!(f, "problem: {p}")?;
        }
        writeln!(
            f,
            "m=1 pixel touches Gamma: {}",
            if self.first_touches_gamma { "yes" } else { "NO" }
        )?;
        for s in &self.steps {
            writeln!(
                f,
                "m={} pixel={} Q_m connected: {}",
                s.m,
                s.pixel,
                if s.prefix_connected { "yes" } else { "NO" }
            )?;
        }
        match self.first_failure() {
            None => write!(f, "valid"),
            Some(m) => write!(f, "invalid at m={m}"),
        }
    }
}

/// Checks that `order` starts on Γ and that every prefix union is
/// edge-connected. The ordering may be partial (ROI reconstructions).
pub fn validate_ordering(partition: &Partition, _mesh: &Mesh, order: &[usize]) -> ValidityReport {
    let mut problems = Vec::new();
    let mut seen = BTreeSet::new();
    for &p in order {
        if p >= partition.pixel_count {
            problems.push(format!("pixel {p} out of range"));
        } else if !seen.insert(p) {
            problems.push(format!("pixel {p} repeated"));
        }
    }
    if order.is_empty() {
        problems.push("empty ordering".into());
    }
    if !problems.is_empty() {
        return ValidityReport {
            order: order.to_vec(),
            first_touches_gamma: false,
            steps: Vec::new(),
            problems,
            valid: false,
        };
    }
    let first_touches_gamma = partition.touches_gamma(order[0]);
    let steps: Vec<StepCheck> = (1..=order.len())
        .map(|m| StepCheck {
            m,
            pixel: order[m - 1],
            prefix_connected: connected(partition, &order[..m]),
        })
        .collect();
    let valid = first_touches_gamma && steps.iter().all(|s| s.prefix_connected);
    ValidityReport {
        order: order.to_vec(),
        first_touches_gamma,
        steps,
        problems,
        valid,
    }
}

fn connected(partition: &Partition, pixels: &[usize]) -> bool {
    let members: BTreeSet<usize> = pixels.iter().copied().collect();
    let mut seen = BTreeSet::from([pixels[0]]);
    let mut stack = vec![pixels[0]];
    while let Some(p) = stack.pop() {
        for q in partition.neighbors(p) {
            if members.contains(q) && seen.insert(*q) {
                stack.push(*q);
            }
        }
    }
    seen.len() == members.len()
}

/// Ordering for a region-of-interest reconstruction: a shortest pixel path
/// from Γ to the nearest ROI pixel, then further ROI pixels joined by
/// shortest paths from the pixels already ordered. Ties go to the smallest
/// pixel index.
pub fn roi_order(partition: &Partition, _mesh: &Mesh, roi: &[usize]) -> Result<Vec<usize>> {
    if roi.is_empty() {
        return Err(Error::Config("ROI must name at least one pixel".into()));
    }
    if let Some(&p) = roi.iter().find(|&&p| p >= partition.pixel_count) {
        return Err(Error::Config(format!("ROI pixel {p} out of range")));
    }
    let mut remaining: BTreeSet<usize> = roi.iter().copied().collect();
    let mut order: Vec<usize> = Vec::new();
    let mut in_order = vec![false; partition.pixel_count];
    while !remaining.is_empty() {
        let sources: Vec<usize> = if order.is_empty() {
            partition.gamma_pixels().collect()
        } else {
            order.clone()
        };
        let path = shortest_path(partition, &sources, &remaining).ok_or_else(|| {
            Error::Geometry(format!(
                "ROI pixels {remaining:?} are unreachable from Gamma"
            ))
        })?;
        for p in path {
            if !in_order[p] {
                in_order[p] = true;
                order.push(p);
                remaining.remove(&p);
            }
        }
    }
    Ok(order)
}

/// Multi-source BFS; returns the path (sources first) to the closest target.
fn shortest_path(
    partition: &Partition,
    sources: &[usize],
    targets: &BTreeSet<usize>,
) -> Option<Vec<usize>> {
    let n = partition.pixel_count;
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut frontier: Vec<usize> = sources.to_vec();
    frontier.sort_unstable();
    frontier.dedup();
    for &s in &frontier {
        dist[s] = 0;
    }
    let mut level = 0;
    while !frontier.is_empty() {
        if let Some(&hit) = frontier.iter().filter(|p| targets.contains(p)).min() {
            let mut path = vec![hit];
            let mut p = hit;
            while parent[p] != usize::MAX {
                p = parent[p];
                path.push(p);
            }
            path.reverse();
            return Some(path);
        }
        level += 1;
        let mut next = Vec::new();
        for &p in &frontier {
            for &q in partition.neighbors(p) {
                if dist[q] == usize::MAX {
                    dist[q] = level;
                    parent[q] = p;
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        frontier = next;
    }
    None
}
