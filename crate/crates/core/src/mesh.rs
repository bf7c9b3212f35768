//! Structured triangulation of the upper half of an eccentric annulus.
//!
//! The half-annulus is swept by straight columns joining the inner circle to
//! the outer circle at equal polar angles `theta_j` (measured from each
//! circle's own center). Along a column the layer spacing grows
//! geometrically from the inner circle so that cells stay close to square;
//! neighbouring columns with different layer counts are stitched with a
//! shortest-diagonal zipper.

use crate::geometry::{Circle, ModelGeometry, Point};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("target edge length {0} must be positive and finite")]
    InvalidSize(f64),
    #[error("annular gap {gap} is thinner than twice the edge length {h}")]
    GeometryDegenerate { gap: f64, h: f64 },
    #[error("mesh has only {0} interior vertices")]
    MeshTooCoarse(usize),
    #[error("inconsistent layer plan: {0}")]
    BadPlan(String),
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error("mesh parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum BoundaryTag {
    OuterArc,
    InnerArc,
    SymmetrySegment,
    Axis,
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryTag::OuterArc => "OuterArc",
            BoundaryTag::InnerArc => "InnerArc",
            BoundaryTag::SymmetrySegment => "SymmetrySegment",
            BoundaryTag::Axis => "Axis",
        })
    }
}

impl FromStr for BoundaryTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "OuterArc" => Ok(BoundaryTag::OuterArc),
            "InnerArc" => Ok(BoundaryTag::InnerArc),
            "SymmetrySegment" => Ok(BoundaryTag::SymmetrySegment),
            "Axis" => Ok(BoundaryTag::Axis),
            other => Err(format!("unknown boundary tag `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    outer: Option<Circle>,
    inner: Option<Circle>,
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds a mesh from raw parts and checks orientation and boundary coverage.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self, MeshError> {
        let mesh = Mesh {
            vertices,
            triangles,
            boundary_edges,
            outer: None,
            inner: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }
    pub fn outer_circle(&self) -> Option<Circle> {
        self.outer
    }
    pub fn inner_circle(&self) -> Option<Circle> {
        self.inner
    }
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }
    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| signed_area(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]))
            .sum()
    }

    /// Vertices lying on any edge carrying one of `tags`.
    pub fn tagged_vertices(&self, tags: &[BoundaryTag]) -> Vec<bool> {
        let mut mark = vec![false; self.vertices.len()];
        for e in &self.boundary_edges {
            if tags.contains(&e.tag) {
                mark[e.vertices[0]] = true;
                mark[e.vertices[1]] = true;
            }
        }
        mark
    }

    /// Number of vertices not on the boundary.
    pub fn interior_vertex_count(&self) -> usize {
        let all = [
            BoundaryTag::OuterArc,
            BoundaryTag::InnerArc,
            BoundaryTag::SymmetrySegment,
            BoundaryTag::Axis,
        ];
        self.tagged_vertices(&all).iter().filter(|b| !**b).count()
    }

    /// Undirected edges with the triangles adjacent to them.
    pub fn edge_triangles(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (ti, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                map.entry(edge_key(t[k], t[(k + 1) % 3])).or_default().push(ti);
            }
        }
        map
    }

    pub fn edge_count(&self) -> usize {
        self.edge_triangles().len()
    }

    /// Retags the symmetry segments as the rotation axis (meridian half-plane of a 3D shell).
    pub fn with_axis(mut self) -> Self {
        for e in &mut self.boundary_edges {
            if e.tag == BoundaryTag::SymmetrySegment {
                e.tag = BoundaryTag::Axis;
            }
        }
        self
    }

    /// Same mesh with coordinates multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let scale = |circle: Circle| Circle {
            center: [c * circle.center[0], c * circle.center[1]],
            radius: c * circle.radius,
        };
        Mesh {
            vertices: self.vertices.iter().map(|p| [c * p[0], c * p[1]]).collect(),
            triangles: self.triangles.clone(),
            boundary_edges: self.boundary_edges.clone(),
            outer: self.outer.map(scale),
            inner: self.inner.map(scale),
        }
    }

    /// Renumbers vertices so that old vertex `i` becomes `perm[i]`.
    pub fn renumbered(&self, perm: &[usize]) -> Self {
        let mut vertices = vec![[0.0; 2]; self.vertices.len()];
        for (i, p) in self.vertices.iter().enumerate() {
            vertices[perm[i]] = *p;
        }
        Mesh {
            vertices,
            triangles: self
                .triangles
                .iter()
                .map(|t| [perm[t[0]], perm[t[1]], perm[t[2]]])
                .collect(),
            boundary_edges: self
                .boundary_edges
                .iter()
                .map(|e| BoundaryEdge {
                    vertices: [perm[e.vertices[0]], perm[e.vertices[1]]],
                    tag: e.tag,
                })
                .collect(),
            outer: self.outer,
            inner: self.inner,
        }
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.vertices.len();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let bbox = (hi[0] - lo[0]) * (hi[1] - lo[1]);
        for (ti, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(MeshError::Invalid(format!("triangle {ti} has a bad index")));
            }
            let a = signed_area(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]);
            if !(a > 1e-14 * bbox) {
                return Err(MeshError::Invalid(format!(
                    "triangle {ti} has non-positive area {a:e}"
                )));
            }
        }
        let edges = self.edge_triangles();
        let mut boundary: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
        for e in &self.boundary_edges {
            if boundary
                .insert(edge_key(e.vertices[0], e.vertices[1]), e.tag)
                .is_some()
            {
                return Err(MeshError::Invalid("duplicate boundary edge".into()));
            }
        }
        for (key, tris) in &edges {
            match (tris.len(), boundary.contains_key(key)) {
                (1, true) | (2, false) => {}
                (1, false) => {
                    return Err(MeshError::Invalid(format!("untagged boundary edge {key:?}")))
                }
                (2, true) => {
                    return Err(MeshError::Invalid(format!("interior edge {key:?} is tagged")))
                }
                (k, _) => {
                    return Err(MeshError::Invalid(format!(
                        "edge {key:?} shared by {k} triangles"
                    )))
                }
            }
        }
        if boundary.keys().any(|k| !edges.contains_key(k)) {
            return Err(MeshError::Invalid("tagged edge not in any triangle".into()));
        }
        Ok(())
    }
}

/// Column structure of a structured half-annulus mesh: `layers[j]` cells
/// along column `j`, and for each strip between columns the order in which
/// the zipper advances (`true` = left column). Reusing a plan keeps the mesh
/// topology fixed while the geometry moves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerPlan {
    pub layers: Vec<usize>,
    pub zipper: Vec<Vec<bool>>,
}

impl LayerPlan {
    pub fn columns(&self) -> usize {
        self.layers.len()
    }
}

fn check_size(geom: &ModelGeometry, h: f64) -> Result<(), MeshError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(MeshError::InvalidSize(h));
    }
    let gap = geom.min_gap();
    if gap < 2.0 * h {
        return Err(MeshError::GeometryDegenerate { gap, h });
    }
    Ok(())
}

fn column_angle(j: usize, columns: usize) -> (f64, f64) {
    let last = columns - 1;
    if j == 0 {
        (1.0, 0.0)
    } else if j == last {
        (-1.0, 0.0)
    } else {
        let th = PI * j as f64 / last as f64;
        (th.cos(), th.sin())
    }
}

fn column_ends(geom: &ModelGeometry, j: usize, columns: usize) -> (Point, Point) {
    let (c, s) = column_angle(j, columns);
    let a = [
        geom.inner.center[0] + geom.inner.radius * c,
        geom.inner.center[1] + geom.inner.radius * s,
    ];
    let b = [
        geom.outer.center[0] + geom.outer.radius * c,
        geom.outer.center[1] + geom.outer.radius * s,
    ];
    (a, b)
}

pub fn plan_layers(geom: &ModelGeometry, h: f64) -> Result<LayerPlan, MeshError> {
    check_size(geom, h)?;
    let (r_in, r_out) = (geom.inner.radius, geom.outer.radius);
    let intervals = ((PI * (r_in + r_out) / (2.0 * h)).ceil() as usize).max(4);
    let dtheta = PI / intervals as f64;
    let log_ratio = (r_out / r_in).ln();
    let layers = (0..=intervals)
        .map(|j| {
            let (a, b) = column_ends(geom, j, intervals + 1);
            let len = dist(a, b);
            let m = log_ratio * len / ((r_out - r_in) * dtheta);
            (m.round() as usize).max(1)
        })
        .collect::<Vec<_>>();
    let (vertices, start) = column_vertices(geom, &layers);
    let id = |j: usize, k: usize| start[j] + k;
    let zipper = (0..layers.len() - 1)
        .map(|j| {
            let (p, q) = (layers[j], layers[j + 1]);
            let (mut i, mut k) = (0, 0);
            let mut steps = Vec::with_capacity(p + q);
            while i < p || k < q {
                // shortest diagonal
                let left = i < p
                    && (k == q
                        || dist(vertices[id(j, i + 1)], vertices[id(j + 1, k)])
                            <= dist(vertices[id(j, i)], vertices[id(j + 1, k + 1)]));
                if left {
                    i += 1;
                } else {
                    k += 1;
                }
                steps.push(left);
            }
            steps
        })
        .collect();
    Ok(LayerPlan { layers, zipper })
}

/// Vertices in column-major order and the first index of each column.
fn column_vertices(geom: &ModelGeometry, layers: &[usize]) -> (Vec<Point>, Vec<usize>) {
    let columns = layers.len();
    let (r_in, r_out) = (geom.inner.radius, geom.outer.radius);
    let mut vertices = Vec::new();
    let mut start = Vec::with_capacity(columns);
    for (j, &m) in layers.iter().enumerate() {
        start.push(vertices.len());
        let (a, b) = column_ends(geom, j, columns);
        for k in 0..=m {
            let p = if k == 0 {
                a
            } else if k == m {
                b
            } else {
                let radius = r_in * (r_out / r_in).powf(k as f64 / m as f64);
                let xi = (radius - r_in) / (r_out - r_in);
                [(1.0 - xi) * a[0] + xi * b[0], (1.0 - xi) * a[1] + xi * b[1]]
            };
            vertices.push(p);
        }
    }
    (vertices, start)
}

/// Realizes a layer plan on (possibly moved) geometry.
pub fn triangulate_with_plan(geom: &ModelGeometry, plan: &LayerPlan) -> Result<Mesh, MeshError> {
    let columns = plan.columns();
    if columns < 2 {
        return Err(MeshError::BadPlan(format!("{columns} columns, need at least 2")));
    }
    if plan.zipper.len() != columns - 1
        || plan
            .zipper
            .iter()
            .enumerate()
            .any(|(j, z)| z.len() != plan.layers[j] + plan.layers[j + 1] || z.iter().filter(|l| **l).count() != plan.layers[j])
    {
        return Err(MeshError::BadPlan("zipper does not match the layer counts".into()));
    }
    let (vertices, start) = column_vertices(geom, &plan.layers);
    let id = |j: usize, k: usize| start[j] + k;

    let mut triangles = Vec::new();
    let mut push = |t: [usize; 3]| {
        let area = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
        if area > 0.0 {
            triangles.push(t);
        } else {
            triangles.push([t[0], t[2], t[1]]);
        }
    };
    for j in 0..columns - 1 {
        let (mut i, mut k) = (0, 0);
        for &left in &plan.zipper[j] {
            if left {
                push([id(j, i), id(j, i + 1), id(j + 1, k)]);
                i += 1;
            } else {
                push([id(j, i), id(j + 1, k), id(j + 1, k + 1)]);
                k += 1;
            }
        }
    }

    let mut boundary_edges = Vec::new();
    for j in 0..columns - 1 {
        boundary_edges.push(BoundaryEdge {
            vertices: [id(j, 0), id(j + 1, 0)],
            tag: BoundaryTag::InnerArc,
        });
        boundary_edges.push(BoundaryEdge {
            vertices: [id(j, plan.layers[j]), id(j + 1, plan.layers[j + 1])],
            tag: BoundaryTag::OuterArc,
        });
    }
    for j in [0, columns - 1] {
        for k in 0..plan.layers[j] {
            boundary_edges.push(BoundaryEdge {
                vertices: [id(j, k), id(j, k + 1)],
                tag: BoundaryTag::SymmetrySegment,
            });
        }
    }

    let mesh = Mesh {
        vertices,
        triangles,
        boundary_edges,
        outer: Some(geom.outer),
        inner: Some(geom.inner),
    };
    mesh.validate()?;
    Ok(mesh)
}

pub fn triangulate_half_domain(geom: &ModelGeometry, h: f64) -> Result<Mesh, MeshError> {
    let plan = plan_layers(geom, h)?;
    let mesh = triangulate_with_plan(geom, &plan)?;
    let interior = mesh.interior_vertex_count();
    if interior < 10 {
        return Err(MeshError::MeshTooCoarse(interior));
    }
    Ok(mesh)
}

/// Splits every triangle into four through its edge midpoints; midpoints of
/// arc edges are projected back onto their circle.
pub fn refine_uniform(m: &Mesh) -> Mesh {
    let mut vertices = m.vertices.clone();
    let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
        *mids.entry(edge_key(a, b)).or_insert_with(|| {
            let (p, q) = (vertices[a], vertices[b]);
            vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            vertices.len() - 1
        })
    };
    // Boundary midpoints first so their numbering follows the boundary.
    let mut boundary_edges = Vec::with_capacity(2 * m.boundary_edges.len());
    for e in &m.boundary_edges {
        let [a, b] = e.vertices;
        let c = midpoint(a, b, &mut vertices);
        let circle = match e.tag {
            BoundaryTag::OuterArc => m.outer,
            BoundaryTag::InnerArc => m.inner,
            _ => None,
        };
        if let Some(circle) = circle {
            vertices[c] = circle.snap(vertices[c]);
        }
        boundary_edges.push(BoundaryEdge {
            vertices: [a, c],
            tag: e.tag,
        });
        boundary_edges.push(BoundaryEdge {
            vertices: [c, b],
            tag: e.tag,
        });
    }
    let mut triangles = Vec::with_capacity(4 * m.triangles.len());
    for t in &m.triangles {
        let ab = midpoint(t[0], t[1], &mut vertices);
        let bc = midpoint(t[1], t[2], &mut vertices);
        let ca = midpoint(t[2], t[0], &mut vertices);
        triangles.push([t[0], ab, ca]);
        triangles.push([ab, t[1], bc]);
        triangles.push([ca, bc, t[2]]);
        triangles.push([ab, bc, ca]);
    }
    Mesh {
        vertices,
        triangles,
        boundary_edges,
        outer: m.outer,
        inner: m.inner,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    /// Smallest interior angle, in degrees.
    pub min_angle: f64,
    pub max_area_ratio: f64,
    pub vertex_count: usize,
    pub triangle_count: usize,
    /// Largest distance of a tagged boundary vertex from its exact curve.
    pub boundary_gap: f64,
}

fn angles(a: Point, b: Point, c: Point) -> [f64; 3] {
    let angle = |p: Point, q: Point, r: Point| {
        let u = [q[0] - p[0], q[1] - p[1]];
        let v = [r[0] - p[0], r[1] - p[1]];
        let cross = u[0] * v[1] - u[1] * v[0];
        let dot = u[0] * v[0] + u[1] * v[1];
        cross.abs().atan2(dot).to_degrees()
    };
    [angle(a, b, c), angle(b, c, a), angle(c, a, b)]
}

pub fn mesh_quality(m: &Mesh) -> QualityReport {
    let mut min_angle = f64::INFINITY;
    let (mut amin, mut amax) = (f64::INFINITY, 0.0f64);
    for t in &m.triangles {
        let (a, b, c) = (m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
        for x in angles(a, b, c) {
            min_angle = min_angle.min(x);
        }
        let area = signed_area(a, b, c);
        amin = amin.min(area);
        amax = amax.max(area);
    }
    let mut boundary_gap = 0.0f64;
    for e in &m.boundary_edges {
        for &v in &e.vertices {
            let p = m.vertices[v];
            let d = match e.tag {
                BoundaryTag::OuterArc => m.outer.map_or(0.0, |c| c.distance_to(p)),
                BoundaryTag::InnerArc => m.inner.map_or(0.0, |c| c.distance_to(p)),
                BoundaryTag::SymmetrySegment | BoundaryTag::Axis => p[1].abs(),
            };
            boundary_gap = boundary_gap.max(d);
        }
    }
    QualityReport {
        min_angle,
        max_area_ratio: amax / amin,
        vertex_count: m.vertices.len(),
        triangle_count: m.triangles.len(),
        boundary_gap,
    }
}

/// Writes the plain-text dump: a `V T B` header, then vertices, triangles and tagged edges.
pub fn write_mesh<W: Write>(m: &Mesh, mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "{} {} {}",
        m.vertices.len(),
        m.triangles.len(),
        m.boundary_edges.len()
    )?;
    for p in &m.vertices {
        writeln!(out, "{:.16e} {:.16e}", p[0], p[1])?;
    }
    for t in &m.triangles {
        writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
    }
    for e in &m.boundary_edges {
        writeln!(out, "{} {} {}", e.vertices[0], e.vertices[1], e.tag)?;
    }
    Ok(())
}

pub fn read_mesh<R: BufRead>(input: R) -> Result<Mesh, MeshError> {
    let mut lines = input.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, Vec<String>), MeshError> {
        match lines.next() {
            Some((i, line)) => Ok((i + 1, line?.split_whitespace().map(String::from).collect())),
            None => Err(MeshError::Parse {
                line: 0,
                msg: format!("unexpected end of input reading {what}"),
            }),
        }
    };
    fn num<T: FromStr>(line: usize, s: &str) -> Result<T, MeshError> {
        s.parse().map_err(|_| MeshError::Parse {
            line,
            msg: format!("bad number `{s}`"),
        })
    }
    let (l, head) = next("header")?;
    if head.len() != 3 {
        return Err(MeshError::Parse {
            line: l,
            msg: "expected `V T B`".into(),
        });
    }
    let (nv, nt, nb): (usize, usize, usize) =
        (num(l, &head[0])?, num(l, &head[1])?, num(l, &head[2])?);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, f) = next("vertex")?;
        if f.len() != 2 {
            return Err(MeshError::Parse {
                line: l,
                msg: "expected `x y`".into(),
            });
        }
        vertices.push([num(l, &f[0])?, num(l, &f[1])?]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (l, f) = next("triangle")?;
        if f.len() != 3 {
            return Err(MeshError::Parse {
                line: l,
                msg: "expected `i j k`".into(),
            });
        }
        triangles.push([num(l, &f[0])?, num(l, &f[1])?, num(l, &f[2])?]);
    }
    let mut boundary_edges = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (l, f) = next("boundary edge")?;
        if f.len() != 3 {
            return Err(MeshError::Parse {
                line: l,
                msg: "expected `i j TAG`".into(),
            });
        }
        let tag = f[2]
            .parse()
            .map_err(|msg| MeshError::Parse { line: l, msg })?;
        boundary_edges.push(BoundaryEdge {
            vertices: [num(l, &f[0])?, num(l, &f[1])?],
            tag,
        });
    }
    Mesh::from_parts(vertices, triangles, boundary_edges)
}
