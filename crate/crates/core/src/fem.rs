//! Piecewise-linear assembly of weighted stiffness and mass matrices.
//!
//! One assembler covers the planar Euclidean problem, the conformally
//! weighted sphere and hyperbolic plane (mass weight `rho`), and the azimuthal
//! modes of the axisymmetric 3D problem on the meridian half-plane (weight `s`
//! and potential `m^2 / s`). All integrals use the three-point edge-midpoint
//! rule.

use crate::geometry::{DomainSpec, Point, SpaceForm};
use crate::mesh::{signed_area, BoundaryTag, Mesh};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("no discretization for {form} shells in dimension {dim}")]
    UnsupportedCombination { form: SpaceForm, dim: usize },
    #[error("potential is singular at quadrature point ({0}, {1}) of a free vertex")]
    SingularQuadraturePoint(f64, f64),
    #[error("every vertex is constrained")]
    AllConstrained,
}

/// Symmetric sparse matrix; only the upper triangle (diagonal included) is
/// stored, row-compressed with sorted unique column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    /// Sums duplicate `(i, j, v)` entries. Entries below the diagonal are
    /// rejected: assembly only ever accumulates into the upper triangle.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        assert!(
            triplets.iter().all(|&(i, j, _)| i <= j && j < dim),
            "triplets must lie in the upper triangle"
        );
        // stable sort keeps the summation order reproducible
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSym {
            dim,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self::from_triplets(d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect())
    }

    /// Upper triangle of a dense symmetric matrix (exact zeros dropped).
    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let n = a.len();
        let mut t = Vec::new();
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate().skip(i) {
                if v != 0.0 || i == j {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored (upper-triangle) entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.dim {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                let a = self.values[p];
                acc += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
            y[i] += acc;
        }
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, other: &SparseSym, c: f64) -> SparseSym {
        assert_eq!(self.dim, other.dim);
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.dim {
            t.extend(self.row(i).map(|(j, v)| (i, j, v)));
            t.extend(other.row(i).map(|(j, v)| (i, j, c * v)));
        }
        SparseSym::from_triplets(self.dim, t)
    }

    /// Principal submatrix on the listed indices (in that order).
    pub fn submatrix(&self, keep: &[usize]) -> SparseSym {
        let mut new_index = vec![usize::MAX; self.dim];
        for (r, &i) in keep.iter().enumerate() {
            new_index[i] = r;
        }
        let mut t = Vec::new();
        for i in 0..self.dim {
            let ri = new_index[i];
            if ri == usize::MAX {
                continue;
            }
            for (j, v) in self.row(i) {
                let rj = new_index[j];
                if rj != usize::MAX {
                    t.push((ri.min(rj), ri.max(rj), v));
                }
            }
        }
        SparseSym::from_triplets(keep.len(), t)
    }

    /// `P A P^T` where old index `i` moves to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> SparseSym {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                let (a, b) = (perm[i], perm[j]);
                t.push((a.min(b), a.max(b), v));
            }
        }
        SparseSym::from_triplets(self.dim, t)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.dim]; self.dim];
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        a
    }

    pub fn sum_all(&self) -> f64 {
        (0..self.dim)
            .flat_map(|i| self.row(i).map(move |(j, v)| if i == j { v } else { 2.0 * v }))
            .sum()
    }
}

/// Coefficient fields evaluated at chart points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    /// Distance `s` to the rotation axis (second chart coordinate).
    AxisDistance,
    /// `scale / s`; infinite on the axis.
    InverseAxisDistance(f64),
    ConformalFactor(SpaceForm),
}

impl Coefficient {
    pub fn eval(&self, p: Point) -> f64 {
        match *self {
            Coefficient::Constant(c) => c,
            Coefficient::AxisDistance => p[1],
            Coefficient::InverseAxisDistance(c) => {
                if p[1] > 0.0 {
                    c / p[1]
                } else {
                    f64::INFINITY
                }
            }
            Coefficient::ConformalFactor(form) => form.conformal_factor(p),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Coefficient::Constant(c) if *c == 0.0)
            || matches!(self, Coefficient::InverseAxisDistance(c) if *c == 0.0)
    }
}

/// Reflection sector: even (`Plus`) or odd (`Minus`) under `x_n -> -x_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sector {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    pub stiffness: Coefficient,
    pub mass: Coefficient,
    pub potential: Coefficient,
    pub dirichlet_tags: Vec<BoundaryTag>,
}

/// Weights for one sector (planar charts) or one azimuthal mode (meridian of
/// a 3D Euclidean shell).
pub fn weight_spec(spec: &DomainSpec, mode: usize, sector: Sector) -> Result<WeightSpec, FemError> {
    let arcs = vec![BoundaryTag::OuterArc, BoundaryTag::InnerArc];
    let sector_tags = |sector: Sector| {
        let mut tags = arcs.clone();
        if sector == Sector::Minus {
            tags.push(BoundaryTag::SymmetrySegment);
        }
        tags
    };
    match (spec.form(), spec.dim()) {
        (SpaceForm::Euclidean, 2) => Ok(WeightSpec {
            stiffness: Coefficient::Constant(1.0),
            mass: Coefficient::Constant(1.0),
            potential: Coefficient::Constant(0.0),
            dirichlet_tags: sector_tags(sector),
        }),
        (SpaceForm::Euclidean, 3) => {
            let mut tags = arcs;
            let potential = if mode == 0 {
                Coefficient::Constant(0.0)
            } else {
                tags.push(BoundaryTag::Axis);
                Coefficient::InverseAxisDistance((mode * mode) as f64)
            };
            Ok(WeightSpec {
                stiffness: Coefficient::AxisDistance,
                mass: Coefficient::AxisDistance,
                potential,
                dirichlet_tags: tags,
            })
        }
        (form @ (SpaceForm::Spherical | SpaceForm::Hyperbolic), 2) => Ok(WeightSpec {
            stiffness: Coefficient::Constant(1.0),
            mass: Coefficient::ConformalFactor(form),
            potential: Coefficient::Constant(0.0),
            dirichlet_tags: sector_tags(sector),
        }),
        (form, dim) => Err(FemError::UnsupportedCombination { form, dim }),
    }
}

/// Gradients of the three hat functions on a triangle, and its area.
pub fn hat_gradients(a: Point, b: Point, c: Point) -> ([[f64; 2]; 3], f64) {
    let area = signed_area(a, b, c);
    let s = 0.5 / area;
    let g = [
        [(b[1] - c[1]) * s, (c[0] - b[0]) * s],
        [(c[1] - a[1]) * s, (a[0] - c[0]) * s],
        [(a[1] - b[1]) * s, (b[0] - a[0]) * s],
    ];
    (g, area)
}

/// Stiffness `K` (with potential) and mass `M` on the full vertex set.
pub fn assemble(mesh: &Mesh, w: &WeightSpec) -> Result<(SparseSym, SparseSym), FemError> {
    let nv = mesh.vertex_count();
    let constrained = mesh.tagged_vertices(&w.dirichlet_tags);
    let mut kt = Vec::with_capacity(6 * mesh.triangle_count());
    let mut mt = Vec::with_capacity(6 * mesh.triangle_count());
    let verts = mesh.vertices();
    let with_potential = !w.potential.is_zero();
    for tri in mesh.triangles() {
        let p = [verts[tri[0]], verts[tri[1]], verts[tri[2]]];
        let (grad, area) = hat_gradients(p[0], p[1], p[2]);
        let mid = |a: usize, b: usize| [0.5 * (p[a][0] + p[b][0]), 0.5 * (p[a][1] + p[b][1])];
        // midpoint of the edge opposite vertex k is edges[k]
        let edges = [(1, 2), (2, 0), (0, 1)];
        let mids = edges.map(|(a, b)| mid(a, b));
        let wk: f64 = mids.iter().map(|&m| w.stiffness.eval(m)).sum::<f64>() / 3.0;
        let wm = mids.map(|m| w.mass.eval(m));
        let q = mids.map(|m| {
            if with_potential {
                w.potential.eval(m)
            } else {
                0.0
            }
        });
        let mut ke = [[0.0; 3]; 3];
        let mut me = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                ke[i][j] = wk * area * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
            }
        }
        // hats are 1/2 at both ends of an edge midpoint, 0 at the third vertex
        for (k, &(a, b)) in edges.iter().enumerate() {
            let c = area / 12.0;
            for (i, j) in [(a, a), (a, b), (b, a), (b, b)] {
                me[i][j] += c * wm[k];
            }
            if q[k] != 0.0 {
                if q[k].is_finite() {
                    for (i, j) in [(a, a), (a, b), (b, a), (b, b)] {
                        ke[i][j] += c * q[k];
                    }
                } else if !(constrained[tri[a]] && constrained[tri[b]]) {
                    return Err(FemError::SingularQuadraturePoint(mids[k][0], mids[k][1]));
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let (gi, gj) = (tri[i], tri[j]);
                if gi <= gj {
                    kt.push((gi, gj, ke[i][j]));
                    mt.push((gi, gj, me[i][j]));
                }
            }
        }
    }
    Ok((SparseSym::from_triplets(nv, kt), SparseSym::from_triplets(nv, mt)))
}

/// Pencil with Dirichlet vertices removed.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub k: SparseSym,
    pub m: SparseSym,
    /// `index_map[r]` is the full vertex index of reduced unknown `r`.
    pub index_map: Vec<usize>,
}

impl ReducedSystem {
    /// Extends a reduced vector by zeros on the constrained vertices.
    pub fn expand(&self, x: &[f64], full_dim: usize) -> Vec<f64> {
        let mut u = vec![0.0; full_dim];
        for (r, &i) in self.index_map.iter().enumerate() {
            u[i] = x[r];
        }
        u
    }
}

pub fn apply_dirichlet(
    k: &SparseSym,
    m: &SparseSym,
    mesh: &Mesh,
    tags: &[BoundaryTag],
) -> Result<ReducedSystem, FemError> {
    let constrained = mesh.tagged_vertices(tags);
    let index_map: Vec<usize> = (0..mesh.vertex_count()).filter(|&i| !constrained[i]).collect();
    if index_map.is_empty() {
        return Err(FemError::AllConstrained);
    }
    Ok(ReducedSystem {
        k: k.submatrix(&index_map),
        m: m.submatrix(&index_map),
        index_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_domain, ModelGeometry};
    use crate::mesh::{triangulate_half_domain, BoundaryEdge};

    fn unit_square() -> Mesh {
        // 3---2
        // | / |
        // 0---1
        Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![
                BoundaryEdge { vertices: [0, 1], tag: BoundaryTag::SymmetrySegment },
                BoundaryEdge { vertices: [1, 2], tag: BoundaryTag::OuterArc },
                BoundaryEdge { vertices: [2, 3], tag: BoundaryTag::OuterArc },
                BoundaryEdge { vertices: [3, 0], tag: BoundaryTag::InnerArc },
            ],
        )
        .unwrap()
    }

    fn unit_weights() -> WeightSpec {
        WeightSpec {
            stiffness: Coefficient::Constant(1.0),
            mass: Coefficient::Constant(1.0),
            potential: Coefficient::Constant(0.0),
            dirichlet_tags: vec![BoundaryTag::OuterArc, BoundaryTag::InnerArc],
        }
    }

    #[test]
    fn two_triangle_square_stiffness() {
        let (k, m) = assemble(&unit_square(), &unit_weights()).unwrap();
        // hand computation: each right triangle contributes
        // [[1/2,-1/2,0],[-1/2,1,-1/2],[0,-1/2,1/2]] at its right-angle vertex ordering
        let expected = [
            [1.0, -0.5, 0.0, -0.5],
            [-0.5, 1.0, -0.5, 0.0],
            [0.0, -0.5, 1.0, -0.5],
            [-0.5, 0.0, -0.5, 1.0],
        ];
        let kd = k.to_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert!((kd[i][j] - expected[i][j]).abs() < 1e-15, "K[{i}][{j}] = {}", kd[i][j]);
            }
        }
        // vertices on the shared diagonal see twice the mass diagonal of the others
        assert!((m.get(0, 0) - 2.0 * m.get(1, 1)).abs() < 1e-15);
        assert!((m.sum_all() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constants_in_kernel_and_mass_sums_to_area() {
        let g = ModelGeometry::from_radii(SpaceForm::Euclidean, 0.5, 1.0, 0.3);
        let mesh = triangulate_half_domain(&g, 0.05).unwrap();
        let (k, m) = assemble(&mesh, &unit_weights()).unwrap();
        let ones = vec![1.0; mesh.vertex_count()];
        let r = k.mul_vec(&ones);
        assert!(r.iter().all(|v| v.abs() < 1e-12));
        assert!((m.sum_all() - mesh.area()).abs() < 1e-12);
    }

    #[test]
    fn weight_spec_examples() {
        let e2 = make_domain(SpaceForm::Euclidean, 2, 0.5, 1.0, 0.2).unwrap();
        let w = weight_spec(&e2, 0, Sector::Minus).unwrap();
        assert_eq!(
            w.dirichlet_tags,
            vec![BoundaryTag::OuterArc, BoundaryTag::InnerArc, BoundaryTag::SymmetrySegment]
        );
        let w = weight_spec(&e2, 0, Sector::Plus).unwrap();
        assert_eq!(w.dirichlet_tags, vec![BoundaryTag::OuterArc, BoundaryTag::InnerArc]);

        let e3 = make_domain(SpaceForm::Euclidean, 3, 0.5, 1.0, 0.2).unwrap();
        let w = weight_spec(&e3, 0, Sector::Plus).unwrap();
        assert_eq!(w.potential.eval([0.3, 0.2]), 0.0);
        assert!(!w.dirichlet_tags.contains(&BoundaryTag::Axis));
        let w = weight_spec(&e3, 2, Sector::Plus).unwrap();
        assert!((w.potential.eval([0.3, 0.5]) - 8.0).abs() < 1e-15);
        assert!(w.dirichlet_tags.contains(&BoundaryTag::Axis));

        let s2 = make_domain(SpaceForm::Spherical, 2, 0.4, 1.2, 0.0).unwrap();
        let w = weight_spec(&s2, 0, Sector::Plus).unwrap();
        assert_eq!(w.mass.eval([0.0, 0.0]), 4.0);

        let h4 = make_domain(SpaceForm::Hyperbolic, 4, 0.4, 1.2, 0.0).unwrap();
        assert!(weight_spec(&h4, 0, Sector::Plus).is_err());
    }

    #[test]
    fn axis_potential_needs_axis_dirichlet() {
        let e3 = make_domain(SpaceForm::Euclidean, 3, 0.5, 1.0, 0.2).unwrap();
        let g = ModelGeometry::from_radii(SpaceForm::Euclidean, 0.5, 1.0, 0.2);
        let mesh = triangulate_half_domain(&g, 0.05).unwrap().with_axis();
        let mut w = weight_spec(&e3, 1, Sector::Plus).unwrap();
        assert!(assemble(&mesh, &w).is_ok());
        w.dirichlet_tags.retain(|t| *t != BoundaryTag::Axis);
        assert!(matches!(
            assemble(&mesh, &w),
            Err(FemError::SingularQuadraturePoint(..))
        ));
    }

    #[test]
    fn dirichlet_reduction_counts() {
        let g = ModelGeometry::from_radii(SpaceForm::Euclidean, 0.5, 1.0, 0.1);
        let mesh = triangulate_half_domain(&g, 0.05).unwrap();
        let w = unit_weights();
        let (k, m) = assemble(&mesh, &w).unwrap();
        let tags = [BoundaryTag::OuterArc, BoundaryTag::InnerArc, BoundaryTag::SymmetrySegment];
        let r = apply_dirichlet(&k, &m, &mesh, &tags).unwrap();
        let b = mesh.tagged_vertices(&tags).iter().filter(|x| **x).count();
        assert_eq!(r.k.dim(), mesh.vertex_count() - b);
        assert_eq!(r.k.dim(), mesh.interior_vertex_count());

        let all = Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![
                BoundaryEdge { vertices: [0, 1], tag: BoundaryTag::OuterArc },
                BoundaryEdge { vertices: [1, 2], tag: BoundaryTag::OuterArc },
                BoundaryEdge { vertices: [2, 0], tag: BoundaryTag::OuterArc },
            ],
        )
        .unwrap();
        let (k, m) = assemble(&all, &w).unwrap();
        assert_eq!(
            apply_dirichlet(&k, &m, &all, &[BoundaryTag::OuterArc]).unwrap_err(),
            FemError::AllConstrained
        );
    }

    #[test]
    fn sparse_basics() {
        let a = SparseSym::from_dense(&[
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, 2.0],
            vec![0.0, 2.0, 5.0],
        ]);
        assert_eq!(a.nnz(), 5);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]), vec![5.0, 6.0, 7.0]);
        assert_eq!(a.get(2, 1), 2.0);
        let p = a.permuted(&[2, 0, 1]);
        assert_eq!(p.get(2, 0), a.get(0, 1));
        let s = a.submatrix(&[2, 0]);
        assert_eq!(s.to_dense(), vec![vec![5.0, 0.0], vec![0.0, 4.0]]);
        let b = a.add_scaled(&SparseSym::identity(3), -1.0);
        assert_eq!(b.diagonal(), vec![3.0, 2.0, 4.0]);
    }
}
