//! Shape derivative of `lambda_1^-` with respect to the hole offset.
//!
//! Moving the hole along the first axis changes the odd eigenvalue at rate
//! `int_{hole arc} |du/d eta|^2 (eta . v) d sigma`, with `eta` the unit normal
//! pointing from the hole into the domain and `v` the velocity of the hole
//! boundary. Normal derivatives come from the constant gradient of the
//! triangle adjacent to each boundary edge.

use crate::geometry::{embed_boundary_point, DomainSpec, GeometryError, Point, SpaceForm};
use crate::mesh::{BoundaryTag, Mesh};
use crate::spectrum::{lambda_2, minus_levels_on, lambda_minus_on, Discretization, Setup, SpectrumError};
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ShapeError {
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("mesh has no boundary edges tagged {0}")]
    TagEmpty(BoundaryTag),
    #[error("the Hadamard rate needs a positive offset; use the centered difference at t = 0")]
    ZeroOffset,
    #[error("extremality defect is defined for the concentric shell only, got t = {0}")]
    NonZeroOffset(f64),
    #[error("step {delta} must lie in (0, {limit})")]
    StepTooLarge { delta: f64, limit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeTrace {
    pub vertices: [usize; 2],
    pub midpoint: Point,
    /// Unit normal pointing into the domain.
    pub normal: [f64; 2],
    /// Gradient of the adjacent element dotted with `normal`.
    pub derivative: f64,
    pub length: f64,
    /// Third vertex of the adjacent triangle.
    pub opposite: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryTrace {
    pub tag: BoundaryTag,
    pub edges: Vec<EdgeTrace>,
}

pub fn normal_derivative_on(mesh: &Mesh, field: &[f64], tag: BoundaryTag) -> Result<BoundaryTrace, ShapeError> {
    let owners = mesh.edge_triangles();
    let verts = mesh.vertices();
    let mut edges = Vec::new();
    for e in mesh.boundary_edges().iter().filter(|e| e.tag == tag) {
        let [a, b] = e.vertices;
        let key = (a.min(b), a.max(b));
        let tri = mesh.triangles()[owners[&key][0]];
        let c = *tri.iter().find(|&&v| v != a && v != b).unwrap();
        let (pa, pb, pc) = (verts[a], verts[b], verts[c]);
        let d = [pb[0] - pa[0], pb[1] - pa[1]];
        let length = d[0].hypot(d[1]);
        let mut normal = [-d[1] / length, d[0] / length];
        if normal[0] * (pc[0] - pa[0]) + normal[1] * (pc[1] - pa[1]) < 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        let (grad, _) = crate::fem::hat_gradients(pa, pb, pc);
        let g = [
            field[a] * grad[0][0] + field[b] * grad[1][0] + field[c] * grad[2][0],
            field[a] * grad[0][1] + field[b] * grad[1][1] + field[c] * grad[2][1],
        ];
        edges.push(EdgeTrace {
            vertices: [a, b],
            midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
            normal,
            derivative: g[0] * normal[0] + g[1] * normal[1],
            length,
            opposite: c,
        });
    }
    if edges.is_empty() {
        return Err(ShapeError::TagEmpty(tag));
    }
    Ok(BoundaryTrace { tag, edges })
}

/// Boundary integral of the Hadamard formula for a normalized odd
/// eigenfunction `u` on `mesh`.
pub fn hadamard_integral(spec: &DomainSpec, mesh: &Mesh, u: &[f64]) -> Result<f64, ShapeError> {
    let trace = normal_derivative_on(mesh, u, BoundaryTag::InnerArc)?;
    let form = spec.form();
    let hole = mesh.inner_circle();
    let mut sum = 0.0;
    for e in &trace.edges {
        // weights are evaluated on the exact circle, not the chord
        let p = hole.map_or(e.midpoint, |c| c.snap(e.midpoint));
        let (dudn, dsigma, velocity) = match form {
            SpaceForm::Euclidean => {
                let area_factor = if spec.dim() == 3 { p[1] } else { 1.0 };
                (e.derivative, e.length * area_factor, (p[0] - spec.t()) / spec.r0())
            }
            _ => {
                let root_rho = form.conformal_factor(p).sqrt();
                let velocity = embed_boundary_point(spec, p)?.normal_velocity(form);
                (e.derivative / root_rho, e.length * root_rho, velocity)
            }
        };
        sum += dudn * dudn * velocity * dsigma;
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEstimate {
    /// First-order extrapolation `2 r_h/2 - r_h` over the two finest meshes,
    /// or the single-mesh rate without refinement.
    pub value: f64,
    /// Rate on the finest mesh.
    pub raw: f64,
    /// `|r_h/2 - r_h|`, the size of the extrapolation correction.
    pub error: Option<f64>,
}

pub fn hadamard_rate(spec: &DomainSpec, disc: &Discretization) -> Result<RateEstimate, ShapeError> {
    if spec.t() == 0.0 {
        return Err(ShapeError::ZeroOffset);
    }
    let levels = minus_levels_on(&Setup::new(spec, disc)?)?;
    let rates = levels
        .iter()
        .map(|l| hadamard_integral(spec, &l.mesh, &l.eigenfunction))
        .collect::<Result<Vec<_>, _>>()?;
    let raw = *rates.last().unwrap();
    // the one-sided trace converges at first order
    Ok(match rates.len() {
        1 => RateEstimate { value: raw, raw, error: None },
        _ => RateEstimate {
            value: 2.0 * raw - rates[0],
            raw,
            error: Some((raw - rates[0]).abs()),
        },
    })
}

/// Centered difference of `lambda_1^-` with the mesh topology frozen at `t`.
pub fn fd_rate(spec: &DomainSpec, disc: &Discretization, delta: f64) -> Result<f64, ShapeError> {
    let t = spec.t();
    let limit = t.min(spec.r1() - spec.r0() - t);
    if !(delta > 0.0 && delta < limit) {
        return Err(ShapeError::StepTooLarge { delta, limit });
    }
    centered_difference(&Setup::new(spec, disc)?, t, delta)
}

fn centered_difference(setup: &Setup, t: f64, delta: f64) -> Result<f64, ShapeError> {
    let (hi, lo) = rayon::join(
        || lambda_minus_on(&setup.moved(t + delta)),
        || lambda_minus_on(&setup.moved(t - delta)),
    );
    Ok((hi?.estimate.value - lo?.estimate.value) / (2.0 * delta))
}

/// Centered difference straddling the concentric position. Informational:
/// differentiability at `t = 0` is not part of the theory being checked.
pub fn centered_rate_at_zero(spec: &DomainSpec, disc: &Discretization, delta: f64) -> Result<f64, ShapeError> {
    if spec.t() != 0.0 {
        return Err(ShapeError::NonZeroOffset(spec.t()));
    }
    let limit = spec.r1() - spec.r0();
    if !(delta > 0.0 && delta < limit) {
        return Err(ShapeError::StepTooLarge { delta, limit });
    }
    centered_difference(&Setup::new(spec, disc)?, 0.0, delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    pub t: f64,
    pub hadamard_rate: f64,
    pub hadamard_raw: f64,
    pub hadamard_error: Option<f64>,
    pub fd_rate: f64,
    pub relative_gap: f64,
}

pub fn relative_gap(hadamard: f64, fd: f64) -> f64 {
    (hadamard - fd).abs() / fd.abs().max(1e-12)
}

pub fn rate_report(spec: &DomainSpec, disc: &Discretization, delta: f64) -> Result<RateReport, ShapeError> {
    let (h, fd) = rayon::join(|| hadamard_rate(spec, disc), || fd_rate(spec, disc, delta));
    let (h, fd) = (h?, fd?);
    Ok(RateReport {
        t: spec.t(),
        hadamard_rate: h.value,
        hadamard_raw: h.raw,
        hadamard_error: h.error,
        fd_rate: fd,
        relative_gap: relative_gap(h.value, fd),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectReport {
    pub defect: f64,
    /// (tag, mean of the summed squares, max relative deviation)
    pub components: Vec<(BoundaryTag, f64, f64)>,
}

/// Spread of `sum_i |du_i/d eta|^2` around each boundary circle, for the
/// even partner `even` and odd partner `odd` of the second eigenspace.
/// In 3D the fields are the `m = 0` and `m = 1` meridian profiles and their
/// azimuthal copies are accounted for by the weights `1/(2 pi)` and `1/pi`.
pub fn defect_from_fields(
    form: SpaceForm,
    dim: usize,
    mesh: &Mesh,
    even: &[f64],
    odd: &[f64],
) -> Result<DefectReport, ShapeError> {
    let (we, wo) = if dim == 3 {
        (0.5 / std::f64::consts::PI, 1.0 / std::f64::consts::PI)
    } else {
        (1.0, 1.0)
    };
    let mut components = Vec::new();
    for tag in [BoundaryTag::InnerArc, BoundaryTag::OuterArc] {
        let te = normal_derivative_on(mesh, even, tag)?;
        let to = normal_derivative_on(mesh, odd, tag)?;
        let sums: Vec<(f64, f64)> = te
            .edges
            .iter()
            .zip(&to.edges)
            .map(|(a, b)| {
                let rho = form.conformal_factor(a.midpoint);
                ((we * a.derivative.powi(2) + wo * b.derivative.powi(2)) / rho, a.length)
            })
            .collect();
        let total: f64 = sums.iter().map(|s| s.1).sum();
        let mean = sums.iter().map(|(v, l)| v * l).sum::<f64>() / total;
        let spread = sums.iter().map(|(v, _)| (v - mean).abs() / mean).fold(0.0, f64::max);
        components.push((tag, mean, spread));
    }
    let defect = components.iter().map(|c| c.2).fold(0.0, f64::max);
    Ok(DefectReport { defect, components })
}

pub fn extremality_defect(spec: &DomainSpec, disc: &Discretization) -> Result<DefectReport, ShapeError> {
    if spec.t() != 0.0 {
        return Err(ShapeError::NonZeroOffset(spec.t()));
    }
    let r = lambda_2(spec, disc)?;
    let minus = r.minus.expect("lambda_2 keeps the odd eigenfunction");
    let even = r.plus_second.expect("count >= 2 keeps a second even eigenfunction");
    defect_from_fields(spec.form(), spec.dim(), &minus.mesh, &even, &minus.eigenfunction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_domain, ModelGeometry};
    use crate::mesh::{triangulate_half_domain, BoundaryEdge};
    use crate::spectrum::lambda_minus;

    fn coarse() -> Discretization {
        Discretization::new(0.04, 0)
    }

    #[test]
    fn zero_field_has_zero_trace() {
        let g = ModelGeometry::from_radii(SpaceForm::Euclidean, 0.5, 1.0, 0.1);
        let mesh = triangulate_half_domain(&g, 0.05).unwrap();
        let u = vec![0.0; mesh.vertex_count()];
        let t = normal_derivative_on(&mesh, &u, BoundaryTag::InnerArc).unwrap();
        assert!(t.edges.iter().all(|e| e.derivative == 0.0));
        assert!(t.edges.iter().all(|e| (e.normal[0].hypot(e.normal[1]) - 1.0).abs() < 1e-12));
    }

    #[test]
    fn single_triangle_gradient() {
        let mesh = Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![
                BoundaryEdge { vertices: [0, 1], tag: BoundaryTag::InnerArc },
                BoundaryEdge { vertices: [1, 2], tag: BoundaryTag::OuterArc },
                BoundaryEdge { vertices: [2, 0], tag: BoundaryTag::SymmetrySegment },
            ],
        )
        .unwrap();
        // u = y: gradient (0, 1)
        let t = normal_derivative_on(&mesh, &[0.0, 0.0, 1.0], BoundaryTag::InnerArc).unwrap();
        assert_eq!(t.edges[0].normal, [0.0, 1.0]);
        assert!((t.edges[0].derivative - 1.0).abs() < 1e-15);
        let t = normal_derivative_on(&mesh, &[0.0, 0.0, 1.0], BoundaryTag::OuterArc).unwrap();
        let n = t.edges[0].normal;
        assert!((n[0] + 0.5f64.sqrt()).abs() < 1e-15 && (n[1] + 0.5f64.sqrt()).abs() < 1e-15);
        assert!((t.edges[0].derivative + 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            normal_derivative_on(&mesh, &[0.0; 3], BoundaryTag::Axis),
            Err(ShapeError::TagEmpty(BoundaryTag::Axis))
        ));
    }

    #[test]
    fn concentric_trace_follows_sine() {
        let spec = make_domain(SpaceForm::Euclidean, 2, 0.5, 1.0, 0.0).unwrap();
        let s = lambda_minus(&spec, &Discretization::new(0.02, 0)).unwrap();
        let t = normal_derivative_on(&s.mesh, &s.eigenfunction, BoundaryTag::InnerArc).unwrap();
        let ratios: Vec<f64> = t
            .edges
            .iter()
            .filter_map(|e| {
                let p = s.mesh.vertices()[e.opposite];
                let theta = p[1].atan2(p[0]);
                (theta.sin() > 1e-9).then(|| e.derivative / theta.sin())
            })
            .collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let spread = ratios.iter().map(|r| (r - mean).abs() / mean).fold(0.0, f64::max);
        assert!(spread <= 0.02, "spread {spread}");
    }

    #[test]
    fn linear_fields_have_no_defect() {
        let g = ModelGeometry::from_radii(SpaceForm::Euclidean, 0.5, 1.0, 0.0);
        let mesh = triangulate_half_domain(&g, 0.05).unwrap();
        let x: Vec<f64> = mesh.vertices().iter().map(|p| p[0]).collect();
        let y: Vec<f64> = mesh.vertices().iter().map(|p| p[1]).collect();
        let r = defect_from_fields(SpaceForm::Euclidean, 2, &mesh, &x, &y).unwrap();
        assert!(r.defect < 1e-12, "{}", r.defect);
    }

    #[test]
    fn rate_is_negative_and_needs_offset() {
        let spec = make_domain(SpaceForm::Euclidean, 2, 0.5, 1.0, 0.2).unwrap();
        assert!(hadamard_rate(&spec, &coarse()).unwrap().value < 0.0);
        let zero = make_domain(SpaceForm::Euclidean, 2, 0.5, 1.0, 0.0).unwrap();
        assert!(matches!(hadamard_rate(&zero, &coarse()), Err(ShapeError::ZeroOffset)));
        assert!(matches!(
            fd_rate(&spec, &coarse(), 0.25),
            Err(ShapeError::StepTooLarge { .. })
        ));
        assert!(matches!(extremality_defect(&spec, &coarse()), Err(ShapeError::NonZeroOffset(_))));
    }

    #[test]
    fn centered_rate_at_zero_vanishes() {
        let zero = make_domain(SpaceForm::Euclidean, 2, 0.5, 1.0, 0.0).unwrap();
        let c = centered_rate_at_zero(&zero, &coarse(), 1e-3).unwrap();
        let spec = make_domain(SpaceForm::Euclidean, 2, 0.5, 1.0, 0.1).unwrap();
        let r = fd_rate(&spec, &coarse(), 1e-3).unwrap();
        assert!(c.abs() < 1e-2 * r.abs(), "{c} vs {r}");
    }
}
