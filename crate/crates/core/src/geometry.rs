//! Shell domains in the three space forms and their planar conformal chart.
//!
//! Every supported domain is drawn in a single 2D chart: the plane itself for
//! Euclidean space, stereographic projection from the antipode of the pole
//! `P = (1, 0, ..., 0)` for the sphere, and the Poincaré disk for hyperbolic
//! space. In each chart both geodesic circles are Euclidean circles and the
//! metric is `rho(p) * |dp|^2`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("radii must be positive (r0 = {r0}, r1 = {r1})")]
    NonPositiveRadius { r0: f64, r1: f64 },
    #[error("inner radius {r0} must be smaller than outer radius {r1}")]
    RadiiOutOfOrder { r0: f64, r1: f64 },
    #[error("offset {t} must lie in [0, {limit})")]
    OffsetTooLarge { t: f64, limit: f64 },
    #[error("offset {0} is negative")]
    NegativeOffset(f64),
    #[error("spherical outer radius {0} must be smaller than pi")]
    SphereTooLarge(f64),
    #[error("dimension {dim} is not supported for {form} domains{detail}")]
    UnsupportedDimension {
        form: SpaceForm,
        dim: usize,
        detail: &'static str,
    },
    #[error("chart point ({0}, {1}) lies outside the model")]
    PointOutsideModel(f64, f64),
    #[error("euclidean space has no quadric model")]
    NoQuadricModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceForm {
    Euclidean,
    Spherical,
    Hyperbolic,
}

impl SpaceForm {
    pub const ALL: [SpaceForm; 3] = [
        SpaceForm::Euclidean,
        SpaceForm::Spherical,
        SpaceForm::Hyperbolic,
    ];

    /// Warping profile `a(r)` of the polar metric `dr^2 + a(r)^2 g_sphere`.
    pub fn profile(self, r: f64) -> f64 {
        match self {
            SpaceForm::Euclidean => r,
            SpaceForm::Spherical => r.sin(),
            SpaceForm::Hyperbolic => r.sinh(),
        }
    }

    /// Chart radius of a point at geodesic distance `d` from the chart center.
    pub fn chart_radius(self, d: f64) -> f64 {
        match self {
            SpaceForm::Euclidean => d,
            SpaceForm::Spherical => (0.5 * d).tan(),
            SpaceForm::Hyperbolic => (0.5 * d).tanh(),
        }
    }

    /// Inverse of [`SpaceForm::chart_radius`].
    pub fn geodesic_radius(self, r: f64) -> f64 {
        match self {
            SpaceForm::Euclidean => r,
            SpaceForm::Spherical => 2.0 * r.atan(),
            SpaceForm::Hyperbolic => 2.0 * r.atanh(),
        }
    }

    /// Conformal factor `rho` of the chart metric at `p`.
    pub fn conformal_factor(self, p: Point) -> f64 {
        let r2 = p[0] * p[0] + p[1] * p[1];
        match self {
            SpaceForm::Euclidean => 1.0,
            SpaceForm::Spherical => 4.0 / ((1.0 + r2) * (1.0 + r2)),
            SpaceForm::Hyperbolic => 4.0 / ((1.0 - r2) * (1.0 - r2)),
        }
    }

    pub fn is_curved(self) -> bool {
        self != SpaceForm::Euclidean
    }

    /// Ambient bilinear form: Euclidean for the sphere, Minkowski for hyperbolic space.
    pub fn ambient_dot(self, x: &[f64], y: &[f64]) -> f64 {
        let s: f64 = x.iter().zip(y).skip(1).map(|(a, b)| a * b).sum();
        match self {
            SpaceForm::Hyperbolic => s - x[0] * y[0],
            _ => s + x[0] * y[0],
        }
    }
}

impl fmt::Display for SpaceForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SpaceForm::Euclidean => "euclidean",
            SpaceForm::Spherical => "spherical",
            SpaceForm::Hyperbolic => "hyperbolic",
        };
        f.write_str(s)
    }
}

impl FromStr for SpaceForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "e" => Ok(SpaceForm::Euclidean),
            "spherical" | "sphere" | "s" => Ok(SpaceForm::Spherical),
            "hyperbolic" | "h" => Ok(SpaceForm::Hyperbolic),
            other => Err(format!("unknown space form `{other}`")),
        }
    }
}

/// A validated shell `B1 \ closure(B0(t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    form: SpaceForm,
    dim: usize,
    r0: f64,
    r1: f64,
    t: f64,
}

/// Whether eccentric (`t > 0`) shells of this form and dimension can be discretized.
pub fn supports_offset(form: SpaceForm, dim: usize) -> bool {
    matches!(
        (form, dim),
        (SpaceForm::Euclidean, 2)
            | (SpaceForm::Euclidean, 3)
            | (SpaceForm::Spherical, 2)
            | (SpaceForm::Hyperbolic, 2)
    )
}

pub fn make_domain(
    form: SpaceForm,
    dim: usize,
    r0: f64,
    r1: f64,
    t: f64,
) -> Result<DomainSpec, GeometryError> {
    DomainSpec::new(form, dim, r0, r1, t)
}

impl DomainSpec {
    pub fn new(
        form: SpaceForm,
        dim: usize,
        r0: f64,
        r1: f64,
        t: f64,
    ) -> Result<Self, GeometryError> {
        if !(r0 > 0.0 && r1 > 0.0) {
            return Err(GeometryError::NonPositiveRadius { r0, r1 });
        }
        if r0 >= r1 || !r1.is_finite() {
            return Err(GeometryError::RadiiOutOfOrder { r0, r1 });
        }
        if form == SpaceForm::Spherical && r1 >= PI {
            return Err(GeometryError::SphereTooLarge(r1));
        }
        if t.is_nan() || t < 0.0 {
            return Err(GeometryError::NegativeOffset(t));
        }
        if t >= r1 - r0 {
            return Err(GeometryError::OffsetTooLarge { t, limit: r1 - r0 });
        }
        if dim < 2 {
            return Err(GeometryError::UnsupportedDimension {
                form,
                dim,
                detail: "",
            });
        }
        if t > 0.0 && !supports_offset(form, dim) {
            return Err(GeometryError::UnsupportedDimension {
                form,
                dim,
                detail: " with a nonzero offset",
            });
        }
        Ok(DomainSpec {
            form,
            dim,
            r0,
            r1,
            t,
        })
    }

    pub fn form(&self) -> SpaceForm {
        self.form
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn r0(&self) -> f64 {
        self.r0
    }
    pub fn r1(&self) -> f64 {
        self.r1
    }
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Same shell with another offset.
    pub fn with_offset(&self, t: f64) -> Result<Self, GeometryError> {
        DomainSpec::new(self.form, self.dim, self.r0, self.r1, t)
    }

    /// Center of the hole, `C(t)`, in the quadric model.
    pub fn hole_center(&self) -> Result<Vec<f64>, GeometryError> {
        let mut c = vec![0.0; 3];
        match self.form {
            SpaceForm::Euclidean => return Err(GeometryError::NoQuadricModel),
            SpaceForm::Spherical => {
                c[0] = self.t.cos();
                c[1] = self.t.sin();
            }
            SpaceForm::Hyperbolic => {
                c[0] = self.t.cosh();
                c[1] = self.t.sinh();
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    pub fn distance_to(&self, p: Point) -> f64 {
        (((p[0] - self.center[0]).powi(2) + (p[1] - self.center[1]).powi(2)).sqrt() - self.radius)
            .abs()
    }

    /// Radial projection of `p` onto the circle.
    pub fn snap(&self, p: Point) -> Point {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let r = (dx * dx + dy * dy).sqrt();
        [
            self.center[0] + self.radius * dx / r,
            self.center[1] + self.radius * dy / r,
        ]
    }

    /// Point at polar angle `theta` measured from this circle's center.
    pub fn at(&self, theta: f64) -> Point {
        [
            self.center[0] + self.radius * theta.cos(),
            self.center[1] + self.radius * theta.sin(),
        ]
    }
}

/// The two boundary circles of a shell in its planar chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelGeometry {
    pub form: SpaceForm,
    pub outer: Circle,
    pub inner: Circle,
}

impl ModelGeometry {
    /// Chart circles for radii `r0 < r1` with the hole center at signed
    /// geodesic offset `t` along the first axis. Negative offsets give the
    /// mirror image and are only used for symmetric difference quotients.
    pub fn from_radii(form: SpaceForm, r0: f64, r1: f64, t: f64) -> Self {
        let outer = Circle {
            center: [0.0, 0.0],
            radius: form.chart_radius(r1),
        };
        let hi = form.chart_radius(t + r0);
        let lo = form.chart_radius(t - r0);
        let inner = Circle {
            center: [0.5 * (hi + lo), 0.0],
            radius: 0.5 * (hi - lo),
        };
        ModelGeometry { form, outer, inner }
    }

    /// Offset of the inner circle center from the outer one.
    pub fn center_gap(&self) -> f64 {
        let dx = self.inner.center[0] - self.outer.center[0];
        let dy = self.inner.center[1] - self.outer.center[1];
        (dx * dx + dy * dy).sqrt()
    }

    /// Thinnest width of the annulus.
    pub fn min_gap(&self) -> f64 {
        self.outer.radius - self.inner.radius - self.center_gap()
    }

    pub fn conformal_factor(&self, p: Point) -> f64 {
        self.form.conformal_factor(p)
    }
}

pub fn model_circles(spec: &DomainSpec) -> Result<ModelGeometry, GeometryError> {
    if spec.form.is_curved() && spec.dim != 2 {
        return Err(GeometryError::UnsupportedDimension {
            form: spec.form,
            dim: spec.dim,
            detail: " in the planar chart",
        });
    }
    Ok(ModelGeometry::from_radii(
        spec.form, spec.r0, spec.r1, spec.t,
    ))
}

/// A chart point lifted to the quadric model, together with the hole center.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPoint {
    pub coords: Vec<f64>,
    pub center: Vec<f64>,
}

/// Inverse stereographic (resp. Poincaré) map of a chart point, without a spec.
pub fn lift(form: SpaceForm, p: Point) -> Result<Vec<f64>, GeometryError> {
    let r2 = p[0] * p[0] + p[1] * p[1];
    match form {
        SpaceForm::Euclidean => Err(GeometryError::NoQuadricModel),
        SpaceForm::Spherical => {
            if !r2.is_finite() {
                return Err(GeometryError::PointOutsideModel(p[0], p[1]));
            }
            let d = 1.0 + r2;
            Ok(vec![(1.0 - r2) / d, 2.0 * p[0] / d, 2.0 * p[1] / d])
        }
        SpaceForm::Hyperbolic => {
            if !(r2 < 1.0) {
                return Err(GeometryError::PointOutsideModel(p[0], p[1]));
            }
            let d = 1.0 - r2;
            Ok(vec![(1.0 + r2) / d, 2.0 * p[0] / d, 2.0 * p[1] / d])
        }
    }
}

/// Forward chart map; the same formula serves the sphere and the hyperboloid.
pub fn project(x: &[f64]) -> Point {
    [x[1] / (1.0 + x[0]), x[2] / (1.0 + x[0])]
}

pub fn embed_boundary_point(spec: &DomainSpec, p: Point) -> Result<EmbeddingPoint, GeometryError> {
    let coords = lift(spec.form, p)?;
    let center = spec.hole_center()?;
    Ok(EmbeddingPoint { coords, center })
}

impl EmbeddingPoint {
    /// Killing field generating the motion of the hole along its ray.
    pub fn killing_field(&self, form: SpaceForm) -> Vec<f64> {
        let x = &self.coords;
        match form {
            SpaceForm::Hyperbolic => vec![x[1], x[0], 0.0],
            _ => vec![-x[1], x[0], 0.0],
        }
    }

    /// Normal velocity `eta . v` of the moving hole boundary at this point,
    /// with `eta` the unit normal pointing away from the hole center.
    pub fn normal_velocity(&self, form: SpaceForm) -> f64 {
        let xc = form.ambient_dot(&self.coords, &self.center);
        let vx = self.killing_field(form);
        let num = -form.ambient_dot(&self.center, &vx);
        let den = match form {
            SpaceForm::Hyperbolic => (xc * xc - 1.0).max(0.0).sqrt(),
            _ => (1.0 - xc * xc).max(0.0).sqrt(),
        };
        num / den
    }
}
