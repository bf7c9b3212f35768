//! `lambda_1`, `lambda_1^-`, `lambda_2^+` and `lambda_2` of an eccentric shell.
//!
//! The reflection `x_n -> -x_n` splits the spectrum into an even (`Plus`)
//! and an odd (`Minus`) part and `lambda_2 = min(lambda_1^-, lambda_2^+)`, so
//! only the half domain is ever meshed. In 3D the half domain is replaced by
//! the meridian half-plane and the azimuthal modes `m = 0, 1, 2`: the odd part
//! is the `sin(phi)` copy of `m = 1`, the even part collects `m = 0` and the
//! `cos(m phi)` copies.

use crate::eigen::{smallest_eigs, EigenError, DEFAULT_TOL};
use crate::fem::{apply_dirichlet, assemble, weight_spec, FemError, Sector, WeightSpec};
use crate::geometry::{model_circles, DomainSpec, GeometryError, ModelGeometry, SpaceForm};
use crate::mesh::{plan_layers, refine_uniform, triangulate_with_plan, LayerPlan, Mesh, MeshError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

const MIN_INTERIOR: usize = 10;
const MAX_MODE: usize = 2;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("invalid discretization: {0}")]
    Discretization(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub h: f64,
    pub refinements: usize,
    pub eig_tol: f64,
    pub count: usize,
}

impl Discretization {
    pub fn new(h: f64, refinements: usize) -> Self {
        Discretization {
            h,
            refinements,
            eig_tol: DEFAULT_TOL,
            count: 4,
        }
    }

    /// Edge length used unless a caller overrides it: fine enough that the
    /// thinnest gap over a sweep to 90% of the admissible offset still holds
    /// two cells.
    pub fn default_for(form: SpaceForm) -> Self {
        match form {
            SpaceForm::Hyperbolic => Discretization::new(0.012, 1),
            _ => Discretization::new(0.02, 1),
        }
    }

    pub fn validate(&self) -> Result<(), SpectrumError> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(SpectrumError::Discretization(format!("h = {} must be positive", self.h)));
        }
        if self.count < 2 {
            return Err(SpectrumError::Discretization(format!("count = {} must be at least 2", self.count)));
        }
        if !(self.eig_tol > 0.0) {
            return Err(SpectrumError::Discretization(format!("eig_tol = {} must be positive", self.eig_tol)));
        }
        Ok(())
    }
}

/// A discrete eigenvalue on the finest mesh, with the Richardson pair from
/// the next coarser level when one exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub extrapolated: Option<f64>,
    pub error: Option<f64>,
}

impl Estimate {
    fn from_levels(coarse: Option<f64>, fine: f64) -> Self {
        match coarse {
            Some(c) => Estimate {
                value: fine,
                extrapolated: Some((4.0 * fine - c) / 3.0),
                error: Some((fine - c).abs() / 3.0),
            },
            None => Estimate {
                value: fine,
                extrapolated: None,
                error: None,
            },
        }
    }

    pub fn error_or_zero(&self) -> f64 {
        self.error.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "minus")]
    MinusBranch,
    #[serde(rename = "plus")]
    PlusBranch,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::MinusBranch => "minus",
            Branch::PlusBranch => "plus",
        })
    }
}

/// Mesh topology for one shell: the layer plan is fixed here so that nearby
/// offsets can be meshed with identical connectivity.
#[derive(Debug, Clone)]
pub struct Setup {
    form: SpaceForm,
    dim: usize,
    r0: f64,
    r1: f64,
    geom: ModelGeometry,
    plan: LayerPlan,
    disc: Discretization,
}

impl Setup {
    pub fn new(spec: &DomainSpec, disc: &Discretization) -> Result<Self, SpectrumError> {
        disc.validate()?;
        weight_spec(spec, 0, Sector::Plus)?;
        let geom = model_circles(spec)?;
        let plan = plan_layers(&geom, disc.h)?;
        Ok(Setup {
            form: spec.form(),
            dim: spec.dim(),
            r0: spec.r0(),
            r1: spec.r1(),
            geom,
            plan,
            disc: *disc,
        })
    }

    /// Same topology, hole moved to signed offset `t`.
    pub fn moved(&self, t: f64) -> Setup {
        Setup {
            geom: ModelGeometry::from_radii(self.form, self.r0, self.r1, t),
            ..self.clone()
        }
    }

    pub fn form(&self) -> SpaceForm {
        self.form
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn geometry(&self) -> &ModelGeometry {
        &self.geom
    }
    pub fn plan(&self) -> &LayerPlan {
        &self.plan
    }
    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    /// Weights depend only on form, dimension, mode and sector.
    fn weights(&self, mode: usize, sector: Sector) -> Result<WeightSpec, SpectrumError> {
        let spec = DomainSpec::new(self.form, self.dim, self.r0, self.r1, 0.0)?;
        Ok(weight_spec(&spec, mode, sector)?)
    }

    /// The two finest meshes (coarse first); a single mesh without refinement.
    pub fn meshes(&self) -> Result<Vec<Arc<Mesh>>, SpectrumError> {
        let mut mesh = triangulate_with_plan(&self.geom, &self.plan)?;
        if self.dim == 3 {
            mesh = mesh.with_axis();
        }
        let interior = mesh.interior_vertex_count();
        if interior < MIN_INTERIOR {
            return Err(MeshError::MeshTooCoarse(interior).into());
        }
        let mut levels = vec![Arc::new(mesh)];
        for _ in 0..self.disc.refinements {
            let next = Arc::new(refine_uniform(levels.last().unwrap()));
            levels.push(next);
            if levels.len() > 2 {
                levels.remove(0);
            }
        }
        Ok(levels)
    }
}

/// Eigenpairs of one sector or mode on one mesh.
#[derive(Debug, Clone)]
pub struct SectorSolve {
    pub values: Vec<f64>,
    /// Nodal values on every mesh vertex (zero on Dirichlet vertices),
    /// normalized in the sector's mass inner product.
    pub vectors: Vec<Vec<f64>>,
    pub ndof: usize,
}

pub fn solve_sector(mesh: &Mesh, w: &WeightSpec, count: usize, tol: f64) -> Result<SectorSolve, SpectrumError> {
    let (k, m) = assemble(mesh, w)?;
    let reduced = apply_dirichlet(&k, &m, mesh, &w.dirichlet_tags)?;
    let ndof = reduced.k.dim();
    let res = smallest_eigs(&reduced.k, &reduced.m, count.min(ndof), 0.0, tol)?;
    let vectors = res
        .vectors
        .iter()
        .map(|x| reduced.expand(x, mesh.vertex_count()))
        .collect();
    Ok(SectorSolve {
        values: res.values,
        vectors,
        ndof,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Job {
    Sector(Sector),
    Mode(usize),
}

fn jobs(dim: usize, minus_only: bool) -> Vec<Job> {
    match (dim, minus_only) {
        (3, true) => vec![Job::Mode(1)],
        (3, false) => (0..=MAX_MODE).map(Job::Mode).collect(),
        (_, true) => vec![Job::Sector(Sector::Minus)],
        (_, false) => vec![Job::Sector(Sector::Minus), Job::Sector(Sector::Plus)],
    }
}

struct LevelSolves {
    meshes: Vec<Arc<Mesh>>,
    /// `solves[level][job]`
    solves: Vec<Vec<SectorSolve>>,
    jobs: Vec<Job>,
}

impl LevelSolves {
    fn run(setup: &Setup, minus_only: bool) -> Result<Self, SpectrumError> {
        let meshes = setup.meshes()?;
        let jobs = jobs(setup.dim, minus_only);
        let tasks: Vec<(usize, Job)> = (0..meshes.len())
            .flat_map(|l| jobs.iter().map(move |&j| (l, j)))
            .collect();
        let results: Vec<Result<SectorSolve, SpectrumError>> = tasks
            .par_iter()
            .map(|&(l, job)| {
                let w = match job {
                    Job::Sector(s) => setup.weights(0, s)?,
                    Job::Mode(m) => setup.weights(m, Sector::Plus)?,
                };
                solve_sector(&meshes[l], &w, setup.disc.count, setup.disc.eig_tol)
            })
            .collect();
        let mut solves = vec![Vec::with_capacity(jobs.len()); meshes.len()];
        for ((l, _), r) in tasks.iter().zip(results) {
            solves[*l].push(r?);
        }
        Ok(LevelSolves { meshes, solves, jobs })
    }

    fn find(&self, level: usize, job: Job) -> &SectorSolve {
        let i = self.jobs.iter().position(|&j| j == job).unwrap();
        &self.solves[level][i]
    }

    fn finest(&self) -> usize {
        self.meshes.len() - 1
    }

    fn estimate(&self, job: Job, index: usize) -> Estimate {
        let f = self.finest();
        let coarse = (f > 0).then(|| self.find(f - 1, job).values[index]);
        Estimate::from_levels(coarse, self.find(f, job).values[index])
    }

    fn minus_job(&self) -> Job {
        if self.jobs.contains(&Job::Mode(1)) {
            Job::Mode(1)
        } else {
            Job::Sector(Sector::Minus)
        }
    }

    /// Even-sector eigenvalues: the Plus sector in 2D, the merge of all
    /// computed azimuthal modes in 3D.
    fn plus_list(&self) -> Vec<Estimate> {
        let mut out: Vec<Estimate> = Vec::new();
        for &job in &self.jobs {
            if job == Job::Sector(Sector::Minus) {
                continue;
            }
            let n = self.find(self.finest(), job).values.len();
            out.extend((0..n).map(|i| self.estimate(job, i)));
        }
        out.sort_by(|a, b| a.value.total_cmp(&b.value));
        out
    }
}

/// First odd eigenpair.
#[derive(Debug, Clone)]
pub struct MinusSolution {
    pub estimate: Estimate,
    pub values: Vec<f64>,
    /// Nodal values on `mesh`, positive inside, unit weighted L2 norm.
    pub eigenfunction: Vec<f64>,
    pub mesh: Arc<Mesh>,
    pub ndof: usize,
}

fn minus_solution(ls: &LevelSolves) -> MinusSolution {
    let job = ls.minus_job();
    let f = ls.finest();
    let s = ls.find(f, job);
    let mut u = s.vectors[0].clone();
    if u.iter().sum::<f64>() < 0.0 {
        u.iter_mut().for_each(|v| *v = -*v);
    }
    MinusSolution {
        estimate: ls.estimate(job, 0),
        values: s.values.clone(),
        eigenfunction: u,
        mesh: ls.meshes[f].clone(),
        ndof: s.ndof,
    }
}

/// First odd eigenpair on each computed mesh level, coarse first.
#[derive(Debug, Clone)]
pub struct MinusLevel {
    pub value: f64,
    pub eigenfunction: Vec<f64>,
    pub mesh: Arc<Mesh>,
}

pub fn minus_levels_on(setup: &Setup) -> Result<Vec<MinusLevel>, SpectrumError> {
    let ls = LevelSolves::run(setup, true)?;
    let job = ls.minus_job();
    Ok((0..ls.meshes.len())
        .map(|l| {
            let s = ls.find(l, job);
            let mut u = s.vectors[0].clone();
            if u.iter().sum::<f64>() < 0.0 {
                u.iter_mut().for_each(|v| *v = -*v);
            }
            MinusLevel {
                value: s.values[0],
                eigenfunction: u,
                mesh: ls.meshes[l].clone(),
            }
        })
        .collect())
}

pub fn lambda_minus_on(setup: &Setup) -> Result<MinusSolution, SpectrumError> {
    Ok(minus_solution(&LevelSolves::run(setup, true)?))
}

pub fn lambda_minus(spec: &DomainSpec, disc: &Discretization) -> Result<MinusSolution, SpectrumError> {
    lambda_minus_on(&Setup::new(spec, disc)?)
}

pub fn lambda_plus_list(spec: &DomainSpec, disc: &Discretization) -> Result<Vec<Estimate>, SpectrumError> {
    let ls = LevelSolves::run(&Setup::new(spec, disc)?, false)?;
    let mut list = ls.plus_list();
    list.truncate(disc.count);
    Ok(list)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumResult {
    pub form: SpaceForm,
    pub dim: usize,
    pub r0: f64,
    pub r1: f64,
    pub t: f64,
    pub lambda1: Estimate,
    pub lambda1_minus: Estimate,
    pub lambda2_plus: Estimate,
    pub lambda2: Estimate,
    pub branch: Branch,
    /// `lambda1_minus` and `lambda2_plus` agree within their error estimates.
    pub tie: bool,
    /// The gap `lambda1_minus - lambda1` is below the error estimates.
    pub gap_unresolved: bool,
    pub plus_values: Vec<Estimate>,
    pub minus_values: Vec<f64>,
    pub ndof_minus: usize,
    pub ndof_plus: usize,
    pub vertices: usize,
    #[serde(skip)]
    pub minus: Option<MinusSolution>,
    /// Second even eigenfunction on the finest mesh (the `m = 0` list's
    /// second vector in 3D), kept for the extremality check.
    #[serde(skip)]
    pub plus_second: Option<Vec<f64>>,
}

fn within(a: &Estimate, b: &Estimate) -> bool {
    let slack = a.error_or_zero() + b.error_or_zero();
    (a.value - b.value).abs() <= slack.max(1e-10 * a.value.abs().max(b.value.abs()))
}

pub fn lambda_2(spec: &DomainSpec, disc: &Discretization) -> Result<SpectrumResult, SpectrumError> {
    let setup = Setup::new(spec, disc)?;
    let ls = LevelSolves::run(&setup, false)?;
    let minus = minus_solution(&ls);
    let plus = ls.plus_list();
    let (lambda1, lambda2_plus) = (plus[0], plus[1]);
    let lambda1_minus = minus.estimate;
    let tie = within(&lambda1_minus, &lambda2_plus);
    let (branch, lambda2) = if tie || lambda1_minus.value <= lambda2_plus.value {
        (Branch::MinusBranch, lambda1_minus)
    } else {
        (Branch::PlusBranch, lambda2_plus)
    };
    let gap = lambda1_minus.value - lambda1.value;
    let gap_unresolved = gap <= lambda1_minus.error_or_zero() + lambda1.error_or_zero();
    let f = ls.finest();
    let (plus_job, plus_index) = if setup.dim == 3 {
        (Job::Mode(0), 1)
    } else {
        (Job::Sector(Sector::Plus), 1)
    };
    let plus_solve = ls.find(f, plus_job);
    let ndof_plus = plus_solve.ndof;
    Ok(SpectrumResult {
        form: spec.form(),
        dim: spec.dim(),
        r0: spec.r0(),
        r1: spec.r1(),
        t: spec.t(),
        lambda1,
        lambda1_minus,
        lambda2_plus,
        lambda2,
        branch,
        tie,
        gap_unresolved,
        plus_values: plus.into_iter().take(disc.count).collect(),
        minus_values: minus.values.clone(),
        ndof_minus: minus.ndof,
        ndof_plus,
        vertices: ls.meshes[f].vertex_count(),
        plus_second: plus_solve.vectors.get(plus_index).cloned(),
        minus: Some(minus),
    })
}
