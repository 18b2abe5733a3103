//! Python bindings: surfaces, meshes, assembled Stokes problems and sweeps.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use surfstokes_core::assembly::{assemble, AssemblyConfig, PenaltyNormal, SaddleSystem, TaylorHoodSpace};
use surfstokes_core::geometry::{AnalyticSurface, Point3};
use surfstokes_core::mesh::{build_base_mesh, BaseMesh};
use surfstokes_core::mms::{eval_errors, ManufacturedCase, MmsKind};
use surfstokes_core::solver::{
    a_condition, schur_spectrum, solve_direct, solve_minres, MinresOptions, PreconditionerKind,
};
use surfstokes_core::study::{self, LevelRange, SolverKind, StudyConfig};
use surfstokes_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_)
        | Error::UnsupportedSurface(_)
        | Error::UnsupportedDegree(_)
        | Error::UnsupportedExactness(_)
        | Error::InvalidSequence(_)
        | Error::DimensionMismatch { .. }
        | Error::OutOfTubularNeighborhood { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn point(x: [f64; 3]) -> Point3 {
    Point3::new(x[0], x[1], x[2])
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

#[pyclass(name = "Surface", module = "surfstokes", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySurface {
    inner: AnalyticSurface,
}

#[pymethods]
impl PySurface {
    #[staticmethod]
    #[pyo3(signature = (radius = 1.0))]
    fn sphere(radius: f64) -> PyResult<Self> {
        Ok(Self { inner: AnalyticSurface::sphere(radius).map_err(py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (major_radius = 1.0, minor_radius = 0.4))]
    fn torus(major_radius: f64, minor_radius: f64) -> PyResult<Self> {
        Ok(Self { inner: AnalyticSurface::torus(major_radius, minor_radius).map_err(py_err)? })
    }

    fn signed_distance(&self, x: [f64; 3]) -> PyResult<f64> {
        self.inner.signed_distance(&point(x)).map_err(py_err)
    }

    fn normal(&self, x: [f64; 3]) -> PyResult<[f64; 3]> {
        let n = self.inner.normal(&point(x)).map_err(py_err)?;
        Ok([n.x, n.y, n.z])
    }

    fn closest_point(&self, x: [f64; 3]) -> PyResult<[f64; 3]> {
        let p = self.inner.closest_point(&point(x)).map_err(py_err)?;
        Ok([p.x, p.y, p.z])
    }

    #[getter]
    fn area(&self) -> f64 {
        self.inner.area()
    }

    fn __repr__(&self) -> String {
        format!("Surface({:?})", self.inner.kind())
    }
}

#[pyclass(name = "Mesh", module = "surfstokes", frozen)]
struct PyMesh {
    inner: BaseMesh,
    surface: AnalyticSurface,
}

#[pymethods]
impl PyMesh {
    /// Coarsest triangulation refined `level` times.
    #[new]
    #[pyo3(signature = (surface, level = 0))]
    fn new(surface: &PySurface, level: usize) -> PyResult<Self> {
        let s = surface.inner;
        let inner = build_base_mesh(&s).and_then(|m| m.refine_to(&s, level)).map_err(py_err)?;
        Ok(Self { inner, surface: s })
    }

    fn refine(&self) -> PyResult<Self> {
        Ok(Self { inner: self.inner.refine(&self.surface).map_err(py_err)?, surface: self.surface })
    }

    #[getter]
    fn level(&self) -> usize {
        self.inner.level()
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    #[getter]
    fn num_triangles(&self) -> usize {
        self.inner.num_triangles()
    }

    #[getter]
    fn h_max(&self) -> f64 {
        self.inner.h_max()
    }

    fn vertices(&self) -> Vec<[f64; 3]> {
        self.inner.vertices().iter().map(|v| [v.x, v.y, v.z]).collect()
    }

    fn triangles(&self) -> Vec<[usize; 3]> {
        self.inner.triangles().to_vec()
    }

    fn write_off(&self, path: PathBuf) -> PyResult<()> {
        let file = File::create(path).map_err(|e| py_err(e.into()))?;
        self.inner.write_off(BufWriter::new(file)).map_err(py_err)
    }
}

/// Assembled Taylor-Hood system on a lifted mesh, optionally with manufactured data.
#[pyclass(name = "StokesProblem", module = "surfstokes", frozen)]
struct PyStokesProblem {
    space: TaylorHoodSpace,
    system: SaddleSystem,
    case: Option<ManufacturedCase>,
    level: usize,
}

#[pymethods]
impl PyStokesProblem {
    #[new]
    #[pyo3(signature = (mesh, geom_degree = 2, velocity_degree = 2, mms = None, penalty_exponent = 2.0, penalty_normal = "improved"))]
    fn new(
        mesh: &PyMesh,
        geom_degree: usize,
        velocity_degree: usize,
        mms: Option<&str>,
        penalty_exponent: f64,
        penalty_normal: &str,
    ) -> PyResult<Self> {
        let penalty_normal = match penalty_normal {
            "improved" => PenaltyNormal::Improved,
            "discrete" => PenaltyNormal::Discrete,
            other => return Err(PyValueError::new_err(format!("unknown penalty normal '{other}'"))),
        };
        let case = mms.map(|m| ManufacturedCase::new(parse::<MmsKind>(m)?, &mesh.surface).map_err(py_err)).transpose()?;
        let config = AssemblyConfig { penalty_exponent, penalty_normal, quadrature_exactness: None };
        let space = TaylorHoodSpace::new(&mesh.inner, &mesh.surface, geom_degree, velocity_degree, config)
            .map_err(py_err)?;
        let system = assemble(&space, case.as_ref().map(|c| c as _)).map_err(py_err)?;
        Ok(Self { space, system, case, level: mesh.inner.level() })
    }

    #[getter]
    fn n_u(&self) -> usize {
        self.system.n_u()
    }

    #[getter]
    fn n_p(&self) -> usize {
        self.system.n_p()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.system.h
    }

    /// Returns a dict with `u`, `p`, `iterations`, `residual`, `wall_time`.
    #[pyo3(signature = (solver = "direct", tol = 1e-10, preconditioner = "exact", max_iter = 5000))]
    fn solve<'py>(
        &self,
        py: Python<'py>,
        solver: &str,
        tol: f64,
        preconditioner: &str,
        max_iter: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let preconditioner = match preconditioner {
            "exact" => PreconditionerKind::Exact,
            "diagonal" => PreconditionerKind::Diagonal,
            other => return Err(PyValueError::new_err(format!("unknown preconditioner '{other}'"))),
        };
        let result = match solver {
            "direct" => py.detach(|| solve_direct(&self.system)),
            "minres" => py.detach(|| solve_minres(&self.system, MinresOptions { preconditioner, tol, max_iter })),
            other => return Err(PyValueError::new_err(format!("unknown solver '{other}'"))),
        }
        .map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("u", result.u)?;
        d.set_item("p", result.p)?;
        d.set_item("iterations", result.iterations)?;
        d.set_item("residual", result.residual)?;
        d.set_item("wall_time", result.wall_time)?;
        Ok(d)
    }

    /// Errors of `(u, p)` against the manufactured solution.
    fn errors<'py>(&self, py: Python<'py>, u: Vec<f64>, p: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let case = self.case.as_ref().ok_or_else(|| PyValueError::new_err("problem has no manufactured solution"))?;
        let r = eval_errors(&self.space, case, &u, &p, self.level).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("energy_error", r.energy_error)?;
        d.set_item("pressure_l2", r.pressure_l2)?;
        d.set_item("velocity_l2", r.velocity_l2)?;
        d.set_item("tangential_h1", r.tangential_h1)?;
        Ok(d)
    }

    /// Extreme generalized eigenvalues of `(B A⁻¹ Bᵀ, M_p)` on mean-free pressures.
    fn schur_spectrum(&self, py: Python<'_>) -> PyResult<(f64, f64)> {
        let s = py.detach(|| schur_spectrum(&self.system)).map_err(py_err)?;
        Ok((s.min, s.max))
    }

    /// Extreme generalized eigenvalues of `(A, M_u)`.
    fn a_condition(&self, py: Python<'_>) -> PyResult<(f64, f64)> {
        let s = py.detach(|| a_condition(&self.system)).map_err(py_err)?;
        Ok((s.min, s.max))
    }

    /// Writes block `a`, `b`, `b_star`, `m_u` or `m_p` in MatrixMarket format.
    fn write_matrix(&self, block: &str, path: PathBuf) -> PyResult<()> {
        let m = match block {
            "a" => &self.system.a,
            "b" => &self.system.b,
            "b_star" => &self.system.b_star,
            "m_u" => &self.system.m_u,
            "m_p" => &self.system.m_p,
            other => return Err(PyValueError::new_err(format!("unknown block '{other}'"))),
        };
        let file = File::create(path).map_err(|e| py_err(e.into()))?;
        m.write_matrix_market(BufWriter::new(file)).map_err(py_err)
    }
}

/// Runs a refinement sweep and returns the report as a dict
/// (`config`, `levels`, `eoc`, `tool_version`).
#[pyfunction]
#[pyo3(signature = (
    surface = None, geom_degree = 2, velocity_degree = 2, levels = "1..4", mms = "killing",
    penalty_exponent = 2.0, penalty_normal = "improved", solver = "direct", tol = 1e-10, spectra = false
))]
#[allow(clippy::too_many_arguments)]
fn run_study<'py>(
    py: Python<'py>,
    surface: Option<&PySurface>,
    geom_degree: usize,
    velocity_degree: usize,
    levels: &str,
    mms: &str,
    penalty_exponent: f64,
    penalty_normal: &str,
    solver: &str,
    tol: f64,
    spectra: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let config = StudyConfig {
        surface: surface.map(|s| s.inner.kind()).unwrap_or(StudyConfig::default().surface),
        geom_degree,
        velocity_degree,
        levels: parse::<LevelRange>(levels)?,
        mms: parse::<MmsKind>(mms)?,
        penalty_exponent,
        penalty_normal: match penalty_normal {
            "improved" => PenaltyNormal::Improved,
            "discrete" => PenaltyNormal::Discrete,
            other => return Err(PyValueError::new_err(format!("unknown penalty normal '{other}'"))),
        },
        solver: match solver {
            "direct" => SolverKind::Direct,
            "minres" => SolverKind::Minres,
            other => return Err(PyValueError::new_err(format!("unknown solver '{other}'"))),
        },
        tol,
        spectra,
        ..StudyConfig::default()
    };
    let report = py.detach(|| study::run_study(&config)).map_err(py_err)?;
    let text = study::report_json(&report).map_err(py_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyfunction]
fn compute_eoc(errors: Vec<f64>, hs: Vec<f64>) -> PyResult<Vec<f64>> {
    study::compute_eoc(&errors, &hs).map_err(py_err)
}

/// `(2m+3)/(1.5m+2)`.
#[pyfunction]
fn dof_overhead(m: usize) -> PyResult<f64> {
    if m < 2 {
        return Err(PyValueError::new_err(format!("velocity degree must be at least 2, got {m}")));
    }
    Ok(study::dof_overhead(m))
}

#[pymodule]
pub fn surfstokes(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySurface>()?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PyStokesProblem>()?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    m.add_function(wrap_pyfunction!(compute_eoc, m)?)?;
    m.add_function(wrap_pyfunction!(dof_overhead, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
