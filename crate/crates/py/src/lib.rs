//! Python bindings: the cryptosystem, LWE sampling and solving, 2-D lattice
//! tools, discrete Gaussian sampling and the check suite.

use lwelab_core::attacks::MlSolver;
use lwelab_core::crypto::{self, KeyMode};
use lwelab_core::dgs::{dgs_pmf, BootstrapSampler, DiscreteGaussianSpec};
use lwelab_core::gaussian::discretized_psi;
use lwelab_core::lattice::{self, LatticeBasis, LatticePoint};
use lwelab_core::lwe::{sample_lwe, LweParams, LweSample, SampleBatch, SampleMode, Solver, VecStream};
use lwelab_core::modring::ModVector;
use lwelab_core::{checks, rng, Error, Mode};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::UnsupportedModulus(_) | Error::Json(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "CryptoParams", module = "lwelab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCryptoParams(crypto::CryptoParams);

#[pymethods]
impl PyCryptoParams {
    /// Parameters derived from `n` and the target error rate `eps`.
    #[new]
    #[pyo3(signature = (n, eps = 0.1, shared = false))]
    fn new(n: usize, eps: f64, shared: bool) -> PyResult<Self> {
        let p = crypto::gen_params(n, eps).map_err(to_py)?;
        Ok(Self(p.with_mode(if shared { KeyMode::Shared } else { KeyMode::Full })))
    }

    #[staticmethod]
    fn custom(n: usize, p: u64, m: usize, alpha: f64) -> PyResult<Self> {
        crypto::CryptoParams::custom(n, p, m, alpha).map(Self).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn p(&self) -> u64 {
        self.0.p
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    fn __repr__(&self) -> String {
        format!("CryptoParams(n={}, p={}, m={}, alpha={:.3e})", self.0.n, self.0.p, self.0.m, self.0.alpha)
    }
}

#[pyclass(name = "PrivateKey", module = "lwelab", frozen)]
struct PyPrivateKey(crypto::PrivateKey);

#[pymethods]
impl PyPrivateKey {
    #[getter]
    fn secret(&self) -> Vec<u64> {
        self.0.s.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(json_err)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        serde_json::from_str(s).map(Self).map_err(json_err)
    }
}

#[pyclass(name = "PublicKey", module = "lwelab", frozen)]
struct PyPublicKey(crypto::PublicKey);

#[pymethods]
impl PyPublicKey {
    #[getter]
    fn params(&self) -> PyCryptoParams {
        PyCryptoParams(*self.0.params())
    }

    #[getter]
    fn b(&self) -> Vec<u64> {
        self.0.b().to_vec()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(json_err)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        serde_json::from_str(s).map(Self).map_err(json_err)
    }
}

#[pyclass(name = "Ciphertext", module = "lwelab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCiphertext(crypto::Ciphertext);

#[pymethods]
impl PyCiphertext {
    #[getter]
    fn a(&self) -> Vec<u64> {
        self.0.a.clone()
    }

    #[getter]
    fn b(&self) -> u64 {
        self.0.b
    }
}

#[pyfunction]
#[pyo3(signature = (params, seed = 0, crs_seed = None))]
fn keygen(params: &PyCryptoParams, seed: u64, crs_seed: Option<u64>) -> PyResult<(PyPrivateKey, PyPublicKey)> {
    let crs = match params.0.mode {
        KeyMode::Shared => Some(crs_seed.unwrap_or(seed)),
        KeyMode::Full => None,
    };
    let (sk, pk) = crypto::keygen(&params.0, crs, &mut rng::stream(seed, "keygen", 0)).map_err(to_py)?;
    Ok((PyPrivateKey(sk), PyPublicKey(pk)))
}

#[pyfunction]
#[pyo3(signature = (pk, bits, seed = 0))]
fn encrypt(pk: &PyPublicKey, bits: Vec<u8>, seed: u64) -> PyResult<Vec<PyCiphertext>> {
    let cts = crypto::encrypt_bits(&pk.0, &bits, &mut rng::stream(seed, "encrypt", 0)).map_err(to_py)?;
    Ok(cts.into_iter().map(PyCiphertext).collect())
}

#[pyfunction]
fn decrypt(sk: &PyPrivateKey, cts: Vec<PyRef<'_, PyCiphertext>>) -> PyResult<Vec<u32>> {
    let cts: Vec<crypto::Ciphertext> = cts.iter().map(|c| c.0.clone()).collect();
    let bits = crypto::decrypt_bits(&sk.0, &cts).map_err(to_py)?;
    Ok(bits.into_iter().map(u32::from).collect())
}

/// Discrete LWE samples `(a, b)` with discretized Psi_alpha noise.
#[pyfunction]
#[pyo3(signature = (n, p, alpha, count, seed = 0, secret = None))]
fn sample_lwe_discrete(
    n: usize,
    p: u64,
    alpha: f64,
    count: usize,
    seed: u64,
    secret: Option<Vec<u64>>,
) -> PyResult<(Vec<u64>, Vec<(Vec<u64>, u64)>)> {
    let params = LweParams::psi(n, p, alpha).map_err(to_py)?;
    let mut r = rng::stream(seed, "lwe-generate", 0);
    let s = match secret {
        Some(v) if v.len() != n => return Err(PyValueError::new_err(format!("secret needs {n} entries"))),
        Some(v) => ModVector::new(v, p),
        None => ModVector::random(n, p, &mut r),
    };
    let SampleBatch::Discrete(samples) = sample_lwe(&params, &s, SampleMode::Discrete, count, &mut r).map_err(to_py)?
    else {
        unreachable!("discrete mode yields residues")
    };
    let rows = samples.into_iter().map(|x| (x.a.entries().to_vec(), x.b)).collect();
    Ok((s.entries().to_vec(), rows))
}

/// Maximum-likelihood secret for discrete samples with Psi_alpha noise.
#[pyfunction]
fn ml_solve(n: usize, p: u64, alpha: f64, samples: Vec<(Vec<u64>, u64)>) -> PyResult<Vec<u64>> {
    if samples.iter().any(|(a, b)| a.len() != n || *b >= p || a.iter().any(|&x| x >= p)) {
        return Err(PyValueError::new_err(format!("samples must be in Z_{p}^{n} x Z_{p}")));
    }
    let chi = discretized_psi(alpha, p).map_err(to_py)?;
    let rows: Vec<LweSample<u64>> = samples.into_iter().map(|(a, b)| LweSample { a: ModVector::new(a, p), b }).collect();
    let solver = MlSolver::new(chi, rows.len());
    let s = solver
        .solve(&mut VecStream::new(n, p, rows), &mut rng::seeded(0))
        .map_err(to_py)?;
    Ok(s.entries().to_vec())
}

#[pyclass(name = "LatticePoint", module = "lwelab", frozen)]
struct PyLatticePoint(LatticePoint);

#[pymethods]
impl PyLatticePoint {
    #[getter]
    fn coeffs(&self) -> Vec<i64> {
        self.0.coeffs.clone()
    }

    #[getter]
    fn vector(&self) -> Vec<f64> {
        self.0.vector.clone()
    }

    fn __repr__(&self) -> String {
        format!("LatticePoint(coeffs={:?}, vector={:?})", self.0.coeffs, self.0.vector)
    }
}

/// A full-rank lattice given by its basis columns.
#[pyclass(name = "Lattice", module = "lwelab", frozen)]
struct PyLattice(LatticeBasis);

#[pymethods]
impl PyLattice {
    #[new]
    fn new(columns: Vec<Vec<f64>>) -> PyResult<Self> {
        LatticeBasis::from_columns(&columns).map(Self).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn det(&self) -> f64 {
        self.0.det()
    }

    #[getter]
    fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.0.dim()).map(|j| self.0.column(j)).collect()
    }

    fn dual(&self) -> PyResult<Self> {
        self.0.dual().map(Self).map_err(to_py)
    }

    #[pyo3(signature = (delta = 0.75))]
    fn lll(&self, delta: f64) -> PyResult<Self> {
        lattice::lll_reduce(&self.0, delta).map(Self).map_err(to_py)
    }

    fn babai(&self, target: Vec<f64>) -> PyResult<PyLatticePoint> {
        self.check_len(&target)?;
        Ok(PyLatticePoint(lattice::babai_nearest_plane(&self.0, &target)))
    }

    fn closest_vector(&self, target: Vec<f64>) -> PyResult<PyLatticePoint> {
        self.check_len(&target)?;
        lattice::closest_vector_exact(&self.0, &target).map(PyLatticePoint).map_err(to_py)
    }

    fn successive_minima(&self) -> PyResult<(f64, f64)> {
        lattice::successive_minima(&self.0).map_err(to_py)
    }

    fn smoothing_parameter(&self, eps: f64) -> PyResult<f64> {
        lattice::smoothing_parameter(&self.0, eps).map_err(to_py)
    }

    /// Vectors drawn from `D_{L,r}`, exactly or with the continuous bootstrap.
    #[pyo3(signature = (r, count, seed = 0, bootstrap = false))]
    fn sample_gaussian(&self, r: f64, count: usize, seed: u64, bootstrap: bool) -> PyResult<Vec<Vec<f64>>> {
        let mut g = rng::stream(seed, "dgs-sample", 0);
        if bootstrap {
            let s = BootstrapSampler::new(&self.0, r, Mode::Diagnostic).map_err(to_py)?;
            return Ok((0..count).map(|_| s.sample(&mut g).vector).collect());
        }
        let spec = DiscreteGaussianSpec::lattice(self.0.clone(), r).map_err(to_py)?;
        let pmf = dgs_pmf(&spec).map_err(to_py)?;
        Ok((0..count).map(|_| pmf.sample_vector(&mut g).to_vec()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Lattice({:?})", self.columns())
    }
}

impl PyLattice {
    fn check_len(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.0.dim() {
            return Err(PyValueError::new_err(format!("target needs {} coordinates", self.0.dim())));
        }
        Ok(())
    }
}

/// Runs the numeric checks; `selection` takes ids, 1-based numbers or "all".
#[pyfunction]
#[pyo3(signature = (selection = vec!["all".to_string()], seed = 7))]
fn run_checks<'py>(py: Python<'py>, selection: Vec<String>, seed: u64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let results = py.detach(|| checks::run_checks(&selection, seed)).map_err(to_py)?;
    results
        .into_iter()
        .map(|c| {
            let d = PyDict::new(py);
            d.set_item("check_id", c.check_id)?;
            d.set_item("number", c.number)?;
            d.set_item("claim", c.claim)?;
            d.set_item("measured", c.measured)?;
            d.set_item("relation", c.relation)?;
            d.set_item("bound", c.bound)?;
            d.set_item("pass", c.pass)?;
            d.set_item("detail", c.detail)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn lwelab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCryptoParams>()?;
    m.add_class::<PyPrivateKey>()?;
    m.add_class::<PyPublicKey>()?;
    m.add_class::<PyCiphertext>()?;
    m.add_class::<PyLattice>()?;
    m.add_class::<PyLatticePoint>()?;
    m.add_function(wrap_pyfunction!(keygen, m)?)?;
    m.add_function(wrap_pyfunction!(encrypt, m)?)?;
    m.add_function(wrap_pyfunction!(decrypt, m)?)?;
    m.add_function(wrap_pyfunction!(sample_lwe_discrete, m)?)?;
    m.add_function(wrap_pyfunction!(ml_solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_checks, m)?)?;
    Ok(())
}
