//! Python bindings: lattices, subalgebras, invariant cores and certificates.
//! Scalars cross the boundary as Python ints (balanced residues mod p^N).

use num_bigint::BigInt;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyAny;

use selfsim_core::endo::{is_simple_at_precision, VirtualEndomorphism, DEFAULT_GUARD};
use selfsim_core::harness::{
    lemma_ldiag_property_run, verify_example_family, verify_not_self_similar, Certificate,
    Conclusion,
};
use selfsim_core::specfile::LatticeSpec;
use selfsim_core::submodule::{canonical_ideal, enumerate_subalgebras, is_ideal};
use selfsim_core::{Error, LieLattice, Matrix, PAdicScalar, Prime, Submodule, Vector3};

create_exception!(selfsim, SelfsimError, PyException);
create_exception!(selfsim, ParseError, SelfsimError);
create_exception!(selfsim, UnsolvableError, SelfsimError);
create_exception!(selfsim, HypothesisError, SelfsimError);
create_exception!(selfsim, PrecisionError, SelfsimError);

fn err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Parse(_) | Error::NotPrime(_) | Error::ZeroPrecision | Error::JacobiFailure => {
            ParseError::new_err(msg)
        }
        Error::Unsolvable { .. } => UnsolvableError::new_err(msg),
        Error::HypothesisViolated { .. } | Error::NotDiagonal | Error::NotClosed | Error::NotAMorphism => {
            HypothesisError::new_err(msg)
        }
        Error::PrecisionTooSmall { .. }
        | Error::PrecisionExhausted(_)
        | Error::RankDeficientAtPrecision { .. } => PrecisionError::new_err(msg),
        _ => SelfsimError::new_err(msg),
    }
}

fn prime(p: u64) -> PyResult<Prime> {
    Prime::new(p).map_err(err)
}

fn to_vector(lat: &LieLattice, v: [BigInt; 3]) -> PyResult<Vector3> {
    let n = lat.precision();
    let [a, b, c] = v;
    Ok([
        PAdicScalar::new(lat.prime(), n, a).map_err(err)?,
        PAdicScalar::new(lat.prime(), n, b).map_err(err)?,
        PAdicScalar::new(lat.prime(), n, c).map_err(err)?,
    ])
}

fn from_vector(v: &Vector3) -> [BigInt; 3] {
    [v[0].balanced(), v[1].balanced(), v[2].balanced()]
}

fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "Lattice", module = "selfsim", frozen)]
struct PyLattice {
    inner: LieLattice,
}

#[pymethods]
impl PyLattice {
    /// Member `L_l` of the example family, with enough precision for every
    /// certificate below its bound unless `precision` is given.
    #[staticmethod]
    #[pyo3(signature = (l, p, precision=None))]
    fn family(l: u32, p: u64, precision: Option<u32>) -> PyResult<Self> {
        let pr = prime(p)?;
        let n = precision.unwrap_or_else(|| {
            let spec = LatticeSpec::family(l, pr);
            spec.default_precision().max(2 * (4 * l + 2) + 6 * l + 16)
        });
        Ok(PyLattice { inner: LieLattice::example_family(l, pr, n).map_err(err)? })
    }

    /// `[x1, x2] = a0 x0`, `[x2, x0] = a1 x1`, `[x0, x1] = a2 x2`.
    #[staticmethod]
    #[pyo3(signature = (p, a, precision=64))]
    fn diagonal(p: u64, a: [BigInt; 3], precision: u32) -> PyResult<Self> {
        let pr = prime(p)?;
        let [a0, a1, a2] = a;
        let sc = |x: BigInt| PAdicScalar::new(pr, precision, x).map_err(err);
        let inner = LieLattice::diagonal(pr, precision, [sc(a0)?, sc(a1)?, sc(a2)?]).map_err(err)?;
        Ok(PyLattice { inner })
    }

    /// Parse a TOML lattice description (the same format the CLI reads).
    #[staticmethod]
    #[pyo3(signature = (text, precision=None))]
    fn from_toml(text: &str, precision: Option<u32>) -> PyResult<Self> {
        let spec = LatticeSpec::parse(text).map_err(err)?;
        let n = precision.unwrap_or_else(|| spec.default_precision());
        Ok(PyLattice { inner: spec.to_lattice(n).map_err(err)? })
    }

    #[getter]
    fn prime(&self) -> u64 {
        self.inner.prime().get()
    }

    #[getter]
    fn precision(&self) -> u32 {
        self.inner.precision()
    }

    fn s_invariants(&self) -> PyResult<(u32, u32, u32)> {
        let [a, b, c] = self.inner.s_invariants().map_err(err)?.as_array();
        Ok((a, b, c))
    }

    fn k_bound(&self) -> PyResult<u32> {
        Ok(self.inner.s_invariants().map_err(err)?.k_bound())
    }

    fn diagonal_constants(&self) -> PyResult<[BigInt; 3]> {
        let a = self.inner.diagonal_constants().map_err(err)?;
        Ok(from_vector(&a))
    }

    fn bracket(&self, u: [BigInt; 3], v: [BigInt; 3]) -> PyResult<[BigInt; 3]> {
        let (u, v) = (to_vector(&self.inner, u)?, to_vector(&self.inner, v)?);
        Ok(from_vector(&self.inner.bracket(&u, &v)))
    }

    fn is_powerful(&self) -> bool {
        self.inner.is_powerful()
    }

    /// Subalgebras of index `p^k`, in enumeration order.
    fn subalgebras(&self, k: u32) -> PyResult<Vec<PySubalgebra>> {
        let subs = enumerate_subalgebras(&self.inner, k).map_err(err)?;
        Ok(subs.into_iter().map(|inner| PySubalgebra { inner }).collect())
    }

    /// Span of the given vectors.
    fn span(&self, gens: Vec<[BigInt; 3]>) -> PyResult<PySubalgebra> {
        let gens = gens
            .into_iter()
            .map(|g| to_vector(&self.inner, g))
            .collect::<PyResult<Vec<_>>>()?;
        let inner = Submodule::span(self.inner.prime(), self.inner.precision(), &gens).map_err(err)?;
        Ok(PySubalgebra { inner })
    }

    fn is_ideal(&self, sub: &PySubalgebra) -> bool {
        is_ideal(&self.inner, &sub.inner)
    }

    /// The ideal `<p^m_i x_i>` attached to a subalgebra of index below `p^K`,
    /// with the exponents `m`.
    fn canonical_ideal(&self, sub: &PySubalgebra) -> PyResult<(PySubalgebra, [u32; 3])> {
        let (inner, sc) = canonical_ideal(&self.inner, &sub.inner).map_err(err)?;
        Ok((PySubalgebra { inner }, sc.m()))
    }

    /// Largest ideal inside `domain` that `map` sends into itself, or `None`
    /// when nothing survives at the working precision. `map` is `"identity"`,
    /// `"zero"`, or a 3x3 list of rows whose column `j` is the image of the
    /// `j`-th Hermite basis vector of `domain`.
    #[pyo3(signature = (domain=None, map=None, guard=DEFAULT_GUARD))]
    fn invariant_core(
        &self,
        domain: Option<&PySubalgebra>,
        map: Option<&Bound<'_, PyAny>>,
        guard: u32,
    ) -> PyResult<Option<PySubalgebra>> {
        let lat = &self.inner;
        let dom = match domain {
            Some(d) => d.inner.clone(),
            None => Submodule::ambient(lat.prime(), lat.precision()).map_err(err)?,
        };
        let phi = match map {
            None => VirtualEndomorphism::identity(lat, dom),
            Some(m) => match m.extract::<String>() {
                Ok(s) if s == "identity" => VirtualEndomorphism::identity(lat, dom),
                Ok(s) if s == "zero" => VirtualEndomorphism::zero(lat, dom),
                Ok(s) => return Err(ParseError::new_err(format!("unknown map {s:?}"))),
                Err(_) => {
                    let rows: [[BigInt; 3]; 3] = m.extract()?;
                    let entries = rows
                        .into_iter()
                        .flatten()
                        .map(|x| PAdicScalar::new(lat.prime(), lat.precision(), x))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(err)?;
                    let mat = Matrix::new(lat.prime(), 3, 3, entries).map_err(err)?;
                    VirtualEndomorphism::new(lat, dom, mat)
                }
            },
        }
        .map_err(err)?;
        let verdict = is_simple_at_precision(lat, &phi, guard).map_err(err)?;
        Ok(verdict.core().cloned().map(|inner| PySubalgebra { inner }))
    }

    /// Certificate that no virtual endomorphism of index `p^k` is simple.
    fn verify(&self, k: u32) -> PyResult<PyCertificate> {
        let inner = verify_not_self_similar(&self.inner, k).map_err(err)?;
        Ok(PyCertificate { inner })
    }

    fn __repr__(&self) -> String {
        let s = self
            .inner
            .s_invariants()
            .map(|s| format!("{:?}", s.as_array()))
            .unwrap_or_else(|_| "unsolvable".into());
        format!(
            "Lattice(p={}, precision={}, s={s})",
            self.inner.prime().get(),
            self.inner.precision()
        )
    }
}

#[pyclass(name = "Subalgebra", module = "selfsim", frozen)]
struct PySubalgebra {
    inner: Submodule,
}

#[pymethods]
impl PySubalgebra {
    #[getter]
    fn k_vector(&self) -> [u32; 3] {
        self.inner.k_vector()
    }

    #[getter]
    fn index_exponent(&self) -> u32 {
        self.inner.index_exponent()
    }

    /// Hermite basis columns.
    fn basis(&self) -> Vec<[BigInt; 3]> {
        self.inner.basis().iter().map(from_vector).collect()
    }

    /// Hermite parameters `(k_vector, e, f, g)`.
    fn params(&self) -> ([u32; 3], BigInt, BigInt, BigInt) {
        let h = self.inner.hermite_params();
        (h.k_vector, h.e, h.f, h.g)
    }

    fn contains(&self, v: [BigInt; 3]) -> PyResult<bool> {
        let (p, n) = (self.inner.prime(), self.inner.precision());
        let [a, b, c] = v;
        let sc = |x: BigInt| PAdicScalar::new(p, n, x).map_err(err);
        Ok(self.inner.contains(&[sc(a)?, sc(b)?, sc(c)?]))
    }

    fn contains_module(&self, other: &PySubalgebra) -> bool {
        self.inner.contains_module(&other.inner)
    }

    fn __eq__(&self, other: &PySubalgebra) -> bool {
        self.inner.same_module(&other.inner)
    }

    fn __repr__(&self) -> String {
        format!("Subalgebra({})", self.inner)
    }
}

#[pyclass(name = "Certificate", module = "selfsim", frozen)]
struct PyCertificate {
    inner: Certificate,
}

#[pymethods]
impl PyCertificate {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyCertificate { inner: Certificate::from_json(text).map_err(err)? })
    }

    #[getter]
    fn holds(&self) -> bool {
        self.inner.conclusion == Conclusion::NotSelfSimilarOfIndex
    }

    #[getter]
    fn subalgebra_count(&self) -> usize {
        self.inner.subalgebra_count
    }

    #[getter]
    fn k(&self) -> u32 {
        self.inner.k
    }

    fn all_checks_passed(&self) -> bool {
        self.inner.all_checks_passed()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        json_to_py(py, &self.inner.to_json())
    }

    /// Recompute from the recorded lattice; equal certificates mean the run reproduces.
    fn replay(&self) -> PyResult<PyCertificate> {
        Ok(PyCertificate { inner: self.inner.replay().map_err(err)? })
    }

    fn __eq__(&self, other: &PyCertificate) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Certificate(k={}, subalgebras={}, conclusion={:?})",
            self.inner.k, self.inner.subalgebra_count, self.inner.conclusion
        )
    }
}

/// Checks on `L_l` and its distinguished subalgebra, as a dict.
#[pyfunction]
fn family_report(py: Python<'_>, l: u32, p: u64) -> PyResult<Py<PyAny>> {
    let cert = verify_example_family(l, prime(p)?).map_err(err)?;
    json_to_py(py, &cert.to_json())
}

/// Seeded property run for the triangular Hermite reduction, as a dict.
#[pyfunction]
#[pyo3(signature = (trials, seed, p=3))]
fn ldiag(py: Python<'_>, trials: usize, seed: u64, p: u64) -> PyResult<Py<PyAny>> {
    let report = py
        .detach(|| lemma_ldiag_property_run(trials, seed, Prime::new(p)?))
        .map_err(err)?;
    json_to_py(py, &report.to_json())
}

#[pymodule]
fn selfsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<PyLattice>()?;
    m.add_class::<PySubalgebra>()?;
    m.add_class::<PyCertificate>()?;
    m.add_function(wrap_pyfunction!(family_report, m)?)?;
    m.add_function(wrap_pyfunction!(ldiag, m)?)?;
    m.add("SelfsimError", py.get_type::<SelfsimError>())?;
    m.add("ParseError", py.get_type::<ParseError>())?;
    m.add("UnsolvableError", py.get_type::<UnsolvableError>())?;
    m.add("HypothesisError", py.get_type::<HypothesisError>())?;
    m.add("PrecisionError", py.get_type::<PrecisionError>())?;
    Ok(())
}
