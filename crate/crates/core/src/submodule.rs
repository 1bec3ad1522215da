//! Full-rank sublattices of the ambient rank-3 module: subalgebras, ideals,
//! derived terms and the invariant ideal attached to a finite-index subalgebra.
//!
//! A [`Submodule`] is stored in canonical column Hermite form over `Z/p^N`.
//! Diagonal exponents equal to `N` mean "no pivot at precision"; the zero
//! module is the form with all three exponents equal to `N`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{LieLattice, SInvariants};
use crate::linalg::{
    howell, is_gl3, preimage_residues, solve_in_span, Matrix, Ring, Vector3,
};
use crate::padic::{PAdicScalar, Prime, Valuation};

/// Provenance of an enumerated subalgebra: the Hermite matrix
/// `[[p^k0, e, f], [0, p^k1, g], [0, 0, p^k2]]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HermiteParams {
    pub k_vector: [u32; 3],
    pub e: BigInt,
    pub f: BigInt,
    pub g: BigInt,
}

#[derive(Clone, Debug)]
pub struct Submodule {
    prime: Prime,
    precision: u32,
    k: [u32; 3],
    cols: [[BigInt; 3]; 3],
    params: Option<HermiteParams>,
}

impl PartialEq for Submodule {
    fn eq(&self, other: &Self) -> bool {
        self.prime == other.prime
            && self.precision == other.precision
            && self.k == other.k
            && self.cols == other.cols
    }
}

impl Eq for Submodule {}

impl Submodule {
    fn from_residues(ring: &Ring, gens: &[[BigInt; 3]]) -> Self {
        let (k, cols) = howell(ring, gens);
        Submodule {
            prime: ring.prime,
            precision: ring.n,
            k,
            cols,
            params: None,
        }
    }

    fn ring(&self) -> Ring {
        Ring::new(self.prime, self.precision)
    }

    /// Span of the given vectors, at the smaller of `precision` and their own precision.
    pub fn span(prime: Prime, precision: u32, gens: &[Vector3]) -> Result<Self> {
        let n = gens
            .iter()
            .flat_map(|v| v.iter().map(|x| x.precision()))
            .fold(precision, u32::min);
        if n == 0 {
            return Err(Error::ZeroPrecision);
        }
        let ring = Ring::new(prime, n);
        let res: Vec<[BigInt; 3]> = gens
            .iter()
            .map(|v| {
                let r = ring.residues(v);
                [r[0].clone(), r[1].clone(), r[2].clone()]
            })
            .collect();
        Ok(Self::from_residues(&ring, &res))
    }

    pub fn ambient(prime: Prime, precision: u32) -> Result<Self> {
        Self::monomial(prime, precision, [0, 0, 0])
    }

    pub fn zero(prime: Prime, precision: u32) -> Result<Self> {
        Self::span(prime, precision, &[])
    }

    /// `<p^m0 x_0, p^m1 x_1, p^m2 x_2>`.
    pub fn monomial(prime: Prime, precision: u32, m: [u32; 3]) -> Result<Self> {
        if precision == 0 {
            return Err(Error::ZeroPrecision);
        }
        let ring = Ring::new(prime, precision);
        let gens: Vec<[BigInt; 3]> = (0..3)
            .map(|i| {
                let mut v = [BigInt::zero(), BigInt::zero(), BigInt::zero()];
                v[i] = ring.pow(m[i]);
                v
            })
            .collect();
        Ok(Self::from_residues(&ring, &gens))
    }

    /// The lattice with Hermite matrix `[[p^k0, e, f], [0, p^k1, g], [0, 0, p^k2]]`.
    pub fn from_params(prime: Prime, precision: u32, params: HermiteParams) -> Result<Self> {
        let [k0, k1, k2] = params.k_vector;
        if k0.max(k1).max(k2) >= precision {
            return Err(Error::PrecisionTooSmall {
                required: k0.max(k1).max(k2) + 1,
                available: precision,
            });
        }
        let ring = Ring::new(prime, precision);
        let z = BigInt::zero;
        let gens = [
            [ring.pow(k0), z(), z()],
            [params.e.clone(), ring.pow(k1), z()],
            [params.f.clone(), params.g.clone(), ring.pow(k2)],
        ];
        let mut m = Self::from_residues(&ring, &gens);
        m.params = Some(params);
        Ok(m)
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn k_vector(&self) -> [u32; 3] {
        self.k
    }

    /// `log_p` of the index in the ambient lattice (meaningful when full rank).
    pub fn index_exponent(&self) -> u32 {
        self.k.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.k.iter().all(|&k| k >= self.precision)
    }

    pub fn is_full_rank(&self) -> bool {
        self.k.iter().all(|&k| k < self.precision)
    }

    /// Digits of precision left above the largest diagonal exponent.
    pub fn residual_digits(&self) -> u32 {
        self.precision.saturating_sub(*self.k.iter().max().unwrap())
    }

    pub fn params(&self) -> Option<&HermiteParams> {
        self.params.as_ref()
    }

    /// `(k_vector, e, f, g)` read from the Hermite matrix.
    pub fn hermite_params(&self) -> HermiteParams {
        self.params.clone().unwrap_or_else(|| HermiteParams {
            k_vector: self.k,
            e: self.cols[1][0].clone(),
            f: self.cols[2][0].clone(),
            g: self.cols[2][1].clone(),
        })
    }

    pub fn hermite(&self) -> Matrix {
        Matrix::from_residue_columns(&self.ring(), &self.cols)
    }

    /// The three Hermite columns (zero columns included when degenerate).
    pub fn basis(&self) -> [Vector3; 3] {
        let ring = self.ring();
        let col = |j: usize| -> Vector3 {
            [
                ring.scalar(&self.cols[j][0]),
                ring.scalar(&self.cols[j][1]),
                ring.scalar(&self.cols[j][2]),
            ]
        };
        [col(0), col(1), col(2)]
    }

    /// Nonzero Hermite columns.
    pub fn generators(&self) -> Vec<Vector3> {
        self.basis()
            .into_iter()
            .filter(|v| v.iter().any(|x| !x.is_zero()))
            .collect()
    }

    /// Diagonal exponents when the Hermite matrix is diagonal.
    pub fn as_monomial(&self) -> Option<[u32; 3]> {
        let off = [(1, 0), (2, 0), (2, 1)];
        off.iter()
            .all(|&(j, i)| self.cols[j][i].is_zero())
            .then_some(self.k)
    }

    /// Same lattice known to a lower precision.
    pub fn truncate(&self, precision: u32) -> Result<Self> {
        if precision > self.precision {
            return Err(Error::PrecisionTooSmall {
                required: precision,
                available: self.precision,
            });
        }
        if precision == self.precision {
            return Ok(self.clone());
        }
        let mut out = Self::from_residues(&Ring::new(self.prime, precision), &self.cols);
        out.params = self.params.clone();
        Ok(out)
    }

    fn aligned(&self, other: &Submodule) -> Result<(Submodule, Submodule)> {
        if self.prime != other.prime {
            return Err(Error::PrimeMismatch(self.prime.get(), other.prime.get()));
        }
        let n = self.precision.min(other.precision);
        Ok((self.truncate(n)?, other.truncate(n)?))
    }

    /// Equality as lattices, compared at the common (smaller) precision.
    pub fn same_module(&self, other: &Submodule) -> bool {
        match self.aligned(other) {
            Ok((a, b)) => a.k == b.k && a.cols == b.cols,
            Err(_) => false,
        }
    }

    pub fn sum(&self, other: &Submodule) -> Result<Submodule> {
        let (a, b) = self.aligned(other)?;
        let gens: Vec<[BigInt; 3]> = a.cols.iter().chain(b.cols.iter()).cloned().collect();
        Ok(Self::from_residues(&a.ring(), &gens))
    }

    pub fn contains_module(&self, other: &Submodule) -> bool {
        match self.sum(other) {
            Ok(s) => s.same_module(self),
            Err(_) => false,
        }
    }

    pub fn contains(&self, v: &Vector3) -> bool {
        match Submodule::span(self.prime, self.precision, &[v.clone()]) {
            Ok(s) => self.contains_module(&s),
            Err(_) => false,
        }
    }

    /// `p^j * self`.
    pub fn scaled(&self, j: u32) -> Submodule {
        let ring = self.ring();
        let t = ring.pow(j);
        let gens: Vec<[BigInt; 3]> = self
            .cols
            .iter()
            .map(|c| [&c[0] * &t, &c[1] * &t, &c[2] * &t])
            .collect();
        Self::from_residues(&ring, &gens)
    }

    /// `{x : A x in self}` for a 3x3 matrix `A` in ambient coordinates.
    pub fn preimage(&self, a: &Matrix) -> Result<Submodule> {
        if (a.rows(), a.cols()) != (3, 3) {
            return Err(Error::DimensionMismatch("preimage needs a 3x3 map".into()));
        }
        let n = self.precision.min(a.min_precision());
        let me = self.truncate(n)?;
        let ring = Ring::new(self.prime, n);
        let (k, cols) = preimage_residues(&ring, &a.residue_rows(&ring), &me.cols);
        Ok(Submodule {
            prime: self.prime,
            precision: n,
            k,
            cols,
            params: None,
        })
    }

    /// Image `A * self`.
    pub fn image(&self, a: &Matrix) -> Result<Submodule> {
        let n = self.precision.min(a.min_precision());
        let imgs: Vec<Vector3> = self.basis().iter().map(|v| a.mul_vec(v)).collect();
        Submodule::span(self.prime, n, &imgs)
    }

    pub fn intersect(&self, other: &Submodule) -> Result<Submodule> {
        let (a, b) = self.aligned(other)?;
        let h = a.hermite();
        let coords = b.preimage(&h)?;
        coords.image(&h)
    }
}

impl fmt::Display for Submodule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols: Vec<String> = (0..3)
            .map(|j| {
                format!(
                    "({}, {}, {})",
                    self.cols[j][0], self.cols[j][1], self.cols[j][2]
                )
            })
            .collect();
        write!(f, "<{}> k={:?} @p^{}", cols.join(", "), self.k, self.precision)
    }
}

/// Every pairwise bracket of the basis lies in the span.
pub fn is_closed(lattice: &LieLattice, m: &Submodule) -> bool {
    let b = m.basis();
    [(0, 1), (1, 2), (2, 0)]
        .iter()
        .all(|&(i, j)| m.contains(&lattice.bracket(&b[i], &b[j])))
}

/// All Hermite matrices of index `p^k`, in lexicographic `(k0, k1, k2, e, f, g)` order.
///
/// `e` and `f` run over `[0, p^k0)` and `g` over `[0, p^k1)`, one
/// representative per lattice.
pub fn hermite_candidates(prime: Prime, k: u32) -> Vec<HermiteParams> {
    let mut out = Vec::new();
    for k0 in 0..=k {
        for k1 in 0..=(k - k0) {
            let k2 = k - k0 - k1;
            let r0 = num_traits::pow(BigInt::from(prime.get()), k0 as usize);
            let r1 = num_traits::pow(BigInt::from(prime.get()), k1 as usize);
            let mut e = BigInt::zero();
            while e < r0 {
                let mut f = BigInt::zero();
                while f < r0 {
                    let mut g = BigInt::zero();
                    while g < r1 {
                        out.push(HermiteParams {
                            k_vector: [k0, k1, k2],
                            e: e.clone(),
                            f: f.clone(),
                            g: g.clone(),
                        });
                        g += 1;
                    }
                    f += 1;
                }
                e += 1;
            }
        }
    }
    out
}

/// Subalgebras of index `p^k`, in the order of [`hermite_candidates`].
pub fn enumerate_subalgebras(lattice: &LieLattice, k: u32) -> Result<Vec<Submodule>> {
    if k >= lattice.precision() {
        return Err(Error::PrecisionTooSmall {
            required: k + 1,
            available: lattice.precision(),
        });
    }
    let found: Vec<Option<Submodule>> = hermite_candidates(lattice.prime(), k)
        .into_par_iter()
        .map(|params| {
            let m = Submodule::from_params(lattice.prime(), lattice.precision(), params)
                .expect("index below precision");
            is_closed(lattice, &m).then_some(m)
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

/// Structure constants of `m` in its Hermite basis, and their s-invariants.
pub fn induced_structure(
    lattice: &LieLattice,
    m: &Submodule,
) -> Result<(LieLattice, SInvariants)> {
    if !m.is_full_rank() {
        return Err(Error::RankDeficientAtPrecision {
            precision: m.precision(),
        });
    }
    let h = m.hermite();
    let y = m.basis();
    let zero = PAdicScalar::zero(lattice.prime(), m.precision())?;
    let mut tensor = vec![zero; 27];
    for a in 0..3 {
        for b in (a + 1)..3 {
            let c = solve_in_span(&h, &lattice.bracket(&y[a], &y[b])).ok_or(Error::NotClosed)?;
            for (t, x) in c.into_iter().enumerate() {
                tensor[b * 9 + a * 3 + t] = -&x;
                tensor[a * 9 + b * 3 + t] = x;
            }
        }
    }
    let precision = tensor.iter().map(|c| c.precision()).min().unwrap();
    let tensor = tensor
        .into_iter()
        .map(|c| c.truncate(precision))
        .collect::<Result<Vec<_>>>()?;
    let induced = LieLattice::from_tensor(lattice.prime(), precision, tensor)?;
    let t = induced.s_invariants_by_smith()?;
    Ok((induced, t))
}

/// `([M, M], [M, [M, M]])`; either may be the zero module.
pub fn derived_and_gamma2(lattice: &LieLattice, m: &Submodule) -> Result<(Submodule, Submodule)> {
    if !is_closed(lattice, m) {
        return Err(Error::NotClosed);
    }
    let y = m.generators();
    let mut brackets = Vec::new();
    for a in 0..y.len() {
        for b in (a + 1)..y.len() {
            brackets.push(lattice.bracket(&y[a], &y[b]));
        }
    }
    let derived = Submodule::span(lattice.prime(), m.precision(), &brackets)?;
    let d = derived.generators();
    let mut second = Vec::new();
    for u in &y {
        for v in &d {
            second.push(lattice.bracket(u, v));
        }
    }
    let gamma2 = Submodule::span(lattice.prime(), m.precision(), &second)?;
    Ok((derived, gamma2))
}

/// `[x_i, s] in S` for every ambient basis vector and generator of `S`.
pub fn is_ideal(lattice: &LieLattice, s: &Submodule) -> bool {
    let gens = s.generators();
    (0..3).all(|i| {
        let xi = lattice.basis_vector(i);
        gens.iter().all(|g| s.contains(&lattice.bracket(&xi, g)))
    })
}

/// For a diagonal basis with `s_j = v(a_j)`, `<p^m_i x_i>` is an ideal iff
/// `m_i + s_j >= m_j` for all `i, j`. `None` stands for a vanishing constant.
pub fn monomial_ideal_criterion(s: [Option<u32>; 3], m: [u32; 3]) -> bool {
    (0..3).all(|i| {
        (0..3).all(|j| match s[j] {
            Some(sj) => m[i] + sj >= m[j],
            None => true,
        })
    })
}

/// The two ideal tests side by side; the criterion is `None` unless `s` is
/// monomial and the lattice is diagonal.
pub fn ideal_paths(lattice: &LieLattice, s: &Submodule) -> (bool, Option<bool>) {
    let direct = is_ideal(lattice, s);
    let criterion = match (s.as_monomial(), lattice.diagonal_constants()) {
        (Some(m), Ok(a)) => Some(monomial_ideal_criterion(
            a.map(|x| x.valuation().finite()),
            m,
        )),
        _ => None,
    };
    (direct, criterion)
}

/// Largest ideal of the lattice contained in `s`.
pub fn largest_ideal_in(lattice: &LieLattice, s: &Submodule) -> Result<Submodule> {
    let ads = [lattice.ad(0), lattice.ad(1), lattice.ad(2)];
    let mut t = s.clone();
    for _ in 0..3 * t.precision().max(1) {
        let mut next = t.clone();
        for ad in &ads {
            next = next.intersect(&t.preimage(ad)?)?;
        }
        if next.same_module(&t) {
            return Ok(t);
        }
        t = next;
    }
    Err(Error::PrecisionExhausted(
        "largest ideal iteration did not stabilise".into(),
    ))
}

/// Smallest ideal of the subalgebra `m` containing `gens`.
pub fn ideal_closure_in(
    lattice: &LieLattice,
    m: &Submodule,
    gens: &[Vector3],
) -> Result<Submodule> {
    let mb = m.generators();
    let mut s = Submodule::span(lattice.prime(), m.precision(), gens)?;
    for _ in 0..3 * m.precision() {
        let mut more = s.generators();
        for u in &mb {
            for v in &s.generators() {
                more.push(lattice.bracket(u, v));
            }
        }
        let next = Submodule::span(lattice.prime(), s.precision(), &more)?;
        if next.same_module(&s) {
            return Ok(s);
        }
        s = next;
    }
    Err(Error::PrecisionExhausted(
        "ideal closure did not stabilise".into(),
    ))
}

/// `(z0, z1, z2)` with `z1 = [[y, p^k x1], p^k x0]`, `z2 = [[y, p^k x2], p^k x0]`
/// and `z0 = [z1, z2]`. On a diagonal lattice with a nonzero `x0`-coordinate in
/// `y`, `z_j` is a nonzero multiple of `x_j`.
pub fn z_chain(lattice: &LieLattice, k: u32, y: &Vector3) -> Result<[Vector3; 3]> {
    let pk = PAdicScalar::p_power(lattice.prime(), lattice.precision(), k)?;
    let scaled = |i: usize| -> Vector3 { lattice.basis_vector(i).map(|c| &c * &pk) };
    let z1 = lattice.bracket(&lattice.bracket(y, &scaled(1)), &scaled(0));
    let z2 = lattice.bracket(&lattice.bracket(y, &scaled(2)), &scaled(0));
    let z0 = lattice.bracket(&z1, &z2);
    Ok([z0, z1, z2])
}

/// `v` is a nonzero multiple of the `i`-th basis vector at precision.
pub fn is_axis_multiple(v: &Vector3, i: usize) -> bool {
    (0..3).all(|j| v[j].is_zero() != (j == i))
}

/// Scalars attached to one subalgebra in the invariant-ideal construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofScalars {
    pub h: PAdicScalar,
    pub a3: PAdicScalar,
    pub a4: PAdicScalar,
    pub r0: u32,
    pub r1: u32,
    pub m0: u32,
    pub m1: u32,
    pub m2: u32,
    pub t0: u32,
    pub t1: u32,
    pub t2: u32,
}

impl ProofScalars {
    pub fn m(&self) -> [u32; 3] {
        [self.m0, self.m1, self.m2]
    }

    pub fn t(&self) -> [u32; 3] {
        [self.t0, self.t1, self.t2]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
}

/// Outcome of replaying the invariant-ideal construction on one subalgebra.
#[derive(Clone, Debug)]
pub struct SubalgebraReplay {
    pub params: HermiteParams,
    /// s-invariants of the subalgebra, computed from its induced structure constants.
    pub t_vector: Option<[u32; 3]>,
    pub scalars: ProofScalars,
    pub ideal: Option<Submodule>,
    pub checks: Vec<Check>,
}

impl SubalgebraReplay {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&str> {
        self.checks.iter().find(|c| !c.passed).map(|c| c.name.as_str())
    }
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn record(&mut self, name: &str, outcome: Result<bool>) -> bool {
        let passed = matches!(outcome, Ok(true));
        self.0.push(Check {
            name: name.to_string(),
            passed,
        });
        passed
    }
}

fn v_eq(x: &PAdicScalar, v: u32) -> bool {
    x.valuation() == Valuation::Finite(v)
}

fn hyp(name: &str) -> Error {
    Error::hypothesis(name, None)
}

/// Default floor on residual digits for replay assertions.
pub const RESIDUAL_DIGIT_FLOOR: u32 = 8;

/// Replays the construction of the invariant ideal
/// `I = p^r0 M + p^r1 [M, M] + [M, [M, M]]` for one subalgebra `m` of a
/// well-diagonalized lattice, recording every intermediate identity.
pub fn replay_subalgebra(
    lattice: &LieLattice,
    s: &SInvariants,
    m: &Submodule,
) -> Result<SubalgebraReplay> {
    let a = lattice.diagonal_constants()?;
    let prime = lattice.prime();
    let n = lattice.precision().min(m.precision());
    let params = m.hermite_params();
    let [k0, k1, k2] = params.k_vector;
    let k = k0 + k1 + k2;
    let sc = |x: &BigInt| PAdicScalar::new(prime, n, x.clone());
    let pp = |j: u32| PAdicScalar::p_power(prime, n, j);
    let (e, f, g) = (sc(&params.e)?, sc(&params.f)?, sc(&params.g)?);
    let [a0, a1, a2] = [a[0].truncate(n)?, a[1].truncate(n)?, a[2].truncate(n)?];
    let [s0, s1, s2] = s.as_array();

    let h = &(&e * &g) - &(&f * &pp(k1)?);
    let a3 = &(&(&a0 * &pp(2 * k1 + 2 * k2)?) + &(&(&a1 * &(&e * &e)) * &pp(2 * k2)?))
        + &(&a2 * &(&h * &h));
    let a4 = &(&(&(&a0 * &a1) * &pp(2 * k2)?) + &(&(&a0 * &a2) * &(&g * &g)))
        + &(&(&a1 * &a2) * &(&f * &f));

    let t_formula: Vec<i64> = [s0, s1, s2]
        .iter()
        .zip(params.k_vector)
        .map(|(&si, ki)| si as i64 + k as i64 - 2 * ki as i64)
        .collect();
    let r0 = s0 + s1 + k1 + 2 * k2;
    let r1 = s0 + k1 + k2;
    let scalars = ProofScalars {
        h: h.clone(),
        a3: a3.clone(),
        a4: a4.clone(),
        r0,
        r1,
        m0: r1 + s0 + k1 + k2,
        m1: s0 + s1 + k1 + 2 * k2,
        m2: r0 + k2,
        t0: t_formula[0].max(0) as u32,
        t1: t_formula[1].max(0) as u32,
        t2: t_formula[2].max(0) as u32,
    };
    let t = scalars.t();
    let mv = scalars.m();

    let mut checks = Checks::default();
    checks.record("subalgebra_closed", Ok(is_closed(lattice, m)));

    let induced = induced_structure(lattice, m);
    let t_vector = induced.as_ref().ok().map(|(_, t)| t.as_array());
    checks.record(
        "t_invariants_match_formula",
        Ok(t_vector.is_some_and(|tv| {
            (0..3).all(|i| t_formula[i] >= 0 && tv[i] as i64 == t_formula[i])
        })),
    );
    checks.record(
        "t_strictly_increasing",
        Ok(t_formula[0] >= 0 && t_formula[0] < t_formula[1] && t_formula[1] < t_formula[2]),
    );
    checks.record("valuation_a3", Ok(v_eq(&a3, s0 + 2 * k1 + 2 * k2)));
    checks.record("valuation_a4", Ok(v_eq(&a4, s0 + s1 + 2 * k2)));

    // Unitriangular change of basis from the Hermite basis y to a diagonal basis z.
    let v_matrix = v_matrix_for(&scalars, &a, &params, prime, n);
    let v_ok = checks.record(
        "v_matrix_integral_unimodular",
        v_matrix.as_ref().map(is_gl3).map_err(Clone::clone),
    );

    let z_matrix = v_matrix.as_ref().map_err(Clone::clone).and_then(|v| m.hermite().mul(v));
    checks.record(
        "z_basis_spans_subalgebra",
        z_matrix.as_ref().map_err(Clone::clone).and_then(|z| {
            Ok(Submodule::span(prime, n, &z.columns())?.same_module(m))
        }),
    );

    let diag_constants = (|| -> Result<bool> {
        if !v_ok {
            return Ok(false);
        }
        let (ty, _) = induced.as_ref().map_err(Clone::clone)?;
        let v = v_matrix.as_ref().map_err(Clone::clone)?;
        let tz = ty.change_basis(v)?;
        let c = tz.diagonal_constants()?;
        let pk = pp(k)?;
        let c0 = a3.div_exact(&pk)?;
        let c1 = (&a4 * &pk).div_exact(&a3)?;
        let c2 = (&(&(&a0 * &a1) * &a2) * &pk).div_exact(&a4)?;
        Ok(c[0].eq_at_precision(&c0) && c[1].eq_at_precision(&c1) && c[2].eq_at_precision(&c2))
    })();
    checks.record("z_basis_diagonal_constants", diag_constants);

    // w_j: the z basis with columns 0 and 1 rescaled by the unit parts of a3, a4.
    let w_basis = (|| -> Result<[Vector3; 3]> {
        let z = z_matrix.as_ref().map_err(Clone::clone)?;
        let u3 = a3.unit_part().ok_or_else(|| hyp("valuation_a3"))?;
        let u4 = a4.unit_part().ok_or_else(|| hyp("valuation_a4"))?;
        let cols = z.columns();
        let scale = |v: &Vector3, u: &PAdicScalar| -> Vector3 {
            [&v[0] * u, &v[1] * u, &v[2] * u]
        };
        Ok([scale(&cols[0], &u3), scale(&cols[1], &u4), cols[2].clone()])
    })();
    checks.record(
        "w_basis_spans_subalgebra",
        w_basis
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|w| Ok(Submodule::span(prime, n, w)?.same_module(m))),
    );

    let shifted = |w: &[Vector3; 3], e: [u32; 3]| -> Result<Submodule> {
        let gens: Vec<Vector3> = (0..3)
            .map(|i| {
                let pe = pp(e[i])?;
                Ok([&w[i][0] * &pe, &w[i][1] * &pe, &w[i][2] * &pe])
            })
            .collect::<Result<_>>()?;
        Submodule::span(prime, n, &gens)
    };

    let derived = derived_and_gamma2(lattice, m);
    checks.record(
        "derived_algebra_shape",
        (|| {
            let w = w_basis.as_ref().map_err(Clone::clone)?;
            let (d, _) = derived.as_ref().map_err(Clone::clone)?;
            Ok(d.same_module(&shifted(w, t)?))
        })(),
    );
    checks.record(
        "gamma2_shape",
        (|| {
            let w = w_basis.as_ref().map_err(Clone::clone)?;
            let (_, g2) = derived.as_ref().map_err(Clone::clone)?;
            Ok(g2.same_module(&shifted(w, [t[0] + t[1], t[0] + t[1], t[0] + t[2]])?))
        })(),
    );
    checks.record(
        "r_identities",
        Ok(r0 == t[0] + t[1] + k1 && r1 == t[0] + k0),
    );
    checks.record(
        "m_identities",
        Ok(mv[0] == r1 + s0 + k1 + k2 && mv[1] == r0 && mv[2] == r0 + k2),
    );
    checks.record(
        "ideal_generator_inequalities",
        Ok(r1 + t[0] <= r0
            && r1 + t[0] <= t[0] + t[1]
            && t[0] + t[1] <= r0
            && t[0] + t[1] <= r1 + t[1]
            && r0 <= r1 + t[2]
            && r0 <= t[0] + t[2]),
    );

    let ideal = (|| -> Result<Submodule> {
        let (d, g2) = derived.as_ref().map_err(Clone::clone)?;
        m.truncate(n)?
            .scaled(r0)
            .sum(&d.scaled(r1))?
            .sum(g2)
    })();
    checks.record(
        "ideal_equals_w_tilde_span",
        (|| {
            let i = ideal.as_ref().map_err(Clone::clone)?;
            let w = w_basis.as_ref().map_err(Clone::clone)?;
            let from_w = shifted(w, [r1 + t[0], t[0] + t[1], r0])?;
            let w_tilde = w_tilde_matrix(&scalars, &a, &params, prime, n)?;
            let cols_match = w_tilde.columns().iter().enumerate().all(|(j, col)| {
                let pe = pp([r1 + t[0], t[0] + t[1], r0][j]).expect("precision");
                (0..3).all(|r| col[r].eq_at_precision(&(&w[j][r] * &pe)))
            });
            Ok(cols_match
                && i.same_module(&from_w)
                && i.same_module(&Submodule::span(prime, n, &w_tilde.columns())?))
        })(),
    );
    let monomial = Submodule::monomial(prime, n, mv)?;
    checks.record(
        "ideal_is_monomial",
        ideal.as_ref().map(|i| i.same_module(&monomial)).map_err(Clone::clone),
    );
    checks.record(
        "ideal_criterion",
        Ok(monomial_ideal_criterion([Some(s0), Some(s1), Some(s2)], mv)),
    );
    checks.record(
        "ideal_bracket_membership",
        ideal.as_ref().map(|i| is_ideal(lattice, i)).map_err(Clone::clone),
    );
    checks.record(
        "ideal_nonzero",
        ideal.as_ref().map(|i| !i.is_zero()).map_err(Clone::clone),
    );
    checks.record(
        "ideal_inside_subalgebra",
        ideal.as_ref().map(|i| m.contains_module(i)).map_err(Clone::clone),
    );
    checks.record(
        "residual_precision",
        ideal
            .as_ref()
            .map(|i| i.is_full_rank() && i.residual_digits() >= RESIDUAL_DIGIT_FLOOR)
            .map_err(Clone::clone),
    );

    Ok(SubalgebraReplay {
        params,
        t_vector,
        scalars,
        ideal: ideal.ok(),
        checks: checks.0,
    })
}

fn v_matrix_for(
    sc: &ProofScalars,
    a: &[PAdicScalar; 3],
    params: &HermiteParams,
    prime: Prime,
    n: u32,
) -> Result<Matrix> {
    let [k0, k1, k2] = params.k_vector;
    let pp = |j: u32| PAdicScalar::p_power(prime, n, j);
    let s = |x: &BigInt| PAdicScalar::new(prime, n, x.clone());
    let (e, f, g) = (s(&params.e)?, s(&params.f)?, s(&params.g)?);
    let [a0, a1, a2] = [a[0].truncate(n)?, a[1].truncate(n)?, a[2].truncate(n)?];
    let h = &sc.h;
    let one = pp(0)?;
    let zero = PAdicScalar::zero(prime, n)?;
    let v10 = -&(&(&(&(&a1 * &e) * &pp(2 * k2)?) + &(&(&a2 * &g) * h)) * &pp(k0)?)
        .div_exact(&sc.a3)?;
    let v20 = (&(&(&a2 * h) * &pp(k0 + k1)?)).div_exact(&sc.a3)?;
    let v21 = -&(&a2 * &(&(&(&a0 * &g) * &pp(k1)?) + &(&(&a1 * &e) * &f))).div_exact(&sc.a4)?;
    Matrix::new(
        prime,
        3,
        3,
        vec![one.clone(), zero.clone(), zero.clone(), v10, one.clone(), zero, v20, v21, one],
    )
}

/// Generators of the invariant ideal written directly in ambient coordinates.
fn w_tilde_matrix(
    sc: &ProofScalars,
    a: &[PAdicScalar; 3],
    params: &HermiteParams,
    prime: Prime,
    n: u32,
) -> Result<Matrix> {
    let [_, k1, k2] = params.k_vector;
    let pp = |j: u32| PAdicScalar::p_power(prime, n, j);
    let s = |x: &BigInt| PAdicScalar::new(prime, n, x.clone());
    let (e, f, g) = (s(&params.e)?, s(&params.f)?, s(&params.g)?);
    let [a0, a1, a2] = [a[0].truncate(n)?, a[1].truncate(n)?, a[2].truncate(n)?];
    let h = &sc.h;
    let (r0, r1) = (sc.r0, sc.r1);
    let entries = vec![
        &a0 * &pp(r1 + k1 + k2)?,
        &a0 * &(&(&(&a1 * &e) * &pp(2 * k2)?) + &(&(&a2 * &g) * h)),
        &f * &pp(r0)?,
        -&(&(&a1 * &e) * &pp(r1 + k2)?),
        &a1 * &(&(&a0 * &pp(k1 + 2 * k2)?) - &(&(&a2 * &f) * h)),
        &g * &pp(r0)?,
        &(&a2 * h) * &pp(r1)?,
        -&(&(&a2 * &(&(&(&a0 * &g) * &pp(k1)?) + &(&(&a1 * &e) * &f))) * &pp(k2)?),
        pp(r0 + k2)?,
    ];
    Matrix::new(prime, 3, 3, entries)
}

/// The invariant ideal of a subalgebra of index `p^k` with `k < K`, together
/// with its scalars. Fails with the first violated identity.
pub fn canonical_ideal(lattice: &LieLattice, m: &Submodule) -> Result<(Submodule, ProofScalars)> {
    let a = lattice.diagonal_constants()?;
    let s = lattice.s_invariants()?;
    let vals: Vec<Option<u32>> = a.iter().map(|x| x.valuation().finite()).collect();
    if vals != [Some(s.s0), Some(s.s1), Some(s.s2)] {
        return Err(hyp("well_diagonalizing_basis"));
    }
    let k = m.index_exponent();
    if !m.is_full_rank() || k >= s.k_bound() {
        return Err(Error::hypothesis(
            "k < K",
            Some(format!("k = {k}, K = {}", s.k_bound())),
        ));
    }
    let replay = replay_subalgebra(lattice, &s, m)?;
    if let Some(name) = replay.first_failure() {
        return Err(Error::hypothesis(name, Some(format!("subalgebra {m}"))));
    }
    let ideal = replay.ideal.clone().ok_or_else(|| hyp("ideal"))?;
    Ok((ideal, replay.scalars))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u64) -> Prime {
        Prime::new(n).unwrap()
    }

    #[test]
    fn candidate_counts() {
        assert_eq!(hermite_candidates(p(3), 0).len(), 1);
        assert_eq!(hermite_candidates(p(3), 1).len(), 13);
        assert_eq!(hermite_candidates(p(3), 2).len(), 130);
        assert_eq!(hermite_candidates(p(5), 1).len(), 31);
    }

    #[test]
    fn candidates_are_canonical_and_distinct() {
        let pr = p(3);
        let all: Vec<Submodule> = hermite_candidates(pr, 2)
            .into_iter()
            .map(|c| {
                let m = Submodule::from_params(pr, 12, c.clone()).unwrap();
                assert_eq!(m.hermite_params().e, c.e);
                assert_eq!(m.hermite_params().f, c.f);
                assert_eq!(m.hermite_params().g, c.g);
                m
            })
            .collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert!(!all[i].same_module(&all[j]));
            }
        }
    }

    #[test]
    fn index_p_subalgebras_of_l2() {
        let l2 = LieLattice::example_family(2, p(3), 40).unwrap();
        assert_eq!(enumerate_subalgebras(&l2, 1).unwrap().len(), 13);
        let only = enumerate_subalgebras(&l2, 0).unwrap();
        assert_eq!(only.len(), 1);
        assert!(only[0].same_module(&Submodule::ambient(p(3), 40).unwrap()));
    }

    #[test]
    fn derived_terms_of_l1() {
        let pr = p(3);
        let l1 = LieLattice::example_family(1, pr, 40).unwrap();
        let whole = Submodule::ambient(pr, 40).unwrap();
        let (d, g2) = derived_and_gamma2(&l1, &whole).unwrap();
        assert!(d.same_module(&Submodule::monomial(pr, 40, [2, 4, 6]).unwrap()));
        assert!(g2.same_module(&Submodule::monomial(pr, 40, [6, 6, 8]).unwrap()));

        let abelian = LieLattice::from_entries(pr, 20, &[]).unwrap();
        let (d, g2) = derived_and_gamma2(&abelian, &Submodule::ambient(pr, 20).unwrap()).unwrap();
        assert!(d.is_zero() && g2.is_zero());
    }

    #[test]
    fn ideal_examples() {
        let pr = p(3);
        let units = LieLattice::diagonal(
            pr,
            20,
            [1, 1, 1].map(|v| PAdicScalar::new(pr, 20, v).unwrap()),
        )
        .unwrap();
        let s = Submodule::monomial(pr, 20, [0, 0, 0]).unwrap();
        assert_eq!(ideal_paths(&units, &s), (true, Some(true)));
        let s = Submodule::monomial(pr, 20, [1, 0, 0]).unwrap();
        assert_eq!(ideal_paths(&units, &s), (false, Some(false)));

        let l1 = LieLattice::example_family(1, pr, 30).unwrap();
        let s = Submodule::monomial(pr, 30, [4, 6, 7]).unwrap();
        assert_eq!(ideal_paths(&l1, &s), (true, Some(true)));
    }

    #[test]
    fn largest_ideal_examples() {
        let pr = p(3);
        let l1 = LieLattice::example_family(1, pr, 30).unwrap();
        let whole = Submodule::ambient(pr, 30).unwrap();
        assert!(largest_ideal_in(&l1, &whole).unwrap().same_module(&whole));
        let pl = whole.scaled(1);
        assert!(largest_ideal_in(&l1, &pl).unwrap().same_module(&pl));
    }

    #[test]
    fn canonical_ideal_of_whole_lattice() {
        let pr = p(3);
        let l2 = LieLattice::example_family(2, pr, 40).unwrap();
        let whole = Submodule::from_params(
            pr,
            40,
            HermiteParams {
                k_vector: [0, 0, 0],
                e: 0.into(),
                f: 0.into(),
                g: 0.into(),
            },
        )
        .unwrap();
        let (i, sc) = canonical_ideal(&l2, &whole).unwrap();
        // s = (2, 6, 10): m = (2 s0, s0 + s1, s0 + s1)
        assert_eq!(sc.m(), [4, 8, 8]);
        assert!(i.same_module(&Submodule::monomial(pr, 40, [4, 8, 8]).unwrap()));
    }

    #[test]
    fn canonical_ideal_rejects_k_at_bound() {
        let pr = p(3);
        let l1 = LieLattice::example_family(1, pr, 40).unwrap();
        let subs = enumerate_subalgebras(&l1, 1).unwrap();
        assert!(matches!(
            canonical_ideal(&l1, &subs[0]),
            Err(Error::HypothesisViolated { .. })
        ));
    }
}
