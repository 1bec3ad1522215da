//! Exact linear algebra over `Z_p` at finite precision.
//!
//! All normal forms are computed on residues modulo `p^N`, where `N` is the
//! smallest precision among the input entries. A submodule of `(Z/p^N)^3`
//! corresponds to a lattice between `p^N Z_p^3` and `Z_p^3`, so the column
//! Hermite form computed here (in Howell form, which stays canonical when a
//! pivot vanishes modulo `p^N`) describes the lattice `span + p^N Z_p^3`.
//!
//! Pivoting always takes an entry of minimal valuation, ties broken by the
//! lowest (row, column) index.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::padic::{PAdicScalar, Prime};

pub type Vector3 = [PAdicScalar; 3];

/// Residue arithmetic modulo `p^n`.
#[derive(Clone, Debug)]
pub(crate) struct Ring {
    pub prime: Prime,
    pub n: u32,
    pub modulus: BigInt,
}

impl Ring {
    pub fn new(prime: Prime, n: u32) -> Self {
        Ring {
            prime,
            n,
            modulus: prime.pow(n),
        }
    }

    pub fn reduce(&self, x: &BigInt) -> BigInt {
        x.mod_floor(&self.modulus)
    }

    /// Valuation of a reduced residue, `n` for zero.
    pub fn val(&self, x: &BigInt) -> u32 {
        self.prime.valuation_of(x).map_or(self.n, |v| v.min(self.n))
    }

    pub fn pow(&self, k: u32) -> BigInt {
        if k >= self.n {
            BigInt::zero()
        } else {
            self.prime.pow(k)
        }
    }

    fn inv_unit(&self, x: &BigInt) -> BigInt {
        x.modinv(&self.modulus)
            .expect("pivot unit part is invertible")
    }

    pub fn scalar(&self, x: &BigInt) -> PAdicScalar {
        PAdicScalar::from_residue_unchecked(self.prime, self.n, self.reduce(x))
    }

    pub fn residues(&self, v: &[PAdicScalar]) -> Vec<BigInt> {
        v.iter().map(|x| self.reduce(x.residue())).collect()
    }
}

/// Column Howell form of the span of `gens` inside `(Z/p^n)^3`.
///
/// Returns the diagonal exponents `k` (with `k[i] == n` when the row has no
/// pivot) and the three columns; column `j` has `p^k[j]` in row `j`, zeros
/// below, and entries above reduced into `[0, p^k[i])`.
pub(crate) fn howell(ring: &Ring, gens: &[[BigInt; 3]]) -> ([u32; 3], [[BigInt; 3]; 3]) {
    let mut work: Vec<[BigInt; 3]> = gens
        .iter()
        .map(|g| [ring.reduce(&g[0]), ring.reduce(&g[1]), ring.reduce(&g[2])])
        .filter(|g| g.iter().any(|x| !x.is_zero()))
        .collect();
    let zero = || [BigInt::zero(), BigInt::zero(), BigInt::zero()];
    let mut cols = [zero(), zero(), zero()];
    let mut k = [ring.n; 3];

    for r in (0..3).rev() {
        let best = work
            .iter()
            .enumerate()
            .map(|(i, g)| (ring.val(&g[r]), i))
            .min();
        let (v, idx) = match best {
            Some((v, idx)) if v < ring.n => (v, idx),
            _ => continue,
        };
        let mut piv = work.remove(idx);
        let shift = ring.prime.pow(v);
        let unit = &piv[r] / &shift;
        let inv = ring.inv_unit(&unit);
        for x in piv.iter_mut() {
            *x = ring.reduce(&(&*x * &inv));
        }
        for g in work.iter_mut() {
            let q = &g[r] / &shift;
            if q.is_zero() {
                continue;
            }
            for i in 0..3 {
                g[i] = ring.reduce(&(&g[i] - &q * &piv[i]));
            }
        }
        if v > 0 {
            let t = ring.prime.pow(ring.n - v);
            let extra = [
                ring.reduce(&(&piv[0] * &t)),
                ring.reduce(&(&piv[1] * &t)),
                ring.reduce(&(&piv[2] * &t)),
            ];
            work.push(extra);
        }
        work.retain(|g| g.iter().any(|x| !x.is_zero()));
        cols[r] = piv;
        k[r] = v;
    }

    for j in 1..3 {
        for i in (0..j).rev() {
            if k[i] >= ring.n {
                continue;
            }
            let q = cols[j][i].div_floor(&ring.prime.pow(k[i]));
            if q.is_zero() {
                continue;
            }
            let ci = cols[i].clone();
            for t in 0..3 {
                cols[j][t] = ring.reduce(&(&cols[j][t] - &q * &ci[t]));
            }
        }
    }
    (k, cols)
}

/// Smith reduction of an `m x c` residue matrix (row-major).
///
/// Returns the diagonal valuations (length `min(m, c)`, `n` for zero) and the
/// right transform `Q` (row-major `c x c`) with `P * A * Q = diag(p^d)`.
pub(crate) fn smith_right(ring: &Ring, a: &[Vec<BigInt>]) -> (Vec<u32>, Vec<Vec<BigInt>>) {
    let m = a.len();
    let c = a.first().map_or(0, |r| r.len());
    let mut a: Vec<Vec<BigInt>> = a
        .iter()
        .map(|row| row.iter().map(|x| ring.reduce(x)).collect())
        .collect();
    let mut q: Vec<Vec<BigInt>> = (0..c)
        .map(|i| {
            (0..c)
                .map(|j| if i == j { BigInt::from(1) } else { BigInt::zero() })
                .collect()
        })
        .collect();
    let steps = m.min(c);
    let mut diag = vec![ring.n; steps];

    for t in 0..steps {
        let mut best: Option<(u32, usize, usize)> = None;
        for (i, row) in a.iter().enumerate().skip(t) {
            for (j, x) in row.iter().enumerate().skip(t) {
                let v = ring.val(x);
                if best.map_or(true, |(bv, _, _)| v < bv) {
                    best = Some((v, i, j));
                }
            }
        }
        let (v, pi, pj) = match best {
            Some(b) if b.0 < ring.n => b,
            _ => break,
        };
        a.swap(t, pi);
        if pj != t {
            for row in a.iter_mut() {
                row.swap(t, pj);
            }
            for row in q.iter_mut() {
                row.swap(t, pj);
            }
        }
        let shift = ring.prime.pow(v);
        let inv = ring.inv_unit(&(&a[t][t] / &shift));
        for row in a.iter_mut() {
            row[t] = ring.reduce(&(&row[t] * &inv));
        }
        for row in q.iter_mut() {
            row[t] = ring.reduce(&(&row[t] * &inv));
        }
        for r in t + 1..m {
            let f = &a[r][t] / &shift;
            if f.is_zero() {
                continue;
            }
            for j in t..c {
                let d = &f * &a[t][j];
                a[r][j] = ring.reduce(&(&a[r][j] - d));
            }
        }
        for cc in t + 1..c {
            let f = &a[t][cc] / &shift;
            if f.is_zero() {
                continue;
            }
            for row in a.iter_mut() {
                let d = &f * &row[t];
                row[cc] = ring.reduce(&(&row[cc] - d));
            }
            for row in q.iter_mut() {
                let d = &f * &row[t];
                row[cc] = ring.reduce(&(&row[cc] - d));
            }
        }
        diag[t] = v;
    }
    (diag, q)
}

/// Generators of `{x : A x = 0 mod p^n}` for an `m x c` residue matrix.
pub(crate) fn kernel_generators(ring: &Ring, a: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let c = a.first().map_or(0, |r| r.len());
    let (diag, q) = smith_right(ring, a);
    (0..c)
        .map(|i| {
            let scale = match diag.get(i) {
                Some(&d) if d < ring.n => ring.prime.pow(ring.n - d),
                _ => BigInt::from(1),
            };
            (0..c).map(|r| ring.reduce(&(&q[r][i] * &scale))).collect()
        })
        .collect()
}

/// Howell form of `{x : A x in span(H)}` where `a` is 3x3 and `h` holds generator columns.
pub(crate) fn preimage_residues(
    ring: &Ring,
    a: &[Vec<BigInt>],
    h: &[[BigInt; 3]],
) -> ([u32; 3], [[BigInt; 3]; 3]) {
    let mut block: Vec<Vec<BigInt>> = a.to_vec();
    for (r, row) in block.iter_mut().enumerate() {
        for g in h {
            row.push(ring.reduce(&-&g[r]));
        }
    }
    let gens: Vec<[BigInt; 3]> = kernel_generators(ring, &block)
        .into_iter()
        .map(|v| [v[0].clone(), v[1].clone(), v[2].clone()])
        .collect();
    if gens.is_empty() {
        return howell(ring, &[]);
    }
    howell(ring, &gens)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    prime: Prime,
    rows: usize,
    cols: usize,
    entries: Vec<PAdicScalar>,
}

impl Matrix {
    /// Row-major entries.
    pub fn new(prime: Prime, rows: usize, cols: usize, entries: Vec<PAdicScalar>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if let Some(x) = entries.iter().find(|x| x.prime() != prime) {
            return Err(Error::PrimeMismatch(prime.get(), x.prime().get()));
        }
        Ok(Matrix {
            prime,
            rows,
            cols,
            entries,
        })
    }

    pub fn from_i64(
        prime: Prime,
        precision: u32,
        rows: usize,
        cols: usize,
        values: &[i64],
    ) -> Result<Self> {
        let entries = values
            .iter()
            .map(|&v| PAdicScalar::new(prime, precision, v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(prime, rows, cols, entries)
    }

    pub fn identity(prime: Prime, precision: u32, n: usize) -> Result<Self> {
        let v: Vec<i64> = (0..n * n)
            .map(|i| if i / n == i % n { 1 } else { 0 })
            .collect();
        Self::from_i64(prime, precision, n, n, &v)
    }

    pub fn zeros(prime: Prime, precision: u32, rows: usize, cols: usize) -> Result<Self> {
        Self::from_i64(prime, precision, rows, cols, &vec![0; rows * cols])
    }

    pub fn diagonal(d: &[PAdicScalar]) -> Result<Self> {
        let n = d.len();
        let prime = d
            .first()
            .ok_or_else(|| Error::DimensionMismatch("empty diagonal".into()))?
            .prime();
        let prec = d.iter().map(|x| x.precision()).min().unwrap_or(1);
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(if i == j {
                    d[i].clone()
                } else {
                    PAdicScalar::zero(prime, prec)?
                });
            }
        }
        Self::new(prime, n, n, entries)
    }

    /// 3 x m matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vector3]) -> Result<Self> {
        let prime = columns
            .first()
            .ok_or_else(|| Error::DimensionMismatch("no columns".into()))?[0]
            .prime();
        let m = columns.len();
        let mut entries = Vec::with_capacity(3 * m);
        for i in 0..3 {
            for c in columns {
                entries.push(c[i].clone());
            }
        }
        Self::new(prime, 3, m, entries)
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &PAdicScalar {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: PAdicScalar) {
        assert_eq!(x.prime(), self.prime);
        self.entries[i * self.cols + j] = x;
    }

    pub fn entries(&self) -> &[PAdicScalar] {
        &self.entries
    }

    pub fn column(&self, j: usize) -> Vector3 {
        assert_eq!(self.rows, 3, "column() is for 3-row matrices");
        [
            self.get(0, j).clone(),
            self.get(1, j).clone(),
            self.get(2, j).clone(),
        ]
    }

    pub fn columns(&self) -> Vec<Vector3> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn min_precision(&self) -> u32 {
        self.entries.iter().map(|x| x.precision()).min().unwrap_or(1)
    }

    pub fn truncate(&self, precision: u32) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|x| x.truncate(precision))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.prime, self.rows, self.cols, entries)
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j).clone());
            }
        }
        Matrix {
            prime: self.prime,
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if self.prime != other.prime {
            return Err(Error::PrimeMismatch(self.prime.get(), other.prime.get()));
        }
        let mut entries = Vec::with_capacity(self.rows * other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = self.get(i, 0) * other.get(0, j);
                for t in 1..self.cols {
                    acc = acc + self.get(i, t) * other.get(t, j);
                }
                entries.push(acc);
            }
        }
        Matrix::new(self.prime, self.rows, other.cols, entries)
    }

    pub fn mul_vec(&self, v: &Vector3) -> Vector3 {
        assert_eq!((self.rows, self.cols), (3, 3));
        let row = |i: usize| {
            self.get(i, 0) * &v[0] + self.get(i, 1) * &v[1] + self.get(i, 2) * &v[2]
        };
        [row(0), row(1), row(2)]
    }

    pub fn scale(&self, c: &PAdicScalar) -> Self {
        Matrix {
            prime: self.prime,
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|x| x * c).collect(),
        }
    }

    pub fn det(&self) -> Result<PAdicScalar> {
        if (self.rows, self.cols) != (3, 3) {
            return Err(Error::DimensionMismatch("det needs a 3x3 matrix".into()));
        }
        let m = |i, j| self.get(i, j);
        let t0 = m(0, 0) * &(m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1));
        let t1 = m(0, 1) * &(m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0));
        let t2 = m(0, 2) * &(m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        Ok(t0 - t1 + t2)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        let det = self.det()?;
        let inv = det.invert_unit().map_err(|_| Error::NotInvertible {
            precision: det.precision(),
        })?;
        let m = |i: usize, j: usize| self.get(i % 3, j % 3);
        let mut entries = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                // adj[i][j] = cofactor(j, i), via cyclic index shifts
                let c = m(j + 1, i + 1) * m(j + 2, i + 2) - m(j + 1, i + 2) * m(j + 2, i + 1);
                entries.push(&c * &inv);
            }
        }
        Matrix::new(self.prime, 3, 3, entries)
    }

    pub(crate) fn residue_rows(&self, ring: &Ring) -> Vec<Vec<BigInt>> {
        (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| ring.reduce(self.get(i, j).residue()))
                    .collect()
            })
            .collect()
    }

    pub(crate) fn residue_columns(&self, ring: &Ring) -> Vec<[BigInt; 3]> {
        assert_eq!(self.rows, 3);
        (0..self.cols)
            .map(|j| {
                [
                    ring.reduce(self.get(0, j).residue()),
                    ring.reduce(self.get(1, j).residue()),
                    ring.reduce(self.get(2, j).residue()),
                ]
            })
            .collect()
    }

    pub(crate) fn from_residue_columns(ring: &Ring, cols: &[[BigInt; 3]]) -> Matrix {
        let mut entries = Vec::with_capacity(3 * cols.len());
        for i in 0..3 {
            for c in cols {
                entries.push(ring.scalar(&c[i]));
            }
        }
        Matrix {
            prime: ring.prime,
            rows: 3,
            cols: cols.len(),
            entries,
        }
    }
}

impl std::fmt::Display for Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| self.get(i, j).balanced().to_string())
                .collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Canonical upper-triangular generator matrix of the column span of `gens` (3 rows).
///
/// Diagonal entries are exact powers `p^k_i`; above-diagonal entries in row
/// `i` are reduced into `[0, p^k_i)`.
pub fn hermite_form(gens: &Matrix) -> Result<Matrix> {
    if gens.rows() != 3 {
        return Err(Error::DimensionMismatch("hermite_form expects 3 rows".into()));
    }
    let ring = Ring::new(gens.prime(), gens.min_precision());
    let (k, cols) = howell(&ring, &gens.residue_columns(&ring));
    if k.iter().any(|&x| x >= ring.n) {
        return Err(Error::RankDeficientAtPrecision { precision: ring.n });
    }
    Ok(Matrix::from_residue_columns(&ring, &cols))
}

/// Valuations `d_0 <= d_1 <= d_2` of the elementary divisors of a square full-rank matrix.
pub fn smith_invariants(a: &Matrix) -> Result<Vec<u32>> {
    if a.rows() != a.cols() {
        return Err(Error::DimensionMismatch("smith_invariants expects a square matrix".into()));
    }
    let ring = Ring::new(a.prime(), a.min_precision());
    let (mut d, _) = smith_right(&ring, &a.residue_rows(&ring));
    if d.iter().any(|&x| x >= ring.n) {
        return Err(Error::RankDeficientAtPrecision { precision: ring.n });
    }
    d.sort_unstable();
    Ok(d)
}

/// Coordinates `c` with `H c = v` for an upper-triangular Hermite matrix `H`.
///
/// Coordinate `i` is normally returned at precision `N - (k_i + ... + k_2)`,
/// the digits actually determined by `v`. When that runs out (indices close
/// to `p^N`) the result is instead one exact solution of `H c = v mod p^N`,
/// found greedily; the Hermite form's completion guarantees the greedy choice
/// never gets stuck. Returns `None` when `v` is not in the span at precision.
pub fn solve_in_span(h: &Matrix, v: &Vector3) -> Option<Vector3> {
    assert_eq!((h.rows(), h.cols()), (3, 3), "solve_in_span expects a 3x3 Hermite matrix");
    let exact = solve_residues(h, v)?;
    Some(solve_tracked(h, v).unwrap_or(exact))
}

/// Back-substitution with per-element precision; `None` when digits run out.
fn solve_tracked(h: &Matrix, v: &Vector3) -> Option<Vector3> {
    let mut coords: [Option<PAdicScalar>; 3] = [None, None, None];
    for r in (0..3).rev() {
        let mut rest = v[r].clone();
        for (j, c) in coords.iter().enumerate().skip(r + 1) {
            let c = c.as_ref().expect("solved below");
            rest = rest - h.get(r, j) * c;
        }
        let pivot = h.get(r, r);
        let c = if pivot.is_zero() {
            if !rest.is_zero() {
                return None;
            }
            rest
        } else {
            rest.div_exact(pivot).ok()?
        };
        coords[r] = Some(c);
    }
    let [a, b, c] = coords;
    Some([a?, b?, c?])
}

fn solve_residues(h: &Matrix, v: &Vector3) -> Option<Vector3> {
    let n = v
        .iter()
        .map(|x| x.precision())
        .fold(h.min_precision(), u32::min);
    let ring = Ring::new(h.prime(), n);
    let hr = h.residue_rows(&ring);
    let vr = ring.residues(v);
    let mut c = [BigInt::zero(), BigInt::zero(), BigInt::zero()];
    for r in (0..3).rev() {
        let mut rest = vr[r].clone();
        for j in r + 1..3 {
            rest -= &hr[r][j] * &c[j];
        }
        let rest = ring.reduce(&rest);
        let kp = ring.val(&hr[r][r]);
        if kp >= n {
            if !rest.is_zero() {
                return None;
            }
            continue;
        }
        if ring.val(&rest) < kp {
            return None;
        }
        let unit = &hr[r][r] / ring.pow(kp);
        c[r] = ring.reduce(&(&rest / ring.pow(kp) * ring.inv_unit(&unit)));
    }
    Some([ring.scalar(&c[0]), ring.scalar(&c[1]), ring.scalar(&c[2])])
}

/// Hermite (Howell) form of `{x : A x in span(H)}`.
///
/// When `span(H)` is degenerate at precision the result may have zero
/// diagonal entries: it then stands for the lattice `preimage + p^N Z_p^3`.
pub fn preimage_of_submodule(a: &Matrix, h: &Matrix) -> Result<Matrix> {
    if (a.rows(), a.cols()) != (3, 3) || h.rows() != 3 {
        return Err(Error::DimensionMismatch("preimage expects 3x3 map and 3-row span".into()));
    }
    let n = a.min_precision().min(h.min_precision());
    if n == 0 {
        return Err(Error::PrecisionExhausted("no digits left".into()));
    }
    let ring = Ring::new(a.prime(), n);
    let (_, cols) = preimage_residues(&ring, &a.residue_rows(&ring), &h.residue_columns(&ring));
    Ok(Matrix::from_residue_columns(&ring, &cols))
}

pub fn is_gl3(a: &Matrix) -> bool {
    a.det().map(|d| d.is_unit()).unwrap_or(false)
}
