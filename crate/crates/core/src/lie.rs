//! Rank-3 Lie lattices over `Z_p` given by structure constants.
//!
//! The basis is `(x_0, x_1, x_2)` and `[x_i, x_j] = sum_k c[i][j][k] x_k`.
//! A lattice is in diagonal form when `[x_i, x_{i+1}] = a_{i+2} x_{i+2}`
//! (indices mod 3) and every other constant vanishes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_gl3, smith_invariants, Matrix, Vector3};
use crate::padic::{PAdicScalar, Prime, Valuation};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LieLattice {
    prime: Prime,
    precision: u32,
    tensor: Vec<PAdicScalar>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SInvariants {
    pub s0: u32,
    pub s1: u32,
    pub s2: u32,
}

impl SInvariants {
    pub fn new(s0: u32, s1: u32, s2: u32) -> Result<Self> {
        if s0 > s1 || s1 > s2 {
            return Err(Error::hypothesis(
                "s0 <= s1 <= s2",
                Some(format!("got ({s0}, {s1}, {s2})")),
            ));
        }
        Ok(SInvariants { s0, s1, s2 })
    }

    pub fn as_array(&self) -> [u32; 3] {
        [self.s0, self.s1, self.s2]
    }

    /// Exponent of the lower bound `p^K` on the self-similarity index.
    pub fn k_bound(&self) -> u32 {
        k_bound(self)
    }
}

impl fmt::Display for SInvariants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.s0, self.s1, self.s2)
    }
}

/// `K = ceil(min((s1 - s0) / 2, (s2 - s1) / 2))`.
pub fn k_bound(s: &SInvariants) -> u32 {
    let gap = (s.s1 - s.s0).min(s.s2 - s.s1);
    gap.div_ceil(2)
}

/// Signed permutation `x'_i = sign_i * x_{perm_i}` relating two bases.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisPermutation {
    pub perm: [usize; 3],
    pub signs: [i8; 3],
}

impl BasisPermutation {
    pub fn identity() -> Self {
        BasisPermutation {
            perm: [0, 1, 2],
            signs: [1, 1, 1],
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    /// Column `i` holds the old coordinates of `x'_i`.
    pub fn matrix(&self, prime: Prime, precision: u32) -> Result<Matrix> {
        let mut v = [0i64; 9];
        for i in 0..3 {
            v[self.perm[i] * 3 + i] = self.signs[i] as i64;
        }
        Matrix::from_i64(prime, precision, 3, 3, &v)
    }
}

fn idx(i: usize, j: usize, k: usize) -> usize {
    i * 9 + j * 3 + k
}

impl LieLattice {
    /// Builds a lattice from `(i, j, k, c)` entries meaning `c[i][j][k] = c`;
    /// the antisymmetric partner `c[j][i][k] = -c` is filled in.
    pub fn from_entries(
        prime: Prime,
        precision: u32,
        entries: &[(usize, usize, usize, PAdicScalar)],
    ) -> Result<Self> {
        let zero = PAdicScalar::zero(prime, precision)?;
        let mut tensor = vec![zero.clone(); 27];
        let mut set = [false; 27];
        for (i, j, k, c) in entries {
            let (i, j, k) = (*i, *j, *k);
            if i > 2 || j > 2 || k > 2 {
                return Err(Error::DimensionMismatch(format!(
                    "basis index out of range in ({i}, {j}, {k})"
                )));
            }
            if c.prime() != prime {
                return Err(Error::PrimeMismatch(prime.get(), c.prime().get()));
            }
            if c.precision() < precision {
                return Err(Error::PrecisionTooSmall {
                    required: precision,
                    available: c.precision(),
                });
            }
            let c = c.truncate(precision)?;
            if i == j {
                if !c.is_zero() {
                    return Err(Error::NotAntisymmetric(i, j, k));
                }
                continue;
            }
            let neg = -&c;
            for (slot, value) in [(idx(i, j, k), c), (idx(j, i, k), neg)] {
                if set[slot] && tensor[slot] != value {
                    return Err(Error::NotAntisymmetric(i, j, k));
                }
                tensor[slot] = value;
                set[slot] = true;
            }
        }
        Ok(LieLattice {
            prime,
            precision,
            tensor,
        })
    }

    /// Full tensor in `c[i][j][k]` order; must already be antisymmetric.
    pub fn from_tensor(prime: Prime, precision: u32, tensor: Vec<PAdicScalar>) -> Result<Self> {
        if tensor.len() != 27 {
            return Err(Error::DimensionMismatch("tensor needs 27 entries".into()));
        }
        let tensor = tensor
            .into_iter()
            .map(|c| c.truncate(precision))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let a = &tensor[idx(i, j, k)];
                    if a.prime() != prime {
                        return Err(Error::PrimeMismatch(prime.get(), a.prime().get()));
                    }
                    if *a != -&tensor[idx(j, i, k)] {
                        return Err(Error::NotAntisymmetric(i, j, k));
                    }
                }
            }
        }
        Ok(LieLattice {
            prime,
            precision,
            tensor,
        })
    }

    /// `[x_1, x_2] = a0 x_0`, `[x_2, x_0] = a1 x_1`, `[x_0, x_1] = a2 x_2`.
    pub fn diagonal(prime: Prime, precision: u32, a: [PAdicScalar; 3]) -> Result<Self> {
        let [a0, a1, a2] = a;
        Self::from_entries(prime, precision, &[(1, 2, 0, a0), (2, 0, 1, a1), (0, 1, 2, a2)])
    }

    /// The family with `[x_1,x_2] = p^2 x_0`, `[x_2,x_0] = p^(2l+2) x_1`,
    /// `[x_0,x_1] = -p^(4l+2) x_2`; its s-invariants are `(2, 2l+2, 4l+2)`.
    pub fn example_family(l: u32, prime: Prime, precision: u32) -> Result<Self> {
        let required = 4 * l + 3;
        if precision < required {
            return Err(Error::PrecisionTooSmall {
                required,
                available: precision,
            });
        }
        let a0 = PAdicScalar::from_unit_and_valuation(prime, precision, 1, 2)?;
        let a1 = PAdicScalar::from_unit_and_valuation(prime, precision, 1, 2 * l + 2)?;
        let a2 = PAdicScalar::from_unit_and_valuation(prime, precision, -1, 4 * l + 2)?;
        Self::diagonal(prime, precision, [a0, a1, a2])
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> &PAdicScalar {
        &self.tensor[idx(i, j, k)]
    }

    pub fn tensor(&self) -> &[PAdicScalar] {
        &self.tensor
    }

    pub fn truncate(&self, precision: u32) -> Result<Self> {
        Ok(LieLattice {
            prime: self.prime,
            precision,
            tensor: self
                .tensor
                .iter()
                .map(|c| c.truncate(precision))
                .collect::<Result<Vec<_>>>()?,
        })
    }

    pub fn zero_vector(&self) -> Vector3 {
        let z = PAdicScalar::zero(self.prime, self.precision).expect("precision >= 1");
        [z.clone(), z.clone(), z]
    }

    pub fn basis_vector(&self, i: usize) -> Vector3 {
        let mut v = self.zero_vector();
        v[i] = PAdicScalar::one(self.prime, self.precision).expect("precision >= 1");
        v
    }

    pub fn bracket(&self, u: &Vector3, v: &Vector3) -> Vector3 {
        let mut out = self.zero_vector();
        for i in 0..3 {
            if u[i].is_zero() {
                continue;
            }
            for j in 0..3 {
                if i == j || v[j].is_zero() {
                    continue;
                }
                let uv = &u[i] * &v[j];
                for (k, o) in out.iter_mut().enumerate() {
                    let c = &self.tensor[idx(i, j, k)];
                    if !c.is_zero() {
                        *o = &*o + &(&uv * c);
                    }
                }
            }
        }
        out
    }

    /// Matrix of `ad(x_i)`: column `j` is `[x_i, x_j]`.
    pub fn ad(&self, i: usize) -> Matrix {
        let xi = self.basis_vector(i);
        let cols: Vec<Vector3> = (0..3)
            .map(|j| self.bracket(&xi, &self.basis_vector(j)))
            .collect();
        Matrix::from_columns(&cols).expect("three columns")
    }

    /// Matrix with columns `[x_1, x_2]`, `[x_2, x_0]`, `[x_0, x_1]`; its span is `[L, L]`.
    pub fn abelianization_matrix(&self) -> Matrix {
        let b = |i, j| self.bracket(&self.basis_vector(i), &self.basis_vector(j));
        Matrix::from_columns(&[b(1, 2), b(2, 0), b(0, 1)]).expect("three columns")
    }

    pub fn jacobi_check(&self) -> bool {
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let x = |t| self.basis_vector(t);
                    let t1 = self.bracket(&x(i), &self.bracket(&x(j), &x(k)));
                    let t2 = self.bracket(&x(j), &self.bracket(&x(k), &x(i)));
                    let t3 = self.bracket(&x(k), &self.bracket(&x(i), &x(j)));
                    if (0..3).any(|t| !(&(&t1[t] + &t2[t]) + &t3[t]).is_zero()) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// `(a0, a1, a2)` read off as the `[x_1,x_2]`, `[x_2,x_0]`, `[x_0,x_1]` coefficients.
    pub fn diagonal_constants(&self) -> Result<[PAdicScalar; 3]> {
        let allowed = |i: usize, j: usize, k: usize| i != j && k != i && k != j;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    if !allowed(i, j, k) && !self.tensor[idx(i, j, k)].is_zero() {
                        return Err(Error::NotDiagonal);
                    }
                }
            }
        }
        Ok([
            self.tensor[idx(1, 2, 0)].clone(),
            self.tensor[idx(2, 0, 1)].clone(),
            self.tensor[idx(0, 1, 2)].clone(),
        ])
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal_constants().is_ok()
    }

    /// Reorders a diagonal basis so that `v(a0) <= v(a1) <= v(a2)`.
    ///
    /// Even permutations relabel the basis; a transposition also negates
    /// the basis vector it fixes, which keeps the constants exactly permuted.
    pub fn well_diagonalize(&self) -> Result<(LieLattice, BasisPermutation)> {
        let a = self.diagonal_constants()?;
        let vals = a
            .iter()
            .map(|x| {
                x.valuation().finite().ok_or(Error::Unsolvable {
                    precision: self.precision,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut perm = [0usize, 1, 2];
        perm.sort_by_key(|&i| (vals[i], i));
        let inversions = (0..3)
            .flat_map(|i| (i + 1..3).map(move |j| (i, j)))
            .filter(|&(i, j)| perm[i] > perm[j])
            .count();
        let mut signs = [1i8; 3];
        if inversions % 2 == 1 {
            let fixed = (0..3).find(|&i| perm[i] == i).expect("transposition in S3");
            signs[fixed] = -1;
        }
        let bp = BasisPermutation { perm, signs };
        if bp.is_identity() {
            return Ok((self.clone(), bp));
        }
        let t = bp.matrix(self.prime, self.precision)?;
        let out = self.change_basis(&t)?;
        let b = out.diagonal_constants()?;
        debug_assert!((0..3).all(|i| b[i] == a[perm[i]]));
        Ok((out, bp))
    }

    fn s_from_valuations(&self, a: &[PAdicScalar; 3]) -> Result<SInvariants> {
        let mut v = a
            .iter()
            .map(|x| {
                x.valuation().finite().ok_or(Error::Unsolvable {
                    precision: self.precision,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        v.sort_unstable();
        SInvariants::new(v[0], v[1], v[2])
    }

    /// Elementary divisors of `[L, L]` inside `L`.
    pub fn s_invariants_by_smith(&self) -> Result<SInvariants> {
        let d = smith_invariants(&self.abelianization_matrix()).map_err(|e| match e {
            Error::RankDeficientAtPrecision { precision } => Error::Unsolvable { precision },
            e => e,
        })?;
        SInvariants::new(d[0], d[1], d[2])
    }

    pub fn s_invariants(&self) -> Result<SInvariants> {
        match self.diagonal_constants() {
            Ok(a) => self.s_from_valuations(&a),
            Err(_) => self.s_invariants_by_smith(),
        }
    }

    /// Structure constants in the basis `y_j = sum_i T[i][j] x_i`.
    pub fn change_basis(&self, t: &Matrix) -> Result<LieLattice> {
        if !is_gl3(t) {
            return Err(Error::NotInvertible {
                precision: t.min_precision(),
            });
        }
        let tinv = t.inverse()?;
        let cols = t.columns();
        let precision = self.precision.min(t.min_precision());
        let mut tensor = Vec::with_capacity(27);
        for a in 0..3 {
            for b in 0..3 {
                let w = tinv.mul_vec(&self.bracket(&cols[a], &cols[b]));
                for c in w {
                    tensor.push(c.truncate(precision.min(c.precision()))?);
                }
            }
        }
        let precision = tensor.iter().map(|c| c.precision()).min().unwrap_or(precision);
        LieLattice::from_tensor(self.prime, precision, tensor)
    }

    /// `[L, L] ⊆ p^ε L` with `ε = 1` for odd `p` and `ε = 2` for `p = 2`.
    pub fn is_powerful(&self) -> bool {
        let eps = if self.prime.get() == 2 { 2 } else { 1 };
        self.tensor.iter().all(|c| c.valuation().at_least(eps))
    }

    /// Unsolvable at precision: `[L, L]` has full rank.
    pub fn is_unsolvable(&self) -> bool {
        self.s_invariants_by_smith().is_ok()
    }
}

impl fmt::Display for LieLattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Z_{}-Lie lattice at precision {}", self.prime, self.precision)?;
        for (i, j) in [(1, 2), (2, 0), (0, 1)] {
            let terms: Vec<String> = (0..3)
                .filter(|&k| !self.tensor[idx(i, j, k)].is_zero())
                .map(|k| format!("{}·x{k}", self.tensor[idx(i, j, k)].balanced()))
                .collect();
            let rhs = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
            writeln!(f, "  [x{i}, x{j}] = {rhs}")?;
        }
        Ok(())
    }
}

/// `v(a)` as reported in certificates and tables.
pub fn valuation_label(a: &PAdicScalar) -> String {
    match a.valuation() {
        Valuation::Finite(v) => v.to_string(),
        Valuation::BottomAtPrecision => format!(">={}", a.precision()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u64) -> Prime {
        Prime::new(n).unwrap()
    }

    fn sc(pr: Prime, n: u32, v: i64) -> PAdicScalar {
        PAdicScalar::new(pr, n, v).unwrap()
    }

    #[test]
    fn family_brackets() {
        let pr = p(3);
        let l1 = LieLattice::example_family(1, pr, 30).unwrap();
        let x = |i| l1.basis_vector(i);
        let b = l1.bracket(&x(1), &x(2));
        assert_eq!(b, [sc(pr, 30, 9), sc(pr, 30, 0), sc(pr, 30, 0)]);
        assert_eq!(l1.bracket(&x(1), &x(1)), l1.zero_vector());
        let b = l1.bracket(&x(0), &x(1));
        assert_eq!(b[2], sc(pr, 30, -729));
    }

    #[test]
    fn family_constants() {
        let l0 = LieLattice::example_family(0, p(3), 20).unwrap();
        let a = l0.diagonal_constants().unwrap();
        let got: Vec<i64> = a.iter().map(|x| x.balanced().try_into().unwrap()).collect();
        assert_eq!(got, vec![9, 9, -9]);
        let l2 = LieLattice::example_family(2, p(5), 20).unwrap();
        let v: Vec<_> = l2
            .diagonal_constants()
            .unwrap()
            .iter()
            .map(|x| x.valuation().finite().unwrap())
            .collect();
        assert_eq!(v, vec![2, 6, 10]);
        assert!(LieLattice::example_family(1, p(3), 20).unwrap().is_powerful());
        assert!(matches!(
            LieLattice::example_family(3, p(3), 10),
            Err(Error::PrecisionTooSmall { .. })
        ));
    }

    #[test]
    fn jacobi() {
        let pr = p(3);
        assert!(LieLattice::example_family(1, pr, 20).unwrap().jacobi_check());
        // c[0][1][0] = 1 alone: [x0,x1] = x0 is the 2-dim nonabelian algebra
        let one = sc(pr, 20, 1);
        let l = LieLattice::from_entries(pr, 20, &[(0, 1, 0, one.clone())]).unwrap();
        assert!(l.jacobi_check());
        // perturbing L_1: [x0,x1] = x0 - p^6 x2 with the other brackets kept
        let l1 = LieLattice::example_family(1, pr, 20).unwrap();
        let mut t = l1.tensor().to_vec();
        t[idx(0, 1, 0)] = one.clone();
        t[idx(1, 0, 0)] = -&one;
        let bad = LieLattice::from_tensor(pr, 20, t).unwrap();
        assert!(!bad.jacobi_check());
    }

    #[test]
    fn diagonal_detection() {
        let pr = p(3);
        let l1 = LieLattice::example_family(1, pr, 20).unwrap();
        let mut t = l1.tensor().to_vec();
        t[idx(1, 2, 1)] = sc(pr, 20, 1);
        t[idx(2, 1, 1)] = sc(pr, 20, -1);
        let l = LieLattice::from_tensor(pr, 20, t).unwrap();
        assert_eq!(l.diagonal_constants(), Err(Error::NotDiagonal));
        let zero = LieLattice::from_entries(pr, 20, &[]).unwrap();
        assert!(zero.diagonal_constants().unwrap().iter().all(|a| a.is_zero()));
        assert!(matches!(zero.s_invariants(), Err(Error::Unsolvable { .. })));
    }

    #[test]
    fn well_diagonalize_orders_valuations() {
        let pr = p(3);
        let l1 = LieLattice::example_family(1, pr, 20).unwrap();
        let (w, perm) = l1.well_diagonalize().unwrap();
        assert!(perm.is_identity());
        assert_eq!(w, l1);

        // (p^4, p^2, 1): reversing the order is the transposition x0 <-> x2,
        // which negates x1
        let l = LieLattice::diagonal(pr, 20, [sc(pr, 20, 81), sc(pr, 20, 9), sc(pr, 20, 1)]).unwrap();
        let (w, perm) = l.well_diagonalize().unwrap();
        assert_eq!(perm.perm, [2, 1, 0]);
        assert_eq!(perm.signs, [1, -1, 1]);
        assert_eq!(
            w.diagonal_constants().unwrap(),
            [sc(pr, 20, 1), sc(pr, 20, 9), sc(pr, 20, 81)]
        );
        let t = perm.matrix(pr, 20).unwrap();
        assert_eq!(l.change_basis(&t).unwrap(), w);

        // (p^2, p^4, 1) is a cyclic shift: x'_i = x_{i+2}
        let l = LieLattice::diagonal(pr, 20, [sc(pr, 20, 9), sc(pr, 20, 81), sc(pr, 20, 1)]).unwrap();
        let (w, perm) = l.well_diagonalize().unwrap();
        assert_eq!(perm.perm, [2, 0, 1]);
        assert_eq!(perm.signs, [1, 1, 1]);
        assert_eq!(
            w.diagonal_constants().unwrap(),
            [sc(pr, 20, 1), sc(pr, 20, 9), sc(pr, 20, 81)]
        );
    }

    #[test]
    fn k_bound_examples() {
        assert_eq!(SInvariants::new(2, 4, 6).unwrap().k_bound(), 1);
        assert_eq!(SInvariants::new(2, 2, 2).unwrap().k_bound(), 0);
        assert_eq!(SInvariants::new(0, 3, 10).unwrap().k_bound(), 2);
        assert!(SInvariants::new(3, 2, 4).is_err());
    }

    #[test]
    fn s_invariants_both_paths() {
        for l in 0..4 {
            let lat = LieLattice::example_family(l, p(3), 40).unwrap();
            let s = lat.s_invariants().unwrap();
            assert_eq!(s.as_array(), [2, 2 * l + 2, 4 * l + 2]);
            assert_eq!(lat.s_invariants_by_smith().unwrap(), s);
        }
    }

    #[test]
    fn change_basis_examples() {
        let pr = p(3);
        let l1 = LieLattice::example_family(1, pr, 30).unwrap();
        let id = Matrix::identity(pr, 30, 3).unwrap();
        assert_eq!(l1.change_basis(&id).unwrap(), l1);

        let flip = Matrix::diagonal(&[sc(pr, 30, 1), sc(pr, 30, 1), sc(pr, 30, -1)]).unwrap();
        let c = l1.change_basis(&flip).unwrap().diagonal_constants().unwrap();
        assert_eq!(c, [sc(pr, 30, -9), sc(pr, 30, -81), sc(pr, 30, 729)]);

        let t1 = Matrix::from_i64(pr, 30, 3, 3, &[1, 2, 0, 0, 1, 5, 3, 0, 1]).unwrap();
        let t2 = Matrix::from_i64(pr, 30, 3, 3, &[2, 0, 1, 1, 1, 0, 0, 4, 2]).unwrap();
        let lhs = l1.change_basis(&t1).unwrap().change_basis(&t2).unwrap();
        let rhs = l1.change_basis(&t1.mul(&t2).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
        assert_eq!(lhs.s_invariants().unwrap().as_array(), [2, 4, 6]);
        assert!(lhs.jacobi_check());

        let singular = Matrix::diagonal(&[sc(pr, 30, 3), sc(pr, 30, 1), sc(pr, 30, 1)]).unwrap();
        assert!(matches!(
            l1.change_basis(&singular),
            Err(Error::NotInvertible { .. })
        ));
    }
}
