//! Virtual endomorphisms `phi: M -> L` and their invariant-ideal cores.

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lie::LieLattice;
use crate::linalg::{smith_invariants, solve_in_span, Matrix, Vector3};
use crate::padic::PAdicScalar;
use crate::submodule::{enumerate_subalgebras, is_closed, largest_ideal_in, Submodule};

/// Guard digits below the working precision that a core must keep to count as nonzero.
pub const DEFAULT_GUARD: u32 = 4;

#[derive(Clone, Debug)]
pub struct VirtualEndomorphism {
    domain: Submodule,
    map: Matrix,
}

impl VirtualEndomorphism {
    /// `map` column `j` is the image of the `j`-th Hermite basis vector of `domain`.
    pub fn new(lattice: &LieLattice, domain: Submodule, map: Matrix) -> Result<Self> {
        if (map.rows(), map.cols()) != (3, 3) {
            return Err(Error::DimensionMismatch("map must be 3x3".into()));
        }
        if !domain.is_full_rank() || !is_closed(lattice, &domain) {
            return Err(Error::NotClosed);
        }
        if !is_morphism(lattice, &domain, &map) {
            return Err(Error::NotAMorphism);
        }
        Ok(VirtualEndomorphism { domain, map })
    }

    pub fn identity(lattice: &LieLattice, domain: Submodule) -> Result<Self> {
        let map = domain.hermite();
        Self::new(lattice, domain, map)
    }

    pub fn zero(lattice: &LieLattice, domain: Submodule) -> Result<Self> {
        let map = Matrix::zeros(lattice.prime(), domain.precision(), 3, 3)?;
        Self::new(lattice, domain, map)
    }

    pub fn domain(&self) -> &Submodule {
        &self.domain
    }

    pub fn map(&self) -> &Matrix {
        &self.map
    }

    pub fn precision(&self) -> u32 {
        self.domain.precision().min(self.map.min_precision())
    }

    /// `phi(x)` for `x` in the domain, `None` if `x` is outside it.
    pub fn apply(&self, x: &Vector3) -> Option<Vector3> {
        let c = solve_in_span(&self.domain.hermite(), x)?;
        Some(self.map.mul_vec(&c))
    }

    /// Rank below 3 at precision (some elementary divisor vanishes mod `p^N`).
    pub fn is_rank_deficient(&self) -> bool {
        matches!(
            smith_invariants(&self.map),
            Err(Error::RankDeficientAtPrecision { .. })
        )
    }
}

/// `phi[y_i, y_j] = [phi y_i, phi y_j]` on all basis pairs of the domain.
pub fn is_morphism(lattice: &LieLattice, domain: &Submodule, map: &Matrix) -> bool {
    let h = domain.hermite();
    let y = domain.basis();
    let images = map.columns();
    [(0, 1), (1, 2), (2, 0)].iter().all(|&(i, j)| {
        let Some(c) = solve_in_span(&h, &lattice.bracket(&y[i], &y[j])) else {
            return false;
        };
        let lhs = map.mul_vec(&c);
        let rhs = lattice.bracket(&images[i], &images[j]);
        lhs.iter().zip(&rhs).all(|(a, b)| a.eq_at_precision(b))
    })
}

#[derive(Clone, Debug)]
pub enum CoreOutcome {
    Core(Submodule),
    TrivialAtPrecision { precision: u32, guard: u32 },
}

/// Simplicity can only be refuted exactly; a "simple" answer is bounded by precision.
#[derive(Clone, Debug)]
pub enum Verdict {
    SimpleAtPrecision { precision: u32, guard: u32 },
    NotSimple { core: Submodule, precision: u32, guard: u32 },
}

impl Verdict {
    pub fn is_simple_at_precision(&self) -> bool {
        matches!(self, Verdict::SimpleAtPrecision { .. })
    }

    pub fn core(&self) -> Option<&Submodule> {
        match self {
            Verdict::NotSimple { core, .. } => Some(core),
            Verdict::SimpleAtPrecision { .. } => None,
        }
    }
}

fn too_small(j: &Submodule, n: u32, guard: u32) -> bool {
    j.is_zero()
        || j.residual_digits() < guard
        || j.index_exponent() > 3 * n.saturating_sub(guard)
}

/// Largest ideal `J` of `L` with `J ⊆ M` and `phi(J) ⊆ J`, by descending iteration.
pub fn phi_core(lattice: &LieLattice, phi: &VirtualEndomorphism, guard: u32) -> Result<CoreOutcome> {
    let n = phi.precision().min(lattice.precision());
    let trivial = CoreOutcome::TrivialAtPrecision { precision: n, guard };
    let h = phi.domain.truncate(n)?.hermite();
    let map = phi.map.truncate(n)?;
    let mut j = phi.domain.truncate(n)?;
    for _ in 0..3 * n {
        let pulled = j.preimage(&map)?.image(&h)?;
        let next = largest_ideal_in(lattice, &j.intersect(&pulled)?)?;
        if too_small(&next, n, guard) {
            return Ok(trivial);
        }
        if next.same_module(&j) {
            return Ok(CoreOutcome::Core(j));
        }
        j = next;
    }
    Err(Error::PrecisionExhausted(
        "invariant core iteration did not stabilise".into(),
    ))
}

pub fn is_simple_at_precision(
    lattice: &LieLattice,
    phi: &VirtualEndomorphism,
    guard: u32,
) -> Result<Verdict> {
    Ok(match phi_core(lattice, phi, guard)? {
        CoreOutcome::Core(core) => Verdict::NotSimple {
            precision: core.precision(),
            core,
            guard,
        },
        CoreOutcome::TrivialAtPrecision { precision, guard } => {
            Verdict::SimpleAtPrecision { precision, guard }
        }
    })
}

/// `J ⊆ domain`, `J` an ideal of `L`, and `phi(J) ⊆ J`.
pub fn is_phi_invariant_ideal(
    lattice: &LieLattice,
    phi: &VirtualEndomorphism,
    j: &Submodule,
) -> bool {
    phi.domain.contains_module(j)
        && crate::submodule::is_ideal(lattice, j)
        && j.generators().iter().all(|g| {
            phi.apply(g)
                .map(|img| j.contains(&img))
                .unwrap_or(false)
        })
}

/// Functionals on the domain (in Hermite coordinates) vanishing on `[M, M]`
/// at precision. Over exact `Z_p` this is zero; mod `p^N` it is not.
pub fn derived_annihilator(lattice: &LieLattice, domain: &Submodule) -> Result<Submodule> {
    let (derived, _) = crate::submodule::derived_and_gamma2(lattice, domain)?;
    let h = domain.hermite();
    let n = domain.precision();
    let zero = PAdicScalar::zero(lattice.prime(), n)?;
    let mut rows = vec![zero; 9];
    for (r, g) in derived.generators().iter().enumerate() {
        let c = solve_in_span(&h, g).ok_or(Error::NotClosed)?;
        for (j, x) in c.into_iter().enumerate() {
            rows[r * 3 + j] = x;
        }
    }
    let a = Matrix::new(lattice.prime(), 3, 3, rows)?;
    Submodule::zero(lattice.prime(), n)?.preimage(&a)
}

/// The map `y -> lambda(y) v`, a morphism whenever `lambda` vanishes on `[M, M]`.
pub fn rank_one_map(lambda: &Vector3, v: &Vector3) -> Result<Matrix> {
    let cols: Vec<Vector3> = lambda
        .iter()
        .map(|l| [l * &v[0], l * &v[1], l * &v[2]])
        .collect();
    Matrix::from_columns(&cols)
}

#[derive(Clone, Debug)]
pub struct SearchHit {
    pub morphism: VirtualEndomorphism,
    pub verdict: Verdict,
}

/// Samples maps with entries uniform mod `p^N` on enumerated subalgebras of
/// index `p^k` and keeps the morphisms, with their verdicts. Output is sorted
/// by domain parameters, then map residues.
pub fn random_morphism_search(
    lattice: &LieLattice,
    k: u32,
    trials: usize,
    seed: u64,
) -> Result<Vec<SearchHit>> {
    if trials == 0 {
        return Ok(Vec::new());
    }
    let domains = enumerate_subalgebras(lattice, k)?;
    let prime = lattice.prime();
    let n = lattice.precision();
    let modulus = prime.pow(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bytes = (modulus.bits() as usize).div_ceil(8) + 8;
    let candidates: Vec<(usize, Vec<BigInt>)> = (0..trials)
        .map(|_| {
            let d = rng.gen_range(0..domains.len());
            let entries = (0..9)
                .map(|_| {
                    let raw: Vec<u8> = (0..bytes).map(|_| rng.gen()).collect();
                    BigInt::from_bytes_le(num_bigint::Sign::Plus, &raw) % &modulus
                })
                .collect();
            (d, entries)
        })
        .collect();
    let mut hits: Vec<(usize, Vec<BigInt>, SearchHit)> = candidates
        .into_par_iter()
        .filter_map(|(d, entries)| {
            let scalars: Vec<PAdicScalar> = entries
                .iter()
                .map(|x| PAdicScalar::new(prime, n, x.clone()).expect("valid residue"))
                .collect();
            let map = Matrix::new(prime, 3, 3, scalars).ok()?;
            let phi = VirtualEndomorphism::new(lattice, domains[d].clone(), map).ok()?;
            let verdict = is_simple_at_precision(lattice, &phi, DEFAULT_GUARD).ok()?;
            Some((d, entries, SearchHit { morphism: phi, verdict }))
        })
        .collect();
    hits.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    hits.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    Ok(hits.into_iter().map(|(_, _, h)| h).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::Prime;
    use crate::submodule::canonical_ideal;

    fn l(l: u32, n: u32) -> LieLattice {
        LieLattice::example_family(l, Prime::new(3).unwrap(), n).unwrap()
    }

    #[test]
    fn morphism_examples() {
        let lat = l(1, 30);
        let whole = Submodule::ambient(lat.prime(), 30).unwrap();
        let id = whole.hermite();
        assert!(is_morphism(&lat, &whole, &id));
        let zero = Matrix::zeros(lat.prime(), 30, 3, 3).unwrap();
        assert!(is_morphism(&lat, &whole, &zero));
        let three = PAdicScalar::new(lat.prime(), 30, 3).unwrap();
        assert!(!is_morphism(&lat, &whole, &id.scale(&three)));
    }

    #[test]
    fn identity_and_zero_cores() {
        let lat = l(1, 30);
        let whole = Submodule::ambient(lat.prime(), 30).unwrap();
        let id = VirtualEndomorphism::identity(&lat, whole.clone()).unwrap();
        let v = is_simple_at_precision(&lat, &id, DEFAULT_GUARD).unwrap();
        assert!(v.core().unwrap().same_module(&whole));

        let z = VirtualEndomorphism::zero(&lat, whole.clone()).unwrap();
        let v = is_simple_at_precision(&lat, &z, DEFAULT_GUARD).unwrap();
        assert!(v.core().unwrap().same_module(&whole));
    }

    #[test]
    fn zero_map_core_is_largest_ideal_in_domain() {
        let lat = l(2, 40);
        for m in enumerate_subalgebras(&lat, 1).unwrap() {
            let z = VirtualEndomorphism::zero(&lat, m.clone()).unwrap();
            let CoreOutcome::Core(core) = phi_core(&lat, &z, DEFAULT_GUARD).unwrap() else {
                panic!("zero map must have a core");
            };
            assert!(core.same_module(&largest_ideal_in(&lat, &m).unwrap()));
            assert!(is_phi_invariant_ideal(&lat, &z, &core));
            let (i, _) = canonical_ideal(&lat, &m).unwrap();
            assert!(core.contains_module(&i));
        }
    }

    #[test]
    fn rank_one_maps_are_not_simple() {
        let lat = l(2, 40);
        let m = enumerate_subalgebras(&lat, 1).unwrap().remove(5);
        let ann = derived_annihilator(&lat, &m).unwrap();
        assert!(!ann.is_zero());
        let v = lat.basis_vector(1);
        for lambda in ann.generators() {
            let map = rank_one_map(&lambda, &v).unwrap();
            let phi = VirtualEndomorphism::new(&lat, m.clone(), map).unwrap();
            assert!(phi.is_rank_deficient());
            let verdict = is_simple_at_precision(&lat, &phi, DEFAULT_GUARD).unwrap();
            assert!(verdict.core().unwrap().is_full_rank());
        }
    }

    #[test]
    fn search_is_deterministic() {
        let lat = l(2, 40);
        assert!(random_morphism_search(&lat, 1, 0, 7).unwrap().is_empty());
        let a = random_morphism_search(&lat, 1, 20, 7).unwrap();
        let b = random_morphism_search(&lat, 1, 20, 7).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.morphism.map(), y.morphism.map());
        }
        assert!(a.iter().all(|h| !h.verdict.is_simple_at_precision()));
    }
}
