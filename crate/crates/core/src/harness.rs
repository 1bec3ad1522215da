//! Certificate-producing verification runs.
//!
//! [`verify_not_self_similar`] replays the invariant-ideal construction on
//! every subalgebra of index `p^k` and records each identity it relies on.
//! The resulting [`Certificate`] serializes to JSON with a stable field order;
//! re-running from its recorded inputs reproduces it byte for byte.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{LieLattice, SInvariants};
use crate::linalg::Vector3;
use crate::padic::{PAdicScalar, Prime, Valuation};
use crate::submodule::{
    enumerate_subalgebras, is_closed, monomial_ideal_criterion, replay_subalgebra, Check,
    ProofScalars, Submodule, SubalgebraReplay,
};

pub const CERTIFICATE_SCHEMA: &str = "selfsim.certificate/v1";
pub const FAMILY_SCHEMA: &str = "selfsim.family/v1";
pub const LDIAG_SCHEMA: &str = "selfsim.ldiag/v1";

/// Working precision of a verification run at index `p^k`.
pub fn harness_precision(s: &SInvariants, k: u32) -> u32 {
    2 * s.s2 + 6 * k + 16
}

/// A scalar as `unit * p^valuation`, known to `precision` digits.
/// A zero residue has `valuation = null` and `unit_residue = "0"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalarRecord {
    pub valuation: Option<u32>,
    pub unit_residue: String,
    pub precision: u32,
}

impl From<&PAdicScalar> for ScalarRecord {
    fn from(x: &PAdicScalar) -> Self {
        match x.valuation() {
            Valuation::Finite(v) => ScalarRecord {
                valuation: Some(v),
                unit_residue: x.unit_part().expect("finite valuation").residue().to_string(),
                precision: x.precision(),
            },
            Valuation::BottomAtPrecision => ScalarRecord {
                valuation: None,
                unit_residue: "0".into(),
                precision: x.precision(),
            },
        }
    }
}

impl ScalarRecord {
    pub fn to_scalar(&self, prime: Prime) -> Result<PAdicScalar> {
        let unit: BigInt = self
            .unit_residue
            .parse()
            .map_err(|_| Error::Parse(format!("bad residue {:?}", self.unit_residue)))?;
        match self.valuation {
            None => PAdicScalar::zero(prime, self.precision),
            Some(v) => {
                let u = PAdicScalar::new(prime, self.precision, unit)?;
                Ok(&u * &PAdicScalar::p_power(prime, self.precision, v)?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeRecord {
    pub prime: u64,
    pub precision: u32,
    /// `[a0, a1, a2]` of the input diagonal basis.
    pub constants: [ScalarRecord; 3],
    /// Basis reordering applied before the run; `x'_i = sign_i x_{perm_i}`.
    pub permutation: [usize; 3],
    pub signs: [i8; 3],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofScalarsRecord {
    pub h: ScalarRecord,
    pub a3: ScalarRecord,
    pub a4: ScalarRecord,
    pub r0: u32,
    pub r1: u32,
    pub m0: u32,
    pub m1: u32,
    pub m2: u32,
    pub t0: u32,
    pub t1: u32,
    pub t2: u32,
}

impl From<&ProofScalars> for ProofScalarsRecord {
    fn from(s: &ProofScalars) -> Self {
        ProofScalarsRecord {
            h: (&s.h).into(),
            a3: (&s.a3).into(),
            a4: (&s.a4).into(),
            r0: s.r0,
            r1: s.r1,
            m0: s.m0,
            m1: s.m1,
            m2: s.m2,
            t0: s.t0,
            t1: s.t1,
            t2: s.t2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubalgebraRecord {
    pub k_vector: [u32; 3],
    pub e: String,
    pub f: String,
    pub g: String,
    /// s-invariants of the subalgebra from its own structure constants.
    pub t_vector: Option<[u32; 3]>,
    pub scalars: ProofScalarsRecord,
    pub checks: Vec<Check>,
}

impl SubalgebraRecord {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationStep {
    pub name: String,
    pub statement: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conclusion {
    NotSelfSimilarOfIndex,
    HypothesisViolated,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub assertion: String,
    pub context: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub schema: String,
    pub lattice: LatticeRecord,
    pub s: [u32; 3],
    #[serde(rename = "K")]
    pub big_k: u32,
    pub k: u32,
    pub subalgebra_count: usize,
    pub records: Vec<SubalgebraRecord>,
    pub global_checks: Vec<Check>,
    pub derivation: Vec<DerivationStep>,
    pub conclusion: Conclusion,
    pub failure: Option<Failure>,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cert: Certificate =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if cert.schema != CERTIFICATE_SCHEMA {
            return Err(Error::Parse(format!("unknown schema {:?}", cert.schema)));
        }
        Ok(cert)
    }

    /// The input lattice recorded in the certificate.
    pub fn lattice(&self) -> Result<LieLattice> {
        let prime = Prime::new(self.lattice.prime)?;
        let [a0, a1, a2] = &self.lattice.constants;
        LieLattice::diagonal(
            prime,
            self.lattice.precision,
            [a0.to_scalar(prime)?, a1.to_scalar(prime)?, a2.to_scalar(prime)?],
        )
    }

    /// Re-runs the verification from the recorded inputs.
    pub fn replay(&self) -> Result<Certificate> {
        verify_not_self_similar(&self.lattice()?, self.k)
    }

    pub fn all_checks_passed(&self) -> bool {
        self.records.iter().all(SubalgebraRecord::passed)
            && self.global_checks.iter().all(|c| c.passed)
    }
}

fn derivation_steps() -> Vec<DerivationStep> {
    let step = |name: &str, statement: &str| DerivationStep {
        name: name.into(),
        statement: statement.into(),
    };
    vec![
        step(
            "injectivity_reduction",
            "Every nonzero ideal of a finite-index subalgebra M has finite index (the z-chain \
             [[y, p^k x1], p^k x0], [[y, p^k x2], p^k x0] and their bracket give nonzero multiples \
             of x1, x2, x0). A non-injective phi: M -> L therefore has kernel containing some \
             p^j L, a nonzero phi-invariant ideal, so only injective phi need be considered.",
        ),
        step(
            "image_is_isomorphic_subalgebra",
            "An injective phi maps M isomorphically onto M' = phi(M), which is again a \
             subalgebra of index p^k (a standard fact about injective virtual endomorphisms, \
             taken as given here). Isomorphic lattices have equal s-invariants, so t(M') = t(M).",
        ),
        step(
            "k_vector_forcing",
            "Global check k_vector_forcing: across all subalgebras of index p^k, equal \
             t-vectors occur only with equal k-vectors. Hence k(M') = k(M).",
        ),
        step(
            "ideal_is_invariant",
            "I(M) = p^r0 M + p^r1 [M, M] + [M, [M, M]] is built from Lie operations, so \
             phi(I(M)) = I(M'). Per record, I(M) = <p^m0 x0, p^m1 x1, p^m2 x2> with m depending \
             only on s and the k-vector (global check ideal_depends_only_on_k_vector), so \
             I(M') = I(M). Each record also checks that I(M) is a nonzero ideal of L inside M.",
        ),
        step(
            "conclusion",
            "Every virtual endomorphism of index p^k has the nonzero invariant ideal I(M), \
             so L admits no simple virtual endomorphism of index p^k.",
        ),
    ]
}

fn residue_string(x: &BigInt) -> String {
    x.to_string()
}

fn record_of(r: &SubalgebraReplay) -> SubalgebraRecord {
    SubalgebraRecord {
        k_vector: r.params.k_vector,
        e: residue_string(&r.params.e),
        f: residue_string(&r.params.f),
        g: residue_string(&r.params.g),
        t_vector: r.t_vector,
        scalars: (&r.scalars).into(),
        checks: r.checks.clone(),
    }
}

fn global_checks(replays: &[SubalgebraReplay]) -> Vec<Check> {
    let mut forcing = true;
    let mut by_t: BTreeMap<[u32; 3], [u32; 3]> = BTreeMap::new();
    for r in replays {
        match r.t_vector {
            Some(t) => {
                let kv = *by_t.entry(t).or_insert(r.params.k_vector);
                forcing &= kv == r.params.k_vector;
            }
            None => forcing = false,
        }
    }
    let mut uniform = true;
    let mut by_k: BTreeMap<[u32; 3], &Submodule> = BTreeMap::new();
    for r in replays {
        match &r.ideal {
            Some(i) => {
                let first = *by_k.entry(r.params.k_vector).or_insert(i);
                uniform &= first.same_module(i);
            }
            None => uniform = false,
        }
    }
    vec![
        Check {
            name: "k_vector_forcing".into(),
            passed: forcing,
        },
        Check {
            name: "ideal_depends_only_on_k_vector".into(),
            passed: uniform,
        },
        Check {
            name: "nonempty_enumeration".into(),
            passed: !replays.is_empty(),
        },
    ]
}

/// Certifies that a diagonal lattice has no simple virtual endomorphism of
/// index `p^k`, for `k` below the bound `K`.
///
/// Errors when the hypotheses cannot be met at all (not diagonal, solvable,
/// `k >= K`, too little precision). A failing identity on some subalgebra
/// yields a certificate with conclusion `HypothesisViolated` instead.
pub fn verify_not_self_similar(lattice: &LieLattice, k: u32) -> Result<Certificate> {
    let input = lattice.diagonal_constants()?;
    let (_, perm) = lattice.well_diagonalize()?;
    let s = lattice.s_invariants()?;
    let big_k = s.k_bound();
    if k >= big_k {
        return Err(Error::hypothesis(
            "k < K",
            Some(format!("k = {k}, K = {big_k}")),
        ));
    }
    let n = harness_precision(&s, k);
    if lattice.precision() < n {
        return Err(Error::PrecisionTooSmall {
            required: n,
            available: lattice.precision(),
        });
    }
    let lattice = lattice.truncate(n)?;
    let (wd, _) = lattice.well_diagonalize()?;

    let subalgebras = enumerate_subalgebras(&wd, k)?;
    let replays: Vec<SubalgebraReplay> = subalgebras
        .par_iter()
        .map(|m| replay_subalgebra(&wd, &s, m))
        .collect::<Result<_>>()?;
    let records: Vec<SubalgebraRecord> = replays.iter().map(record_of).collect();
    let global = global_checks(&replays);

    let failure = replays
        .iter()
        .zip(&subalgebras)
        .find_map(|(r, m)| {
            r.first_failure().map(|name| Failure {
                assertion: name.to_string(),
                context: Some(format!("subalgebra {m}")),
            })
        })
        .or_else(|| {
            global.iter().find(|c| !c.passed).map(|c| Failure {
                assertion: c.name.clone(),
                context: None,
            })
        });
    let conclusion = if failure.is_none() {
        Conclusion::NotSelfSimilarOfIndex
    } else {
        Conclusion::HypothesisViolated
    };

    Ok(Certificate {
        schema: CERTIFICATE_SCHEMA.into(),
        lattice: LatticeRecord {
            prime: lattice.prime().get(),
            precision: n,
            constants: [
                (&input[0].truncate(n)?).into(),
                (&input[1].truncate(n)?).into(),
                (&input[2].truncate(n)?).into(),
            ],
            permutation: perm.perm,
            signs: perm.signs,
        },
        s: s.as_array(),
        big_k,
        k,
        subalgebra_count: records.len(),
        records,
        global_checks: global,
        derivation: derivation_steps(),
        conclusion,
        failure,
    })
}

/// Checks on one member of the example family and its distinguished subalgebra.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyCertificate {
    pub schema: String,
    pub l: u32,
    pub prime: u64,
    pub precision: u32,
    pub constants: [ScalarRecord; 3],
    pub s: [u32; 3],
    #[serde(rename = "K")]
    pub big_k: u32,
    /// `log_p` of the index of `<y0, y1, y2>`.
    pub y_index_exponent: u32,
    pub checks: Vec<Check>,
}

impl FamilyCertificate {
    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

/// `y0 = 2 x0`, `y1 = p^l x1 - p^2l x2`, `y2 = p^l x1 + p^2l x2`.
pub fn family_y_basis(lattice: &LieLattice, l: u32) -> Result<[Vector3; 3]> {
    let prime = lattice.prime();
    let n = lattice.precision();
    let c = |v: i64| PAdicScalar::new(prime, n, v);
    let pl = PAdicScalar::p_power(prime, n, l)?;
    let p2l = PAdicScalar::p_power(prime, n, 2 * l)?;
    let z = c(0)?;
    Ok([
        [c(2)?, z.clone(), z.clone()],
        [z.clone(), pl.clone(), -&p2l],
        [z, pl, p2l],
    ])
}

fn vec_eq(u: &Vector3, v: &Vector3) -> bool {
    u.iter().zip(v).all(|(a, b)| a.eq_at_precision(b))
}

fn vec_scale(c: &PAdicScalar, v: &Vector3) -> Vector3 {
    [c * &v[0], c * &v[1], c * &v[2]]
}

pub fn verify_example_family(l: u32, prime: Prime) -> Result<FamilyCertificate> {
    if prime.get() == 2 {
        return Err(Error::hypothesis("odd prime", Some("p = 2".into())));
    }
    let n = 2 * (4 * l + 2) + 16;
    let lat = LieLattice::example_family(l, prime, n)?;
    let a = lat.diagonal_constants()?;
    let s = lat.s_invariants()?;
    let y = family_y_basis(&lat, l)?;
    let span = Submodule::span(prime, n, &y)?;
    let q = PAdicScalar::p_power(prime, n, 3 * l + 2)?;
    let two_q = &q * &PAdicScalar::new(prime, n, 2)?;

    let mut checks = Vec::new();
    let mut check = |name: &str, passed: bool| {
        checks.push(Check {
            name: name.into(),
            passed,
        })
    };
    check("powerful", lat.is_powerful());
    check("jacobi", lat.jacobi_check());
    check("s_invariants", s.as_array() == [2, 2 * l + 2, 4 * l + 2]);
    check("k_bound", s.k_bound() == l);
    check("y_span_full_rank", span.is_full_rank());
    check("y_span_closed", is_closed(&lat, &span));
    check("y_index", span.index_exponent() == 3 * l);
    check(
        "bracket_y1_y2",
        vec_eq(&lat.bracket(&y[1], &y[2]), &vec_scale(&q, &y[0])),
    );
    check(
        "bracket_y2_y0",
        vec_eq(&lat.bracket(&y[2], &y[0]), &vec_scale(&two_q, &y[2])),
    );
    check(
        "bracket_y0_y1",
        vec_eq(&lat.bracket(&y[0], &y[1]), &vec_scale(&two_q, &y[1])),
    );

    Ok(FamilyCertificate {
        schema: FAMILY_SCHEMA.into(),
        l,
        prime: prime.get(),
        precision: n,
        constants: [(&a[0]).into(), (&a[1]).into(), (&a[2]).into()],
        s: s.as_array(),
        big_k: s.k_bound(),
        y_index_exponent: span.index_exponent(),
        checks,
    })
}

/// One sampled parameter tuple of the triangular-matrix reduction property.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LdiagCase {
    pub s: [u32; 3],
    pub units: [String; 3],
    pub k1: u32,
    pub k2: u32,
    pub e: String,
    pub f: String,
    pub g: String,
    pub r0: u32,
    pub r1: u32,
    pub m: [u32; 3],
    pub precision: u32,
    /// Diagonal exponents of the Hermite form of `W`.
    pub hermite_k: [u32; 3],
    pub hermite_is_monomial: bool,
    pub criterion_holds: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LdiagReport {
    pub schema: String,
    pub prime: u64,
    pub seed: u64,
    pub trials: usize,
    pub attempts: usize,
    pub passes: usize,
    pub failures: usize,
    pub first_counterexample: Option<LdiagCase>,
    pub cases: Vec<LdiagCase>,
}

impl LdiagReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Inputs of one triangular-matrix reduction instance; `a_i = units_i * p^s_i`.
#[derive(Clone, Debug)]
pub struct LdiagParams {
    pub s: [u32; 3],
    pub units: [i64; 3],
    pub k1: u32,
    pub k2: u32,
    pub e: BigInt,
    pub f: BigInt,
    pub g: BigInt,
    pub r0: u32,
    pub r1: u32,
}

impl LdiagParams {
    pub fn m(&self) -> [u32; 3] {
        let [s0, s1, _] = self.s;
        [
            self.r1 + s0 + self.k1 + self.k2,
            s0 + s1 + self.k1 + 2 * self.k2,
            self.r0 + self.k2,
        ]
    }

    /// The two range conditions on `r0` and `r1`.
    pub fn ranges_hold(&self) -> bool {
        let [s0, s1, s2] = self.s;
        let (k1, k2) = (self.k1 as i64, self.k2 as i64);
        let (s0, s1, s2) = (s0 as i64, s1 as i64, s2 as i64);
        let (r0, r1) = (self.r0 as i64, self.r1 as i64);
        s0 + s1 + k1 + 2 * k2 <= r0
            && r0 <= s0 + s2 + k1
            && s0 + k1 + k2 <= r1
            && r1 <= s1 - k1 + k2
    }

    fn precision(&self) -> u32 {
        *self.m().iter().max().unwrap() + 2 * self.s[2] + 16
    }

    /// `(a3, a4, W)` at the instance precision.
    fn assemble(&self, prime: Prime) -> Result<(PAdicScalar, PAdicScalar, [Vector3; 3])> {
        let n = self.precision();
        let pp = |j: u32| PAdicScalar::p_power(prime, n, j);
        let sc = |x: &BigInt| PAdicScalar::new(prime, n, x.clone());
        let a: Vec<PAdicScalar> = (0..3)
            .map(|i| Ok(&PAdicScalar::new(prime, n, self.units[i])? * &pp(self.s[i])?))
            .collect::<Result<_>>()?;
        let (a0, a1, a2) = (&a[0], &a[1], &a[2]);
        let (e, f, g) = (sc(&self.e)?, sc(&self.f)?, sc(&self.g)?);
        let (k1, k2, r0, r1) = (self.k1, self.k2, self.r0, self.r1);
        let h = &(&e * &g) - &(&f * &pp(k1)?);
        let a3 = &(&(a0 * &pp(2 * k1 + 2 * k2)?) + &(&(a1 * &(&e * &e)) * &pp(2 * k2)?))
            + &(a2 * &(&h * &h));
        let a4 = &(&(&(a0 * a1) * &pp(2 * k2)?) + &(&(a0 * a2) * &(&g * &g)))
            + &(&(a1 * a2) * &(&f * &f));
        let w = [
            [
                a0 * &pp(r1 + k1 + k2)?,
                -&(&(a1 * &e) * &pp(r1 + k2)?),
                &(a2 * &h) * &pp(r1)?,
            ],
            [
                a0 * &(&(&(a1 * &e) * &pp(2 * k2)?) + &(&(a2 * &g) * &h)),
                a1 * &(&(a0 * &pp(k1 + 2 * k2)?) - &(&(a2 * &f) * &h)),
                -&(&(a2 * &(&(&(a0 * &g) * &pp(k1)?) + &(&(a1 * &e) * &f))) * &pp(k2)?),
            ],
            [&f * &pp(r0)?, &g * &pp(r0)?, pp(r0 + k2)?],
        ];
        Ok((a3, a4, w))
    }

    /// All four assumptions at the instance precision.
    pub fn assumptions_hold(&self, prime: Prime) -> Result<bool> {
        if !self.ranges_hold() {
            return Ok(false);
        }
        let [s0, s1, _] = self.s;
        let (a3, a4, _) = self.assemble(prime)?;
        Ok(a3.valuation() == Valuation::Finite(s0 + 2 * self.k1 + 2 * self.k2)
            && a4.valuation() == Valuation::Finite(s0 + s1 + 2 * self.k2))
    }

    /// Hermite form of the columns of `W` against `diag(p^m)`, plus the ideal criterion.
    pub fn check(&self, prime: Prime) -> Result<LdiagCase> {
        let n = self.precision();
        let (_, _, w) = self.assemble(prime)?;
        let m = self.m();
        let span = Submodule::span(prime, n, &w)?;
        let hermite_is_monomial = span.same_module(&Submodule::monomial(prime, n, m)?);
        let criterion_holds = monomial_ideal_criterion(self.s.map(Some), m);
        let unit = |u: i64| PAdicScalar::new(prime, n, u).map(|x| x.residue().to_string());
        Ok(LdiagCase {
            s: self.s,
            units: [unit(self.units[0])?, unit(self.units[1])?, unit(self.units[2])?],
            k1: self.k1,
            k2: self.k2,
            e: self.e.to_string(),
            f: self.f.to_string(),
            g: self.g.to_string(),
            r0: self.r0,
            r1: self.r1,
            m,
            precision: n,
            hermite_k: span.k_vector(),
            hermite_is_monomial,
            criterion_holds,
            passed: hermite_is_monomial && criterion_holds,
        })
    }
}

fn sample_params(rng: &mut ChaCha8Rng, p: u64) -> LdiagParams {
    let s0 = rng.gen_range(0..=3);
    let s1 = s0 + rng.gen_range(0..=10);
    let s2 = s1 + rng.gen_range(0..=12);
    let k1 = rng.gen_range(0..=3);
    let k2 = rng.gen_range(0..=3);
    let unit = |rng: &mut ChaCha8Rng| loop {
        let u: i64 = rng.gen_range(1..=10_000);
        if u % p as i64 != 0 {
            return if rng.gen_bool(0.5) { u } else { -u };
        }
    };
    let units = [unit(rng), unit(rng), unit(rng)];
    let param = |rng: &mut ChaCha8Rng| -> BigInt {
        let digits: u64 = rng.gen_range(0..1_000_000);
        BigInt::from(digits) * BigInt::from(p).pow(rng.gen_range(0..=2))
    };
    let (e, f, g) = (param(rng), param(rng), param(rng));
    let r0 = rng.gen_range(0..=s0 + s2 + k1 + 2);
    let r1 = rng.gen_range(0..=s1 + k2 + 2);
    LdiagParams {
        s: [s0, s1, s2],
        units,
        k1,
        k2,
        e,
        f,
        g,
        r0,
        r1,
    }
}

/// Rejection-samples `trials` tuples satisfying the four assumptions and
/// checks the reduction of `W` to `diag(p^m0, p^m1, p^m2)` on each.
pub fn lemma_ldiag_property_run(trials: usize, seed: u64, prime: Prime) -> Result<LdiagReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = Vec::with_capacity(trials);
    let mut attempts = 0usize;
    let cap = trials.saturating_mul(10_000);
    while accepted.len() < trials {
        if attempts >= cap {
            return Err(Error::PrecisionExhausted(format!(
                "only {} of {trials} tuples accepted after {attempts} draws",
                accepted.len()
            )));
        }
        attempts += 1;
        let params = sample_params(&mut rng, prime.get());
        if params.assumptions_hold(prime)? {
            accepted.push(params);
        }
    }
    let cases: Vec<LdiagCase> = accepted
        .par_iter()
        .map(|t| t.check(prime))
        .collect::<Result<_>>()?;
    let passes = cases.iter().filter(|c| c.passed).count();
    Ok(LdiagReport {
        schema: LDIAG_SCHEMA.into(),
        prime: prime.get(),
        seed,
        trials,
        attempts,
        passes,
        failures: cases.len() - passes,
        first_counterexample: cases.iter().find(|c| !c.passed).cloned(),
        cases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u64) -> Prime {
        Prime::new(n).unwrap()
    }

    #[test]
    fn scalar_record_round_trip() {
        let x = PAdicScalar::new(p(3), 10, -18).unwrap();
        let r = ScalarRecord::from(&x);
        assert_eq!(r.valuation, Some(2));
        assert_eq!(r.to_scalar(p(3)).unwrap(), x);
        let z = PAdicScalar::zero(p(3), 4).unwrap();
        assert_eq!(ScalarRecord::from(&z).to_scalar(p(3)).unwrap(), z);
    }

    #[test]
    fn l1_index_one() {
        let lat = LieLattice::example_family(1, p(3), 64).unwrap();
        let cert = verify_not_self_similar(&lat, 0).unwrap();
        assert_eq!(cert.records.len(), 1);
        assert_eq!(cert.conclusion, Conclusion::NotSelfSimilarOfIndex);
        assert!(matches!(
            verify_not_self_similar(&lat, 1),
            Err(Error::HypothesisViolated { .. })
        ));
    }

    #[test]
    fn l2_index_p() {
        let lat = LieLattice::example_family(2, p(3), 64).unwrap();
        let cert = verify_not_self_similar(&lat, 1).unwrap();
        assert_eq!(cert.records.len(), 13);
        assert!(cert.all_checks_passed());
        assert_eq!(cert.conclusion, Conclusion::NotSelfSimilarOfIndex);
        let again = Certificate::from_json(&cert.to_json()).unwrap().replay().unwrap();
        assert_eq!(again.to_json(), cert.to_json());
    }

    #[test]
    fn precision_rule_enforced() {
        let lat = LieLattice::example_family(2, p(3), 30).unwrap();
        assert!(matches!(
            verify_not_self_similar(&lat, 1),
            Err(Error::PrecisionTooSmall { required: 42, .. })
        ));
    }

    #[test]
    fn family_checks() {
        for (l, pr) in [(0, 3), (1, 3), (2, 3), (0, 5), (1, 5), (2, 5)] {
            let c = verify_example_family(l, p(pr)).unwrap();
            assert!(c.all_checks_passed(), "l={l} p={pr}: {:?}", c.checks);
            assert_eq!(c.big_k, l);
        }
        assert_eq!(verify_example_family(2, p(3)).unwrap().s, [2, 6, 10]);
        assert!(verify_example_family(1, p(2)).is_err());
    }

    #[test]
    fn ldiag_degenerate_tuple() {
        let t = LdiagParams {
            s: [1, 4, 9],
            units: [1, 1, 1],
            k1: 0,
            k2: 0,
            e: 0.into(),
            f: 0.into(),
            g: 0.into(),
            r0: 7,
            r1: 2,
        };
        assert!(t.assumptions_hold(p(3)).unwrap());
        let case = t.check(p(3)).unwrap();
        assert_eq!(case.m, [3, 5, 7]);
        assert!(case.passed);
    }

    #[test]
    fn ldiag_run_small() {
        let empty = lemma_ldiag_property_run(0, 1, p(3)).unwrap();
        assert!(empty.cases.is_empty());
        let r = lemma_ldiag_property_run(40, 11, p(3)).unwrap();
        assert_eq!(r.passes, 40, "{:?}", r.first_counterexample);
        assert_eq!(r, lemma_ldiag_property_run(40, 11, p(3)).unwrap());
    }
}
