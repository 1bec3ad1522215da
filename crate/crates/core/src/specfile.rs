//! TOML lattice description files.
//!
//! ```toml
//! prime = 3
//! precision = 64          # optional
//! basis_form = "diagonal"
//! a0 = 9                  # [x1, x2] = a0 x0
//! a1 = "81"               # decimal strings for large values
//! a2 = { unit = -1, valuation = 6 }
//! ```
//!
//! or, for a general tensor (antisymmetric completion is automatic):
//!
//! ```toml
//! prime = 5
//! basis_form = "tensor"
//! [[entry]]
//! i = 1
//! j = 2
//! k = 0
//! coef = 25
//! ```

use num_bigint::BigInt;
use num_traits::Zero;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::lie::LieLattice;
use crate::padic::{PAdicScalar, Prime};

/// Precision used when a file does not set one and no run-specific rule applies.
pub const STANDALONE_PRECISION: u32 = 64;

#[derive(Deserialize)]
#[serde(untagged)]
enum IntText {
    Int(i64),
    Text(String),
}

impl IntText {
    fn value(&self) -> Result<BigInt> {
        match self {
            IntText::Int(v) => Ok(BigInt::from(*v)),
            IntText::Text(t) => t
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("not an integer: {t:?}"))),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawScalar {
    Plain(IntText),
    Pair { unit: IntText, valuation: u32 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    i: usize,
    j: usize,
    k: usize,
    coef: RawScalar,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    prime: u64,
    precision: Option<u32>,
    basis_form: String,
    a0: Option<RawScalar>,
    a1: Option<RawScalar>,
    a2: Option<RawScalar>,
    #[serde(default)]
    entry: Vec<RawEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpecForm {
    Diagonal([BigInt; 3]),
    Tensor(Vec<(usize, usize, usize, BigInt)>),
}

/// A parsed lattice description with exact integer coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeSpec {
    pub prime: Prime,
    pub precision: Option<u32>,
    pub form: SpecForm,
}

impl LatticeSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let prime = Prime::new(raw.prime).map_err(|e| Error::Parse(e.to_string()))?;
        if raw.precision == Some(0) {
            return Err(Error::Parse("precision must be positive".into()));
        }
        let scalar = |r: &RawScalar| -> Result<BigInt> {
            match r {
                RawScalar::Plain(v) => v.value(),
                RawScalar::Pair { unit, valuation } => {
                    let u = unit.value()?;
                    if (&u % BigInt::from(prime.get())).is_zero() {
                        return Err(Error::Parse(format!("unit {u} is divisible by {}", prime.get())));
                    }
                    Ok(u * prime.pow(*valuation))
                }
            }
        };
        let form = match raw.basis_form.as_str() {
            "diagonal" => {
                if !raw.entry.is_empty() {
                    return Err(Error::Parse("diagonal form takes a0, a1, a2, not entries".into()));
                }
                let get = |name: &str, v: &Option<RawScalar>| -> Result<BigInt> {
                    v.as_ref()
                        .ok_or_else(|| Error::Parse(format!("missing {name}")))
                        .and_then(scalar)
                };
                SpecForm::Diagonal([get("a0", &raw.a0)?, get("a1", &raw.a1)?, get("a2", &raw.a2)?])
            }
            "tensor" => {
                if raw.a0.is_some() || raw.a1.is_some() || raw.a2.is_some() {
                    return Err(Error::Parse("tensor form takes entries, not a0, a1, a2".into()));
                }
                let entries = raw
                    .entry
                    .iter()
                    .map(|e| {
                        if e.i > 2 || e.j > 2 || e.k > 2 {
                            return Err(Error::Parse(format!(
                                "index out of range in entry ({}, {}, {})",
                                e.i, e.j, e.k
                            )));
                        }
                        Ok((e.i, e.j, e.k, scalar(&e.coef)?))
                    })
                    .collect::<Result<_>>()?;
                SpecForm::Tensor(entries)
            }
            other => return Err(Error::Parse(format!("unknown basis_form {other:?}"))),
        };
        Ok(LatticeSpec {
            prime,
            precision: raw.precision,
            form,
        })
    }

    /// Largest valuation among the nonzero coefficients.
    pub fn max_valuation(&self) -> u32 {
        let coefs: Vec<&BigInt> = match &self.form {
            SpecForm::Diagonal(a) => a.iter().collect(),
            SpecForm::Tensor(e) => e.iter().map(|t| &t.3).collect(),
        };
        coefs
            .into_iter()
            .filter_map(|c| self.prime.valuation_of(c))
            .max()
            .unwrap_or(0)
    }

    /// The file's precision, or enough to represent every coefficient with margin.
    pub fn default_precision(&self) -> u32 {
        self.precision
            .unwrap_or_else(|| STANDALONE_PRECISION.max(2 * self.max_valuation() + 16))
    }

    pub fn to_lattice(&self, precision: u32) -> Result<LieLattice> {
        let sc = |x: &BigInt| PAdicScalar::new(self.prime, precision, x.clone());
        let lattice = match &self.form {
            SpecForm::Diagonal(a) => {
                LieLattice::diagonal(self.prime, precision, [sc(&a[0])?, sc(&a[1])?, sc(&a[2])?])?
            }
            SpecForm::Tensor(entries) => {
                let e = entries
                    .iter()
                    .map(|(i, j, k, c)| Ok((*i, *j, *k, sc(c)?)))
                    .collect::<Result<Vec<_>>>()?;
                LieLattice::from_entries(self.prime, precision, &e)?
            }
        };
        if !lattice.jacobi_check() {
            return Err(Error::JacobiFailure);
        }
        Ok(lattice)
    }

    /// Diagonal description of `L_l`.
    pub fn family(l: u32, prime: Prime) -> Self {
        LatticeSpec {
            prime,
            precision: None,
            form: SpecForm::Diagonal([
                prime.pow(2),
                prime.pow(2 * l + 2),
                -prime.pow(4 * l + 2),
            ]),
        }
    }

    pub fn to_toml(&self) -> String {
        let mut out = format!("prime = {}\n", self.prime.get());
        if let Some(n) = self.precision {
            out.push_str(&format!("precision = {n}\n"));
        }
        match &self.form {
            SpecForm::Diagonal(a) => {
                out.push_str("basis_form = \"diagonal\"\n");
                for (i, c) in a.iter().enumerate() {
                    out.push_str(&format!("a{i} = \"{c}\"\n"));
                }
            }
            SpecForm::Tensor(entries) => {
                out.push_str("basis_form = \"tensor\"\n");
                for (i, j, k, c) in entries {
                    out.push_str(&format!(
                        "\n[[entry]]\ni = {i}\nj = {j}\nk = {k}\ncoef = \"{c}\"\n"
                    ));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_forms() {
        let spec = LatticeSpec::parse(
            "prime = 3\nbasis_form = \"diagonal\"\na0 = 9\na1 = \"81\"\na2 = { unit = -1, valuation = 6 }\n",
        )
        .unwrap();
        let lat = spec.to_lattice(spec.default_precision()).unwrap();
        assert_eq!(lat.precision(), 64);
        assert_eq!(lat.s_invariants().unwrap().as_array(), [2, 4, 6]);
        assert_eq!(
            lat.diagonal_constants().unwrap(),
            LieLattice::example_family(1, Prime::new(3).unwrap(), 64)
                .unwrap()
                .diagonal_constants()
                .unwrap()
        );
    }

    #[test]
    fn tensor_form_and_round_trip() {
        let text = "prime = 5\nprecision = 20\nbasis_form = \"tensor\"\n\
                    [[entry]]\ni = 1\nj = 2\nk = 0\ncoef = 25\n\
                    [[entry]]\ni = 2\nj = 0\nk = 1\ncoef = 625\n\
                    [[entry]]\ni = 0\nj = 1\nk = 2\ncoef = { unit = 2, valuation = 5 }\n";
        let spec = LatticeSpec::parse(text).unwrap();
        assert_eq!(spec.max_valuation(), 5);
        let lat = spec.to_lattice(20).unwrap();
        assert_eq!(lat.s_invariants().unwrap().as_array(), [2, 4, 5]);
        assert_eq!(LatticeSpec::parse(&spec.to_toml()).unwrap(), spec);
        let fam = LatticeSpec::family(2, Prime::new(3).unwrap());
        assert_eq!(LatticeSpec::parse(&fam.to_toml()).unwrap(), fam);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "prime = 4\nbasis_form = \"diagonal\"\na0 = 1\na1 = 1\na2 = 1\n",
            "prime = 3\nbasis_form = \"diagonal\"\na0 = 1\na1 = 1\n",
            "prime = 3\nbasis_form = \"weird\"\n",
            "prime = 3\nbasis_form = \"diagonal\"\na0 = 1\na1 = 1\na2 = { unit = 3, valuation = 1 }\n",
            "prime = 3\nbasis_form = \"tensor\"\n[[entry]]\ni = 3\nj = 0\nk = 0\ncoef = 1\n",
            "prime = 3\nbasis_form = \"diagonal\"\na0 = 1\na1 = 1\na2 = \"x\"\n",
        ] {
            assert!(matches!(LatticeSpec::parse(text), Err(Error::Parse(_))), "{text}");
        }
        // [x0, x1] = x0 and [x1, x2] = x1 together break Jacobi.
        let bad = LatticeSpec::parse(
            "prime = 3\nbasis_form = \"tensor\"\n\
             [[entry]]\ni = 0\nj = 1\nk = 0\ncoef = 1\n\
             [[entry]]\ni = 1\nj = 2\nk = 1\ncoef = 1\n",
        )
        .unwrap();
        assert_eq!(bad.to_lattice(10).unwrap_err(), Error::JacobiFailure);
    }
}
