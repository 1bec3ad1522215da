//! `selfsim`: command-line front end.
//!
//! Exit codes: 0 ok, 1 other error, 2 parse error, 3 solvable lattice,
//! 4 hypothesis violated, 5 precision too small or exhausted.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use serde_json::{json, Value};

use selfsim_core::endo::{is_simple_at_precision, Verdict, VirtualEndomorphism, DEFAULT_GUARD};
use selfsim_core::harness::{
    harness_precision, lemma_ldiag_property_run, verify_example_family, verify_not_self_similar,
    Certificate, Conclusion,
};
use selfsim_core::specfile::LatticeSpec;
use selfsim_core::submodule::{enumerate_subalgebras, HermiteParams};
use selfsim_core::{Error, LieLattice, Matrix, PAdicScalar, Prime, Submodule};

#[derive(Parser)]
#[command(name = "selfsim", version, about = "Self-similarity invariants of rank-3 p-adic Lie lattices")]
struct Cli {
    /// Worker threads for subalgebra enumeration (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Working precision N (computations are mod p^N).
    #[arg(long)]
    precision: Option<u32>,
    /// Write machine-readable output to this path.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// s-invariants and the lower bound p^K on the self-similarity index.
    Invariants {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Certify that no virtual endomorphism of index p^k is simple.
    Verify {
        file: PathBuf,
        #[arg(long)]
        k: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Re-run a certificate from its JSON and check it reproduces exactly.
    Replay { certificate: PathBuf },
    /// Check a member L_l of the example family and its distinguished subalgebra.
    Family {
        #[arg(long)]
        l: u32,
        #[arg(long)]
        p: u64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// List the subalgebras of index p^k.
    Enumerate {
        file: PathBuf,
        #[arg(long)]
        k: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Largest phi-invariant ideal inside the domain of a virtual endomorphism.
    Core {
        file: PathBuf,
        /// `whole`, six integers `k0,k1,k2,e,f,g` (Hermite parameters), or nine
        /// integers giving a 3x3 matrix row by row whose columns span the domain.
        #[arg(long, default_value = "whole")]
        domain: String,
        /// `identity`, `zero`, or nine integers row by row; column j is the
        /// image of the j-th Hermite basis vector of the domain.
        #[arg(long, default_value = "identity")]
        map: String,
        /// Digits below the precision a core must keep to count as nonzero.
        #[arg(long, default_value_t = DEFAULT_GUARD)]
        guard: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Seeded property run for the triangular Hermite-form reduction.
    Ldiag {
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        p: u64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Parse(_) | Error::NotPrime(_) | Error::ZeroPrecision) => 2,
        Some(Error::NotAntisymmetric(..) | Error::JacobiFailure | Error::DimensionMismatch(_)) => 2,
        Some(Error::Unsolvable { .. }) => 3,
        Some(
            Error::HypothesisViolated { .. }
            | Error::NotDiagonal
            | Error::NotClosed
            | Error::NotAMorphism,
        ) => 4,
        Some(
            Error::PrecisionTooSmall { .. }
            | Error::PrecisionExhausted(_)
            | Error::RankDeficientAtPrecision { .. },
        ) => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn read_spec(path: &Path) -> anyhow::Result<LatticeSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(LatticeSpec::parse(&text)?)
}

fn write_json(path: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    if let Some(path) = path {
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}

fn basis_json(m: &Submodule) -> Value {
    Value::from(
        m.basis()
            .iter()
            .map(|c| Value::from(c.iter().map(|x| x.balanced().to_string()).collect::<Vec<_>>()))
            .collect::<Vec<_>>(),
    )
}

fn run(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Invariants { file, common } => {
            let spec = read_spec(&file)?;
            let n = common.precision.unwrap_or_else(|| spec.default_precision());
            let lat = spec.to_lattice(n)?;
            let s = lat.s_invariants()?;
            let k = s.k_bound();
            let p = spec.prime.get();
            println!("p = {p}");
            println!("precision = {n}");
            println!("s = {:?}", s.as_array());
            println!("K = {k}");
            println!("bound: σ(L) ≥ {p}^{k} = {}", spec.prime.pow(k));
            let out = json!({
                "schema": "selfsim.invariants/v1",
                "prime": p,
                "precision": n,
                "s": s.as_array(),
                "K": k,
                "bound": spec.prime.pow(k).to_string(),
            });
            write_json(common.json.as_ref(), &pretty(&out))?;
            Ok(0)
        }
        Command::Verify { file, k, common } => {
            let spec = read_spec(&file)?;
            let probe = spec.to_lattice(spec.default_precision())?;
            let s = probe.s_invariants()?;
            let n = common
                .precision
                .or(spec.precision)
                .unwrap_or_else(|| harness_precision(&s, k).max(spec.default_precision()));
            let lat = spec.to_lattice(n)?;
            let cert = verify_not_self_similar(&lat, k)?;
            print_certificate(&cert);
            write_json(common.json.as_ref(), &cert.to_json())?;
            Ok(conclusion_code(&cert))
        }
        Command::Replay { certificate } => {
            let text = std::fs::read_to_string(&certificate)
                .with_context(|| format!("reading {}", certificate.display()))?;
            let cert = Certificate::from_json(&text)?;
            let again = cert.replay()?;
            print_certificate(&again);
            if again != cert {
                println!("replay: MISMATCH with {}", certificate.display());
                return Ok(1);
            }
            println!("replay: identical");
            Ok(conclusion_code(&again))
        }
        Command::Family { l, p, json } => {
            let cert = verify_example_family(l, Prime::new(p)?)?;
            let consts: Vec<String> = cert.constants.iter().map(|c| {
                let x = c.to_scalar(Prime::new(p).expect("checked")).expect("valid record");
                x.balanced().to_string()
            }).collect();
            println!("L_{l} over Z_{p} at precision {}", cert.precision);
            println!("constants (a0, a1, a2) = ({})", consts.join(", "));
            println!("s = {:?}, K = {}", cert.s, cert.big_k);
            println!("index of <y0, y1, y2> = {p}^{}", cert.y_index_exponent);
            for c in &cert.checks {
                println!("  {:<20} {}", c.name, if c.passed { "ok" } else { "FAILED" });
            }
            write_json(json.as_ref(), &cert.to_json())?;
            Ok(if cert.all_checks_passed() { 0 } else { 4 })
        }
        Command::Enumerate { file, k, common } => {
            let spec = read_spec(&file)?;
            let n = common.precision.unwrap_or_else(|| spec.default_precision());
            let lat = spec.to_lattice(n)?;
            let subs = enumerate_subalgebras(&lat, k)?;
            println!("{} subalgebras of index {}^{k}", subs.len(), spec.prime.get());
            let mut rows = Vec::new();
            for m in &subs {
                let h = m.hermite_params();
                println!("  k={:?} e={} f={} g={}", h.k_vector, h.e, h.f, h.g);
                rows.push(json!({
                    "k_vector": h.k_vector,
                    "e": h.e.to_string(),
                    "f": h.f.to_string(),
                    "g": h.g.to_string(),
                    "basis": basis_json(m),
                }));
            }
            let out = json!({
                "schema": "selfsim.enumeration/v1",
                "prime": spec.prime.get(),
                "precision": n,
                "k": k,
                "count": subs.len(),
                "subalgebras": rows,
            });
            write_json(common.json.as_ref(), &pretty(&out))?;
            Ok(0)
        }
        Command::Core { file, domain, map, guard, common } => {
            let spec = read_spec(&file)?;
            let n = common.precision.unwrap_or_else(|| spec.default_precision());
            let lat = spec.to_lattice(n)?;
            let dom = parse_domain(&lat, &domain)?;
            let phi = match map.trim() {
                "identity" => VirtualEndomorphism::identity(&lat, dom)?,
                "zero" => VirtualEndomorphism::zero(&lat, dom)?,
                text => VirtualEndomorphism::new(&lat, dom, matrix_arg(&lat, text, "--map")?)?,
            };
            let verdict = is_simple_at_precision(&lat, &phi, guard)?;
            println!("domain: {}", phi.domain());
            let out = match &verdict {
                Verdict::NotSimple { core, precision, guard } => {
                    println!("not simple: invariant core {core}");
                    println!("core index = {}^{}", spec.prime.get(), core.index_exponent());
                    json!({
                        "schema": "selfsim.core/v1",
                        "verdict": "NotSimple",
                        "precision": precision,
                        "guard": guard,
                        "core_k_vector": core.k_vector(),
                        "core_index_exponent": core.index_exponent(),
                        "core_basis": basis_json(core),
                    })
                }
                Verdict::SimpleAtPrecision { precision, guard } => {
                    println!("no invariant ideal survives at precision {precision} (guard {guard})");
                    json!({
                        "schema": "selfsim.core/v1",
                        "verdict": "SimpleAtPrecision",
                        "precision": precision,
                        "guard": guard,
                    })
                }
            };
            write_json(common.json.as_ref(), &pretty(&out))?;
            Ok(0)
        }
        Command::Ldiag { trials, seed, p, json } => {
            let report = lemma_ldiag_property_run(trials, seed, Prime::new(p)?)?;
            println!(
                "p = {p}, seed = {seed}: {}/{} tuples pass ({} sampled)",
                report.passes, report.trials, report.attempts
            );
            if let Some(c) = &report.first_counterexample {
                println!("first counterexample: s={:?} m={:?} hermite={:?}", c.s, c.m, c.hermite_k);
            }
            write_json(json.as_ref(), &report.to_json())?;
            Ok(if report.failures == 0 { 0 } else { 4 })
        }
    }
}

fn conclusion_code(cert: &Certificate) -> u8 {
    match cert.conclusion {
        Conclusion::NotSelfSimilarOfIndex => 0,
        Conclusion::HypothesisViolated => 4,
    }
}

fn print_certificate(cert: &Certificate) {
    let p = cert.lattice.prime;
    println!(
        "p = {p}, s = {:?}, K = {}, k = {}, precision = {}",
        cert.s, cert.big_k, cert.k, cert.lattice.precision
    );
    println!("{} subalgebras of index {p}^{}", cert.subalgebra_count, cert.k);
    for r in &cert.records {
        let sc = &r.scalars;
        println!(
            "  k={:?} e={} f={} g={}  t={:?}  m=[{}, {}, {}]  {}",
            r.k_vector,
            r.e,
            r.f,
            r.g,
            r.t_vector,
            sc.m0,
            sc.m1,
            sc.m2,
            if r.passed() { "pass" } else { "FAIL" }
        );
    }
    for c in &cert.global_checks {
        println!("  {:<34} {}", c.name, if c.passed { "ok" } else { "FAILED" });
    }
    match cert.conclusion {
        Conclusion::NotSelfSimilarOfIndex => println!(
            "conclusion: no simple virtual endomorphism of index {p}^{}",
            cert.k
        ),
        Conclusion::HypothesisViolated => {
            let f = cert.failure.as_ref();
            println!(
                "conclusion: hypothesis violated: {} {}",
                f.map(|f| f.assertion.as_str()).unwrap_or("?"),
                f.and_then(|f| f.context.as_deref()).unwrap_or("")
            );
        }
    }
}

fn integers(text: &str, what: &str) -> anyhow::Result<Vec<BigInt>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<BigInt>()
                .map_err(|_| Error::Parse(format!("{what}: not an integer: {t:?}")).into())
        })
        .collect()
}

fn matrix_arg(lat: &LieLattice, text: &str, what: &str) -> anyhow::Result<Matrix> {
    let v = integers(text, what)?;
    if v.len() != 9 {
        return Err(Error::Parse(format!("{what}: expected 9 integers, got {}", v.len())).into());
    }
    let n = lat.precision();
    let entries = v
        .into_iter()
        .map(|x| PAdicScalar::new(lat.prime(), n, x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Matrix::new(lat.prime(), 3, 3, entries)?)
}

fn parse_domain(lat: &LieLattice, text: &str) -> anyhow::Result<Submodule> {
    let (prime, n) = (lat.prime(), lat.precision());
    if text.trim() == "whole" {
        return Ok(Submodule::ambient(prime, n)?);
    }
    let v = integers(text, "--domain")?;
    match v.len() {
        6 => {
            let exp = |x: &BigInt| -> anyhow::Result<u32> {
                u32::try_from(x).map_err(|_| Error::Parse(format!("--domain: bad exponent {x}")).into())
            };
            let params = HermiteParams {
                k_vector: [exp(&v[0])?, exp(&v[1])?, exp(&v[2])?],
                e: v[3].clone(),
                f: v[4].clone(),
                g: v[5].clone(),
            };
            Ok(Submodule::from_params(prime, n, params)?)
        }
        9 => Ok(Submodule::span(prime, n, &matrix_arg(lat, text, "--domain")?.columns())?),
        k => Err(Error::Parse(format!("--domain: expected whole, 6 or 9 integers, got {k}")).into()),
    }
}
