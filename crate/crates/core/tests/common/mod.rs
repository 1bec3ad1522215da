//! Brute-force oracles over small finite rings `Z/p^n`, written without any
//! of the library's normal-form code. Subgroups of `(Z/p^n)^3` are handled as
//! explicit element sets.
#![allow(dead_code)]

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use selfsim_core::{PAdicScalar, Prime, Submodule, Vector3};

pub fn modulus(p: i64, n: u32) -> i64 {
    p.pow(n)
}

pub fn vp(p: i64, x: i64, cap: u32) -> u32 {
    if x == 0 {
        return cap;
    }
    let mut x = x.abs();
    let mut v = 0;
    while x % p == 0 && v < cap {
        x /= p;
        v += 1;
    }
    v
}

fn encode(q: i64, v: [i64; 3]) -> usize {
    ((v[0] * q + v[1]) * q + v[2]) as usize
}

fn decode(q: i64, mut c: usize) -> [i64; 3] {
    let q = q as usize;
    let z = c % q;
    c /= q;
    let y = c % q;
    [(c / q) as i64, y as i64, z as i64]
}

/// All elements of the subgroup of `(Z/p^n)^3` generated by `gens`.
pub fn span_set(p: i64, n: u32, gens: &[[i64; 3]]) -> Vec<[i64; 3]> {
    let q = modulus(p, n);
    let mut seen = vec![false; (q * q * q) as usize];
    seen[0] = true;
    let mut members = vec![[0i64; 3]];
    for g in gens {
        let g = g.map(|x| x.rem_euclid(q));
        let base = members.clone();
        for s in &base {
            let mut cur = *s;
            for _ in 0..q {
                cur = [
                    (cur[0] + g[0]) % q,
                    (cur[1] + g[1]) % q,
                    (cur[2] + g[2]) % q,
                ];
                let c = encode(q, cur);
                if !seen[c] {
                    seen[c] = true;
                    members.push(cur);
                }
            }
        }
    }
    let mut out: Vec<[i64; 3]> = (0..seen.len())
        .filter(|&c| seen[c])
        .map(|c| decode(q, c))
        .collect();
    out.sort();
    out
}

/// Canonical upper-triangular generators read off an explicit subgroup:
/// `k2` is the least valuation of a last coordinate, `k1` the least valuation
/// of a middle coordinate among elements with last coordinate 0, and so on;
/// each column is the unique element with its pivot equal to `p^k` and the
/// entries above reduced below the pivots of their rows. Returns the exponents
/// and the columns (a column with exponent `n` is zero).
pub fn hermite_from_set(p: i64, n: u32, set: &[[i64; 3]]) -> ([u32; 3], [[i64; 3]; 3]) {
    let q = modulus(p, n);
    let min_v = |pos: usize| -> u32 {
        set.iter()
            .filter(|v| (pos + 1..3).all(|j| v[j] == 0))
            .map(|v| vp(p, v[pos], n))
            .min()
            .unwrap_or(n)
    };
    let k = [min_v(0), min_v(1), min_v(2)];
    let mut cols = [[0i64; 3]; 3];
    for j in 0..3 {
        if k[j] >= n {
            continue;
        }
        let pivot = p.pow(k[j]) % q;
        let found: Vec<&[i64; 3]> = set
            .iter()
            .filter(|v| {
                v[j] == pivot
                    && (j + 1..3).all(|r| v[r] == 0)
                    && (0..j).all(|r| v[r] < p.pow(k[r]).min(q))
            })
            .collect();
        assert_eq!(found.len(), 1, "canonical column {j} must be unique");
        cols[j] = *found[0];
    }
    (k, cols)
}

/// Elementary-divisor valuations from determinantal divisors of an integer
/// matrix, capped at `n`.
pub fn smith_oracle(p: i64, n: u32, a: [[i64; 3]; 3]) -> [u32; 3] {
    let a: Vec<Vec<BigInt>> = a
        .iter()
        .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
        .collect();
    let big_v = |x: &BigInt| -> Option<u32> {
        if x == &BigInt::from(0) {
            return None;
        }
        let mut x = x.clone();
        let mut v = 0;
        while (&x % p) == BigInt::from(0) {
            x /= p;
            v += 1;
        }
        Some(v)
    };
    let min_opt = |vals: Vec<Option<u32>>| vals.into_iter().flatten().min();
    let d1 = min_opt(a.iter().flatten().map(big_v).collect());
    let mut minors = Vec::new();
    for r in [(0, 1), (0, 2), (1, 2)] {
        for c in [(0, 1), (0, 2), (1, 2)] {
            let m = &a[r.0][c.0] * &a[r.1][c.1] - &a[r.0][c.1] * &a[r.1][c.0];
            minors.push(big_v(&m));
        }
    }
    let d2 = min_opt(minors);
    let det = &a[0][0] * (&a[1][1] * &a[2][2] - &a[1][2] * &a[2][1])
        - &a[0][1] * (&a[1][0] * &a[2][2] - &a[1][2] * &a[2][0])
        + &a[0][2] * (&a[1][0] * &a[2][1] - &a[1][1] * &a[2][0]);
    let d3 = big_v(&det);
    let inf = u32::MAX / 4;
    let (d1, d2, d3) = (d1.unwrap_or(inf), d2.unwrap_or(inf), d3.unwrap_or(inf));
    let e = [d1, d2.saturating_sub(d1), d3.saturating_sub(d2)];
    let e = if d2 >= inf { [d1, inf, inf] } else if d3 >= inf { [e[0], e[1], inf] } else { e };
    e.map(|x| x.min(n))
}

/// `{x mod p^n : A x in span(h)}` by exhaustive search.
pub fn preimage_oracle(p: i64, n: u32, a: [[i64; 3]; 3], h: &[[i64; 3]]) -> Vec<[i64; 3]> {
    let q = modulus(p, n);
    let target: BTreeSet<[i64; 3]> = span_set(p, n, h).into_iter().collect();
    let mut out = Vec::new();
    for c in 0..(q * q * q) as usize {
        let x = decode(q, c);
        let ax = [0, 1, 2].map(|r| (0..3).map(|j| a[r][j] * x[j]).sum::<i64>().rem_euclid(q));
        if target.contains(&ax) {
            out.push(x);
        }
    }
    out
}

/// Bracket of a diagonal lattice `[x1,x2] = a0 x0, [x2,x0] = a1 x1, [x0,x1] = a2 x2`, mod `q`.
pub fn diag_bracket(a: [i64; 3], q: i64, u: [i64; 3], v: [i64; 3]) -> [i64; 3] {
    [
        (a[0] * (u[1] * v[2] - u[2] * v[1])).rem_euclid(q),
        (a[1] * (u[2] * v[0] - u[0] * v[2])).rem_euclid(q),
        (a[2] * (u[0] * v[1] - u[1] * v[0])).rem_euclid(q),
    ]
}

/// Subalgebras of index `p^k` (`k` in 1..=2) of a diagonal lattice, as
/// element sets mod `p^k`. Index-`p^k` subgroups are found as annihilators of
/// order-`p^k` subgroups under the dot product, then filtered by closure.
pub fn brute_force_subalgebras(a: [i64; 3], p: i64, k: u32) -> BTreeSet<Vec<[i64; 3]>> {
    assert!((1..=2).contains(&k));
    let q = modulus(p, k);
    let all: Vec<[i64; 3]> = (0..(q * q * q) as usize).map(|c| decode(q, c)).collect();
    let target = p.pow(k) as usize;
    let mut duals: BTreeSet<Vec<[i64; 3]>> = BTreeSet::new();
    for h in &all {
        let s = span_set(p, k, &[*h]);
        if s.len() == target {
            duals.insert(s);
        }
    }
    if k == 2 {
        let order_p: Vec<[i64; 3]> = all
            .iter()
            .filter(|v| **v != [0, 0, 0] && v.iter().all(|x| x % p == 0))
            .copied()
            .collect();
        for (i, h1) in order_p.iter().enumerate() {
            for h2 in &order_p[i + 1..] {
                let s = span_set(p, k, &[*h1, *h2]);
                if s.len() == target {
                    duals.insert(s);
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    for hset in duals {
        let m: Vec<[i64; 3]> = all
            .iter()
            .filter(|x| {
                hset.iter()
                    .all(|h| (x[0] * h[0] + x[1] * h[1] + x[2] * h[2]).rem_euclid(q) == 0)
            })
            .copied()
            .collect();
        assert_eq!(m.len() * target, (q * q * q) as usize);
        let members: BTreeSet<[i64; 3]> = m.iter().copied().collect();
        let closed = m
            .iter()
            .all(|u| m.iter().all(|v| members.contains(&diag_bracket(a, q, *u, *v))));
        if closed {
            out.insert(m);
        }
    }
    out
}

pub fn residue_i64(x: &PAdicScalar, q: i64) -> i64 {
    (x.residue() % BigInt::from(q)).to_i64().unwrap()
}

/// Element set of a lattice reduced mod `p^n`.
pub fn submodule_set(sub: &Submodule, p: i64, n: u32) -> Vec<[i64; 3]> {
    let q = modulus(p, n);
    let gens: Vec<[i64; 3]> = sub
        .basis()
        .iter()
        .map(|v| v.clone().map(|x| residue_i64(&x, q)))
        .collect();
    span_set(p, n, &gens)
}

pub fn vector(prime: Prime, n: u32, v: [i64; 3]) -> Vector3 {
    v.map(|x| PAdicScalar::new(prime, n, x).unwrap())
}

/// A non-injective morphism on a subalgebra of index `p^k`: either the zero
/// map or `y -> lambda(y) v` with `lambda` a random combination of the
/// functionals killing `[M, M]` at precision and `v` random.
pub fn sample_non_injective(
    lattice: &selfsim_core::LieLattice,
    domains: &[Submodule],
    rng: &mut impl rand::Rng,
) -> selfsim_core::endo::VirtualEndomorphism {
    use selfsim_core::endo::{derived_annihilator, rank_one_map, VirtualEndomorphism};
    let prime = lattice.prime();
    let n = lattice.precision();
    let m = domains[rng.gen_range(0..domains.len())].clone();
    if rng.gen_range(0..5) == 0 {
        return VirtualEndomorphism::zero(lattice, m).unwrap();
    }
    let sc = |x: i64| PAdicScalar::new(prime, n, x).unwrap();
    let ann = derived_annihilator(lattice, &m).unwrap().generators();
    let mut lambda = [sc(0), sc(0), sc(0)];
    for g in &ann {
        let c = sc(rng.gen_range(-50..50));
        for i in 0..3 {
            lambda[i] = &lambda[i] + &(&c * &g[i]);
        }
    }
    let v = [0, 1, 2].map(|_| sc(rng.gen_range(-1000..1000)));
    let map = rank_one_map(&lambda, &v).unwrap();
    VirtualEndomorphism::new(lattice, m, map).unwrap()
}
