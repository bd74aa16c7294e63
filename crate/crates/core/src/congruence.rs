//! Groups like Gamma0(N) and their geometry inside the big picture.
//!
//! PGL2+(Q) acts on projective lattice classes by right multiplication of
//! representatives; the action is an isometry of the hyperdistance.
//! Gamma0(N) is the joint stabilizer of nu_1 and nu_N. Conjugating by
//! g_l = diag(l, 1) gives the groups Gamma0(M|l), and adjoining the
//! Atkin-Lehner involutions W_e for exact divisors e || N gives
//! Gamma0(N)+, the setwise stabilizer of the thread of N. The normalizer
//! of Gamma0(N) in PSL2(R) is Gamma0(N/h | h)+ where h is the largest
//! divisor of 24 whose square divides N.
//!
//! The thread t_N is the set of nu_d for d | N, the product over p | N of
//! paths in the trees T_p; the snake s_N collects every class whose
//! hyperdistance to the thread divides 24. Orbits of vertex sets under
//! finitely many group elements are computed by closure with a cap, and
//! `invariant_tree` builds the finite invariant vertex set spanned by an
//! orbit of nu_1: per prime, the convex hull in T_p of the p-parts of the
//! orbit, recombined across primes.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::arith::{divisors, exact_divisors, factor, IntMat2, PGLClass, RatMat2};
use crate::error::{Error, Result};
use crate::picture::{geodesic, hyperdistance, neighbors, sphere, vertex_of_int, Vertex};

/// An element of PGL2+(Q) acting on the picture.
pub type GroupElement = PGLClass;

fn rat(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn diag_rat(n: u64) -> RatMat2 {
    RatMat2::new(rat(n), rat(0), rat(0), rat(1))
}

/// The action of g on a vertex: right-multiply the representative and
/// canonicalize. An isometry of the hyperdistance.
pub fn act(g: &GroupElement, v: &Vertex) -> Vertex {
    vertex_of_int(&v.rep().mul(g.rep())).expect("the action preserves nondegeneracy")
}

/// Membership in Gamma0(N): an SL2(Z) class whose lower-left entry is
/// divisible by N. N must be positive.
pub fn in_gamma0(g: &GroupElement, n: u64) -> bool {
    assert!(n >= 1, "modulus must be positive");
    g.det().is_one() && (&g.rep().c % BigInt::from(n)).is_zero()
}

/// Membership in Gamma0(M|l), the conjugate of Gamma0(M/l) by
/// g_l = diag(l, 1): true iff g_l g g_l^-1 lands in Gamma0(M/l).
pub fn in_gamma0_ml(g: &GroupElement, m: u64, l: u64) -> Result<bool> {
    if m == 0 || l == 0 || m % l != 0 {
        return Err(Error::NotDivisor { n: m, divisor: l });
    }
    let gl = diag_rat(l);
    let gl_inv = gl.inverse().expect("diag(l,1) is invertible");
    let conj = gl.mul(&g.rep().to_rat()).mul(&gl_inv);
    let class = PGLClass::new(&conj).expect("conjugation preserves the determinant sign");
    Ok(in_gamma0(&class, m / l))
}

/// The Fricke class, represented by [[0, -1], [N, 0]].
pub fn fricke(n: u64) -> GroupElement {
    assert!(n >= 1, "level must be positive");
    PGLClass::from_int(&IntMat2::new(0, -1, BigInt::from(n), 0))
        .expect("the Fricke matrix has determinant N")
}

/// The Atkin-Lehner involution W_e for an exact divisor e || N: a class
/// [[e a, b], [N c, e d]] of determinant e. W_1 is the identity and W_N
/// the Fricke class.
pub fn atkin_lehner_rep(n: u64, e: u64) -> Result<GroupElement> {
    let exact = e >= 1 && n >= 1 && n % e == 0 && e.gcd(&(n / e)) == 1;
    if !exact {
        return Err(Error::NotExactDivisor { n, divisor: e });
    }
    if e == 1 {
        return Ok(GroupElement::identity());
    }
    if e == n {
        return Ok(fricke(n));
    }
    // x0 = e^-1 mod q with 0 < x0 < q, then e*e*x0 - N*y0 = e.
    let q = BigInt::from(n / e);
    let eb = BigInt::from(e);
    let x0 = eb.extended_gcd(&q).x.mod_floor(&q);
    let y0 = (&eb * &x0 - 1) / &q;
    let w = IntMat2 {
        a: eb.clone(),
        b: y0,
        c: BigInt::from(n),
        d: &eb * &x0,
    };
    debug_assert_eq!(w.det(), eb);
    Ok(PGLClass::from_int(&w).expect("W_e has positive determinant"))
}

/// Membership in Gamma0(N)+, the extension of Gamma0(N) by its
/// Atkin-Lehner involutions: g lies in some coset Gamma0(N) W_e.
pub fn in_gamma0_plus(g: &GroupElement, n: u64) -> bool {
    assert!(n >= 1, "level must be positive");
    exact_divisors(n)
        .expect("positive level factors")
        .into_iter()
        .any(|e| {
            let w = atkin_lehner_rep(n, e).expect("enumerated exact divisor");
            in_gamma0(&g.mul(&w.inverse()), n)
        })
}

/// The thread t_N: the classes nu_d over divisors d of N, the product of
/// the per-prime paths from nu_1 to nu_{p^e}.
pub fn thread(n: u64) -> Result<BTreeSet<Vertex>> {
    divisors(n)?.into_iter().map(Vertex::nu).collect()
}

/// The snake s_N: every class whose hyperdistance to the thread divides
/// 24. Since the thread is a product of per-prime paths, the minimum
/// distance to it factors per prime, so the snake is exactly the union of
/// the spheres of radius d | 24 around thread vertices.
pub fn snake(n: u64) -> Result<BTreeSet<Vertex>> {
    let t = thread(n)?;
    let mut out = BTreeSet::new();
    for v in &t {
        for d in divisors(24).expect("24 factors") {
            out.extend(sphere(v, d)?);
        }
    }
    Ok(out)
}

/// The largest divisor h of 24 with h^2 | N.
pub fn normalizer_h(n: u64) -> u64 {
    assert!(n >= 1, "level must be positive");
    divisors(24)
        .expect("24 factors")
        .into_iter()
        .rev()
        .find(|h| n % (h * h) == 0)
        .expect("h = 1 always qualifies")
}

/// Membership in the normalizer of Gamma0(N) in PSL2(R), the group
/// Gamma0(N/h | h)+: conjugating by g_h = diag(h, 1) must land in
/// Gamma0(N/h^2)+.
pub fn in_normalizer(g: &GroupElement, n: u64) -> bool {
    let h = normalizer_h(n);
    let gh = diag_rat(h);
    let gh_inv = gh.inverse().expect("diag(h,1) is invertible");
    let conj = gh.mul(&g.rep().to_rat()).mul(&gh_inv);
    let class = PGLClass::new(&conj).expect("conjugation preserves the determinant sign");
    in_gamma0_plus(&class, n / (h * h))
}

/// A seeded pseudorandom element of Gamma0(N): a product of `word_length`
/// factors, each solving a*d - b*(N*c) = 1 with small random a, c and a
/// random unipotent twist. Word length 0 gives the identity.
pub fn random_element(n: u64, seed: u64, word_length: u32) -> GroupElement {
    assert!(n >= 1, "level must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = BigInt::from(n);
    let mut acc = IntMat2::identity();
    for _ in 0..word_length {
        let (a, nc) = loop {
            let a = BigInt::from(rng.gen_range(-9i64..=9));
            let c = BigInt::from(rng.gen_range(-3i64..=3));
            let nc = &nb * &c;
            if !a.is_zero() && a.gcd(&nc).is_one() {
                break (a, nc);
            }
        };
        let e = a.extended_gcd(&nc);
        let letter = IntMat2 {
            a: a.clone(),
            b: -e.y.clone(),
            c: nc.clone(),
            d: e.x.clone(),
        };
        debug_assert!(letter.det().is_one());
        let t = BigInt::from(rng.gen_range(-4i64..=4));
        acc = acc.mul(&letter).mul(&IntMat2::new(1, t, 0, 1));
    }
    PGLClass::from_int(&acc).expect("a word in SL2(Z) matrices has determinant 1")
}

/// Closure of {v} under the given elements and their inverses; errors out
/// once the orbit grows past `cap`.
pub fn orbit(gens: &[GroupElement], v: &Vertex, cap: usize) -> Result<BTreeSet<Vertex>> {
    if cap == 0 {
        return Err(Error::NotPositive);
    }
    let mut ops: Vec<GroupElement> = gens.to_vec();
    ops.extend(gens.iter().map(|g| g.inverse()));
    let mut seen: BTreeSet<Vertex> = [v.clone()].into_iter().collect();
    let mut queue = vec![v.clone()];
    while let Some(u) = queue.pop() {
        for g in &ops {
            let w = act(g, &u);
            if seen.insert(w.clone()) {
                if seen.len() > cap {
                    return Err(Error::OrbitExceedsCap { cap });
                }
                queue.push(w);
            }
        }
    }
    Ok(seen)
}

/// The projection of v into the tree T_p: walk from nu_1 toward v inside
/// T_p only. The result is the vertex whose p-coordinate matches v and
/// whose other coordinates are the basepoint.
pub fn project_to_tree(v: &Vertex, p: u64) -> Result<Vertex> {
    let root = Vertex::one();
    let e = crate::picture::p_adic_distance(&root, v, p)?;
    let p_big = BigInt::from(p);
    let mut cur = root;
    for _ in 0..e {
        let target = hyperdistance(&cur, v) / &p_big;
        cur = neighbors(&cur, p)?
            .into_iter()
            .find(|w| hyperdistance(w, v) == target)
            .expect("T_p contains a step toward any vertex");
    }
    Ok(cur)
}

/// x with x = r1 mod m1 and x = r2 mod m2, for coprime moduli.
fn crt(r1: &BigInt, m1: &BigInt, r2: &BigInt, m2: &BigInt) -> BigInt {
    let e = m1.extended_gcd(m2);
    debug_assert!(e.gcd.is_one());
    let m = m1 * m2;
    (r2 * m1 * &e.x + r1 * m2 * &e.y).mod_floor(&m)
}

/// The vertex whose coordinates combine those of u and w, assuming their
/// determinants are coprime. Lattice intersection via the CRT on the HNF
/// membership conditions.
fn compose_coprime(u: &Vertex, w: &Vertex) -> Vertex {
    let (u, w) = (u.rep(), w.rep());
    debug_assert!(u.det().gcd(&w.det()).is_one());
    let a = &u.a * &w.a;
    let d = &u.d * &w.d;
    let b = crt(&(&w.a * &u.b), &u.d, &(&u.a * &w.b), &w.d);
    vertex_of_int(&IntMat2 { a, b, c: BigInt::zero(), d })
        .expect("composition of lattices is nondegenerate")
}

/// The finite invariant vertex set spanned by the orbit of nu_1: for each
/// prime, the convex hull in T_p of the p-parts of the orbit points, then
/// the product of those hulls across primes. Setwise invariant under every
/// generator because the action factors through the trees.
pub fn invariant_tree(gens: &[GroupElement], cap: usize) -> Result<BTreeSet<Vertex>> {
    let root = Vertex::one();
    let orb = orbit(gens, &root, cap)?;
    let mut primes: BTreeSet<u64> = BTreeSet::new();
    for v in &orb {
        for (p, _) in factor(&hyperdistance(&root, v))? {
            primes.insert(p.to_u64().ok_or_else(|| Error::FactorOverflow(p.to_string()))?);
        }
    }
    let mut out: BTreeSet<Vertex> = [root].into_iter().collect();
    for p in primes {
        let parts: BTreeSet<Vertex> = orb
            .iter()
            .map(|v| project_to_tree(v, p))
            .collect::<Result<_>>()?;
        let mut hull = BTreeSet::new();
        for x in &parts {
            for y in &parts {
                hull.extend(geodesic(x, y)?);
            }
        }
        let mut next = BTreeSet::new();
        for v in &out {
            for h in &hull {
                next.insert(compose_coprime(v, h));
                if next.len() > cap {
                    return Err(Error::CapExceeded(format!(
                        "invariant tree exceeds {cap} vertices"
                    )));
                }
            }
        }
        out = next;
    }
    Ok(out)
}
