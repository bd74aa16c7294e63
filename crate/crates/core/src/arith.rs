//! Exact scalar and 2x2 matrix arithmetic underlying the big picture.
//!
//! Everything downstream reduces to three canonical-form computations:
//!
//! * `content`: the gcd of the entries of a nonzero integer matrix;
//! * `primitive_rep`: for g in GL2+(Q), the integer matrix `alpha_g * g`
//!   in lowest terms, where `alpha_g` is the smallest positive rational
//!   making the product integral. Its determinant is `delta1(g)`.
//! * `hnf_reduce`: the Hermite normal form `[[a, b], [0, d]]` with
//!   `a, d >= 1` and `0 <= b < d`, the canonical representative of the
//!   unimodular coset `SL2(Z) * m`.
//!
//! `delta1` is invariant under scaling by Q* and under multiplication by
//! SL2(Z) on either side, so it descends to projective classes of
//! commensurable lattices; that invariance is what makes the hyperdistance
//! of the picture module well defined.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar, always in lowest terms with positive denominator.
pub type Rat = BigRational;

/// 2x2 integer matrix `[[a, b], [c, d]]`, row major.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntMat2 {
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
    pub d: BigInt,
}

impl IntMat2 {
    pub fn new(
        a: impl Into<BigInt>,
        b: impl Into<BigInt>,
        c: impl Into<BigInt>,
        d: impl Into<BigInt>,
    ) -> Self {
        IntMat2 { a: a.into(), b: b.into(), c: c.into(), d: d.into() }
    }

    pub fn identity() -> Self {
        IntMat2::new(1, 0, 0, 1)
    }

    /// The diagonal matrix diag(n, 1) whose rows span the lattice <n*w1, w2>.
    pub fn diag(n: impl Into<BigInt>) -> Self {
        IntMat2::new(n, 0, 0, 1)
    }

    pub fn det(&self) -> BigInt {
        &self.a * &self.d - &self.b * &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero() && self.c.is_zero() && self.d.is_zero()
    }

    pub fn is_identity(&self) -> bool {
        self.a.is_one() && self.b.is_zero() && self.c.is_zero() && self.d.is_one()
    }

    /// Adjugate `[[d, -b], [-c, a]]`; equals det(m) * m^-1.
    pub fn adjugate(&self) -> Self {
        IntMat2 {
            a: self.d.clone(),
            b: -self.b.clone(),
            c: -self.c.clone(),
            d: self.a.clone(),
        }
    }

    pub fn neg(&self) -> Self {
        IntMat2 {
            a: -self.a.clone(),
            b: -self.b.clone(),
            c: -self.c.clone(),
            d: -self.d.clone(),
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        IntMat2 {
            a: &self.a * &rhs.a + &self.b * &rhs.c,
            b: &self.a * &rhs.b + &self.b * &rhs.d,
            c: &self.c * &rhs.a + &self.d * &rhs.c,
            d: &self.c * &rhs.b + &self.d * &rhs.d,
        }
    }

    pub fn to_rat(&self) -> RatMat2 {
        RatMat2 {
            a: Rat::from_integer(self.a.clone()),
            b: Rat::from_integer(self.b.clone()),
            c: Rat::from_integer(self.c.clone()),
            d: Rat::from_integer(self.d.clone()),
        }
    }
}

impl fmt::Display for IntMat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{};{},{}", self.a, self.b, self.c, self.d)
    }
}

/// 2x2 matrix with rational entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatMat2 {
    pub a: Rat,
    pub b: Rat,
    pub c: Rat,
    pub d: Rat,
}

impl RatMat2 {
    pub fn new(a: Rat, b: Rat, c: Rat, d: Rat) -> Self {
        RatMat2 { a, b, c, d }
    }

    pub fn det(&self) -> Rat {
        &self.a * &self.d - &self.b * &self.c
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        RatMat2 {
            a: &self.a * &rhs.a + &self.b * &rhs.c,
            b: &self.a * &rhs.b + &self.b * &rhs.d,
            c: &self.c * &rhs.a + &self.d * &rhs.c,
            d: &self.c * &rhs.b + &self.d * &rhs.d,
        }
    }

    /// Exact inverse; errors on a singular matrix.
    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if det.is_zero() {
            return Err(Error::SingularMatrix);
        }
        Ok(RatMat2 {
            a: &self.d / &det,
            b: -(&self.b / &det),
            c: -(&self.c / &det),
            d: &self.a / &det,
        })
    }
}

impl fmt::Display for RatMat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{};{},{}", self.a, self.b, self.c, self.d)
    }
}

/// Parses `"a,b;c,d"` with integer or `p/q` entries.
pub fn parse_rat_mat(s: &str) -> Result<RatMat2> {
    let bad = || Error::MalformedMatrix { input: s.to_string() };
    let rows: Vec<&str> = s.split(';').collect();
    if rows.len() != 2 {
        return Err(bad());
    }
    let mut entries = Vec::with_capacity(4);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        if cols.len() != 2 {
            return Err(bad());
        }
        for col in cols {
            entries.push(Rat::from_str(col.trim()).map_err(|_| bad())?);
        }
    }
    let mut it = entries.into_iter();
    Ok(RatMat2 {
        a: it.next().unwrap(),
        b: it.next().unwrap(),
        c: it.next().unwrap(),
        d: it.next().unwrap(),
    })
}

/// Parses `"a,b;c,d"` with integer entries only.
pub fn parse_int_mat(s: &str) -> Result<IntMat2> {
    let m = parse_rat_mat(s)?;
    let as_int = |r: &Rat| -> Result<BigInt> {
        if r.is_integer() {
            Ok(r.to_integer())
        } else {
            Err(Error::MalformedMatrix { input: s.to_string() })
        }
    };
    Ok(IntMat2 {
        a: as_int(&m.a)?,
        b: as_int(&m.b)?,
        c: as_int(&m.c)?,
        d: as_int(&m.d)?,
    })
}

/// Gcd of the entries of a nonzero integer matrix.
pub fn content(m: &IntMat2) -> Result<BigInt> {
    if m.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    Ok(m.a.gcd(&m.b).gcd(&m.c).gcd(&m.d))
}

/// The integer matrix in lowest terms representing the class of g in
/// PGL2+(Q): clear denominators, then divide out the content. The scaling
/// factor applied is `alpha_g`, the smallest positive rational making the
/// result integral.
pub fn primitive_rep(g: &RatMat2) -> Result<IntMat2> {
    if !g.det().is_positive() {
        return Err(Error::NonPositiveDeterminant);
    }
    let l = g
        .a
        .denom()
        .lcm(g.b.denom())
        .lcm(g.c.denom())
        .lcm(g.d.denom());
    let scaled = IntMat2 {
        a: g.a.numer() * (&l / g.a.denom()),
        b: g.b.numer() * (&l / g.b.denom()),
        c: g.c.numer() * (&l / g.c.denom()),
        d: g.d.numer() * (&l / g.d.denom()),
    };
    let c = content(&scaled)?;
    Ok(IntMat2 {
        a: &scaled.a / &c,
        b: &scaled.b / &c,
        c: &scaled.c / &c,
        d: &scaled.d / &c,
    })
}

/// `alpha_g` as a reduced fraction (numerator, denominator), both positive.
pub fn alpha_of(g: &RatMat2) -> Result<(BigInt, BigInt)> {
    if !g.det().is_positive() {
        return Err(Error::NonPositiveDeterminant);
    }
    let l = g
        .a
        .denom()
        .lcm(g.b.denom())
        .lcm(g.c.denom())
        .lcm(g.d.denom());
    let scaled = IntMat2 {
        a: g.a.numer() * (&l / g.a.denom()),
        b: g.b.numer() * (&l / g.b.denom()),
        c: g.c.numer() * (&l / g.c.denom()),
        d: g.d.numer() * (&l / g.d.denom()),
    };
    let c = content(&scaled)?;
    let g0 = l.gcd(&c);
    Ok((&l / &g0, &c / &g0))
}

/// Determinant of the primitive representative of g; the projective
/// determinant invariant.
pub fn delta1(g: &RatMat2) -> Result<BigInt> {
    Ok(primitive_rep(g)?.det())
}

/// Hermite normal form of an integer matrix with positive determinant:
/// the unique `[[a, b], [0, d]]` with `a, d >= 1` and `0 <= b < d` in the
/// coset `SL2(Z) * m`. Row operations only; the determinant is preserved.
pub fn hnf_reduce(m: &IntMat2) -> Result<IntMat2> {
    let det = m.det();
    if !det.is_positive() {
        return Err(Error::NonPositiveDeterminant);
    }
    // U = [[x, y], [-c/g, a/g]] has det 1 and clears the lower left entry.
    let e = m.a.extended_gcd(&m.c);
    let g = e.gcd;
    let b1 = &e.x * &m.b + &e.y * &m.d;
    let d1 = &det / &g;
    let b = b1.mod_floor(&d1);
    Ok(IntMat2 { a: g, b, c: BigInt::zero(), d: d1 })
}

/// A class in PGL2+(Q), stored as its primitive integer representative with
/// the sign fixed so the first nonzero entry in reading order is positive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PGLClass {
    rep: IntMat2,
}

impl PGLClass {
    pub fn new(g: &RatMat2) -> Result<Self> {
        let rep = primitive_rep(g)?;
        Ok(PGLClass { rep: normalize_sign(rep) })
    }

    pub fn from_int(m: &IntMat2) -> Result<Self> {
        PGLClass::new(&m.to_rat())
    }

    pub fn identity() -> Self {
        PGLClass { rep: IntMat2::identity() }
    }

    /// The primitive integer representative.
    pub fn rep(&self) -> &IntMat2 {
        &self.rep
    }

    /// delta1 of the class: determinant of the primitive representative.
    pub fn det(&self) -> BigInt {
        self.rep.det()
    }

    /// Class of the inverse; the adjugate represents it.
    pub fn inverse(&self) -> Self {
        let adj = self.rep.adjugate();
        PGLClass::from_int(&adj).expect("adjugate of a nondegenerate class is nondegenerate")
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        PGLClass::from_int(&self.rep.mul(&rhs.rep))
            .expect("product of positive determinants is positive")
    }

    pub fn is_identity(&self) -> bool {
        self.rep.is_identity()
    }
}

impl fmt::Display for PGLClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.rep.fmt(f)
    }
}

fn normalize_sign(m: IntMat2) -> IntMat2 {
    let flip = if !m.a.is_zero() {
        m.a.is_negative()
    } else if !m.b.is_zero() {
        m.b.is_negative()
    } else if !m.c.is_zero() {
        m.c.is_negative()
    } else {
        m.d.is_negative()
    };
    if flip {
        m.neg()
    } else {
        m
    }
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn powmod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod(acc, base, m);
        }
        base = mulmod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin over u64 (the standard twelve witnesses
/// certify every n < 3.3e24).
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Primality for big integers: exact below 2^64, Miller-Rabin with fixed
/// witnesses above.
pub fn is_prime(n: &BigInt) -> bool {
    if let Some(v) = n.to_u64() {
        return is_prime_u64(v);
    }
    if !n.is_positive() || n.is_even() {
        return false;
    }
    let one = BigInt::one();
    let nm1 = n - &one;
    let s = nm1.trailing_zeros().unwrap_or(0);
    let d = &nm1 >> s;
    'witness: for a in [
        2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
    ] {
        let mut x = BigInt::from(a).modpow(&d, n);
        if x.is_one() || x == nm1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&BigInt::from(2), n);
            if x == nm1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

const TRIAL_BOUND: u64 = 1 << 20;

/// Factorization of a positive u64 by trial division up to 2^20 with a
/// primality certificate for the cofactor. A composite cofactor beyond the
/// trial range is reported as an error instead of being factored slowly.
pub fn factor_u64(mut n: u64) -> Result<BTreeMap<u64, u32>> {
    if n == 0 {
        return Err(Error::NotPositive);
    }
    let mut out = BTreeMap::new();
    let push = |p: u64, out: &mut BTreeMap<u64, u32>, n: &mut u64| {
        let mut e = 0u32;
        while *n % p == 0 {
            *n /= p;
            e += 1;
        }
        if e > 0 {
            out.insert(p, e);
        }
    };
    push(2, &mut out, &mut n);
    push(3, &mut out, &mut n);
    let mut p = 5u64;
    while p <= TRIAL_BOUND && p * p <= n {
        push(p, &mut out, &mut n);
        push(p + 2, &mut out, &mut n);
        p += 6;
    }
    if n > 1 {
        if p * p > n || is_prime_u64(n) {
            *out.entry(n).or_insert(0) += 1;
        } else {
            return Err(Error::FactorOverflow(n.to_string()));
        }
    }
    Ok(out)
}

/// Factorization of a positive big integer; see `factor_u64` for the guard.
pub fn factor(n: &BigInt) -> Result<BTreeMap<BigInt, u32>> {
    if !n.is_positive() {
        return Err(Error::NotPositive);
    }
    if let Some(v) = n.to_u64() {
        return Ok(factor_u64(v)?
            .into_iter()
            .map(|(p, e)| (BigInt::from(p), e))
            .collect());
    }
    let mut n = n.clone();
    let mut out = BTreeMap::new();
    let push = |p: u64, out: &mut BTreeMap<BigInt, u32>, n: &mut BigInt| {
        let big = BigInt::from(p);
        let mut e = 0u32;
        while (&*n % &big).is_zero() {
            *n /= &big;
            e += 1;
        }
        if e > 0 {
            out.insert(big, e);
        }
    };
    push(2, &mut out, &mut n);
    push(3, &mut out, &mut n);
    let mut p = 5u64;
    while p <= TRIAL_BOUND {
        if let Some(v) = n.to_u64() {
            for (q, e) in factor_u64(v)? {
                *out.entry(BigInt::from(q)).or_insert(0) += e;
            }
            return Ok(out);
        }
        push(p, &mut out, &mut n);
        push(p + 2, &mut out, &mut n);
        p += 6;
    }
    if let Some(v) = n.to_u64() {
        for (q, e) in factor_u64(v)? {
            *out.entry(BigInt::from(q)).or_insert(0) += e;
        }
    } else if n.is_one() {
    } else if is_prime(&n) {
        *out.entry(n).or_insert(0) += 1;
    } else {
        return Err(Error::FactorOverflow(n.to_string()));
    }
    Ok(out)
}

/// Sorted list of the divisors of n.
pub fn divisors(n: u64) -> Result<Vec<u64>> {
    let mut out = vec![1u64];
    for (p, e) in factor_u64(n)? {
        let prev = out.clone();
        let mut pk = 1u64;
        for _ in 0..e {
            pk *= p;
            out.extend(prev.iter().map(|d| d * pk));
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Sorted list of the exact divisors e || n, those with gcd(e, n/e) = 1.
pub fn exact_divisors(n: u64) -> Result<Vec<u64>> {
    let mut out = vec![1u64];
    for (p, e) in factor_u64(n)? {
        let pk = p.pow(e);
        out.extend(out.clone().into_iter().map(|d| d * pk));
    }
    out.sort_unstable();
    Ok(out)
}

/// Dedekind psi: n * prod over p | n of (1 + 1/p). Counts the vertices at
/// hyperdistance exactly n from any fixed vertex.
pub fn dedekind_psi(n: u64) -> Result<u64> {
    let mut out = 1u64;
    for (p, e) in factor_u64(n)? {
        out *= (p + 1) * p.pow(e - 1);
    }
    Ok(out)
}

/// Natural log of a positive big integer, robust beyond f64 range.
pub fn ln_big(n: &BigInt) -> f64 {
    debug_assert!(n.is_positive());
    if let Some(x) = n.to_f64() {
        if x.is_finite() {
            return x.ln();
        }
    }
    let bits = n.bits();
    let shift = bits.saturating_sub(53);
    let top = (n >> shift).to_f64().expect("53-bit value fits f64");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}
