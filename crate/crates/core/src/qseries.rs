//! Exact q-expansions: Laurent series with rational coefficients,
//! truncated at an explicit order.
//!
//! The constructors give the classical modular generators: the
//! Eisenstein series E4 = 1 + 240 sum sigma_3(n) q^n and
//! E6 = 1 - 504 sum sigma_5(n) q^n, the discriminant
//! Delta = q prod (1-q^n)^24 expanded by iterated product, the
//! j-function E4^3 / Delta by exact power-series division, and its
//! normalization J = j - 744 with zero constant term.
//!
//! A normalized principal series f = q^-1 + a_1 q + a_2 q^2 + ... has a
//! unique monic Faber polynomial Q_k with Q_k(f) = q^-k + O(q). The k-th
//! replicate f^(k) is defined through
//!
//!   f^(k)(kz) = Q_k(f)(z) - sum over ad = k, a != k, 0 <= b < d of
//!               f^(a)((az + b)/d),
//!
//! and summing the root-of-unity twists collapses the right side to a
//! rational coefficient recursion:
//!
//!   [q^m] Q_k(f) = sum over ad = k with a | m of d * a^(a)_{dm/a},
//!
//! valid for all m >= 1. Multiples of k solve for the new coefficients
//! a^(k)_{m/k}; the remaining m impose consistency constraints, and a
//! violation means the true replicate would need fractional powers of q,
//! which is exactly failure of replicability at k. The same collapsed sum
//! computes the generalized Hecke operator directly from a family of
//! replicates. J is replicable with every replicate equal to J itself;
//! McKay-Thompson series replicate along power maps of conjugacy classes.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_complex::Complex64;
use num_traits::{One, ToPrimitive, Zero};

use crate::arith::Rat;
use crate::error::{Error, Result};

/// A truncated Laurent series in q with exact rational coefficients.
/// Coefficients at exponents <= trunc are exact; higher ones are absent.
/// Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QSeries {
    coeffs: BTreeMap<i64, Rat>,
    trunc: i64,
}

impl QSeries {
    pub fn zero(trunc: i64) -> Self {
        QSeries { coeffs: BTreeMap::new(), trunc }
    }

    pub fn one(trunc: i64) -> Self {
        Self::monomial(0, Rat::one(), trunc)
    }

    /// c * q^n, truncated at trunc >= n.
    pub fn monomial(n: i64, c: Rat, trunc: i64) -> Self {
        assert!(n <= trunc, "monomial exponent beyond truncation");
        let mut coeffs = BTreeMap::new();
        if !c.is_zero() {
            coeffs.insert(n, c);
        }
        QSeries { coeffs, trunc }
    }

    pub fn trunc(&self) -> i64 {
        self.trunc
    }

    /// Lowest stored exponent; None for the zero series.
    pub fn lowest(&self) -> Option<i64> {
        self.coeffs.keys().next().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// The coefficient at q^n. Panics beyond the truncation: that
    /// coefficient is unknown, not zero.
    pub fn coefficient(&self, n: i64) -> Rat {
        assert!(n <= self.trunc, "coefficient {n} beyond truncation {}", self.trunc);
        self.coeffs.get(&n).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn set_coefficient(&mut self, n: i64, c: Rat) {
        assert!(n <= self.trunc, "coefficient {n} beyond truncation {}", self.trunc);
        if c.is_zero() {
            self.coeffs.remove(&n);
        } else {
            self.coeffs.insert(n, c);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&i64, &Rat)> {
        self.coeffs.iter()
    }

    /// q^-1 leading coefficient 1, zero constant term.
    pub fn is_normalized_principal(&self) -> bool {
        self.lowest() == Some(-1)
            && self.coefficient(-1).is_one()
            && self.trunc >= 0
            && self.coefficient(0).is_zero()
    }

    /// Lowers the truncation to t, dropping higher terms.
    pub fn truncate(&self, t: i64) -> Result<QSeries> {
        if t > self.trunc {
            return Err(Error::InsufficientTruncation { needed: t, have: self.trunc });
        }
        if !self.is_zero() && t < self.lowest().unwrap() {
            return Err(Error::TruncationUnderflow);
        }
        let coeffs = self.coeffs.range(..=t).map(|(n, c)| (*n, c.clone())).collect();
        Ok(QSeries { coeffs, trunc: t })
    }

    /// Multiplication by q^n.
    pub fn shift(&self, n: i64) -> QSeries {
        let coeffs = self.coeffs.iter().map(|(m, c)| (m + n, c.clone())).collect();
        QSeries { coeffs, trunc: self.trunc + n }
    }

    /// Substitution q -> q^s. A series exact through q^T determines the
    /// substituted one through q^(s(T+1)-1).
    pub fn substitute_power(&self, s: u32) -> QSeries {
        assert!(s >= 1);
        let s = s as i64;
        let coeffs = self.coeffs.iter().map(|(m, c)| (m * s, c.clone())).collect();
        QSeries { coeffs, trunc: s * (self.trunc + 1) - 1 }
    }

    pub fn add(&self, other: &QSeries) -> QSeries {
        let trunc = self.trunc.min(other.trunc);
        let mut coeffs: BTreeMap<i64, Rat> = self
            .coeffs
            .range(..=trunc)
            .map(|(n, c)| (*n, c.clone()))
            .collect();
        for (n, c) in other.coeffs.range(..=trunc) {
            let v = coeffs.entry(*n).or_insert_with(Rat::zero);
            *v += c;
            if v.is_zero() {
                coeffs.remove(n);
            }
        }
        QSeries { coeffs, trunc }
    }

    pub fn neg(&self) -> QSeries {
        let coeffs = self.coeffs.iter().map(|(n, c)| (*n, -c.clone())).collect();
        QSeries { coeffs, trunc: self.trunc }
    }

    pub fn sub(&self, other: &QSeries) -> QSeries {
        self.add(&other.neg())
    }

    pub fn scale(&self, r: &Rat) -> QSeries {
        if r.is_zero() {
            return QSeries::zero(self.trunc);
        }
        let coeffs = self.coeffs.iter().map(|(n, c)| (*n, c * r)).collect();
        QSeries { coeffs, trunc: self.trunc }
    }

    fn is_integral(&self) -> bool {
        self.coeffs.values().all(|c| c.denom().is_one())
    }

    /// Product, with the truncation adjusted for principal parts: terms of
    /// one factor beyond its truncation meet the lowest exponent of the
    /// other, so the result is exact through
    /// min(T1 + n0(other), T2 + n0(self)). Integral series, the common
    /// case, accumulate densely over plain integers, skipping rational
    /// normalization in the inner loop.
    pub fn mul(&self, other: &QSeries) -> QSeries {
        let n1 = self.lowest().unwrap_or(self.trunc);
        let n2 = other.lowest().unwrap_or(other.trunc);
        let trunc = (self.trunc + n2).min(other.trunc + n1);
        if self.is_zero() || other.is_zero() {
            return QSeries::zero(trunc);
        }
        let low = n1 + n2;
        if low > trunc {
            return QSeries::zero(trunc);
        }
        let len = (trunc - low) as usize + 1;
        if self.is_integral() && other.is_integral() {
            let mut acc = vec![BigInt::zero(); len];
            for (i, a) in &self.coeffs {
                for (j, b) in &other.coeffs {
                    let n = i + j;
                    if n > trunc {
                        break;
                    }
                    acc[(n - low) as usize] += a.numer() * b.numer();
                }
            }
            let coeffs = acc
                .into_iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(k, c)| (low + k as i64, Rat::from_integer(c)))
                .collect();
            return QSeries { coeffs, trunc };
        }
        let mut acc = vec![Rat::zero(); len];
        for (i, a) in &self.coeffs {
            for (j, b) in &other.coeffs {
                let n = i + j;
                if n > trunc {
                    break;
                }
                acc[(n - low) as usize] += a * b;
            }
        }
        let coeffs = acc
            .into_iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| (low + k as i64, c))
            .collect();
        QSeries { coeffs, trunc }
    }

    /// Integer power. Sequential multiplication keeps the tightest
    /// truncation for series with principal parts.
    pub fn pow(&self, e: u32) -> QSeries {
        if e == 0 {
            return QSeries::one(self.trunc);
        }
        let mut out = self.clone();
        for _ in 1..e {
            out = out.mul(self);
        }
        out
    }

    /// Exact power-series division. The divisor's lowest coefficient must
    /// be nonzero; the quotient is exact through
    /// min(T1 - n0(o), T2 + n0(self) - 2 n0(o)). A unit-lead integral
    /// divisor of an integral series admits pure integer long division.
    pub fn div(&self, other: &QSeries) -> QSeries {
        let n_o = other.lowest().expect("division by the zero series");
        let lead = other.coefficient(n_o);
        if self.is_zero() {
            return QSeries::zero(self.trunc - n_o);
        }
        let n_s = self.lowest().unwrap();
        let n_q = n_s - n_o;
        let trunc = (self.trunc - n_o).min(other.trunc + n_s - 2 * n_o);
        if self.is_integral() && other.is_integral() && lead.numer().magnitude().is_one() {
            let negate = lead.numer().sign() == Sign::Minus;
            let b_len = (other.trunc - n_o) as usize + 1;
            let mut b = vec![BigInt::zero(); b_len];
            for (j, c) in &other.coeffs {
                b[(j - n_o) as usize] = c.numer().clone();
            }
            let mut q: Vec<BigInt> = Vec::new();
            for m in n_q..=trunc {
                let mi = (m - n_q) as usize;
                let mut acc = if m + n_o <= self.trunc {
                    self.coeffs
                        .get(&(m + n_o))
                        .map(|c| c.numer().clone())
                        .unwrap_or_default()
                } else {
                    BigInt::zero()
                };
                for k in (mi + 1).saturating_sub(b_len)..mi {
                    let bj = &b[mi - k];
                    if !bj.is_zero() && !q[k].is_zero() {
                        acc -= &q[k] * bj;
                    }
                }
                if negate {
                    acc = -acc;
                }
                q.push(acc);
            }
            let coeffs = q
                .into_iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(k, c)| (n_q + k as i64, Rat::from_integer(c)))
                .collect();
            return QSeries { coeffs, trunc };
        }
        let mut quot = QSeries::zero(trunc);
        for m in n_q..=trunc {
            let mut acc = if m + n_o <= self.trunc {
                self.coefficient(m + n_o)
            } else {
                Rat::zero()
            };
            for (i, c) in quot.coeffs.range(n_q..m) {
                let j = m + n_o - i;
                if j <= other.trunc {
                    acc -= c * other.coefficient(j);
                }
            }
            quot.set_coefficient(m, acc / &lead);
        }
        quot
    }
}

/// sigma_k(n) = sum of d^k over divisors d of n, for all n <= t.
fn sigma_power_sieve(t: usize, k: u32) -> Vec<BigInt> {
    let mut s = vec![BigInt::zero(); t + 1];
    for d in 1..=t {
        let dk = BigInt::from(d).pow(k);
        for m in (d..=t).step_by(d) {
            s[m] += &dk;
        }
    }
    s
}

/// The Euler product prod_{n>=1} (1 - q^n), expanded by iterated
/// multiplication of the binomials.
pub fn euler_series(t: i64) -> QSeries {
    assert!(t >= 0);
    let tu = t as usize;
    let mut c = vec![BigInt::zero(); tu + 1];
    c[0] = BigInt::one();
    for n in 1..=tu {
        for i in (n..=tu).rev() {
            let prev = c[i - n].clone();
            c[i] -= prev;
        }
    }
    let coeffs = c
        .into_iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .map(|(n, v)| (n as i64, Rat::from_integer(v)))
        .collect();
    QSeries { coeffs, trunc: t }
}

/// E4 = 1 + 240 sum sigma_3(n) q^n.
pub fn e4(t: i64) -> QSeries {
    assert!(t >= 1);
    let s = sigma_power_sieve(t as usize, 3);
    let mut out = QSeries::one(t);
    for n in 1..=t {
        out.set_coefficient(n, Rat::from_integer(240 * &s[n as usize]));
    }
    out
}

/// E6 = 1 - 504 sum sigma_5(n) q^n.
pub fn e6(t: i64) -> QSeries {
    assert!(t >= 1);
    let s = sigma_power_sieve(t as usize, 5);
    let mut out = QSeries::one(t);
    for n in 1..=t {
        out.set_coefficient(n, Rat::from_integer(-504 * &s[n as usize]));
    }
    out
}

/// Delta = q prod (1 - q^n)^24.
pub fn delta(t: i64) -> QSeries {
    assert!(t >= 1);
    euler_series(t - 1).pow(24).shift(1)
}

/// j = E4^3 / Delta = q^-1 + 744 + 196884 q + ...
pub fn j_series(t: i64) -> QSeries {
    assert!(t >= 1);
    let num = e4(t + 2).pow(3);
    let den = delta(t + 2);
    num.div(&den).truncate(t).expect("division is exact through t")
}

/// J = j - 744, the normalized principal form.
pub fn j_normalized(t: i64) -> QSeries {
    let mut out = j_series(t);
    out.set_coefficient(0, Rat::zero());
    out
}

/// An eta quotient prod_s eta(s z)^{e_s} as a q-series, for quotients of
/// integral weight: sum s e_s must be divisible by 24.
pub fn eta_quotient(factors: &[(u32, i32)], t: i64) -> Result<QSeries> {
    let total: i64 = factors.iter().map(|(s, e)| *s as i64 * *e as i64).sum();
    assert!(total % 24 == 0, "fractional leading power of q");
    let pre = total / 24;
    let ti = t - pre;
    if ti < 0 {
        return Err(Error::TruncationUnderflow);
    }
    let mut num = QSeries::one(ti);
    let mut den = QSeries::one(ti);
    for (s, e) in factors {
        let base = euler_series(ti).substitute_power(*s).truncate(ti)?;
        let p = base.pow(e.unsigned_abs());
        if *e >= 0 {
            num = num.mul(&p);
        } else {
            den = den.mul(&p);
        }
    }
    Ok(num.div(&den).shift(pre))
}

/// The monic polynomial Q_k with Q_k(f) = q^-k + O(q).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaberPolynomial {
    coeffs: Vec<Rat>,
}

impl FaberPolynomial {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of x^i, ascending; the top one is 1.
    pub fn coefficient(&self, i: usize) -> Rat {
        self.coeffs.get(i).cloned().unwrap_or_else(Rat::zero)
    }

    /// Polynomial composition Q(g) by Horner evaluation.
    pub fn apply(&self, g: &QSeries) -> QSeries {
        let mut acc = QSeries::monomial(0, self.coeffs.last().unwrap().clone(), g.trunc());
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc.mul(g).add(&QSeries::monomial(0, c.clone(), g.trunc()));
        }
        acc
    }
}

/// Extends tables of Faber polynomials and their images Q_m(f) up to
/// degree k, by the recurrence Q_{m+1} = x Q_m - sum of the offending
/// coefficients times lower Q's: multiplying by f raises the principal
/// exponent by one, and the coefficients of q^{-m}..q^0 are cancelled by
/// lower images, which have those leading exponents. One series product
/// per new degree.
fn extend_faber_tables(
    f: &QSeries,
    polys: &mut Vec<FaberPolynomial>,
    images: &mut Vec<QSeries>,
    k: u32,
) -> Result<()> {
    let k = k as usize;
    if f.trunc() < k as i64 {
        return Err(Error::InsufficientTruncation { needed: k as i64, have: f.trunc() });
    }
    for m in polys.len() - 1..k {
        let mut image = images[m].mul(f);
        let mut coeffs = vec![Rat::zero()];
        coeffs.extend(polys[m].coeffs.iter().cloned());
        for lower in (0..=m).rev() {
            let c = image.coefficient(-(lower as i64));
            if c.is_zero() {
                continue;
            }
            image = image.sub(&images[lower].scale(&c).truncate(image.trunc())?);
            for (i, pc) in polys[lower].coeffs.iter().enumerate() {
                let v = &coeffs[i] - &(pc * &c);
                coeffs[i] = v;
            }
        }
        polys.push(FaberPolynomial { coeffs });
        images.push(image);
    }
    Ok(())
}

fn faber_tables(f: &QSeries, k: u32) -> Result<(Vec<FaberPolynomial>, Vec<QSeries>)> {
    if !f.is_normalized_principal() {
        return Err(Error::NotNormalizedPrincipal(describe_non_principal(f)));
    }
    let mut polys = vec![FaberPolynomial { coeffs: vec![Rat::one()] }];
    let mut images = vec![QSeries::one(f.trunc())];
    extend_faber_tables(f, &mut polys, &mut images, k)?;
    Ok((polys, images))
}

fn describe_non_principal(f: &QSeries) -> String {
    match f.lowest() {
        None => "zero series".to_string(),
        Some(n) if n != -1 => format!("lowest exponent {n}, want -1"),
        Some(_) if !f.coefficient(-1).is_one() => {
            format!("leading coefficient {}, want 1", f.coefficient(-1))
        }
        Some(_) if f.trunc() < 0 => "truncation below the constant term".to_string(),
        Some(_) => format!("constant term {}, want 0", f.coefficient(0)),
    }
}

/// The Faber polynomial of degree k for a normalized principal series.
pub fn faber(f: &QSeries, k: u32) -> Result<FaberPolynomial> {
    if k == 0 {
        return Err(Error::NotPositive);
    }
    let (polys, _) = faber_tables(f, k)?;
    Ok(polys[k as usize].clone())
}

/// A base series together with its computed replicates f^(a). Faber
/// tables for the base are grown once and shared across calls.
#[derive(Clone, Debug)]
pub struct ReplicateFamily {
    base: QSeries,
    members: BTreeMap<u32, QSeries>,
    polys: Vec<FaberPolynomial>,
    images: Vec<QSeries>,
}

impl ReplicateFamily {
    pub fn new(base: QSeries) -> Result<Self> {
        if !base.is_normalized_principal() {
            return Err(Error::NotNormalizedPrincipal(describe_non_principal(&base)));
        }
        let polys = vec![FaberPolynomial { coeffs: vec![Rat::one()] }];
        let images = vec![QSeries::one(base.trunc())];
        Ok(ReplicateFamily { base, members: BTreeMap::new(), polys, images })
    }

    pub fn base(&self) -> &QSeries {
        &self.base
    }

    /// The stored replicate f^(a); member(1) is the base itself.
    pub fn member(&self, a: u32) -> Option<&QSeries> {
        if a == 1 {
            Some(&self.base)
        } else {
            self.members.get(&a)
        }
    }

    /// Computes the k-th replicate through order t and stores it.
    ///
    /// Solving a^(k)_j for j <= t reads [q^m] Q_k(f) for m <= kt and the
    /// a-th replicate at index d m / a <= k^2 t / a^2, so the base must be
    /// exact through k^2 t; members for proper divisors are ensured
    /// recursively at exactly the depth this requires. Consistency at
    /// every m not divisible by k is checked and any violation reported as
    /// failure of replicability at k.
    pub fn replicate(&mut self, k: u32, t: i64) -> Result<QSeries> {
        if k == 0 || t < 1 {
            return Err(Error::NotPositive);
        }
        if k == 1 {
            return self.base.truncate(t.min(self.base.trunc())).and_then(|s| {
                if self.base.trunc() < t {
                    Err(Error::InsufficientTruncation { needed: t, have: self.base.trunc() })
                } else {
                    Ok(s)
                }
            });
        }
        if let Some(m) = self.members.get(&k) {
            if m.trunc() >= t {
                return m.truncate(t);
            }
        }
        let kk = k as i64;
        let needed = kk * kk * t;
        if self.base.trunc() < needed {
            return Err(Error::InsufficientTruncation { needed, have: self.base.trunc() });
        }
        for a in 2..k {
            if k % a == 0 {
                let aa = a as i64;
                self.replicate(a, kk * kk * t / (aa * aa))?;
            }
        }
        extend_faber_tables(&self.base, &mut self.polys, &mut self.images, k)?;
        let qk = &self.images[k as usize];
        let mut out = QSeries::zero(t);
        out.set_coefficient(-1, Rat::one());
        for m in 1..=kk * t {
            let mut acc = qk.coefficient(m);
            for a in 1..k {
                if k % a == 0 && m % a as i64 == 0 {
                    let d = (k / a) as i64;
                    let idx = d * m / a as i64;
                    let c = if a == 1 {
                        self.base.coefficient(idx)
                    } else {
                        self.members[&a].coefficient(idx)
                    };
                    acc -= Rat::from_integer(BigInt::from(d)) * c;
                }
            }
            if m % kk == 0 {
                out.set_coefficient(m / kk, acc);
            } else if !acc.is_zero() {
                return Err(Error::NotReplicable { k, m });
            }
        }
        let keep = match self.members.get(&k) {
            Some(old) => old.trunc() < t,
            None => true,
        };
        if keep {
            self.members.insert(k, out.clone());
        }
        Ok(out)
    }

    /// The generalized Hecke sum over ad = k, 0 <= b < d of
    /// f^(a)((az + b)/d), collapsed to exponent arithmetic:
    /// q^-k + sum_{m>=1} q^m sum over ad = k with a | m of d a^(a)_{dm/a}.
    /// Requires every divisor replicate to be present already.
    pub fn generalized_hecke(&self, k: u32, t: i64) -> Result<QSeries> {
        if k == 0 || t < 1 {
            return Err(Error::NotPositive);
        }
        let kk = k as i64;
        let mut pairs = Vec::new();
        for a in 1..=k {
            if k % a != 0 {
                continue;
            }
            let member = self.member(a).ok_or(Error::IncompleteFamily(a))?;
            let d = (k / a) as i64;
            let aa = a as i64;
            let max_idx = d * (t / aa);
            if member.trunc() < max_idx {
                return Err(Error::InsufficientTruncation { needed: max_idx, have: member.trunc() });
            }
            pairs.push((aa, d, member.clone()));
        }
        let mut out = QSeries::zero(t.max(-kk));
        if -kk <= out.trunc() {
            out.set_coefficient(-kk, Rat::one());
        }
        for m in 1..=t {
            let mut acc = Rat::zero();
            for (a, d, member) in &pairs {
                if m % a == 0 {
                    acc += Rat::from_integer(BigInt::from(*d)) * member.coefficient(d * m / a);
                }
            }
            out.set_coefficient(m, acc);
        }
        Ok(out)
    }
}

/// Per-k outcome of a replicability scan.
#[derive(Clone, Debug)]
pub enum ReplicateStatus {
    Replicable(QSeries),
    /// The recursion is inconsistent at [q^m]: the replicate would need a
    /// coefficient at the fractional exponent m/k.
    Obstructed { m: i64 },
}

#[derive(Clone, Debug)]
pub struct ReplicationReport {
    pub per_k: Vec<(u32, ReplicateStatus)>,
}

impl ReplicationReport {
    pub fn all_replicable(&self) -> bool {
        self.per_k
            .iter()
            .all(|(_, s)| matches!(s, ReplicateStatus::Replicable(_)))
    }
}

/// Attempts every replicate through k_max, each to order t. Obstructions
/// are report entries; only structural problems (insufficient truncation,
/// a non-principal base) surface as errors.
pub fn is_replicable(f: &QSeries, k_max: u32, t: i64) -> Result<ReplicationReport> {
    let mut family = ReplicateFamily::new(f.clone())?;
    let mut per_k = Vec::new();
    for k in 1..=k_max {
        match family.replicate(k, t) {
            Ok(s) => per_k.push((k, ReplicateStatus::Replicable(s))),
            Err(Error::NotReplicable { m, .. }) => {
                per_k.push((k, ReplicateStatus::Obstructed { m }))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ReplicationReport { per_k })
}

/// Partial sum of the series at q = e^{2 pi i z}, Im(z) > 0, with the
/// crude tail bound |a_T| |q|^T / (1 - |q|).
pub fn evaluate(f: &QSeries, z: Complex64) -> Result<(Complex64, f64)> {
    if !(z.im > 0.0) {
        return Err(Error::NotInUpperHalfPlane);
    }
    let q = (Complex64::new(0.0, 2.0 * std::f64::consts::PI) * z).exp();
    let mut acc = Complex64::ZERO;
    for (n, c) in f.iter() {
        let cf = c.to_f64().unwrap_or(f64::NAN);
        acc += cf * q.powi(*n as i32);
    }
    let a_t = f
        .coeffs
        .get(&f.trunc)
        .and_then(|c| c.to_f64())
        .map(|c| c.abs())
        .unwrap_or(0.0);
    let qn = q.norm();
    let tail = a_t * qn.powi(f.trunc as i32) / (1.0 - qn);
    Ok((acc, tail))
}

/// Reads a table of principal moduli from CSV with header "class,n,value":
/// one coefficient per row, n >= -1, value an integer or "p/q". Each class
/// must come out in normalized principal form.
pub fn load_mckay_thompson(path: &Path) -> Result<BTreeMap<String, QSeries>> {
    let file = std::fs::File::open(path)?;
    let mut rows: BTreeMap<String, BTreeMap<i64, Rat>> = BTreeMap::new();
    let mut trunc: BTreeMap<String, i64> = BTreeMap::new();
    let mut saw_header = false;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let row = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            if line != "class,n,value" {
                return Err(Error::MalformedRow {
                    row,
                    reason: format!("expected header \"class,n,value\", got {line:?}"),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::MalformedRow {
                row,
                reason: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let class = fields[0].trim();
        if class.is_empty() {
            return Err(Error::MalformedRow { row, reason: "empty class label".to_string() });
        }
        let n: i64 = fields[1].trim().parse().map_err(|_| Error::MalformedRow {
            row,
            reason: format!("exponent {:?} is not an integer", fields[1]),
        })?;
        if n < -1 {
            return Err(Error::MalformedRow {
                row,
                reason: format!("exponent {n} below the principal part"),
            });
        }
        let value = Rat::from_str(fields[2].trim()).map_err(|_| Error::MalformedRow {
            row,
            reason: format!("value {:?} is not rational", fields[2]),
        })?;
        if n == -1 && !value.is_one() {
            return Err(Error::MalformedRow {
                row,
                reason: format!("leading coefficient {value}, want 1"),
            });
        }
        if n == 0 && !value.is_zero() {
            return Err(Error::MalformedRow {
                row,
                reason: format!("nonzero constant term {value}"),
            });
        }
        let class_rows = rows.entry(class.to_string()).or_default();
        if class_rows.contains_key(&n) {
            return Err(Error::MalformedRow {
                row,
                reason: format!("duplicate exponent {n} for class {class}"),
            });
        }
        class_rows.insert(n, value);
        let t = trunc.entry(class.to_string()).or_insert(i64::MIN);
        *t = (*t).max(n);
    }
    let mut out = BTreeMap::new();
    for (class, coeffs) in rows {
        if coeffs.get(&-1).map(|c| c.is_one()) != Some(true) {
            return Err(Error::NotNormalizedPrincipal(class));
        }
        let t = trunc[&class].max(0);
        let coeffs = coeffs.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        out.insert(class.clone(), QSeries { coeffs, trunc: t });
    }
    Ok(out)
}

/// Writes a table in the same CSV shape, classes and exponents ascending.
pub fn write_mckay_thompson(path: &Path, table: &BTreeMap<String, QSeries>) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "class,n,value")?;
    for (class, series) in table {
        for (n, c) in series.iter() {
            if c.is_integer() {
                writeln!(file, "{class},{n},{}", c.numer())?;
            } else {
                writeln!(file, "{class},{n},{c}")?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn int(n: i64) -> Rat {
        Rat::from_integer(BigInt::from(n))
    }

    /// (eta(z)/eta(2z))^24: principal modulus machinery for level 2.
    fn level2_eta(t: i64) -> QSeries {
        eta_quotient(&[(1, 24), (2, -24)], t).unwrap()
    }

    fn fixture_2a(t: i64) -> QSeries {
        let h = level2_eta(t + 2);
        let inv = QSeries::one(t + 2).div(&h).scale(&int(4096));
        let mut out = h.add(&inv).truncate(t).unwrap();
        out.set_coefficient(0, Rat::zero());
        out
    }

    fn fixture_2b(t: i64) -> QSeries {
        let mut out = level2_eta(t);
        out.set_coefficient(0, Rat::zero());
        out
    }

    fn fixture_3a(t: i64) -> QSeries {
        let g = eta_quotient(&[(1, 12), (3, -12)], t + 2).unwrap();
        let inv = QSeries::one(t + 2).div(&g).scale(&int(729));
        let mut out = g.add(&inv).truncate(t).unwrap();
        out.set_coefficient(0, Rat::zero());
        out
    }

    #[test]
    fn arithmetic_identities() {
        let f = QSeries::monomial(-1, Rat::one(), 5).add(&QSeries::monomial(1, Rat::one(), 5));
        assert_eq!(f.add(&QSeries::zero(5)), f);
        let qinv = QSeries::monomial(-1, Rat::one(), 3);
        let q = QSeries::monomial(1, Rat::one(), 3);
        let prod = qinv.mul(&q);
        assert_eq!(prod.coefficient(0), Rat::one());
        assert_eq!(prod.lowest(), Some(0));
        let sq = f.pow(2);
        assert_eq!(sq.coefficient(-2), Rat::one());
        assert_eq!(sq.coefficient(0), int(2));
        assert_eq!(sq.coefficient(2), Rat::one());
        // truncation bookkeeping: T=5 with principal part q^-1 gives
        // products exact through 4
        assert_eq!(sq.trunc(), 4);
        assert!(matches!(f.truncate(-3), Err(Error::TruncationUnderflow)));
        assert!(matches!(
            f.truncate(9),
            Err(Error::InsufficientTruncation { needed: 9, have: 5 })
        ));
    }

    #[test]
    fn euler_product_matches_the_pentagonal_number_theorem() {
        let t = 200i64;
        let e = euler_series(t);
        let mut expect = QSeries::zero(t);
        for k in 1..=30i64 {
            for (kk, sign) in [(k, (-1i64).pow(k as u32)), (-k, (-1i64).pow(k as u32))] {
                let g = kk * (3 * kk - 1) / 2;
                if g <= t {
                    expect.set_coefficient(g, int(sign));
                }
            }
        }
        expect.set_coefficient(0, Rat::one());
        assert_eq!(e, expect);
    }

    #[test]
    fn delta_has_the_ramanujan_coefficients() {
        let d = delta(8);
        for (n, tau) in [(1, 1), (2, -24), (3, 252), (4, -1472), (5, 4830), (6, -6048)] {
            assert_eq!(d.coefficient(n), int(tau));
        }
        assert_eq!(d.lowest(), Some(1));
    }

    #[test]
    fn eisenstein_series_satisfy_the_discriminant_identity() {
        let t = 80;
        let lhs = e4(t).pow(3).sub(&e6(t).pow(2));
        let rhs = delta(t).scale(&int(1728));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn j_series_has_the_classical_coefficients() {
        let j = j_series(4);
        let expect: [(i64, i64); 6] = [
            (-1, 1),
            (0, 744),
            (1, 196884),
            (2, 21493760),
            (3, 864299970),
            (4, 20245856256),
        ];
        for (n, c) in expect {
            assert_eq!(j.coefficient(n), int(c));
        }
        let jj = j_normalized(4);
        assert!(jj.is_normalized_principal());
        assert_eq!(jj, j.sub(&QSeries::monomial(0, int(744), 4)));
    }

    #[test]
    fn j_series_agrees_with_the_eta_quotient_path() {
        // j = (h + 256)^3 / h^2 for h = (eta(z)/eta(2z))^24
        let t = 50i64;
        let h = level2_eta(t + 4);
        let shifted = h.add(&QSeries::monomial(0, int(256), h.trunc()));
        let alt = shifted.pow(3).div(&h.pow(2));
        assert_eq!(alt.truncate(t).unwrap(), j_series(t));
    }

    #[test]
    fn faber_polynomials_are_the_unique_principal_normalizers() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let mut f = QSeries::monomial(-1, Rat::one(), 12);
            for n in 1..=12 {
                f.set_coefficient(n, int(rng.gen_range(-5..=5)));
            }
            let q1 = faber(&f, 1).unwrap();
            assert_eq!(q1.coeffs, vec![Rat::zero(), Rat::one()]);
            let q2 = faber(&f, 2).unwrap();
            let a1 = f.coefficient(1);
            assert_eq!(q2.coefficient(0), -(&a1 + &a1));
            assert_eq!(q2.coefficient(1), Rat::zero());
            assert_eq!(q2.coefficient(2), Rat::one());
            for k in 1..=8u32 {
                let image = faber(&f, k).unwrap().apply(&f);
                assert_eq!(image.coefficient(-(k as i64)), Rat::one());
                for n in (-(k as i64) + 1)..=0 {
                    assert_eq!(image.coefficient(n), Rat::zero(), "q^{n} must vanish");
                }
            }
        }
    }

    #[test]
    fn faber_applied_to_j_normalizes_exactly() {
        let jj = j_normalized(12);
        let q2 = faber(&jj, 2).unwrap();
        let image = q2.apply(&jj);
        assert_eq!(image.coefficient(-2), Rat::one());
        assert_eq!(image.coefficient(-1), Rat::zero());
        assert_eq!(image.coefficient(0), Rat::zero());
        assert_eq!(q2.coefficient(0), int(-2 * 196884));
        assert!(matches!(
            faber(&j_normalized(3), 5),
            Err(Error::InsufficientTruncation { needed: 5, have: 3 })
        ));
        assert!(matches!(faber(&e4(8), 2), Err(Error::NotNormalizedPrincipal(_))));
    }

    #[test]
    fn replicates_of_j_are_j() {
        let base = j_normalized(10 * 9);
        let mut family = ReplicateFamily::new(base).unwrap();
        for (k, t) in [(2u32, 10i64), (3, 10)] {
            let rep = family.replicate(k, t).unwrap();
            assert_eq!(rep, j_normalized(t));
        }
        let mut family = ReplicateFamily::new(j_normalized(36 * 5)).unwrap();
        assert_eq!(family.replicate(6, 5).unwrap(), j_normalized(5));
        assert_eq!(family.replicate(1, 5).unwrap(), j_normalized(5));
    }

    #[test]
    fn generalized_hecke_reproduces_the_faber_image() {
        let base = j_normalized(180);
        let mut family = ReplicateFamily::new(base.clone()).unwrap();
        for k in [2u32, 3] {
            family.replicate(k, 20).unwrap();
            let hecke = family.generalized_hecke(k, 20).unwrap();
            let image = faber(&base, k).unwrap().apply(&base).truncate(20).unwrap();
            assert_eq!(hecke, image);
            assert_eq!(hecke.coefficient(-(k as i64)), Rat::one());
        }
        assert_eq!(
            family.generalized_hecke(1, 30).unwrap(),
            base.truncate(30).unwrap()
        );
        assert!(matches!(
            family.generalized_hecke(5, 3),
            Err(Error::IncompleteFamily(5))
        ));
    }

    #[test]
    fn perturbed_series_is_not_replicable() {
        let mut f = QSeries::monomial(-1, Rat::one(), 40);
        f.set_coefficient(1, Rat::one());
        f.set_coefficient(2, Rat::one());
        let report = is_replicable(&f, 2, 10).unwrap();
        assert!(!report.all_replicable());
        match &report.per_k[1] {
            (2, ReplicateStatus::Obstructed { m }) => assert_eq!(*m, 3),
            other => panic!("expected obstruction at k=2, got {other:?}"),
        }
        let report = is_replicable(&j_normalized(16 * 6), 4, 6).unwrap();
        assert!(report.all_replicable());
    }

    #[test]
    fn moonshine_level2_fixture_replicates_to_j() {
        let f = fixture_2a(44);
        for (n, c) in [(-1, 1i64), (1, 4372), (2, 96256), (3, 1240002)] {
            assert_eq!(f.coefficient(n), int(c), "coefficient at q^{n}");
        }
        let mut family = ReplicateFamily::new(f).unwrap();
        let rep = family.replicate(2, 10).unwrap();
        assert_eq!(rep, j_normalized(10));
    }

    #[test]
    fn replication_functional_equation_holds_numerically() {
        let base = j_normalized(60);
        let mut family = ReplicateFamily::new(base.clone()).unwrap();
        let f2 = family.replicate(2, 15).unwrap();
        let q2_image = faber(&base, 2).unwrap().apply(&base);
        for z in [Complex64::new(0.3, 1.1), Complex64::new(-0.45, 1.3)] {
            let (lhs, _) = evaluate(&f2, 2.0 * z).unwrap();
            let (q2v, _) = evaluate(&q2_image, z).unwrap();
            let (t0, _) = evaluate(&base, z / 2.0).unwrap();
            let (t1, _) = evaluate(&base, (z + 1.0) / 2.0).unwrap();
            let rhs = q2v - t0 - t1;
            assert!((lhs - rhs).norm() < 1e-8 * (1.0 + lhs.norm()));
        }
    }

    #[test]
    fn evaluate_hits_the_elliptic_point_values() {
        let jj = j_normalized(50);
        let (at_i, _) = evaluate(&jj, Complex64::new(0.0, 1.0)).unwrap();
        assert!((at_i - Complex64::new(984.0, 0.0)).norm() < 1e-6);
        let rho = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let (at_rho, _) = evaluate(&jj, rho).unwrap();
        assert!((at_rho - Complex64::new(-744.0, 0.0)).norm() < 1e-6);
        assert!(matches!(
            evaluate(&jj, Complex64::new(0.3, 0.0)),
            Err(Error::NotInUpperHalfPlane)
        ));
    }

    #[test]
    fn evaluate_respects_products() {
        let f = e4(40);
        let g = delta(40);
        let z = Complex64::new(0.21, 1.05);
        let (fv, _) = evaluate(&f, z).unwrap();
        let (gv, _) = evaluate(&g, z).unwrap();
        let (fg, _) = evaluate(&f.mul(&g), z).unwrap();
        assert!((fv * gv - fg).norm() < 1e-9 * (1.0 + fg.norm()));
    }

    #[test]
    fn csv_ingestion_validates_each_row() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.csv");
        std::fs::write(&good, "class,n,value\n1A,-1,1\n1A,1,196884\n").unwrap();
        let table = load_mckay_thompson(&good).unwrap();
        assert_eq!(table.len(), 1);
        let series = &table["1A"];
        assert_eq!(series.coefficient(-1), Rat::one());
        assert_eq!(series.coefficient(1), int(196884));
        assert_eq!(series.trunc(), 1);
        assert!(series.is_normalized_principal());

        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        assert!(load_mckay_thompson(&empty).unwrap().is_empty());

        let header_only = dir.path().join("header.csv");
        std::fs::write(&header_only, "class,n,value\n").unwrap();
        assert!(load_mckay_thompson(&header_only).unwrap().is_empty());

        let bad_constant = dir.path().join("c.csv");
        std::fs::write(&bad_constant, "class,n,value\n2A,0,5\n").unwrap();
        match load_mckay_thompson(&bad_constant) {
            Err(Error::MalformedRow { row: 2, reason }) => {
                assert!(reason.contains("constant"), "{reason}")
            }
            other => panic!("expected rejection, got {other:?}"),
        }

        let bad_lead = dir.path().join("l.csv");
        std::fs::write(&bad_lead, "class,n,value\n2A,-1,3\n").unwrap();
        assert!(matches!(
            load_mckay_thompson(&bad_lead),
            Err(Error::MalformedRow { row: 2, .. })
        ));

        let missing_lead = dir.path().join("m.csv");
        std::fs::write(&missing_lead, "class,n,value\n2A,1,100\n").unwrap();
        assert!(matches!(
            load_mckay_thompson(&missing_lead),
            Err(Error::NotNormalizedPrincipal(c)) if c == "2A"
        ));

        let fractional = dir.path().join("f.csv");
        std::fs::write(&fractional, "class,n,value\n5a,-1,1\n5a,1,22/7\n").unwrap();
        let table = load_mckay_thompson(&fractional).unwrap();
        assert_eq!(table["5a"].coefficient(1), Rat::new(BigInt::from(22), BigInt::from(7)));

        let junk = dir.path().join("j.csv");
        std::fs::write(&junk, "class,n,value\n2A,-1,1\n2A,x,5\n").unwrap();
        assert!(matches!(
            load_mckay_thompson(&junk),
            Err(Error::MalformedRow { row: 3, .. })
        ));

        let dup = dir.path().join("d.csv");
        std::fs::write(&dup, "class,n,value\n2A,-1,1\n2A,1,5\n2A,1,5\n").unwrap();
        assert!(matches!(
            load_mckay_thompson(&dup),
            Err(Error::MalformedRow { row: 4, .. })
        ));

        let no_header = dir.path().join("h.csv");
        std::fs::write(&no_header, "2A,-1,1\n").unwrap();
        assert!(matches!(
            load_mckay_thompson(&no_header),
            Err(Error::MalformedRow { row: 1, .. })
        ));
    }

    #[test]
    fn shipped_moonshine_table_matches_the_eta_constructions() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mckay_thompson.csv");
        let table = load_mckay_thompson(&path).unwrap();
        let classes: Vec<&String> = table.keys().collect();
        assert_eq!(classes, ["1A", "2A", "2B", "3A"]);
        let t = 120i64;
        for series in table.values() {
            assert!(series.trunc() >= 208);
            assert!(series.is_normalized_principal());
        }
        assert_eq!(table["1A"].truncate(t).unwrap(), j_normalized(t));
        assert_eq!(table["2A"].truncate(t).unwrap(), fixture_2a(t));
        assert_eq!(table["2B"].truncate(t).unwrap(), fixture_2b(t));
        assert_eq!(table["3A"].truncate(t).unwrap(), fixture_3a(t));
    }

    #[test]
    fn shipped_moonshine_table_is_replicable() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mckay_thompson.csv");
        let table = load_mckay_thompson(&path).unwrap();
        for (class, series) in &table {
            let report = is_replicable(series, 4, 13).unwrap();
            assert!(report.all_replicable(), "class {class}");
        }
    }

    #[test]
    #[ignore = "regenerates the shipped moonshine table"]
    fn regenerate_moonshine_table() {
        let t = 220i64;
        let mut table = BTreeMap::new();
        table.insert("1A".to_string(), j_normalized(t));
        table.insert("2A".to_string(), fixture_2a(t));
        table.insert("2B".to_string(), fixture_2b(t));
        table.insert("3A".to_string(), fixture_3a(t));
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mckay_thompson.csv");
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        write_mckay_thompson(&path, &table).unwrap();
        let back = load_mckay_thompson(&path).unwrap();
        assert_eq!(back, table);
    }
}
