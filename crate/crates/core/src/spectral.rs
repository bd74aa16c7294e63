//! The GL2-system at a fixed invertible fiber.
//!
//! Two index spaces carry the operators. Vertex mode works on l^2 of the
//! projective classes (the big picture); coset mode works on l^2 of the
//! integral cosets Gamma1 \ M2+(Z), one HNF representative per coset with
//! arbitrary content. The primitivization map sends a coset to its class.
//!
//! The Hamiltonian multiplies by log det: log of the hyperdistance to nu_1
//! in vertex mode, log of the integral determinant in coset mode. Spheres
//! around nu_1 are its eigenspaces. Hecke operators sum over spheres;
//! projections cut to spheres, threads, snakes; group elements act by
//! permutation unitaries.
//!
//! Kernels of finite support represent compactly supported functions of
//! the group variable at an invertible fiber. Such a function, invariant
//! under Gamma1 on both sides, is a function on integral double cosets,
//! which elementary divisors (d1, d2), d1 | d2, classify completely; that
//! pair is the kernel key. `represent` turns a kernel into an operator in
//! coset mode, `convolve` composes kernels, and `time_evolve` scales each
//! key by det^{it} = exp(i t log(d1 d2)). The conjugation law
//! e^{itH} pi(f) e^{-itH} = pi(sigma_t f) is then exact up to float
//! rounding, because the phases cancel coset by coset.
//!
//! Partition sums truncate the Gibbs trace of e^{-beta H}: determinant n
//! contributes sigma_1(n) cosets or psi(n) = |sphere(nu_1, n)| classes, so
//! the truncations approach zeta(beta) zeta(beta-1) in coset mode and
//! zeta(beta) zeta(beta-1) / zeta(2 beta) in vertex mode, converging only
//! for beta > 2.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::arith::{content, hnf_reduce, ln_big, IntMat2};
use crate::congruence::{act, snake, thread, GroupElement};
use crate::error::{Error, Result};
use crate::picture::{primitive_hnfs, sphere, vertex_of_int, Vertex};

/// An integral coset Gamma1 m in M2+(Z), held as its HNF representative.
/// Unlike a `Vertex` the content is kept: [[2,0],[0,2]] and the identity
/// are distinct cosets of the same projective class.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LatticeCoset {
    rep: IntMat2,
}

impl LatticeCoset {
    pub fn new(m: &IntMat2) -> Result<Self> {
        Ok(LatticeCoset { rep: hnf_reduce(m)? })
    }

    pub fn identity() -> Self {
        LatticeCoset { rep: IntMat2::identity() }
    }

    pub fn rep(&self) -> &IntMat2 {
        &self.rep
    }

    pub fn det(&self) -> BigInt {
        self.rep.det()
    }

    /// The projective class of the coset.
    pub fn primitivize(&self) -> Vertex {
        vertex_of_int(&self.rep).expect("coset representatives are nondegenerate")
    }
}

impl Ord for LatticeCoset {
    fn cmp(&self, other: &Self) -> Ordering {
        self.det()
            .cmp(&other.det())
            .then_with(|| self.rep.a.cmp(&other.rep.a))
            .then_with(|| self.rep.b.cmp(&other.rep.b))
    }
}

impl PartialOrd for LatticeCoset {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for LatticeCoset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.rep.fmt(f)
    }
}

/// A finitely supported vector with complex amplitudes, indexed by
/// vertices or by cosets. Exact zeros are dropped.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StateVector<K: Ord + Clone> {
    amps: BTreeMap<K, Complex64>,
}

impl<K: Ord + Clone> StateVector<K> {
    pub fn zero() -> Self {
        StateVector { amps: BTreeMap::new() }
    }

    /// The basis vector at k.
    pub fn delta(k: K) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(k, Complex64::new(1.0, 0.0));
        StateVector { amps }
    }

    pub fn add(&mut self, k: K, z: Complex64) {
        use std::collections::btree_map::Entry;
        match self.amps.entry(k) {
            Entry::Vacant(e) => {
                if z.re != 0.0 || z.im != 0.0 {
                    e.insert(z);
                }
            }
            Entry::Occupied(mut e) => {
                let w = *e.get() + z;
                if w.re == 0.0 && w.im == 0.0 {
                    e.remove();
                } else {
                    e.insert(w);
                }
            }
        }
    }

    pub fn amplitude(&self, k: &K) -> Complex64 {
        self.amps.get(k).copied().unwrap_or(Complex64::ZERO)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &Complex64)> {
        self.amps.iter()
    }

    pub fn support_len(&self) -> usize {
        self.amps.len()
    }

    /// Pointwise map of amplitudes; exact zeros are dropped.
    pub fn map(&self, mut f: impl FnMut(&K, Complex64) -> Complex64) -> Self {
        let mut amps = BTreeMap::new();
        for (k, z) in &self.amps {
            let w = f(k, *z);
            if w.re != 0.0 || w.im != 0.0 {
                amps.insert(k.clone(), w);
            }
        }
        StateVector { amps }
    }

    /// Hermitian inner product, conjugate-linear in self.
    pub fn inner(&self, other: &Self) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for (k, z) in &self.amps {
            acc += z.conj() * other.amplitude(k);
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.values().map(|z| z.norm_sqr()).sum()
    }

    /// Max |amplitude| difference; a tolerance-friendly distance.
    pub fn distance(&self, other: &Self) -> f64 {
        let mut d = 0.0f64;
        for (k, z) in &self.amps {
            d = d.max((z - other.amplitude(k)).norm());
        }
        for (k, z) in &other.amps {
            d = d.max((z - self.amplitude(k)).norm());
        }
        d
    }
}

/// The Hamiltonian eigenvalue at a vertex: log of the hyperdistance to
/// nu_1, which is log det of the primitive representative.
pub fn hamiltonian_vertex(v: &Vertex) -> f64 {
    ln_big(&v.det())
}

/// The Hamiltonian eigenvalue at a coset: log of the integral determinant.
pub fn hamiltonian_coset(c: &LatticeCoset) -> f64 {
    ln_big(&c.det())
}

/// H applied to a vertex-mode state: multiply each amplitude by the log of
/// the determinant.
pub fn hamiltonian_apply(xi: &StateVector<Vertex>) -> StateVector<Vertex> {
    xi.map(|v, z| z * hamiltonian_vertex(v))
}

/// The Hecke operator T_N in vertex mode: sum the amplitude of each vertex
/// over the sphere of radius N around it. Exact on finite supports.
pub fn hecke_apply(xi: &StateVector<Vertex>, n: u64) -> Result<StateVector<Vertex>> {
    let mut out = StateVector::zero();
    for (v, z) in xi.iter() {
        for w in sphere(v, n)? {
            out.add(w, *z);
        }
    }
    Ok(out)
}

/// The ranges available to `project`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    Sphere(u64),
    Thread(u64),
    Snake(u64),
}

/// Projection onto the subspace spanned by a sphere around nu_1, a thread,
/// or a snake: amplitudes outside the set are dropped.
pub fn project(xi: &StateVector<Vertex>, kind: Projection) -> Result<StateVector<Vertex>> {
    let keep = match kind {
        Projection::Sphere(n) => sphere(&Vertex::one(), n)?,
        Projection::Thread(n) => thread(n)?,
        Projection::Snake(n) => snake(n)?,
    };
    Ok(xi.map(|v, z| if keep.contains(v) { z } else { Complex64::ZERO }))
}

/// The permutation unitary of a group element: (U_g xi)(v) = xi(g^-1 v),
/// i.e. the amplitude at v moves to g v.
pub fn group_unitary(g: &GroupElement, xi: &StateVector<Vertex>) -> StateVector<Vertex> {
    let mut out = StateVector::zero();
    for (v, z) in xi.iter() {
        out.add(act(g, v), *z);
    }
    out
}

/// A finitely supported kernel: a function of the group variable at an
/// invertible fiber, invariant under Gamma1 on both sides, hence a
/// function on integral double cosets. The elementary divisor pair
/// (d1, d2) with d1 | d2 (d1 the content, d1 d2 the determinant) is a
/// complete invariant of the double coset and serves as the key.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Kernel {
    support: BTreeMap<(BigInt, BigInt), Complex64>,
}

/// The elementary divisors of a nondegenerate integer matrix.
pub fn elementary_divisors(m: &IntMat2) -> Result<(BigInt, BigInt)> {
    let det = m.det();
    if !det.is_positive() {
        return Err(Error::NonPositiveDeterminant);
    }
    let c = content(m)?;
    let d2 = det / &c;
    Ok((c, d2))
}

impl Kernel {
    pub fn zero() -> Self {
        Kernel { support: BTreeMap::new() }
    }

    /// The delta kernel at the double coset of m.
    pub fn delta(m: &IntMat2) -> Result<Self> {
        let mut k = Kernel::zero();
        k.add(m, Complex64::new(1.0, 0.0))?;
        Ok(k)
    }

    /// Adds z at the double coset of m.
    pub fn add(&mut self, m: &IntMat2, z: Complex64) -> Result<()> {
        let key = elementary_divisors(m)?;
        let entry = self.support.entry(key).or_insert(Complex64::ZERO);
        *entry += z;
        Ok(())
    }

    /// The Hecke kernel T_N: the indicator of all integral double cosets
    /// of determinant N.
    pub fn hecke(n: u64) -> Result<Self> {
        let mut k = Kernel::zero();
        for d1 in crate::arith::divisors(n)? {
            if n % (d1 * d1) == 0 {
                k.support.insert(
                    (BigInt::from(d1), BigInt::from(n / d1)),
                    Complex64::new(1.0, 0.0),
                );
            }
        }
        Ok(k)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(BigInt, BigInt), &Complex64)> {
        self.support.iter()
    }

    pub fn support_len(&self) -> usize {
        self.support.len()
    }

    /// The kernel evaluated at a rational matrix: zero unless the matrix
    /// is integral, in which case the double coset key decides.
    pub fn hat(&self, a: &BigInt, b: &BigInt, c: &BigInt, d: &BigInt, denom: &BigInt) -> Complex64 {
        let divisible = (a % denom).is_zero()
            && (b % denom).is_zero()
            && (c % denom).is_zero()
            && (d % denom).is_zero();
        if !divisible {
            return Complex64::ZERO;
        }
        let m = IntMat2 { a: a / denom, b: b / denom, c: c / denom, d: d / denom };
        if m.is_zero() || !m.det().is_positive() {
            return Complex64::ZERO;
        }
        let key = elementary_divisors(&m).expect("checked nondegenerate");
        self.support.get(&key).copied().unwrap_or(Complex64::ZERO)
    }

    /// Time evolution sigma_t: scale the amplitude at each double coset by
    /// det^{it} = exp(i t log(d1 d2)).
    pub fn time_evolve(&self, t: f64) -> Self {
        let support = self
            .support
            .iter()
            .map(|((d1, d2), z)| {
                let phase = Complex64::from_polar(1.0, t * ln_big(&(d1 * d2)));
                ((d1.clone(), d2.clone()), z * phase)
            })
            .collect();
        Kernel { support }
    }

    /// Convolution: the kernel of the composed operator, so that
    /// represent(f1 * f2) = represent(f1) o represent(f2). The value at a
    /// double coset c is sum over cosets s of hat(rep_c s^-1) f2(s), a
    /// class function of c; candidate keys range over the elementary
    /// divisor pairs of each determinant product.
    pub fn convolve(&self, other: &Kernel) -> Result<Kernel> {
        let mut candidates = std::collections::BTreeSet::new();
        for (a1, a2) in self.support.keys() {
            for (b1, b2) in other.support.keys() {
                let det = a1 * a2 * b1 * b2;
                for e1 in candidate_contents(&det)? {
                    let e2 = &det / &e1;
                    candidates.insert((e1, e2));
                }
            }
        }
        let mut out = Kernel::zero();
        for (e1, e2) in candidates {
            let rep = IntMat2 {
                a: e1.clone(),
                b: BigInt::zero(),
                c: BigInt::zero(),
                d: e2.clone(),
            };
            let mut total = Complex64::ZERO;
            for ((b1, b2), fz2) in &other.support {
                total += self.pair_sum(&rep, (b1, b2), *fz2);
            }
            if total.re != 0.0 || total.im != 0.0 {
                out.support.insert((e1, e2), total);
            }
        }
        Ok(out)
    }

    /// Sum over the left cosets s inside the double coset (b1, b2) of
    /// hat(rep s^-1) * fz2.
    fn pair_sum(&self, rep: &IntMat2, b: (&BigInt, &BigInt), fz2: Complex64) -> Complex64 {
        let (b1, b2) = b;
        let ratio = (b2 / b1)
            .to_u64()
            .expect("kernel support stays within machine-size determinants");
        let mut acc = Complex64::ZERO;
        for h in primitive_hnfs(ratio).expect("positive ratio") {
            let s = IntMat2 {
                a: b1 * &h.a,
                b: b1 * &h.b,
                c: BigInt::zero(),
                d: b1 * &h.d,
            };
            // rep * s^-1 = rep * adj(s) / det(s)
            let adj = s.adjugate();
            let num = rep.mul(&adj);
            let den = s.det();
            acc += self.hat(&num.a, &num.b, &num.c, &num.d, &den) * fz2;
        }
        acc
    }
}

/// Divisors e of det with e^2 | det, the possible contents of a matrix of
/// that determinant.
fn candidate_contents(det: &BigInt) -> Result<Vec<BigInt>> {
    let n = det
        .to_u64()
        .ok_or_else(|| Error::FactorOverflow(det.to_string()))?;
    Ok(crate::arith::divisors(n)?
        .into_iter()
        .filter(|e| n % (e * e) == 0)
        .map(BigInt::from)
        .collect())
}

/// The represented operator of a kernel in coset mode:
/// (pi(f) xi)(g) = sum over cosets h of f(g h^-1) xi(h). The sum is
/// organized over the coset representatives of each double coset in the
/// kernel support: m = d1 * (primitive HNF of determinant d2/d1).
pub fn represent(f: &Kernel, xi: &StateVector<LatticeCoset>) -> Result<StateVector<LatticeCoset>> {
    let mut out = StateVector::zero();
    for ((d1, d2), fz) in f.iter() {
        let ratio = (d2 / d1)
            .to_u64()
            .ok_or_else(|| Error::FactorOverflow(d2.to_string()))?;
        for h in primitive_hnfs(ratio)? {
            let m = IntMat2 {
                a: d1 * &h.a,
                b: d1 * &h.b,
                c: BigInt::zero(),
                d: d1 * &h.d,
            };
            for (coset, xz) in xi.iter() {
                let prod = m.mul(coset.rep());
                out.add(LatticeCoset::new(&prod)?, fz * xz);
            }
        }
    }
    Ok(out)
}

/// The diagonal phase unitary e^{itH} in coset mode.
pub fn phase_unitary(t: f64, xi: &StateVector<LatticeCoset>) -> StateVector<LatticeCoset> {
    xi.map(|c, z| z * Complex64::from_polar(1.0, t * hamiltonian_coset(c)))
}

/// Index spaces for the partition sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralMode {
    Coset,
    Vertex,
}

impl fmt::Display for SpectralMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralMode::Coset => write!(f, "coset"),
            SpectralMode::Vertex => write!(f, "vertex"),
        }
    }
}

/// sigma_1(n) for all n <= x.
fn sigma1_sieve(x: u64) -> Vec<u64> {
    let x = x as usize;
    let mut s = vec![0u64; x + 1];
    for d in 1..=x {
        for m in (d..=x).step_by(d) {
            s[m] += d as u64;
        }
    }
    s
}

/// Dedekind psi(n) for all n <= x.
fn psi_sieve(x: u64) -> Vec<u64> {
    let x = x as usize;
    let mut psi: Vec<u64> = (0..=x as u64).collect();
    let mut is_comp = vec![false; x + 1];
    for p in 2..=x {
        if is_comp[p] {
            continue;
        }
        for m in (p..=x).step_by(p) {
            if m > p {
                is_comp[m] = true;
            }
            psi[m] = psi[m] / p as u64 * (p as u64 + 1);
        }
    }
    psi
}

/// Pairwise (cascade) summation for reproducible floating-point totals.
fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 2.0) {
        return Err(Error::DivergentRange(beta));
    }
    Ok(())
}

/// The truncated partition function Tr e^{-beta H} over determinants up to
/// X: sum of sigma_1(n) n^-beta in coset mode, psi(n) n^-beta in vertex
/// mode. Requires beta > 2, the convergent range.
pub fn partition_function(beta: f64, x: u64, mode: SpectralMode) -> Result<f64> {
    check_beta(beta)?;
    if x == 0 {
        return Err(Error::NotPositive);
    }
    let counts = match mode {
        SpectralMode::Coset => sigma1_sieve(x),
        SpectralMode::Vertex => psi_sieve(x),
    };
    let terms: Vec<f64> = (1..=x)
        .map(|n| counts[n as usize] as f64 * (n as f64).powf(-beta))
        .collect();
    Ok(pairwise_sum(&terms))
}

/// The truncated Gibbs expectation of an observable on HNF triples
/// (a, b, d): sum of obs * e^{-beta H} over the index space, divided by
/// the same truncation of the partition function. Coset mode runs over
/// all HNF matrices of determinant <= X, vertex mode over primitive ones.
pub fn gibbs_expectation(
    mut obs: impl FnMut(u64, u64, u64) -> f64,
    beta: f64,
    x: u64,
    mode: SpectralMode,
) -> Result<f64> {
    check_beta(beta)?;
    if x == 0 {
        return Err(Error::NotPositive);
    }
    let mut num_terms: Vec<f64> = Vec::with_capacity(x as usize);
    let mut den_terms: Vec<f64> = Vec::with_capacity(x as usize);
    for n in 1..=x {
        let weight = (n as f64).powf(-beta);
        let mut total = 0.0f64;
        let mut count = 0u64;
        for a in crate::arith::divisors(n)? {
            let d = n / a;
            for b in 0..d {
                if mode == SpectralMode::Vertex && a.gcd(&b).gcd(&d) != 1 {
                    continue;
                }
                total += obs(a, b, d);
                count += 1;
            }
        }
        num_terms.push(total * weight);
        den_terms.push(count as f64 * weight);
    }
    Ok(pairwise_sum(&num_terms) / pairwise_sum(&den_terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{dedekind_psi, parse_int_mat};
    use crate::congruence::{atkin_lehner_rep, fricke, random_element};
    use crate::picture::{ball, hnfs};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const ZETA2: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
    const ZETA3: f64 = 1.2020569031595942854;
    const ZETA4: f64 = 1.0823232337111381916;
    const ZETA6: f64 = 1.0173430619844491397;
    const ZETA8: f64 = 1.0040773561979443394;

    fn nu(n: u64) -> Vertex {
        Vertex::nu(n).unwrap()
    }

    fn coset(s: &str) -> LatticeCoset {
        LatticeCoset::new(&parse_int_mat(s).unwrap()).unwrap()
    }

    fn random_vertex_state(rng: &mut ChaCha8Rng, pool: &[Vertex]) -> StateVector<Vertex> {
        let mut xi = StateVector::zero();
        for _ in 0..6 {
            let v = pool[rng.gen_range(0..pool.len())].clone();
            xi.add(v, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        }
        xi
    }

    #[test]
    fn hamiltonian_distinguishes_modes() {
        assert_eq!(hamiltonian_vertex(&Vertex::one()), 0.0);
        assert!((hamiltonian_vertex(&nu(6)) - 6.0f64.ln()).abs() < 1e-15);
        let c = coset("2,0;0,2");
        assert!((hamiltonian_coset(&c) - 4.0f64.ln()).abs() < 1e-15);
        assert_eq!(c.primitivize(), Vertex::one());
    }

    #[test]
    fn hecke_on_the_base_point_is_the_sphere_indicator() {
        let xi = StateVector::delta(Vertex::one());
        let t2 = hecke_apply(&xi, 2).unwrap();
        assert_eq!(t2.support_len(), 3);
        for w in sphere(&Vertex::one(), 2).unwrap() {
            assert_eq!(t2.amplitude(&w), Complex64::new(1.0, 0.0));
        }
        assert_eq!(hecke_apply(&xi, 1).unwrap(), xi);
    }

    #[test]
    fn coprime_hecke_operators_compose() {
        let xi = StateVector::delta(Vertex::one());
        let t2t3 = hecke_apply(&hecke_apply(&xi, 3).unwrap(), 2).unwrap();
        let t3t2 = hecke_apply(&hecke_apply(&xi, 2).unwrap(), 3).unwrap();
        let t6 = hecke_apply(&xi, 6).unwrap();
        assert_eq!(t2t3, t6);
        assert_eq!(t3t2, t6);
    }

    #[test]
    fn hecke_is_symmetric() {
        let pool: Vec<Vertex> = ball(&Vertex::one(), 10).unwrap().into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [2u64, 3, 4, 6] {
            for _ in 0..10 {
                let xi = random_vertex_state(&mut rng, &pool);
                let eta = random_vertex_state(&mut rng, &pool);
                let lhs = hecke_apply(&xi, n).unwrap().inner(&eta);
                let rhs = xi.inner(&hecke_apply(&eta, n).unwrap());
                assert!((lhs - rhs).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn spheres_are_hamiltonian_eigenspaces_exactly() {
        let pool: Vec<Vertex> = ball(&Vertex::one(), 12).unwrap().into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [2u64, 4, 6, 9, 12] {
            let lambda = ln_big(&BigInt::from(n));
            for _ in 0..5 {
                let xi = random_vertex_state(&mut rng, &pool);
                let p = project(&xi, Projection::Sphere(n)).unwrap();
                let hp = hamiltonian_apply(&p);
                let scaled = p.map(|_, z| z * lambda);
                assert_eq!(hp, scaled, "bitwise equal: both sides multiply by ln {n}");
            }
        }
    }

    #[test]
    fn projections_are_idempotent_restrictions() {
        let xi = StateVector::delta(Vertex::one());
        assert_eq!(project(&xi, Projection::Sphere(1)).unwrap(), xi);

        let mut uniform = StateVector::zero();
        for v in ball(&Vertex::one(), 6).unwrap() {
            uniform.add(v, Complex64::new(1.0, 0.0));
        }
        let pt = project(&uniform, Projection::Thread(6)).unwrap();
        assert_eq!(pt.support_len(), 4);

        let pool: Vec<Vertex> = ball(&Vertex::one(), 10).unwrap().into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for kind in [Projection::Sphere(4), Projection::Thread(12), Projection::Snake(2)] {
            for _ in 0..5 {
                let xi = random_vertex_state(&mut rng, &pool);
                let once = project(&xi, kind).unwrap();
                assert_eq!(project(&once, kind).unwrap(), once);
            }
        }
    }

    #[test]
    fn group_unitaries_commute_with_thread_and_snake_projections() {
        let pool: Vec<Vertex> = ball(&Vertex::one(), 12).unwrap().into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for n in [2u64, 6, 12] {
            for seed in 0..8 {
                let g = random_element(n, seed, 4);
                let xi = random_vertex_state(&mut rng, &pool);
                assert_eq!(group_unitary(&g, &StateVector::delta(Vertex::one())), StateVector::delta(Vertex::one()));
                for kind in [Projection::Thread(n), Projection::Snake(n)] {
                    let up = group_unitary(&g, &project(&xi, kind).unwrap());
                    let pu = project(&group_unitary(&g, &xi), kind).unwrap();
                    assert!(up.distance(&pu) < 1e-15);
                }
                assert!((group_unitary(&g, &xi).norm_sq() - xi.norm_sq()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn atkin_lehner_unitaries_preserve_the_thread_subspace() {
        for n in [4u64, 6, 12] {
            for e in crate::arith::exact_divisors(n).unwrap() {
                let w = atkin_lehner_rep(n, e).unwrap();
                let mut xi = StateVector::zero();
                for (i, t) in thread(n).unwrap().into_iter().enumerate() {
                    xi.add(t, Complex64::new(1.0 + i as f64, 0.5));
                }
                let image = group_unitary(&w, &xi);
                let projected = project(&image, Projection::Thread(n)).unwrap();
                assert_eq!(image, projected, "image stays inside the thread subspace");
            }
            let w = fricke(n);
            let moved = group_unitary(&w, &StateVector::delta(Vertex::one()));
            assert_eq!(moved, StateVector::delta(nu(n)));
        }
    }

    #[test]
    fn represent_identity_and_sphere_kernels() {
        let id = Kernel::delta(&IntMat2::identity()).unwrap();
        let mut xi = StateVector::zero();
        xi.add(coset("1,0;0,1"), Complex64::new(0.3, -0.1));
        xi.add(coset("2,1;0,3"), Complex64::new(-1.0, 2.0));
        assert!(represent(&id, &xi).unwrap().distance(&xi) < 1e-15);

        let f = Kernel::delta(&parse_int_mat("2,0;0,1").unwrap()).unwrap();
        let out = represent(&f, &StateVector::delta(LatticeCoset::identity())).unwrap();
        assert_eq!(out.support_len(), 3);
        for (c, z) in out.iter() {
            assert_eq!(c.det(), BigInt::from(2));
            assert_eq!(*z, Complex64::new(1.0, 0.0));
        }
    }

    fn random_kernel(rng: &mut ChaCha8Rng) -> Kernel {
        let mats = ["1,0;0,1", "2,0;0,1", "2,0;0,2", "1,1;0,4", "3,0;0,1", "6,2;0,2"];
        let mut f = Kernel::zero();
        for _ in 0..4 {
            let m = parse_int_mat(mats[rng.gen_range(0..mats.len())]).unwrap();
            f.add(&m, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .unwrap();
        }
        f
    }

    fn random_coset_state(rng: &mut ChaCha8Rng) -> StateVector<LatticeCoset> {
        let mats = ["1,0;0,1", "1,0;0,2", "2,0;0,1", "1,1;0,2", "2,1;0,3", "4,2;0,2"];
        let mut xi = StateVector::zero();
        for _ in 0..4 {
            let m = parse_int_mat(mats[rng.gen_range(0..mats.len())]).unwrap();
            xi.add(
                LatticeCoset::new(&m).unwrap(),
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            );
        }
        xi
    }

    #[test]
    fn convolution_matches_operator_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..10 {
            let f1 = random_kernel(&mut rng);
            let f2 = random_kernel(&mut rng);
            let xi = random_coset_state(&mut rng);
            let composed = represent(&f1, &represent(&f2, &xi).unwrap()).unwrap();
            let direct = represent(&f1.convolve(&f2).unwrap(), &xi).unwrap();
            assert!(composed.distance(&direct) < 1e-12);
        }
    }

    #[test]
    fn coprime_hecke_kernels_convolve_to_the_product_level() {
        let t2 = Kernel::hecke(2).unwrap();
        let t3 = Kernel::hecke(3).unwrap();
        let t6 = Kernel::hecke(6).unwrap();
        let conv = t2.convolve(&t3).unwrap();
        assert_eq!(conv.support_len(), t6.support_len());
        for (key, z) in conv.iter() {
            let expect = t6.support.get(key).copied().unwrap_or(Complex64::ZERO);
            assert!((z - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn time_evolution_is_exactly_conjugation_by_the_phase_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for t in [0.5f64, 1.0, std::f64::consts::PI] {
            for _ in 0..8 {
                let f = random_kernel(&mut rng);
                let xi = random_coset_state(&mut rng);
                let lhs = represent(&f.time_evolve(t), &xi).unwrap();
                let rhs = phase_unitary(t, &represent(&f, &phase_unitary(-t, &xi)).unwrap());
                assert!(lhs.distance(&rhs) < 1e-12);
            }
        }
        let f = random_kernel(&mut rng);
        assert_eq!(f.time_evolve(0.0), f);
    }

    #[test]
    fn partition_sums_hit_their_zeta_targets() {
        let x = 10_000u64;
        let coset3 = partition_function(3.0, x, SpectralMode::Coset).unwrap();
        assert!((coset3 - ZETA3 * ZETA2).abs() / (ZETA3 * ZETA2) < 1e-3);
        let coset4 = partition_function(4.0, x, SpectralMode::Coset).unwrap();
        assert!((coset4 - ZETA4 * ZETA3).abs() / (ZETA4 * ZETA3) < 1e-3);
        let vertex3 = partition_function(3.0, x, SpectralMode::Vertex).unwrap();
        let target3 = ZETA3 * ZETA2 / ZETA6;
        assert!((vertex3 - target3).abs() / target3 < 1e-3);
        let vertex4 = partition_function(4.0, x, SpectralMode::Vertex).unwrap();
        let target4 = ZETA4 * ZETA3 / ZETA8;
        assert!((vertex4 - target4).abs() / target4 < 1e-3);
    }

    #[test]
    fn partition_sums_are_monotone_and_guarded() {
        for mode in [SpectralMode::Coset, SpectralMode::Vertex] {
            assert_eq!(partition_function(3.0, 1, mode).unwrap(), 1.0);
            let mut prev = 0.0;
            for x in [10u64, 100, 1000] {
                let z = partition_function(3.0, x, mode).unwrap();
                assert!(z > prev);
                prev = z;
            }
        }
        assert!(matches!(
            partition_function(2.0, 10, SpectralMode::Coset),
            Err(Error::DivergentRange(b)) if b == 2.0
        ));
        assert!(matches!(
            partition_function(1.5, 10, SpectralMode::Vertex),
            Err(Error::DivergentRange(_))
        ));
    }

    #[test]
    fn sieves_match_direct_arithmetic() {
        let sig = sigma1_sieve(200);
        let psi = psi_sieve(200);
        for n in 1..=200u64 {
            let direct: u64 = crate::arith::divisors(n).unwrap().iter().sum();
            assert_eq!(sig[n as usize], direct);
            assert_eq!(psi[n as usize], dedekind_psi(n).unwrap());
        }
    }

    #[test]
    fn gibbs_expectations() {
        assert!((gibbs_expectation(|_, _, _| 1.0, 3.0, 200, SpectralMode::Coset).unwrap() - 1.0).abs() < 1e-15);
        assert!((gibbs_expectation(|_, _, _| 1.0, 3.0, 200, SpectralMode::Vertex).unwrap() - 1.0).abs() < 1e-15);
        // det observable: sum sigma1(n) n^{1-beta} / sum sigma1(n) n^{-beta}
        let det_obs = |a: u64, _b: u64, d: u64| (a * d) as f64;
        let got = gibbs_expectation(det_obs, 4.0, 10_000, SpectralMode::Coset).unwrap();
        let target = ZETA3 * ZETA2 / (ZETA4 * ZETA3);
        assert!((got - target).abs() / target < 1e-3);
        // beta large: the ground state dominates
        let ground = gibbs_expectation(
            |a, b, d| if a == 1 && b == 0 && d == 1 { 1.0 } else { 0.0 },
            12.0,
            500,
            SpectralMode::Coset,
        )
        .unwrap();
        assert!(ground > 0.999);
        assert!(matches!(
            gibbs_expectation(|_, _, _| 1.0, 2.0, 10, SpectralMode::Coset),
            Err(Error::DivergentRange(_))
        ));
    }

    #[test]
    fn coset_space_counts_by_determinant() {
        // sigma_1(n) cosets of determinant n, psi(n) primitive ones
        for n in [2u64, 6, 12] {
            assert_eq!(hnfs(n).unwrap().len() as u64, crate::arith::divisors(n).unwrap().iter().sum::<u64>());
            assert_eq!(primitive_hnfs(n).unwrap().len() as u64, dedekind_psi(n).unwrap());
        }
    }
}
