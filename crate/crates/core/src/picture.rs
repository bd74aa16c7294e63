//! Conway's big picture: the graph of projective classes of lattices
//! commensurable with Z^2.
//!
//! A vertex is the class of a lattice L < Q^2 up to Q* scaling, encoded by
//! the unique primitive HNF matrix whose rows span a representative. Two
//! classes u, v sit at hyperdistance delta(u, v) = delta1(g h^-1) where g, h
//! are any matrix representatives; delta(u, v) = N means N*u' and N*v' are
//! index-N sublattices of each other for suitable representatives. Edges
//! join classes at prime hyperdistance; the component of each prime p is a
//! (p+1)-valent tree T_p, and the whole picture factors as the product of
//! the T_p with d = log delta as the path metric.
//!
//! Everything here is local and exact: spheres come from direct enumeration
//! of primitive HNF matrices of a given determinant, geodesics from walking
//! one tree at a time in ascending prime order, and nothing is ever stored
//! globally. `FiniteLevelRho` carries the divisibility data of a Q-lattice
//! at a declared finite level and refuses questions it cannot decide.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde_json::json;

use crate::arith::{
    alpha_of, content, divisors, factor, hnf_reduce, is_prime, is_prime_u64, parse_rat_mat,
    IntMat2, RatMat2,
};
use crate::error::{Error, Result};

/// A vertex of the big picture: a projective class of commensurable
/// lattices, held as its primitive HNF representative.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Vertex {
    rep: IntMat2,
}

impl Vertex {
    /// The base class nu_1 of Z^2 itself.
    pub fn one() -> Self {
        Vertex { rep: IntMat2::identity() }
    }

    /// nu_n, the class of the lattice spanned by {n w1, w2}.
    pub fn nu(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::NotPositive);
        }
        Ok(Vertex { rep: IntMat2::diag(BigInt::from(n)) })
    }

    /// The primitive HNF representative.
    pub fn rep(&self) -> &IntMat2 {
        &self.rep
    }

    /// Determinant of the representative; equals the hyperdistance to nu_1.
    pub fn det(&self) -> BigInt {
        self.rep.det()
    }
}

impl Ord for Vertex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.det()
            .cmp(&other.det())
            .then_with(|| self.rep.a.cmp(&other.rep.a))
            .then_with(|| self.rep.b.cmp(&other.rep.b))
    }
}

impl PartialOrd for Vertex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.rep.fmt(f)
    }
}

/// A geodesic path; consecutive vertices at prime hyperdistance, steps
/// ordered by ascending prime.
pub type Geodesic = Vec<Vertex>;

/// Canonical vertex of the projective class of g in GL2+(Q).
pub fn vertex_of(g: &RatMat2) -> Result<Vertex> {
    let prim = crate::arith::primitive_rep(g)?;
    Ok(Vertex { rep: hnf_reduce(&prim)? })
}

/// Canonical vertex of the class of a nondegenerate integer matrix.
pub fn vertex_of_int(m: &IntMat2) -> Result<Vertex> {
    let c = content(m)?;
    let prim = IntMat2 {
        a: &m.a / &c,
        b: &m.b / &c,
        c: &m.c / &c,
        d: &m.d / &c,
    };
    Ok(Vertex { rep: hnf_reduce(&prim)? })
}

/// Parses a vertex from matrix text; any GL2+(Q) representative is accepted
/// and reduced.
pub fn parse_vertex(s: &str) -> Result<Vertex> {
    vertex_of(&parse_rat_mat(s)?)
}

/// The hyperdistance delta(u, v) = delta1 of (rep_u * rep_v^-1), a positive
/// integer. The metric on the picture is its logarithm.
pub fn hyperdistance(u: &Vertex, v: &Vertex) -> BigInt {
    let prod = u.rep.mul(&v.rep.adjugate());
    let c = content(&prod).expect("nondegenerate classes give a nonzero product");
    prod.det() / (&c * &c)
}

/// The p+1 sublattice maps of index p: diag(p, 1) and [[1, b], [0, p]].
pub fn adjacency_maps(p: u64) -> Vec<IntMat2> {
    let mut out = vec![IntMat2::diag(BigInt::from(p))];
    for b in 0..p {
        out.push(IntMat2::new(1, BigInt::from(b), 0, BigInt::from(p)));
    }
    out
}

/// Neighbors of v in the tree T_p: the p+1 vertices at hyperdistance p.
pub fn neighbors(v: &Vertex, p: u64) -> Result<BTreeSet<Vertex>> {
    if !is_prime_u64(p) {
        return Err(Error::NotPrime(p));
    }
    let mut out = BTreeSet::new();
    for m in adjacency_maps(p) {
        out.insert(vertex_of_int(&m.mul(&v.rep))?);
    }
    Ok(out)
}

/// All HNF matrices [[a, b], [0, d]] of determinant n, those with
/// gcd(a, b, d) = 1 only when `primitive`, ordered by (a, b).
fn hnf_list(n: u64, primitive: bool) -> Result<Vec<IntMat2>> {
    if n == 0 {
        return Err(Error::NotPositive);
    }
    let mut out = Vec::new();
    for a in divisors(n)? {
        let d = n / a;
        for b in 0..d {
            if primitive && a.gcd(&b).gcd(&d) != 1 {
                continue;
            }
            out.push(IntMat2::new(
                BigInt::from(a),
                BigInt::from(b),
                0,
                BigInt::from(d),
            ));
        }
    }
    Ok(out)
}

/// The sigma_1(n) HNF matrices of determinant n, one per unimodular coset.
pub fn hnfs(n: u64) -> Result<Vec<IntMat2>> {
    hnf_list(n, false)
}

/// The psi(n) primitive HNF matrices of determinant n.
pub fn primitive_hnfs(n: u64) -> Result<Vec<IntMat2>> {
    hnf_list(n, true)
}

/// All vertices at hyperdistance exactly n from the center.
pub fn sphere(center: &Vertex, n: u64) -> Result<BTreeSet<Vertex>> {
    if n == 0 {
        return Err(Error::EmptyRadius);
    }
    let mut out = BTreeSet::new();
    for h in primitive_hnfs(n)? {
        out.insert(vertex_of_int(&h.mul(&center.rep))?);
    }
    Ok(out)
}

/// All vertices at hyperdistance at most d from the center.
pub fn ball(center: &Vertex, d: u64) -> Result<BTreeSet<Vertex>> {
    if d == 0 {
        return Err(Error::EmptyRadius);
    }
    let mut out = BTreeSet::new();
    for n in 1..=d {
        out.extend(sphere(center, n)?);
    }
    Ok(out)
}

/// The geodesic from u to v: within each tree the path is unique, and
/// steps at distinct primes are interleaved in ascending prime order.
pub fn geodesic(u: &Vertex, v: &Vertex) -> Result<Geodesic> {
    let delta = hyperdistance(u, v);
    let mut path = vec![u.clone()];
    let mut cur = u.clone();
    for (p_big, e) in factor(&delta)? {
        let p = p_big
            .to_u64()
            .ok_or_else(|| Error::FactorOverflow(p_big.to_string()))?;
        for _ in 0..e {
            let target = hyperdistance(&cur, v) / &p_big;
            let step = neighbors(&cur, p)?
                .into_iter()
                .find(|w| hyperdistance(w, v) == target)
                .expect("each tree has a step toward any target");
            path.push(step.clone());
            cur = step;
        }
    }
    Ok(path)
}

/// The exponent of p in delta(u, v): the graph distance inside T_p.
pub fn p_adic_distance(u: &Vertex, v: &Vertex, p: u64) -> Result<u32> {
    if !is_prime_u64(p) {
        return Err(Error::NotPrime(p));
    }
    let mut delta = hyperdistance(u, v);
    let p_big = BigInt::from(p);
    let mut e = 0u32;
    while (&delta % &p_big).is_zero() {
        delta /= &p_big;
        e += 1;
    }
    Ok(e)
}

/// The reduction of a Q-lattice datum rho in M2(Z^) at a declared finite
/// level M: the four entries as residues mod M. Questions that level M
/// cannot decide are refused rather than guessed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteLevelRho {
    level: u64,
    entries: [u64; 4],
}

impl FiniteLevelRho {
    pub fn new(level: u64, m: &IntMat2) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidLevel(0));
        }
        let l = BigInt::from(level);
        let red = |x: &BigInt| x.mod_floor(&l).to_u64().expect("residue below a u64 modulus");
        Ok(FiniteLevelRho {
            level,
            entries: [red(&m.a), red(&m.b), red(&m.c), red(&m.d)],
        })
    }

    pub fn zero(level: u64) -> Result<Self> {
        FiniteLevelRho::new(level, &IntMat2::new(0, 0, 0, 0))
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn entries(&self) -> [u64; 4] {
        self.entries
    }
}

/// Whether the pair (rho, g) is a compatible Q-lattice datum: scaling by
/// 1/alpha_g must keep rho integral, which asks every entry of rho to be
/// divisible by the numerator P of alpha_g. Decidable at level M only when
/// P divides M.
pub fn qlattice_compatible(rho: &FiniteLevelRho, g: &RatMat2) -> Result<bool> {
    let (num, _) = alpha_of(g)?;
    if num.is_one() {
        return Ok(true);
    }
    let insufficient = || Error::LevelInsufficient {
        level: rho.level.to_string(),
        modulus: num.to_string(),
    };
    let p = num.to_u64().ok_or_else(insufficient)?;
    if rho.level % p != 0 {
        return Err(insufficient());
    }
    Ok(rho.entries.iter().all(|&e| e % p == 0))
}

/// Output formats for induced-subgraph export.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Json,
}

/// Renders the subgraph induced on the given vertices: edges are the pairs
/// at prime hyperdistance. Vertices are emitted in canonical order, each
/// edge once.
pub fn export_graph(vertices: &BTreeSet<Vertex>, format: ExportFormat) -> Result<String> {
    let vs: Vec<&Vertex> = vertices.iter().collect();
    let mut edges: Vec<(usize, usize, u64)> = Vec::new();
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            let d = hyperdistance(vs[i], vs[j]);
            if is_prime(&d) {
                let p = d.to_u64().ok_or(Error::ExportOverflow)?;
                edges.push((i, j, p));
            }
        }
    }
    match format {
        ExportFormat::Dot => {
            let mut out = String::from("graph big_picture {\n");
            for v in &vs {
                let det = v.det().to_u64().ok_or(Error::ExportOverflow)?;
                out.push_str(&format!("  \"{v}\" [det={det}];\n"));
            }
            for (i, j, p) in &edges {
                out.push_str(&format!("  \"{}\" -- \"{}\" [p={p}];\n", vs[*i], vs[*j]));
            }
            out.push_str("}\n");
            Ok(out)
        }
        ExportFormat::Json => {
            let mut vjson = Vec::new();
            for v in &vs {
                let det = v.det().to_u64().ok_or(Error::ExportOverflow)?;
                vjson.push(json!({ "id": v.to_string(), "det": det }));
            }
            let ejson: Vec<_> = edges
                .iter()
                .map(|(i, j, p)| json!({ "u": vs[*i].to_string(), "v": vs[*j].to_string(), "p": p }))
                .collect();
            let doc = json!({ "schema": "bp/1", "vertices": vjson, "edges": ejson });
            Ok(serde_json::to_string_pretty(&doc).expect("static document serializes"))
        }
    }
}
