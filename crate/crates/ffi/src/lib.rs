//! C ABI over the core library: opaque handles, integer status codes,
//! explicit frees. Every function is null-safe; out parameters are
//! written only when the status is Ok. Strings returned to the caller
//! are heap-allocated and must be released with bp_string_free.

use std::ffi::{c_char, CStr, CString};

use bigpicture::arith::parse_rat_mat;
use bigpicture::congruence::{act, in_gamma0, in_normalizer, snake};
use bigpicture::picture::{hyperdistance, neighbors, parse_vertex, sphere, Vertex};
use bigpicture::qseries::{evaluate, j_normalized, load_mckay_thompson, QSeries, ReplicateFamily};
use bigpicture::spectral::{partition_function, SpectralMode};
use bigpicture::Error;
use num_complex::Complex64;

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BpStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A string argument did not parse.
    Parse = 3,
    /// The inputs were outside the domain of the operation.
    Domain = 4,
}

/// A vertex of the big picture (opaque).
pub struct BpVertex(Vertex);

/// A truncated Laurent series with exact rational coefficients (opaque).
pub struct BpSeries(QSeries);

fn status_of(e: &Error) -> BpStatus {
    match e {
        Error::MalformedMatrix { .. } | Error::MalformedRow { .. } => BpStatus::Parse,
        _ => BpStatus::Domain,
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, BpStatus> {
    if p.is_null() {
        return Err(BpStatus::NullArgument);
    }
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| BpStatus::InvalidUtf8)
}

fn give_string(s: String) -> *mut c_char {
    CString::new(s).expect("no interior NUL in produced text").into_raw()
}

unsafe fn write_out<T>(out: *mut T, value: T) -> BpStatus {
    if out.is_null() {
        return BpStatus::NullArgument;
    }
    unsafe { out.write(value) };
    BpStatus::Ok
}

/// Parses a vertex from "a,b;c,d" with integer entries, reducing to the
/// canonical primitive Hermite form.
#[no_mangle]
pub unsafe extern "C" fn bp_vertex_parse(text: *const c_char, out: *mut *mut BpVertex) -> BpStatus {
    let s = match unsafe { read_str(text) } {
        Ok(s) => s,
        Err(st) => return st,
    };
    match parse_vertex(s) {
        Ok(v) => unsafe { write_out(out, Box::into_raw(Box::new(BpVertex(v)))) },
        Err(e) => status_of(&e),
    }
}

/// The vertex nu_n = [n, 0; 0, 1] on the main thread.
#[no_mangle]
pub unsafe extern "C" fn bp_vertex_nu(n: u64, out: *mut *mut BpVertex) -> BpStatus {
    match Vertex::nu(n) {
        Ok(v) => unsafe { write_out(out, Box::into_raw(Box::new(BpVertex(v)))) },
        Err(e) => status_of(&e),
    }
}

/// Renders a vertex as "a,b;0,d". Returns null if the handle is null.
#[no_mangle]
pub unsafe extern "C" fn bp_vertex_to_string(v: *const BpVertex) -> *mut c_char {
    if v.is_null() {
        return std::ptr::null_mut();
    }
    give_string(unsafe { &*v }.0.to_string())
}

#[no_mangle]
pub unsafe extern "C" fn bp_vertex_free(v: *mut BpVertex) {
    if !v.is_null() {
        drop(unsafe { Box::from_raw(v) });
    }
}

/// The hyperdistance between two vertices, as a decimal string (it can
/// exceed any fixed-width integer).
#[no_mangle]
pub unsafe extern "C" fn bp_hyperdistance(
    u: *const BpVertex,
    v: *const BpVertex,
    out: *mut *mut c_char,
) -> BpStatus {
    if u.is_null() || v.is_null() {
        return BpStatus::NullArgument;
    }
    let d = hyperdistance(&unsafe { &*u }.0, &unsafe { &*v }.0);
    unsafe { write_out(out, give_string(d.to_string())) }
}

/// The number of p-neighbors of a vertex; p must be prime.
#[no_mangle]
pub unsafe extern "C" fn bp_neighbor_count(
    v: *const BpVertex,
    p: u64,
    out: *mut u64,
) -> BpStatus {
    if v.is_null() {
        return BpStatus::NullArgument;
    }
    match neighbors(&unsafe { &*v }.0, p) {
        Ok(set) => unsafe { write_out(out, set.len() as u64) },
        Err(e) => status_of(&e),
    }
}

/// The number of vertices at hyperdistance exactly n from nu_1.
#[no_mangle]
pub unsafe extern "C" fn bp_sphere_size(n: u64, out: *mut u64) -> BpStatus {
    match sphere(&Vertex::one(), n) {
        Ok(set) => unsafe { write_out(out, set.len() as u64) },
        Err(e) => status_of(&e),
    }
}

/// The number of vertices of the snake of Gamma_0(n).
#[no_mangle]
pub unsafe extern "C" fn bp_snake_size(n: u64, out: *mut u64) -> BpStatus {
    match snake(n) {
        Ok(set) => unsafe { write_out(out, set.len() as u64) },
        Err(e) => status_of(&e),
    }
}

/// Applies a rational matrix "a,b;c,d" (acting up to scalars) to a vertex.
#[no_mangle]
pub unsafe extern "C" fn bp_act(
    g: *const c_char,
    v: *const BpVertex,
    out: *mut *mut BpVertex,
) -> BpStatus {
    let s = match unsafe { read_str(g) } {
        Ok(s) => s,
        Err(st) => return st,
    };
    if v.is_null() {
        return BpStatus::NullArgument;
    }
    let mat = match parse_rat_mat(s) {
        Ok(m) => m,
        Err(e) => return status_of(&e),
    };
    let class = match bigpicture::arith::PGLClass::new(&mat) {
        Ok(c) => c,
        Err(e) => return status_of(&e),
    };
    let image = act(&class, &unsafe { &*v }.0);
    unsafe { write_out(out, Box::into_raw(Box::new(BpVertex(image)))) }
}

/// Whether the rational matrix lies in Gamma_0(n), up to scalars.
#[no_mangle]
pub unsafe extern "C" fn bp_in_gamma0(g: *const c_char, n: u64, out: *mut bool) -> BpStatus {
    let s = match unsafe { read_str(g) } {
        Ok(s) => s,
        Err(st) => return st,
    };
    let mat = match parse_rat_mat(s) {
        Ok(m) => m,
        Err(e) => return status_of(&e),
    };
    match bigpicture::arith::PGLClass::new(&mat) {
        Ok(c) => unsafe { write_out(out, in_gamma0(&c, n)) },
        Err(e) => status_of(&e),
    }
}

/// Whether the rational matrix normalizes Gamma_0(n) inside PGL2+(Q).
#[no_mangle]
pub unsafe extern "C" fn bp_in_normalizer(g: *const c_char, n: u64, out: *mut bool) -> BpStatus {
    let s = match unsafe { read_str(g) } {
        Ok(s) => s,
        Err(st) => return st,
    };
    let mat = match parse_rat_mat(s) {
        Ok(m) => m,
        Err(e) => return status_of(&e),
    };
    match bigpicture::arith::PGLClass::new(&mat) {
        Ok(c) => unsafe { write_out(out, in_normalizer(&c, n)) },
        Err(e) => status_of(&e),
    }
}

/// The partition function truncated at determinant x, over lattice cosets
/// (vertex_mode false) or commensurability classes (vertex_mode true);
/// requires beta > 2.
#[no_mangle]
pub unsafe extern "C" fn bp_partition(
    beta: f64,
    x: u64,
    vertex_mode: bool,
    out: *mut f64,
) -> BpStatus {
    let mode = if vertex_mode { SpectralMode::Vertex } else { SpectralMode::Coset };
    match partition_function(beta, x, mode) {
        Ok(z) => unsafe { write_out(out, z) },
        Err(e) => status_of(&e),
    }
}

/// The normalized principal series J = j - 744 through order trunc.
#[no_mangle]
pub unsafe extern "C" fn bp_series_j(trunc: i64, out: *mut *mut BpSeries) -> BpStatus {
    if trunc < 1 {
        return BpStatus::Domain;
    }
    unsafe { write_out(out, Box::into_raw(Box::new(BpSeries(j_normalized(trunc))))) }
}

/// Loads one class from a McKay-Thompson CSV table (columns
/// class,n,value with the q^-1 row present).
#[no_mangle]
pub unsafe extern "C" fn bp_series_load(
    path: *const c_char,
    class: *const c_char,
    out: *mut *mut BpSeries,
) -> BpStatus {
    let path = match unsafe { read_str(path) } {
        Ok(s) => s,
        Err(st) => return st,
    };
    let class = match unsafe { read_str(class) } {
        Ok(s) => s,
        Err(st) => return st,
    };
    match load_mckay_thompson(std::path::Path::new(path)) {
        Ok(mut table) => match table.remove(class) {
            Some(f) => unsafe { write_out(out, Box::into_raw(Box::new(BpSeries(f)))) },
            None => BpStatus::Domain,
        },
        Err(e) => status_of(&e),
    }
}

/// The k-th replicate through order t; the base must be exact through
/// k^2 t and replicable at k and its divisors.
#[no_mangle]
pub unsafe extern "C" fn bp_series_replicate(
    f: *const BpSeries,
    k: u32,
    t: i64,
    out: *mut *mut BpSeries,
) -> BpStatus {
    if f.is_null() {
        return BpStatus::NullArgument;
    }
    let mut family = match ReplicateFamily::new(unsafe { &*f }.0.clone()) {
        Ok(fam) => fam,
        Err(e) => return status_of(&e),
    };
    match family.replicate(k, t) {
        Ok(rep) => unsafe { write_out(out, Box::into_raw(Box::new(BpSeries(rep)))) },
        Err(e) => status_of(&e),
    }
}

/// The exact coefficient of q^n as a decimal string ("p/q" when not an
/// integer). Indices above the truncation order are out of domain.
#[no_mangle]
pub unsafe extern "C" fn bp_series_coefficient(
    f: *const BpSeries,
    n: i64,
    out: *mut *mut c_char,
) -> BpStatus {
    if f.is_null() {
        return BpStatus::NullArgument;
    }
    let series = &unsafe { &*f }.0;
    if n > series.trunc() {
        return BpStatus::Domain;
    }
    unsafe { write_out(out, give_string(series.coefficient(n).to_string())) }
}

/// Numeric evaluation at z = re + im*i with Im(z) > 0 via q = e^{2 pi i z};
/// tail receives a rigorous bound on the truncation error.
#[no_mangle]
pub unsafe extern "C" fn bp_series_eval(
    f: *const BpSeries,
    re: f64,
    im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
    tail: *mut f64,
) -> BpStatus {
    if f.is_null() {
        return BpStatus::NullArgument;
    }
    match evaluate(&unsafe { &*f }.0, Complex64::new(re, im)) {
        Ok((value, bound)) => {
            if out_re.is_null() || out_im.is_null() || tail.is_null() {
                return BpStatus::NullArgument;
            }
            unsafe {
                out_re.write(value.re);
                out_im.write(value.im);
                tail.write(bound);
            }
            BpStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn bp_series_free(f: *mut BpSeries) {
    if !f.is_null() {
        drop(unsafe { Box::from_raw(f) });
    }
}

/// Releases a string returned by any bp_* function.
#[no_mangle]
pub unsafe extern "C" fn bp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
