//! Command-line surface over the big picture toolkit: one verb per library
//! operation, deterministic JSON/CSV/DOT output.
//!
//! Exit codes: 0 success, 2 usage error, 1 domain error with a single-line
//! diagnostic on stderr.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::exit;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use bigpicture::arith::{parse_rat_mat, PGLClass, Rat};
use bigpicture::congruence::{
    act, atkin_lehner_rep, in_gamma0, in_normalizer, invariant_tree, orbit, random_element,
    snake, thread, GroupElement,
};
use bigpicture::picture::{
    ball, export_graph, geodesic, hyperdistance, neighbors, parse_vertex, sphere, vertex_of,
    ExportFormat, Vertex,
};
use bigpicture::qseries::{
    delta, e4, e6, evaluate, faber, is_replicable, j_normalized, j_series, load_mckay_thompson,
    QSeries, ReplicateFamily, ReplicateStatus,
};
use bigpicture::spectral::{
    gibbs_expectation, hecke_apply, partition_function, phase_unitary, project, represent,
    Kernel, LatticeCoset, Projection, SpectralMode, StateVector,
};
use bigpicture::{Error, Result};

#[derive(Parser)]
#[command(name = "bp", version, about = "Conway's big picture and its operator calculus")]
struct Cli {
    /// Emit JSON instead of plain text
    #[arg(long, global = true)]
    json: bool,
    /// Seed for the pseudo-random constructions
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Enumeration cap for orbits and invariant trees
    #[arg(long, global = true, default_value_t = 10_000)]
    cap: usize,
    /// Truncation order for q-series commands
    #[arg(long, global = true, default_value_t = 20)]
    terms: i64,
    /// Tolerance for numeric checks
    #[arg(long, global = true, default_value_t = 1e-9)]
    tolerance: f64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Canonical Hermite form representative of a commensurability class
    Canon {
        #[arg(long)]
        matrix: String,
    },
    /// Hyperdistance between two classes
    Dist {
        #[arg(long)]
        u: String,
        #[arg(long)]
        v: String,
    },
    /// Neighbors at prime hyperdistance p
    Neighbors {
        #[arg(long, default_value = "1,0;0,1")]
        vertex: String,
        #[arg(long)]
        p: u64,
    },
    /// Sphere of a given hyperdistance around a center
    Sphere {
        #[arg(long, default_value = "1,0;0,1")]
        center: String,
        #[arg(long)]
        radius: u64,
    },
    /// Ball of a given hyperdistance around a center
    Ball {
        #[arg(long, default_value = "1,0;0,1")]
        center: String,
        #[arg(long)]
        radius: u64,
    },
    /// Geodesic path between two classes
    Geodesic {
        #[arg(long)]
        u: String,
        #[arg(long)]
        v: String,
    },
    /// The thread of level N: vertices nu_d for d | N
    Thread {
        #[arg(long)]
        n: u64,
    },
    /// The snake of level N: vertices within hyperdistance dividing 24 of the thread
    Snake {
        #[arg(long)]
        n: u64,
    },
    /// Atkin-Lehner representative W_e at level N
    Al {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        e: u64,
    },
    /// Membership of a matrix in the normalizer of Gamma0(N)
    Normalizer {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        g: String,
    },
    /// Verify random Gamma0(N) words fix the thread pointwise and the snake setwise
    StabCheck {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 20)]
        count: u64,
    },
    /// Orbit of a vertex under a pipe-separated list of generators
    Orbit {
        #[arg(long)]
        gens: String,
        #[arg(long, default_value = "1,0;0,1")]
        vertex: String,
    },
    /// Smallest invariant subtree containing nu_1 for the given generators
    InvariantTree {
        #[arg(long)]
        gens: String,
    },
    /// Hecke operator T_N applied to a basis vector
    Hecke {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value = "1,0;0,1")]
        vertex: String,
    },
    /// Projection onto a sphere, thread, or snake subspace
    Project {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value = "1,0;0,1")]
        vertex: String,
        /// Project the uniform state on a ball of this radius instead of a basis vector
        #[arg(long)]
        ball: Option<u64>,
    },
    /// Conjugation identity for time evolution on a seeded random kernel
    EvolveCheck {
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        t: f64,
    },
    /// Truncated partition function, CSV row beta,X,mode,value
    Partition {
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long)]
        x: u64,
        #[arg(long, default_value = "coset")]
        mode: String,
    },
    /// Truncated Gibbs expectation of an observable
    Gibbs {
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long)]
        x: u64,
        #[arg(long, default_value = "coset")]
        mode: String,
        #[arg(long, default_value = "det")]
        obs: String,
    },
    /// Classical series: j, J, E4, E6, delta
    Qseries {
        #[arg(long)]
        kind: String,
    },
    /// Faber polynomial coefficients of a normalized principal series
    Faber {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long)]
        class: Option<String>,
    },
    /// The k-th replicate of a series
    Replicate {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long)]
        class: Option<String>,
    },
    /// Replicability scan through k <= kmax
    VerifyReplicable {
        #[arg(long, default_value_t = 4)]
        kmax: u32,
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long)]
        class: Option<String>,
    },
    /// Numeric evaluation at z = re + im*i in the upper half plane
    Eval {
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        re: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        im: f64,
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long)]
        class: Option<String>,
    },
    /// Graph export (DOT or JSON) of a sphere, ball, thread, or snake
    Export {
        #[arg(long)]
        what: String,
        #[arg(long, default_value = "dot")]
        format: String,
        #[arg(long, default_value = "1,0;0,1")]
        center: String,
        #[arg(long)]
        radius: Option<u64>,
        #[arg(long)]
        n: Option<u64>,
    },
}

fn usage(msg: &str) -> ! {
    eprintln!("error: {msg}");
    exit(2);
}

fn main() {
    // die quietly when the reading end of a pipe closes, like any filter
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        exit(1);
    }
}

fn group_element(s: &str) -> Result<GroupElement> {
    PGLClass::new(&parse_rat_mat(s)?)
}

fn parse_gens(s: &str) -> Result<Vec<GroupElement>> {
    s.split('|').map(|part| group_element(part.trim())).collect()
}

fn det_u64(v: &Vertex) -> Result<u64> {
    v.det().to_u64().ok_or(Error::ExportOverflow)
}

fn vertex_entry(v: &Vertex) -> Result<Value> {
    Ok(json!({"id": v.to_string(), "det": det_u64(v)?}))
}

fn print_vertices<'a>(vs: impl Iterator<Item = &'a Vertex>, as_json: bool) -> Result<()> {
    if as_json {
        let entries: Result<Vec<Value>> = vs.map(vertex_entry).collect();
        print_json(&json!({"schema": "bp/1", "vertices": entries?}));
    } else {
        for v in vs {
            println!("{v}");
        }
    }
    Ok(())
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

/// Graph JSON of a vertex set, tagged with the level and kind.
fn tagged_graph(vs: &BTreeSet<Vertex>, n: u64, kind: &str) -> Result<Value> {
    let raw = export_graph(vs, ExportFormat::Json)?;
    let mut value: Value = serde_json::from_str(&raw).expect("export emits valid JSON");
    value["N"] = json!(n);
    value["kind"] = json!(kind);
    Ok(value)
}

fn rat_string(c: &Rat) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        c.to_string()
    }
}

fn series_json(f: &QSeries) -> Value {
    let coeffs: BTreeMap<String, String> =
        f.iter().map(|(n, c)| (n.to_string(), rat_string(c))).collect();
    json!({
        "schema": "bp/1",
        "n0": f.lowest(),
        "trunc": f.trunc(),
        "coeffs": coeffs,
    })
}

fn print_series(f: &QSeries, as_json: bool) {
    if as_json {
        print_json(&series_json(f));
    } else {
        for (n, c) in f.iter() {
            println!("{n},{}", rat_string(c));
        }
    }
}

fn state_json(xi: &StateVector<Vertex>) -> Value {
    let entries: Vec<Value> = xi
        .iter()
        .map(|(v, z)| json!({"id": v.to_string(), "re": z.re, "im": z.im}))
        .collect();
    json!({"schema": "bp/1", "mode": "vertex", "entries": entries})
}

fn print_state(xi: &StateVector<Vertex>, as_json: bool) {
    if as_json {
        print_json(&state_json(xi));
    } else {
        for (v, z) in xi.iter() {
            println!("{v},{},{}", z.re, z.im);
        }
    }
}

/// Base series for the q-expansion commands: an ingested table entry when
/// --series/--class are given, J otherwise.
fn base_series(
    series: &Option<PathBuf>,
    class: &Option<String>,
    trunc: i64,
) -> Result<QSeries> {
    match (series, class) {
        (Some(path), Some(label)) => {
            let table = load_mckay_thompson(path)?;
            match table.get(label) {
                Some(f) => Ok(f.clone()),
                None => usage(&format!("class {label:?} not present in {}", path.display())),
            }
        }
        (None, None) => Ok(j_normalized(trunc)),
        _ => usage("--series and --class must be given together"),
    }
}

fn spectral_mode(s: &str) -> SpectralMode {
    match s {
        "coset" => SpectralMode::Coset,
        "vertex" => SpectralMode::Vertex,
        other => usage(&format!("unknown mode {other:?}: expected coset or vertex")),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Canon { matrix } => {
            let v = vertex_of(&parse_rat_mat(&matrix)?)?;
            if cli.json {
                print_json(&json!({
                    "schema": "bp/1",
                    "id": v.to_string(),
                    "det": v.det().to_string(),
                }));
            } else {
                println!("{v}");
            }
        }
        Cmd::Dist { u, v } => {
            let d = hyperdistance(&parse_vertex(&u)?, &parse_vertex(&v)?);
            if cli.json {
                print_json(&json!({"schema": "bp/1", "delta": d.to_string()}));
            } else {
                println!("{d}");
            }
        }
        Cmd::Neighbors { vertex, p } => {
            let set = neighbors(&parse_vertex(&vertex)?, p)?;
            print_vertices(set.iter(), cli.json)?;
        }
        Cmd::Sphere { center, radius } => {
            let set = sphere(&parse_vertex(&center)?, radius)?;
            print_vertices(set.iter(), cli.json)?;
        }
        Cmd::Ball { center, radius } => {
            let set = ball(&parse_vertex(&center)?, radius)?;
            print_vertices(set.iter(), cli.json)?;
        }
        Cmd::Geodesic { u, v } => {
            let path = geodesic(&parse_vertex(&u)?, &parse_vertex(&v)?)?;
            if cli.json {
                let entries: Result<Vec<Value>> = path.iter().map(vertex_entry).collect();
                print_json(&json!({"schema": "bp/1", "path": entries?}));
            } else {
                for v in &path {
                    println!("{v}");
                }
            }
        }
        Cmd::Thread { n } => {
            let set = thread(n)?;
            if cli.json {
                print_json(&tagged_graph(&set, n, "thread")?);
            } else {
                print_vertices(set.iter(), false)?;
            }
        }
        Cmd::Snake { n } => {
            guard_snake_level(n)?;
            let set = snake(n)?;
            if cli.json {
                print_json(&tagged_graph(&set, n, "snake")?);
            } else {
                print_vertices(set.iter(), false)?;
            }
        }
        Cmd::Al { n, e } => {
            let w = atkin_lehner_rep(n, e)?;
            if cli.json {
                print_json(&json!({
                    "schema": "bp/1",
                    "n": n,
                    "e": e,
                    "rep": w.rep().to_string(),
                }));
            } else {
                println!("{}", w.rep());
            }
        }
        Cmd::Normalizer { n, g } => {
            let inside = in_normalizer(&group_element(&g)?, n);
            if cli.json {
                print_json(&json!({"schema": "bp/1", "n": n, "in_normalizer": inside}));
            } else {
                println!("{inside}");
            }
        }
        Cmd::StabCheck { n, count } => {
            let thread_set = thread(n)?;
            let snake_set = snake(n)?;
            let base = Vertex::one();
            let level = Vertex::nu(n)?;
            let mut fixes_base = true;
            let mut fixes_level = true;
            let mut fixes_thread = true;
            let mut snake_setwise = true;
            for i in 0..count {
                let g = random_element(n, cli.seed.wrapping_add(i), 4);
                debug_assert!(in_gamma0(&g, n));
                fixes_base &= act(&g, &base) == base;
                fixes_level &= act(&g, &level) == level;
                fixes_thread &= thread_set.iter().all(|v| act(&g, v) == *v);
                snake_setwise &= snake_set.iter().all(|v| snake_set.contains(&act(&g, v)));
            }
            let pass = fixes_base && fixes_level && fixes_thread && snake_setwise;
            if cli.json {
                print_json(&json!({
                    "schema": "bp/1",
                    "n": n,
                    "count": count,
                    "seed": cli.seed,
                    "fixes_base": fixes_base,
                    "fixes_level": fixes_level,
                    "fixes_thread": fixes_thread,
                    "snake_setwise": snake_setwise,
                }));
            } else {
                println!(
                    "n={n} count={count} fixes_base={fixes_base} fixes_level={fixes_level} \
                     fixes_thread={fixes_thread} snake_setwise={snake_setwise}"
                );
            }
            if !pass {
                return Err(Error::CapExceeded(format!("stabilizer check failed at level {n}")));
            }
        }
        Cmd::Orbit { gens, vertex } => {
            let set = orbit(&parse_gens(&gens)?, &parse_vertex(&vertex)?, cli.cap)?;
            print_vertices(set.iter(), cli.json)?;
        }
        Cmd::InvariantTree { gens } => {
            let set = invariant_tree(&parse_gens(&gens)?, cli.cap)?;
            if cli.json {
                let raw = export_graph(&set, ExportFormat::Json)?;
                print_json(&serde_json::from_str(&raw).expect("export emits valid JSON"));
            } else {
                print_vertices(set.iter(), false)?;
            }
        }
        Cmd::Hecke { n, vertex } => {
            let xi = StateVector::delta(parse_vertex(&vertex)?);
            print_state(&hecke_apply(&xi, n)?, cli.json);
        }
        Cmd::Project { kind, n, vertex, ball: ball_radius } => {
            let center = parse_vertex(&vertex)?;
            let xi = match ball_radius {
                None => StateVector::delta(center),
                Some(r) => {
                    let mut xi = StateVector::zero();
                    for v in ball(&center, r)? {
                        xi.add(v, Complex64::new(1.0, 0.0));
                    }
                    xi
                }
            };
            let kind = match kind.as_str() {
                "sphere" => Projection::Sphere(n),
                "thread" => Projection::Thread(n),
                "snake" => {
                    guard_snake_level(n)?;
                    Projection::Snake(n)
                }
                other => usage(&format!(
                    "unknown projection {other:?}: expected sphere, thread, or snake"
                )),
            };
            print_state(&project(&xi, kind)?, cli.json);
        }
        Cmd::EvolveCheck { t } => {
            let (kernel, xi) = seeded_kernel_state(cli.seed)?;
            let lhs = represent(&kernel.time_evolve(t), &xi)?;
            let rhs = phase_unitary(t, &represent(&kernel, &phase_unitary(-t, &xi))?);
            let deviation = lhs.distance(&rhs);
            let pass = deviation <= cli.tolerance;
            if cli.json {
                print_json(&json!({
                    "schema": "bp/1",
                    "t": t,
                    "seed": cli.seed,
                    "deviation": deviation,
                    "tolerance": cli.tolerance,
                    "pass": pass,
                }));
            } else {
                println!("t={t} deviation={deviation:e} pass={pass}");
            }
            if !pass {
                return Err(Error::CapExceeded(format!(
                    "conjugation identity deviates by {deviation:e}"
                )));
            }
        }
        Cmd::Partition { beta, x, mode } => {
            let mode = spectral_mode(&mode);
            let value = partition_function(beta, x, mode)?;
            if cli.json {
                print_json(&json!({
                    "schema": "bp/1",
                    "beta": beta,
                    "x": x,
                    "mode": mode.to_string(),
                    "value": value,
                }));
            } else {
                println!("{beta},{x},{mode},{value}");
            }
        }
        Cmd::Gibbs { beta, x, mode, obs } => {
            let mode = spectral_mode(&mode);
            let value = match obs.as_str() {
                "det" => gibbs_expectation(|a, _, d| (a * d) as f64, beta, x, mode)?,
                "one" => gibbs_expectation(|_, _, _| 1.0, beta, x, mode)?,
                other => usage(&format!("unknown observable {other:?}: expected det or one")),
            };
            if cli.json {
                print_json(&json!({
                    "schema": "bp/1",
                    "beta": beta,
                    "x": x,
                    "mode": mode.to_string(),
                    "obs": obs,
                    "value": value,
                }));
            } else {
                println!("{beta},{x},{mode},{obs},{value}");
            }
        }
        Cmd::Qseries { kind } => {
            let t = cli.terms;
            let f = match kind.as_str() {
                "j" => j_series(t),
                "J" => j_normalized(t),
                "E4" => e4(t),
                "E6" => e6(t),
                "delta" => delta(t),
                other => usage(&format!(
                    "unknown series {other:?}: expected j, J, E4, E6, or delta"
                )),
            };
            print_series(&f, cli.json);
        }
        Cmd::Faber { k, series, class } => {
            let f = base_series(&series, &class, cli.terms.max(k as i64))?;
            let poly = faber(&f, k)?;
            if cli.json {
                let coeffs: Vec<String> = (0..=poly.degree())
                    .map(|i| rat_string(&poly.coefficient(i)))
                    .collect();
                print_json(&json!({"schema": "bp/1", "k": k, "coefficients": coeffs}));
            } else {
                for i in 0..=poly.degree() {
                    println!("{i},{}", rat_string(&poly.coefficient(i)));
                }
            }
        }
        Cmd::Replicate { k, series, class } => {
            let needed = (k as i64) * (k as i64) * cli.terms;
            let f = base_series(&series, &class, needed)?;
            let mut family = ReplicateFamily::new(f)?;
            print_series(&family.replicate(k, cli.terms)?, cli.json);
        }
        Cmd::VerifyReplicable { kmax, series, class } => {
            let needed = (kmax as i64) * (kmax as i64) * cli.terms;
            let f = base_series(&series, &class, needed)?;
            let report = is_replicable(&f, kmax, cli.terms)?;
            if cli.json {
                let per_k: Vec<Value> = report
                    .per_k
                    .iter()
                    .map(|(k, status)| match status {
                        ReplicateStatus::Replicable(_) => {
                            json!({"k": k, "replicable": true})
                        }
                        ReplicateStatus::Obstructed { m } => {
                            json!({"k": k, "replicable": false, "obstruction": m})
                        }
                    })
                    .collect();
                print_json(&json!({
                    "schema": "bp/1",
                    "kmax": kmax,
                    "terms": cli.terms,
                    "all_replicable": report.all_replicable(),
                    "per_k": per_k,
                }));
            } else {
                for (k, status) in &report.per_k {
                    match status {
                        ReplicateStatus::Replicable(_) => println!("k={k} replicable"),
                        ReplicateStatus::Obstructed { m } => {
                            println!("k={k} obstructed at coefficient {m}")
                        }
                    }
                }
            }
        }
        Cmd::Eval { re, im, series, class } => {
            let f = base_series(&series, &class, cli.terms)?;
            let f = if f.trunc() > cli.terms { f.truncate(cli.terms)? } else { f };
            let (value, tail) = evaluate(&f, Complex64::new(re, im))?;
            if cli.json {
                print_json(&json!({
                    "schema": "bp/1",
                    "z": {"re": re, "im": im},
                    "value": {"re": value.re, "im": value.im},
                    "tail_bound": tail,
                }));
            } else {
                println!("{},{},{tail}", value.re, value.im);
            }
        }
        Cmd::Export { what, format, center, radius, n } => {
            let format = match format.as_str() {
                "dot" => ExportFormat::Dot,
                "json" => ExportFormat::Json,
                other => usage(&format!("unknown format {other:?}: expected dot or json")),
            };
            let radius_of = || match radius {
                Some(r) => r,
                None => usage("--radius is required for sphere/ball export"),
            };
            let level_of = || match n {
                Some(n) => n,
                None => usage("--n is required for thread/snake export"),
            };
            let set = match what.as_str() {
                "sphere" => sphere(&parse_vertex(&center)?, radius_of())?,
                "ball" => ball(&parse_vertex(&center)?, radius_of())?,
                "thread" => thread(level_of())?,
                "snake" => {
                    let n = level_of();
                    guard_snake_level(n)?;
                    snake(n)?
                }
                other => usage(&format!(
                    "unknown export {other:?}: expected sphere, ball, thread, or snake"
                )),
            };
            print!("{}", export_graph(&set, format)?);
        }
    }
    Ok(())
}

fn guard_snake_level(n: u64) -> Result<()> {
    if n > 10_000 {
        return Err(Error::CapExceeded(format!("snake level {n} exceeds 10000")));
    }
    Ok(())
}

/// A deterministic kernel and coset-mode state for the evolve check.
fn seeded_kernel_state(seed: u64) -> Result<(Kernel, StateVector<LatticeCoset>)> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let kernel_pool = ["1,0;0,1", "2,0;0,1", "2,0;0,2", "1,1;0,4", "3,0;0,1", "6,2;0,2"];
    let state_pool = ["1,0;0,1", "1,0;0,2", "2,0;0,1", "1,1;0,2", "2,1;0,3", "4,2;0,2"];
    let mut kernel = Kernel::zero();
    for _ in 0..4 {
        let m = bigpicture::arith::parse_int_mat(kernel_pool[rng.gen_range(0..kernel_pool.len())])?;
        kernel.add(&m, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))?;
    }
    let mut xi = StateVector::zero();
    for _ in 0..4 {
        let m = bigpicture::arith::parse_int_mat(state_pool[rng.gen_range(0..state_pool.len())])?;
        xi.add(
            LatticeCoset::new(&m)?,
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        );
    }
    Ok((kernel, xi))
}
