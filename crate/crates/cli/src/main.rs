//! Command-line front end for the lambda-forge library.
//!
//! Each verb parses its inputs, calls one library operation and renders the result as
//! JSON, CSV or plain text. Exit status is 0 on success, 1 on malformed input and 2 when
//! the library refuses a request or a size bound is hit.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lambda_forge::lambda_poly::{
    chebyshev_image_lattice, chebyshev_psi, chebyshev_psi_mod, cotangent_invariants, cyclotomic_cotangent_dim,
    toric_periodic_locus, Family, PeriodicLocusReport,
};
use lambda_forge::model_checker::{model_check, FiniteIdSet};
use lambda_forge::ray_class::{
    dr_monoid, f_equiv, parse_cycle, parse_support, ray_class_group, Arithmetic, Cycle, ImagQuadratic,
    Rationals,
};
use lambda_forge::witt_periodic::{
    dwork_check, ghost_from_witt, periodic_witt_field_product_check, witt_from_ghost, witt_image_report,
    CoeffRing, Elem, GhostVector, TruncationSet, WittCoords,
};
use lambda_forge::{Bounds, Error, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "lambda-forge",
    version,
    about = "Ray class monoids, integral lambda-models, periodic loci and big Witt vectors"
)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// Same as `--format json`.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for scans over lists of parameters.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..), global = true)]
    jobs: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Elements and multiplication table of the monoid DR_P(f).
    DrTable(FieldArgs),
    /// The class of the product ab in DR_P(f).
    DrMul {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Whether two ideals are f-equivalent.
    FEquiv {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// The ray class group Cl_P(f).
    RayClass(FieldArgs),
    /// Decides integral models for a finite set with Frobenius data, read as JSON.
    ModelCheck {
        #[arg(long)]
        input: PathBuf,
        /// Also decide whether the action factors through DR of this cycle.
        #[arg(long)]
        cycle: Option<String>,
    },
    /// The Chebyshev polynomial psi_n, optionally reduced mod p.
    Chebyshev {
        /// A value, a range `a-b` or a comma list.
        #[arg(long)]
        n: String,
        #[arg(long = "mod")]
        modulus: Option<u64>,
    },
    /// Periodic locus of the toric or Chebyshev line.
    PeriodicLocus {
        #[arg(long)]
        family: Family,
        /// Level(s) for the cycle n*inf.
        #[arg(long, required_unless_present = "cycle")]
        n: Option<String>,
        /// Toric family only: an explicit cycle over Q.
        #[arg(long, conflicts_with = "n")]
        cycle: Option<String>,
        /// Toric family only: the prime support.
        #[arg(long, default_value = "all")]
        support: String,
    },
    /// Big Witt vectors: conversions, integrality and periodic lattices.
    Witt {
        #[command(subcommand)]
        command: WittCommand,
    },
    /// Invariant factors of I/I^2 for the augmentation ideal of Z[x]/(x^a - 1).
    Cotangent {
        /// A value, a range `a-b` or a comma list.
        #[arg(long)]
        a: String,
        /// Also report the dimension over F_q.
        #[arg(long)]
        q: Option<u64>,
    },
}

#[derive(Args)]
struct FieldArgs {
    /// `Q`, or `d:<D>` for the imaginary quadratic field Q(sqrt D).
    #[arg(long, default_value = "Q")]
    field: String,
    /// `12`, `12*inf`, or an ideal `[a, b+w, c]` over a quadratic field.
    #[arg(long)]
    cycle: String,
    /// `all`, `all-except:<primes>`, `explicit:<primes>` or `explicit-dense:<primes>`.
    #[arg(long, default_value = "all")]
    support: String,
}

#[derive(Args)]
struct RingArgs {
    /// `Z`, `cyclotomic:<n>`, `group:<n>`, or a monic polynomial in x.
    #[arg(long, default_value = "Z")]
    ring: String,
    /// `p:x^p`, `p:x^p/<n>`, `id`, or explicit images `2=x^2,3=x^3`.
    #[arg(long, default_value = "p:x^p")]
    frob: String,
    /// Primes up to this bound are checked when the lifts are declared.
    #[arg(long, default_value_t = 13)]
    lift_bound: u64,
}

#[derive(Subcommand)]
enum WittCommand {
    /// Converts between ghost components and Witt coordinates.
    Convert {
        #[command(flatten)]
        ring: RingArgs,
        /// `div:<n>`, `up:<b>` or a divisor-closed list.
        #[arg(long)]
        trunc: String,
        /// Ghost components in truncation order.
        #[arg(long, required_unless_present = "witt", conflicts_with = "witt")]
        ghost: Option<String>,
        /// Witt coordinates in truncation order.
        #[arg(long)]
        witt: Option<String>,
    },
    /// Validates the declared Frobenius lifts and optionally a ghost vector.
    Check {
        #[command(flatten)]
        ring: RingArgs,
        #[arg(long, requires = "ghost")]
        trunc: Option<String>,
        #[arg(long, requires = "trunc")]
        ghost: Option<String>,
    },
    /// Compares Z[x]/(x^n - 1) with the n*inf-periodic Witt lattice.
    Periodic {
        /// A value, a range `a-b` or a comma list.
        #[arg(long)]
        n: String,
        #[arg(long, default_value_t = 64)]
        bound: u64,
        /// Coefficient ring: `cyclotomic` for Z[zeta_n] or `group` for Z[x]/(x^n - 1).
        #[arg(long, default_value = "cyclotomic")]
        ring: String,
        /// Report the primitive idempotents of the rational span instead.
        #[arg(long)]
        idempotents: bool,
    },
}

/// A rendered result in every format the verb supports.
struct Output {
    json: Value,
    text: String,
    csv: Option<Vec<Vec<String>>>,
}

impl Output {
    fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json).expect("json values serialize");
                s.push('\n');
                Ok(s)
            }
            Format::Text => Ok(self.text.clone()),
            Format::Csv => {
                let rows = self
                    .csv
                    .as_ref()
                    .ok_or_else(|| Error::Invalid("csv output is not available for this verb".into()))?;
                let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
                for r in rows {
                    w.write_record(r).map_err(|e| Error::Invalid(e.to_string()))?;
                }
                let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
                Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
            }
        }
    }
}

enum Field {
    Q,
    Quad(ImagQuadratic),
}

fn parse_field(s: &str) -> Result<Field> {
    let s = s.trim();
    if s == "Q" {
        return Ok(Field::Q);
    }
    let d = s
        .strip_prefix("d:")
        .and_then(|d| d.parse::<i64>().ok())
        .ok_or_else(|| Error::Invalid(format!("unknown field {s:?}, expected Q or d:<D>")))?;
    Ok(Field::Quad(ImagQuadratic::new(d)?))
}

macro_rules! with_field {
    ($spec:expr, $f:ident => $body:expr) => {
        match parse_field($spec)? {
            Field::Q => {
                let $f = &Rationals;
                $body
            }
            Field::Quad(q) => {
                let $f = &q;
                $body
            }
        }
    };
}

/// `LAMBDA_FORGE_BOUND` is either one number for both limits or `residue=<n>,monoid=<m>`.
fn bounds_from_env() -> Result<Bounds> {
    let Ok(raw) = std::env::var("LAMBDA_FORGE_BOUND") else {
        return Ok(Bounds::default());
    };
    let bad = || Error::Invalid(format!("cannot parse LAMBDA_FORGE_BOUND={raw:?}"));
    let mut b = Bounds::default();
    if let Ok(n) = raw.trim().parse::<u64>() {
        b.residue_norm = n;
        b.monoid_size = n;
        return Ok(b);
    }
    for part in raw.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(bad)?;
        let v: u64 = v.trim().parse().map_err(|_| bad())?;
        match k.trim() {
            "residue" => b.residue_norm = v,
            "monoid" => b.monoid_size = v,
            _ => return Err(bad()),
        }
    }
    Ok(b)
}

/// Parses `5`, `1-40` or `2,3,5`.
fn parse_list(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Invalid(format!("cannot parse {s:?} as a list of positive integers"));
    let num = |t: &str| match t.trim().parse::<u64>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(bad()),
    };
    let mut out = Vec::new();
    for part in s.split(',') {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let (lo, hi) = (num(lo)?, num(hi)?);
                if lo > hi {
                    return Err(bad());
                }
                out.extend(lo..=hi);
            }
            None => out.push(num(part)?),
        }
    }
    Ok(out)
}

/// Runs `f` over the list on `jobs` threads, keeping input order.
fn scan<T: Send>(jobs: u64, items: &[u64], f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs as usize)
        .build()
        .map_err(|e| Error::Invalid(e.to_string()))?;
    pool.install(|| items.par_iter().map(|&x| f(x)).collect())
}

/// One object for a single parameter, an array for a list.
fn collect_json(items: Vec<Value>, single: bool) -> Value {
    if single {
        items.into_iter().next().unwrap_or(Value::Null)
    } else {
        Value::Array(items)
    }
}

fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r.iter().enumerate().map(|(i, s)| format!("{s:>w$}", w = widths[i])).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("library reports serialize")
}

fn dr_table<F: Arithmetic>(field: &F, args: &FieldArgs, bounds: &Bounds) -> Result<Output> {
    let cycle = parse_cycle(field, &args.cycle)?;
    let support = parse_support(field, &args.support)?;
    let view = dr_monoid(field, &cycle, &support, bounds)?.view();
    let n = view.elements.len();
    let mut header: Vec<String> = ["index", "d", "unit_rep", "rep"].map(String::from).to_vec();
    header.extend((0..n).map(|j| j.to_string()));
    let mut rows = vec![header];
    for (i, e) in view.elements.iter().enumerate() {
        let mut r = vec![i.to_string(), e.d.clone(), e.unit_rep.clone(), e.rep.clone()];
        r.extend(view.table[i].iter().map(usize::to_string));
        rows.push(r);
    }
    let text = format!(
        "DR({}) over {}, support {}: {} elements\n{}",
        view.cycle,
        field.describe(),
        view.support,
        n,
        aligned(&rows)
    );
    Ok(Output {
        json: to_value(&view),
        text,
        csv: Some(rows),
    })
}

fn dr_mul<F: Arithmetic>(field: &F, args: &FieldArgs, a: &str, b: &str, bounds: &Bounds) -> Result<Output> {
    let cycle = parse_cycle(field, &args.cycle)?;
    let support = parse_support(field, &args.support)?;
    let (a, b) = (field.parse_ideal(a)?, field.parse_ideal(b)?);
    let dr = dr_monoid(field, &cycle, &support, bounds)?;
    let k = dr.product(&a, &b)?;
    let e = &dr.elements()[k];
    let (d, u, rep) = (e.divisor.to_string(), e.unit_rep.to_string(), e.rep.to_string());
    Ok(Output {
        json: json!({
            "cycle": cycle.to_string(),
            "a": a.to_string(),
            "b": b.to_string(),
            "index": k,
            "d": d,
            "unit_rep": u,
            "rep": rep,
        }),
        text: format!("{rep}\n"),
        csv: Some(vec![
            ["a", "b", "index", "d", "unit_rep", "rep"].map(String::from).to_vec(),
            vec![a.to_string(), b.to_string(), k.to_string(), d, u, rep],
        ]),
    })
}

fn f_equiv_cmd<F: Arithmetic>(field: &F, args: &FieldArgs, a: &str, b: &str) -> Result<Output> {
    let cycle = parse_cycle(field, &args.cycle)?;
    let support = parse_support(field, &args.support)?;
    let (a, b) = (field.parse_ideal(a)?, field.parse_ideal(b)?);
    let eq = f_equiv(field, &a, &b, &cycle, &support)?;
    Ok(Output {
        json: json!({
            "cycle": cycle.to_string(),
            "support": support.to_string(),
            "a": a.to_string(),
            "b": b.to_string(),
            "equivalent": eq,
        }),
        text: format!("{eq}\n"),
        csv: Some(vec![
            ["a", "b", "equivalent"].map(String::from).to_vec(),
            vec![a.to_string(), b.to_string(), eq.to_string()],
        ]),
    })
}

fn ray_class_cmd<F: Arithmetic>(field: &F, args: &FieldArgs, bounds: &Bounds) -> Result<Output> {
    let cycle = parse_cycle(field, &args.cycle)?;
    let support = parse_support(field, &args.support)?;
    let view = ray_class_group(field, &cycle, &support, bounds)?.view();
    let mut header: Vec<String> = ["index", "rep"].map(String::from).to_vec();
    header.extend((0..view.order).map(|j| j.to_string()));
    let mut rows = vec![header];
    for (i, r) in view.reps.iter().enumerate() {
        let mut row = vec![i.to_string(), r.clone()];
        row.extend(view.table[i].iter().map(usize::to_string));
        rows.push(row);
    }
    let gens: Vec<&str> = view.generators.iter().map(|&g| view.reps[g].as_str()).collect();
    let text = format!(
        "Cl({}) over {}, support {}: order {} (full group {})\ngenerators: {}\n{}",
        view.cycle,
        field.describe(),
        view.support,
        view.order,
        view.full_order,
        if gens.is_empty() { "none".to_string() } else { gens.join("; ") },
        aligned(&rows)
    );
    Ok(Output {
        json: to_value(&view),
        text,
        csv: Some(rows),
    })
}

fn model_check_cmd(input: &PathBuf, cycle: Option<&str>, bounds: &Bounds) -> Result<Output> {
    let raw = std::fs::read_to_string(input)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", input.display())))?;
    let set: FiniteIdSet =
        serde_json::from_str(&raw).map_err(|e| Error::Invalid(format!("malformed FiniteIdSet: {e}")))?;
    let cycle = cycle.map(|c| parse_cycle(&Rationals, c)).transpose()?;
    let rep = model_check(&set, cycle.as_ref(), bounds)?;
    let show = |c: &Option<Cycle<u64>>| c.as_ref().map_or("none".to_string(), |c| c.to_string());
    let mut text = format!("exists: {}\nminimal_cycle: {}\nr: {}\n", rep.exists, show(&rep.minimal_cycle), rep.r);
    for (d, c) in &rep.conductors {
        text.push_str(&format!("conductor of {d}S: {c}\n"));
    }
    text.push_str(&format!("lcm_cycle: {}\n", rep.lcm_cycle));
    if !rep.local_failures.is_empty() {
        let ps: Vec<String> = rep.local_failures.iter().map(u64::to_string).collect();
        text.push_str(&format!("local_failures: {}\n", ps.join(", ")));
    }
    if let (Some(c), Some(d)) = (&cycle, &rep.decision) {
        text.push_str(&format!("factors through DR({c}): {} (direct test {})\n", d.verdict, d.direct));
    }
    let mut rows = vec![vec!["d".to_string(), "conductor".to_string()]];
    rows.extend(rep.conductors.iter().map(|(d, c)| vec![d.to_string(), c.to_string()]));
    Ok(Output {
        json: to_value(&rep),
        text,
        csv: Some(rows),
    })
}

fn chebyshev_cmd(ns: &str, modulus: Option<u64>, jobs: u64) -> Result<Output> {
    let list = parse_list(ns)?;
    let polys = scan(jobs, &list, |n| match modulus {
        Some(p) => chebyshev_psi_mod(n, p),
        None => Ok(chebyshev_psi(n)),
    })?;
    let single = list.len() == 1;
    let mut text = String::new();
    let mut rows = vec![["n", "degree", "coefficient"].map(String::from).to_vec()];
    let mut items = Vec::new();
    for (&n, p) in list.iter().zip(&polys) {
        let shown = p.render("y");
        if single {
            text.push_str(&format!("{shown}\n"));
        } else {
            text.push_str(&format!("psi_{n} = {shown}\n"));
        }
        for (i, c) in p.coeffs().iter().enumerate() {
            rows.push(vec![n.to_string(), i.to_string(), c.to_string()]);
        }
        items.push(json!({ "n": n, "mod": modulus, "poly": shown, "coefficients": to_value(p) }));
    }
    Ok(Output {
        json: collect_json(items, single),
        text,
        csv: Some(rows),
    })
}

fn locus_text(r: &PeriodicLocusReport, var: &str) -> String {
    let q = r.generator.as_ref().map_or("none".to_string(), |q| q.render(var));
    let mut s = format!("cycle {}: Q = {}\n", r.cycle, q);
    if let Some(m) = r.exponent {
        s.push_str(&format!("locus: mu_{m}\n"));
    }
    let rows: Vec<Vec<String>> = r.image_basis.iter().map(|row| row.iter().map(|c| c.to_string()).collect()).collect();
    s.push_str("image basis:\n");
    s.push_str(&aligned(&rows));
    s.push_str(&format!("cokernel order: {}\n", r.cokernel_order));
    s
}

fn periodic_locus_cmd(
    family: Family,
    ns: Option<&str>,
    cycle: Option<&str>,
    support: &str,
    jobs: u64,
) -> Result<Output> {
    let support = parse_support(&Rationals, support)?;
    let (cycles, single): (Vec<Cycle<u64>>, bool) = match (ns, cycle) {
        (_, Some(c)) => (vec![parse_cycle(&Rationals, c)?], true),
        (Some(ns), None) => {
            let list = parse_list(ns)?;
            (list.iter().map(|&n| Cycle::new(n, true)).collect(), list.len() == 1)
        }
        (None, None) => return Err(Error::Invalid("either --n or --cycle is required".into())),
    };
    let reports = match family {
        Family::Chebyshev => {
            if cycle.is_some() || support.to_string() != "all" {
                return Err(Error::Invalid("the Chebyshev family takes --n only".into()));
            }
            let levels: Vec<u64> = cycles.iter().map(|c| c.finite).collect();
            scan(jobs, &levels, chebyshev_image_lattice)?
        }
        Family::Toric => {
            let idx: Vec<u64> = (0..cycles.len() as u64).collect();
            scan(jobs, &idx, |i| Ok(toric_periodic_locus(&cycles[i as usize], &support)))?
        }
    };
    let var = if family == Family::Toric { "x" } else { "y" };
    let text: String = reports.iter().map(|r| locus_text(r, var)).collect();
    let mut rows = vec![["cycle", "Q", "exponent", "cokernel_order"].map(String::from).to_vec()];
    for r in &reports {
        rows.push(vec![
            r.cycle.clone(),
            r.generator.as_ref().map_or(String::new(), |q| q.render(var)),
            r.exponent.map_or(String::new(), |m| m.to_string()),
            r.cokernel_order.to_string(),
        ]);
    }
    Ok(Output {
        json: collect_json(reports.iter().map(to_value).collect(), single),
        text,
        csv: Some(rows),
    })
}

fn parse_ring(args: &RingArgs) -> Result<CoeffRing> {
    CoeffRing::parse(&args.ring, &args.frob, args.lift_bound)
}

/// Values in truncation order. A shorter list fills the leading elements of `T`, which must
/// then be divisor-closed themselves; the set actually used is returned.
fn parse_values(ring: &CoeffRing, trunc: &TruncationSet, s: &str) -> Result<(TruncationSet, BTreeMap<u64, Elem>)> {
    let vals: Vec<&str> = s.split(',').collect();
    if vals.len() > trunc.elems().len() {
        return Err(Error::Invalid(format!(
            "expected at most {} values for the truncation set {trunc}, got {}",
            trunc.elems().len(),
            vals.len()
        )));
    }
    let used = TruncationSet::new(trunc.elems()[..vals.len()].iter().copied())?;
    let values = used
        .elems()
        .iter()
        .zip(vals)
        .map(|(&n, v)| Ok((n, ring.parse_elem(v)?)))
        .collect::<Result<_>>()?;
    Ok((used, values))
}

fn witt_cmd(cmd: &WittCommand, jobs: u64) -> Result<Output> {
    match cmd {
        WittCommand::Convert { ring, trunc, ghost, witt } => {
            let ring = parse_ring(ring)?;
            let declared: TruncationSet = trunc.parse()?;
            let (trunc, values) = match (ghost, witt) {
                (Some(g), None) | (None, Some(g)) => parse_values(&ring, &declared, g)?,
                _ => return Err(Error::Invalid("give exactly one of --ghost and --witt".into())),
            };
            let idx: Vec<u64> = trunc.elems().to_vec();
            let (kind, values, integral) = match (ghost, witt) {
                (Some(_), None) => {
                    let g = GhostVector::new(ring.clone(), trunc.clone(), values)?;
                    let sol = witt_from_ghost(&g);
                    let integral: Vec<bool> = idx.iter().map(|n| sol.integral[n]).collect();
                    ("witt", idx.iter().map(|n| ring.render(&sol.coords.coords[n])).collect::<Vec<_>>(), Some(integral))
                }
                (None, Some(_)) => {
                    let w = WittCoords::new(ring.clone(), trunc.clone(), values)?;
                    let g = ghost_from_witt(&w);
                    ("ghost", idx.iter().map(|n| ring.render(g.get(*n))).collect(), None)
                }
                _ => return Err(Error::Invalid("give exactly one of --ghost and --witt".into())),
            };
            let mut text = format!("{} over {}, T = {trunc}\n", kind, ring.describe());
            let mut rows = vec![vec!["n".to_string(), kind.to_string()]];
            if integral.is_some() {
                rows[0].push("integral".into());
            }
            for (i, n) in idx.iter().enumerate() {
                let mark = match &integral {
                    Some(f) if !f[i] => "  (not integral)",
                    _ => "",
                };
                text.push_str(&format!("  {n}: {}{mark}\n", values[i]));
                let mut r = vec![n.to_string(), values[i].clone()];
                if let Some(f) = &integral {
                    r.push(f[i].to_string());
                }
                rows.push(r);
            }
            let map: serde_json::Map<String, Value> =
                idx.iter().zip(&values).map(|(n, v)| (n.to_string(), Value::String(v.clone()))).collect();
            let mut obj = json!({ "ring": ring.describe(), "trunc": idx, kind: map });
            if let Some(f) = integral {
                obj["integral"] = json!(f.iter().all(|&b| b));
            }
            Ok(Output { json: obj, text, csv: Some(rows) })
        }
        WittCommand::Check { ring, trunc, ghost } => {
            let r = parse_ring(ring)?;
            let mut obj = json!({ "ring": r.describe(), "frob": ring.frob, "lifts_valid_up_to": ring.lift_bound });
            let mut text = format!("{}: Frobenius lifts {} valid up to {}\n", r.describe(), ring.frob, ring.lift_bound);
            if let (Some(t), Some(g)) = (trunc, ghost) {
                let (t, values) = parse_values(&r, &t.parse()?, g)?;
                let g = GhostVector::new(r.clone(), t.clone(), values)?;
                let ok = dwork_check(&g)?;
                obj["dwork"] = json!(ok);
                text.push_str(&format!("Dwork congruences on T = {t}: {ok}\n"));
            }
            Ok(Output { json: obj, text, csv: None })
        }
        WittCommand::Periodic { n, bound, ring, idempotents } => {
            let list = parse_list(n)?;
            let single = list.len() == 1;
            if *idempotents {
                let reps = scan(jobs, &list, |n| periodic_witt_field_product_check(n, *bound))?;
                let mut text = String::new();
                let mut rows = vec![["n", "dimension", "idempotents", "matches"].map(String::from).to_vec()];
                let mut items = Vec::new();
                for r in &reps {
                    let m = r.matches_divisor_product();
                    text.push_str(&format!(
                        "n={}: dimension {}, {} idempotents, divisor product {}\n",
                        r.n,
                        r.dimension,
                        r.idempotents(),
                        if m { "matches" } else { "does not match" }
                    ));
                    rows.push(vec![r.n.to_string(), r.dimension.to_string(), r.idempotents().to_string(), m.to_string()]);
                    let mut v = to_value(r);
                    v["matches_divisor_product"] = json!(m);
                    items.push(v);
                }
                return Ok(Output { json: collect_json(items, single), text, csv: Some(rows) });
            }
            let reps = scan(jobs, &list, |n| {
                let r = match ring.as_str() {
                    "cyclotomic" => CoeffRing::cyclotomic(n),
                    "group" => CoeffRing::group_ring(n),
                    other => return Err(Error::Invalid(format!("unknown ring {other:?}"))),
                };
                witt_image_report(n, &r, *bound)
            })?;
            let mut text = String::new();
            let mut rows = vec![["n", "ring", "verdict", "index", "linear_index", "stable"].map(String::from).to_vec()];
            let mut items = Vec::new();
            for r in &reps {
                let verdict = to_value(&r.verdict());
                let vs = verdict.as_str().unwrap_or_default().to_string();
                text.push_str(&format!(
                    "n={} over {}: {} (index {}, linear index {}, stable {})\n",
                    r.n,
                    r.ring,
                    vs,
                    index_text(&r.index),
                    index_text(&r.linear_index),
                    r.stable
                ));
                rows.push(vec![r.n.to_string(), r.ring.clone(), vs, index_text(&r.index), index_text(&r.linear_index), r.stable.to_string()]);
                let mut v = to_value(r);
                v["verdict"] = verdict;
                items.push(v);
            }
            Ok(Output { json: collect_json(items, single), text, csv: Some(rows) })
        }
    }
}

fn cotangent_cmd(a: &str, q: Option<u64>, jobs: u64) -> Result<Output> {
    let list = parse_list(a)?;
    let single = list.len() == 1;
    let reps = scan(jobs, &list, |a| {
        let inv = cotangent_invariants(a)?;
        let dim = q.map(|q| cyclotomic_cotangent_dim(a, q)).transpose()?;
        Ok((inv, dim))
    })?;
    let mut text = String::new();
    let mut rows = vec![["a", "invariants", "dim"].map(String::from).to_vec()];
    let mut items = Vec::new();
    for (&a, (inv, dim)) in list.iter().zip(&reps) {
        let shown: Vec<String> = inv.iter().map(|d| d.to_string()).collect();
        let group = if shown.is_empty() {
            "0".to_string()
        } else {
            shown.iter().map(|d| format!("Z/{d}")).collect::<Vec<_>>().join(" + ")
        };
        text.push_str(&format!("a={a}: I/I^2 = {group}"));
        if let (Some(q), Some(d)) = (q, dim) {
            text.push_str(&format!(", dim over F_{q} = {d}"));
        }
        text.push('\n');
        rows.push(vec![a.to_string(), shown.join(" "), dim.map_or(String::new(), |d| d.to_string())]);
        items.push(json!({ "a": a, "invariants": shown, "q": q, "dim": dim }));
    }
    Ok(Output {
        json: collect_json(items, single),
        text,
        csv: Some(rows),
    })
}

fn index_text<T: std::fmt::Display>(x: &Option<T>) -> String {
    x.as_ref().map_or("infinite".to_string(), |k| k.to_string())
}

fn run(cli: &Cli) -> Result<String> {
    let bounds = bounds_from_env()?;
    let format = if cli.json { Format::Json } else { cli.format };
    let out = match &cli.command {
        Command::DrTable(args) => with_field!(&args.field, f => dr_table(f, args, &bounds)),
        Command::DrMul { field, a, b } => with_field!(&field.field, f => dr_mul(f, field, a, b, &bounds)),
        Command::FEquiv { field, a, b } => with_field!(&field.field, f => f_equiv_cmd(f, field, a, b)),
        Command::RayClass(args) => with_field!(&args.field, f => ray_class_cmd(f, args, &bounds)),
        Command::ModelCheck { input, cycle } => model_check_cmd(input, cycle.as_deref(), &bounds),
        Command::Chebyshev { n, modulus } => chebyshev_cmd(n, *modulus, cli.jobs),
        Command::PeriodicLocus { family, n, cycle, support } => {
            periodic_locus_cmd(*family, n.as_deref(), cycle.as_deref(), support, cli.jobs)
        }
        Command::Witt { command } => witt_cmd(command, cli.jobs),
        Command::Cotangent { a, q } => cotangent_cmd(a, *q, cli.jobs),
    }?;
    out.render(format)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(s) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Invalid(_) => 1,
                Error::Refused(_) | Error::TooLarge { .. } => 2,
            })
        }
    }
}
