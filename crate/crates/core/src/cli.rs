//! Command-line front end. Every command prints one JSON document on
//! standard output; the exit code carries the answer.

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::PathBuf;

use crate::bounded_gen::{bounded_sequence, commutator_structure};
use crate::diophantine::{
    build_system, export_smtlib, member_product_of_monoids, solve_box_with, KnapsackInstance, SolveOptions,
    SolveOutcome,
};
use crate::error::{Error, Result};
use crate::gap_rewrite::{
    concentrate_consecutive, concentrate_extremes, concentrate_torsion, FiniteAbelian, GapSet, TorsionGapSet,
    TorsionValue,
};
use crate::group_core::{GroupElement, GroupPresentation};
use crate::intser;
use crate::oracle::{bfs_monoid_ball, heis_eval, parse_heis_word, sumset_n_int, DEFAULT_BUDGET};
use crate::subgroup_tools::{coset_index, torsion_free_subgroup, verify_torsion_free};

pub const EXIT_YES: i32 = 0;
pub const EXIT_NO: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nilmonoid", version, about = "Class-2 nilpotent group computations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GroupArg {
    /// Presentation file (JSON).
    #[arg(long)]
    pub group: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a presentation for consistency.
    Check {
        #[command(flatten)]
        group: GroupArg,
    },
    /// Evaluate a word (a list of elements) to normal form.
    Eval {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long)]
        word: String,
    },
    /// Apply a group operation.
    Mul {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long, value_enum, default_value = "multiply")]
        op: Op,
        /// Operands: one element for inverse/power, two for multiply/commutator.
        #[arg(long)]
        args: String,
        /// Exponent for `power`.
        #[arg(long, allow_hyphen_values = true)]
        k: Option<String>,
    },
    /// Decide g ∈ x_1^* ⋯ x_n^* within a box.
    Knapsack {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        #[arg(long, allow_hyphen_values = true)]
        factors: String,
        #[arg(long = "box", default_value_t = 8)]
        bound: u64,
        #[arg(long = "emit-smt")]
        emit_smt: Option<PathBuf>,
    },
    /// Decide g ∈ S_1^* ⋯ S_m^* (requires [G,G] of Hirsch length 1).
    Member {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        /// One generator list per monoid, in product order.
        #[arg(long, required = true, allow_hyphen_values = true)]
        gens: Vec<String>,
        #[arg(long = "box", default_value_t = 8)]
        bound: u64,
        /// State budget of the word search.
        #[arg(long, default_value_t = 200_000)]
        budget: usize,
    },
    /// Emit a bounded generating sequence of a finitely generated submonoid.
    Bgen {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long, allow_hyphen_values = true)]
        gens: String,
    },
    /// Build a torsion-free subgroup of finite index.
    Tfree {
        #[command(flatten)]
        group: GroupArg,
        /// Coset enumeration budget.
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
    },
    /// Run a concentration algorithm on a JSON instance {"A": [...], "s": [...]}.
    Lemma {
        #[arg(long, value_enum)]
        mode: LemmaMode,
        /// Instance file, or inline JSON.
        #[arg(long)]
        input: String,
    },
    /// Brute-force reference computations.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Op {
    Multiply,
    Inverse,
    Power,
    Commutator,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LemmaMode {
    Extremes,
    Consecutive,
    Torsion,
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Values of words of length at most `depth`.
    Ball {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long, allow_hyphen_values = true)]
        gens: String,
        #[arg(long, default_value_t = 8)]
        depth: usize,
    },
    /// The n-fold sumset of a finite integer set.
    Sumset {
        #[arg(long, allow_hyphen_values = true)]
        set: String,
        #[arg(long)]
        n: usize,
    },
    /// Evaluate a word in x, y, z in the unitriangular matrix model.
    Heis {
        #[arg(long, allow_hyphen_values = true)]
        word: String,
    },
}

/// Exit code and the document for standard output.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub code: i32,
    pub body: Value,
}

impl Response {
    fn ok(body: Value) -> Self {
        Response { code: EXIT_YES, body }
    }

    /// Pretty JSON with a `version` field; help and version text pass through.
    pub fn render(&self) -> String {
        if let Value::String(text) = &self.body {
            return text.trim_end().to_string();
        }
        let mut body = self.body.clone();
        if let Value::Object(map) = &mut body {
            map.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
        }
        serde_json::to_string_pretty(&body).expect("JSON values always serialize")
    }
}

fn error_response(err: &Error) -> Response {
    let mut body = json!({ "error": err.to_string() });
    if let Error::Inconsistent(v) = err {
        body["violations"] = Value::Array(v.iter().map(|x| Value::String(x.to_string())).collect());
    }
    if let Error::HirschLength(h) = err {
        body["hirsch_length"] = json!(h);
        body["note"] = Value::String(
            "membership via bounded generation needs h([G,G]) = 1; larger Hirsch length is not supported".into(),
        );
    }
    Response { code: EXIT_ERROR, body }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> Response
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => execute(&cli.command).unwrap_or_else(|e| error_response(&e)),
        Err(e) => {
            match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    Response { code: EXIT_YES, body: Value::String(e.to_string()) }
                }
                _ => Response { code: EXIT_ERROR, body: json!({ "error": e.to_string() }) },
            }
        }
    }
}

fn load_group(arg: &GroupArg) -> Result<GroupPresentation> {
    let text = std::fs::read_to_string(&arg.group)?;
    let v: Value = serde_json::from_str(&text)?;
    let p = GroupPresentation::from_json(&v)?;
    p.check_consistency().into_result()?;
    Ok(p)
}

fn elements_json(xs: &[GroupElement]) -> Value {
    Value::Array(xs.iter().map(|g| Value::String(g.to_string())).collect())
}

fn outcome_code(o: &SolveOutcome) -> i32 {
    match o {
        SolveOutcome::Yes(_) => EXIT_YES,
        SolveOutcome::No(_) => EXIT_NO,
        SolveOutcome::Unknown(_) => EXIT_UNKNOWN,
    }
}

fn outcome_json(o: &SolveOutcome) -> Value {
    match o {
        SolveOutcome::Yes(a) => json!({ "answer": "yes", "alpha": intser::vec_to_json(a) }),
        SolveOutcome::No(r) => json!({ "answer": "no", "reason": r }),
        SolveOutcome::Unknown(r) => json!({ "answer": "unknown", "reason": r }),
    }
}

#[derive(Serialize)]
struct BgenReport {
    #[serde(rename = "K", serialize_with = "intser::serialize")]
    k: BigInt,
    #[serde(serialize_with = "intser::serialize")]
    b: BigInt,
    e: u64,
    n: usize,
    sequence: Vec<String>,
}

#[derive(Deserialize)]
struct LemmaInput {
    #[serde(rename = "A")]
    a: Vec<Value>,
    s: Vec<Value>,
    /// Cyclic orders of the torsion group (torsion mode only).
    #[serde(default)]
    orders: Vec<u64>,
}

fn execute(cmd: &Command) -> Result<Response> {
    match cmd {
        Command::Check { group } => {
            let text = std::fs::read_to_string(&group.group)?;
            let p = GroupPresentation::from_json(&serde_json::from_str(&text)?)?;
            let report = p.check_consistency();
            let violations: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            let body = json!({
                "command": "check",
                "consistent": report.is_ok(),
                "rank": p.rank(),
                "central_rank": p.central_rank(),
                "violations": violations,
            });
            Ok(Response { code: if report.is_ok() { EXIT_YES } else { EXIT_ERROR }, body })
        }
        Command::Eval { group, word } => {
            let p = load_group(group)?;
            let w = p.parse_element_list(word)?;
            let v = p.eval_word(&w);
            Ok(Response::ok(json!({ "command": "eval", "value": v.to_string(), "coordinates": v.to_json() })))
        }
        Command::Mul { group, op, args, k } => {
            let p = load_group(group)?;
            let xs = p.parse_element_list(args)?;
            let arity = match op {
                Op::Multiply | Op::Commutator => 2,
                Op::Inverse | Op::Power => 1,
            };
            if xs.len() != arity {
                return Err(Error::Invalid(format!("{op:?} takes {arity} operand(s), got {}", xs.len())));
            }
            let v = match op {
                Op::Multiply => p.multiply(&xs[0], &xs[1]),
                Op::Commutator => p.commutator(&xs[0], &xs[1]),
                Op::Inverse => p.inverse(&xs[0]),
                Op::Power => {
                    let k = k.as_deref().ok_or_else(|| Error::Invalid("power needs --k".into()))?;
                    let k: BigInt = k.trim().parse().map_err(|_| Error::Parse(format!("bad exponent {k:?}")))?;
                    p.power(&xs[0], &k)
                }
            };
            Ok(Response::ok(json!({ "command": "mul", "value": v.to_string(), "coordinates": v.to_json() })))
        }
        Command::Knapsack { group, target, factors, bound, emit_smt } => {
            let p = load_group(group)?;
            let g = p.parse_element(target)?;
            let xs = p.parse_element_list(factors)?;
            let inst = KnapsackInstance::new(&p, g, xs)?;
            if let Some(path) = emit_smt {
                std::fs::write(path, export_smtlib(&build_system(&inst)?))?;
            }
            let outcome = solve_box_with(&inst, &SolveOptions { box_bound: *bound, ..SolveOptions::default() });
            let mut body = outcome_json(&outcome);
            body["command"] = json!("knapsack");
            if let SolveOutcome::Yes(a) = &outcome {
                let word: Vec<GroupElement> = inst
                    .factors
                    .iter()
                    .zip(a)
                    .flat_map(|(x, k)| std::iter::repeat(x.clone()).take(k.try_into().unwrap_or(0usize)))
                    .collect();
                body["word"] = elements_json(&word);
            }
            Ok(Response { code: outcome_code(&outcome), body })
        }
        Command::Member { group, target, gens, bound, budget } => {
            let p = load_group(group)?;
            let g = p.parse_element(target)?;
            let sets: Vec<Vec<GroupElement>> = gens.iter().map(|s| p.parse_element_list(s)).collect::<Result<_>>()?;
            let cs = commutator_structure(&p)?;
            let opts = SolveOptions { box_bound: *bound, state_budget: *budget, ..SolveOptions::default() };
            let out = member_product_of_monoids(&p, &g, &sets, &cs, opts)?;
            let mut body = outcome_json(&out.outcome);
            body["command"] = json!("member");
            body["factors"] = json!(out.factors);
            if let Some(alpha) = body.as_object_mut().and_then(|m| m.remove("alpha")) {
                body["alpha_nonzero"] = Value::Array(
                    alpha
                        .as_array()
                        .into_iter()
                        .flatten()
                        .enumerate()
                        .filter(|(_, a)| a.as_i64() != Some(0))
                        .map(|(i, a)| json!([i, a]))
                        .collect(),
                );
            }
            if let Some(word) = &out.word {
                let elems: Vec<GroupElement> = word.iter().map(|&(s, k)| sets[s][k].clone()).collect();
                body["word"] = elements_json(&elems);
                body["word_indices"] = json!(word);
            }
            Ok(Response { code: outcome_code(&out.outcome), body })
        }
        Command::Bgen { group, gens } => {
            let p = load_group(group)?;
            let xs = p.parse_element_list(gens)?;
            let cs = commutator_structure(&p)?;
            let seq = bounded_sequence(&p, &xs, &cs)?;
            let report = BgenReport {
                k: seq.k.clone(),
                b: seq.b.clone(),
                e: seq.e,
                n: seq.n,
                sequence: seq.sequence.iter().map(|g| g.to_string()).collect(),
            };
            let mut body = serde_json::to_value(report)?;
            body["command"] = json!("bgen");
            Ok(Response::ok(body))
        }
        Command::Tfree { group, budget } => {
            let p = load_group(group)?;
            let h = torsion_free_subgroup(&p)?;
            let index = coset_index(&p, |g| h.contains(&p, g), *budget)?;
            let body = json!({
                "command": "tfree",
                "generators": elements_json(&h.generators),
                "presentation": h.presentation.to_json(),
                "torsion_free": verify_torsion_free(&h.presentation),
                "index": index,
                "predicted_index": intser::to_json(&h.predicted_index()),
            });
            Ok(Response::ok(body))
        }
        Command::Lemma { mode, input } => run_lemma(*mode, input),
        Command::Oracle { command } => run_oracle(command),
    }
}

fn read_inline_or_file(s: &str) -> Result<String> {
    let t = s.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(s.to_string())
    } else {
        Ok(std::fs::read_to_string(s)?)
    }
}

fn torsion_entry(v: &Value) -> Result<TorsionValue> {
    let parts = v.as_array().filter(|a| a.len() == 2).ok_or_else(|| Error::Parse(format!("expected [int, [int,...]], got {v}")))?;
    let z = intser::from_json(&parts[0]).map_err(Error::Parse)?;
    let t = parts[1]
        .as_array()
        .ok_or_else(|| Error::Parse(format!("torsion part must be a list, got {}", parts[1])))?
        .iter()
        .map(|x| x.as_u64().ok_or_else(|| Error::Parse(format!("bad torsion coordinate {x}"))))
        .collect::<Result<Vec<u64>>>()?;
    Ok(TorsionValue { z, t })
}

fn torsion_json(v: &TorsionValue) -> Value {
    json!([intser::to_json(&v.z), v.t])
}

fn run_lemma(mode: LemmaMode, input: &str) -> Result<Response> {
    let inst: LemmaInput = serde_json::from_str(&read_inline_or_file(input)?)?;
    let body = match mode {
        LemmaMode::Extremes | LemmaMode::Consecutive => {
            let ints = |xs: &[Value]| -> Result<Vec<BigInt>> {
                xs.iter().map(|x| intser::from_json(x).map_err(Error::Parse)).collect()
            };
            let a = GapSet::new(ints(&inst.a)?)?;
            let mut s = ints(&inst.s)?;
            s.sort();
            if let LemmaMode::Extremes = mode {
                let out = concentrate_extremes(&s, &a)?;
                json!({ "s": intser::vec_to_json(&out.sequence), "iterations": out.iterations, "b": intser::to_json(a.max_gap()) })
            } else {
                let (k, out) = concentrate_consecutive(&s, &a)?;
                json!({ "s": intser::vec_to_json(&out.sequence), "iterations": out.iterations, "k": k, "b": intser::to_json(a.max_gap()) })
            }
        }
        LemmaMode::Torsion => {
            let group = FiniteAbelian::new(inst.orders.clone())?;
            let a = TorsionGapSet::new(group, inst.a.iter().map(torsion_entry).collect::<Result<_>>()?)?;
            let mut s: Vec<TorsionValue> = inst.s.iter().map(torsion_entry).collect::<Result<_>>()?;
            s.sort();
            let out = concentrate_torsion(&s, &a)?;
            json!({
                "s": out.sequence.iter().map(torsion_json).collect::<Vec<_>>(),
                "iterations": out.iterations,
                "b": intser::to_json(a.projection().max_gap()),
                "e": a.group().size(),
            })
        }
    };
    let mut body = body;
    body["command"] = json!("lemma");
    Ok(Response::ok(body))
}

fn run_oracle(cmd: &OracleCommand) -> Result<Response> {
    match cmd {
        OracleCommand::Ball { group, gens, depth } => {
            let p = load_group(group)?;
            let xs = p.parse_element_list(gens)?;
            let ball = bfs_monoid_ball(&p, &xs, *depth, DEFAULT_BUDGET)?;
            let mut elems = ball.elements().to_vec();
            elems.sort();
            Ok(Response::ok(json!({
                "command": "oracle ball",
                "depth": depth,
                "size": ball.len(),
                "elements": elements_json(&elems),
            })))
        }
        OracleCommand::Sumset { set, n } => {
            let v: Value = serde_json::from_str(set)?;
            let a = intser::vec_from_json(&v).map_err(Error::Parse)?;
            if *n == 0 {
                return Err(Error::Invalid("n must be at least 1".into()));
            }
            let s: Vec<BigInt> = sumset_n_int(&a, *n).into_iter().collect();
            Ok(Response::ok(json!({ "command": "oracle sumset", "n": n, "sumset": intser::vec_to_json(&s) })))
        }
        OracleCommand::Heis { word } => {
            let m = heis_eval(&parse_heis_word(word)?);
            Ok(Response::ok(json!({
                "command": "oracle heis",
                "matrix": [intser::to_json(&m.alpha), intser::to_json(&m.gamma), intser::to_json(&m.beta)],
                "element": m.to_element().to_string(),
            })))
        }
    }
}
