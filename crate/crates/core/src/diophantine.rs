//! Knapsack instances `g ∈ x_1^* ⋯ x_n^*` as exponent equations, and a
//! bounded, always-verified search for witnesses.
//!
//! In collected coordinates, `x_1^α_1 ⋯ x_n^α_n` has main part `Σ α_i e_i`
//! and central part
//! `Σ α_i f_i + Σ binom(α_i, 2) Q(e_i, e_i) + Σ_{i<j} α_i α_j Q(e_i, e_j)`
//! before reduction. Reduction of a torsion coordinate `a_j` introduces one
//! integer unknown `q_j` (the carry) per finite main order; finite central
//! orders turn equations into congruences. Central equations are stored
//! doubled so that `binom(α, 2)` has integer coefficients.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use crate::bounded_gen::{bounded_sequence, CommutatorStructure};
use crate::error::{Error, Result};
use crate::group_core::{GroupElement, GroupPresentation, Order};
use crate::subgroup_tools::{kernel_basis, solve, IntMatrix};

/// `g ∈ x_1^* ⋯ x_n^*`, optionally annotated with the block structure of
/// the factor list.
#[derive(Clone, Debug)]
pub struct KnapsackInstance {
    pub presentation: GroupPresentation,
    pub target: GroupElement,
    pub factors: Vec<GroupElement>,
    /// Consecutive runs of the factor list of the form `pattern^reps`.
    pub segments: Vec<Segment>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub period: usize,
    pub reps: usize,
}

impl KnapsackInstance {
    pub fn new(p: &GroupPresentation, target: GroupElement, factors: Vec<GroupElement>) -> Result<Self> {
        p.validate(&target)?;
        for x in &factors {
            p.validate(x)?;
        }
        Ok(KnapsackInstance { presentation: p.clone(), target, factors, segments: Vec::new() })
    }

    pub fn with_segments(mut self, segments: Vec<Segment>) -> Result<Self> {
        let mut pos = 0;
        for s in &segments {
            if s.start != pos || s.period == 0 {
                return Err(Error::Invalid("segments must tile the factor list".into()));
            }
            for r in 1..s.reps {
                for k in 0..s.period {
                    if self.factors.get(s.start + r * s.period + k) != self.factors.get(s.start + k) {
                        return Err(Error::Invalid("segment is not a repeated pattern".into()));
                    }
                }
            }
            pos += s.period * s.reps;
        }
        if pos != self.factors.len() {
            return Err(Error::Invalid("segments must tile the factor list".into()));
        }
        self.segments = segments;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn product(&self, alpha: &[BigInt]) -> GroupElement {
        let p = &self.presentation;
        self.factors
            .iter()
            .zip(alpha)
            .fold(p.identity(), |acc, (x, a)| p.multiply(&acc, &p.power(x, a)))
    }
}

/// A polynomial of degree at most 2 with integer coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Poly {
    pub constant: BigInt,
    pub linear: BTreeMap<usize, BigInt>,
    pub quadratic: BTreeMap<(usize, usize), BigInt>,
}

impl Poly {
    pub fn constant(c: impl Into<BigInt>) -> Self {
        Poly { constant: c.into(), ..Default::default() }
    }

    pub fn add_linear(&mut self, v: usize, c: &BigInt) {
        if !c.is_zero() {
            *self.linear.entry(v).or_default() += c;
        }
    }

    pub fn add_quadratic(&mut self, i: usize, j: usize, c: &BigInt) {
        if !c.is_zero() {
            *self.quadratic.entry((i.min(j), i.max(j))).or_default() += c;
        }
    }

    fn prune(&mut self) {
        self.linear.retain(|_, c| !c.is_zero());
        self.quadratic.retain(|_, c| !c.is_zero());
    }

    pub fn eval(&self, x: &[BigInt]) -> BigInt {
        let mut acc = self.constant.clone();
        for (&v, c) in &self.linear {
            acc += c * &x[v];
        }
        for (&(i, j), c) in &self.quadratic {
            acc += c * &x[i] * &x[j];
        }
        acc
    }

    pub fn is_linear(&self) -> bool {
        self.quadratic.is_empty()
    }
}

/// `poly = 0`, or `poly ≡ 0 (mod m)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub poly: Poly,
    pub modulus: Option<BigInt>,
}

impl Constraint {
    pub fn holds(&self, x: &[BigInt]) -> bool {
        let v = self.poly.eval(x);
        match &self.modulus {
            None => v.is_zero(),
            Some(m) => v.mod_floor(m).is_zero(),
        }
    }
}

/// Carry unknown of a torsion main coordinate; free sign, determined by α.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuxVar {
    pub coordinate: usize,
    pub modulus: BigInt,
    /// Index of the linear equation `Σ α_i e_ij - m q - t = 0` defining it.
    pub equation: usize,
}

/// Unknowns `α_1..α_n ≥ 0` (indices `0..n`) followed by carries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiophantineSystem {
    pub n: usize,
    pub aux: Vec<AuxVar>,
    pub linear: Vec<Constraint>,
    pub quadratic: Vec<Constraint>,
}

impl DiophantineSystem {
    /// A system without carry unknowns.
    pub fn new(n: usize, linear: Vec<Constraint>, quadratic: Vec<Constraint>) -> Self {
        DiophantineSystem { n, aux: Vec::new(), linear, quadratic }
    }

    pub fn variable_count(&self) -> usize {
        self.n + self.aux.len()
    }

    pub fn variable_name(&self, v: usize) -> String {
        if v < self.n {
            format!("a{}", v + 1)
        } else {
            format!("q{}", self.aux[v - self.n].coordinate + 1)
        }
    }

    /// Full assignment for `α`, or `None` if some carry is not integral.
    pub fn assignment(&self, alpha: &[BigInt]) -> Option<Vec<BigInt>> {
        if alpha.len() != self.n {
            return None;
        }
        let mut x = alpha.to_vec();
        x.resize(self.variable_count(), BigInt::zero());
        for (k, a) in self.aux.iter().enumerate() {
            let v = self.n + k;
            // With q = 0 the defining equation evaluates to m q.
            let raw = self.linear[a.equation].poly.eval(&x);
            let (q, r) = raw.div_mod_floor(&a.modulus);
            if !r.is_zero() {
                return None;
            }
            x[v] = q;
        }
        Some(x)
    }

    pub fn satisfies(&self, alpha: &[BigInt]) -> bool {
        if alpha.iter().any(|a| a.is_negative()) {
            return false;
        }
        match self.assignment(alpha) {
            Some(x) => self.linear.iter().chain(&self.quadratic).all(|c| c.holds(&x)),
            None => false,
        }
    }
}

fn normalized_target(inst: &KnapsackInstance) -> GroupElement {
    let t = &inst.target;
    inst.presentation.normalize(t.e.clone(), t.f.clone())
}

/// One equation per main coordinate, with carries for finite orders.
fn linear_part(inst: &KnapsackInstance) -> (Vec<Constraint>, Vec<AuxVar>) {
    let p = &inst.presentation;
    let n = inst.factors.len();
    let target = normalized_target(inst);
    let mut linear = Vec::new();
    let mut aux = Vec::new();
    for (j, g) in p.main_generators().iter().enumerate() {
        let mut poly = Poly::constant(-&target.e[j]);
        for (i, x) in inst.factors.iter().enumerate() {
            poly.add_linear(i, &x.e[j]);
        }
        if let Order::Finite(m) = &g.order {
            poly.add_linear(n + aux.len(), &-m);
            aux.push(AuxVar { coordinate: j, modulus: m.clone(), equation: linear.len() });
        }
        linear.push(Constraint { poly, modulus: None });
    }
    (linear, aux)
}

/// The exponent equations of `inst`; their solutions with `α ≥ 0` are
/// exactly the knapsack witnesses.
pub fn build_system(inst: &KnapsackInstance) -> Result<DiophantineSystem> {
    let p = &inst.presentation;
    p.check_consistency().into_result()?;
    let n = inst.factors.len();
    let (linear, aux) = linear_part(inst);
    let target = normalized_target(inst);
    let two = BigInt::from(2);
    let mut quadratic = Vec::new();
    let self_q: Vec<Vec<BigInt>> = inst.factors.iter().map(|x| p.collect(&x.e, &x.e)).collect();
    for k in 0..p.central_rank() {
        let mut poly = Poly::constant(-&two * &target.f[k]);
        for (i, x) in inst.factors.iter().enumerate() {
            // 2 binom(α, 2) q + 2 α f = α² q + α (2f - q).
            poly.add_linear(i, &(&two * &x.f[k] - &self_q[i][k]));
            poly.add_quadratic(i, i, &self_q[i][k]);
            for (j, y) in inst.factors.iter().enumerate().skip(i + 1) {
                let q = p.collect(&x.e, &y.e);
                poly.add_quadratic(i, j, &(&two * &q[k]));
            }
        }
        for (t, a) in aux.iter().enumerate() {
            let pk = &p.main_generators()[a.coordinate].power[k];
            poly.add_linear(n + t, &(&two * pk));
        }
        poly.prune();
        let modulus = p.central_orders()[k].modulus().map(|o| o * &two);
        quadratic.push(Constraint { poly, modulus });
    }
    Ok(DiophantineSystem { n, aux, linear, quadratic })
}

pub fn verify_witness(inst: &KnapsackInstance, alpha: &[BigInt]) -> bool {
    alpha.len() == inst.factors.len()
        && alpha.iter().all(|a| !a.is_negative())
        && inst.product(alpha) == normalized_target(inst)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Precheck {
    /// A verified solution was determined by the linear part alone.
    Feasible(Vec<BigInt>),
    Infeasible(String),
    Unknown,
}

/// Sound refutation from the linear equations: sign and gcd tests per
/// equation, forced zeros under `α ≥ 0`, integer solvability of the whole
/// linear system, and a full check when the linear part pins `α` down.
pub fn linear_precheck(sys: &DiophantineSystem) -> Precheck {
    precheck(&sys.linear, sys.n, sys.aux.len(), |a| sys.satisfies(a))
}

fn precheck<F>(linear: &[Constraint], n: usize, n_aux: usize, full: F) -> Precheck
where
    F: Fn(&[BigInt]) -> bool,
{
    let mut zero = vec![false; n];
    loop {
        let mut changed = false;
        for (k, c) in linear.iter().enumerate() {
            let live: Vec<(usize, &BigInt)> = c
                .poly
                .linear
                .iter()
                .filter(|(&v, x)| !x.is_zero() && (v >= n || !zero[v]))
                .map(|(&v, x)| (v, x))
                .collect();
            let rhs = -&c.poly.constant;
            let m = c.modulus.clone().unwrap_or_else(BigInt::zero);
            let g = live.iter().fold(m.clone(), |g, (_, x)| g.gcd(x));
            if g.is_zero() {
                if !rhs.is_zero() {
                    return Precheck::Infeasible(format!("equation {}: 0 = {rhs}", k + 1));
                }
                continue;
            }
            if !rhs.is_multiple_of(&g) {
                return Precheck::Infeasible(format!("equation {}: gcd {g} does not divide {rhs}", k + 1));
            }
            if c.modulus.is_some() || live.iter().any(|(v, _)| *v >= n) {
                continue;
            }
            let nonneg = live.iter().all(|(_, x)| x.is_positive());
            let nonpos = live.iter().all(|(_, x)| x.is_negative());
            if (nonneg && rhs.is_negative()) || (nonpos && rhs.is_positive()) {
                return Precheck::Infeasible(format!(
                    "equation {}: coefficients of one sign cannot reach {rhs} with nonnegative exponents",
                    k + 1
                ));
            }
            if (nonneg || nonpos) && rhs.is_zero() {
                for (v, _) in live {
                    zero[v] = true;
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // Integer solvability over the remaining unknowns; identical columns are
    // merged since their sum ranges over the same integers.
    let eqs: Vec<&Constraint> = linear.iter().filter(|c| c.modulus.is_none()).collect();
    let free: Vec<usize> = (0..n).filter(|&v| !zero[v]).chain(n..n + n_aux).collect();
    let column = |v: usize| -> Vec<BigInt> {
        eqs.iter().map(|c| c.poly.linear.get(&v).cloned().unwrap_or_default()).collect()
    };
    let mut distinct: Vec<Vec<BigInt>> = Vec::new();
    let mut owner: Vec<usize> = Vec::new();
    let mut duplicated = false;
    for &v in &free {
        let col = column(v);
        if distinct.contains(&col) {
            duplicated |= v < n;
        } else {
            distinct.push(col);
            owner.push(v);
        }
    }
    let rows: Vec<Vec<BigInt>> = (0..eqs.len())
        .map(|r| distinct.iter().map(|c| c[r].clone()).collect())
        .collect();
    let rhs: Vec<BigInt> = eqs.iter().map(|c| -&c.poly.constant).collect();
    if !eqs.is_empty() && !distinct.is_empty() {
        let mat = IntMatrix::from_rows(&rows, distinct.len());
        let Some(sol) = solve(&mat, &rhs) else {
            return Precheck::Infeasible("linear equations have no integer solution".into());
        };
        if !duplicated && kernel_basis(&mat).is_empty() {
            let mut alpha = vec![BigInt::zero(); n];
            for (x, &v) in sol.iter().zip(&owner) {
                if v < n {
                    if x.is_negative() {
                        return Precheck::Infeasible(format!("unique linear solution has a{} = {x} < 0", v + 1));
                    }
                    alpha[v] = x.clone();
                }
            }
            return if full(&alpha) {
                Precheck::Feasible(alpha)
            } else {
                Precheck::Infeasible("the unique solution of the linear part violates the remaining constraints".into())
            };
        }
    }
    if zero.iter().all(|&z| z) && n_aux == 0 {
        let alpha = vec![BigInt::zero(); n];
        return if full(&alpha) {
            Precheck::Feasible(alpha)
        } else {
            Precheck::Infeasible("all exponents are forced to 0 and the identity differs from the target".into())
        };
    }
    Precheck::Unknown
}

/// Result of a bounded search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    Yes(Vec<BigInt>),
    No(String),
    Unknown(String),
}

impl SolveOutcome {
    pub fn is_yes(&self) -> bool {
        matches!(self, SolveOutcome::Yes(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            SolveOutcome::Yes(_) => "yes",
            SolveOutcome::No(_) => "no",
            SolveOutcome::Unknown(_) => "unknown",
        }
    }
}

impl fmt::Display for SolveOutcome {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            SolveOutcome::Yes(a) => {
                let parts: Vec<String> = a.iter().map(|x| x.to_string()).collect();
                write!(f, "yes ({})", parts.join(","))
            }
            SolveOutcome::No(r) => write!(f, "no: {r}"),
            SolveOutcome::Unknown(r) => write!(f, "unknown: {r}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Exponent bound `B`.
    pub box_bound: u64,
    /// Search nodes allowed for box enumeration.
    pub node_budget: u64,
    /// States allowed for the word search on structured instances.
    pub state_budget: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { box_bound: 8, node_budget: 5_000_000, state_budget: 200_000 }
    }
}

pub fn solve_box(inst: &KnapsackInstance, b: u64) -> SolveOutcome {
    solve_box_with(inst, &SolveOptions { box_bound: b, ..SolveOptions::default() })
}

/// Searches `α ∈ [0, B]^n`. `Yes` is always verified by evaluation; `No` is
/// only returned on a sound refutation.
pub fn solve_box_with(inst: &KnapsackInstance, opts: &SolveOptions) -> SolveOutcome {
    let outcome = solve_inner(inst, opts, None);
    if let SolveOutcome::Yes(a) = &outcome {
        assert!(verify_witness(inst, a), "solver produced an unverified witness");
    }
    outcome
}

fn solve_inner(inst: &KnapsackInstance, opts: &SolveOptions, search: Option<&mut ProductSearch>) -> SolveOutcome {
    let n = inst.factors.len();
    let target = normalized_target(inst);
    if n == 0 {
        return if target == inst.presentation.identity() {
            SolveOutcome::Yes(vec![])
        } else {
            SolveOutcome::No("the empty product is the identity".into())
        };
    }
    let (linear, aux) = linear_part(inst);
    match precheck(&linear, n, aux.len(), |a| verify_witness(inst, a)) {
        Precheck::Infeasible(r) => return SolveOutcome::No(r),
        Precheck::Feasible(a) => return SolveOutcome::Yes(a),
        Precheck::Unknown => {}
    }
    if verify_witness(inst, &vec![BigInt::zero(); n]) {
        return SolveOutcome::Yes(vec![BigInt::zero(); n]);
    }
    let b = opts.box_bound;
    if b == 0 {
        return SolveOutcome::Unknown("box [0,0] holds only the identity".into());
    }
    if !inst.segments.is_empty() {
        let mut own;
        let search = match search {
            Some(s) => s,
            None => {
                let sets: Vec<Vec<GroupElement>> = inst
                    .segments
                    .iter()
                    .map(|s| inst.factors[s.start..s.start + s.period].to_vec())
                    .collect();
                let depth = inst.segments.iter().map(|s| s.reps).min().unwrap_or(0);
                own = ProductSearch::new(&inst.presentation, sets, depth, opts.state_budget);
                &mut own
            }
        };
        return segmented(inst, search, b);
    }
    let box_size = (b as f64 + 1.0).powi(n as i32);
    if box_size <= opts.node_budget as f64 {
        match BoxSearch::new(inst, b).run(u64::MAX) {
            Some(a) => SolveOutcome::Yes(a),
            None => SolveOutcome::Unknown(format!("no witness in [0,{b}]^{n}")),
        }
    } else {
        weighted_search(inst, b, opts.node_budget)
    }
}

/// Lexicographic enumeration of the box with incremental products and
/// interval pruning on the infinite main coordinates.
struct BoxSearch<'a> {
    inst: &'a KnapsackInstance,
    target: GroupElement,
    powers: Vec<Vec<GroupElement>>,
    coords: Vec<usize>,
    suffix_min: Vec<Vec<BigInt>>,
    suffix_max: Vec<Vec<BigInt>>,
    nodes: u64,
}

impl<'a> BoxSearch<'a> {
    fn new(inst: &'a KnapsackInstance, b: u64) -> Self {
        let p = &inst.presentation;
        let n = inst.factors.len();
        let powers = inst
            .factors
            .iter()
            .map(|x| (0..=b).map(|k| p.power(x, &BigInt::from(k))).collect())
            .collect();
        let coords: Vec<usize> =
            (0..p.rank()).filter(|&j| p.main_generators()[j].order.is_infinite()).collect();
        let bb = BigInt::from(b);
        let mut suffix_min = vec![vec![BigInt::zero(); coords.len()]; n + 1];
        let mut suffix_max = suffix_min.clone();
        for i in (0..n).rev() {
            for (c, &j) in coords.iter().enumerate() {
                let v = &inst.factors[i].e[j] * &bb;
                suffix_min[i][c] = &suffix_min[i + 1][c] + v.clone().min(BigInt::zero());
                suffix_max[i][c] = &suffix_max[i + 1][c] + v.max(BigInt::zero());
            }
        }
        BoxSearch { inst, target: normalized_target(inst), powers, coords, suffix_min, suffix_max, nodes: 0 }
    }

    fn run(&mut self, budget: u64) -> Option<Vec<BigInt>> {
        let mut alpha = Vec::with_capacity(self.powers.len());
        let id = self.inst.presentation.identity();
        self.dfs(0, &id, &mut alpha, budget).flatten()
    }

    /// `None` when the node budget ran out.
    fn dfs(&mut self, i: usize, acc: &GroupElement, alpha: &mut Vec<BigInt>, budget: u64) -> Option<Option<Vec<BigInt>>> {
        self.nodes += 1;
        if self.nodes > budget {
            return None;
        }
        for (c, &j) in self.coords.iter().enumerate() {
            let need = &self.target.e[j] - &acc.e[j];
            if need < self.suffix_min[i][c] || need > self.suffix_max[i][c] {
                return Some(None);
            }
        }
        if i == self.powers.len() {
            return Some((acc == &self.target).then(|| alpha.clone()));
        }
        let p = &self.inst.presentation;
        for k in 0..self.powers[i].len() {
            let next = p.multiply(acc, &self.powers[i][k]);
            alpha.push(BigInt::from(k));
            let r = self.dfs(i + 1, &next, alpha, budget);
            alpha.pop();
            match r {
                None => return None,
                Some(Some(w)) => return Some(Some(w)),
                Some(None) => {}
            }
        }
        Some(None)
    }
}

/// Iterative deepening on `Σ α_i` for boxes too large to enumerate.
fn weighted_search(inst: &KnapsackInstance, b: u64, budget: u64) -> SolveOutcome {
    let p = &inst.presentation;
    let target = normalized_target(inst);
    let n = inst.factors.len();
    let mut nodes = 0u64;
    let max_weight = b.saturating_mul(n as u64);
    for w in 1..=max_weight {
        let mut alpha = vec![0u64; n];
        match weight_dfs(inst, &target, 0, &p.identity(), w, b, &mut alpha, &mut nodes, budget) {
            Some(true) => return SolveOutcome::Yes(alpha.iter().map(|&a| BigInt::from(a)).collect()),
            Some(false) => {}
            None => {
                return SolveOutcome::Unknown(format!(
                    "search budget of {budget} nodes exhausted below total exponent {w}"
                ))
            }
        }
    }
    SolveOutcome::Unknown(format!("no witness in [0,{b}]^{n}"))
}

#[allow(clippy::too_many_arguments)]
fn weight_dfs(
    inst: &KnapsackInstance,
    target: &GroupElement,
    i: usize,
    acc: &GroupElement,
    left: u64,
    b: u64,
    alpha: &mut [u64],
    nodes: &mut u64,
    budget: u64,
) -> Option<bool> {
    *nodes += 1;
    if *nodes > budget {
        return None;
    }
    if left == 0 {
        return Some(acc == target);
    }
    if i == alpha.len() {
        return Some(false);
    }
    let p = &inst.presentation;
    for k in (0..=b.min(left)).rev() {
        let next = if k == 0 { acc.clone() } else { p.multiply(acc, &p.power(&inst.factors[i], &BigInt::from(k))) };
        alpha[i] = k;
        if weight_dfs(inst, target, i + 1, &next, left - k, b, alpha, nodes, budget)? {
            return Some(true);
        }
    }
    alpha[i] = 0;
    Some(false)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Step {
    Letter(usize),
    Advance,
}

/// Breadth-first search over words in `S_1^* ⋯ S_m^*`, by word length.
///
/// The explored part is kept between queries, so one search serves any
/// number of targets for the same generator sets.
#[derive(Clone, Debug)]
pub struct ProductSearch {
    presentation: GroupPresentation,
    sets: Vec<Vec<GroupElement>>,
    states: Vec<(usize, GroupElement)>,
    index: HashMap<(usize, GroupElement), usize>,
    first: HashMap<GroupElement, usize>,
    parent: Vec<Option<(usize, Step)>>,
    layer_start: usize,
    depth: usize,
    max_depth: usize,
    budget: usize,
    overflow: bool,
}

/// Outcome of a word search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WordSearch {
    /// A shortest word, as `(set, generator)` pairs.
    Found(Vec<(usize, usize)>),
    /// The whole product set was enumerated without meeting the target.
    Absent,
    /// Depth or state limit reached.
    Unknown(String),
}

impl ProductSearch {
    pub fn new(p: &GroupPresentation, sets: Vec<Vec<GroupElement>>, max_depth: usize, budget: usize) -> Self {
        let mut s = ProductSearch {
            presentation: p.clone(),
            sets,
            states: Vec::new(),
            index: HashMap::new(),
            first: HashMap::new(),
            parent: Vec::new(),
            layer_start: 0,
            depth: 0,
            max_depth,
            budget,
            overflow: false,
        };
        s.insert(0, p.identity(), None);
        s
    }

    fn insert(&mut self, seg: usize, g: GroupElement, parent: Option<(usize, Step)>) {
        let mut parent = parent;
        for s in seg..self.sets.len().max(1) {
            let key = (s, g.clone());
            if self.index.contains_key(&key) {
                return;
            }
            let id = self.states.len();
            self.index.insert(key, id);
            self.first.entry(g.clone()).or_insert(id);
            self.states.push((s, g.clone()));
            self.parent.push(parent);
            parent = Some((id, Step::Advance));
        }
    }

    fn expand(&mut self) {
        let end = self.states.len();
        for i in self.layer_start..end {
            let (seg, g) = self.states[i].clone();
            let Some(set) = self.sets.get(seg) else { continue };
            for (k, x) in set.clone().iter().enumerate() {
                if self.states.len() >= self.budget {
                    self.overflow = true;
                    return;
                }
                let h = self.presentation.multiply(&g, x);
                self.insert(seg, h, Some((i, Step::Letter(k))));
            }
        }
        self.layer_start = end;
        self.depth += 1;
    }

    fn word(&self, mut i: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        while let Some((p, step)) = self.parent[i] {
            if let Step::Letter(k) = step {
                out.push((self.states[p].0, k));
            }
            i = p;
        }
        out.reverse();
        out
    }

    pub fn explored(&self) -> usize {
        self.states.len()
    }

    pub fn find(&mut self, target: &GroupElement) -> WordSearch {
        loop {
            if let Some(&i) = self.first.get(target) {
                return WordSearch::Found(self.word(i));
            }
            if self.overflow {
                return WordSearch::Unknown(format!("state budget of {} exhausted at length {}", self.budget, self.depth));
            }
            if self.layer_start == self.states.len() {
                return WordSearch::Absent;
            }
            if self.depth >= self.max_depth {
                return WordSearch::Unknown(format!("words up to length {} searched", self.max_depth));
            }
            self.expand();
        }
    }
}

/// Places a word of `S_1^* ⋯ S_m^*` onto the repeated-pattern factor list.
fn word_to_alpha(inst: &KnapsackInstance, word: &[(usize, usize)], b: u64) -> Option<Vec<BigInt>> {
    let mut alpha = vec![BigInt::zero(); inst.factors.len()];
    let mut runs: Vec<(usize, usize, u64)> = Vec::new();
    for &(s, k) in word {
        match runs.last_mut() {
            Some(last) if last.0 == s && last.1 == k => last.2 += 1,
            _ => runs.push((s, k, 1)),
        }
    }
    let mut seg = 0;
    let mut rep = 0;
    let mut pos: Option<usize> = None;
    for (s, k, mut count) in runs {
        if s != seg {
            seg = s;
            rep = 0;
            pos = None;
        }
        let segment = &inst.segments[s];
        while count > 0 {
            if pos.is_some_and(|p| p >= k) {
                rep += 1;
            }
            if rep >= segment.reps {
                return None;
            }
            let take = count.min(b);
            alpha[segment.start + rep * segment.period + k] += take;
            count -= take;
            pos = Some(k);
        }
    }
    Some(alpha)
}

fn segmented(inst: &KnapsackInstance, search: &mut ProductSearch, b: u64) -> SolveOutcome {
    match search.find(&normalized_target(inst)) {
        WordSearch::Found(word) => match word_to_alpha(inst, &word, b) {
            Some(a) => SolveOutcome::Yes(a),
            None => SolveOutcome::Unknown(format!("a word of length {} was found but does not fit the box", word.len())),
        },
        WordSearch::Absent => SolveOutcome::No("the product set is finite and was enumerated completely".into()),
        WordSearch::Unknown(r) => SolveOutcome::Unknown(r),
    }
}

/// `member` answer: the solver outcome over the concatenated bounded
/// generating sequences, and for `Yes` a generator word.
#[derive(Clone, Debug)]
pub struct MemberOutcome {
    pub outcome: SolveOutcome,
    /// For `Yes`: `(set, generator)` pairs whose product is the target.
    pub word: Option<Vec<(usize, usize)>>,
    pub factors: usize,
}

/// Reusable membership pipeline for fixed `S_1, …, S_m`.
pub struct MemberSolver {
    presentation: GroupPresentation,
    factors: Vec<GroupElement>,
    segments: Vec<Segment>,
    set_index: Vec<usize>,
    opts: SolveOptions,
    search: ProductSearch,
}

impl MemberSolver {
    pub fn new(
        p: &GroupPresentation,
        sets: &[Vec<GroupElement>],
        cs: &CommutatorStructure,
        opts: SolveOptions,
    ) -> Result<Self> {
        cs.require_h1()?;
        let mut factors = Vec::new();
        let mut segments = Vec::new();
        let mut set_index = Vec::new();
        let mut used = Vec::new();
        for (j, s) in sets.iter().enumerate() {
            if s.is_empty() {
                continue;
            }
            for x in s {
                p.validate(x)?;
            }
            let seq = bounded_sequence(p, s, cs)?;
            let reps = seq.sequence.len() / s.len();
            segments.push(Segment { start: factors.len(), period: s.len(), reps });
            factors.extend(seq.sequence);
            set_index.push(j);
            used.push(s.clone());
        }
        let depth = segments.iter().map(|s| s.reps).min().unwrap_or(0);
        let search = ProductSearch::new(p, used, depth, opts.state_budget);
        Ok(MemberSolver { presentation: p.clone(), factors, segments, set_index, opts, search })
    }

    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    pub fn query(&mut self, g: &GroupElement) -> Result<MemberOutcome> {
        let inst = KnapsackInstance::new(&self.presentation, g.clone(), self.factors.clone())?
            .with_segments(self.segments.clone())?;
        let outcome = solve_inner(&inst, &self.opts, Some(&mut self.search));
        let word = match &outcome {
            SolveOutcome::Yes(a) => {
                if !verify_witness(&inst, a) {
                    return Err(Error::Internal("unverified membership witness".into()));
                }
                Some(self.alpha_to_word(a))
            }
            _ => None,
        };
        Ok(MemberOutcome { outcome, word, factors: self.factors.len() })
    }

    fn alpha_to_word(&self, alpha: &[BigInt]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (j, s) in self.segments.iter().enumerate() {
            for i in s.start..s.start + s.period * s.reps {
                let k = (i - s.start) % s.period;
                let count = alpha[i].to_usize().unwrap_or(0);
                out.extend(std::iter::repeat((self.set_index[j], k)).take(count));
            }
        }
        out
    }
}

/// Decides (within limits) `g ∈ S_1^* ⋯ S_m^*` through bounded generation.
pub fn member_product_of_monoids(
    p: &GroupPresentation,
    g: &GroupElement,
    sets: &[Vec<GroupElement>],
    cs: &CommutatorStructure,
    opts: SolveOptions,
) -> Result<MemberOutcome> {
    MemberSolver::new(p, sets, cs, opts)?.query(g)
}

fn smt_int(x: &BigInt) -> String {
    if x.is_negative() {
        format!("(- {})", -x)
    } else {
        x.to_string()
    }
}

fn smt_poly(sys: &DiophantineSystem, p: &Poly) -> String {
    let mut terms = Vec::new();
    for (&(i, j), c) in &p.quadratic {
        terms.push(format!("(* {} {} {})", smt_int(c), sys.variable_name(i), sys.variable_name(j)));
    }
    for (&v, c) in &p.linear {
        terms.push(format!("(* {} {})", smt_int(c), sys.variable_name(v)));
    }
    if !p.constant.is_zero() || terms.is_empty() {
        terms.push(smt_int(&p.constant));
    }
    if terms.len() == 1 {
        terms.pop().unwrap()
    } else {
        format!("(+ {})", terms.join(" "))
    }
}

/// SMT-LIB 2 script (`QF_NIA`) asserting the system with `α ≥ 0`.
pub fn export_smtlib(sys: &DiophantineSystem) -> String {
    let mut out = String::new();
    out.push_str("(set-logic QF_NIA)\n");
    for v in 0..sys.variable_count() {
        writeln!(out, "(declare-const {} Int)", sys.variable_name(v)).unwrap();
    }
    for v in 0..sys.n {
        writeln!(out, "(assert (>= {} 0))", sys.variable_name(v)).unwrap();
    }
    for c in sys.linear.iter().chain(&sys.quadratic) {
        let body = smt_poly(sys, &c.poly);
        match &c.modulus {
            None => writeln!(out, "(assert (= {body} 0))").unwrap(),
            Some(m) => writeln!(out, "(assert (= (mod {body} {m}) 0))").unwrap(),
        }
    }
    out.push_str("(check-sat)\n(get-model)\n");
    out
}

/// Reads `α` back from `name = value` pairs of a model.
pub fn alpha_from_model(sys: &DiophantineSystem, model: &HashMap<String, BigInt>) -> Option<Vec<BigInt>> {
    (0..sys.n).map(|v| model.get(&sys.variable_name(v)).cloned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn ints(xs: &[i64]) -> Vec<BigInt> {
        xs.iter().map(|&x| BigInt::from(x)).collect()
    }

    fn h3() -> GroupPresentation {
        GroupPresentation::heisenberg()
    }

    fn commutator_instance(target: &str) -> KnapsackInstance {
        let p = h3();
        let (x, y) = (p.main_gen(0), p.main_gen(1));
        let factors = vec![x.clone(), y.clone(), p.inverse(&x), p.inverse(&y)];
        KnapsackInstance::new(&p, target.parse().unwrap(), factors).unwrap()
    }

    fn linear_eq(coeffs: &[i64], rhs: i64) -> Constraint {
        let mut poly = Poly::constant(-rhs);
        for (i, &c) in coeffs.iter().enumerate() {
            poly.add_linear(i, &BigInt::from(c));
        }
        Constraint { poly, modulus: None }
    }

    #[test]
    fn commutator_system_matches_evaluation() {
        let inst = commutator_instance("(0,0|1)");
        let sys = build_system(&inst).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let alpha = ints(&[a, b, c, d]);
                        assert_eq!(sys.satisfies(&alpha), verify_witness(&inst, &alpha));
                        assert_eq!(sys.satisfies(&alpha), a == c && b == d && a * b == 1);
                    }
                }
            }
        }
    }

    #[test]
    fn trivial_systems() {
        let p = h3();
        let x = p.main_gen(0);
        let inst = KnapsackInstance::new(&p, p.identity(), vec![x.clone(), p.main_gen(1)]).unwrap();
        assert!(build_system(&inst).unwrap().satisfies(&ints(&[0, 0])));
        let inst = KnapsackInstance::new(&p, p.power_i64(&x, 3), vec![x]).unwrap();
        let sys = build_system(&inst).unwrap();
        assert_eq!((0..6).filter(|&k| sys.satisfies(&ints(&[k]))).collect::<Vec<_>>(), vec![3]);
    }

    #[test]
    fn solve_examples() {
        assert_eq!(solve_box(&commutator_instance("(0,0|1)"), 3), SolveOutcome::Yes(ints(&[1, 1, 1, 1])));
        let p = h3();
        let inst = KnapsackInstance::new(&p, p.central_gen(0), vec![p.main_gen(0), p.main_gen(1)]).unwrap();
        for b in [0, 3, 50] {
            assert!(matches!(solve_box(&inst, b), SolveOutcome::No(_)));
        }
        let inst = KnapsackInstance::new(&p, p.identity(), vec![p.main_gen(0)]).unwrap();
        assert_eq!(solve_box(&inst, 0), SolveOutcome::Yes(ints(&[0])));
    }

    #[test]
    fn verify_examples() {
        let inst = commutator_instance("(0,0|1)");
        assert!(verify_witness(&inst, &ints(&[1, 1, 1, 1])));
        assert!(!verify_witness(&inst, &ints(&[0, 0, 0, 0])));
        let p = h3();
        let empty = KnapsackInstance::new(&p, p.identity(), vec![]).unwrap();
        assert!(verify_witness(&empty, &[]));
    }

    #[test]
    fn precheck_examples() {
        let sys = DiophantineSystem::new(2, vec![linear_eq(&[2, 4], 3)], vec![]);
        assert!(matches!(linear_precheck(&sys), Precheck::Infeasible(_)));
        let sys = DiophantineSystem::new(2, vec![linear_eq(&[1, -1], 0)], vec![]);
        assert_eq!(linear_precheck(&sys), Precheck::Unknown);
        let sys = DiophantineSystem::new(2, vec![linear_eq(&[1, 1], -1)], vec![]);
        assert!(matches!(linear_precheck(&sys), Precheck::Infeasible(_)));
    }

    #[test]
    fn torsion_presentation_round_trip() {
        use crate::group_core::{CommEntry, MainGenerator};
        // a_1 of order 2 with a_1^2 = z, [a_1, a_2] = z^2, z of order 4.
        let p = GroupPresentation::new(
            vec![MainGenerator::finite(2, ints(&[1])), MainGenerator::infinite(1)],
            vec![Order::finite(4)],
            vec![CommEntry { i: 1, j: 2, value: ints(&[2]) }],
        )
        .unwrap();
        assert!(p.check_consistency().is_ok());
        let factors = vec![p.main_gen(0), p.main_gen(1), p.main_gen(0)];
        for target in ["(1,2|3)", "(0,1|1)", "(1,0|0)"] {
            let inst = KnapsackInstance::new(&p, target.parse().unwrap(), factors.clone()).unwrap();
            let sys = build_system(&inst).unwrap();
            for a in 0..5 {
                for b in 0..5 {
                    for c in 0..5 {
                        let alpha = ints(&[a, b, c]);
                        assert_eq!(sys.satisfies(&alpha), verify_witness(&inst, &alpha), "{target} {alpha:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn smt_script_shape() {
        let sys = build_system(&commutator_instance("(0,0|1)")).unwrap();
        let s = export_smtlib(&sys);
        assert!(s.starts_with("(set-logic QF_NIA)"));
        assert!(s.contains("(declare-const a4 Int)"));
        assert!(s.trim_end().ends_with("(get-model)"));
        let p = h3();
        let empty = build_system(&KnapsackInstance::new(&p, p.identity(), vec![]).unwrap()).unwrap();
        let s = export_smtlib(&empty);
        assert!(s.contains("(check-sat)"));
        let model: HashMap<String, BigInt> =
            (1..=4).map(|i| (format!("a{i}"), BigInt::one())).collect();
        assert_eq!(alpha_from_model(&sys, &model), Some(ints(&[1, 1, 1, 1])));
    }

    #[test]
    fn member_examples() {
        let p = h3();
        let cs = crate::bounded_gen::commutator_structure(&p).unwrap();
        let s1 = vec![p.main_gen(0), p.main_gen(1)];
        let g: GroupElement = "(2,2|-1)".parse().unwrap();
        let out = member_product_of_monoids(&p, &g, &[s1.clone()], &cs, SolveOptions::default()).unwrap();
        assert!(out.outcome.is_yes());
        let word = out.word.unwrap();
        assert_eq!(word.len(), 4);
        let w: Vec<GroupElement> = word.iter().map(|&(_, k)| s1[k].clone()).collect();
        assert_eq!(p.eval_word(&w), g);

        let out = member_product_of_monoids(&p, &p.identity(), &[s1.clone()], &cs, SolveOptions::default()).unwrap();
        assert_eq!(out.word, Some(vec![]));

        let out =
            member_product_of_monoids(&p, &"(-1,0|0)".parse().unwrap(), &[s1], &cs, SolveOptions::default()).unwrap();
        assert!(matches!(out.outcome, SolveOutcome::No(_)));
    }
}
