//! Exact arithmetic in nilpotent groups of class at most 2.
//!
//! A group is given by a polycyclic presentation with main generators
//! `a_1..a_r` and central generators `z_1..z_s`. Every element has a unique
//! normal form `a_1^e_1 ... a_r^e_r z_1^f_1 ... z_s^f_s` with exponents reduced
//! into `[0, m_i)` / `[0, o_k)` where the relative orders are finite.
//!
//! Commutators follow `[u, v] = u^-1 v^-1 u v`. The table entry for a pair
//! `i < j` is the central vector of `[a_i, a_j]`, so moving `a_j^x` to the right
//! of `a_i^y` costs `[a_i, a_j]^(-xy)`. In the Heisenberg group with `c_12 = (1)`
//! this gives `[x, y] = z` and `y x = x y z^-1`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::intser;

/// Relative order of a generator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Order {
    Infinite,
    Finite(BigInt),
}

impl Order {
    pub fn finite(n: u64) -> Self {
        Order::Finite(BigInt::from(n))
    }

    pub fn modulus(&self) -> Option<&BigInt> {
        match self {
            Order::Infinite => None,
            Order::Finite(m) => Some(m),
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Order::Infinite)
    }

    fn to_json(&self) -> Value {
        match self {
            Order::Infinite => Value::String("inf".into()),
            Order::Finite(m) => intser::to_json(m),
        }
    }

    fn from_json(v: &Value) -> std::result::Result<Self, String> {
        match v {
            Value::String(s) if s == "inf" || s == "infinity" => Ok(Order::Infinite),
            Value::Null => Ok(Order::Infinite),
            other => intser::from_json(other).map(Order::Finite),
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            Order::Infinite => f.write_str("inf"),
            Order::Finite(m) => write!(f, "{m}"),
        }
    }
}

/// A main generator `a_i` with its relative order `m_i` and, when `m_i` is
/// finite, the central vector `p_i` with `a_i^m_i = z^p_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MainGenerator {
    pub order: Order,
    pub power: Vec<BigInt>,
}

impl MainGenerator {
    pub fn infinite(s: usize) -> Self {
        MainGenerator { order: Order::Infinite, power: vec![BigInt::zero(); s] }
    }

    pub fn finite(order: u64, power: Vec<BigInt>) -> Self {
        MainGenerator { order: Order::finite(order), power }
    }
}

/// One entry of the commutator table: `[a_i, a_j] = z^value` (1-based, `i < j`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommEntry {
    pub i: usize,
    pub j: usize,
    pub value: Vec<BigInt>,
}

/// A class-2 polycyclic presentation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupPresentation {
    main: Vec<MainGenerator>,
    central: Vec<Order>,
    /// Dense antisymmetric table, `table[i][j]` = central vector of `[a_i, a_j]`.
    table: Vec<Vec<Vec<BigInt>>>,
}

/// A group element in reduced Malcev coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement {
    pub e: Vec<BigInt>,
    pub f: Vec<BigInt>,
}

/// A reason a presentation fails to define a consistent class-2 group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// `m_i * [a_i, a_j]` is not killed by the central order relations.
    PowerCommutator { i: usize, j: usize, coordinate: usize },
    /// Collection gives different results for `(x y) w` and `x (y w)`.
    Associativity { x: String, y: String, w: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            Violation::PowerCommutator { i, j, coordinate } => write!(
                f,
                "m_{i} * [a_{i}, a_{j}] does not vanish in central coordinate {coordinate}"
            ),
            Violation::Associativity { x, y, w } => {
                write!(f, "associativity fails on ({x}, {y}, {w})")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConsistencyReport {
    pub violations: Vec<Violation>,
}

impl ConsistencyReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Inconsistent(self.violations))
        }
    }
}

/// The bilinear map `Q` with `C(e1,0) C(e2,0) = C(e1+e2, Q(e1,e2))`,
/// stored as `values[i][j] = Q(unit_i, unit_j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QForm {
    pub values: Vec<Vec<Vec<BigInt>>>,
}

impl QForm {
    pub fn apply(&self, e1: &[BigInt], e2: &[BigInt]) -> Vec<BigInt> {
        let s = self.values.first().and_then(|row| row.first()).map_or(0, Vec::len);
        let mut out = vec![BigInt::zero(); s];
        for (i, row) in self.values.iter().enumerate() {
            if e1[i].is_zero() {
                continue;
            }
            for (j, v) in row.iter().enumerate() {
                if e2[j].is_zero() {
                    continue;
                }
                let c = &e1[i] * &e2[j];
                for (o, x) in out.iter_mut().zip(v) {
                    *o += &c * x;
                }
            }
        }
        out
    }
}

impl GroupPresentation {
    /// Builds a presentation, rejecting structurally malformed input.
    ///
    /// Only pairs of main generators may carry commutator entries; anything
    /// else would need higher commutator relations and is refused.
    pub fn new(main: Vec<MainGenerator>, central: Vec<Order>, comm: Vec<CommEntry>) -> Result<Self> {
        let r = main.len();
        let s = central.len();
        for (k, o) in central.iter().enumerate() {
            if let Order::Finite(m) = o {
                if !m.is_positive() {
                    return Err(Error::Parse(format!("central order o_{} must be >= 1", k + 1)));
                }
            }
        }
        for (i, g) in main.iter().enumerate() {
            if let Order::Finite(m) = &g.order {
                if !m.is_positive() {
                    return Err(Error::Parse(format!("main order m_{} must be >= 1", i + 1)));
                }
            }
            if g.power.len() != s {
                return Err(Error::Parse(format!(
                    "power vector of a_{} has length {}, expected {s}",
                    i + 1,
                    g.power.len()
                )));
            }
        }
        let mut table = vec![vec![vec![BigInt::zero(); s]; r]; r];
        let mut seen = vec![vec![false; r]; r];
        for c in &comm {
            if c.i == 0 || c.j == 0 || c.i >= c.j {
                return Err(Error::Parse(format!(
                    "commutator entry ({}, {}) must satisfy 1 <= i < j",
                    c.i, c.j
                )));
            }
            if c.j > r {
                return Err(Error::Parse(format!(
                    "commutator entry ({}, {}) refers past the {r} main generators; \
                     only class-2 presentations are supported",
                    c.i, c.j
                )));
            }
            if c.value.len() != s {
                return Err(Error::Parse(format!(
                    "commutator ({}, {}) has length {}, expected {s}",
                    c.i,
                    c.j,
                    c.value.len()
                )));
            }
            let (i, j) = (c.i - 1, c.j - 1);
            if seen[i][j] {
                return Err(Error::Parse(format!("duplicate commutator entry ({}, {})", c.i, c.j)));
            }
            seen[i][j] = true;
            table[i][j] = c.value.clone();
            table[j][i] = c.value.iter().map(|x| -x).collect();
        }
        Ok(GroupPresentation { main, central, table })
    }

    /// The integral Heisenberg group `H_3` with `[x, y] = z`.
    pub fn heisenberg() -> Self {
        Self::heisenberg_n(1)
    }

    /// `H_{2n+1}(Z)` with `[x_k, y_k] = z`, main generators ordered `x_1, y_1, x_2, y_2, ...`.
    pub fn heisenberg_n(n: usize) -> Self {
        let main = vec![MainGenerator::infinite(1); 2 * n];
        let comm = (0..n)
            .map(|k| CommEntry { i: 2 * k + 1, j: 2 * k + 2, value: vec![BigInt::one()] })
            .collect();
        Self::new(main, vec![Order::Infinite], comm).expect("well-formed")
    }

    pub fn rank(&self) -> usize {
        self.main.len()
    }

    pub fn central_rank(&self) -> usize {
        self.central.len()
    }

    pub fn main_generators(&self) -> &[MainGenerator] {
        &self.main
    }

    pub fn central_orders(&self) -> &[Order] {
        &self.central
    }

    /// Central vector of `[a_i, a_j]` (0-based indices).
    pub fn comm(&self, i: usize, j: usize) -> &[BigInt] {
        &self.table[i][j]
    }

    pub fn is_torsion_free_main(&self) -> bool {
        self.main.iter().all(|g| g.order.is_infinite())
    }

    pub fn is_abelian(&self) -> bool {
        self.table.iter().flatten().flatten().all(Zero::is_zero)
    }

    pub fn comm_entries(&self) -> Vec<CommEntry> {
        let r = self.rank();
        let mut out = Vec::new();
        for i in 0..r {
            for j in i + 1..r {
                if self.table[i][j].iter().any(|x| !x.is_zero()) {
                    out.push(CommEntry { i: i + 1, j: j + 1, value: self.table[i][j].clone() });
                }
            }
        }
        out
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement {
            e: vec![BigInt::zero(); self.rank()],
            f: vec![BigInt::zero(); self.central_rank()],
        }
    }

    /// The main generator `a_i` (0-based).
    pub fn main_gen(&self, i: usize) -> GroupElement {
        let mut e = vec![BigInt::zero(); self.rank()];
        e[i] = BigInt::one();
        self.normalize(e, vec![BigInt::zero(); self.central_rank()])
    }

    /// The central generator `z_k` (0-based).
    pub fn central_gen(&self, k: usize) -> GroupElement {
        let mut f = vec![BigInt::zero(); self.central_rank()];
        f[k] = BigInt::one();
        self.normalize(vec![BigInt::zero(); self.rank()], f)
    }

    /// Checks that an element has the right shape and reduced coordinates.
    pub fn validate(&self, g: &GroupElement) -> Result<()> {
        if g.e.len() != self.rank() || g.f.len() != self.central_rank() {
            return Err(Error::Shape(format!(
                "{g} has shape ({}|{}), presentation needs ({}|{})",
                g.e.len(),
                g.f.len(),
                self.rank(),
                self.central_rank()
            )));
        }
        if &self.normalize(g.e.clone(), g.f.clone()) != g {
            return Err(Error::Shape(format!("{g} is not in reduced normal form")));
        }
        Ok(())
    }

    /// Reduces raw coordinates `a^raw_e z^raw_f` to normal form.
    ///
    /// `a_i^(q m_i + t) = z^(q p_i) a_i^t`, and `z^(q p_i)` is central, so the
    /// carry goes straight into the central part.
    pub fn normalize(&self, mut e: Vec<BigInt>, mut f: Vec<BigInt>) -> GroupElement {
        debug_assert_eq!(e.len(), self.rank());
        debug_assert_eq!(f.len(), self.central_rank());
        for (i, g) in self.main.iter().enumerate() {
            if let Order::Finite(m) = &g.order {
                let (q, t) = e[i].div_mod_floor(m);
                if !q.is_zero() {
                    for (fk, pk) in f.iter_mut().zip(&g.power) {
                        *fk += &q * pk;
                    }
                }
                e[i] = t;
            }
        }
        self.reduce_central(&mut f);
        GroupElement { e, f }
    }

    pub(crate) fn reduce_central(&self, f: &mut [BigInt]) {
        for (fk, o) in f.iter_mut().zip(&self.central) {
            if let Order::Finite(m) = o {
                *fk = fk.mod_floor(m);
            }
        }
    }

    /// Collection correction for `a^e1 a^e2` (raw exponents).
    pub(crate) fn collect(&self, e1: &[BigInt], e2: &[BigInt]) -> Vec<BigInt> {
        let r = self.rank();
        let mut out = vec![BigInt::zero(); self.central_rank()];
        for j in 1..r {
            if e1[j].is_zero() {
                continue;
            }
            for i in 0..j {
                if e2[i].is_zero() {
                    continue;
                }
                let c = &e1[j] * &e2[i];
                for (o, x) in out.iter_mut().zip(&self.table[i][j]) {
                    *o -= &c * x;
                }
            }
        }
        out
    }

    /// Raw product: exponent sums plus the collection term, no reduction.
    pub(crate) fn raw_mul(
        &self,
        e1: &[BigInt],
        f1: &[BigInt],
        e2: &[BigInt],
        f2: &[BigInt],
    ) -> (Vec<BigInt>, Vec<BigInt>) {
        let e = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
        let mut f = self.collect(e1, e2);
        for ((o, a), b) in f.iter_mut().zip(f1).zip(f2) {
            *o += a + b;
        }
        (e, f)
    }

    pub fn multiply(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        let (e, f) = self.raw_mul(&g.e, &g.f, &h.e, &h.f);
        self.normalize(e, f)
    }

    pub fn inverse(&self, g: &GroupElement) -> GroupElement {
        // (e, f)(-e, y) = (0, f + y + Q(e, -e)), so y = -f + Q(e, e).
        let e: Vec<BigInt> = g.e.iter().map(|x| -x).collect();
        let mut f = self.collect(&g.e, &g.e);
        for (o, a) in f.iter_mut().zip(&g.f) {
            *o -= a;
        }
        self.normalize(e, f)
    }

    /// `g^k` in closed form: `(k e, k f + binom(k, 2) Q(e, e))`.
    pub fn power(&self, g: &GroupElement, k: &BigInt) -> GroupElement {
        if k.is_negative() {
            return self.power(&self.inverse(g), &-k);
        }
        let (e, f) = self.raw_power(&g.e, &g.f, k);
        self.normalize(e, f)
    }

    pub(crate) fn raw_power(&self, e: &[BigInt], f: &[BigInt], k: &BigInt) -> (Vec<BigInt>, Vec<BigInt>) {
        let binom = k * (k - 1) / 2;
        let q = self.collect(e, e);
        let e_out = e.iter().map(|x| x * k).collect();
        let f_out = f.iter().zip(&q).map(|(a, b)| a * k + b * &binom).collect();
        (e_out, f_out)
    }

    pub fn power_i64(&self, g: &GroupElement, k: i64) -> GroupElement {
        self.power(g, &BigInt::from(k))
    }

    /// `g^-1 h^-1 g h`, always central.
    pub fn commutator(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        // g h = h g [g, h], and both orders share the same raw exponent sum.
        let a = self.collect(&g.e, &h.e);
        let b = self.collect(&h.e, &g.e);
        let mut f: Vec<BigInt> = a.into_iter().zip(b).map(|(x, y)| x - y).collect();
        self.reduce_central(&mut f);
        GroupElement { e: vec![BigInt::zero(); self.rank()], f }
    }

    pub fn eval_word(&self, w: &[GroupElement]) -> GroupElement {
        w.iter().fold(self.identity(), |acc, x| self.multiply(&acc, x))
    }

    /// `v_0 = 1, v_1, ..., v_l` with `v_i` the value of the first `i` letters.
    pub fn prefix_values(&self, w: &[GroupElement]) -> Vec<GroupElement> {
        let mut out = Vec::with_capacity(w.len() + 1);
        let mut acc = self.identity();
        out.push(acc.clone());
        for x in w {
            acc = self.multiply(&acc, x);
            out.push(acc.clone());
        }
        out
    }

    pub fn is_central(&self, g: &GroupElement) -> bool {
        (0..self.rank()).all(|j| {
            let mut e = vec![BigInt::zero(); self.rank()];
            e[j] = BigInt::one();
            let unit = GroupElement { e, f: vec![BigInt::zero(); self.central_rank()] };
            self.commutator(g, &unit) == self.identity()
        })
    }

    pub fn q_form(&self) -> Result<QForm> {
        if !self.is_torsion_free_main() {
            return Err(Error::TorsionMainPart);
        }
        let r = self.rank();
        let mut values = vec![vec![vec![BigInt::zero(); self.central_rank()]; r]; r];
        for (i, row) in values.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let mut ui = vec![BigInt::zero(); r];
                let mut uj = vec![BigInt::zero(); r];
                ui[i] = BigInt::one();
                uj[j] = BigInt::one();
                *v = self.collect(&ui, &uj);
            }
        }
        Ok(QForm { values })
    }

    /// Lattice condition on torsion main generators plus associativity of
    /// collection on all triples from a finite test set.
    pub fn check_consistency(&self) -> ConsistencyReport {
        let mut violations = Vec::new();
        let r = self.rank();
        for (i, g) in self.main.iter().enumerate() {
            let Order::Finite(m) = &g.order else { continue };
            for j in 0..r {
                if i == j {
                    continue;
                }
                for (k, (c, o)) in self.table[i][j].iter().zip(&self.central).enumerate() {
                    let v = m * c;
                    let dead = match o {
                        Order::Infinite => v.is_zero(),
                        Order::Finite(ok) => v.is_multiple_of(ok),
                    };
                    if !dead {
                        violations.push(Violation::PowerCommutator {
                            i: i + 1,
                            j: j + 1,
                            coordinate: k + 1,
                        });
                    }
                }
            }
        }

        // Generators and, for finite orders, the element one step before the
        // wrap-around, so that every carry path gets exercised.
        let mut probes: Vec<GroupElement> = Vec::new();
        let r0 = vec![BigInt::zero(); r];
        let s0 = vec![BigInt::zero(); self.central_rank()];
        for (i, g) in self.main.iter().enumerate() {
            let mut e = r0.clone();
            e[i] = BigInt::one();
            probes.push(GroupElement { e: e.clone(), f: s0.clone() });
            if let Order::Finite(m) = &g.order {
                if m > &BigInt::one() {
                    e[i] = m - 1;
                    probes.push(GroupElement { e, f: s0.clone() });
                }
            }
        }
        for k in 0..self.central_rank() {
            let mut f = s0.clone();
            f[k] = BigInt::one();
            probes.push(self.normalize(r0.clone(), f));
        }
        let probes: Vec<_> = probes.into_iter().map(|p| self.normalize(p.e, p.f)).collect();
        'outer: for x in &probes {
            for y in &probes {
                let xy = self.multiply(x, y);
                for w in &probes {
                    let left = self.multiply(&xy, w);
                    let right = self.multiply(x, &self.multiply(y, w));
                    if left != right {
                        violations.push(Violation::Associativity {
                            x: x.to_string(),
                            y: y.to_string(),
                            w: w.to_string(),
                        });
                        if violations.len() > 16 {
                            break 'outer;
                        }
                    }
                }
            }
        }
        ConsistencyReport { violations }
    }

    // --- serialization ---------------------------------------------------

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::Parse("presentation must be an object".into()))?;
        let central_raw = obj.get("central").and_then(Value::as_array).cloned().unwrap_or_default();
        let central = central_raw
            .iter()
            .map(|c| Order::from_json(c.get("order").unwrap_or(&Value::Null)))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(Error::Parse)?;
        let s = central.len();
        let main_raw = obj
            .get("main")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing `main` list".into()))?;
        let mut main = Vec::with_capacity(main_raw.len());
        for m in main_raw {
            let order = Order::from_json(m.get("order").unwrap_or(&Value::Null)).map_err(Error::Parse)?;
            let power = match m.get("power") {
                Some(p) => intser::vec_from_json(p).map_err(Error::Parse)?,
                None => vec![BigInt::zero(); s],
            };
            main.push(MainGenerator { order, power });
        }
        let mut comm = Vec::new();
        for c in obj.get("comm").and_then(Value::as_array).cloned().unwrap_or_default() {
            let idx = |key: &str| -> Result<usize> {
                c.get(key)
                    .and_then(Value::as_u64)
                    .map(|x| x as usize)
                    .ok_or_else(|| Error::Parse(format!("commutator entry needs integer `{key}`")))
            };
            let value = intser::vec_from_json(c.get("value").unwrap_or(&Value::Null)).map_err(Error::Parse)?;
            comm.push(CommEntry { i: idx("i")?, j: idx("j")?, value });
        }
        Self::new(main, central, comm)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "main": self.main.iter().map(|g| json!({
                "order": g.order.to_json(),
                "power": intser::vec_to_json(&g.power),
            })).collect::<Vec<_>>(),
            "central": self.central.iter().map(|o| json!({ "order": o.to_json() })).collect::<Vec<_>>(),
            "comm": self.comm_entries().iter().map(|c| json!({
                "i": c.i,
                "j": c.j,
                "value": intser::vec_to_json(&c.value),
            })).collect::<Vec<_>>(),
        })
    }

    /// Parses an element given either as `(e..|f..)` text, as JSON
    /// `{"e":[..],"f":[..]}`, or as a generator name (`a1`, `z2`, `x`, `y`, `z`),
    /// optionally followed by `^k`.
    pub fn parse_element(&self, text: &str) -> Result<GroupElement> {
        let t = text.trim();
        let g = if t.starts_with('{') {
            let v: Value = serde_json::from_str(t)?;
            GroupElement::from_json(&v)?
        } else if t.starts_with('(') {
            t.parse::<GroupElement>()?
        } else {
            return self.parse_named(t);
        };
        if g.e.len() != self.rank() || g.f.len() != self.central_rank() {
            return Err(Error::Shape(format!(
                "{g} does not have shape ({}|{})",
                self.rank(),
                self.central_rank()
            )));
        }
        Ok(self.normalize(g.e, g.f))
    }

    fn parse_named(&self, t: &str) -> Result<GroupElement> {
        let (name, exp) = match t.split_once('^') {
            Some((n, k)) => (
                n.trim(),
                k.trim()
                    .parse::<BigInt>()
                    .map_err(|_| Error::Parse(format!("bad exponent in {t:?}")))?,
            ),
            None => (t, BigInt::one()),
        };
        let base = match name {
            "x" if self.rank() >= 1 => self.main_gen(0),
            "y" if self.rank() >= 2 => self.main_gen(1),
            "z" if self.central_rank() >= 1 => self.central_gen(0),
            "1" | "id" | "e" => self.identity(),
            _ => {
                let parse_idx = |rest: &str, bound: usize| {
                    rest.parse::<usize>().ok().filter(|&k| k >= 1 && k <= bound).map(|k| k - 1)
                };
                if let Some(k) = name.strip_prefix('a').and_then(|r| parse_idx(r, self.rank())) {
                    self.main_gen(k)
                } else if let Some(k) = name.strip_prefix('z').and_then(|r| parse_idx(r, self.central_rank())) {
                    self.central_gen(k)
                } else {
                    return Err(Error::Parse(format!("unknown element {t:?}")));
                }
            }
        };
        Ok(self.power(&base, &exp))
    }

    /// Parses a list of elements: a JSON array, or `[item, item, ...]` where
    /// items use any syntax accepted by [`parse_element`](Self::parse_element).
    pub fn parse_element_list(&self, text: &str) -> Result<Vec<GroupElement>> {
        let t = text.trim();
        if let Ok(Value::Array(items)) = serde_json::from_str::<Value>(t) {
            return items
                .iter()
                .map(|v| match v {
                    Value::String(s) => self.parse_element(s),
                    other => self.parse_element(&other.to_string()),
                })
                .collect();
        }
        let inner = t
            .strip_prefix('[')
            .and_then(|x| x.strip_suffix(']'))
            .ok_or_else(|| Error::Parse(format!("expected a bracketed list, got {t:?}")))?;
        split_top_level(inner)
            .into_iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| self.parse_element(s))
            .collect()
    }
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

impl GroupElement {
    pub fn new(e: Vec<BigInt>, f: Vec<BigInt>) -> Self {
        GroupElement { e, f }
    }

    pub fn from_i64(e: &[i64], f: &[i64]) -> Self {
        GroupElement {
            e: e.iter().map(|&x| BigInt::from(x)).collect(),
            f: f.iter().map(|&x| BigInt::from(x)).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.e.iter().chain(&self.f).all(Zero::is_zero)
    }

    pub fn to_json(&self) -> Value {
        json!({ "e": intser::vec_to_json(&self.e), "f": intser::vec_to_json(&self.f) })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let e = intser::vec_from_json(v.get("e").unwrap_or(&Value::Null)).map_err(Error::Parse)?;
        let f = intser::vec_from_json(v.get("f").unwrap_or(&Value::Null)).map_err(Error::Parse)?;
        Ok(GroupElement { e, f })
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        let join = |xs: &[BigInt]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "({}|{})", join(&self.e), join(&self.f))
    }
}

impl FromStr for GroupElement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|x| x.strip_suffix(')'))
            .ok_or_else(|| Error::Parse(format!("element must look like (e..|f..), got {s:?}")))?;
        let (left, right) = inner
            .split_once('|')
            .ok_or_else(|| Error::Parse(format!("missing `|` in {s:?}")))?;
        let nums = |part: &str| -> Result<Vec<BigInt>> {
            part.split(',')
                .map(str::trim)
                .filter(|x| !x.is_empty())
                .map(|x| x.parse::<BigInt>().map_err(|_| Error::Parse(format!("bad integer {x:?} in {s:?}"))))
                .collect()
        };
        Ok(GroupElement { e: nums(left)?, f: nums(right)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn el(e: &[i64], f: &[i64]) -> GroupElement {
        GroupElement::from_i64(e, f)
    }

    fn h3_mod2() -> GroupPresentation {
        GroupPresentation::new(
            vec![MainGenerator::infinite(1); 2],
            vec![Order::finite(2)],
            vec![CommEntry { i: 1, j: 2, value: vec![BigInt::one()] }],
        )
        .unwrap()
    }

    #[test]
    fn heisenberg_is_consistent() {
        assert!(GroupPresentation::heisenberg().check_consistency().is_ok());
        assert!(h3_mod2().check_consistency().is_ok());
    }

    #[test]
    fn torsion_commutator_violation_is_reported() {
        // a_1 of order 2 with [a_1, a_2] = z of order 3: 2 * 1 is not 0 mod 3.
        let p = GroupPresentation::new(
            vec![MainGenerator::finite(2, vec![BigInt::one()]), MainGenerator::infinite(1)],
            vec![Order::finite(3)],
            vec![CommEntry { i: 1, j: 2, value: vec![BigInt::one()] }],
        )
        .unwrap();
        let report = p.check_consistency();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::PowerCommutator { i: 1, j: 2, .. })));
        assert!(report.violations.iter().any(|v| matches!(v, Violation::Associativity { .. })));
        assert!(report.into_result().is_err());
    }

    #[test]
    fn comm_entry_past_main_generators_is_rejected() {
        let err = GroupPresentation::new(
            vec![MainGenerator::finite(2, vec![BigInt::one()])],
            vec![Order::finite(3)],
            vec![CommEntry { i: 1, j: 2, value: vec![BigInt::one()] }],
        );
        assert!(matches!(err, Err(Error::Parse(_))));
    }

    #[test]
    fn normalize_examples() {
        let h = GroupPresentation::heisenberg();
        assert_eq!(h.normalize(vec![1.into(), 0.into()], vec![0.into()]), el(&[1, 0], &[0]));
        let h2 = h3_mod2();
        assert_eq!(h2.normalize(vec![0.into(), 0.into()], vec![5.into()]), el(&[0, 0], &[1]));
        let p = GroupPresentation::new(
            vec![MainGenerator::finite(2, vec![BigInt::one()])],
            vec![Order::Infinite],
            vec![],
        )
        .unwrap();
        assert_eq!(p.normalize(vec![3.into()], vec![0.into()]), el(&[1], &[1]));
        assert_eq!(p.normalize(vec![(-1).into()], vec![0.into()]), el(&[1], &[-1]));
    }

    #[test]
    fn heisenberg_products() {
        let h = GroupPresentation::heisenberg();
        let x = h.main_gen(0);
        let y = h.main_gen(1);
        assert_eq!(h.multiply(&x, &y), el(&[1, 1], &[0]));
        assert_eq!(h.multiply(&y, &x), el(&[1, 1], &[-1]));
        assert_eq!(h.multiply(&x, &h.identity()), x);
        assert_eq!(h.commutator(&x, &y), el(&[0, 0], &[1]));
        assert_eq!(h.commutator(&x, &x), h.identity());
        let xy = el(&[1, 1], &[0]);
        assert_eq!(h.inverse(&xy), el(&[-1, -1], &[-1]));
        assert_eq!(h.power_i64(&xy, 2), el(&[2, 2], &[-1]));
        assert_eq!(h.power_i64(&xy, 0), h.identity());
        let w = [x.clone(), y.clone(), x.clone(), y.clone(), x.clone()];
        assert_eq!(h.eval_word(&w), el(&[3, 2], &[-3]));
        assert_eq!(h.eval_word(&[]), h.identity());
        assert_eq!(h.prefix_values(&w).len(), 6);
    }

    #[test]
    fn commutator_matches_definition() {
        let h = GroupPresentation::heisenberg_n(2);
        let g = el(&[1, -2, 3, 0], &[4]);
        let k = el(&[-1, 5, 2, 7], &[-3]);
        let direct = h.eval_word(&[h.inverse(&g), h.inverse(&k), g.clone(), k.clone()]);
        assert_eq!(h.commutator(&g, &k), direct);
    }

    #[test]
    fn q_form_values() {
        let h = GroupPresentation::heisenberg();
        let q = h.q_form().unwrap();
        let v = |a: &[i64]| a.iter().map(|&x| BigInt::from(x)).collect::<Vec<_>>();
        assert_eq!(q.apply(&v(&[0, 1]), &v(&[1, 0])), v(&[-1]));
        assert_eq!(q.apply(&v(&[1, 0]), &v(&[0, 1])), v(&[0]));
        assert_eq!(q.apply(&v(&[3, -2]), &v(&[0, 0])), v(&[0]));
        let p = GroupPresentation::new(
            vec![MainGenerator::finite(2, vec![])],
            vec![],
            vec![],
        )
        .unwrap();
        assert!(matches!(p.q_form(), Err(Error::TorsionMainPart)));
    }

    #[test]
    fn json_round_trip_and_parsing() {
        let p = h3_mod2();
        let back = GroupPresentation::from_json(&p.to_json()).unwrap();
        assert_eq!(p, back);
        let h = GroupPresentation::heisenberg();
        assert_eq!(h.parse_element("(2, 2 | -1)").unwrap(), el(&[2, 2], &[-1]));
        assert_eq!(h.parse_element(r#"{"e":[1,0],"f":["0"]}"#).unwrap(), el(&[1, 0], &[0]));
        assert_eq!(h.parse_element("y^-1").unwrap(), el(&[0, -1], &[0]));
        let list = h.parse_element_list("[x, (0,1|0), z^2]").unwrap();
        assert_eq!(list, vec![el(&[1, 0], &[0]), el(&[0, 1], &[0]), el(&[0, 0], &[2])]);
        assert!(h.parse_element("(1|0)").is_err());
    }
}
