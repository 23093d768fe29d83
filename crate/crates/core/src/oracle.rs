//! Brute-force ground truth: monoid balls in the Cayley graph, iterated
//! sumsets, and the unitriangular matrix model of the Heisenberg group.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::gap_rewrite::{FiniteAbelian, TorsionValue};
use crate::group_core::{GroupElement, GroupPresentation};

pub const DEFAULT_BUDGET: usize = 10_000_000;

/// All values of words of length at most `depth` over a generator list,
/// with one shortest word recorded for each.
#[derive(Clone, Debug)]
pub struct BfsBall {
    depth: usize,
    nodes: Vec<GroupElement>,
    index: HashMap<GroupElement, usize>,
    parent: Vec<Option<(usize, usize)>>,
    layer_ends: Vec<usize>,
}

impl BfsBall {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.index.contains_key(g)
    }

    /// Elements in discovery order (by word length, then generator order).
    pub fn elements(&self) -> &[GroupElement] {
        &self.nodes
    }

    /// Elements whose shortest word has length exactly `d`.
    pub fn layer(&self, d: usize) -> &[GroupElement] {
        let start = if d == 0 { 0 } else { self.layer_ends[d - 1] };
        &self.nodes[start..self.layer_ends[d]]
    }

    /// Length of a shortest word reaching `g`.
    pub fn distance(&self, g: &GroupElement) -> Option<usize> {
        let i = *self.index.get(g)?;
        Some(self.layer_ends.partition_point(|&end| end <= i))
    }

    /// A shortest word for `g`, as indices into the generator list.
    pub fn word_for(&self, g: &GroupElement) -> Option<Vec<usize>> {
        let mut i = *self.index.get(g)?;
        let mut word = Vec::new();
        while let Some((p, s)) = self.parent[i] {
            word.push(s);
            i = p;
        }
        word.reverse();
        Some(word)
    }
}

/// Breadth-first enumeration of `{ s_1 ⋯ s_k : k ≤ depth, s_i ∈ S }`.
pub fn bfs_monoid_ball(p: &GroupPresentation, gens: &[GroupElement], depth: usize, budget: usize) -> Result<BfsBall> {
    let id = p.identity();
    let mut ball = BfsBall {
        depth,
        nodes: vec![id.clone()],
        index: HashMap::from([(id, 0)]),
        parent: vec![None],
        layer_ends: vec![1],
    };
    let mut start = 0;
    for _ in 0..depth {
        let end = ball.nodes.len();
        for i in start..end {
            for (k, s) in gens.iter().enumerate() {
                let g = p.multiply(&ball.nodes[i], s);
                if ball.index.contains_key(&g) {
                    continue;
                }
                if ball.nodes.len() >= budget {
                    return Err(Error::Budget(budget as u64));
                }
                ball.index.insert(g.clone(), ball.nodes.len());
                ball.nodes.push(g);
                ball.parent.push(Some((i, k)));
            }
        }
        ball.layer_ends.push(ball.nodes.len());
        start = end;
        if start == ball.nodes.len() {
            // Closed early: the remaining layers are empty.
            while ball.layer_ends.len() <= depth {
                ball.layer_ends.push(start);
            }
            break;
        }
    }
    Ok(ball)
}

/// `X + Y`.
pub fn sum_sets_int(x: &BTreeSet<BigInt>, y: &BTreeSet<BigInt>) -> BTreeSet<BigInt> {
    x.iter().flat_map(|a| y.iter().map(move |b| a + b)).collect()
}

/// `kA` for `k = 0..=max_n` (`0A = {0}`).
pub fn sumset_levels_int(a: &[BigInt], max_n: usize) -> Vec<BTreeSet<BigInt>> {
    let base: BTreeSet<BigInt> = a.iter().cloned().collect();
    let mut levels = vec![BTreeSet::from([BigInt::zero()])];
    for k in 0..max_n {
        let next = sum_sets_int(&levels[k], &base);
        levels.push(next);
    }
    levels
}

/// `nA`, the `n`-fold sumset.
pub fn sumset_n_int(a: &[BigInt], n: usize) -> BTreeSet<BigInt> {
    sumset_levels_int(a, n).pop().expect("level 0 always present")
}

/// A subset of `Z × G_0` stored as a bitmap over a window of the integer axis.
#[derive(Clone, Debug)]
pub struct TorsionSumset {
    group: FiniteAbelian,
    min_z: i64,
    bits: Vec<bool>,
}

impl TorsionSumset {
    fn e(&self) -> usize {
        self.group.size() as usize
    }

    pub fn empty(group: &FiniteAbelian) -> Self {
        TorsionSumset { group: group.clone(), min_z: 0, bits: Vec::new() }
    }

    pub fn from_values(values: &[TorsionValue], group: &FiniteAbelian) -> Result<Self> {
        let zs: Vec<i64> = values
            .iter()
            .map(|v| v.z.to_i64().ok_or_else(|| Error::Invalid(format!("{} is too large for the sumset oracle", v.z))))
            .collect::<Result<_>>()?;
        let Some(&min_z) = zs.iter().min() else { return Ok(Self::empty(group)) };
        let max_z = *zs.iter().max().unwrap();
        let e = group.size() as usize;
        let mut bits = vec![false; (max_z - min_z + 1) as usize * e];
        for (v, z) in values.iter().zip(&zs) {
            bits[(z - min_z) as usize * e + group.index_of(&v.t)] = true;
        }
        Ok(TorsionSumset { group: group.clone(), min_z, bits })
    }

    /// `{(0, 0)}`.
    pub fn zero(group: &FiniteAbelian) -> Self {
        let e = group.size() as usize;
        let mut bits = vec![false; e];
        bits[0] = true;
        TorsionSumset { group: group.clone(), min_z: 0, bits }
    }

    /// Members as `(z, index of t)` in increasing order.
    pub fn members(&self) -> Vec<(i64, usize)> {
        let e = self.e();
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| (self.min_z + (i / e) as i64, i % e))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, v: &TorsionValue) -> bool {
        let e = self.e();
        match v.z.to_i64() {
            Some(z) if z >= self.min_z && self.group.is_reduced(&v.t) => {
                let i = (z - self.min_z) as usize * e + self.group.index_of(&v.t);
                i < self.bits.len() && self.bits[i]
            }
            _ => false,
        }
    }

    pub fn to_values(&self) -> BTreeSet<TorsionValue> {
        let elems = self.group.elements();
        self.members().into_iter().map(|(z, t)| TorsionValue::new(z, elems[t].clone())).collect()
    }

    fn add_index(&self, i: usize, j: usize) -> usize {
        let (mut i, mut j) = (i, j);
        let mut out = 0usize;
        let mut scale = 1usize;
        for &d in self.group.orders.iter().rev() {
            let d = d as usize;
            out += ((i % d + j % d) % d) * scale;
            scale *= d;
            i /= d;
            j /= d;
        }
        out
    }

    /// `X + Y`.
    pub fn sum(&self, other: &TorsionSumset) -> TorsionSumset {
        let xs = self.members();
        let ys = other.members();
        if xs.is_empty() || ys.is_empty() {
            return Self::empty(&self.group);
        }
        let e = self.e();
        let min_z = xs[0].0 + ys[0].0;
        let max_z = xs[xs.len() - 1].0 + ys[ys.len() - 1].0;
        let mut bits = vec![false; (max_z - min_z + 1) as usize * e];
        for &(zx, tx) in &xs {
            for &(zy, ty) in &ys {
                bits[(zx + zy - min_z) as usize * e + self.add_index(tx, ty)] = true;
            }
        }
        TorsionSumset { group: self.group.clone(), min_z, bits }
    }
}

impl PartialEq for TorsionSumset {
    fn eq(&self, other: &Self) -> bool {
        self.group == other.group && self.members() == other.members()
    }
}

impl Eq for TorsionSumset {}

/// `kA ⊂ Z × G_0` for `k = 0..=max_n`.
pub fn sumset_levels_torsion(a: &[TorsionValue], group: &FiniteAbelian, max_n: usize) -> Result<Vec<TorsionSumset>> {
    let base = TorsionSumset::from_values(a, group)?;
    let mut levels = vec![TorsionSumset::zero(group)];
    for k in 0..max_n {
        let next = levels[k].sum(&base);
        levels.push(next);
    }
    Ok(levels)
}

pub fn sumset_n_torsion(a: &[TorsionValue], group: &FiniteAbelian, n: usize) -> Result<TorsionSumset> {
    Ok(sumset_levels_torsion(a, group, n)?.pop().expect("level 0 always present"))
}

/// `[[1, α, β], [0, 1, γ], [0, 0, 1]]`, stored as `(α, γ, β)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HeisMatrix {
    pub alpha: BigInt,
    pub gamma: BigInt,
    pub beta: BigInt,
}

impl HeisMatrix {
    pub fn new(alpha: impl Into<BigInt>, gamma: impl Into<BigInt>, beta: impl Into<BigInt>) -> Self {
        HeisMatrix { alpha: alpha.into(), gamma: gamma.into(), beta: beta.into() }
    }

    pub fn identity() -> Self {
        Self::new(0, 0, 0)
    }

    pub fn x() -> Self {
        Self::new(1, 0, 0)
    }

    pub fn y() -> Self {
        Self::new(0, 1, 0)
    }

    pub fn z() -> Self {
        Self::new(0, 0, 1)
    }

    pub fn mul(&self, o: &HeisMatrix) -> HeisMatrix {
        HeisMatrix {
            alpha: &self.alpha + &o.alpha,
            gamma: &self.gamma + &o.gamma,
            beta: &self.beta + &o.beta + &self.alpha * &o.gamma,
        }
    }

    pub fn inverse(&self) -> HeisMatrix {
        HeisMatrix {
            alpha: -&self.alpha,
            gamma: -&self.gamma,
            beta: &self.alpha * &self.gamma - &self.beta,
        }
    }

    pub fn pow(&self, k: i64) -> HeisMatrix {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut acc = HeisMatrix::identity();
        let mut sq = base;
        let mut k = k.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&sq);
            }
            sq = sq.mul(&sq);
            k >>= 1;
        }
        acc
    }

    /// `[u, v] = u⁻¹v⁻¹uv`.
    pub fn commutator(&self, o: &HeisMatrix) -> HeisMatrix {
        self.inverse().mul(&o.inverse()).mul(self).mul(o)
    }

    /// `x^a y^c z^f ↦ (a, c, ac + f)`.
    pub fn from_element(g: &GroupElement) -> Result<HeisMatrix> {
        if g.e.len() != 2 || g.f.len() != 1 {
            return Err(Error::Shape(format!("{g} is not a Heisenberg element")));
        }
        Ok(HeisMatrix { alpha: g.e[0].clone(), gamma: g.e[1].clone(), beta: &g.e[0] * &g.e[1] + &g.f[0] })
    }

    pub fn to_element(&self) -> GroupElement {
        GroupElement::new(
            vec![self.alpha.clone(), self.gamma.clone()],
            vec![&self.beta - &self.alpha * &self.gamma],
        )
    }
}

impl fmt::Display for HeisMatrix {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "({},{},{})", self.alpha, self.gamma, self.beta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeisLetter {
    X,
    Y,
    Z,
}

impl HeisLetter {
    fn matrix(self) -> HeisMatrix {
        match self {
            HeisLetter::X => HeisMatrix::x(),
            HeisLetter::Y => HeisMatrix::y(),
            HeisLetter::Z => HeisMatrix::z(),
        }
    }
}

/// Product of the matrices of a word `x^k y^l ...`.
pub fn heis_eval(word: &[(HeisLetter, i64)]) -> HeisMatrix {
    word.iter().fold(HeisMatrix::identity(), |acc, &(l, k)| acc.mul(&l.matrix().pow(k)))
}

/// Parses `"x y^-1 z^2"` (whitespace or `*` separated).
pub fn parse_heis_word(text: &str) -> Result<Vec<(HeisLetter, i64)>> {
    text.split(|c: char| c.is_whitespace() || c == '*')
        .filter(|t| !t.is_empty())
        .map(|tok| {
            let (name, exp) = match tok.split_once('^') {
                Some((n, k)) => (n, k.trim().parse::<i64>().map_err(|_| Error::Parse(format!("bad exponent in {tok:?}")))?),
                None => (tok, 1),
            };
            let letter = match name.trim() {
                "x" => HeisLetter::X,
                "y" => HeisLetter::Y,
                "z" => HeisLetter::Z,
                other => return Err(Error::Parse(format!("unknown letter {other:?}"))),
            };
            Ok((letter, exp))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(xs: &[i64]) -> Vec<BigInt> {
        xs.iter().map(|&x| BigInt::from(x)).collect()
    }

    fn set(xs: &[i64]) -> BTreeSet<BigInt> {
        ints(xs).into_iter().collect()
    }

    #[test]
    fn ball_examples() {
        let p = GroupPresentation::heisenberg();
        let x = p.main_gen(0);
        let y = p.main_gen(1);
        let b = bfs_monoid_ball(&p, &[x.clone()], 3, DEFAULT_BUDGET).unwrap();
        let expect: Vec<GroupElement> = (0..4).map(|k| p.power_i64(&x, k)).collect();
        assert_eq!(b.elements(), &expect[..]);

        let b = bfs_monoid_ball(&p, &[x.clone(), y.clone()], 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(b.len(), 7);
        for g in ["(1,1|0)", "(1,1|-1)", "(2,0|0)", "(0,2|0)"] {
            assert!(b.contains(&g.parse().unwrap()), "{g}");
        }
        assert_eq!(b.word_for(&"(1,1|-1)".parse().unwrap()), Some(vec![1, 0]));
        assert_eq!(b.distance(&"(1,1|0)".parse().unwrap()), Some(2));

        let b = bfs_monoid_ball(&p, &[], 5, DEFAULT_BUDGET).unwrap();
        assert_eq!(b.elements(), &[p.identity()]);
        assert_eq!(b.layer(5).len(), 0);

        assert!(matches!(bfs_monoid_ball(&p, &[x, y], 6, 10), Err(Error::Budget(10))));
    }

    #[test]
    fn sumset_examples() {
        assert_eq!(sumset_n_int(&ints(&[0, 1]), 3), set(&[0, 1, 2, 3]));
        assert_eq!(sumset_n_int(&ints(&[2, 3, 5]), 2), set(&[4, 5, 6, 7, 8, 10]));
        assert_eq!(sumset_n_int(&ints(&[7]), 4), set(&[28]));
    }

    #[test]
    fn torsion_sumset_small() {
        let g = FiniteAbelian::new(vec![2]).unwrap();
        let a = [TorsionValue::new(0, vec![0]), TorsionValue::new(1, vec![1])];
        let s = sumset_n_torsion(&a, &g, 2).unwrap();
        let expect: BTreeSet<TorsionValue> = [(0, 0), (1, 1), (2, 0)]
            .iter()
            .map(|&(z, t)| TorsionValue::new(z, vec![t]))
            .collect();
        assert_eq!(s.to_values(), expect);
        assert!(s.contains(&TorsionValue::new(1, vec![1])));
        assert!(!s.contains(&TorsionValue::new(1, vec![0])));
    }

    #[test]
    fn heis_examples() {
        assert_eq!(heis_eval(&[(HeisLetter::X, 1), (HeisLetter::Y, 1)]), HeisMatrix::new(1, 1, 1));
        assert_eq!(heis_eval(&[(HeisLetter::Y, 1), (HeisLetter::X, 1)]), HeisMatrix::new(1, 1, 0));
        assert_eq!(heis_eval(&[]), HeisMatrix::identity());
        assert_eq!(HeisMatrix::x().commutator(&HeisMatrix::y()), HeisMatrix::z());
        let w = parse_heis_word("x y x y x").unwrap();
        assert_eq!(heis_eval(&w), HeisMatrix::new(3, 2, 3));
        assert_eq!(heis_eval(&w).to_element(), "(3,2|-3)".parse().unwrap());
        let m = HeisMatrix::new(2, -3, 5);
        assert_eq!(m.pow(-2).mul(&m.pow(2)), HeisMatrix::identity());
    }
}
