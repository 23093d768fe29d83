//! Bounded generation of submonoids when `[G, G]` has Hirsch length 1.
//!
//! Moving a letter `x` from the front of `x^n w` to just after the prefix
//! `v_i` of `w` multiplies the value by the central element `[x, v_i]⁻¹`. So
//! the positions of the `x`'s only matter through the multiset of values
//! `[x, v_i] ∈ [G, G] = Z × G_0`, which the torsion concentration rewrites
//! onto few distinct values, hence few blocks of `x`.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gap_rewrite::{concentrate_torsion, torsion_total, FiniteAbelian, TorsionGapSet, TorsionValue};
use crate::group_core::{GroupElement, GroupPresentation};
use crate::subgroup_tools::{commutator_lattice, to_u64, CommutatorLattice};

/// `[G, G] = Z^h × G_0` with coordinate maps.
#[derive(Clone, Debug)]
pub struct CommutatorStructure {
    pub h: usize,
    pub torsion: FiniteAbelian,
    lattice: CommutatorLattice,
}

impl CommutatorStructure {
    /// `e = |G_0|`.
    pub fn e(&self) -> u64 {
        self.torsion.size()
    }

    pub fn lattice(&self) -> &CommutatorLattice {
        &self.lattice
    }

    pub fn require_h1(&self) -> Result<()> {
        if self.h == 1 {
            Ok(())
        } else {
            Err(Error::HirschLength(self.h))
        }
    }

    /// Coordinates `(π(g), t(g))` of an element of `[G, G]`.
    pub fn value(&self, g: &GroupElement) -> Result<TorsionValue> {
        self.require_h1()?;
        if g.e.iter().any(|x| !x.is_zero()) {
            return Err(Error::Invalid(format!("{g} is not central")));
        }
        let c = self
            .lattice
            .coords(&g.f)
            .ok_or_else(|| Error::Invalid(format!("{g} is not in the commutator subgroup")))?;
        let t = c
            .torsion
            .iter()
            .map(|x| x.to_u64().expect("reduced torsion coordinate"))
            .collect();
        Ok(TorsionValue { z: c.free[0].clone(), t })
    }

    /// The projection `π : [G, G] → Z`.
    pub fn proj(&self, g: &GroupElement) -> Result<BigInt> {
        Ok(self.value(g)?.z)
    }
}

pub fn commutator_structure(p: &GroupPresentation) -> Result<CommutatorStructure> {
    let lattice = commutator_lattice(p);
    let orders = lattice
        .torsion
        .iter()
        .map(|d| to_u64(d, "torsion invariant factor"))
        .collect::<Result<Vec<_>>>()?;
    Ok(CommutatorStructure { h: lattice.h, torsion: FiniteAbelian::new(orders)?, lattice })
}

/// `b = max(1, max_ij |π[x_i, x_j]|)`.
pub fn commutator_bound(p: &GroupPresentation, xs: &[GroupElement], cs: &CommutatorStructure) -> Result<BigInt> {
    cs.require_h1()?;
    let mut b = BigInt::one();
    for (i, x) in xs.iter().enumerate() {
        for y in &xs[i + 1..] {
            let v = cs.proj(&p.commutator(x, y))?.abs();
            if v > b {
                b = v;
            }
        }
    }
    Ok(b)
}

/// `{[x, v_i] : 0 ≤ i ≤ l}` for the prefixes `v_i` of `w`.
pub fn prefix_commutator_set(
    p: &GroupPresentation,
    w: &[GroupElement],
    x: &GroupElement,
    cs: &CommutatorStructure,
) -> Result<TorsionGapSet> {
    let values = prefix_commutator_values(p, w, x, cs)?;
    TorsionGapSet::new(cs.torsion.clone(), values)
}

fn prefix_commutator_values(
    p: &GroupPresentation,
    w: &[GroupElement],
    x: &GroupElement,
    cs: &CommutatorStructure,
) -> Result<Vec<TorsionValue>> {
    p.prefix_values(w).iter().map(|v| cs.value(&p.commutator(x, v))).collect()
}

/// A maximal run `element^exponent`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub element: GroupElement,
    pub exponent: u64,
}

/// A word stored as a sequence of blocks; adjacent equal elements are merged.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockWord {
    pub blocks: Vec<Block>,
}

impl BlockWord {
    pub fn from_word(w: &[GroupElement]) -> Self {
        let mut out = BlockWord::default();
        for g in w {
            out.push(g.clone(), 1);
        }
        out
    }

    pub fn push(&mut self, element: GroupElement, exponent: u64) {
        if exponent == 0 {
            return;
        }
        match self.blocks.last_mut() {
            Some(last) if last.element == element => last.exponent += exponent,
            _ => self.blocks.push(Block { element, exponent }),
        }
    }

    pub fn to_word(&self) -> Vec<GroupElement> {
        self.blocks
            .iter()
            .flat_map(|b| std::iter::repeat(b.element.clone()).take(b.exponent as usize))
            .collect()
    }

    pub fn eval(&self, p: &GroupPresentation) -> GroupElement {
        self.blocks.iter().fold(p.identity(), |acc, b| {
            p.multiply(&acc, &p.power(&b.element, &BigInt::from(b.exponent)))
        })
    }

    pub fn len(&self) -> u64 {
        self.blocks.iter().map(|b| b.exponent).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block_count(&self, x: &GroupElement) -> usize {
        self.blocks.iter().filter(|b| &b.element == x).count()
    }

    /// Number of blocks whose element is one of `xs`.
    pub fn block_count_of(&self, xs: &[GroupElement]) -> usize {
        self.blocks.iter().filter(|b| xs.contains(&b.element)).count()
    }

    pub fn total_blocks(&self) -> usize {
        self.blocks.len()
    }
}

/// Reorders the entries of `u` equal to `x` without changing the value; the
/// result is the list of original positions in their new order.
fn reorder_positions(
    p: &GroupPresentation,
    u: &[GroupElement],
    x: &GroupElement,
    cs: &CommutatorStructure,
) -> Result<Vec<usize>> {
    let rest: Vec<usize> = (0..u.len()).filter(|&i| &u[i] != x).collect();
    let xs: Vec<usize> = (0..u.len()).filter(|&i| &u[i] == x).collect();
    if xs.is_empty() {
        return Ok((0..u.len()).collect());
    }
    let w: Vec<GroupElement> = rest.iter().map(|&i| u[i].clone()).collect();
    let values = prefix_commutator_values(p, &w, x, cs)?;
    let set = TorsionGapSet::new(cs.torsion.clone(), values.clone())?;

    // Insertion slot of each x: the number of w-letters before it.
    let mut seq = Vec::with_capacity(xs.len());
    let mut slot = 0;
    for g in u {
        if g == x {
            seq.push(values[slot].clone());
        } else {
            slot += 1;
        }
    }
    seq.sort();
    let out = match single_value(&seq, &set) {
        Some(v) => vec![v; seq.len()],
        None => concentrate_torsion(&seq, &set)?.sequence,
    };

    // Realize each value at the smallest slot carrying it.
    let mut first_slot: BTreeMap<&TorsionValue, usize> = BTreeMap::new();
    for (i, v) in values.iter().enumerate() {
        first_slot.entry(v).or_insert(i);
    }
    let mut per_slot = vec![0usize; w.len() + 1];
    for v in &out {
        per_slot[first_slot[v]] += 1;
    }
    let mut order = Vec::with_capacity(u.len());
    let mut next_x = xs.iter();
    for (i, &count) in per_slot.iter().enumerate() {
        order.extend(next_x.by_ref().take(count).copied());
        if i < rest.len() {
            order.push(rest[i]);
        }
    }
    Ok(order)
}

/// A value `v ∈ A` with `n·v` equal to the total of `seq`, if one exists; the
/// `x`'s then form a single block.
fn single_value(seq: &[TorsionValue], set: &TorsionGapSet) -> Option<TorsionValue> {
    let g = set.group();
    let n = seq.len();
    let total = torsion_total(seq, g);
    set.elements().iter().find(|v| {
        let nv = torsion_total(&vec![(*v).clone(); n], g);
        nv == total
    }).cloned()
}

/// Moves the occurrences of `x` in `u` into at most `2e + 2b²e` blocks, where
/// `b` is the largest gap of the prefix commutator set of the remaining word.
pub fn reorder_single(
    p: &GroupPresentation,
    u: &[GroupElement],
    x: &GroupElement,
    cs: &CommutatorStructure,
) -> Result<BlockWord> {
    cs.require_h1()?;
    let order = reorder_positions(p, u, x, cs)?;
    let word: Vec<GroupElement> = order.iter().map(|&i| u[i].clone()).collect();
    let out = BlockWord::from_word(&word);
    if out.eval(p) != p.eval_word(u) {
        return Err(Error::Internal("reordering changed the value".into()));
    }
    Ok(out)
}

/// Reorders `w` (a word in `xs`) generator by generator, in list order, so
/// that `x_1..x_m` occupy at most `4me(b²+1)` blocks for every `m`.
pub fn reorder_full(
    p: &GroupPresentation,
    w: &[GroupElement],
    xs: &[GroupElement],
    cs: &CommutatorStructure,
) -> Result<BlockWord> {
    Ok(reorder_full_trace(p, w, xs, cs)?.pop().unwrap_or_default())
}

/// The word after each step of [`reorder_full`]: entry `m - 1` is the word
/// once `x_1..x_m` have been gathered, which is where the bound for `m` holds.
pub fn reorder_full_trace(
    p: &GroupPresentation,
    w: &[GroupElement],
    xs: &[GroupElement],
    cs: &CommutatorStructure,
) -> Result<Vec<BlockWord>> {
    cs.require_h1()?;
    if let Some(g) = w.iter().find(|g| !xs.contains(g)) {
        return Err(Error::Invalid(format!("{g} is not one of the generators")));
    }
    let value = p.eval_word(w);
    let mut cur = w.to_vec();
    let mut trace = Vec::with_capacity(xs.len());
    for x in xs {
        let order = reorder_positions(p, &cur, x, cs)?;
        cur = order.iter().map(|&i| cur[i].clone()).collect();
        let step = BlockWord::from_word(&cur);
        if step.eval(p) != value {
            return Err(Error::Internal("reordering changed the value".into()));
        }
        trace.push(step);
    }
    Ok(trace)
}

/// `M = y_1^* ⋯ y_N^*` with `(y_i)` the pattern `x_1, …, x_n` repeated `K` times.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundedGenSequence {
    pub n: usize,
    pub b: BigInt,
    pub e: u64,
    /// `K = 4ne(b²+1)`.
    pub k: BigInt,
    pub generators: Vec<GroupElement>,
    pub sequence: Vec<GroupElement>,
}

impl BoundedGenSequence {
    /// Generator index of position `i` of the sequence.
    pub fn generator_at(&self, i: usize) -> usize {
        i % self.n
    }
}

pub fn bounded_sequence(
    p: &GroupPresentation,
    xs: &[GroupElement],
    cs: &CommutatorStructure,
) -> Result<BoundedGenSequence> {
    cs.require_h1()?;
    if xs.is_empty() {
        return Err(Error::Invalid("need at least one generator".into()));
    }
    let b = commutator_bound(p, xs, cs)?;
    let e = cs.e();
    let n = xs.len();
    let k = BigInt::from(4 * n as u64) * e * (&b * &b + 1u32);
    let reps = k
        .to_usize()
        .filter(|&r| r.checked_mul(n).is_some_and(|len| len <= 50_000_000))
        .ok_or_else(|| Error::Invalid(format!("sequence length {}·{k} is too large to emit", n)))?;
    let sequence = (0..reps).flat_map(|_| xs.iter().cloned()).collect();
    Ok(BoundedGenSequence { n, b, e, k, generators: xs.to_vec(), sequence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group_core::{CommEntry, MainGenerator, Order};

    fn el(e: &[i64], f: &[i64]) -> GroupElement {
        GroupElement::from_i64(e, f)
    }

    fn comm(i: usize, j: usize, v: &[i64]) -> CommEntry {
        CommEntry { i, j, value: v.iter().map(|&x| BigInt::from(x)).collect() }
    }

    fn h3_z2() -> GroupPresentation {
        GroupPresentation::new(
            vec![MainGenerator::infinite(2), MainGenerator::infinite(2)],
            vec![Order::Infinite, Order::finite(2)],
            vec![comm(1, 2, &[1, 1])],
        )
        .unwrap()
    }

    /// `[G, G] = Z × Z/2`.
    fn torsion_example() -> GroupPresentation {
        GroupPresentation::new(
            vec![MainGenerator::infinite(2); 3],
            vec![Order::Infinite, Order::finite(2)],
            vec![comm(1, 2, &[1, 0]), comm(1, 3, &[0, 1])],
        )
        .unwrap()
    }

    #[test]
    fn structure_examples() {
        let cs = commutator_structure(&GroupPresentation::heisenberg()).unwrap();
        assert_eq!((cs.h, cs.e()), (1, 1));
        // (1, 1) generates an infinite cyclic subgroup of Z × Z/2.
        let cs = commutator_structure(&h3_z2()).unwrap();
        assert_eq!((cs.h, cs.e()), (1, 1));
        let cs = commutator_structure(&torsion_example()).unwrap();
        assert_eq!((cs.h, cs.e()), (1, 2));
        let ab = GroupPresentation::new(vec![MainGenerator::infinite(0); 2], vec![], vec![]).unwrap();
        let cs = commutator_structure(&ab).unwrap();
        assert_eq!((cs.h, cs.e()), (0, 1));
        assert!(matches!(cs.require_h1(), Err(Error::HirschLength(0))));
    }

    #[test]
    fn bound_examples() {
        let p = GroupPresentation::heisenberg();
        let cs = commutator_structure(&p).unwrap();
        let (x, y) = (p.main_gen(0), p.main_gen(1));
        assert_eq!(commutator_bound(&p, &[x.clone(), y.clone()], &cs).unwrap(), BigInt::from(1));
        assert_eq!(commutator_bound(&p, &[x.clone(), x.clone()], &cs).unwrap(), BigInt::from(1));
        let y3 = p.power_i64(&y, 3);
        assert_eq!(commutator_bound(&p, &[x, y3], &cs).unwrap(), BigInt::from(3));
    }

    #[test]
    fn prefix_set_examples() {
        let p = GroupPresentation::heisenberg();
        let cs = commutator_structure(&p).unwrap();
        let (x, y, z) = (p.main_gen(0), p.main_gen(1), p.central_gen(0));
        let a = prefix_commutator_set(&p, &[y.clone(), y.clone()], &x, &cs).unwrap();
        let zs: Vec<BigInt> = a.elements().iter().map(|v| v.z.clone()).collect();
        assert_eq!(zs, vec![BigInt::from(0), BigInt::from(1), BigInt::from(2)]);
        assert_eq!(prefix_commutator_set(&p, &[], &x, &cs).unwrap().elements().len(), 1);
        assert_eq!(prefix_commutator_set(&p, &[x.clone(), y], &z, &cs).unwrap().elements().len(), 1);
    }

    #[test]
    fn xyxyx_becomes_one_block() {
        let p = GroupPresentation::heisenberg();
        let cs = commutator_structure(&p).unwrap();
        let (x, y) = (p.main_gen(0), p.main_gen(1));
        let u = [x.clone(), y.clone(), x.clone(), y.clone(), x.clone()];
        let out = reorder_single(&p, &u, &x, &cs).unwrap();
        let expect = BlockWord {
            blocks: vec![
                Block { element: y.clone(), exponent: 1 },
                Block { element: x.clone(), exponent: 3 },
                Block { element: y, exponent: 1 },
            ],
        };
        assert_eq!(out, expect);
        assert_eq!(out.eval(&p), el(&[3, 2], &[-3]));
    }

    #[test]
    fn reorder_trivial_cases() {
        let p = GroupPresentation::heisenberg();
        let cs = commutator_structure(&p).unwrap();
        let (x, y, z) = (p.main_gen(0), p.main_gen(1), p.central_gen(0));
        let u = [x.clone(), x.clone(), y.clone()];
        assert_eq!(reorder_single(&p, &u, &x, &cs).unwrap(), BlockWord::from_word(&u));
        let u = [z.clone(), y.clone(), z.clone(), x.clone(), z.clone()];
        assert_eq!(reorder_single(&p, &u, &z, &cs).unwrap().block_count(&z), 1);
        let w = vec![x.clone(); 7];
        assert_eq!(reorder_full(&p, &w, &[x.clone()], &cs).unwrap().total_blocks(), 1);
    }

    #[test]
    fn reorder_full_xy5() {
        let p = GroupPresentation::heisenberg();
        let cs = commutator_structure(&p).unwrap();
        let (x, y) = (p.main_gen(0), p.main_gen(1));
        let w: Vec<GroupElement> = (0..5).flat_map(|_| [x.clone(), y.clone()]).collect();
        let out = reorder_full(&p, &w, &[x.clone(), y.clone()], &cs).unwrap();
        assert_eq!(out.eval(&p), el(&[5, 5], &[-10]));
        assert!(out.block_count(&x) <= 8);
        assert!(out.total_blocks() <= 16);
    }

    #[test]
    fn torsion_group_reorders() {
        let p = torsion_example();
        let cs = commutator_structure(&p).unwrap();
        let (x, y, t) = (p.main_gen(0), p.main_gen(1), p.main_gen(2));
        let w: Vec<GroupElement> = (0..6).flat_map(|_| [y.clone(), x.clone(), t.clone(), x.clone()]).collect();
        let xs = [x.clone(), y.clone(), t.clone()];
        let out = reorder_full(&p, &w, &xs, &cs).unwrap();
        assert_eq!(out.eval(&p), p.eval_word(&w));
        for m in 1..=3 {
            assert!(out.block_count_of(&xs[..m]) <= 16 * m);
        }
    }

    #[test]
    fn sequence_constants() {
        let p = GroupPresentation::heisenberg();
        let cs = commutator_structure(&p).unwrap();
        let (x, y) = (p.main_gen(0), p.main_gen(1));
        let s = bounded_sequence(&p, &[x.clone(), y.clone()], &cs).unwrap();
        assert_eq!((s.b.clone(), s.e, s.k.clone(), s.sequence.len()), (BigInt::from(1), 1, BigInt::from(16), 32));
        assert_eq!(s.sequence[2], x);
        let s = bounded_sequence(&p, &[x.clone()], &cs).unwrap();
        assert_eq!(s.k, BigInt::from(8));
        let ab = [x.clone(), p.power_i64(&x, 2), p.central_gen(0)];
        assert_eq!(bounded_sequence(&p, &ab, &cs).unwrap().k, BigInt::from(24));
    }
}
