//! Concentration of sums over gap-bounded sets.
//!
//! Given a finite `A ⊂ Z` whose consecutive gaps are at most `b`, any sum of
//! `n` elements of `A` can be rewritten, keeping the total, so that at most
//! `2b²` summands lie strictly between `min A` and `max A`. The torsion
//! variant works in `Z × G_0` with `G_0` finite abelian of size `e` and leaves
//! at most `2b²e` summands off the extreme fibres.
//!
//! All rewriting steps move mass between a low window and a high window of
//! the sorted sequence, each summand stepping to the neighbouring value of `A`.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::BTreeSet;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::oracle;

/// `Z/d_1 × ... × Z/d_t`; the trivial group when `t = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct FiniteAbelian {
    pub orders: Vec<u64>,
}

impl FiniteAbelian {
    pub fn new(orders: Vec<u64>) -> Result<Self> {
        if orders.iter().any(|&d| d == 0) {
            return Err(Error::Invalid("cyclic orders must be >= 1".into()));
        }
        Ok(FiniteAbelian { orders })
    }

    pub fn trivial() -> Self {
        FiniteAbelian { orders: Vec::new() }
    }

    /// `e = |G_0|`.
    pub fn size(&self) -> u64 {
        self.orders.iter().product()
    }

    pub fn zero(&self) -> Vec<u64> {
        vec![0; self.orders.len()]
    }

    pub fn add(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).zip(&self.orders).map(|((x, y), d)| (x + y) % d).collect()
    }

    pub fn sub(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).zip(&self.orders).map(|((x, y), d)| (x + d - y) % d).collect()
    }

    pub fn is_reduced(&self, t: &[u64]) -> bool {
        t.len() == self.orders.len() && t.iter().zip(&self.orders).all(|(x, d)| x < d)
    }

    /// All elements in lexicographic order of their reduced vectors.
    pub fn elements(&self) -> Vec<Vec<u64>> {
        let mut out = vec![Vec::new()];
        for &d in &self.orders {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..d).map(move |x| {
                        let mut v = prefix.clone();
                        v.push(x);
                        v
                    })
                })
                .collect();
        }
        out
    }

    /// Position of `t` in [`elements`](Self::elements).
    pub fn index_of(&self, t: &[u64]) -> usize {
        t.iter().zip(&self.orders).fold(0usize, |acc, (x, d)| acc * (*d as usize) + *x as usize)
    }
}

/// A finite set of integers with its maximal gap `b` (1 for singletons).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GapSet {
    values: Vec<BigInt>,
    b: BigInt,
}

impl GapSet {
    pub fn new(mut values: Vec<BigInt>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Invalid("a gap set must be nonempty".into()));
        }
        values.sort();
        values.dedup();
        let b = values
            .windows(2)
            .map(|w| &w[1] - &w[0])
            .max()
            .unwrap_or_else(BigInt::one);
        Ok(GapSet { values, b })
    }

    pub fn from_i64(values: &[i64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| BigInt::from(v)).collect())
    }

    pub fn values(&self) -> &[BigInt] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> &BigInt {
        &self.values[0]
    }

    pub fn max(&self) -> &BigInt {
        &self.values[self.values.len() - 1]
    }

    pub fn max_gap(&self) -> &BigInt {
        &self.b
    }

    pub fn index_of(&self, v: &BigInt) -> Option<usize> {
        self.values.binary_search(v).ok()
    }

    pub fn contains(&self, v: &BigInt) -> bool {
        self.index_of(v).is_some()
    }

    /// Distance from `v` down to the next smaller member.
    fn gap_below(&self, v: &BigInt) -> Option<BigInt> {
        let k = self.index_of(v)?;
        (k > 0).then(|| v - &self.values[k - 1])
    }

    /// Distance from `v` up to the next larger member.
    fn gap_above(&self, v: &BigInt) -> Option<BigInt> {
        let k = self.index_of(v)?;
        (k + 1 < self.values.len()).then(|| &self.values[k + 1] - v)
    }
}

pub fn max_gap(a: &GapSet) -> BigInt {
    a.max_gap().clone()
}

/// `b²` and `2b²` as counts, or `None` when they exceed any realistic length.
fn square_count(b: &BigInt, factor: u64) -> Option<usize> {
    (b * b * BigInt::from(factor)).to_usize()
}

fn check_sequence(s: &[BigInt], a: &GapSet) -> Result<()> {
    for x in s {
        if !a.contains(x) {
            return Err(Error::NotInSet(x.to_string()));
        }
    }
    if s.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Invalid("sequence must be nondecreasing".into()));
    }
    Ok(())
}

/// Steps the `count` smallest indices of `domain` whose value sits exactly
/// `gap` above its predecessor in `A` down to that predecessor. Returns how
/// many entries moved.
pub fn bump_toward_predecessor(
    s: &mut [BigInt],
    a: &GapSet,
    domain: Range<usize>,
    gap: &BigInt,
    count: usize,
) -> usize {
    let mut moved = 0;
    for i in domain {
        if moved == count {
            break;
        }
        if a.gap_below(&s[i]).as_ref() == Some(gap) {
            s[i] -= gap;
            moved += 1;
        }
    }
    moved
}

/// Mirror image of [`bump_toward_predecessor`]: the `count` largest indices
/// of `domain` with successor gap `gap` step up.
pub fn bump_toward_successor(
    s: &mut [BigInt],
    a: &GapSet,
    domain: Range<usize>,
    gap: &BigInt,
    count: usize,
) -> usize {
    let mut moved = 0;
    for i in domain.rev() {
        if moved == count {
            break;
        }
        if a.gap_above(&s[i]).as_ref() == Some(gap) {
            s[i] += gap;
            moved += 1;
        }
    }
    moved
}

/// Smallest gap value in `1..=b` attained at least `threshold` times.
fn pigeonhole<I>(gaps: I, b: usize, threshold: usize) -> Option<usize>
where
    I: Iterator<Item = BigInt>,
{
    let mut counts = vec![0usize; b + 1];
    for g in gaps {
        if let Some(k) = g.to_usize().filter(|&k| k >= 1 && k <= b) {
            counts[k] += 1;
        }
    }
    (1..=b).find(|&k| counts[k] >= threshold)
}

/// Indices `i` with `min A < s_i < max A`, as a range (the sequence is sorted).
fn interior(s: &[BigInt], a: &GapSet) -> Range<usize> {
    let lo = s.partition_point(|x| x <= a.min());
    let hi = s.partition_point(|x| x < a.max());
    lo..hi.max(lo)
}

/// One rewriting round toward the extremes. `Ok(None)` means the interior
/// already has at most `2b²` entries.
pub fn bump_iteration(s: &[BigInt], a: &GapSet) -> Result<Option<Vec<BigInt>>> {
    check_sequence(s, a)?;
    let mid = interior(s, a);
    let Some(bound) = square_count(a.max_gap(), 2) else { return Ok(None) };
    if mid.len() <= bound {
        return Ok(None);
    }
    let bb = bound / 2;
    let b = a.max_gap().to_usize().expect("b² fits, so b does");
    let low = mid.start..mid.start + bb;
    let high = mid.end - bb..mid.end;

    let b_minus = pigeonhole(low.clone().filter_map(|i| a.gap_below(&s[i])), b, b)
        .ok_or_else(|| Error::Internal("no gap value reaches the pigeonhole threshold (low side)".into()))?;
    let b_plus = pigeonhole(high.clone().filter_map(|i| a.gap_above(&s[i])), b, b)
        .ok_or_else(|| Error::Internal("no gap value reaches the pigeonhole threshold (high side)".into()))?;

    let mut out = s.to_vec();
    let down = bump_toward_predecessor(&mut out, a, low, &BigInt::from(b_minus), b_plus);
    let up = bump_toward_successor(&mut out, a, high, &BigInt::from(b_plus), b_minus);
    if down != b_plus || up != b_minus {
        return Err(Error::Internal("bump counts fell short of the pigeonhole counts".into()));
    }
    Ok(Some(out))
}

/// Outcome of a concentration run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Concentrated<T> {
    pub sequence: Vec<T>,
    pub iterations: u64,
}

/// Rewrites `s` until at most `2b²` entries lie strictly inside `(min A, max A)`.
///
/// Each entry only ever moves in one direction, so the number of rounds is at
/// most `n · l`; exceeding that is reported as an internal error.
pub fn concentrate_extremes(s: &[BigInt], a: &GapSet) -> Result<Concentrated<BigInt>> {
    check_sequence(s, a)?;
    let limit = (s.len() as u64).saturating_mul(a.len() as u64);
    let mut cur = s.to_vec();
    let mut iterations = 0u64;
    while let Some(next) = bump_iteration(&cur, a)? {
        iterations += 1;
        if iterations > limit {
            return Err(Error::Internal(format!("concentration exceeded {limit} rounds")));
        }
        cur = next;
    }
    Ok(Concentrated { sequence: cur, iterations })
}

/// Rewrites `s` so that all but the first and last `b²` entries lie in
/// `{a_k, a_(k+1)}`. Returns `k` (0-based; for a singleton `A`, `k = 0` and the
/// pair degenerates to `{a_0}`).
pub fn concentrate_consecutive(s: &[BigInt], a: &GapSet) -> Result<(usize, Concentrated<BigInt>)> {
    check_sequence(s, a)?;
    let n = s.len();
    let bound = square_count(a.max_gap(), 2).filter(|&x| x < n).ok_or_else(|| {
        Error::Invalid(format!("need n > 2b² (n = {n}, b = {})", a.max_gap()))
    })?;
    let bb = bound / 2;
    let b = a.max_gap().to_usize().expect("b² fits, so b does");
    let span = a.max() - a.min();
    let limit = (BigInt::from(n) * &span * &span + 1u32).to_u64().unwrap_or(u64::MAX);

    let mut cur = s.to_vec();
    let mut iterations = 0u64;
    loop {
        let lo = a.index_of(&cur[bb - 1]).expect("checked membership");
        let hi = a.index_of(&cur[n - bb - 1]).expect("checked membership");
        if hi <= lo + 1 {
            let k = if a.len() == 1 { 0 } else { lo.min(a.len() - 2) };
            return Ok((k, Concentrated { sequence: cur, iterations }));
        }
        iterations += 1;
        if iterations > limit {
            return Err(Error::Internal(format!("consecutive concentration exceeded {limit} rounds")));
        }
        let pivot = &a.values()[lo + 1];
        let below = 0..cur.partition_point(|x| x < pivot);
        let above = cur.partition_point(|x| x <= pivot)..n;

        let c_plus = pigeonhole(below.clone().filter_map(|i| a.gap_above(&cur[i])), b, b)
            .ok_or_else(|| Error::Internal("no successor gap reaches the pigeonhole threshold".into()))?;
        let c_minus = pigeonhole(above.clone().filter_map(|i| a.gap_below(&cur[i])), b, b)
            .ok_or_else(|| Error::Internal("no predecessor gap reaches the pigeonhole threshold".into()))?;

        let up = bump_toward_successor(&mut cur, a, below, &BigInt::from(c_plus), c_minus);
        let down = bump_toward_predecessor(&mut cur, a, above, &BigInt::from(c_minus), c_plus);
        if up != c_minus || down != c_plus {
            return Err(Error::Internal("bump counts fell short of the pigeonhole counts".into()));
        }
    }
}

/// An element of `Z × G_0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TorsionValue {
    pub z: BigInt,
    pub t: Vec<u64>,
}

impl TorsionValue {
    pub fn new(z: impl Into<BigInt>, t: Vec<u64>) -> Self {
        TorsionValue { z: z.into(), t }
    }
}

/// A finite subset of `Z × G_0` with its projection `π(A)` and extreme part `A_0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorsionGapSet {
    group: FiniteAbelian,
    elements: Vec<TorsionValue>,
    projection: GapSet,
    extremes: Vec<TorsionValue>,
}

impl TorsionGapSet {
    pub fn new(group: FiniteAbelian, mut elements: Vec<TorsionValue>) -> Result<Self> {
        for x in &elements {
            if !group.is_reduced(&x.t) {
                return Err(Error::Invalid(format!("torsion component {:?} is not reduced for {:?}", x.t, group.orders)));
            }
        }
        elements.sort();
        elements.dedup();
        let projection = GapSet::new(elements.iter().map(|x| x.z.clone()).collect())?;
        let extremes = elements
            .iter()
            .filter(|x| &x.z == projection.min() || &x.z == projection.max())
            .cloned()
            .collect();
        Ok(TorsionGapSet { group, elements, projection, extremes })
    }

    pub fn group(&self) -> &FiniteAbelian {
        &self.group
    }

    pub fn elements(&self) -> &[TorsionValue] {
        &self.elements
    }

    pub fn projection(&self) -> &GapSet {
        &self.projection
    }

    /// `A_0 = A ∩ π⁻¹{min π(A), max π(A)}`.
    pub fn extremes(&self) -> &[TorsionValue] {
        &self.extremes
    }

    pub fn contains(&self, x: &TorsionValue) -> bool {
        self.elements.binary_search(x).is_ok()
    }

    pub fn in_extremes(&self, x: &TorsionValue) -> bool {
        &x.z == self.projection.min() || &x.z == self.projection.max()
    }

    pub fn add(&self, x: &TorsionValue, y: &TorsionValue) -> TorsionValue {
        TorsionValue { z: &x.z + &y.z, t: self.group.add(&x.t, &y.t) }
    }

    /// The downward step `(d, t)` with `x - (d, t) ∈ A`: `d` is the distance to
    /// the next lower fibre, `t` the smallest admissible torsion shift.
    fn step_below(&self, x: &TorsionValue) -> Option<(BigInt, Vec<u64>)> {
        let d = self.projection.gap_below(&x.z)?;
        let target = &x.z - &d;
        let t = self
            .fibre(&target)
            .iter()
            .map(|y| self.group.sub(&x.t, &y.t))
            .min()?;
        Some((d, t))
    }

    fn step_above(&self, x: &TorsionValue) -> Option<(BigInt, Vec<u64>)> {
        let d = self.projection.gap_above(&x.z)?;
        let target = &x.z + &d;
        let t = self
            .fibre(&target)
            .iter()
            .map(|y| self.group.sub(&y.t, &x.t))
            .min()?;
        Some((d, t))
    }

    fn fibre(&self, z: &BigInt) -> &[TorsionValue] {
        let lo = self.elements.partition_point(|x| &x.z < z);
        let hi = self.elements.partition_point(|x| &x.z <= z);
        &self.elements[lo..hi]
    }
}

fn check_torsion_sequence(s: &[TorsionValue], a: &TorsionGapSet) -> Result<()> {
    for x in s {
        if !a.group.is_reduced(&x.t) {
            return Err(Error::Invalid(format!("malformed torsion component {:?}", x.t)));
        }
        if !a.contains(x) {
            return Err(Error::NotInSet(format!("({}, {:?})", x.z, x.t)));
        }
    }
    if s.windows(2).any(|w| w[0].z > w[1].z) {
        return Err(Error::Invalid("projection of the sequence must be nondecreasing".into()));
    }
    Ok(())
}

/// Total of a torsion sequence.
pub fn torsion_total(s: &[TorsionValue], group: &FiniteAbelian) -> TorsionValue {
    s.iter().fold(TorsionValue { z: BigInt::zero(), t: group.zero() }, |acc, x| TorsionValue {
        z: acc.z + &x.z,
        t: group.add(&acc.t, &x.t),
    })
}

/// Rewrites `s` until at most `2b²e` entries lie outside `A_0`.
///
/// Each round takes the lowest and highest `b²e` entries outside `A_0`. When
/// some step `(b₋, t₋)` occurs `b·e` times among the low entries (and likewise
/// above), `b₊·e` low entries step down by it and `b₋·e` high entries step up
/// by `(b₊, t₊)`; both moves total `(b₋b₊e, 0)`. Otherwise the entries with a
/// common step length are cut into `e` groups on each side, and a run of groups
/// whose torsion shifts cancel (one exists among any `e` by pigeonhole on
/// prefix sums) moves instead. The sequence is re-sorted after every round.
pub fn concentrate_torsion(s: &[TorsionValue], a: &TorsionGapSet) -> Result<Concentrated<TorsionValue>> {
    check_torsion_sequence(s, a)?;
    let e = a.group.size();
    let n = s.len();
    let span = a.projection.max() - a.projection.min();
    let limit = (BigInt::from(n) * &span * &span + 1u32).to_u64().unwrap_or(u64::MAX);
    let mut cur = s.to_vec();
    cur.sort();
    let mut iterations = 0u64;
    loop {
        let lo = cur.partition_point(|x| &x.z <= a.projection.min());
        let hi = cur.partition_point(|x| &x.z < a.projection.max()).max(lo);
        let Some(bound) = square_count(a.projection.max_gap(), 2 * e) else { break };
        if hi - lo <= bound {
            break;
        }
        iterations += 1;
        if iterations > limit {
            return Err(Error::Internal(format!("torsion concentration exceeded {limit} rounds")));
        }
        let dom = bound / 2;
        let b = a.projection.max_gap().to_usize().expect("b² fits, so b does");
        let low: Vec<usize> = (lo..lo + dom).collect();
        let high: Vec<usize> = (hi - dom..hi).collect();
        let down: Vec<(BigInt, Vec<u64>)> = low
            .iter()
            .map(|&i| a.step_below(&cur[i]).expect("interior entries have a lower fibre"))
            .collect();
        let up: Vec<(BigInt, Vec<u64>)> = high
            .iter()
            .map(|&i| a.step_above(&cur[i]).expect("interior entries have an upper fibre"))
            .collect();
        let threshold = b * e as usize;

        if let (Some(bm), Some(bp)) = (bucket(&down, threshold), bucket(&up, threshold)) {
            let (bm_len, bp_len) = (bm.0.to_usize().unwrap(), bp.0.to_usize().unwrap());
            let mut moved = 0;
            for (k, &i) in low.iter().enumerate() {
                if moved == bp_len * e as usize {
                    break;
                }
                if down[k] == bm {
                    cur[i] = TorsionValue { z: &cur[i].z - &bm.0, t: a.group.sub(&cur[i].t, &bm.1) };
                    moved += 1;
                }
            }
            let mut moved_up = 0;
            for (k, &i) in high.iter().enumerate().rev() {
                if moved_up == bm_len * e as usize {
                    break;
                }
                if up[k] == bp {
                    cur[i] = TorsionValue { z: &cur[i].z + &bp.0, t: a.group.add(&cur[i].t, &bp.1) };
                    moved_up += 1;
                }
            }
            if moved != bp_len * e as usize || moved_up != bm_len * e as usize {
                return Err(Error::Internal("torsion bump counts fell short".into()));
            }
        } else {
            grouped_move(&mut cur, a, &low, &down, &high, &up, b, e as usize)?;
        }
        cur.sort();
    }
    Ok(Concentrated { sequence: cur, iterations })
}

/// Smallest `(d, t)` occurring at least `threshold` times.
fn bucket(steps: &[(BigInt, Vec<u64>)], threshold: usize) -> Option<(BigInt, Vec<u64>)> {
    let mut sorted: Vec<&(BigInt, Vec<u64>)> = steps.iter().collect();
    sorted.sort();
    let mut i = 0;
    while i < sorted.len() {
        let j = i + sorted[i..].iter().take_while(|x| **x == sorted[i]).count();
        if j - i >= threshold {
            return Some(sorted[i].clone());
        }
        i = j;
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn grouped_move(
    cur: &mut [TorsionValue],
    a: &TorsionGapSet,
    low: &[usize],
    down: &[(BigInt, Vec<u64>)],
    high: &[usize],
    up: &[(BigInt, Vec<u64>)],
    b: usize,
    e: usize,
) -> Result<()> {
    let len_of = |steps: &[(BigInt, Vec<u64>)]| {
        pigeonhole(steps.iter().map(|s| s.0.clone()), b, b * e)
            .ok_or_else(|| Error::Internal("no step length reaches b·e".into()))
    };
    let bm = len_of(down)?;
    let bp = len_of(up)?;
    // Low side: first b₊·e entries of step length b₋, in groups of b₊.
    let xs: Vec<usize> = (0..low.len()).filter(|&k| down[k].0 == BigInt::from(bm)).take(bp * e).collect();
    // High side: last b₋·e entries of step length b₊, in groups of b₋.
    let mut ys: Vec<usize> = (0..high.len()).rev().filter(|&k| up[k].0 == BigInt::from(bp)).take(bm * e).collect();
    ys.reverse();
    if xs.len() < bp * e || ys.len() < bm * e {
        return Err(Error::Internal("not enough entries for the grouped move".into()));
    }
    let g = &a.group;
    let group_sum = |idx: &[usize], steps: &[(BigInt, Vec<u64>)]| {
        idx.iter().fold(g.zero(), |acc, &k| g.add(&acc, &steps[k].1))
    };
    let mut prefix = vec![g.zero()];
    for q in 0..e {
        let u = group_sum(&xs[q * bp..(q + 1) * bp], down);
        let w = group_sum(&ys[q * bm..(q + 1) * bm], up);
        let last = prefix.last().unwrap().clone();
        prefix.push(g.add(&last, &g.sub(&u, &w)));
    }
    let (p, q) = (0..=e)
        .flat_map(|p| (p + 1..=e).map(move |q| (p, q)))
        .find(|&(p, q)| prefix[p] == prefix[q])
        .ok_or_else(|| Error::Internal("no zero-sum run of groups".into()))?;
    for &k in &xs[p * bp..q * bp] {
        let i = low[k];
        cur[i] = TorsionValue { z: &cur[i].z - &down[k].0, t: g.sub(&cur[i].t, &down[k].1) };
    }
    for &k in &ys[p * bm..q * bm] {
        let i = high[k];
        cur[i] = TorsionValue { z: &cur[i].z + &up[k].0, t: g.add(&cur[i].t, &up[k].1) };
    }
    Ok(())
}

/// `nA = (n - 2b²){a_1, a_l} + 2b²A`, both sides computed by brute force.
pub fn extremes_identity_holds(a: &GapSet, n: usize) -> Result<bool> {
    let k = two_b_squared(a, 1, n)?;
    let levels = oracle::sumset_levels_int(a.values(), n);
    let ends = [a.min().clone(), a.max().clone()];
    let rhs = oracle::sum_sets_int(&oracle::sumset_n_int(&ends, n - k), &levels[k]);
    Ok(levels[n] == rhs)
}

/// `nA = ∪_k (n - 2b²){a_k, a_(k+1)} + 2b²A` (for a singleton the pair is `{a_1}`).
pub fn consecutive_identity_holds(a: &GapSet, n: usize) -> Result<bool> {
    let k = two_b_squared(a, 1, n)?;
    let levels = oracle::sumset_levels_int(a.values(), n);
    let mut rhs = BTreeSet::new();
    let pairs: Vec<Vec<BigInt>> = if a.len() == 1 {
        vec![vec![a.min().clone()]]
    } else {
        a.values().windows(2).map(|w| w.to_vec()).collect()
    };
    for pair in pairs {
        rhs.extend(oracle::sum_sets_int(&oracle::sumset_n_int(&pair, n - k), &levels[k]));
    }
    Ok(levels[n] == rhs)
}

/// `nA = (n - 2b²e)A_0 + 2b²eA` in `Z × G_0`.
pub fn torsion_identity_holds(a: &TorsionGapSet, n: usize) -> Result<bool> {
    let k = two_b_squared(a.projection(), a.group.size(), n)?;
    let levels = oracle::sumset_levels_torsion(a.elements(), &a.group, n)?;
    let rhs = oracle::sumset_n_torsion(a.extremes(), &a.group, n - k)?.sum(&levels[k]);
    Ok(levels[n] == rhs)
}

fn two_b_squared(a: &GapSet, e: u64, n: usize) -> Result<usize> {
    match square_count(a.max_gap(), 2 * e) {
        Some(k) if k < n => Ok(k),
        _ => Err(Error::Invalid(format!("identity needs n > 2b²e (n = {n}, b = {}, e = {e})", a.max_gap()))),
    }
}

/// Sample variance numerator `n Σ s² - (Σ s)²`, used to track progress.
pub fn spread(s: &[BigInt]) -> BigInt {
    let n = BigInt::from(s.len());
    let sum: BigInt = s.iter().sum();
    let sq: BigInt = s.iter().map(|x| x * x).sum();
    n * sq - &sum * &sum
}
