//! Integer lattice machinery: Smith normal form, abelianization, the structure
//! of the commutator subgroup, and a torsion-free subgroup of finite index.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::group_core::{CommEntry, GroupElement, GroupPresentation, MainGenerator, Order};

/// Dense integer matrix, row major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<BigInt>], cols: usize) -> Self {
        let mut m = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged matrix");
            for (j, x) in row.iter().enumerate() {
                m[(i, j)] = x.clone();
            }
        }
        m
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let rows: Vec<Vec<BigInt>> = rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
        Self::from_rows(&rows, cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> Vec<BigInt> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| &self[(i, j)] * &v[j]).sum())
            .collect()
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.rows, v.len());
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| &v[i] * &self[(i, j)]).sum())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    /// Determinant by fraction-free elimination (square matrices only).
    pub fn determinant(&self) -> BigInt {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n {
            if a[(k, k)].is_zero() {
                let Some(p) = (k + 1..n).find(|&i| !a[(i, k)].is_zero()) else {
                    return BigInt::zero();
                };
                a.swap_rows(k, p);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = &a[(i, j)] * &a[(k, k)] - &a[(i, k)] * &a[(k, j)];
                    a[(i, j)] = v / &prev;
                }
            }
            prev = a[(k, k)].clone();
        }
        sign * &a[(n - 1, n - 1)]
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[dst] += k * row[src]
    fn add_row(&mut self, dst: usize, src: usize, k: &BigInt) {
        for j in 0..self.cols {
            let v = &self[(src, j)] * k;
            self[(dst, j)] += v;
        }
    }

    /// col[dst] += k * col[src]
    fn add_col(&mut self, dst: usize, src: usize, k: &BigInt) {
        for i in 0..self.rows {
            let v = &self[(i, src)] * k;
            self[(i, dst)] += v;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let v = -&self[(i, j)];
            self[(i, j)] = v;
        }
    }

    fn negate_col(&mut self, j: usize) {
        for i in 0..self.rows {
            let v = -&self[(i, j)];
            self[(i, j)] = v;
        }
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// `U * M * V = D` with `D` diagonal, `d_1 | d_2 | ...`, and `U`, `V` unimodular.
/// The inverses of `U` and `V` are tracked alongside.
#[derive(Clone, Debug)]
pub struct SnfResult {
    pub d: IntMatrix,
    pub u: IntMatrix,
    pub u_inv: IntMatrix,
    pub v: IntMatrix,
    pub v_inv: IntMatrix,
    pub rank: usize,
}

impl SnfResult {
    /// Diagonal entries `d_1..d_min(m,n)`, zeros included.
    pub fn diagonal(&self) -> Vec<BigInt> {
        (0..self.d.rows().min(self.d.cols())).map(|i| self.d[(i, i)].clone()).collect()
    }

    /// Re-checks every postcondition from scratch.
    pub fn verify(&self, m: &IntMatrix) -> Result<()> {
        let fail = |what: &str| Err(Error::Internal(format!("Smith normal form check failed: {what}")));
        if self.u.mul(m).mul(&self.v) != self.d {
            return fail("U M V != D");
        }
        if self.u.mul(&self.u_inv) != IntMatrix::identity(self.u.rows()) {
            return fail("U is not unimodular");
        }
        if self.v.mul(&self.v_inv) != IntMatrix::identity(self.v.rows()) {
            return fail("V is not unimodular");
        }
        for i in 0..self.d.rows() {
            for j in 0..self.d.cols() {
                if i != j && !self.d[(i, j)].is_zero() {
                    return fail("D is not diagonal");
                }
            }
        }
        let diag = self.diagonal();
        for (t, x) in diag.iter().enumerate() {
            if x.is_negative() {
                return fail("negative invariant factor");
            }
            if (t < self.rank) == x.is_zero() {
                return fail("rank does not match the nonzero diagonal");
            }
        }
        for w in diag.windows(2) {
            if !w[0].is_zero() && !w[1].is_multiple_of(&w[0]) {
                return fail("divisibility chain broken");
            }
        }
        Ok(())
    }
}

/// Elementary-operation reduction with the smallest-magnitude pivot.
pub fn smith_normal_form(m: &IntMatrix) -> SnfResult {
    let (rows, cols) = (m.rows(), m.cols());
    let mut a = m.clone();
    let mut u = IntMatrix::identity(rows);
    let mut u_inv = IntMatrix::identity(rows);
    let mut v = IntMatrix::identity(cols);
    let mut v_inv = IntMatrix::identity(cols);
    let mut rank = 0;

    // Every row operation on `a` is mirrored on `u`; its inverse is applied as
    // the matching column operation on `u_inv` (and dually for `v`).
    macro_rules! swap_r {
        ($x:expr, $y:expr) => {{
            a.swap_rows($x, $y);
            u.swap_rows($x, $y);
            u_inv.swap_cols($x, $y);
        }};
    }
    macro_rules! swap_c {
        ($x:expr, $y:expr) => {{
            a.swap_cols($x, $y);
            v.swap_cols($x, $y);
            v_inv.swap_rows($x, $y);
        }};
    }
    macro_rules! add_r {
        ($dst:expr, $src:expr, $k:expr) => {{
            let k: BigInt = $k;
            a.add_row($dst, $src, &k);
            u.add_row($dst, $src, &k);
            u_inv.add_col($src, $dst, &-k);
        }};
    }
    macro_rules! add_c {
        ($dst:expr, $src:expr, $k:expr) => {{
            let k: BigInt = $k;
            a.add_col($dst, $src, &k);
            v.add_col($dst, $src, &k);
            v_inv.add_row($src, $dst, &-k);
        }};
    }

    for t in 0..rows.min(cols) {
        // Smallest nonzero entry of the trailing block becomes the pivot.
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                let x = &a[(i, j)];
                if !x.is_zero() && best.map_or(true, |(bi, bj)| x.abs() < a[(bi, bj)].abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        swap_r!(t, pi);
        swap_c!(t, pj);

        loop {
            let mut dirty = false;
            for i in t + 1..rows {
                if !a[(i, t)].is_zero() {
                    let q = a[(i, t)].div_floor(&a[(t, t)]);
                    add_r!(i, t, -q);
                    if !a[(i, t)].is_zero() {
                        dirty = true;
                    }
                }
            }
            for j in t + 1..cols {
                if !a[(t, j)].is_zero() {
                    let q = a[(t, j)].div_floor(&a[(t, t)]);
                    add_c!(j, t, -q);
                    if !a[(t, j)].is_zero() {
                        dirty = true;
                    }
                }
            }
            if dirty {
                // A remainder smaller than the pivot is left in row or column t.
                let mut best = (t, t);
                for i in t + 1..rows {
                    if !a[(i, t)].is_zero() && a[(i, t)].abs() < a[best].abs() {
                        best = (i, t);
                    }
                }
                for j in t + 1..cols {
                    if !a[(t, j)].is_zero() && a[(t, j)].abs() < a[best].abs() {
                        best = (t, j);
                    }
                }
                if best.0 != t {
                    swap_r!(t, best.0);
                } else if best.1 != t {
                    swap_c!(t, best.1);
                }
                continue;
            }
            // Row and column are clear; enforce divisibility of the rest.
            let mut offender = None;
            'scan: for i in t + 1..rows {
                for j in t + 1..cols {
                    if !a[(i, j)].is_multiple_of(&a[(t, t)]) {
                        offender = Some(i);
                        break 'scan;
                    }
                }
            }
            match offender {
                Some(i) => add_r!(t, i, BigInt::one()),
                None => break,
            }
        }
        if a[(t, t)].is_negative() {
            a.negate_row(t);
            u.negate_row(t);
            u_inv.negate_col(t);
        }
        rank = t + 1;
    }

    let res = SnfResult { d: a, u, u_inv, v, v_inv, rank };
    if let Err(e) = res.verify(m) {
        panic!("{e}");
    }
    res
}

/// Basis of the integer kernel `{x : M x = 0}`.
pub fn kernel_basis(m: &IntMatrix) -> Vec<Vec<BigInt>> {
    let snf = smith_normal_form(m);
    (snf.rank..m.cols()).map(|j| snf.v.col(j)).collect()
}

/// Some integer solution of `M x = b`, if one exists.
pub fn solve(m: &IntMatrix, b: &[BigInt]) -> Option<Vec<BigInt>> {
    solve_with(&smith_normal_form(m), m.cols(), b)
}

fn solve_with(snf: &SnfResult, cols: usize, b: &[BigInt]) -> Option<Vec<BigInt>> {
    let w = snf.u.mul_vec(b);
    let mut z = vec![BigInt::zero(); cols];
    for (t, wt) in w.iter().enumerate() {
        if t < snf.rank {
            let d = &snf.d[(t, t)];
            if !wt.is_multiple_of(d) {
                return None;
            }
            z[t] = wt / d;
        } else if !wt.is_zero() {
            return None;
        }
    }
    Some(snf.v.mul_vec(&z))
}

fn lcm_all(xs: &[BigInt]) -> BigInt {
    xs.iter().fold(BigInt::one(), |acc, x| acc.lcm(x))
}

fn product(xs: &[BigInt]) -> BigInt {
    xs.iter().fold(BigInt::one(), |acc, x| acc * x)
}

/// `G / [G, G] = Z^free_rank x (Z/t_1 x ... )`, with explicit coordinates.
#[derive(Clone, Debug)]
pub struct AbelianizationData {
    pub free_rank: usize,
    /// Nontrivial torsion invariant factors (each > 1).
    pub torsion: Vec<BigInt>,
    /// Elements of `G` whose images form a basis of the free part.
    pub lifts: Vec<GroupElement>,
    /// Change of coordinates on `Z^(r+s)`: `x -> x V`.
    v: IntMatrix,
    diag: Vec<BigInt>,
    rank: usize,
}

impl AbelianizationData {
    /// Image of `g`: free coordinates, then torsion coordinates reduced mod `t_i`.
    pub fn coordinates(&self, g: &GroupElement) -> (Vec<BigInt>, Vec<BigInt>) {
        let x: Vec<BigInt> = g.e.iter().chain(&g.f).cloned().collect();
        let y = self.v.vec_mul(&x);
        let mut free = Vec::new();
        let mut tors = Vec::new();
        for (j, yj) in y.into_iter().enumerate() {
            if j >= self.rank {
                free.push(yj);
            } else if self.diag[j] > BigInt::one() {
                tors.push(yj.mod_floor(&self.diag[j]));
            }
        }
        (free, tors)
    }

    pub fn torsion_size(&self) -> BigInt {
        product(&self.torsion)
    }
}

pub fn abelianization(p: &GroupPresentation) -> AbelianizationData {
    let r = p.rank();
    let s = p.central_rank();
    let n = r + s;
    let mut rels: Vec<Vec<BigInt>> = Vec::new();
    for (i, g) in p.main_generators().iter().enumerate() {
        if let Order::Finite(m) = &g.order {
            let mut row = vec![BigInt::zero(); n];
            row[i] = m.clone();
            for (k, pk) in g.power.iter().enumerate() {
                row[r + k] = -pk;
            }
            rels.push(row);
        }
    }
    for (k, o) in p.central_orders().iter().enumerate() {
        if let Order::Finite(m) = o {
            let mut row = vec![BigInt::zero(); n];
            row[r + k] = m.clone();
            rels.push(row);
        }
    }
    for c in p.comm_entries() {
        let mut row = vec![BigInt::zero(); n];
        for (k, x) in c.value.iter().enumerate() {
            row[r + k] = x.clone();
        }
        rels.push(row);
    }
    let rel = IntMatrix::from_rows(&rels, n);
    let snf = smith_normal_form(&rel);
    let diag = snf.diagonal();
    let torsion: Vec<BigInt> = diag[..snf.rank].iter().filter(|d| **d > BigInt::one()).cloned().collect();
    let lifts = (snf.rank..n)
        .map(|j| {
            let x = snf.v_inv.row(j);
            p.normalize(x[..r].to_vec(), x[r..].to_vec())
        })
        .collect();
    AbelianizationData { free_rank: n - snf.rank, torsion, lifts, v: snf.v, diag, rank: snf.rank }
}

/// Structure of `[G, G]`, the subgroup of the central group generated by the
/// commutator table: `[G, G] = Z^h x G_0` with explicit coordinates.
#[derive(Clone, Debug)]
pub struct CommutatorLattice {
    pub h: usize,
    /// Invariant factors of `G_0` (each > 1).
    pub torsion: Vec<BigInt>,
    /// Generator pairs `(i, j)` (0-based) in column order.
    pairs: Vec<(usize, usize)>,
    /// SNF of `[C | Lambda]`, used to write central vectors in the generators.
    gen_snf: SnfResult,
    gen_cols: usize,
    relation_v: IntMatrix,
    relation_diag: Vec<BigInt>,
    relation_rank: usize,
    m: usize,
    /// Sign applied to the free coordinates so that the first commutator with
    /// a nonzero free part projects positively.
    sign: Vec<BigInt>,
}

/// Coordinates of an element of `[G, G]` in `Z^h x G_0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LatticeCoords {
    pub free: Vec<BigInt>,
    pub torsion: Vec<BigInt>,
}

impl CommutatorLattice {
    /// Size `|G_0|` (the `e` of bounded generation).
    pub fn size_e(&self) -> BigInt {
        product(&self.torsion)
    }

    /// Exponent of `G_0` (the `e` of the torsion-free subgroup construction).
    pub fn exp_e(&self) -> BigInt {
        lcm_all(&self.torsion)
    }

    /// Coordinates of a central vector lying in `[G, G]`; `None` if it does not.
    pub fn coords(&self, f: &[BigInt]) -> Option<LatticeCoords> {
        if self.m == 0 {
            return solve_with(&self.gen_snf, self.gen_cols, f)
                .map(|_| LatticeCoords { free: vec![], torsion: vec![] });
        }
        let sol = solve_with(&self.gen_snf, self.gen_cols, f)?;
        let x = &sol[..self.m];
        let y = self.relation_v.vec_mul(x);
        let mut free = Vec::new();
        let mut torsion = Vec::new();
        for (j, yj) in y.into_iter().enumerate() {
            if j >= self.relation_rank {
                free.push(yj);
            } else if self.relation_diag[j] > BigInt::one() {
                torsion.push(yj.mod_floor(&self.relation_diag[j]));
            }
        }
        for (x, s) in free.iter_mut().zip(&self.sign) {
            *x *= s;
        }
        Some(LatticeCoords { free, torsion })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

pub fn commutator_lattice(p: &GroupPresentation) -> CommutatorLattice {
    let r = p.rank();
    let s = p.central_rank();
    let pairs: Vec<(usize, usize)> = (0..r).flat_map(|i| (i + 1..r).map(move |j| (i, j))).collect();
    let m = pairs.len();
    let finite: Vec<(usize, BigInt)> = p
        .central_orders()
        .iter()
        .enumerate()
        .filter_map(|(k, o)| o.modulus().map(|x| (k, x.clone())))
        .collect();
    let gen_cols = m + finite.len();
    let mut a = IntMatrix::zeros(s, gen_cols);
    for (col, &(i, j)) in pairs.iter().enumerate() {
        for (k, x) in p.comm(i, j).iter().enumerate() {
            a[(k, col)] = x.clone();
        }
    }
    for (t, (k, o)) in finite.iter().enumerate() {
        a[(*k, m + t)] = o.clone();
    }
    let gen_snf = smith_normal_form(&a);
    let relations: Vec<Vec<BigInt>> =
        (gen_snf.rank..gen_cols).map(|j| gen_snf.v.col(j)[..m].to_vec()).collect();
    let rel = IntMatrix::from_rows(&relations, m);
    let rsnf = smith_normal_form(&rel);
    let relation_diag = rsnf.diagonal();
    let torsion: Vec<BigInt> =
        relation_diag[..rsnf.rank].iter().filter(|d| **d > BigInt::one()).cloned().collect();
    let h = m - rsnf.rank;
    let mut lat = CommutatorLattice {
        h,
        torsion,
        pairs: pairs.clone(),
        gen_snf,
        gen_cols,
        relation_v: rsnf.v,
        relation_diag,
        relation_rank: rsnf.rank,
        m,
        sign: vec![BigInt::one(); h],
    };
    // Orient each free coordinate by the first commutator that moves it.
    for t in 0..h {
        for &(i, j) in &pairs {
            let c = lat.coords(p.comm(i, j)).expect("generator lies in the lattice");
            if !c.free[t].is_zero() {
                if c.free[t].is_negative() {
                    lat.sign[t] = -BigInt::one();
                }
                break;
            }
        }
    }
    lat
}

/// Result of the torsion-free finite-index subgroup construction.
#[derive(Clone, Debug)]
pub struct TorsionFreeSubgroup {
    /// `x_1^e, ..., x_r^e` as elements of `G`.
    pub generators: Vec<GroupElement>,
    /// A consistent presentation of `H`: free main part, free central part.
    pub presentation: GroupPresentation,
    /// Exponent of the torsion part of `[G, G]`.
    pub exp_e: BigInt,
    pub free_rank: usize,
    /// `[pi(G) : pi(H)] = e^r |A_0|` in the abelianization.
    pub abelian_index: BigInt,
    /// `[[G,G] : [H,H]]`.
    pub commutator_index: BigInt,
    /// Images in `G` of the central generators of the derived presentation.
    central_images: Vec<GroupElement>,
    /// Central vector of the free-part basis of `[H, H]`, in `Z^h` coordinates.
    central_basis: Vec<Vec<BigInt>>,
    abelianization: AbelianizationData,
    lattice: CommutatorLattice,
}

impl TorsionFreeSubgroup {
    /// `[G : H] = [pi(G) : pi(H)] * [[G,G] : [H,H]]`.
    pub fn predicted_index(&self) -> BigInt {
        &self.abelian_index * &self.commutator_index
    }

    /// The embedding of the derived presentation into `G`.
    pub fn embed(&self, p: &GroupPresentation, h: &GroupElement) -> GroupElement {
        let mut acc = p.identity();
        for (y, k) in self.generators.iter().zip(&h.e) {
            acc = p.multiply(&acc, &p.power(y, k));
        }
        for (c, k) in self.central_images.iter().zip(&h.f) {
            acc = p.multiply(&acc, &p.power(c, k));
        }
        acc
    }

    /// Membership of an element of `G` in `H`.
    pub fn contains(&self, p: &GroupPresentation, g: &GroupElement) -> bool {
        let (free, tors) = self.abelianization.coordinates(g);
        if tors.iter().any(|t| !t.is_zero()) {
            return false;
        }
        let mut k = Vec::with_capacity(free.len());
        for x in &free {
            if !x.is_multiple_of(&self.exp_e) {
                return false;
            }
            k.push(x / &self.exp_e);
        }
        let mut y = p.identity();
        for (gen, kj) in self.generators.iter().zip(&k) {
            y = p.multiply(&y, &p.power(gen, kj));
        }
        let rest = p.multiply(&p.inverse(&y), g);
        if rest.e.iter().any(|x| !x.is_zero()) {
            return false;
        }
        let Some(c) = self.lattice.coords(&rest.f) else { return false };
        if c.torsion.iter().any(|t| !t.is_zero()) {
            return false;
        }
        if self.central_basis.is_empty() {
            return c.free.iter().all(Zero::is_zero);
        }
        let cols = self.central_basis.len();
        let mut b = IntMatrix::zeros(c.free.len(), cols);
        for (t, v) in self.central_basis.iter().enumerate() {
            for (i, x) in v.iter().enumerate() {
                b[(i, t)] = x.clone();
            }
        }
        solve(&b, &c.free).is_some()
    }
}

pub fn torsion_free_subgroup(p: &GroupPresentation) -> Result<TorsionFreeSubgroup> {
    p.check_consistency().into_result()?;
    let ab = abelianization(p);
    let lat = commutator_lattice(p);
    let exp_e = lat.exp_e();
    let generators: Vec<GroupElement> = ab.lifts.iter().map(|x| p.power(x, &exp_e)).collect();
    let r = generators.len();

    let mut pair_idx = Vec::new();
    let mut rows = Vec::new();
    let mut comm_elems = Vec::new();
    for i in 0..r {
        for j in i + 1..r {
            let c = p.commutator(&generators[i], &generators[j]);
            let coords = lat
                .coords(&c.f)
                .ok_or_else(|| Error::Internal("commutator outside [G,G]".into()))?;
            if coords.torsion.iter().any(|t| !t.is_zero()) {
                return Err(Error::Internal("[H,H] has a torsion component".into()));
            }
            pair_idx.push((i, j));
            rows.push(coords.free);
            comm_elems.push(c);
        }
    }
    let h = lat.h;
    let (central_basis, comm, central_images) = if rows.is_empty() || h == 0 {
        (Vec::new(), Vec::new(), Vec::new())
    } else {
        let mmat = IntMatrix::from_rows(&rows, h);
        let snf = smith_normal_form(&mmat);
        let rank = snf.rank;
        let basis: Vec<Vec<BigInt>> = (0..rank)
            .map(|t| snf.v_inv.row(t).iter().map(|x| x * &snf.d[(t, t)]).collect())
            .collect();
        let mut comm = Vec::new();
        for (pidx, &(i, j)) in pair_idx.iter().enumerate() {
            let value: Vec<BigInt> = (0..rank).map(|t| snf.u_inv[(pidx, t)].clone()).collect();
            if value.iter().any(|x| !x.is_zero()) {
                comm.push(CommEntry { i: i + 1, j: j + 1, value });
            }
        }
        // b_t = sum_p U[t][p] M_p, realized by the same product of commutators.
        let images: Vec<GroupElement> = (0..rank)
            .map(|t| {
                let mut acc = p.identity();
                for (pidx, c) in comm_elems.iter().enumerate() {
                    acc = p.multiply(&acc, &p.power(c, &snf.u[(t, pidx)]));
                }
                acc
            })
            .collect();
        (basis, comm, images)
    };
    let s_h = central_basis.len();
    let presentation = GroupPresentation::new(
        vec![MainGenerator::infinite(s_h); r],
        vec![Order::Infinite; s_h],
        comm,
    )?;

    let abelian_index = num_traits::pow::pow(exp_e.clone(), r) * ab.torsion_size();
    // [Z^h x G_0 : L_H] = |G_0| * [Z^h : L_H], the latter a product of the
    // invariant factors when L_H has full rank.
    let commutator_index = if h == 0 {
        lat.size_e()
    } else if s_h < h {
        BigInt::zero()
    } else {
        let bmat = IntMatrix::from_rows(&central_basis, h);
        lat.size_e() * bmat.determinant().abs()
    };

    Ok(TorsionFreeSubgroup {
        generators,
        presentation,
        exp_e,
        free_rank: r,
        abelian_index,
        commutator_index,
        central_images,
        central_basis,
        abelianization: ab,
        lattice: lat,
    })
}

/// Sufficient criterion: every relative order is infinite and the
/// abelianization is torsion-free.
pub fn verify_torsion_free(p: &GroupPresentation) -> bool {
    p.main_generators().iter().all(|g| g.order.is_infinite())
        && p.central_orders().iter().all(Order::is_infinite)
        && abelianization(p).torsion.is_empty()
}

/// Index of `H` in `G` by breadth-first enumeration of right cosets `H g`,
/// given a membership test for `H`. Fails if more than `budget` cosets appear.
pub fn coset_index<F>(p: &GroupPresentation, contains: F, budget: usize) -> Result<usize>
where
    F: Fn(&GroupElement) -> bool,
{
    let mut moves = Vec::new();
    for i in 0..p.rank() {
        let g = p.main_gen(i);
        moves.push(p.inverse(&g));
        moves.push(g);
    }
    for k in 0..p.central_rank() {
        let g = p.central_gen(k);
        moves.push(p.inverse(&g));
        moves.push(g);
    }
    let mut reps: Vec<(GroupElement, GroupElement)> = vec![(p.identity(), p.identity())];
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        let base = reps[idx].0.clone();
        for mv in &moves {
            let g = p.multiply(&base, mv);
            let known = reps.iter().any(|(_, inv)| contains(&p.multiply(&g, inv)));
            if !known {
                if reps.len() >= budget {
                    return Err(Error::Budget(budget as u64));
                }
                let inv = p.inverse(&g);
                reps.push((g, inv));
                queue.push_back(reps.len() - 1);
            }
        }
    }
    Ok(reps.len())
}

/// Converts a small nonnegative integer to `u64`.
pub(crate) fn to_u64(x: &BigInt, what: &str) -> Result<u64> {
    x.to_u64().ok_or_else(|| Error::Invalid(format!("{what} = {x} does not fit in 64 bits")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(xs: &[i64]) -> Vec<BigInt> {
        xs.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn snf_examples() {
        let id = IntMatrix::identity(2);
        assert_eq!(smith_normal_form(&id).d, id);
        let m = IntMatrix::from_i64(&[&[2, 4], &[6, 8]]);
        assert_eq!(smith_normal_form(&m).diagonal(), big(&[2, 4]));
        let z = IntMatrix::zeros(2, 3);
        let snf = smith_normal_form(&z);
        assert!(snf.d.is_zero());
        assert_eq!(snf.rank, 0);
        let odd = IntMatrix::from_i64(&[&[6, 0], &[0, 4]]);
        assert_eq!(smith_normal_form(&odd).diagonal(), big(&[2, 12]));
    }

    #[test]
    fn snf_unimodular_transforms() {
        let m = IntMatrix::from_i64(&[&[3, 5, 7], &[-2, 4, 10], &[9, 1, 0], &[0, 0, 6]]);
        let snf = smith_normal_form(&m);
        assert_eq!(snf.u.determinant().abs(), BigInt::one());
        assert_eq!(snf.v.determinant().abs(), BigInt::one());
        snf.verify(&m).unwrap();
    }

    #[test]
    fn kernel_and_solve() {
        let m = IntMatrix::from_i64(&[&[1, 2, 3], &[2, 4, 6]]);
        for k in kernel_basis(&m) {
            assert!(m.mul_vec(&k).iter().all(Zero::is_zero));
        }
        assert_eq!(kernel_basis(&m).len(), 2);
        let x = solve(&m, &big(&[5, 10])).unwrap();
        assert_eq!(m.mul_vec(&x), big(&[5, 10]));
        assert!(solve(&m, &big(&[5, 11])).is_none());
        let two = IntMatrix::from_i64(&[&[2]]);
        assert!(solve(&two, &big(&[3])).is_none());
    }

    #[test]
    fn determinant_matches_cofactor() {
        let m = IntMatrix::from_i64(&[&[2, -1, 0], &[1, 3, 4], &[0, 5, -2]]);
        // 2(3*-2 - 20) - (-1)(1*-2 - 0) + 0 = -52 - 2 = -54
        assert_eq!(m.determinant(), BigInt::from(-54));
    }

    #[test]
    fn abelianization_examples() {
        let h = GroupPresentation::heisenberg();
        let ab = abelianization(&h);
        assert_eq!(ab.free_rank, 2);
        assert!(ab.torsion.is_empty());

        let zz2 = GroupPresentation::new(
            vec![MainGenerator::infinite(1)],
            vec![Order::finite(2)],
            vec![],
        )
        .unwrap();
        let ab = abelianization(&zz2);
        assert_eq!((ab.free_rank, ab.torsion.clone()), (1, big(&[2])));

        let z3 = GroupPresentation::new(vec![MainGenerator::finite(3, vec![])], vec![], vec![]).unwrap();
        let ab = abelianization(&z3);
        assert_eq!((ab.free_rank, ab.torsion.clone()), (0, big(&[3])));
    }

    #[test]
    fn commutator_lattice_examples() {
        let lat = commutator_lattice(&GroupPresentation::heisenberg());
        assert_eq!(lat.h, 1);
        assert!(lat.torsion.is_empty());
        assert_eq!(lat.coords(&big(&[5])).unwrap().free, big(&[5]));

        let hh = GroupPresentation::new(
            vec![MainGenerator::infinite(2); 4],
            vec![Order::Infinite; 2],
            vec![
                CommEntry { i: 1, j: 2, value: big(&[1, 0]) },
                CommEntry { i: 3, j: 4, value: big(&[0, 1]) },
            ],
        )
        .unwrap();
        assert_eq!(commutator_lattice(&hh).h, 2);

        let ab = GroupPresentation::new(vec![MainGenerator::infinite(0); 2], vec![], vec![]).unwrap();
        let lat = commutator_lattice(&ab);
        assert_eq!((lat.h, lat.size_e()), (0, BigInt::one()));
    }

    #[test]
    fn torsion_in_commutator_lattice() {
        // H_3 x Z/2 with [x, y] = (1, 1): [G,G] is infinite cyclic.
        let p = GroupPresentation::new(
            vec![MainGenerator::infinite(2); 2],
            vec![Order::Infinite, Order::finite(2)],
            vec![CommEntry { i: 1, j: 2, value: big(&[1, 1]) }],
        )
        .unwrap();
        let lat = commutator_lattice(&p);
        assert_eq!((lat.h, lat.size_e()), (1, BigInt::one()));

        // Three generators, [a1,a2] = z1 (infinite), [a1,a3] = z2 (order 2).
        let q = GroupPresentation::new(
            vec![MainGenerator::infinite(2); 3],
            vec![Order::Infinite, Order::finite(2)],
            vec![
                CommEntry { i: 1, j: 2, value: big(&[1, 0]) },
                CommEntry { i: 1, j: 3, value: big(&[0, 1]) },
            ],
        )
        .unwrap();
        let lat = commutator_lattice(&q);
        assert_eq!((lat.h, lat.size_e(), lat.exp_e()), (1, BigInt::from(2), BigInt::from(2)));
        let c = lat.coords(&big(&[3, 1])).unwrap();
        assert_eq!((c.free, c.torsion), (big(&[3]), big(&[1])));
        assert!(lat.coords(&big(&[0, 0])).unwrap().free.iter().all(Zero::is_zero));
    }

    #[test]
    fn torsion_free_subgroup_of_h3_mod_2() {
        let p = GroupPresentation::new(
            vec![MainGenerator::infinite(1); 2],
            vec![Order::finite(2)],
            vec![CommEntry { i: 1, j: 2, value: big(&[1]) }],
        )
        .unwrap();
        let tf = torsion_free_subgroup(&p).unwrap();
        assert_eq!(tf.exp_e, BigInt::from(2));
        assert!(verify_torsion_free(&tf.presentation));
        assert_eq!(tf.presentation.rank(), 2);
        assert_eq!(tf.presentation.central_rank(), 0);
        let idx = coset_index(&p, |g| tf.contains(&p, g), 1000).unwrap();
        assert_eq!(BigInt::from(idx), tf.predicted_index());
        assert_eq!(idx, 8);
    }

    #[test]
    fn torsion_free_subgroup_of_h3_is_itself() {
        let p = GroupPresentation::heisenberg();
        let tf = torsion_free_subgroup(&p).unwrap();
        assert_eq!(tf.exp_e, BigInt::one());
        assert_eq!(coset_index(&p, |g| tf.contains(&p, g), 10).unwrap(), 1);
        assert!(verify_torsion_free(&tf.presentation));
    }

    #[test]
    fn verify_torsion_free_rejects_finite_orders() {
        let p = GroupPresentation::new(
            vec![MainGenerator::infinite(1); 2],
            vec![Order::finite(2)],
            vec![CommEntry { i: 1, j: 2, value: big(&[1]) }],
        )
        .unwrap();
        assert!(!verify_torsion_free(&p));
        assert!(verify_torsion_free(&GroupPresentation::heisenberg()));
    }
}
