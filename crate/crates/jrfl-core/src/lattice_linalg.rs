//! Linear algebra over the DVR O'_v and its fraction field: matrices of
//! Laurent-series scalars, wedge powers, Smith/Hermite normal forms, lattice
//! representatives, duals, Hermitian self-duality, and the bounded HNF
//! enumerator that powers every fiber count.
//!
//! Lattices are stored as column Hermite normal forms: upper-triangular exact
//! basis matrices with diagonal π^{d_i} and off-diagonal entries reduced mod
//! the row's diagonal. HNF uniqueness makes lattice equality entrywise and
//! set-counting exact.

use crate::error::{Error, Result};
use crate::local_fields::{Place, PlaceKind, Scalar, Series, INF_PREC};
use std::fmt;
use std::sync::Arc;

// ---------------------------------------------------------------------------
// SeriesMatrix
// ---------------------------------------------------------------------------

#[derive(Clone)]
pub struct SeriesMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<Scalar>, // row-major
}

impl fmt::Debug for SeriesMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SeriesMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.at(i, j).to_wire()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl SeriesMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Scalar) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        SeriesMatrix { rows, cols, entries }
    }

    pub fn zeros(place: &Arc<Place>, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| Scalar::zero(place))
    }

    pub fn identity(place: &Arc<Place>, n: usize) -> Self {
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Scalar::one(place)
            } else {
                Scalar::zero(place)
            }
        })
    }

    pub fn diag(place: &Arc<Place>, d: &[Scalar]) -> Self {
        // off-diagonal zeros follow the tag of the diagonal entries so that
        // In-tagged component matrices stay single-component at split places
        let zero = match d.first() {
            Some(Scalar::In(_)) => Scalar::In(Series::zero(place)),
            _ => Scalar::zero(place),
        };
        Self::from_fn(d.len(), d.len(), |i, j| {
            if i == j {
                d[i].clone()
            } else {
                zero.clone()
            }
        })
    }

    /// Diagonal π-power matrix.
    pub fn pi_diag(place: &Arc<Place>, exps: &[i64]) -> Self {
        let d: Vec<Scalar> = exps.iter().map(|&e| Scalar::pi_pow(place, e)).collect();
        Self::diag(place, &d)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &Scalar {
        &self.entries[i * self.cols + j]
    }
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn place(&self) -> &Arc<Place> {
        self.entries[0].place()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.at(j, i).clone())
    }

    pub fn map(&self, mut f: impl FnMut(&Scalar) -> Scalar) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| f(self.at(i, j)))
    }

    /// Entrywise σ (coefficientwise Frobenius / split swap).
    pub fn frobenius(&self) -> Self {
        self.map(|s| s.frobenius())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self.at(i, j).add(other.at(i, j)))
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self.at(i, j).sub(other.at(i, j)))
    }

    pub fn neg(&self) -> Self {
        self.map(|s| s.neg())
    }

    /// Zero/one/identity tagged like this matrix's entries, so that the
    /// In-tagged component matrices of split inputs combine without mixing
    /// scalar shapes.
    fn entry_zero(&self) -> Scalar {
        match self.entries.first() {
            Some(Scalar::In(_)) => Scalar::In(Series::zero(self.place())),
            _ => Scalar::zero(self.place()),
        }
    }
    fn entry_one(&self) -> Scalar {
        match self.entries.first() {
            Some(Scalar::In(_)) => Scalar::In(Series::one(self.place())),
            _ => Scalar::one(self.place()),
        }
    }
    fn entry_identity(&self) -> Self {
        let (z, o) = (self.entry_zero(), self.entry_one());
        Self::from_fn(self.rows, self.rows, |i, j| {
            if i == j { o.clone() } else { z.clone() }
        })
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        Self::from_fn(self.rows, other.cols, |i, j| {
            let mut acc = self.entry_zero();
            for k in 0..self.cols {
                acc = acc.add(&self.at(i, k).mul(other.at(k, j)));
            }
            acc
        })
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        self.map(|s| s.mul(c))
    }

    pub fn mul_vec(&self, v: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = self.entry_zero();
                for k in 0..self.cols {
                    acc = acc.add(&self.at(i, k).mul(&v[k]));
                }
                acc
            })
            .collect()
    }

    pub fn vec_mul(v: &[Scalar], m: &Self) -> Vec<Scalar> {
        assert_eq!(m.rows, v.len());
        (0..m.cols)
            .map(|j| {
                let mut acc = m.entry_zero();
                for k in 0..m.rows {
                    acc = acc.add(&v[k].mul(m.at(k, j)));
                }
                acc
            })
            .collect()
    }

    pub fn pow(&self, e: u32) -> Self {
        assert_eq!(self.rows, self.cols);
        let mut acc = self.entry_identity();
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn provably_differs(&self, other: &Self) -> bool {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        (0..self.rows)
            .any(|i| (0..self.cols).any(|j| self.at(i, j).provably_differs(other.at(i, j))))
    }

    pub fn is_integral(&self) -> Result<bool> {
        for e in &self.entries {
            if !e.is_integral()? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Determinant by subset dynamic programming (division-free, exact on
    /// exact inputs). Fine for the desk-scale sizes (≤ C(4,2) = 6).
    pub fn det(&self) -> Scalar {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 0 {
            return Scalar::one(self.place());
        }
        // dp over column subsets: after processing rows 0..r, dp[mask] with
        // popcount(mask) = r holds the signed minor of rows 0..r on columns in mask.
        let mut dp = vec![None::<Scalar>; 1 << n];
        dp[0] = Some(self.entry_one());
        for r in 0..n {
            let mut next = vec![None::<Scalar>; 1 << n];
            for mask in 0..(1usize << n) {
                let Some(cur) = dp[mask].clone() else { continue };
                if (mask as u32).count_ones() as usize != r {
                    continue;
                }
                for c in 0..n {
                    if mask & (1 << c) != 0 {
                        continue;
                    }
                    // Laplace along row r: cofactor sign (−1)^{r + pos(c)}
                    let pos = (mask & ((1 << c) - 1)).count_ones() as usize;
                    let term = self.at(r, c).mul(&cur);
                    let term = if (r + pos) % 2 == 1 { term.neg() } else { term };
                    let slot = &mut next[mask | (1 << c)];
                    *slot = Some(match slot.take() {
                        None => term,
                        Some(prev) => prev.add(&term),
                    });
                }
            }
            dp = next;
        }
        dp[(1 << n) - 1].take().expect("full mask populated")
    }

    /// Matrix of ∧^i M in the lexicographically ordered wedge basis
    /// {e_S : |S| = i}: entry (S, T) = det M[S, T].
    pub fn wedge(&self, i: usize) -> Self {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        assert!(i >= 1 && i <= n);
        let subsets = k_subsets(n, i);
        let sm = |s: &[usize], t: &[usize]| {
            SeriesMatrix::from_fn(i, i, |a, b| self.at(s[a], t[b]).clone()).det()
        };
        SeriesMatrix::from_fn(subsets.len(), subsets.len(), |a, b| sm(&subsets[a], &subsets[b]))
    }

    fn assert_inert_entries(&self) {
        debug_assert!(
            self.entries.iter().all(|e| matches!(e, Scalar::In(_))),
            "operation requires single-component (inert-tagged) entries; split \
             matrices must be decomposed first"
        );
    }

    /// Decompose a split-scalar matrix into (left, right) component matrices
    /// with inert-tagged entries. Identity-like on inert matrices.
    pub fn split_components(&self) -> (Self, Self) {
        let l = self.map(|s| Scalar::In(s.left().clone()));
        let r = self.map(|s| Scalar::In(s.right().clone()));
        (l, r)
    }

    /// Solve A·X = B over the fraction field by elimination with
    /// valuation-based pivoting. Requires single-component entries.
    pub fn solve(&self, b: &SeriesMatrix) -> Result<SeriesMatrix> {
        self.assert_inert_entries();
        b.assert_inert_entries();
        assert_eq!(self.rows, self.cols);
        assert_eq!(self.rows, b.rows);
        let n = self.rows;
        let mut a = self.clone();
        let mut rhs = b.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            // pick the provably nonzero pivot of minimal valuation; verify no
            // unknown entry could undercut it
            let mut best: Option<(usize, i64)> = None;
            let mut unknown_floor: Option<i64> = None;
            for row in col..n {
                let e = a.at(row, col);
                match e {
                    Scalar::In(s) => {
                        if s.is_provably_nonzero() {
                            let v = s.val;
                            if best.map_or(true, |(_, bv)| v < bv) {
                                best = Some((row, v));
                            }
                        } else if !s.is_exact_zero() {
                            let f = s.prec;
                            unknown_floor =
                                Some(unknown_floor.map_or(f, |u: i64| u.min(f)));
                        }
                    }
                    _ => unreachable!(),
                }
            }
            let (prow, pval) = match best {
                Some(x) => x,
                None => {
                    return if unknown_floor.is_some() {
                        Err(Error::PrecisionExhausted(format!(
                            "no provable pivot in column {col}"
                        )))
                    } else {
                        Err(Error::SingularMatrix)
                    };
                }
            };
            if let Some(u) = unknown_floor {
                if u <= pval {
                    return Err(Error::PrecisionExhausted(format!(
                        "unknown entry (prec π^{u}) could undercut pivot val {pval} in column {col}"
                    )));
                }
            }
            if prow != col {
                for j in 0..n {
                    let tmp = a.at(col, j).clone();
                    a.set(col, j, a.at(prow, j).clone());
                    a.set(prow, j, tmp);
                }
                for j in 0..rhs.cols {
                    let tmp = rhs.at(col, j).clone();
                    rhs.set(col, j, rhs.at(prow, j).clone());
                    rhs.set(prow, j, tmp);
                }
                perm.swap(col, prow);
            }
            let pivot = a.at(col, col).clone();
            for row in 0..n {
                if row == col {
                    continue;
                }
                let e = a.at(row, col).clone();
                if e.is_zero_to_prec() && e.left().is_exact_zero() {
                    continue;
                }
                let factor = e.div(&pivot)?;
                for j in col..n {
                    let v = a.at(row, j).sub(&factor.mul(a.at(col, j)));
                    a.set(row, j, v);
                }
                for j in 0..rhs.cols {
                    let v = rhs.at(row, j).sub(&factor.mul(rhs.at(col, j)));
                    rhs.set(row, j, v);
                }
            }
        }
        let mut x = SeriesMatrix::zeros(self.place(), n, rhs.cols);
        for i in 0..n {
            let pivot = a.at(i, i).clone();
            for j in 0..rhs.cols {
                x.set(i, j, rhs.at(i, j).div(&pivot)?);
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<SeriesMatrix> {
        if self.entries.iter().any(|e| matches!(e, Scalar::Sp(_, _))) {
            let (l, r) = self.split_components();
            let li = l.inverse()?;
            let ri = r.inverse()?;
            return Ok(Self::combine_components(&li, &ri));
        }
        if self.is_upper_triangular_exact() {
            return Ok(self.triangular_inverse_exact());
        }
        // identity tagged single-component, so component matrices of split
        // inputs can be solved directly
        let place = self.place();
        let id = SeriesMatrix::from_fn(self.rows, self.rows, |i, j| {
            Scalar::In(if i == j {
                Series::one(place)
            } else {
                Series::zero(place)
            })
        });
        self.solve(&id)
    }

    /// Reassemble a split-scalar matrix from component matrices.
    pub fn combine_components(l: &Self, r: &Self) -> Self {
        assert_eq!((l.rows, l.cols), (r.rows, r.cols));
        Self::from_fn(l.rows, l.cols, |i, j| {
            Scalar::pair(l.at(i, j).left().clone(), r.at(i, j).left().clone())
        })
    }

    /// Rank over the fraction field (single-component entries); errors with
    /// PrecisionExhausted when undetermined entries could change the answer.
    pub fn rank(&self) -> Result<usize> {
        self.assert_inert_entries();
        let mut a = self.clone();
        let mut rank = 0usize;
        let mut row0 = 0usize;
        for col in 0..a.cols {
            let mut best: Option<(usize, i64)> = None;
            let mut unknown_floor: Option<i64> = None;
            for row in row0..a.rows {
                let s = a.at(row, col).left();
                if s.is_provably_nonzero() {
                    let v = s.val;
                    if best.map_or(true, |(_, bv)| v < bv) {
                        best = Some((row, v));
                    }
                } else if !s.is_exact_zero() {
                    unknown_floor = Some(unknown_floor.map_or(s.prec, |x: i64| x.min(s.prec)));
                }
            }
            let Some((prow, pval)) = best else {
                if unknown_floor.is_some() {
                    return Err(Error::PrecisionExhausted(format!(
                        "rank: column {col} undetermined"
                    )));
                }
                continue;
            };
            if let Some(u) = unknown_floor {
                if u <= pval {
                    return Err(Error::PrecisionExhausted(format!(
                        "rank: unknown entry could undercut pivot in column {col}"
                    )));
                }
            }
            if prow != row0 {
                a = swap_rows(&a, row0, prow);
            }
            let pivot = a.at(row0, col).clone();
            for row in (row0 + 1)..a.rows {
                let e = a.at(row, col).clone();
                if e.is_zero_to_prec() && e.left().is_exact_zero() {
                    continue;
                }
                let factor = e.div(&pivot)?;
                for j in col..a.cols {
                    let v = a.at(row, j).sub(&factor.mul(a.at(row0, j)));
                    a.set(row, j, v);
                }
            }
            rank += 1;
            row0 += 1;
            if row0 == a.rows {
                break;
            }
        }
        Ok(rank)
    }

    fn is_upper_triangular_exact(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in 0..self.cols {
                let s = self.at(i, j).left();
                if s.prec != INF_PREC {
                    return false;
                }
                if j < i && !s.is_exact_zero() {
                    return false;
                }
                if j == i && s.coeffs.len() != 1 {
                    return false;
                }
            }
            // also require the right component triangular when split
            let s = self.at(i, i).right();
            if s.coeffs.len() != 1 || s.prec != INF_PREC {
                return false;
            }
        }
        true
    }

    /// Exact inverse of an upper-triangular matrix with monomial diagonal:
    /// B = D(1 + N) with N strictly upper nilpotent, B^{-1} = Σ(−N)^k · D^{-1}.
    fn triangular_inverse_exact(&self) -> SeriesMatrix {
        let n = self.rows;
        let place = self.place();
        let dinv: Vec<Scalar> = (0..n)
            .map(|i| self.at(i, i).inv().expect("monomial diagonal"))
            .collect();
        let dinv_m = SeriesMatrix::diag(place, &dinv);
        let nmat = SeriesMatrix::from_fn(n, n, |i, j| {
            if j > i {
                dinv[i].mul(self.at(i, j))
            } else {
                self.entry_zero()
            }
        });
        // (1 + N)^{-1} = Σ_{k<n} (−N)^k since N is nilpotent
        let mut acc = self.entry_identity();
        let mut term = self.entry_identity();
        for _ in 1..n {
            term = term.mul(&nmat).neg();
            acc = acc.add(&term);
        }
        acc.mul(&dinv_m)
    }

    /// Smith normal form over O'_v: U·M·V = diag(π^{e_1},…,π^{e_n}) with
    /// e_1 ≥ … ≥ e_n and U, V ∈ GL_n(O'_v). Single-component entries only.
    pub fn smith_normal_form(&self) -> Result<(Vec<i64>, SeriesMatrix, SeriesMatrix)> {
        self.assert_inert_entries();
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let place = self.place();
        let mut m = self.clone();
        // single-component constants: correct for inert matrices and for the
        // In-tagged component matrices of split inputs alike
        let in_one = Scalar::In(Series::one(place));
        let in_zero = Scalar::In(Series::zero(place));
        let in_id = SeriesMatrix::from_fn(n, n, |i, j| {
            if i == j { in_one.clone() } else { in_zero.clone() }
        });
        let mut u = in_id.clone();
        let mut v = in_id;
        let mut exps = Vec::with_capacity(n);
        for k in 0..n {
            // locate min-valuation provably nonzero entry in the k.. submatrix
            let mut best: Option<(usize, usize, i64)> = None;
            let mut unknown_floor: Option<i64> = None;
            for i in k..n {
                for j in k..n {
                    let s = m.at(i, j).left();
                    if s.is_provably_nonzero() {
                        let val = s.val;
                        if best.map_or(true, |(_, _, bv)| val < bv) {
                            best = Some((i, j, val));
                        }
                    } else if !s.is_exact_zero() {
                        unknown_floor = Some(unknown_floor.map_or(s.prec, |x: i64| x.min(s.prec)));
                    }
                }
            }
            let (pi, pj, pval) = match best {
                Some(b) => b,
                None => {
                    return if unknown_floor.is_some() {
                        Err(Error::PrecisionExhausted(format!(
                            "SNF pivot {k} undetermined"
                        )))
                    } else {
                        Err(Error::SingularMatrix)
                    }
                }
            };
            if let Some(uf) = unknown_floor {
                if uf <= pval {
                    return Err(Error::PrecisionExhausted(format!(
                        "SNF: unknown entry (prec π^{uf}) could undercut pivot val {pval}"
                    )));
                }
            }
            // swap pivot to (k, k)
            if pi != k {
                m = swap_rows(&m, k, pi);
                u = swap_rows(&u, k, pi);
            }
            if pj != k {
                m = swap_cols(&m, k, pj);
                v = swap_cols(&v, k, pj);
            }
            // normalize pivot to exactly π^{pval}: divide the row by the unit part
            let unit = m.at(k, k).mul(&Scalar::In(Series::pi_pow(place, -pval)));
            let unit_inv = unit.inv()?;
            for j in 0..n {
                m.set(k, j, m.at(k, j).mul(&unit_inv));
                u.set(k, j, u.at(k, j).mul(&unit_inv));
            }
            // clear row and column k (quotients are integral: pivot has min val)
            for i in (k + 1)..n {
                let e = m.at(i, k).clone();
                if e.is_zero_to_prec() && e.left().is_exact_zero() {
                    continue;
                }
                let factor = e.mul(&Scalar::In(Series::pi_pow(place, -pval)));
                for j in 0..n {
                    m.set(i, j, m.at(i, j).sub(&factor.mul(m.at(k, j))));
                    u.set(i, j, u.at(i, j).sub(&factor.mul(u.at(k, j))));
                }
            }
            for j in (k + 1)..n {
                let e = m.at(k, j).clone();
                if e.is_zero_to_prec() && e.left().is_exact_zero() {
                    continue;
                }
                let factor = e.mul(&Scalar::In(Series::pi_pow(place, -pval)));
                for i in 0..n {
                    m.set(i, j, m.at(i, j).sub(&m.at(i, k).mul(&factor)));
                    v.set(i, j, v.at(i, j).sub(&v.at(i, k).mul(&factor)));
                }
            }
            exps.push(pval);
        }
        // exps is ascending (each pivot had globally minimal valuation);
        // reorder descending with a flip permutation
        let n2 = n;
        let flip = SeriesMatrix::from_fn(n2, n2, |i, j| {
            Scalar::In(if i + j == n2 - 1 {
                Series::one(place)
            } else {
                Series::zero(place)
            })
        });
        let u2 = flip.mul(&u);
        let v2 = v.mul(&flip);
        exps.reverse();
        Ok((exps, u2, v2))
    }

    /// Smith exponents only; handles split matrices componentwise,
    /// returning (left exponents, right exponents).
    pub fn snf_exponents_pair(&self) -> Result<(Vec<i64>, Vec<i64>)> {
        match self.place().kind {
            PlaceKind::Inert => {
                let (e, _, _) = self.smith_normal_form()?;
                Ok((e.clone(), e))
            }
            PlaceKind::Split => {
                let (l, r) = self.split_components();
                let (el, _, _) = l.smith_normal_form()?;
                let (er, _, _) = r.smith_normal_form()?;
                Ok((el, er))
            }
        }
    }
}

fn swap_rows(m: &SeriesMatrix, a: usize, b: usize) -> SeriesMatrix {
    SeriesMatrix::from_fn(m.rows, m.cols, |i, j| {
        let src = if i == a { b } else if i == b { a } else { i };
        m.at(src, j).clone()
    })
}

fn swap_cols(m: &SeriesMatrix, a: usize, b: usize) -> SeriesMatrix {
    SeriesMatrix::from_fn(m.rows, m.cols, |i, j| {
        let src = if j == a { b } else if j == b { a } else { j };
        m.at(i, src).clone()
    })
}

/// All i-element subsets of {0..n}, lexicographic.
pub fn k_subsets(n: usize, i: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(i);
    fn rec(n: usize, i: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == i {
            out.push(cur.clone());
            return;
        }
        for x in start..n {
            cur.push(x);
            rec(n, i, x + 1, cur, out);
            cur.pop();
        }
    }
    rec(n, i, 0, &mut cur, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Affine systems
// ---------------------------------------------------------------------------

/// Solve the (possibly rectangular) affine system A·x = b over the fraction
/// field, returning a particular solution together with a basis of ker A.
///
/// Pivoting and precision discipline follow [`SeriesMatrix::solve`]: pivots
/// must be provably nonzero of minimal valuation, and an undetermined entry
/// that could undercut a pivot (or hide one in an otherwise pivotless column)
/// raises PrecisionExhausted. A provably nonzero residual on an unpivoted row
/// raises NoSolution. Split-scalar systems decompose componentwise; the two
/// component kernels embed independently.
pub fn solve_affine(a: &SeriesMatrix, b: &[Scalar]) -> Result<(Vec<Scalar>, Vec<Vec<Scalar>>)> {
    assert_eq!(a.rows, b.len());
    let place = a.place();
    let split = a.entries.iter().chain(b.iter()).any(|e| matches!(e, Scalar::Sp(_, _)));
    if split {
        let (al, ar) = a.split_components();
        let bl: Vec<Scalar> = b.iter().map(|s| Scalar::In(s.left().clone())).collect();
        let br: Vec<Scalar> = b.iter().map(|s| Scalar::In(s.right().clone())).collect();
        let (pl, kl) = solve_affine(&al, &bl)?;
        let (pr, kr) = solve_affine(&ar, &br)?;
        let part = pl
            .iter()
            .zip(&pr)
            .map(|(l, r)| Scalar::pair(l.left().clone(), r.left().clone()))
            .collect();
        let mut ker: Vec<Vec<Scalar>> = Vec::with_capacity(kl.len() + kr.len());
        let zero = Series::zero(place);
        for v in kl {
            ker.push(v.iter().map(|s| Scalar::pair(s.left().clone(), zero.clone())).collect());
        }
        for v in kr {
            ker.push(v.iter().map(|s| Scalar::pair(zero.clone(), s.left().clone())).collect());
        }
        return Ok((part, ker));
    }

    let (m, k) = (a.rows, a.cols);
    let mut mat = a.clone();
    let mut rhs: Vec<Scalar> = b.to_vec();
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; k];
    let mut row = 0usize;
    for col in 0..k {
        if row == m {
            break;
        }
        let mut best: Option<(usize, i64)> = None;
        let mut unknown_floor: Option<i64> = None;
        for r in row..m {
            let s = mat.at(r, col).left();
            if s.is_provably_nonzero() {
                let v = s.val;
                if best.map_or(true, |(_, bv)| v < bv) {
                    best = Some((r, v));
                }
            } else if !s.is_exact_zero() {
                let f = s.prec;
                unknown_floor = Some(unknown_floor.map_or(f, |u: i64| u.min(f)));
            }
        }
        let (prow, pval) = match best {
            Some(x) => x,
            None => {
                if unknown_floor.is_some() {
                    return Err(Error::PrecisionExhausted(format!(
                        "column {col} has no provable pivot but undetermined entries"
                    )));
                }
                continue; // structurally free column
            }
        };
        if let Some(u) = unknown_floor {
            if u <= pval {
                return Err(Error::PrecisionExhausted(format!(
                    "unknown entry (prec π^{u}) could undercut pivot val {pval} in column {col}"
                )));
            }
        }
        if prow != row {
            mat = swap_rows(&mat, row, prow);
            rhs.swap(row, prow);
        }
        let pivot = mat.at(row, col).clone();
        for r in 0..m {
            if r == row {
                continue;
            }
            let e = mat.at(r, col).clone();
            if e.is_zero_to_prec() && e.left().is_exact_zero() {
                continue;
            }
            let factor = e.div(&pivot)?;
            for j in 0..k {
                let v = mat.at(r, j).sub(&factor.mul(mat.at(row, j)));
                mat.set(r, j, v);
            }
            rhs[r] = rhs[r].sub(&factor.mul(&rhs[row]));
        }
        pivot_of_col[col] = Some(row);
        row += 1;
    }
    for r in row..m {
        if rhs[r].is_provably_nonzero() {
            return Err(Error::NoSolution(format!(
                "provably nonzero residual on eliminated row {r}"
            )));
        }
    }
    let zero = || Scalar::In(Series::zero(place));
    let mut part = vec![zero(); k];
    for (col, p) in pivot_of_col.iter().enumerate() {
        if let Some(r) = p {
            part[col] = rhs[*r].div(mat.at(*r, col))?;
        }
    }
    let mut ker = Vec::new();
    for f in 0..k {
        if pivot_of_col[f].is_some() {
            continue;
        }
        let mut v = vec![zero(); k];
        v[f] = Scalar::In(Series::one(place));
        for (col, p) in pivot_of_col.iter().enumerate() {
            if let Some(r) = p {
                v[col] = mat.at(*r, f).div(mat.at(*r, col))?.neg();
            }
        }
        ker.push(v);
    }
    Ok((part, ker))
}

// ---------------------------------------------------------------------------
// LatticeRep
// ---------------------------------------------------------------------------

/// Full-rank O-lattice in F^n as a canonical column-HNF basis: exact
/// upper-triangular matrix, diagonal π^{d_i}, entry (i, j) for i < j reduced
/// mod π^{d_i}. Entries are single-component series (at split places a
/// LatticeRep describes one component of the pair model).
#[derive(Clone)]
pub struct LatticeRep {
    pub basis: SeriesMatrix,
    pub diag: Vec<i64>,
}

impl fmt::Debug for LatticeRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LatticeRep(diag {:?}, {:?})", self.diag, self.basis)
    }
}

impl PartialEq for LatticeRep {
    fn eq(&self, other: &Self) -> bool {
        if self.diag != other.diag {
            return false;
        }
        let n = self.basis.rows;
        for i in 0..n {
            for j in 0..n {
                if !self.basis.at(i, j).left().exact_eq(other.basis.at(i, j).left()) {
                    return false;
                }
            }
        }
        true
    }
}
impl Eq for LatticeRep {}

impl LatticeRep {
    pub fn standard(place: &Arc<Place>, n: usize) -> Self {
        LatticeRep {
            basis: SeriesMatrix::from_fn(n, n, |i, j| {
                Scalar::In(if i == j {
                    Series::one(place)
                } else {
                    Series::zero(place)
                })
            }),
            diag: vec![0; n],
        }
    }

    /// Canonical key for hashing/dedup.
    pub fn key(&self) -> String {
        let n = self.basis.rows;
        let mut s = String::new();
        for i in 0..n {
            for j in 0..n {
                s.push_str(&self.basis.at(i, j).left().to_wire());
                s.push(';');
            }
        }
        s
    }

    pub fn rank(&self) -> usize {
        self.basis.rows
    }

    /// val of the covolume: Σ d_i = val det(basis).
    pub fn det_val(&self) -> i64 {
        self.diag.iter().sum()
    }

    /// Smith exponents of the basis, descending.
    pub fn cartan(&self) -> Result<Vec<i64>> {
        let (e, _, _) = self.basis.smith_normal_form()?;
        Ok(e)
    }

    /// Does the lattice contain the column vector v (single-component scalars)?
    pub fn contains(&self, v: &[Scalar]) -> Result<bool> {
        let x = self.basis.inverse()?.mul_vec(v);
        for c in &x {
            if !c.is_integral()? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Is `other` ⊂ self?
    pub fn contains_lattice(&self, other: &LatticeRep) -> Result<bool> {
        self.basis.inverse()?.mul(&other.basis).is_integral()
    }

    /// Dual lattice {v^∨ : v^∨(Λ) ⊂ O}: basis = inverse-transpose, re-HNF'd.
    pub fn dual(&self) -> Result<LatticeRep> {
        let it = self.basis.inverse()?.transpose();
        hermite_lattice(&it)
    }

    /// Self-dual for the Hermitian pairing (x, y) = ᵗσ(x)·h^{-1}·y:
    /// the Gram matrix ᵗσ(B)·h^{-1}·B must lie in GL_n(O'_v).
    pub fn is_selfdual_hermitian(&self, hinv: &SeriesMatrix) -> Result<bool> {
        let g = self.basis.frobenius().transpose().mul(hinv).mul(&self.basis);
        if !g.is_integral()? {
            return Ok(false);
        }
        let d = g.det();
        Ok(d.valuation()? == 0)
    }
}

/// Column Hermite normal form of a generating set (n×m, m ≥ n): the unique
/// canonical upper-triangular basis of the spanned lattice, with exact
/// (snapped) digits. Errors with RankDeficient when the span is not full rank
/// and PrecisionExhausted when the canonical digits are not all determined.
pub fn hermite_lattice(generators: &SeriesMatrix) -> Result<LatticeRep> {
    generators.assert_inert_entries();
    let n = generators.rows;
    let m = generators.cols;
    if m < n {
        return Err(Error::RankDeficient);
    }
    let place = generators.place().clone();
    let mut w = generators.clone();
    // choose pivots bottom row upward; pivot for row i goes to column i
    for i in (0..n).rev() {
        let avail = 0..=i.min(m - 1 - (n - 1 - i)); // columns 0..=i+extra
        let hi_col = m - (n - i); // rightmost column available for this row
        let mut best: Option<(usize, i64)> = None;
        let mut unknown = false;
        for j in 0..=hi_col {
            let s = w.at(i, j).left();
            if s.is_provably_nonzero() {
                let v = s.val;
                if best.map_or(true, |(_, bv)| v < bv) {
                    best = Some((j, v));
                }
            } else if !s.is_exact_zero() {
                unknown = true;
            }
        }
        drop(avail);
        let (pj, pval) = match best {
            Some(b) => b,
            None => {
                return if unknown {
                    Err(Error::PrecisionExhausted(format!("HNF pivot row {i} undetermined")))
                } else {
                    Err(Error::RankDeficient)
                }
            }
        };
        // move pivot column to position hi_col (so that finished columns
        // accumulate on the right: row i pivot ends at column hi_col)
        if pj != hi_col {
            w = swap_cols(&w, pj, hi_col);
        }
        // normalize pivot column so entry (i, hi_col) = π^{pval} exactly
        let unit_inv = w
            .at(i, hi_col)
            .mul(&Scalar::In(Series::pi_pow(&place, -pval)))
            .inv()?;
        for r in 0..n {
            w.set(r, hi_col, w.at(r, hi_col).mul(&unit_inv));
        }
        // clear row i in all other available columns
        for j in 0..hi_col {
            let e = w.at(i, j).clone();
            if e.is_zero_to_prec() && e.left().is_exact_zero() {
                continue;
            }
            let factor = e.mul(&Scalar::In(Series::pi_pow(&place, -pval)));
            for r in 0..n {
                w.set(r, j, w.at(r, j).sub(&factor.mul(w.at(r, hi_col))));
            }
        }
        // row i entries to the left must now be zero to precision
        for j in 0..hi_col {
            if w.at(i, j).left().is_provably_nonzero() {
                return Err(Error::PrecisionExhausted(format!(
                    "HNF clearing left residue at ({i}, {j})"
                )));
            }
        }
    }
    // the lattice basis is columns m-n..m (pivot of row i at column m-n+i)
    let mut b = SeriesMatrix::from_fn(n, n, |i, j| w.at(i, m - n + j).clone());
    let diag: Vec<i64> = (0..n)
        .map(|i| b.at(i, i).left().valuation())
        .collect::<Result<_>>()?;
    // reduce off-diagonal (i, j), i < j, mod π^{d_i}: subtract the
    // nonnegative part of entry/π^{d_i} times column i
    for j in 0..n {
        for i in (0..j).rev() {
            let e = b.at(i, j).clone();
            let quot = e.mul(&Scalar::In(Series::pi_pow(&place, -diag[i])));
            // nonnegative-exponent part of quot
            let qplus = nonneg_part(quot.left());
            if qplus.is_provably_nonzero() {
                let f = Scalar::In(qplus);
                for r in 0..=i {
                    b.set(r, j, b.at(r, j).sub(&f.mul(b.at(r, i))));
                }
            }
        }
    }
    // snap to exact canonical digits
    let mut basis = SeriesMatrix::zeros(&place, n, n);
    for i in 0..n {
        for j in 0..n {
            let s = b.at(i, j).left();
            let snapped = if i == j {
                Series::pi_pow(&place, diag[i])
            } else if i > j {
                Series::zero(&place)
            } else {
                // digits below π^{d_i} must all be known
                if s.prec != INF_PREC && s.prec < diag[i] {
                    return Err(Error::PrecisionExhausted(format!(
                        "HNF digit snap at ({i}, {j}): prec {} < d_i {}",
                        s.prec, diag[i]
                    )));
                }
                let red = s.reduce_mod(diag[i]);
                Series::from_coeffs(&place, red.val, red.coeffs.clone(), INF_PREC)
            };
            basis.set(i, j, Scalar::In(snapped));
        }
    }
    Ok(LatticeRep { basis, diag })
}

/// Nonnegative-exponent part of a series (digits at exponents ≥ 0).
fn nonneg_part(s: &Series) -> Series {
    if s.coeffs.is_empty() || s.val >= 0 {
        return if s.val >= 0 && !s.coeffs.is_empty() {
            s.clone()
        } else {
            Series::zero(&s.place)
        };
    }
    let skip = (-s.val) as usize;
    if skip >= s.coeffs.len() {
        return Series::zero(&s.place);
    }
    Series::from_coeffs(&s.place, 0, s.coeffs[skip..].to_vec(), s.prec)
}

// ---------------------------------------------------------------------------
// Bounded enumeration
// ---------------------------------------------------------------------------

/// Partial HNF state passed to pruning hooks: diagonal exponents are fixed,
/// columns `filled_from..n` (0-based) are complete.
pub struct PartialHnf<'a> {
    pub place: &'a Arc<Place>,
    pub n: usize,
    pub diag: &'a [i64],
    pub filled_from: usize,
    /// cols[j] = off-diagonal entries (rows 0..j) of column j, exact; only
    /// meaningful for j ≥ filled_from.
    pub cols: &'a [Vec<Series>],
}

impl<'a> PartialHnf<'a> {
    /// Basis entry (i, j) for j ≥ filled_from.
    pub fn entry(&self, i: usize, j: usize) -> Series {
        debug_assert!(j >= self.filled_from);
        if i == j {
            Series::pi_pow(self.place, self.diag[i])
        } else if i < j {
            self.cols[j][i].clone()
        } else {
            Series::zero(self.place)
        }
    }

    /// Components `filled_from..n` of B^{-1}·v by back-substitution; the
    /// remaining components need unfilled columns. v has length n.
    pub fn partial_solve(&self, v: &[Series]) -> Vec<Series> {
        let n = self.n;
        let mut x: Vec<Option<Series>> = vec![None; n];
        for i in (self.filled_from..n).rev() {
            let mut acc = v[i].clone();
            for j in (i + 1)..n {
                let b = self.entry(i, j);
                if b.is_provably_nonzero() {
                    acc = acc.sub(&b.mul(x[j].as_ref().unwrap()));
                }
            }
            let xi = acc.mul(&Series::pi_pow(self.place, -self.diag[i]));
            x[i] = Some(xi);
        }
        x.into_iter()
            .skip(self.filled_from)
            .map(|o| o.unwrap())
            .collect()
    }
}

/// Decision returned by a pruning hook.
pub enum Prune {
    Keep,
    Discard,
}

/// Enumerate HNF bases with diagonal exponents in `diag_lo[i]..=diag_hi[i]`
/// and off-diagonal digits at exponents `digit_lo[i]..d_i` in row i, columns
/// filled right-to-left with `prune` called after each completed column.
/// Digits range over F_q when `subfield_digits` (split-place components),
/// else over F_{q²}.
#[allow(clippy::too_many_arguments)]
pub fn enumerate_hnf(
    place: &Arc<Place>,
    n: usize,
    diag_lo: &[i64],
    diag_hi: &[i64],
    digit_lo: &[i64],
    subfield_digits: bool,
    prune: &mut dyn FnMut(&PartialHnf) -> Prune,
    emit: &mut dyn FnMut(LatticeRep),
) {
    let nd = if subfield_digits { place.q } else { place.q2 } as u32;
    let mut diag = vec![0i64; n];
    let mut cols: Vec<Vec<Series>> = (0..n).map(|j| vec![Series::zero(place); j]) .collect();

    fn fill_columns(
        place: &Arc<Place>,
        n: usize,
        nd: u32,
        digit_lo: &[i64],
        diag: &[i64],
        cols: &mut Vec<Vec<Series>>,
        j: isize,
        prune: &mut dyn FnMut(&PartialHnf) -> Prune,
        emit: &mut dyn FnMut(LatticeRep),
    ) {
        if j < 0 {
            // complete: assemble the exact basis
            let basis = SeriesMatrix::from_fn(n, n, |r, c| {
                Scalar::In(if r == c {
                    Series::pi_pow(place, diag[r])
                } else if r < c {
                    cols[c][r].clone()
                } else {
                    Series::zero(place)
                })
            });
            emit(LatticeRep { basis, diag: diag.to_vec() });
            return;
        }
        let ju = j as usize;
        // digit positions for this column: row i has exponents digit_lo[i]..diag[i]
        let mut slots: Vec<(usize, i64)> = Vec::new(); // (row, exponent)
        for i in 0..ju {
            for e in digit_lo[i]..diag[i] {
                slots.push((i, e));
            }
        }
        let total = slots.len();
        // odometer over digit assignments
        let mut digits = vec![0u32; total];
        loop {
            // build the column
            for i in 0..ju {
                let lo = digit_lo[i];
                let len = (diag[i] - lo).max(0) as usize;
                let mut cv = vec![0u32; len];
                for (sidx, &(row, e)) in slots.iter().enumerate() {
                    if row == i {
                        cv[(e - lo) as usize] = digits[sidx];
                    }
                }
                cols[ju][i] = Series::from_coeffs(place, lo, cv, INF_PREC);
            }
            let keep = {
                let partial = PartialHnf {
                    place,
                    n,
                    diag,
                    filled_from: ju,
                    cols,
                };
                matches!(prune(&partial), Prune::Keep)
            };
            if keep {
                fill_columns(place, n, nd, digit_lo, diag, cols, j - 1, prune, emit);
            }
            // increment odometer
            let mut k = 0;
            loop {
                if k == total {
                    return;
                }
                digits[k] += 1;
                if digits[k] < nd {
                    break;
                }
                digits[k] = 0;
                k += 1;
            }
        }
    }

    fn diag_loop(
        place: &Arc<Place>,
        n: usize,
        nd: u32,
        diag_lo: &[i64],
        diag_hi: &[i64],
        digit_lo: &[i64],
        diag: &mut Vec<i64>,
        cols: &mut Vec<Vec<Series>>,
        i: usize,
        prune: &mut dyn FnMut(&PartialHnf) -> Prune,
        emit: &mut dyn FnMut(LatticeRep),
    ) {
        if i == n {
            fill_columns(
                place,
                n,
                nd,
                digit_lo,
                diag,
                cols,
                n as isize - 1,
                prune,
                emit,
            );
            return;
        }
        for d in diag_lo[i]..=diag_hi[i] {
            diag[i] = d;
            diag_loop(
                place, n, nd, diag_lo, diag_hi, digit_lo, diag, cols, i + 1, prune, emit,
            );
        }
    }

    diag_loop(
        place, n, nd, diag_lo, diag_hi, digit_lo, &mut diag, &mut cols, 0, prune, emit,
    );
}

/// Spec-level windowed enumeration: all lattices with π^N Λ_0 ⊂ Λ ⊂ π^{−N}Λ_0
/// (both inclusions enforced), filters applied column-incrementally.
pub fn enumerate_lattices(
    place: &Arc<Place>,
    n: usize,
    bound: i64,
    subfield_digits: bool,
    mut prune: impl FnMut(&PartialHnf) -> Prune,
    mut emit: impl FnMut(LatticeRep),
) {
    assert!(bound >= 0);
    let lo = vec![-bound; n];
    let hi = vec![bound; n];
    let dlo = vec![-bound; n];
    enumerate_hnf(
        place,
        n,
        &lo,
        &hi,
        &dlo,
        subfield_digits,
        &mut |p| prune(p),
        &mut |lat| {
            // window containment π^N Λ_0 ⊂ Λ: B^{-1}·π^N integral
            let binv = lat.basis.inverse().expect("exact triangular");
            let ok = binv
                .scale(&Scalar::In(Series::pi_pow(place, bound)))
                .is_integral()
                .expect("exact");
            if ok {
                emit(lat);
            }
        },
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_fields::PlaceKind;
    use crate::rng::KeyedRng;

    fn place(q: u64) -> Arc<Place> {
        Place::new(q, 1, 2, PlaceKind::Inert, 24).unwrap()
    }

    fn rand_matrix(pl: &Arc<Place>, rng: &mut KeyedRng, n: usize, min_val: i64) -> SeriesMatrix {
        SeriesMatrix::from_fn(n, n, |_, _| {
            Scalar::In(Series::random(pl, rng, min_val, false))
        })
    }

    fn rand_unimodular(pl: &Arc<Place>, rng: &mut KeyedRng, n: usize) -> SeriesMatrix {
        // random integral matrix with unit determinant, by rejection
        loop {
            let m = rand_matrix(pl, rng, n, 0);
            let d = m.det();
            if let Ok(0) = d.valuation() {
                return m;
            }
        }
    }

    #[test]
    fn det_and_mul_consistency() {
        let pl = place(5);
        let mut rng = KeyedRng::new(1, 0, 0);
        for _ in 0..50 {
            let a = rand_matrix(&pl, &mut rng, 3, -1);
            let b = rand_matrix(&pl, &mut rng, 3, 0);
            let lhs = a.mul(&b).det();
            let rhs = a.det().mul(&b.det());
            assert!(!lhs.provably_differs(&rhs));
        }
    }

    #[test]
    fn solve_and_inverse() {
        let pl = place(7);
        let mut rng = KeyedRng::new(2, 0, 0);
        for _ in 0..30 {
            let a = rand_unimodular(&pl, &mut rng, 3);
            let inv = a.inverse().unwrap();
            let id = SeriesMatrix::identity(&pl, 3);
            assert!(!a.mul(&inv).provably_differs(&id));
            assert!(!inv.mul(&a).provably_differs(&id));
        }
    }

    #[test]
    fn triangular_inverse_is_exact() {
        let pl = place(5);
        let mut b = SeriesMatrix::pi_diag(&pl, &[2, 0, -1]);
        b.set(0, 1, Scalar::In(Series::from_coeffs(&pl, 0, vec![3], INF_PREC)));
        b.set(0, 2, Scalar::In(Series::from_coeffs(&pl, -1, vec![1, 2], INF_PREC)));
        b.set(1, 2, Scalar::In(Series::from_coeffs(&pl, 0, vec![4], INF_PREC)));
        let inv = b.inverse().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(inv.at(i, j).left().prec, INF_PREC, "entry ({i},{j}) not exact");
            }
        }
        let id = SeriesMatrix::identity(&pl, 3);
        assert!(!b.mul(&inv).provably_differs(&id));
    }

    #[test]
    fn snf_examples() {
        let pl = place(5);
        // diag(π, π^{-1}) → (1, −1)
        let m = SeriesMatrix::pi_diag(&pl, &[1, -1]);
        let (e, u, v) = m.smith_normal_form().unwrap();
        assert_eq!(e, vec![1, -1]);
        let prod = u.mul(&m).mul(&v);
        assert!(!prod.provably_differs(&SeriesMatrix::pi_diag(&pl, &[1, -1])));
        // [[0, π],[1, 0]] → (1, 0)
        let mut m2 = SeriesMatrix::zeros(&pl, 2, 2);
        m2.set(0, 1, Scalar::pi_pow(&pl, 1));
        m2.set(1, 0, Scalar::one(&pl));
        let (e2, u2, v2) = m2.smith_normal_form().unwrap();
        assert_eq!(e2, vec![1, 0]);
        let prod2 = u2.mul(&m2).mul(&v2);
        assert!(!prod2.provably_differs(&SeriesMatrix::pi_diag(&pl, &[1, 0])));
    }

    #[test]
    fn snf_unimodular_invariance_and_det_sum() {
        let pl = place(5);
        let mut rng = KeyedRng::new(3, 0, 0);
        for _ in 0..40 {
            let m = rand_matrix(&pl, &mut rng, 3, -1);
            let Ok((e, u, v)) = m.smith_normal_form() else { continue };
            // U, V unimodular
            assert_eq!(u.det().valuation().unwrap(), 0);
            assert_eq!(v.det().valuation().unwrap(), 0);
            // sum = val det
            assert_eq!(e.iter().sum::<i64>(), m.det().valuation().unwrap());
            // biinvariance
            let g = rand_unimodular(&pl, &mut rng, 3);
            let gp = rand_unimodular(&pl, &mut rng, 3);
            let (e2, _, _) = g.mul(&m).mul(&gp).smith_normal_form().unwrap();
            assert_eq!(e, e2);
        }
    }

    #[test]
    fn wedge_functorial() {
        let pl = place(5);
        let mut rng = KeyedRng::new(4, 0, 0);
        for _ in 0..100 {
            let a = rand_matrix(&pl, &mut rng, 3, 0);
            let b = rand_matrix(&pl, &mut rng, 3, 0);
            for i in 1..=3 {
                let lhs = a.mul(&b).wedge(i);
                let rhs = a.wedge(i).mul(&b.wedge(i));
                assert!(!lhs.provably_differs(&rhs));
            }
        }
        // identity and top wedge
        let id = SeriesMatrix::identity(&pl, 3);
        assert!(!id.wedge(2).provably_differs(&SeriesMatrix::identity(&pl, 3)));
        let m = rand_matrix(&pl, &mut rng, 2, 0);
        let w2 = m.wedge(2);
        assert_eq!(w2.rows, 1);
        assert!(!w2.at(0, 0).provably_differs(&m.det()));
    }

    #[test]
    fn hermite_lattice_canonical() {
        let pl = place(5);
        let mut rng = KeyedRng::new(5, 0, 0);
        for _ in 0..200 {
            let g = loop {
                let m = rand_matrix(&pl, &mut rng, 3, -1);
                if m.det().is_provably_nonzero() {
                    break m;
                }
            };
            let l1 = hermite_lattice(&g).unwrap();
            let u = rand_unimodular(&pl, &mut rng, 3);
            let l2 = hermite_lattice(&g.mul(&u)).unwrap();
            assert_eq!(l1, l2, "HNF must be coset-invariant");
            // idempotent
            let l3 = hermite_lattice(&l1.basis).unwrap();
            assert_eq!(l1, l3);
        }
    }

    #[test]
    fn hermite_example_rank2() {
        let pl = place(5);
        // columns (π, 0), (1, 1): lattice contains e1 = (π,0)... and (1,1):
        // contains (1,1) and π·e1 ⇒ det val = val(π·1 − 0·1) = 1
        let mut g = SeriesMatrix::zeros(&pl, 2, 2);
        g.set(0, 0, Scalar::pi_pow(&pl, 1));
        g.set(0, 1, Scalar::one(&pl));
        g.set(1, 1, Scalar::one(&pl));
        let l = hermite_lattice(&g).unwrap();
        assert_eq!(l.det_val(), 1);
        assert!(l.contains(&[Scalar::pi_pow(&pl, 1), Scalar::zero(&pl)]).unwrap());
        assert!(l.contains(&[Scalar::one(&pl), Scalar::one(&pl)]).unwrap());
    }

    #[test]
    fn dual_lattice_properties() {
        let pl = place(5);
        let l0 = LatticeRep::standard(&pl, 3);
        assert_eq!(l0.dual().unwrap(), l0);
        // diag π-powers dualize to negated exponents
        let l = hermite_lattice(&SeriesMatrix::pi_diag(&pl, &[2, 0, -1])).unwrap();
        let d = l.dual().unwrap();
        assert_eq!(d.diag, vec![-2, 0, 1]);
        // reflexivity on random lattices
        let mut rng = KeyedRng::new(6, 0, 0);
        for _ in 0..100 {
            let g = loop {
                let m = rand_matrix(&pl, &mut rng, 2, -2);
                if m.det().is_provably_nonzero() {
                    break m;
                }
            };
            let l = hermite_lattice(&g).unwrap();
            assert_eq!(l.dual().unwrap().dual().unwrap(), l);
        }
    }

    #[test]
    fn selfdual_hermitian_examples() {
        let pl = place(5);
        let id = SeriesMatrix::identity(&pl, 2);
        let l0 = LatticeRep::standard(&pl, 2);
        assert!(l0.is_selfdual_hermitian(&id).unwrap());
        let lpi = hermite_lattice(&SeriesMatrix::pi_diag(&pl, &[1, 1])).unwrap();
        assert!(!lpi.is_selfdual_hermitian(&id).unwrap());
        // h = diag(1, π): odd det valuation ⇒ no self-dual lattice at all
        let hodd = SeriesMatrix::pi_diag(&pl, &[0, 1]);
        let hodd_inv = hodd.inverse().unwrap();
        let mut odd_hits = 0;
        enumerate_lattices(&pl, 2, 1, false, |_| Prune::Keep, |l| {
            if l.is_selfdual_hermitian(&hodd_inv).unwrap() {
                odd_hits += 1;
            }
        });
        assert_eq!(odd_hits, 0);
        // h = diag(1, π²): even det valuation ⇒ nonempty; API agrees with a
        // hand-rolled Gram check
        let h = SeriesMatrix::pi_diag(&pl, &[0, 2]);
        let hinv = h.inverse().unwrap();
        let mut via_api = Vec::new();
        enumerate_lattices(&pl, 2, 1, false, |_| Prune::Keep, |l| {
            if l.is_selfdual_hermitian(&hinv).unwrap() {
                via_api.push(l.key());
            }
        });
        let mut via_gram = Vec::new();
        enumerate_lattices(&pl, 2, 1, false, |_| Prune::Keep, |l| {
            let g = l.basis.frobenius().transpose().mul(&hinv).mul(&l.basis);
            let ok = g.is_integral().unwrap() && g.det().valuation().unwrap() == 0;
            if ok {
                via_gram.push(l.key());
            }
        });
        assert_eq!(via_api, via_gram);
        assert!(!via_api.is_empty());
    }

    #[test]
    fn enumerate_rank1() {
        let pl = place(5);
        let mut count = 0;
        enumerate_lattices(&pl, 1, 1, false, |_| Prune::Keep, |_| count += 1);
        assert_eq!(count, 3); // π^{-1}O, O, πO
    }

    /// Independent oracle: the number of O/π^{2N}-submodules of (O/π^{2N})^n
    /// equals the number of lattices with π^N Λ0 ⊂ Λ ⊂ π^{-N}Λ0 that contain
    /// π^N Λ0 — counted by brute force over HNF shapes with containment.
    #[test]
    fn enumerate_rank2_window_count_oracle() {
        let pl = place(5);
        let q = 5i64;
        let nn = 1i64; // N = 1, window π Λ0 ⊂ Λ ⊂ π^{-1} Λ0 ≅ submodules of (O/π²)²
        // digits over the prime subfield so the residue ring matches the
        // Z/q² oracle below (submodule counts of a length-2 chain ring over
        // residue size q depend only on q)
        let mut count = 0i64;
        enumerate_lattices(&pl, 2, nn, true, |_| Prune::Keep, |_| count += 1);
        // oracle: submodules of (Z/p²)² for p = q... as O/π²-modules:
        // count subgroups of (C_{p²})² that are O-submodules = classic count
        // Σ over cyclic-type: computed independently by brute force below
        let oracle = count_submodules_cpsq(q as u64);
        assert_eq!(count, oracle);
    }

    /// Brute-force count of O-submodules of (O/π²)² over F_q: enumerate all
    /// subsets closed under addition and π-scaling? Too big; instead count
    /// via the standard orbit of generators: submodules of M = (O/π²)² are
    /// in bijection with HNF pairs (d1, d2, off-diag digits) with
    /// 0 ≤ d_i ≤ 2 and containment of π²M — counted directly from first
    /// principles (independent of the production enumerator's code path).
    fn count_submodules_cpsq(q: u64) -> i64 {
        // Submodules of (O/π²)²: classify by elementary divisors (π^a, π^b),
        // 0 ≤ a ≤ b ≤ 2. Number of submodules isomorphic to O/π^{2-a} ⊕ O/π^{2-b}:
        // standard subgroup-counting in (C_{p²})²: total = Σ_{0≤a≤b≤2} N_{a,b}
        // with N counted by brute force over generator pairs.
        // Brute force over all pairs of generators in (Z/q²)² (small): collect
        // distinct spans.
        let m = (q * q) as usize;
        let idx = |x: usize, y: usize| x * m + y;
        let words = m * m / 64 + 1;
        let mut seen = std::collections::HashSet::new();
        for g1 in 0..m * m {
            let (a, b) = (g1 / m, g1 % m);
            for g2 in 0..m * m {
                let (c, d) = (g2 / m, g2 % m);
                let mut span = vec![0u64; words];
                for s in 0..m {
                    let (sa, sb) = (s * a % m, s * b % m);
                    for t in 0..m {
                        let x = (sa + t * c) % m;
                        let y = (sb + t * d) % m;
                        let i = idx(x, y);
                        span[i / 64] |= 1 << (i % 64);
                    }
                }
                seen.insert(span);
            }
        }
        seen.len() as i64
    }

    #[test]
    fn pruning_soundness_and_stability_filter() {
        let pl = place(5);
        // filter: Λ stable under g = diag(π, 1) — prune via partial columns,
        // compare against unfiltered enumeration + post-filter
        let g = SeriesMatrix::pi_diag(&pl, &[1, 0]);
        let mut pruned = Vec::new();
        enumerate_lattices(
            &pl,
            2,
            1,
            false,
            |p| {
                // partial check: components filled_from.. of B^{-1}(g·B_j)
                for j in p.filled_from..p.n {
                    let col: Vec<Series> = (0..p.n).map(|i| p.entry(i, j)).collect();
                    let gcol: Vec<Scalar> = g.mul_vec(&col.iter().cloned().map(Scalar::In).collect::<Vec<_>>());
                    let gcol_s: Vec<Series> = gcol.iter().map(|s| s.left().clone()).collect();
                    let xs = p.partial_solve(&gcol_s);
                    for x in &xs {
                        if let Ok(false) = x.is_integral() {
                            return Prune::Discard;
                        }
                    }
                }
                Prune::Keep
            },
            |l| {
                let glat = g.mul(&l.basis);
                if l.basis.inverse().unwrap().mul(&glat).is_integral().unwrap() {
                    pruned.push(l.key());
                }
            },
        );
        let mut unfiltered = Vec::new();
        enumerate_lattices(&pl, 2, 1, false, |_| Prune::Keep, |l| {
            let glat = g.mul(&l.basis);
            if l.basis.inverse().unwrap().mul(&glat).is_integral().unwrap() {
                unfiltered.push(l.key());
            }
        });
        assert_eq!(pruned, unfiltered);
        assert!(!pruned.is_empty());
    }

    #[test]
    fn snf_precision_guard() {
        let pl = place(5);
        // entry zero to precision π^0 could hide a unit: SNF must refuse
        let mut m = SeriesMatrix::identity(&pl, 2);
        m.set(0, 1, Scalar::In(Series::zero_to_prec(&pl, 0)));
        match m.smith_normal_form() {
            Err(Error::PrecisionExhausted(_)) => {}
            other => panic!("expected PrecisionExhausted, got {other:?}"),
        }
    }

    #[test]
    fn affine_solve_square_matches_solve() {
        let pl = place(7);
        let mut rng = KeyedRng::new(31, 0, 0);
        for _ in 0..25 {
            let a = rand_unimodular(&pl, &mut rng, 3);
            let x = rand_matrix(&pl, &mut rng, 3, -1);
            let bcol: Vec<Scalar> = (0..3).map(|i| x.at(i, 0).clone()).collect();
            let b = a.mul_vec(&bcol);
            let (part, ker) = solve_affine(&a, &b).unwrap();
            assert!(ker.is_empty());
            for i in 0..3 {
                assert!(!part[i].provably_differs(&bcol[i]));
            }
        }
    }

    #[test]
    fn affine_solve_underdetermined_kernel() {
        let pl = place(5);
        // one equation, three unknowns: x0 + π x1 + x2 = 1
        let a = SeriesMatrix::from_fn(1, 3, |_, j| match j {
            0 | 2 => Scalar::one(&pl),
            _ => Scalar::pi_pow(&pl, 1),
        });
        let b = vec![Scalar::one(&pl)];
        let (part, ker) = solve_affine(&a, &b).unwrap();
        assert_eq!(ker.len(), 2);
        let check = |v: &[Scalar]| {
            let mut acc = Scalar::zero(&pl);
            for j in 0..3 {
                acc = acc.add(&a.at(0, j).mul(&v[j]));
            }
            acc
        };
        assert!(!check(&part).provably_differs(&b[0]));
        for kv in &ker {
            assert!(check(kv).is_zero_to_prec());
        }
    }

    #[test]
    fn affine_solve_inconsistent() {
        let pl = place(5);
        // rows (1, 1) and (2, 2) with incompatible right-hand sides
        let a = SeriesMatrix::from_fn(2, 2, |i, _| Scalar::from_int(&pl, 1 + i as i64));
        let b = vec![Scalar::one(&pl), Scalar::from_int(&pl, 3)];
        match solve_affine(&a, &b) {
            Err(Error::NoSolution(_)) => {}
            other => panic!("expected NoSolution, got {other:?}"),
        }
    }

    #[test]
    fn affine_solve_split_components() {
        let pl = Place::new(5, 1, 2, PlaceKind::Split, 24).unwrap();
        // split scalar system solved componentwise: diag(π^1|π^2)·x = (π^2|π^2)
        let a = SeriesMatrix::from_fn(1, 1, |_, _| {
            Scalar::pair(Series::pi_pow(&pl, 1), Series::pi_pow(&pl, 2))
        });
        let b = vec![Scalar::pair(Series::pi_pow(&pl, 2), Series::pi_pow(&pl, 2))];
        let (part, ker) = solve_affine(&a, &b).unwrap();
        assert!(ker.is_empty());
        assert_eq!(part[0].left().valuation().unwrap(), 1);
        assert_eq!(part[0].right().valuation().unwrap(), 0);
    }
}
