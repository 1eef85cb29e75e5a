//! Hecke-side combinatorics: dominant coweights for GL_n, the dominance
//! order on Schubert strata, σ_Out-fixedness, Kostka–Foulkes polynomials via
//! the charge statistic, normalized Satake/IC stalk values, and the spherical
//! transfer bookkeeping.
//!
//! Two independent routes compute the same polynomials: the production path
//! sums t^charge over semistandard tableaux, and [`kostka_foulkes_lusztig`]
//! evaluates the q-analog of the weight multiplicity through the t-deformed
//! Kostant partition function. The test suite compares them exhaustively at
//! desk scale.
//!
//! Variable convention: stalk polynomials are evaluated at q (not q^{−1}),
//! and [`satake_value`] is normalized so the open stratum μ = λ has value
//! q^{−⟨ρ,λ⟩}. The identical table is used on both sides of every comparison.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// A dominant (weakly decreasing) integer coweight of GL_n. Adjoint classes
/// are compared after recentring by the all-ones vector, which leaves every
/// pairing against roots and against ρ unchanged.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Coweight {
    parts: Vec<i64>,
}

impl Coweight {
    pub fn new(parts: Vec<i64>) -> Result<Coweight> {
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::ConstraintUnsatisfiable(format!(
                "coweight {parts:?} is not weakly decreasing"
            )));
        }
        Ok(Coweight { parts })
    }

    pub fn zero(n: usize) -> Coweight {
        Coweight {
            parts: vec![0; n],
        }
    }

    pub fn parts(&self) -> &[i64] {
        &self.parts
    }

    pub fn n(&self) -> usize {
        self.parts.len()
    }

    pub fn sum(&self) -> i64 {
        self.parts.iter().sum()
    }

    /// ⟨2ρ, λ⟩ = Σ_i λ_i (n + 1 − 2i), 1-based; invariant under recentring.
    pub fn two_rho_pairing(&self) -> i64 {
        let n = self.n() as i64;
        self.parts
            .iter()
            .enumerate()
            .map(|(i, p)| p * (n + 1 - 2 * (i as i64 + 1)))
            .sum()
    }

    /// Recentre so the smallest part is 0 (the adjoint normalization used for
    /// boundary coweights and Cartan strata).
    pub fn recentred(&self) -> Coweight {
        let m = self.parts.iter().copied().min().unwrap_or(0);
        Coweight {
            parts: self.parts.iter().map(|p| p - m).collect(),
        }
    }
}

/// λ = σ_Out(λ), i.e. λ = −w_0(λ): parts satisfy λ_i = −λ_{n+1−i}.
pub fn sigma_out_fixed(lambda: &Coweight) -> bool {
    let n = lambda.n();
    (0..n).all(|i| lambda.parts[i] == -lambda.parts[n - 1 - i])
}

/// Closure order on Schubert strata: all partial sums of μ bounded by those
/// of λ. Requires equal totals (same abelianization).
pub fn dominance_leq(mu: &Coweight, lambda: &Coweight) -> Result<bool> {
    if mu.n() != lambda.n() {
        return Err(Error::ConstraintUnsatisfiable(format!(
            "coweight lengths differ: {} vs {}",
            mu.n(),
            lambda.n()
        )));
    }
    let (sm, sl) = (mu.sum(), lambda.sum());
    if sm != sl {
        return Err(Error::SumMismatch(sm, sl));
    }
    let mut pm = 0i64;
    let mut pl = 0i64;
    for i in 0..mu.n() {
        pm += mu.parts[i];
        pl += lambda.parts[i];
        if pm > pl {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The canonical spherical transfer is the identity on Satake basis indices;
/// it is total exactly on the σ_Out-fixed dominant coweights.
pub fn spherical_transfer(lambda: &Coweight) -> Result<Coweight> {
    if !sigma_out_fixed(lambda) {
        return Err(Error::NotSigmaOutFixed);
    }
    Ok(lambda.clone())
}

// ---------------------------------------------------------------------------
// Kostka–Foulkes polynomials
// ---------------------------------------------------------------------------

/// Polynomial in one variable, ascending coefficients (`p[k]` is the t^k
/// coefficient). The zero polynomial is the empty vector.
pub type Poly = Vec<i64>;

fn poly_trim(mut p: Poly) -> Poly {
    while p.last() == Some(&0) {
        p.pop();
    }
    p
}

fn poly_add_pow(p: &mut Poly, k: usize, c: i64) {
    if p.len() <= k {
        p.resize(k + 1, 0);
    }
    p[k] += c;
}

pub fn poly_eval_big(p: &[i64], q: &BigInt) -> BigInt {
    let mut acc = BigInt::from(0);
    for c in p.iter().rev() {
        acc = acc * q + BigInt::from(*c);
    }
    acc
}

/// Shift λ and μ by a common constant so both are nonnegative partitions;
/// Kostka–Foulkes polynomials are invariant under this translation (tensoring
/// by a power of the determinant character).
fn shift_pair(lambda: &Coweight, mu: &Coweight) -> Result<(Vec<i64>, Vec<i64>)> {
    if lambda.n() != mu.n() {
        return Err(Error::ConstraintUnsatisfiable(format!(
            "coweight lengths differ: {} vs {}",
            lambda.n(),
            mu.n()
        )));
    }
    let (sl, sm) = (lambda.sum(), mu.sum());
    if sl != sm {
        return Err(Error::SumMismatch(sm, sl));
    }
    let low = lambda
        .parts
        .iter()
        .chain(mu.parts.iter())
        .copied()
        .min()
        .unwrap_or(0);
    Ok((
        lambda.parts.iter().map(|p| p - low).collect(),
        mu.parts.iter().map(|p| p - low).collect(),
    ))
}

/// K_{λμ}(t) = Σ_T t^{charge(T)} over semistandard tableaux of shape λ and
/// content μ (after the common partition shift). Zero polynomial when μ is
/// not dominated by λ. Memoized; the table is guarded for concurrent use.
pub fn kostka_foulkes(lambda: &Coweight, mu: &Coweight) -> Result<Poly> {
    let (shape, content) = shift_pair(lambda, mu)?;
    static CACHE: OnceLock<Mutex<HashMap<(Vec<i64>, Vec<i64>), Poly>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().unwrap().get(&(shape.clone(), content.clone())) {
        return Ok(p.clone());
    }
    let mut poly = Poly::new();
    for t in semistandard_tableaux(&shape, &content) {
        let word = reading_word(&t);
        poly_add_pow(&mut poly, charge(&word) as usize, 1);
    }
    let poly = poly_trim(poly);
    cache
        .lock()
        .unwrap()
        .insert((shape, content), poly.clone());
    Ok(poly)
}

/// All semistandard tableaux of the given shape (weakly decreasing row
/// lengths, zero rows allowed) and content (letter i+1 used `content[i]`
/// times). Rows weakly increase, columns strictly increase.
fn semistandard_tableaux(shape: &[i64], content: &[i64]) -> Vec<Vec<Vec<usize>>> {
    let rows: Vec<usize> = shape
        .iter()
        .take_while(|&&r| r > 0)
        .map(|&r| r as usize)
        .collect();
    let nletters = content.len();
    let mut remaining: Vec<i64> = content.to_vec();
    let mut tableau: Vec<Vec<usize>> = rows.iter().map(|&r| vec![0; r]).collect();
    let mut out = Vec::new();
    fn fill(
        tableau: &mut Vec<Vec<usize>>,
        remaining: &mut Vec<i64>,
        rows: &[usize],
        nletters: usize,
        r: usize,
        c: usize,
        out: &mut Vec<Vec<Vec<usize>>>,
    ) {
        if r == rows.len() {
            out.push(tableau.clone());
            return;
        }
        let (nr, nc) = if c + 1 < rows[r] {
            (r, c + 1)
        } else {
            (r + 1, 0)
        };
        let lo = {
            let mut lo = r + 1; // column strictness forces letter > row index
            if c > 0 {
                lo = lo.max(tableau[r][c - 1]);
            }
            if r > 0 {
                lo = lo.max(tableau[r - 1][c] + 1);
            }
            lo
        };
        for letter in lo..=nletters {
            if remaining[letter - 1] == 0 {
                continue;
            }
            tableau[r][c] = letter;
            remaining[letter - 1] -= 1;
            fill(tableau, remaining, rows, nletters, nr, nc, out);
            remaining[letter - 1] += 1;
        }
    }
    if rows.is_empty() {
        return vec![vec![]];
    }
    fill(
        &mut tableau,
        &mut remaining,
        &rows,
        nletters,
        0,
        0,
        &mut out,
    );
    out
}

/// Reading word: rows bottom to top, each left to right.
fn reading_word(t: &[Vec<usize>]) -> Vec<usize> {
    t.iter().rev().flatten().copied().collect()
}

/// Charge statistic (Lascoux–Schützenberger). Standard subwords are extracted
/// by cyclic right-to-left scans; each contributes Σ_r i_r with i_1 = 0 and
/// i_{r+1} = i_r + 1 exactly when r+1 sits to the right of r in the word.
fn charge(word: &[usize]) -> i64 {
    let len = word.len();
    if len == 0 {
        return 0;
    }
    let mut avail = vec![true; len];
    let mut remaining = len;
    let mut total = 0i64;
    while remaining > 0 {
        let mut positions: Vec<usize> = Vec::new();
        let mut target = 1usize;
        let mut start = len as i64 - 1;
        loop {
            let mut found = None;
            for k in 0..len {
                let idx = (((start - k as i64) % len as i64) + len as i64) as usize % len;
                if avail[idx] && word[idx] == target {
                    found = Some(idx);
                    break;
                }
            }
            let Some(idx) = found else { break };
            avail[idx] = false;
            remaining -= 1;
            positions.push(idx);
            start = idx as i64 - 1;
            target += 1;
        }
        let mut index = 0i64;
        for w in positions.windows(2) {
            if w[1] > w[0] {
                index += 1;
            }
            total += index;
        }
    }
    total
}

// ---------------------------------------------------------------------------
// Independent route: Lusztig's q-analog via the deformed partition function
// ---------------------------------------------------------------------------

/// K_{λμ}(t) = Σ_{w ∈ S_n} sgn(w) · 𝒫_t(w(λ+ρ) − (μ+ρ)), with 𝒫_t the
/// t-deformed Kostant partition function over the positive roots e_i − e_j.
/// Shares no code with the tableau route; used as a cross-check oracle.
pub fn kostka_foulkes_lusztig(lambda: &Coweight, mu: &Coweight) -> Result<Poly> {
    let (shape, content) = shift_pair(lambda, mu)?;
    let n = shape.len();
    let rho: Vec<i64> = (0..n).map(|i| (n - 1 - i) as i64).collect();
    let lam_rho: Vec<i64> = (0..n).map(|i| shape[i] + rho[i]).collect();
    let mu_rho: Vec<i64> = (0..n).map(|i| content[i] + rho[i]).collect();
    let mut memo: HashMap<(Vec<i64>, usize), Poly> = HashMap::new();
    let roots: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let mut acc = Poly::new();
    for (perm, sign) in permutations_signed(n) {
        let v: Vec<i64> = (0..n).map(|i| lam_rho[perm[i]] - mu_rho[i]).collect();
        let p = partition_fn_t(&v, roots.len(), &roots, &mut memo);
        for (k, c) in p.iter().enumerate() {
            poly_add_pow(&mut acc, k, sign * c);
        }
    }
    Ok(poly_trim(acc))
}

/// 𝒫_t(v) restricted to the first `k` positive roots.
fn partition_fn_t(
    v: &[i64],
    k: usize,
    roots: &[(usize, usize)],
    memo: &mut HashMap<(Vec<i64>, usize), Poly>,
) -> Poly {
    if v.iter().sum::<i64>() != 0 {
        return Poly::new();
    }
    // every positive root has nonnegative prefix sums, so v must too
    let mut pref = 0i64;
    for x in v {
        pref += x;
        if pref < 0 {
            return Poly::new();
        }
    }
    if v.iter().all(|&x| x == 0) {
        return vec![1];
    }
    if k == 0 {
        return Poly::new();
    }
    if let Some(p) = memo.get(&(v.to_vec(), k)) {
        return p.clone();
    }
    let (i, j) = roots[k - 1];
    // c·(e_i − e_j) contributes c to the flow across every cut between i and
    // j, so c is bounded by the prefix sum of v at position i
    let cmax: i64 = v.iter().take(i + 1).sum();
    let mut acc = Poly::new();
    let mut w = v.to_vec();
    for c in 0..=cmax.max(0) as usize {
        let sub = partition_fn_t(&w, k - 1, roots, memo);
        for (d, coef) in sub.iter().enumerate() {
            poly_add_pow(&mut acc, d + c, *coef);
        }
        w[i] -= 1;
        w[j] += 1;
    }
    let acc = poly_trim(acc);
    memo.insert((v.to_vec(), k), acc.clone());
    acc
}

/// All permutations of 0..n with signs, via Heap's algorithm.
fn permutations_signed(n: usize) -> Vec<(Vec<usize>, i64)> {
    let mut out = Vec::new();
    let mut a: Vec<usize> = (0..n).collect();
    fn heap(k: usize, a: &mut Vec<usize>, sign: &mut i64, out: &mut Vec<(Vec<usize>, i64)>) {
        if k == 1 {
            out.push((a.clone(), *sign));
            return;
        }
        for i in 0..k {
            heap(k - 1, a, sign, out);
            if i < k - 1 {
                if k % 2 == 0 {
                    a.swap(i, k - 1);
                } else {
                    a.swap(0, k - 1);
                }
                *sign = -*sign;
            }
        }
    }
    let mut sign = 1i64;
    heap(n, &mut a, &mut sign, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Satake values
// ---------------------------------------------------------------------------

/// Trace normalization of the intersection complex on the λ-stratum closure:
/// q^{−⟨ρ,λ⟩}·K̃_{λμ}(q) with K̃ the shifted Kostka–Foulkes polynomial, so the
/// open stratum μ = λ takes the value q^{−⟨ρ,λ⟩}. Requires ⟨ρ,λ⟩ ∈ ℤ, which
/// holds for every σ_Out-fixed λ.
pub fn satake_value(lambda: &Coweight, mu: &Coweight, q: u64) -> Result<BigRational> {
    let two_rho = lambda.two_rho_pairing();
    if two_rho.rem_euclid(2) != 0 {
        return Err(Error::ConstraintUnsatisfiable(format!(
            "⟨ρ,λ⟩ is not an integer for λ = {:?}",
            lambda.parts
        )));
    }
    let rho_lam = two_rho / 2;
    let k = kostka_foulkes(lambda, mu)?;
    let num = poly_eval_big(&k, &BigInt::from(q));
    let den = BigInt::from(q).pow(rho_lam as u32);
    Ok(BigRational::new(num, den))
}

/// Weakly decreasing nonnegative vectors of the given length summing to
/// `total` (partitions padded with zeros); enumeration helper for exhaustive
/// desk-scale checks and CLI tables.
pub fn bounded_partitions(total: i64, len: usize) -> Vec<Vec<i64>> {
    fn rec(total: i64, len: usize, maxp: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if len == 0 {
            if total == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let hi = maxp.min(total);
        for p in (0..=hi).rev() {
            if p * (len as i64) < total {
                break;
            }
            cur.push(p);
            rec(total - p, len - 1, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, len, total.max(0), &mut Vec::new(), &mut out);
    out
}

/// K_{λμ}(1) as a big integer (the weight multiplicity).
pub fn kostka_number(lambda: &Coweight, mu: &Coweight) -> Result<BigInt> {
    Ok(poly_eval_big(&kostka_foulkes(lambda, mu)?, &BigInt::one()))
}
