//! Invariant theory of the reductive monoid attached to GL_n and its
//! GL_{n−1}-quotient: monoid points through the fundamental representations,
//! the three sections (companion, H-relative, deformed), pure tensors,
//! discriminants, the involutions ι and τ, and the Galois-twisted invariant
//! space with its σ-relations.

use crate::error::{Error, Result};
use crate::lattice_linalg::{k_subsets, SeriesMatrix};
use crate::local_fields::{Place, PlaceKind, Scalar, Series};
use crate::rng::KeyedRng;
use serde_json::json;
use std::sync::Arc;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// A point of the monoid in fundamental-representation coordinates:
/// abelianization coordinates z_i (simple-root coordinates, i = 1..n−1) and
/// operators x_i on V_i = ∧^i(F^n) for i = 1..n−1.
#[derive(Clone, Debug)]
pub struct MonoidPoint {
    pub z: Vec<Scalar>,
    pub x: Vec<SeriesMatrix>,
}

impl MonoidPoint {
    pub fn n(&self) -> usize {
        self.z.len() + 1
    }
    pub fn place(&self) -> &Arc<Place> {
        self.z[0].place()
    }
    pub fn x1(&self) -> &SeriesMatrix {
        &self.x[0]
    }
}

/// A monoid point together with the deformation vector and co-vector.
#[derive(Clone, Debug)]
pub struct DeformedPoint {
    pub point: MonoidPoint,
    pub e: Vec<Scalar>,
    pub edual: Vec<Scalar>,
}

impl DeformedPoint {
    pub fn n(&self) -> usize {
        self.point.n()
    }
    pub fn place(&self) -> &Arc<Place> {
        self.point.place()
    }
}

/// Coordinates of the invariant-theoretic quotient of the deformed monoid:
/// (z, a, b, b0) ∈ (F'_v)^{3n−2}. The Galois-twisted form is validated by
/// [`check_twisted`], not by construction.
#[derive(Clone, Debug)]
pub struct InvariantPoint {
    pub place: Arc<Place>,
    pub z: Vec<Scalar>,
    pub a: Vec<Scalar>,
    pub b: Vec<Scalar>,
    pub b0: Scalar,
}

// ---------------------------------------------------------------------------
// Wedge-coordinate helpers
// ---------------------------------------------------------------------------

fn subset_index(subsets: &[Vec<usize>], s: &[usize]) -> usize {
    subsets.binary_search_by(|c| c.as_slice().cmp(s)).expect("subset present")
}

/// v ∧ w for a vector v ∈ V_1 and w ∈ ∧^{i−1}: coordinates on e_S are
/// Σ_k (−1)^k v_{s_k} w_{S∖{s_k}} (k the 0-based position of s_k in S).
pub fn wedge_vec(n: usize, i: usize, v: &[Scalar], w: &[Scalar]) -> Vec<Scalar> {
    let place = v[0].place();
    let big = k_subsets(n, i);
    let small = k_subsets(n, i - 1);
    big.iter()
        .map(|s| {
            let mut acc = Scalar::zero(place);
            for (k, &j) in s.iter().enumerate() {
                let rest: Vec<usize> = s.iter().copied().filter(|&x| x != j).collect();
                let term = v[j].mul(&w[subset_index(&small, &rest)]);
                acc = if k % 2 == 1 { acc.sub(&term) } else { acc.add(&term) };
            }
            acc
        })
        .collect()
}

/// Contraction e^∨ ⌟ u: ∧^i → ∧^{i−1}, the antiderivation
/// e^∨⌟e_S = Σ_k (−1)^k e^∨(e_{s_k})·e_{S∖{s_k}}.
pub fn contract_vec(n: usize, i: usize, edual: &[Scalar], u: &[Scalar]) -> Vec<Scalar> {
    let place = edual[0].place();
    let big = k_subsets(n, i);
    let small = k_subsets(n, i - 1);
    let mut out = vec![Scalar::zero(place); small.len()];
    for (si, s) in big.iter().enumerate() {
        if u[si].is_zero_to_prec() && u[si].left().is_exact_zero() {
            continue;
        }
        for (k, &j) in s.iter().enumerate() {
            let rest: Vec<usize> = s.iter().copied().filter(|&x| x != j).collect();
            let term = edual[j].mul(&u[si]);
            let t = subset_index(&small, &rest);
            out[t] = if k % 2 == 1 { out[t].sub(&term) } else { out[t].add(&term) };
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Sections
// ---------------------------------------------------------------------------

/// Simple-root coordinates of ϖ_i − wt(e_S): c_j(S) = min(j, i) − |S ∩ {1..j}|.
/// S is 0-based here; j runs 1..n−1.
pub fn weight_coords(n: usize, i: usize, s: &[usize]) -> Vec<i64> {
    (1..n)
        .map(|j| {
            let inter = s.iter().filter(|&&x| x + 1 <= j).count() as i64;
            (j.min(i)) as i64 - inter
        })
        .collect()
}

/// Diagonal action of the abelianization on V_i in the wedge basis.
pub fn delta_scaling(z: &[Scalar], i: usize) -> SeriesMatrix {
    let n = z.len() + 1;
    assert!(i >= 1 && i < n);
    let place = z[0].place();
    let subsets = k_subsets(n, i);
    let d: Vec<Scalar> = subsets
        .iter()
        .map(|s| {
            let cs = weight_coords(n, i, s);
            let mut acc = Scalar::one(place);
            for (j, &c) in cs.iter().enumerate() {
                debug_assert!(c >= 0, "weight coordinates are nonnegative");
                for _ in 0..c {
                    acc = acc.mul(&z[j]);
                }
            }
            acc
        })
        .collect();
    SeriesMatrix::diag(place, &d)
}

/// Companion matrix ε(a): first row ((−1)^{j−1}a_j)_{j=1..n} with a_n := 1,
/// identity subdiagonal.
pub fn companion_matrix(place: &Arc<Place>, a: &[Scalar]) -> SeriesMatrix {
    let n = a.len() + 1;
    SeriesMatrix::from_fn(n, n, |i, j| {
        if i == 0 {
            let c = if j == n - 1 {
                Scalar::one(place)
            } else {
                a[j].clone()
            };
            if j % 2 == 1 {
                c.neg()
            } else {
                c
            }
        } else if i == j + 1 {
            Scalar::one(place)
        } else {
            Scalar::zero(place)
        }
    })
}

/// ε_M(z, a): x_i = δ_i(z)·∧^i(ε(a)).
pub fn companion_section(z: &[Scalar], a: &[Scalar]) -> MonoidPoint {
    let n = z.len() + 1;
    assert_eq!(a.len(), n - 1);
    let place = z[0].place();
    let eps = companion_matrix(place, a);
    let x = (1..n)
        .map(|i| delta_scaling(z, i).mul(&eps.wedge(i)))
        .collect();
    MonoidPoint { z: z.to_vec(), x }
}

/// β(c): identity plus last row ((−1)^{n−j}c_j)_{j=1..n−1}.
pub fn beta_matrix(place: &Arc<Place>, c: &[Scalar]) -> SeriesMatrix {
    let n = c.len() + 1;
    SeriesMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Scalar::one(place)
        } else if i == n - 1 && j < n - 1 {
            let v = c[j].clone();
            if (n - 1 - j) % 2 == 1 {
                v.neg()
            } else {
                v
            }
        } else {
            Scalar::zero(place)
        }
    })
}

/// ε_{M,H}(z, a', a'') = β(a'')·ε_M(z, a' + a'')·β(a'')^{−1}, conjugating each
/// x_i by ∧^i β. β is unipotent with β^{-1} = 2·I − β.
pub fn section_mh(z: &[Scalar], a1: &[Scalar], a2: &[Scalar]) -> MonoidPoint {
    let place = z[0].place();
    let n = z.len() + 1;
    let a: Vec<Scalar> = a1.iter().zip(a2).map(|(x, y)| x.add(y)).collect();
    let base = companion_section(z, &a);
    let beta = beta_matrix(place, a2);
    let two_id = SeriesMatrix::identity(place, n).scale(&Scalar::from_int(place, 2));
    let beta_inv = two_id.sub(&beta);
    let x = (1..n)
        .map(|i| {
            let w = beta.wedge(i);
            let wi = beta_inv.wedge(i);
            w.mul(&base.x[i - 1]).mul(&wi)
        })
        .collect();
    MonoidPoint { z: z.to_vec(), x }
}

/// ε_𝕸(z, a, b, b0): the companion section with e = last standard basis
/// vector and e^∨ = e_b^∨ = Σ_i (−1)^{n−i} b_i e_i^∨ + b_0 e^∨.
pub fn deformed_section(z: &[Scalar], a: &[Scalar], b: &[Scalar], b0: &Scalar) -> DeformedPoint {
    let place = z[0].place();
    let n = z.len() + 1;
    let point = companion_section(z, a);
    let e: Vec<Scalar> = (0..n)
        .map(|i| {
            if i == n - 1 {
                Scalar::one(place)
            } else {
                Scalar::zero(place)
            }
        })
        .collect();
    let edual: Vec<Scalar> = (0..n)
        .map(|j| {
            if j == n - 1 {
                b0.clone()
            } else {
                let v = b[j].clone();
                if (n - 1 - j) % 2 == 1 {
                    v.neg()
                } else {
                    v
                }
            }
        })
        .collect();
    DeformedPoint { point, e, edual }
}

// ---------------------------------------------------------------------------
// Invariants
// ---------------------------------------------------------------------------

/// χ_i(m) = Tr(x_i), i = 1..n−1.
pub fn chi(m: &MonoidPoint) -> Vec<Scalar> {
    let place = m.place();
    m.x.iter()
        .map(|xi| {
            let mut t = Scalar::zero(place);
            for k in 0..xi.rows {
                t = t.add(xi.at(k, k));
            }
            t
        })
        .collect()
}

/// χ'_i: trace restricted to the summand V'_i spanned by e_S with n ∉ S.
pub fn chi_prime(m: &MonoidPoint) -> Vec<Scalar> {
    trace_on_summand(m, false)
}

/// χ''_i: trace restricted to V''_i spanned by e_S with n ∈ S.
pub fn chi_double_prime(m: &MonoidPoint) -> Vec<Scalar> {
    trace_on_summand(m, true)
}

fn trace_on_summand(m: &MonoidPoint, with_n: bool) -> Vec<Scalar> {
    let n = m.n();
    let place = m.place();
    (1..n)
        .map(|i| {
            let subsets = k_subsets(n, i);
            let mut t = Scalar::zero(place);
            for (k, s) in subsets.iter().enumerate() {
                if s.contains(&(n - 1)) == with_n {
                    t = t.add(m.x[i - 1].at(k, k));
                }
            }
            t
        })
        .collect()
}

/// Trace of the composite V_{i−1} → V_{i−1}, w ↦ e^∨ ⌟ (W·(e ∧ w)), where W
/// is an operator on V_i in the wedge basis — the b_i invariant shape shared
/// by the deformed monoid and the group S_n (with W = ∧^i A there).
pub fn wedge_contraction_trace(
    w_op: &SeriesMatrix,
    i: usize,
    e: &[Scalar],
    edual: &[Scalar],
) -> Scalar {
    let n = e.len();
    let place = e[0].place();
    let small = k_subsets(n, i - 1);
    let mut tr = Scalar::zero(place);
    for t in 0..small.len() {
        let mut w = vec![Scalar::zero(place); small.len()];
        w[t] = Scalar::one(place);
        let up = if i == 1 { e.to_vec() } else { wedge_vec(n, i, e, &w) };
        let moved = w_op.mul_vec(&up);
        let down = contract_vec(n, i, edual, &moved);
        tr = tr.add(&down[t]);
    }
    tr
}

/// Full invariant coordinates of a deformed point: a_i = Tr(x_i),
/// b_0 = e^∨e, and b_i = trace of V_{i−1} → V_i → V_i → V_{i−1}
/// (wedge by e, apply x_i, contract by e^∨).
pub fn deformed_invariants(m: &DeformedPoint) -> InvariantPoint {
    let n = m.n();
    let place = m.place().clone();
    let a = chi(&m.point);
    let mut b0 = Scalar::zero(&place);
    for j in 0..n {
        b0 = b0.add(&m.edual[j].mul(&m.e[j]));
    }
    let b: Vec<Scalar> = (1..n)
        .map(|i| wedge_contraction_trace(&m.point.x[i - 1], i, &m.e, &m.edual))
        .collect();
    InvariantPoint {
        place,
        z: m.point.z.clone(),
        a,
        b,
        b0,
    }
}

// ---------------------------------------------------------------------------
// Pure tensors and discriminants
// ---------------------------------------------------------------------------

/// The chains f_1 = x_1 e, f_i = x_i(e ∧ f_{i−1}), f_n = e ∧ f_{n−1}, and
/// dually f_1^∨ = e^∨x_1, f_i^∨ = (e^∨ ∧ f_{i−1}^∨)x_i, f_n^∨ = e^∨ ∧ f_{n−1}^∨.
/// Returned as coordinate vectors on the wedge bases, indices 1..n.
pub fn pure_tensors(m: &DeformedPoint) -> (Vec<Vec<Scalar>>, Vec<Vec<Scalar>>) {
    let n = m.n();
    let mut fs: Vec<Vec<Scalar>> = Vec::with_capacity(n);
    let mut fds: Vec<Vec<Scalar>> = Vec::with_capacity(n);
    let mut cur = m.point.x[0].mul_vec(&m.e);
    let mut curd = SeriesMatrix::vec_mul(&m.edual, &m.point.x[0]);
    fs.push(cur.clone());
    fds.push(curd.clone());
    for i in 2..=n {
        let up = wedge_vec(n, i, &m.e, &cur);
        let upd = wedge_vec(n, i, &m.edual, &curd);
        if i < n {
            cur = m.point.x[i - 1].mul_vec(&up);
            curd = SeriesMatrix::vec_mul(&upd, &m.point.x[i - 1]);
        } else {
            cur = up;
            curd = upd;
        }
        fs.push(cur.clone());
        fds.push(curd.clone());
    }
    (fs, fds)
}

/// Disc(m) = f_n^∨ · f_n (product of the two top-wedge coordinates).
pub fn disc(m: &DeformedPoint) -> Scalar {
    let (fs, fds) = pure_tensors(m);
    let n = m.n();
    fds[n - 1][0].mul(&fs[n - 1][0])
}

/// Coefficients σ_1..σ_n of the characteristic polynomial of x_1 as
/// polynomials in the invariants: σ_i = a_i · ∏_k z_k^{max(i−k, 0)}
/// (a_n := 1). These are Tr ∧^i x_1.
pub fn char_sigma(z: &[Scalar], a: &[Scalar]) -> Vec<Scalar> {
    let n = z.len() + 1;
    let place = z[0].place();
    (1..=n)
        .map(|i| {
            let mut s = if i == n {
                Scalar::one(place)
            } else {
                a[i - 1].clone()
            };
            for (k0, zk) in z.iter().enumerate() {
                let k = k0 + 1;
                let e = (i as i64 - k as i64).max(0);
                for _ in 0..e {
                    s = s.mul(zk);
                }
            }
            s
        })
        .collect()
}

/// Discriminant of a monic polynomial λ^n + c_{n−1}λ^{n−1} + … + c_0,
/// computed as (−1)^{n(n−1)/2}·Res(p, p') via the Sylvester determinant.
pub fn monic_poly_disc(place: &Arc<Place>, c: &[Scalar]) -> Scalar {
    let n = c.len();
    assert!(n >= 2);
    // p coefficients, descending degree: 1, c_{n-1}, ..., c_0
    let mut p = vec![Scalar::one(place)];
    p.extend(c.iter().rev().cloned());
    // p' coefficients descending: n, (n-1)c_{n-1}, ..., 1·c_1
    let mut dp = vec![Scalar::from_int(place, n as i64)];
    for k in (1..n).rev() {
        dp.push(c[k].scale_residue(place.ff_from_int(k as i64)));
    }
    let size = 2 * n - 1;
    let syl = SeriesMatrix::from_fn(size, size, |i, j| {
        if i < n - 1 {
            // rows of p, shifted
            if j >= i && j - i < p.len() {
                p[j - i].clone()
            } else {
                Scalar::zero(place)
            }
        } else {
            let r = i - (n - 1);
            if j >= r && j - r < dp.len() {
                dp[j - r].clone()
            } else {
                Scalar::zero(place)
            }
        }
    });
    let res = syl.det();
    if (n * (n - 1) / 2) % 2 == 1 {
        res.neg()
    } else {
        res
    }
}

/// The extended discriminant Disc_+ of the invariant point, pinned as the
/// discriminant of the characteristic polynomial of x_1 expressed through the
/// integral coefficients σ_i — a polynomial in (z, a).
pub fn disc_plus(z: &[Scalar], a: &[Scalar]) -> Scalar {
    let place = z[0].place();
    let n = z.len() + 1;
    let sigma = char_sigma(z, a);
    // charpoly λ^n − σ_1λ^{n−1} + σ_2λ^{n−2} − …: c_{n−i} = (−1)^i σ_i
    let mut c = vec![Scalar::zero(place); n];
    for i in 1..=n {
        let v = sigma[i - 1].clone();
        c[n - i] = if i % 2 == 1 { v.neg() } else { v };
    }
    monic_poly_disc(place, &c)
}

// ---------------------------------------------------------------------------
// Reconstruction and involutions
// ---------------------------------------------------------------------------

/// On the invertible locus: x_i = ∧^i(x_1)·∏_k z_k^{−max(i−k,0)}.
pub fn reconstruct_from_x1(z: &[Scalar], x1: &SeriesMatrix) -> Result<MonoidPoint> {
    let n = z.len() + 1;
    let place = z[0].place();
    let mut x = Vec::with_capacity(n - 1);
    for i in 1..n {
        let mut scale = Scalar::one(place);
        for (k0, zk) in z.iter().enumerate() {
            let k = k0 + 1;
            let e = (i as i64 - k as i64).max(0);
            if e > 0 {
                scale = scale.mul(&zk.pow(e)?.inv()?);
            }
        }
        x.push(x1.wedge(i).scale(&scale));
    }
    Ok(MonoidPoint { z: z.to_vec(), x })
}

fn involution_core(m: &MonoidPoint, transpose: bool) -> Result<MonoidPoint> {
    let place = m.place();
    let mut prod = Scalar::one(place);
    for zk in &m.z {
        prod = prod.mul(zk);
    }
    let x1inv = m.x1().inverse().map_err(|e| match e {
        Error::PrecisionExhausted(s) => Error::PrecisionExhausted(s),
        _ => Error::SingularMatrix,
    })?;
    let x1new = if transpose {
        x1inv.transpose().scale(&prod)
    } else {
        x1inv.scale(&prod)
    };
    let znew: Vec<Scalar> = m.z.iter().rev().cloned().collect();
    reconstruct_from_x1(&znew, &x1new)
}

/// ι: (z, g) ↦ (flip(z), g^{−1}); on V_1, x_1 ↦ (∏z_i)·x_1^{−1}.
pub fn involution_iota(m: &MonoidPoint) -> Result<MonoidPoint> {
    involution_core(m, false)
}

/// τ: (z, g) ↦ (flip(z), ᵗg^{−1}); on V_1, x_1 ↦ (∏z_i)·ᵗx_1^{−1}.
pub fn involution_tau(m: &MonoidPoint) -> Result<MonoidPoint> {
    involution_core(m, true)
}

/// Simultaneous conjugation of a deformed point by g ∈ GL_n: x_i by ∧^i g,
/// e ↦ ge, e^∨ ↦ e^∨g^{−1}.
pub fn conjugate_deformed(m: &DeformedPoint, g: &SeriesMatrix) -> Result<DeformedPoint> {
    let n = m.n();
    let ginv = g.inverse()?;
    let x = (1..n)
        .map(|i| g.wedge(i).mul(&m.point.x[i - 1]).mul(&ginv.wedge(i)))
        .collect();
    Ok(DeformedPoint {
        point: MonoidPoint { z: m.point.z.clone(), x },
        e: g.mul_vec(&m.e),
        edual: SeriesMatrix::vec_mul(&m.edual, &ginv),
    })
}

// ---------------------------------------------------------------------------
// Galois-twisted invariant space
// ---------------------------------------------------------------------------

/// Verify the twisted relations z_i = σ(z_{n−i}), a_i = σ(a_{n−i}),
/// b_i = σ(b_0·a_{n−i} − b_{n−i}) (conventions a_n = 1, b_n = 0), and
/// b_0 ∈ F_v, to stored precision.
pub fn check_twisted(p: &InvariantPoint) -> bool {
    let n = p.z.len() + 1;
    if !p.b0.is_rational() {
        return false;
    }
    for i in 1..n {
        let j = n - i;
        if p.z[i - 1].provably_differs(&p.z[j - 1].frobenius()) {
            return false;
        }
        if p.a[i - 1].provably_differs(&p.a[j - 1].frobenius()) {
            return false;
        }
        let rhs = p.b0.mul(&p.a[j - 1]).sub(&p.b[j - 1]).frobenius();
        if p.b[i - 1].provably_differs(&rhs) {
            return false;
        }
    }
    true
}

/// Sampling constraints for [`random_twisted`].
#[derive(Clone, Debug, Default)]
pub struct TwistConstraints {
    /// Required val(z_i), i = 1..n−1 (must be flip-symmetric).
    pub z_vals: Option<Vec<i64>>,
    /// Required parity of val(Disc) (0 or 1).
    pub disc_parity: Option<i64>,
    /// Retry budget for rejection sampling (default 400).
    pub retries: usize,
}

/// Draw a random point of the twisted invariant space: free coordinates are
/// sampled, mirrored coordinates forced by the σ-relations, then the point is
/// validated, required to be strongly regular semisimple, and matched against
/// the constraints by rejection.
pub fn random_twisted(
    place: &Arc<Place>,
    n: usize,
    c: &TwistConstraints,
    rng: &mut KeyedRng,
) -> Result<InvariantPoint> {
    let zv = match &c.z_vals {
        Some(v) => {
            if v.len() != n - 1 {
                return Err(Error::ConstraintUnsatisfiable(format!(
                    "z_vals has length {} for n = {n}",
                    v.len()
                )));
            }
            for i in 1..n {
                if v[i - 1] != v[n - i - 1] {
                    return Err(Error::ConstraintUnsatisfiable(
                        "z valuations must be flip-symmetric".into(),
                    ));
                }
                if v[i - 1] < 0 {
                    return Err(Error::ConstraintUnsatisfiable(
                        "z valuations must be nonnegative for integral points".into(),
                    ));
                }
            }
            v.clone()
        }
        None => vec![0; n - 1],
    };
    let budget = if c.retries == 0 { 400 } else { c.retries };
    for _ in 0..budget {
        let p = sample_twisted_once(place, n, &zv, rng);
        if !check_twisted(&p) {
            continue;
        }
        let Ok(vd) = disc_val(&p) else { continue };
        if !disc_plus(&p.z, &p.a).is_provably_nonzero() {
            continue;
        }
        if let Some(par) = c.disc_parity {
            if vd.rem_euclid(2) != par.rem_euclid(2) {
                continue;
            }
        }
        return Ok(p);
    }
    Err(Error::ConstraintUnsatisfiable(format!(
        "no valid twisted point after {budget} draws"
    )))
}

/// val Disc of the invariant point, via the deformed section.
pub fn disc_val(p: &InvariantPoint) -> Result<i64> {
    disc(&deformed_section(&p.z, &p.a, &p.b, &p.b0)).valuation()
}

/// val Disc^+ = val Disc_+ + val Disc.
pub fn disc_plus_val(p: &InvariantPoint) -> Result<i64> {
    Ok(disc_plus(&p.z, &p.a).valuation()? + disc_val(p)?)
}

fn sample_twisted_once(
    place: &Arc<Place>,
    n: usize,
    zv: &[i64],
    rng: &mut KeyedRng,
) -> InvariantPoint {
    match place.kind {
        PlaceKind::Inert => {
            let mut z = vec![Scalar::zero(place); n - 1];
            let mut a = vec![Scalar::zero(place); n - 1];
            let mut b = vec![Scalar::zero(place); n - 1];
            let b0 = Scalar::In(Series::random_unit(place, rng, true));
            for i in 1..n {
                let j = n - i;
                if i < j {
                    let u = Series::random_unit(place, rng, false);
                    let zi = Series::pi_pow(place, zv[i - 1]).mul(&u);
                    z[i - 1] = Scalar::In(zi.clone());
                    z[j - 1] = Scalar::In(zi.frobenius());
                    let ai = Series::random(place, rng, 0, false);
                    a[i - 1] = Scalar::In(ai.clone());
                    a[j - 1] = Scalar::In(ai.frobenius());
                } else if i == j {
                    z[i - 1] =
                        Scalar::In(Series::pi_pow(place, zv[i - 1]).mul(&Series::random_unit(place, rng, true)));
                    a[i - 1] = Scalar::In(Series::random(place, rng, 0, true));
                }
            }
            for i in 1..n {
                let j = n - i;
                if i < j {
                    let bj = Series::random(place, rng, 0, false);
                    b[j - 1] = Scalar::In(bj);
                    b[i - 1] = b0.mul(&a[j - 1]).sub(&b[j - 1]).frobenius();
                } else if i == j {
                    // trace(b_i) = b_0·a_i with a_i ∈ F_v: b_i = b_0a_i/2 + η_0·t
                    let half = Scalar::from_int(place, 2).inv().expect("char > 2");
                    let base = b0.mul(&a[i - 1]).mul(&half);
                    let eta0 = Series::from_residue(place, place.trace_zero_unit());
                    let t = Series::random(place, rng, 0, true);
                    b[i - 1] = base.add(&Scalar::In(eta0.mul(&t)));
                }
            }
            InvariantPoint { place: place.clone(), z, a, b, b0 }
        }
        PlaceKind::Split => {
            // choose left components of z, a and right components of b freely;
            // σ-relations determine the rest
            let zl: Vec<Series> = (0..n - 1)
                .map(|i| Series::pi_pow(place, zv[i]).mul(&Series::random_unit(place, rng, true)))
                .collect();
            let al: Vec<Series> = (0..n - 1)
                .map(|_| Series::random(place, rng, 0, true))
                .collect();
            let br: Vec<Series> = (0..n - 1)
                .map(|_| Series::random(place, rng, 0, true))
                .collect();
            let b0s = Series::random_unit(place, rng, true);
            let b0 = Scalar::wrap(place, b0s.clone());
            let z: Vec<Scalar> = (1..n)
                .map(|i| Scalar::pair(zl[i - 1].clone(), zl[n - i - 1].clone()))
                .collect();
            let a: Vec<Scalar> = (1..n)
                .map(|i| Scalar::pair(al[i - 1].clone(), al[n - i - 1].clone()))
                .collect();
            let b: Vec<Scalar> = (1..n)
                .map(|i| {
                    let j = n - i;
                    // left(b_i) = right(b_0·a_{n−i} − b_{n−i}) = b_0·left(a_i) − b_{n−i}.right
                    let bl = b0s.mul(&al[i - 1]).sub(&br[j - 1]);
                    Scalar::pair(bl, br[i - 1].clone())
                })
                .collect();
            InvariantPoint { place: place.clone(), z, a, b, b0 }
        }
    }
}

impl InvariantPoint {
    pub fn n(&self) -> usize {
        self.z.len() + 1
    }

    /// Strongly regular semisimple: Disc and Disc_+ both provably nonzero.
    pub fn is_srs(&self) -> bool {
        disc_val(self).is_ok() && disc_plus(&self.z, &self.a).is_provably_nonzero()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let wire = |v: &[Scalar]| -> Vec<String> { v.iter().map(|s| s.to_wire()).collect() };
        json!({
            "n": self.n(),
            "place": {
                "p": self.place.p,
                "d": self.place.d,
                "q": self.place.q,
                "n": self.place.n,
                "kind": match self.place.kind { PlaceKind::Split => "split", PlaceKind::Inert => "inert" },
                "prec": self.place.prec,
            },
            "z": wire(&self.z),
            "a": wire(&self.a),
            "b": wire(&self.b),
            "b0": self.b0.to_wire(),
            "val_disc": disc_val(self).ok(),
            "val_disc_plus": disc_plus_val(self).ok(),
            "srs": self.is_srs(),
        })
    }

    /// Stable content digest of the invariant coordinates.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for s in self.z.iter().chain(&self.a).chain(&self.b) {
            h.update(s.to_wire().as_bytes());
            h.update(b";");
        }
        h.update(self.b0.to_wire().as_bytes());
        format!("{:x}", h.finalize())[..16].to_string()
    }
}

/// Exact random series with `len` digits starting at π^v, nonzero leading digit.
pub fn random_exact_with_val(
    place: &Arc<Place>,
    rng: &mut KeyedRng,
    v: i64,
    subfield: bool,
) -> Series {
    Series::pi_pow(place, v).mul(&Series::random_unit(place, rng, subfield))
}
