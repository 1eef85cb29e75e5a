//! Exact arithmetic in F_q, its quadratic extension F_{q²}, and truncated
//! Laurent series over both, with the split/inert place bookkeeping used by
//! every other module.
//!
//! Residue-field elements are table-indexed: an element of F_{q²} is an index
//! `lo + hi·q` into precomputed add/mul/inv/frob tables, where `lo, hi` index
//! F_q = F_p[x]/(h(x)) (base-p digit encoding of the polynomial). F_{q²} is
//! F_q[u]/(m(u)) with m the lexicographically smallest irreducible monic
//! quadratic (constant coefficient first); h is chosen the same way over F_p.
//! The F_q subfield of F_{q²} is exactly the index range `0..q`.
//!
//! A Laurent series tracks `val` (exponent of the stored leading coefficient)
//! and an absolute precision `prec`: coefficients are known for exponents
//! strictly below `prec`. `prec = INF_PREC` marks an exact polynomial value.
//! Any query the stored digits cannot settle raises `PrecisionExhausted`.

use crate::error::{Error, Result};
use crate::rng::KeyedRng;
use std::fmt;
use std::sync::Arc;

/// Sentinel absolute precision for exact values.
pub const INF_PREC: i64 = i64::MAX / 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaceKind {
    Split,
    Inert,
}

/// Local place configuration plus the residue-field arithmetic tables.
pub struct Place {
    pub p: u64,
    pub d: u32,
    pub q: u64,
    pub q2: u64,
    pub n: usize,
    pub kind: PlaceKind,
    pub prec: i64,
    /// Irreducible h(x) defining F_q over F_p (low coefficients first, monic implied), empty when d = 1.
    pub h_poly: Vec<u64>,
    /// Irreducible m(u) = u² + m1·u + m0 over F_q: (m0, m1) as F_q indices.
    pub m_poly: (u32, u32),
    add: Vec<u32>,
    mul: Vec<u32>,
    neg: Vec<u32>,
    inv: Vec<u32>,
    frob: Vec<u32>,
}

impl fmt::Debug for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Place")
            .field("p", &self.p)
            .field("d", &self.d)
            .field("n", &self.n)
            .field("kind", &self.kind)
            .field("prec", &self.prec)
            .finish()
    }
}

// ---- small dense polynomial helpers over F_p (construction only) ----

fn pmod(a: i64, p: u64) -> u64 {
    a.rem_euclid(p as i64) as u64
}

fn poly_trim(v: &mut Vec<u64>) {
    while v.last() == Some(&0) {
        v.pop();
    }
}

fn poly_mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x * y) % p;
        }
    }
    poly_trim(&mut out);
    out
}

/// Remainder of a by monic b.
fn poly_rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    poly_trim(&mut r);
    let db = b.len() - 1;
    assert_eq!(b[db], 1, "divisor must be monic");
    while r.len() > db {
        let lead = r[r.len() - 1];
        let shift = r.len() - 1 - db;
        for k in 0..=db {
            let idx = shift + k;
            r[idx] = pmod(r[idx] as i64 - (lead * b[k]) as i64, p);
        }
        poly_trim(&mut r);
        if r.is_empty() {
            break;
        }
    }
    r
}

/// Is the monic polynomial (coeffs low-first, last = 1) irreducible over F_p?
/// Trial division by every monic polynomial of degree 1..=deg/2.
fn poly_irreducible(f: &[u64], p: u64) -> bool {
    let deg = f.len() - 1;
    for ddiv in 1..=deg / 2 {
        // enumerate monic divisors of degree ddiv
        let count = p.pow(ddiv as u32);
        for code in 0..count {
            let mut g = Vec::with_capacity(ddiv + 1);
            let mut c = code;
            for _ in 0..ddiv {
                g.push(c % p);
                c /= p;
            }
            g.push(1);
            if poly_rem(f, &g, p).is_empty() {
                return false;
            }
        }
    }
    true
}

impl Place {
    /// Build a place. Enforces p prime, p > 2n, prec ≥ 1, and a table-size cap.
    pub fn new(p: u64, d: u32, n: usize, kind: PlaceKind, prec: i64) -> Result<Arc<Place>> {
        if !is_prime(p) {
            return Err(Error::ConfigError(format!("p = {p} is not prime")));
        }
        if p <= 2 * n as u64 {
            return Err(Error::ConfigError(format!(
                "char constraint violated: need p > 2n, got p = {p}, n = {n}"
            )));
        }
        if prec < 1 {
            return Err(Error::ConfigError("prec must be ≥ 1".into()));
        }
        if d < 1 {
            return Err(Error::ConfigError("extension degree d must be ≥ 1".into()));
        }
        let q = p.checked_pow(d).filter(|&q| q <= 64).ok_or_else(|| {
            Error::ConfigError(format!("q = p^d too large for table arithmetic (cap 64)"))
        })?;
        let q2 = q * q;

        // F_q = F_p[x]/(h), h the lexicographically smallest irreducible monic
        // polynomial of degree d (constant coefficient most significant in the
        // scan order below, i.e. candidates scanned by base-p code with c_0 the
        // least significant digit).
        let h_poly: Vec<u64> = if d == 1 {
            vec![]
        } else {
            let mut found = None;
            'scan: for code in 0..q {
                let mut f = Vec::with_capacity(d as usize + 1);
                let mut c = code;
                for _ in 0..d {
                    f.push(c % p);
                    c /= p;
                }
                f.push(1);
                if poly_irreducible(&f, p) {
                    found = Some(f);
                    break 'scan;
                }
            }
            found.expect("an irreducible polynomial of every degree exists")
        };

        // F_q element <-> base-p digit vector
        let fq_decode = |x: u32| -> Vec<u64> {
            let mut v = Vec::with_capacity(d as usize);
            let mut c = x as u64;
            for _ in 0..d {
                v.push(c % p);
                c /= p;
            }
            poly_trim(&mut v);
            v
        };
        let fq_encode = |poly: &[u64]| -> u32 {
            let mut acc = 0u64;
            for (i, &c) in poly.iter().enumerate() {
                acc += c * p.pow(i as u32);
            }
            acc as u32
        };
        let fq_mul = |x: u32, y: u32| -> u32 {
            let prod = poly_mul(&fq_decode(x), &fq_decode(y), p);
            let red = if d == 1 { prod } else { poly_rem(&prod, &h_poly, p) };
            fq_encode(&red)
        };
        let fq_add = |x: u32, y: u32| -> u32 {
            let (a, b) = (fq_decode(x), fq_decode(y));
            let mut out = vec![0u64; d as usize];
            for (i, slot) in out.iter_mut().enumerate() {
                let xa = *a.get(i).unwrap_or(&0);
                let xb = *b.get(i).unwrap_or(&0);
                *slot = (xa + xb) % p;
            }
            poly_trim(&mut out);
            fq_encode(&out)
        };
        let fq_neg = |x: u32| -> u32 {
            let a = fq_decode(x);
            let out: Vec<u64> = a.iter().map(|&c| pmod(-(c as i64), p)).collect();
            fq_encode(&out)
        };

        // m(u) = u² + m1·u + m0, lexicographically smallest irreducible over
        // F_q (scan (m0, m1) with m0 least significant); irreducible over a
        // finite field ⟺ no root.
        let mut m_poly = None;
        'outer: for code in 0..q2 {
            let m0 = (code % q) as u32;
            let m1 = (code / q) as u32;
            for t in 0..q as u32 {
                let v = fq_add(fq_add(fq_mul(t, t), fq_mul(m1, t)), m0);
                if v == 0 {
                    continue 'outer;
                }
            }
            m_poly = Some((m0, m1));
            break;
        }
        let m_poly = m_poly.expect("irreducible quadratic exists over every finite field");
        let (m0, m1) = m_poly;

        // F_{q²} tables; element index = lo + hi·q.
        let qu = q as usize;
        let q2u = q2 as usize;
        let mut add = vec![0u32; q2u * q2u];
        let mut mul = vec![0u32; q2u * q2u];
        let mut neg = vec![0u32; q2u];
        for x in 0..q2u {
            let (a, b) = ((x % qu) as u32, (x / qu) as u32);
            neg[x] = fq_neg(a) + fq_neg(b) * q as u32;
            for y in 0..q2u {
                let (c, dd) = ((y % qu) as u32, (y / qu) as u32);
                add[x * q2u + y] = fq_add(a, c) + fq_add(b, dd) * q as u32;
                // (a + bu)(c + du) = ac + bd·u² + (ad + bc)u,  u² = −m1·u − m0
                let ac = fq_mul(a, c);
                let bd = fq_mul(b, dd);
                let cross = fq_add(fq_mul(a, dd), fq_mul(b, c));
                let lo = fq_add(ac, fq_neg(fq_mul(bd, m0)));
                let hi = fq_add(cross, fq_neg(fq_mul(bd, m1)));
                mul[x * q2u + y] = lo + hi * q as u32;
            }
        }
        let mut place = Place {
            p,
            d,
            q,
            q2,
            n,
            kind,
            prec,
            h_poly,
            m_poly,
            add,
            mul,
            neg,
            inv: vec![0; q2u],
            frob: vec![0; q2u],
        };
        for x in 1..q2u {
            place.inv[x] = place.ff_pow(x as u32, q2 - 2);
            debug_assert_eq!(place.ff_mul(x as u32, place.inv[x]), 1);
        }
        for x in 0..q2u {
            place.frob[x] = place.ff_pow(x as u32, q);
        }
        // sanity: Frobenius fixes exactly the embedded F_q = indices 0..q
        debug_assert!((0..q2 as u32).all(|x| (place.frob[x as usize] == x) == (x < q as u32)));
        Ok(Arc::new(place))
    }

    // ---- residue-field element ops (indices into F_{q²}) ----

    #[inline]
    pub fn ff_add(&self, x: u32, y: u32) -> u32 {
        self.add[x as usize * self.q2 as usize + y as usize]
    }
    #[inline]
    pub fn ff_mul(&self, x: u32, y: u32) -> u32 {
        self.mul[x as usize * self.q2 as usize + y as usize]
    }
    #[inline]
    pub fn ff_neg(&self, x: u32) -> u32 {
        self.neg[x as usize]
    }
    #[inline]
    pub fn ff_sub(&self, x: u32, y: u32) -> u32 {
        self.ff_add(x, self.ff_neg(y))
    }
    /// Multiplicative inverse; panics on 0 (callers check).
    #[inline]
    pub fn ff_inv(&self, x: u32) -> u32 {
        assert!(x != 0, "residue-field inverse of zero");
        self.inv[x as usize]
    }
    #[inline]
    pub fn ff_frob(&self, x: u32) -> u32 {
        self.frob[x as usize]
    }
    pub fn ff_pow(&self, x: u32, mut e: u64) -> u32 {
        let mut base = x;
        let mut acc = 1u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.ff_mul(acc, base);
            }
            base = self.ff_mul(base, base);
            e >>= 1;
        }
        acc
    }
    /// Is the element in the F_q subfield?
    #[inline]
    pub fn ff_in_fq(&self, x: u32) -> bool {
        (x as u64) < self.q
    }
    /// Embed an integer via reduction mod p (lands in the prime subfield).
    pub fn ff_from_int(&self, k: i64) -> u32 {
        pmod(k, self.p) as u32
    }

    /// Deterministic square root in F_{q²} of c ∈ F_q^×: the least index s
    /// with s² = c. Always exists: c^{(q²−1)/2} = (c^{q−1})^{(q+1)/2} = 1.
    pub fn sqrt_in_quadratic(&self, c: u32) -> u32 {
        assert!(self.ff_in_fq(c) && c != 0, "need c ∈ F_q^×");
        for s in 0..self.q2 as u32 {
            if self.ff_mul(s, s) == c {
                return s;
            }
        }
        unreachable!("every element of F_q^× is a square in F_{{q²}}")
    }

    /// A fixed trace-zero unit η₀ ∈ F_{q²} (σ(η₀) = −η₀): least such index.
    pub fn trace_zero_unit(&self) -> u32 {
        for s in 1..self.q2 as u32 {
            if self.ff_frob(s) == self.ff_neg(s) {
                return s;
            }
        }
        unreachable!("odd characteristic: the trace-zero line is nonzero")
    }

    pub fn random_ff(&self, rng: &mut KeyedRng) -> u32 {
        rng.below(self.q2) as u32
    }
    pub fn random_fq(&self, rng: &mut KeyedRng) -> u32 {
        rng.below(self.q) as u32
    }
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut k = 2;
    while k * k <= p {
        if p % k == 0 {
            return false;
        }
        k += 1;
    }
    true
}

// ---------------------------------------------------------------------------
// Laurent series
// ---------------------------------------------------------------------------

/// Truncated Laurent series over the residue field of `place`.
///
/// Value = Σ_k coeffs[k]·π^{val+k}; coefficients are known for all exponents
/// < `prec`. Empty `coeffs` means "zero to precision" (exactly zero when
/// `prec == INF_PREC`). Stored form is normalized: nonzero leading and
/// trailing coefficients, and no stored coefficient at exponent ≥ prec.
#[derive(Clone)]
pub struct Series {
    pub place: Arc<Place>,
    pub val: i64,
    pub prec: i64,
    pub coeffs: Vec<u32>,
}

impl fmt::Debug for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Series({})", self.to_wire())
    }
}

impl Series {
    fn normalized(place: Arc<Place>, mut val: i64, mut coeffs: Vec<u32>, prec: i64) -> Series {
        // drop unknown digits
        if prec != INF_PREC && val + coeffs.len() as i64 > prec {
            let keep = (prec - val).max(0) as usize;
            coeffs.truncate(keep);
        }
        while coeffs.first() == Some(&0) {
            coeffs.remove(0);
            val += 1;
        }
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            val = 0;
        }
        Series { place, val, prec, coeffs }
    }

    pub fn from_coeffs(place: &Arc<Place>, val: i64, coeffs: Vec<u32>, prec: i64) -> Series {
        Series::normalized(place.clone(), val, coeffs, prec)
    }

    /// Exact zero.
    pub fn zero(place: &Arc<Place>) -> Series {
        Series { place: place.clone(), val: 0, prec: INF_PREC, coeffs: vec![] }
    }
    /// Zero to precision `prec` (an unknown multiple of π^prec).
    pub fn zero_to_prec(place: &Arc<Place>, prec: i64) -> Series {
        Series { place: place.clone(), val: 0, prec, coeffs: vec![] }
    }
    pub fn one(place: &Arc<Place>) -> Series {
        Series::from_residue(place, 1)
    }
    /// Constant series from a residue-field element.
    pub fn from_residue(place: &Arc<Place>, c: u32) -> Series {
        Series::normalized(place.clone(), 0, vec![c], INF_PREC)
    }
    /// c·π^k for a residue element c.
    pub fn monomial(place: &Arc<Place>, c: u32, k: i64) -> Series {
        Series::normalized(place.clone(), k, vec![c], INF_PREC)
    }
    pub fn pi_pow(place: &Arc<Place>, k: i64) -> Series {
        Series::monomial(place, 1, k)
    }
    pub fn from_int(place: &Arc<Place>, k: i64) -> Series {
        let c = place.ff_from_int(k);
        Series::from_residue(place, c)
    }

    pub fn is_exact_zero(&self) -> bool {
        self.coeffs.is_empty() && self.prec == INF_PREC
    }
    /// True when no nonzero digit is stored (zero as far as we know).
    pub fn is_zero_to_prec(&self) -> bool {
        self.coeffs.is_empty()
    }
    pub fn is_provably_nonzero(&self) -> bool {
        !self.coeffs.is_empty()
    }

    /// Lower bound for the valuation (the valuation itself when provably nonzero).
    pub fn val_lower_bound(&self) -> i64 {
        if self.coeffs.is_empty() {
            self.prec
        } else {
            self.val
        }
    }

    pub fn valuation(&self) -> Result<i64> {
        if !self.coeffs.is_empty() {
            return Ok(self.val);
        }
        if self.prec == INF_PREC {
            Err(Error::ExactZero)
        } else {
            Err(Error::PrecisionExhausted(format!(
                "valuation unknown: zero to precision π^{}",
                self.prec
            )))
        }
    }

    /// Coefficient at exponent `e`; error when the digit is beyond precision.
    pub fn coeff_at(&self, e: i64) -> Result<u32> {
        if e >= self.prec {
            return Err(Error::PrecisionExhausted(format!(
                "coefficient at π^{e} beyond precision π^{}",
                self.prec
            )));
        }
        if self.coeffs.is_empty() || e < self.val || e >= self.val + self.coeffs.len() as i64 {
            return Ok(0);
        }
        Ok(self.coeffs[(e - self.val) as usize])
    }

    pub fn add(&self, other: &Series) -> Series {
        debug_assert!(Arc::ptr_eq(&self.place, &other.place));
        let prec = self.prec.min(other.prec);
        if self.coeffs.is_empty() && other.coeffs.is_empty() {
            return if prec == INF_PREC {
                Series::zero(&self.place)
            } else {
                Series::zero_to_prec(&self.place, prec)
            };
        }
        let lo = self.val_lower_bound().min(other.val_lower_bound());
        let hi_a = self.val + self.coeffs.len() as i64;
        let hi_b = other.val + other.coeffs.len() as i64;
        let hi = hi_a.max(hi_b).max(lo);
        let mut out = vec![0u32; (hi - lo) as usize];
        for (k, &c) in self.coeffs.iter().enumerate() {
            let idx = (self.val + k as i64 - lo) as usize;
            out[idx] = self.place.ff_add(out[idx], c);
        }
        for (k, &c) in other.coeffs.iter().enumerate() {
            let idx = (other.val + k as i64 - lo) as usize;
            out[idx] = self.place.ff_add(out[idx], c);
        }
        Series::normalized(self.place.clone(), lo, out, prec)
    }

    pub fn neg(&self) -> Series {
        let coeffs = self.coeffs.iter().map(|&c| self.place.ff_neg(c)).collect();
        Series { place: self.place.clone(), val: self.val, prec: self.prec, coeffs }
    }

    pub fn sub(&self, other: &Series) -> Series {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Series) -> Series {
        debug_assert!(Arc::ptr_eq(&self.place, &other.place));
        // knowing a mod π^{pa}, b mod π^{pb}: ab known mod π^{min(va+pb, vb+pa)}
        let prec = if self.prec == INF_PREC && other.prec == INF_PREC {
            INF_PREC
        } else {
            let pa = self
                .val_lower_bound()
                .saturating_add(other.prec)
                .min(INF_PREC);
            let pb = other
                .val_lower_bound()
                .saturating_add(self.prec)
                .min(INF_PREC);
            pa.min(pb)
        };
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return if prec == INF_PREC {
                Series::zero(&self.place)
            } else {
                Series::zero_to_prec(&self.place, prec)
            };
        }
        let mut out = vec![0u32; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &x) in self.coeffs.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in other.coeffs.iter().enumerate() {
                out[i + j] = self.place.ff_add(out[i + j], self.place.ff_mul(x, y));
            }
        }
        Series::normalized(self.place.clone(), self.val + other.val, out, prec)
    }

    pub fn scale(&self, c: u32) -> Series {
        if c == 0 {
            return Series::zero(&self.place).with_prec_floor(self.prec);
        }
        let coeffs = self.coeffs.iter().map(|&x| self.place.ff_mul(x, c)).collect();
        Series::normalized(self.place.clone(), self.val, coeffs, self.prec)
    }

    fn with_prec_floor(mut self, prec: i64) -> Series {
        // an exact zero scaled stays exact; otherwise keep the tighter prec
        if self.prec == INF_PREC {
            return self;
        }
        self.prec = self.prec.min(prec);
        self
    }

    /// Multiplicative inverse. Exact monomials invert exactly; otherwise the
    /// result carries `place.prec` relative digits (or fewer if self has less).
    pub fn inv(&self) -> Result<Series> {
        if self.coeffs.is_empty() {
            return if self.prec == INF_PREC {
                Err(Error::DivisionByZero)
            } else {
                Err(Error::PrecisionExhausted(format!(
                    "cannot invert: zero to precision π^{}",
                    self.prec
                )))
            };
        }
        let v = self.val;
        if self.coeffs.len() == 1 {
            let c = self.place.ff_inv(self.coeffs[0]);
            let mut out = Series::monomial(&self.place, c, -v);
            if self.prec != INF_PREC {
                // relative precision of the input bounds the output
                out.prec = -v + (self.prec - v);
            }
            return Ok(out);
        }
        let rel = if self.prec == INF_PREC {
            self.place.prec
        } else {
            self.prec - v
        };
        // digit-by-digit: b = c0·π^v(1 + t), t = higher digits; invert 1 + t
        // by iterative convolution to `rel` digits.
        let c0inv = self.place.ff_inv(self.coeffs[0]);
        let mut out = vec![0u32; rel.max(1) as usize];
        out[0] = c0inv;
        for k in 1..out.len() {
            // Σ_{j=0..k} coeffs[j]·out[k−j] = 0  ⇒ solve for out[k]
            let mut acc = 0u32;
            for j in 1..=k.min(self.coeffs.len() - 1) {
                acc = self
                    .place
                    .ff_add(acc, self.place.ff_mul(self.coeffs[j], out[k - j]));
            }
            out[k] = self.place.ff_neg(self.place.ff_mul(acc, c0inv));
        }
        Ok(Series::normalized(self.place.clone(), -v, out, -v + rel))
    }

    pub fn div(&self, other: &Series) -> Result<Series> {
        Ok(self.mul(&other.inv()?))
    }

    pub fn pow(&self, e: i64) -> Result<Series> {
        if e == 0 {
            return Ok(Series::one(&self.place));
        }
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut acc = Series::one(&self.place);
        for _ in 0..e.abs() {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    /// Coefficientwise q-power Frobenius.
    pub fn frobenius(&self) -> Series {
        let coeffs = self.coeffs.iter().map(|&c| self.place.ff_frob(c)).collect();
        Series { place: self.place.clone(), val: self.val, prec: self.prec, coeffs }
    }

    /// Are all stored coefficients in the F_q subfield?
    pub fn coeffs_in_fq(&self) -> bool {
        self.coeffs.iter().all(|&c| self.place.ff_in_fq(c))
    }

    /// η(x) = (−1)^{val(x)} at inert places; +1 at split places.
    pub fn eta(&self) -> Result<i64> {
        if self.place.kind == PlaceKind::Split {
            return Ok(1);
        }
        let v = self.valuation()?;
        Ok(if v % 2 == 0 { 1 } else { -1 })
    }

    /// Does `self − other` have any provably nonzero digit?
    pub fn provably_differs(&self, other: &Series) -> bool {
        self.sub(other).is_provably_nonzero()
    }

    /// Equal as exact data (requires both exact; use for canonical forms).
    pub fn exact_eq(&self, other: &Series) -> bool {
        self.prec == INF_PREC
            && other.prec == INF_PREC
            && self.val == other.val
            && self.coeffs == other.coeffs
    }

    /// val(self) ≥ 0 as far as the digits show; errors if undecidable
    /// (nonzero digit below 0 ⇒ Ok(false); all-known-zero below 0 ⇒ Ok(true)).
    pub fn is_integral(&self) -> Result<bool> {
        if let Some(&_c) = self.coeffs.first() {
            return Ok(self.val >= 0);
        }
        if self.prec >= 0 || self.prec == INF_PREC {
            Ok(true)
        } else {
            Err(Error::PrecisionExhausted(format!(
                "integrality unknown: zero to precision π^{} < π^0",
                self.prec
            )))
        }
    }

    /// Truncate to absolute precision `prec` (forgetting higher digits).
    pub fn truncate(&self, prec: i64) -> Series {
        Series::normalized(
            self.place.clone(),
            self.val,
            self.coeffs.clone(),
            self.prec.min(prec),
        )
    }

    /// Reduce mod π^k: keep digits at exponents < k, exactly.
    pub fn reduce_mod(&self, k: i64) -> Series {
        let mut coeffs = self.coeffs.clone();
        let hi = self.val + coeffs.len() as i64;
        if hi > k {
            coeffs.truncate((k - self.val).max(0) as usize);
        }
        Series::normalized(self.place.clone(), self.val, coeffs, self.prec)
    }

    /// Wire format `val:prec:[...]` with residue elements as integers (F_q)
    /// or `(lo,hi)` pairs (proper F_{q²} elements).
    pub fn to_wire(&self) -> String {
        let q = self.place.q as u32;
        let items: Vec<String> = self
            .coeffs
            .iter()
            .map(|&c| {
                if c < q {
                    format!("{c}")
                } else {
                    format!("({},{})", c % q, c / q)
                }
            })
            .collect();
        let prec = if self.prec == INF_PREC {
            "inf".to_string()
        } else {
            self.prec.to_string()
        };
        format!("{}:{}:[{}]", self.val, prec, items.join(","))
    }

    /// Random exact polynomial with support in [min_val, min_val + place.prec),
    /// coefficients uniform in F_{q²} (or F_q when `subfield`).
    pub fn random(place: &Arc<Place>, rng: &mut KeyedRng, min_val: i64, subfield: bool) -> Series {
        let len = place.prec as usize;
        let coeffs: Vec<u32> = (0..len)
            .map(|_| if subfield { place.random_fq(rng) } else { place.random_ff(rng) })
            .collect();
        Series::normalized(place.clone(), min_val, coeffs, INF_PREC)
    }

    /// Random unit (valuation 0), exact polynomial.
    pub fn random_unit(place: &Arc<Place>, rng: &mut KeyedRng, subfield: bool) -> Series {
        loop {
            let s = Series::random(place, rng, 0, subfield);
            if s.val_lower_bound() == 0 && s.is_provably_nonzero() {
                return s;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Scalar: inert series or an explicit split pair
// ---------------------------------------------------------------------------

/// An F'_v-scalar: a single series at inert places, an explicit (left, right)
/// pair at split places, where σ swaps the components.
#[derive(Clone)]
pub enum Scalar {
    In(Series),
    Sp(Series, Series),
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::In(s) => write!(f, "In({})", s.to_wire()),
            Scalar::Sp(a, b) => write!(f, "Sp({}|{})", a.to_wire(), b.to_wire()),
        }
    }
}

macro_rules! lift2 {
    ($name:ident) => {
        pub fn $name(&self, other: &Scalar) -> Scalar {
            match (self, other) {
                (Scalar::In(a), Scalar::In(b)) => Scalar::In(a.$name(b)),
                (Scalar::Sp(a1, a2), Scalar::Sp(b1, b2)) => {
                    Scalar::Sp(a1.$name(b1), a2.$name(b2))
                }
                _ => panic!("mixed split/inert scalars"),
            }
        }
    };
}

macro_rules! lift2_res {
    ($name:ident) => {
        pub fn $name(&self, other: &Scalar) -> Result<Scalar> {
            match (self, other) {
                (Scalar::In(a), Scalar::In(b)) => Ok(Scalar::In(a.$name(b)?)),
                (Scalar::Sp(a1, a2), Scalar::Sp(b1, b2)) => {
                    Ok(Scalar::Sp(a1.$name(b1)?, a2.$name(b2)?))
                }
                _ => panic!("mixed split/inert scalars"),
            }
        }
    };
}

impl Scalar {
    pub fn place(&self) -> &Arc<Place> {
        match self {
            Scalar::In(s) => &s.place,
            Scalar::Sp(a, _) => &a.place,
        }
    }

    /// The natural zero/one/etc. for the place's kind.
    pub fn zero(place: &Arc<Place>) -> Scalar {
        Scalar::wrap(place, Series::zero(place))
    }
    pub fn one(place: &Arc<Place>) -> Scalar {
        Scalar::wrap(place, Series::one(place))
    }
    pub fn pi_pow(place: &Arc<Place>, k: i64) -> Scalar {
        Scalar::wrap(place, Series::pi_pow(place, k))
    }
    pub fn from_int(place: &Arc<Place>, k: i64) -> Scalar {
        Scalar::wrap(place, Series::from_int(place, k))
    }
    /// Duplicate one series into the place's scalar shape (diagonal embedding
    /// of F_v at split places).
    pub fn wrap(place: &Arc<Place>, s: Series) -> Scalar {
        match place.kind {
            PlaceKind::Inert => Scalar::In(s),
            PlaceKind::Split => Scalar::Sp(s.clone(), s),
        }
    }
    pub fn pair(left: Series, right: Series) -> Scalar {
        Scalar::Sp(left, right)
    }

    pub fn left(&self) -> &Series {
        match self {
            Scalar::In(s) => s,
            Scalar::Sp(a, _) => a,
        }
    }
    pub fn right(&self) -> &Series {
        match self {
            Scalar::In(s) => s,
            Scalar::Sp(_, b) => b,
        }
    }

    lift2!(add);
    lift2!(sub);
    lift2!(mul);
    lift2_res!(div);

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::In(a) => Scalar::In(a.neg()),
            Scalar::Sp(a, b) => Scalar::Sp(a.neg(), b.neg()),
        }
    }

    pub fn inv(&self) -> Result<Scalar> {
        match self {
            Scalar::In(a) => Ok(Scalar::In(a.inv()?)),
            Scalar::Sp(a, b) => Ok(Scalar::Sp(a.inv()?, b.inv()?)),
        }
    }

    pub fn pow(&self, e: i64) -> Result<Scalar> {
        match self {
            Scalar::In(a) => Ok(Scalar::In(a.pow(e)?)),
            Scalar::Sp(a, b) => Ok(Scalar::Sp(a.pow(e)?, b.pow(e)?)),
        }
    }

    pub fn scale_residue(&self, c: u32) -> Scalar {
        match self {
            Scalar::In(a) => Scalar::In(a.scale(c)),
            Scalar::Sp(a, b) => Scalar::Sp(a.scale(c), b.scale(c)),
        }
    }

    /// σ: coefficientwise Frobenius at inert places, component swap at split.
    pub fn frobenius(&self) -> Scalar {
        match self {
            Scalar::In(a) => Scalar::In(a.frobenius()),
            Scalar::Sp(a, b) => Scalar::Sp(b.clone(), a.clone()),
        }
    }

    /// norm(a) = a·σ(a); lands in F_v.
    pub fn norm(&self) -> Scalar {
        self.mul(&self.frobenius())
    }

    pub fn is_provably_nonzero(&self) -> bool {
        match self {
            Scalar::In(a) => a.is_provably_nonzero(),
            Scalar::Sp(a, b) => a.is_provably_nonzero() && b.is_provably_nonzero(),
        }
    }
    pub fn is_zero_to_prec(&self) -> bool {
        match self {
            Scalar::In(a) => a.is_zero_to_prec(),
            Scalar::Sp(a, b) => a.is_zero_to_prec() && b.is_zero_to_prec(),
        }
    }

    /// Valuation at an inert place; at split places requires both components
    /// to agree (callers needing per-component data use left()/right()).
    pub fn valuation(&self) -> Result<i64> {
        match self {
            Scalar::In(a) => a.valuation(),
            Scalar::Sp(a, b) => {
                let (va, vb) = (a.valuation()?, b.valuation()?);
                if va == vb {
                    Ok(va)
                } else {
                    Err(Error::PrecisionExhausted(format!(
                        "split scalar has componentwise valuations {va} ≠ {vb}"
                    )))
                }
            }
        }
    }

    /// Integral in O'_v: both components integral at split places.
    pub fn is_integral(&self) -> Result<bool> {
        match self {
            Scalar::In(a) => a.is_integral(),
            Scalar::Sp(a, b) => Ok(a.is_integral()? && b.is_integral()?),
        }
    }

    /// Is the scalar σ-fixed (in F_v) as far as digits show?
    pub fn is_rational(&self) -> bool {
        !self.sub(&self.frobenius()).is_provably_nonzero_any()
    }

    fn is_provably_nonzero_any(&self) -> bool {
        match self {
            Scalar::In(a) => a.is_provably_nonzero(),
            Scalar::Sp(a, b) => a.is_provably_nonzero() || b.is_provably_nonzero(),
        }
    }

    /// η of an F_v-scalar (uses the left component at split places, where η ≡ +1).
    pub fn eta(&self) -> Result<i64> {
        match self {
            Scalar::In(a) => a.eta(),
            Scalar::Sp(_, _) => Ok(1),
        }
    }

    pub fn provably_differs(&self, other: &Scalar) -> bool {
        self.sub(other).is_provably_nonzero_any()
    }

    pub fn to_wire(&self) -> String {
        match self {
            Scalar::In(a) => a.to_wire(),
            Scalar::Sp(a, b) => format!("{}|{}", a.to_wire(), b.to_wire()),
        }
    }

    /// Random integral scalar: independent components at split places,
    /// F_{q²}-coefficients at inert places.
    pub fn random_integral(place: &Arc<Place>, rng: &mut KeyedRng) -> Scalar {
        match place.kind {
            PlaceKind::Inert => Scalar::In(Series::random(place, rng, 0, false)),
            PlaceKind::Split => Scalar::Sp(
                Series::random(place, rng, 0, true),
                Series::random(place, rng, 0, true),
            ),
        }
    }

    /// Random σ-fixed (F_v) integral scalar.
    pub fn random_rational(place: &Arc<Place>, rng: &mut KeyedRng) -> Scalar {
        Scalar::wrap(place, Series::random(place, rng, 0, true))
    }
}
