//! Deterministic finite fields `F_{p^N}`.
//!
//! A [`FieldCtx`] realizes `F_{p^N}` as `F_p[x]/(f)` where `f` is the
//! lexicographically least monic irreducible polynomial of degree `N`,
//! ordered by the coefficient tuple `(c_0, c_1, ..., c_{N-1})`. The choice is
//! a pure function of `(p, N)`, so two runs (or two implementations) agree on
//! every element representation.
//!
//! Subfields are never built as separate contexts. `F_q` with `q = p^e`
//! living inside `F_{p^{eN}}` is the fixed set of `x -> x^q`, and every
//! subfield question (membership, degree of an element over `F_q`) is
//! answered by Frobenius arithmetic inside one context.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on the number of field elements any enumeration may visit.
pub const DEFAULT_ENUM_LIMIT: u64 = 1 << 22;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FfError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("extension degree must be positive")]
    ZeroDegree,
    #[error("characteristic {0} too large")]
    CharTooLarge(u64),
    #[error("enumeration of {needed} elements exceeds the limit {limit}")]
    BoundExceeded { needed: u128, limit: u64 },
    #[error("{q} is not a power of the characteristic {p} with exponent dividing {n}")]
    NotSubfield { q: u64, p: u64, n: usize },
    #[error("division by zero")]
    DivisionByZero,
}

/// Simple trial-division primality test; `p` stays small in this crate.
pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    if p % 2 == 0 {
        return p == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= p {
        if p % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Decomposes a prime power `q = p^e` into `(p, e)`; `None` if `q` is not one.
pub fn prime_power(q: u64) -> Option<(u64, u32)> {
    if q < 2 {
        return None;
    }
    let mut p = q;
    // The smallest prime factor of a prime power is its base.
    let mut d = 2u64;
    while d.saturating_mul(d) <= q {
        if q % d == 0 {
            p = d;
            break;
        }
        d += 1;
    }
    let mut e = 0u32;
    let mut rest = q;
    while rest % p == 0 {
        rest /= p;
        e += 1;
    }
    if rest == 1 {
        Some((p, e))
    } else {
        None
    }
}

/// An element of `F_{p^N}`: the residue class of a polynomial of degree `< N`,
/// stored as `N` coefficients in `[0, p)`, constant term first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldElement {
    coeffs: Vec<u64>,
}

impl FieldElement {
    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }
}

/// A concrete realization of `F_{p^N}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldCtx {
    p: u64,
    #[serde(rename = "N")]
    degree: usize,
    /// Monic modulus of degree `N`, length `N + 1`, leading coefficient 1.
    modulus: Vec<u64>,
}

/// Builds the deterministic context for `F_{p^N}`.
///
/// The modulus is found by scanning coefficient tuples in lexicographic
/// order, so repeated calls agree bit for bit.
pub fn make_field(p: u64, n: usize) -> Result<FieldCtx, FfError> {
    if !is_prime(p) {
        return Err(FfError::NotPrime(p));
    }
    if n == 0 {
        return Err(FfError::ZeroDegree);
    }
    if p >= (1 << 31) {
        return Err(FfError::CharTooLarge(p));
    }
    if n == 1 {
        // x itself: the least monic degree-1 polynomial, trivially irreducible.
        return Ok(FieldCtx {
            p,
            degree: 1,
            modulus: vec![0, 1],
        });
    }
    let prime_ctx = FieldCtx {
        p,
        degree: 1,
        modulus: vec![0, 1],
    };
    let modulus = least_irreducible(&prime_ctx, n)
        .into_iter()
        .map(|c| c.coeffs[0])
        .collect();
    Ok(FieldCtx {
        p,
        degree: n,
        modulus,
    })
}

impl FieldCtx {
    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    /// `p^N` as an exact integer.
    pub fn order(&self) -> BigUint {
        BigUint::from(self.p).pow(self.degree as u32)
    }

    /// `p^N` if it fits in a `u64`.
    pub fn order_u64(&self) -> Option<u64> {
        let mut acc: u64 = 1;
        for _ in 0..self.degree {
            acc = acc.checked_mul(self.p)?;
        }
        Some(acc)
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement {
            coeffs: vec![0; self.degree],
        }
    }

    pub fn one(&self) -> FieldElement {
        self.from_int(1)
    }

    /// The image of the integer `c` (reduced mod `p`) in the prime subfield.
    pub fn from_int(&self, c: u64) -> FieldElement {
        let mut coeffs = vec![0; self.degree];
        coeffs[0] = c % self.p;
        FieldElement { coeffs }
    }

    /// The element with the given coefficient vector (padded with zeros,
    /// entries reduced mod `p`). At most `N` coefficients are accepted.
    pub fn element_from_coeffs(&self, coeffs: &[u64]) -> FieldElement {
        assert!(coeffs.len() <= self.degree);
        let mut out = vec![0; self.degree];
        for (slot, &c) in out.iter_mut().zip(coeffs.iter()) {
            *slot = c % self.p;
        }
        FieldElement { coeffs: out }
    }

    pub fn is_zero(&self, a: &FieldElement) -> bool {
        a.coeffs.iter().all(|&c| c == 0)
    }

    pub fn add(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        let coeffs = a
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(&x, &y)| (x + y) % self.p)
            .collect();
        FieldElement { coeffs }
    }

    pub fn sub(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        let coeffs = a
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(&x, &y)| (x + self.p - y) % self.p)
            .collect();
        FieldElement { coeffs }
    }

    pub fn neg(&self, a: &FieldElement) -> FieldElement {
        let coeffs = a.coeffs.iter().map(|&x| (self.p - x) % self.p).collect();
        FieldElement { coeffs }
    }

    pub fn mul(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        let n = self.degree;
        let mut prod = vec![0u128; 2 * n - 1];
        for (i, &x) in a.coeffs.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.coeffs.iter().enumerate() {
                prod[i + j] += (x as u128) * (y as u128);
            }
        }
        let p = self.p as u128;
        for c in prod.iter_mut() {
            *c %= p;
        }
        // Reduce by the monic modulus.
        for k in (n..2 * n - 1).rev() {
            let c = prod[k];
            if c == 0 {
                continue;
            }
            prod[k] = 0;
            for (i, &m) in self.modulus.iter().enumerate().take(n) {
                if m != 0 {
                    let idx = k - n + i;
                    prod[idx] = (prod[idx] + p - (c * m as u128) % p) % p;
                }
            }
        }
        FieldElement {
            coeffs: prod[..n].iter().map(|&c| c as u64).collect(),
        }
    }

    /// Multiplicative inverse via the extended Euclidean algorithm on
    /// polynomials over the prime field.
    pub fn inv(&self, a: &FieldElement) -> Result<FieldElement, FfError> {
        if self.is_zero(a) {
            return Err(FfError::DivisionByZero);
        }
        let (g, _, v) = fp_poly::ext_gcd(self.p, &self.modulus, &a.coeffs);
        // modulus irreducible and a != 0, so gcd is a nonzero constant
        debug_assert_eq!(fp_poly::degree(&g), Some(0));
        let ginv = fp_poly::inv_mod_p(self.p, g[0]);
        let mut coeffs: Vec<u64> = v
            .iter()
            .map(|&c| (c as u128 * ginv as u128 % self.p as u128) as u64)
            .collect();
        coeffs.resize(self.degree, 0);
        Ok(FieldElement { coeffs })
    }

    pub fn div(&self, a: &FieldElement, b: &FieldElement) -> Result<FieldElement, FfError> {
        Ok(self.mul(a, &self.inv(b)?))
    }

    pub fn pow_u64(&self, a: &FieldElement, mut e: u64) -> FieldElement {
        let mut base = a.clone();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    pub fn pow_biguint(&self, a: &FieldElement, e: &BigUint) -> FieldElement {
        let mut base = a.clone();
        let mut acc = self.one();
        let bits = e.bits();
        for i in 0..bits {
            if e.bit(i) {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
        }
        acc
    }

    /// The `q`-power Frobenius `a -> a^q`.
    pub fn frobenius(&self, a: &FieldElement, q: u64) -> FieldElement {
        self.pow_u64(a, q)
    }

    /// The element whose coefficient vector is the base-`p` digit expansion
    /// of `idx`, constant term least significant. Index 0 is 0, index 1 is 1.
    pub fn element_from_index(&self, mut idx: u64) -> FieldElement {
        let mut coeffs = vec![0; self.degree];
        for c in coeffs.iter_mut() {
            *c = idx % self.p;
            idx /= self.p;
        }
        FieldElement { coeffs }
    }

    /// Inverse of [`FieldCtx::element_from_index`]; only meaningful when the
    /// field order fits in a `u64`.
    pub fn index_of(&self, a: &FieldElement) -> u64 {
        let mut idx = 0u64;
        for &c in a.coeffs.iter().rev() {
            idx = idx * self.p + c;
        }
        idx
    }

    /// All `p^N` elements in index order (0 first, 1 second).
    pub fn enumerate(&self, limit: u64) -> Result<impl Iterator<Item = FieldElement> + '_, FfError> {
        let order = match self.order_u64() {
            Some(o) if o <= limit => o,
            other => {
                return Err(FfError::BoundExceeded {
                    needed: other.map(u128::from).unwrap_or(u128::MAX),
                    limit,
                })
            }
        };
        Ok((0..order).map(move |i| self.element_from_index(i)))
    }
}

/// Least `d >= 1` with `a^{q^d} = a`: the degree over `F_q` of the closed
/// point below `a`, i.e. the size of its Galois orbit.
pub fn frobenius_degree(ctx: &FieldCtx, a: &FieldElement, q: u64) -> Result<u64, FfError> {
    let (p, e) = prime_power(q).ok_or(FfError::NotSubfield {
        q,
        p: ctx.p,
        n: ctx.degree,
    })?;
    if p != ctx.p || ctx.degree % (e as usize) != 0 {
        return Err(FfError::NotSubfield {
            q,
            p: ctx.p,
            n: ctx.degree,
        });
    }
    let mut b = ctx.frobenius(a, q);
    let mut d = 1u64;
    while &b != a {
        b = ctx.frobenius(&b, q);
        d += 1;
    }
    Ok(d)
}

/// The `q` elements of the subfield `F_q` inside `ctx`, in enumeration order.
pub fn subfield_elements(
    ctx: &FieldCtx,
    q: u64,
    limit: u64,
) -> Result<Vec<FieldElement>, FfError> {
    let (p, e) = prime_power(q).ok_or(FfError::NotSubfield {
        q,
        p: ctx.p,
        n: ctx.degree,
    })?;
    if p != ctx.p || ctx.degree % (e as usize) != 0 {
        return Err(FfError::NotSubfield {
            q,
            p: ctx.p,
            n: ctx.degree,
        });
    }
    let els: Vec<FieldElement> = ctx
        .enumerate(limit)?
        .filter(|a| ctx.frobenius(a, q) == *a)
        .collect();
    debug_assert_eq!(els.len() as u64, q);
    Ok(els)
}

/// Maps canonically encoded `F_{p^e}` coefficients into a larger context.
///
/// The canonical encoding of an `F_q` element (`q = p^e`) is its coefficient
/// vector in the deterministic degree-`e` context. Inside a context of degree
/// `e*n` the encoding is interpreted by sending the degree-`e` generator to
/// the enumeration-least root of the canonical degree-`e` modulus.
#[derive(Clone, Debug)]
pub struct SubfieldEmbedding {
    p: u64,
    e: usize,
    powers: Vec<FieldElement>,
}

pub fn subfield_embedding(
    ctx: &FieldCtx,
    e: usize,
    limit: u64,
) -> Result<SubfieldEmbedding, FfError> {
    if e == 0 || ctx.degree % e != 0 {
        return Err(FfError::NotSubfield {
            q: 0,
            p: ctx.p,
            n: ctx.degree,
        });
    }
    if e == 1 {
        return Ok(SubfieldEmbedding {
            p: ctx.p,
            e,
            powers: vec![ctx.one()],
        });
    }
    let canonical = make_field(ctx.p, e)?;
    let root = ctx
        .enumerate(limit)?
        .find(|a| {
            // Horner evaluation of the canonical modulus, whose coefficients
            // lie in the prime field.
            let mut acc = ctx.zero();
            for &c in canonical.modulus.iter().rev() {
                acc = ctx.mul(&acc, a);
                acc = ctx.add(&acc, &ctx.from_int(c));
            }
            ctx.is_zero(&acc)
        })
        .expect("an irreducible of degree e splits in any extension of degree divisible by e");
    let mut powers = Vec::with_capacity(e);
    let mut acc = ctx.one();
    for _ in 0..e {
        powers.push(acc.clone());
        acc = ctx.mul(&acc, &root);
    }
    Ok(SubfieldEmbedding {
        p: ctx.p,
        e,
        powers,
    })
}

impl SubfieldEmbedding {
    /// Interprets a canonical coefficient vector (length <= e, entries mod p)
    /// as an element of the target context.
    pub fn map(&self, ctx: &FieldCtx, coeffs: &[u64]) -> FieldElement {
        debug_assert!(coeffs.len() <= self.e);
        let mut acc = ctx.zero();
        for (i, &c) in coeffs.iter().enumerate() {
            if c % self.p != 0 {
                let term = ctx.mul(&self.powers[i], &ctx.from_int(c));
                acc = ctx.add(&acc, &term);
            }
        }
        acc
    }
}

/// The lexicographically least monic irreducible polynomial of degree `d`
/// with coefficients in the (full) field of `ctx`, as `d + 1` coefficients,
/// constant term first. Tuple order: `(c_0, c_1, ..., c_{d-1})` compared
/// coordinate by coordinate, each coordinate ordered by element index.
pub fn least_irreducible(ctx: &FieldCtx, d: usize) -> Vec<FieldElement> {
    assert!(d >= 1);
    if d == 1 {
        return vec![ctx.zero(), ctx.one()];
    }
    let q = ctx
        .order_u64()
        .expect("coefficient field too large for irreducibility search");
    // Odometer over (c_0, ..., c_{d-1}) in lexicographic order: c_0 is the
    // most significant coordinate.
    let mut digits = vec![0u64; d];
    loop {
        let mut f: Vec<FieldElement> = digits
            .iter()
            .map(|&i| ctx.element_from_index(i))
            .collect();
        f.push(ctx.one());
        if is_irreducible(ctx, &f) {
            return f;
        }
        let mut pos = d;
        loop {
            if pos == 0 {
                unreachable!("irreducible polynomials of every degree exist");
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < q {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// Irreducibility over the full field of `ctx` (order `q`): a monic `f` of
/// degree `d >= 2` is irreducible iff `gcd(f, x^{q^k} - x)` is constant for
/// all `k <= d/2`, since any proper factor of degree `k` divides
/// `x^{q^k} - x`.
pub fn is_irreducible(ctx: &FieldCtx, f: &[FieldElement]) -> bool {
    let d = f.len() - 1;
    debug_assert!(d >= 2);
    debug_assert!(f[d] == ctx.one());
    let q = ctx
        .order_u64()
        .expect("coefficient field too large for irreducibility search");
    if ctx.is_zero(&f[0]) {
        return false; // divisible by x
    }
    // x mod f
    let mut r = vec![ctx.zero(), ctx.one()];
    let x = r.clone();
    for _ in 1..=(d / 2) {
        r = ctx_poly::pow_mod(ctx, &r, q, f);
        let diff = ctx_poly::sub(ctx, &r, &x);
        let g = ctx_poly::gcd(ctx, f, &diff);
        if ctx_poly::degree(&g).is_some_and(|dg| dg >= 1) {
            return false;
        }
    }
    true
}

/// Dense univariate polynomial helpers with coefficients in a [`FieldCtx`].
pub(crate) mod ctx_poly {
    use super::{FieldCtx, FieldElement};

    pub fn trim(ctx: &FieldCtx, a: &mut Vec<FieldElement>) {
        while a.last().is_some_and(|c| ctx.is_zero(c)) {
            a.pop();
        }
    }

    pub fn degree(a: &[FieldElement]) -> Option<usize> {
        if a.is_empty() {
            None
        } else {
            Some(a.len() - 1)
        }
    }

    pub fn sub(ctx: &FieldCtx, a: &[FieldElement], b: &[FieldElement]) -> Vec<FieldElement> {
        let n = a.len().max(b.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let x = a.get(i).cloned().unwrap_or_else(|| ctx.zero());
            let y = b.get(i).cloned().unwrap_or_else(|| ctx.zero());
            out.push(ctx.sub(&x, &y));
        }
        trim(ctx, &mut out);
        out
    }

    pub fn mul(ctx: &FieldCtx, a: &[FieldElement], b: &[FieldElement]) -> Vec<FieldElement> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![ctx.zero(); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            if ctx.is_zero(x) {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                let term = ctx.mul(x, y);
                out[i + j] = ctx.add(&out[i + j], &term);
            }
        }
        trim(ctx, &mut out);
        out
    }

    /// Remainder of `a` by nonzero `b`.
    pub fn rem(ctx: &FieldCtx, a: &[FieldElement], b: &[FieldElement]) -> Vec<FieldElement> {
        let mut r: Vec<FieldElement> = a.to_vec();
        trim(ctx, &mut r);
        let db = degree(b).expect("division by zero polynomial");
        let lead_inv = ctx.inv(&b[db]).expect("nonzero leading coefficient");
        while let Some(dr) = degree(&r) {
            if dr < db {
                break;
            }
            let factor = ctx.mul(&r[dr], &lead_inv);
            for (i, bc) in b.iter().enumerate().take(db + 1) {
                let t = ctx.mul(&factor, bc);
                let idx = dr - db + i;
                r[idx] = ctx.sub(&r[idx], &t);
            }
            trim(ctx, &mut r);
        }
        r
    }

    pub fn gcd(ctx: &FieldCtx, a: &[FieldElement], b: &[FieldElement]) -> Vec<FieldElement> {
        let mut x = a.to_vec();
        let mut y = b.to_vec();
        trim(ctx, &mut x);
        trim(ctx, &mut y);
        while !y.is_empty() {
            let r = rem(ctx, &x, &y);
            x = y;
            y = r;
        }
        x
    }

    /// `a^e mod f` by square and multiply.
    pub fn pow_mod(
        ctx: &FieldCtx,
        a: &[FieldElement],
        mut e: u64,
        f: &[FieldElement],
    ) -> Vec<FieldElement> {
        let mut base = rem(ctx, a, f);
        let mut acc = vec![ctx.one()];
        while e > 0 {
            if e & 1 == 1 {
                let prod = mul(ctx, &acc, &base);
                acc = rem(ctx, &prod, f);
            }
            let sq = mul(ctx, &base, &base);
            base = rem(ctx, &sq, f);
            e >>= 1;
        }
        acc
    }
}

/// Polynomial helpers over the prime field with raw `u64` coefficients,
/// used for inversion inside a context (where elements are themselves the
/// polynomials being inverted).
mod fp_poly {
    pub fn degree(a: &[u64]) -> Option<usize> {
        a.iter().rposition(|&c| c != 0)
    }

    pub fn inv_mod_p(p: u64, a: u64) -> u64 {
        // Fermat; p is prime and a nonzero mod p.
        pow_mod_p(p, a, p - 2)
    }

    fn pow_mod_p(p: u64, mut a: u64, mut e: u64) -> u64 {
        a %= p;
        debug_assert!(a != 0);
        let mut acc = 1u128;
        let mut base = a as u128;
        let p128 = p as u128;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base % p128;
            }
            base = base * base % p128;
            e >>= 1;
        }
        acc as u64
    }

    fn trim(a: &mut Vec<u64>) {
        while a.last() == Some(&0) {
            a.pop();
        }
    }

    fn mul(p: u64, a: &[u64], b: &[u64]) -> Vec<u64> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let p128 = p as u128;
        let mut out = vec![0u128; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] = (out[i + j] + x as u128 * y as u128) % p128;
            }
        }
        let mut out: Vec<u64> = out.into_iter().map(|c| c as u64).collect();
        trim(&mut out);
        out
    }

    fn sub(p: u64, a: &[u64], b: &[u64]) -> Vec<u64> {
        let n = a.len().max(b.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let x = a.get(i).copied().unwrap_or(0);
            let y = b.get(i).copied().unwrap_or(0);
            out.push((x + p - y) % p);
        }
        trim(&mut out);
        out
    }

    fn divmod(p: u64, a: &[u64], b: &[u64]) -> (Vec<u64>, Vec<u64>) {
        let mut r = a.to_vec();
        trim(&mut r);
        let db = degree(b).expect("division by zero polynomial");
        let lead_inv = inv_mod_p(p, b[db]);
        let mut quo = vec![0u64; r.len().saturating_sub(db)];
        while let Some(dr) = degree(&r) {
            if dr < db {
                break;
            }
            let factor = (r[dr] as u128 * lead_inv as u128 % p as u128) as u64;
            quo[dr - db] = factor;
            for (i, &bc) in b.iter().enumerate().take(db + 1) {
                let t = (factor as u128 * bc as u128 % p as u128) as u64;
                r[dr - db + i] = (r[dr - db + i] + p - t) % p;
            }
            trim(&mut r);
        }
        (quo, r)
    }

    /// Returns `(g, u, v)` with `g = gcd(a, b) = u*a + v*b`.
    pub fn ext_gcd(p: u64, a: &[u64], b: &[u64]) -> (Vec<u64>, Vec<u64>, Vec<u64>) {
        let mut r0 = a.to_vec();
        let mut r1 = b.to_vec();
        trim(&mut r0);
        trim(&mut r1);
        let mut u0 = vec![1u64];
        let mut u1: Vec<u64> = Vec::new();
        let mut v0: Vec<u64> = Vec::new();
        let mut v1 = vec![1u64];
        while !r1.is_empty() {
            let (q, r) = divmod(p, &r0, &r1);
            let qu = mul(p, &q, &u1);
            let qv = mul(p, &q, &v1);
            let nu = sub(p, &u0, &qu);
            let nv = sub(p, &v0, &qv);
            r0 = std::mem::replace(&mut r1, r);
            u0 = std::mem::replace(&mut u1, nu);
            v0 = std::mem::replace(&mut v1, nv);
        }
        (r0, u0, v0)
    }
}
