//! Symbolic fragment of the Grothendieck ring of varieties over `F_q`.
//!
//! A [`RingElement`] is an exact integer combination of basis symbols
//! `L^a * S_m`, where `L` is the class of the affine line and `S_m` the class
//! of `Spec F_{q^m}` (`S_1` is the unit). The basis multiplication law
//!
//! ```text
//! (L^a S_m) * (L^b S_m') = gcd(m, m') * L^{a+b} S_{lcm(m, m')}
//! ```
//!
//! comes from the tensor decomposition of composita of finite fields; its two
//! named special cases are `S_m^2 = m S_m` and `S_d S_m = d S_m` for `d | m`.
//!
//! The module also provides the closed-form constructors for the classes the
//! falsifier attacks (`Omega^n`, `X_k`, `Y_{k,m}`), the closed-point counts
//! `c_d`, affine-subspace counts `a_{n,i}`, and exact-rational measure
//! candidates with counting-measure evaluation.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KringError {
    #[error("mismatched base fields: q = {0} vs q = {1}")]
    MixedQ(u64, u64),
    #[error("Spec index must be >= 1")]
    BadSpecIndex,
    #[error("closed-point degree must be >= 1")]
    BadDegree,
    #[error("subspace dimension {i} out of range 0..={n}")]
    DimensionOutOfRange { i: u64, n: u64 },
    #[error("Y_{{k,m}} requires m not dividing k (got k = {k}, m = {m})")]
    YRequiresNonDivisor { k: u64, m: u64 },
    #[error("candidate assigns no value to S_{0}")]
    MissingSpecValue(u64),
    #[error("{0} is not a prime power")]
    NotPrimePower(u64),
}

/// Sorted list of the positive divisors of `n`.
pub fn divisors(n: u64) -> Vec<u64> {
    assert!(n >= 1);
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            small.push(d);
            if d != n / d {
                large.push(n / d);
            }
        }
        d += 1;
    }
    large.reverse();
    small.extend(large);
    small
}

/// Möbius function by trial-division factorization.
fn mobius(mut n: u64) -> i64 {
    debug_assert!(n >= 1);
    let mut mu = 1i64;
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            n /= d;
            if n % d == 0 {
                return 0;
            }
            mu = -mu;
        }
        d += 1;
    }
    if n > 1 {
        mu = -mu;
    }
    mu
}

/// `c_d`: the number of closed points of `A^1` over `F_q` with residue field
/// `F_{q^d}`, i.e. the number of monic irreducible polynomials of degree `d`:
/// `c_d = (1/d) * sum_{e | d} mobius(d/e) q^e`.
pub fn closed_point_count(q: u64, d: u64) -> Result<BigInt, KringError> {
    if d == 0 {
        return Err(KringError::BadDegree);
    }
    let qb = BigInt::from(q);
    let mut sum = BigInt::zero();
    for e in divisors(d) {
        let term = qb.pow(e as u32);
        sum += term * mobius(d / e);
    }
    let (quot, rem) = sum.div_rem(&BigInt::from(d));
    debug_assert!(rem.is_zero());
    Ok(quot)
}

/// Gaussian binomial `[n choose i]_q`: the number of `i`-dimensional linear
/// subspaces of `F_q^n`, by the `q`-Pascal recurrence.
pub fn gaussian_binomial(q: u64, n: u64, i: u64) -> BigInt {
    if i > n {
        return BigInt::zero();
    }
    let qb = BigInt::from(q);
    // row-by-row DP
    let mut row = vec![BigInt::one()];
    for _ in 1..=n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(BigInt::one());
        for j in 1..row.len() {
            let v = &row[j - 1] + qb.pow(j as u32) * &row[j];
            next.push(v);
        }
        next.push(BigInt::one());
        row = next;
    }
    row[i as usize].clone()
}

/// `a_{n,i} = q^{n-i} [n choose i]_q`: the number of `F_q`-rational
/// `i`-dimensional affine-linear subspaces of `A^n`.
pub fn affine_subspace_count(q: u64, n: u64, i: u64) -> Result<BigInt, KringError> {
    if i > n {
        return Err(KringError::DimensionOutOfRange { i, n });
    }
    Ok(BigInt::from(q).pow((n - i) as u32) * gaussian_binomial(q, n, i))
}

/// An exact integer combination of basis symbols `L^a S_m` over a fixed `q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RingElement {
    q: u64,
    terms: BTreeMap<(u32, u64), BigInt>,
}

impl RingElement {
    pub fn zero(q: u64) -> Self {
        RingElement {
            q,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(q: u64) -> Self {
        Self::term(q, 0, 1, BigInt::one()).unwrap()
    }

    /// `L`, the class of the affine line.
    pub fn lclass(q: u64) -> Self {
        Self::l_pow(q, 1)
    }

    pub fn l_pow(q: u64, a: u32) -> Self {
        Self::term(q, a, 1, BigInt::one()).unwrap()
    }

    /// `S_m`, the class of `Spec F_{q^m}`.
    pub fn spec_class(q: u64, m: u64) -> Result<Self, KringError> {
        Self::term(q, 0, m, BigInt::one())
    }

    /// A single term `coeff * L^a S_m`.
    pub fn term(q: u64, a: u32, m: u64, coeff: BigInt) -> Result<Self, KringError> {
        if m == 0 {
            return Err(KringError::BadSpecIndex);
        }
        let mut terms = BTreeMap::new();
        if !coeff.is_zero() {
            terms.insert((a, m), coeff);
        }
        Ok(RingElement { q, terms })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Iterates `(l_exp, spec_m, coeff)` in normal-form order.
    pub fn terms(&self) -> impl Iterator<Item = (u32, u64, &BigInt)> {
        self.terms.iter().map(|(&(a, m), c)| (a, m, c))
    }

    fn insert(terms: &mut BTreeMap<(u32, u64), BigInt>, key: (u32, u64), coeff: BigInt) {
        if coeff.is_zero() {
            return;
        }
        match terms.entry(key) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += coeff;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    fn check_q(&self, other: &Self) -> Result<(), KringError> {
        if self.q != other.q {
            Err(KringError::MixedQ(self.q, other.q))
        } else {
            Ok(())
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, KringError> {
        self.check_q(other)?;
        let mut terms = self.terms.clone();
        for (&key, coeff) in &other.terms {
            Self::insert(&mut terms, key, coeff.clone());
        }
        Ok(RingElement { q: self.q, terms })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, KringError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        RingElement {
            q: self.q,
            terms: self.terms.iter().map(|(&k, c)| (k, -c)).collect(),
        }
    }

    pub fn scale(&self, factor: &BigInt) -> Self {
        if factor.is_zero() {
            return Self::zero(self.q);
        }
        RingElement {
            q: self.q,
            terms: self.terms.iter().map(|(&k, c)| (k, c * factor)).collect(),
        }
    }

    /// Product under the basis law
    /// `(a, m) * (b, m') = gcd(m, m') * (a + b, lcm(m, m'))`.
    pub fn mul(&self, other: &Self) -> Result<Self, KringError> {
        self.check_q(other)?;
        let mut terms = BTreeMap::new();
        for (&(a, m), ca) in &self.terms {
            for (&(b, mp), cb) in &other.terms {
                let g = m.gcd(&mp);
                let l = m.lcm(&mp);
                let coeff = ca * cb * BigInt::from(g);
                Self::insert(&mut terms, (a + b, l), coeff);
            }
        }
        Ok(RingElement { q: self.q, terms })
    }

    /// Exact counting-measure value: `sum coeff * q^{n a} * (m | n ? m : 0)`.
    pub fn eval_counting(&self, n: u64) -> BigInt {
        let qb = BigInt::from(self.q);
        let mut sum = BigInt::zero();
        for (&(a, m), coeff) in &self.terms {
            if n % m != 0 {
                continue;
            }
            let exp = (a as u64)
                .checked_mul(n)
                .filter(|&e| e <= u32::MAX as u64)
                .expect("L-exponent times n exceeds the exact-evaluation range");
            let power = qb.pow(exp as u32);
            sum += coeff * power * BigInt::from(m);
        }
        sum
    }

    /// Exact evaluation at `L = t`, `S_m = spec(m)`.
    pub fn eval_rational<F>(&self, t: &BigRational, mut spec: F) -> Result<BigRational, KringError>
    where
        F: FnMut(u64) -> Option<BigRational>,
    {
        let mut sum = BigRational::zero();
        for (&(a, m), coeff) in &self.terms {
            let s = spec(m).ok_or(KringError::MissingSpecValue(m))?;
            if s.is_zero() {
                continue;
            }
            let tp = pow_rational(t, a);
            sum += BigRational::from(coeff.clone()) * tp * s;
        }
        Ok(sum)
    }

    /// Coefficients (ascending in the `L`-exponent) when the element is a
    /// pure `L`-polynomial, i.e. every term has `m = 1`.
    pub fn as_l_polynomial(&self) -> Option<Vec<BigInt>> {
        let mut deg = 0u32;
        for &(a, m) in self.terms.keys() {
            if m != 1 {
                return None;
            }
            deg = deg.max(a);
        }
        let mut coeffs = vec![BigInt::zero(); deg as usize + 1];
        for (&(a, _), c) in &self.terms {
            coeffs[a as usize] = c.clone();
        }
        Some(coeffs)
    }

    /// Serializes to the documented list-of-terms form with decimal-string
    /// coefficients.
    pub fn to_json_terms(&self) -> serde_json::Value {
        let list: Vec<serde_json::Value> = self
            .terms()
            .map(|(a, m, c)| {
                serde_json::json!({
                    "l_exp": a,
                    "spec_m": m,
                    "coeff": c.to_string(),
                })
            })
            .collect();
        serde_json::Value::Array(list)
    }

    pub fn from_json_terms(q: u64, value: &serde_json::Value) -> Result<Self, String> {
        let arr = value.as_array().ok_or("expected a JSON array of terms")?;
        let mut out = RingElement::zero(q);
        for item in arr {
            let a = item
                .get("l_exp")
                .and_then(|v| v.as_u64())
                .filter(|&a| a <= u32::MAX as u64)
                .ok_or("term missing integer l_exp")?;
            let m = item
                .get("spec_m")
                .and_then(|v| v.as_u64())
                .ok_or("term missing integer spec_m")?;
            let coeff = item
                .get("coeff")
                .and_then(|v| v.as_str())
                .ok_or("term missing string coeff")?
                .parse::<BigInt>()
                .map_err(|e| format!("bad coefficient: {e}"))?;
            let term = RingElement::term(q, a as u32, m, coeff).map_err(|e| e.to_string())?;
            out = out.add(&term).map_err(|e| e.to_string())?;
        }
        Ok(out)
    }
}

fn pow_rational(t: &BigRational, e: u32) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= t;
    }
    acc
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // descending L-exponent, then ascending Spec index
        let mut keys: Vec<(u32, u64)> = self.terms.keys().copied().collect();
        keys.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
        for (pos, &(a, m)) in keys.iter().enumerate() {
            let coeff = &self.terms[&(a, m)];
            let mag = coeff.abs();
            if pos == 0 {
                if coeff.is_negative() {
                    write!(f, "-")?;
                }
            } else if coeff.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut factors: Vec<String> = Vec::new();
            if !mag.is_one() || (a == 0 && m == 1) {
                factors.push(mag.to_string());
            }
            match a {
                0 => {}
                1 => factors.push("L".to_string()),
                _ => factors.push(format!("L^{a}")),
            }
            if m != 1 {
                factors.push(format!("S_{m}"));
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

/// `[Omega^n]` by the inclusion–exclusion recursion
/// `[Omega^n] = L^n - sum_{i=0}^{n-1} a_{n,i} [Omega^i]`, with `[Omega^0] = 1`
/// so that rational points are removed too.
pub fn omega_class_recursive(q: u64, n: u64) -> RingElement {
    assert!(n >= 1);
    let mut omegas: Vec<RingElement> = vec![RingElement::one(q)];
    for j in 1..=n {
        let mut acc = RingElement::l_pow(q, j as u32);
        for (i, omega_i) in omegas.iter().enumerate() {
            let a_ji = affine_subspace_count(q, j, i as u64).unwrap();
            acc = acc.sub(&omega_i.scale(&a_ji)).unwrap();
        }
        omegas.push(acc);
    }
    omegas.pop().unwrap()
}

/// `[Omega^n]` by the product form `prod_{i=1}^{n} (L - q^i)`.
pub fn omega_class_product(q: u64, n: u64) -> RingElement {
    assert!(n >= 1);
    let mut by_product = RingElement::one(q);
    let qb = BigInt::from(q);
    for i in 1..=n {
        let factor = RingElement::lclass(q)
            .sub(&RingElement::term(q, 0, 1, qb.pow(i as u32)).unwrap())
            .unwrap();
        by_product = by_product.mul(&factor).unwrap();
    }
    by_product
}

/// `[Omega^n]`, computed by both routes and checked for exact agreement.
pub fn omega_class(q: u64, n: u64) -> RingElement {
    let by_recursion = omega_class_recursive(q, n);
    let by_product = omega_class_product(q, n);
    assert_eq!(
        by_recursion, by_product,
        "Omega recursion must reproduce the product form"
    );
    by_product
}

/// The coefficients (ascending) of `P_n`, the monic degree-`n` polynomial
/// with `[Omega^n] = P_n(L)`.
pub fn omega_l_polynomial(q: u64, n: u64) -> Vec<BigInt> {
    omega_class(q, n)
        .as_l_polynomial()
        .expect("Omega classes are pure L-polynomials")
}

/// `[X_k] = L - sum_{d | k} c_d S_d`: the affine line minus every closed
/// point whose residue field embeds in `F_{q^k}`.
pub fn class_x_k(q: u64, k: u64) -> RingElement {
    assert!(k >= 1);
    let mut acc = RingElement::lclass(q);
    for d in divisors(k) {
        let c_d = closed_point_count(q, d).unwrap();
        let term = RingElement::term(q, 0, d, c_d).unwrap();
        acc = acc.sub(&term).unwrap();
    }
    acc
}

/// `[Y_{k,m}] = [X_k] - c_m S_m` for `m` not dividing `k`: additionally
/// removes the closed points of degree exactly `m`.
pub fn class_y_km(q: u64, k: u64, m: u64) -> Result<RingElement, KringError> {
    if m == 0 {
        return Err(KringError::BadSpecIndex);
    }
    if k % m == 0 {
        return Err(KringError::YRequiresNonDivisor { k, m });
    }
    let c_m = closed_point_count(q, m)?;
    class_x_k(q, k).sub(&RingElement::term(q, 0, m, c_m)?)
}

/// An exact-rational assignment `L -> t`, `S_m -> s_m`; the object the
/// falsifier attacks. Only finitely many `s_m` are pinned down; the rest are
/// whatever the checks can force.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasureCandidate {
    pub t: BigRational,
    pub s: BTreeMap<u64, BigRational>,
}

impl MeasureCandidate {
    /// The counting measure of `F_{q^n}`: `t = q^n`, `s_m = m` when `m | n`
    /// and `0` otherwise, pinned for all `m <= max_m`.
    pub fn counting(q: u64, n: u64, max_m: u64) -> Self {
        assert!(n >= 1);
        let t = BigRational::from_integer(BigInt::from(q).pow(n as u32));
        let s = (1..=max_m)
            .map(|m| (m, BigRational::from_integer(BigInt::from(counting_spec_value(n, m)))))
            .collect();
        MeasureCandidate { t, s }
    }

    pub fn spec_value(&self, m: u64) -> Option<&BigRational> {
        self.s.get(&m)
    }

    /// Exact evaluation; errors when the element mentions an `S_m` the
    /// candidate leaves unassigned.
    pub fn eval(&self, elem: &RingElement) -> Result<BigRational, KringError> {
        elem.eval_rational(&self.t, |m| {
            if m == 1 {
                Some(
                    self.s
                        .get(&1)
                        .cloned()
                        .unwrap_or_else(BigRational::one),
                )
            } else {
                self.s.get(&m).cloned()
            }
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let s: serde_json::Map<String, serde_json::Value> = self
            .s
            .iter()
            .map(|(m, v)| (m.to_string(), serde_json::Value::String(v.to_string())))
            .collect();
        serde_json::json!({ "t": self.t.to_string(), "s": s })
    }

    /// Parses `{"t": "...", "s": {"m": "...", ...}}`. Rationals are decimal
    /// or `num/den` strings; bare JSON integers are also accepted.
    pub fn from_json(value: &serde_json::Value) -> Result<Self, String> {
        let obj = value.as_object().ok_or("candidate must be a JSON object")?;
        let t = parse_rational(obj.get("t").ok_or("candidate missing field t")?)?;
        let mut s = BTreeMap::new();
        if let Some(sv) = obj.get("s") {
            let smap = sv.as_object().ok_or("field s must be an object")?;
            for (k, v) in smap {
                let m: u64 = k.parse().map_err(|_| format!("bad Spec index key {k:?}"))?;
                if m == 0 {
                    return Err("Spec index keys start at 1".to_string());
                }
                s.insert(m, parse_rational(v)?);
            }
        }
        for key in obj.keys() {
            if key != "t" && key != "s" {
                return Err(format!("unknown candidate field {key:?}"));
            }
        }
        Ok(MeasureCandidate { t, s })
    }
}

/// The value the counting measure of `F_{q^n}` assigns to `S_m`.
pub fn counting_spec_value(n: u64, m: u64) -> u64 {
    if n % m == 0 {
        m
    } else {
        0
    }
}

fn parse_rational(v: &serde_json::Value) -> Result<BigRational, String> {
    match v {
        serde_json::Value::String(s) => s
            .trim()
            .parse::<BigRational>()
            .map_err(|e| format!("bad rational {s:?}: {e}")),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(BigRational::from_integer(BigInt::from(i)))
            } else {
                Err(format!("non-integer JSON number {n}; use a \"num/den\" string"))
            }
        }
        other => Err(format!("expected a rational, got {other}")),
    }
}

/// Convenience wrapper: the counting measure as a total evaluation.
pub fn counting_measure(q: u64, n: u64, max_m: u64) -> MeasureCandidate {
    MeasureCandidate::counting(q, n, max_m)
}

/// Which homomorphism law a violation breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HomLaw {
    /// `s_1 = 1` (ring homomorphisms preserve the unit).
    Unit,
    /// `s_a s_b = gcd(a,b) s_{lcm(a,b)}`.
    Product,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HomViolation {
    pub law: HomLaw,
    pub pair: (u64, u64),
    pub lhs: BigRational,
    pub rhs: BigRational,
}

impl fmt::Display for HomViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.law {
            HomLaw::Unit => write!(f, "s_1 = {} but a ring homomorphism sends 1 to 1", self.lhs),
            HomLaw::Product => {
                let (a, b) = self.pair;
                let g = a.gcd(&b);
                let l = a.lcm(&b);
                write!(
                    f,
                    "s_{a}*s_{b} = {} but gcd({a},{b})*s_{l} = {g}*s_{l} = {}",
                    self.lhs, self.rhs
                )
            }
        }
    }
}

impl HomViolation {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "law": match self.law { HomLaw::Unit => "unit", HomLaw::Product => "product" },
            "pair": [self.pair.0, self.pair.1],
            "lhs": self.lhs.to_string(),
            "rhs": self.rhs.to_string(),
        })
    }
}

/// Checks `s_a s_b = gcd(a,b) s_{lcm(a,b)}` on the given pairs, skipping
/// pairs whose values the candidate does not pin down (`s_1` defaults to 1).
/// The `(m, m)` pairs encode `s_m^2 = m s_m`, which forces `s_m` into
/// `{0, m}`; divisor pairs `(d, m)` with `s_m = m` force `s_d = d`.
pub fn hom_consistency(cand: &MeasureCandidate, pairs: &[(u64, u64)]) -> Vec<HomViolation> {
    let mut violations = Vec::new();
    let lookup = |m: u64| -> Option<BigRational> {
        if m == 1 {
            Some(
                cand.s
                    .get(&1)
                    .cloned()
                    .unwrap_or_else(BigRational::one),
            )
        } else {
            cand.s.get(&m).cloned()
        }
    };
    if let Some(s1) = cand.s.get(&1) {
        if !s1.is_one() {
            violations.push(HomViolation {
                law: HomLaw::Unit,
                pair: (1, 1),
                lhs: s1.clone(),
                rhs: BigRational::one(),
            });
        }
    }
    for &(a, b) in pairs {
        if a == 0 || b == 0 {
            continue;
        }
        let (sa, sb, sl) = match (lookup(a), lookup(b), lookup(a.lcm(&b))) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => continue,
        };
        let lhs = &sa * &sb;
        let rhs = BigRational::from_integer(BigInt::from(a.gcd(&b))) * sl;
        if lhs != rhs {
            violations.push(HomViolation {
                law: HomLaw::Product,
                pair: (a, b),
                lhs,
                rhs,
            });
        }
    }
    violations
}

/// All pairs `(a, b)` with `a <= b` drawn from the candidate's assigned
/// indices together with 1 — the canonical grid [`hom_consistency`] is run on.
pub fn default_hom_pairs(cand: &MeasureCandidate) -> Vec<(u64, u64)> {
    let mut idx: Vec<u64> = cand.s.keys().copied().collect();
    if !idx.contains(&1) {
        idx.insert(0, 1);
    }
    let mut pairs = Vec::new();
    for (i, &a) in idx.iter().enumerate() {
        for &b in &idx[i..] {
            pairs.push((a, b));
        }
    }
    pairs
}

/// A uniformly random sparse element for property campaigns.
pub fn random_element<R: Rng>(
    rng: &mut R,
    q: u64,
    max_l_exp: u32,
    max_spec: u64,
    max_terms: usize,
    coeff_bound: i64,
) -> RingElement {
    let n_terms = rng.gen_range(0..=max_terms);
    let mut out = RingElement::zero(q);
    for _ in 0..n_terms {
        let a = rng.gen_range(0..=max_l_exp);
        let m = rng.gen_range(1..=max_spec);
        let mut c = rng.gen_range(-coeff_bound..=coeff_bound);
        if c == 0 {
            c = 1;
        }
        let term = RingElement::term(q, a, m, BigInt::from(c)).unwrap();
        out = out.add(&term).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rat(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    #[test]
    fn basis_multiplication_law() {
        let q = 2;
        let s = |m: u64| RingElement::spec_class(q, m).unwrap();
        // S_m * S_m = m S_m
        for m in 1..=6 {
            let sq = s(m).mul(&s(m)).unwrap();
            assert_eq!(sq, s(m).scale(&BigInt::from(m)));
        }
        // S_d * S_m = d S_m when d | m
        assert_eq!(s(2).mul(&s(6)).unwrap(), s(6).scale(&BigInt::from(2)));
        assert_eq!(s(3).mul(&s(6)).unwrap(), s(6).scale(&BigInt::from(3)));
        // S_2 * S_3 = S_6
        assert_eq!(s(2).mul(&s(3)).unwrap(), s(6));
        // L-exponents add
        let l2s2 = RingElement::term(q, 2, 2, BigInt::one()).unwrap();
        let l1s3 = RingElement::term(q, 1, 3, BigInt::one()).unwrap();
        assert_eq!(
            l2s2.mul(&l1s3).unwrap(),
            RingElement::term(q, 3, 6, BigInt::one()).unwrap()
        );
    }

    #[test]
    fn mixed_q_is_rejected() {
        let a = RingElement::lclass(2);
        let b = RingElement::lclass(3);
        assert_eq!(a.add(&b), Err(KringError::MixedQ(2, 3)));
        assert_eq!(a.mul(&b), Err(KringError::MixedQ(2, 3)));
    }

    #[test]
    fn closed_point_counts() {
        for q in [2u64, 3, 5, 7] {
            assert_eq!(closed_point_count(q, 1).unwrap(), BigInt::from(q));
        }
        assert_eq!(closed_point_count(2, 2).unwrap(), BigInt::from(1));
        assert_eq!(closed_point_count(2, 3).unwrap(), BigInt::from(2));
        assert_eq!(closed_point_count(2, 4).unwrap(), BigInt::from(3));
        assert_eq!(closed_point_count(3, 2).unwrap(), BigInt::from(3));
        assert!(closed_point_count(2, 0).is_err());
    }

    #[test]
    fn divisor_sum_identity() {
        // sum_{d | k} d c_d = q^k
        for q in [2u64, 3, 4, 5] {
            for k in 1..=12u64 {
                let mut sum = BigInt::zero();
                for d in divisors(k) {
                    sum += closed_point_count(q, d).unwrap() * BigInt::from(d);
                }
                assert_eq!(sum, BigInt::from(q).pow(k as u32), "q={q} k={k}");
            }
        }
    }

    #[test]
    fn degree_bound_on_closed_points() {
        // d c_d <= q^d - 1 for d > 1
        for q in [2u64, 3, 4, 5] {
            for d in 2..=12u64 {
                let lhs = closed_point_count(q, d).unwrap() * BigInt::from(d);
                let rhs = BigInt::from(q).pow(d as u32) - BigInt::one();
                assert!(lhs <= rhs, "q={q} d={d}");
            }
        }
    }

    #[test]
    fn affine_subspace_counts() {
        assert_eq!(affine_subspace_count(2, 2, 2).unwrap(), BigInt::one());
        assert_eq!(affine_subspace_count(5, 3, 3).unwrap(), BigInt::one());
        assert_eq!(affine_subspace_count(2, 2, 1).unwrap(), BigInt::from(6));
        assert_eq!(affine_subspace_count(2, 2, 0).unwrap(), BigInt::from(4));
        assert!(affine_subspace_count(2, 2, 3).is_err());
    }

    #[test]
    fn affine_lines_in_the_plane_by_brute_force() {
        // Independent oracle for a_{2,1} over F_2 and F_3: enumerate all
        // lines c1 x + c2 y = c0 and dedupe by solution set.
        for q in [2u64, 3] {
            let pts: Vec<(u64, u64)> = (0..q)
                .flat_map(|x| (0..q).map(move |y| (x, y)))
                .collect();
            let mut seen = std::collections::BTreeSet::new();
            for c1 in 0..q {
                for c2 in 0..q {
                    if c1 == 0 && c2 == 0 {
                        continue;
                    }
                    for c0 in 0..q {
                        let sol: Vec<(u64, u64)> = pts
                            .iter()
                            .copied()
                            .filter(|&(x, y)| (c1 * x + c2 * y) % q == c0)
                            .collect();
                        seen.insert(sol);
                    }
                }
            }
            assert_eq!(
                BigInt::from(seen.len()),
                affine_subspace_count(q, 2, 1).unwrap(),
                "q={q}"
            );
        }
    }

    #[test]
    fn omega_class_small_cases() {
        // Omega^1 = L - q
        let o1 = omega_class(2, 1);
        let expected = RingElement::lclass(2)
            .sub(&RingElement::term(2, 0, 1, BigInt::from(2)).unwrap())
            .unwrap();
        assert_eq!(o1, expected);

        // Omega^2 over F_2 = L^2 - 6L + 8
        let coeffs = omega_l_polynomial(2, 2);
        assert_eq!(coeffs, vec![BigInt::from(8), BigInt::from(-6), BigInt::one()]);

        // q^d is a root of P_2 for d = 1, 2
        for d in 1..=2u32 {
            let x = BigInt::from(2).pow(d);
            let mut val = BigInt::zero();
            for (i, c) in coeffs.iter().enumerate() {
                val += c * x.pow(i as u32);
            }
            assert!(val.is_zero());
        }
    }

    #[test]
    fn omega_recursion_matches_product_everywhere_tested() {
        for q in [2u64, 3, 4, 5] {
            for n in 1..=4 {
                let _ = omega_class(q, n); // panics on mismatch
            }
        }
    }

    #[test]
    fn x_k_and_y_km_classes() {
        let x1 = class_x_k(2, 1);
        let expected = RingElement::lclass(2)
            .sub(&RingElement::term(2, 0, 1, BigInt::from(2)).unwrap())
            .unwrap();
        assert_eq!(x1, expected);

        // X_2 over F_2 = L - 2 S_1 - S_2
        let x2 = class_x_k(2, 2);
        let mut want = RingElement::lclass(2);
        want = want
            .sub(&RingElement::term(2, 0, 1, BigInt::from(2)).unwrap())
            .unwrap();
        want = want
            .sub(&RingElement::term(2, 0, 2, BigInt::one()).unwrap())
            .unwrap();
        assert_eq!(x2, want);

        // counting measure n = 3 of X_2 over F_2: 8 - 2 = 6
        assert_eq!(x2.eval_counting(3), BigInt::from(6));

        // Y_{1,2} over F_2 = L - 2 S_1 - S_2, zero under n = 1 and n = 2
        let y12 = class_y_km(2, 1, 2).unwrap();
        assert_eq!(y12, want);
        assert_eq!(y12.eval_counting(1), BigInt::zero());
        assert_eq!(y12.eval_counting(2), BigInt::zero());

        assert_eq!(
            class_y_km(2, 4, 2),
            Err(KringError::YRequiresNonDivisor { k: 4, m: 2 })
        );
    }

    #[test]
    fn counting_measure_values() {
        let mu = MeasureCandidate::counting(2, 2, 8);
        assert_eq!(mu.t, rat(4));
        assert_eq!(mu.eval(&RingElement::lclass(2)).unwrap(), rat(4));
        assert_eq!(
            mu.eval(&RingElement::spec_class(2, 2).unwrap()).unwrap(),
            rat(2)
        );
        assert_eq!(
            mu.eval(&RingElement::spec_class(2, 4).unwrap()).unwrap(),
            rat(0)
        );
        assert_eq!(mu.eval(&omega_class(2, 2)).unwrap(), rat(0));
        // eval_counting agrees
        assert_eq!(omega_class(2, 2).eval_counting(2), BigInt::zero());
        assert_eq!(omega_class(2, 2).eval_counting(3), BigInt::from(24));
    }

    #[test]
    fn hom_consistency_flags_bad_candidates() {
        let mu = MeasureCandidate::counting(2, 2, 24);
        let pairs: Vec<(u64, u64)> = (1..=12u64)
            .flat_map(|a| (a..=12).map(move |b| (a, b)))
            .collect();
        assert!(hom_consistency(&mu, &pairs).is_empty());

        let mut bad = MeasureCandidate::counting(2, 2, 6);
        bad.s.insert(2, rat(1));
        let v = hom_consistency(&bad, &[(2, 2)]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].pair, (2, 2));
        assert_eq!(v[0].lhs, rat(1));
        assert_eq!(v[0].rhs, rat(2));

        let mut bad2 = MeasureCandidate::counting(2, 2, 6);
        bad2.s.insert(4, rat(4));
        bad2.s.insert(2, rat(0));
        let v2 = hom_consistency(&bad2, &default_hom_pairs(&bad2));
        assert!(v2.iter().any(|v| v.pair == (2, 4)));
    }

    #[test]
    fn candidate_json_round_trip() {
        let text = r#"{"t": "7/2", "s": {"2": "2", "3": "0"}}"#;
        let value: serde_json::Value = serde_json::from_str(text).unwrap();
        let cand = MeasureCandidate::from_json(&value).unwrap();
        assert_eq!(cand.t, BigRational::new(BigInt::from(7), BigInt::from(2)));
        let back = cand.to_json();
        let cand2 = MeasureCandidate::from_json(&back).unwrap();
        assert_eq!(cand, cand2);

        assert!(MeasureCandidate::from_json(
            &serde_json::json!({"t": "1", "s": {"0": "1"}})
        )
        .is_err());
        assert!(MeasureCandidate::from_json(&serde_json::json!({"t": 2.5})).is_err());
        assert!(MeasureCandidate::from_json(&serde_json::json!({"x": "1"})).is_err());
    }

    #[test]
    fn ring_element_json_round_trip() {
        let e = class_x_k(2, 6);
        let json = e.to_json_terms();
        let back = RingElement::from_json_terms(2, &json).unwrap();
        assert_eq!(e, back);
    }

    #[test]
    fn display_formatting() {
        assert_eq!(omega_class(2, 2).to_string(), "L^2 - 6*L + 8");
        assert_eq!(class_x_k(2, 2).to_string(), "L - 2 - S_2");
        assert_eq!(RingElement::zero(2).to_string(), "0");
    }

    proptest! {
        #[test]
        fn ring_axioms(seed in 0u64..u64::MAX) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let q = 2;
            let x = random_element(&mut rng, q, 3, 6, 4, 5);
            let y = random_element(&mut rng, q, 3, 6, 4, 5);
            let z = random_element(&mut rng, q, 3, 6, 4, 5);

            let assoc_l = x.mul(&y).unwrap().mul(&z).unwrap();
            let assoc_r = x.mul(&y.mul(&z).unwrap()).unwrap();
            prop_assert_eq!(assoc_l, assoc_r);

            prop_assert_eq!(x.mul(&y).unwrap(), y.mul(&x).unwrap());

            let distrib_l = x.mul(&y.add(&z).unwrap()).unwrap();
            let distrib_r = x.mul(&y).unwrap().add(&x.mul(&z).unwrap()).unwrap();
            prop_assert_eq!(distrib_l, distrib_r);

            let unit = RingElement::one(q);
            prop_assert_eq!(x.mul(&unit).unwrap(), x.clone());

            // counting evaluation is a ring homomorphism
            for n in 1..=4u64 {
                prop_assert_eq!(
                    x.add(&y).unwrap().eval_counting(n),
                    x.eval_counting(n) + y.eval_counting(n)
                );
                prop_assert_eq!(
                    x.mul(&y).unwrap().eval_counting(n),
                    x.eval_counting(n) * y.eval_counting(n)
                );
            }
        }
    }
}
