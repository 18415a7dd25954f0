//! Exact symbolic polynomial arithmetic over moment symbols.
//!
//! A [`MomentPoly`] is a polynomial in the centroid coordinates `q`, `p`, the
//! Planck constant `hbar`, the energy symbol `E`, a formal imaginary unit `i`
//! (with `i^2 = -1`), and statistical-moment symbols `G[a,b]` / `C[a,b]`.
//! Coefficients are arbitrary-precision rationals, so all algebra in this
//! crate is exact; floating point enters only at evaluation time.
//!
//! Canonical-form conventions, applied on every construction:
//! * zero coefficients are absent,
//! * powers of `i` are reduced mod 4 into a sign and an i-parity bit,
//! * a moment factor of order 0 is the constant 1 and is dropped,
//! * a moment factor of order 1 is the constant 0 and kills its monomial
//!   (moments are centered),
//! * monomials are kept sorted by a fixed total order.

mod text;

pub use text::ParseError;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Shorthand for an exact rational from machine integers.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Exact factorial as a big integer.
pub fn factorial(n: u32) -> BigInt {
    let mut acc = BigInt::one();
    for k in 2..=u64::from(n) {
        acc *= k;
    }
    acc
}

/// Exact binomial coefficient; zero when `k > n`.
pub fn binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for j in 0..k {
        acc = acc * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    acc
}

/// Exact square root of a rational, when one exists.
pub fn rational_sqrt(x: &BigRational) -> Option<BigRational> {
    if x.is_negative() {
        return None;
    }
    let num = x.numer().sqrt();
    let den = x.denom().sqrt();
    if &(&num * &num) == x.numer() && &(&den * &den) == x.denom() {
        Some(BigRational::new(num, den))
    } else {
        None
    }
}

/// Whether a moment symbol belongs to the quantum or the classical algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MomentKind {
    Quantum,
    Classical,
}

/// Index pair identifying a moment symbol `G[a,b]` or `C[a,b]`.
///
/// `a` counts centered momentum factors and `b` centered position factors;
/// `a + b` is the order of the moment. Keys of order 0 denote the constant 1
/// and keys of order 1 denote 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MomentKey {
    pub a: u32,
    pub b: u32,
    pub kind: MomentKind,
}

impl MomentKey {
    pub fn quantum(a: u32, b: u32) -> Self {
        Self { a, b, kind: MomentKind::Quantum }
    }

    pub fn classical(a: u32, b: u32) -> Self {
        Self { a, b, kind: MomentKind::Classical }
    }

    pub fn new(kind: MomentKind, a: u32, b: u32) -> Self {
        Self { a, b, kind }
    }

    pub fn order(&self) -> u32 {
        self.a + self.b
    }

    pub fn with_kind(self, kind: MomentKind) -> Self {
        Self { kind, ..self }
    }
}

impl fmt::Display for MomentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = match self.kind {
            MomentKind::Quantum => 'G',
            MomentKind::Classical => 'C',
        };
        write!(f, "{}[{},{}]", letter, self.a, self.b)
    }
}

/// A monomial signature: symbol powers plus a sorted multiset of moment keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    pub q_pow: u32,
    pub p_pow: u32,
    pub hbar_pow: u32,
    pub energy_pow: u32,
    /// 0 or 1 after canonicalization; the mod-4 sign lives in the coefficient.
    pub i_pow: u8,
    /// Sorted, may repeat; every entry has order >= 2.
    pub keys: Vec<MomentKey>,
}

impl Monomial {
    fn unit() -> Self {
        Self::default()
    }

    pub fn is_unit(&self) -> bool {
        self == &Self::unit()
    }

    /// Sum of the orders of all moment factors (with multiplicity).
    pub fn moment_order(&self) -> u32 {
        self.keys.iter().map(MomentKey::order).sum()
    }

    pub fn max_key_order(&self) -> u32 {
        self.keys.iter().map(MomentKey::order).max().unwrap_or(0)
    }

    fn sort_key(&self) -> (u32, u32, u32, u32, u32, &[MomentKey], u8) {
        (
            self.moment_order(),
            self.q_pow,
            self.p_pow,
            self.hbar_pow,
            self.energy_pow,
            &self.keys,
            self.i_pow,
        )
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("no binding for symbol `{0}`")]
    MissingBinding(String),
    #[error("polynomial has odd i-parity; result would not be real")]
    NonRealResult,
    #[error("invalid moment family: {0}")]
    InvalidFamily(String),
}

/// Numeric values for the symbols of a [`MomentPoly`].
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    pub q: Option<f64>,
    pub p: Option<f64>,
    pub hbar: Option<f64>,
    pub energy: Option<f64>,
    pub moments: BTreeMap<MomentKey, f64>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_hbar(mut self, hbar: f64) -> Self {
        self.hbar = Some(hbar);
        self
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = Some(q);
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_energy(mut self, energy: f64) -> Self {
        self.energy = Some(energy);
        self
    }

    pub fn with_moment(mut self, key: MomentKey, value: f64) -> Self {
        self.moments.insert(key, value);
        self
    }
}

/// Exact-rational counterpart of [`Bindings`].
#[derive(Debug, Clone, Default)]
pub struct ExactBindings {
    pub q: Option<BigRational>,
    pub p: Option<BigRational>,
    pub hbar: Option<BigRational>,
    pub energy: Option<BigRational>,
    pub moments: BTreeMap<MomentKey, BigRational>,
}

/// Canonical polynomial in moments, centroid coordinates, `hbar`, `E` and `i`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MomentPoly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl MomentPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_integer(1)
    }

    pub fn from_integer(n: i64) -> Self {
        Self::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_rational(r: BigRational) -> Self {
        let mut poly = Self::zero();
        poly.add_term(Monomial::unit(), r);
        poly
    }

    pub fn rational(num: i64, den: i64) -> Self {
        Self::from_rational(ratio(num, den))
    }

    pub fn q() -> Self {
        let mut poly = Self::zero();
        poly.add_term(Monomial { q_pow: 1, ..Monomial::unit() }, BigRational::one());
        poly
    }

    pub fn p() -> Self {
        let mut poly = Self::zero();
        poly.add_term(Monomial { p_pow: 1, ..Monomial::unit() }, BigRational::one());
        poly
    }

    pub fn hbar() -> Self {
        Self::hbar_pow(1)
    }

    pub fn hbar_pow(k: u32) -> Self {
        let mut poly = Self::zero();
        poly.add_term(Monomial { hbar_pow: k, ..Monomial::unit() }, BigRational::one());
        poly
    }

    pub fn energy() -> Self {
        let mut poly = Self::zero();
        poly.add_term(Monomial { energy_pow: 1, ..Monomial::unit() }, BigRational::one());
        poly
    }

    pub fn imaginary_unit() -> Self {
        let mut poly = Self::zero();
        poly.add_term(Monomial { i_pow: 1, ..Monomial::unit() }, BigRational::one());
        poly
    }

    /// The moment symbol for `key`, honoring the order-0/1 conventions.
    pub fn moment(key: MomentKey) -> Self {
        match key.order() {
            0 => Self::one(),
            1 => Self::zero(),
            _ => {
                let mut poly = Self::zero();
                poly.add_term(
                    Monomial { keys: vec![key], ..Monomial::unit() },
                    BigRational::one(),
                );
                poly
            }
        }
    }

    /// Adds `coeff * mono`, folding the i-power and centered-moment
    /// conventions into canonical form.
    pub fn add_term(&mut self, mut mono: Monomial, mut coeff: BigRational) {
        if coeff.is_zero() {
            return;
        }
        // i^k -> sign * i^(k % 2)
        let quarter = mono.i_pow / 2;
        if quarter % 2 == 1 {
            coeff = -coeff;
        }
        mono.i_pow %= 2;
        let mut keys = Vec::with_capacity(mono.keys.len());
        for key in mono.keys.drain(..) {
            match key.order() {
                0 => {}
                1 => return, // centered first moments vanish
                _ => keys.push(key),
            }
        }
        keys.sort_unstable();
        mono.keys = keys;
        let entry = self.terms.entry(mono);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    /// The coefficient of the constant (unit) monomial.
    pub fn constant_term(&self) -> BigRational {
        self.terms.get(&Monomial::unit()).cloned().unwrap_or_else(BigRational::zero)
    }

    /// All distinct moment keys appearing in the polynomial.
    pub fn keys(&self) -> BTreeSet<MomentKey> {
        self.terms.keys().flat_map(|m| m.keys.iter().copied()).collect()
    }

    pub fn max_key_order(&self) -> u32 {
        self.terms.keys().map(Monomial::max_key_order).max().unwrap_or(0)
    }

    pub fn contains_hbar(&self) -> bool {
        self.terms.keys().any(|m| m.hbar_pow > 0)
    }

    pub fn contains_imaginary(&self) -> bool {
        self.terms.keys().any(|m| m.i_pow != 0)
    }

    pub fn scale(&self, factor: &BigRational) -> Self {
        if factor.is_zero() {
            return Self::zero();
        }
        let mut out = Self::zero();
        for (mono, coeff) in &self.terms {
            out.add_term(mono.clone(), coeff * factor);
        }
        out
    }

    pub fn pow(&self, exp: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..exp {
            acc = &acc * self;
        }
        acc
    }

    /// Relabels every moment key with `kind` (quantum <-> classical swap).
    pub fn map_kind(&self, kind: MomentKind) -> Self {
        let mut out = Self::zero();
        for (mono, coeff) in &self.terms {
            let mut m = mono.clone();
            for key in &mut m.keys {
                *key = key.with_kind(kind);
            }
            out.add_term(m, coeff.clone());
        }
        out
    }

    /// Substitutes `hbar = 0`: the classical limit of a quantum expression.
    pub fn substitute_hbar_zero(&self) -> Self {
        let mut out = Self::zero();
        for (mono, coeff) in &self.terms {
            if mono.hbar_pow == 0 {
                out.add_term(mono.clone(), coeff.clone());
            }
        }
        out
    }

    /// Substitutes an exact rational value for `hbar`.
    pub fn substitute_hbar(&self, value: &BigRational) -> Self {
        let mut out = Self::zero();
        for (mono, coeff) in &self.terms {
            let mut m = mono.clone();
            let k = m.hbar_pow;
            m.hbar_pow = 0;
            let mut c = coeff.clone();
            for _ in 0..k {
                c *= value;
            }
            out.add_term(m, c);
        }
        out
    }

    /// Drops every monomial containing a key for which `keep` is false.
    pub fn restrict_keys(&self, keep: impl Fn(&MomentKey) -> bool) -> Self {
        let mut out = Self::zero();
        for (mono, coeff) in &self.terms {
            if mono.keys.iter().all(&keep) {
                out.add_term(mono.clone(), coeff.clone());
            }
        }
        out
    }

    /// Replaces moment keys by polynomials. `None` keeps a key unchanged.
    pub fn substitute_keys(&self, image: impl Fn(&MomentKey) -> Option<MomentPoly>) -> Self {
        let mut out = Self::zero();
        for (mono, coeff) in &self.terms {
            let mut base = Self::zero();
            base.add_term(
                Monomial { keys: Vec::new(), ..mono.clone() },
                coeff.clone(),
            );
            for key in &mono.keys {
                match image(key) {
                    Some(poly) => base = &base * &poly,
                    None => base = &base * &Self::moment(*key),
                }
            }
            out += &base;
        }
        out
    }

    /// Partial derivative with respect to `q`.
    pub fn diff_q(&self) -> Self {
        self.diff_power(|m| &mut m.q_pow)
    }

    /// Partial derivative with respect to `p`.
    pub fn diff_p(&self) -> Self {
        self.diff_power(|m| &mut m.p_pow)
    }

    pub fn diff_energy(&self) -> Self {
        self.diff_power(|m| &mut m.energy_pow)
    }

    fn diff_power(&self, select: impl Fn(&mut Monomial) -> &mut u32) -> Self {
        let mut out = Self::zero();
        for (mono, coeff) in &self.terms {
            let mut m = mono.clone();
            let pow = select(&mut m);
            if *pow == 0 {
                continue;
            }
            let n = *pow;
            *pow = n - 1;
            out.add_term(m, coeff * BigRational::from_integer(BigInt::from(n)));
        }
        out
    }

    /// Partial derivative with respect to the moment symbol `key`.
    pub fn diff_key(&self, key: &MomentKey) -> Self {
        let mut out = Self::zero();
        for (mono, coeff) in &self.terms {
            let count = mono.keys.iter().filter(|k| *k == key).count();
            if count == 0 {
                continue;
            }
            let mut m = mono.clone();
            let pos = m.keys.iter().position(|k| k == key).unwrap();
            m.keys.remove(pos);
            out.add_term(m, coeff * BigRational::from_integer(BigInt::from(count)));
        }
        out
    }

    /// Splits into real and imaginary parts (with `i` factored out of `im`).
    pub fn i_split(&self) -> RealImagPair {
        let mut re = Self::zero();
        let mut im = Self::zero();
        for (mono, coeff) in &self.terms {
            let mut m = mono.clone();
            if m.i_pow == 0 {
                re.add_term(m, coeff.clone());
            } else {
                m.i_pow = 0;
                im.add_term(m, coeff.clone());
            }
        }
        RealImagPair { re, im }
    }

    pub fn evaluate(&self, bindings: &Bindings) -> Result<f64, EvalError> {
        let mut total = 0.0_f64;
        for (mono, coeff) in &self.terms {
            if mono.i_pow != 0 {
                return Err(EvalError::NonRealResult);
            }
            let mut value = coeff.to_f64().expect("rational representable as f64");
            value *= Self::power_value(bindings.q, mono.q_pow, "q")?;
            value *= Self::power_value(bindings.p, mono.p_pow, "p")?;
            value *= Self::power_value(bindings.hbar, mono.hbar_pow, "hbar")?;
            value *= Self::power_value(bindings.energy, mono.energy_pow, "E")?;
            for key in &mono.keys {
                let v = bindings
                    .moments
                    .get(key)
                    .copied()
                    .ok_or_else(|| EvalError::MissingBinding(key.to_string()))?;
                value *= v;
            }
            total += value;
        }
        Ok(total)
    }

    fn power_value(binding: Option<f64>, pow: u32, name: &str) -> Result<f64, EvalError> {
        if pow == 0 {
            return Ok(1.0);
        }
        let v = binding.ok_or_else(|| EvalError::MissingBinding(name.to_string()))?;
        Ok(v.powi(pow as i32))
    }

    pub fn evaluate_exact(&self, bindings: &ExactBindings) -> Result<BigRational, EvalError> {
        let mut total = BigRational::zero();
        for (mono, coeff) in &self.terms {
            if mono.i_pow != 0 {
                return Err(EvalError::NonRealResult);
            }
            let mut value = coeff.clone();
            value *= Self::power_exact(&bindings.q, mono.q_pow, "q")?;
            value *= Self::power_exact(&bindings.p, mono.p_pow, "p")?;
            value *= Self::power_exact(&bindings.hbar, mono.hbar_pow, "hbar")?;
            value *= Self::power_exact(&bindings.energy, mono.energy_pow, "E")?;
            for key in &mono.keys {
                let v = bindings
                    .moments
                    .get(key)
                    .ok_or_else(|| EvalError::MissingBinding(key.to_string()))?;
                value *= v;
            }
            total += value;
        }
        Ok(total)
    }

    fn power_exact(
        binding: &Option<BigRational>,
        pow: u32,
        name: &str,
    ) -> Result<BigRational, EvalError> {
        if pow == 0 {
            return Ok(BigRational::one());
        }
        let v = binding.as_ref().ok_or_else(|| EvalError::MissingBinding(name.to_string()))?;
        let mut acc = BigRational::one();
        for _ in 0..pow {
            acc *= v;
        }
        Ok(acc)
    }

    /// Evaluates with every moment `(a, b)` replaced by `family(a, b)`.
    ///
    /// The closure must respect the centered-moment conventions:
    /// `family(0,0) = 1` and order-1 values vanish.
    pub fn substitute_moment_family(
        &self,
        family: &dyn Fn(u32, u32) -> f64,
        rest: &Bindings,
    ) -> Result<f64, EvalError> {
        if (family(0, 0) - 1.0).abs() > 1e-12 {
            return Err(EvalError::InvalidFamily("family(0,0) must be 1".into()));
        }
        if family(1, 0).abs() > 1e-12 || family(0, 1).abs() > 1e-12 {
            return Err(EvalError::InvalidFamily("order-1 values must vanish".into()));
        }
        let mut bindings = rest.clone();
        for key in self.keys() {
            bindings.moments.insert(key, family(key.a, key.b));
        }
        self.evaluate(&bindings)
    }

    /// Normalizes by the absolute value of the first coefficient; used to
    /// compare expressions up to a positive scale.
    pub fn normalized_by_leading(&self) -> Self {
        match self.terms.values().next() {
            None => Self::zero(),
            Some(first) => {
                let lead = first.abs();
                let inv = BigRational::one() / lead;
                self.scale(&inv)
            }
        }
    }
}

impl fmt::Debug for MomentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MomentPoly({})", self)
    }
}

/// A complex moment expression split into i-free real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RealImagPair {
    pub re: MomentPoly,
    pub im: MomentPoly,
}

impl RealImagPair {
    /// `re^2 + im^2`, the squared modulus.
    pub fn modulus_squared(&self) -> MomentPoly {
        &(&self.re * &self.re) + &(&self.im * &self.im)
    }
}

impl Add for &MomentPoly {
    type Output = MomentPoly;
    fn add(self, rhs: &MomentPoly) -> MomentPoly {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl AddAssign<&MomentPoly> for MomentPoly {
    fn add_assign(&mut self, rhs: &MomentPoly) {
        for (mono, coeff) in &rhs.terms {
            self.add_term(mono.clone(), coeff.clone());
        }
    }
}

impl Sub for &MomentPoly {
    type Output = MomentPoly;
    fn sub(self, rhs: &MomentPoly) -> MomentPoly {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl SubAssign<&MomentPoly> for MomentPoly {
    fn sub_assign(&mut self, rhs: &MomentPoly) {
        for (mono, coeff) in &rhs.terms {
            self.add_term(mono.clone(), -coeff.clone());
        }
    }
}

impl Neg for &MomentPoly {
    type Output = MomentPoly;
    fn neg(self) -> MomentPoly {
        let mut out = MomentPoly::zero();
        for (mono, coeff) in &self.terms {
            out.add_term(mono.clone(), -coeff.clone());
        }
        out
    }
}

impl Mul for &MomentPoly {
    type Output = MomentPoly;
    fn mul(self, rhs: &MomentPoly) -> MomentPoly {
        let mut out = MomentPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                let mut keys = Vec::with_capacity(ma.keys.len() + mb.keys.len());
                keys.extend_from_slice(&ma.keys);
                keys.extend_from_slice(&mb.keys);
                let mono = Monomial {
                    q_pow: ma.q_pow + mb.q_pow,
                    p_pow: ma.p_pow + mb.p_pow,
                    hbar_pow: ma.hbar_pow + mb.hbar_pow,
                    energy_pow: ma.energy_pow + mb.energy_pow,
                    i_pow: ma.i_pow + mb.i_pow,
                    keys,
                };
                out.add_term(mono, ca * cb);
            }
        }
        out
    }
}

macro_rules! forward_owned_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for MomentPoly {
            type Output = MomentPoly;
            fn $method(self, rhs: MomentPoly) -> MomentPoly {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&MomentPoly> for MomentPoly {
            type Output = MomentPoly;
            fn $method(self, rhs: &MomentPoly) -> MomentPoly {
                (&self).$method(rhs)
            }
        }
        impl $trait<MomentPoly> for &MomentPoly {
            type Output = MomentPoly;
            fn $method(self, rhs: MomentPoly) -> MomentPoly {
                self.$method(&rhs)
            }
        }
    };
}

forward_owned_binop!(Add, add);
forward_owned_binop!(Sub, sub);
forward_owned_binop!(Mul, mul);

impl Neg for MomentPoly {
    type Output = MomentPoly;
    fn neg(self) -> MomentPoly {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(a: u32, b: u32) -> MomentPoly {
        MomentPoly::moment(MomentKey::quantum(a, b))
    }

    #[test]
    fn addition_merges_like_terms() {
        let x = g(2, 0);
        let sum = &x + &x;
        let expected = x.scale(&ratio(2, 1));
        assert_eq!(sum, expected);
    }

    #[test]
    fn additive_identity() {
        let x = &(&g(1, 1) * &g(1, 1)) + &MomentPoly::rational(3, 7);
        assert_eq!(&x + &MomentPoly::zero(), x);
    }

    #[test]
    fn doubling_mixed_expression() {
        // hbar^2/4 + (G[1,1])^2, added to itself
        let x = &MomentPoly::hbar_pow(2).scale(&ratio(1, 4)) + &g(1, 1).pow(2);
        let doubled = &x + &x;
        let expected =
            &MomentPoly::hbar_pow(2).scale(&ratio(1, 2)) + &g(1, 1).pow(2).scale(&ratio(2, 1));
        assert_eq!(doubled, expected);
    }

    #[test]
    fn imaginary_unit_squares_to_minus_one() {
        let i = MomentPoly::imaginary_unit();
        assert_eq!(&i * &i, MomentPoly::from_integer(-1));
    }

    #[test]
    fn heisenberg_left_side_expands() {
        // (G[1,1] - (hbar/2) i)(G[1,1] + (hbar/2) i) = G[1,1]^2 + hbar^2/4
        let half_hbar_i = (&MomentPoly::hbar() * &MomentPoly::imaginary_unit()).scale(&ratio(1, 2));
        let minus = &g(1, 1) - &half_hbar_i;
        let plus = &g(1, 1) + &half_hbar_i;
        let product = &minus * &plus;
        let expected = &g(1, 1).pow(2) + &MomentPoly::hbar_pow(2).scale(&ratio(1, 4));
        assert_eq!(product, expected);
    }

    #[test]
    fn mixed_monomial_product() {
        let qg = &MomentPoly::q() * &g(0, 2);
        assert_eq!(qg.num_terms(), 1);
        let (mono, coeff) = qg.terms().next().unwrap();
        assert_eq!(mono.q_pow, 1);
        assert_eq!(mono.keys, vec![MomentKey::quantum(0, 2)]);
        assert!(coeff.is_one());
    }

    #[test]
    fn order_one_keys_vanish() {
        assert!(MomentPoly::moment(MomentKey::quantum(1, 0)).is_zero());
        assert!(MomentPoly::moment(MomentKey::quantum(0, 1)).is_zero());
        assert_eq!(MomentPoly::moment(MomentKey::quantum(0, 0)), MomentPoly::one());
    }

    #[test]
    fn evaluate_heisenberg_left_side() {
        let x = &MomentPoly::hbar_pow(2).scale(&ratio(1, 4)) + &g(1, 1).pow(2);
        let b = Bindings::new().with_hbar(1.0).with_moment(MomentKey::quantum(1, 1), 0.0);
        assert_eq!(x.evaluate(&b).unwrap(), 0.25);
    }

    #[test]
    fn evaluate_zero_needs_no_bindings() {
        assert_eq!(MomentPoly::zero().evaluate(&Bindings::new()).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_is_linear() {
        let x = g(2, 0).scale(&ratio(2, 1));
        let b = Bindings::new().with_moment(MomentKey::quantum(2, 0), 0.5);
        assert_eq!(x.evaluate(&b).unwrap(), 1.0);
    }

    #[test]
    fn evaluate_reports_missing_binding() {
        let x = g(2, 0);
        let err = x.evaluate(&Bindings::new()).unwrap_err();
        assert_eq!(err, EvalError::MissingBinding("G[2,0]".into()));
    }

    #[test]
    fn evaluate_rejects_imaginary() {
        let x = &MomentPoly::imaginary_unit() * &MomentPoly::hbar();
        let err = x.evaluate(&Bindings::new().with_hbar(1.0)).unwrap_err();
        assert_eq!(err, EvalError::NonRealResult);
    }

    #[test]
    fn family_substitution_factorial() {
        let x = &g(2, 0) * &g(0, 2);
        let fam = |a: u32, b: u32| -> f64 {
            if a + b == 0 {
                1.0
            } else if a + b == 1 {
                0.0
            } else {
                (factorial(a) * factorial(b)).to_f64().unwrap()
            }
        };
        let v = x.substitute_moment_family(&fam, &Bindings::new().with_hbar(1.0)).unwrap();
        assert_eq!(v, 4.0);
        let v11 = g(1, 1).substitute_moment_family(&fam, &Bindings::new()).unwrap();
        assert_eq!(v11, 1.0);
        let v00 = MomentPoly::moment(MomentKey::quantum(0, 0))
            .substitute_moment_family(&fam, &Bindings::new())
            .unwrap();
        assert_eq!(v00, 1.0);
    }

    #[test]
    fn family_conventions_enforced() {
        let bad = |_a: u32, _b: u32| -> f64 { 2.0 };
        let err = g(2, 0).substitute_moment_family(&bad, &Bindings::new()).unwrap_err();
        assert!(matches!(err, EvalError::InvalidFamily(_)));
    }

    // Randomized ring-law checks.

    fn arb_key() -> impl Strategy<Value = MomentKey> {
        (0u32..4, 0u32..4).prop_map(|(a, b)| MomentKey::quantum(a, b))
    }

    fn arb_poly() -> impl Strategy<Value = MomentPoly> {
        proptest::collection::vec(
            (
                -6i64..7,
                1i64..5,
                0u32..3,
                0u32..3,
                0u32..3,
                0u8..4,
                proptest::collection::vec(arb_key(), 0..3),
            ),
            0..6,
        )
        .prop_map(|terms| {
            let mut poly = MomentPoly::zero();
            for (num, den, q_pow, p_pow, hbar_pow, i_pow, keys) in terms {
                poly.add_term(
                    Monomial { q_pow, p_pow, hbar_pow, energy_pow: 0, i_pow, keys },
                    ratio(num, den),
                );
            }
            poly
        })
    }

    proptest! {
        #[test]
        fn ring_laws(x in arb_poly(), y in arb_poly(), z in arb_poly()) {
            prop_assert_eq!(&x + &y, &y + &x);
            prop_assert_eq!(&x * &y, &y * &x);
            prop_assert_eq!(&(&x + &y) + &z, &x + &(&y + &z));
            prop_assert_eq!(&(&x * &y) * &z, &x * &(&y * &z));
            prop_assert_eq!(&x * &(&y + &z), &(&x * &y) + &(&x * &z));
        }

        #[test]
        fn evaluate_is_multiplicative(x in arb_poly(), y in arb_poly()) {
            // Bind every symbol to a small exact rational and compare the
            // products exactly, on the real parts so evaluation is defined.
            let xx = x.i_split().re;
            let yy = y.i_split().re;
            let mut bindings = ExactBindings {
                q: Some(ratio(1, 3)),
                p: Some(ratio(-2, 5)),
                hbar: Some(ratio(1, 2)),
                energy: Some(ratio(3, 4)),
                moments: BTreeMap::new(),
            };
            for key in xx.keys().union(&yy.keys()) {
                let v = ratio((key.a as i64) - (key.b as i64) + 2, 7);
                bindings.moments.insert(*key, v);
            }
            let lhs = (&xx * &yy).evaluate_exact(&bindings).unwrap();
            let rhs = xx.evaluate_exact(&bindings).unwrap() * yy.evaluate_exact(&bindings).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn canonical_form_is_stable(x in arb_poly()) {
            // Rebuilding a canonical polynomial term by term is the identity.
            let mut rebuilt = MomentPoly::zero();
            for (mono, coeff) in x.terms() {
                rebuilt.add_term(mono.clone(), coeff.clone());
            }
            prop_assert_eq!(rebuilt, x);
        }
    }
}
