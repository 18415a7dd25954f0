//! Noncommutative algebra of centered operator words.
//!
//! A word is a finite sequence over `{P, Q}` where `P` denotes the centered
//! momentum operator and `Q` the centered position operator, obeying
//! `[Q, P] = i*hbar`. Normal form puts every `Q` before every `P`; repeated
//! application of `P*Q = Q*P - i*hbar` reduces any sum of words to normal
//! form with exact coefficients. Expectation values of normal words are then
//! expressed in the Weyl-symmetrized moment basis `G[a,b]` by solving the
//! triangular linear system relating the two orderings.
//!
//! Conversions are cached process-wide; entries are immutable once computed
//! so concurrent readers always observe the same values.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use num_rational::BigRational;
use once_cell::sync::Lazy;
use thiserror::Error;

use crate::symcore::{factorial, MomentKey, MomentPoly, RealImagPair};

/// One letter of an operator word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    /// Centered momentum, `p_op - p`.
    P,
    /// Centered position, `q_op - q`.
    Q,
}

/// An ordered product of centered operators; the empty word is the identity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct OperatorWord(Vec<Letter>);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid operator word `{0}`: only letters P and Q are allowed")]
pub struct WordParseError(String);

impl OperatorWord {
    pub fn new(letters: Vec<Letter>) -> Self {
        Self(letters)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// `P^a Q^b` in that order.
    pub fn power_word(a: u32, b: u32) -> Self {
        let mut letters = vec![Letter::P; a as usize];
        letters.extend(std::iter::repeat(Letter::Q).take(b as usize));
        Self(letters)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(momentum letters, position letters)`.
    pub fn counts(&self) -> (u32, u32) {
        let p = self.0.iter().filter(|l| **l == Letter::P).count() as u32;
        (p, self.0.len() as u32 - p)
    }

    /// The adjoint word: letters reversed (each letter is self-adjoint).
    pub fn adjoint(&self) -> Self {
        let mut letters = self.0.clone();
        letters.reverse();
        Self(letters)
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut letters = self.0.clone();
        letters.extend_from_slice(&other.0);
        Self(letters)
    }

    /// Whether all `Q` letters precede all `P` letters.
    pub fn is_normal(&self) -> bool {
        self.0.windows(2).all(|w| !(w[0] == Letter::P && w[1] == Letter::Q))
    }
}

impl fmt::Display for OperatorWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for letter in &self.0 {
            f.write_str(match letter {
                Letter::P => "P",
                Letter::Q => "Q",
            })?;
        }
        Ok(())
    }
}

impl FromStr for OperatorWord {
    type Err = WordParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if trimmed == "1" {
            return Ok(Self::empty());
        }
        let mut letters = Vec::with_capacity(trimmed.len());
        for c in trimmed.chars() {
            match c {
                'P' | 'p' => letters.push(Letter::P),
                'Q' | 'q' => letters.push(Letter::Q),
                _ => return Err(WordParseError(s.to_string())),
            }
        }
        Ok(Self(letters))
    }
}

/// A finite sum of words with exact [`MomentPoly`] coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OperatorSum {
    terms: std::collections::BTreeMap<OperatorWord, MomentPoly>,
}

impl OperatorSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::from_word(OperatorWord::empty())
    }

    pub fn from_word(word: OperatorWord) -> Self {
        let mut sum = Self::zero();
        sum.add_word(word, MomentPoly::one());
        sum
    }

    pub fn add_word(&mut self, word: OperatorWord, coeff: MomentPoly) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(word).or_insert_with(MomentPoly::zero);
        *entry += &coeff;
        if entry.is_zero() {
            let zeroed: Vec<_> = self
                .terms
                .iter()
                .filter(|(_, c)| c.is_zero())
                .map(|(w, _)| w.clone())
                .collect();
            for w in zeroed {
                self.terms.remove(&w);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&OperatorWord, &MomentPoly)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn scale(&self, factor: &MomentPoly) -> Self {
        let mut out = Self::zero();
        for (word, coeff) in &self.terms {
            out.add_word(word.clone(), coeff * factor);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (word, coeff) in &other.terms {
            out.add_word(word.clone(), coeff.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (word, coeff) in &other.terms {
            out.add_word(word.clone(), -coeff);
        }
        out
    }

    /// Operator product: words concatenate, coefficients multiply.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (wa, ca) in &self.terms {
            for (wb, cb) in &other.terms {
                out.add_word(wa.concat(wb), ca * cb);
            }
        }
        out
    }

    /// Commutator `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.mul(other).sub(&other.mul(self))
    }
}

impl fmt::Display for OperatorSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (idx, (word, coeff)) in self.terms.iter().enumerate() {
            if idx > 0 {
                f.write_str(" + ")?;
            }
            let coeff_text = coeff.to_string();
            if coeff_text == "1" {
                write!(f, "{}", word)?;
            } else if coeff.num_terms() == 1 && !coeff_text.starts_with('-') {
                write!(f, "{}*{}", coeff_text, word)?;
            } else {
                write!(f, "({})*{}", coeff_text, word)?;
            }
        }
        Ok(())
    }
}

static NORMAL_CACHE: Lazy<Mutex<HashMap<OperatorWord, OperatorSum>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn normal_order_word(word: &OperatorWord) -> OperatorSum {
    if word.is_normal() {
        return OperatorSum::from_word(word.clone());
    }
    if let Some(hit) = NORMAL_CACHE.lock().unwrap().get(word) {
        return hit.clone();
    }
    let letters = word.letters();
    let swap_at = letters
        .windows(2)
        .position(|w| w[0] == Letter::P && w[1] == Letter::Q)
        .expect("non-normal word has a PQ pair");

    // P*Q = Q*P - i*hbar
    let mut swapped = letters.to_vec();
    swapped.swap(swap_at, swap_at + 1);
    let mut contracted = letters.to_vec();
    contracted.drain(swap_at..swap_at + 2);

    let minus_i_hbar = -(MomentPoly::imaginary_unit() * MomentPoly::hbar());
    let result = normal_order_word(&OperatorWord::new(swapped))
        .add(&normal_order_word(&OperatorWord::new(contracted)).scale(&minus_i_hbar));

    NORMAL_CACHE.lock().unwrap().insert(word.clone(), result.clone());
    result
}

/// Rewrites every word into normal form (all `Q` before all `P`).
pub fn commutator_reduce(x: &OperatorSum) -> OperatorSum {
    let mut out = OperatorSum::zero();
    for (word, coeff) in x.terms() {
        let reduced = normal_order_word(word);
        out = out.add(&reduced.scale(coeff));
    }
    out
}

/// The Weyl-symmetrized product of `a` momentum and `b` position letters:
/// the average over all distinct orderings.
pub fn weyl_moment(a: u32, b: u32) -> OperatorSum {
    let total = a + b;
    let coeff = MomentPoly::from_rational(BigRational::new(
        factorial(a) * factorial(b),
        factorial(total),
    ));
    let mut sum = OperatorSum::zero();
    // Choose the positions of the P letters among `total` slots.
    let mut positions: Vec<u32> = (0..a).collect();
    loop {
        let mut letters = vec![Letter::Q; total as usize];
        for &pos in &positions {
            letters[pos as usize] = Letter::P;
        }
        sum.add_word(OperatorWord::new(letters), coeff.clone());
        if a == 0 {
            break;
        }
        // next combination in lexicographic order
        let mut idx = a as usize;
        loop {
            if idx == 0 {
                return sum;
            }
            idx -= 1;
            if positions[idx] < total - (a - idx as u32) {
                positions[idx] += 1;
                for j in idx + 1..a as usize {
                    positions[j] = positions[j - 1] + 1;
                }
                break;
            }
        }
    }
    sum
}

static WEYL_CACHE: Lazy<Mutex<HashMap<(u32, u32), MomentPoly>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Expectation of the normal word `Q^b P^a` in Weyl moments.
fn normal_to_weyl(a: u32, b: u32) -> MomentPoly {
    match a + b {
        0 => return MomentPoly::one(),
        1 => return MomentPoly::zero(),
        _ => {}
    }
    if let Some(hit) = WEYL_CACHE.lock().unwrap().get(&(a, b)) {
        return hit.clone();
    }
    // G[a,b] = N(a,b) + sum_{k>=1} c_k N(a-k,b-k), where the c_k come from
    // normal ordering the symmetrized product. Solve for N(a,b).
    let reduced = commutator_reduce(&weyl_moment(a, b));
    let mut value = MomentPoly::moment(MomentKey::quantum(a, b));
    for (word, coeff) in reduced.terms() {
        let (wa, wb) = word.counts();
        if wa == a && wb == b {
            debug_assert_eq!(coeff, &MomentPoly::one());
            continue;
        }
        value -= &(coeff * normal_to_weyl(wa, wb));
    }
    WEYL_CACHE.lock().unwrap().insert((a, b), value.clone());
    value
}

/// Expectation value of an operator sum, exactly in Weyl moments `G[a,b]`.
pub fn to_moments(x: &OperatorSum) -> MomentPoly {
    let reduced = commutator_reduce(x);
    let mut out = MomentPoly::zero();
    for (word, coeff) in reduced.terms() {
        let (a, b) = word.counts();
        out += &(coeff * normal_to_weyl(a, b));
    }
    out
}

/// Expectation of a single word.
pub fn expectation_word(word: &OperatorWord) -> MomentPoly {
    to_moments(&OperatorSum::from_word(word.clone()))
}

/// `<f_adjoint * g>` split into real and imaginary moment polynomials.
pub fn expectation_of_product(f: &OperatorWord, g: &OperatorWord) -> RealImagPair {
    expectation_word(&f.adjoint().concat(g)).i_split()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::ratio;
    use proptest::prelude::*;

    fn g(a: u32, b: u32) -> MomentPoly {
        MomentPoly::moment(MomentKey::quantum(a, b))
    }

    fn ihbar() -> MomentPoly {
        MomentPoly::imaginary_unit() * MomentPoly::hbar()
    }

    fn word(s: &str) -> OperatorWord {
        s.parse().unwrap()
    }

    #[test]
    fn single_commutator() {
        // PQ -> QP - i*hbar
        let reduced = commutator_reduce(&OperatorSum::from_word(word("PQ")));
        let mut expected = OperatorSum::from_word(word("QP"));
        expected.add_word(OperatorWord::empty(), -ihbar());
        assert_eq!(reduced, expected);
    }

    #[test]
    fn normal_word_is_fixed_point() {
        let qp = OperatorSum::from_word(word("QP"));
        assert_eq!(commutator_reduce(&qp), qp);
    }

    #[test]
    fn double_swap() {
        // PPQ -> QPP - 2 i*hbar P
        let reduced = commutator_reduce(&OperatorSum::from_word(word("PPQ")));
        let mut expected = OperatorSum::from_word(word("QPP"));
        expected.add_word(word("P"), ihbar().scale(&ratio(-2, 1)));
        assert_eq!(reduced, expected);
    }

    #[test]
    fn weyl_orderings() {
        let w11 = weyl_moment(1, 1);
        assert_eq!(w11.num_terms(), 2);
        for (_, coeff) in w11.terms() {
            assert_eq!(coeff, &MomentPoly::rational(1, 2));
        }
        let w20 = weyl_moment(2, 0);
        assert_eq!(w20, OperatorSum::from_word(word("PP")));
        let w12 = weyl_moment(1, 2);
        assert_eq!(w12.num_terms(), 3);
        for (_, coeff) in w12.terms() {
            assert_eq!(coeff, &MomentPoly::rational(1, 3));
        }
    }

    #[test]
    fn expectations_of_two_letter_words() {
        let half_hbar_i = ihbar().scale(&ratio(1, 2));
        assert_eq!(expectation_word(&word("PQ")), &g(1, 1) - &half_hbar_i);
        assert_eq!(expectation_word(&word("QP")), &g(1, 1) + &half_hbar_i);
        assert_eq!(expectation_word(&word("PP")), g(2, 0));
    }

    #[test]
    fn product_expectations() {
        let pq = expectation_of_product(&word("P"), &word("Q"));
        assert_eq!(pq.re, g(1, 1));
        assert_eq!(pq.im, MomentPoly::hbar().scale(&ratio(-1, 2)));

        let pp = expectation_of_product(&word("P"), &word("P"));
        assert_eq!(pp.re, g(2, 0));
        assert!(pp.im.is_zero());

        // <(PQ)' PQ> is real and second order in hbar with a G[2,2] term.
        let self_prod = expectation_of_product(&word("PQ"), &word("PQ"));
        assert!(self_prod.im.is_zero());
        assert!(self_prod.re.keys().contains(&MomentKey::quantum(2, 2)));
        assert!(self_prod.re.contains_hbar());
    }

    #[test]
    fn weyl_round_trip_to_order_ten() {
        for a in 0..=10u32 {
            for b in 0..=(10 - a) {
                let converted = to_moments(&weyl_moment(a, b));
                assert_eq!(converted, g(a, b), "Weyl({a},{b}) must convert to G[{a},{b}]");
            }
        }
    }

    #[test]
    fn classical_limit_is_ordering_blind() {
        for a in 0..=4u32 {
            for b in 0..=4u32 {
                let w = OperatorWord::power_word(a, b);
                let value = expectation_word(&w).substitute_hbar_zero();
                assert_eq!(value, g(a, b));
            }
        }
    }

    fn arb_word(max_len: usize) -> impl Strategy<Value = OperatorWord> {
        proptest::collection::vec(proptest::bool::ANY, 0..=max_len).prop_map(|bits| {
            OperatorWord::new(
                bits.into_iter().map(|b| if b { Letter::P } else { Letter::Q }).collect(),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn conjugation_symmetry(f in arb_word(5), g_word in arb_word(5)) {
            let fg = expectation_of_product(&f, &g_word);
            let gf = expectation_of_product(&g_word, &f);
            prop_assert_eq!(fg.re, gf.re);
            prop_assert_eq!(fg.im, -&gf.im);
        }

        #[test]
        fn self_products_are_real(f in arb_word(5)) {
            let ff = expectation_of_product(&f, &f);
            prop_assert!(ff.im.is_zero());
        }
    }
}
