//! Moment inequalities from the Cauchy-Schwarz inequality.
//!
//! Classically, `<f g>^2 <= <f^2><g^2>` for phase-space functions; quantum
//! mechanically, `|<f_adj g>|^2 <= <f_adj f><g_adj g>` for operator words.
//! Two families of test functions generate the catalog: centered monomials
//! (all internal operator orderings) and binomial powers of `(Q + P)`.
//! Relations whose constant term forbids the all-moments-zero state are
//! uncertainty relations; the Heisenberg relation is the lowest-order one.
//!
//! Enumeration convention: `f` and `g` range over all words of length
//! `0..=max_order_per_side` (the empty word is the identity and supplies
//! the single-moment right-hand sides), pairs are unordered with `f != g`,
//! duplicates are removed by exact canonical equality of the residual
//! `rhs - lhs` (so variants differing only in their `hbar` coefficients all
//! stay), and the two degenerate pairs `(1, P)`, `(1, Q)` whose left side
//! vanishes identically are dropped: they restate variance positivity,
//! which the catalog carries separately. At five letters per side this
//! yields 1449 distinct relations, 160 of them uncertainty relations.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::opalgebra::{expectation_of_product, OperatorWord};
use crate::symcore::{
    binomial, factorial, rational_sqrt, Bindings, ExactBindings, MomentKey, MomentKind, MomentPoly,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IneqError {
    #[error("choice with a = b reduces to a trivial equality")]
    DegenerateEquality,
    #[error("catalog order {available} cannot cover the requested reduction (needs {needed})")]
    InsufficientCoverage { available: u32, needed: u32 },
    #[error("no reducible relation bounds the pure pair at n = {0}")]
    NoBindingRelation(u32),
}

/// Where an inequality came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// Quantum Cauchy-Schwarz on a pair of operator words.
    WordPair { f: OperatorWord, g: OperatorWord },
    /// Classical limit (`hbar -> 0`) of a word-pair relation.
    ClassicalLimit { f: OperatorWord, g: OperatorWord },
    /// Classical Cauchy-Schwarz on centered monomials `p^a q^b`, `p^c q^d`.
    ClassicalPowerPair { a: u32, b: u32, c: u32, d: u32 },
    /// Classical Cauchy-Schwarz on binomial powers of `(q + p)`.
    ClassicalBinomialPair { a: u32, b: u32 },
    /// Quantum binomial powers; self-adjoint, so no `hbar` appears.
    QuantumBinomialPair { a: u32, b: u32 },
    /// Even-index moments are non-negative by construction.
    EvenMomentPositivity { n: u32, m: u32 },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::WordPair { f: wf, g: wg } => write!(f, "f:{},g:{}", wf, wg),
            Provenance::ClassicalLimit { f: wf, g: wg } => {
                write!(f, "limit-of:f:{},g:{}", wf, wg)
            }
            Provenance::ClassicalPowerPair { a, b, c, d } => {
                write!(f, "typeI:a={},b={},c={},d={}", a, b, c, d)
            }
            Provenance::ClassicalBinomialPair { a, b } => write!(f, "typeII:a={},b={}", a, b),
            Provenance::QuantumBinomialPair { a, b } => write!(f, "qsym:a={},b={}", a, b),
            Provenance::EvenMomentPositivity { n, m } => {
                write!(f, "positivity:n={},m={}", n, m)
            }
        }
    }
}

/// Classification against the all-moments-zero state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IneqClass {
    /// The constant terms forbid vanishing moments (e.g. Heisenberg).
    Uncertainty,
    /// Satisfied by the zero-moment state.
    Ordinary,
    /// Both sides are identical polynomials.
    Equality,
}

/// The statement `lhs <= rhs` between moment polynomials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inequality {
    pub lhs: MomentPoly,
    pub rhs: MomentPoly,
    pub kind: MomentKind,
    pub provenance: Provenance,
}

impl Inequality {
    /// `rhs - lhs`; the inequality asserts this is non-negative.
    pub fn residual(&self) -> MomentPoly {
        &self.rhs - &self.lhs
    }

    /// Canonical dedup key: the residual itself (exact form, so relations
    /// that differ only in `hbar` coefficients stay distinct).
    pub fn canonical_key(&self) -> MomentPoly {
        self.residual()
    }

    pub fn max_moment_order(&self) -> u32 {
        self.lhs.max_key_order().max(self.rhs.max_key_order())
    }

    /// Re-splits the residual: negative terms become the left side.
    pub fn canonical_sides(&self) -> (MomentPoly, MomentPoly) {
        let residual = self.residual();
        let mut lhs = MomentPoly::zero();
        let mut rhs = MomentPoly::zero();
        for (mono, coeff) in residual.terms() {
            if coeff.is_negative() {
                lhs.add_term(mono.clone(), -coeff.clone());
            } else {
                rhs.add_term(mono.clone(), coeff.clone());
            }
        }
        (lhs, rhs)
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <= {} ; provenance={}", self.lhs, self.rhs, self.provenance)
    }
}

fn c_moment(a: u32, b: u32) -> MomentPoly {
    MomentPoly::moment(MomentKey::classical(a, b))
}

/// `(C[a+c,b+d])^2 <= C[2a,2b] C[2c,2d]` from `f = p^a q^b`, `g = p^c q^d`.
pub fn classical_ineq_type_i(a: u32, b: u32, c: u32, d: u32) -> Inequality {
    Inequality {
        lhs: c_moment(a + c, b + d).pow(2),
        rhs: c_moment(2 * a, 2 * b) * c_moment(2 * c, 2 * d),
        kind: MomentKind::Classical,
        provenance: Provenance::ClassicalPowerPair { a, b, c, d },
    }
}

fn binomial_sum(kind: MomentKind, order: u32) -> MomentPoly {
    let mut sum = MomentPoly::zero();
    for n in 0..=order {
        sum += &MomentPoly::moment(MomentKey::new(kind, n, order - n))
            .scale(&BigRational::from_integer(binomial(order, n)));
    }
    sum
}

fn binomial_square_expansion(kind: MomentKind, a: u32, b: u32) -> MomentPoly {
    let mut sum = MomentPoly::zero();
    for j in 0..=2 * a {
        for k in 0..=2 * b {
            let coeff = BigRational::from_integer(binomial(2 * a, j) * binomial(2 * b, k));
            sum += &(MomentPoly::moment(MomentKey::new(kind, j, 2 * a - j))
                * MomentPoly::moment(MomentKey::new(kind, k, 2 * b - k)))
            .scale(&coeff);
        }
    }
    sum
}

/// Binomial-power choice for classical moments; `a = b` is rejected because
/// both sides coincide.
pub fn classical_ineq_type_ii(a: u32, b: u32) -> Result<Inequality, IneqError> {
    if a == b {
        return Err(IneqError::DegenerateEquality);
    }
    Ok(Inequality {
        lhs: binomial_sum(MomentKind::Classical, a + b).pow(2),
        rhs: binomial_square_expansion(MomentKind::Classical, a, b),
        kind: MomentKind::Classical,
        provenance: Provenance::ClassicalBinomialPair { a, b },
    })
}

/// The same binomial choice on quantum moments. The operators are
/// self-adjoint and already Weyl-symmetric, so no `hbar` appears.
pub fn quantum_ineq_symmetric_choice(a: u32, b: u32) -> Result<Inequality, IneqError> {
    if a == b {
        return Err(IneqError::DegenerateEquality);
    }
    Ok(Inequality {
        lhs: binomial_sum(MomentKind::Quantum, a + b).pow(2),
        rhs: binomial_square_expansion(MomentKind::Quantum, a, b),
        kind: MomentKind::Quantum,
        provenance: Provenance::QuantumBinomialPair { a, b },
    })
}

/// Quantum Cauchy-Schwarz for a pair of operator words:
/// `|<f_adj g>|^2 <= <f_adj f> <g_adj g>`, all in Weyl moments.
pub fn quantum_ineq_from_words(f: &OperatorWord, g: &OperatorWord) -> Inequality {
    let cross = expectation_of_product(f, g);
    let ff = expectation_of_product(f, f);
    let gg = expectation_of_product(g, g);
    debug_assert!(ff.im.is_zero() && gg.im.is_zero());
    Inequality {
        lhs: cross.modulus_squared(),
        rhs: &ff.re * &gg.re,
        kind: MomentKind::Quantum,
        provenance: Provenance::WordPair { f: f.clone(), g: g.clone() },
    }
}

/// `0 <= M[2n,2m]`.
pub fn even_moment_positivity(kind: MomentKind, n: u32, m: u32) -> Inequality {
    Inequality {
        lhs: MomentPoly::zero(),
        rhs: MomentPoly::moment(MomentKey::new(kind, 2 * n, 2 * m)),
        kind,
        provenance: Provenance::EvenMomentPositivity { n, m },
    }
}

/// Evaluates both sides with all moments zero; a strictly larger constant
/// on the left forbids the vanishing-moment state.
pub fn classify_uncertainty(ineq: &Inequality) -> IneqClass {
    if ineq.residual().is_zero() {
        return IneqClass::Equality;
    }
    let bindings = ExactBindings { hbar: Some(BigRational::one()), ..Default::default() };
    let lhs0 = ineq
        .lhs
        .restrict_keys(|_| false)
        .evaluate_exact(&bindings)
        .expect("moment-free part is closed");
    let rhs0 = ineq
        .rhs
        .restrict_keys(|_| false)
        .evaluate_exact(&bindings)
        .expect("moment-free part is closed");
    if lhs0 > rhs0 {
        IneqClass::Uncertainty
    } else {
        IneqClass::Ordinary
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassCounts {
    pub uncertainty: usize,
    pub ordinary: usize,
    pub equality: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.uncertainty + self.ordinary + self.equality
    }
}

pub fn classify_counts<'a>(entries: impl IntoIterator<Item = &'a Inequality>) -> ClassCounts {
    let mut counts = ClassCounts::default();
    for ineq in entries {
        match classify_uncertainty(ineq) {
            IneqClass::Uncertainty => counts.uncertainty += 1,
            IneqClass::Ordinary => counts.ordinary += 1,
            IneqClass::Equality => counts.equality += 1,
        }
    }
    counts
}

/// The generated inequality catalog, deduplicated per section.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub max_order_per_side: u32,
    /// Quantum word-pair relations (the headline enumeration).
    pub word_pairs: Vec<Inequality>,
    /// Quantum binomial (choice i) relations.
    pub symmetric: Vec<Inequality>,
    /// Quantum even-moment positivity.
    pub positivity: Vec<Inequality>,
    /// Classical relations: `hbar -> 0` images plus the two classical
    /// generators and classical positivity.
    pub classical: Vec<Inequality>,
}

impl Catalog {
    /// All quantum entries, word pairs first.
    pub fn quantum_entries(&self) -> impl Iterator<Item = &Inequality> {
        self.word_pairs.iter().chain(&self.symmetric).chain(&self.positivity)
    }

    pub fn word_pair_counts(&self) -> ClassCounts {
        classify_counts(&self.word_pairs)
    }
}

/// All words over `{P, Q}` with length `0..=max_len`, in a fixed order.
pub fn enumerate_words(max_len: u32) -> Vec<OperatorWord> {
    use crate::opalgebra::Letter;
    let mut words = Vec::new();
    for len in 0..=max_len {
        for mask in 0..(1u64 << len) {
            let letters = (0..len)
                .map(|bit| if mask >> bit & 1 == 1 { Letter::Q } else { Letter::P })
                .collect();
            words.push(OperatorWord::new(letters));
        }
    }
    words
}

fn dedup_push(list: &mut Vec<Inequality>, seen: &mut BTreeSet<MomentPoly>, ineq: Inequality) {
    if seen.insert(ineq.canonical_key()) {
        list.push(ineq);
    }
}

/// Builds the full catalog for words up to `max_order_per_side` letters per
/// side. Trivial self-pair equalities are skipped.
pub fn enumerate_catalog(max_order_per_side: u32) -> Catalog {
    let words = enumerate_words(max_order_per_side);

    let mut word_pairs = Vec::new();
    let mut seen = BTreeSet::new();
    for i in 0..words.len() {
        for j in (i + 1)..words.len() {
            let ineq = quantum_ineq_from_words(&words[i], &words[j]);
            if ineq.lhs.is_zero() {
                continue; // bare positivity, cataloged separately
            }
            dedup_push(&mut word_pairs, &mut seen, ineq);
        }
    }

    let mut symmetric = Vec::new();
    let mut seen_sym = BTreeSet::new();
    for a in 0..=max_order_per_side {
        for b in (a + 1)..=max_order_per_side {
            if let Ok(ineq) = quantum_ineq_symmetric_choice(a, b) {
                dedup_push(&mut symmetric, &mut seen_sym, ineq);
            }
        }
    }

    let mut positivity = Vec::new();
    let mut seen_pos = BTreeSet::new();
    for n in 0..=5 {
        for m in 0..=(5 - n) {
            if n + m == 0 {
                continue;
            }
            dedup_push(
                &mut positivity,
                &mut seen_pos,
                even_moment_positivity(MomentKind::Quantum, n, m),
            );
        }
    }

    let mut classical = Vec::new();
    let mut seen_classical = BTreeSet::new();
    for ineq in &word_pairs {
        let (f, g) = match &ineq.provenance {
            Provenance::WordPair { f, g } => (f.clone(), g.clone()),
            _ => unreachable!(),
        };
        let limit = Inequality {
            lhs: ineq.lhs.substitute_hbar_zero().map_kind(MomentKind::Classical),
            rhs: ineq.rhs.substitute_hbar_zero().map_kind(MomentKind::Classical),
            kind: MomentKind::Classical,
            provenance: Provenance::ClassicalLimit { f, g },
        };
        if !limit.residual().is_zero() {
            dedup_push(&mut classical, &mut seen_classical, limit);
        }
    }
    for a in 0..=max_order_per_side {
        for b in 0..=(max_order_per_side - a) {
            for c in 0..=max_order_per_side {
                for d in 0..=(max_order_per_side - c) {
                    if a + b == 0 && c + d == 0 {
                        continue;
                    }
                    dedup_push(
                        &mut classical,
                        &mut seen_classical,
                        classical_ineq_type_i(a, b, c, d),
                    );
                }
            }
        }
    }
    for a in 0..=max_order_per_side {
        for b in (a + 1)..=max_order_per_side {
            if let Ok(ineq) = classical_ineq_type_ii(a, b) {
                dedup_push(&mut classical, &mut seen_classical, ineq);
            }
        }
    }
    for n in 0..=5 {
        for m in 0..=(5 - n) {
            if n + m == 0 {
                continue;
            }
            dedup_push(
                &mut classical,
                &mut seen_classical,
                even_moment_positivity(MomentKind::Classical, n, m),
            );
        }
    }

    Catalog { max_order_per_side, word_pairs, symmetric, positivity, classical }
}

/// Result of collapsing the uncertainty relations onto a single pure pair
/// `G[2n,0], G[0,2n]`.
#[derive(Debug, Clone)]
pub struct PurePairReduction {
    pub n: u32,
    /// The sharp constant: `gamma * hbar^(2n) <= G[0,2n] G[2n,0]`.
    pub gamma: BigRational,
    pub collapsed: Inequality,
    /// Provenance of the relation realizing the sharp constant.
    pub witness: Provenance,
}

/// Sets every moment to zero except `G[2n,0]` and `G[0,2n]` and extracts the
/// tightest surviving bound on their product.
pub fn reduce_to_pure_pair(catalog: &Catalog, n: u32) -> Result<PurePairReduction, IneqError> {
    if n == 0 || 2 * n > 2 * catalog.max_order_per_side {
        return Err(IneqError::InsufficientCoverage {
            available: catalog.max_order_per_side,
            needed: n,
        });
    }
    let x = MomentKey::quantum(2 * n, 0);
    let y = MomentKey::quantum(0, 2 * n);
    let mut best: Option<(BigRational, Provenance)> = None;
    for ineq in &catalog.word_pairs {
        if classify_uncertainty(ineq) != IneqClass::Uncertainty {
            continue;
        }
        let reduced = ineq.residual().restrict_keys(|k| *k == x || *k == y);
        // Accept only the collapsing shape
        //   beta * hbar^(2j) * x * y - gamma' * hbar^(2j + 2n) >= 0.
        let mut product: Option<(u32, BigRational)> = None;
        let mut constant: Option<(u32, BigRational)> = None;
        let mut clean = true;
        for (mono, coeff) in reduced.terms() {
            let sorted_pair = mono.keys.len() == 2 && mono.keys.contains(&x) && mono.keys.contains(&y);
            if sorted_pair && mono.q_pow == 0 && mono.p_pow == 0 && product.is_none() {
                product = Some((mono.hbar_pow, coeff.clone()));
            } else if mono.keys.is_empty() && constant.is_none() {
                constant = Some((mono.hbar_pow, coeff.clone()));
            } else {
                clean = false;
                break;
            }
        }
        let (Some((h_prod, beta)), Some((h_const, minus_gamma))) = (product, constant) else {
            continue;
        };
        if !clean || !beta.is_positive() || !minus_gamma.is_negative() {
            continue;
        }
        if h_const != h_prod + 2 * n {
            continue;
        }
        let gamma = -minus_gamma / beta;
        if best.as_ref().map_or(true, |(g, _)| gamma > *g) {
            best = Some((gamma, ineq.provenance.clone()));
        }
    }
    let (gamma, witness) = best.ok_or(IneqError::NoBindingRelation(n))?;
    let collapsed = Inequality {
        lhs: MomentPoly::hbar_pow(2 * n).scale(&gamma),
        rhs: MomentPoly::moment(y) * MomentPoly::moment(x),
        kind: MomentKind::Quantum,
        provenance: witness.clone(),
    };
    Ok(PurePairReduction { n, gamma, collapsed, witness })
}

/// A polynomial constraint on the adimensional pure moments `g_a` defined by
/// `G[2a,0] = G[0,2a] = g_a hbar^a`. The residual is non-negative; the proxy
/// key `G[2a,0]` stands for `g_a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GConstraint {
    pub residual: MomentPoly,
    pub witness: Provenance,
}

impl GConstraint {
    /// For two-term constraints `c_pos * M_pos - c_neg * M_neg >= 0`,
    /// returns `(M_pos keys, M_neg keys, c_neg / c_pos)`.
    pub fn two_term_ratio(&self) -> Option<(Vec<MomentKey>, Vec<MomentKey>, BigRational)> {
        let terms: Vec<_> = self.residual.terms().collect();
        if terms.len() != 2 {
            return None;
        }
        let (pos, neg) = if terms[0].1.is_positive() && terms[1].1.is_negative() {
            (terms[0].clone(), terms[1].clone())
        } else if terms[1].1.is_positive() && terms[0].1.is_negative() {
            (terms[1].clone(), terms[0].clone())
        } else {
            return None;
        };
        Some((pos.0.keys.clone(), neg.0.keys.clone(), -neg.1 / pos.1))
    }
}

/// Substitutes `G[2a,0] = G[0,2a] = g_a hbar^a` (everything else zero) into
/// every quantum relation with moments up to `max_moment_order`, returning
/// the distinct nontrivial constraints on the `g_a`.
pub fn equal_uncertainty_constraints(catalog: &Catalog, max_moment_order: u32) -> Vec<GConstraint> {
    let image = |key: &MomentKey| -> Option<MomentPoly> {
        if key.a > 0 && key.b > 0 {
            return Some(MomentPoly::zero());
        }
        let index = key.order();
        if index % 2 == 1 {
            return Some(MomentPoly::zero());
        }
        let half = index / 2;
        // proxy symbol g_a := G[2a,0], carrying hbar^a
        Some(MomentPoly::moment(MomentKey::quantum(index, 0)) * MomentPoly::hbar_pow(half))
    };
    let mut constraints = Vec::new();
    let mut seen = BTreeSet::new();
    for ineq in catalog.quantum_entries() {
        if ineq.max_moment_order() > max_moment_order {
            continue;
        }
        let reduced = ineq.residual().substitute_keys(image).substitute_hbar(&BigRational::one());
        if reduced.is_zero() {
            continue;
        }
        // Constraints with no negative coefficient are implied by
        // positivity of the g's.
        if reduced.terms().all(|(_, coeff)| coeff.is_positive()) {
            continue;
        }
        let normalized = reduced.normalized_by_leading();
        if seen.insert(normalized.clone()) {
            constraints.push(GConstraint { residual: normalized, witness: ineq.provenance.clone() });
        }
    }
    constraints
}

/// Named closed-form moment families `factor(a,b) * hbar^((a+b)/2)`.
pub struct MomentFamily {
    pub label: String,
    factor: Box<dyn Fn(u32, u32) -> BigRational + Send + Sync>,
}

impl fmt::Debug for MomentFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MomentFamily({})", self.label)
    }
}

impl MomentFamily {
    pub fn new(
        label: impl Into<String>,
        factor: impl Fn(u32, u32) -> BigRational + Send + Sync + 'static,
    ) -> Self {
        Self { label: label.into(), factor: Box::new(factor) }
    }

    /// `a! b!` — allowed by both the classical and quantum catalogs.
    pub fn factorial() -> Self {
        Self::new("factorial", |a, b| BigRational::from_integer(factorial(a) * factorial(b)))
    }

    /// `(a+b)!` — violates exactly the Heisenberg relation.
    pub fn total_factorial() -> Self {
        Self::new("total-factorial", |a, b| BigRational::from_integer(factorial(a + b)))
    }

    /// `a^(a-shift) b^(b-shift)` with the index-zero factor set to 1.
    pub fn power_self(shift: i32) -> Self {
        let label = match shift {
            0 => "power".to_string(),
            s => format!("power-{s}"),
        };
        Self::new(label, move |a, b| {
            let single = |x: u32| -> BigRational {
                if x == 0 {
                    return BigRational::one();
                }
                let exp = i64::from(x) - i64::from(shift);
                let base = BigRational::from_integer(BigInt::from(x));
                let mut acc = BigRational::one();
                for _ in 0..exp.unsigned_abs() {
                    acc *= &base;
                }
                if exp < 0 {
                    acc = acc.recip();
                }
                acc
            };
            single(a) * single(b)
        })
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "factorial" => Some(Self::factorial()),
            "total-factorial" => Some(Self::total_factorial()),
            "power" => Some(Self::power_self(0)),
            "power-1" => Some(Self::power_self(1)),
            "power-2" => Some(Self::power_self(2)),
            "power-3" => Some(Self::power_self(3)),
            _ => None,
        }
    }

    pub fn known_names() -> &'static [&'static str] {
        &["factorial", "total-factorial", "power", "power-1", "power-2", "power-3"]
    }

    /// Rational prefactor (without the `hbar^((a+b)/2)` scale), with the
    /// order-0/1 conventions applied.
    pub fn prefactor(&self, a: u32, b: u32) -> BigRational {
        match a + b {
            0 => BigRational::one(),
            1 => BigRational::zero(),
            _ => (self.factor)(a, b),
        }
    }

    pub fn value(&self, a: u32, b: u32, hbar: f64) -> f64 {
        self.prefactor(a, b).to_f64().unwrap() * hbar.powf(f64::from(a + b) / 2.0)
    }
}

#[derive(Debug, Clone)]
pub struct FamilyViolation {
    pub display: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct FamilyReport {
    pub label: String,
    pub checked: usize,
    pub passed: usize,
    pub violations: Vec<FamilyViolation>,
}

impl FamilyReport {
    pub fn all_passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a family against inequalities with moments up to `max_order`.
///
/// When `sqrt(hbar)` is an exact rational the comparison is exact with zero
/// tolerance (families at saturation must pass); otherwise a `1e-12`
/// relative slack absorbs floating rounding.
pub fn check_family<'a>(
    family: &MomentFamily,
    entries: impl IntoIterator<Item = &'a Inequality>,
    max_order: u32,
    hbar: f64,
) -> FamilyReport {
    let exact_sqrt = BigRational::from_float(hbar).and_then(|h| rational_sqrt(&h));
    let mut report = FamilyReport {
        label: family.label.clone(),
        checked: 0,
        passed: 0,
        violations: Vec::new(),
    };
    for ineq in entries {
        if ineq.max_moment_order() > max_order {
            continue;
        }
        report.checked += 1;
        let passed = match &exact_sqrt {
            Some(s) => {
                let mut bindings = ExactBindings {
                    hbar: BigRational::from_float(hbar),
                    ..Default::default()
                };
                for key in ineq.lhs.keys().union(&ineq.rhs.keys()) {
                    let mut scale = BigRational::one();
                    for _ in 0..key.order() {
                        scale *= s;
                    }
                    bindings.moments.insert(*key, family.prefactor(key.a, key.b) * scale);
                }
                let lhs = ineq.lhs.evaluate_exact(&bindings).expect("bound");
                let rhs = ineq.rhs.evaluate_exact(&bindings).expect("bound");
                if lhs <= rhs {
                    true
                } else {
                    report.violations.push(FamilyViolation {
                        display: ineq.to_string(),
                        lhs: lhs.to_f64().unwrap(),
                        rhs: rhs.to_f64().unwrap(),
                    });
                    false
                }
            }
            None => {
                let rest = Bindings::new().with_hbar(hbar);
                let rule = |a: u32, b: u32| family.value(a, b, hbar);
                let lhs = ineq.lhs.substitute_moment_family(&rule, &rest).expect("bound");
                let rhs = ineq.rhs.substitute_moment_family(&rule, &rest).expect("bound");
                let slack = 1e-12 * lhs.abs().max(rhs.abs()).max(1.0);
                if lhs <= rhs + slack {
                    true
                } else {
                    report.violations.push(FamilyViolation {
                        display: ineq.to_string(),
                        lhs,
                        rhs,
                    });
                    false
                }
            }
        };
        if passed {
            report.passed += 1;
        }
    }
    report
}

/// Outcome of matching one hard-coded sixth-order relation.
#[derive(Debug, Clone)]
pub struct AppendixMatch {
    pub name: &'static str,
    pub found: bool,
    /// For unmatched relations: catalog entries sharing the same left side.
    pub nearest: Option<String>,
}

#[derive(Debug, Clone)]
pub struct AppendixReport {
    pub matches: Vec<AppendixMatch>,
    pub sum_identities_hold: bool,
}

impl AppendixReport {
    pub fn all_found(&self) -> bool {
        self.matches.iter().all(|m| m.found) && self.sum_identities_hold
    }
}

/// The explicit uncertainty relations with moments up to sixth order, as
/// `(name, lhs, rhs)` in the textual syntax.
pub fn appendix_relations() -> Vec<(&'static str, &'static str, &'static str)> {
    vec![
        ("heisenberg", "1/4*hbar^2 + G[1,1]^2", "G[0,2]*G[2,0]"),
        (
            "order4-1",
            "1/4*hbar^4 + G[2,2]^2",
            "G[2,0]*G[2,4] + 3*hbar^2*G[0,2]*G[2,0] - hbar^2*G[2,2]",
        ),
        (
            "order4-2",
            "1/4*hbar^4 + G[2,2]^2",
            "G[2,0]*G[2,4] + hbar^2*G[0,2]*G[2,0] + hbar^2*G[2,2] - 4*hbar^2*G[1,1]^2",
        ),
        (
            "order4-3",
            "1/4*hbar^4 + G[2,2]^2",
            "G[0,4]*G[4,0] + hbar^2*G[2,2] - 4*hbar^2*G[1,1]^2",
        ),
        (
            "order4-4",
            "1/4*hbar^4 + G[2,2]^2",
            "G[0,2]*G[4,2] + 3*hbar^2*G[0,2]*G[2,0] - hbar^2*G[2,2]",
        ),
        (
            "order4-5",
            "1/4*hbar^4 + G[2,2]^2",
            "G[0,2]*G[4,2] + hbar^2*G[0,2]*G[2,0] + hbar^2*G[2,2] - 4*hbar^2*G[1,1]^2",
        ),
        (
            "order6-1",
            "9/16*hbar^6 + G[3,3]^2",
            "G[2,4]*G[4,2] + 3*hbar^4*G[0,2]*G[2,0] - 9/4*hbar^4*G[1,1]^2 - 9/4*hbar^4*G[2,2] \
             - 9/4*hbar^2*G[2,2]^2 + 3*hbar^2*G[2,0]*G[2,4] - 3*hbar^2*G[1,1]*G[3,3] \
             + hbar^2*G[0,2]*G[4,2]",
        ),
        (
            "order6-2",
            "1/16*hbar^6 + G[3,3]^2",
            "G[2,4]*G[4,2] - 9/4*hbar^4*G[1,1]^2 + 3*hbar^4*G[0,2]*G[2,0] - 1/4*hbar^4*G[2,2] \
             - 1/4*hbar^2*G[2,2]^2 + 3*hbar^2*G[2,0]*G[2,4] - 3*hbar^2*G[1,1]*G[3,3] \
             + hbar^2*G[0,2]*G[4,2]",
        ),
        (
            "order6-3",
            "1/16*hbar^6 + G[3,3]^2",
            "G[2,4]*G[4,2] - 1/4*hbar^4*G[1,1]^2 + hbar^4*G[0,2]*G[2,0] - 3/4*hbar^4*G[2,2] \
             - 9/4*hbar^2*G[2,2]^2 + hbar^2*G[2,0]*G[2,4] - hbar^2*G[1,1]*G[3,3] \
             + hbar^2*G[0,2]*G[4,2]",
        ),
        (
            "order6-4",
            "1/16*hbar^6 + G[3,3]^2",
            "G[2,4]*G[4,2] - 1/4*hbar^4*G[1,1]^2 + hbar^4*G[0,2]*G[2,0] - 5/4*hbar^4*G[2,2] \
             - 25/4*hbar^2*G[2,2]^2 + hbar^2*G[2,0]*G[2,4] + hbar^2*G[1,1]*G[3,3] \
             + hbar^2*G[0,2]*G[4,2]",
        ),
        (
            "order6-5",
            "1/16*hbar^6 + G[3,3]^2",
            "G[2,4]*G[4,2] - 25/4*hbar^4*G[1,1]^2 + hbar^4*G[0,2]*G[2,0] + 7/4*hbar^4*G[2,2] \
             - 49/4*hbar^2*G[2,2]^2 + hbar^2*G[2,0]*G[2,4] + 5*hbar^2*G[1,1]*G[3,3] \
             + hbar^2*G[0,2]*G[4,2]",
        ),
        (
            "order6-6",
            "9/16*hbar^6 + G[3,3]^2",
            "G[2,4]*G[4,2] + 3*hbar^4*G[0,2]*G[2,0] - 9/4*hbar^4*G[1,1]^2 - 9/4*hbar^4*G[2,2] \
             - 9/4*hbar^2*G[2,2]^2 + hbar^2*G[2,0]*G[2,4] - 3*hbar^2*G[1,1]*G[3,3] \
             + 3*hbar^2*G[0,2]*G[4,2]",
        ),
        (
            "order6-7",
            "1/16*hbar^6 + G[3,3]^2",
            "G[2,4]*G[4,2] - 9/4*hbar^4*G[1,1]^2 + 3*hbar^4*G[0,2]*G[2,0] - 1/4*hbar^4*G[2,2] \
             - 1/4*hbar^2*G[2,2]^2 + hbar^2*G[2,0]*G[2,4] - 3*hbar^2*G[1,1]*G[3,3] \
             + 3*hbar^2*G[0,2]*G[4,2]",
        ),
        (
            "order6-8",
            "1/16*hbar^6 + G[3,3]^2",
            "G[2,4]*G[4,2] - 9/4*hbar^4*G[1,1]^2 + 9*hbar^4*G[0,2]*G[2,0] - 1/4*hbar^4*G[2,2] \
             - 1/4*hbar^2*G[2,2]^2 + 3*hbar^2*G[2,0]*G[2,4] - 3*hbar^2*G[1,1]*G[3,3] \
             + 3*hbar^2*G[0,2]*G[4,2]",
        ),
        (
            "order6-9",
            "9/16*hbar^6 + G[3,3]^2",
            "G[0,6]*G[6,0] - 81/4*hbar^4*G[1,1]^2 + 27/4*hbar^4*G[2,2] \
             - 81/4*hbar^2*G[2,2]^2 + 9*hbar^2*G[1,1]*G[3,3]",
        ),
    ]
}

/// Matches every hard-coded sixth-order uncertainty relation against the
/// catalog by exact residual equality, and checks the two summed variants
/// arithmetically.
pub fn verify_appendix(catalog: &Catalog) -> AppendixReport {
    let keys: BTreeSet<MomentPoly> =
        catalog.word_pairs.iter().map(Inequality::canonical_key).collect();
    let mut matches = Vec::new();
    let mut residuals = std::collections::BTreeMap::new();
    for (name, lhs_text, rhs_text) in appendix_relations() {
        let lhs: MomentPoly = lhs_text.parse().expect("appendix lhs parses");
        let rhs: MomentPoly = rhs_text.parse().expect("appendix rhs parses");
        let residual = &rhs - &lhs;
        let found = keys.contains(&residual);
        let nearest = if found {
            None
        } else {
            catalog
                .word_pairs
                .iter()
                .find(|entry| entry.lhs == lhs)
                .map(|entry| entry.to_string())
        };
        matches.push(AppendixMatch { name, found, nearest });
        residuals.insert(name, residual);
    }

    // Summing the two relations that differ only in hbar coefficients must
    // reproduce the displayed combination with 2 hbar^2 [G20 G02 - G11^2].
    let heis = MomentPoly::parse("G[0,2]*G[2,0] - G[1,1]^2").unwrap();
    let combined_first = {
        let lhs = MomentPoly::parse("1/4*hbar^4 + G[2,2]^2").unwrap();
        let rhs = &MomentPoly::parse("G[2,0]*G[2,4]").unwrap()
            + &(MomentPoly::hbar_pow(2).scale(&crate::symcore::ratio(2, 1)) * heis.clone());
        &rhs - &lhs
    };
    let combined_last = {
        let lhs = MomentPoly::parse("1/4*hbar^4 + G[2,2]^2").unwrap();
        let rhs = &MomentPoly::parse("G[0,2]*G[4,2]").unwrap()
            + &(MomentPoly::hbar_pow(2).scale(&crate::symcore::ratio(2, 1)) * heis);
        &rhs - &lhs
    };
    let two = crate::symcore::ratio(2, 1);
    let first_sum_ok = residuals.get("order4-1").zip(residuals.get("order4-2")).map_or(
        false,
        |(r1, r2)| (r1 + r2) == combined_first.scale(&two),
    );
    let last_sum_ok = residuals.get("order4-4").zip(residuals.get("order4-5")).map_or(
        false,
        |(r1, r2)| (r1 + r2) == combined_last.scale(&two),
    );

    AppendixReport { matches, sum_identities_hold: first_sum_ok && last_sum_ok }
}
