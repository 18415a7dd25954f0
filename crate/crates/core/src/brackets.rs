//! Poisson brackets between moments and centroid variables.
//!
//! The closed forms implemented here mix orders in a nontrivial way: the
//! bracket of two moments of orders `a+b` and `c+d` contains moments up to
//! order `a+b+c+d-2`. The quantum bracket carries corrections in even powers
//! of `hbar` weighted by the combinatorial `K` coefficients; the classical
//! bracket keeps only the `hbar`-free part. [`oracle`] rebuilds the quantum
//! bracket from the commutation relation alone and is used to cross-check
//! the closed form.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::symcore::{binomial, factorial, MomentKey, MomentKind, MomentPoly};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BracketError {
    #[error("bracket arguments mix quantum and classical moments")]
    KindMismatch,
}

/// The combinatorial coefficient
/// `K^n_{abcd} = sum_m (-1)^m m!(n-m)! C(a,m) C(b,n-m) C(c,n-m) C(d,m)`.
pub fn k_coefficient(a: u32, b: u32, c: u32, d: u32, n: u32) -> BigRational {
    let mut total = BigInt::zero();
    for m in 0..=n {
        let mut term = factorial(m) * factorial(n - m);
        term *= binomial(a, m);
        term *= binomial(b, n - m);
        term *= binomial(c, n - m);
        term *= binomial(d, m);
        if m % 2 == 1 {
            term = -term;
        }
        total += term;
    }
    BigRational::from_integer(total)
}

fn moment(kind: MomentKind, a: u32, b: u32) -> MomentPoly {
    MomentPoly::moment(MomentKey::new(kind, a, b))
}

/// `{G[a,b], G[c,d]}` for quantum moments, exact in `hbar`.
pub fn quantum_bracket_indices(a: u32, b: u32, c: u32, d: u32) -> MomentPoly {
    bracket_indices(MomentKind::Quantum, a, b, c, d)
}

/// `{C[a,b], C[c,d]}` for classical moments (no `hbar` terms).
pub fn classical_bracket_indices(a: u32, b: u32, c: u32, d: u32) -> MomentPoly {
    bracket_indices(MomentKind::Classical, a, b, c, d)
}

fn bracket_indices(kind: MomentKind, a: u32, b: u32, c: u32, d: u32) -> MomentPoly {
    let mut out = MomentPoly::zero();
    if a > 0 && d > 0 {
        let lead = (moment(kind, a - 1, b) * moment(kind, c, d - 1))
            .scale(&BigRational::from_integer(BigInt::from(u64::from(a) * u64::from(d))));
        out += &lead;
    }
    if b > 0 && c > 0 {
        let lead = (moment(kind, a, b - 1) * moment(kind, c - 1, d))
            .scale(&BigRational::from_integer(BigInt::from(u64::from(b) * u64::from(c))));
        out -= &lead;
    }
    let cap = (a + c).min(b + d).min(a + b).min(c + d);
    if cap == 0 {
        return out;
    }
    let max_m = match kind {
        // Sum over odd contractions 2m+1 <= cap.
        MomentKind::Quantum => (cap - 1) / 2,
        // Classically only the hbar-free m = 0 term survives.
        MomentKind::Classical => 0,
    };
    for m in 0..=max_m {
        let k = k_coefficient(a, b, c, d, 2 * m + 1);
        if k.is_zero() {
            continue;
        }
        let sign = if m % 2 == 0 { BigRational::one() } else { -BigRational::one() };
        let quarter_pow = BigRational::new(BigInt::one(), BigInt::from(4u32).pow(m));
        let coeff = sign * quarter_pow * k;
        let key_poly = moment(kind, a + c - 2 * m - 1, b + d - 2 * m - 1);
        out += &(MomentPoly::hbar_pow(2 * m) * key_poly).scale(&coeff);
    }
    out
}

/// Bracket of two moment symbols; the kinds must match.
pub fn moment_bracket(x: &MomentKey, y: &MomentKey) -> Result<MomentPoly, BracketError> {
    if x.kind != y.kind {
        return Err(BracketError::KindMismatch);
    }
    Ok(bracket_indices(x.kind, x.a, x.b, y.a, y.b))
}

/// One side of an elementary bracket: a centroid coordinate or a moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketOperand {
    Q,
    P,
    Moment(MomentKey),
}

/// Elementary brackets: `{q,p} = 1`, `{q,q} = {p,p} = 0`, moments commute
/// with the centroid, and moment pairs use the closed form.
pub fn elementary_bracket(
    x: &BracketOperand,
    y: &BracketOperand,
) -> Result<MomentPoly, BracketError> {
    use BracketOperand::*;
    match (x, y) {
        (Q, P) => Ok(MomentPoly::one()),
        (P, Q) => Ok(-&MomentPoly::one()),
        (Q, Q) | (P, P) => Ok(MomentPoly::zero()),
        (Q, Moment(_)) | (P, Moment(_)) | (Moment(_), Q) | (Moment(_), P) => {
            Ok(MomentPoly::zero())
        }
        (Moment(a), Moment(b)) => moment_bracket(a, b),
    }
}

fn poly_kind(poly: &MomentPoly) -> Result<Option<MomentKind>, BracketError> {
    let mut kind = None;
    for key in poly.keys() {
        match kind {
            None => kind = Some(key.kind),
            Some(k) if k == key.kind => {}
            Some(_) => return Err(BracketError::KindMismatch),
        }
    }
    Ok(kind)
}

/// Poisson bracket of two moment polynomials, extended from the elementary
/// brackets by bilinearity and the Leibniz rule.
pub fn poisson_bracket(f: &MomentPoly, g: &MomentPoly) -> Result<MomentPoly, BracketError> {
    match (poly_kind(f)?, poly_kind(g)?) {
        (Some(a), Some(b)) if a != b => return Err(BracketError::KindMismatch),
        _ => {}
    }
    // {f,g} = df/dq dg/dp - df/dp dg/dq + sum over moment pairs.
    let mut out = f.diff_q() * g.diff_p();
    out -= &(f.diff_p() * g.diff_q());
    let f_keys = f.keys();
    let g_keys = g.keys();
    for kf in &f_keys {
        let df = f.diff_key(kf);
        if df.is_zero() {
            continue;
        }
        for kg in &g_keys {
            let elem = moment_bracket(kf, kg)?;
            if elem.is_zero() {
                continue;
            }
            let dg = g.diff_key(kg);
            if dg.is_zero() {
                continue;
            }
            out += &(&(&df * &dg) * &elem);
        }
    }
    Ok(out)
}

pub mod oracle {
    //! First-principles quantum bracket, built only from the commutation
    //! relation.
    //!
    //! Moments are state functions through both the operator average and the
    //! centroid subtraction, so the bracket is computed in a basis of
    //! state-independent observables: the raw symmetrized averages
    //! `m[j,k] = <Weyl(p_op^j q_op^k)>` taken about the origin. In this
    //! basis `{m_v, m_w} = -(i/hbar) <[v, w]>` with no correction terms, and
    //! the chain rule over raw coordinates is exact. Centered moments are
    //! expanded into the raw basis, bracketed, and the result is re-centered.
    //!
    //! Inside this module a quantum `MomentKey` of order >= 2 denotes the raw
    //! moment `m[a,b]`; order-one raw moments are the centroid symbols and
    //! are substituted eagerly so the centered-moment conventions of
    //! [`MomentPoly`] never misfire.

    use std::collections::{BTreeSet, HashMap};

    use num_rational::BigRational;

    use super::*;
    use crate::opalgebra::{commutator_reduce, weyl_moment, OperatorSum};

    #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
    enum RawVar {
        Q,
        P,
        Moment(u32, u32),
    }

    /// Stateful bracket oracle; caches raw conversions and elementary
    /// commutator brackets across calls.
    pub struct BracketOracle {
        raw_weyl: HashMap<(u32, u32), MomentPoly>,
        elementary: HashMap<(RawVar, RawVar), MomentPoly>,
    }

    impl Default for BracketOracle {
        fn default() -> Self {
            Self::new()
        }
    }

    impl BracketOracle {
        pub fn new() -> Self {
            Self { raw_weyl: HashMap::new(), elementary: HashMap::new() }
        }

        /// `{G[a,b], G[c,d]}` computed from commutators and the chain rule.
        pub fn moment_bracket(&mut self, a: u32, b: u32, c: u32, d: u32) -> MomentPoly {
            let f = centered_to_raw(a, b);
            let g = centered_to_raw(c, d);
            let raw = self.chain_bracket(&f, &g);
            raw_to_centered(&raw)
        }

        fn chain_bracket(&mut self, f: &MomentPoly, g: &MomentPoly) -> MomentPoly {
            let mut out = MomentPoly::zero();
            for u in raw_vars(f) {
                let df = diff_raw(f, &u);
                if df.is_zero() {
                    continue;
                }
                for v in raw_vars(g) {
                    let elem = self.elementary(u, v);
                    if elem.is_zero() {
                        continue;
                    }
                    let dg = diff_raw(g, &v);
                    if dg.is_zero() {
                        continue;
                    }
                    out += &(&(&df * &dg) * &elem);
                }
            }
            out
        }

        /// `{u, v} = -(i/hbar) <[u, v]>` in the raw basis.
        fn elementary(&mut self, u: RawVar, v: RawVar) -> MomentPoly {
            if let Some(hit) = self.elementary.get(&(u, v)) {
                return hit.clone();
            }
            let commutator = var_operator(u).commutator(&var_operator(v));
            let value = self.raw_to_moments(&commutator_reduce(&commutator));
            let value = mul_neg_i_div_hbar(&value);
            self.elementary.insert((u, v), value.clone());
            value
        }

        fn raw_to_moments(&mut self, reduced: &OperatorSum) -> MomentPoly {
            let mut out = MomentPoly::zero();
            for (word, coeff) in reduced.terms() {
                let (a, b) = word.counts();
                out += &(coeff * &self.raw_normal_to_weyl(a, b));
            }
            out
        }

        /// Expectation of the raw normal word `q_op^b p_op^a` in the raw
        /// Weyl basis; first raw moments are the centroid coordinates.
        fn raw_normal_to_weyl(&mut self, a: u32, b: u32) -> MomentPoly {
            match (a, b) {
                (0, 0) => return MomentPoly::one(),
                (1, 0) => return MomentPoly::p(),
                (0, 1) => return MomentPoly::q(),
                _ => {}
            }
            if let Some(hit) = self.raw_weyl.get(&(a, b)) {
                return hit.clone();
            }
            let reduced = commutator_reduce(&weyl_moment(a, b));
            let mut value = raw_moment_poly(a, b);
            for (word, coeff) in reduced.terms() {
                let (wa, wb) = word.counts();
                if wa == a && wb == b {
                    continue;
                }
                let lower = self.raw_normal_to_weyl(wa, wb);
                value -= &(coeff * lower);
            }
            self.raw_weyl.insert((a, b), value.clone());
            value
        }
    }

    fn raw_moment_poly(j: u32, k: u32) -> MomentPoly {
        match (j, k) {
            (0, 0) => MomentPoly::one(),
            (1, 0) => MomentPoly::p(),
            (0, 1) => MomentPoly::q(),
            _ => MomentPoly::moment(MomentKey::quantum(j, k)),
        }
    }

    fn var_operator(v: RawVar) -> OperatorSum {
        use crate::opalgebra::{Letter, OperatorWord};
        match v {
            RawVar::Q => OperatorSum::from_word(OperatorWord::new(vec![Letter::Q])),
            RawVar::P => OperatorSum::from_word(OperatorWord::new(vec![Letter::P])),
            RawVar::Moment(j, k) => weyl_moment(j, k),
        }
    }

    fn raw_vars(poly: &MomentPoly) -> BTreeSet<RawVar> {
        let mut vars = BTreeSet::new();
        for (mono, _) in poly.terms() {
            if mono.q_pow > 0 {
                vars.insert(RawVar::Q);
            }
            if mono.p_pow > 0 {
                vars.insert(RawVar::P);
            }
            for key in &mono.keys {
                vars.insert(RawVar::Moment(key.a, key.b));
            }
        }
        vars
    }

    fn diff_raw(poly: &MomentPoly, v: &RawVar) -> MomentPoly {
        match v {
            RawVar::Q => poly.diff_q(),
            RawVar::P => poly.diff_p(),
            RawVar::Moment(j, k) => poly.diff_key(&MomentKey::quantum(*j, *k)),
        }
    }

    /// Multiplies by `-i/hbar`; every term of a commutator expectation
    /// carries at least one power of `hbar`, so the division is exact.
    fn mul_neg_i_div_hbar(poly: &MomentPoly) -> MomentPoly {
        let mut out = MomentPoly::zero();
        for (mono, coeff) in poly.terms() {
            assert!(mono.hbar_pow >= 1, "commutator term lacks an hbar factor");
            let mut m = mono.clone();
            m.hbar_pow -= 1;
            m.i_pow += 1;
            out.add_term(m, -coeff.clone());
        }
        out
    }

    /// `G[a,b]` expanded over raw moments:
    /// `sum_{j,k} C(a,j) C(b,k) (-p)^(a-j) (-q)^(b-k) m[j,k]`.
    fn centered_to_raw(a: u32, b: u32) -> MomentPoly {
        let mut out = MomentPoly::zero();
        for j in 0..=a {
            for k in 0..=b {
                let mut coeff = BigRational::from_integer(binomial(a, j) * binomial(b, k));
                if (a - j + b - k) % 2 == 1 {
                    coeff = -coeff;
                }
                let mut term = raw_moment_poly(j, k).scale(&coeff);
                term = term * MomentPoly::p().pow(a - j);
                term = term * MomentPoly::q().pow(b - k);
                out += &term;
            }
        }
        out
    }

    /// Substitutes every raw moment by its centered expansion
    /// `m[j,k] = sum C(j,A) C(k,B) p^(j-A) q^(k-B) G[A,B]`.
    fn raw_to_centered(poly: &MomentPoly) -> MomentPoly {
        poly.substitute_keys(|key| {
            let (j, k) = (key.a, key.b);
            let mut image = MomentPoly::zero();
            for cap_a in 0..=j {
                for cap_b in 0..=k {
                    if cap_a + cap_b == 1 {
                        continue; // centered first moments vanish
                    }
                    let coeff = BigRational::from_integer(
                        binomial(j, cap_a) * binomial(k, cap_b),
                    );
                    let mut term = MomentPoly::moment(MomentKey::quantum(cap_a, cap_b))
                        .scale(&coeff);
                    term = term * MomentPoly::p().pow(j - cap_a);
                    term = term * MomentPoly::q().pow(k - cap_b);
                    image += &term;
                }
            }
            Some(image)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::ratio;
    use proptest::prelude::*;

    fn g(a: u32, b: u32) -> MomentPoly {
        MomentPoly::moment(MomentKey::quantum(a, b))
    }

    fn c(a: u32, b: u32) -> MomentPoly {
        MomentPoly::moment(MomentKey::classical(a, b))
    }

    #[test]
    fn k_coefficient_examples() {
        assert_eq!(k_coefficient(1, 1, 2, 0, 1), ratio(2, 1));
        assert_eq!(k_coefficient(1, 1, 1, 1, 1), ratio(0, 1));
        for (a, b, cc, d) in [(0, 0, 0, 0), (1, 2, 3, 4), (5, 0, 2, 3), (2, 2, 2, 2)] {
            assert_eq!(k_coefficient(a, b, cc, d, 0), ratio(1, 1));
        }
    }

    #[test]
    fn named_quantum_brackets() {
        // {G[1,2], G[0,2]} = -2 G[0,3]
        assert_eq!(quantum_bracket_indices(1, 2, 0, 2), g(0, 3).scale(&ratio(-2, 1)));
        // {G[1,1], G[2,0]} = 2 G[2,0]
        assert_eq!(quantum_bracket_indices(1, 1, 2, 0), g(2, 0).scale(&ratio(2, 1)));
    }

    #[test]
    fn momentum_pure_brackets_vanish() {
        for a in 0..=6 {
            for b in 0..=6 {
                assert!(quantum_bracket_indices(a, 0, b, 0).is_zero());
            }
        }
    }

    #[test]
    fn named_classical_brackets() {
        assert_eq!(classical_bracket_indices(1, 1, 2, 0), c(2, 0).scale(&ratio(2, 1)));
        // (bc - ad) = -2 for {C[1,2], C[0,2]}
        assert_eq!(classical_bracket_indices(1, 2, 0, 2), c(0, 3).scale(&ratio(-2, 1)));
    }

    #[test]
    fn centroid_brackets() {
        use BracketOperand::*;
        assert_eq!(elementary_bracket(&Q, &P).unwrap(), MomentPoly::one());
        assert!(elementary_bracket(&Q, &Q).unwrap().is_zero());
        assert!(elementary_bracket(&Q, &Moment(MomentKey::quantum(3, 2))).unwrap().is_zero());
        assert!(elementary_bracket(&Moment(MomentKey::quantum(2, 2)), &P).unwrap().is_zero());
    }

    #[test]
    fn kind_mismatch_is_an_error() {
        let x = MomentKey::quantum(2, 0);
        let y = MomentKey::classical(0, 2);
        assert_eq!(moment_bracket(&x, &y), Err(BracketError::KindMismatch));
    }

    #[test]
    fn second_order_brackets_carry_no_hbar() {
        for a in 0..=2u32 {
            let b = 2 - a;
            for cc in 0..=4u32 {
                for d in 0..=4u32 {
                    let bracket = quantum_bracket_indices(a, b, cc, d);
                    assert!(
                        !bracket.contains_hbar(),
                        "{{G[{a},{b}], G[{cc},{d}]}} unexpectedly has hbar"
                    );
                }
            }
        }
    }

    #[test]
    fn classical_limit_matches_classical_bracket_to_order_eight() {
        let mut keys = Vec::new();
        for order in 0..=8u32 {
            for a in 0..=order {
                keys.push((a, order - a));
            }
        }
        for &(a, b) in &keys {
            for &(cc, d) in &keys {
                let quantum = quantum_bracket_indices(a, b, cc, d)
                    .substitute_hbar_zero()
                    .map_kind(MomentKind::Classical);
                let classical = classical_bracket_indices(a, b, cc, d);
                assert_eq!(quantum, classical);
            }
        }
    }

    #[test]
    fn jacobi_identity_on_sampled_triples() {
        // Without truncation the closed-form brackets define an honest
        // Poisson structure; the cyclic sum must vanish exactly.
        let triples = [
            ((1, 1), (2, 0), (0, 2)),
            ((2, 1), (1, 2), (2, 2)),
            ((3, 0), (0, 3), (1, 1)),
            ((2, 2), (3, 1), (0, 2)),
        ];
        for (x, y, z) in triples {
            let g = |k: (u32, u32)| MomentPoly::moment(MomentKey::quantum(k.0, k.1));
            let cyclic = |a: (u32, u32), b: (u32, u32), c_key: (u32, u32)| {
                let inner = quantum_bracket_indices(b.0, b.1, c_key.0, c_key.1);
                poisson_bracket(&g(a), &inner).unwrap()
            };
            let total = &(&cyclic(x, y, z) + &cyclic(y, z, x)) + &cyclic(z, x, y);
            assert!(total.is_zero(), "Jacobi fails on {x:?},{y:?},{z:?}: {total}");
        }
    }

    #[test]
    fn oracle_matches_closed_form_low_orders() {
        let mut oracle = oracle::BracketOracle::new();
        for (a, b, cc, d) in [
            (1, 1, 2, 0),
            (1, 2, 0, 2),
            (2, 0, 0, 2),
            (2, 1, 1, 2),
            (3, 0, 0, 3),
            (2, 2, 2, 2),
        ] {
            let expected = quantum_bracket_indices(a, b, cc, d);
            let computed = oracle.moment_bracket(a, b, cc, d);
            assert_eq!(computed, expected, "oracle mismatch at ({a},{b}),({cc},{d})");
        }
    }

    #[test]
    fn poisson_bracket_on_polynomials() {
        // {q, p^2/2} = p
        let h = MomentPoly::p().pow(2).scale(&ratio(1, 2));
        assert_eq!(poisson_bracket(&MomentPoly::q(), &h).unwrap(), MomentPoly::p());
        // Leibniz: {G[1,1], G[2,0] G[0 ,2]} = {G11,G20} G02 + G20 {G11,G02}
        let prod = g(2, 0) * g(0, 2);
        let direct = poisson_bracket(&g(1, 1), &prod).unwrap();
        let leibniz = quantum_bracket_indices(1, 1, 2, 0) * g(0, 2)
            + g(2, 0) * quantum_bracket_indices(1, 1, 0, 2);
        assert_eq!(direct, leibniz);
    }

    fn arb_indices() -> impl Strategy<Value = (u32, u32, u32, u32)> {
        (0u32..5, 0u32..5, 0u32..5, 0u32..5)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn antisymmetry((a, b, cc, d) in arb_indices()) {
            let xy = quantum_bracket_indices(a, b, cc, d);
            let yx = quantum_bracket_indices(cc, d, a, b);
            prop_assert_eq!(xy, -&yx);
        }

        #[test]
        fn order_window((a, b, cc, d) in arb_indices()) {
            let bracket = quantum_bracket_indices(a, b, cc, d);
            let cap = a + b + cc + d;
            for (mono, _) in bracket.terms() {
                // Every monomial's total moment order stays below the
                // input orders' sum; single keys obey the paper window.
                prop_assert!(mono.moment_order() + 2 <= cap);
            }
        }
    }
}
