//! Effective Hamiltonians and truncated equations of motion.
//!
//! A polynomial Hamiltonian `H(q,p)` is lifted to an effective Hamiltonian
//! on the moment phase space by Taylor expansion about the centroid:
//! `H + sum 1/(a! b!) d^{a+b}H/dp^a dq^b * G[a,b]`. Bracketing a variable
//! with the effective Hamiltonian yields its equation of motion. The moment
//! hierarchy never closes, so a truncation order `N` is imposed in one of
//! two inequivalent ways: truncate the Hamiltonian first (route 1) or
//! bracket against the order-`2N` Hamiltonian and truncate afterwards
//! (route 2). The centroid equations agree across routes.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::brackets::poisson_bracket;
use crate::symcore::{factorial, MomentKey, MomentKind, MomentPoly};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EomError {
    #[error("truncation order must be at least {min}, got {got}")]
    OrderTooLow { min: u32, got: u32 },
    #[error("Hamiltonian is not harmonic (a term has total degree > 2)")]
    NotHarmonic,
    #[error("Hamiltonian piece depends on q; expected a function of p only")]
    NotLinear,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("Hamiltonian parse error at byte {position}: {message}")]
pub struct HamiltonianParseError {
    pub position: usize,
    pub message: String,
}

/// A polynomial Hamiltonian: exact rational coefficient per `(p^a, q^b)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HamiltonianSpec {
    terms: BTreeMap<(u32, u32), BigRational>,
}

impl HamiltonianSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = ((u32, u32), BigRational)>,
    {
        let mut h = Self::new();
        for ((p_pow, q_pow), coeff) in terms {
            h.add_term(p_pow, q_pow, coeff);
        }
        h
    }

    pub fn add_term(&mut self, p_pow: u32, q_pow: u32, coeff: BigRational) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry((p_pow, q_pow)).or_insert_with(BigRational::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&(p_pow, q_pow));
        }
    }

    pub fn coefficient(&self, p_pow: u32, q_pow: u32) -> BigRational {
        self.terms.get(&(p_pow, q_pow)).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &BigRational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn p_degree(&self) -> u32 {
        self.terms.keys().map(|(p, _)| *p).max().unwrap_or(0)
    }

    pub fn q_degree(&self) -> u32 {
        self.terms.keys().map(|(_, q)| *q).max().unwrap_or(0)
    }

    /// Harmonic means total degree at most two, so all second derivatives
    /// are constant.
    pub fn is_harmonic(&self) -> bool {
        self.terms.keys().all(|(p, q)| p + q <= 2)
    }

    /// Whether the spec depends only on `p`.
    pub fn is_momentum_only(&self) -> bool {
        self.terms.keys().all(|(_, q)| *q == 0)
    }

    /// `d^{dp+dq} H / dp^dp dq^dq`, exact.
    pub fn derivative(&self, dp: u32, dq: u32) -> HamiltonianSpec {
        let mut out = HamiltonianSpec::new();
        for (&(p_pow, q_pow), coeff) in &self.terms {
            if p_pow < dp || q_pow < dq {
                continue;
            }
            let mut factor = BigInt::one();
            for k in 0..dp {
                factor *= BigInt::from(p_pow - k);
            }
            for k in 0..dq {
                factor *= BigInt::from(q_pow - k);
            }
            out.add_term(p_pow - dp, q_pow - dq, coeff * BigRational::from_integer(factor));
        }
        out
    }

    /// The classical Hamiltonian as a polynomial in the centroid symbols.
    pub fn to_poly(&self) -> MomentPoly {
        let mut out = MomentPoly::zero();
        for (&(p_pow, q_pow), coeff) in &self.terms {
            let term = (MomentPoly::p().pow(p_pow) * MomentPoly::q().pow(q_pow)).scale(coeff);
            out += &term;
        }
        out
    }

    pub fn eval(&self, q: f64, p: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(p_pow, q_pow), coeff)| {
                coeff.to_f64().unwrap() * p.powi(p_pow as i32) * q.powi(q_pow as i32)
            })
            .sum()
    }

    /// Parses the inline grammar, e.g. `0.5*p^2 + 0.25*q^4` or `q*p`.
    ///
    /// Decimal coefficients are converted to exact rationals. Division is
    /// only valid inside a coefficient token (`1/2*p^2`), not after symbols.
    pub fn parse_inline(input: &str) -> Result<Self, HamiltonianParseError> {
        parse_hamiltonian_inline(input)
    }

    /// Parses the line-oriented config format: one `coeff p^a q^b` per line,
    /// `#` comments and blank lines ignored.
    pub fn parse_lines(input: &str) -> Result<Self, HamiltonianParseError> {
        let mut h = HamiltonianSpec::new();
        let mut offset = 0usize;
        for line in input.lines() {
            let body = line.split('#').next().unwrap_or("").trim();
            if !body.is_empty() {
                let term = parse_hamiltonian_inline(body).map_err(|e| HamiltonianParseError {
                    position: offset + e.position,
                    message: e.message,
                })?;
                for (&(p_pow, q_pow), coeff) in &term.terms {
                    h.add_term(p_pow, q_pow, coeff.clone());
                }
            }
            offset += line.len() + 1;
        }
        Ok(h)
    }
}

impl fmt::Display for HamiltonianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (idx, (&(p_pow, q_pow), coeff)) in self.terms.iter().enumerate() {
            let negative = coeff.is_negative();
            if idx == 0 {
                if negative {
                    f.write_str("-")?;
                }
            } else if negative {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            let magnitude = coeff.abs();
            let mut parts: Vec<String> = Vec::new();
            if !magnitude.is_one() || (p_pow == 0 && q_pow == 0) {
                if magnitude.denom().is_one() {
                    parts.push(magnitude.numer().to_string());
                } else {
                    parts.push(format!("{}/{}", magnitude.numer(), magnitude.denom()));
                }
            }
            match p_pow {
                0 => {}
                1 => parts.push("p".into()),
                k => parts.push(format!("p^{}", k)),
            }
            match q_pow {
                0 => {}
                1 => parts.push("q".into()),
                k => parts.push(format!("q^{}", k)),
            }
            f.write_str(&parts.join("*"))?;
        }
        Ok(())
    }
}

fn parse_hamiltonian_inline(input: &str) -> Result<HamiltonianSpec, HamiltonianParseError> {
    let bytes = input.as_bytes();
    let mut pos = 0usize;
    let mut h = HamiltonianSpec::new();
    let err = |pos: usize, message: &str| HamiltonianParseError {
        position: pos,
        message: message.to_string(),
    };
    let skip_ws = |pos: &mut usize| {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
    };

    fn read_uint(bytes: &[u8], pos: &mut usize) -> Option<u64> {
        let start = *pos;
        while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
            *pos += 1;
        }
        if start == *pos {
            return None;
        }
        std::str::from_utf8(&bytes[start..*pos]).unwrap().parse().ok()
    }

    skip_ws(&mut pos);
    if pos >= bytes.len() {
        return Err(err(0, "empty Hamiltonian"));
    }

    let mut sign = BigRational::one();
    if bytes[pos] == b'-' {
        sign = -sign;
        pos += 1;
    } else if bytes[pos] == b'+' {
        pos += 1;
    }

    loop {
        skip_ws(&mut pos);
        // one term: factors separated by optional `*`
        let mut coeff = sign.clone();
        let mut p_pow = 0u32;
        let mut q_pow = 0u32;
        let mut saw_factor = false;
        loop {
            skip_ws(&mut pos);
            if pos >= bytes.len() {
                break;
            }
            match bytes[pos] {
                b'0'..=b'9' => {
                    saw_factor = true;
                    let start = pos;
                    let int_part = read_uint(bytes, &mut pos).ok_or_else(|| {
                        err(start, "expected number")
                    })?;
                    let mut value = BigRational::from_integer(BigInt::from(int_part));
                    if pos < bytes.len() && bytes[pos] == b'.' {
                        pos += 1;
                        let frac_start = pos;
                        let frac = read_uint(bytes, &mut pos)
                            .ok_or_else(|| err(frac_start, "expected digits after `.`"))?;
                        let digits = pos - frac_start;
                        let scale = BigInt::from(10u32).pow(digits as u32);
                        value += BigRational::new(BigInt::from(frac), scale);
                    } else if pos < bytes.len() && bytes[pos] == b'/' {
                        pos += 1;
                        let den_start = pos;
                        let den = read_uint(bytes, &mut pos)
                            .ok_or_else(|| err(den_start, "expected digits after `/`"))?;
                        if den == 0 {
                            return Err(err(den_start, "zero denominator"));
                        }
                        value /= BigRational::from_integer(BigInt::from(den));
                    }
                    coeff *= value;
                }
                b'p' | b'q' => {
                    saw_factor = true;
                    let is_p = bytes[pos] == b'p';
                    pos += 1;
                    let mut exp = 1u32;
                    if pos < bytes.len() && bytes[pos] == b'^' {
                        pos += 1;
                        let exp_start = pos;
                        exp = read_uint(bytes, &mut pos)
                            .ok_or_else(|| err(exp_start, "expected exponent digits"))?
                            as u32;
                    }
                    if is_p {
                        p_pow += exp;
                    } else {
                        q_pow += exp;
                    }
                }
                b'*' => {
                    pos += 1;
                    continue;
                }
                b'+' | b'-' => break,
                other => {
                    return Err(err(pos, &format!("unexpected character `{}`", other as char)));
                }
            }
        }
        if !saw_factor {
            return Err(err(pos, "expected a term"));
        }
        h.add_term(p_pow, q_pow, coeff);
        skip_ws(&mut pos);
        if pos >= bytes.len() {
            break;
        }
        sign = match bytes[pos] {
            b'+' => BigRational::one(),
            b'-' => -BigRational::one(),
            other => return Err(err(pos, &format!("expected `+` or `-`, got `{}`", other as char))),
        };
        pos += 1;
    }
    Ok(h)
}

/// How the order-`N` cut-off is applied to the moment equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    /// Route 1: truncate the effective Hamiltonian at order `N`, bracket,
    /// truncate the result again.
    TruncateThenBracket,
    /// Route 2: bracket against the order-`2N` effective Hamiltonian and
    /// truncate only the result.
    BracketThenTruncate,
}

impl Route {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Route::TruncateThenBracket),
            2 => Some(Route::BracketThenTruncate),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Route::TruncateThenBracket => 1,
            Route::BracketThenTruncate => 2,
        }
    }
}

/// A dynamical variable of the moment hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EomVar {
    Q,
    P,
    Moment(MomentKey),
}

impl EomVar {
    fn sort_key(&self) -> (u8, u32, i64, u32) {
        match self {
            EomVar::Q => (0, 0, 0, 0),
            EomVar::P => (1, 0, 0, 0),
            // moments ordered by total order, then descending momentum index
            EomVar::Moment(k) => (2, k.order(), -i64::from(k.a), k.b),
        }
    }

    pub fn to_poly(&self) -> MomentPoly {
        match self {
            EomVar::Q => MomentPoly::q(),
            EomVar::P => MomentPoly::p(),
            EomVar::Moment(k) => MomentPoly::moment(*k),
        }
    }
}

impl PartialOrd for EomVar {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EomVar {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl fmt::Display for EomVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EomVar::Q => f.write_str("q"),
            EomVar::P => f.write_str("p"),
            EomVar::Moment(k) => write!(f, "{}", k),
        }
    }
}

/// Right-hand sides for the centroid and all retained moments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EomSystem {
    pub kind: MomentKind,
    pub order: u32,
    pub route: Route,
    pub hamiltonian: HamiltonianSpec,
    pub rhs: BTreeMap<EomVar, MomentPoly>,
}

impl EomSystem {
    pub fn rhs_of(&self, var: &EomVar) -> Option<&MomentPoly> {
        self.rhs.get(var)
    }

    /// Retained moment keys in display order.
    pub fn moment_keys(&self) -> Vec<MomentKey> {
        self.rhs
            .keys()
            .filter_map(|v| match v {
                EomVar::Moment(k) => Some(*k),
                _ => None,
            })
            .collect()
    }

    /// One `d<var>/dt = <poly>` line per equation, in display order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (var, rhs) in &self.rhs {
            out.push_str(&format!("d{}/dt = {}\n", var, rhs));
        }
        out
    }

    /// Parses one line of [`Self::to_text`] output.
    pub fn parse_equation(line: &str) -> Option<(EomVar, MomentPoly)> {
        let (lhs, rhs) = line.split_once('=')?;
        let lhs = lhs.trim();
        let name = lhs.strip_prefix('d')?.strip_suffix("/dt")?;
        let var = match name {
            "q" => EomVar::Q,
            "p" => EomVar::P,
            _ => {
                let poly: MomentPoly = name.parse().ok()?;
                let keys: Vec<_> = poly.keys().into_iter().collect();
                if keys.len() != 1 {
                    return None;
                }
                EomVar::Moment(keys[0])
            }
        };
        let poly = rhs.trim().parse().ok()?;
        Some((var, poly))
    }
}

/// All moment keys of order `2..=max_order` for a kind, in display order.
pub fn moment_grid(kind: MomentKind, max_order: u32) -> Vec<MomentKey> {
    let mut keys = Vec::new();
    for order in 2..=max_order {
        for a in (0..=order).rev() {
            keys.push(MomentKey::new(kind, a, order - a));
        }
    }
    keys
}

/// The effective Hamiltonian: `H(q,p)` plus moment corrections up to
/// `max_order`, exact for polynomial `H`.
pub fn effective_hamiltonian(
    h: &HamiltonianSpec,
    kind: MomentKind,
    max_order: u32,
) -> MomentPoly {
    let mut out = h.to_poly();
    let max_a = h.p_degree();
    let max_b = h.q_degree();
    for a in 0..=max_a {
        for b in 0..=max_b {
            let order = a + b;
            if order < 2 || order > max_order {
                continue;
            }
            let deriv = h.derivative(a, b);
            if deriv.is_zero() {
                continue;
            }
            let weight = BigRational::new(BigInt::one(), factorial(a) * factorial(b));
            let term = (deriv.to_poly() * MomentPoly::moment(MomentKey::new(kind, a, b)))
                .scale(&weight);
            out += &term;
        }
    }
    out
}

fn truncate_to_order(poly: &MomentPoly, max_order: u32) -> MomentPoly {
    poly.restrict_keys(|key| key.order() <= max_order)
}

/// Derives the truncated equations of motion for `q`, `p`, and all moments
/// of order `2..=n` under the chosen cut-off route.
pub fn derive_eom(
    h: &HamiltonianSpec,
    kind: MomentKind,
    n: u32,
    route: Route,
) -> Result<EomSystem, EomError> {
    if n < 2 {
        return Err(EomError::OrderTooLow { min: 2, got: n });
    }
    let hamiltonian_order = match route {
        Route::TruncateThenBracket => n,
        Route::BracketThenTruncate => 2 * n,
    };
    let h_eff = effective_hamiltonian(h, kind, hamiltonian_order);
    let mut rhs = BTreeMap::new();
    let mut vars = vec![EomVar::Q, EomVar::P];
    vars.extend(moment_grid(kind, n).into_iter().map(EomVar::Moment));
    for var in vars {
        let bracket = poisson_bracket(&var.to_poly(), &h_eff)
            .expect("uniform moment kind by construction");
        rhs.insert(var, truncate_to_order(&bracket, n));
    }
    Ok(EomSystem { kind, order: n, route, hamiltonian: h.clone(), rhs })
}

/// Closed-form equations for harmonic Hamiltonians: orders decouple and the
/// centroid follows the classical point trajectory.
pub fn harmonic_eom(h: &HamiltonianSpec, kind: MomentKind, n: u32) -> Result<EomSystem, EomError> {
    if !h.is_harmonic() {
        return Err(EomError::NotHarmonic);
    }
    if n < 2 {
        return Err(EomError::OrderTooLow { min: 2, got: n });
    }
    let h_pp = h.derivative(2, 0).coefficient(0, 0);
    let h_pq = h.derivative(1, 1).coefficient(0, 0);
    let h_qq = h.derivative(0, 2).coefficient(0, 0);
    let mut rhs = BTreeMap::new();
    rhs.insert(EomVar::Q, h.derivative(1, 0).to_poly());
    rhs.insert(EomVar::P, -h.derivative(0, 1).to_poly());
    for key in moment_grid(kind, n) {
        let (a, b) = (key.a, key.b);
        let mut eq = MomentPoly::zero();
        if b > 0 {
            eq += &MomentPoly::moment(MomentKey::new(kind, a + 1, b - 1))
                .scale(&(&h_pp * BigRational::from_integer(BigInt::from(b))));
        }
        let skew = BigRational::from_integer(BigInt::from(i64::from(b) - i64::from(a)));
        eq += &MomentPoly::moment(key).scale(&(&h_pq * skew));
        if a > 0 {
            eq -= &MomentPoly::moment(MomentKey::new(kind, a - 1, b + 1))
                .scale(&(&h_qq * BigRational::from_integer(BigInt::from(a))));
        }
        rhs.insert(EomVar::Moment(key), eq);
    }
    // Both cut-off routes coincide for harmonic Hamiltonians.
    Ok(EomSystem {
        kind,
        order: n,
        route: Route::TruncateThenBracket,
        hamiltonian: h.clone(),
        rhs,
    })
}

/// The decoupled subsystem of a Hamiltonian linear in position,
/// `H = q*phi(p) + xi(p)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearSubsystem {
    pub system: EomSystem,
    /// Moment keys coupled into the retained set but outside it; the
    /// subsystem is infinite and the truncation at `max_a` is explicit.
    pub truncated: std::collections::BTreeSet<MomentKey>,
}

/// Equations for `q`, `p`, `G[a,0]` (`a <= max_a`) and `G[b,m]`
/// (`b <= max_a`, `1 <= m <= max_b`) under `H = q*phi(p) + xi(p)`.
pub fn linear_eom_subsystem(
    phi: &HamiltonianSpec,
    xi: &HamiltonianSpec,
    kind: MomentKind,
    max_a: u32,
    max_b: u32,
) -> Result<LinearSubsystem, EomError> {
    if !phi.is_momentum_only() || !xi.is_momentum_only() {
        return Err(EomError::NotLinear);
    }
    if max_b < 1 || max_a < 2 {
        return Err(EomError::OrderTooLow { min: 2, got: max_a.min(max_b) });
    }
    let mut h = xi.clone();
    for (&(p_pow, _), coeff) in phi.terms() {
        h.add_term(p_pow, 1, coeff.clone());
    }
    // Polynomial phi and xi make the effective Hamiltonian exact at finite
    // order: corrections stop at order max(deg phi, deg xi) + 1.
    let h_eff = effective_hamiltonian(&h, kind, h.p_degree() + 2);

    let retained = |key: &MomentKey| key.a <= max_a && key.b <= max_b;
    let mut retained_vars = vec![EomVar::Q, EomVar::P];
    for a in 2..=max_a {
        retained_vars.push(EomVar::Moment(MomentKey::new(kind, a, 0)));
    }
    for m in 1..=max_b {
        for a in 0..=max_a {
            let key = MomentKey::new(kind, a, m);
            if key.order() >= 2 {
                retained_vars.push(EomVar::Moment(key));
            }
        }
    }

    let mut rhs = BTreeMap::new();
    let mut truncated = std::collections::BTreeSet::new();
    for var in retained_vars {
        let bracket = poisson_bracket(&var.to_poly(), &h_eff)
            .expect("uniform moment kind by construction");
        for key in bracket.keys() {
            if !retained(&key) {
                truncated.insert(key);
            }
        }
        rhs.insert(var, bracket.restrict_keys(retained));
    }
    let system = EomSystem {
        kind,
        order: max_a + max_b,
        route: Route::BracketThenTruncate,
        hamiltonian: h,
        rhs,
    };
    Ok(LinearSubsystem { system, truncated })
}

/// Time derivative of the Heisenberg combination
/// `G[2,0] G[0,2] - G[1,1]^2`; only derivatives of `H` beyond second order
/// contribute, so it vanishes identically for harmonic Hamiltonians.
pub fn heisenberg_drift(h: &HamiltonianSpec, n: u32) -> Result<MomentPoly, EomError> {
    let kind = MomentKind::Quantum;
    let mut out = MomentPoly::zero();
    for a in 0..=h.p_degree() {
        for b in 0..=h.q_degree() {
            if a + b < 3 {
                continue;
            }
            let deriv = h.derivative(a, b);
            if deriv.is_zero() {
                continue;
            }
            let weight = BigRational::new(BigInt::from(2), factorial(a) * factorial(b));
            let mut combo = MomentPoly::zero();
            if a > 0 {
                combo += &(MomentPoly::moment(MomentKey::new(kind, 2, 0))
                    * MomentPoly::moment(MomentKey::new(kind, a - 1, b + 1)))
                .scale(&BigRational::from_integer(BigInt::from(a)));
            }
            if b > 0 {
                combo -= &(MomentPoly::moment(MomentKey::new(kind, 0, 2))
                    * MomentPoly::moment(MomentKey::new(kind, a + 1, b - 1)))
                .scale(&BigRational::from_integer(BigInt::from(b)));
            }
            let skew = BigRational::from_integer(BigInt::from(i64::from(b) - i64::from(a)));
            combo += &(MomentPoly::moment(MomentKey::new(kind, 1, 1))
                * MomentPoly::moment(MomentKey::new(kind, a, b)))
            .scale(&skew);
            out += &(deriv.to_poly() * combo).scale(&weight);
        }
    }
    let needed = out.max_key_order();
    if needed > n {
        return Err(EomError::OrderTooLow { min: needed, got: n });
    }
    Ok(out)
}
