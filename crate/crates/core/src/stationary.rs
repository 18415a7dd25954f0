//! Stationary states: equilibrium points of the truncated flow and the
//! moment recursion for particle Hamiltonians `p^2/2 + V(q)`.
//!
//! Equilibria solve `rhs = 0` for every equation of motion. The algebraic
//! system is often rank deficient (the harmonic case leaves the overall
//! moment scale free), in which case the solution manifold is parametrized
//! rather than rejected; the recursion supplies the missing closure. For a
//! monomial potential `q^m` and vanishing position expectation the
//! recursion reads
//! `(2n+m+2) G[0,n+m] = 2E(n+1) G[0,n] + (hbar^2/4)(n+1)n(n-1) G[0,n-2]`,
//! and the classical version is the same with `hbar = 0`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::eomgen::{EomSystem, EomVar, HamiltonianSpec};
use crate::symcore::{ratio, MomentKey, MomentKind, MomentPoly};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StationaryError {
    #[error("Hamiltonian is not of the particle form p^2/2 + V(q)")]
    NotParticleForm,
    #[error("recursion requires a monomial potential q^m")]
    NotMonomial,
    #[error("moment G[0,{0}] is not seeded and cannot be inferred")]
    SeedingError(u32),
}

/// A stationary-state problem for `H = p^2/2 + V(q)` at energy `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryProblem {
    pub potential: HamiltonianSpec,
    pub kind: MomentKind,
    pub energy: f64,
    pub hbar: f64,
}

impl StationaryProblem {
    /// Builds from a full Hamiltonian, validating the `p^2/2` kinetic term.
    pub fn new(
        h: &HamiltonianSpec,
        kind: MomentKind,
        energy: f64,
        hbar: f64,
    ) -> Result<Self, StationaryError> {
        if h.coefficient(2, 0) != ratio(1, 2) {
            return Err(StationaryError::NotParticleForm);
        }
        let mut potential = HamiltonianSpec::new();
        for (&(p_pow, q_pow), coeff) in h.terms() {
            match p_pow {
                0 => potential.add_term(0, q_pow, coeff.clone()),
                2 if q_pow == 0 => {}
                _ => return Err(StationaryError::NotParticleForm),
            }
        }
        Ok(Self { potential, kind, energy, hbar })
    }

    pub fn from_potential(
        potential: &HamiltonianSpec,
        kind: MomentKind,
        energy: f64,
        hbar: f64,
    ) -> Result<Self, StationaryError> {
        if !potential.terms().all(|(&(p_pow, _), _)| p_pow == 0) {
            return Err(StationaryError::NotParticleForm);
        }
        Ok(Self { potential: potential.clone(), kind, energy, hbar })
    }

    /// The monomial degree `m` when `V = q^m` with unit coefficient.
    pub fn monomial_degree(&self) -> Result<u32, StationaryError> {
        let mut terms = self.potential.terms();
        match (terms.next(), terms.next()) {
            (Some((&(0, m), coeff)), None) if coeff.is_one() && m >= 1 => Ok(m),
            _ => Err(StationaryError::NotMonomial),
        }
    }

    fn effective_hbar(&self) -> f64 {
        match self.kind {
            MomentKind::Quantum => self.hbar,
            MomentKind::Classical => 0.0,
        }
    }
}

fn seeded(lower: &BTreeMap<u32, f64>, order: u32) -> Result<f64, StationaryError> {
    match order {
        0 => Ok(1.0),
        1 => Ok(0.0),
        n => lower.get(&n).copied().ok_or(StationaryError::SeedingError(n)),
    }
}

/// One application of the recursion: solves for `G[0,n+m]` from the seeded
/// lower moments `G[0,n]` and `G[0,n-2]`.
pub fn recursion_step(
    prob: &StationaryProblem,
    n: u32,
    lower: &BTreeMap<u32, f64>,
) -> Result<f64, StationaryError> {
    let m = prob.monomial_degree()?;
    let g_n = seeded(lower, n)?;
    let hbar = prob.effective_hbar();
    let curvature = f64::from((n + 1) * n * n.saturating_sub(1));
    let hbar_term = if n >= 2 && hbar != 0.0 {
        let g_n2 = seeded(lower, n - 2)?;
        hbar * hbar / 4.0 * curvature * g_n2
    } else {
        0.0
    };
    let numerator = 2.0 * prob.energy * f64::from(n + 1) * g_n + hbar_term;
    Ok(numerator / f64::from(2 * n + m + 2))
}

/// Symbolic recursion table for `V = q^m`: each determinable `G[0,k]` as an
/// exact polynomial in `E` and `hbar`. For `m > 2` the orders `2..m-1` are
/// genuine seeds and stay absent.
pub fn recursion_table_symbolic(
    m: u32,
    kind: MomentKind,
    max_order: u32,
) -> BTreeMap<u32, MomentPoly> {
    let mut table: BTreeMap<u32, MomentPoly> = BTreeMap::new();
    table.insert(0, MomentPoly::one());
    table.insert(1, MomentPoly::zero());
    if m == 0 {
        return table;
    }
    for n in 0..=max_order.saturating_sub(m) {
        if table.contains_key(&(n + m)) {
            continue;
        }
        let Some(g_n) = table.get(&n).cloned() else { continue };
        let mut numerator = (MomentPoly::energy() * g_n)
            .scale(&BigRational::from_integer(BigInt::from(2 * (n + 1))));
        if kind == MomentKind::Quantum && n >= 2 {
            let Some(g_n2) = table.get(&(n - 2)).cloned() else { continue };
            let weight = BigRational::new(
                BigInt::from(u64::from(n + 1) * u64::from(n) * u64::from(n - 1)),
                BigInt::from(4),
            );
            numerator += &(MomentPoly::hbar_pow(2) * g_n2).scale(&weight);
        }
        let divisor = BigRational::new(BigInt::one(), BigInt::from(2 * n + m + 2));
        table.insert(n + m, numerator.scale(&divisor));
    }
    table
}

/// Numeric recursion table up to `max_order`, starting from explicit seeds
/// for the orders the recursion cannot determine.
pub fn recursion_table(
    prob: &StationaryProblem,
    max_order: u32,
    seeds: &BTreeMap<u32, f64>,
) -> Result<BTreeMap<u32, f64>, StationaryError> {
    let m = prob.monomial_degree()?;
    let mut table = seeds.clone();
    table.insert(0, 1.0);
    table.insert(1, 0.0);
    for n in 0..=max_order.saturating_sub(m) {
        if table.contains_key(&(n + m)) {
            continue;
        }
        if !table.contains_key(&n) || (n >= 2 && !table.contains_key(&(n - 2))) {
            continue;
        }
        let value = recursion_step(prob, n, &table)?;
        table.insert(n + m, value);
    }
    Ok(table)
}

/// Centered polynomial in the position operator: coefficient `k` multiplies
/// `(q_op - q)^k`; coefficients are polynomials in the symbol `q`.
#[derive(Debug, Clone)]
struct CenteredQPoly {
    coeffs: Vec<MomentPoly>,
}

impl CenteredQPoly {
    fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    fn monomial(power: u32, coeff: MomentPoly) -> Self {
        let mut coeffs = vec![MomentPoly::zero(); power as usize + 1];
        coeffs[power as usize] = coeff;
        Self { coeffs }
    }

    /// Taylor expansion of a `q`-only potential about the centroid symbol.
    fn from_potential(v: &HamiltonianSpec) -> Self {
        let mut out = Self::zero();
        let degree = v.q_degree();
        for k in 0..=degree {
            let deriv = v.derivative(0, k);
            if deriv.is_zero() {
                continue;
            }
            let coeff = deriv
                .to_poly()
                .scale(&BigRational::new(BigInt::one(), crate::symcore::factorial(k)));
            out = out.add(&Self::monomial(k, coeff));
        }
        out
    }

    fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = vec![MomentPoly::zero(); len];
        for (idx, coeff) in coeffs.iter_mut().enumerate() {
            if let Some(a) = self.coeffs.get(idx) {
                *coeff += a;
            }
            if let Some(b) = other.coeffs.get(idx) {
                *coeff += b;
            }
        }
        Self { coeffs }
    }

    fn mul(&self, other: &Self) -> Self {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Self::zero();
        }
        let mut coeffs = vec![MomentPoly::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                let prod = a * b;
                coeffs[i + j] += &prod;
            }
        }
        Self { coeffs }
    }

    fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c.scale(&BigRational::from_integer(BigInt::from(k))))
            .collect();
        Self { coeffs }
    }

    /// Expectation value: `(q_op - q)^k` becomes `G[0,k]`.
    fn expectation(&self, kind: MomentKind) -> MomentPoly {
        let mut out = MomentPoly::zero();
        for (k, coeff) in self.coeffs.iter().enumerate() {
            if coeff.is_zero() {
                continue;
            }
            out += &(coeff * &MomentPoly::moment(MomentKey::new(kind, 0, k as u32)));
        }
        out
    }
}

/// The stationarity identity for `g = (q_op - q)^(g_power+2) / (g_power+2)`:
/// `2E <g''> - 2 <g'' V> - <g' V'> + (hbar^2/4) <g''''> = 0`, expanded into
/// position moments with the centroid `q` symbolic. The classical version
/// drops the fourth-derivative term.
pub fn stationary_condition(prob: &StationaryProblem, g_power: u32) -> MomentPoly {
    let v = CenteredQPoly::from_potential(&prob.potential);
    let v_prime = v.derivative();
    let g = CenteredQPoly::monomial(
        g_power + 2,
        MomentPoly::rational(1, i64::from(g_power) + 2),
    );
    let g1 = g.derivative();
    let g2 = g1.derivative();
    let g4 = g2.derivative().derivative();

    let kind = prob.kind;
    let mut condition =
        (MomentPoly::energy() * g2.expectation(kind)).scale(&ratio(2, 1));
    condition -= &g2.mul(&v).expectation(kind).scale(&ratio(2, 1));
    condition -= &g1.mul(&v_prime).expectation(kind);
    if kind == MomentKind::Quantum {
        condition += &(MomentPoly::hbar_pow(2) * g4.expectation(kind)).scale(&ratio(1, 4));
    }
    condition
}

/// Exact linear algebra over the equilibrium equations, when they are
/// affine with rational coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearAnalysis {
    pub unknowns: Vec<EomVar>,
    pub rank: usize,
    /// `unknowns - rank` when consistent: dimension of the solution manifold.
    pub deficiency: usize,
    pub consistent: bool,
    /// One solution (zeros in the free directions), when consistent.
    pub particular: Option<BTreeMap<EomVar, BigRational>>,
    /// Basis of the homogeneous solution space.
    pub null_basis: Vec<BTreeMap<EomVar, BigRational>>,
}

/// The algebraic system `rhs = 0` for a truncated flow.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSystem {
    pub equations: Vec<(EomVar, MomentPoly)>,
    /// Present when every equation is affine over the rationals.
    pub linear: Option<LinearAnalysis>,
}

/// Collects `rhs = 0` for every retained variable and, for affine systems,
/// reports rank, deficiency and the solution manifold.
pub fn equilibrium_system(sys: &EomSystem) -> EquilibriumSystem {
    let equations: Vec<(EomVar, MomentPoly)> =
        sys.rhs.iter().map(|(var, rhs)| (*var, rhs.clone())).collect();
    let unknowns: Vec<EomVar> = sys.rhs.keys().copied().collect();
    let linear = linear_analysis(&equations, &unknowns);
    EquilibriumSystem { equations, linear }
}

fn var_of_monomial(mono: &crate::symcore::Monomial) -> Option<Option<EomVar>> {
    // None = not affine; Some(None) = constant monomial.
    if mono.hbar_pow > 0 || mono.energy_pow > 0 || mono.i_pow != 0 {
        return None;
    }
    let var_count = mono.q_pow + mono.p_pow + mono.keys.len() as u32;
    match var_count {
        0 => Some(None),
        1 => {
            if mono.q_pow == 1 {
                Some(Some(EomVar::Q))
            } else if mono.p_pow == 1 {
                Some(Some(EomVar::P))
            } else {
                Some(Some(EomVar::Moment(mono.keys[0])))
            }
        }
        _ => None,
    }
}

fn linear_analysis(
    equations: &[(EomVar, MomentPoly)],
    unknowns: &[EomVar],
) -> Option<LinearAnalysis> {
    let col_of: BTreeMap<EomVar, usize> =
        unknowns.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let cols = unknowns.len();
    // augmented matrix [A | b] for A x = b with b = -constant
    let mut rows: Vec<Vec<BigRational>> = Vec::new();
    for (_, rhs) in equations {
        let mut row = vec![BigRational::zero(); cols + 1];
        for (mono, coeff) in rhs.terms() {
            match var_of_monomial(mono)? {
                None => row[cols] -= coeff,
                Some(var) => {
                    let col = col_of.get(&var)?;
                    row[*col] += coeff;
                }
            }
        }
        rows.push(row);
    }

    // Gaussian elimination with exact pivots.
    let mut pivot_cols = Vec::new();
    let mut pivot_row = 0usize;
    for col in 0..cols {
        let Some(swap) = (pivot_row..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(pivot_row, swap);
        let pivot = rows[pivot_row][col].clone();
        for value in rows[pivot_row].iter_mut() {
            *value /= &pivot;
        }
        for r in 0..rows.len() {
            if r != pivot_row && !rows[r][col].is_zero() {
                let factor = rows[r][col].clone();
                for c in 0..=cols {
                    let delta = &factor * &rows[pivot_row][c];
                    rows[r][c] -= delta;
                }
            }
        }
        pivot_cols.push(col);
        pivot_row += 1;
        if pivot_row == rows.len() {
            break;
        }
    }
    let rank = pivot_cols.len();
    let consistent = rows
        .iter()
        .all(|row| !(row[..cols].iter().all(BigRational::is_zero) && !row[cols].is_zero()));

    let particular = if consistent {
        let mut solution = BTreeMap::new();
        for (r, &col) in pivot_cols.iter().enumerate() {
            solution.insert(unknowns[col], rows[r][cols].clone());
        }
        for var in unknowns {
            solution.entry(*var).or_insert_with(BigRational::zero);
        }
        Some(solution)
    } else {
        None
    };

    let mut null_basis = Vec::new();
    for free_col in 0..cols {
        if pivot_cols.contains(&free_col) {
            continue;
        }
        let mut direction = BTreeMap::new();
        direction.insert(unknowns[free_col], BigRational::one());
        for (r, &col) in pivot_cols.iter().enumerate() {
            let value = -rows[r][free_col].clone();
            if !value.is_zero() {
                direction.insert(unknowns[col], value);
            }
        }
        null_basis.push(direction);
    }

    Some(LinearAnalysis {
        unknowns: unknowns.to_vec(),
        rank,
        deficiency: cols - rank,
        consistent,
        particular,
        null_basis,
    })
}
