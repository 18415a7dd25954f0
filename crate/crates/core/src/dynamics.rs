//! Numerical evolution of moment systems and a Liouville-ensemble oracle.
//!
//! Moment trajectories use a fixed-step classical 4th-order Runge-Kutta
//! scheme: deterministic for fixed inputs, and exact on the
//! polynomial-in-time solutions generated by momentum-only Hamiltonians.
//! The ensemble oracle evolves phase-space particles along Hamilton's
//! equations (the characteristics of the Liouville equation) and recovers
//! classical moments by direct averaging.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::eomgen::{effective_hamiltonian, EomSystem, EomVar, HamiltonianSpec};
use crate::symcore::{MomentKey, MomentKind, MomentPoly};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid integration step: {0}")]
    InvalidStep(String),
    #[error("initial state incompatible with system: {0}")]
    IncompatibleState(String),
    #[error("right-hand side contains the energy symbol E; bind it before integrating")]
    EnergySymbol,
    #[error("trajectory diverged at t = {t}")]
    Divergence { t: f64, last: Box<MomentState> },
    #[error("particle {index} diverged at t = {t}")]
    ParticleDivergence { index: usize, t: f64 },
    #[error("invalid ensemble covariance: {0}")]
    BadCovariance(String),
}

/// Numeric snapshot of the centroid and retained moments at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    pub t: f64,
    pub q: f64,
    pub p: f64,
    pub hbar: f64,
    pub moments: BTreeMap<MomentKey, f64>,
}

impl MomentState {
    pub fn new(t: f64, q: f64, p: f64, hbar: f64) -> Self {
        Self { t, q, p, hbar, moments: BTreeMap::new() }
    }

    pub fn with_moment(mut self, key: MomentKey, value: f64) -> Self {
        self.moments.insert(key, value);
        self
    }

    /// Moment value, defaulting to zero for unset keys.
    pub fn moment(&self, key: &MomentKey) -> f64 {
        self.moments.get(key).copied().unwrap_or(0.0)
    }
}

/// A moment polynomial flattened to f64 terms over a state vector.
struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, u32)>)>,
}

impl CompiledPoly {
    fn eval(&self, vars: &[f64]) -> f64 {
        let mut total = 0.0;
        for (coeff, powers) in &self.terms {
            let mut value = *coeff;
            for &(idx, pow) in powers {
                value *= vars[idx].powi(pow as i32);
            }
            total += value;
        }
        total
    }
}

/// Variable layout: index 0 is `q`, 1 is `p`, moments follow in key order.
fn compile_poly(
    poly: &MomentPoly,
    key_index: &BTreeMap<MomentKey, usize>,
    hbar: f64,
) -> Result<CompiledPoly, DynamicsError> {
    let mut terms = Vec::with_capacity(poly.num_terms());
    for (mono, coeff) in poly.terms() {
        if mono.energy_pow > 0 {
            return Err(DynamicsError::EnergySymbol);
        }
        debug_assert_eq!(mono.i_pow, 0, "equations of motion must be real");
        let mut value = coeff.to_f64().expect("coefficient fits in f64");
        value *= hbar.powi(mono.hbar_pow as i32);
        let mut powers: Vec<(usize, u32)> = Vec::new();
        if mono.q_pow > 0 {
            powers.push((0, mono.q_pow));
        }
        if mono.p_pow > 0 {
            powers.push((1, mono.p_pow));
        }
        let mut idx = 0;
        while idx < mono.keys.len() {
            let key = mono.keys[idx];
            let mut mult = 1;
            while idx + mult < mono.keys.len() && mono.keys[idx + mult] == key {
                mult += 1;
            }
            let var = key_index.get(&key).ok_or_else(|| {
                DynamicsError::IncompatibleState(format!("moment {key} not retained by system"))
            })?;
            powers.push((*var, mult as u32));
            idx += mult;
        }
        terms.push((value, powers));
    }
    Ok(CompiledPoly { terms })
}

/// A moment not expected to be negative dipped below zero during a run;
/// truncation can do this transiently, so it is reported rather than fatal.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivityWarning {
    pub t: f64,
    pub key: MomentKey,
    pub value: f64,
}

#[derive(Debug)]
pub struct Integration {
    pub states: Vec<MomentState>,
    pub warnings: Vec<PositivityWarning>,
}

/// Integrates `sys` from `init` to `t_end` with fixed step `dt`, sampling
/// every `stride` steps. A negative `dt` integrates backwards.
pub fn integrate(
    sys: &EomSystem,
    init: &MomentState,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<Integration, DynamicsError> {
    if dt == 0.0 || !dt.is_finite() {
        return Err(DynamicsError::InvalidStep("dt must be finite and nonzero".into()));
    }
    if stride == 0 {
        return Err(DynamicsError::InvalidStep("stride must be at least 1".into()));
    }
    let span = t_end - init.t;
    let steps_f = span / dt;
    if steps_f < 0.0 {
        return Err(DynamicsError::InvalidStep(
            "sign of dt does not move t toward t_end".into(),
        ));
    }
    let steps = steps_f.round() as usize;

    let keys = sys.moment_keys();
    for key in init.moments.keys() {
        if !keys.contains(key) {
            return Err(DynamicsError::IncompatibleState(format!(
                "initial moment {key} is not a variable of the order-{} system",
                sys.order
            )));
        }
    }
    let mut key_index = BTreeMap::new();
    for (offset, key) in keys.iter().enumerate() {
        key_index.insert(*key, offset + 2);
    }

    let hbar = if sys.kind == MomentKind::Classical { 0.0 } else { init.hbar };
    let mut compiled = Vec::with_capacity(keys.len() + 2);
    for var in [EomVar::Q, EomVar::P].into_iter().chain(keys.iter().map(|k| EomVar::Moment(*k))) {
        let rhs = sys.rhs_of(&var).ok_or_else(|| {
            DynamicsError::IncompatibleState(format!("system lacks an equation for {var}"))
        })?;
        compiled.push(compile_poly(rhs, &key_index, hbar)?);
    }

    let dim = keys.len() + 2;
    let mut x = vec![0.0; dim];
    x[0] = init.q;
    x[1] = init.p;
    for (key, idx) in &key_index {
        x[*idx] = init.moment(key);
    }

    let derivs = |x: &[f64], out: &mut [f64]| {
        for (slot, poly) in out.iter_mut().zip(&compiled) {
            *slot = poly.eval(x);
        }
    };

    let make_state = |t: f64, x: &[f64]| -> MomentState {
        let mut state = MomentState::new(t, x[0], x[1], init.hbar);
        for (key, idx) in &key_index {
            state.moments.insert(*key, x[*idx]);
        }
        state
    };

    let mut states = Vec::with_capacity(steps / stride + 2);
    let mut warnings: Vec<PositivityWarning> = Vec::new();
    let mut warned: std::collections::BTreeSet<MomentKey> = Default::default();
    let mut check_sample = |t: f64, x: &[f64], states: &mut Vec<MomentState>| {
        let state = make_state(t, x);
        for (key, value) in &state.moments {
            if key.a % 2 == 0 && key.b % 2 == 0 && *value < -1e-12 && !warned.contains(key) {
                warned.insert(*key);
                warnings.push(PositivityWarning { t, key: *key, value: *value });
            }
        }
        states.push(state);
    };

    check_sample(init.t, &x, &mut states);

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    let mut t = init.t;
    for step in 1..=steps {
        derivs(&x, &mut k1);
        for i in 0..dim {
            scratch[i] = x[i] + 0.5 * dt * k1[i];
        }
        derivs(&scratch, &mut k2);
        for i in 0..dim {
            scratch[i] = x[i] + 0.5 * dt * k2[i];
        }
        derivs(&scratch, &mut k3);
        for i in 0..dim {
            scratch[i] = x[i] + dt * k3[i];
        }
        derivs(&scratch, &mut k4);
        for i in 0..dim {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = init.t + dt * step as f64;
        if x.iter().any(|v| !v.is_finite()) {
            let last = states.last().cloned().unwrap_or_else(|| init.clone());
            return Err(DynamicsError::Divergence { t: t_next, last: Box::new(last) });
        }
        t = t_next;
        if step % stride == 0 || step == steps {
            check_sample(t, &x, &mut states);
        }
    }
    let _ = t;
    Ok(Integration { states, warnings })
}

/// Conserved-quantity samples along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSample {
    pub t: f64,
    /// The truncated effective Hamiltonian (centroid plus moment terms).
    pub h_effective: f64,
    /// The centroid energy `H(q, p)`.
    pub h_centroid: f64,
    /// `H_effective - H(q, p)`: the moment share of the energy.
    pub moment_energy: f64,
    /// `G[2,0] G[0,2] - G[1,1]^2`, the Heisenberg combination.
    pub heisenberg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    pub samples: Vec<MonitorSample>,
    pub h_effective_drift: f64,
    pub h_centroid_drift: f64,
    pub moment_energy_drift: f64,
    pub heisenberg_drift: f64,
}

/// Evaluates the effective Hamiltonian, centroid energy, their difference
/// and the Heisenberg combination on every sample, with maximum drifts.
pub fn monitor_conserved(sys: &EomSystem, states: &[MomentState]) -> MonitorReport {
    let keys = sys.moment_keys();
    let mut key_index = BTreeMap::new();
    for (offset, key) in keys.iter().enumerate() {
        key_index.insert(*key, offset + 2);
    }
    let hbar = states.first().map(|s| s.hbar).unwrap_or(0.0);
    let hbar = if sys.kind == MomentKind::Classical { 0.0 } else { hbar };
    let h_eff = compile_poly(
        &effective_hamiltonian(&sys.hamiltonian, sys.kind, sys.order),
        &key_index,
        hbar,
    )
    .expect("effective Hamiltonian is E-free");

    let g20 = MomentKey::new(sys.kind, 2, 0);
    let g11 = MomentKey::new(sys.kind, 1, 1);
    let g02 = MomentKey::new(sys.kind, 0, 2);

    let mut samples = Vec::with_capacity(states.len());
    for state in states {
        let mut vars = vec![0.0; keys.len() + 2];
        vars[0] = state.q;
        vars[1] = state.p;
        for (key, idx) in &key_index {
            vars[*idx] = state.moment(key);
        }
        let h_effective = h_eff.eval(&vars);
        let h_centroid = sys.hamiltonian.eval(state.q, state.p);
        let heisenberg =
            state.moment(&g20) * state.moment(&g02) - state.moment(&g11).powi(2);
        samples.push(MonitorSample {
            t: state.t,
            h_effective,
            h_centroid,
            moment_energy: h_effective - h_centroid,
            heisenberg,
        });
    }
    let drift = |pick: fn(&MonitorSample) -> f64| -> f64 {
        match samples.first() {
            None => 0.0,
            Some(first) => {
                let base = pick(first);
                samples.iter().map(|s| (pick(s) - base).abs()).fold(0.0, f64::max)
            }
        }
    };
    MonitorReport {
        h_effective_drift: drift(|s| s.h_effective),
        h_centroid_drift: drift(|s| s.h_centroid),
        moment_energy_drift: drift(|s| s.moment_energy),
        heisenberg_drift: drift(|s| s.heisenberg),
        samples,
    }
}

/// 17 significant digits: lossless round-trip of double-width values.
pub fn format_float(x: f64) -> String {
    format!("{:.16e}", x)
}

/// CSV text for a trajectory: header `t,q,p,<moment columns>` in the
/// system's display order, one row per sample.
pub fn trajectory_csv(sys: &EomSystem, states: &[MomentState]) -> String {
    let keys = sys.moment_keys();
    let mut out = String::from("t,q,p");
    for key in &keys {
        out.push(',');
        out.push_str(&key.to_string());
    }
    out.push('\n');
    for state in states {
        out.push_str(&format_float(state.t));
        out.push(',');
        out.push_str(&format_float(state.q));
        out.push(',');
        out.push_str(&format_float(state.p));
        for key in &keys {
            out.push(',');
            out.push_str(&format_float(state.moment(key)));
        }
        out.push('\n');
    }
    out
}

/// One phase-space particle of a classical ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub q: f64,
    pub p: f64,
}

/// Uniformly weighted particles carrying a classical distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub particles: Vec<Particle>,
}

impl ParticleEnsemble {
    pub fn from_particles(particles: Vec<Particle>) -> Self {
        Self { particles }
    }

    pub fn single(q: f64, p: f64) -> Self {
        Self { particles: vec![Particle { q, p }] }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Draws a Gaussian cloud with the given centroid and second moments
    /// (`var_p = C[2,0]`, `cov = C[1,1]`, `var_q = C[0,2]`), seeded for
    /// reproducibility.
    pub fn gaussian(
        n: usize,
        q: f64,
        p: f64,
        var_p: f64,
        cov: f64,
        var_q: f64,
        seed: u64,
    ) -> Result<Self, DynamicsError> {
        if n == 0 {
            return Err(DynamicsError::BadCovariance("ensemble must be nonempty".into()));
        }
        if var_q <= 0.0 || var_p <= 0.0 {
            return Err(DynamicsError::BadCovariance("variances must be positive".into()));
        }
        let schur = var_p - cov * cov / var_q;
        if schur < 0.0 {
            return Err(DynamicsError::BadCovariance(
                "covariance matrix is not positive semidefinite".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let sq = var_q.sqrt();
        let sp = schur.sqrt();
        let particles = (0..n)
            .map(|_| {
                let z1: f64 = normal.sample(&mut rng);
                let z2: f64 = normal.sample(&mut rng);
                Particle { q: q + sq * z1, p: p + (cov / sq) * z1 + sp * z2 }
            })
            .collect();
        Ok(Self { particles })
    }
}

/// Advances every particle along Hamilton's equations with RK4.
pub fn ensemble_evolve(
    h: &HamiltonianSpec,
    ens: &ParticleEnsemble,
    t_end: f64,
    dt: f64,
) -> Result<ParticleEnsemble, DynamicsError> {
    if dt == 0.0 || !dt.is_finite() {
        return Err(DynamicsError::InvalidStep("dt must be finite and nonzero".into()));
    }
    let steps_f = t_end / dt;
    if steps_f < 0.0 {
        return Err(DynamicsError::InvalidStep(
            "sign of dt does not move t toward t_end".into(),
        ));
    }
    let steps = steps_f.round() as usize;
    let dh_dp = h.derivative(1, 0);
    let dh_dq = h.derivative(0, 1);
    let rate = |pt: Particle| -> (f64, f64) {
        (dh_dp.eval(pt.q, pt.p), -dh_dq.eval(pt.q, pt.p))
    };

    let mut particles = ens.particles.clone();
    for (index, particle) in particles.iter_mut().enumerate() {
        let mut pt = *particle;
        for step in 1..=steps {
            let (k1q, k1p) = rate(pt);
            let (k2q, k2p) = rate(Particle { q: pt.q + 0.5 * dt * k1q, p: pt.p + 0.5 * dt * k1p });
            let (k3q, k3p) = rate(Particle { q: pt.q + 0.5 * dt * k2q, p: pt.p + 0.5 * dt * k2p });
            let (k4q, k4p) = rate(Particle { q: pt.q + dt * k3q, p: pt.p + dt * k3p });
            pt.q += dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
            pt.p += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            if !pt.q.is_finite() || !pt.p.is_finite() {
                return Err(DynamicsError::ParticleDivergence { index, t: dt * step as f64 });
            }
        }
        *particle = pt;
    }
    Ok(ParticleEnsemble { particles })
}

/// Centroid and central moments up to `max_order` by direct averaging.
pub fn sample_moments(ens: &ParticleEnsemble, max_order: u32) -> MomentState {
    let n = ens.particles.len() as f64;
    let q = ens.particles.iter().map(|pt| pt.q).sum::<f64>() / n;
    let p = ens.particles.iter().map(|pt| pt.p).sum::<f64>() / n;
    let mut state = MomentState::new(0.0, q, p, 0.0);
    for order in 2..=max_order {
        for a in (0..=order).rev() {
            let b = order - a;
            let value = ens
                .particles
                .iter()
                .map(|pt| (pt.p - p).powi(a as i32) * (pt.q - q).powi(b as i32))
                .sum::<f64>()
                / n;
            state.moments.insert(MomentKey::classical(a, b), value);
        }
    }
    state
}

/// Like [`sample_moments`], also returning the Monte Carlo standard error
/// of every moment estimate.
pub fn sample_moments_with_errors(
    ens: &ParticleEnsemble,
    max_order: u32,
) -> (MomentState, BTreeMap<MomentKey, f64>) {
    let state = sample_moments(ens, max_order);
    let n = ens.particles.len() as f64;
    let mut errors = BTreeMap::new();
    for (key, mean) in &state.moments {
        let variance = ens
            .particles
            .iter()
            .map(|pt| {
                let x = (pt.p - state.p).powi(key.a as i32) * (pt.q - state.q).powi(key.b as i32);
                (x - mean) * (x - mean)
            })
            .sum::<f64>()
            / n;
        errors.insert(*key, (variance / n).sqrt());
    }
    (state, errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eomgen::{derive_eom, Route};
    use crate::symcore::ratio;

    fn harmonic() -> HamiltonianSpec {
        HamiltonianSpec::from_terms([((2, 0), ratio(1, 2)), ((0, 2), ratio(1, 2))])
    }

    fn harmonic_init() -> MomentState {
        MomentState::new(0.0, 1.0, 0.0, 1.0)
            .with_moment(MomentKey::quantum(2, 0), 0.5)
            .with_moment(MomentKey::quantum(1, 1), 0.0)
            .with_moment(MomentKey::quantum(0, 2), 0.5)
    }

    #[test]
    fn harmonic_centroid_tracks_cosine() {
        let sys = derive_eom(&harmonic(), MomentKind::Quantum, 2, Route::BracketThenTruncate)
            .unwrap();
        let run = integrate(&sys, &harmonic_init(), 10.0, 1e-3, 100).unwrap();
        for state in &run.states {
            assert!((state.q - state.t.cos()).abs() <= 1e-8, "q drifted at t={}", state.t);
            assert!((state.p + state.t.sin()).abs() <= 1e-8);
        }
    }

    #[test]
    fn free_particle_moments_are_polynomial_in_time() {
        // H = p^2/2: G[0,2](t) = G[0,2] + 2 G[1,1] t + G[2,0] t^2, exactly
        // reproduced because RK4 integrates low-degree polynomials exactly.
        let h = HamiltonianSpec::from_terms([((2, 0), ratio(1, 2))]);
        let sys = derive_eom(&h, MomentKind::Quantum, 2, Route::BracketThenTruncate).unwrap();
        let init = MomentState::new(0.0, 0.0, 0.3, 1.0)
            .with_moment(MomentKey::quantum(2, 0), 0.25)
            .with_moment(MomentKey::quantum(1, 1), 0.125)
            .with_moment(MomentKey::quantum(0, 2), 1.0);
        let run = integrate(&sys, &init, 2.0, 0.25, 1).unwrap();
        for state in &run.states {
            let t = state.t;
            let expected = 1.0 + 2.0 * 0.125 * t + 0.25 * t * t;
            let got = state.moment(&MomentKey::quantum(0, 2));
            assert!((got - expected).abs() < 1e-13, "t={t}: {got} vs {expected}");
        }
    }

    #[test]
    fn halving_dt_shrinks_error_sixteenfold() {
        let sys = derive_eom(&harmonic(), MomentKind::Quantum, 2, Route::BracketThenTruncate)
            .unwrap();
        let err_at = |dt: f64| -> f64 {
            let run = integrate(&sys, &harmonic_init(), 1.0, dt, usize::MAX).unwrap();
            let last = run.states.last().unwrap();
            (last.q - 1.0f64.cos()).abs()
        };
        let coarse = err_at(0.05);
        let fine = err_at(0.025);
        let ratio = coarse / fine;
        assert!((10.0..25.0).contains(&ratio), "order-4 convergence, got factor {ratio}");
    }

    #[test]
    fn time_reversal_recovers_initial_state() {
        let sys = derive_eom(&harmonic(), MomentKind::Quantum, 2, Route::BracketThenTruncate)
            .unwrap();
        let forward = integrate(&sys, &harmonic_init(), 5.0, 1e-3, usize::MAX).unwrap();
        let turning = forward.states.last().unwrap().clone();
        let back = integrate(&sys, &turning, 0.0, -1e-3, usize::MAX).unwrap();
        let recovered = back.states.last().unwrap();
        assert!((recovered.q - 1.0).abs() < 1e-6);
        assert!(recovered.p.abs() < 1e-6);
        for (key, value) in &harmonic_init().moments {
            assert!((recovered.moment(key) - value).abs() < 1e-6);
        }
    }

    #[test]
    fn monitor_tracks_harmonic_invariants() {
        let sys = derive_eom(&harmonic(), MomentKind::Quantum, 2, Route::BracketThenTruncate)
            .unwrap();
        let run = integrate(&sys, &harmonic_init(), 10.0, 1e-3, 100).unwrap();
        let report = monitor_conserved(&sys, &run.states);
        assert!(report.heisenberg_drift <= 1e-9, "drift {}", report.heisenberg_drift);
        assert!(report.h_centroid_drift <= 1e-9);
        assert!(report.h_effective_drift <= 1e-9);
    }

    #[test]
    fn divergence_is_reported_with_last_state() {
        // H = -q^4/4 blows up from q=2 quickly.
        let h = HamiltonianSpec::from_terms([((2, 0), ratio(1, 2)), ((0, 4), ratio(-10, 1))]);
        let sys = derive_eom(&h, MomentKind::Quantum, 2, Route::BracketThenTruncate).unwrap();
        let init = MomentState::new(0.0, 3.0, 0.0, 1.0)
            .with_moment(MomentKey::quantum(2, 0), 0.5)
            .with_moment(MomentKey::quantum(0, 2), 0.5);
        match integrate(&sys, &init, 50.0, 0.5, 1) {
            Err(DynamicsError::Divergence { t, last }) => {
                assert!(t > 0.0);
                assert!(last.q.is_finite());
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_foreign_initial_moments() {
        let sys = derive_eom(&harmonic(), MomentKind::Quantum, 2, Route::BracketThenTruncate)
            .unwrap();
        let init = harmonic_init().with_moment(MomentKey::quantum(3, 0), 0.1);
        assert!(matches!(
            integrate(&sys, &init, 1.0, 0.1, 1),
            Err(DynamicsError::IncompatibleState(_))
        ));
    }

    #[test]
    fn two_particle_symmetric_ensemble() {
        let ens = ParticleEnsemble::from_particles(vec![
            Particle { q: -1.0, p: 0.0 },
            Particle { q: 1.0, p: 0.0 },
        ]);
        let state = sample_moments(&ens, 3);
        assert_eq!(state.q, 0.0);
        assert_eq!(state.moment(&MomentKey::classical(0, 2)), 1.0);
        assert_eq!(state.moment(&MomentKey::classical(0, 3)), 0.0);
    }

    #[test]
    fn single_particle_has_no_moments() {
        let state = sample_moments(&ParticleEnsemble::single(0.7, -0.2), 4);
        assert_eq!(state.q, 0.7);
        assert_eq!(state.p, -0.2);
        for (_, value) in state.moments {
            assert_eq!(value, 0.0);
        }
    }

    #[test]
    fn single_particle_follows_point_trajectory() {
        let evolved = ensemble_evolve(&harmonic(), &ParticleEnsemble::single(1.0, 0.0), 1.0, 1e-3)
            .unwrap();
        let pt = evolved.particles[0];
        assert!((pt.q - 1.0f64.cos()).abs() < 1e-9);
        assert!((pt.p + 1.0f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn gaussian_cloud_moment_identities() {
        let ens = ParticleEnsemble::gaussian(100_000, 0.0, 0.0, 1.0, 0.0, 1.0, 7).unwrap();
        let (state, errors) = sample_moments_with_errors(&ens, 4);
        let c02 = state.moment(&MomentKey::classical(0, 2));
        let c04 = state.moment(&MomentKey::classical(0, 4));
        assert!((c02 - 1.0).abs() <= 3.0 * errors[&MomentKey::classical(0, 2)]);
        assert!((c04 - 3.0 * c02 * c02).abs() <= 3.0 * errors[&MomentKey::classical(0, 4)]);
    }

    #[test]
    fn harmonic_ensemble_rotates_rigidly() {
        let ens = ParticleEnsemble::gaussian(20_000, 1.0, 0.0, 0.5, 0.1, 0.5, 42).unwrap();
        let before = sample_moments(&ens, 2);
        // dt divides the period exactly so the fixed-step grid lands on 2 pi
        let period = 2.0 * std::f64::consts::PI;
        let after_ens = ensemble_evolve(&harmonic(), &ens, period, period / 8192.0).unwrap();
        let after = sample_moments(&after_ens, 2);
        assert!((after.q - before.q).abs() < 1e-6);
        assert!((after.p - before.p).abs() < 1e-6);
        for key in [
            MomentKey::classical(2, 0),
            MomentKey::classical(1, 1),
            MomentKey::classical(0, 2),
        ] {
            assert!((after.moment(&key) - before.moment(&key)).abs() < 1e-6);
        }
    }
}
