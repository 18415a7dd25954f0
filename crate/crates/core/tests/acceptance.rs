//! Acceptance suite: one test per criterion, each printing a pass line
//! (run with `--nocapture` to see them). Tolerances are pinned here and
//! nowhere else.

use std::collections::BTreeMap;

use moments::brackets::{oracle::BracketOracle, quantum_bracket_indices};
use moments::dynamics::{
    ensemble_evolve, integrate, monitor_conserved, sample_moments, sample_moments_with_errors,
    trajectory_csv, MomentState, ParticleEnsemble,
};
use moments::eomgen::{
    derive_eom, heisenberg_drift, linear_eom_subsystem, EomVar, HamiltonianSpec, Route,
};
use moments::inequalities::{
    check_family, enumerate_catalog, equal_uncertainty_constraints, quantum_ineq_from_words,
    reduce_to_pure_pair, verify_appendix, Catalog, MomentFamily,
};
use moments::opalgebra::OperatorWord;
use moments::stationary::recursion_table_symbolic;
use moments::symcore::{ratio, MomentKey, MomentKind, MomentPoly};

use once_cell::sync::Lazy;

// The fifth-order catalog backs several criteria; build it once.
static CATALOG: Lazy<Catalog> = Lazy::new(|| enumerate_catalog(5));

fn pass(criterion: u32, message: &str) {
    println!("PASS criterion {criterion:2}: {message}");
}

fn quartic() -> HamiltonianSpec {
    HamiltonianSpec::from_terms([((2, 0), ratio(1, 2)), ((0, 4), ratio(1, 4))])
}

fn harmonic() -> HamiltonianSpec {
    HamiltonianSpec::from_terms([((2, 0), ratio(1, 2)), ((0, 2), ratio(1, 2))])
}

fn g(a: u32, b: u32) -> MomentPoly {
    MomentPoly::moment(MomentKey::quantum(a, b))
}

#[test]
fn criterion_01_bracket_oracle_equivalence() {
    let mut oracle = BracketOracle::new();
    let mut keys = Vec::new();
    for order in 0..=5u32 {
        for a in 0..=order {
            keys.push((a, order - a));
        }
    }
    assert!(keys.len() * keys.len() >= 400);
    let mut checked = 0;
    for &(a, b) in &keys {
        for &(c, d) in &keys {
            let closed = quantum_bracket_indices(a, b, c, d);
            let first_principles = oracle.moment_bracket(a, b, c, d);
            assert_eq!(
                closed, first_principles,
                "closed form and commutator oracle disagree at ({a},{b}),({c},{d})"
            );
            checked += 1;
        }
    }
    pass(1, &format!("closed-form bracket equals commutator oracle on {checked} pairs"));
}

#[test]
fn criterion_02_named_bracket_value() {
    let expected = g(0, 3).scale(&ratio(-2, 1));
    assert_eq!(quantum_bracket_indices(1, 2, 0, 2), expected);
    pass(2, "{G[1,2], G[0,2]} = -2 G[0,3] exactly");
}

#[test]
fn criterion_03_heisenberg_regeneration() {
    let p: OperatorWord = "P".parse().unwrap();
    let q: OperatorWord = "Q".parse().unwrap();
    let ineq = quantum_ineq_from_words(&p, &q);
    let lhs = &MomentPoly::hbar_pow(2).scale(&ratio(1, 4)) + &g(1, 1).pow(2);
    assert_eq!(ineq.lhs, lhs);
    assert_eq!(ineq.rhs, g(2, 0) * g(0, 2));
    pass(3, "words (P, Q) regenerate hbar^2/4 + G[1,1]^2 <= G[2,0] G[0,2]");
}

#[test]
fn criterion_04_gamma_constant_table() {
    let expected = [
        (1u32, ratio(1, 4)),
        (2, ratio(3, 8)),
        (3, ratio(81, 64)),
        (4, ratio(9, 4)),
        (5, ratio(225, 16)),
    ];
    for (n, gamma) in expected {
        let reduction = reduce_to_pure_pair(&CATALOG, n).unwrap();
        assert_eq!(
            reduction.gamma, gamma,
            "gamma_{n} mismatch: got {}, want {}",
            reduction.gamma, gamma
        );
    }
    pass(4, "pure-pair reduction gives gamma_1..5 = 1/4, 3/8, 81/64, 9/4, 225/16");
}

#[test]
fn criterion_05_g_constraint_table() {
    let constraints = equal_uncertainty_constraints(&CATALOG, 8);
    // proxy symbols: g_a is the key G[2a,0]
    let key = |a: u32| MomentKey::quantum(2 * a, 0);

    // The displayed table, as residual polynomials (normalized by leading
    // coefficient, matching GConstraint's form):
    //   g1^2 >= 1/4, g2 >= 6 g1^2, g1 g3 >= 9/4 g2^2, g2 g4 >= 25/14 g3^2
    let targets = [
        ("g1 >= 1/2", (&g(2, 0).pow(2)).scale(&ratio(4, 1)) - MomentPoly::one()),
        ("g2 >= 6 g1^2", MomentPoly::moment(key(2)).scale(&ratio(1, 6)) - g(2, 0).pow(2)),
        (
            "g1 g3 >= 9/4 g2^2",
            MomentPoly::moment(key(1)) * MomentPoly::moment(key(3))
                - MomentPoly::moment(key(2)).pow(2).scale(&ratio(9, 4)),
        ),
        (
            "g2 g4 >= 25/14 g3^2",
            MomentPoly::moment(key(2)) * MomentPoly::moment(key(4))
                - MomentPoly::moment(key(3)).pow(2).scale(&ratio(25, 14)),
        ),
    ];
    for (label, residual) in &targets {
        let normalized = residual.normalized_by_leading();
        assert!(
            constraints.iter().any(|c| c.residual == normalized),
            "missing constraint {label}"
        );
    }

    // And each is the tightest constraint of its shape.
    let shape_bound = |pos: Vec<MomentKey>, neg: Vec<MomentKey>| -> Option<
        num_rational::BigRational,
    > {
        constraints
            .iter()
            .filter_map(|c| c.two_term_ratio())
            .filter(|(p, n, _)| *p == pos && *n == neg)
            .map(|(_, _, ratio)| ratio)
            .max()
    };
    // -1 + c g1^2 >= 0: tightest is the largest 1/c, i.e. ratio = 1/c max.
    assert_eq!(shape_bound(vec![key(1), key(1)], vec![]).unwrap(), ratio(1, 4));
    assert_eq!(shape_bound(vec![key(2)], vec![key(1), key(1)]).unwrap(), ratio(6, 1));
    assert_eq!(shape_bound(vec![key(1), key(3)], vec![key(2), key(2)]).unwrap(), ratio(9, 4));
    assert_eq!(shape_bound(vec![key(2), key(4)], vec![key(3), key(3)]).unwrap(), ratio(25, 14));
    pass(5, "equal-uncertainty reduction reproduces the g_1..g_4 constraint table");
}

#[test]
fn criterion_06_appendix_verification() {
    let report = verify_appendix(&CATALOG);
    for m in &report.matches {
        assert!(m.found, "appendix relation {} not found in catalog", m.name);
    }
    assert!(report.sum_identities_hold, "summed combinations failed arithmetic check");
    pass(6, "all 15 sixth-order relations found exactly; summed variants check");
}

#[test]
fn criterion_07_catalog_counts() {
    let counts = CATALOG.word_pair_counts();
    println!(
        "convention: words of length 0..=5 per side (identity included), unordered \
         distinct pairs, exact-residual dedup, zero-left-side pairs dropped"
    );
    println!(
        "counts: total={} uncertainty={} ordinary={} equality={}",
        counts.total(),
        counts.uncertainty,
        counts.ordinary,
        counts.equality
    );
    assert_eq!(CATALOG.word_pairs.len(), 1449, "quantum inequality count");
    assert_eq!(counts.uncertainty, 160, "uncertainty relation count");
    pass(7, "catalog reproduces 1449 inequalities with 160 uncertainty relations");
}

#[test]
fn criterion_08_distribution_checks() {
    // a! b! passes everything with moments up to order 8
    let factorial = MomentFamily::factorial();
    let quantum = check_family(&factorial, CATALOG.quantum_entries(), 8, 1.0);
    let classical = check_family(&factorial, CATALOG.classical.iter(), 8, 1.0);
    assert!(quantum.all_passed(), "factorial family failed: {:?}", quantum.violations);
    assert!(classical.all_passed(), "factorial family failed classically");

    // (a+b)! fails exactly the Heisenberg relation among order <= 4 checks
    let total = MomentFamily::total_factorial();
    let report = check_family(&total, CATALOG.quantum_entries(), 4, 1.0);
    assert_eq!(report.violations.len(), 1, "violations: {:?}", report.violations);
    let heis = quantum_ineq_from_words(&"P".parse().unwrap(), &"Q".parse().unwrap());
    assert_eq!(report.violations[0].display, heis.to_string());

    // a^(a-3) b^(b-3) violates the classical relations as well
    let sharp = MomentFamily::power_self(3);
    let classical = check_family(&sharp, CATALOG.classical.iter(), 8, 1.0);
    assert!(!classical.all_passed(), "power-3 family unexpectedly allowed classically");
    pass(8, "factorial family allowed; (a+b)! fails only Heisenberg; power-3 fails classically");
}

#[test]
fn criterion_09_harmonic_dynamics() {
    let h = harmonic();
    let init = MomentState::new(0.0, 1.0, 0.0, 1.0)
        .with_moment(MomentKey::quantum(2, 0), 0.5)
        .with_moment(MomentKey::quantum(1, 1), 0.0)
        .with_moment(MomentKey::quantum(0, 2), 0.5);
    let sys = derive_eom(&h, MomentKind::Quantum, 2, Route::BracketThenTruncate).unwrap();
    let run = integrate(&sys, &init, 10.0, 1e-3, 10).unwrap();
    let mut max_q_err = 0.0f64;
    for state in &run.states {
        max_q_err = max_q_err.max((state.q - state.t.cos()).abs());
    }
    assert!(max_q_err <= 1e-8, "centroid error {max_q_err}");

    let report = monitor_conserved(&sys, &run.states);
    assert!(report.heisenberg_drift <= 1e-9, "Heisenberg drift {}", report.heisenberg_drift);

    // classical run from identical data is bit-identical
    let classical_sys =
        derive_eom(&h, MomentKind::Classical, 2, Route::BracketThenTruncate).unwrap();
    let mut classical_init = MomentState::new(0.0, 1.0, 0.0, 0.0);
    for (key, value) in &init.moments {
        classical_init.moments.insert(key.with_kind(MomentKind::Classical), *value);
    }
    let classical_run = integrate(&classical_sys, &classical_init, 10.0, 1e-3, 10).unwrap();
    assert_eq!(run.states.len(), classical_run.states.len());
    for (qs, cs) in run.states.iter().zip(&classical_run.states) {
        assert_eq!(qs.t.to_bits(), cs.t.to_bits());
        assert_eq!(qs.q.to_bits(), cs.q.to_bits());
        assert_eq!(qs.p.to_bits(), cs.p.to_bits());
        for (qkey, value) in &qs.moments {
            let ckey = qkey.with_kind(MomentKind::Classical);
            assert_eq!(value.to_bits(), cs.moments[&ckey].to_bits());
        }
    }
    // CSV bodies (after the kind-specific header) are byte-identical
    let q_csv = trajectory_csv(&sys, &run.states);
    let c_csv = trajectory_csv(&classical_sys, &classical_run.states);
    assert_eq!(
        q_csv.split_once('\n').unwrap().1,
        c_csv.split_once('\n').unwrap().1,
        "CSV trajectory bodies differ"
    );
    pass(9, &format!("|q - cos t| <= 1e-8 (max {max_q_err:.2e}); saturation preserved; quantum = classical bitwise"));
}

#[test]
fn criterion_10_second_order_universality() {
    let h = quartic();
    for route in [Route::TruncateThenBracket, Route::BracketThenTruncate] {
        let quantum = derive_eom(&h, MomentKind::Quantum, 2, route).unwrap();
        let classical = derive_eom(&h, MomentKind::Classical, 2, route).unwrap();
        for (var, rhs) in &quantum.rhs {
            let classical_var = match var {
                EomVar::Moment(k) => EomVar::Moment(k.with_kind(MomentKind::Classical)),
                other => *other,
            };
            assert_eq!(
                &rhs.map_kind(MomentKind::Classical),
                classical.rhs_of(&classical_var).unwrap(),
                "N=2 systems differ at {var}"
            );
        }
    }

    let quantum3 = derive_eom(&h, MomentKind::Quantum, 3, Route::BracketThenTruncate).unwrap();
    let classical3 = derive_eom(&h, MomentKind::Classical, 3, Route::BracketThenTruncate).unwrap();
    let mut hbar_terms = 0;
    for (var, rhs) in &quantum3.rhs {
        let classical_var = match var {
            EomVar::Moment(k) => EomVar::Moment(k.with_kind(MomentKind::Classical)),
            other => *other,
        };
        let relabeled = rhs.map_kind(MomentKind::Classical);
        let difference = &relabeled - classical3.rhs_of(&classical_var).unwrap();
        if !difference.is_zero() {
            assert!(
                difference.terms().all(|(mono, _)| mono.hbar_pow >= 2),
                "difference at {var} is not an hbar^2 term: {difference}"
            );
            hbar_terms += 1;
        }
    }
    assert!(hbar_terms > 0, "N=3 quantum and classical systems should differ");
    pass(10, &format!("N=2 systems identical; N=3 differ by hbar^2 terms in {hbar_terms} equations"));
}

#[test]
fn criterion_11_route_inequivalence() {
    let h = quartic();
    let r1 = derive_eom(&h, MomentKind::Quantum, 3, Route::TruncateThenBracket).unwrap();
    let r2 = derive_eom(&h, MomentKind::Quantum, 3, Route::BracketThenTruncate).unwrap();
    assert_eq!(r1.rhs_of(&EomVar::Q), r2.rhs_of(&EomVar::Q), "dq/dt must be route-free");
    assert_eq!(r1.rhs_of(&EomVar::P), r2.rhs_of(&EomVar::P), "dp/dt must be route-free");
    let differing: Vec<String> = r1
        .rhs
        .iter()
        .filter(|(var, rhs)| r2.rhs_of(var) != Some(rhs))
        .map(|(var, _)| var.to_string())
        .collect();
    assert!(!differing.is_empty(), "routes should disagree for some moment at N=3");
    pass(11, &format!("routes agree on the centroid, differ for {}", differing.join(", ")));
}

#[test]
fn criterion_12_ensemble_oracle() {
    let h = quartic();
    let ens = ParticleEnsemble::gaussian(100_000, 1.0, 0.0, 0.01, 0.0, 0.01, 2024).unwrap();

    // Seed the moment system from the sampled cloud so both evolutions
    // share identical initial data.
    let seed = sample_moments(&ens, 4);
    let mut init = MomentState::new(0.0, seed.q, seed.p, 0.0);
    init.moments = seed.moments.clone();
    let sys = derive_eom(&h, MomentKind::Classical, 4, Route::BracketThenTruncate).unwrap();

    let t_end = 1.0;
    let dt = 2e-3;
    let run = integrate(&sys, &init, t_end, dt, usize::MAX).unwrap();
    let moment_state = run.states.last().unwrap();
    let evolved = ensemble_evolve(&h, &ens, t_end, dt).unwrap();
    let (sampled, errors) = sample_moments_with_errors(&evolved, 2);

    for key in [
        MomentKey::classical(2, 0),
        MomentKey::classical(1, 1),
        MomentKey::classical(0, 2),
    ] {
        let integrated = moment_state.moment(&key);
        let monte_carlo = sampled.moment(&key);
        let se = errors[&key];
        assert!(
            (integrated - monte_carlo).abs() <= 3.0 * se,
            "{key}: integrated {integrated} vs ensemble {monte_carlo} (se {se})"
        );
    }
    pass(12, "quartic N=4 moments match the 1e5-particle ensemble within 3 standard errors");
}

#[test]
fn criterion_13_stationary_recursion() {
    let quantum = recursion_table_symbolic(2, MomentKind::Quantum, 4);
    assert_eq!(quantum[&2], MomentPoly::energy().scale(&ratio(1, 2)));
    let expected_g04 = &MomentPoly::energy().pow(2).scale(&ratio(3, 8))
        + &MomentPoly::hbar_pow(2).scale(&ratio(3, 16));
    assert_eq!(quantum[&4], expected_g04, "G[0,4] = (3E^2 + 1.5 hbar^2)/8");

    let classical = recursion_table_symbolic(2, MomentKind::Classical, 4);
    assert_eq!(classical[&4], MomentPoly::energy().pow(2).scale(&ratio(3, 8)));
    pass(13, "V=q^2 recursion: G[0,2] = E/2, G[0,4] = (3E^2 + 1.5 hbar^2)/8, C[0,4] = 3E^2/8");
}

#[test]
fn criterion_14_heisenberg_drift_identity() {
    let cubic = HamiltonianSpec::from_terms([((2, 0), ratio(1, 2)), ((0, 3), ratio(1, 3))]);
    let drift = heisenberg_drift(&cubic, 4).unwrap();
    let sys = derive_eom(&cubic, MomentKind::Quantum, 4, Route::BracketThenTruncate).unwrap();
    let var = |a, b| EomVar::Moment(MomentKey::quantum(a, b));
    let chain = &(&(sys.rhs_of(&var(2, 0)).unwrap() * &g(0, 2))
        + &(&g(2, 0) * sys.rhs_of(&var(0, 2)).unwrap()))
        - &(&g(1, 1) * sys.rhs_of(&var(1, 1)).unwrap()).scale(&ratio(2, 1));
    assert_eq!(drift, chain, "drift formula vs chain rule through the derived system");

    for h in [
        harmonic(),
        HamiltonianSpec::from_terms([((1, 1), ratio(1, 1))]),
        HamiltonianSpec::from_terms([((2, 0), ratio(1, 2)), ((1, 1), ratio(2, 3)), ((0, 2), ratio(5, 2))]),
    ] {
        assert!(heisenberg_drift(&h, 2).unwrap().is_zero(), "harmonic drift must vanish");
    }
    pass(14, "drift identity matches the chain rule at N=4 and vanishes for harmonic H");
}

#[test]
fn criterion_15_linear_hamiltonian_structure() {
    // closed Poisson algebra, symbolically for a, b <= 6
    for a in 0..=6u32 {
        for b in 0..=6u32 {
            assert!(quantum_bracket_indices(a, 0, b, 0).is_zero());

            let lhs = quantum_bracket_indices(a, 0, b, 1);
            let expected = if a == 0 {
                MomentPoly::zero()
            } else {
                (&(&g(a - 1, 0) * &g(b, 0)) - &g(a + b - 1, 0)).scale(&ratio(i64::from(a), 1))
            };
            assert_eq!(lhs, expected, "{{G[{a},0], G[{b},1]}}");

            let lhs = quantum_bracket_indices(a, 1, b, 1);
            let mut expected = MomentPoly::zero();
            if a > 0 {
                expected += &(&g(a - 1, 1) * &g(b, 0)).scale(&ratio(i64::from(a), 1));
            }
            if b > 0 {
                expected -= &(&g(a, 0) * &g(b - 1, 1)).scale(&ratio(i64::from(b), 1));
            }
            if a + b > 0 {
                expected += &g(a + b - 1, 1)
                    .scale(&ratio(i64::from(b) - i64::from(a), 1));
            }
            assert_eq!(lhs, expected, "{{G[{a},1], G[{b},1]}}");
        }
    }

    // H = xi(p) = p^3/3: p and G[a,0] constant, G[a,1] affine in t
    let xi = HamiltonianSpec::from_terms([((3, 0), ratio(1, 3))]);
    let phi = HamiltonianSpec::new();
    let sub = linear_eom_subsystem(&phi, &xi, MomentKind::Quantum, 4, 1).unwrap();
    let mut init = MomentState::new(0.0, 0.2, 0.9, 1.0);
    for (idx, key) in sub.system.moment_keys().into_iter().enumerate() {
        init.moments.insert(key, 0.1 + 0.05 * idx as f64);
    }
    let run = integrate(&sub.system, &init, 2.0, 0.05, 1).unwrap();
    let first = &run.states[0];
    let second = &run.states[1];
    for state in &run.states {
        assert!((state.p - first.p).abs() <= 1e-12, "p must be conserved");
        for a in 2..=4u32 {
            let key = MomentKey::quantum(a, 0);
            assert!(
                (state.moment(&key) - first.moment(&key)).abs() <= 1e-12,
                "G[{a},0] must be conserved"
            );
        }
        for a in 1..=4u32 {
            let key = MomentKey::quantum(a, 1);
            let slope =
                (second.moment(&key) - first.moment(&key)) / (second.t - first.t);
            let affine = first.moment(&key) + slope * (state.t - first.t);
            assert!(
                (state.moment(&key) - affine).abs() <= 1e-9,
                "G[{a},1] deviates from linear growth at t = {}",
                state.t
            );
        }
    }
    pass(15, "closed subalgebra relations hold to a,b = 6; G[a,1] grows linearly under H = xi(p)");
}
