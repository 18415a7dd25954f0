//! `moments` — derive, integrate, and interrogate moment hierarchies.
//!
//! Subcommands: `derive`, `integrate`, `ensemble`, `inequalities`,
//! `check-distribution`, `stationary`, `verify-brackets`, `compare`.
//! Every flag can also come from a flat `key = value` config file passed
//! with `--config`; command-line flags take precedence. Outputs are
//! deterministic for a fixed configuration and seed, with floats printed to
//! 17 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use moments::brackets::{oracle::BracketOracle, quantum_bracket_indices};
use moments::dynamics::{
    ensemble_evolve, format_float, integrate, monitor_conserved, sample_moments, trajectory_csv,
    Integration, MomentState, ParticleEnsemble,
};
use moments::eomgen::{derive_eom, EomSystem, HamiltonianSpec, Route};
use moments::inequalities::{
    check_family, classify_uncertainty, enumerate_catalog, reduce_to_pure_pair, verify_appendix,
    IneqClass, Inequality, MomentFamily,
};
use moments::stationary::{recursion_table, stationary_condition, StationaryProblem};
use moments::symcore::{MomentKey, MomentKind, MomentPoly};

#[derive(Parser)]
#[command(name = "moments", version, about = "Moment-hierarchy engine for quantum and classical dynamics")]
struct Cli {
    /// Flat `key = value` config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the truncated equations of motion.
    Derive(DeriveArgs),
    /// Integrate a moment system and monitor conserved quantities.
    Integrate(IntegrateArgs),
    /// Evolve a classical particle ensemble and sample its moments.
    Ensemble(EnsembleArgs),
    /// Generate and classify the inequality catalog.
    Inequalities(IneqArgs),
    /// Test a closed-form moment family against the catalog.
    CheckDistribution(CheckArgs),
    /// Stationary-state moment recursion for H = p^2/2 + q^m.
    Stationary(StationaryArgs),
    /// Compare the closed-form brackets with the commutator oracle.
    VerifyBrackets(VerifyArgs),
    /// Run quantum, classical, and point evolutions from shared data.
    Compare(CompareArgs),
    /// Normal-order an operator word and print its expectation value.
    Reduce(ReduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Quantum,
    Classical,
}

impl KindArg {
    fn to_kind(self) -> MomentKind {
        match self {
            KindArg::Quantum => MomentKind::Quantum,
            KindArg::Classical => MomentKind::Classical,
        }
    }
}

impl FromStr for KindArg {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(KindArg::Quantum),
            "classical" => Ok(KindArg::Classical),
            other => bail!("unknown kind `{other}` (expected quantum|classical)"),
        }
    }
}

/// Key/value pairs from a `--config` file.
#[derive(Default)]
struct Config(BTreeMap<String, String>);

impl Config {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {} lacks `=`: {body}", lineno + 1))?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self(map))
    }

    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("config key `{key}`: {e}")),
        }
    }

    fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.pick(flag, key)?
            .ok_or_else(|| anyhow!("missing required option `--{key}` (or config key `{key}`)"))
    }
}

fn load_hamiltonian(source: &str) -> Result<HamiltonianSpec> {
    let path = Path::new(source);
    if path.is_file() {
        let text = fs::read_to_string(path)?;
        HamiltonianSpec::parse_lines(&text)
            .map_err(|e| anyhow!("Hamiltonian file {}: {e}", path.display()))
    } else {
        HamiltonianSpec::parse_inline(source).map_err(|e| anyhow!("Hamiltonian `{source}`: {e}"))
    }
}

/// Splits on commas that are not inside `[...]` moment indices.
fn split_entries(text: &str) -> Vec<&str> {
    let mut entries = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (idx, c) in text.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                entries.push(&text[start..idx]);
                start = idx + 1;
            }
            _ => {}
        }
    }
    entries.push(&text[start..]);
    entries
}

/// Parses `q=...,p=...,G[a,b]=...` initial data.
fn parse_init(text: &str, kind: MomentKind, hbar: f64) -> Result<MomentState> {
    let mut state = MomentState::new(0.0, 0.0, 0.0, hbar);
    for entry in split_entries(text) {
        let entry = entry.trim();
        if entry.is_empty() {
            continue;
        }
        let (name, value) = entry
            .split_once('=')
            .ok_or_else(|| anyhow!("initial-data entry `{entry}` lacks `=`"))?;
        let value: f64 = value.trim().parse().context("initial-data value")?;
        match name.trim() {
            "q" => state.q = value,
            "p" => state.p = value,
            name => {
                let poly: MomentPoly =
                    name.parse().map_err(|e| anyhow!("initial-data key `{name}`: {e}"))?;
                let keys: Vec<MomentKey> = poly.keys().into_iter().collect();
                if keys.len() != 1 {
                    bail!("initial-data key `{name}` is not a single moment");
                }
                state.moments.insert(keys[0].with_kind(kind), value);
            }
        }
    }
    Ok(state)
}

fn write_output(export: Option<&Path>, content: &str) -> Result<()> {
    match export {
        Some(path) => {
            fs::write(path, content).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{content}"),
    }
    Ok(())
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long)]
    hamiltonian: Option<String>,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    kind: Option<KindArg>,
    #[arg(long)]
    route: Option<u8>,
    #[arg(long)]
    export: Option<PathBuf>,
}

fn resolve_system(
    cfg: &Config,
    hamiltonian: Option<String>,
    order: Option<u32>,
    kind: Option<KindArg>,
    route: Option<u8>,
) -> Result<EomSystem> {
    let source = cfg.require(hamiltonian, "hamiltonian")?;
    let h = load_hamiltonian(&source)?;
    let order = cfg.require(order, "order")?;
    let kind = cfg.require(kind, "kind")?.to_kind();
    let route_num = cfg.require(route, "route")?;
    let route = Route::from_number(route_num)
        .ok_or_else(|| anyhow!("route must be 1 or 2, got {route_num}"))?;
    derive_eom(&h, kind, order, route).map_err(Into::into)
}

fn run_derive(cfg: &Config, args: DeriveArgs) -> Result<()> {
    let sys = resolve_system(cfg, args.hamiltonian, args.order, args.kind, args.route)?;
    let mut out = String::new();
    writeln!(out, "# hamiltonian = {}", sys.hamiltonian)?;
    writeln!(out, "# kind = {:?}, order = {}, route = {}", sys.kind, sys.order, sys.route.number())?;
    out.push_str(&sys.to_text());
    write_output(args.export.as_deref(), &out)
}

#[derive(Args)]
struct IntegrateArgs {
    #[arg(long)]
    hamiltonian: Option<String>,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    kind: Option<KindArg>,
    #[arg(long)]
    route: Option<u8>,
    #[arg(long)]
    hbar: Option<f64>,
    /// Initial data, e.g. `q=1,p=0,G[2,0]=0.5,G[0,2]=0.5`.
    #[arg(long)]
    init: Option<String>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Output every this many steps.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    export: Option<PathBuf>,
}

fn monitor_block(sys: &EomSystem, run: &Integration) -> String {
    let report = monitor_conserved(sys, &run.states);
    let mut out = String::new();
    out.push_str("# monitor: t, H_effective, H_centroid, moment_energy, heisenberg_combo\n");
    for sample in &report.samples {
        out.push_str(&format!(
            "# monitor: {},{},{},{},{}\n",
            format_float(sample.t),
            format_float(sample.h_effective),
            format_float(sample.h_centroid),
            format_float(sample.moment_energy),
            format_float(sample.heisenberg),
        ));
    }
    out.push_str(&format!(
        "# drift: H_effective={} H_centroid={} moment_energy={} heisenberg={}\n",
        format_float(report.h_effective_drift),
        format_float(report.h_centroid_drift),
        format_float(report.moment_energy_drift),
        format_float(report.heisenberg_drift),
    ));
    for warning in &run.warnings {
        out.push_str(&format!(
            "# warning: {} = {} at t = {} (truncation artifact)\n",
            warning.key,
            format_float(warning.value),
            format_float(warning.t)
        ));
    }
    out
}

fn run_integrate(cfg: &Config, args: IntegrateArgs) -> Result<()> {
    let sys = resolve_system(cfg, args.hamiltonian, args.order, args.kind, args.route)?;
    let hbar = cfg.pick(args.hbar, "hbar")?.unwrap_or(1.0);
    let init_text = cfg.require(args.init, "init")?;
    let init = parse_init(&init_text, sys.kind, hbar)?;
    let t_end = cfg.require(args.t_end, "t-end")?;
    let dt = cfg.require(args.dt, "dt")?;
    let stride = cfg.pick(args.stride, "stride")?.unwrap_or(1);
    let run = integrate(&sys, &init, t_end, dt, stride)?;
    let mut out = trajectory_csv(&sys, &run.states);
    out.push_str(&monitor_block(&sys, &run));
    write_output(args.export.as_deref(), &out)
}

#[derive(Args)]
struct EnsembleArgs {
    #[arg(long)]
    hamiltonian: Option<String>,
    /// Initial centroid and second moments, e.g.
    /// `q=1,p=0,C[2,0]=0.01,C[1,1]=0,C[0,2]=0.01`.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    stride: Option<usize>,
    /// Highest moment order to sample.
    #[arg(long = "max-order")]
    max_order: Option<u32>,
    #[arg(long)]
    export: Option<PathBuf>,
}

fn run_ensemble(cfg: &Config, args: EnsembleArgs) -> Result<()> {
    let source = cfg.require(args.hamiltonian, "hamiltonian")?;
    let h = load_hamiltonian(&source)?;
    let init_text = cfg.require(args.init, "init")?;
    let init = parse_init(&init_text, MomentKind::Classical, 0.0)?;
    let particles = cfg.pick(args.particles, "particles")?.unwrap_or(100_000);
    let seed = cfg.pick(args.seed, "seed")?.unwrap_or(0);
    let t_end = cfg.require(args.t_end, "t-end")?;
    let dt = cfg.require(args.dt, "dt")?;
    let stride = cfg.pick(args.stride, "stride")?.unwrap_or(1);
    let max_order = cfg.pick(args.max_order, "max-order")?.unwrap_or(2);

    let var_p = init.moment(&MomentKey::classical(2, 0));
    let cov = init.moment(&MomentKey::classical(1, 1));
    let var_q = init.moment(&MomentKey::classical(0, 2));
    let mut ens = ParticleEnsemble::gaussian(particles, init.q, init.p, var_p, cov, var_q, seed)?;

    let steps = (t_end / dt).round() as usize;
    let mut out = String::new();
    writeln!(out, "# ensemble: particles = {particles}, seed = {seed}")?;
    out.push_str("t,q,p");
    let keys: Vec<MomentKey> = {
        let mut keys = Vec::new();
        for order in 2..=max_order {
            for a in (0..=order).rev() {
                keys.push(MomentKey::classical(a, order - a));
            }
        }
        keys
    };
    for key in &keys {
        out.push(',');
        out.push_str(&key.to_string());
    }
    out.push('\n');

    let emit = |t: f64, ens: &ParticleEnsemble, out: &mut String| {
        let state = sample_moments(ens, max_order);
        out.push_str(&format_float(t));
        out.push(',');
        out.push_str(&format_float(state.q));
        out.push(',');
        out.push_str(&format_float(state.p));
        for key in &keys {
            out.push(',');
            out.push_str(&format_float(state.moment(key)));
        }
        out.push('\n');
    };

    emit(0.0, &ens, &mut out);
    let mut done = 0usize;
    while done < steps {
        let chunk = stride.min(steps - done);
        ens = ensemble_evolve(&h, &ens, dt * chunk as f64, dt)?;
        done += chunk;
        emit(dt * done as f64, &ens, &mut out);
    }
    write_output(args.export.as_deref(), &out)
}

#[derive(Args)]
struct IneqArgs {
    /// Words per side range over lengths 0..=max-order.
    #[arg(long = "max-order")]
    max_order: Option<u32>,
    /// Export the classical catalog instead of the quantum one.
    #[arg(long)]
    classical: bool,
    #[arg(long)]
    export: Option<PathBuf>,
}

fn catalog_line(ineq: &Inequality) -> String {
    let class = match classify_uncertainty(ineq) {
        IneqClass::Uncertainty => "uncertainty",
        IneqClass::Ordinary => "ordinary",
        IneqClass::Equality => "equality",
    };
    format!("{} ; class={}\n", ineq, class)
}

fn run_inequalities(cfg: &Config, args: IneqArgs) -> Result<()> {
    let max_order = cfg.require(args.max_order, "max-order")?;
    let catalog = enumerate_catalog(max_order);
    let counts = catalog.word_pair_counts();
    println!(
        "convention: words of length 0..={max_order} per side (identity included), unordered \
         distinct pairs, exact-residual dedup, zero-left-side pairs dropped"
    );
    println!(
        "quantum word-pair relations: {} (uncertainty: {}, ordinary: {}, equality: {})",
        counts.total(),
        counts.uncertainty,
        counts.ordinary,
        counts.equality
    );
    println!(
        "quantum binomial relations: {}; positivity relations: {}; classical relations: {}",
        catalog.symmetric.len(),
        catalog.positivity.len(),
        catalog.classical.len()
    );
    if max_order >= 1 {
        if let Ok(reduction) = reduce_to_pure_pair(&catalog, 1) {
            println!("pure-pair bound: {} <= G[0,2] G[2,0]", reduction.collapsed.lhs);
        }
    }
    let appendix = verify_appendix(&catalog);
    let found = appendix.matches.iter().filter(|m| m.found).count();
    println!("sixth-order reference relations matched: {}/{}", found, appendix.matches.len());

    let mut body = String::new();
    if args.classical {
        for ineq in &catalog.classical {
            body.push_str(&catalog_line(ineq));
        }
    } else {
        for ineq in catalog.quantum_entries() {
            body.push_str(&catalog_line(ineq));
        }
    }
    match args.export.as_deref() {
        Some(path) => fs::write(path, body)?,
        None => print!("{body}"),
    }
    Ok(())
}

#[derive(Args)]
struct CheckArgs {
    /// One of: factorial, total-factorial, power, power-1, power-2, power-3.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    hbar: Option<f64>,
    #[arg(long = "max-order")]
    max_order: Option<u32>,
}

fn run_check(cfg: &Config, args: CheckArgs) -> Result<()> {
    let name = cfg.require(args.family, "family")?;
    let family = MomentFamily::by_name(&name).ok_or_else(|| {
        anyhow!("unknown family `{name}`; known: {}", MomentFamily::known_names().join(", "))
    })?;
    let hbar = cfg.pick(args.hbar, "hbar")?.unwrap_or(1.0);
    if hbar <= 0.0 {
        bail!("--hbar must be positive for distribution checks");
    }
    let max_order = cfg.require(args.max_order, "max-order")?;
    // The reference catalog runs to fifth order per side (moments up to
    // order ten); --max-order filters which relations are checked.
    let catalog = enumerate_catalog(5);
    let quantum = check_family(&family, catalog.quantum_entries(), max_order, hbar);
    let classical = check_family(&family, catalog.classical.iter(), max_order, hbar);
    for (label, report) in [("quantum", &quantum), ("classical", &classical)] {
        println!(
            "{label}: {} / {} passed ({})",
            report.passed,
            report.checked,
            if report.all_passed() { "allowed" } else { "violations found" }
        );
        for violation in &report.violations {
            println!(
                "  violated: {} (lhs = {}, rhs = {})",
                violation.display,
                format_float(violation.lhs),
                format_float(violation.rhs)
            );
        }
    }
    Ok(())
}

#[derive(Args)]
struct StationaryArgs {
    /// Monomial potential, e.g. `q^2`.
    #[arg(long)]
    potential: Option<String>,
    /// Energy eigenvalue (user supplied).
    #[arg(long = "E")]
    energy: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
    #[arg(long)]
    kind: Option<KindArg>,
    #[arg(long = "max-order")]
    max_order: Option<u32>,
    /// Seeds for orders the recursion cannot determine (m > 2), e.g.
    /// `G[0,2]=0.5,G[0,3]=0`.
    #[arg(long = "seed-moments")]
    seed_moments: Option<String>,
    /// Also print the symbolic stationarity identity for this g-power.
    #[arg(long = "emit-condition")]
    emit_condition: Option<u32>,
}

fn run_stationary(cfg: &Config, args: StationaryArgs) -> Result<()> {
    let potential_text = cfg.require(args.potential, "potential")?;
    let potential = HamiltonianSpec::parse_inline(&potential_text)
        .map_err(|e| anyhow!("potential `{potential_text}`: {e}"))?;
    let energy = cfg.require(args.energy, "E")?;
    let hbar = cfg.pick(args.hbar, "hbar")?.unwrap_or(1.0);
    let kind = cfg.pick(args.kind, "kind")?.unwrap_or(KindArg::Quantum).to_kind();
    let max_order = cfg.require(args.max_order, "max-order")?;
    let prob = StationaryProblem::from_potential(&potential, kind, energy, hbar)?;

    let mut seeds = BTreeMap::new();
    if let Some(text) = cfg.pick(args.seed_moments, "seed-moments")? {
        let state = parse_init(&text, kind, hbar)?;
        for (key, value) in state.moments {
            if key.a != 0 {
                bail!("seed {key} is not a position moment");
            }
            seeds.insert(key.b, value);
        }
    }

    let table = recursion_table(&prob, max_order, &seeds)?;
    println!("# stationary moments for V = {potential_text}, E = {}, hbar = {}", energy, hbar);
    let letter = match kind {
        MomentKind::Quantum => 'G',
        MomentKind::Classical => 'C',
    };
    for order in 2..=max_order {
        match table.get(&order) {
            Some(value) => println!("{letter}[0,{order}] = {}", format_float(*value)),
            None => println!("{letter}[0,{order}] = (unseeded; supply via --seed-moments)"),
        }
    }
    if let Some(g_power) = args.emit_condition {
        let condition = stationary_condition(&prob, g_power);
        println!("# stationarity identity (g-power {g_power}): 0 = {condition}");
    }
    Ok(())
}

#[derive(Args)]
struct VerifyArgs {
    /// Compare all moment pairs with both orders up to this bound.
    #[arg(long = "max-order")]
    max_order: Option<u32>,
}

fn run_verify_brackets(cfg: &Config, args: VerifyArgs) -> Result<()> {
    let max_order = cfg.require(args.max_order, "max-order")?;
    let mut oracle = BracketOracle::new();
    let mut keys = Vec::new();
    for order in 0..=max_order {
        for a in 0..=order {
            keys.push((a, order - a));
        }
    }
    let mut failures = 0usize;
    for &(a, b) in &keys {
        for &(c, d) in &keys {
            let closed = quantum_bracket_indices(a, b, c, d);
            let reference = oracle.moment_bracket(a, b, c, d);
            let ok = closed == reference;
            if !ok {
                failures += 1;
            }
            println!(
                "{} {{G[{a},{b}], G[{c},{d}]}} = {}",
                if ok { "PASS" } else { "FAIL" },
                closed
            );
        }
    }
    println!("checked {} pairs, {failures} failures", keys.len() * keys.len());
    if failures > 0 {
        bail!("{failures} bracket comparisons failed");
    }
    Ok(())
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    hamiltonian: Option<String>,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    route: Option<u8>,
    #[arg(long)]
    hbar: Option<f64>,
    /// Shared initial data (moments are relabeled per kind).
    #[arg(long)]
    init: Option<String>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    stride: Option<usize>,
    /// Writes `<prefix>.quantum.csv`, `<prefix>.classical.csv`,
    /// `<prefix>.point.csv`.
    #[arg(long = "out-prefix")]
    out_prefix: Option<String>,
}

fn run_compare(cfg: &Config, args: CompareArgs) -> Result<()> {
    let source = cfg.require(args.hamiltonian, "hamiltonian")?;
    let h = load_hamiltonian(&source)?;
    let order = cfg.require(args.order, "order")?;
    let route_num = cfg.require(args.route, "route")?;
    let route = Route::from_number(route_num)
        .ok_or_else(|| anyhow!("route must be 1 or 2, got {route_num}"))?;
    let hbar = cfg.pick(args.hbar, "hbar")?.unwrap_or(1.0);
    let init_text = cfg.require(args.init, "init")?;
    let t_end = cfg.require(args.t_end, "t-end")?;
    let dt = cfg.require(args.dt, "dt")?;
    let stride = cfg.pick(args.stride, "stride")?.unwrap_or(1);
    let prefix = cfg.require(args.out_prefix, "out-prefix")?;

    let mut bodies = Vec::new();
    for kind in [MomentKind::Quantum, MomentKind::Classical] {
        let sys = derive_eom(&h, kind, order, route)?;
        let init = parse_init(&init_text, kind, hbar)?;
        let run = integrate(&sys, &init, t_end, dt, stride)?;
        let csv = trajectory_csv(&sys, &run.states);
        bodies.push(csv.split_once('\n').map(|(_, body)| body.to_string()).unwrap_or_default());
        let mut out = csv;
        out.push_str(&monitor_block(&sys, &run));
        let suffix = match kind {
            MomentKind::Quantum => "quantum",
            MomentKind::Classical => "classical",
        };
        fs::write(format!("{prefix}.{suffix}.csv"), out)?;
    }
    println!(
        "quantum and classical trajectory rows byte-identical: {}",
        bodies[0] == bodies[1]
    );

    // Point trajectory: the same centroid with all moments put to zero.
    let init = parse_init(&init_text, MomentKind::Classical, hbar)?;
    let steps = (t_end / dt).round() as usize;
    let mut ens = ParticleEnsemble::single(init.q, init.p);
    let mut out = String::from("t,q,p\n");
    let emit = |t: f64, ens: &ParticleEnsemble, out: &mut String| {
        let pt = ens.particles[0];
        out.push_str(&format!(
            "{},{},{}\n",
            format_float(t),
            format_float(pt.q),
            format_float(pt.p)
        ));
    };
    emit(0.0, &ens, &mut out);
    let mut done = 0usize;
    while done < steps {
        let chunk = stride.min(steps - done);
        ens = ensemble_evolve(&h, &ens, dt * chunk as f64, dt)?;
        done += chunk;
        emit(dt * done as f64, &ens, &mut out);
    }
    fs::write(format!("{prefix}.point.csv"), out)?;
    println!("wrote {prefix}.quantum.csv, {prefix}.classical.csv, {prefix}.point.csv");
    Ok(())
}

#[derive(Args)]
struct ReduceArgs {
    /// Word over the letters P (centered momentum) and Q (centered
    /// position), e.g. `PQQP`; `1` is the identity.
    #[arg(long)]
    word: Option<String>,
}

fn run_reduce(cfg: &Config, args: ReduceArgs) -> Result<()> {
    use moments::opalgebra::{commutator_reduce, expectation_word, OperatorSum, OperatorWord};
    let text: String = cfg.require(args.word, "word")?;
    let word: OperatorWord = text.parse().map_err(|e| anyhow!("{e}"))?;
    let reduced = commutator_reduce(&OperatorSum::from_word(word.clone()));
    println!("{} = {}", word, reduced);
    println!("<{}> = {}", word, expectation_word(&word));
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Derive(args) => run_derive(&cfg, args),
        Command::Integrate(args) => run_integrate(&cfg, args),
        Command::Ensemble(args) => run_ensemble(&cfg, args),
        Command::Inequalities(args) => run_inequalities(&cfg, args),
        Command::CheckDistribution(args) => run_check(&cfg, args),
        Command::Stationary(args) => run_stationary(&cfg, args),
        Command::VerifyBrackets(args) => run_verify_brackets(&cfg, args),
        Command::Compare(args) => run_compare(&cfg, args),
        Command::Reduce(args) => run_reduce(&cfg, args),
    }
}
