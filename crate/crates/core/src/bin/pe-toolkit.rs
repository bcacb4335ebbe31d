use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use pe_core::activation::{activate_postselect, ActivationReport, ActivationSpec};
use pe_core::linalg::{c, CMat, CVec};
use pe_core::linear_optics::{apply_mode_unitary, BeamSplitterArray, ModeUnitary};
use pe_core::measures::{
    collective_generator, m_pe_f, mpe_objective, negativity, qfi, single_particle_variance, Axis, MpeResult, MpeSearch,
    SingleParticleObservable,
};
use pe_core::nonclassicality::{binomial_poisson_distance, definetti_classical_approx, two_copy_pe_check, ExchangeableSeparableSpec};
use pe_core::resource_states::{parse_complex, parse_state_preset};
use pe_core::witness_pipeline::{
    estimate_moments, optimize_witness_params, pe_lower_bound, synthesize_dataset, BootstrapOptions, SpinShotDataset,
    SynthModel, SynthSpec, WitnessParams,
};
use pe_core::{BlockDiagonalState, Error, Limits, Result};

#[derive(Parser)]
#[command(name = "pe-toolkit", version, about = "Particle entanglement of bosonic states: activation, monotones and witness bounds")]
struct Cli {
    /// Emit CSV tables instead of JSON where the output is tabular.
    #[arg(long, global = true)]
    csv: bool,
    /// Largest particle number any constructed state may hold.
    #[arg(long, global = true, default_value_t = 6)]
    max_particles: usize,
    /// Largest mode count any constructed state may have.
    #[arg(long, global = true, default_value_t = 8)]
    max_modes: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shot-data witness: bounds and synthetic datasets.
    Witness {
        #[command(subcommand)]
        command: WitnessCommand,
    },
    /// Worked examples.
    Demo { which: Demo },
    /// Activate a state through a beam-splitter array against vacuum.
    Activate(ActivateArgs),
    /// Fisher information, variance and their difference for one observable.
    Qfi(QfiArgs),
    /// Maximize Fisher information minus four times the single-particle variance.
    Mpef(MpefArgs),
    /// Classical approximation of a reduced exchangeable separable state.
    Definetti(DefinettiArgs),
    /// Distance between Binomial(N, p) and Poisson(Np).
    Binpoisson {
        #[arg(long = "N")]
        n: u64,
        #[arg(long)]
        p: f64,
    },
}

#[derive(Subcommand)]
enum WitnessCommand {
    /// Lower bound on the trace-distance measure from shot data.
    Bound {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long, allow_hyphen_values = true, requires = "gy", conflicts_with = "optimize")]
        gz: Option<f64>,
        #[arg(long, allow_hyphen_values = true, requires = "gz")]
        gy: Option<f64>,
        /// Choose g_z, g_y by minimizing the separability ratio.
        #[arg(long)]
        optimize: bool,
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a synthetic dataset and its metadata sidecar.
    Synth {
        #[arg(long, value_enum)]
        model: ModelName,
        #[arg(long, default_value_t = 0.25)]
        xi2: f64,
        #[arg(long, default_value_t = 1000)]
        atoms: u64,
        #[arg(long, default_value_t = 0.5)]
        split: f64,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long, default_value_t = 10_000)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Metadata path; defaults to the data path with extension `meta.json`.
        #[arg(long)]
        meta_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelName {
    Css,
    Squeezed,
    Constant,
}

#[derive(Clone, Copy, ValueEnum)]
enum Demo {
    YurkeStoler,
    Hom,
    Fock22,
    TwoCopy,
}

#[derive(Args)]
struct ActivateArgs {
    /// State preset: "vacuum M", "fock 1,1", "css a,b N", "noon N", "classical a,b [NMAX]", "file PATH".
    #[arg(long)]
    state: String,
    /// Reflectivities: comma list, "balanced", "identity" or "swap".
    #[arg(long, default_value = "balanced")]
    r: String,
    /// Pre-rotation on the input modes: "identity" or "random:SEED".
    #[arg(long, default_value = "identity")]
    va: String,
    /// Report the (N_A, N_B) sector, e.g. "2,2".
    #[arg(long)]
    postselect: Option<String>,
    /// Same as --csv.
    #[arg(long)]
    table: bool,
}

#[derive(Args)]
struct QfiArgs {
    #[arg(long)]
    state: String,
    /// Observable: x, y, z or bloch:THETA,PHI (two-mode states).
    #[arg(long, default_value = "z")]
    h: String,
}

#[derive(Args)]
struct MpefArgs {
    #[arg(long)]
    state: String,
    /// Use random restarts even for two-mode states.
    #[arg(long)]
    general: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
}

#[derive(Args)]
struct DefinettiArgs {
    #[arg(long = "N")]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    l: usize,
    /// JSON list of {"q": weight, "c": ["re+imi", ...]}; non-uniform terms are symmetrized.
    /// Defaults to a single uniform direction.
    #[arg(long)]
    mixture: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let limits = Limits { max_particles: cli.max_particles, max_modes: cli.max_modes };
    match run(&cli, &limits) {
        Ok(out) => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            let nl = if out.ends_with('\n') { "" } else { "\n" };
            // A closed pipe downstream is not an error worth reporting.
            let _ = write!(stdout, "{out}{nl}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn pretty(v: Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(&v)?)
}

fn matrix_json(m: &CMat) -> Value {
    Value::Array((0..m.nrows()).map(|i| json!((0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect::<Vec<_>>())).collect())
}

fn run(cli: &Cli, limits: &Limits) -> Result<String> {
    match &cli.command {
        Command::Witness { command } => witness(command, limits),
        Command::Demo { which } => demo(*which, cli.csv, limits),
        Command::Activate(a) => activate_cmd(a, cli.csv || a.table, limits),
        Command::Qfi(a) => qfi_cmd(a, limits),
        Command::Mpef(a) => mpef_cmd(a, limits),
        Command::Definetti(a) => definetti_cmd(a),
        Command::Binpoisson { n, p } => pretty(json!(binomial_poisson_distance(*n, *p)?)),
    }
}

fn witness(cmd: &WitnessCommand, _limits: &Limits) -> Result<String> {
    match cmd {
        WitnessCommand::Bound { data, meta, gz, gy, optimize, resamples, seed } => {
            let ds = SpinShotDataset::read(data, meta)?;
            let moments = estimate_moments(&ds)?;
            let (params, optimized) = match (gz, gy, optimize) {
                (Some(z), Some(y), false) => (WitnessParams::new(*z, *y)?, None),
                (None, None, true) => {
                    let o = optimize_witness_params(&moments);
                    (o.params, Some(o))
                }
                (None, None, false) => (WitnessParams::new(1.0, 1.0)?, None),
                _ => return Err(Error::InvalidInput("give either --gz and --gy or --optimize".into())),
            };
            let r = pe_lower_bound(&ds, params, BootstrapOptions { resamples: *resamples, seed: *seed })?;
            pretty(json!({ "result": r, "moments": moments, "optimization": optimized }))
        }
        WitnessCommand::Synth { model, xi2, atoms, split, eta, shots, seed, out, meta_out } => {
            let model = match model {
                ModelName::Css => SynthModel::Css,
                ModelName::Squeezed => SynthModel::Squeezed { xi2: *xi2 },
                ModelName::Constant => SynthModel::Constant,
            };
            let spec = SynthSpec { model, atoms: *atoms, split_fraction: *split, eta: *eta, shots: *shots, seed: *seed };
            let ds = synthesize_dataset(&spec)?;
            let meta_path = meta_out.clone().unwrap_or_else(|| out.with_extension("meta.json"));
            ds.write(out, &meta_path)?;
            pretty(json!({ "data": out, "meta": meta_path, "shots": ds.shots.len(), "spec": spec, "metadata": ds.meta }))
        }
    }
}

fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((
            a.parse().map_err(|_| Error::InvalidInput(format!("bad sector {s}")))?,
            b.parse().map_err(|_| Error::InvalidInput(format!("bad sector {s}")))?,
        )),
        _ => Err(Error::InvalidInput(format!("sector must be NA,NB, got {s}"))),
    }
}

fn parse_rotation(s: &str, m: usize) -> Result<ModeUnitary> {
    use rand::SeedableRng;
    if s == "identity" {
        return Ok(ModeUnitary::identity(m));
    }
    if let Some(seed) = s.strip_prefix("random:") {
        let seed: u64 = seed.parse().map_err(|_| Error::InvalidInput(format!("bad seed in {s}")))?;
        return Ok(ModeUnitary::random(m, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed)));
    }
    Err(Error::InvalidInput(format!("rotation must be identity or random:SEED, got {s}")))
}

fn report_table(r: &ActivationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n_a", "n_b", "probability", "purity", "negativity", "entropy", "schmidt_spectrum"])?;
    for s in &r.sectors {
        let spectrum = s
            .schmidt_spectrum
            .as_ref()
            .map(|v| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        w.write_record([
            s.n_a.to_string(),
            s.n_b.to_string(),
            s.probability.to_string(),
            s.purity.to_string(),
            s.negativity.to_string(),
            s.entropy.map(|e| e.to_string()).unwrap_or_default(),
            spectrum,
        ])?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).map_err(|e| Error::InvalidInput(e.to_string()))
}

fn activate_cmd(a: &ActivateArgs, table: bool, limits: &Limits) -> Result<String> {
    let state = parse_state_preset(&a.state, limits)?;
    let m = state.modes();
    let spec = ActivationSpec::with_limits(state, parse_rotation(&a.va, m)?, BeamSplitterArray::parse(&a.r, m)?, *limits)?;
    let post = a.postselect.as_deref().map(parse_pair).transpose()?;
    let r = activate_postselect(&spec, post)?;
    if table {
        report_table(&r)
    } else {
        pretty(json!(r))
    }
}

fn parse_observable(s: &str, m: usize) -> Result<SingleParticleObservable> {
    let axis = match s {
        "x" => Some(Axis::X),
        "y" => Some(Axis::Y),
        "z" => Some(Axis::Z),
        _ => None,
    };
    if m != 2 {
        return Err(Error::InvalidInput(format!("observables on the command line need two modes, state has {m}")));
    }
    if let Some(ax) = axis {
        return Ok(SingleParticleObservable::pauli(ax));
    }
    if let Some(rest) = s.strip_prefix("bloch:") {
        let v: Vec<f64> = rest
            .split(',')
            .map(|x| x.trim().parse().map_err(|_| Error::InvalidInput(format!("bad angle in {s}"))))
            .collect::<Result<_>>()?;
        if let [theta, phi] = v[..] {
            return Ok(SingleParticleObservable::bloch(theta, phi));
        }
    }
    Err(Error::InvalidInput(format!("observable must be x, y, z or bloch:THETA,PHI, got {s}")))
}

fn qfi_cmd(a: &QfiArgs, limits: &Limits) -> Result<String> {
    let state = parse_state_preset(&a.state, limits)?;
    let h = parse_observable(&a.h, state.modes())?;
    let g = collective_generator(&h, state.max_particles());
    pretty(json!({
        "qfi": qfi(&state, &g)?,
        "variance": single_particle_variance(&state, &h)?,
        "objective": mpe_objective(&state, &h)?,
        "h": matrix_json(h.matrix()),
    }))
}

fn mpe_json(r: &MpeResult) -> Value {
    json!({
        "value": r.value,
        "objective": r.objective,
        "argmax_h": matrix_json(&r.argmax_h),
        "bloch_angles": r.bloch_angles.map(|(t, p)| json!({ "theta": t, "phi": p })),
        "search_metadata": r.metadata,
    })
}

fn mpef_cmd(a: &MpefArgs, limits: &Limits) -> Result<String> {
    let state = parse_state_preset(&a.state, limits)?;
    let search = if state.modes() == 2 && !a.general {
        MpeSearch::TwoModeExact
    } else {
        MpeSearch::GeneralRestarts { seed: a.seed, restarts: a.restarts }
    };
    pretty(mpe_json(&m_pe_f(&state, search)?))
}

#[derive(serde::Deserialize)]
struct MixtureTerm {
    q: f64,
    c: Vec<String>,
}

fn definetti_cmd(a: &DefinettiArgs) -> Result<String> {
    let terms: Vec<(f64, CVec)> = match &a.mixture {
        None => vec![(1.0, CVec::from_element(a.m, c(1.0 / (a.m as f64).sqrt(), 0.0)))],
        Some(p) => {
            let raw: Vec<MixtureTerm> = serde_json::from_str(&std::fs::read_to_string(p)?)?;
            raw.into_iter()
                .map(|t| Ok((t.q, CVec::from_vec(t.c.iter().map(|z| parse_complex(z)).collect::<Result<Vec<_>>>()?))))
                .collect::<Result<_>>()?
        }
    };
    if terms.iter().any(|t| t.1.len() != a.m) {
        return Err(Error::InvalidInput(format!("every mixture vector needs {} entries", a.m)));
    }
    let spec = match ExchangeableSeparableSpec::new(a.n, terms.clone()) {
        Ok(s) => s,
        Err(_) => ExchangeableSeparableSpec::symmetrized(a.n, terms)?,
    };
    let r = definetti_classical_approx(&spec, a.l)?;
    pretty(json!({
        "distance": r.distance,
        "bound": r.bound,
        "satisfied": r.satisfied,
        "truncation_mass": r.truncation_mass,
        "terms": spec.terms().len(),
        "rho_l": r.rho_l,
        "sigma_l": r.sigma_l,
    }))
}

fn demo(which: Demo, csv: bool, limits: &Limits) -> Result<String> {
    match which {
        Demo::YurkeStoler => {
            let spec = ActivationSpec::balanced(BlockDiagonalState::fock(&[1])?)?;
            let r = activate_postselect(&spec, None)?;
            let out = r.output.as_pure(1e-12).map(|p| {
                p.basis().states().iter().zip(p.amplitudes().iter()).map(|(o, z)| json!({ "occupation": o, "amplitude": [z.re, z.im] })).collect::<Vec<_>>()
            });
            pretty(json!({
                "description": "one particle split against vacuum: mode entangled, inaccessible under local number superselection",
                "output": out,
                "negativity": negativity(&r.output, &r.partition)?,
                "e_ssr_negativity": r.e_ssr_negativity,
            }))
        }
        Demo::Hom => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let u = ModeUnitary::new(CMat::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(-h, 0.0), c(h, 0.0)]))?;
            let out = apply_mode_unitary(&BlockDiagonalState::fock(&[1, 1])?, &u)?;
            let p = out.as_pure(1e-12).ok_or_else(|| Error::InvalidInput("output not pure".into()))?;
            let amps: Vec<Value> = p
                .basis()
                .states()
                .iter()
                .zip(p.amplitudes().iter())
                .map(|(o, z)| json!({ "occupation": o, "amplitude": [z.re, z.im] }))
                .collect();
            pretty(json!({ "description": "two photons on a balanced beam splitter", "output": amps }))
        }
        Demo::Fock22 => {
            let spec = ActivationSpec::balanced_with_limits(BlockDiagonalState::fock(&[2, 2])?, *limits)?;
            let r = activate_postselect(&spec, Some((2, 2)))?;
            if csv {
                return report_table(&r);
            }
            pretty(json!({
                "description": "|2,2> through balanced beam splitters, conditioned on two particles per side",
                "postselected": r.postselected,
                "e_ssr_negativity": r.e_ssr_negativity,
            }))
        }
        Demo::TwoCopy => {
            let r = two_copy_pe_check(&BlockDiagonalState::fock(&[1])?, limits)?;
            pretty(json!({ "description": "one particle is free; two copies activate", "report": r }))
        }
    }
}
