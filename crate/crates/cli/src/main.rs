use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use treefork::analysis::io::{equilibria_csv, sweep_csv, to_json, trajectory_csv, write_atomic, write_json};
use treefork::analysis::scenario::{MethodName, DEFAULT_OUTPUT_INTERVAL, DEFAULT_PERTURBATION, DEFAULT_SEED, DEFAULT_SIGMA, DEFAULT_T_FINAL};
use treefork::analysis::{
    audit_equivariance, list_equilibria, run_scenario, run_sweep, AuditConfig, AuditMode, EquilibriumMode, InitialCondition,
    IntegratorSettings, Scenario, SweepParameter, SweepSpec,
};
use treefork::tree::{canonical_form, enumerate_group, ParsedTree, DEFAULT_GROUP_CAP};
use treefork::Error;

/// Decision dynamics on binary-tree parsings of option sets.
#[derive(Debug, Parser)]
#[command(name = "treefork", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the tree dynamics and write the projected trajectory.
    Simulate(SimulateArgs),
    /// Track equilibria over a grid of a common value or of sigma.
    Sweep(SweepArgs),
    /// List reduced equilibria, optionally refined in the full system.
    Equilibria(EquilibriaArgs),
    /// Check that the vector field commutes with the tree isomorphisms.
    Audit(AuditArgs),
    /// List the isomorphism group of a tree.
    Isomorphisms(IsomorphismArgs),
}

/// Options shared by every command. Any of them can instead come from a
/// JSON file given with `--config`, whose keys are the long flag names.
#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct Common {
    /// Tree JSON file, or `balanced:N` / `caterpillar:N`.
    #[arg(long)]
    tree: Option<String>,
    /// Option values as a comma-separated list.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    values: Option<Vec<f64>>,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// Initial stacked pairs, comma-separated; defaults to a perturbed deadlock.
    #[arg(long, value_delimiter = ',')]
    ic: Option<Vec<f64>>,
    /// Seed of the deadlock perturbation.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    perturbation: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Step of the fixed-step method.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    output_interval: Option<f64>,
    /// Trajectory CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary JSON path; printed to stdout when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    Rk4,
    Dopri5,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    parameter: Option<ParameterArg>,
    #[arg(long)]
    start: Option<f64>,
    #[arg(long)]
    end: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Common option value held fixed in a sigma sweep.
    #[arg(long)]
    value: Option<f64>,
    /// Sweep table CSV path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report JSON path with crossings and lost branches.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ParameterArg {
    V,
    Sigma,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct EquilibriaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Gain applied to the values in full mode.
    #[arg(long)]
    gain: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Reduced,
    Full,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct AuditArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `fixed` keeps the values in place instead of permuting them.
    #[arg(long, value_enum)]
    audit_mode: Option<AuditModeArg>,
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum AuditModeArg {
    Permuting,
    Fixed,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct IsomorphismArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

enum Failure {
    Core(Error),
    Usage(String),
    Audit,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult<T> = Result<T, Failure>;

/// Reads a JSON config and rebases its `tree` entry on the file's directory.
fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<(T, PathBuf)> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let value = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((value, base))
}

fn merge<T>(flag: &mut Option<T>, from_file: Option<T>) {
    if flag.is_none() {
        *flag = from_file;
    }
}

impl Common {
    fn merge(&mut self, file: Common, base: &Path) {
        let tree = file.tree.map(|t| {
            if t.contains(':') || Path::new(&t).is_absolute() {
                t
            } else {
                base.join(t).to_string_lossy().into_owned()
            }
        });
        merge(&mut self.tree, tree);
        merge(&mut self.values, file.values);
        merge(&mut self.sigma, file.sigma);
    }

    fn tree(&self) -> CliResult<ParsedTree> {
        let t = self.tree.as_deref().ok_or_else(|| Failure::Usage("--tree is required".into()))?;
        let generated = |n: &str| n.parse::<usize>().map_err(|_| Failure::Usage(format!("bad option count in {t:?}")));
        let tree = if let Some(n) = t.strip_prefix("balanced:") {
            ParsedTree::balanced(generated(n)?)?
        } else if let Some(n) = t.strip_prefix("caterpillar:") {
            ParsedTree::caterpillar(generated(n)?)?
        } else {
            ParsedTree::from_path(t)?
        };
        Ok(tree)
    }

    fn values(&self, tree: &ParsedTree) -> CliResult<Vec<f64>> {
        let v = self.values.clone().ok_or_else(|| Failure::Usage("--values is required".into()))?;
        if v.len() != tree.n_options() {
            return Err(Error::Dimension { expected: tree.n_options(), got: v.len() }.into());
        }
        Ok(v)
    }

    fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(DEFAULT_SIGMA)
    }
}

fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => Ok(write_atomic(p, text.as_bytes())?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn simulate(mut a: SimulateArgs) -> CliResult<()> {
    if let Some(cfg) = a.config.take() {
        let (file, base): (SimulateArgs, PathBuf) = load_config(&cfg)?;
        a.common.merge(file.common, &base);
        merge(&mut a.ic, file.ic);
        merge(&mut a.seed, file.seed);
        merge(&mut a.perturbation, file.perturbation);
        merge(&mut a.t_final, file.t_final);
        merge(&mut a.method, file.method);
        merge(&mut a.h, file.h);
        merge(&mut a.output_interval, file.output_interval);
        merge(&mut a.out, file.out.map(|p| base.join(p)));
        merge(&mut a.summary, file.summary.map(|p| base.join(p)));
    }
    let tree = a.common.tree()?;
    let values = a.common.values(&tree)?;
    let initial = match a.ic {
        Some(m) => InitialCondition::Pairs { m },
        None => InitialCondition::DeadlockPerturbed {
            seed: a.seed.unwrap_or(DEFAULT_SEED),
            magnitude: a.perturbation.unwrap_or(DEFAULT_PERTURBATION),
        },
    };
    let defaults = IntegratorSettings::default();
    let settings = IntegratorSettings {
        method: match a.method {
            Some(MethodArg::Rk4) => MethodName::Rk4,
            Some(MethodArg::Dopri5) | None => MethodName::Dopri5,
        },
        t_final: a.t_final.unwrap_or(DEFAULT_T_FINAL),
        output_interval: a.output_interval.unwrap_or(DEFAULT_OUTPUT_INTERVAL),
        h: a.h.unwrap_or(defaults.h),
        ..defaults
    };
    let scenario = Scenario::new(tree, values, a.common.sigma(), initial)?.with_integrator(settings.to_config()?);
    let outcome = run_scenario(&scenario)?;
    if let Some(out) = &a.out {
        write_atomic(out, trajectory_csv(&outcome.trajectory.times, &outcome.projected).as_bytes())?;
    }
    match &a.summary {
        Some(p) => {
            write_json(p, &outcome.summary)?;
            let s = &outcome.summary;
            println!("final m_o = {:?}, argmax = option {}", s.final_projected, s.argmax + 1);
        }
        None => print!("{}", to_json(&outcome.summary)?),
    }
    Ok(())
}

fn sweep(mut a: SweepArgs) -> CliResult<()> {
    if let Some(cfg) = a.config.take() {
        let (file, base): (SweepArgs, PathBuf) = load_config(&cfg)?;
        a.common.merge(file.common, &base);
        merge(&mut a.parameter, file.parameter);
        merge(&mut a.start, file.start);
        merge(&mut a.end, file.end);
        merge(&mut a.points, file.points);
        merge(&mut a.value, file.value);
        merge(&mut a.out, file.out.map(|p| base.join(p)));
        merge(&mut a.summary, file.summary.map(|p| base.join(p)));
    }
    let tree = a.common.tree()?;
    let need = |x: Option<f64>, name: &str| x.ok_or_else(|| Failure::Usage(format!("--{name} is required")));
    let parameter = a.parameter.unwrap_or(ParameterArg::V);
    let spec = SweepSpec::new(
        match parameter {
            ParameterArg::V => SweepParameter::Value,
            ParameterArg::Sigma => SweepParameter::Sigma,
        },
        need(a.start, "start")?,
        need(a.end, "end")?,
        a.points.unwrap_or(200),
        match parameter {
            ParameterArg::V => a.common.sigma(),
            ParameterArg::Sigma => need(a.value, "value")?,
        },
    );
    let report = run_sweep(&tree, &spec)?;
    emit(a.out.as_deref(), &sweep_csv(&report))?;
    if let Some(p) = &a.summary {
        write_json(p, &report)?;
    }
    for c in &report.crossings {
        let value = c.value.map_or("unrefined".to_string(), |v| format!("{v:.12}"));
        eprintln!("branch {}: leading eigenvalue changes sign in [{}, {}], crossing at {value}", c.branch, c.lower, c.upper);
    }
    for l in &report.lost {
        eprintln!("branch {} lost at {} (last tracked {:?}): {}", l.branch, l.at_parameter, l.last_parameter, l.reason);
    }
    Ok(())
}

fn equilibria(mut a: EquilibriaArgs) -> CliResult<()> {
    if let Some(cfg) = a.config.take() {
        let (file, base): (EquilibriaArgs, PathBuf) = load_config(&cfg)?;
        a.common.merge(file.common, &base);
        merge(&mut a.mode, file.mode);
        merge(&mut a.gain, file.gain);
        merge(&mut a.out, file.out.map(|p| base.join(p)));
    }
    let tree = a.common.tree()?;
    let values = a.common.values(&tree)?;
    let mode = match a.mode {
        Some(ModeArg::Full) => EquilibriumMode::Full,
        _ => EquilibriumMode::Reduced,
    };
    let rows = list_equilibria(&tree, &values, a.common.sigma(), mode, a.gain.unwrap_or(1.0))?;
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("equilibrium {}: {}", r.id, r.error.as_deref().unwrap_or_default());
    }
    emit(a.out.as_deref(), &equilibria_csv(&rows))
}

#[derive(Serialize)]
struct AuditLine<'a> {
    flips: &'a [usize],
    m_residual: f64,
    z_residual: f64,
}

fn audit(mut a: AuditArgs) -> CliResult<()> {
    if let Some(cfg) = a.config.take() {
        let (file, base): (AuditArgs, PathBuf) = load_config(&cfg)?;
        a.common.merge(file.common, &base);
        merge(&mut a.trials, file.trials);
        merge(&mut a.seed, file.seed);
        merge(&mut a.audit_mode, file.audit_mode);
        merge(&mut a.summary, file.summary.map(|p| base.join(p)));
    }
    let tree = a.common.tree()?;
    let values = a.common.values(&tree)?;
    let defaults = AuditConfig::default();
    let cfg = AuditConfig {
        trials: a.trials.unwrap_or(defaults.trials),
        seed: a.seed.unwrap_or(defaults.seed),
        mode: match a.audit_mode {
            Some(AuditModeArg::Fixed) => AuditMode::Fixed,
            _ => AuditMode::Permuting,
        },
        sigma: a.common.sigma(),
        ..defaults
    };
    let report = audit_equivariance(&tree, &values, &cfg)?;
    for e in &report.elements {
        let line = AuditLine { flips: &e.flips, m_residual: e.m_residual, z_residual: e.z_residual };
        println!("{}", serde_json::to_string(&line).expect("plain data"));
    }
    println!(
        "group size {}, max residual m {:.3e}, z {:.3e}{}",
        report.group_size,
        report.max_m_residual,
        report.max_z_residual,
        if report.broken_symmetry { " (broken symmetry)" } else { "" }
    );
    if let Some(p) = &a.summary {
        write_json(p, &report)?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Audit)
    }
}

#[derive(Serialize)]
struct GroupElement {
    flips: Vec<usize>,
    option_perm: Vec<usize>,
    state_perm: Vec<usize>,
    image: serde_json::Value,
}

#[derive(Serialize)]
struct GroupListing {
    canonical_form: String,
    order: usize,
    elements: Vec<GroupElement>,
}

fn isomorphisms(mut a: IsomorphismArgs) -> CliResult<()> {
    if let Some(cfg) = a.config.take() {
        let (file, base): (IsomorphismArgs, PathBuf) = load_config(&cfg)?;
        a.common.merge(file.common, &base);
    }
    let tree = a.common.tree()?;
    let group = enumerate_group(&tree, DEFAULT_GROUP_CAP)?;
    let listing = GroupListing {
        canonical_form: canonical_form(&tree),
        order: group.len(),
        elements: group
            .iter()
            .map(|g| GroupElement {
                flips: g.flip_set().iter().copied().collect(),
                option_perm: g.option_perm().to_vec(),
                state_perm: g.state_perm().to_vec(),
                image: g.image().to_spec().to_value(),
            })
            .collect(),
    };
    print!("{}", to_json(&listing)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Equilibria(a) => equilibria(a),
        Command::Audit(a) => audit(a),
        Command::Isomorphisms(a) => isomorphisms(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() || matches!(e, Error::Io(_)) { 1 } else { 2 })
        }
        Err(Failure::Audit) => {
            eprintln!("error: equivariance residual exceeds tolerance");
            ExitCode::from(3)
        }
    }
}
