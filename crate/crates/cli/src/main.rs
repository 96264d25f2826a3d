use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fugitlab::european::price_european_closed;
use fugitlab::lattice::{self, LatticeConfig};
use fugitlab::optionality::{self, FugitRate, PipelineConfig};
use fugitlab::rates::calibrate;
use fugitlab::scenario::config::MethodChoice;
use fugitlab::scenario::sweep::{Provenance, ENGINE, VERSION};
use fugitlab::scenario::{self, figures, ConfigError, Format, ScenarioConfig};
use fugitlab::{Error, OptionKind, OptionSpec};

#[derive(Parser)]
#[command(name = "fugitlab", version, about = "American option optionality under stochastic rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic-rate American and European prices.
    Price(SpecArgs),
    /// Stopping-time distribution with tau*, Omega and exercise probability.
    Fugit {
        #[command(flatten)]
        spec: SpecArgs,
        /// Average over all paths, unexercised ones counted at maturity.
        #[arg(long)]
        unconditional: bool,
    },
    /// Full optionality report for one cell of a config.
    Optionality {
        #[command(flatten)]
        common: Common,
        /// Cell index in sweep order.
        #[arg(long, default_value_t = 0)]
        cell: usize,
        /// Write the per-node quadrature diagnostics as CSV.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Cartesian sweep over a config's grids.
    Sweep(Common),
    /// Deterministic rate-shock cases.
    Cases(Common),
    /// Figure data, one CSV per figure in the --out directory.
    Figures {
        #[command(flatten)]
        common: Common,
        /// Comma-separated figure ids, e.g. fig1,fig3.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long = "quad-order")]
    quad_order: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SpecArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    spot: Option<f64>,
    #[arg(long)]
    strike: Option<f64>,
    #[arg(long)]
    maturity: Option<f64>,
    #[arg(long = "vol")]
    volatility: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r2: Option<f64>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Single,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Call,
    Put,
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

type Outcome<T> = Result<T, Failure>;

fn load(common: &Common) -> Outcome<Option<ScenarioConfig>> {
    let Some(path) = &common.config else {
        return Ok(None);
    };
    let mut cfg = ScenarioConfig::from_path(path)?;
    if let Some(n) = common.steps {
        cfg.numerics.steps = n;
    }
    if let Some(m) = common.quad_order {
        cfg.numerics.quad_order = m;
    }
    if let Some(m) = common.method {
        cfg.numerics.method = match m {
            MethodArg::Single => MethodChoice::Single,
            MethodArg::Full => MethodChoice::Full,
        };
    }
    if let Some(f) = common.format {
        cfg.output.format = format_of(f);
    }
    cfg.validate()?;
    Ok(Some(cfg))
}

fn require(common: &Common) -> Outcome<ScenarioConfig> {
    load(common)?.ok_or_else(|| Failure::Config("--config is required for this command".into()))
}

fn format_of(f: FormatArg) -> Format {
    match f {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    }
}

fn emit(out: Option<&Path>, text: &str) -> Outcome<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)
                    .map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
            }
            fs::write(path, text).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn lattice_cfg(common: &Common, cfg: Option<&ScenarioConfig>) -> LatticeConfig {
    let steps = common
        .steps
        .or(cfg.map(|c| c.numerics.steps))
        .unwrap_or(lattice::DEFAULT_STEPS);
    LatticeConfig::with_steps(steps)
}

/// Contracts to price: every moneyness of the config with the stochastic slot at its
/// baseline rate, or a single contract from flags. Flags override config values.
fn specs(args: &SpecArgs, cfg: Option<&ScenarioConfig>) -> Outcome<Vec<OptionSpec>> {
    let mut out = Vec::new();
    match cfg {
        Some(c) => {
            let base_rate = match c.numerics.fugit_rate {
                FugitRate::TargetMean => c.rate.r_bar,
                FugitRate::Initial => c.rate.r0,
            };
            for m in c.moneyness_grid() {
                out.push(c.spec_at(m).with_rate(c.rate.stochastic, base_rate));
            }
        }
        None => {
            let missing = |name: &str| Failure::Config(format!("--{name} is required without --config"));
            out.push(OptionSpec {
                spot: args.spot.ok_or_else(|| missing("spot"))?,
                strike: args.strike.ok_or_else(|| missing("strike"))?,
                maturity: args.maturity.ok_or_else(|| missing("maturity"))?,
                volatility: args.volatility.ok_or_else(|| missing("vol"))?,
                funding_rate: 0.0,
                carry_rate: 0.0,
                kind: OptionKind::Put,
            });
        }
    }
    for s in &mut out {
        s.spot = args.spot.unwrap_or(s.spot);
        s.strike = args.strike.unwrap_or(s.strike);
        s.maturity = args.maturity.unwrap_or(s.maturity);
        s.volatility = args.volatility.unwrap_or(s.volatility);
        s.funding_rate = args.r1.unwrap_or(s.funding_rate);
        s.carry_rate = args.r2.unwrap_or(s.carry_rate);
        if let Some(k) = args.kind {
            s.kind = match k {
                KindArg::Call => OptionKind::Call,
                KindArg::Put => OptionKind::Put,
            };
        }
        s.validate().map_err(|e| Failure::Config(e.to_string()))?;
    }
    Ok(out)
}

fn header(steps: usize) -> String {
    format!("# engine = {ENGINE} {VERSION}\n# steps = {steps}\n")
}

fn cmd_price(args: &SpecArgs) -> Outcome<()> {
    let cfg = load(&args.common)?;
    let lat = lattice_cfg(&args.common, cfg.as_ref());
    let format = args.common.format.map(format_of).unwrap_or(Format::Csv);
    let mut rows = Vec::new();
    for spec in specs(args, cfg.as_ref())? {
        let american = lattice::price_american(&spec, &lat)?;
        let european_lattice = lattice::price_european_lattice(&spec, &lat)?;
        let european = price_european_closed(&spec)?.value;
        rows.push((spec, american, european_lattice, european));
    }
    let text = match format {
        Format::Csv => {
            let mut s = header(lat.steps);
            s.push_str("kind,spot,strike,maturity,volatility,r1,r2,american,european_lattice,european_closed,intrinsic\n");
            for (sp, a, el, e) in &rows {
                s.push_str(&format!(
                    "{},{:.4},{:.4},{:.4},{:.4},{:.6},{:.6},{:.4},{:.4},{:.4},{:.4}\n",
                    if sp.kind == OptionKind::Call { "call" } else { "put" },
                    sp.spot,
                    sp.strike,
                    sp.maturity,
                    sp.volatility,
                    sp.funding_rate,
                    sp.carry_rate,
                    a,
                    el,
                    e,
                    sp.intrinsic()
                ));
            }
            s
        }
        Format::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|(sp, a, el, e)| {
                    serde_json::json!({
                        "spec": sp, "american": a, "european_lattice": el, "european_closed": e,
                    })
                })
                .collect();
            serde_json::to_string_pretty(&serde_json::json!({ "steps": lat.steps, "prices": v })).unwrap() + "\n"
        }
    };
    emit(args.common.out.as_deref(), &text)
}

fn cmd_fugit(args: &SpecArgs, unconditional: bool) -> Outcome<()> {
    let cfg = load(&args.common)?;
    let lat = lattice_cfg(&args.common, cfg.as_ref());
    let rho_slot = cfg.as_ref().map(|c| c.numerics.rho_rate).unwrap_or(fugitlab::RateSlot::R2);
    let unconditional = unconditional || cfg.as_ref().is_some_and(|c| c.numerics.unconditional);
    let format = args.common.format.map(format_of).unwrap_or(Format::Csv);
    let spec = specs(args, cfg.as_ref())?[0];
    let (dist, mut summary) = fugitlab::fugit::summarize(&spec, &lat, rho_slot)?;
    if unconditional {
        summary.tau_star = dist.expected_fugit_unconditional()?;
    }
    let text = match format {
        Format::Csv => {
            let mut s = header(lat.steps);
            s.push_str(&format!(
                "# tau_star_years = {:.6}\n# tau_star_months = {:.4}\n# omega_years = {:.6}\n# omega_months = {:.4}\n\
                 # exercise_probability = {:.6}\n# no_exercise_mass = {:.6}\n",
                summary.tau_star,
                12.0 * summary.tau_star,
                summary.omega,
                12.0 * summary.omega,
                summary.exercise_probability,
                dist.no_exercise_mass
            ));
            s.push_str("step,time_years,time_months,mass\n");
            for (i, (t, p)) in dist.times.iter().zip(&dist.masses).enumerate() {
                s.push_str(&format!("{i},{t:.6},{:.4},{p:.12}\n", 12.0 * t));
            }
            s
        }
        Format::Json => {
            let pmf: Vec<_> = dist
                .times
                .iter()
                .zip(&dist.masses)
                .enumerate()
                .map(|(i, (t, p))| serde_json::json!({"step": i, "time_years": t, "time_months": 12.0 * t, "mass": p}))
                .collect();
            serde_json::to_string_pretty(&serde_json::json!({
                "spec": spec,
                "steps": lat.steps,
                "summary": summary,
                "tau_star_months": 12.0 * summary.tau_star,
                "omega_months": 12.0 * summary.omega,
                "no_exercise_mass": dist.no_exercise_mass,
                "pmf": pmf,
            }))
            .unwrap()
                + "\n"
        }
    };
    emit(args.common.out.as_deref(), &text)
}

fn cmd_optionality(common: &Common, cell: usize, diagnostics: Option<&Path>) -> Outcome<()> {
    let cfg = require(common)?;
    let cells = cfg.cells();
    let c = cells
        .get(cell)
        .ok_or_else(|| Failure::Config(format!("cell {cell} out of range (config has {})", cells.len())))?;
    let pc = cfg.pipeline();
    let model = calibrate(c.model, cfg.rate.r0, cfg.rate.r_bar, c.sigma_r, c.spec.maturity, cfg.kappa())?;
    let report = optionality::pi_a(&c.spec, &model, cfg.rate.stochastic, &pc)?;
    if let Some(path) = diagnostics {
        let mut s = String::from("index,atom,time_years,rate,weight,price\n");
        for d in &report.diagnostics {
            s.push_str(&format!(
                "{},{},{:.10},{:.10},{:.12e},{:.10}\n",
                d.index, d.atom, d.time, d.rate, d.weight, d.price
            ));
        }
        emit(Some(path), &s)?;
    }
    let p = cfg.output.precision;
    let text = match common.format.map(format_of).unwrap_or(Format::Json) {
        Format::Json => {
            let prov = Provenance::of(&cfg);
            serde_json::to_string_pretty(&serde_json::json!({ "provenance": prov, "report": report })).unwrap() + "\n"
        }
        Format::Csv => {
            let mut s = Provenance::of(&cfg).header_lines().join("\n");
            s.push('\n');
            s.push_str("o_a_star,o_a_tilde,pi_a,o_e_tilde,pi_a2,pi_delta_a,delta,r_star,tau_star_years,tau_star_months,omega_years,omega_months\n");
            let r = &report;
            s.push_str(&format!(
                "{:.p$},{:.p$},{:.p$},{:.p$},{:.p$},{:.p$},{:.6},{:.6},{:.p$},{:.p$},{:.p$},{:.p$}\n",
                r.o_a_star,
                r.o_a_tilde,
                r.pi_a,
                r.o_e_tilde,
                r.pi_a2,
                r.pi_delta_a,
                r.delta,
                r.r_star,
                r.tau_star,
                12.0 * r.tau_star,
                r.omega,
                12.0 * r.omega,
            ));
            s
        }
    };
    emit(common.out.as_deref(), &text)
}

fn cmd_sweep(common: &Common) -> Outcome<()> {
    let cfg = require(common)?;
    let result = scenario::run_sweep(&cfg, common.jobs)?;
    if result.failed_cells() > 0 {
        log::warn!("{} of {} cells failed", result.failed_cells(), result.rows.len());
    }
    let out = common.out.clone().or_else(|| cfg.output.path.clone());
    emit(out.as_deref(), &result.render(cfg.output.format))
}

fn cmd_cases(common: &Common) -> Outcome<()> {
    let cfg = load(common)?;
    let lat = lattice_cfg(common, cfg.as_ref());
    let reports = scenario::run_cases(&lat)?;
    let text = match common.format.map(format_of).unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = header(lat.steps);
            s.push_str("case,spot,r1,r2,american,european,reference_american,reference_european\n");
            for r in &reports {
                s.push_str(&format!(
                    "{},{:.2},{:.4},{:.4},{:.4},{:.4},{:.2},{:.2}\n",
                    r.case.name(),
                    r.spec.spot,
                    r.spec.funding_rate,
                    r.spec.carry_rate,
                    r.american,
                    r.european,
                    r.reference_american,
                    r.reference_european
                ));
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(&reports).unwrap() + "\n",
    };
    emit(common.out.as_deref(), &text)
}

fn cmd_figures(common: &Common, only: &[String]) -> Outcome<()> {
    let cfg = load(common)?;
    let mut pc = cfg.as_ref().map(|c| c.pipeline()).unwrap_or_else(PipelineConfig::default);
    if let Some(n) = common.steps {
        pc.lattice = LatticeConfig::with_steps(n);
    }
    if let Some(m) = common.quad_order {
        pc.quad_order = m;
    }
    if let Some(m) = common.method {
        pc.method = match m {
            MethodArg::Single => MethodChoice::Single,
            MethodArg::Full => MethodChoice::Full,
        }
        .method();
    }
    if matches!(common.format, Some(FormatArg::Json)) {
        return Err(Failure::Config("figure data is written as CSV only".into()));
    }
    let precision = cfg.as_ref().map(|c| c.output.precision).unwrap_or(4);
    let mut specs = figures::figure_specs();
    if !only.is_empty() {
        for id in only {
            if !specs.iter().any(|f| &f.id == id) {
                return Err(Failure::Config(format!("unknown figure id {id}")));
            }
        }
        specs.retain(|f| only.contains(&f.id));
    }
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("figures"));
    fs::create_dir_all(&dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
    for fig in &specs {
        let data = figures::compute_figure(fig, &pc, common.jobs)?;
        let path = dir.join(format!("{}.csv", fig.id));
        emit(Some(&path), &data.to_csv(pc.lattice.steps, pc.quad_order, precision))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Outcome<()> {
    match &cli.command {
        Command::Price(args) => cmd_price(args),
        Command::Fugit { spec, unconditional } => cmd_fugit(spec, *unconditional),
        Command::Optionality {
            common,
            cell,
            diagnostics,
        } => cmd_optionality(common, *cell, diagnostics.as_deref()),
        Command::Sweep(common) => cmd_sweep(common),
        Command::Cases(common) => cmd_cases(common),
        Command::Figures { common, only } => cmd_figures(common, only),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
