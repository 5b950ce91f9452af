//! `opfgrad`: solve DC-OPF instances, differentiate the load-to-generation
//! operator, enumerate binding sets, and map binding-set regions.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use opfgrad_core::conic;
use opfgrad_core::dcopf::{
    detect_binding, kkt_residuals, multiplier_count, solve_lp, uniqueness_probe, BindingSet,
    LoadProfile, SolveStatus,
};
use opfgrad_core::error::Error as CoreError;
use opfgrad_core::jacobian;
use opfgrad_core::netmodel::{load_case, CaseFile};
use opfgrad_core::operator::{self, OpfContext, SolveOptions};
use opfgrad_core::sweep::{self, AxisSpec, LoadSampleSpec};

#[derive(Parser)]
#[command(name = "opfgrad", version, about = "DC optimal power flow operator toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Case file in the native JSON schema.
    #[arg(long)]
    case: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for every randomized probe.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// KKT residual tolerance.
    #[arg(long, default_value_t = 1e-8)]
    kkt_tol: f64,
    /// Binding detection tolerance (relative to max(1, |limit|)).
    #[arg(long, default_value_t = 1e-7)]
    binding_tol: f64,
    /// Rank test: singular values below this times the largest are zero.
    #[arg(long, default_value_t = 1e-9)]
    rank_tol: f64,
    /// Simplex pivot tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pivot_tol: f64,
    /// Central finite-difference step.
    #[arg(long, default_value_t = 1e-6)]
    fd_step: f64,
    /// Nondifferentiability tolerance for cone projections.
    #[arg(long, default_value_t = 1e-9)]
    deriv_tol: f64,
    /// Self-dual embedding residual tolerance.
    #[arg(long, default_value_t = 1e-7)]
    embed_tol: f64,
}

impl Common {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            kkt_tol: self.kkt_tol,
            binding_tol: self.binding_tol,
            rank_rel_tol: self.rank_tol,
            pivot_tol: self.pivot_tol,
            fd_step: self.fd_step,
            deriv_tol: self.deriv_tol,
            embed_tol: self.embed_tol,
            probe_seed: self.seed,
            ..SolveOptions::default()
        }
    }

    fn load_case(&self) -> anyhow::Result<CaseFile> {
        let path = self.case.as_ref().ok_or_else(|| anyhow!("--case FILE is required"))?;
        load_case(path).with_context(|| format!("loading case {}", path.display()))
    }

    fn emit(&self, text: &str) -> anyhow::Result<()> {
        match &self.out {
            Some(path) => std::fs::write(path, text)
                .with_context(|| format!("writing {}", path.display()))?,
            None => print!("{text}"),
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the OPF at a load point and dump the solution with duals.
    Solve(SolveArgs),
    /// Closed-form Jacobian of the operator at a load point.
    Jacobian(PointArgs),
    /// Compare the closed-form Jacobian against central finite differences.
    FdCheck(PointArgs),
    /// Jacobian through the self-dual-embedding derivative.
    ConicDiff(PointArgs),
    /// Enumerate binding combinations with independence tags.
    Enumerate(EnumerateArgs),
    /// Worst-case sensitivity of a generator to a load bus.
    Sensitivity(SensitivityArgs),
    /// Construct parameters realizing a prescribed binding set.
    Construct(ConstructArgs),
    /// Classify binding-set regions over a two-load plane.
    ScanLoad(ScanLoadArgs),
    /// Classify candidate limit pairs for one branch.
    ScanLimit(ScanLimitArgs),
    /// Trace the operator along a piecewise-linear load path.
    Path(PathArgs),
    /// Print the case dimensions and bus numbering.
    CaseInfo(CaseInfoArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Load overrides `bus=value` using the bus numbers from case-info.
    #[arg(long = "load", value_name = "BUS=VALUE", num_args = 0.., action = clap::ArgAction::Append)]
    load: Vec<String>,
}

#[derive(Args)]
struct PointArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "load", value_name = "BUS=VALUE", num_args = 0.., action = clap::ArgAction::Append)]
    load: Vec<String>,
}

#[derive(Args)]
struct EnumerateArgs {
    #[command(flatten)]
    common: Common,
    /// Candidate cap.
    #[arg(long, default_value_t = 1_000_000)]
    cap: u128,
}

#[derive(Args)]
struct SensitivityArgs {
    #[command(flatten)]
    common: Common,
    /// Generator index (1-based). Omit for the full table.
    #[arg(long)]
    gen: Option<usize>,
    /// Load bus number as printed by case-info.
    #[arg(long)]
    load_bus: Option<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    cap: u128,
}

#[derive(Args)]
struct ConstructArgs {
    #[command(flatten)]
    common: Common,
    /// Binding generator indices, comma separated (e.g. 1,3).
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    gens: Vec<usize>,
    /// Binding branch indices, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    branches: Vec<usize>,
}

#[derive(Args)]
struct ScanLoadArgs {
    #[command(flatten)]
    common: Common,
    /// First swept load bus.
    #[arg(long)]
    bus_a: usize,
    /// Second swept load bus.
    #[arg(long)]
    bus_b: usize,
    /// Range for bus A as lo:hi.
    #[arg(long, allow_hyphen_values = true)]
    range_a: String,
    /// Range for bus B as lo:hi.
    #[arg(long, allow_hyphen_values = true)]
    range_b: String,
    #[arg(long, default_value_t = 200)]
    resolution: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Region area filter (fraction of feasible cells).
    #[arg(long, default_value_t = 0.001)]
    min_area: f64,
    /// Fixed values for the remaining loads.
    #[arg(long = "load", value_name = "BUS=VALUE", num_args = 0.., action = clap::ArgAction::Append)]
    load: Vec<String>,
}

#[derive(Args)]
struct ScanLimitArgs {
    #[command(flatten)]
    common: Common,
    /// Branch index (1-based, case-info order).
    #[arg(long)]
    branch: usize,
    /// Lower-bound range as lo:hi.
    #[arg(long, allow_hyphen_values = true)]
    lower: String,
    /// Upper-bound range as lo:hi.
    #[arg(long, allow_hyphen_values = true)]
    upper: String,
    #[arg(long, default_value_t = 40)]
    resolution: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Feasible load samples per cell for the degeneracy probe.
    #[arg(long, default_value_t = 64)]
    samples: usize,
    /// Load buses re-drawn per sample, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    vary: Vec<usize>,
    /// Sampling range for the varied buses.
    #[arg(long, default_value_t = 1e-3)]
    sample_lo: f64,
    #[arg(long, default_value_t = 4.0)]
    sample_hi: f64,
    #[arg(long = "load", value_name = "BUS=VALUE", num_args = 0.., action = clap::ArgAction::Append)]
    load: Vec<String>,
}

#[derive(Args)]
struct PathArgs {
    #[command(flatten)]
    common: Common,
    /// Waypoint as comma-separated overrides, e.g. `4=0.2,7=0.3`; repeat per
    /// waypoint. Unlisted loads keep their case values.
    #[arg(long = "waypoint", num_args = 1.., action = clap::ArgAction::Append)]
    waypoints: Vec<String>,
    #[arg(long, default_value_t = 50)]
    samples: usize,
}

#[derive(Args)]
struct CaseInfoArgs {
    #[command(flatten)]
    common: Common,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(ExitCode::SUCCESS);
            }
            eprint!("{e}");
            return Ok(ExitCode::from(1));
        }
    };
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Jacobian(args) => cmd_jacobian(args),
        Command::FdCheck(args) => cmd_fd_check(args),
        Command::ConicDiff(args) => cmd_conic_diff(args),
        Command::Enumerate(args) => cmd_enumerate(args),
        Command::Sensitivity(args) => cmd_sensitivity(args),
        Command::Construct(args) => cmd_construct(args),
        Command::ScanLoad(args) => cmd_scan_load(args),
        Command::ScanLimit(args) => cmd_scan_limit(args),
        Command::Path(args) => cmd_path(args),
        Command::CaseInfo(args) => cmd_case_info(args),
    }
}

/// Parse `bus=value` overrides against the case's load-bus numbering.
fn apply_load_overrides(
    case: &CaseFile,
    base: &DVector<f64>,
    overrides: &[String],
) -> anyhow::Result<DVector<f64>> {
    let n_gen = case.network.n_gen();
    let n_bus = case.network.n_buses();
    let mut load = base.clone();
    for item in overrides {
        for part in item.split(',').filter(|s| !s.is_empty()) {
            let (bus_str, val_str) = part
                .split_once('=')
                .ok_or_else(|| anyhow!("override `{part}` is not BUS=VALUE"))?;
            let bus: usize = bus_str.trim().parse().context("bus number")?;
            let value: f64 = val_str.trim().parse().context("load value")?;
            if bus <= n_gen || bus > n_bus {
                bail!("bus {bus} is not a load bus (loads are {}..{})", n_gen + 1, n_bus);
            }
            if value <= 0.0 || value.is_nan() {
                bail!("load must be positive (bus {bus} given {value})");
            }
            load[bus - 1 - n_gen] = value;
        }
    }
    Ok(load)
}

fn parse_range(text: &str) -> anyhow::Result<(f64, f64)> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| anyhow!("range `{text}` is not lo:hi"))?;
    Ok((lo.trim().parse().context("range lo")?, hi.trim().parse().context("range hi")?))
}

#[derive(serde::Serialize)]
struct BindingDump {
    gens: Vec<(usize, String)>,
    branches: Vec<(usize, String)>,
    rank_certificate: usize,
    key: String,
}

impl BindingDump {
    fn from(set: &BindingSet) -> Self {
        Self {
            gens: set.gens.iter().map(|&(i, s)| (i, format!("{s:?}").to_lowercase())).collect(),
            branches: set
                .branches
                .iter()
                .map(|&(i, s)| (i, format!("{s:?}").to_lowercase()))
                .collect(),
            rank_certificate: set.rank_certificate,
            key: set.canonical_key(),
        }
    }
}

fn cmd_solve(args: SolveArgs) -> anyhow::Result<ExitCode> {
    let case = args.common.load_case()?;
    let ctx = OpfContext::from_case(&case).with_options(args.common.options());
    let load = apply_load_overrides(&case, case.base_load.as_vector(), &args.load)?;
    let lp = ctx.lp(&load)?;
    let sol = solve_lp(&lp)?;

    #[derive(serde::Serialize)]
    struct Duals {
        tau: Vec<f64>,
        lambda_plus: Vec<f64>,
        lambda_minus: Vec<f64>,
        mu_plus: Vec<f64>,
        mu_minus: Vec<f64>,
    }
    #[derive(serde::Serialize)]
    struct Dump {
        status: SolveStatus,
        sg: Vec<f64>,
        theta: Vec<f64>,
        flows: Vec<f64>,
        objective: f64,
        duals: Duals,
        binding: Option<BindingDump>,
        residuals: Option<opfgrad_core::dcopf::KktReport>,
        multiplier_count: usize,
        uniqueness: Option<opfgrad_core::dcopf::Uniqueness>,
    }

    let optimal = sol.status == SolveStatus::Optimal;
    let binding = optimal.then(|| BindingDump::from(&ctx.detect(&sol).set));
    let residuals = optimal.then(|| kkt_residuals(&sol, &lp));
    let uniq = if optimal { Some(uniqueness_probe(&lp, &sol, args.common.seed)?) } else { None };
    let dump = Dump {
        status: sol.status,
        sg: sol.sg.iter().copied().collect(),
        theta: sol.theta.iter().copied().collect(),
        flows: sol.flows.iter().copied().collect(),
        objective: sol.objective,
        duals: Duals {
            tau: sol.tau.iter().copied().collect(),
            lambda_plus: sol.lambda_plus.iter().copied().collect(),
            lambda_minus: sol.lambda_minus.iter().copied().collect(),
            mu_plus: sol.mu_plus.iter().copied().collect(),
            mu_minus: sol.mu_minus.iter().copied().collect(),
        },
        binding,
        residuals,
        multiplier_count: if optimal { multiplier_count(&sol, 1e-9) } else { 0 },
        uniqueness: uniq,
    };
    let mut text = serde_json::to_string_pretty(&dump)?;
    text.push('\n');
    args.common.emit(&text)?;
    Ok(if optimal { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn jacobian_csv(m: &nalgebra::DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Solve + binding detection at a point, shared by the jacobian commands.
fn point_setup(
    common: &Common,
    overrides: &[String],
) -> anyhow::Result<(OpfContext, LoadProfile, Option<BindingSet>)> {
    let case = common.load_case()?;
    let ctx = OpfContext::from_case(&case).with_options(common.options());
    let load = apply_load_overrides(&case, case.base_load.as_vector(), overrides)?;
    let profile = LoadProfile::new(load).map_err(anyhow::Error::from)?;
    let sol = ctx.solve_raw(profile.as_vector())?;
    let binding = if sol.status == SolveStatus::Optimal {
        Some(ctx.detect(&sol).set)
    } else {
        None
    };
    Ok((ctx, profile, binding))
}

fn cmd_jacobian(args: PointArgs) -> anyhow::Result<ExitCode> {
    let (ctx, _, binding) = point_setup(&args.common, &args.load)?;
    let Some(binding) = binding else {
        args.common.emit("{\"status\":\"infeasible\"}\n")?;
        return Ok(ExitCode::from(2));
    };
    match jacobian::closed_form_jacobian(
        &ctx.net,
        &binding.gen_indices(),
        &binding.branch_indices(),
    ) {
        Ok(jac) => {
            let text = match args.common.format {
                Format::Csv => jacobian_csv(&jac.matrix),
                Format::Json => {
                    let mut t = serde_json::to_string_pretty(&serde_json::json!({
                        "binding": binding.canonical_key(),
                        "jacobian": matrix_rows(&jac.matrix),
                    }))?;
                    t.push('\n');
                    t
                }
            };
            args.common.emit(&text)?;
            Ok(ExitCode::SUCCESS)
        }
        Err(CoreError::ComboSize { got, need }) => {
            let mut t = serde_json::to_string_pretty(&serde_json::json!({
                "status": "degenerate",
                "binding": binding.canonical_key(),
                "binding_count": got,
                "expected": need,
            }))?;
            t.push('\n');
            args.common.emit(&t)?;
            Ok(ExitCode::from(2))
        }
        Err(CoreError::SingularCombo) => {
            let mut t = serde_json::to_string_pretty(&serde_json::json!({
                "status": "degenerate",
                "binding": binding.canonical_key(),
                "reason": "dependent binding combination",
            }))?;
            t.push('\n');
            args.common.emit(&t)?;
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e.into()),
    }
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn cmd_fd_check(args: PointArgs) -> anyhow::Result<ExitCode> {
    let (ctx, profile, binding) = point_setup(&args.common, &args.load)?;
    let Some(binding) = binding else {
        args.common.emit("{\"status\":\"infeasible\"}\n")?;
        return Ok(ExitCode::from(2));
    };
    let closed = jacobian::closed_form_jacobian(
        &ctx.net,
        &binding.gen_indices(),
        &binding.branch_indices(),
    );
    let fd = jacobian::fd_jacobian(&ctx, &profile, ctx.opts.fd_step);
    match (closed, fd) {
        (Ok(cf), Ok(fd)) => {
            let diff = (&cf.matrix - &fd.matrix).amax();
            let mut t = serde_json::to_string_pretty(&serde_json::json!({
                "binding": binding.canonical_key(),
                "step": ctx.opts.fd_step,
                "max_abs_difference": diff,
                "closed_form": matrix_rows(&cf.matrix),
                "finite_difference": matrix_rows(&fd.matrix),
            }))?;
            t.push('\n');
            args.common.emit(&t)?;
            Ok(ExitCode::SUCCESS)
        }
        (Err(CoreError::ComboSize { .. }), _) | (_, Err(CoreError::RegionBoundary)) => {
            let mut t = serde_json::to_string_pretty(&serde_json::json!({
                "status": "degenerate",
                "binding": binding.canonical_key(),
            }))?;
            t.push('\n');
            args.common.emit(&t)?;
            Ok(ExitCode::from(2))
        }
        (Err(e), _) => Err(e.into()),
        (_, Err(e)) => Err(e.into()),
    }
}

fn cmd_conic_diff(args: PointArgs) -> anyhow::Result<ExitCode> {
    let (ctx, profile, binding) = point_setup(&args.common, &args.load)?;
    if binding.is_none() {
        args.common.emit("{\"status\":\"infeasible\"}\n")?;
        return Ok(ExitCode::from(2));
    }
    let jac = match conic::conic_jacobian(&ctx, &profile) {
        Ok(jac) => jac,
        Err(e @ (CoreError::SingularSystem { .. } | CoreError::NotOptimal(_))) => {
            let mut t = serde_json::to_string_pretty(&serde_json::json!({
                "status": "degenerate",
                "reason": e.to_string(),
            }))?;
            t.push('\n');
            args.common.emit(&t)?;
            return Ok(ExitCode::from(2));
        }
        Err(e) => return Err(e.into()),
    };
    let text = match args.common.format {
        Format::Csv => jacobian_csv(&jac.matrix),
        Format::Json => {
            let mut t = serde_json::to_string_pretty(&serde_json::json!({
                "jacobian": matrix_rows(&jac.matrix),
            }))?;
            t.push('\n');
            t
        }
    };
    args.common.emit(&text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_enumerate(args: EnumerateArgs) -> anyhow::Result<ExitCode> {
    let case = args.common.load_case()?;
    let combos = jacobian::enumerate_binding_combos(&case.network, args.cap)?;
    let text = match args.common.format {
        Format::Csv => {
            let mut out = String::from("gens,branches,independent\n");
            for c in &combos {
                out.push_str(&format!(
                    "{},{},{}\n",
                    join(&c.gens),
                    join(&c.branches),
                    c.independent
                ));
            }
            out
        }
        Format::Json => {
            let list: Vec<serde_json::Value> = combos
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "gens": c.gens,
                        "branches": c.branches,
                        "independent": c.independent,
                    })
                })
                .collect();
            let mut t = serde_json::to_string_pretty(&serde_json::json!({
                "total": combos.len(),
                "independent": combos.iter().filter(|c| c.independent).count(),
                "combos": list,
            }))?;
            t.push('\n');
            t
        }
    };
    args.common.emit(&text)?;
    Ok(ExitCode::SUCCESS)
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn cmd_sensitivity(args: SensitivityArgs) -> anyhow::Result<ExitCode> {
    let case = args.common.load_case()?;
    let net = &case.network;
    let n_gen = net.n_gen();
    let entries = match (args.gen, args.load_bus) {
        (Some(gen), Some(bus)) => {
            if bus <= n_gen || bus > net.n_buses() {
                bail!("bus {bus} is not a load bus");
            }
            let (value, combo) = jacobian::worst_case_sensitivity(net, gen, bus - n_gen, args.cap)?;
            vec![jacobian::WorstCaseEntry { gen, load_idx: bus - n_gen, value, combo }]
        }
        (None, None) => jacobian::worst_case_table(net, args.cap)?,
        _ => bail!("give both --gen and --load-bus, or neither for the full table"),
    };
    let text = match args.common.format {
        Format::Csv => {
            let mut out = String::from("gen,load_bus,value,gens,branches\n");
            for e in &entries {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    e.gen,
                    e.load_idx + n_gen,
                    e.value,
                    join(&e.combo.gens),
                    join(&e.combo.branches)
                ));
            }
            out
        }
        Format::Json => {
            let list: Vec<serde_json::Value> = entries
                .iter()
                .map(|e| {
                    serde_json::json!({
                        "gen": e.gen,
                        "load_bus": e.load_idx + n_gen,
                        "value": e.value,
                        "argmax": {"gens": e.combo.gens, "branches": e.combo.branches},
                    })
                })
                .collect();
            let mut t = serde_json::to_string_pretty(&serde_json::Value::Array(list))?;
            t.push('\n');
            t
        }
    };
    args.common.emit(&text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_construct(args: ConstructArgs) -> anyhow::Result<ExitCode> {
    let case = args.common.load_case()?;
    let opts = args.common.options();
    let mut gens = args.gens.clone();
    let mut branches = args.branches.clone();
    gens.sort_unstable();
    branches.sort_unstable();
    let built =
        operator::construct_parameters_for_binding(&case.network, &gens, &branches, &opts)?;
    let sol = opfgrad_core::dcopf::solve_opf(
        &case.network,
        &built.cost,
        &built.limits,
        built.load.as_vector(),
    )?;
    let det = detect_binding(&sol, &case.network, &built.limits, opts.binding_tol, opts.rank_rel_tol);
    let matches = det.set.gen_indices() == gens && det.set.branch_indices() == branches;
    let mut t = serde_json::to_string_pretty(&serde_json::json!({
        "cost": built.cost.as_vector().iter().copied().collect::<Vec<f64>>(),
        "sg_max": built.limits.sg_max.iter().copied().collect::<Vec<f64>>(),
        "sg_min": built.limits.sg_min.iter().copied().collect::<Vec<f64>>(),
        "p_max": built.limits.p_max.iter().copied().collect::<Vec<f64>>(),
        "p_min": built.limits.p_min.iter().copied().collect::<Vec<f64>>(),
        "load": built.load.as_vector().iter().copied().collect::<Vec<f64>>(),
        "scale": built.scale,
        "verification": {
            "binding": BindingDump::from(&det.set),
            "matches_target": matches,
        },
    }))?;
    t.push('\n');
    args.common.emit(&t)?;
    Ok(if matches { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_scan_load(args: ScanLoadArgs) -> anyhow::Result<ExitCode> {
    let case = args.common.load_case()?;
    let ctx = OpfContext::from_case(&case).with_options(args.common.options());
    let fixed = apply_load_overrides(&case, case.base_load.as_vector(), &args.load)?;
    let n_gen = case.network.n_gen();
    let to_load_index = |bus: usize| -> anyhow::Result<usize> {
        if bus <= n_gen || bus > case.network.n_buses() {
            bail!("bus {bus} is not a load bus");
        }
        Ok(bus - n_gen)
    };
    let ax = to_load_index(args.bus_a)?;
    let ay = to_load_index(args.bus_b)?;
    let (alo, ahi) = parse_range(&args.range_a)?;
    let (blo, bhi) = parse_range(&args.range_b)?;
    let grid = sweep::scan_load_plane(
        &ctx,
        &fixed,
        (ax, ay),
        AxisSpec::new(format!("bus{}", args.bus_a), alo, ahi, args.resolution)?,
        AxisSpec::new(format!("bus{}", args.bus_b), blo, bhi, args.resolution)?,
        args.threads,
    )?;
    let text = match args.common.format {
        Format::Csv => grid.to_csv(),
        Format::Json => {
            let mut t = serde_json::to_string_pretty(&grid.summary_json(args.min_area))?;
            t.push('\n');
            t
        }
    };
    args.common.emit(&text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_scan_limit(args: ScanLimitArgs) -> anyhow::Result<ExitCode> {
    let case = args.common.load_case()?;
    let ctx = OpfContext::from_case(&case).with_options(args.common.options());
    let base = apply_load_overrides(&case, case.base_load.as_vector(), &args.load)?;
    let n_gen = case.network.n_gen();
    let mut vary = Vec::new();
    for bus in &args.vary {
        if *bus <= n_gen || *bus > case.network.n_buses() {
            bail!("vary bus {bus} is not a load bus");
        }
        vary.push(bus - n_gen);
    }
    let mut spec = LoadSampleSpec::new(base, vary, args.sample_lo, args.sample_hi);
    spec.samples = args.samples;
    spec.seed = args.common.seed;
    let (llo, lhi) = parse_range(&args.lower)?;
    let (ulo, uhi) = parse_range(&args.upper)?;
    let grid = sweep::scan_limit_plane(
        &ctx,
        &spec,
        args.branch,
        AxisSpec::new("lower", llo, lhi, args.resolution)?,
        AxisSpec::new("upper", ulo, uhi, args.resolution)?,
        args.threads,
    )?;
    let text = match args.common.format {
        Format::Csv => grid.to_csv(),
        Format::Json => {
            let mut t = serde_json::to_string_pretty(&grid.summary_json(0.0))?;
            t.push('\n');
            t
        }
    };
    args.common.emit(&text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_path(args: PathArgs) -> anyhow::Result<ExitCode> {
    let case = args.common.load_case()?;
    let ctx = OpfContext::from_case(&case).with_options(args.common.options());
    if args.waypoints.len() < 2 {
        bail!("need at least two --waypoint arguments");
    }
    let mut waypoints = Vec::new();
    for w in &args.waypoints {
        waypoints.push(apply_load_overrides(&case, case.base_load.as_vector(), std::slice::from_ref(w))?);
    }
    match sweep::trace_load_path(&ctx, &waypoints, args.samples) {
        Ok(trace) => {
            let text = match args.common.format {
                Format::Csv => trace.to_csv(),
                Format::Json => {
                    let samples: Vec<serde_json::Value> = trace
                        .samples
                        .iter()
                        .map(|s| {
                            serde_json::json!({
                                "t": s.t,
                                "load": s.load.iter().copied().collect::<Vec<f64>>(),
                                "sg": s.sg.iter().copied().collect::<Vec<f64>>(),
                                "objective": s.objective,
                                "region": s.region_key,
                            })
                        })
                        .collect();
                    let mut t = serde_json::to_string_pretty(&serde_json::json!({
                        "region_changes": trace.region_changes,
                        "samples": samples,
                    }))?;
                    t.push('\n');
                    t
                }
            };
            args.common.emit(&text)?;
            Ok(ExitCode::SUCCESS)
        }
        Err(CoreError::Infeasible) => {
            args.common.emit("{\"status\":\"infeasible\"}\n")?;
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_case_info(args: CaseInfoArgs) -> anyhow::Result<ExitCode> {
    let case = args.common.load_case()?;
    let net = &case.network;
    let gens: Vec<serde_json::Value> = (1..=net.n_gen())
        .map(|g| {
            serde_json::json!({
                "bus": g,
                "cost": case.cost.as_vector()[g - 1],
                "sg_min": case.limits.sg_min[g - 1],
                "sg_max": case.limits.sg_max[g - 1],
            })
        })
        .collect();
    let loads: Vec<serde_json::Value> = (1..=net.n_load())
        .map(|l| {
            serde_json::json!({
                "bus": net.n_gen() + l,
                "load": case.base_load.as_vector()[l - 1],
            })
        })
        .collect();
    let edges: Vec<serde_json::Value> = net
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            serde_json::json!({
                "index": k + 1,
                "from": e.from,
                "to": e.to,
                "b": e.susceptance,
                "p_min": case.limits.p_min[k],
                "p_max": case.limits.p_max[k],
            })
        })
        .collect();
    let mut t = serde_json::to_string_pretty(&serde_json::json!({
        "name": case.metadata.name,
        "mva_base": case.metadata.mva_base,
        "buses": net.n_buses(),
        "generators": gens,
        "loads": loads,
        "edges": edges,
    }))?;
    t.push('\n');
    args.common.emit(&t)?;
    Ok(ExitCode::SUCCESS)
}
