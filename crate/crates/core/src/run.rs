//! Command dispatch: one spec document and a set of flags in, one report out.

use thiserror::Error;

use crate::config::{ConfigError, GridSpec, NormKind, SpecDocument, SweepParameter};
use crate::dynamics::resolvent_continuity_scan;
use crate::norm::{
    diamond_norm, so_norm_bruteforce, so_norm_sa, trace_distance_at, OptBudget, SuperoperatorDelta, BRUTE_FORCE_MAX_DIM,
};
use crate::qcc::{qcc_alpha_with, qcc_parameter_sweep, DISAGREEMENT_TOL};
use crate::report::{format_float, Cell, RunReport, SeedSource, Status, Table};

/// Environment variable consulted for the seed when neither flag nor spec sets one.
pub const SEED_ENV: &str = "QCC_SEED";
/// Exit status for unusable input.
pub const INPUT_ERROR_EXIT: i32 = 2;
pub const DEFAULT_REPEATS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Norm,
    Qcc,
    Sweep,
    Pipeline,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Norm => "norm",
            Command::Qcc => "qcc",
            Command::Sweep => "sweep",
            Command::Pipeline => "pipeline",
        }
    }
}

/// Command-line overrides. Raw strings are kept for the command echo.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFlags {
    pub spec_path: Option<String>,
    pub seed: Option<u64>,
    /// Value of the seed environment variable, if set.
    pub env_seed: Option<String>,
    pub restarts: Option<usize>,
    pub iters: Option<usize>,
    pub kind: Option<String>,
    pub param: Option<String>,
    pub grid: Option<String>,
    pub trials: Option<usize>,
    pub repeats: Option<usize>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("flag `{flag}`: {message}")]
    Flag { flag: &'static str, message: String },
    #[error("block `{block}`: {message}")]
    Engine { block: &'static str, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        INPUT_ERROR_EXIT
    }
}

fn engine<E: std::fmt::Display>(block: &'static str) -> impl Fn(E) -> RunError {
    move |e| RunError::Engine { block, message: e.to_string() }
}

/// Flag, then spec, then environment, then 0.
pub fn resolve_seed(spec: &SpecDocument, flags: &RunFlags) -> Result<(u64, SeedSource), RunError> {
    if let Some(seed) = flags.seed {
        return Ok((seed, SeedSource::Flag));
    }
    if let Some(seed) = spec.seed {
        return Ok((seed, SeedSource::Spec));
    }
    if let Some(raw) = &flags.env_seed {
        let seed = raw.trim().parse().map_err(|_| RunError::Flag {
            flag: SEED_ENV,
            message: format!("{raw:?} is not a non-negative integer"),
        })?;
        return Ok((seed, SeedSource::Env(SEED_ENV.to_string())));
    }
    Ok((0, SeedSource::Default))
}

/// Canonical command line: subcommand, then flags in a fixed order.
pub fn command_echo(cmd: Command, flags: &RunFlags) -> String {
    let mut parts = vec![cmd.name().to_string()];
    let mut push = |flag: &str, value: Option<String>| {
        if let Some(v) = value {
            parts.push(format!("--{flag} {v}"));
        }
    };
    push("kind", flags.kind.clone());
    push("param", flags.param.clone());
    push("grid", flags.grid.clone());
    push("trials", flags.trials.map(|v| v.to_string()));
    push("repeats", flags.repeats.map(|v| v.to_string()));
    push("seed", flags.seed.map(|v| v.to_string()));
    push("restarts", flags.restarts.map(|v| v.to_string()));
    push("iters", flags.iters.map(|v| v.to_string()));
    push("spec", flags.spec_path.clone());
    parts.join(" ")
}

fn budget(spec: &SpecDocument, flags: &RunFlags, seed: u64) -> Result<OptBudget, RunError> {
    let mut b = spec.budget(seed);
    if let Some(r) = flags.restarts {
        if r == 0 {
            return Err(RunError::Flag { flag: "--restarts", message: "must be positive".into() });
        }
        b.restarts = r;
    }
    if let Some(i) = flags.iters {
        b.iterations = i;
    }
    Ok(b)
}

fn require(present: bool, section: &'static str, cmd: Command) -> Result<(), RunError> {
    if present {
        Ok(())
    } else {
        Err(ConfigError::Missing { section, command: cmd.name().to_string() }.into())
    }
}

pub fn run_command(cmd: Command, spec: &SpecDocument, flags: &RunFlags) -> Result<RunReport, RunError> {
    let (seed, seed_source) = resolve_seed(spec, flags)?;
    let budget = budget(spec, flags, seed)?;
    let mut report = RunReport {
        command: command_echo(cmd, flags),
        seed,
        seed_source,
        status: Status::Pass,
        scalars: Vec::new(),
        table: Table::new(cmd.name(), &[]),
        notes: Vec::new(),
        wall_time: None,
    };
    match cmd {
        Command::Norm => run_norm(spec, flags, &budget, &mut report)?,
        Command::Qcc => run_qcc(spec, &budget, &mut report)?,
        Command::Sweep => run_sweep(spec, flags, &budget, &mut report)?,
        Command::Pipeline => run_pipeline(spec, flags, &budget, &mut report)?,
    }
    Ok(report)
}

fn run_norm(spec: &SpecDocument, flags: &RunFlags, budget: &OptBudget, report: &mut RunReport) -> Result<(), RunError> {
    require(spec.channel.is_some() || spec.generator.is_some(), "channel", Command::Norm)?;
    let kind = match &flags.kind {
        Some(k) => k.parse::<NormKind>().map_err(|message| RunError::Flag { flag: "--kind", message })?,
        None => spec.norm.as_ref().map(|n| n.kind).unwrap_or_default(),
    };
    let (channel, reference, state) = spec.norm_delta_parts(kind)?;
    let delta = SuperoperatorDelta::between(&channel, &reference).map_err(engine("norm"))?;
    let mut table =
        Table::new("norm", &["kind", "value", "method", "brute_force", "underestimate_flag", "dim", "seed"]);
    let (value, method, brute) = match kind {
        NormKind::So => {
            let r = so_norm_sa(&delta, budget).map_err(engine("norm"))?;
            let brute = brute_force(spec, &delta)?;
            (r.value, "optimized", brute)
        }
        NormKind::Diamond => {
            let r = diamond_norm(&delta, budget).map_err(engine("norm"))?;
            (r.value, "optimized", None)
        }
        NormKind::Trace => {
            let rho = state.expect("checked when resolving the norm block");
            let v = trace_distance_at(&delta, rho.matrix()).map_err(engine("norm.state"))?;
            (v, "exact", None)
        }
    };
    let flag = brute.is_some_and(|b| b > value + DISAGREEMENT_TOL);
    if flag {
        report.notes.push("brute-force grid exceeds the optimized value; raise restarts or iterations".into());
    }
    report.scalars.push(("kind".into(), kind.name().into()));
    report.scalars.push(("value".into(), value.into()));
    table.push(vec![
        kind.name().into(),
        value.into(),
        method.into(),
        brute.into(),
        brute.map(|_| flag).into(),
        delta.dim().into(),
        budget.seed.into(),
    ]);
    report.table = table;
    Ok(())
}

fn brute_force(spec: &SpecDocument, delta: &SuperoperatorDelta) -> Result<Option<f64>, RunError> {
    let resolution = spec.verifier.bruteforce_resolution;
    if resolution == 0 || delta.dim() > BRUTE_FORCE_MAX_DIM {
        return Ok(None);
    }
    Ok(Some(so_norm_bruteforce(delta, resolution).map_err(engine("verifier"))?.value))
}

fn run_qcc(spec: &SpecDocument, budget: &OptBudget, report: &mut RunReport) -> Result<(), RunError> {
    require(spec.unitary.is_some(), "unitary", Command::Qcc)?;
    require(spec.channel.is_some() || spec.generator.is_some(), "channel", Command::Qcc)?;
    require(spec.alpha_budget.is_some(), "alpha_budget", Command::Qcc)?;
    let inst = spec.qcc_instance()?;
    let r = qcc_alpha_with(&inst, budget, &spec.verifier_options()).map_err(engine("channel"))?;
    report.status = if r.passes { Status::Pass } else { Status::Fail };
    report.scalars.push(("alpha_hat".into(), r.alpha_hat.into()));
    report.scalars.push(("alpha_budget".into(), r.alpha_budget.into()));
    report.scalars.push(("passes".into(), r.passes.into()));
    if let Some(d) = r.alpha_hat_diamond {
        report.scalars.push(("alpha_hat_diamond".into(), d.into()));
        report.scalars.push(("passes_diamond".into(), (d <= r.alpha_budget + crate::qcc::BUDGET_TOL).into()));
    }
    let diag: Vec<String> =
        (0..r.witness_state.dim()).map(|k| format_float(r.witness_state.matrix()[(k, k)].re)).collect();
    report.notes.push(format!("witness state diagonal: {}", diag.join(" ")));
    if r.underestimate_flag {
        report.notes.push(format!(
            "brute-force grid value {} exceeds alpha_hat by more than {DISAGREEMENT_TOL:e}; raise restarts or iterations",
            format_float(r.brute_force.unwrap_or(f64::NAN))
        ));
    }
    let mut table = Table::new(
        "qcc",
        &[
            "alpha_hat",
            "alpha_budget",
            "passes",
            "brute_force",
            "underestimate_flag",
            "alpha_hat_diamond",
            "passes_diamond",
            "seed",
        ],
    );
    table.push(vec![
        r.alpha_hat.into(),
        r.alpha_budget.into(),
        r.passes.into(),
        r.brute_force.into(),
        r.brute_force.map(|_| r.underestimate_flag).into(),
        r.alpha_hat_diamond.into(),
        r.passes_diamond.into(),
        r.seed.into(),
    ]);
    report.table = table;
    Ok(())
}

fn run_sweep(
    spec: &SpecDocument,
    flags: &RunFlags,
    budget: &OptBudget,
    report: &mut RunReport,
) -> Result<(), RunError> {
    require(spec.sweep.is_some(), "sweep", Command::Sweep)?;
    require(spec.unitary.is_some(), "unitary", Command::Sweep)?;
    let parameter = flags
        .param
        .as_deref()
        .map(|p| p.parse::<SweepParameter>().map_err(|message| RunError::Flag { flag: "--param", message }))
        .transpose()?;
    let grid = flags
        .grid
        .as_deref()
        .map(|g| g.parse::<GridSpec>().map_err(|message| RunError::Flag { flag: "--grid", message }))
        .transpose()?;
    let sweep = spec.sweep_family(parameter, grid.as_ref())?;
    let template = spec.qcc_template()?;
    let member_dim = sweep.family.generator_at(sweep.baseline).map_err(engine("sweep"))?.dim();
    if member_dim != template.links().dim_comp() {
        return Err(RunError::Engine {
            block: "sweep",
            message: format!(
                "family acts on dim {member_dim}, links expect computational dim {}",
                template.links().dim_comp()
            ),
        });
    }
    let transfer =
        qcc_parameter_sweep(&template, &sweep.family, sweep.time, sweep.baseline, budget).map_err(engine("sweep"))?;
    let grid_points = sweep.family.grid().len();
    let continuity = if grid_points >= 2 {
        Some(
            resolvent_continuity_scan(&sweep.family, &sweep.lambdas, sweep.resolvent_norm, budget)
                .map_err(engine("sweep"))?,
        )
    } else {
        report.notes.push("resolvent continuity needs at least two grid points; skipped".into());
        None
    };

    let gap_columns: Vec<String> =
        sweep.lambdas.iter().map(|l| format!("resolvent_gap@{}", format_float(*l))).collect();
    let mut columns: Vec<&str> = vec![
        "z",
        "distance",
        "generator_gap",
        "duhamel_bound",
        "within_duhamel_bound",
        "alpha_hat",
        "transfer_bound",
        "within_transfer_bound",
        "passes",
    ];
    columns.extend(gap_columns.iter().map(String::as_str));
    let mut table = Table::new("sweep", &columns);
    for (k, row) in transfer.rows.iter().enumerate() {
        let mut cells: Vec<Cell> = vec![
            row.z.into(),
            row.distance.into(),
            row.generator_gap.into(),
            row.duhamel_bound.into(),
            row.within_duhamel_bound.into(),
            row.alpha_hat.into(),
            row.transfer_bound.into(),
            row.within_bound.into(),
            row.passes.into(),
        ];
        for &lambda in &sweep.lambdas {
            // gap between this grid point and the previous one
            let gap = continuity.as_ref().and_then(|c| {
                (k > 0).then(|| c.rows.iter().find(|r| r.lambda == lambda && r.z_right == row.z).map(|r| r.gap))?
            });
            cells.push(gap.into());
        }
        table.push(cells);
    }
    let all_pass = transfer.rows.iter().all(|r| r.passes);
    let certified = transfer.all_within_bound();
    report.status = if all_pass && certified { Status::Pass } else { Status::Fail };
    report.scalars.push(("parameter".into(), transfer.parameter_name.clone().into()));
    report.scalars.push(("time".into(), transfer.time.into()));
    report.scalars.push(("baseline".into(), transfer.baseline_z.into()));
    report.scalars.push(("baseline_alpha_hat".into(), transfer.baseline_alpha_hat.into()));
    report.scalars.push(("alpha_budget".into(), transfer.alpha_budget.into()));
    report.scalars.push(("all_pass".into(), all_pass.into()));
    report.scalars.push(("bounds_certified".into(), certified.into()));
    if let Some(c) = &continuity {
        for &lambda in &sweep.lambdas {
            report.scalars.push((format!("continuity_modulus@{}", format_float(lambda)), c.modulus(lambda).into()));
        }
    }
    report.table = table;
    Ok(())
}

fn run_pipeline(
    spec: &SpecDocument,
    flags: &RunFlags,
    budget: &OptBudget,
    report: &mut RunReport,
) -> Result<(), RunError> {
    require(spec.pipeline.is_some(), "pipeline", Command::Pipeline)?;
    require(spec.unitary.is_some(), "unitary", Command::Pipeline)?;
    require(spec.channel.is_some() || spec.generator.is_some(), "channel", Command::Pipeline)?;
    let section = spec.pipeline.as_ref().expect("checked above");
    let trials = flags.trials.or(section.trials);
    let repeats = flags.repeats.or(section.repeats).unwrap_or(DEFAULT_REPEATS);
    let evaluated = spec.pipeline_instance()?.evaluate(budget).map_err(engine("pipeline"))?;
    let check = evaluated.near_commutativity_check().map_err(engine("pipeline"))?;

    let mut columns = vec![
        "input",
        "target",
        "probability",
        "ideal_probability",
        "margin",
        "ideal_margin",
        "middle_step",
        "middle_step_within_alpha",
        "holds",
    ];
    if trials.is_some() {
        columns.extend([
            "trials",
            "repeats",
            "exact_success",
            "empirical_success",
            "standard_error",
            "within_three_sigma",
        ]);
    }
    let mut table = Table::new("pipeline", &columns);
    for row in &check.rows {
        let mut cells: Vec<Cell> = vec![
            row.input.clone().into(),
            row.target.clone().into(),
            row.probability.into(),
            row.ideal_probability.into(),
            row.margin.into(),
            row.ideal_margin.into(),
            row.middle_step.into(),
            row.middle_step_within_alpha.into(),
            row.holds.into(),
        ];
        if let Some(n) = trials {
            let stats = evaluated.majority_vote_run(&row.input, n, repeats, report.seed).map_err(engine("pipeline"))?;
            cells.extend([
                n.into(),
                repeats.into(),
                stats.exact_success.into(),
                stats.empirical_success.into(),
                stats.standard_error.into(),
                stats.within_three_sigma.into(),
            ]);
        }
        table.push(cells);
    }
    report.status = if check.all_hold() { Status::Pass } else { Status::Fail };
    report.scalars.push(("alpha_hat".into(), check.alpha_hat.into()));
    report.scalars.push(("p_budget".into(), check.p_budget.into()));
    report.scalars.push(("alpha_hat_plus_p".into(), (check.alpha_hat + check.p_budget).into()));
    report.scalars.push(("majority_vote_guaranteed".into(), check.majority_vote_guaranteed.into()));
    report.scalars.push(("all_hold".into(), check.all_hold().into()));
    if !check.majority_vote_guaranteed {
        report.notes.push("majority voting not guaranteed: alpha_hat + p >= 1/2".into());
    }
    report.table = table;
    Ok(())
}
