//! Subcommands. Each `run_*` function returns what the binary writes, so
//! the same code paths are usable from tests and other programs.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pmcal::metrics::loss_from_table;
use pmcal::seed::derive_seed;
use pmcal::sim::{run_scenarios, simulate, simulate_replicate, Scenario, SimConfig};
use pmcal::theory::curves::{self, constraint_figure, discrete_figure, linear_grid, named_curve, params_figure};
use pmcal::theory::{verify_bound, BoundCurve, BoundId, CurveParams, VerifyReport};
use pmcal::{
    apply_trace, boost, category_stats, enumerate_groups, make_discretization, AuditDataset, AuditParams, BoostConfig,
    BoostMode, Discretization, DiscretizationKind, GroupCollection, LossKind,
};

use crate::error::{invalid, CliError, Result};
use crate::ingest::{ingest_csv, write_dataset, Schema};
use crate::plot::{write_curves, write_scenario_table};
use crate::report::{
    to_json, AuditConfig, AuditReport, BoostEcho, Fold, PostprocessReport, TraceReport, SCHEMA_VERSION, TOOL_VERSION,
};

/// Stream index for the train/holdout shuffle, kept apart from the boosting
/// subsample streams.
const SPLIT_STREAM: u64 = 0x5_9117;

#[derive(Debug, Parser)]
#[command(
    name = "pmcal",
    version,
    about = "Audit and post-process risk scores for proportional multicalibration"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure MC, PMC and DC loss and AUROC of a scored CSV.
    Audit(AuditArgs),
    /// Boost scores toward PMC or MC and report before/after audits.
    Postprocess(PostprocessArgs),
    /// Generate synthetic scored populations and scenario tables.
    Simulate(SimulateArgs),
    /// Evaluate closed-form bounds on a grid.
    Bounds(BoundsArgs),
    /// Randomized checks of the bounds against measured losses.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Input CSV with a header row.
    pub input: PathBuf,
    #[arg(long, default_value = "y")]
    pub outcome_col: String,
    #[arg(long, default_value = "score")]
    pub score_col: String,
    /// Column of true outcome probabilities; `p_star` is used when present.
    #[arg(long)]
    pub p_star_col: Option<String>,
    /// Attributes that define groups, comma separated. Defaults to every
    /// other column.
    #[arg(long, value_delimiter = ',')]
    pub groups: Option<Vec<String>>,
}

impl InputArgs {
    pub fn schema(&self) -> Schema {
        Schema {
            outcome_col: self.outcome_col.clone(),
            score_col: self.score_col.clone(),
            attr_cols: self.groups.clone(),
            p_star_col: self.p_star_col.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BinsArg {
    Uniform,
    Geometric,
}

impl From<BinsArg> for DiscretizationKind {
    fn from(b: BinsArg) -> Self {
        match b {
            BinsArg::Uniform => DiscretizationKind::Uniform,
            BinsArg::Geometric => DiscretizationKind::Geometric,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AuditOpts {
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Bin width.
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    /// Minimum group mass.
    #[arg(long, default_value_t = 0.05)]
    pub gamma: f64,
    /// Outcome-rate floor for PMC.
    #[arg(long, default_value_t = 0.01)]
    pub rho: f64,
    #[arg(long, value_enum, default_value_t = BinsArg::Uniform)]
    pub bins: BinsArg,
    /// Add groups defined by subsets of the attributes.
    #[arg(long)]
    pub marginals: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use the p_star column in place of sampled outcomes.
    #[arg(long)]
    pub exact: bool,
}

impl AuditOpts {
    pub fn discretization(&self) -> Result<Discretization> {
        Ok(make_discretization(self.bins.into(), self.lambda, Some(self.rho))?)
    }

    pub fn params(&self) -> AuditParams {
        AuditParams::new(self.alpha, self.gamma, self.rho).exact(self.exact)
    }

    fn echo(&self, groups: &GroupCollection) -> AuditConfig {
        AuditConfig {
            alpha: self.alpha,
            lambda: self.lambda,
            gamma: self.gamma,
            rho: self.rho,
            bins: DiscretizationKind::from(self.bins).to_string(),
            groups: groups.attribute_basis().to_vec(),
            marginals: self.marginals,
            exact: self.exact,
            seed: self.seed,
        }
    }
}

impl Default for AuditOpts {
    fn default() -> Self {
        AuditOpts {
            alpha: 0.1,
            lambda: 0.1,
            gamma: 0.05,
            rho: 0.01,
            bins: BinsArg::Uniform,
            marginals: false,
            seed: 0,
            exact: false,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub opts: AuditOpts,
    /// Report path; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn basis(dataset: &AuditDataset) -> Vec<String> {
    dataset.attribute_names().map(str::to_string).collect()
}

/// Audit `dataset` against an already built group collection.
pub fn audit_with(
    dataset: &AuditDataset,
    groups: &GroupCollection,
    disc: &Discretization,
    opts: &AuditOpts,
) -> Result<AuditReport> {
    let params = opts.params();
    params.validate()?;
    let table = category_stats(dataset, groups, disc, opts.exact)?;
    let [mc, pmc, dc] = [LossKind::Mc, LossKind::Pmc, LossKind::Dc].map(|k| loss_from_table(k, &table, disc, &params));
    AuditReport::build(opts.echo(groups), dataset, groups, &table, [&mc, &pmc, &dc])
}

/// Audit `dataset` over every observed level combination of its attributes.
/// Group mass is enforced by the loss filters, so a large `gamma` yields
/// undefined losses rather than an error.
pub fn audit_dataset(dataset: &AuditDataset, opts: &AuditOpts) -> Result<AuditReport> {
    let disc = opts.discretization()?;
    let groups = enumerate_groups(dataset, &basis(dataset), opts.marginals, 0.0)?;
    audit_with(dataset, &groups, &disc, opts)
}

pub fn run_audit(args: &AuditArgs) -> Result<AuditReport> {
    let dataset = ingest_csv(&args.input.input, &args.input.schema())?;
    audit_dataset(&dataset, &args.opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Pmc,
    Mc,
}

#[derive(Debug, Clone, Args)]
pub struct PostprocessArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub opts: AuditOpts,
    #[arg(long, value_enum, default_value_t = ModeArg::Pmc)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = BoostConfig::DEFAULT_MAX_PASSES)]
    pub max_passes: usize,
    /// Fit on this fraction of rows and report on the rest.
    #[arg(long)]
    pub split: Option<f64>,
    /// Fraction of rows sampled per pass to estimate category statistics.
    #[arg(long, default_value_t = 1.0)]
    pub sample_fraction: f64,
    /// Write per-row scores before and after.
    #[arg(long)]
    pub out_scores: Option<PathBuf>,
    /// Include wall-clock time in the report. Makes output non-reproducible.
    #[arg(long)]
    pub timing: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// Post-processing settings beyond the audit options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostOpts {
    pub mode: BoostMode,
    pub max_passes: usize,
    pub split: Option<f64>,
    pub sample_fraction: f64,
    pub timing: bool,
}

impl Default for BoostOpts {
    fn default() -> Self {
        BoostOpts {
            mode: BoostMode::Pmc,
            max_passes: BoostConfig::DEFAULT_MAX_PASSES,
            split: None,
            sample_fraction: 1.0,
            timing: false,
        }
    }
}

impl PostprocessArgs {
    pub fn boost_opts(&self) -> BoostOpts {
        BoostOpts {
            mode: match self.mode {
                ModeArg::Pmc => BoostMode::Pmc,
                ModeArg::Mc => BoostMode::Mc,
            },
            max_passes: self.max_passes,
            split: self.split,
            sample_fraction: self.sample_fraction,
            timing: self.timing,
        }
    }
}

/// Per-row scores of a post-processing run, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub train: bool,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone)]
pub struct PostprocessOutput {
    pub report: PostprocessReport,
    pub scores: Vec<ScoreRow>,
}

/// Train/holdout row indices, each in input order.
pub fn split_rows(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return invalid(format!("split must lie in (0, 1), got {fraction}"));
    }
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return invalid(format!("split {fraction} of {n} rows leaves an empty fold"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, SPLIT_STREAM)));
    let (train, hold) = order.split_at(n_train);
    let (mut train, mut hold) = (train.to_vec(), hold.to_vec());
    train.sort_unstable();
    hold.sort_unstable();
    Ok((train, hold))
}

pub fn postprocess_dataset(dataset: &AuditDataset, opts: &AuditOpts, b: &BoostOpts) -> Result<PostprocessOutput> {
    let disc = opts.discretization()?;
    let (train_idx, hold_idx) = match b.split {
        Some(f) => {
            let (t, h) = split_rows(dataset.len(), f, opts.seed)?;
            (t, Some(h))
        }
        None => ((0..dataset.len()).collect(), None),
    };
    let train = dataset.select(&train_idx)?;
    let groups = enumerate_groups(&train, &basis(&train), opts.marginals, opts.gamma)?;
    let cfg = BoostConfig {
        mode: b.mode,
        alpha: opts.alpha,
        lambda: opts.lambda,
        gamma: opts.gamma,
        rho: if b.mode == BoostMode::Pmc { opts.rho } else { 0.0 },
        max_passes: b.max_passes,
        sample_fraction: b.sample_fraction,
        seed: opts.seed,
        exact: opts.exact,
    };
    let out = boost(&train, &groups, &disc, &cfg)?;
    let train_after = train.with_scores(out.scores.clone())?;

    let mut scores: Vec<ScoreRow> = dataset
        .scores()
        .iter()
        .map(|&s| ScoreRow {
            train: true,
            before: s,
            after: s,
        })
        .collect();
    for (&i, &s) in train_idx.iter().zip(&out.scores) {
        scores[i].after = s;
    }

    let (before, after, train_fold, eval_rows) = match &hold_idx {
        Some(hold_idx) => {
            let hold = dataset.select(hold_idx)?;
            let hold_scores = apply_trace(&hold, &groups, &disc, &out.trace)?;
            for (&i, &s) in hold_idx.iter().zip(&hold_scores) {
                scores[i].train = false;
                scores[i].after = s;
            }
            let hold_after = hold.with_scores(hold_scores)?;
            let fold = Fold {
                before: audit_with(&train, &groups, &disc, opts)?,
                after: audit_with(&train_after, &groups, &disc, opts)?,
            };
            (
                audit_with(&hold, &groups, &disc, opts)?,
                audit_with(&hold_after, &groups, &disc, opts)?,
                Some(fold),
                hold.len(),
            )
        }
        None => (
            audit_with(&train, &groups, &disc, opts)?,
            audit_with(&train_after, &groups, &disc, opts)?,
            None,
            train.len(),
        ),
    };

    Ok(PostprocessOutput {
        report: PostprocessReport {
            schema_version: SCHEMA_VERSION.into(),
            tool_version: TOOL_VERSION.into(),
            boost: BoostEcho {
                mode: b.mode,
                max_passes: b.max_passes,
                split: b.split,
                sample_fraction: b.sample_fraction,
            },
            train_rows: train.len(),
            eval_rows,
            before,
            after,
            train: train_fold,
            trace: TraceReport::from(&out.trace),
            wall_time_secs: b.timing.then_some(out.trace.totals.wall_time.as_secs_f64()),
        },
        scores,
    })
}

pub fn run_postprocess(args: &PostprocessArgs) -> Result<PostprocessOutput> {
    let dataset = ingest_csv(&args.input.input, &args.input.schema())?;
    postprocess_dataset(&dataset, &args.opts, &args.boost_opts())
}

pub fn write_scores(out: impl Write, rows: &[ScoreRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "fold", "score_before", "score_after"])?;
    for (i, r) in rows.iter().enumerate() {
        let fold = if r.train { "train" } else { "holdout" };
        w.write_record([
            (i + 1).to_string(),
            fold.into(),
            r.before.to_string(),
            r.after.to_string(),
        ])?;
    }
    w.flush()
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "random")]
    pub scenario: Scenario,
    #[arg(long, default_value_t = 61)]
    pub n_groups: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000)]
    pub n_per_group: usize,
    /// Replicates averaged into the scenario table.
    #[arg(long, default_value_t = 100)]
    pub n_sims: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Emit this replicate of the run rather than the dataset drawn
    /// directly from the seed.
    #[arg(long)]
    pub replicate: Option<usize>,
    /// Dataset CSV. Written to stdout when neither output is given.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Per-group mean PMC ratio table.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

impl SimulateArgs {
    pub fn config(&self) -> SimConfig {
        SimConfig {
            scenario: self.scenario,
            n_groups: self.n_groups,
            alpha: self.alpha,
            n_per_group: self.n_per_group,
            n_sims: self.n_sims,
            seed: self.seed,
        }
    }
}

pub fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = args.config();
    if let Some(path) = &args.table {
        let rows = run_scenarios(&cfg)?;
        write_to(Some(path), |w| {
            write_scenario_table(w, &cfg.scenario.to_string(), &rows)
        })?;
    }
    if args.out.is_some() || args.table.is_none() {
        let sim = match args.replicate {
            Some(k) => simulate_replicate(&cfg, k)?,
            None => simulate(&cfg)?,
        };
        write_to(args.out.as_deref(), |w| write_dataset(w, &sim.dataset))?;
    }
    Ok(())
}

/// `start:stop:step`, inclusive of `stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(format!("grid `{s}` is not start:stop:step"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
        Ok(GridSpec {
            start: num(a)?,
            stop: num(b)?,
            step: num(c)?,
        })
    }
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        Ok(linear_grid(self.start, self.stop, self.step)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    /// A single bound (mc_to_dc, pmc_to_dc, pmc_to_mc, dc_to_mc,
    /// uniform_discretization, geometric_discretization) or a figure
    /// (params, discrete, constraints).
    #[arg(long)]
    pub curve: String,
    /// Grid as start:stop:step. Defaults depend on the curve.
    #[arg(long)]
    pub grid: Option<GridSpec>,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    /// Smallest score, for mc_to_dc.
    #[arg(long, default_value_t = 0.5)]
    pub r_min: f64,
    /// Overall calibration error, for dc_to_mc.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Outcome floors plotted by `discrete`.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.2")]
    pub rhos: Vec<f64>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

pub fn run_bounds(args: &BoundsArgs) -> Result<Vec<BoundCurve>> {
    let default = match args.curve.as_str() {
        "uniform_discretization" | "geometric_discretization" | "discrete" => "0.05:1:0.05",
        "constraints" => "0:1:0.01",
        "params" => "0:0.5:0.01",
        _ => "0:0.45:0.05",
    };
    let grid = args
        .grid
        .unwrap_or_else(|| default.parse().expect("valid default grid"))
        .values()?;
    Ok(match args.curve.as_str() {
        "params" => params_figure(&grid)?,
        "discrete" => discrete_figure(&grid, args.alpha, &args.rhos)?,
        "constraints" => constraint_figure(&grid, args.alpha, args.rho)?,
        name if curves::CURVE_NAMES.contains(&name) => {
            let p = CurveParams {
                r_min: args.r_min,
                delta: args.delta,
                alpha: args.alpha,
                lambda: args.lambda,
                rho: args.rho,
            };
            vec![named_curve(name, &grid, &p)?]
        }
        other => {
            return invalid(format!(
                "unknown curve `{other}` (expected one of {}, params, discrete, constraints)",
                curves::CURVE_NAMES.join(", ")
            ))
        }
    })
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// mc_to_dc, pmc_to_dc, pmc_to_mc, dc_to_mc, efficiency, or all.
    #[arg(long, default_value = "all")]
    pub bound: String,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

pub fn run_verify(args: &VerifyArgs) -> Result<Vec<VerifyReport>> {
    let bounds: Vec<BoundId> = if args.bound == "all" {
        BoundId::ALL.to_vec()
    } else {
        vec![args.bound.parse()?]
    };
    bounds
        .into_iter()
        .map(|b| verify_bound(b, args.trials, args.seed).map_err(CliError::from))
        .collect()
}

/// Write through a buffered file, or stdout when `path` is `None`.
pub fn write_to(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::io(p, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

/// Run a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Audit(a) => {
            let report = run_audit(a)?;
            write_to(a.out.as_deref(), |w| w.write_all(to_json(&report).as_bytes()))
        }
        Command::Postprocess(a) => {
            let out = run_postprocess(a)?;
            if let Some(p) = &a.out_scores {
                write_to(Some(p), |w| write_scores(w, &out.scores))?;
            }
            write_to(a.out.as_deref(), |w| w.write_all(to_json(&out.report).as_bytes()))
        }
        Command::Simulate(a) => run_simulate(a),
        Command::Bounds(a) => {
            let curves = run_bounds(a)?;
            write_to(a.out.as_deref(), |w| write_curves(w, &curves))
        }
        Command::Verify(a) => {
            let reports = run_verify(a)?;
            for r in &reports {
                eprintln!(
                    "{}: {} checked, {} vacuous, {} violations",
                    r.bound.as_str(),
                    r.checked,
                    r.vacuous,
                    r.violations.len()
                );
            }
            write_to(a.out.as_deref(), |w| w.write_all(to_json(&reports).as_bytes()))
        }
    }
}
