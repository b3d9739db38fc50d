//! Command-line front end: parameter sweeps written as CSV or JSON.
//!
//! Every output embeds the [`RunConfig`] that produced it; `openrabi replay`
//! re-runs such a file.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::jc_analytic::jc_vs_rabi_comparison;
use crate::lindblad::{self, DensityMatrix, EvolveOptions};
use crate::model::{BareStateLabel, ModelParams, ParitySector, TruncationConfig};
use crate::spectrum::{track_levels_over_sweep, LevelTracking};
use crate::vectorized::full_vs_phenomenological;
use crate::{Error, Result, VERSION};

pub const DEFAULT_DYNAMICS_CUTOFF: usize = 9;
pub const DEFAULT_SPECTRUM_CUTOFF: usize = 40;
/// `n_max` for the doubled-space comparison (four levels per copy).
pub const DEFAULT_FULLCMP_CUTOFF: usize = 3;
/// Cutoff step and observable tolerance of the automatic cutoff raise.
pub const DYNAMICS_CUTOFF_PROBE: usize = 3;
pub const DYNAMICS_CUTOFF_TOL: f64 = 1e-4;
/// Largest `n_max` tried while converging a time series.
pub const DYNAMICS_MAX_CUTOFF: usize = 30;
/// Largest `n_max` tried while converging a steady state.
pub const STEADY_MAX_CUTOFF: usize = 36;

#[derive(Debug, Parser)]
#[command(
    name = "openrabi",
    version,
    about = "Spectra and two-photon-loss dynamics of the quantum Rabi model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Labelled complex eigenfrequencies over a coupling sweep.
    Spectrum(RunArgs),
    /// Time traces of photon number, qubit excitation and parity.
    Dynamics(RunArgs),
    /// Steady-state observables over a coupling sweep.
    Steady(RunArgs),
    /// Weights of a bare initial state on the open eigenmodes.
    Modemap(RunArgs),
    /// Jaynes–Cummings closed form next to the open Rabi branches.
    Jc(RunArgs),
    /// Doubled-space spectrum with and without the collapse term.
    Fullcmp(RunArgs),
    /// Re-run the configuration embedded in an earlier output file.
    Replay {
        /// CSV or JSON file written by this tool.
        from: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum ParityChoice {
    #[value(name = "+")]
    #[serde(rename = "+")]
    Plus,
    #[value(name = "-")]
    #[serde(rename = "-")]
    Minus,
    #[value(name = "both")]
    #[serde(rename = "both")]
    Both,
}

impl ParityChoice {
    fn sectors(self) -> Vec<ParitySector> {
        match self {
            ParityChoice::Plus => vec![ParitySector::Even],
            ParityChoice::Minus => vec![ParitySector::Odd],
            ParityChoice::Both => ParitySector::BOTH.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Qubit frequency in units of ν_c.
    #[arg(long, default_value_t = 0.8, allow_hyphen_values = true)]
    pub nu_q: f64,
    /// Two-photon loss rate κ_c2 in units of ν_c.
    #[arg(long, alias = "kappa", default_value_t = 1.0 / 40.0)]
    pub kappa2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub g_start: f64,
    #[arg(long, default_value_t = 2.0)]
    pub g_stop: f64,
    #[arg(long, default_value_t = 201)]
    pub g_steps: usize,
    /// Highest boson number n_max kept in each parity block.
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Initial bare state "n,g" or "n,e".
    #[arg(long, default_value = "2,g")]
    pub init: String,
    /// Final time in units of 1/ν_c.
    #[arg(long, default_value_t = 80.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 201)]
    pub t_steps: usize,
    /// Number of lowest branches (spectrum, modemap) or JC doublets (jc).
    #[arg(long, default_value_t = 6)]
    pub levels: usize,
    #[arg(long, value_enum, default_value_t = ParityChoice::Both)]
    pub parity: ParityChoice,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Keep the cutoff fixed instead of raising it until observables settle.
    #[arg(long)]
    pub no_convergence_check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        if self.steps == 0
            || !self.start.is_finite()
            || !self.stop.is_finite()
            || self.stop < self.start
        {
            return Err(Error::InvalidParameter(format!(
                "invalid grid {} .. {} with {} points",
                self.start, self.stop, self.steps
            )));
        }
        if self.steps == 1 {
            return Ok(vec![self.start]);
        }
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        Ok((0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.stop
                } else {
                    self.start + h * i as f64
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Spectrum,
    Dynamics,
    Steady,
    Modemap,
    Jc,
    Fullcmp,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub nu_c: f64,
    pub nu_q: f64,
    pub kappa_c2: f64,
    pub cutoff: usize,
    pub g_grid: GridSpec,
    pub t_grid: GridSpec,
    pub init: String,
    pub levels: usize,
    pub parity: ParityChoice,
    pub format: Format,
    pub convergence_check: bool,
}

impl RunConfig {
    pub fn from_args(command: CommandKind, a: &RunArgs) -> Self {
        let default_cutoff = match command {
            CommandKind::Spectrum | CommandKind::Jc => DEFAULT_SPECTRUM_CUTOFF,
            CommandKind::Fullcmp => DEFAULT_FULLCMP_CUTOFF,
            _ => DEFAULT_DYNAMICS_CUTOFF,
        };
        Self {
            command,
            nu_c: 1.0,
            nu_q: a.nu_q,
            kappa_c2: a.kappa2,
            cutoff: a.cutoff.unwrap_or(default_cutoff),
            g_grid: GridSpec {
                start: a.g_start,
                stop: a.g_stop,
                steps: a.g_steps,
            },
            t_grid: GridSpec {
                start: 0.0,
                stop: a.t_max,
                steps: a.t_steps,
            },
            init: a.init.clone(),
            levels: a.levels,
            parity: a.parity,
            format: a.format,
            convergence_check: !a.no_convergence_check,
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.nu_c,
            self.nu_q,
            self.g_grid.start.max(0.0),
            self.kappa_c2,
        )
    }

    pub fn trunc(&self) -> Result<TruncationConfig> {
        TruncationConfig::new(self.cutoff)
    }

    pub fn init_state(&self) -> Result<BareStateLabel> {
        self.init.parse()
    }

    fn g_points(&self) -> Result<Vec<f64>> {
        let g = self.g_grid.points()?;
        if g[0] < 0.0 {
            return Err(Error::InvalidParameter(
                "coupling must be non-negative".into(),
            ));
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => x.to_string(),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => json!(x),
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<ParitySector> for Cell {
    fn from(p: ParitySector) -> Self {
        Cell::Text(p.symbol().to_string())
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Int(b as i64)
    }
}

/// Tabular result plus optional nested extras (JSON only).
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub extra: Option<Value>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            ..Default::default()
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub fn write_output<W: Write>(mut w: W, config: &RunConfig, table: &Table) -> Result<()> {
    match config.format {
        Format::Csv => {
            writeln!(w, "# openrabi {VERSION}")?;
            writeln!(w, "# config: {}", serde_json::to_string(config)?)?;
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(&table.columns)?;
            for row in &table.rows {
                csv.write_record(row.iter().map(Cell::render))?;
            }
            csv.flush()?;
        }
        Format::Json => {
            let data: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    Value::Object(
                        table
                            .columns
                            .iter()
                            .zip(row)
                            .map(|(c, v)| (c.to_string(), v.json()))
                            .collect(),
                    )
                })
                .collect();
            let mut doc = json!({ "version": VERSION, "config": config, "data": data });
            if let Some(extra) = &table.extra {
                doc["extra"] = extra.clone();
            }
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Reads the embedded configuration back from a CSV or JSON output file.
pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    if let Some(line) = text.lines().find_map(|l| l.strip_prefix("# config: ")) {
        return Ok(serde_json::from_str(line)?);
    }
    let doc: Value = serde_json::from_str(&text)?;
    let cfg = doc.get("config").ok_or_else(|| {
        Error::InvalidParameter(format!("{} has no embedded config", path.display()))
    })?;
    Ok(serde_json::from_value(cfg.clone())?)
}

/// Prepends `g = 0` when needed for branch labelling; returns the grid and
/// the number of leading points to drop from output.
fn anchored(g: &[f64]) -> (Vec<f64>, usize) {
    if g[0] == 0.0 {
        (g.to_vec(), 0)
    } else {
        let mut v = vec![0.0];
        v.extend_from_slice(g);
        (v, 1)
    }
}

fn track(
    params: &ModelParams,
    p: ParitySector,
    g: &[f64],
    trunc: TruncationConfig,
) -> Result<LevelTracking> {
    let t = track_levels_over_sweep(params, p, g, trunc)?;
    for a in &t.ambiguities {
        log::warn!(
            "ambiguous branch continuation for {} at g = {}",
            a.label,
            a.g
        );
    }
    Ok(t)
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Table> {
    let params = cfg.params()?;
    let trunc = cfg.trunc()?;
    let (grid, skip) = anchored(&cfg.g_points()?);
    let levels = cfg.levels.min(trunc.block_dim());
    let open: Vec<LevelTracking> = ParitySector::BOTH
        .iter()
        .map(|&p| track(&params, p, &grid, trunc))
        .collect::<Result<_>>()?;
    let with_closed = !params.is_closed();
    let closed_params = params.with_kappa_c2(0.0)?;
    let closed: Vec<LevelTracking> = if with_closed {
        ParitySector::BOTH
            .iter()
            .map(|&p| track(&closed_params, p, &grid, trunc))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let ground = |tracks: &[LevelTracking], k: usize| {
        tracks[ParitySector::Even.block_index()].branches[0].omega[k].re
    };

    let mut cols = vec!["g", "n_g", "parity", "re_rel", "re_abs", "im", "ambiguous"];
    if with_closed {
        cols.extend(["closed_re_rel", "closed_re_abs"]);
    }
    let mut table = Table::new(&cols);
    for k in skip..grid.len() {
        for p in cfg.parity.sectors() {
            let tr = &open[p.block_index()];
            for n_g in 0..levels {
                let w = tr.branches[n_g].omega[k];
                let ambiguous = tr
                    .ambiguities
                    .iter()
                    .any(|a| a.g_index == k && a.label.n_g == n_g);
                let mut row: Vec<Cell> = vec![
                    grid[k].into(),
                    n_g.into(),
                    p.into(),
                    (w.re - ground(&open, k)).into(),
                    w.re.into(),
                    w.im.into(),
                    ambiguous.into(),
                ];
                if with_closed {
                    let c = closed[p.block_index()].branches[n_g].omega[k].re;
                    row.extend([(c - ground(&closed, k)).into(), c.into()]);
                }
                table.push(row);
            }
        }
    }
    Ok(table)
}

pub fn cmd_dynamics(cfg: &RunConfig) -> Result<Table> {
    let params = cfg.params()?;
    let trunc = cfg.trunc()?;
    let init = cfg.init_state()?;
    let g = cfg.g_points()?;
    let t = cfg.t_grid.points()?;
    let runs: Vec<(lindblad::ObservableSeries, usize)> = g
        .par_iter()
        .map(|&gv| {
            let p = params.with_g(gv)?;
            if cfg.convergence_check {
                let c = lindblad::converged_evolution(
                    init,
                    &p,
                    trunc,
                    &t,
                    DYNAMICS_CUTOFF_PROBE,
                    DYNAMICS_CUTOFF_TOL,
                    DYNAMICS_MAX_CUTOFF,
                )?;
                if !c.converged {
                    log::warn!(
                        "g = {gv}: observables still move by {:.2e} at n_max = {}",
                        c.delta,
                        c.n_max
                    );
                }
                Ok((c.series, c.n_max))
            } else {
                let ev = lindblad::evolve(
                    &DensityMatrix::from_bare_state(init, trunc)?,
                    &p,
                    &t,
                    EvolveOptions::default(),
                )?;
                Ok((ev.series, trunc.n_max()))
            }
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "g",
        "t",
        "photon",
        "qubit_excitation",
        "parity",
        "trace",
        "n_max",
    ]);
    for (gv, (s, n_max)) in g.iter().zip(&runs) {
        for i in 0..s.len() {
            table.push(vec![
                (*gv).into(),
                s.t_half_round_trip[i].into(),
                s.photon[i].into(),
                s.qubit_excitation[i].into(),
                s.parity[i].into(),
                s.trace[i].into(),
                (*n_max).into(),
            ]);
        }
    }
    table.extra = Some(json!({
        "time_unit": "pi/(2 nu_c)",
        "two_photon_time": 1.0 / params.kappa_c2(),
    }));
    Ok(table)
}

pub fn cmd_steady(cfg: &RunConfig) -> Result<Table> {
    let params = cfg.params()?;
    let trunc = cfg.trunc()?;
    let init = cfg.init_state()?;
    let g = cfg.g_points()?;
    let rows: Vec<Vec<Cell>> = g
        .par_iter()
        .map(|&gv| {
            let p = params.with_g(gv)?;
            let (ss, delta) = if cfg.convergence_check {
                let c = lindblad::converged_steady_state(
                    &p,
                    init,
                    trunc,
                    DYNAMICS_CUTOFF_PROBE,
                    DYNAMICS_CUTOFF_TOL,
                    STEADY_MAX_CUTOFF,
                )?;
                if !c.converged {
                    log::warn!(
                        "g = {gv}: steady state not converged at n_max = {} (change {:.2e})",
                        c.state.rho.trunc().n_max(),
                        c.delta
                    );
                }
                (c.state, c.delta)
            } else {
                (
                    lindblad::steady_state(&p, &DensityMatrix::from_bare_state(init, trunc)?)?,
                    f64::NAN,
                )
            };
            let o = ss.observables();
            Ok(vec![
                gv.into(),
                o.photon.into(),
                o.qubit_excitation.into(),
                o.parity.into(),
                ss.kernel_dim.into(),
                ss.generator_residual.into(),
                ss.rho.trunc().n_max().into(),
                delta.into(),
            ])
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "g",
        "photon",
        "qubit_excitation",
        "parity",
        "kernel_dim",
        "residual",
        "n_max",
        "cutoff_delta",
    ]);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

pub fn cmd_modemap(cfg: &RunConfig) -> Result<Table> {
    let params = cfg.params()?;
    let trunc = cfg.trunc()?;
    let init = cfg.init_state()?;
    let p = init.to_number_parity().parity;
    let (grid, skip) = anchored(&cfg.g_points()?);
    let tracking = track(&params, p, &grid, trunc)?;
    let levels = cfg.levels.min(trunc.block_dim());
    let mut table = Table::new(&["g", "n_g", "parity", "weight", "re", "im", "near_defective"]);
    for k in skip..grid.len() {
        let cols = &tracking.assignment[k];
        let labels: Vec<crate::spectrum::Label> = {
            let mut l = vec![crate::spectrum::Label { n_g: 0, parity: p }; cols.len()];
            for (branch, &col) in cols.iter().enumerate() {
                l[col] = crate::spectrum::Label {
                    n_g: branch,
                    parity: p,
                };
            }
            l
        };
        let w = lindblad::project_initial_state_onto_eigenmodes(
            init,
            &tracking.eigensystems[k],
            &labels,
        )?;
        for n_g in 0..levels {
            let m = w.get(n_g).expect("every branch labelled");
            table.push(vec![
                grid[k].into(),
                n_g.into(),
                p.into(),
                m.weight.into(),
                m.omega.re.into(),
                m.omega.im.into(),
                m.near_defective.into(),
            ]);
        }
    }
    Ok(table)
}

pub fn cmd_jc(cfg: &RunConfig) -> Result<Table> {
    let params = cfg.params()?;
    let trunc = cfg.trunc()?;
    let (grid, skip) = anchored(&cfg.g_points()?);
    let cmp = jc_vs_rabi_comparison(&params, &grid, trunc, cfg.levels)?;
    let mut table = Table::new(&[
        "g",
        "m",
        "parity",
        "n_g",
        "jc_re",
        "jc_im",
        "rabi_re",
        "rabi_im",
        "jc_decay_slope",
        "rabi_decay_slope",
    ]);
    let slope_of = |label| {
        cmp.slopes
            .iter()
            .find(|s| s.label == label)
            .expect("slope per label")
    };
    for row in cmp.rows.iter().filter(|r| r.g >= grid[skip]) {
        if skip == 1 && row.g == 0.0 {
            continue;
        }
        let s = slope_of(row.label);
        table.push(vec![
            row.g.into(),
            row.label.m.into(),
            row.label.parity.into(),
            row.n_g.into(),
            row.omega_jc.re.into(),
            row.omega_jc.im.into(),
            row.omega_rabi.re.into(),
            row.omega_rabi.im.into(),
            s.jc_slope.unwrap_or(f64::NAN).into(),
            s.rabi_slope.unwrap_or(f64::NAN).into(),
        ]);
    }
    table.extra = Some(serde_json::to_value(&cmp.slopes)?);
    Ok(table)
}

pub fn cmd_fullcmp(cfg: &RunConfig) -> Result<Table> {
    let params = cfg.params()?;
    let trunc = cfg.trunc()?;
    let g = cfg.g_points()?;
    let per_g: Vec<Vec<crate::vectorized::SectorComparison>> = g
        .par_iter()
        .map(|&gv| full_vs_phenomenological(&params.with_g(gv)?, trunc))
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "g", "p_s", "p_a", "k", "full_re", "full_im", "phen_re", "phen_im", "diff_re", "diff_im",
    ]);
    for (gv, sectors) in g.iter().zip(&per_g) {
        for s in sectors {
            for (k, (a, b)) in s.with_collapse.iter().zip(&s.without_collapse).enumerate() {
                table.push(vec![
                    (*gv).into(),
                    s.p_s.into(),
                    s.p_a.into(),
                    k.into(),
                    a.re.into(),
                    a.im.into(),
                    b.re.into(),
                    b.im.into(),
                    (a.re - b.re).into(),
                    (a.im - b.im).into(),
                ]);
            }
        }
    }
    Ok(table)
}

pub fn execute(cfg: &RunConfig) -> Result<Table> {
    match cfg.command {
        CommandKind::Spectrum => cmd_spectrum(cfg),
        CommandKind::Dynamics => cmd_dynamics(cfg),
        CommandKind::Steady => cmd_steady(cfg),
        CommandKind::Modemap => cmd_modemap(cfg),
        CommandKind::Jc => cmd_jc(cfg),
        CommandKind::Fullcmp => cmd_fullcmp(cfg),
    }
}

fn emit(cfg: &RunConfig, table: &Table, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_output(
            std::io::BufWriter::new(std::fs::File::create(path)?),
            cfg,
            table,
        ),
        None => write_output(std::io::stdout().lock(), cfg, table),
    }
}

/// Sizes the worker pool from `OPENRABI_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("OPENRABI_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| {
            Error::InvalidParameter(format!(
                "OPENRABI_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        if n == 0 {
            return Err(Error::InvalidParameter(
                "OPENRABI_THREADS must be positive".into(),
            ));
        }
        // A second initialisation (tests, embedding) keeps the existing pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let (cfg, out) = match cli.command {
        Command::Replay { from, out } => (read_config(&from)?, out),
        Command::Spectrum(a) => (RunConfig::from_args(CommandKind::Spectrum, &a), a.out),
        Command::Dynamics(a) => (RunConfig::from_args(CommandKind::Dynamics, &a), a.out),
        Command::Steady(a) => (RunConfig::from_args(CommandKind::Steady, &a), a.out),
        Command::Modemap(a) => (RunConfig::from_args(CommandKind::Modemap, &a), a.out),
        Command::Jc(a) => (RunConfig::from_args(CommandKind::Jc, &a), a.out),
        Command::Fullcmp(a) => (RunConfig::from_args(CommandKind::Fullcmp, &a), a.out),
    };
    let table = execute(&cfg)?;
    emit(&cfg, &table, out.as_deref())
}

/// 0 success, 2 configuration or I/O error, 3 numerical failure.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_numerical() => 3,
        Err(_) => 2,
    }
}
