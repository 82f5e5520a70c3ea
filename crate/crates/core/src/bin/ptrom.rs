//! Command-line front end for the PTROM library.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ptrom::harness::config::{TrainingSources, Width};
use ptrom::harness::pipeline::{bundle_dir, run_training, training_snapshots};
use ptrom::harness::queries::grid_averages;
use ptrom::harness::report::{write_config, ArtifactKind};
use ptrom::harness::reproduce::cap_steps;
use ptrom::harness::{
    emit_reports, generate_initial_conditions, run_baselines, run_online_queries,
    run_reproductive_suite, ExperimentConfig, OfflineBundle, RunRecord, SweepSpec,
};
use ptrom::integrators::{fom_simulate, Integrator};
use ptrom::io::{write_json, write_text};
use ptrom::kernel::{velocity_field_grid, FieldNormalization, Lattice, Pairwise};
use ptrom::metrics::characteristic_length;
use ptrom::quadtree::Criterion;
use ptrom::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ptrom",
    version,
    about = "Projection-tree reduced-order models for 2D point-vortex dynamics"
)]
struct Cli {
    /// Root directory for all outputs.
    #[arg(
        long,
        global = true,
        env = "PTROM_OUTPUT_ROOT",
        default_value = "ptrom_output"
    )]
    output_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the four-stage offline training and save the bundle.
    Train(ConfigArgs),
    /// Query a trained bundle over the parametric grid.
    Query {
        #[command(flatten)]
        config: ConfigArgs,
        /// Bundle directory; defaults to `<root>/<output_dir>/train`.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Reproductive single-vortex sweep.
    Reproduce(ReproduceArgs),
    /// Heun, Barnes–Hut and GNAT baselines for one reproductive size.
    Baseline(BaselineArgs),
    /// Export the non-dimensional velocity magnitude on a lattice.
    Field(FieldArgs),
    /// Print the summary tables of a report directory.
    Report {
        /// Directory holding `summary.csv` (and optionally `wall_times.csv`).
        dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    VortexPair,
    Mushroom,
    SingleVortex,
}

#[derive(Clone, Copy, ValueEnum)]
enum WidthArg {
    Narrow,
    Moderate,
    Wide,
    Unclustered,
}

impl From<WidthArg> for Width {
    fn from(w: WidthArg) -> Self {
        match w {
            WidthArg::Narrow => Width::Narrow,
            WidthArg::Moderate => Width::Moderate,
            WidthArg::Wide => Width::Wide,
            WidthArg::Unclustered => Width::Unclustered,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SourcesArg {
    Clustered,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegratorArg {
    Trapezoidal,
    Heun,
}

/// Experiment selection plus overrides of individual configuration fields.
#[derive(Args, Clone)]
struct ConfigArgs {
    #[arg(long, value_enum, default_value = "vortex-pair")]
    preset: Preset,
    /// JSON configuration file; replaces the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Particle count (single vortex: one of the sweep sizes).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value = "narrow")]
    width: WidthArg,
    /// Bases case 1–4 of the single-vortex presets.
    #[arg(long, default_value_t = 1)]
    case: usize,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Caps the number of time steps.
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    delta_k: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    m_r: Option<usize>,
    #[arg(long)]
    n_samples: Option<usize>,
    /// Neighbor-criterion width.
    #[arg(long, conflicts_with_all = ["theta", "unclustered"])]
    p_c: Option<f64>,
    /// Barnes–Hut opening ratio.
    #[arg(long, conflicts_with = "unclustered")]
    theta: Option<f64>,
    /// Evaluate all sources exactly (GNAT).
    #[arg(long)]
    unclustered: bool,
    #[arg(long)]
    leaf_capacity: Option<usize>,
    /// Gauss–Newton relative tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Gauss–Newton step length.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    training_sources: Option<SourcesArg>,
    #[arg(long)]
    n_training: Option<usize>,
    /// Query grid resolution per axis.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory relative to the output root.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), _) => ExperimentConfig::from_json_file(path)?,
            (None, Preset::VortexPair) => ExperimentConfig::vortex_pair(),
            (None, Preset::Mushroom) => ExperimentConfig::mushroom(),
            (None, Preset::SingleVortex) => ExperimentConfig::single_vortex(
                self.n.unwrap_or(100),
                self.width.into(),
                self.case,
            )?,
        };
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(v) = &self.name {
            cfg.name = v.clone();
        }
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.t_end {
            cfg.t_span[1] = v;
        }
        if let Some(v) = self.delta_k {
            cfg.delta_k = v;
        }
        let rom = &mut cfg.rom;
        if let Some(v) = self.m {
            rom.m = v;
        }
        if let Some(v) = self.m_r {
            rom.m_r = v;
        }
        if let Some(v) = self.n_samples {
            rom.n_samples = v;
        }
        if let Some(p_c) = self.p_c {
            rom.criterion = Some(Criterion::Neighbor { p_c });
        }
        if let Some(theta) = self.theta {
            rom.criterion = Some(Criterion::BarnesHut { theta });
        }
        if self.unclustered {
            rom.criterion = None;
        }
        if let Some(v) = self.leaf_capacity {
            rom.leaf_capacity = v;
        }
        if let Some(v) = self.tol {
            rom.solver.tol = v;
        }
        if let Some(v) = self.max_iters {
            rom.solver.max_iters = v;
        }
        if let Some(v) = self.alpha {
            rom.solver.alpha = v;
        }
        if let Some(s) = self.training_sources {
            rom.training_sources = match s {
                SourcesArg::Clustered => TrainingSources::Clustered,
                SourcesArg::Exact => TrainingSources::Exact,
            };
        }
        if let Some(p) = cfg.parametric.as_mut() {
            if let Some(v) = self.n_training {
                p.n_training = v;
            }
            if let Some(g) = self.grid {
                p.query_grid = [g, g];
            }
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        let cfg = cap_steps(cfg, self.max_steps);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 500, 1000])]
    ns: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["narrow"])]
    widths: Vec<WidthArg>,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize])]
    cases: Vec<usize>,
    /// Also run the Heun, Barnes–Hut and GNAT baselines.
    #[arg(long)]
    baselines: bool,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    case: usize,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',')]
    integrators: Option<Vec<IntegratorArg>>,
    #[arg(long, value_delimiter = ',')]
    thetas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    p_cs: Option<Vec<f64>>,
    /// Leaf capacities to sweep for every treecode variant.
    #[arg(long, value_delimiter = ',')]
    leaf_capacity_sweep: Option<Vec<usize>>,
    /// Skip the GNAT baseline.
    #[arg(long)]
    no_gnat: bool,
}

#[derive(Args)]
struct FieldArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Parametric point `μ₁,μ₂` (parametric presets only).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    mu: Option<Vec<f64>>,
    /// FOM time step at which to evaluate the field (0 is the initial state).
    #[arg(long, default_value_t = 0)]
    step: usize,
    #[arg(long, default_value_t = 101)]
    nx: usize,
    #[arg(long, default_value_t = 101)]
    ny: usize,
    /// Normalization width factor: `l_g = c_g·l`.
    #[arg(long, default_value_t = 1.25)]
    c_g: f64,
    /// Reference circulation; defaults to the largest `|Γᵢ|`.
    #[arg(long)]
    gamma_bar: Option<f64>,
    /// Padding around the particle bounding box, as a fraction of its size.
    #[arg(long, default_value_t = 0.1)]
    margin: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else if matches!(e, Error::Config(_) | Error::InvalidInput(_)) {
        2
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<()> {
    let root = cli.output_root;
    match cli.command {
        Command::Train(args) => train(&root, &args.resolve()?),
        Command::Query { config, bundle } => query(&root, &config.resolve()?, bundle),
        Command::Reproduce(args) => reproduce(&root, args),
        Command::Baseline(args) => baseline(&root, args),
        Command::Field(args) => field(&root, args),
        Command::Report { dir } => report(&dir),
    }
}

fn train(root: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let dir = bundle_dir(root, cfg);
    let training = run_training(cfg)?;
    training.bundle.save(&dir)?;
    training.bundle.save_snapshots(&dir, &training.fom_runs)?;
    let meta = &training.bundle.metadata;
    println!(
        "trained {}: M = {}, M_r = {}, n̆ = {}, N_c = {}",
        cfg.name,
        training.bundle.basis.m(),
        training.bundle.residual.m_r(),
        training.bundle.gnat.n_samples(),
        meta.n_unique_sources()
            .map_or_else(|| "-".into(), |n| n.to_string())
    );
    println!("bundle written to {}", dir.display());
    Ok(())
}

fn query(root: &Path, cfg: &ExperimentConfig, bundle: Option<PathBuf>) -> Result<()> {
    let bdir = bundle.unwrap_or_else(|| bundle_dir(root, cfg));
    let b = OfflineBundle::load(&bdir)?;
    let out = root.join(&cfg.output_dir).join("queries");
    // The bundle's own config defines the reduced model; the CLI config only
    // contributes the query grid.
    let mut qcfg = b.config().clone();
    qcfg.parametric = cfg.parametric.clone();
    let (records, _) = run_online_queries(&b, &qcfg, &out)?;
    print_records(&records);
    if let Some((mae, aeh, sf)) = grid_averages(&records) {
        println!(
            "grid averages: MAE_D = {:.4} %, AE_H = {:.3e} %, SF = {:.2}",
            100.0 * mae,
            100.0 * aeh,
            sf
        );
    }
    println!("reports written to {}", out.display());
    Ok(())
}

fn reproduce(root: &Path, args: ReproduceArgs) -> Result<()> {
    let spec = SweepSpec {
        ns: args.ns,
        widths: args.widths.into_iter().map(Width::from).collect(),
        cases: args.cases,
        baselines: args.baselines,
        max_steps: args.max_steps,
    };
    let dir = root.join("reproduce");
    let (records, _) = run_reproductive_suite(&spec, &dir)?;
    print_records(&records);
    println!("reports written to {}", dir.display());
    Ok(())
}

fn baseline(root: &Path, args: BaselineArgs) -> Result<()> {
    let mut cfg = cap_steps(
        ExperimentConfig::single_vortex(args.n, Width::Narrow, args.case)?,
        args.max_steps,
    );
    cfg.name = format!("single_vortex_n{}_case{}", args.n, args.case);
    let b = &mut cfg.baseline;
    if let Some(list) = args.integrators {
        b.integrators = list
            .into_iter()
            .map(|i| match i {
                IntegratorArg::Trapezoidal => Integrator::Trapezoidal,
                IntegratorArg::Heun => Integrator::Heun,
            })
            .collect();
    }
    if let Some(v) = args.thetas {
        b.thetas = v;
    }
    if let Some(v) = args.p_cs {
        b.p_cs = v;
    }
    if let Some(v) = args.leaf_capacity_sweep {
        b.leaf_capacity_sweep = v;
    }
    b.gnat = !args.no_gnat;
    b.gnat_m = Some(
        ptrom::harness::config::case_hyperparameters(Width::Unclustered, args.case, args.n)?.0,
    );
    cfg.validate()?;
    let runs = training_snapshots(&cfg)?;
    let reference = runs[0].clone();
    let records = run_baselines(&cfg, &reference, Some(runs))?;
    let dir = root.join(format!("baseline_n{}", args.n));
    let mut manifest = emit_reports(&dir, &records)?;
    manifest.extend(write_config(&dir, "config.json", &cfg)?);
    manifest.write(&dir)?;
    print_records(&records);
    println!("reports written to {}", dir.display());
    Ok(())
}

fn field(root: &Path, args: FieldArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let mu = match (&args.mu, &cfg.parametric) {
        (Some(v), _) => Some([v[0], v[1]]),
        (None, Some(p)) => Some(p.upper),
        (None, None) => None,
    };
    let (x0, sys) = generate_initial_conditions(&cfg, mu)?;
    let state = if args.step == 0 {
        x0.clone()
    } else {
        let mut grid = cfg.time_grid()?;
        if args.step > grid.n_steps {
            return Err(Error::Config(format!(
                "step {} beyond the {} steps of the run",
                args.step, grid.n_steps
            )));
        }
        grid.n_steps = args.step;
        let run = fom_simulate(&x0, &mut Pairwise::new(&sys), grid, cfg.newton)?;
        run.snapshots.column(args.step - 1).to_vec()
    };
    let n = sys.n();
    let bounds = |xs: &[f64]| {
        xs.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    };
    let (x_lo, x_hi) = bounds(&state[..n]);
    let (y_lo, y_hi) = bounds(&state[n..]);
    let pad = args.margin * (x_hi - x_lo).max(y_hi - y_lo);
    let lattice = Lattice {
        x_min: x_lo - pad,
        x_max: x_hi + pad,
        y_min: y_lo - pad,
        y_max: y_hi + pad,
        nx: args.nx,
        ny: args.ny,
    };
    let gamma_bar = args
        .gamma_bar
        .unwrap_or_else(|| sys.circulation().iter().fold(0.0, |m, g| m.max(g.abs())));
    let norm = FieldNormalization {
        length_scale: characteristic_length(&x0)?,
        c_g: args.c_g,
        gamma_bar,
    };
    let grid = velocity_field_grid(&state, &sys, lattice, norm)?;

    let dir = root.join(&cfg.output_dir).join("field");
    let mut csv = String::new();
    for iy in 0..lattice.ny {
        let row: Vec<String> = (0..lattice.nx)
            .map(|ix| format!("{:e}", grid.at(ix, iy)))
            .collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    write_text(&dir.join("field.csv"), &csv)?;
    write_json(
        &dir.join("field.json"),
        &serde_json::json!({ "lattice": lattice, "normalization": norm, "mu": mu, "step": args.step }),
    )?;
    let mut manifest = write_config(&dir, "config.json", &cfg)?;
    manifest.add("field.csv", ArtifactKind::Data);
    manifest.add("field.json", ArtifactKind::Data);
    manifest.write(&dir)?;
    println!(
        "{}×{} field written to {}",
        lattice.nx,
        lattice.ny,
        dir.display()
    );
    Ok(())
}

fn report(dir: &Path) -> Result<()> {
    let read = |name: &str| {
        std::fs::read_to_string(dir.join(name))
            .map_err(|e| Error::Config(format!("{}: {e}", dir.join(name).display())))
    };
    let summary = read("summary.csv")?;
    print_table(&summary);
    if let Ok(times) = read("wall_times.csv") {
        println!();
        print_table(&times);
    }
    Ok(())
}

fn print_table(csv: &str) {
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    for r in &rows {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:<w$}"))
            .collect();
        println!("{}", cells.join("  ").trim_end());
    }
}

fn print_records(records: &[RunRecord]) {
    for r in records {
        match (&r.errors, &r.failure) {
            (Some(e), _) => println!(
                "{:<48} MAE_D = {:.3e} %  AE_H = {:.3e} %  SF = {}",
                r.label,
                100.0 * e.mean_mae_d,
                100.0 * e.mean_ae_h,
                r.speedup()
                    .map_or_else(|| "-".into(), |s| format!("{s:.2}"))
            ),
            (None, Some(f)) => println!("{:<48} failed: {f}", r.label),
            (None, None) => println!("{:<48} no result", r.label),
        }
    }
}
