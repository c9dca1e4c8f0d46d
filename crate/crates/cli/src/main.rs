//! Command line front end.
//!
//! Exit codes: 0 success, 2 invalid input or violated constraint, 3 numerical
//! failure, 4 I/O failure.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use escdim::atlas::{self, PoleAtlas};
use escdim::catalog::{FunctionSpec, SeriesFunctionSpec};
use escdim::dimension::{self, CalibrationSet, CoverSequence};
use escdim::dynamics::{self, Classification};
use escdim::geometry::PlanePoint;
use escdim::pipeline::{self, ExperimentConfig, GridConfig};
use escdim::verifier;
use escdim::{Error, ErrorKind, Result};

const OUT_ENV: &str = "ESCDIM_OUT";

#[derive(Parser, Debug)]
#[command(name = "escdim", version, about = "Escaping-set dimension experiments for meromorphic functions")]
struct Cli {
    /// Worker threads [default: all available cores]
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the pole atlas up to a radius as CSV
    Atlas(AtlasArgs),
    /// Estimate the convergence threshold of the cover sums
    Threshold(ThresholdArgs),
    /// Iterate one orbit of f = g^M
    Orbit(OrbitArgs),
    /// Classify a grid of starting points and write CSV and PNG
    Grid(GridArgs),
    /// Box-counting dimension of a calibration set or of escaping grid cells
    Dimension(DimensionArgs),
    /// Nested-cover lower bound for a geometric or constructed cover
    Mcmullen(McmullenArgs),
    /// Check the bound 4C + 4 on the spider's web
    VerifyWeb(VerifyWebArgs),
    /// Choose disk-forest parameters and check constraints and dichotomy
    VerifyForest(VerifyForestArgs),
    /// Monte-Carlo persistence probe for a disk forest
    Probe(ProbeArgs),
    /// Run a full experiment from a config file
    Experiment(ExperimentArgs),
    /// Run an experiment for every (rho, M) combination
    Sweep(SweepArgs),
    /// Print the default experiment config
    Defaults,
}

#[derive(Args, Debug, Clone)]
struct FamilyArgs {
    /// Order rho of the series family
    #[arg(long, default_value_t = 2.0)]
    rho: f64,
    /// Pole multiplicity M
    #[arg(long = "mult", short = 'm', default_value_t = 1)]
    mult: u32,
}

impl FamilyArgs {
    fn spec(&self) -> Result<SeriesFunctionSpec> {
        SeriesFunctionSpec::new(self.rho, self.mult)
    }
}

#[derive(Args, Debug, Clone)]
struct OutArgs {
    /// Output directory, created if missing
    #[arg(long, env = OUT_ENV, default_value = pipeline::DEFAULT_OUT_DIR)]
    out: PathBuf,
}

impl OutArgs {
    fn dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        Ok(&self.out)
    }
}

#[derive(Args, Debug)]
struct AtlasArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Largest pole modulus
    #[arg(long, default_value_t = 1e3)]
    r_max: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Rings in the atlas
    #[arg(long, default_value_t = 1 << 17)]
    rings: u64,
    /// Size the atlas by pole modulus instead of rings [default: unset]
    #[arg(long)]
    r_max: Option<f64>,
}

#[derive(Args, Debug)]
struct OrbitArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Real part of the starting point
    #[arg(long, allow_hyphen_values = true, default_value_t = 20.1)]
    re: f64,
    /// Imaginary part of the starting point
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    im: f64,
    /// Escape radius R
    #[arg(long, default_value_t = 20.0)]
    escape_radius: f64,
    /// Number of iterates
    #[arg(long, default_value_t = 10)]
    horizon: u32,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone)]
struct GridRegion {
    /// Real part of the region centre
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    center_re: f64,
    /// Imaginary part of the region centre
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    center_im: f64,
    /// Half the side of the square region
    #[arg(long, default_value_t = 8.0)]
    half_width: f64,
    /// Cells along the real axis
    #[arg(long, default_value_t = 200)]
    nx: usize,
    /// Cells along the imaginary axis
    #[arg(long, default_value_t = 200)]
    ny: usize,
    /// Escape radius R
    #[arg(long, default_value_t = 20.0)]
    escape_radius: f64,
    /// Number of iterates
    #[arg(long, default_value_t = 3)]
    horizon: u32,
}

impl GridRegion {
    fn classify(&self, family: &FamilyArgs) -> Result<dynamics::GridClassification> {
        let cfg = GridConfig {
            center_re: self.center_re,
            center_im: self.center_im,
            half_width: self.half_width,
            nx: self.nx,
            ny: self.ny,
            box_dimension: false,
        };
        let f = FunctionSpec::Series(family.spec()?);
        dynamics::classify_grid(&f, cfg.grid_spec()?, self.escape_radius, self.horizon)
    }
}

#[derive(Args, Debug)]
struct GridArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[command(flatten)]
    region: GridRegion,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SetKind {
    Segment,
    Square,
    Cantor,
    /// Escaping cells of a grid classification
    Escaping,
}

#[derive(Args, Debug)]
struct DimensionArgs {
    /// Point set to measure
    #[arg(long, value_enum, default_value_t = SetKind::Cantor)]
    set: SetKind,
    /// Refinement level of a calibration set
    #[arg(long, default_value_t = 10)]
    level: u32,
    #[command(flatten)]
    family: FamilyArgs,
    #[command(flatten)]
    region: GridRegion,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct McmullenArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Radius R of the constructed cover
    #[arg(long, default_value_t = 1e6)]
    radius: f64,
    /// Constant A of the diameters
    #[arg(long, default_value_t = 1.0)]
    a_const: f64,
    /// Constant B of the densities
    #[arg(long, default_value_t = 1.0)]
    b_const: f64,
    /// Number of cover levels
    #[arg(long, default_value_t = 50)]
    levels: usize,
    /// Use a geometric cover with this constant density [default: unset]
    #[arg(long, requires = "ratio")]
    delta: Option<f64>,
    /// Diameter ratio c of the geometric cover, d_l = c^l [default: unset]
    #[arg(long, requires = "delta")]
    ratio: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct VerifyWebArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Largest ring n of the web
    #[arg(long, default_value_t = 30)]
    max_ring: u64,
    /// Sample points per circle and per segment
    #[arg(long, default_value_t = 200)]
    per_component: usize,
}

#[derive(Args, Debug, Clone)]
struct LayoutArgs {
    /// Annuli P_1 .. P_n holding disks
    #[arg(long, default_value_t = 8)]
    annuli: u32,
    /// Disks per annulus
    #[arg(long, default_value_t = 2)]
    per_annulus: usize,
    /// Disk radius
    #[arg(long, default_value_t = 0.45)]
    radius: f64,
    /// Total weight budget, below 1/2
    #[arg(long, default_value_t = 0.45)]
    eps_budget: f64,
}

impl LayoutArgs {
    fn spec(&self) -> Result<escdim::catalog::DiskForestSpec> {
        let layout = verifier::default_layout(self.annuli, self.per_annulus, self.radius)?;
        verifier::choose_forest_params(&layout, self.eps_budget)
    }
}

#[derive(Args, Debug)]
struct VerifyForestArgs {
    #[command(flatten)]
    layout: LayoutArgs,
    /// Stratified samples for the dichotomy check
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Random seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[command(flatten)]
    layout: LayoutArgs,
    /// Read the forest from a spec CSV instead of choosing it [default: unset]
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Annulus index n of the start region
    #[arg(long, default_value_t = 1)]
    annulus: u32,
    /// Number of starting points
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    /// Number of iterates that must stay in the disks
    #[arg(long, default_value_t = 5)]
    horizon: u32,
    /// Random seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Experiment config in TOML [default: built-in defaults]
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed [default: unset]
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: config out_dir, then $ESCDIM_OUT, then escdim-out]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Base experiment config in TOML [default: built-in defaults]
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated orders rho
    #[arg(long, value_delimiter = ',', default_value = "2")]
    rho: Vec<f64>,
    /// Comma-separated multiplicities M
    #[arg(long = "mult", short = 'm', value_delimiter = ',', default_value = "1,2,3,4")]
    mult: Vec<u32>,
    /// Override the config seed [default: unset]
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: config out_dir, then $ESCDIM_OUT, then escdim-out]
    #[arg(long)]
    out: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_atlas(a: &AtlasArgs) -> Result<()> {
    let atlas = atlas::build_atlas(a.family.rho, a.family.mult, a.r_max)?;
    let path = a.out.dir()?.join("atlas.csv");
    atlas::save_atlas_csv(&atlas, &path)?;
    println!("atlas: {} poles with |a| <= {} -> {}", atlas.len(), a.r_max, path.display());
    Ok(())
}

fn cmd_threshold(a: &ThresholdArgs) -> Result<()> {
    let atlas = match a.r_max {
        Some(r) => atlas::build_atlas(a.family.rho, a.family.mult, r)?,
        None => PoleAtlas::with_rings(a.family.rho, a.family.mult, a.rings)?,
    };
    let t = atlas::critical_exponent(&atlas)?;
    let formula = atlas::dimension_bound(a.family.rho, a.family.mult)?;
    println!("t* ≈ {:.6} (formula {:.6})", t.value, formula);
    Ok(())
}

fn cmd_orbit(a: &OrbitArgs) -> Result<()> {
    let f = FunctionSpec::Series(a.family.spec()?);
    let rec = dynamics::iterate_orbit(&f, PlanePoint::finite(a.re, a.im), a.escape_radius, a.horizon)?;
    let path = a.out.dir()?.join("orbit.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["step", "modulus"])?;
    for (n, m) in rec.moduli.iter().enumerate() {
        w.write_record([(n + 1).to_string(), format!("{m:.16e}")])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    print!("orbit of {}: {} after {} of {} steps", rec.start, rec.classification.label(), rec.steps_taken, rec.horizon);
    if let Some(d) = &rec.diagnostic {
        print!(" ({d})");
    }
    println!();
    Ok(())
}

fn cmd_grid(a: &GridArgs) -> Result<()> {
    let g = a.region.classify(&a.family)?;
    let dir = a.out.dir()?;
    dynamics::write_grid_csv(&g, create(&dir.join("grid.csv"))?)?;
    dynamics::save_grid_png(&g, &dir.join("grid.png"))?;
    println!(
        "grid {}x{}: escaping {}, returned {}, pole hit {}, undetermined {}",
        g.grid.nx,
        g.grid.ny,
        g.count(Classification::Escaping),
        g.count(Classification::Returned),
        g.count(Classification::PoleHit),
        g.count(Classification::Undetermined)
    );
    Ok(())
}

fn cmd_dimension(a: &DimensionArgs) -> Result<()> {
    let (points, sizes, region, target) = match a.set {
        SetKind::Segment | SetKind::Square | SetKind::Cantor => {
            let set = match a.set {
                SetKind::Segment => CalibrationSet::Segment,
                SetKind::Square => CalibrationSet::Square,
                _ => CalibrationSet::Cantor,
            };
            let (p, s, r) = set.generate(a.level)?;
            (p, s, r, Some(set.similarity_dimension()))
        }
        SetKind::Escaping => {
            let g = a.region.classify(&a.family)?;
            let finest = (g.grid.nx.min(g.grid.ny) / 2).max(1).ilog2();
            let sizes = dimension::dyadic_sizes(&g.grid.region, 2, finest);
            (dynamics::escaping_points(&g), sizes, g.grid.region, None)
        }
    };
    let est = dimension::fit_box_dimension(&points, &sizes, &region)?;
    dimension::write_box_csv(&est, create(&a.out.dir()?.join("box_counts.csv"))?)?;
    match target {
        Some(t) => println!("box dimension {:.4} (similarity dimension {:.4}, residual {:.2e})", est.value, t, est.fit_residual),
        None => println!("box dimension {:.4} over {} points (residual {:.2e})", est.value, est.point_count, est.fit_residual),
    }
    Ok(())
}

fn cmd_mcmullen(a: &McmullenArgs) -> Result<()> {
    let cover = match (a.delta, a.ratio) {
        (Some(delta), Some(c)) => {
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::invalid(format!("ratio must lie in (0, 1), got {c}")));
            }
            let diam: Vec<f64> = (1..=a.levels).map(|l| l as f64 * c.ln()).collect();
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(Error::invalid(format!("delta must lie in (0, 1], got {delta}")));
            }
            CoverSequence::from_logs(vec![delta.ln(); a.levels], diam, 2)?
        }
        _ => dimension::paper_cover_sequence(a.family.rho, a.family.mult, a.radius, a.a_const, a.b_const, a.levels)?,
    };
    let b = dimension::mcmullen_bound(&cover)?;
    dimension::write_cover_csv(&cover, create(&a.out.dir()?.join("cover.csv"))?)?;
    println!("nested-cover bound {:.12} (spread {:.2e} over {} levels)", b.value + 0.0, b.spread, b.levels_used);
    Ok(())
}

fn cmd_verify_web(a: &VerifyWebArgs) -> Result<()> {
    let r = verifier::verify_web_bound(&a.family.spec()?, a.max_ring, a.per_component)?;
    println!(
        "max|g| = {:.6} (certified {:.6}) over {} points, bound 4C+4 = {:.6}, {}",
        r.max_modulus,
        r.max_certified,
        r.samples,
        r.bound,
        pass(r.pass)
    );
    if r.pass {
        Ok(())
    } else {
        Err(Error::numerical(format!("{} web points exceed the bound", r.violations)))
    }
}

fn cmd_verify_forest(a: &VerifyForestArgs) -> Result<()> {
    let spec = a.layout.spec()?;
    let dir = a.out.dir()?;
    let report = verifier::validate_forest_params(&spec);
    verifier::write_report_csv(&report, create(&dir.join("forest_constraints.csv"))?)?;
    verifier::write_spec_csv(&spec, create(&dir.join("forest_spec.csv"))?)?;
    let d = verifier::forest_dichotomy(&spec, a.samples, a.seed)?;
    println!(
        "{} disks, constraints {}, dichotomy {} ({} + {} + {} violations over {} samples)",
        spec.disks().len(),
        pass(report.pass),
        pass(d.pass),
        d.outside_violations,
        d.inner_violations,
        d.derivative_violations,
        d.outside_samples + d.inner_samples + d.derivative_samples
    );
    if d.pass {
        Ok(())
    } else {
        Err(Error::numerical("dichotomy check failed"))
    }
}

fn cmd_probe(a: &ProbeArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(p) => verifier::read_spec_csv(File::open(p).map_err(|e| Error::io(p, e))?)?,
        None => a.layout.spec()?,
    };
    let r = verifier::area_probe(&spec, a.annulus, a.samples, a.horizon, a.seed)?;
    verifier::write_probe_csv(std::slice::from_ref(&r), create(&a.out.dir()?.join("probe.csv"))?)?;
    println!(
        "P_{} seed {}: {} / {} persist to horizon {} (fraction {:.3e} +- {:.1e}), survivors by step {:?}",
        r.annulus, r.rng_seed, r.persisting, r.samples, r.horizon, r.fraction_persisting, r.standard_error, r.survivors_by_step
    );
    Ok(())
}

fn load_config(path: &Option<PathBuf>, seed: Option<u64>, out: &Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out_dir = Some(o.clone());
    } else if cfg.out_dir.is_none() {
        if let Some(env) = std::env::var_os(OUT_ENV) {
            cfg.out_dir = Some(PathBuf::from(env));
        }
    }
    Ok(cfg)
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    let cfg = load_config(&a.config, a.seed, &a.out)?;
    let r = pipeline::run_experiment(&cfg)?;
    println!(
        "formula {:.6}, threshold {:.6}, nested-cover limit {:.6} -> {}",
        r.formula_value,
        r.threshold.estimate,
        r.cover.limit,
        cfg.out_dir().display()
    );
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let base = load_config(&a.config, a.seed, &a.out)?;
    let root = base.out_dir();
    let mut configs = Vec::new();
    for &rho in &a.rho {
        for &m in &a.mult {
            let mut c = base.clone();
            c.rho = rho;
            c.multiplicity = m;
            c.out_dir = Some(root.join(format!("rho{rho}_m{m}")));
            c.validate()?;
            configs.push(c);
        }
    }
    let rows = pipeline::sweep(&configs)?;
    pipeline::write_sweep_csv(&rows, create(&root.join("sweep.csv"))?)?;
    for r in &rows {
        println!(
            "rho {} M {}: formula {:.6}, threshold {:.6}, nested-cover limit {:.6}",
            r.rho, r.multiplicity, r.formula_value, r.threshold_estimate, r.mcmullen_limit_estimate
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    escdim::configure_threads(cli.jobs)?;
    match &cli.command {
        Command::Atlas(a) => cmd_atlas(a),
        Command::Threshold(a) => cmd_threshold(a),
        Command::Orbit(a) => cmd_orbit(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Dimension(a) => cmd_dimension(a),
        Command::Mcmullen(a) => cmd_mcmullen(a),
        Command::VerifyWeb(a) => cmd_verify_web(a),
        Command::VerifyForest(a) => cmd_verify_forest(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Defaults => {
            print!("{}", ExperimentConfig::default().to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Validation => 2,
                ErrorKind::Numerical => 3,
                ErrorKind::Io => 4,
            })
        }
    }
}
