//! End-to-end experiment: threshold estimate, nested-cover limit, web radius,
//! grid classification and the disk-forest checks, written to one directory.
//!
//! Every artifact is a deterministic function of the configuration, so
//! reruns produce byte-identical files. The manifest lists each artifact with
//! its SHA-256.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::atlas::{self, PoleAtlas};
use crate::catalog::{FunctionSpec, SeriesFunctionSpec};
use crate::dimension::{self, DimensionEstimate};
use crate::dynamics::{self, Classification, GridSpec};
use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::verifier::{self, AreaProbeResult, DichotomyReport};

pub const SCHEMA_VERSION: u32 = 1;
/// Smallest escape radius accepted by an experiment.
pub const MIN_ESCAPE_RADIUS: f64 = 16.0;
pub const DEFAULT_OUT_DIR: &str = "escdim-out";
/// Fewest escaping cells for which a box dimension is fitted.
pub const MIN_BOX_POINTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub center_re: f64,
    pub center_im: f64,
    pub half_width: f64,
    pub nx: usize,
    pub ny: usize,
    /// Fit a box-counting dimension to the escaping cells.
    pub box_dimension: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            center_re: 0.0,
            center_im: 0.0,
            half_width: 8.0,
            nx: 200,
            ny: 200,
            box_dimension: true,
        }
    }
}

impl GridConfig {
    pub fn grid_spec(&self) -> Result<GridSpec> {
        let region = Rect::new(
            self.center_re - self.half_width,
            self.center_im - self.half_width,
            2.0 * self.half_width,
            2.0 * self.half_width,
        )?;
        GridSpec::new(region, self.nx, self.ny)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverConfig {
    pub a_const: f64,
    pub b_const: f64,
    /// Radii for the limit are the enforced floor times these factors.
    pub radius_factors: Vec<f64>,
}

impl Default for CoverConfig {
    fn default() -> Self {
        CoverConfig {
            a_const: 1.0,
            b_const: 1.0,
            radius_factors: vec![1.0, 1e3, 1e6, 1e9],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WebConfig {
    pub max_ring: u64,
    pub per_component: usize,
}

impl Default for WebConfig {
    fn default() -> Self {
        WebConfig {
            max_ring: 30,
            per_component: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub enabled: bool,
    pub annuli: u32,
    pub disks_per_annulus: usize,
    pub radius: f64,
    pub eps_budget: f64,
    pub dichotomy_samples: usize,
    pub probe_annulus: u32,
    pub probe_samples: usize,
    pub probe_horizon: u32,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            enabled: true,
            annuli: 8,
            disks_per_annulus: 2,
            radius: 0.45,
            eps_budget: 0.45,
            dichotomy_samples: 10_000,
            probe_annulus: 1,
            probe_samples: 20_000,
            probe_horizon: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub rho: f64,
    pub multiplicity: u32,
    /// Escape radius `R` of the grid classification.
    pub escape_radius: f64,
    /// Rings in the threshold atlas; ignored when `r_max` is set.
    pub rings: u64,
    pub r_max: Option<f64>,
    pub horizon: u32,
    /// Levels of the nested cover.
    pub levels: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub grid: GridConfig,
    pub cover: CoverConfig,
    pub web: WebConfig,
    pub forest: ForestConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            rho: 2.0,
            multiplicity: 1,
            escape_radius: 20.0,
            rings: 1 << 17,
            r_max: None,
            horizon: 3,
            levels: 60,
            seed: 1,
            out_dir: None,
            grid: GridConfig::default(),
            cover: CoverConfig::default(),
            web: WebConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return cfg_err(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) || self.multiplicity == 0 {
            return cfg_err(format!("need rho > 0 and multiplicity >= 1, got {} and {}", self.rho, self.multiplicity));
        }
        if !(self.escape_radius > MIN_ESCAPE_RADIUS && self.escape_radius.is_finite()) {
            return cfg_err(format!("escape_radius must exceed {MIN_ESCAPE_RADIUS}, got {}", self.escape_radius));
        }
        if self.rings < 2 {
            return cfg_err("rings must be at least 2".into());
        }
        if let Some(r) = self.r_max {
            if !(r >= 1.0 && r.is_finite()) {
                return cfg_err(format!("r_max must be at least 1, got {r}"));
            }
        }
        if self.horizon == 0 || self.levels < 2 {
            return cfg_err("horizon must be positive and levels at least 2".into());
        }
        let g = &self.grid;
        if !(g.half_width > 0.0 && g.half_width.is_finite()) || g.nx < 2 || g.ny < 2 {
            return cfg_err("grid needs half_width > 0 and at least 2x2 cells".into());
        }
        let c = &self.cover;
        if !(c.a_const > 0.0 && c.b_const > 0.0) || c.radius_factors.is_empty() || c.radius_factors.iter().any(|f| !(*f >= 1.0)) {
            return cfg_err("cover needs positive constants and radius factors >= 1".into());
        }
        if self.web.max_ring < 2 || self.web.per_component == 0 {
            return cfg_err("web needs max_ring >= 2 and per_component >= 1".into());
        }
        let f = &self.forest;
        if f.enabled && (f.annuli == 0 || f.disks_per_annulus == 0 || f.probe_annulus == 0 || f.probe_annulus > f.annuli) {
            return cfg_err("forest needs at least one annulus and disk, and probe_annulus within 1..=annuli".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdStage {
    pub atlas_rings: u64,
    pub atlas_r_max: f64,
    pub atlas_entries: u64,
    pub estimate: f64,
    pub bracket_width: f64,
}

pub fn threshold_stage(cfg: &ExperimentConfig) -> Result<ThresholdStage> {
    let atlas = match cfg.r_max {
        Some(r) => atlas::build_atlas(cfg.rho, cfg.multiplicity, r)?,
        None => PoleAtlas::with_rings(cfg.rho, cfg.multiplicity, cfg.rings)?,
    };
    let t = atlas::critical_exponent(&atlas)?;
    Ok(ThresholdStage {
        atlas_rings: atlas.max_ring(),
        atlas_r_max: atlas.r_max(),
        atlas_entries: atlas.len(),
        estimate: t.value,
        bracket_width: t.bracket_width,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverStage {
    pub radii: Vec<f64>,
    pub bounds: Vec<f64>,
    pub spreads: Vec<f64>,
    pub limit: f64,
    /// Largest final-third spread over the radii.
    pub uncertainty: f64,
}

/// Nested-cover bound at `floor * factor` for each factor, extrapolated to `R = inf`.
pub fn cover_stage(cfg: &ExperimentConfig, floor: f64) -> Result<CoverStage> {
    let mut radii = Vec::new();
    let mut bounds = Vec::new();
    let mut spreads = Vec::new();
    for &f in &cfg.cover.radius_factors {
        let r = floor * f;
        let cover = dimension::paper_cover_sequence(cfg.rho, cfg.multiplicity, r, cfg.cover.a_const, cfg.cover.b_const, cfg.levels)?;
        let b = dimension::mcmullen_bound(&cover)?;
        radii.push(r);
        bounds.push(b.value);
        spreads.push(b.spread);
    }
    let limit = dimension::extrapolate_in_inverse_log(&radii, &bounds)?;
    Ok(CoverStage {
        uncertainty: spreads.iter().cloned().fold(0.0, f64::max),
        radii,
        bounds,
        spreads,
        limit,
    })
}

/// `max(2^M R0, (16 R0)^M)`.
pub fn radius_floor(r0: f64, multiplicity: u32) -> f64 {
    let m = multiplicity as i32;
    (2f64.powi(m) * r0).max((16.0 * r0).powi(m))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridStage {
    pub escaping: usize,
    pub returned: usize,
    pub pole_hit: usize,
    pub undetermined: usize,
    pub box_dimension: Option<DimensionEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForestStage {
    pub disks: usize,
    pub constraints_pass: bool,
    /// `(n, area(A ∩ P_n), area(A' ∩ P_n))`.
    pub uncovered: Vec<(u32, f64, f64)>,
    pub dichotomy: DichotomyReport,
    pub probe: AreaProbeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub rho: f64,
    pub multiplicity: u32,
    pub formula_value: f64,
    pub threshold: ThresholdStage,
    pub r0_estimate: f64,
    pub enforced_floor: f64,
    pub cover: CoverStage,
    pub grid: GridStage,
    pub forest: Option<ForestStage>,
    pub artifacts: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

struct Artifacts {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Artifacts {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Artifacts { dir, entries: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.entries.push(ManifestEntry {
            file: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    fn csv(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }
}

fn grid_stage(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<GridStage> {
    let spec = FunctionSpec::Series(SeriesFunctionSpec::new(cfg.rho, cfg.multiplicity)?);
    let grid = cfg.grid.grid_spec()?;
    let classes = dynamics::classify_grid(&spec, grid, cfg.escape_radius, cfg.horizon)?;
    out.csv("grid.csv", |w| dynamics::write_grid_csv(&classes, w))?;
    let mut png = Vec::new();
    dynamics::grid_image(&classes)
        .write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)?;
    out.write("grid.png", &png)?;

    let mut box_dimension = None;
    if cfg.grid.box_dimension {
        let pts = dynamics::escaping_points(&classes);
        // box sides from a quarter of the region down to two cells
        let finest = (cfg.grid.nx.min(cfg.grid.ny) / 2).max(1).ilog2();
        let sizes = dimension::dyadic_sizes(&grid.region, 2, finest);
        if pts.len() >= MIN_BOX_POINTS && sizes.len() >= 4 {
            let est = dimension::fit_box_dimension(&pts, &sizes, &grid.region)?;
            out.csv("box_counts.csv", |w| dimension::write_box_csv(&est, w))?;
            box_dimension = Some(est);
        }
    }
    Ok(GridStage {
        escaping: classes.count(Classification::Escaping),
        returned: classes.count(Classification::Returned),
        pole_hit: classes.count(Classification::PoleHit),
        undetermined: classes.count(Classification::Undetermined),
        box_dimension,
    })
}

fn forest_stage(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<ForestStage> {
    let f = &cfg.forest;
    let layout = verifier::default_layout(f.annuli, f.disks_per_annulus, f.radius)?;
    let spec = verifier::choose_forest_params(&layout, f.eps_budget)?;
    let report = verifier::validate_forest_params(&spec);
    out.csv("forest_constraints.csv", |w| verifier::write_report_csv(&report, w))?;
    let uncovered = (1..=f.annuli)
        .map(|n| {
            (
                n,
                verifier::uncovered_area(spec.disks(), n, |d| d.radius),
                verifier::uncovered_area(spec.disks(), n, |d| d.inner_radius),
            )
        })
        .collect();
    let dichotomy = verifier::forest_dichotomy(&spec, f.dichotomy_samples, cfg.seed)?;
    let probe = verifier::area_probe(&spec, f.probe_annulus, f.probe_samples, f.probe_horizon, cfg.seed)?;
    out.csv("forest_probe.csv", |w| verifier::write_probe_csv(std::slice::from_ref(&probe), w))?;
    Ok(ForestStage {
        disks: spec.disks().len(),
        constraints_pass: report.pass,
        uncovered,
        dichotomy,
        probe,
    })
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn report_csv(r: &ExperimentReport) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record([
            "rho",
            "M",
            "formula_value",
            "threshold_estimate",
            "threshold_uncertainty",
            "mcmullen_limit_estimate",
            "mcmullen_uncertainty",
            "box_dimension_estimate",
            "box_fit_residual",
            "r0_estimate",
            "enforced_floor",
            "atlas_rings",
            "atlas_entries",
        ])?;
        let (bd, res) = match &r.grid.box_dimension {
            Some(e) => (fmt(e.value), fmt(e.fit_residual)),
            None => (String::new(), String::new()),
        };
        w.write_record([
            fmt(r.rho),
            r.multiplicity.to_string(),
            fmt(r.formula_value),
            fmt(r.threshold.estimate),
            fmt(r.threshold.bracket_width),
            fmt(r.cover.limit),
            fmt(r.cover.uncertainty),
            bd,
            res,
            fmt(r.r0_estimate),
            fmt(r.enforced_floor),
            r.threshold.atlas_rings.to_string(),
            r.threshold.atlas_entries.to_string(),
        ])?;
        w.flush().map_err(|e| Error::io("<report csv>", e))?;
    }
    Ok(buf)
}

fn report_text(cfg: &ExperimentConfig, r: &ExperimentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "experiment rho = {}, M = {}", r.rho, r.multiplicity);
    let _ = writeln!(s, "formula 2 M rho / (2 + M rho)      = {:.6}", r.formula_value);
    let _ = writeln!(
        s,
        "cover-sum threshold t*            = {:.6} +- {:.1e}  ({} rings, {} poles)",
        r.threshold.estimate, r.threshold.bracket_width, r.threshold.atlas_rings, r.threshold.atlas_entries
    );
    let _ = writeln!(
        s,
        "nested-cover limit R -> inf       = {:.6} +- {:.1e}",
        r.cover.limit, r.cover.uncertainty
    );
    for (rad, b) in r.cover.radii.iter().zip(&r.cover.bounds) {
        let _ = writeln!(s, "  bound at R = {rad:.3e}: {b:.9}");
    }
    let _ = writeln!(s, "working R0 = {:.6}, enforced R floor = {:.6e}", r.r0_estimate, r.enforced_floor);
    let g = &r.grid;
    let _ = writeln!(
        s,
        "grid {}x{} at R = {}, horizon {}: escaping {}, returned {}, pole hit {}, undetermined {}",
        cfg.grid.nx, cfg.grid.ny, cfg.escape_radius, cfg.horizon, g.escaping, g.returned, g.pole_hit, g.undetermined
    );
    match &g.box_dimension {
        Some(e) => {
            let _ = writeln!(s, "box dimension of escaping cells = {:.4} (residual {:.2e})", e.value, e.fit_residual);
        }
        None => {
            let _ = writeln!(s, "box dimension of escaping cells: not fitted");
        }
    }
    if let Some(f) = &r.forest {
        let _ = writeln!(s, "disk forest: {} disks, constraints {}", f.disks, if f.constraints_pass { "PASS" } else { "FAIL" });
        for (n, a, ap) in &f.uncovered {
            let _ = writeln!(s, "  area(A cap P_{n}) = {a:.4}, area(A' cap P_{n}) = {ap:.4}");
        }
        let d = &f.dichotomy;
        let _ = writeln!(
            s,
            "  dichotomy: {} violations (max |f| on A {:.3e}, min |f| on inner disks {:.3e}, min |f'| {:.3e})",
            d.outside_violations + d.inner_violations + d.derivative_violations,
            d.outside_max_modulus,
            d.inner_min_modulus,
            d.derivative_min_modulus
        );
        let p = &f.probe;
        let _ = writeln!(
            s,
            "  probe P_{} seed {}: {} / {} persist to horizon {}, survivors by step {:?}",
            p.annulus, p.rng_seed, p.persisting, p.samples, p.horizon, p.survivors_by_step
        );
    }
    s
}

/// Run every stage, write the artifacts and return the report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let formula_value = atlas::dimension_bound(cfg.rho, cfg.multiplicity)?;
    let mut out = Artifacts::new(cfg.out_dir()).map_err(|e| e.in_stage("output"))?;

    let threshold = threshold_stage(cfg).map_err(|e| e.in_stage("threshold"))?;
    let series = SeriesFunctionSpec::new(cfg.rho, cfg.multiplicity)?;
    let r0_estimate =
        verifier::estimate_r0(&series, cfg.web.max_ring, cfg.web.per_component).map_err(|e| e.in_stage("web"))?;
    let enforced_floor = radius_floor(r0_estimate, cfg.multiplicity);
    let cover = cover_stage(cfg, enforced_floor).map_err(|e| e.in_stage("cover"))?;
    if let Some(&r) = cover.radii.first() {
        let seq = dimension::paper_cover_sequence(cfg.rho, cfg.multiplicity, r, cfg.cover.a_const, cfg.cover.b_const, cfg.levels)?;
        out.csv("cover.csv", |w| dimension::write_cover_csv(&seq, w))
            .map_err(|e| e.in_stage("cover"))?;
    }
    let grid = grid_stage(cfg, &mut out).map_err(|e| e.in_stage("grid"))?;
    let forest = if cfg.forest.enabled {
        Some(forest_stage(cfg, &mut out).map_err(|e| e.in_stage("forest"))?)
    } else {
        None
    };

    let mut report = ExperimentReport {
        rho: cfg.rho,
        multiplicity: cfg.multiplicity,
        formula_value,
        threshold,
        r0_estimate,
        enforced_floor,
        cover,
        grid,
        forest,
        artifacts: Vec::new(),
    };
    // recomputed here so a drift in the atlas formula is caught
    let m = cfg.multiplicity as f64;
    let independent = 2.0 * m * cfg.rho / (2.0 + m * cfg.rho);
    if independent != report.formula_value {
        return Err(Error::numerical(format!(
            "formula mismatch: {independent} vs {}",
            report.formula_value
        ))
        .in_stage("report"));
    }
    let stage = |e: Error| e.in_stage("report");
    out.write("config.toml", cfg.to_toml().as_bytes()).map_err(stage)?;
    out.write("report.csv", &report_csv(&report).map_err(stage)?).map_err(stage)?;
    out.write("report.txt", report_text(cfg, &report).as_bytes()).map_err(stage)?;

    let mut manifest = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut manifest);
        w.write_record(["file", "bytes", "sha256"]).map_err(|e| stage(e.into()))?;
        for e in &out.entries {
            w.write_record([e.file.clone(), e.bytes.to_string(), e.sha256.clone()])
                .map_err(|e| stage(e.into()))?;
        }
        w.flush().map_err(|e| stage(Error::io("<manifest>", e)))?;
    }
    let path = out.dir.join("manifest.csv");
    fs::write(&path, &manifest).map_err(|e| stage(Error::io(&path, e)))?;
    report.artifacts = out.entries;
    Ok(report)
}

/// Human-readable summary as written to `report.txt`.
pub fn render_report(cfg: &ExperimentConfig, report: &ExperimentReport) -> String {
    report_text(cfg, report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub rho: f64,
    pub multiplicity: u32,
    pub formula_value: f64,
    pub threshold_estimate: f64,
    pub mcmullen_limit_estimate: f64,
    pub out_dir: PathBuf,
}

/// Run each configuration and check that the formula column increases in
/// `rho` at fixed `M` and in `M` at fixed `rho`.
pub fn sweep(configs: &[ExperimentConfig]) -> Result<Vec<SweepRow>> {
    if configs.is_empty() {
        return Err(Error::invalid("sweep needs at least one configuration"));
    }
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in configs {
        let r = run_experiment(cfg)?;
        rows.push(SweepRow {
            rho: cfg.rho,
            multiplicity: cfg.multiplicity,
            formula_value: r.formula_value,
            threshold_estimate: r.threshold.estimate,
            mcmullen_limit_estimate: r.cover.limit,
            out_dir: cfg.out_dir(),
        });
    }
    check_formula_monotone(&rows)?;
    Ok(rows)
}

pub fn check_formula_monotone(rows: &[SweepRow]) -> Result<()> {
    for a in rows {
        for b in rows {
            let same_m_up = a.multiplicity == b.multiplicity && a.rho < b.rho;
            let same_rho_up = a.rho == b.rho && a.multiplicity < b.multiplicity;
            if (same_m_up || same_rho_up) && !(a.formula_value < b.formula_value) {
                return Err(Error::numerical(format!(
                    "formula not increasing between (rho {}, M {}) and (rho {}, M {})",
                    a.rho, a.multiplicity, b.rho, b.multiplicity
                )));
            }
        }
    }
    Ok(())
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rho", "M", "formula_value", "threshold_estimate", "mcmullen_limit_estimate", "out_dir"])?;
    for r in rows {
        w.write_record([
            fmt(r.rho),
            r.multiplicity.to_string(),
            fmt(r.formula_value),
            fmt(r.threshold_estimate),
            fmt(r.mcmullen_limit_estimate),
            r.out_dir.display().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<sweep csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            rings: 1 << 14,
            out_dir: Some(dir.to_path_buf()),
            grid: GridConfig {
                nx: 32,
                ny: 32,
                ..GridConfig::default()
            },
            forest: ForestConfig {
                annuli: 3,
                probe_samples: 1000,
                dichotomy_samples: 600,
                ..ForestConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(ExperimentConfig::from_toml("schema_version = 1\n").unwrap(), cfg);
    }

    #[test]
    fn config_rejections() {
        assert!(ExperimentConfig::from_toml("schema_version = 2\n").is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1\n").is_err());
        assert!(ExperimentConfig::from_toml("escape_radius = 16.0\n").is_err());
        assert!(ExperimentConfig::from_toml("[grid]\nnx = 1\n").is_err());
    }

    #[test]
    fn floor_formula() {
        assert_eq!(radius_floor(2.0, 1), 32.0);
        assert_eq!(radius_floor(2.0, 2), 1024.0);
        assert_eq!(radius_floor(0.01, 3), 8.0 * 0.01);
    }

    #[test]
    fn experiment_writes_manifested_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let r = run_experiment(&cfg).unwrap();
        assert!((r.threshold.estimate - 1.0).abs() < 0.05);
        assert!((r.cover.limit - 1.0).abs() < 1e-9);
        let manifest = fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
        for e in &r.artifacts {
            let bytes = fs::read(dir.path().join(&e.file)).unwrap();
            assert_eq!(hex::encode(Sha256::digest(&bytes)), e.sha256);
            assert!(manifest.contains(&e.sha256));
        }
        assert!(r.artifacts.iter().any(|e| e.file == "grid.png"));
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path());
        cfg.forest.radius = 1.5;
        match run_experiment(&cfg) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "forest"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_rejects_empty_and_checks_formula() {
        assert!(sweep(&[]).is_err());
        let row = |rho, m, v| SweepRow {
            rho,
            multiplicity: m,
            formula_value: v,
            threshold_estimate: v,
            mcmullen_limit_estimate: v,
            out_dir: PathBuf::new(),
        };
        assert!(check_formula_monotone(&[row(2.0, 1, 1.0), row(2.0, 2, 4.0 / 3.0)]).is_ok());
        assert!(check_formula_monotone(&[row(1.0, 1, 1.0), row(2.0, 1, 0.9)]).is_err());
    }
}
