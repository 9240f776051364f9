//! Experiment configs, manifests, and replay.
//!
//! An experiment is a TOML config naming an equation, one of seven canned
//! pipelines, and the numerical controls the pipeline needs.  Running it
//! writes plot-ready CSV/JSON artifacts plus `manifest.json` recording the
//! config (echoed verbatim and content-hashed), the crate version, the
//! seed, and a SHA-256 per artifact.  Every pipeline is deterministic given
//! the config: random draws come from a counter-based generator seeded in
//! the config, and parallel sections collect in input order.  `replay`
//! re-executes the manifest's config into a scratch directory and
//! byte-compares against the recorded artifacts.
//!
//! Floats in CSVs carry 17 significant digits, enough to round-trip f64,
//! so a successful replay means bit-identical numerics, not just
//! agreement to plotting accuracy.

use crate::error::{Error, Result, StageExt};
use crate::functionals::{monotonicity_report, MonotonicityReport};
use crate::geometry::{
    classify_point, cone_test, contradicts, corner_fit, sign_rule, speed_bound_check, CornerFit,
    Side, SignRuleOutcome,
};
use crate::local_energy::verify_energy_lemma;
use crate::model::{EquationConfig, EquationSpec};
use crate::radial_solver::{
    blowup_graph, evolve, BlowupGraph, PointClass, RadialGrid, RadialState, RadialTrajectory,
    RunStatus, SolveControls,
};
use crate::similarity::{evolve_w, to_similarity, WControls, WTrajectory};
use crate::soliton_ode::{barycenter, integrate_system, zeta_bar, CenterSystem, ForcingFn};
use crate::solitons::{decompose, kappa, synthetic_decomposition_frame, SolitonDecomposition};
use crate::ygrid::YGrid;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Similarity,
    Diagnose,
    Decompose,
    Centers,
    Geometry,
    Energy,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Similarity => "similarity",
            ExperimentKind::Diagnose => "diagnose",
            ExperimentKind::Decompose => "decompose",
            ExperimentKind::Centers => "centers",
            ExperimentKind::Geometry => "geometry",
            ExperimentKind::Energy => "energy",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn one() -> f64 {
    1.0
}

/// Radial solver controls plus the grid extent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialSection {
    pub r_min: f64,
    pub r_max: f64,
    pub n: usize,
    #[serde(default = "RadialSection::default_cfl")]
    pub cfl: f64,
    #[serde(default = "RadialSection::default_threshold")]
    pub blowup_threshold: f64,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "RadialSection::default_slices")]
    pub target_slices: usize,
    #[serde(default = "RadialSection::default_floor")]
    pub fitting_floor: f64,
    #[serde(default = "RadialSection::default_boundary_tol")]
    pub boundary_tol: f64,
}

impl RadialSection {
    fn default_cfl() -> f64 {
        0.45
    }
    fn default_threshold() -> f64 {
        1e6
    }
    fn default_slices() -> usize {
        400
    }
    fn default_floor() -> f64 {
        1e2
    }
    fn default_boundary_tol() -> f64 {
        0.02
    }

    pub fn grid(&self, n_dim: u32) -> Result<RadialGrid> {
        RadialGrid::new(self.r_min, self.r_max, self.n, n_dim)
    }

    pub fn controls(&self) -> SolveControls {
        SolveControls {
            cfl: self.cfl,
            blowup_threshold: self.blowup_threshold,
            t_end: self.t_end,
            max_steps: 40_000_000,
            target_slices: self.target_slices,
            fitting_floor: self.fitting_floor,
            boundary_tol: self.boundary_tol,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v, need_pos) in [
            ("radial.cfl", self.cfl, true),
            ("radial.blowup_threshold", self.blowup_threshold, true),
            ("radial.fitting_floor", self.fitting_floor, true),
            ("radial.boundary_tol", self.boundary_tol, true),
        ] {
            if need_pos && !(v > 0.0) {
                return Err(Error::Config { detail: format!("{name} must be positive, got {v}") });
            }
        }
        if let Some(t) = self.t_end {
            if !(t > 0.0) {
                return Err(Error::Config { detail: format!("radial.t_end must be positive, got {t}") });
            }
        }
        if self.target_slices < 2 {
            return Err(Error::Config { detail: "radial.target_slices must be >= 2".into() });
        }
        Ok(())
    }
}

/// Initial data shapes for radial runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    Constant { amplitude: f64 },
    Gaussian { amplitude: f64, center: f64, width: f64 },
    /// amplitude·tanh((r−center)/width): plateaus of opposite sign.
    PlateauPair { amplitude: f64, center: f64, width: f64 },
    /// Compactly supported C³ bump amplitude·(1−((r−center)/width)²)⁴.
    Bump { amplitude: f64, center: f64, width: f64 },
}

impl InitialData {
    pub fn sample(&self, grid: &RadialGrid) -> RadialState {
        let u: Vec<f64> = (0..grid.n)
            .map(|j| {
                let r = grid.r(j);
                match *self {
                    InitialData::Zero => 0.0,
                    InitialData::Constant { amplitude } => amplitude,
                    InitialData::Gaussian { amplitude, center, width } => {
                        amplitude * (-(r - center) * (r - center) / (2.0 * width * width)).exp()
                    }
                    InitialData::PlateauPair { amplitude, center, width } => {
                        amplitude * ((r - center) / width).tanh()
                    }
                    InitialData::Bump { amplitude, center, width } => {
                        let s = (r - center) / width;
                        if s.abs() >= 1.0 {
                            0.0
                        } else {
                            amplitude * (1.0 - s * s).powi(4)
                        }
                    }
                }
            })
            .collect();
        let v = vec![0.0; grid.n];
        RadialState::new(u, v)
    }

    fn validate(&self) -> Result<()> {
        let width = match *self {
            InitialData::Zero | InitialData::Constant { .. } => return Ok(()),
            InitialData::Gaussian { width, .. }
            | InitialData::PlateauPair { width, .. }
            | InitialData::Bump { width, .. } => width,
        };
        if !(width > 0.0) {
            return Err(Error::Config { detail: format!("initial data width must be positive, got {width}") });
        }
        Ok(())
    }
}

/// Initial w-profiles for similarity-slab evolutions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WInit {
    /// The stationary soliton κ(d, ·).
    Kappa { d: f64 },
    /// κ(d, ·) plus a smooth perturbation vanishing at the slab edges.
    KappaPerturbed { d: f64, amplitude: f64 },
    /// Seeded low-mode cosine profile of the given amplitude.
    Generic { amplitude: f64 },
}

impl WInit {
    pub fn sample(&self, grid: &YGrid, p: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let n = grid.n();
        let w0: Vec<f64> = match *self {
            WInit::Kappa { d } => grid.nodes().iter().map(|&y| kappa(p, d, y)).collect(),
            WInit::KappaPerturbed { d, amplitude } => grid
                .nodes()
                .iter()
                .map(|&y| {
                    kappa(p, d, y)
                        + amplitude
                            * (std::f64::consts::FRAC_PI_2 * y).cos()
                            * (1.0 - y * y)
                })
                .collect(),
            WInit::Generic { amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x57a7_f00d);
                let coeffs: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                grid.nodes()
                    .iter()
                    .map(|&y| {
                        amplitude
                            * coeffs
                                .iter()
                                .enumerate()
                                .map(|(k, &a)| {
                                    a * ((k as f64 + 1.0) * std::f64::consts::FRAC_PI_2 * y).cos()
                                        / (k as f64 + 1.0)
                                })
                                .sum::<f64>()
                    })
                    .collect()
            }
        };
        (w0, vec![0.0; n])
    }

    fn validate(&self) -> Result<()> {
        let d = match *self {
            WInit::Kappa { d } | WInit::KappaPerturbed { d, .. } => d,
            WInit::Generic { .. } => return Ok(()),
        };
        if !(d.abs() < 1.0) {
            return Err(Error::Config { detail: format!("soliton parameter |d| must be < 1, got {d}") });
        }
        Ok(())
    }
}

/// Similarity-slab evolution controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilaritySection {
    pub n: usize,
    #[serde(default = "SimilaritySection::default_eps")]
    pub eps: f64,
    #[serde(default = "SimilaritySection::default_cfl")]
    pub cfl: f64,
    /// Blow-up point the slab is centered on (enters the N ≥ 2 drift term).
    #[serde(default = "SimilaritySection::default_r0")]
    pub r0: f64,
    /// Blow-up time of the frame.
    #[serde(default = "one")]
    pub t0: f64,
    pub s0: f64,
    pub s_end: f64,
    #[serde(default = "SimilaritySection::default_out_ds")]
    pub out_ds: f64,
    pub w_init: WInit,
    /// Damping constant μ of the H functional; auto-calibrated when absent.
    #[serde(default)]
    pub mu: Option<f64>,
    /// Write every `node_stride`-th grid node into frames.csv.
    #[serde(default = "SimilaritySection::default_node_stride")]
    pub node_stride: usize,
}

impl SimilaritySection {
    fn default_eps() -> f64 {
        1e-3
    }
    fn default_cfl() -> f64 {
        1.2
    }
    fn default_r0() -> f64 {
        2.0
    }
    fn default_out_ds() -> f64 {
        0.05
    }
    fn default_node_stride() -> usize {
        1
    }

    fn controls(&self) -> WControls {
        WControls { cfl: self.cfl, out_ds: self.out_ds, ..WControls::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 0.25) {
            return Err(Error::Config { detail: format!("similarity.eps must be in (0, 0.25), got {}", self.eps) });
        }
        if !(self.cfl > 0.0) || !(self.out_ds > 0.0) {
            return Err(Error::Config { detail: "similarity.cfl and out_ds must be positive".into() });
        }
        if !(self.s_end > self.s0) {
            return Err(Error::Config { detail: format!("similarity window must have s_end > s0, got [{}, {}]", self.s0, self.s_end) });
        }
        if self.node_stride == 0 {
            return Err(Error::Config { detail: "similarity.node_stride must be >= 1".into() });
        }
        if let Some(mu) = self.mu {
            if mu < 0.0 {
                return Err(Error::Config { detail: format!("similarity.mu must be >= 0, got {mu}") });
            }
        }
        self.w_init.validate()
    }
}

/// Soliton-center ODE experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CentersSection {
    pub k: usize,
    #[serde(default = "one")]
    pub c1: f64,
    pub s_lo: f64,
    pub s_hi: f64,
    /// Approximate number of CSV rows (trajectory is decimated to this).
    #[serde(default = "CentersSection::default_samples")]
    pub samples: usize,
    /// Forcing (−1)^i · amp / s^power on component i; 0 disables.
    #[serde(default)]
    pub forcing_amp: f64,
    #[serde(default = "CentersSection::default_forcing_power")]
    pub forcing_power: f64,
    /// Offsets added to the explicit solution at s_lo (defaults to zero).
    #[serde(default)]
    pub init_offsets: Option<Vec<f64>>,
}

impl CentersSection {
    fn default_samples() -> usize {
        400
    }
    fn default_forcing_power() -> f64 {
        1.5
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config { detail: format!("centers.k must be >= 2, got {}", self.k) });
        }
        if !(self.s_lo > 0.0 && self.s_hi > self.s_lo) {
            return Err(Error::Config { detail: format!("centers window must have 0 < s_lo < s_hi, got [{}, {}]", self.s_lo, self.s_hi) });
        }
        if self.samples < 2 {
            return Err(Error::Config { detail: "centers.samples must be >= 2".into() });
        }
        if self.forcing_amp != 0.0 && !(self.forcing_power > 0.0) {
            return Err(Error::Config { detail: "centers.forcing_power must be positive when forcing_amp is set".into() });
        }
        if let Some(offs) = &self.init_offsets {
            if offs.len() != self.k {
                return Err(Error::Config { detail: format!("centers.init_offsets must have k = {} entries, got {}", self.k, offs.len()) });
            }
        }
        Ok(())
    }
}

/// Synthetic multi-soliton decomposition experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeSection {
    pub k: usize,
    #[serde(default = "DecomposeSection::default_theta1")]
    pub theta1: i8,
    /// Explicit centers; when absent, gaps are drawn from the seed in
    /// [1.5, 3.0] around a zero barycenter.
    #[serde(default)]
    pub zetas: Option<Vec<f64>>,
    #[serde(default = "DecomposeSection::default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "SimilaritySection::default_eps")]
    pub eps: f64,
    #[serde(default = "DecomposeSection::default_k_max")]
    pub k_max: usize,
    /// Slab time entering the frame's ws through the center drift.
    #[serde(default = "one")]
    pub s: f64,
}

impl DecomposeSection {
    fn default_theta1() -> i8 {
        1
    }
    fn default_grid_n() -> usize {
        257
    }
    fn default_k_max() -> usize {
        5
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > 5 {
            return Err(Error::Config { detail: format!("decompose.k must be in 1..=5, got {}", self.k) });
        }
        if self.k_max == 0 || self.k_max > 5 {
            return Err(Error::Config { detail: format!("decompose.k_max must be in 1..=5, got {}", self.k_max) });
        }
        if self.theta1 != 1 && self.theta1 != -1 {
            return Err(Error::Config { detail: format!("decompose.theta1 must be +1 or -1, got {}", self.theta1) });
        }
        if let Some(z) = &self.zetas {
            if z.len() != self.k {
                return Err(Error::Config { detail: format!("decompose.zetas must have k = {} entries, got {}", self.k, z.len()) });
            }
            if z.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config { detail: "decompose.zetas must be strictly increasing".into() });
            }
        }
        Ok(())
    }
}

/// Blow-up graph geometry experiment around one point.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub r0: f64,
    #[serde(default = "GeometrySection::default_delta0")]
    pub delta0: f64,
    /// Half-width of the r-window used by the cone test and sign rule.
    #[serde(default = "GeometrySection::default_window")]
    pub window: f64,
    /// Soliton count assumed by the corner and speed fits.
    #[serde(default = "GeometrySection::default_k")]
    pub k: usize,
    #[serde(default = "one")]
    pub min_decades: f64,
    #[serde(default = "GeometrySection::default_fit_tol")]
    pub fit_tol: f64,
    #[serde(default = "GeometrySection::default_sign_tol")]
    pub sign_tol: f64,
}

impl GeometrySection {
    fn default_delta0() -> f64 {
        0.9
    }
    fn default_window() -> f64 {
        0.5
    }
    fn default_k() -> usize {
        1
    }
    fn default_fit_tol() -> f64 {
        1e-2
    }
    fn default_sign_tol() -> f64 {
        1e-9
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta0 > 0.0 && self.delta0 < 1.0) {
            return Err(Error::Config { detail: format!("geometry.delta0 must be in (0, 1), got {}", self.delta0) });
        }
        if !(self.window > 0.0) || !(self.min_decades > 0.0) {
            return Err(Error::Config { detail: "geometry.window and min_decades must be positive".into() });
        }
        if self.k == 0 {
            return Err(Error::Config { detail: "geometry.k must be >= 1".into() });
        }
        if self.fit_tol < 0.0 || self.sign_tol < 0.0 {
            return Err(Error::Config { detail: "geometry tolerances must be >= 0".into() });
        }
        Ok(())
    }
}

/// Shrinking-ball energy lemma experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    #[serde(default = "one")]
    pub lambda: f64,
}

impl EnergySection {
    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Config { detail: format!("energy.lambda must be in (0, 1], got {}", self.lambda) });
        }
        Ok(())
    }
}

/// A full experiment description, loadable from TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub equation: EquationConfig,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub radial: Option<RadialSection>,
    #[serde(default)]
    pub initial: Option<InitialData>,
    #[serde(default)]
    pub similarity: Option<SimilaritySection>,
    #[serde(default)]
    pub centers: Option<CentersSection>,
    #[serde(default)]
    pub decompose: Option<DecomposeSection>,
    #[serde(default)]
    pub geometry: Option<GeometrySection>,
    #[serde(default)]
    pub energy: Option<EnergySection>,
}

impl ExperimentConfig {
    pub fn from_toml(src: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig = toml::from_str(src)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let src = std::fs::read_to_string(path)?;
        ExperimentConfig::from_toml(&src)
    }

    fn section<'a, T>(opt: &'a Option<T>, name: &str, kind: ExperimentKind) -> Result<&'a T> {
        opt.as_ref().ok_or_else(|| Error::Config {
            detail: format!("experiment `{kind}` requires a [{name}] section"),
        })
    }

    fn radial_and_initial(&self) -> Result<(&RadialSection, &InitialData)> {
        Ok((
            Self::section(&self.radial, "radial", self.experiment)?,
            Self::section(&self.initial, "initial", self.experiment)?,
        ))
    }

    pub fn validate(&self) -> Result<()> {
        self.equation.build()?;
        if let Some(r) = &self.radial {
            r.validate()?;
        }
        if let Some(i) = &self.initial {
            i.validate()?;
        }
        if let Some(s) = &self.similarity {
            s.validate()?;
        }
        if let Some(c) = &self.centers {
            c.validate()?;
        }
        if let Some(d) = &self.decompose {
            d.validate()?;
        }
        if let Some(g) = &self.geometry {
            g.validate()?;
        }
        if let Some(e) = &self.energy {
            e.validate()?;
        }
        match self.experiment {
            ExperimentKind::Simulate => {
                self.radial_and_initial()?;
            }
            ExperimentKind::Similarity | ExperimentKind::Diagnose => {
                Self::section(&self.similarity, "similarity", self.experiment)?;
            }
            ExperimentKind::Decompose => {
                Self::section(&self.decompose, "decompose", self.experiment)?;
            }
            ExperimentKind::Centers => {
                Self::section(&self.centers, "centers", self.experiment)?;
            }
            ExperimentKind::Geometry => {
                self.radial_and_initial()?;
                Self::section(&self.geometry, "geometry", self.experiment)?;
            }
            ExperimentKind::Energy => {
                let (radial, _) = self.radial_and_initial()?;
                Self::section(&self.energy, "energy", self.experiment)?;
                match radial.t_end {
                    Some(t) if t < 1.0 => {}
                    _ => {
                        return Err(Error::Config {
                            detail: "energy experiment requires radial.t_end in (0, 1) \
                                     (the shrinking ball closes at t = 1)"
                                .into(),
                        })
                    }
                }
            }
        }
        Ok(())
    }

    /// Canonical content hash of the config (compact JSON encoding).
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        sha256_hex(canonical.as_bytes())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

/// One artifact recorded in a manifest; `path` is relative to the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub path: String,
    pub sha256: String,
}

/// Written as `manifest.json` next to the artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub crate_version: String,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub outputs: Vec<ArtifactRecord>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// 17 significant digits: round-trips f64 exactly.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct ArtifactWriter {
    dir: PathBuf,
    outputs: Vec<ArtifactRecord>,
}

impl ArtifactWriter {
    fn new(dir: &Path) -> Result<ArtifactWriter> {
        std::fs::create_dir_all(dir)?;
        Ok(ArtifactWriter { dir: dir.to_path_buf(), outputs: Vec::new() })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), content)?;
        self.outputs.push(ArtifactRecord {
            name: name.to_string(),
            path: name.to_string(),
            sha256: sha256_hex(content.as_bytes()),
        });
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.write(name, &body)
    }
}

fn csv<R: IntoIterator<Item = Vec<f64>>>(header: &str, rows: R) -> String {
    let mut out = String::with_capacity(4096);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            out.push_str(&fmt_f64(v));
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Resolve where a run's artifacts go: explicit `out_dir`, else
/// `$WAVELAB_OUT/<experiment>_<hash12>`, else `wavelab_out/<...>`.
pub fn default_out_dir(config: &ExperimentConfig) -> PathBuf {
    if let Some(dir) = &config.out_dir {
        return dir.clone();
    }
    let root = std::env::var_os("WAVELAB_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("wavelab_out"));
    root.join(format!("{}_{}", config.experiment.name(), &config.content_hash()[..12]))
}

/// Run the experiment into its default output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Manifest> {
    run_experiment_at(config, &default_out_dir(config))
}

/// Run the experiment, writing artifacts and `manifest.json` into `dir`.
pub fn run_experiment_at(config: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    config.validate()?;
    let mut writer = ArtifactWriter::new(dir)?;
    match config.experiment {
        ExperimentKind::Simulate => pipeline_simulate(config, &mut writer)?,
        ExperimentKind::Similarity => pipeline_similarity(config, &mut writer)?,
        ExperimentKind::Diagnose => pipeline_diagnose(config, &mut writer)?,
        ExperimentKind::Decompose => pipeline_decompose(config, &mut writer)?,
        ExperimentKind::Centers => pipeline_centers(config, &mut writer)?,
        ExperimentKind::Geometry => pipeline_geometry(config, &mut writer)?,
        ExperimentKind::Energy => pipeline_energy(config, &mut writer)?,
    }
    let manifest = Manifest {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: config.experiment,
        seed: config.seed,
        config_hash: config.content_hash(),
        config: config.clone(),
        outputs: writer.outputs,
    };
    let mut body = serde_json::to_string_pretty(&manifest)?;
    body.push('\n');
    std::fs::write(dir.join(MANIFEST_NAME), body)?;
    Ok(manifest)
}

// ---- pipelines ----

fn radial_run(config: &ExperimentConfig, spec: &EquationSpec) -> Result<RadialTrajectory> {
    let (radial, initial) = config.radial_and_initial()?;
    let grid = radial.grid(spec.n_dim).stage("radial grid")?;
    let init = initial.sample(&grid);
    evolve(spec, &grid, &init, &radial.controls()).stage("radial evolve")
}

#[derive(Serialize)]
struct SimulateSummary {
    status: RunStatus,
    steps_taken: usize,
    final_dt: f64,
    stored_slices: usize,
    points_with_blowup_fit: usize,
}

fn pipeline_simulate(config: &ExperimentConfig, writer: &mut ArtifactWriter) -> Result<()> {
    let spec = config.equation.build().stage("equation")?;
    let traj = radial_run(config, &spec)?;
    let radial = config.radial.as_ref().expect("validated");

    // probe columns: 9 radii evenly spread across the grid
    let n = traj.grid.n;
    let mut probes: Vec<usize> = (0..9).map(|i| i * (n - 1) / 8).collect();
    probes.dedup();
    let header = {
        let mut h = String::from("t,max_abs_u");
        for &i in &probes {
            h.push_str(&format!(",u_i{i}"));
        }
        h
    };
    let rows = traj.times.iter().zip(&traj.slices).map(|(&t, slice)| {
        let mut row = vec![t, slice.max_abs_u()];
        row.extend(probes.iter().map(|&i| slice.u[i]));
        row
    });
    writer.write("trajectory.csv", &csv(&header, rows))?;

    let graph = blowup_graph(&traj, radial.fitting_floor);
    writer.write("graph.csv", &graph_csv(&graph))?;

    let fitted = graph.t_est.iter().filter(|t| t.is_finite()).count();
    writer.write_json(
        "run.json",
        &SimulateSummary {
            status: traj.status,
            steps_taken: traj.steps_taken,
            final_dt: traj.final_dt,
            stored_slices: traj.slices.len(),
            points_with_blowup_fit: fitted,
        },
    )
}

fn graph_csv(graph: &BlowupGraph) -> String {
    let mut out = String::from("r,t_est,fit_quality,class\n");
    for i in 0..graph.r.len() {
        out.push_str(&format!(
            "{},{},{},{:?}\n",
            fmt_f64(graph.r[i]),
            fmt_f64(graph.t_est[i]),
            fmt_f64(graph.fit_quality[i]),
            graph.classification[i]
        ));
    }
    out
}

fn similarity_run(config: &ExperimentConfig) -> Result<WTrajectory> {
    let spec = config.equation.build().stage("equation")?;
    let sim = ExperimentConfig::section(&config.similarity, "similarity", config.experiment)?;
    let grid = Arc::new(YGrid::clustered(sim.n, sim.eps).stage("slab grid")?);
    let (w0, ws0) = sim.w_init.sample(&grid, spec.p, config.seed);
    evolve_w(&spec, grid, sim.r0, sim.t0, &w0, &ws0, sim.s0, sim.s_end, &sim.controls())
        .stage("w evolve")
}

#[derive(Serialize)]
struct SimilaritySummary {
    frames: usize,
    s_first: f64,
    s_last: f64,
}

fn pipeline_similarity(config: &ExperimentConfig, writer: &mut ArtifactWriter) -> Result<()> {
    let sim = ExperimentConfig::section(&config.similarity, "similarity", config.experiment)?;
    let wt = similarity_run(config)?;
    let stride = sim.node_stride;
    let mut rows = Vec::new();
    for frame in &wt.frames {
        for j in (0..frame.grid.n()).step_by(stride) {
            rows.push(vec![frame.s, frame.grid.nodes()[j], frame.w[j], frame.ws[j]]);
        }
    }
    writer.write("frames.csv", &csv("s,y,w,ws", rows))?;
    writer.write_json(
        "run.json",
        &SimilaritySummary {
            frames: wt.frames.len(),
            s_first: wt.frames.first().map_or(f64::NAN, |f| f.s),
            s_last: wt.frames.last().map_or(f64::NAN, |f| f.s),
        },
    )
}

fn pipeline_diagnose(config: &ExperimentConfig, writer: &mut ArtifactWriter) -> Result<()> {
    let sim = ExperimentConfig::section(&config.similarity, "similarity", config.experiment)?;
    let wt = similarity_run(config)?;
    let report: MonotonicityReport = monotonicity_report(&wt, sim.mu).stage("monotonicity")?;
    let rows = report
        .readouts
        .iter()
        .map(|r| vec![r.s, r.e0, r.i, r.j, r.e, r.h, r.dissipation]);
    writer.write("readout.csv", &csv("s,E0,I,J,E,H,dissipation", rows))?;
    writer.write_json("monotonicity.json", &report)
}

#[derive(Serialize)]
struct DecomposeReport {
    true_theta1: i8,
    true_zetas: Vec<f64>,
    result: SolitonDecomposition,
}

fn pipeline_decompose(config: &ExperimentConfig, writer: &mut ArtifactWriter) -> Result<()> {
    let spec = config.equation.build().stage("equation")?;
    let dc = ExperimentConfig::section(&config.decompose, "decompose", config.experiment)?;
    let grid = Arc::new(YGrid::clustered(dc.grid_n, dc.eps).stage("slab grid")?);
    let zetas = match &dc.zetas {
        Some(z) => z.clone(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let gaps: Vec<f64> = (0..dc.k.saturating_sub(1))
                .map(|_| rng.gen_range(1.5..3.0))
                .collect();
            let mut z = vec![0.0];
            for g in &gaps {
                z.push(z.last().unwrap() + g);
            }
            let mean = z.iter().sum::<f64>() / z.len() as f64;
            z.iter().map(|v| v - mean).collect()
        }
    };
    let frame = synthetic_decomposition_frame(grid, spec.p, dc.theta1, &zetas, dc.s);
    let rows = (0..frame.grid.n()).map(|j| vec![frame.grid.nodes()[j], frame.w[j], frame.ws[j]]);
    writer.write("frame.csv", &csv("y,w,ws", rows))?;
    let result = decompose(&frame, spec.p, dc.k_max);
    writer.write_json(
        "decomposition.json",
        &DecomposeReport { true_theta1: dc.theta1, true_zetas: zetas, result },
    )
}

#[derive(Serialize)]
struct CentersReport {
    k: usize,
    c1: f64,
    s_hi: f64,
    /// ζᵢ(s_hi) − ζ̄ᵢ(s_hi): converges to a common constant without forcing.
    offsets_end: Vec<f64>,
    mean_offset: f64,
    max_deviation_from_mean: f64,
    barycenter_drift: f64,
}

fn pipeline_centers(config: &ExperimentConfig, writer: &mut ArtifactWriter) -> Result<()> {
    let spec = config.equation.build().stage("equation")?;
    let ct = ExperimentConfig::section(&config.centers, "centers", config.experiment)?;
    let system = CenterSystem::new(spec.p, ct.k, ct.c1).stage("center system")?;
    let mut init = zeta_bar(&system, ct.s_lo).stage("explicit solution")?;
    if let Some(offs) = &ct.init_offsets {
        for (z, o) in init.iter_mut().zip(offs) {
            *z += o;
        }
    }
    let amp = ct.forcing_amp;
    let power = ct.forcing_power;
    let forcing_fn: Box<ForcingFn>;
    let forcing = if amp != 0.0 {
        forcing_fn = Box::new(move |i: usize, s: f64| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * amp / s.powf(power)
        });
        Some(&*forcing_fn)
    } else {
        None
    };
    let traj = integrate_system(&system, &init, ct.s_lo, ct.s_hi, forcing).stage("integration")?;

    let m = traj.s.len();
    let stride = (m / ct.samples).max(1);
    let header = {
        let mut h = String::from("s");
        for i in 1..=ct.k {
            h.push_str(&format!(",zeta_{i}"));
        }
        h.push_str(",barycenter");
        h
    };
    let rows = (0..m)
        .filter(|idx| idx % stride == 0 || *idx == m - 1)
        .map(|idx| {
            let mut row = vec![traj.s[idx]];
            row.extend(traj.zetas[idx].iter().cloned());
            row.push(barycenter(&traj.zetas[idx]));
            row
        });
    writer.write("centers.csv", &csv(&header, rows))?;

    let zb_end = zeta_bar(&system, ct.s_hi).stage("explicit solution")?;
    let end = &traj.zetas[m - 1];
    let offsets: Vec<f64> = end.iter().zip(&zb_end).map(|(z, zb)| z - zb).collect();
    let mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
    let max_dev = offsets.iter().map(|o| (o - mean).abs()).fold(0.0f64, f64::max);
    let drift = (barycenter(end) - barycenter(&traj.zetas[0])).abs();
    writer.write_json(
        "centers_report.json",
        &CentersReport {
            k: ct.k,
            c1: ct.c1,
            s_hi: ct.s_hi,
            offsets_end: offsets,
            mean_offset: mean,
            max_deviation_from_mean: max_dev,
            barycenter_drift: drift,
        },
    )
}

#[derive(Serialize)]
struct CornerSideReport {
    fit: Option<CornerFit>,
    caveat: Option<String>,
}

#[derive(Serialize)]
struct GeometryReport {
    r0: f64,
    t_r0: f64,
    energy_series: Vec<(f64, f64)>,
    class: PointClass,
    sign: SignRuleOutcome,
    sign_contradicts_energy: bool,
    cone_ok: bool,
    corner_left: CornerSideReport,
    corner_right: CornerSideReport,
    speed_c4: f64,
    speed_consistent: bool,
}

fn corner_side(
    graph: &BlowupGraph,
    r0: f64,
    p: f64,
    k: usize,
    side: Side,
    min_decades: f64,
) -> CornerSideReport {
    match corner_fit(graph, r0, p, k, side, min_decades) {
        Ok(fit) => CornerSideReport { fit: Some(fit), caveat: None },
        Err(e) => CornerSideReport { fit: None, caveat: Some(e.to_string()) },
    }
}

fn pipeline_geometry(config: &ExperimentConfig, writer: &mut ArtifactWriter) -> Result<()> {
    let spec = config.equation.build().stage("equation")?;
    let geo = ExperimentConfig::section(&config.geometry, "geometry", config.experiment)?;
    let radial = config.radial.as_ref().expect("validated");
    let traj = radial_run(config, &spec)?;
    let graph = blowup_graph(&traj, radial.fitting_floor);
    writer.write("graph.csv", &graph_csv(&graph))?;

    // T(r0) from the graph sample nearest to r0
    let i0 = (0..graph.r.len())
        .min_by(|&a, &b| {
            (graph.r[a] - geo.r0)
                .abs()
                .total_cmp(&(graph.r[b] - geo.r0).abs())
        })
        .expect("graph nonempty");
    let t_r0 = graph.t_est[i0];
    if !t_r0.is_finite() {
        return Err(Error::Stage {
            stage: "geometry".into(),
            source: Box::new(Error::InsufficientGrowth {
                index: i0,
                peak: 0.0,
                floor: radial.fitting_floor,
            }),
        });
    }

    // energy classification: E0 of the similarity frames around (r0, T(r0))
    let slab = Arc::new(YGrid::clustered(129, 1e-3).stage("slab grid")?);
    let t_last = traj.times.last().copied().unwrap_or(0.0);
    let s_min = (-(t_r0.min(1.0)).ln()).max(0.0) + 0.2;
    let s_max = -((t_r0 - t_last.min(t_r0 * 0.999)).max(1e-6)).ln() - 0.2;
    let energy_series: Vec<(f64, f64)> = if s_max > s_min + 0.5 {
        let s_values: Vec<f64> = (0..12)
            .map(|i| s_min + (s_max - s_min) * i as f64 / 11.0)
            .collect();
        match to_similarity(&traj, geo.r0, t_r0, &s_values, slab) {
            Ok(wt) => wt
                .frames
                .iter()
                .map(|f| (f.s, crate::functionals::e0(f, spec.p)))
                .collect(),
            Err(_) => Vec::new(),
        }
    } else {
        Vec::new()
    };
    let e0_values: Vec<f64> = energy_series.iter().map(|&(_, e)| e).collect();
    let class = classify_point(&e0_values, spec.p, None);

    let sign = sign_rule(&traj, geo.r0 - geo.window, geo.r0 + geo.window, 0.0, geo.sign_tol);
    let cone_ok = cone_test(&graph, geo.r0, geo.delta0, geo.window, geo.fit_tol);
    let speed = speed_bound_check(&traj, geo.r0, t_r0, geo.k);
    writer.write_json(
        "geometry.json",
        &GeometryReport {
            r0: geo.r0,
            t_r0,
            energy_series,
            class,
            sign,
            sign_contradicts_energy: contradicts(class, sign),
            cone_ok,
            corner_left: corner_side(&graph, geo.r0, spec.p, geo.k, Side::Left, geo.min_decades),
            corner_right: corner_side(&graph, geo.r0, spec.p, geo.k, Side::Right, geo.min_decades),
            speed_c4: speed.c4_fit,
            speed_consistent: speed.blowup_consistent,
        },
    )
}

fn pipeline_energy(config: &ExperimentConfig, writer: &mut ArtifactWriter) -> Result<()> {
    let base = config.equation.build().stage("equation")?;
    let en = ExperimentConfig::section(&config.energy, "energy", config.experiment)?;
    let scaled = base.rescaled(en.lambda);
    let traj = radial_run(config, &scaled)?;
    let report = verify_energy_lemma(&traj, en.lambda, &base).stage("energy lemma")?;
    let rows = report
        .readouts
        .iter()
        .map(|r| vec![r.t, r.e_bar, r.boundary_cum, r.interior_cum]);
    writer.write("energy.csv", &csv("t,E_bar,boundary_cum,interior_cum", rows))?;
    writer.write_json("lemma.json", &report)
}

// ---- replay ----

#[derive(Debug, Clone, Serialize)]
pub struct ReplayReport {
    pub artifacts: usize,
    pub bytes_compared: usize,
}

static SCRATCH_COUNTER: AtomicU64 = AtomicU64::new(0);

fn scratch_dir(tag: &str) -> PathBuf {
    let n = SCRATCH_COUNTER.fetch_add(1, Ordering::Relaxed);
    std::env::temp_dir().join(format!("wavelab_{tag}_{}_{n}", std::process::id()))
}

/// Line number (1-based) of the first difference between two byte strings.
fn first_differing_row(a: &[u8], b: &[u8]) -> usize {
    let mut row = 1;
    for (x, y) in a.iter().zip(b.iter()) {
        if x != y {
            return row;
        }
        if *x == b'\n' {
            row += 1;
        }
    }
    // one is a prefix of the other
    row
}

/// Re-run the manifest's config into a scratch directory and byte-compare
/// every recorded artifact.  Detects tampered configs (hash check), missing
/// or modified artifacts, and any nondeterminism in the pipelines.
pub fn replay(manifest_path: &Path) -> Result<ReplayReport> {
    let body = std::fs::read_to_string(manifest_path).map_err(|_| Error::MissingInput {
        path: manifest_path.display().to_string(),
    })?;
    let manifest: Manifest = serde_json::from_str(&body)?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    if manifest.config.content_hash() != manifest.config_hash {
        return Err(Error::Mismatch {
            artifact: MANIFEST_NAME.into(),
            detail: "config does not match its recorded hash (tampered manifest)".into(),
        });
    }

    let scratch = scratch_dir("replay");
    let rerun = run_experiment_at(&manifest.config, &scratch);
    let result = rerun.and_then(|_| {
        let mut bytes = 0;
        for art in &manifest.outputs {
            let old_path = dir.join(&art.path);
            let old = std::fs::read(&old_path)
                .map_err(|_| Error::MissingInput { path: old_path.display().to_string() })?;
            if sha256_hex(&old) != art.sha256 {
                return Err(Error::Mismatch {
                    artifact: art.name.clone(),
                    detail: "artifact modified since it was recorded".into(),
                });
            }
            let new_path = scratch.join(&art.path);
            let new = std::fs::read(&new_path)
                .map_err(|_| Error::MissingInput { path: new_path.display().to_string() })?;
            if old != new {
                return Err(Error::Mismatch {
                    artifact: art.name.clone(),
                    detail: format!(
                        "replay diverges at row {}",
                        first_differing_row(&old, &new)
                    ),
                });
            }
            bytes += old.len();
        }
        Ok(ReplayReport { artifacts: manifest.outputs.len(), bytes_compared: bytes })
    });
    let _ = std::fs::remove_dir_all(&scratch);
    result
}
