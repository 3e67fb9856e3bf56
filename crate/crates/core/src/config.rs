//! Run configuration: a TOML file with the surface, the singular set in
//! chart coordinates, `ρ` and one table of options per command.
//!
//! ```toml
//! surface = "torus:128"
//! rho = 18.85
//! seed = 7
//!
//! [[singular]]
//! chart = [0.5, 0.5]
//! alpha = 0.6
//!
//! [solve]
//! method = "newton"
//! ```
//!
//! Every field has a default, so an empty file is a valid configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};
use crate::functional::MtVariant;
use crate::solver::Method;
use crate::surface::{Resolution, Surface, SurfaceKind};

/// `kind:n` or `kind:n1xn2`; `sphere:N` asks for about `N` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SurfaceSpec {
    pub kind: SurfaceKind,
    pub resolution: Resolution,
}

impl SurfaceSpec {
    pub fn build(&self) -> Result<Surface> {
        Surface::build(self.kind, self.resolution)
    }
}

impl FromStr for SurfaceSpec {
    type Err = LabError;

    fn from_str(text: &str) -> Result<Self> {
        let bad = || LabError::Usage(format!("surface spec {text:?}: expected torus:N, sphere:N, disk:RxA or kind:N1xN2"));
        let (kind, res) = text.trim().split_once(':').ok_or_else(bad)?;
        let kind = match kind.to_ascii_lowercase().as_str() {
            "torus" => SurfaceKind::FlatTorus,
            "sphere" => SurfaceKind::RoundSphere,
            "disk" => SurfaceKind::UnitDisk,
            _ => return Err(bad()),
        };
        let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
        let resolution = match res.split_once('x') {
            Some((a, b)) => Resolution::new(parse(a)?, parse(b)?),
            None => {
                let n = parse(res)?;
                match kind {
                    SurfaceKind::RoundSphere => Resolution::sphere_with_nodes(n),
                    SurfaceKind::UnitDisk => Resolution::new(n, 2 * n),
                    SurfaceKind::FlatTorus => Resolution::square(n),
                }
            }
        };
        Ok(SurfaceSpec { kind, resolution })
    }
}

impl fmt::Display for SurfaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            SurfaceKind::FlatTorus => "torus",
            SurfaceKind::RoundSphere => "sphere",
            SurfaceKind::UnitDisk => "disk",
        };
        write!(f, "{kind}:{}x{}", self.resolution.n1, self.resolution.n2)
    }
}

impl Serialize for SurfaceSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SurfaceSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A vortex point in chart coordinates: torus `(x, y) ∈ [0,1)²`, sphere
/// `(θ, φ)`, disk cartesian `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingularSpec {
    pub chart: [f64; 2],
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BubbleOptions {
    pub alphas: Vec<f64>,
    pub center: [f64; 2],
    pub lambda_min: f64,
    /// Defaults to the resolution limit of the grid at `center`.
    pub lambda_max: Option<f64>,
    pub points: usize,
    pub energy_tolerance: f64,
    pub mean_tolerance: f64,
    /// Radius for the outside-mass column.
    pub eps: f64,
}

impl Default for BubbleOptions {
    fn default() -> Self {
        BubbleOptions {
            alphas: vec![0.0, 0.5, 1.0],
            center: [0.5, 0.5],
            lambda_min: 10.0,
            lambda_max: None,
            points: 12,
            energy_tolerance: 0.05,
            mean_tolerance: 0.03,
            eps: 0.1,
        }
    }
}

/// Weight inside the logarithm of a deficit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum WeightSpec {
    None,
    /// `h̃` of the configured singular set.
    TildeH,
    /// `|x - center|^{2α}` with the distance to the family center.
    Power { alpha: f64 },
}

/// What a family is expected to show.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Expectation {
    /// The stabilization rule holds for the running maximum.
    Bounded,
    /// The stabilization rule fails for the running maximum.
    Unbounded,
    /// The maximum over `λ ≥ reference` exceeds the value at `reference` by
    /// more than `margin`.
    Exceeds { reference: f64, margin: f64 },
    /// Least-squares slope of `log ∫ w e^{2u} - 2⨍u` against the Dirichlet
    /// energy, relative to `target`.
    GrowthRate { target: f64, tolerance: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtFamily {
    pub id: String,
    /// Overrides the run surface.
    #[serde(default)]
    pub surface: Option<SurfaceSpec>,
    pub center: [f64; 2],
    #[serde(default)]
    pub bubble_alpha: f64,
    pub variant: MtVariant,
    #[serde(default = "weight_none")]
    pub weight: WeightSpec,
    pub coeff: f64,
    #[serde(default = "one")]
    pub lambda_min: f64,
    #[serde(default)]
    pub lambda_max: Option<f64>,
    #[serde(default = "points_default")]
    pub points: usize,
    pub expect: Expectation,
}

/// A family for the bounded-below probe of `I_ρ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeFamily {
    pub id: String,
    #[serde(default)]
    pub surface: Option<SurfaceSpec>,
    pub center: [f64; 2],
    #[serde(default)]
    pub bubble_alpha: f64,
    pub rho: f64,
    /// The vortex whose barycenter condition is imposed (index into
    /// `singular`).
    #[serde(default)]
    pub target: usize,
    #[serde(default = "yes")]
    pub require_barycenter: bool,
    #[serde(default = "one")]
    pub lambda_min: f64,
    #[serde(default)]
    pub lambda_max: Option<f64>,
    #[serde(default = "points_default")]
    pub points: usize,
    pub expect_bounded: bool,
}

fn weight_none() -> WeightSpec {
    WeightSpec::None
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn points_default() -> usize {
    25
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MtOptions {
    pub families: Vec<MtFamily>,
    pub probes: Vec<ProbeFamily>,
}

/// Densities for the concentration command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum DensityKind {
    Uniform,
    /// `h̃ e^{2φ}` normalized, `φ` a bubble.
    Bubble { center: [f64; 2], lambda: f64, #[serde(default)] alpha: f64 },
    /// Sum of Gaussian bumps of the given width.
    Bumps { centers: Vec<[f64; 2]>, width: f64 },
    /// `exp` of a random smooth field with `modes` Fourier modes of
    /// amplitude `amplitude`, seeded from the run seed.
    LogNormal { modes: usize, amplitude: f64 },
}

/// Extra checks attached to a density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum DensityCheck {
    /// `σ = π/5 ± cells` and `T = (1 - cos(π/5))/2 ± t_tolerance` at every
    /// node (uniform density on the unit sphere, `C1 = 4`).
    UniformSphere { cells: f64, t_tolerance: f64 },
    /// `dist(β, chart) ≤ cells · h`.
    BetaNear { chart: [f64; 2], cells: f64 },
    /// `|η| < tolerance` and `β` is the node at `chart`.
    RadialCenter { chart: [f64; 2], tolerance: f64 },
    /// Torus lattice shift `(di, dj)`: `β` moves with the density within
    /// `cells`.
    ShiftEquivariance { di: usize, dj: usize, cells: f64 },
    /// The degenerate-symmetry flag is raised.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub id: String,
    #[serde(default)]
    pub surface: Option<SurfaceSpec>,
    pub density: DensityKind,
    #[serde(default = "yes")]
    pub check_identity: bool,
    #[serde(default)]
    pub checks: Vec<DensityCheck>,
    /// Write σ and T heat maps.
    #[serde(default = "yes")]
    pub heatmaps: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcOptions {
    pub c1: f64,
    /// Fixed τ; by default `1/(2(k+2))` from the measured covering number.
    pub tau: Option<f64>,
    /// Random node pairs for the pairwise σ bound.
    pub pairs: usize,
    /// Slack of the pairwise bound, in grid cells.
    pub pair_slack_cells: f64,
    pub densities: Vec<DensitySpec>,
}

impl Default for ConcOptions {
    fn default() -> Self {
        ConcOptions { c1: 4.0, tau: None, pairs: 1000, pair_slack_cells: 2.0, densities: Vec::new() }
    }
}

/// Initial guess for a solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum InitialGuess {
    Zero,
    /// Newton from regular bubbles at a `lattice × lattice` chart lattice in
    /// `Θ_ρ` (torus).
    Bubbles { lambdas: Vec<f64>, lattice: usize, exclusion: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub method: Method,
    pub tol: f64,
    pub max_iter: usize,
    pub initial: InitialGuess,
    /// Torus only: solve first on this coarser grid, then interpolate.
    pub coarse: Option<usize>,
    /// Check `∫ h e^{2w} = 1` to this tolerance after undoing the change of
    /// variables.
    pub normalization_tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: Method::Newton,
            tol: 1e-8,
            max_iter: 200,
            initial: InitialGuess::Zero,
            coarse: None,
            normalization_tolerance: 1e-8,
        }
    }
}

/// `ρ` values for a continuation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum RhoGrid {
    List { values: Vec<f64> },
    /// `target (1 - (1 - start/target) ratio^k)`, `k = 0..count`.
    Approach { start: f64, target: f64, ratio: f64, count: usize },
    /// `count` equally spaced values in `[from, to]`.
    Linear { from: f64, to: f64, count: usize },
}

impl RhoGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            RhoGrid::List { values } => values.clone(),
            RhoGrid::Approach { start, target, ratio, count } => {
                (0..*count).map(|k| target * (1.0 - (1.0 - start / target) * ratio.powi(k as i32))).collect()
            }
            RhoGrid::Linear { from, to, count } => {
                let n = (*count).max(2);
                (0..*count).map(|k| from + (to - from) * k as f64 / (n - 1) as f64).collect()
            }
        }
    }
}

/// What the scan should establish.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ScanCheck {
    /// Local mass at the last resolved record against `target`; `ball` 0 is
    /// the running maximum, `j + 1` the `j`-th vortex.
    Quantization { ball: usize, target: f64, tolerance: f64 },
    /// Uniform sup-norm bound of the solutions inside `window`.
    Compactness { window: [f64; 2] },
    /// No record converges (qualitative).
    Nonexistence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanOptions {
    pub grid: RhoGrid,
    pub method: Method,
    pub tol: f64,
    pub max_iter: usize,
    /// Ball radius in concentration lengths.
    pub lengths: f64,
    pub refinements: usize,
    pub continue_after_failure: bool,
    pub checks: Vec<ScanCheck>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            grid: RhoGrid::List { values: Vec::new() },
            method: Method::Newton,
            tol: 1e-9,
            max_iter: 80,
            lengths: 8.0,
            refinements: 6,
            continue_after_failure: false,
            checks: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub surface: Option<SurfaceSpec>,
    pub singular: Vec<SingularSpec>,
    pub rho: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
    pub bubble: BubbleOptions,
    pub mt: MtOptions,
    pub conc: ConcOptions,
    pub solve: SolveOptions,
    pub scan: ScanOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            surface: None,
            singular: Vec::new(),
            rho: None,
            seed: 0,
            out: PathBuf::from("out"),
            bubble: BubbleOptions::default(),
            mt: MtOptions::default(),
            conc: ConcOptions::default(),
            solve: SolveOptions::default(),
            scan: ScanOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// The run surface, or a usage error when none is given.
    pub fn surface_spec(&self) -> Result<SurfaceSpec> {
        self.surface.ok_or_else(|| LabError::Usage("no surface given (use --surface kind:N or `surface` in the config)".into()))
    }

    pub fn rho(&self) -> Result<f64> {
        self.rho.ok_or_else(|| LabError::Usage("no rho given (use --rho or `rho` in the config)".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surface_specs() {
        let t: SurfaceSpec = "torus:256".parse().unwrap();
        assert_eq!(t.resolution, Resolution::square(256));
        assert_eq!(t.to_string(), "torus:256x256");
        let s: SurfaceSpec = "sphere:4096".parse().unwrap();
        assert_eq!(s.resolution, Resolution::new(45, 90));
        assert_eq!(s.to_string().parse::<SurfaceSpec>().unwrap(), s);
        assert!("cube:3".parse::<SurfaceSpec>().is_err());
        assert!("torus".parse::<SurfaceSpec>().is_err());
    }

    #[test]
    fn empty_config_is_valid() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert!(c.surface_spec().is_err());
    }

    #[test]
    fn config_roundtrips() {
        let text = r#"
surface = "torus:64"
rho = 6.0
seed = 3
[[singular]]
chart = [0.5, 0.25]
alpha = 0.5
[[mt.families]]
id = "f"
center = [0.5, 0.5]
variant = "closed"
coeff = 0.07
expect = { kind = "exceeds", reference = 10.0, margin = 10.0 }
[[conc.densities]]
id = "b"
density = { kind = "bubble", center = [0.3, 0.7], lambda = 1000.0 }
checks = [{ kind = "beta_near", chart = [0.3, 0.7], cells = 3.0 }]
[scan]
grid = { kind = "approach", start = 6.0, target = 12.0, ratio = 0.75, count = 4 }
checks = [{ kind = "quantization", ball = 0, target = 12.5, tolerance = 0.1 }]
"#;
        let c = RunConfig::from_toml(text).unwrap();
        let again = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.scan.grid.values().len(), 4);
        assert!(RunConfig::from_toml("unknown = 1").is_err());
    }
}
