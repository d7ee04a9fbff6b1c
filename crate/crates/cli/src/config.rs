use std::path::{Path, PathBuf};

use innermatch::fixtures::{CylinderParams, TorusParams, VaseParams};
use innermatch::registration::InitPolicy;
use innermatch::statistics::MeanOptions;
use innermatch::{KineticGradient, RegistrationConfig, Topology};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub topology: Topology,
    pub nx: usize,
    pub ny: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            topology: Topology::Cylinder,
            nx: 16,
            ny: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriangleConfig {
    /// Rotation angle relating the three tori.
    pub angle_deg: f64,
}

impl Default for TriangleConfig {
    fn default() -> Self {
        TriangleConfig { angle_deg: 40.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    pub obj: bool,
    pub frames: bool,
}

impl Default for ExportConfig {
    fn default() -> Self {
        ExportConfig { obj: true, frames: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub directions: usize,
    /// Magnitude of the random initial velocity.
    pub velocity_scale: f64,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            directions: 10,
            velocity_scale: 0.1,
            tolerance: 1e-5,
        }
    }
}

/// Everything a run depends on besides its input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output: PathBuf,
    pub mesh: MeshConfig,
    pub registration: RegistrationConfig,
    /// Template cylinder.
    pub cylinder: CylinderParams,
    /// Bent target cylinder.
    pub bent_cylinder: CylinderParams,
    pub torus: TorusParams,
    pub triangle: TriangleConfig,
    pub vases: Vec<VaseParams>,
    pub mean: MeanOptions,
    pub export: ExportConfig,
    pub gradcheck: GradcheckConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            output: PathBuf::from("out"),
            mesh: MeshConfig::default(),
            registration: RegistrationConfig::default(),
            cylinder: CylinderParams::straight(),
            bent_cylinder: CylinderParams::bent(),
            torus: TorusParams::default(),
            triangle: TriangleConfig::default(),
            vases: VaseParams::family(),
            mean: MeanOptions::default(),
            export: ExportConfig::default(),
            gradcheck: GradcheckConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Command-line values that replace config entries when given.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// TOML configuration file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub topology: Option<Topology>,
    #[arg(long, global = true)]
    pub nx: Option<usize>,
    #[arg(long, global = true)]
    pub ny: Option<usize>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Time steps N.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    #[arg(long, global = true)]
    pub step_eps: Option<f64>,
    #[arg(long, global = true)]
    pub tol_grad: Option<f64>,
    #[arg(long, global = true)]
    pub tol_grad_rel: Option<f64>,
    #[arg(long, global = true)]
    pub tol_match: Option<f64>,
    #[arg(long, global = true, value_parser = parse_init)]
    pub init: Option<InitPolicy>,
    /// Plain fixed-step descent without line search.
    #[arg(long, global = true)]
    pub fixed_step: bool,
    #[arg(long, global = true, value_parser = parse_kinetic)]
    pub kinetic_gradient: Option<KineticGradient>,
    /// Threads for independent registrations.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Skip OBJ and per-frame exports.
    #[arg(long, global = true)]
    pub no_export: bool,
}

fn parse_init(s: &str) -> Result<InitPolicy, String> {
    match s {
        "zero" => Ok(InitPolicy::Zero),
        "l2diff" => Ok(InitPolicy::L2diff),
        _ => Err(format!("unknown init policy `{s}` (zero, l2diff)")),
    }
}

fn parse_kinetic(s: &str) -> Result<KineticGradient, String> {
    match s {
        "exact" => Ok(KineticGradient::Exact),
        "conserved" => Ok(KineticGradient::Conserved),
        _ => Err(format!("unknown kinetic gradient `{s}` (exact, conserved)")),
    }
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:ident => $target:expr) => {
                if let Some(v) = self.$field.clone() {
                    $target = v;
                }
            };
        }
        set!(seed => c.seed);
        set!(output => c.output);
        set!(topology => c.mesh.topology);
        set!(nx => c.mesh.nx);
        set!(ny => c.mesh.ny);
        let r = &mut c.registration;
        set!(alpha => r.alpha);
        set!(sigma => r.sigma);
        set!(steps => r.steps);
        set!(max_iters => r.max_iters);
        set!(step_eps => r.step_eps);
        set!(tol_grad => r.tol_grad);
        set!(init => r.init);
        set!(kinetic_gradient => r.kinetic_gradient);
        if self.tol_grad_rel.is_some() {
            r.tol_grad_rel = self.tol_grad_rel;
        }
        if self.tol_match.is_some() {
            r.tol_match = self.tol_match;
        }
        if self.fixed_step {
            r.fixed_step = true;
        }
        if self.jobs.is_some() {
            c.mean.jobs = self.jobs;
        }
        if self.no_export {
            c.export = ExportConfig { obj: false, frames: false };
        }
        c.registration
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(c)
    }
}
