//! Run configuration: a JSON file merged with command-line overrides.

use std::path::{Path, PathBuf};

use nc_sigma::instanton::InstantonConfig;
use nc_sigma::module::{HermitianVariant, ModuleGeometry};
use nc_sigma::tolerances::Tolerances;
use nc_sigma::C64;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Default deformation parameter when no geometry is given.
pub const DEFAULT_THETA: f64 = 0.37;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Build,
    Verify,
    Flow,
    Scan,
    Selftest,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Build => "build",
            Mode::Verify => "verify",
            Mode::Flow => "flow",
            Mode::Scan => "scan",
            Mode::Selftest => "selftest",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSettings {
    /// Initial step; `None` picks the explicit-Euler stability limit.
    pub step: Option<f64>,
    pub max_steps: usize,
    pub purify_every: usize,
    pub stop_grad_tol: f64,
    pub min_step: f64,
    /// ℓ¹ size of the random tangent kick applied to the start.
    pub perturb_amplitude: f64,
    pub perturb_radius: usize,
    /// Final `bp_gap` required for success.
    pub bp_gap_tol: f64,
    /// Start from this projection file instead of a built instanton.
    pub input: Option<PathBuf>,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self {
            step: None,
            max_steps: 300,
            purify_every: 1,
            stop_grad_tol: 1e-6,
            min_step: 1e-12,
            perturb_amplitude: 1e-2,
            perturb_radius: 2,
            bp_gap_tol: 1e-2,
            input: None,
        }
    }
}

/// Which scan rows get a full projection report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportLevel {
    All,
    Base,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSettings {
    /// `n × n` grid of `λ = (i/n) L1 + (j/n) L2` over the gauge-lattice cell.
    pub grid: usize,
    /// Extra explicit `λ` values `[re, im]`.
    pub lambdas: Vec<[f64; 2]>,
    /// Amplitude vectors to combine with every `λ`; empty means the
    /// configured amplitudes.
    pub amplitude_sets: Vec<Vec<[f64; 2]>>,
    /// Add the four lattice translates `±(1,0), ±(0,1)` of each base point.
    pub lattice_duplicates: bool,
    /// Add a globally phase-rotated copy of each base point.
    pub phase_duplicates: bool,
    pub reports: ReportLevel,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            grid: 4,
            lambdas: Vec::new(),
            amplitude_sets: Vec::new(),
            lattice_duplicates: true,
            phase_duplicates: false,
            reports: ReportLevel::Base,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelftestSettings {
    pub window: usize,
    pub variant: HermitianVariant,
}

impl Default for SelftestSettings {
    fn default() -> Self {
        Self {
            window: 8,
            variant: HermitianVariant::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub r: Option<i64>,
    pub q: Option<i64>,
    pub alpha: Option<f64>,
    pub theta: Option<f64>,
    /// `[re, im]`.
    pub tau: [f64; 2],
    pub lambda: [f64; 2],
    /// `A_k` as `[re, im]`; defaults to `(1, 0, …, 0)`.
    pub amplitudes: Option<Vec<[f64; 2]>>,
    pub window: usize,
    pub tolerances: Tolerances,
    pub out: PathBuf,
    pub seed: u64,
    /// Projection file for `verify` (and `flow`, unless `flow.input` is set).
    pub input: Option<PathBuf>,
    pub flow: FlowSettings,
    pub scan: ScanSettings,
    pub selftest: SelftestSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: None,
            r: None,
            q: None,
            alpha: None,
            theta: None,
            tau: [0.0, 1.0],
            lambda: [0.0, 0.0],
            amplitudes: None,
            window: 16,
            tolerances: Tolerances::default(),
            out: PathBuf::from("out"),
            seed: 0,
            input: None,
            flow: FlowSettings::default(),
            scan: ScanSettings::default(),
            selftest: SelftestSettings::default(),
        }
    }
}

/// Command-line overrides; `None` leaves the file value alone.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub theta: Option<f64>,
    pub tau_re: Option<f64>,
    pub tau_im: Option<f64>,
    pub r: Option<i64>,
    pub q: Option<i64>,
    pub alpha: Option<f64>,
    pub lambda_re: Option<f64>,
    pub lambda_im: Option<f64>,
    pub window: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub input: Option<PathBuf>,
    pub variant: Option<HermitianVariant>,
}

fn c64(v: [f64; 2]) -> C64 {
    C64::new(v[0], v[1])
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies flag overrides. A geometry flag replaces the geometry
    /// selection of the file: `--theta` drops a file `alpha` and vice versa.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(t) = o.theta {
            self.theta = Some(t);
            if o.alpha.is_none() {
                self.alpha = None;
            }
        }
        if let Some(a) = o.alpha {
            self.alpha = Some(a);
            if o.theta.is_none() {
                self.theta = None;
            }
        }
        if o.r.is_some() {
            self.r = o.r;
        }
        if o.q.is_some() {
            self.q = o.q;
        }
        if let Some(v) = o.tau_re {
            self.tau[0] = v;
        }
        if let Some(v) = o.tau_im {
            self.tau[1] = v;
        }
        if let Some(v) = o.lambda_re {
            self.lambda[0] = v;
        }
        if let Some(v) = o.lambda_im {
            self.lambda[1] = v;
        }
        if let Some(w) = o.window {
            self.window = w;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.input {
            self.input = Some(p.clone());
        }
        if let Some(v) = o.variant {
            self.selftest.variant = v;
        }
    }

    pub fn tau(&self) -> C64 {
        c64(self.tau)
    }

    pub fn lambda(&self) -> C64 {
        c64(self.lambda)
    }

    /// Checks the invariants that do not need any numerics.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tau[1] > 0.0) || !self.tau[0].is_finite() || !self.tau[1].is_finite() {
            return Err(CliError::Config(format!("Im tau must be positive, got {:?}", self.tau)));
        }
        if self.window < 4 {
            return Err(CliError::Config(format!("window must be at least 4, got {}", self.window)));
        }
        if self.alpha.is_some() && self.theta.is_some() {
            return Err(CliError::Config(
                "give either alpha (with r, q) or theta, not both".into(),
            ));
        }
        if self.alpha.is_none() && (self.r.is_some() || self.q.is_some()) && self.theta.is_none() {
            return Err(CliError::Config("r and q need alpha or theta".into()));
        }
        if !self.lambda.iter().all(|x| x.is_finite()) {
            return Err(CliError::Config("lambda must be finite".into()));
        }
        Ok(())
    }

    /// Module geometry. With a direct `θ`, `α` is solved from
    /// `θ = (aα + b)/(−qα + r)` for the given (default Boca) `(r, q)`.
    pub fn geometry(&self) -> Result<ModuleGeometry, CliError> {
        self.validate()?;
        let r = self.r.unwrap_or(0);
        let q = self.q.unwrap_or(1);
        let geometry = match (self.alpha, self.theta) {
            (Some(alpha), None) => ModuleGeometry::from_alpha(r, q, alpha),
            (None, theta) => {
                let theta = theta.unwrap_or(DEFAULT_THETA);
                if (r, q) == (0, 1) {
                    ModuleGeometry::boca(theta)
                } else {
                    let (a, b) = nc_sigma::module::canonical_bezout(r, q).map_err(CliError::from_core)?;
                    let denom = q as f64 * theta + a as f64;
                    if denom == 0.0 {
                        return Err(CliError::Config(format!(
                            "theta = {theta} is not reachable from (r, q) = ({r}, {q})"
                        )));
                    }
                    ModuleGeometry::from_alpha(r, q, (r as f64 * theta - b as f64) / denom)
                }
            }
            (Some(_), Some(_)) => unreachable!("rejected by validate"),
        };
        geometry.map_err(CliError::from_core)
    }

    pub fn amplitudes(&self, q: i64) -> Result<Vec<C64>, CliError> {
        match &self.amplitudes {
            Some(a) => {
                if a.len() != q as usize {
                    return Err(CliError::Config(format!(
                        "expected {q} amplitudes, got {}",
                        a.len()
                    )));
                }
                Ok(a.iter().copied().map(c64).collect())
            }
            None => {
                let mut a = vec![C64::new(0.0, 0.0); q as usize];
                a[0] = C64::new(1.0, 0.0);
                Ok(a)
            }
        }
    }

    pub fn instanton(&self) -> Result<InstantonConfig, CliError> {
        let g = self.geometry()?;
        InstantonConfig::new(
            g,
            self.tau(),
            self.lambda(),
            &self.amplitudes(g.q)?,
            self.window,
            self.tolerances.clone(),
        )
        .map_err(CliError::from_core)
    }
}

pub fn parse_amplitudes(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().copied().map(c64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_boca() {
        let g = RunConfig::default().geometry().unwrap();
        assert_eq!((g.r, g.q), (0, 1));
        assert!((g.theta - DEFAULT_THETA).abs() < 1e-15);
    }

    #[test]
    fn direct_theta_for_general_module() {
        let cfg = RunConfig {
            r: Some(-1),
            q: Some(2),
            theta: Some(0.7272727272727273),
            ..RunConfig::default()
        };
        let g = cfg.geometry().unwrap();
        assert!((g.alpha + 1.6).abs() < 1e-12, "{g:?}");
    }

    #[test]
    fn flags_replace_geometry_choice() {
        let mut cfg = RunConfig {
            alpha: Some(-2.0),
            ..RunConfig::default()
        };
        cfg.apply(&Overrides {
            theta: Some(0.4),
            ..Overrides::default()
        });
        assert_eq!(cfg.alpha, None);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn rejects_inconsistent_input() {
        let both = RunConfig {
            alpha: Some(-2.0),
            theta: Some(0.5),
            ..RunConfig::default()
        };
        assert!(both.validate().is_err());
        let flat = RunConfig {
            tau: [0.0, 0.0],
            ..RunConfig::default()
        };
        assert!(flat.validate().is_err());
        let tiny = RunConfig {
            window: 3,
            ..RunConfig::default()
        };
        assert!(tiny.validate().is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
