//! Scenario configuration: TOML schema, validation and hashing.
//!
//! Rates are in units of `Γ` and times in the dimensionless `NΓt`.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::angular::{basis_change, Axis};
use crate::error::{Error, Result};
use crate::generator::{GeneratorSpec, Zeeman};
use crate::level::LevelStructure;
use crate::lindblad::Coherences;
use crate::operators::{Channel, CollectiveOp};
use crate::semiclassical::{lattice_groups, Decoupling, SiteGroup};
use crate::symspace::Limits;

/// A scalar or a list of values; lists become sweep axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ed,
    Mf,
    Twa,
    Cumulant,
    ThetaOde,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ed => "ed",
            Method::Mf => "mf",
            Method::Twa => "twa",
            Method::Cumulant => "cumulant",
            Method::ThetaOde => "theta-ode",
        }
    }
}

/// Initial single-atom ground state, by level label or amplitude list, in
/// the basis of `axis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub axis: Axis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// `[re, im]` pairs, one per level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub channel: Channel,
    /// Pulse area `θ₀ = |Ω|τ` in units of `π`.
    pub theta0_pi: OneOrMany<f64>,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub lambda_l: f64,
    pub lambda_c: f64,
    pub n_sites: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SitesConfig {
    /// Explicit coupling weights `ξ_i`, equal atom number per site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub gamma: f64,
    pub chi: f64,
    pub delta_g: f64,
    pub delta_e: f64,
    /// Single Zeeman knob `δ_g = δ_z`, `δ_e = 3δ_z/2`; overrides the pair.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_z: Option<f64>,
    pub channels: Vec<Channel>,
    /// Quantization axis used for the computation.
    pub basis: Axis,
    pub decoupling: Decoupling,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sites: Option<SitesConfig>,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            gamma: 1.0,
            chi: 0.0,
            delta_g: 0.0,
            delta_e: 0.0,
            delta_z: None,
            channels: vec![Channel::Pi, Channel::Sigma],
            basis: Axis::V,
            decoupling: Decoupling::Factorized,
            sites: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationConfig {
    /// Final time in units of `1/(NΓ)`.
    pub t_max: f64,
    /// Number of output times, including `t = 0`.
    pub samples: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            t_max: 20.0,
            samples: 201,
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwaConfig {
    pub n_traj: usize,
    pub seed: u64,
    /// Bins of the final excitation histogram; zero disables it.
    pub histogram_bins: usize,
}

impl Default for TwaConfig {
    fn default() -> Self {
        TwaConfig {
            n_traj: 1000,
            seed: 0,
            histogram_bins: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdConfig {
    pub max_basis: usize,
    pub coherences: Coherences,
    /// Write the final excitation distribution.
    pub distributions: bool,
    /// Two ground labels (in the computation basis) whose final population
    /// imbalance distribution is written.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imbalance: Option<[String; 2]>,
}

impl Default for EdConfig {
    fn default() -> Self {
        EdConfig {
            max_basis: Limits::default().max_basis,
            coherences: Coherences::Full,
            distributions: false,
            imbalance: None,
        }
    }
}

/// Extra sweep axes; an empty section means a single cell.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub delta_z: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub chi: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub n_sites: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub seed: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    /// Scan window in units of `π`.
    pub window_pi: [f64; 2],
    pub points: usize,
    /// Channel of the orthogonal potential; defaults to the partner of the
    /// drive channel.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orthogonal: Option<Channel>,
    pub dark_search: bool,
    pub starts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excited_fraction: Option<f64>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig {
            window_pi: [0.0, 8.0],
            points: 2001,
            orthogonal: None,
            dark_search: false,
            starts: 256,
            excited_fraction: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    /// Decay channels in the ∥ basis.
    pub channels: Vec<Channel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_e: Option<u32>,
    pub dark_only: bool,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            channels: vec![Channel::L, Channel::R],
            n_e: None,
            dark_only: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub prefix: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            prefix: "run".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub atoms: OneOrMany<u32>,
    pub method: Method,
    pub level: LevelStructure,
    pub initial: InitialState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveConfig>,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub twa: TwaConfig,
    #[serde(default)]
    pub ed: EdConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// One point of the sweep grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub index: usize,
    pub atoms: u32,
    pub theta0_pi: f64,
    pub delta_z: Option<f64>,
    pub chi: f64,
    pub n_sites: Option<usize>,
    pub seed: u64,
}

impl Cell {
    /// File-name fragment identifying the cell.
    pub fn tag(&self) -> String {
        let mut s = format!("N{}_th{}", self.atoms, self.theta0_pi);
        if let Some(dz) = self.delta_z {
            s += &format!("_dz{dz}");
        }
        s += &format!("_chi{}", self.chi);
        if let Some(ns) = self.n_sites {
            s += &format!("_sites{ns}");
        }
        s + &format!("_seed{}", self.seed)
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Every problem at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let atoms = self.atoms.values();
        if atoms.is_empty() {
            errs.push("atoms: empty list".to_string());
        }
        if atoms.contains(&0) {
            errs.push("atoms: N must be at least 1".into());
        }
        if let Err(e) = self.single_atom_state() {
            errs.push(format!("initial: {e}"));
        }
        match &self.drive {
            Some(d) => {
                if d.theta0_pi.values().is_empty() {
                    errs.push("drive.theta0_pi: empty list".into());
                }
                if d.theta0_pi.values().iter().any(|t| !t.is_finite()) || !d.phase.is_finite() {
                    errs.push("drive: pulse area and phase must be finite".into());
                }
            }
            None if self.method == Method::ThetaOde => errs.push("method theta-ode needs a [drive] section".into()),
            None => {}
        }
        let p = &self.physics;
        if !(p.gamma > 0.0 && p.gamma.is_finite()) {
            errs.push(format!("physics.gamma must be positive, got {}", p.gamma));
        }
        for (name, x) in [("chi", p.chi), ("delta_g", p.delta_g), ("delta_e", p.delta_e)] {
            if !x.is_finite() {
                errs.push(format!("physics.{name} must be finite"));
            }
        }
        if p.delta_z.is_some() && (p.delta_g != 0.0 || p.delta_e != 0.0) {
            errs.push("physics: give either delta_z or delta_g/delta_e, not both".into());
        }
        if p.channels.is_empty() && self.method != Method::ThetaOde {
            errs.push("physics.channels: at least one decay channel is required".into());
        }
        let mut seen = p.channels.clone();
        seen.sort_by_key(|c| c.name());
        seen.dedup();
        if seen.len() != p.channels.len() {
            errs.push("physics.channels: duplicate channel".into());
        }
        if let Some(s) = &p.sites {
            match (&s.weights, &s.lattice) {
                (Some(_), Some(_)) => errs.push("physics.sites: give either weights or lattice".into()),
                (None, None) => errs.push("physics.sites: needs weights or lattice".into()),
                (Some(w), None) if w.is_empty() || w.iter().any(|x| !x.is_finite()) => errs.push("physics.sites.weights: need finite values".into()),
                (None, Some(l)) if !(l.lambda_l > 0.0 && l.lambda_c > 0.0) || l.n_sites == 0 => {
                    errs.push("physics.sites.lattice: wavelengths must be positive and n_sites ≥ 1".into())
                }
                _ => {}
            }
        }
        if !self.sweep.n_sites.is_empty() && p.sites.as_ref().and_then(|s| s.lattice.as_ref()).is_none() {
            errs.push("sweep.n_sites needs physics.sites.lattice".into());
        }
        if !self.sweep.delta_z.is_empty() && (p.delta_g != 0.0 || p.delta_e != 0.0) {
            errs.push("sweep.delta_z conflicts with physics.delta_g/delta_e".into());
        }
        match self.method {
            Method::Cumulant if p.sites.is_some() => errs.push("method cumulant supports homogeneous coupling only".into()),
            Method::Cumulant if p.decoupling != Decoupling::Factorized => errs.push("method cumulant ignores physics.decoupling; leave it factorized".into()),
            Method::Ed if p.sites.is_some() => errs.push("method ed supports homogeneous coupling only".into()),
            Method::ThetaOde => {
                if let Some(d) = &self.drive {
                    if p.channels != [d.channel] {
                        errs.push(format!("method theta-ode needs physics.channels = [\"{}\"], the drive channel", d.channel.name()));
                    }
                }
                if p.chi != 0.0 || !self.sweep.chi.is_empty() || p.delta_z.is_some_and(|z| z != 0.0) || p.delta_g != 0.0 || p.delta_e != 0.0 || !self.sweep.delta_z.is_empty() {
                    errs.push("method theta-ode needs χ = 0 and no Zeeman shifts".into());
                }
            }
            _ => {}
        }
        let it = &self.integration;
        if !(it.t_max >= 0.0 && it.t_max.is_finite()) {
            errs.push("integration.t_max must be finite and non-negative".into());
        }
        if it.samples < 2 {
            errs.push("integration.samples must be at least 2".into());
        }
        if !(it.rtol > 0.0 && it.atol > 0.0) {
            errs.push("integration: tolerances must be positive".into());
        }
        if self.method == Method::Twa && self.twa.n_traj == 0 {
            errs.push("twa.n_traj must be positive".into());
        }
        if let Some(pair) = &self.ed.imbalance {
            for l in pair {
                match self.level.parse_label(l) {
                    Ok(i) if self.level.is_excited(i) => errs.push(format!("ed.imbalance: '{l}' is not a ground level")),
                    Ok(_) => {}
                    Err(e) => errs.push(format!("ed.imbalance: {e}")),
                }
            }
        }
        let pc = &self.potential;
        if !(pc.window_pi[0] < pc.window_pi[1]) || pc.points < 2 {
            errs.push("potential: window must be increasing with at least 2 points".into());
        }
        if let Some(f) = pc.excited_fraction {
            if !(0.0..=1.0).contains(&f) {
                errs.push("potential.excited_fraction must lie in [0, 1]".into());
            }
        }
        if self.spectrum.channels.is_empty() {
            errs.push("spectrum.channels: at least one channel is required".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Normalized single-atom ground state in the computation basis.
    pub fn single_atom_state(&self) -> Result<Vec<Complex64>> {
        let l = &self.level;
        let init = &self.initial;
        let v = match (&init.label, &init.amplitudes) {
            (Some(label), None) => {
                let idx = l.parse_label(label)?;
                let mut v = DVector::zeros(l.ell());
                v[idx] = Complex64::new(1.0, 0.0);
                v
            }
            (None, Some(a)) => {
                if a.len() != l.ell() {
                    return Err(Error::domain(format!("{} amplitudes given, the level structure has {}", a.len(), l.ell())));
                }
                let v = DVector::from_iterator(a.len(), a.iter().map(|[re, im]| Complex64::new(*re, *im)));
                let n = v.norm();
                if (n - 1.0).abs() > 1e-9 {
                    return Err(Error::domain(format!("amplitudes have norm {n}, expected 1")));
                }
                v
            }
            _ => return Err(Error::domain("give exactly one of label or amplitudes")),
        };
        if l.excited_indices().any(|i| v[i].norm() > 1e-12) {
            return Err(Error::domain("the initial state must lie in the ground manifold"));
        }
        let out = basis_change(l, init.axis, self.physics.basis) * v;
        Ok(out.iter().copied().collect())
    }

    /// Cartesian product of every list-valued axis, in a fixed order.
    pub fn cells(&self) -> Vec<Cell> {
        let atoms = self.atoms.values();
        let thetas = self.drive.as_ref().map_or(vec![0.0], |d| d.theta0_pi.values());
        let dz: Vec<Option<f64>> = if self.sweep.delta_z.is_empty() {
            vec![self.physics.delta_z]
        } else {
            self.sweep.delta_z.iter().map(|&x| Some(x)).collect()
        };
        let chi = if self.sweep.chi.is_empty() { vec![self.physics.chi] } else { self.sweep.chi.clone() };
        let lattice_sites = self.physics.sites.as_ref().and_then(|s| s.lattice.as_ref()).map(|l| l.n_sites);
        let sites: Vec<Option<usize>> = if self.sweep.n_sites.is_empty() {
            vec![lattice_sites]
        } else {
            self.sweep.n_sites.iter().map(|&x| Some(x)).collect()
        };
        let seeds = if self.sweep.seed.is_empty() { vec![self.twa.seed] } else { self.sweep.seed.clone() };
        let mut out = Vec::new();
        for &n in &atoms {
            for &th in &thetas {
                for &z in &dz {
                    for &c in &chi {
                        for &s in &sites {
                            for &seed in &seeds {
                                out.push(Cell {
                                    index: out.len(),
                                    atoms: n,
                                    theta0_pi: th,
                                    delta_z: z,
                                    chi: c,
                                    n_sites: s,
                                    seed,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn limits(&self) -> Limits {
        Limits {
            max_basis: self.ed.max_basis,
            ..Limits::default()
        }
    }

    pub fn drive_operator(&self) -> Option<CollectiveOp> {
        self.drive.as_ref().map(|d| d.channel.raising(&self.level, self.physics.basis))
    }

    pub fn zeeman(&self, cell: &Cell) -> Zeeman {
        match cell.delta_z {
            Some(z) => Zeeman::single_knob(z),
            None => Zeeman {
                delta_g: self.physics.delta_g,
                delta_e: self.physics.delta_e,
            },
        }
    }

    /// Decay generator of a cell, without drive.
    pub fn generator(&self, cell: &Cell) -> GeneratorSpec {
        let gen = GeneratorSpec::new(self.level, self.physics.basis, &self.physics.channels).with_rates(self.physics.gamma, cell.chi);
        let z = self.zeeman(cell);
        if z.is_zero() {
            gen
        } else {
            gen.with_zeeman(z)
        }
    }

    /// Site coupling weights of a cell; `None` when homogeneous.
    pub fn site_weights(&self, cell: &Cell) -> Option<Vec<f64>> {
        let s = self.physics.sites.as_ref()?;
        if let Some(w) = &s.weights {
            return Some(w.clone());
        }
        let l = s.lattice.as_ref()?;
        let n = cell.n_sites.unwrap_or(l.n_sites);
        Some(lattice_groups(l.lambda_l / l.lambda_c, n, 1.0).iter().map(|g| g.weight).collect())
    }

    pub fn groups(&self, cell: &Cell) -> Vec<SiteGroup> {
        let n = cell.atoms as f64;
        match self.site_weights(cell) {
            Some(w) => {
                let per = n / w.len() as f64;
                w.into_iter().map(|weight| SiteGroup { weight, atoms: per }).collect()
            }
            None => vec![SiteGroup { weight: 1.0, atoms: n }],
        }
    }

    /// Output grid in units of `1/(NΓ)`.
    pub fn scaled_grid(&self) -> Vec<f64> {
        let it = &self.integration;
        (0..it.samples).map(|i| it.t_max * i as f64 / (it.samples - 1) as f64).collect()
    }
}
