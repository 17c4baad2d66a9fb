//! Scenario files: TOML with one table per block, lengths in the unit named
//! by `[units]`, times and energies in atomic units.

use std::path::Path;

use qtraj_core::units::{angstrom_to_bohr, de_broglie_wavelength, BeamPreset};
use qtraj_core::{Boundary, GridSpec, LaunchMode, PotentialSpec, Scheme};
use qtraj_finsler::Form;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub units: UnitsBlock,
    pub grid: GridBlock,
    #[serde(default)]
    pub potential: PotentialBlock,
    pub initial: InitialBlock,
    pub run: RunBlock,
    #[serde(default)]
    pub trajectories: TrajectoryBlock,
    #[serde(default)]
    pub geodesic: GeodesicBlock,
    #[serde(default)]
    pub detector: Option<DetectorBlock>,
    #[serde(default)]
    pub twobody: TwoBodyBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    #[default]
    Bohr,
    Angstrom,
}

impl LengthUnit {
    pub fn to_bohr(self, x: f64) -> f64 {
        match self {
            LengthUnit::Bohr => x,
            LengthUnit::Angstrom => angstrom_to_bohr(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsBlock {
    #[serde(default)]
    pub length: LengthUnit,
    /// "wavelength" (λ = 2.22 Å) or "speed" (v = 2.18×10⁶ m/s).
    #[serde(default = "default_beam")]
    pub beam: String,
}

fn default_beam() -> String {
    "wavelength".into()
}

impl Default for UnitsBlock {
    fn default() -> Self {
        UnitsBlock { length: LengthUnit::Bohr, beam: default_beam() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub dims: Vec<usize>,
    #[serde(rename = "box")]
    pub box_lengths: Vec<f64>,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    /// "periodic" or "absorbing".
    #[serde(default = "default_boundary")]
    pub boundary: String,
    #[serde(default = "default_rim")]
    pub rim: f64,
}

fn default_boundary() -> String {
    "absorbing".into()
}

fn default_rim() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialBlock {
    Free,
    SoftCoulomb {
        center: Vec<f64>,
        #[serde(default = "one")]
        charge: f64,
        softening: f64,
    },
    SlabSlits {
        #[serde(default)]
        plane: f64,
        thickness: f64,
        /// V₀ in units of the incident kinetic energy.
        #[serde(default = "default_height")]
        height_factor: f64,
        geometry: SlitGeometry,
        smoothing: f64,
        #[serde(default)]
        slit_center: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_height() -> f64 {
    10.0
}

impl Default for PotentialBlock {
    fn default() -> Self {
        PotentialBlock::Free
    }
}

/// Two slits placed symmetrically about `slit_center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case", deny_unknown_fields)]
pub enum SlitGeometry {
    /// Closest-edge gap `inner`, furthest-edge span `outer`.
    Edges { inner: f64, outer: f64 },
    /// Two slits of `width` separated by `separation` (edge to edge).
    WidthSeparation { width: f64, separation: f64 },
}

impl SlitGeometry {
    /// (inner gap, outer span).
    pub fn edges(&self) -> (f64, f64) {
        match *self {
            SlitGeometry::Edges { inner, outer } => (inner, outer),
            SlitGeometry::WidthSeparation { width, separation } => (separation, separation + 2.0 * width),
        }
    }
}

/// A number (length units) or one of `b0`, `be`, `bc` relative to the slits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Impact {
    Value(f64),
    Named(String),
}

impl Default for Impact {
    fn default() -> Self {
        Impact::Value(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialBlock {
    pub sigma: f64,
    /// Packet centre before the impact-parameter shift.
    pub center: Vec<f64>,
    #[serde(default)]
    pub beam_axis: usize,
    #[serde(default = "one_usize")]
    pub transverse_axis: usize,
    #[serde(default)]
    pub impact_parameter: Impact,
    /// Overrides the beam preset: |k₀| in inverse length units.
    #[serde(default)]
    pub wavenumber: Option<f64>,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub snapshot_every: usize,
}

fn default_scheme() -> String {
    "split_operator".into()
}

fn default_dt() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryBlock {
    /// "density" or "line"; "none" disables the swarm.
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "one_u64")]
    pub seed: u64,
    /// Length of the launch line (line mode).
    #[serde(default)]
    pub line_length: f64,
    #[serde(default = "default_record")]
    pub record_every: usize,
}

fn default_mode() -> String {
    "density".into()
}

fn default_count() -> usize {
    1000
}

fn one_u64() -> u64 {
    1
}

fn default_record() -> usize {
    10
}

impl Default for TrajectoryBlock {
    fn default() -> Self {
        TrajectoryBlock { mode: default_mode(), count: default_count(), seed: 1, line_length: 0.0, record_every: default_record() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicBlock {
    #[serde(default)]
    pub enabled: bool,
    /// "gamma" or "n".
    #[serde(default = "default_form")]
    pub form: String,
    /// Step in the curve parameter; with y⁰ ≈ 1 this is a time step (a.u.).
    #[serde(default = "default_dtau")]
    pub dtau: f64,
    /// Launch point offset from the packet centre (length units).
    #[serde(default)]
    pub launch_offset: Option<Vec<f64>>,
    /// "folded" (V inside Q') or "force" (V on the right-hand side).
    #[serde(default = "default_vmode")]
    pub potential_mode: String,
    /// Constant added to Q' (a.u.); by default chosen so that Λ stays positive.
    #[serde(default)]
    pub gauge_offset: Option<f64>,
}

fn default_form() -> String {
    "gamma".into()
}

fn default_dtau() -> f64 {
    0.01
}

fn default_vmode() -> String {
    "folded".into()
}

impl Default for GeodesicBlock {
    fn default() -> Self {
        GeodesicBlock { enabled: false, form: default_form(), dtau: default_dtau(), launch_offset: None, potential_mode: default_vmode(), gauge_offset: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorBlock {
    /// Distance of the screen past the reference plane along the beam.
    pub distance: f64,
    /// Reference (slit or target) plane on the beam axis; defaults to the
    /// slab plane or the scatterer centre.
    #[serde(default)]
    pub reference: Option<f64>,
    pub bins: usize,
    /// Transverse extent, centred on the slit axis.
    pub half_width: f64,
    #[serde(default = "default_prominence")]
    pub prominence: f64,
    /// Edge distances used for the angle band (length units).
    #[serde(default)]
    pub d_candidates: Option<Vec<f64>>,
    #[serde(default = "default_target_angle")]
    pub expected_first_peak_deg: f64,
    #[serde(default = "default_tolerance")]
    pub angle_tolerance_deg: f64,
}

fn default_prominence() -> f64 {
    0.05
}

fn default_target_angle() -> f64 {
    30.0
}

fn default_tolerance() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TwoBodyBlock {
    /// Relax a 1s orbital on the scatterer and report its overlap with the packet.
    #[serde(default)]
    pub overlap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub dir: Option<String>,
}

/// A config with every quantity converted to atomic units.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub id: String,
    pub grid: GridSpec,
    pub potential: PotentialSpec,
    pub k0: Vec<f64>,
    pub sigma: f64,
    pub center: Vec<f64>,
    pub beam_axis: usize,
    pub transverse_axis: usize,
    pub impact: f64,
    pub impact_label: String,
    pub scheme: Scheme,
    pub dt: f64,
    pub n_steps: usize,
    pub snapshot_every: usize,
    pub launch: Option<LaunchMode>,
    pub geodesic: Option<GeodesicSetup>,
    pub detector: Option<DetectorSetup>,
    /// (lower, upper) transverse edges of every slit.
    pub slits: Vec<(f64, f64)>,
    /// Transverse coordinate of the slit or target axis.
    pub axis_transverse: f64,
    pub scatterer: Option<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSetup {
    pub form: Form,
    pub dtau: f64,
    pub launch_offset: Vec<f64>,
    pub force: bool,
    pub gauge_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSetup {
    pub plane: f64,
    pub reference: f64,
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
    pub prominence: f64,
    pub wavelength: f64,
    pub d_candidates: Vec<f64>,
    pub expected_deg: f64,
    pub tolerance_deg: f64,
}

fn bad(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical text: the parsed config re-serialised with the output block
    /// cleared, so the id does not depend on formatting, comments or where
    /// the run is written.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.output = OutputBlock::default();
        toml::to_string(&c).expect("config serialises")
    }

    /// First 16 hex digits of the SHA-256 of the canonical text.
    pub fn scenario_id(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn resolve(&self) -> Result<Scenario> {
        let u = self.units.length;
        let len = |x: f64| u.to_bohr(x);
        let lens = |v: &[f64]| v.iter().map(|&x| u.to_bohr(x)).collect::<Vec<f64>>();
        let n = self.grid.dims.len();
        if self.grid.box_lengths.len() != n {
            return Err(bad("grid.dims and grid.box differ in length"));
        }
        let boundary = match self.grid.boundary.as_str() {
            "periodic" => Boundary::Periodic,
            "absorbing" => {
                if !(self.grid.rim > 0.0 && self.grid.rim < 0.5) {
                    return Err(bad("grid.rim must lie in (0, 0.5)"));
                }
                Boundary::Absorbing { rim_fraction: self.grid.rim }
            }
            other => return Err(bad(format!("unknown boundary '{other}'"))),
        };
        let box_lengths = lens(&self.grid.box_lengths);
        let gcenter = self.grid.center.as_deref().map(lens).unwrap_or_else(|| vec![0.0; n]);
        if gcenter.len() != n {
            return Err(bad("grid.center has the wrong dimension"));
        }
        let grid = GridSpec::centered(self.grid.dims.clone(), box_lengths, &gcenter, boundary);

        let init = &self.initial;
        let (ba, ta) = (init.beam_axis, init.transverse_axis);
        if ba >= n || (n > 1 && (ta >= n || ta == ba)) {
            return Err(bad("beam and transverse axes must be distinct grid axes"));
        }
        if init.center.len() != n {
            return Err(bad("initial.center has the wrong dimension"));
        }
        let k = match init.wavenumber {
            Some(k) => k / len(1.0),
            None => BeamPreset::parse(&self.units.beam)
                .ok_or_else(|| bad(format!("unknown beam preset '{}'", self.units.beam)))?
                .wavenumber(),
        };
        let mut k0 = vec![0.0; n];
        k0[ba] = k;
        let e_kin = 0.5 * k * k;

        let mut slits = Vec::new();
        let mut axis_transverse = 0.0;
        let mut scatterer = None;
        let potential = match &self.potential {
            PotentialBlock::Free => PotentialSpec::Free,
            PotentialBlock::SoftCoulomb { center, charge, softening } => {
                let c = lens(center);
                if c.len() != n {
                    return Err(bad("potential.center has the wrong dimension"));
                }
                if n > 1 {
                    axis_transverse = c[ta];
                }
                scatterer = Some((c.clone(), len(*softening)));
                PotentialSpec::SoftCoulomb { center: c, charge: *charge, softening: len(*softening) }
            }
            PotentialBlock::SlabSlits { plane, thickness, height_factor, geometry, smoothing, slit_center } => {
                if n < 2 {
                    return Err(bad("slits need at least two dimensions"));
                }
                let (inner, outer) = geometry.edges();
                let (inner, outer) = (len(inner), len(outer));
                if !(outer > inner && inner > 0.0) {
                    return Err(bad("slit edges must satisfy 0 < inner < outer"));
                }
                let c = len(*slit_center);
                axis_transverse = c;
                slits = vec![(c - 0.5 * outer, c - 0.5 * inner), (c + 0.5 * inner, c + 0.5 * outer)];
                PotentialSpec::SlabSlits {
                    beam_axis: ba,
                    transverse_axis: ta,
                    plane: len(*plane),
                    thickness: len(*thickness),
                    height: height_factor * e_kin,
                    slits: slits.clone(),
                    smoothing: len(*smoothing),
                }
            }
        };
        potential.validate(n).map_err(|e| bad(e.to_string()))?;

        let (impact, impact_label) = match &init.impact_parameter {
            Impact::Value(b) => (len(*b), format!("{b}")),
            Impact::Named(name) => {
                let upper = slits.last().ok_or_else(|| bad(format!("impact '{name}' needs a slit geometry")))?;
                let b = match name.as_str() {
                    "b0" => 0.0,
                    "be" => upper.0 - axis_transverse,
                    "bc" => 0.5 * (upper.0 + upper.1) - axis_transverse,
                    other => return Err(bad(format!("unknown impact label '{other}'"))),
                };
                (b, name.clone())
            }
        };
        let mut center = lens(&init.center);
        if n > 1 {
            center[ta] += impact;
        }

        let scheme = Scheme::parse(&self.run.scheme).ok_or_else(|| bad(format!("unknown scheme '{}'", self.run.scheme)))?;
        if !(self.run.dt > 0.0) || self.run.n_steps == 0 {
            return Err(bad("run.dt must be positive and run.n_steps at least 1"));
        }

        let t = &self.trajectories;
        let launch = match t.mode.as_str() {
            "none" => None,
            "density" => Some(LaunchMode::DensitySampled),
            "line" => Some(LaunchMode::RegularGridLine { axis: if n > 1 { ta } else { 0 }, length: len(t.line_length), center: None }),
            other => return Err(bad(format!("unknown trajectory mode '{other}'"))),
        };
        if launch.is_some() && t.count == 0 {
            return Err(bad("trajectories.count must be positive"));
        }

        let geodesic = if self.geodesic.enabled {
            let g = &self.geodesic;
            let form = match g.form.as_str() {
                "gamma" => Form::Gamma,
                "n" => Form::N,
                other => return Err(bad(format!("unknown geodesic form '{other}'"))),
            };
            let force = match g.potential_mode.as_str() {
                "folded" => false,
                "force" => true,
                other => return Err(bad(format!("unknown potential mode '{other}'"))),
            };
            if !(g.dtau > 0.0) {
                return Err(bad("geodesic.dtau must be positive"));
            }
            let launch_offset = g.launch_offset.as_deref().map(lens).unwrap_or_else(|| vec![0.0; n]);
            if launch_offset.len() != n {
                return Err(bad("geodesic.launch_offset has the wrong dimension"));
            }
            let v_scale = match &potential {
                PotentialSpec::SlabSlits { height, .. } => *height,
                PotentialSpec::SoftCoulomb { charge, softening, .. } => charge / softening,
                _ => 0.0,
            };
            // Λ > 0 needs T/(y⁰)² − Q' > 0 along the path; Q' is bounded by a
            // few times the beam energy plus the potential scale.
            let gauge_offset = g.gauge_offset.unwrap_or(-(4.0 * e_kin + v_scale + 1.0));
            Some(GeodesicSetup { form, dtau: g.dtau, launch_offset, force, gauge_offset })
        } else {
            None
        };

        let detector = match &self.detector {
            None => None,
            Some(d) => {
                if n < 2 {
                    return Err(bad("the detector needs a transverse axis"));
                }
                let reference = match d.reference {
                    Some(r) => len(r),
                    None => match &potential {
                        PotentialSpec::SlabSlits { plane, .. } => *plane,
                        PotentialSpec::SoftCoulomb { center, .. } => center[ba],
                        _ => center[ba],
                    },
                };
                if d.bins < 3 || !(d.half_width > 0.0) || !(d.distance > 0.0) {
                    return Err(bad("detector needs bins ≥ 3 and positive distance and half_width"));
                }
                let d_candidates = match &d.d_candidates {
                    Some(v) => lens(v),
                    None => {
                        let (lo, hi) = match &self.potential {
                            PotentialBlock::SlabSlits { geometry, .. } => geometry.edges(),
                            _ => (angstrom_to_bohr(2.96) / len(1.0), angstrom_to_bohr(7.94) / len(1.0)),
                        };
                        vec![len(lo), len(hi)]
                    }
                };
                Some(DetectorSetup {
                    plane: reference + len(d.distance),
                    reference,
                    bins: d.bins,
                    lo: axis_transverse - len(d.half_width),
                    hi: axis_transverse + len(d.half_width),
                    prominence: d.prominence,
                    wavelength: de_broglie_wavelength(k),
                    d_candidates,
                    expected_deg: d.expected_first_peak_deg,
                    tolerance_deg: d.angle_tolerance_deg,
                })
            }
        };

        Ok(Scenario {
            config: self.clone(),
            id: self.scenario_id(),
            grid,
            potential,
            k0,
            sigma: len(init.sigma),
            center,
            beam_axis: ba,
            transverse_axis: ta,
            impact,
            impact_label,
            scheme,
            dt: self.run.dt,
            n_steps: self.run.n_steps,
            snapshot_every: self.run.snapshot_every,
            launch,
            geodesic,
            detector,
            slits,
            axis_transverse,
            scatterer,
        })
    }
}
