//! Experiment configuration (TOML).
//!
//! Every section and key is optional; omitted values take the defaults below,
//! which reproduce the Fig. 2 chain. Unknown keys are rejected. Resonator
//! indices are 1-based (`resonator = 2` is `D₂`); cell indices are signed with
//! cell 0 in the middle of the super-cell.

use std::path::Path;

use num_complex::Complex64;
use resochain::defect_lab::{first_cell, SpaceDefect};
use resochain::geometry::{MaterialContrast, ResonatorGeometry};
use resochain::modulation::{ModulationProfile, TimeDefect};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub geometry: GeometryConfig,
    pub material: MaterialConfig,
    pub modulation: ModulationConfig,
    pub defect: DefectConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Resonator lengths `ℓ_i`.
    pub lengths: Vec<f64>,
    /// `gaps[i]` separates resonator `i` from resonator `i + 1`; the last gap
    /// closes the cell.
    pub gaps: Vec<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            lengths: vec![1.0; 3],
            gaps: vec![1.0, 2.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialConfig {
    pub delta: f64,
    pub v0: f64,
    /// Per-resonator wave speeds; used when `kappa_r`/`rho_r` are absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_r: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_r: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_r: Option<Vec<f64>>,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self {
            delta: 1e-4,
            v0: 1.0,
            v_r: None,
            kappa_r: None,
            rho_r: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulationConfig {
    pub omega: f64,
    pub eps_kappa: f64,
    pub eps_s: f64,
    /// Phases in radians, one per resonator; zeros when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phases_kappa: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phases_s: Option<Vec<f64>>,
    /// Explicit Fourier tables `[re, im]` for `n = -M..=M`, one table per
    /// resonator. Overrides the cosine parameters when both are given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmonics_kappa: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmonics_s: Option<Vec<Vec<[f64; 2]>>>,
}

impl Default for ModulationConfig {
    fn default() -> Self {
        Self {
            omega: 0.034,
            eps_kappa: 0.0,
            eps_s: 0.0,
            phases_kappa: None,
            phases_s: None,
            harmonics_kappa: None,
            harmonics_s: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefectConfig {
    pub space: Vec<SpaceEntry>,
    pub time: Vec<TimeEntry>,
    /// Centre of the temporal envelope; defaults to one modulation period.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceEntry {
    #[serde(default)]
    pub cell: i64,
    pub resonator: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wave_speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeEntry {
    /// Cell index; ignored when `every_cell` is set.
    #[serde(default)]
    pub cell: i64,
    pub resonator: usize,
    pub c: f64,
    #[serde(default)]
    pub every_cell: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialChoice {
    MostDistinctPeak,
    MostLocalised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// α points of a band sweep, both zone edges included.
    pub alpha_count: usize,
    /// Starting RK4 step count per period (doubled until `|det - 1| < 1e-8`).
    pub start_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub im_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_tol: Option<f64>,
    /// Super-cell size.
    pub cells: usize,
    pub alpha_sc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_span: Option<[f64; 2]>,
    pub sample_count: usize,
    pub steps_per_sample: usize,
    pub initial_state: InitialChoice,
    /// Evenly spaced snapshots written by `evolve`, plus the d_* peak.
    pub snapshot_count: usize,
    /// Harmonic truncation `K` of the Toeplitz system.
    pub harmonics: usize,
    pub quad_points: usize,
    pub root_tol: f64,
    /// Initial guesses `[re, im]`; one guess above the band top when empty.
    pub root_guesses: Vec<[f64; 2]>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha_count: 101,
            start_steps: resochain::floquet_band::DEFAULT_START_STEPS,
            im_tol: None,
            gap_tol: None,
            cells: 20,
            alpha_sc: resochain::defect_lab::DEFAULT_ALPHA_SC,
            t_span: None,
            sample_count: 1000,
            steps_per_sample: 1,
            initial_state: InitialChoice::MostDistinctPeak,
            snapshot_count: 6,
            harmonics: 0,
            quad_points: resochain::toeplitz_roots::DEFAULT_QUAD_POINTS,
            root_tol: 1e-10,
            root_guesses: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory, relative to the working directory; `--out` wins.
    pub directory: String,
    pub svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            svg: true,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Canonical text form: every key written out in a fixed order.
    pub fn to_canonical(&self) -> String {
        toml::to_string(self).expect("configuration is always serialisable")
    }

    pub fn geometry(&self) -> Result<ResonatorGeometry, CliError> {
        Ok(ResonatorGeometry::new(&self.geometry.lengths, &self.geometry.gaps)?)
    }

    pub fn n(&self) -> usize {
        self.geometry.lengths.len()
    }

    pub fn contrast(&self) -> Result<MaterialContrast, CliError> {
        let m = &self.material;
        let n = self.n();
        let c = match (&m.kappa_r, &m.rho_r, &m.v_r) {
            (Some(k), Some(r), None) => MaterialContrast::new(m.delta, k.clone(), r.clone(), m.v0)?,
            (None, None, Some(v)) => MaterialContrast::from_wave_speeds(m.delta, v.clone(), m.v0)?,
            (None, None, None) => MaterialContrast::from_wave_speeds(m.delta, vec![1.0; n], m.v0)?,
            _ => {
                return Err(CliError::Config(
                    "material: give either kappa_r and rho_r together, or v_r".into(),
                ))
            }
        };
        if c.n() != n {
            return Err(CliError::Config(format!(
                "material parameters describe {} resonators, geometry has {n}",
                c.n()
            )));
        }
        Ok(c)
    }

    pub fn profile(&self) -> Result<ModulationProfile, CliError> {
        let m = &self.modulation;
        let n = self.n();
        match (&m.harmonics_kappa, &m.harmonics_s) {
            (Some(k), Some(s)) => {
                let conv = |t: &Vec<Vec<[f64; 2]>>| -> Vec<Vec<Complex64>> {
                    t.iter()
                        .map(|row| row.iter().map(|c| Complex64::new(c[0], c[1])).collect())
                        .collect()
                };
                let p = ModulationProfile::from_harmonics(m.omega, conv(k), conv(s))?;
                if p.n() != n {
                    return Err(CliError::Config(format!(
                        "modulation tables describe {} resonators, geometry has {n}",
                        p.n()
                    )));
                }
                Ok(p)
            }
            (None, None) => {
                let zeros = vec![0.0; n];
                let pk = m.phases_kappa.clone().unwrap_or_else(|| zeros.clone());
                let ps = m.phases_s.clone().unwrap_or(zeros);
                if pk.len() != n || ps.len() != n {
                    return Err(CliError::Config(format!(
                        "modulation: need {n} phases for kappa and for s"
                    )));
                }
                Ok(ModulationProfile::from_cosine(m.omega, m.eps_kappa, m.eps_s, &pk, &ps)?)
            }
            _ => Err(CliError::Config(
                "modulation: harmonics_kappa and harmonics_s must be given together".into(),
            )),
        }
    }

    fn resonator_index(&self, r: usize, what: &str) -> Result<usize, CliError> {
        if r == 0 || r > self.n() {
            return Err(CliError::Config(format!(
                "{what}: resonator must lie in 1..={}, got {r}",
                self.n()
            )));
        }
        Ok(r - 1)
    }

    pub fn space_defect(&self) -> Result<SpaceDefect, CliError> {
        let mut d = SpaceDefect::none();
        for e in &self.defect.space {
            let i = self.resonator_index(e.resonator, "defect.space")?;
            d = match (e.eta, e.wave_speed) {
                (Some(eta), None) => d.with_eta(e.cell, i, eta),
                (None, Some(v)) => d.with_wave_speed(e.cell, i, v),
                _ => {
                    return Err(CliError::Config(
                        "defect.space: each entry needs exactly one of eta or wave_speed".into(),
                    ))
                }
            };
        }
        Ok(d)
    }

    pub fn time_defect(&self) -> Result<Option<TimeDefect>, CliError> {
        if self.defect.time.is_empty() {
            return Ok(None);
        }
        let cells = self.solver.cells;
        let mut entries = Vec::new();
        for e in &self.defect.time {
            let i = self.resonator_index(e.resonator, "defect.time")?;
            if e.every_cell {
                let first = first_cell(cells);
                entries.extend((0..cells as i64).map(|k| (first + k, i, e.c)));
            } else {
                entries.push((e.cell, i, e.c));
            }
        }
        let t0 = self.defect.t0.unwrap_or(resochain::period(self.modulation.omega));
        Ok(Some(TimeDefect::new(&entries, t0)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = Config::parse("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.n(), 3);
        assert!(c.profile().unwrap().is_static());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = Config::parse("[solver]\nalpha_cnt = 3\n").unwrap_err();
        assert!(err.to_string().contains("alpha_cnt"), "{err}");
        let err = Config::parse("[bogus]\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn canonical_round_trip() {
        let text = r#"
[geometry]
lengths = [1.0, 1.0, 1.0]
gaps = [2.0, 2.0, 2.0]

[modulation]
eps_kappa = 0.4
eps_s = 0.2
phases_kappa = [0.0, 3.141592653589793, 1.5707963267948966]
phases_s = [0.0, 3.141592653589793, 1.5707963267948966]

[[defect.space]]
resonator = 2
wave_speed = 2.0

[[defect.time]]
resonator = 2
c = 1.0
every_cell = true

[solver]
t_span = [0.0, 100.0]
root_guesses = [[0.0, 0.021]]
"#;
        let c = Config::parse(text).unwrap();
        let canon = c.to_canonical();
        let again = Config::parse(&canon).unwrap();
        assert_eq!(c, again);
        assert_eq!(canon, again.to_canonical());
    }

    #[test]
    fn space_entries_need_one_value() {
        let c = Config::parse("[[defect.space]]\nresonator = 1\n").unwrap();
        assert!(c.space_defect().is_err());
        let c = Config::parse("[[defect.space]]\nresonator = 4\neta = 1.0\n").unwrap();
        assert!(c.space_defect().is_err());
        let c = Config::parse("[[defect.space]]\nresonator = 3\ncell = -1\neta = 1.0\n").unwrap();
        assert_eq!(c.space_defect().unwrap().sites().next().unwrap().0, (-1, 2));
    }

    #[test]
    fn every_cell_time_defect_expands() {
        let c = Config::parse("[solver]\ncells = 4\n[[defect.time]]\nresonator = 2\nc = 1.0\nevery_cell = true\n").unwrap();
        let td = c.time_defect().unwrap().unwrap();
        let cells: Vec<i64> = td.entries().map(|e| e.0).collect();
        assert_eq!(cells, vec![-2, -1, 0, 1]);
        assert!((td.t0() - 184.7996).abs() < 1e-3);
    }

    #[test]
    fn material_choices() {
        let c = Config::parse("[material]\nkappa_r = [1.0, 1.0, 1.0]\n").unwrap();
        assert!(c.contrast().is_err());
        let c = Config::parse("[material]\nv_r = [1.0, 2.0]\n").unwrap();
        assert!(c.contrast().is_err());
        let c = Config::parse("[material]\nv_r = [1.0, 2.0, 1.0]\n").unwrap();
        assert_eq!(c.contrast().unwrap().v_r[1], 2.0);
    }
}
