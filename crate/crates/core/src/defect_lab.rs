//! Finite super-cells with spatial and temporal defects.
//!
//! Sites are numbered `k = (m - first_cell) · N + i` for resonator `i` of cell
//! `m`, with cells `first_cell ..= first_cell + cells - 1` and
//! `first_cell = -(cells / 2)`, so cell `0` sits in the middle of the chain.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::floquet_band::{canonical_frequency, floquet_exponents, pair_representatives};
use crate::geometry::{MaterialContrast, ResonatorGeometry};
use crate::linalg::{eig, hermitian_eig};
use crate::modulation::{ModulationProfile, Quantity, TimeDefect};
use crate::ode::{self, CMatrix, LinearSystem};

/// Default super-cell quasimomentum.
pub const DEFAULT_ALPHA_SC: f64 = 0.01;

/// Spatial change at one site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SiteDefect {
    /// `b = 1 + η`.
    Eta(f64),
    /// Wave speed inside the resonator; `b = (v / v_r)²`.
    WaveSpeed(f64),
}

/// Sparse map `(cell, resonator) → defect`; unlisted sites have `b = 1`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpaceDefect {
    sites: BTreeMap<(i64, usize), SiteDefect>,
}

impl SpaceDefect {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_eta(mut self, cell: i64, resonator: usize, eta: f64) -> Self {
        self.sites.insert((cell, resonator), SiteDefect::Eta(eta));
        self
    }

    pub fn with_wave_speed(mut self, cell: i64, resonator: usize, v: f64) -> Self {
        self.sites.insert((cell, resonator), SiteDefect::WaveSpeed(v));
        self
    }

    pub fn sites(&self) -> impl Iterator<Item = ((i64, usize), SiteDefect)> + '_ {
        self.sites.iter().map(|(k, v)| (*k, *v))
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// `b_i^m` given the periodic wave speeds.
    pub fn b(&self, cell: i64, resonator: usize, contrast: &MaterialContrast) -> f64 {
        match self.sites.get(&(cell, resonator)) {
            None => 1.0,
            Some(SiteDefect::Eta(eta)) => 1.0 + eta,
            Some(SiteDefect::WaveSpeed(v)) => (v / contrast.v_r[resonator]).powi(2),
        }
    }
}

/// Finite chain of `cells` unit cells with quasiperiodic closure.
#[derive(Debug, Clone)]
pub struct SupercellSystem {
    geometry: ResonatorGeometry,
    profile: ModulationProfile,
    cells: usize,
    first_cell: i64,
    alpha_sc: f64,
    capacitance: DMatrix<Complex64>,
    /// `δ κ_r/ρ_r / ℓ` per site.
    scale: Vec<f64>,
    b: Vec<f64>,
    /// Nonzero entries of `B 𝒞_sc`, row by row.
    rows: Vec<Vec<(usize, Complex64)>>,
    time_defect: Option<TimeDefect>,
    /// Time-defect coefficient per site.
    defect_c: Vec<f64>,
}

pub fn first_cell(cells: usize) -> i64 {
    -((cells / 2) as i64)
}

pub fn build_supercell(
    geom: &ResonatorGeometry,
    contrast: &MaterialContrast,
    profile: &ModulationProfile,
    cells: usize,
    space_defect: &SpaceDefect,
    time_defect: Option<&TimeDefect>,
    alpha_sc: f64,
) -> Result<SupercellSystem> {
    let n = geom.n();
    if contrast.n() != n || profile.n() != n {
        return Err(invalid(format!(
            "geometry, material and modulation sizes differ ({n}, {}, {})",
            contrast.n(),
            profile.n()
        )));
    }
    contrast.validate()?;
    if cells == 0 {
        return Err(invalid("a super-cell needs at least one cell"));
    }
    let first = first_cell(cells);
    let last = first + cells as i64 - 1;
    let site_of = |m: i64, i: usize, what: &str| -> Result<usize> {
        if m < first || m > last || i >= n {
            return Err(invalid(format!(
                "{what} at cell {m}, resonator {i} lies outside cells {first}..={last} with {n} resonators"
            )));
        }
        Ok((m - first) as usize * n + i)
    };

    let total = cells * n;
    let mut b = vec![1.0; total];
    for ((m, i), _) in space_defect.sites() {
        let k = site_of(m, i, "space defect")?;
        b[k] = space_defect.b(m, i, contrast);
        if !(b[k] > 0.0 && b[k].is_finite()) {
            return Err(invalid(format!("defect gives b = {} at cell {m}, resonator {i}", b[k])));
        }
    }
    let mut defect_c = vec![0.0; total];
    if let Some(td) = time_defect {
        for (m, i, c) in td.entries() {
            defect_c[site_of(m, i, "time defect")?] += c;
        }
    }

    let capacitance = supercell_capacitance(geom, cells, alpha_sc);
    let scale: Vec<f64> = (0..total)
        .map(|k| contrast.coefficient(k % n) / geom.lengths()[k % n])
        .collect();
    let rows = (0..total)
        .map(|r| {
            (0..total)
                .filter(|&c| capacitance[(r, c)] != Complex64::new(0.0, 0.0))
                .map(|c| (c, capacitance[(r, c)] * (b[r] * scale[r])))
                .collect()
        })
        .collect();

    Ok(SupercellSystem {
        geometry: geom.clone(),
        profile: profile.clone(),
        cells,
        first_cell: first,
        alpha_sc,
        capacitance,
        scale,
        b,
        rows,
        time_defect: time_defect.cloned(),
        defect_c,
    })
}

/// Block-tridiagonal `C_sc` built from `C^0, C^{±1}` with the wrap-around
/// coupling phased by `e^{iα_sc M L}`.
fn supercell_capacitance(geom: &ResonatorGeometry, cells: usize, alpha_sc: f64) -> DMatrix<Complex64> {
    let n = geom.n();
    let total = cells * n;
    let g = geom.gaps();
    let mut c = DMatrix::<Complex64>::zeros(total, total);
    let wrap = Complex64::from_polar(1.0, alpha_sc * cells as f64 * geom.period());
    for p in 0..cells {
        for i in 0..n {
            let k = p * n + i;
            c[(k, k)] += 1.0 / geom.gap_before(i) + 1.0 / g[i];
            let (j, phase) = if i + 1 < n {
                (k + 1, Complex64::new(1.0, 0.0))
            } else if p + 1 < cells {
                ((p + 1) * n, Complex64::new(1.0, 0.0))
            } else {
                (0, wrap)
            };
            c[(k, j)] -= phase / g[i];
            c[(j, k)] -= phase.conj() / g[i];
        }
    }
    c
}

impl SupercellSystem {
    pub fn n(&self) -> usize {
        self.geometry.n()
    }

    /// Total number of sites `N_tot`.
    pub fn sites(&self) -> usize {
        self.b.len()
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn first_cell(&self) -> i64 {
        self.first_cell
    }

    pub fn alpha_sc(&self) -> f64 {
        self.alpha_sc
    }

    pub fn profile(&self) -> &ModulationProfile {
        &self.profile
    }

    pub fn time_defect(&self) -> Option<&TimeDefect> {
        self.time_defect.as_ref()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Unscaled super-cell capacitance `C_sc`.
    pub fn capacitance(&self) -> &DMatrix<Complex64> {
        &self.capacitance
    }

    /// `(cell, resonator)` of site `k`.
    pub fn site_cell(&self, k: usize) -> (i64, usize) {
        (self.first_cell + (k / self.n()) as i64, k % self.n())
    }

    pub fn site_index(&self, cell: i64, resonator: usize) -> Option<usize> {
        let p = cell - self.first_cell;
        (p >= 0 && (p as usize) < self.cells && resonator < self.n())
            .then(|| p as usize * self.n() + resonator)
    }

    /// `B 𝒞_sc` as a dense matrix.
    pub fn dynamic_matrix(&self) -> DMatrix<Complex64> {
        let t = self.sites();
        let mut a = DMatrix::zeros(t, t);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                a[(r, c)] = v;
            }
        }
        a
    }

    /// `1/κ_k(t) + c_k f(t)`.
    pub fn inv_kappa(&self, k: usize, t: f64) -> f64 {
        let mut g = self.profile.eval_inv(Quantity::InvKappa, k % self.n(), t, 0);
        if let Some(td) = &self.time_defect {
            if self.defect_c[k] != 0.0 {
                g += self.defect_c[k] * td.envelope(t);
            }
        }
        g
    }

    /// `1/s_k(t)`.
    pub fn inv_s(&self, k: usize, t: f64) -> f64 {
        self.profile.eval_inv(Quantity::InvS, k % self.n(), t, 0)
    }

    fn modulation_at(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n();
        let base_g: Vec<f64> = (0..n)
            .map(|i| self.profile.eval_inv(Quantity::InvKappa, i, t, 0))
            .collect();
        let base_s: Vec<f64> = (0..n)
            .map(|i| self.profile.eval_inv(Quantity::InvS, i, t, 0))
            .collect();
        let env = self.time_defect.as_ref().map(|d| d.envelope(t));
        let mut g = Vec::with_capacity(self.sites());
        let mut sigma = Vec::with_capacity(self.sites());
        for k in 0..self.sites() {
            let mut gk = base_g[k % n];
            if let Some(e) = env {
                gk += self.defect_c[k] * e;
            }
            if !(gk > 0.0) {
                let (m, i) = self.site_cell(k);
                return Err(Error::SingularModulation {
                    what: format!("1/kappa at cell {m}, resonator {i}"),
                    t,
                    value: gk,
                });
            }
            let sk = base_s[k % n];
            if !(sk > 0.0) {
                let (m, i) = self.site_cell(k);
                return Err(Error::SingularModulation {
                    what: format!("1/s at cell {m}, resonator {i}"),
                    t,
                    value: sk,
                });
            }
            g.push(gk);
            sigma.push(sk);
        }
        Ok((g, sigma))
    }

    /// Window used for one-period propagators: centred on `t0` when a time
    /// defect is present, `[0, T]` otherwise.
    pub fn default_window(&self) -> (f64, f64) {
        let period = self.profile.period();
        match &self.time_defect {
            Some(td) => (td.t0() - period / 2.0, td.t0() + period / 2.0),
            None => (0.0, period),
        }
    }
}

/// First-order form `u' = p / g(t)`, `p' = -S(t) B 𝒞_sc S(t)⁻¹ u`.
impl LinearSystem for SupercellSystem {
    fn dim(&self) -> usize {
        2 * self.sites()
    }

    fn apply(&self, t: f64, y: &CMatrix, out: &mut CMatrix) -> Result<()> {
        let n = self.sites();
        let (g, sigma) = self.modulation_at(t)?;
        for col in 0..y.ncols() {
            let yc = y.column(col);
            let mut oc = out.column_mut(col);
            for k in 0..n {
                oc[k] = yc[n + k] / g[k];
            }
            for (r, row) in self.rows.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(c, v) in row {
                    acc += v * (yc[c] * sigma[c]);
                }
                oc[n + r] = -acc / sigma[r];
            }
        }
        Ok(())
    }
}

/// `‖v‖_∞ / ‖v‖₂`.
pub fn degree_of_localisation<'a, I>(v: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a Complex64>,
{
    let mut max: f64 = 0.0;
    let mut sq = 0.0;
    for z in v {
        let a = z.norm();
        max = max.max(a);
        sq += a * a;
    }
    if !(sq > 0.0) {
        return Err(invalid("degree of localisation of a zero vector"));
    }
    Ok(max / sq.sqrt())
}

/// Eigenmodes of the static problem.
#[derive(Debug, Clone)]
pub struct StaticModes {
    /// `√eig`, ascending.
    pub frequencies: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub d: Vec<f64>,
    /// Unit-norm mode shapes as columns.
    pub vectors: DMatrix<Complex64>,
}

/// Eigen-decomposition of `B 𝒞_sc` through the Hermitian form
/// `D C_sc D`, `D = (B diag(δκ_r/(ρ_r ℓ)))^{1/2}`.
pub fn static_defect_modes(sc: &SupercellSystem) -> Result<StaticModes> {
    if !sc.profile.is_static() {
        return Err(Error::Misuse(
            "modulation is time-dependent; use floquet_defect_spectrum instead".into(),
        ));
    }
    if sc.time_defect.as_ref().is_some_and(|d| !d.is_trivial()) {
        return Err(Error::Misuse(
            "a time defect makes the problem time-dependent; use floquet_defect_spectrum instead".into(),
        ));
    }
    let t = sc.sites();
    let dvec: Vec<f64> = (0..t).map(|k| (sc.b[k] * sc.scale[k]).sqrt()).collect();
    let h = DMatrix::from_fn(t, t, |i, j| sc.capacitance[(i, j)] * (dvec[i] * dvec[j]));
    let (eigenvalues, w) = hermitian_eig(&h);
    let mut vectors = w;
    for (i, mut row) in vectors.row_iter_mut().enumerate() {
        row *= Complex64::new(dvec[i], 0.0);
    }
    let mut d = Vec::with_capacity(t);
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        col /= Complex64::new(norm, 0.0);
        d.push(degree_of_localisation(col.iter())?);
    }
    let frequencies = eigenvalues.iter().map(|e| e.max(0.0).sqrt()).collect();
    Ok(StaticModes {
        frequencies,
        eigenvalues,
        d,
        vectors,
    })
}

/// Floquet data of the super-cell over one period window.
#[derive(Debug, Clone)]
pub struct FloquetModes {
    pub window: (f64, f64),
    pub steps: usize,
    /// All `2 N_tot` multipliers.
    pub multipliers: Vec<Complex64>,
    /// Degree of localisation of the position part of each multiplier's
    /// eigenvector.
    pub multiplier_d: Vec<f64>,
    /// Eigenvectors of the propagator, columns aligned with `multipliers`.
    pub eigenvectors: DMatrix<Complex64>,
    /// Index into `multipliers` of the representative of each `{ω, -ω}` pair.
    pub representatives: Vec<usize>,
    /// Canonical quasifrequency per representative.
    pub omega: Vec<Complex64>,
    /// `|μ|` per representative.
    pub lambda: Vec<f64>,
    /// `d` per representative.
    pub d: Vec<f64>,
}

impl FloquetModes {
    pub fn all_lambda(&self) -> impl Iterator<Item = f64> + '_ {
        self.multipliers.iter().map(|m| m.norm())
    }
}

/// Propagator of the super-cell system over one modulation period; the window
/// is centred on `t0` when a time defect is present.
pub fn floquet_defect_spectrum(sc: &SupercellSystem, start_steps: usize) -> Result<FloquetModes> {
    let window = sc.default_window();
    floquet_defect_spectrum_from(sc, window.0, start_steps)
}

/// As [`floquet_defect_spectrum`] with the window `[start, start + T]`.
pub fn floquet_defect_spectrum_from(
    sc: &SupercellSystem,
    start: f64,
    start_steps: usize,
) -> Result<FloquetModes> {
    let period = sc.profile.period();
    let mono = ode::monodromy(sc, start, period, start_steps)?;
    let e = eig(&mono.matrix)?;
    let n = sc.sites();
    let multiplier_d = (0..2 * n)
        .map(|k| degree_of_localisation(e.vectors.column(k).rows(0, n).iter()))
        .collect::<Result<Vec<_>>>()?;
    let omega_mod = sc.profile.omega_mod();
    let exps = floquet_exponents(&e.values, period);
    let mut representatives = pair_representatives(&exps, omega_mod);
    representatives.sort_by(|&a, &b| {
        let (x, y) = (
            canonical_frequency(exps[a], omega_mod),
            canonical_frequency(exps[b], omega_mod),
        );
        x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im))
    });
    let omega = representatives
        .iter()
        .map(|&k| canonical_frequency(exps[k], omega_mod))
        .collect();
    let lambda = representatives.iter().map(|&k| e.values[k].norm()).collect();
    let d = representatives.iter().map(|&k| multiplier_d[k]).collect();
    Ok(FloquetModes {
        window: (start, start + period),
        steps: mono.steps,
        multipliers: e.values,
        multiplier_d,
        eigenvectors: e.vectors,
        representatives,
        omega,
        lambda,
        d,
    })
}

/// Initial condition for [`evolve`].
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Evolve the position part of every propagator eigenvector (zero initial
    /// velocity) and keep the one whose `d_*` trace has the largest
    /// max/median ratio.
    MostDistinctPeak,
    /// Position part of the propagator eigenvector with the largest `d`, zero
    /// initial velocity.
    MostLocalised,
    /// Explicit `(u, p)` with `p = (1/κ + c f) u'`.
    Explicit {
        u: DVector<Complex64>,
        p: DVector<Complex64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    /// Integration interval; defaults to [`SupercellSystem::default_window`].
    pub t_span: Option<(f64, f64)>,
    /// Number of sampling intervals (`sample_count + 1` samples).
    pub sample_count: usize,
    /// RK4 steps between samples.
    pub steps_per_sample: usize,
    /// Starting resolution of the propagator used to build candidates.
    pub monodromy_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            t_span: None,
            sample_count: 1000,
            steps_per_sample: 1,
            monodromy_steps: crate::floquet_band::DEFAULT_START_STEPS,
        }
    }
}

/// Trajectory diagnostics.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub d_star: Vec<f64>,
    /// `|u_k(t)|` at every sample.
    pub profiles: Vec<Vec<f64>>,
    /// Propagator eigenvector used as the initial state, if any.
    pub candidate: Option<usize>,
    /// Multiplier of that eigenvector.
    pub candidate_multiplier: Option<Complex64>,
}

impl Evolution {
    pub fn peak_index(&self) -> usize {
        argmax(&self.d_star)
    }

    pub fn peak_time(&self) -> f64 {
        self.times[self.peak_index()]
    }

    /// `max d_* / median d_*`.
    pub fn peak_ratio(&self) -> f64 {
        let max = self.d_star[self.peak_index()];
        max / median(&self.d_star)
    }

    /// Sample closest to `t`.
    pub fn sample_near(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = k;
            }
        }
        best
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = k;
        }
    }
    best
}

pub fn median(v: &[f64]) -> f64 {
    percentile(v, 50.0)
}

/// Linear-interpolated percentile, `q ∈ [0, 100]`.
pub fn percentile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    if s.is_empty() {
        return f64::NAN;
    }
    let pos = q / 100.0 * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// Threshold separating localised modes from the bulk: twice the 99th
/// percentile of the bulk `d` distribution.
pub fn localisation_threshold(bulk_d: &[f64]) -> f64 {
    2.0 * percentile(bulk_d, 99.0)
}

fn d_star_columns(y: &CMatrix, n: usize) -> Vec<f64> {
    (0..y.ncols())
        .map(|c| degree_of_localisation(y.column(c).rows(0, n).iter()).unwrap_or(f64::NAN))
        .collect()
}

/// Integrates the super-cell system and records `d_*(t) = ‖u‖_∞/‖u‖₂` and
/// `|u|` on a uniform sample grid.
pub fn evolve(sc: &SupercellSystem, initial: &InitialState, opts: &EvolveOptions) -> Result<Evolution> {
    let n = sc.sites();
    if opts.sample_count == 0 || opts.steps_per_sample == 0 {
        return Err(invalid("sample_count and steps_per_sample must be positive"));
    }
    let (t0, t1) = opts.t_span.unwrap_or_else(|| sc.default_window());
    if !(t1 > t0) {
        return Err(invalid(format!("empty time span [{t0}, {t1}]")));
    }

    let (y0, candidate, multiplier) = match initial {
        InitialState::Explicit { u, p } => {
            if u.len() != n || p.len() != n {
                return Err(invalid(format!(
                    "initial state must have {n} positions and {n} momenta"
                )));
            }
            let mut y = CMatrix::zeros(2 * n, 1);
            y.view_mut((0, 0), (n, 1)).copy_from(u);
            y.view_mut((n, 0), (n, 1)).copy_from(p);
            (y, None, None)
        }
        InitialState::MostLocalised | InitialState::MostDistinctPeak => {
            let modes = floquet_defect_spectrum_from(sc, t0, opts.monodromy_steps)?;
            let mut starts = CMatrix::zeros(2 * n, 2 * n);
            starts
                .view_mut((0, 0), (n, 2 * n))
                .copy_from(&modes.eigenvectors.rows(0, n));
            let k = if *initial == InitialState::MostLocalised {
                argmax(&modes.multiplier_d)
            } else {
                let mut traces: Vec<Vec<f64>> = vec![Vec::new(); 2 * n];
                ode::propagate_sampled(
                    sc,
                    t0,
                    t1,
                    opts.sample_count,
                    opts.steps_per_sample,
                    &starts,
                    |_, y| {
                        for (c, d) in d_star_columns(y, n).into_iter().enumerate() {
                            traces[c].push(d);
                        }
                    },
                )?;
                let ratios: Vec<f64> = traces
                    .iter()
                    .map(|tr| {
                        let r = tr[argmax(tr)] / median(tr);
                        if r.is_finite() {
                            r
                        } else {
                            0.0
                        }
                    })
                    .collect();
                argmax(&ratios)
            };
            (
                starts.columns(k, 1).into_owned(),
                Some(k),
                Some(modes.multipliers[k]),
            )
        }
    };

    let mut times = Vec::with_capacity(opts.sample_count + 1);
    let mut d_star = Vec::with_capacity(opts.sample_count + 1);
    let mut profiles = Vec::with_capacity(opts.sample_count + 1);
    let mut bad = None;
    ode::propagate_sampled(sc, t0, t1, opts.sample_count, opts.steps_per_sample, &y0, |t, y| {
        let u = y.column(0).rows(0, n).into_owned();
        match degree_of_localisation(u.iter()) {
            Ok(d) => d_star.push(d),
            Err(e) => {
                bad.get_or_insert(e);
                d_star.push(f64::NAN);
            }
        }
        times.push(t);
        profiles.push(u.iter().map(|z| z.norm()).collect());
    })?;
    if let Some(e) = bad {
        return Err(e);
    }
    Ok(Evolution {
        times,
        d_star,
        profiles,
        candidate,
        candidate_multiplier: multiplier,
    })
}

/// Fraction of `Σ|u_k|²` carried by sites in cells `center ± radius`.
pub fn mass_near(sc: &SupercellSystem, profile: &[f64], center: i64, radius: i64) -> f64 {
    let mut near = 0.0;
    let mut total = 0.0;
    for (k, a) in profile.iter().enumerate() {
        let w = a * a;
        total += w;
        if (sc.site_cell(k).0 - center).abs() <= radius {
            near += w;
        }
    }
    near / total
}
