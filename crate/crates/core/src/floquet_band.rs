//! Floquet analysis of the single-cell capacitance ODE `Ψ'' + M^α(t) Ψ = 0`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{quasiperiodic_capacitance, MaterialContrast, ResonatorGeometry};
use crate::linalg::eigenvalues;
use crate::modulation::{w_matrices, ModulationProfile};
use crate::ode::{self, CMatrix, LinearSystem, Monodromy};

/// Default number of RK4 steps per period before determinant-driven refinement.
pub const DEFAULT_START_STEPS: usize = 256;

/// `M^α(t) = diag(δκ_r/ρ_r) W₁(t) C^α W₂(t) + W₃(t)` for one quasimomentum.
#[derive(Debug, Clone)]
pub struct FloquetProblem {
    alpha: f64,
    capacitance: DMatrix<Complex64>,
    coefficients: Vec<f64>,
    geometry: ResonatorGeometry,
    profile: ModulationProfile,
}

pub fn assemble_floquet(
    geom: &ResonatorGeometry,
    contrast: &MaterialContrast,
    profile: &ModulationProfile,
    alpha: f64,
) -> Result<FloquetProblem> {
    if contrast.n() != geom.n() || profile.n() != geom.n() {
        return Err(Error::Validation(format!(
            "geometry, material and modulation sizes differ ({}, {}, {})",
            geom.n(),
            contrast.n(),
            profile.n()
        )));
    }
    contrast.validate()?;
    let cap = quasiperiodic_capacitance(geom, alpha);
    Ok(FloquetProblem {
        alpha: cap.alpha,
        capacitance: cap.entries,
        coefficients: (0..geom.n()).map(|i| contrast.coefficient(i)).collect(),
        geometry: geom.clone(),
        profile: profile.clone(),
    })
}

impl FloquetProblem {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.coefficients.len()
    }

    pub fn period(&self) -> f64 {
        self.profile.period()
    }

    pub fn omega_mod(&self) -> f64 {
        self.profile.omega_mod()
    }

    pub fn coefficient_matrix(&self, t: f64) -> Result<DMatrix<Complex64>> {
        let w = w_matrices(&self.profile, &self.geometry, t)?;
        let n = self.n();
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let mut v = self.capacitance[(i, j)] * (self.coefficients[i] * w.w1[i] * w.w2[j]);
            if i == j {
                v += w.w3[i];
            }
            v
        }))
    }
}

impl LinearSystem for FloquetProblem {
    fn dim(&self) -> usize {
        2 * self.n()
    }

    fn apply(&self, t: f64, y: &CMatrix, out: &mut CMatrix) -> Result<()> {
        let n = self.n();
        let m = self.coefficient_matrix(t)?;
        let top = y.rows(0, n);
        let bottom = y.rows(n, n);
        out.rows_mut(0, n).copy_from(&bottom);
        let mut lower = out.rows_mut(n, n);
        lower.gemm(Complex64::new(-1.0, 0.0), &m, &top, Complex64::new(0.0, 0.0));
        Ok(())
    }
}

/// One-period propagator of `y' = [[0, I], [-M, 0]] y` over `[0, T]`.
pub fn monodromy(problem: &FloquetProblem, steps: usize) -> Result<Monodromy> {
    ode::monodromy(problem, 0.0, problem.period(), steps)
}

/// Folds a real frequency into `(-Ω/2, Ω/2]`.
pub fn fold_frequency(x: f64, omega_mod: f64) -> f64 {
    x - omega_mod * ((x - omega_mod / 2.0) / omega_mod).ceil()
}

/// `ω = log(μ)/(iT)` on the principal branch for every multiplier.
pub fn floquet_exponents(multipliers: &[Complex64], period: f64) -> Vec<Complex64> {
    multipliers
        .iter()
        .map(|mu| mu.ln() / Complex64::new(0.0, period))
        .collect()
}

/// Representative of `{ω, -ω}` modulo `Ω`: larger real part, then larger
/// imaginary part.
pub fn canonical_frequency(w: Complex64, omega_mod: f64) -> Complex64 {
    let tol = 1e-9 * omega_mod;
    let a = Complex64::new(fold_frequency(w.re, omega_mod), w.im);
    let b = Complex64::new(fold_frequency(-w.re, omega_mod), -w.im);
    if (a.re - b.re).abs() <= tol {
        if a.im >= b.im {
            a
        } else {
            b
        }
    } else if a.re > b.re {
        a
    } else {
        b
    }
}

/// Distance in the complex plane with the real part taken modulo `Ω`.
pub fn wrapped_distance(a: Complex64, b: Complex64, omega_mod: f64) -> f64 {
    let dr = fold_frequency(a.re - b.re, omega_mod);
    (dr * dr + (a.im - b.im).powi(2)).sqrt()
}

/// Pairs the `2n` exponents into `n` pairs `{ω, -ω}` and returns, for each
/// pair, the index of the member kept (the one already in canonical form).
pub fn pair_representatives(exponents: &[Complex64], omega_mod: f64) -> Vec<usize> {
    let canon: Vec<Complex64> = exponents
        .iter()
        .map(|w| canonical_frequency(*w, omega_mod))
        .collect();
    let mut free: Vec<usize> = (0..exponents.len()).collect();
    let mut kept = Vec::with_capacity(exponents.len() / 2);
    while free.len() >= 2 {
        let mut best = (f64::INFINITY, 0, 1);
        for a in 0..free.len() {
            for b in (a + 1)..free.len() {
                let d = wrapped_distance(canon[free[a]], canon[free[b]], omega_mod);
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        let (i, j) = (free[best.1], free[best.2]);
        let di = wrapped_distance(exponents[i], canon[i], omega_mod);
        let dj = wrapped_distance(exponents[j], canon[j], omega_mod);
        kept.push(if di <= dj { i } else { j });
        free.retain(|&k| k != i && k != j);
    }
    kept
}

/// The `N` canonical quasifrequencies of a `2N × 2N` monodromy matrix, real
/// parts folded into `[0, Ω/2]`, sorted by real part.
pub fn quasifrequencies(mono: &Monodromy, omega_mod: f64) -> Result<Vec<Complex64>> {
    let mu = eigenvalues(&mono.matrix)?;
    Ok(reduce_multipliers(&mu, mono.period, omega_mod))
}

fn reduce_multipliers(mu: &[Complex64], period: f64, omega_mod: f64) -> Vec<Complex64> {
    let exps = floquet_exponents(mu, period);
    let mut out: Vec<Complex64> = pair_representatives(&exps, omega_mod)
        .into_iter()
        .map(|k| canonical_frequency(exps[k], omega_mod))
        .collect();
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    out
}

/// Quasifrequencies over a uniform α grid, bands matched by continuity.
#[derive(Debug, Clone)]
pub struct BandStructure {
    pub alpha_grid: Vec<f64>,
    /// `bands[k][b]` is band `b` at `alpha_grid[k]`.
    pub bands: Vec<Vec<Complex64>>,
    pub omega_mod: f64,
    /// Floquet multipliers at each α (2N values).
    pub multipliers: Vec<Vec<Complex64>>,
    /// `|det(monodromy) - 1|` at each α.
    pub det_deviation: Vec<f64>,
    pub steps: Vec<usize>,
}

impl BandStructure {
    pub fn band_count(&self) -> usize {
        self.bands.first().map_or(0, Vec::len)
    }
}

/// Uniform grid over `[-π/L, π/L]` with `count` points, both edges included.
pub fn band_alpha_grid(period: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| -PI / period + 2.0 * PI / period * k as f64 / (count - 1) as f64)
        .collect()
}

pub fn band_sweep(
    geom: &ResonatorGeometry,
    contrast: &MaterialContrast,
    profile: &ModulationProfile,
    alpha_count: usize,
    start_steps: usize,
) -> Result<BandStructure> {
    if alpha_count < 2 {
        return Err(Error::Validation(format!(
            "alpha_count must be at least 2, got {alpha_count}"
        )));
    }
    let grid = band_alpha_grid(geom.period(), alpha_count);
    let omega = profile.omega_mod();
    let per_alpha: Vec<(Vec<Complex64>, Vec<Complex64>, f64, usize)> = grid
        .par_iter()
        .map(|&alpha| {
            let run = || -> Result<_> {
                let problem = assemble_floquet(geom, contrast, profile, alpha)?;
                let mono = monodromy(&problem, start_steps)?;
                let mu = eigenvalues(&mono.matrix)?;
                let w = reduce_multipliers(&mu, mono.period, omega);
                Ok((w, mu, mono.det_deviation, mono.steps))
            };
            run().map_err(|e| Error::AtAlpha {
                alpha,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let mut bands: Vec<Vec<Complex64>> = Vec::with_capacity(grid.len());
    let mut multipliers = Vec::with_capacity(grid.len());
    let mut det_deviation = Vec::with_capacity(grid.len());
    let mut steps = Vec::with_capacity(grid.len());
    for (w, mu, dev, st) in per_alpha {
        let next = match bands.last() {
            None => w,
            Some(prev) => match_to_previous(prev, &w, omega),
        };
        bands.push(next);
        multipliers.push(mu);
        det_deviation.push(dev);
        steps.push(st);
    }
    Ok(BandStructure {
        alpha_grid: grid,
        bands,
        omega_mod: omega,
        multipliers,
        det_deviation,
        steps,
    })
}

const EXHAUSTIVE_MATCH_LIMIT: usize = 6;

/// Reorders `current` so that entry `b` continues band `b` of `prev`.
fn match_to_previous(prev: &[Complex64], current: &[Complex64], omega: f64) -> Vec<Complex64> {
    let n = prev.len();
    let cost = |b: usize, k: usize| wrapped_distance(prev[b], current[k], omega);
    let order: Vec<usize> = if n <= EXHAUSTIVE_MATCH_LIMIT {
        let mut best = (f64::INFINITY, (0..n).collect::<Vec<_>>());
        let mut perm: Vec<usize> = (0..n).collect();
        permutations(&mut perm, 0, &mut |p| {
            let c: f64 = p.iter().enumerate().map(|(b, &k)| cost(b, k)).sum();
            if c < best.0 {
                best = (c, p.to_vec());
            }
        });
        best.1
    } else {
        let mut taken = vec![false; n];
        let mut pairs: Vec<(f64, usize, usize)> = (0..n)
            .flat_map(|b| (0..n).map(move |k| (b, k)))
            .map(|(b, k)| (cost(b, k), b, k))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut order = vec![usize::MAX; n];
        for (_, b, k) in pairs {
            if order[b] == usize::MAX && !taken[k] {
                order[b] = k;
                taken[k] = true;
            }
        }
        order
    };
    order.into_iter().map(|k| current[k]).collect()
}

fn permutations(p: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// Thresholds for classifying quasifrequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapTolerances {
    /// `|Im ω|` above this marks a non-propagating mode.
    pub im_tol: f64,
    /// Minimum width of a reported band gap.
    pub gap_tol: f64,
}

impl GapTolerances {
    /// `im_tol = 1e-4 Ω`, `gap_tol = 1e-8 Ω`.
    ///
    /// With resonator-dependent modulation phases the capacitance ODE is not
    /// conservative and propagating modes drift off the unit circle by a few
    /// `1e-6 Ω`; genuine momentum gaps open to `~1e-2 Ω`.
    pub fn for_omega(omega_mod: f64) -> Self {
        Self {
            im_tol: 1e-4 * omega_mod,
            gap_tol: 1e-8 * omega_mod,
        }
    }
}

/// Frequency intervals free of real quasifrequencies between the lowest and
/// highest propagating band values.
pub fn detect_band_gaps(bands: &BandStructure, tol: GapTolerances) -> Vec<(f64, f64)> {
    let mut ranges: Vec<(f64, f64)> = (0..bands.band_count())
        .filter_map(|b| {
            let vals = bands
                .bands
                .iter()
                .map(|row| row[b])
                .filter(|w| w.im.abs() <= tol.im_tol)
                .map(|w| w.re);
            vals.fold(None, |acc: Option<(f64, f64)>, v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
        })
        .collect();
    ranges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut gaps = Vec::new();
    let mut reach = match ranges.first() {
        Some(r) => r.1,
        None => return gaps,
    };
    for &(lo, hi) in &ranges[1..] {
        if lo - reach > tol.gap_tol {
            gaps.push((reach, lo));
        }
        reach = reach.max(hi);
    }
    gaps
}

/// Maximal runs of grid points where some band has `|Im ω| > im_tol`,
/// reported as `(first α, last α)`.
pub fn detect_momentum_gaps(bands: &BandStructure, tol: GapTolerances) -> Vec<(f64, f64)> {
    let mut gaps = Vec::new();
    let mut start: Option<usize> = None;
    for (k, row) in bands.bands.iter().enumerate() {
        let open = row.iter().any(|w| w.im.abs() > tol.im_tol);
        match (open, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                gaps.push((bands.alpha_grid[s], bands.alpha_grid[k - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        gaps.push((bands.alpha_grid[s], *bands.alpha_grid.last().unwrap()));
    }
    gaps
}
