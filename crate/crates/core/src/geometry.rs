//! Resonator-chain layout, capacitance matrices and the lattice Bloch transform.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Result};

/// One unit cell of the chain.
///
/// `gaps[i]` is the spacing between resonator `i` and resonator `i + 1`; the
/// last gap separates the final resonator from the first resonator of the
/// next cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonatorGeometry {
    lengths: Vec<f64>,
    gaps: Vec<f64>,
    period: f64,
    boundaries: Vec<(f64, f64)>,
}

impl ResonatorGeometry {
    pub fn new(lengths: &[f64], gaps: &[f64]) -> Result<Self> {
        if lengths.is_empty() {
            return Err(invalid("at least one resonator is required"));
        }
        if lengths.len() != gaps.len() {
            return Err(invalid(format!(
                "{} lengths but {} gaps",
                lengths.len(),
                gaps.len()
            )));
        }
        for (name, seq) in [("length", lengths), ("gap", gaps)] {
            if let Some((i, v)) = seq.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
                return Err(invalid(format!("{name} {i} must be positive and finite, got {v}")));
            }
        }
        let mut boundaries = Vec::with_capacity(lengths.len());
        let mut x = 0.0;
        for (l, g) in lengths.iter().zip(gaps) {
            boundaries.push((x, x + l));
            x += l + g;
        }
        Ok(Self {
            lengths: lengths.to_vec(),
            gaps: gaps.to_vec(),
            period: x,
            boundaries,
        })
    }

    /// Number of resonators per cell.
    pub fn n(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Gap to the left of resonator `i` (cyclic).
    pub fn gap_before(&self, i: usize) -> f64 {
        self.gaps[(i + self.n() - 1) % self.n()]
    }

    pub fn x_minus(&self, i: usize) -> f64 {
        self.boundaries[i].0
    }

    pub fn x_plus(&self, i: usize) -> f64 {
        self.boundaries[i].1
    }

    /// Reduces `alpha` into the Brillouin zone `(-π/L, π/L]`.
    pub fn fold_alpha(&self, alpha: f64) -> f64 {
        let w = 2.0 * PI / self.period;
        alpha - w * ((alpha - PI / self.period) / w).ceil()
    }
}

/// Material contrast between resonators and background.
///
/// Only the products `δ κ_r^i / ρ_r^i = δ (v_r^i)²` enter the dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialContrast {
    pub delta: f64,
    pub kappa_r: Vec<f64>,
    pub rho_r: Vec<f64>,
    pub v0: f64,
    pub v_r: Vec<f64>,
}

impl MaterialContrast {
    pub fn new(delta: f64, kappa_r: Vec<f64>, rho_r: Vec<f64>, v0: f64) -> Result<Self> {
        let v_r = kappa_r
            .iter()
            .zip(&rho_r)
            .map(|(k, r)| (k / r).sqrt())
            .collect();
        let c = Self {
            delta,
            kappa_r,
            rho_r,
            v0,
            v_r,
        };
        c.validate()?;
        Ok(c)
    }

    /// Unit densities and `κ_r = v_r²`.
    pub fn from_wave_speeds(delta: f64, v_r: Vec<f64>, v0: f64) -> Result<Self> {
        let kappa_r = v_r.iter().map(|v| v * v).collect();
        let rho_r = vec![1.0; v_r.len()];
        let c = Self {
            delta,
            kappa_r,
            rho_r,
            v0,
            v_r,
        };
        c.validate()?;
        Ok(c)
    }

    /// `δ = delta`, every other parameter equal to one.
    pub fn uniform(n: usize, delta: f64) -> Result<Self> {
        Self::from_wave_speeds(delta, vec![1.0; n], 1.0)
    }

    pub fn n(&self) -> usize {
        self.v_r.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.v0 > 0.0 && self.v0.is_finite()) {
            return Err(invalid(format!("v0 must be positive, got {}", self.v0)));
        }
        let n = self.v_r.len();
        if n == 0 || self.kappa_r.len() != n || self.rho_r.len() != n {
            return Err(invalid("kappa_r, rho_r and v_r must have one entry per resonator"));
        }
        for i in 0..n {
            let (k, r, v) = (self.kappa_r[i], self.rho_r[i], self.v_r[i]);
            if !(k > 0.0 && r > 0.0 && v > 0.0) {
                return Err(invalid(format!("material parameters of resonator {i} must be positive")));
            }
            let expect = (k / r).sqrt();
            if (v - expect).abs() > 1e-12 * expect {
                return Err(invalid(format!(
                    "v_r[{i}] = {v} inconsistent with sqrt(kappa_r/rho_r) = {expect}"
                )));
            }
        }
        Ok(())
    }

    /// `δ κ_r^i / ρ_r^i`.
    pub fn coefficient(&self, i: usize) -> f64 {
        self.delta * self.kappa_r[i] / self.rho_r[i]
    }

    fn check_dim(&self, geom: &ResonatorGeometry) -> Result<()> {
        if self.n() != geom.n() {
            return Err(invalid(format!(
                "material has {} resonators, geometry has {}",
                self.n(),
                geom.n()
            )));
        }
        Ok(())
    }
}

/// `C^α` for one Bloch momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiperiodicCapacitance {
    pub alpha: f64,
    pub entries: DMatrix<Complex64>,
}

/// Capacitance matrix at quasimomentum `alpha` (folded into the zone first).
pub fn quasiperiodic_capacitance(geom: &ResonatorGeometry, alpha: f64) -> QuasiperiodicCapacitance {
    let alpha = geom.fold_alpha(alpha);
    let n = geom.n();
    let g = geom.gaps();
    let mut c = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        c[(i, i)] += Complex64::new(1.0 / geom.gap_before(i) + 1.0 / g[i], 0.0);
        if i + 1 < n {
            c[(i, i + 1)] -= Complex64::new(1.0 / g[i], 0.0);
            c[(i + 1, i)] -= Complex64::new(1.0 / g[i], 0.0);
        }
    }
    let phase = Complex64::from_polar(1.0, alpha * geom.period());
    let g_last = g[n - 1];
    c[(0, n - 1)] -= phase.conj() / g_last;
    c[(n - 1, 0)] -= phase / g_last;
    QuasiperiodicCapacitance { alpha, entries: c }
}

/// `𝒞^α = diag(δ κ_r^i / (ρ_r^i ℓ_i)) C^α`.
pub fn generalised_capacitance(
    geom: &ResonatorGeometry,
    contrast: &MaterialContrast,
    alpha: f64,
) -> Result<DMatrix<Complex64>> {
    contrast.check_dim(geom)?;
    let mut c = quasiperiodic_capacitance(geom, alpha).entries;
    for i in 0..geom.n() {
        let w = contrast.coefficient(i) / geom.lengths()[i];
        c.row_mut(i).scale_mut(w);
    }
    Ok(c)
}

/// Hermitian matrix similar to [`generalised_capacitance`]:
/// `D^{1/2} C^α D^{1/2}` with `D = diag(δ κ_r^i / (ρ_r^i ℓ_i))`.
pub fn symmetrised_capacitance(
    geom: &ResonatorGeometry,
    contrast: &MaterialContrast,
    alpha: f64,
) -> Result<DMatrix<Complex64>> {
    contrast.check_dim(geom)?;
    let mut c = quasiperiodic_capacitance(geom, alpha).entries;
    let d: Vec<f64> = (0..geom.n())
        .map(|i| (contrast.coefficient(i) / geom.lengths()[i]).sqrt())
        .collect();
    for i in 0..geom.n() {
        for j in 0..geom.n() {
            c[(i, j)] *= d[i] * d[j];
        }
    }
    Ok(c)
}

/// Real-space coupling block between a cell and the cell `cell_offset` to its
/// left.
#[derive(Debug, Clone, PartialEq)]
pub struct RealspaceCapacitanceBlock {
    pub cell_offset: i64,
    pub entries: DMatrix<f64>,
}

/// Block `C^m` of the infinite-chain capacitance operator, so that row block
/// `m` of the chain reads `Σ_n C^{m-n} u_n`.
///
/// With this convention `C^α = Σ_m C^m e^{-iαmL}`.
pub fn realspace_capacitance(geom: &ResonatorGeometry, m: i64) -> RealspaceCapacitanceBlock {
    let n = geom.n();
    let g = geom.gaps();
    let mut c = DMatrix::<f64>::zeros(n, n);
    match m {
        0 => {
            for i in 0..n {
                c[(i, i)] = 1.0 / geom.gap_before(i) + 1.0 / g[i];
                if i + 1 < n {
                    c[(i, i + 1)] = -1.0 / g[i];
                    c[(i + 1, i)] = -1.0 / g[i];
                }
            }
        }
        1 => c[(0, n - 1)] = -1.0 / g[n - 1],
        -1 => c[(n - 1, 0)] = -1.0 / g[n - 1],
        _ => {}
    }
    RealspaceCapacitanceBlock {
        cell_offset: m,
        entries: c,
    }
}

/// `𝓘[f](α) = Σ_m f(m) e^{iαmL}` for a finitely supported sequence of arrays.
pub fn floquet_bloch(
    blocks: &BTreeMap<i64, DMatrix<Complex64>>,
    period: f64,
    alpha: f64,
) -> Result<DMatrix<Complex64>> {
    let mut it = blocks.values();
    let first = it.next().ok_or_else(|| invalid("empty block sequence"))?;
    let shape = first.shape();
    let mut out = DMatrix::zeros(shape.0, shape.1);
    for (&m, b) in blocks {
        if b.shape() != shape {
            return Err(invalid("blocks must share one shape"));
        }
        out += b * Complex64::from_polar(1.0, alpha * m as f64 * period);
    }
    Ok(out)
}

/// Uniform grid of `count` nodes covering the zone once, `(-π/L, π/L]`
/// shifted so both ends are not sampled twice.
pub fn periodic_alpha_grid(period: f64, count: usize) -> Vec<f64> {
    let h = 2.0 * PI / (period * count as f64);
    (0..count).map(|k| -PI / period + (k as f64 + 1.0) * h).collect()
}

/// Uniform grid of `count` nodes including both zone edges.
pub fn closed_alpha_grid(period: f64, count: usize) -> Vec<f64> {
    let h = 2.0 * PI / (period * (count - 1) as f64);
    (0..count).map(|k| -PI / period + k as f64 * h).collect()
}

/// Trapezoid weights (summing to one) for a uniform α grid spanning the zone.
///
/// Accepts either a periodic grid (`count · h = 2π/L`) or a closed grid that
/// includes both endpoints (`(count-1) · h = 2π/L`).
pub fn trapezoid_weights(alphas: &[f64], period: f64) -> Result<Vec<f64>> {
    let n = alphas.len();
    if n < 2 {
        return Err(invalid("quadrature grid needs at least two nodes"));
    }
    let h = alphas[1] - alphas[0];
    let zone = 2.0 * PI / period;
    let tol = 1e-9 * zone;
    if !(h > 0.0) || alphas.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > tol) {
        return Err(invalid("quadrature grid must be uniformly spaced and increasing"));
    }
    if ((n as f64) * h - zone).abs() < tol * n as f64 {
        Ok(vec![1.0 / n as f64; n])
    } else if (((n - 1) as f64) * h - zone).abs() < tol * n as f64 {
        let mut w = vec![1.0 / (n - 1) as f64; n];
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
        Ok(w)
    } else {
        Err(invalid(format!(
            "grid of {n} nodes with spacing {h} does not span the zone of width {zone}"
        )))
    }
}

/// `𝓘⁻¹[F](m) = (L/2π) ∫ F(α) e^{-iαmL} dα` by the trapezoid rule.
pub fn inverse_floquet_bloch(
    alphas: &[f64],
    samples: &[DMatrix<Complex64>],
    period: f64,
    m: i64,
) -> Result<DMatrix<Complex64>> {
    if alphas.len() != samples.len() {
        return Err(invalid("one sample per grid node is required"));
    }
    let weights = trapezoid_weights(alphas, period)?;
    let shape = samples[0].shape();
    let mut out = DMatrix::zeros(shape.0, shape.1);
    for ((a, f), w) in alphas.iter().zip(samples).zip(weights) {
        if f.shape() != shape {
            return Err(invalid("samples must share one shape"));
        }
        out += f * Complex64::from_polar(w, -a * m as f64 * period);
    }
    Ok(out)
}
