//! Defect resonances of a single-resonator chain as roots of
//! `det(I - 𝓗 𝒯(ω))`.
//!
//! Harmonics are ordered `n = K, K-1, ..., -K`; row `n` of `Γ^α(ω)` holds
//! `γ_k^n` in the column of harmonic `n + k`. Couplings to harmonics outside
//! `[-K, K]` are dropped (square truncation).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{generalised_capacitance, periodic_alpha_grid, MaterialContrast, ResonatorGeometry};
use crate::linalg::{log_det, BandedLu, BandedMatrix, LogDet};
use crate::modulation::ModulationProfile;

pub const MIN_QUAD_POINTS: usize = 64;
pub const DEFAULT_QUAD_POINTS: usize = 512;
pub const MAX_ITERATIONS: usize = 100;
/// Smallest relative pivot accepted when factoring `Γ^α`.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

type C64 = Complex64;

/// `(γ₂ⁿ, γ₁ⁿ, γ₀ⁿ, γ₋₁ⁿ, γ₋₂ⁿ)` for capacitance value `cap = 𝒞^α`.
pub fn gamma_coeffs(n: i64, omega: C64, cap: f64, omega_mod: f64, eps_kappa: f64, eps_s: f64) -> [C64; 5] {
    let w = |k: i64| omega + (n + k) as f64 * omega_mod;
    let q = eps_kappa * eps_s / 4.0;
    let big = omega_mod;
    let g2 = q * w(2) * w(2) - big * q * w(2);
    let g1 = cap * eps_s / 2.0 - big * (eps_kappa / 2.0) * w(1) + (eps_kappa + eps_s) / 2.0 * w(1) * w(1);
    let g0 = cap + (eps_s * eps_kappa / 2.0 + 1.0) * w(0) * w(0);
    let gm1 = cap * eps_s / 2.0 + big * (eps_kappa / 2.0) * w(-1) + (eps_kappa + eps_s) / 2.0 * w(-1) * w(-1);
    let gm2 = q * w(-2) * w(-2) + big * q * w(-2);
    [g2, g1, g0, gm1, gm2]
}

/// Matrix index of harmonic `n`.
fn slot(n: i64, k: usize) -> usize {
    (k as i64 - n) as usize
}

/// Single-resonator chain with a cosine modulation of zero phase.
#[derive(Debug, Clone)]
pub struct ToeplitzProblem {
    geometry: ResonatorGeometry,
    contrast: MaterialContrast,
    omega_mod: f64,
    eps_kappa: f64,
    eps_s: f64,
    /// `η^m` for `m = 0..=M`.
    etas: Vec<f64>,
    k: usize,
    quad_points: usize,
}

impl ToeplitzProblem {
    pub fn new(
        geom: &ResonatorGeometry,
        contrast: &MaterialContrast,
        profile: &ModulationProfile,
        etas: &[f64],
        k: usize,
        quad_points: usize,
    ) -> Result<Self> {
        if geom.n() != 1 || contrast.n() != 1 || profile.n() != 1 {
            return Err(Error::Unsupported(format!(
                "the Toeplitz formulation needs one resonator per cell, got {}",
                geom.n()
            )));
        }
        contrast.validate()?;
        let cos = profile.cosine().ok_or_else(|| {
            Error::Unsupported("the Toeplitz formulation needs a single-harmonic cosine modulation".into())
        })?;
        if cos.phases_kappa[0] != 0.0 || cos.phases_s[0] != 0.0 {
            return Err(Error::Unsupported(
                "the Toeplitz formulation needs zero modulation phases".into(),
            ));
        }
        if etas.is_empty() || etas.iter().all(|e| *e == 0.0) {
            return Err(invalid("at least one defect strength eta must be nonzero"));
        }
        if etas.iter().any(|e| !e.is_finite()) {
            return Err(invalid("defect strengths must be finite"));
        }
        if quad_points < MIN_QUAD_POINTS {
            return Err(invalid(format!(
                "at least {MIN_QUAD_POINTS} quadrature points are required, got {quad_points}"
            )));
        }
        Ok(Self {
            geometry: geom.clone(),
            contrast: contrast.clone(),
            omega_mod: profile.omega_mod(),
            eps_kappa: cos.eps_kappa,
            eps_s: cos.eps_s,
            etas: etas.to_vec(),
            k,
            quad_points,
        })
    }

    pub fn harmonics(&self) -> usize {
        2 * self.k + 1
    }

    /// Dimension `(M + 1)(2K + 1)` of the assembled system.
    pub fn dim(&self) -> usize {
        self.etas.len() * self.harmonics()
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    fn capacitance(&self, alpha: f64) -> f64 {
        // 𝒞^α is real for N = 1
        generalised_capacitance(&self.geometry, &self.contrast, alpha)
            .map(|c| c[(0, 0)].re)
            .unwrap_or(f64::NAN)
    }

    /// Banded `Γ^α(ω)`.
    pub fn gamma(&self, alpha: f64, omega: C64) -> BandedMatrix {
        let k = self.k as i64;
        let cap = self.capacitance(alpha);
        let mut g = BandedMatrix::zeros(self.harmonics(), 2, 2);
        for n in -k..=k {
            let c = gamma_coeffs(n, omega, cap, self.omega_mod, self.eps_kappa, self.eps_s);
            for (j, shift) in [2i64, 1, 0, -1, -2].into_iter().enumerate() {
                let col = n + shift;
                if col.abs() <= k && c[j] != C64::new(0.0, 0.0) {
                    g.set(slot(n, self.k), slot(col, self.k), c[j]);
                }
            }
        }
        g
    }

    /// Defect block `G^m`.
    pub fn defect_block(&self, m: usize) -> DMatrix<C64> {
        let h = self.harmonics();
        let eta = self.etas[m];
        DMatrix::from_fn(h, h, |r, c| match r.abs_diff(c) {
            0 => C64::new(eta, 0.0),
            1 => C64::new(eta * self.eps_s / 2.0, 0.0),
            _ => C64::new(0.0, 0.0),
        })
    }

    /// `T^m(ω)` for `m = -M..=M`, indexed by `m + M`.
    pub fn toeplitz_blocks(&self, omega: C64) -> Result<Vec<DMatrix<C64>>> {
        let h = self.harmonics();
        let max_m = self.etas.len() as i64 - 1;
        let period = self.geometry.period();
        let alphas = periodic_alpha_grid(period, self.quad_points);
        let id = DMatrix::<C64>::identity(h, h);
        let per_node: Vec<(f64, DMatrix<C64>)> = alphas
            .par_iter()
            .map(|&alpha| {
                let lu = BandedLu::factor(&self.gamma(alpha, omega));
                if !(lu.min_relative_pivot > PIVOT_TOLERANCE) {
                    return Err(Error::NearSingular {
                        alpha,
                        pivot: lu.min_relative_pivot,
                    });
                }
                let cap = self.capacitance(alpha);
                Ok((alpha, lu.solve_matrix(&id) * C64::new(cap, 0.0)))
            })
            .collect::<Result<_>>()?;
        let scale = C64::new(-1.0 / self.quad_points as f64, 0.0);
        Ok((-max_m..=max_m)
            .map(|m| {
                let mut acc = DMatrix::<C64>::zeros(h, h);
                for (alpha, x) in &per_node {
                    acc += x * C64::from_polar(1.0, alpha * m as f64 * period);
                }
                acc * scale
            })
            .collect())
    }

    /// `I - 𝓗 𝒯(ω)` with `𝒯` block `(p, q) = T^{p-q}`.
    pub fn system_matrix(&self, omega: C64) -> Result<DMatrix<C64>> {
        let blocks = self.toeplitz_blocks(omega)?;
        let h = self.harmonics();
        let cells = self.etas.len();
        let max_m = cells - 1;
        let mut a = DMatrix::<C64>::identity(self.dim(), self.dim());
        for p in 0..cells {
            if self.etas[p] == 0.0 {
                continue;
            }
            let g = self.defect_block(p);
            for q in 0..cells {
                let t = &blocks[p + max_m - q];
                let prod = &g * t;
                let mut view = a.view_mut((p * h, q * h), (h, h));
                view -= prod;
            }
        }
        Ok(a)
    }

    pub fn log_determinant(&self, omega: C64) -> Result<LogDet> {
        Ok(log_det(&self.system_matrix(omega)?))
    }

    pub fn determinant(&self, omega: C64) -> Result<C64> {
        Ok(self.log_determinant(omega)?.value())
    }

    /// Secant iteration on `det(I - 𝓗𝒯(ω))`, switching to Muller steps when a
    /// secant step fails to reduce the residual. Converges when
    /// `|det| < tol · dim`.
    pub fn find_root(&self, guess: C64, tol: f64) -> Result<RootReport> {
        let target = tol * self.dim() as f64;
        let eval = |w: C64| self.log_determinant(w);
        let mut trace = Vec::new();
        let h0 = if guess.norm() > 0.0 { 1e-3 * guess.norm() } else { 1e-6 };
        let mut pts: Vec<(C64, LogDet)> = Vec::with_capacity(3);
        for w in [guess, guess + h0] {
            let d = eval(w)?;
            trace.push(RootStep { omega: w, residual: d.ln_abs.exp() });
            if d.ln_abs.exp() < target {
                return Ok(RootReport::converged(w, d.ln_abs.exp(), trace));
            }
            pts.push((w, d));
        }
        for _ in 0..MAX_ITERATIONS {
            let n = pts.len();
            let (w1, d1) = pts[n - 1];
            let (w0, d0) = pts[n - 2];
            // f0/f1 computed in log form
            let r = ratio(&d0, &d1);
            let mut step = -(w1 - w0) / (C64::new(1.0, 0.0) - r);
            let secant_ok = step.is_finite() && d1.ln_abs <= d0.ln_abs;
            if !secant_ok && n >= 3 {
                if let Some(s) = muller_step(pts[n - 3], pts[n - 2], pts[n - 1]) {
                    step = s;
                }
            }
            if !step.is_finite() {
                break;
            }
            let mut next = None;
            for _ in 0..12 {
                match eval(w1 + step) {
                    Ok(d) => {
                        next = Some((w1 + step, d));
                        break;
                    }
                    // stepped onto a band: shorten
                    Err(Error::NearSingular { .. }) => step *= 0.5,
                    Err(e) => return Err(e),
                }
            }
            let Some((w, d)) = next else { break };
            let residual = d.ln_abs.exp();
            trace.push(RootStep { omega: w, residual });
            if residual < target {
                return Ok(RootReport::converged(w, residual, trace));
            }
            pts.push((w, d));
            if pts.len() > 3 {
                pts.remove(0);
            }
        }
        let residual = trace.last().map_or(f64::NAN, |s| s.residual);
        Err(Error::RootFailure {
            iterations: trace.len(),
            residual,
        })
    }
}

/// `f_a / f_b` from log-determinants.
fn ratio(a: &LogDet, b: &LogDet) -> C64 {
    C64::from_polar((a.ln_abs - b.ln_abs).exp(), a.phase - b.phase)
}

/// Muller step from the newest point `c`, with values scaled by `f_c`.
fn muller_step(a: (C64, LogDet), b: (C64, LogDet), c: (C64, LogDet)) -> Option<C64> {
    let (x0, x1, x2) = (a.0, b.0, c.0);
    let f0 = ratio(&a.1, &c.1);
    let f1 = ratio(&b.1, &c.1);
    let f2 = C64::new(1.0, 0.0);
    let h1 = x1 - x0;
    let h2 = x2 - x1;
    let d1 = (f1 - f0) / h1;
    let d2 = (f2 - f1) / h2;
    let aa = (d2 - d1) / (h2 + h1);
    let bb = aa * h2 + d2;
    let disc = (bb * bb - 4.0 * f2 * aa).sqrt();
    let den = if (bb + disc).norm() >= (bb - disc).norm() { bb + disc } else { bb - disc };
    let step = -2.0 * f2 / den;
    step.is_finite().then_some(step)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootStep {
    pub omega: C64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootReport {
    pub root: C64,
    pub residual: f64,
    pub iterations: usize,
    pub trace: Vec<RootStep>,
}

impl RootReport {
    fn converged(root: C64, residual: f64, trace: Vec<RootStep>) -> Self {
        Self {
            root,
            residual,
            iterations: trace.len(),
            trace,
        }
    }
}

/// Groups roots closer than `tol` (relative to `max(1, |ω|)` scale of the
/// first member) and keeps the first of each group.
pub fn dedup_roots(roots: &[C64], tol: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for (i, r) in roots.iter().enumerate() {
        if !kept.iter().any(|&k| (roots[k] - r).norm() <= tol * roots[k].norm().max(1e-300)) {
            kept.push(i);
        }
    }
    kept
}
