//! Time-periodic material modulations and temporal defects.
//!
//! The stored quantities are the inverse material parameters `g_i = 1/κ_i(t)`
//! and `σ_i = 1/s_i(t)`, each a finite Fourier series in `e^{inΩt}`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::geometry::ResonatorGeometry;

/// Which inverse material parameter to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// `1/κ_i(t)`
    InvKappa,
    /// `1/s_i(t)`
    InvS,
}

impl Quantity {
    fn label(self) -> &'static str {
        match self {
            Quantity::InvKappa => "1/kappa",
            Quantity::InvS => "1/s",
        }
    }
}

/// Parameters of `1/κ_i = 1 + ε_κ cos(Ωt + φ_κ^i)`, `1/s_i = 1 + ε_s cos(Ωt + φ_s^i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineParams {
    pub eps_kappa: f64,
    pub eps_s: f64,
    pub phases_kappa: Vec<f64>,
    pub phases_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationProfile {
    omega_mod: f64,
    order: usize,
    /// `kappa[i][n + order]` is the coefficient of `e^{inΩt}` in `1/κ_i`.
    kappa: Vec<Vec<Complex64>>,
    s: Vec<Vec<Complex64>>,
    cosine: Option<CosineParams>,
}

const POSITIVITY_SAMPLES: usize = 512;

impl ModulationProfile {
    /// Single-harmonic cosine modulation; phases are given per resonator.
    pub fn from_cosine(
        omega_mod: f64,
        eps_kappa: f64,
        eps_s: f64,
        phases_kappa: &[f64],
        phases_s: &[f64],
    ) -> Result<Self> {
        check_omega(omega_mod)?;
        for (name, eps) in [("eps_kappa", eps_kappa), ("eps_s", eps_s)] {
            if !(0.0..1.0).contains(&eps) {
                return Err(invalid(format!("{name} must lie in [0, 1), got {eps}")));
            }
        }
        if phases_kappa.is_empty() || phases_kappa.len() != phases_s.len() {
            return Err(invalid("one kappa phase and one s phase per resonator are required"));
        }
        let table = |eps: f64, phi: f64| {
            let c = Complex64::from_polar(eps / 2.0, phi);
            vec![c.conj(), Complex64::new(1.0, 0.0), c]
        };
        Ok(Self {
            omega_mod,
            order: 1,
            kappa: phases_kappa.iter().map(|&p| table(eps_kappa, p)).collect(),
            s: phases_s.iter().map(|&p| table(eps_s, p)).collect(),
            cosine: Some(CosineParams {
                eps_kappa,
                eps_s,
                phases_kappa: phases_kappa.to_vec(),
                phases_s: phases_s.to_vec(),
            }),
        })
    }

    /// Constant material parameters (`1/κ_i = 1/s_i = 1`).
    pub fn unmodulated(n: usize, omega_mod: f64) -> Result<Self> {
        let zeros = vec![0.0; n];
        Self::from_cosine(omega_mod, 0.0, 0.0, &zeros, &zeros)
    }

    /// General harmonic tables: `kappa[i]` and `s[i]` hold the coefficients for
    /// `n = -M..=M` in order.
    pub fn from_harmonics(
        omega_mod: f64,
        kappa: Vec<Vec<Complex64>>,
        s: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        check_omega(omega_mod)?;
        if kappa.is_empty() || kappa.len() != s.len() {
            return Err(invalid("one kappa table and one s table per resonator are required"));
        }
        let width = kappa[0].len();
        if width % 2 == 0 || kappa.iter().chain(&s).any(|t| t.len() != width) {
            return Err(invalid("harmonic tables must all have the same odd length 2M+1"));
        }
        let order = width / 2;
        for (q, tables) in [("kappa", &kappa), ("s", &s)] {
            for (i, t) in tables.iter().enumerate() {
                for n in 0..=order {
                    let a = t[order + n];
                    let b = t[order - n];
                    if (a - b.conj()).norm() > 1e-12 * (1.0 + a.norm()) {
                        return Err(invalid(format!(
                            "{q} table of resonator {i} is not conjugate symmetric at n = {n}"
                        )));
                    }
                }
            }
        }
        let p = Self {
            omega_mod,
            order,
            kappa,
            s,
            cosine: None,
        };
        for q in [Quantity::InvKappa, Quantity::InvS] {
            for i in 0..p.n() {
                for k in 0..POSITIVITY_SAMPLES {
                    let t = p.period() * k as f64 / POSITIVITY_SAMPLES as f64;
                    let v = p.eval_inv(q, i, t, 0);
                    if !(v > 0.0) {
                        return Err(invalid(format!(
                            "{} of resonator {i} is not positive ({v} at t = {t})",
                            q.label()
                        )));
                    }
                }
            }
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.kappa.len()
    }

    pub fn omega_mod(&self) -> f64 {
        self.omega_mod
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega_mod
    }

    /// Highest harmonic `M`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn cosine(&self) -> Option<&CosineParams> {
        self.cosine.as_ref()
    }

    /// Coefficient of `e^{inΩt}`; zero beyond the stored order.
    pub fn harmonic(&self, q: Quantity, i: usize, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.order {
            return Complex64::new(0.0, 0.0);
        }
        self.table(q, i)[(n + self.order as i64) as usize]
    }

    /// True when every non-constant harmonic vanishes.
    pub fn is_static(&self) -> bool {
        self.kappa.iter().chain(&self.s).all(|t| {
            t.iter()
                .enumerate()
                .all(|(k, c)| k == self.order || c.norm() == 0.0)
        })
    }

    fn table(&self, q: Quantity, i: usize) -> &[Complex64] {
        match q {
            Quantity::InvKappa => &self.kappa[i],
            Quantity::InvS => &self.s[i],
        }
    }

    /// `d^order/dt^order` of `1/κ_i` or `1/s_i` at `t`.
    pub fn eval_inv(&self, q: Quantity, i: usize, t: f64, order: u32) -> f64 {
        let m = self.order as i64;
        let mut acc = 0.0;
        for (k, c) in self.table(q, i).iter().enumerate() {
            let n = k as i64 - m;
            if c.norm() == 0.0 {
                continue;
            }
            let w = n as f64 * self.omega_mod;
            let factor = Complex64::new(0.0, w).powu(order);
            // reduce the phase modulo 2π so t and t + T give identical results
            let phase = (w * t).rem_euclid(2.0 * PI);
            acc += (c * factor * Complex64::from_polar(1.0, phase)).re;
        }
        acc
    }

    fn positive_inv(&self, q: Quantity, i: usize, t: f64) -> Result<f64> {
        let v = self.eval_inv(q, i, t, 0);
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::SingularModulation {
                what: format!("{}[{i}]", q.label()),
                t,
                value: v,
            })
        }
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("modulation frequency must be positive, got {omega}")))
    }
}

/// Diagonals of `W₁(t)`, `W₂(t)`, `W₃(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WMatrices {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub w3: Vec<f64>,
}

/// `W₁ = √κ s/ℓ`, `W₂ = √κ/s`, `W₃ = -g''/(2g) + g'²/(4g²)` with `g = 1/κ`.
pub fn w_matrices(profile: &ModulationProfile, geom: &ResonatorGeometry, t: f64) -> Result<WMatrices> {
    if profile.n() != geom.n() {
        return Err(invalid(format!(
            "modulation has {} resonators, geometry has {}",
            profile.n(),
            geom.n()
        )));
    }
    let n = geom.n();
    let mut w = WMatrices {
        w1: Vec::with_capacity(n),
        w2: Vec::with_capacity(n),
        w3: Vec::with_capacity(n),
    };
    for i in 0..n {
        let g = profile.positive_inv(Quantity::InvKappa, i, t)?;
        let sigma = profile.positive_inv(Quantity::InvS, i, t)?;
        let g1 = profile.eval_inv(Quantity::InvKappa, i, t, 1);
        let g2 = profile.eval_inv(Quantity::InvKappa, i, t, 2);
        let sqrt_kappa = g.sqrt().recip();
        let s = sigma.recip();
        w.w1.push(sqrt_kappa * s / geom.lengths()[i]);
        w.w2.push(sqrt_kappa / s);
        w.w3.push(-g2 / (2.0 * g) + g1 * g1 / (4.0 * g * g));
    }
    Ok(w)
}

/// Compactly supported perturbation `c_{m,i} f(t)` of `1/κ_i` with
/// `f(t) = exp(-(t/t0 - 1)²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDefect {
    coefficients: BTreeMap<(i64, usize), f64>,
    t0: f64,
}

impl TimeDefect {
    /// `entries` are `(cell, resonator, c)` triples; repeated sites add up.
    pub fn new(entries: &[(i64, usize, f64)], t0: f64) -> Result<Self> {
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(invalid(format!("t0 must be positive, got {t0}")));
        }
        let mut coefficients = BTreeMap::new();
        for &(m, i, c) in entries {
            if !c.is_finite() {
                return Err(invalid(format!("defect coefficient at ({m}, {i}) is not finite")));
            }
            *coefficients.entry((m, i)).or_insert(0.0) += c;
        }
        Ok(Self { coefficients, t0 })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn entries(&self) -> impl Iterator<Item = (i64, usize, f64)> + '_ {
        self.coefficients.iter().map(|(&(m, i), &c)| (m, i, c))
    }

    pub fn coefficient(&self, m: i64, i: usize) -> f64 {
        self.coefficients.get(&(m, i)).copied().unwrap_or(0.0)
    }

    /// True when every coefficient is zero.
    pub fn is_trivial(&self) -> bool {
        self.coefficients.values().all(|c| *c == 0.0)
    }

    pub fn envelope(&self, t: f64) -> f64 {
        let x = t / self.t0 - 1.0;
        (-x * x).exp()
    }

    pub fn eval(&self, m: i64, i: usize, t: f64) -> f64 {
        let c = self.coefficient(m, i);
        if c == 0.0 {
            0.0
        } else {
            c * self.envelope(t)
        }
    }
}
