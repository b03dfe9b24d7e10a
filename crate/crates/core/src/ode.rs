//! Fixed-step RK4 for linear systems `y' = A(t) y`.
//!
//! Right-hand sides act on a block of column vectors at once, so a
//! fundamental matrix and a single trajectory share one code path.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::log_det;

pub type CMatrix = DMatrix<Complex64>;

/// Linear, possibly time-dependent, first-order system.
pub trait LinearSystem: Sync {
    fn dim(&self) -> usize;

    /// Writes `A(t) y` into `out` (same shape as `y`).
    fn apply(&self, t: f64, y: &CMatrix, out: &mut CMatrix) -> Result<()>;
}

pub const MIN_STEPS: usize = 32;
pub const MAX_STEPS: usize = 1 << 20;
pub const DET_TOLERANCE: f64 = 1e-8;

struct Workspace {
    k1: CMatrix,
    k2: CMatrix,
    k3: CMatrix,
    k4: CMatrix,
    tmp: CMatrix,
}

impl Workspace {
    fn new(rows: usize, cols: usize) -> Self {
        let z = || CMatrix::zeros(rows, cols);
        Self {
            k1: z(),
            k2: z(),
            k3: z(),
            k4: z(),
            tmp: z(),
        }
    }
}

fn rk4_step<S: LinearSystem + ?Sized>(
    sys: &S,
    t: f64,
    h: f64,
    y: &mut CMatrix,
    ws: &mut Workspace,
) -> Result<()> {
    let half = Complex64::new(0.5 * h, 0.0);
    let full = Complex64::new(h, 0.0);
    sys.apply(t, y, &mut ws.k1)?;
    ws.tmp.copy_from(y);
    add_scaled(&mut ws.tmp, half, &ws.k1);
    sys.apply(t + 0.5 * h, &ws.tmp, &mut ws.k2)?;
    ws.tmp.copy_from(y);
    add_scaled(&mut ws.tmp, half, &ws.k2);
    sys.apply(t + 0.5 * h, &ws.tmp, &mut ws.k3)?;
    ws.tmp.copy_from(y);
    add_scaled(&mut ws.tmp, full, &ws.k3);
    sys.apply(t + h, &ws.tmp, &mut ws.k4)?;

    let sixth = Complex64::new(h / 6.0, 0.0);
    let third = Complex64::new(h / 3.0, 0.0);
    add_scaled(y, sixth, &ws.k1);
    add_scaled(y, third, &ws.k2);
    add_scaled(y, third, &ws.k3);
    add_scaled(y, sixth, &ws.k4);
    Ok(())
}

fn add_scaled(dst: &mut CMatrix, a: Complex64, x: &CMatrix) {
    for (d, v) in dst.iter_mut().zip(x.iter()) {
        *d += a * v;
    }
}

/// Integrates from `t0` to `t1` in `steps` equal RK4 steps.
pub fn propagate<S: LinearSystem + ?Sized>(
    sys: &S,
    t0: f64,
    t1: f64,
    steps: usize,
    y0: &CMatrix,
) -> Result<CMatrix> {
    let mut y = y0.clone();
    let mut ws = Workspace::new(y.nrows(), y.ncols());
    let h = (t1 - t0) / steps as f64;
    for k in 0..steps {
        rk4_step(sys, t0 + k as f64 * h, h, &mut y, &mut ws)?;
    }
    Ok(y)
}

/// Integrates over `[t0, t1]`, invoking `observe(t, y)` at `t0` and after every
/// `steps_per_sample` steps; `samples` intervals in total.
pub fn propagate_sampled<S, F>(
    sys: &S,
    t0: f64,
    t1: f64,
    samples: usize,
    steps_per_sample: usize,
    y0: &CMatrix,
    mut observe: F,
) -> Result<CMatrix>
where
    S: LinearSystem + ?Sized,
    F: FnMut(f64, &CMatrix),
{
    let mut y = y0.clone();
    let mut ws = Workspace::new(y.nrows(), y.ncols());
    let total = samples * steps_per_sample;
    let h = (t1 - t0) / total as f64;
    observe(t0, &y);
    for s in 0..samples {
        for k in 0..steps_per_sample {
            let step = s * steps_per_sample + k;
            rk4_step(sys, t0 + step as f64 * h, h, &mut y, &mut ws)?;
        }
        observe(t0 + ((s + 1) * steps_per_sample) as f64 * h, &y);
    }
    Ok(y)
}

/// One-period fundamental matrix together with the resolution used.
#[derive(Debug, Clone)]
pub struct Monodromy {
    pub matrix: CMatrix,
    pub period: f64,
    pub steps: usize,
    /// `|det(matrix) - 1|` at the accepted resolution.
    pub det_deviation: f64,
}

/// Fundamental matrix over `[t0, t0 + period]`, doubling the step count from
/// `start_steps` until `|det - 1| < DET_TOLERANCE`.
///
/// Only valid for trace-free systems, whose exact propagator has unit
/// determinant.
pub fn monodromy<S: LinearSystem + ?Sized>(
    sys: &S,
    t0: f64,
    period: f64,
    start_steps: usize,
) -> Result<Monodromy> {
    if start_steps < MIN_STEPS {
        return Err(Error::Validation(format!(
            "at least {MIN_STEPS} integration steps are required, got {start_steps}"
        )));
    }
    let n = sys.dim();
    let id = CMatrix::identity(n, n);
    let mut steps = start_steps;
    loop {
        let matrix = propagate(sys, t0, t0 + period, steps, &id)?;
        let det_deviation = (log_det(&matrix).value() - Complex64::new(1.0, 0.0)).norm();
        if det_deviation < DET_TOLERANCE {
            return Ok(Monodromy {
                matrix,
                period,
                steps,
                det_deviation,
            });
        }
        if steps >= MAX_STEPS || !det_deviation.is_finite() {
            return Err(Error::IntegrationAccuracy {
                steps,
                deviation: det_deviation,
                tolerance: DET_TOLERANCE,
            });
        }
        steps *= 2;
    }
}

/// `y' = A y` with a constant dense `A`.
pub struct ConstantSystem(pub CMatrix);

impl LinearSystem for ConstantSystem {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, _t: f64, y: &CMatrix, out: &mut CMatrix) -> Result<()> {
        self.0.mul_to(y, out);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(c: f64) -> ConstantSystem {
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 1)] = Complex64::new(1.0, 0.0);
        a[(1, 0)] = Complex64::new(-c, 0.0);
        ConstantSystem(a)
    }

    #[test]
    fn harmonic_oscillator_closed_form() {
        let c: f64 = 0.7;
        let t = 3.3;
        let m = monodromy(&oscillator(c), 0.0, t, 1024).unwrap().matrix;
        let w = c.sqrt();
        let expected = [
            [(w * t).cos(), (w * t).sin() / w],
            [-w * (w * t).sin(), (w * t).cos()],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[(i, j)].re - expected[i][j]).abs() < 1e-8);
                assert!(m[(i, j)].im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn free_particle_is_shear() {
        let m = monodromy(&oscillator(0.0), 0.0, 5.0, 32).unwrap().matrix;
        assert!((m[(0, 1)].re - 5.0).abs() < 1e-12);
        assert!((m[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!(m[(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn too_few_steps_rejected() {
        assert!(matches!(
            monodromy(&oscillator(1.0), 0.0, 1.0, 8),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn stiff_period_doubles_steps() {
        // 32 steps over many oscillations cannot hold det = 1.
        let r = monodromy(&oscillator(1.0), 0.0, 200.0, 32).unwrap();
        assert!(r.steps > 32);
        assert!(r.det_deviation < DET_TOLERANCE);
    }

    #[test]
    fn sampled_matches_plain() {
        let sys = oscillator(0.3);
        let y0 = CMatrix::from_element(2, 1, Complex64::new(1.0, 0.0));
        let plain = propagate(&sys, 0.0, 4.0, 40, &y0).unwrap();
        let mut count = 0;
        let sampled = propagate_sampled(&sys, 0.0, 4.0, 8, 5, &y0, |_, _| count += 1).unwrap();
        assert_eq!(count, 9);
        assert!((plain - sampled).norm() < 1e-14);
    }
}
