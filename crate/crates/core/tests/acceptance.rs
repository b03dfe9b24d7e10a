//! Acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed; the
//! process exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resochain::defect_lab::{
    build_supercell, evolve, first_cell, floquet_defect_spectrum, localisation_threshold, mass_near,
    static_defect_modes, EvolveOptions, InitialState, SpaceDefect, SupercellSystem,
};
use resochain::floquet_band::{
    band_sweep, canonical_frequency, detect_band_gaps, detect_momentum_gaps, GapTolerances, DEFAULT_START_STEPS,
};
use resochain::geometry::{
    floquet_bloch, inverse_floquet_bloch, periodic_alpha_grid, MaterialContrast, ResonatorGeometry,
};
use resochain::modulation::{ModulationProfile, TimeDefect};
use resochain::toeplitz_roots::{ToeplitzProblem, DEFAULT_QUAD_POINTS};
use resochain::{period, Complex64};

const OMEGA: f64 = 0.034;
const DELTA: f64 = 1e-4;
const PHASES: [f64; 3] = [0.0, PI, PI / 2.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(id: u32, title: &str, limit: Duration, check: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = check();
    let elapsed = start.elapsed();
    let pass = out.pass && elapsed < limit;
    println!(
        "criterion {id:>2} {}: {title} | {} | {:.2} s (limit {} s)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn fig2_geometry() -> ResonatorGeometry {
    ResonatorGeometry::new(&[1.0; 3], &[1.0, 2.0, 1.0]).unwrap()
}

fn fig3_geometry() -> ResonatorGeometry {
    ResonatorGeometry::new(&[1.0; 3], &[2.0; 3]).unwrap()
}

fn contrast3() -> MaterialContrast {
    MaterialContrast::uniform(3, DELTA).unwrap()
}

fn modulated() -> ModulationProfile {
    ModulationProfile::from_cosine(OMEGA, 0.4, 0.2, &PHASES, &PHASES).unwrap()
}

fn unmodulated(n: usize) -> ModulationProfile {
    ModulationProfile::unmodulated(n, OMEGA).unwrap()
}

fn fig3_supercell(profile: &ModulationProfile, defect: bool) -> SupercellSystem {
    let space = if defect {
        SpaceDefect::none().with_wave_speed(0, 1, 2.0)
    } else {
        SpaceDefect::none()
    };
    build_supercell(&fig3_geometry(), &contrast3(), profile, 20, &space, None, 0.01).unwrap()
}

fn static_dispersion() -> Outcome {
    let geom = ResonatorGeometry::new(&[1.0], &[1.0]).unwrap();
    let contrast = MaterialContrast::uniform(1, DELTA).unwrap();
    let bands = band_sweep(&geom, &contrast, &unmodulated(1), 64, DEFAULT_START_STEPS).unwrap();
    let mut worst: f64 = 0.0;
    for (alpha, row) in bands.alpha_grid.iter().zip(&bands.bands) {
        let exact = (DELTA * (2.0 - 2.0 * (alpha * geom.period()).cos())).sqrt();
        // quasifrequencies are reported as the canonical member of {ω, -ω} mod Ω
        let want = canonical_frequency(Complex64::new(exact, 0.0), OMEGA);
        worst = worst.max((row[0] - want).norm());
    }
    Outcome {
        pass: bands.alpha_grid.len() == 64 && worst < 1e-8,
        detail: format!("max |ω - ω_exact| mod Ω = {worst:.3e} over 64 α"),
    }
}

fn fig2_sweep_checks() -> (Outcome, Outcome) {
    let bands = band_sweep(&fig2_geometry(), &contrast3(), &modulated(), 101, DEFAULT_START_STEPS).unwrap();
    let worst = bands.det_deviation.iter().cloned().fold(0.0, f64::max);
    let liouville = Outcome {
        pass: bands.alpha_grid.len() == 101 && worst < 1e-8,
        detail: format!("max |det M - 1| = {worst:.3e} over 101 α"),
    };
    let tol = GapTolerances::for_omega(OMEGA);
    let band_gaps = detect_band_gaps(&bands, tol);
    let momentum_gaps = detect_momentum_gaps(&bands, tol);
    let gaps = Outcome {
        pass: !band_gaps.is_empty() && !momentum_gaps.is_empty(),
        detail: format!(
            "{} band gap(s) {:?}, {} momentum gap(s)",
            band_gaps.len(),
            band_gaps.first().map(|g| (format!("{:.5}", g.0), format!("{:.5}", g.1))),
            momentum_gaps.len()
        ),
    };
    (liouville, gaps)
}

fn period_value() -> Outcome {
    let t = period(OMEGA);
    Outcome {
        pass: (t - 184.7996).abs() < 5e-4,
        detail: format!("T = {t:.7} s"),
    }
}

fn static_localisation() -> Outcome {
    let bulk = static_defect_modes(&fig3_supercell(&unmodulated(3), false)).unwrap();
    let threshold = localisation_threshold(&bulk.d);
    let modes = static_defect_modes(&fig3_supercell(&unmodulated(3), true)).unwrap();
    let above = modes.d.iter().filter(|d| **d > threshold).count();
    let max = modes.d.iter().cloned().fold(0.0, f64::max);
    Outcome {
        pass: above == 1,
        detail: format!("{above} mode(s) above threshold {threshold:.4}; max d = {max:.4}"),
    }
}

fn modulated_hybridisation() -> Outcome {
    let p = modulated();
    let bulk = floquet_defect_spectrum(&fig3_supercell(&p, false), DEFAULT_START_STEPS).unwrap();
    let threshold = localisation_threshold(&bulk.d);
    let modes = floquet_defect_spectrum(&fig3_supercell(&p, true), DEFAULT_START_STEPS).unwrap();
    let above = modes.d.iter().filter(|d| **d > threshold).count();
    Outcome {
        pass: above >= 2,
        detail: format!("{above} of {} modes above threshold {threshold:.4}", modes.d.len()),
    }
}

fn time_defect_decay() -> Outcome {
    let geom = fig3_geometry();
    let td = TimeDefect::new(&[(0, 1, 1.0)], period(OMEGA)).unwrap();
    let sc = build_supercell(&geom, &contrast3(), &modulated(), 20, &SpaceDefect::none(), Some(&td), 0.01).unwrap();
    let defected = floquet_defect_spectrum(&sc, DEFAULT_START_STEPS).unwrap();
    let min = defected.all_lambda().fold(f64::INFINITY, f64::min);
    let clean = floquet_defect_spectrum(&fig3_supercell(&unmodulated(3), false), DEFAULT_START_STEPS).unwrap();
    let drift = clean.all_lambda().map(|l| (l - 1.0).abs()).fold(0.0, f64::max);
    // reported only: the phased modulation alone already moves λ off 1
    let plain = floquet_defect_spectrum(&fig3_supercell(&modulated(), false), DEFAULT_START_STEPS).unwrap();
    let plain_min = plain.all_lambda().fold(f64::INFINITY, f64::min);
    Outcome {
        pass: min < 1.0 - 1e-3 && drift < 1e-6,
        detail: format!(
            "defect min λ = {min:.6}; defect-free static max |λ - 1| = {drift:.3e}; defect-free modulated min λ = {plain_min:.6} (not asserted)"
        ),
    }
}

fn space_time_localisation() -> Outcome {
    let cells = 25;
    let t0 = period(OMEGA);
    let entries: Vec<(i64, usize, f64)> = (0..cells as i64).map(|k| (first_cell(cells) + k, 1, 1.0)).collect();
    let td = TimeDefect::new(&entries, t0).unwrap();
    let space = SpaceDefect::none().with_wave_speed(0, 1, 2.0);
    let sc = build_supercell(&fig2_geometry(), &contrast3(), &modulated(), cells, &space, Some(&td), 0.01).unwrap();
    let ev = evolve(&sc, &InitialState::MostDistinctPeak, &EvolveOptions::default()).unwrap();
    let ratio = ev.peak_ratio();
    let mass = mass_near(&sc, &ev.profiles[ev.peak_index()], 0, 2);
    Outcome {
        pass: ratio > 2.0 && mass > 0.5,
        detail: format!(
            "max/median d_* = {ratio:.3}, mass within ±2 cells = {mass:.3}, peak at t = {:.2} s (reference 46.7648 s, not asserted)",
            ev.peak_time()
        ),
    }
}

fn cross_method() -> Outcome {
    let geom = ResonatorGeometry::new(&[1.0], &[1.0]).unwrap();
    let contrast = MaterialContrast::uniform(1, DELTA).unwrap();
    let profile = unmodulated(1);
    let space = SpaceDefect::none().with_eta(0, 0, 0.5);
    let sc = build_supercell(&geom, &contrast, &profile, 41, &space, None, 0.0).unwrap();
    let reference = *static_defect_modes(&sc).unwrap().frequencies.last().unwrap();
    let problem = ToeplitzProblem::new(&geom, &contrast, &profile, &[0.5], 0, DEFAULT_QUAD_POINTS).unwrap();
    let edge = (4.0 * DELTA).sqrt();
    let root = problem.find_root(Complex64::new(0.0, 1.05 * edge), 1e-12).unwrap().root;
    // static roots lie on the imaginary axis: Γ = 𝒞 + ω² vanishes at ω = i·frequency
    let rel = (root.im - reference).abs() / reference;
    Outcome {
        pass: rel < 1e-3 && root.re.abs() < 1e-10,
        detail: format!("Toeplitz |ω₀| = {:.10}, supercell = {reference:.10}, rel = {rel:.2e}", root.im),
    }
}

fn transform_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let l = 3.0;
    let grid = periodic_alpha_grid(l, 16);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let random_seq = |rng: &mut ChaCha8Rng| -> BTreeMap<i64, DMatrix<Complex64>> {
            let lo = rng.gen_range(-3..=0);
            let hi = rng.gen_range(0..=3);
            (lo..=hi)
                .map(|m| {
                    let b = DMatrix::from_fn(2, 2, |_, _| {
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    });
                    (m, b)
                })
                .collect()
        };
        let f = random_seq(&mut rng);
        let g = random_seq(&mut rng);

        // round trip on a grid wider than the support
        let samples: Vec<_> = grid.iter().map(|&a| floquet_bloch(&f, l, a).unwrap()).collect();
        for m in -7..=7 {
            let back = inverse_floquet_bloch(&grid, &samples, l, m).unwrap();
            let want = f.get(&m).cloned().unwrap_or_else(|| DMatrix::zeros(2, 2));
            worst = worst.max((back - want).norm());
        }

        // 𝓘[f * g] = 𝓘[f] 𝓘[g] with (f * g)(m) = Σ_n f(m - n) g(n)
        let mut conv: BTreeMap<i64, DMatrix<Complex64>> = BTreeMap::new();
        for (&a, fa) in &f {
            for (&b, gb) in &g {
                *conv.entry(a + b).or_insert_with(|| DMatrix::zeros(2, 2)) += fa * gb;
            }
        }
        let alpha = rng.gen_range(-PI / l..PI / l);
        let lhs = floquet_bloch(&conv, l, alpha).unwrap();
        let rhs = floquet_bloch(&f, l, alpha).unwrap() * floquet_bloch(&g, l, alpha).unwrap();
        worst = worst.max((lhs - rhs).norm());
    }
    Outcome {
        pass: worst < 1e-10,
        detail: format!("max error over 100 random trials = {worst:.3e}"),
    }
}

fn main() {
    let mut results = Vec::new();
    results.push(run(1, "static N=1 dispersion", secs(10), static_dispersion));
    // criteria 2 and 3 share one sweep, timed under criterion 2
    let mut gaps = None;
    results.push(run(2, "Liouville determinant over Fig. 2 sweep", secs(120), || {
        let (liouville, g) = fig2_sweep_checks();
        gaps = Some(g);
        liouville
    }));
    let gaps = gaps.unwrap();
    results.push(run(3, "band and momentum gaps at Fig. 2 parameters", secs(120), || gaps));
    results.push(run(4, "modulation period", secs(1), period_value));
    results.push(run(5, "single static localised mode", secs(60), static_localisation));
    results.push(run(6, "modulated hybridisation", secs(300), modulated_hybridisation));
    results.push(run(7, "time-defect decay", secs(300), time_defect_decay));
    results.push(run(8, "space-time localisation", secs(600), space_time_localisation));
    results.push(run(9, "Toeplitz root against supercell", secs(60), cross_method));
    results.push(run(10, "Floquet-Bloch transform identities", secs(10), transform_suite));
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
