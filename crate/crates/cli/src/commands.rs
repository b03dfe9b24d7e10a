//! One function per subcommand. Each writes its files into `out` and returns
//! a short human-readable summary.

use std::path::Path;

use log::info;
use num_complex::Complex64;
use resochain::defect_lab::{
    build_supercell, evolve, floquet_defect_spectrum, localisation_threshold, mass_near, static_defect_modes,
    EvolveOptions, InitialState, SpaceDefect, SupercellSystem,
};
use resochain::floquet_band::{band_sweep, detect_band_gaps, detect_momentum_gaps, BandStructure, GapTolerances};
use resochain::geometry::generalised_capacitance;
use resochain::toeplitz_roots::{dedup_roots, ToeplitzProblem};

use crate::config::{Config, InitialChoice};
use crate::output::{num, write_atomic, Table};
use crate::svg::{self, Mark, Panel};
use crate::CliError;

/// Clustering radius (relative) for duplicate roots.
pub const ROOT_DEDUP_TOL: f64 = 1e-6;

fn tolerances(cfg: &Config) -> GapTolerances {
    let d = GapTolerances::for_omega(cfg.modulation.omega);
    GapTolerances {
        im_tol: cfg.solver.im_tol.unwrap_or(d.im_tol),
        gap_tol: cfg.solver.gap_tol.unwrap_or(d.gap_tol),
    }
}

fn sweep(cfg: &Config) -> Result<(BandStructure, Vec<(f64, f64)>, Vec<(f64, f64)>), CliError> {
    let bands = band_sweep(
        &cfg.geometry()?,
        &cfg.contrast()?,
        &cfg.profile()?,
        cfg.solver.alpha_count,
        cfg.solver.start_steps,
    )?;
    let tol = tolerances(cfg);
    let band_gaps = detect_band_gaps(&bands, tol);
    let momentum_gaps = detect_momentum_gaps(&bands, tol);
    Ok((bands, band_gaps, momentum_gaps))
}

fn gaps_table(band_gaps: &[(f64, f64)], momentum_gaps: &[(f64, f64)]) -> Table {
    let mut t = Table::new(&["type", "lower", "upper"]);
    for (lo, hi) in band_gaps {
        t.row(["frequency".to_string(), num(*lo), num(*hi)]);
    }
    for (lo, hi) in momentum_gaps {
        t.row(["momentum".to_string(), num(*lo), num(*hi)]);
    }
    t
}

fn gaps_summary(band_gaps: &[(f64, f64)], momentum_gaps: &[(f64, f64)]) -> String {
    let mut s = format!("{} frequency gap(s), {} momentum gap(s)", band_gaps.len(), momentum_gaps.len());
    for (lo, hi) in band_gaps {
        s += &format!("\n  frequency gap  omega in [{lo:.6e}, {hi:.6e}]");
    }
    for (lo, hi) in momentum_gaps {
        s += &format!("\n  momentum gap   alpha in [{lo:.6e}, {hi:.6e}]");
    }
    s
}

pub fn run_band(cfg: &Config, out: &Path) -> Result<String, CliError> {
    let (bands, band_gaps, momentum_gaps) = sweep(cfg)?;
    let mut t = Table::new(&["alpha", "band_index", "re_omega", "im_omega"]);
    for (alpha, row) in bands.alpha_grid.iter().zip(&bands.bands) {
        for (b, w) in row.iter().enumerate() {
            t.row([num(*alpha), b.to_string(), num(w.re), num(w.im)]);
        }
    }
    t.write(out, "band.csv")?;
    gaps_table(&band_gaps, &momentum_gaps).write(out, "gaps.csv")?;
    if cfg.output.svg {
        let mut panel = Panel::new("Band structure", "alpha", "omega");
        for &(lo, hi) in &momentum_gaps {
            panel = panel.mark(Mark::XBand { lo, hi, color: svg::BLUE });
        }
        for &(lo, hi) in &band_gaps {
            panel = panel.mark(Mark::YBand { lo, hi, color: svg::RED });
        }
        for b in 0..bands.band_count() {
            let pts = |f: fn(Complex64) -> f64| -> Vec<(f64, f64)> {
                bands.alpha_grid.iter().zip(&bands.bands).map(|(a, r)| (*a, f(r[b]))).collect()
            };
            panel = panel
                .mark(Mark::Line { points: pts(|w| w.re), color: svg::BLUE })
                .mark(Mark::Dots { points: pts(|w| w.im), color: svg::RED });
        }
        write_atomic(out, "band.svg", svg::render(&[panel], 1, 720.0, 480.0).as_bytes())?;
    }
    let worst = bands.det_deviation.iter().cloned().fold(0.0, f64::max);
    info!("band sweep: {} alpha points, max |det - 1| = {worst:.3e}", bands.alpha_grid.len());
    Ok(format!(
        "{} alpha points x {} bands\n{}",
        bands.alpha_grid.len(),
        bands.band_count(),
        gaps_summary(&band_gaps, &momentum_gaps)
    ))
}

pub fn run_gaps(cfg: &Config, out: &Path) -> Result<String, CliError> {
    let (_, band_gaps, momentum_gaps) = sweep(cfg)?;
    gaps_table(&band_gaps, &momentum_gaps).write(out, "gaps.csv")?;
    Ok(gaps_summary(&band_gaps, &momentum_gaps))
}

fn supercell(cfg: &Config, space: &SpaceDefect, with_time_defect: bool) -> Result<SupercellSystem, CliError> {
    let td = if with_time_defect { cfg.time_defect()? } else { None };
    Ok(build_supercell(
        &cfg.geometry()?,
        &cfg.contrast()?,
        &cfg.profile()?,
        cfg.solver.cells,
        space,
        td.as_ref(),
        cfg.solver.alpha_sc,
    )?)
}

/// One row per mode: frequency, multiplier modulus and degree of localisation.
struct ModeRows {
    omega: Vec<Complex64>,
    lambda: Vec<f64>,
    d: Vec<f64>,
}

fn mode_rows(sc: &SupercellSystem, cfg: &Config) -> Result<(ModeRows, Option<Vec<(Complex64, f64)>>), CliError> {
    let is_static = sc.profile().is_static() && sc.time_defect().is_none_or(|t| t.is_trivial());
    if is_static {
        let m = static_defect_modes(sc)?;
        let n = m.frequencies.len();
        Ok((
            ModeRows {
                omega: m.frequencies.iter().map(|w| Complex64::new(*w, 0.0)).collect(),
                lambda: vec![1.0; n],
                d: m.d,
            },
            None,
        ))
    } else {
        let f = floquet_defect_spectrum(sc, cfg.solver.start_steps)?;
        let multipliers = f.multipliers.iter().cloned().zip(f.multiplier_d.iter().cloned()).collect();
        Ok((
            ModeRows {
                omega: f.omega,
                lambda: f.lambda,
                d: f.d,
            },
            Some(multipliers),
        ))
    }
}

pub fn run_modes(cfg: &Config, out: &Path) -> Result<String, CliError> {
    let sc = supercell(cfg, &cfg.space_defect()?, true)?;
    let (rows, multipliers) = mode_rows(&sc, cfg)?;
    let bulk = supercell(cfg, &SpaceDefect::none(), false)?;
    let threshold = localisation_threshold(&mode_rows(&bulk, cfg)?.0.d);

    let mut t = Table::new(&["mode_index", "re_omega", "im_omega", "lambda", "d", "localised"]);
    for k in 0..rows.d.len() {
        t.row([
            k.to_string(),
            num(rows.omega[k].re),
            num(rows.omega[k].im),
            num(rows.lambda[k]),
            num(rows.d[k]),
            (rows.d[k] > threshold).to_string(),
        ]);
    }
    t.write(out, "modes.csv")?;
    if let Some(mu) = &multipliers {
        let mut t = Table::new(&["index", "re_mu", "im_mu", "lambda", "d"]);
        for (k, (m, d)) in mu.iter().enumerate() {
            t.row([k.to_string(), num(m.re), num(m.im), num(m.norm()), num(*d)]);
        }
        t.write(out, "multipliers.csv")?;
    }
    if cfg.output.svg {
        let points: Vec<(f64, f64)> = rows.omega.iter().zip(&rows.d).map(|(w, d)| (w.re, *d)).collect();
        let mut panels = vec![Panel::new("Degree of localisation", "Re omega", "d")
            .mark(Mark::HLine { y: threshold, color: svg::GREY })
            .mark(Mark::Dots { points, color: svg::BLUE })];
        if let Some(mu) = &multipliers {
            let lam: Vec<(f64, f64)> = mu.iter().enumerate().map(|(k, (m, _))| (k as f64 + 1.0, m.norm())).collect();
            panels.push(
                Panel::new("Floquet multiplier moduli", "index", "lambda")
                    .mark(Mark::HLine { y: 1.0, color: svg::GREY })
                    .mark(Mark::Dots { points: lam, color: svg::RED }),
            );
        }
        let cols = panels.len();
        write_atomic(out, "dol.svg", svg::render(&panels, cols, 640.0, 420.0).as_bytes())?;
    }
    let above = rows.d.iter().filter(|d| **d > threshold).count();
    let min_lambda = multipliers
        .as_ref()
        .map(|m| m.iter().map(|(m, _)| m.norm()).fold(f64::INFINITY, f64::min));
    let mut s = format!(
        "{} modes, {above} above the bulk threshold {threshold:.4}; max d = {:.4}",
        rows.d.len(),
        rows.d.iter().cloned().fold(0.0, f64::max)
    );
    if let Some(l) = min_lambda {
        s += &format!("\nmin |mu| = {l:.6}");
    }
    Ok(s)
}

pub fn run_evolve(cfg: &Config, out: &Path) -> Result<String, CliError> {
    let sc = supercell(cfg, &cfg.space_defect()?, true)?;
    let opts = EvolveOptions {
        t_span: cfg.solver.t_span.map(|s| (s[0], s[1])),
        sample_count: cfg.solver.sample_count,
        steps_per_sample: cfg.solver.steps_per_sample,
        monodromy_steps: cfg.solver.start_steps,
    };
    let initial = match cfg.solver.initial_state {
        InitialChoice::MostDistinctPeak => InitialState::MostDistinctPeak,
        InitialChoice::MostLocalised => InitialState::MostLocalised,
    };
    let ev = evolve(&sc, &initial, &opts)?;

    let mut t = Table::new(&["t", "d_star"]);
    for (time, d) in ev.times.iter().zip(&ev.d_star) {
        t.row([num(*time), num(*d)]);
    }
    t.write(out, "dstar.csv")?;

    let peak = ev.peak_index();
    let last = ev.times.len() - 1;
    let count = cfg.solver.snapshot_count;
    let mut picks: Vec<usize> = match count {
        0 => Vec::new(),
        1 => vec![0],
        c => (0..c).map(|k| k * last / (c - 1)).collect(),
    };
    picks.push(peak);
    picks.sort_unstable();
    picks.dedup();

    let mut t = Table::new(&["t", "site_index", "cell", "resonator", "abs_u"]);
    for &k in &picks {
        for (site, a) in ev.profiles[k].iter().enumerate() {
            let (cell, res) = sc.site_cell(site);
            t.row([num(ev.times[k]), site.to_string(), cell.to_string(), (res + 1).to_string(), num(*a)]);
        }
    }
    t.write(out, "snapshots.csv")?;

    if cfg.output.svg {
        let trace: Vec<(f64, f64)> = ev.times.iter().cloned().zip(ev.d_star.iter().cloned()).collect();
        let panel = Panel::new("Time-dependent degree of localisation", "t", "d_*")
            .mark(Mark::Line { points: trace, color: svg::BLUE });
        write_atomic(out, "dstar.svg", svg::render(&[panel], 1, 720.0, 420.0).as_bytes())?;
        let panels: Vec<Panel> = picks
            .iter()
            .map(|&k| {
                let pts: Vec<(f64, f64)> = ev.profiles[k].iter().enumerate().map(|(i, a)| (i as f64, *a)).collect();
                let title = if k == peak {
                    format!("t = {:.4} (d_* peak)", ev.times[k])
                } else {
                    format!("t = {:.4}", ev.times[k])
                };
                Panel::new(&title, "site", "|u|").mark(Mark::Line { points: pts, color: svg::BLUE })
            })
            .collect();
        write_atomic(out, "snapshots.svg", svg::render(&panels, 2, 480.0, 300.0).as_bytes())?;
    }

    let mass = mass_near(&sc, &ev.profiles[peak], 0, 2);
    Ok(format!(
        "{} samples; d_* peak {:.4} at t = {:.4}, max/median = {:.3}, mass within 2 cells of cell 0 = {mass:.3}",
        ev.times.len(),
        ev.d_star[peak],
        ev.times[peak],
        ev.peak_ratio()
    ))
}

/// Defect strengths `η^m`, `m = 0..=M`, from the space-defect list.
fn toeplitz_etas(cfg: &Config) -> Result<Vec<f64>, CliError> {
    let contrast = cfg.contrast()?;
    let space = cfg.space_defect()?;
    let mut etas = Vec::new();
    for ((cell, res), _) in space.sites() {
        if cell < 0 {
            return Err(CliError::Config(format!(
                "roots: defect cells must be 0, 1, 2, ...; got cell {cell}"
            )));
        }
        let m = cell as usize;
        if etas.len() <= m {
            etas.resize(m + 1, 0.0);
        }
        etas[m] = space.b(cell, res, &contrast) - 1.0;
    }
    Ok(etas)
}

pub fn run_roots(cfg: &Config, out: &Path) -> Result<String, CliError> {
    let geom = cfg.geometry()?;
    let contrast = cfg.contrast()?;
    let etas = toeplitz_etas(cfg)?;
    let problem = ToeplitzProblem::new(
        &geom,
        &contrast,
        &cfg.profile()?,
        &etas,
        cfg.solver.harmonics,
        cfg.solver.quad_points,
    )?;
    let guesses: Vec<Complex64> = if cfg.solver.root_guesses.is_empty() {
        // just above the top of the static band
        let top = generalised_capacitance(&geom, &contrast, std::f64::consts::PI / geom.period())?[(0, 0)].re;
        vec![Complex64::new(0.0, 1.05 * top.sqrt())]
    } else {
        cfg.solver.root_guesses.iter().map(|g| Complex64::new(g[0], g[1])).collect()
    };

    struct Row {
        guess: Complex64,
        root: Complex64,
        residual: f64,
        iterations: usize,
        converged: bool,
    }
    let mut rows = Vec::new();
    for &g in &guesses {
        match problem.find_root(g, cfg.solver.root_tol) {
            Ok(r) => rows.push(Row {
                guess: g,
                root: r.root,
                residual: r.residual,
                iterations: r.iterations,
                converged: true,
            }),
            Err(resochain::Error::RootFailure { iterations, residual }) => rows.push(Row {
                guess: g,
                root: Complex64::new(f64::NAN, f64::NAN),
                residual,
                iterations,
                converged: false,
            }),
            Err(e) => return Err(e.into()),
        }
    }
    let converged: Vec<usize> = (0..rows.len()).filter(|&k| rows[k].converged).collect();
    let roots: Vec<Complex64> = converged.iter().map(|&k| rows[k].root).collect();
    let keep: Vec<usize> = dedup_roots(&roots, ROOT_DEDUP_TOL).into_iter().map(|i| converged[i]).collect();

    let mut t = Table::new(&["guess_re", "guess_im", "root_re", "root_im", "residual", "iterations", "status"]);
    for (k, r) in rows.iter().enumerate() {
        if r.converged && !keep.contains(&k) {
            continue;
        }
        t.row([
            num(r.guess.re),
            num(r.guess.im),
            num(r.root.re),
            num(r.root.im),
            num(r.residual),
            r.iterations.to_string(),
            if r.converged { "converged" } else { "failed" }.to_string(),
        ]);
    }
    t.write(out, "roots.csv")?;
    let mut s = format!(
        "{} guess(es), {} distinct root(s), {} failure(s)",
        guesses.len(),
        keep.len(),
        rows.iter().filter(|r| !r.converged).count()
    );
    for &k in &keep {
        s += &format!("\n  omega0 = {:.10e} {:+.10e}i", rows[k].root.re, rows[k].root.im);
    }
    Ok(s)
}
