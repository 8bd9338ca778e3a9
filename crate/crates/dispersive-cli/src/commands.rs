//! Subcommand pipelines: wire the configuration to the library modules and
//! emit CSV/JSON artifacts plus a one-line summary each.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;

use dispersive::geom::{Point3, QuadratureGrid};
use dispersive::potential::{default_centers, kato_report};
use dispersive::propagator::{
    bump_field, discretize_h, evolve_and_fit, geometric_times, validity_window,
};
use dispersive::resolvent::{resonance_scan, weighted_resolvent_decay, zero_energy_critical_depth};
use dispersive::tfamily::{default_probes, fourier_consistency, t_slices, wiener_norm, RhoGrid};
use dispersive::wiener::{convolve, invert, random_element, CutoffProfile, WienerElement};
use dispersive::{acceptance, Potential};

use crate::config::RunConfig;

pub struct Outcome {
    pub summary: String,
}

fn write(out_dir: &Path, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn write_json(out_dir: &Path, name: &str, value: &serde_json::Value) -> anyhow::Result<PathBuf> {
    write(out_dir, name, &format!("{:#}\n", value))
}

/// Persist the effective configuration next to the outputs.
pub fn write_effective_config(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(cfg)?;
    write(out_dir, "effective_config.json", &format!("{text}\n"))?;
    Ok(())
}

pub fn run_kato(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<Outcome> {
    let v = &cfg.potential;
    let grid = v.default_grid(cfg.grid.shells, cfg.grid.sphere_degree);
    let centers = default_centers(v, &grid);
    let support = v.support_radius();
    let deltas: Vec<f64> = [2.0, 1.0, 0.5, 0.25, 0.1].iter().map(|d| d * support).collect();
    let radii: Vec<f64> = [1.0, 2.0, 3.0, 5.0].iter().map(|r| r * support).collect();
    let report = kato_report(v, &grid, &centers, &deltas, &radii)?;
    write(out_dir, "kato.csv", &report.to_csv())?;
    write_json(out_dir, "kato.json", &serde_json::to_value(&report)?)?;
    Ok(Outcome {
        summary: format!(
            "kato: global_norm {:.6e} at center ({:.3}, {:.3}, {:.3})",
            report.global_norm, report.argmax_center.x, report.argmax_center.y, report.argmax_center.z
        ),
    })
}

pub fn run_scan(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<Outcome> {
    let v = &cfg.potential;
    let s = &cfg.lambda_scan;
    let grid = v.default_grid(s.shells, s.sphere_degree);
    let lambdas: Vec<f64> = (0..s.points)
        .map(|i| s.min + (s.max - s.min) * i as f64 / (s.points as f64 - 1.0))
        .collect();
    let report = resonance_scan(v, &grid, &lambdas, cfg.tolerances.scan_threshold)?;
    write(out_dir, "scan.csv", &report.to_csv())?;
    write_json(out_dir, "scan_flags.json", &report.flag_summary_json())?;

    // Weighted resolvent decay on a dedicated radial grid.
    let wgrid = QuadratureGrid::radial_shells(30.0, 512, 3, &v.breakpoints());
    let wl: Vec<f64> = (0..=20).map(|i| i as f64).collect();
    let decay = weighted_resolvent_decay(&wgrid, s.weighted_alpha, &wl)?;
    let mut csv = String::from("lambda,weighted_norm,compensated\n");
    for (lam, n) in &decay {
        csv.push_str(&format!("{:.12e},{:.12e},{:.12e}\n", lam, n, n * (1.0 + lam)));
    }
    write(out_dir, "weighted_decay.csv", &csv)?;

    // Zero-energy critical depth for well presets.
    let depth_note = if let Potential::SquareWell { radius, .. } = v {
        let c = zero_energy_critical_depth(&grid, *radius)?;
        write_json(out_dir, "critical_depth.json", &serde_json::json!({ "critical_depth": c }))?;
        format!(", critical depth {c:.4}")
    } else {
        String::new()
    };
    Ok(Outcome {
        summary: format!(
            "scan: {} points, {} flagged interval(s){}",
            report.lambdas.len(),
            report.flagged.len(),
            depth_note
        ),
    })
}

pub fn run_depth_sweep(
    cfg: &RunConfig,
    out_dir: &Path,
    lo: f64,
    hi: f64,
    n: usize,
) -> anyhow::Result<Outcome> {
    let radius = match &cfg.potential {
        Potential::SquareWell { radius, .. } => *radius,
        _ => anyhow::bail!("depth sweep needs a square-well potential"),
    };
    let s = &cfg.lambda_scan;
    let grid = cfg.potential.default_grid(s.shells.max(48), s.sphere_degree.max(7));
    let depths: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n as f64 - 1.0).max(1.0))
        .collect();
    let rows = dispersive::resolvent::depth_sweep(&grid, radius, &depths)?;
    let mut csv = String::from("depth,min_singular\n");
    for (c, sig) in &rows {
        csv.push_str(&format!("{:.12e},{:.12e}\n", c, sig));
    }
    write(out_dir, "depth_sweep.csv", &csv)?;
    let c_star = zero_energy_critical_depth(&grid, radius)?;
    write_json(out_dir, "critical_depth.json", &serde_json::json!({ "critical_depth": c_star }))?;
    Ok(Outcome { summary: format!("depth sweep: {} points, critical depth {c_star:.5}", rows.len()) })
}

pub fn run_tmop(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<Outcome> {
    let v = &cfg.potential;
    let t = &cfg.tmop;
    let grid = QuadratureGrid::cartesian_box(t.box_half_side, t.box_points);
    let rho_grid = RhoGrid::new(cfg.rho_grid.h, cfg.rho_grid.rho_max)
        .map_err(anyhow::Error::from)?;
    let probes = default_probes(v, &grid, &Point3::ZERO);
    let wn = wiener_norm(v, &grid, &rho_grid, &probes)?;

    // Slice norms for the first probe.
    let slices = t_slices(v, &grid, &rho_grid, &probes[0])?;
    let mut csv = String::from("rho,l1_norm\n");
    for s in &slices {
        csv.push_str(&format!("{:.12e},{:.12e}\n", s.rho, s.l1_norm(&grid)));
    }
    write(out_dir, "tmop_slices.csv", &csv)?;

    let mut consistency = Vec::new();
    for &lam in &t.lambdas {
        let rep = fourier_consistency(v, &grid, &rho_grid, lam, &probes[0])?;
        consistency.push(serde_json::json!({
            "lambda": rep.lambda,
            "residual": rep.residual,
            "h_rho": rep.h_rho,
            "rho_max": rep.rho_max,
        }));
    }
    write_json(
        out_dir,
        "tmop.json",
        &serde_json::json!({ "wiener_norm": wn, "consistency": consistency }),
    )?;
    Ok(Outcome { summary: format!("tmop: wiener_norm {wn:.6e}, {} consistency checks", t.lambdas.len()) })
}

pub fn run_wiener(cfg: &RunConfig, out_dir: &Path, element_path: Option<&Path>) -> anyhow::Result<Outcome> {
    let w = &cfg.wiener;
    // Algebra self-tests on seeded random elements.
    let mut worst_submult = 0.0f64;
    let mut worst_intertwine = 0.0f64;
    let mut worst_symbol_bound = 0.0f64;
    for k in 0..w.self_test_elements as u64 {
        let s = random_element(cfg.seed.wrapping_add(2 * k), w.d, w.h, w.extent, w.nnz);
        let t = random_element(cfg.seed.wrapping_add(2 * k + 1), w.d, w.h, w.extent, w.nnz);
        let p = convolve(&s, &t)?;
        worst_submult = worst_submult
            .max(p.w_norm() / (s.w_norm() * t.w_norm()).max(1e-300));
        let lam = -4.0 + 8.0 * (k as f64 + 0.5) / w.self_test_elements as f64;
        let lhs = p.fourier(lam)?;
        let rhs = s.fourier(lam)? * t.fourier(lam)?;
        worst_intertwine = worst_intertwine
            .max((lhs - rhs).iter().map(|z| z.norm()).fold(0.0f64, f64::max));
        let sym = t.fourier(lam)?;
        let mut colmax = 0.0f64;
        for j in 0..w.d {
            colmax = colmax.max((0..w.d).map(|i| sym[(i, j)].norm()).sum());
        }
        worst_symbol_bound = worst_symbol_bound.max(colmax / t.w_norm().max(1e-300));
    }
    let selftest = serde_json::json!({
        "elements": w.self_test_elements,
        "worst_submultiplicative_ratio": worst_submult,
        "worst_intertwining_error": worst_intertwine,
        "worst_symbol_over_wnorm": worst_symbol_bound,
        "pass": worst_submult <= 1.0 + 1e-3 && worst_intertwine < 1e-6 && worst_symbol_bound <= 1.0 + 1e-10,
    });
    write_json(out_dir, "wiener_selftest.json", &selftest)?;

    let mut summary = format!(
        "wiener: self-test submult {worst_submult:.4}, intertwine {worst_intertwine:.2e}"
    );
    if let Some(path) = element_path {
        let text = fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let t = WienerElement::from_json(&value)?;
        let cutoff = CutoffProfile::tabulate(1.0, 64, t.h);
        let lambda_grid: Vec<f64> = (-64..=64)
            .map(|k| k as f64 * std::f64::consts::PI / (65.0 * t.h))
            .collect();
        let (s, log) = invert(&t, &cutoff, &lambda_grid, cfg.tolerances.scan_threshold, cfg.tolerances.eps_target)?;
        write_json(out_dir, "wiener_inverse.json", &s.to_json())?;
        write_json(out_dir, "wiener_invert_log.json", &log.to_json())?;
        summary.push_str(&format!(
            "; inverted element: residual {:.2e}, {} windows",
            log.residual,
            log.windows.len()
        ));
    }
    Ok(Outcome { summary })
}

pub fn run_evolve(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<Outcome> {
    let spec = cfg.box_spec;
    let split = discretize_h(&cfg.potential, &spec)?;
    let f = bump_field(&spec, cfg.evolve.bump_sigma_cells * spec.spacing());
    let (lo, hi) = validity_window(&spec, &f);
    let times = geometric_times(lo, hi, cfg.evolve.time_points.max(4));
    let rep = evolve_and_fit(&split, &f, &times, true)?;
    write(out_dir, "decay.csv", &rep.to_csv())?;
    write_json(out_dir, "decay.json", &rep.summary_json())?;
    let mut summary = format!(
        "evolve: pp_rank {}, slope {:.4} on ({:.3}, {:.3})",
        rep.pp_rank, rep.fitted_slope, rep.fit_window.0, rep.fit_window.1
    );
    if rep.pp_rank > 0 {
        let raw = evolve_and_fit(&split, &f, &times, false)?;
        write(out_dir, "decay_unprojected.csv", &raw.to_csv())?;
        write_json(out_dir, "decay_unprojected.json", &raw.summary_json())?;
        summary.push_str(&format!(", unprojected slope {:.4}", raw.fitted_slope));
    }
    Ok(Outcome { summary })
}

pub fn run_verify_all(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<(Outcome, bool)> {
    let results = acceptance::run_all(cfg.seed);
    let mut table = String::new();
    for c in &results {
        table.push_str(&c.line());
        table.push('\n');
        println!("{}", c.line());
    }
    write(out_dir, "acceptance.txt", &table)?;
    let all = results.iter().all(|c| c.passed);
    let total: f64 = results.iter().map(|c| c.seconds).sum();
    Ok((
        Outcome {
            summary: format!(
                "verify-all: {}/{} criteria passed in {total:.1}s",
                results.iter().filter(|c| c.passed).count(),
                results.len()
            ),
        },
        all,
    ))
}

