//! Per-command runners. Each returns a diagnostics JSON blob that lands in
//! the run manifest; result tables and reports go through `OutputDir`.

use nalgebra::Vector2;
use serde_json::json;

use antidot_core::feshbach::{
    bp0_scaling, coupling_norms, feshbach_root_check, Bp0Options,
};
use antidot_core::kernel::{decay_report, stability_check};
use antidot_core::model::{flux_moments, gap_constants, project_flux};
use antidot_core::planewave::{assemble_fiber, BasisSet};
use antidot_core::spectrum::{band_structure, convergence_check, detect_gap, free_kinetic_minimum};

use crate::config::RunConfig;
use crate::output::{Csv, CsvCell, OutputDir};
use crate::CliError;

pub fn run_bands(cfg: &RunConfig, out: &mut OutputDir) -> Result<serde_json::Value, CliError> {
    let disp = cfg.build_dispersion()?;
    let pot = cfg.build_potential()?;
    let params = cfg.build_params()?;
    let bs = band_structure(&disp, &pot, &params, cfg.run.cutoff, cfg.run.kgrid)?;
    let mut csv = Csv::new(&["k1", "k2", "band_index", "energy"]);
    for (k, evs) in bs.kpoints.iter().zip(&bs.bands) {
        for (idx, &e) in evs.iter().enumerate() {
            csv.row(&[
                CsvCell::F(k[0]),
                CsvCell::F(k[1]),
                CsvCell::I(idx as i64),
                CsvCell::F(e),
            ]);
        }
    }
    out.write("bands.csv", &csv.into_bytes())?;
    let (converged, delta) = convergence_check(
        Vector2::zeros(),
        &disp,
        &pot,
        &params,
        cfg.run.cutoff.max(2),
        None,
    )?;
    out.write_json(
        "bands_meta.json",
        &json!({
            "schema_version": 1,
            "dispersion": bs.meta.dispersion,
            "potential": bs.meta.potential,
            "alpha": params.alpha,
            "beta": params.beta,
            "cutoff": bs.meta.cutoff,
            "kgrid": cfg.run.kgrid,
            "grid": bs.meta.grid,
            "lambda": bs.meta.lambda,
            "phi_perp_norm": bs.meta.phi_perp_norm,
            "bands_per_k": bs.bands.first().map(|b| b.len()).unwrap_or(0),
        }),
    )?;
    Ok(json!({
        "convergence": { "cutoff_doubling_delta": delta, "converged": converged },
    }))
}

pub fn run_gap(cfg: &RunConfig, out: &mut OutputDir) -> Result<serde_json::Value, CliError> {
    let disp = cfg.build_dispersion()?;
    let pot = cfg.build_potential()?;
    let params = cfg.build_params()?;
    let bs = band_structure(&disp, &pot, &params, cfg.run.cutoff, cfg.run.kgrid)?;
    let gap = detect_gap(&bs, cfg.gap.center)?;
    out.write_json(
        "gap_report.json",
        &json!({
            "schema_version": 1,
            "lower_edge": gap.lower_edge,
            "upper_edge": gap.upper_edge,
            "center": gap.center,
            "width": gap.width,
            "ratio": if gap.ratio().is_nan() { serde_json::Value::Null } else { json!(gap.ratio()) },
            "predicted_halfwidth_leading": gap.predicted_halfwidth_leading,
            "lambda": gap.lambda,
            "phi_perp_norm": gap.phi_perp_norm,
            "alpha": gap.alpha,
            "beta": gap.beta,
            "d_prime": gap.d_prime,
            "cutoff": cfg.run.cutoff,
            "kgrid": cfg.run.kgrid,
        }),
    )?;
    let (converged, delta) = convergence_check(
        Vector2::zeros(),
        &disp,
        &pot,
        &params,
        cfg.run.cutoff.max(2),
        None,
    )?;
    Ok(json!({
        "convergence": { "cutoff_doubling_delta": delta, "converged": converged },
        "width": gap.width,
    }))
}

pub fn run_sweep(cfg: &RunConfig, out: &mut OutputDir) -> Result<serde_json::Value, CliError> {
    let disp = cfg.build_dispersion()?;
    let pot = cfg.build_potential()?;
    let sweep_cfg = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("the sweep command needs a [sweep] section".into()))?;
    let cutoff = sweep_cfg.cutoff.unwrap_or(cfg.run.cutoff);
    let n_k = sweep_cfg.kgrid.unwrap_or(cfg.run.kgrid);
    let res = antidot_core::spectrum::sweep(&disp, &pot, &sweep_cfg.alphas, &sweep_cfg.betas, cutoff, n_k)?;
    let mut csv = Csv::new(&["alpha", "beta", "N", "n_k", "width", "ratio", "runtime_s"]);
    for r in &res.rows {
        csv.row(&[
            CsvCell::F(r.alpha),
            CsvCell::F(r.beta),
            CsvCell::I(r.cutoff as i64),
            CsvCell::I(r.n_k as i64),
            CsvCell::F(r.width),
            CsvCell::F(r.ratio),
            CsvCell::F(r.runtime_s),
        ]);
    }
    out.write("sweep.csv", &csv.into_bytes())?;
    out.write_json(
        "sweep_fit.json",
        &json!({
            "schema_version": 1,
            "alpha_slopes": res.alpha_slopes.iter().map(|(beta, fit)| json!({
                "beta": beta,
                "slope": fit.slope,
                "intercept": fit.intercept,
                "residual_rms": fit.residual_rms,
                "points": fit.n,
            })).collect::<Vec<_>>(),
            "c_fit_empirical": res.c_fit_empirical,
            "c_fit_note": "fitted from width = 2λ(|Φ⊥|/2 − C α^{d'} β); empirical, not a proof constant",
            "phi_perp_norm": res.phi_perp_norm,
            "d_prime": res.d_prime,
            "errors": res.errors.iter().map(|e| json!({
                "alpha": e.alpha, "beta": e.beta, "message": e.message,
            })).collect::<Vec<_>>(),
        }),
    )?;
    Ok(json!({
        "cells": res.rows.len(),
        "cell_errors": res.errors.len(),
        "c_fit_empirical": res.c_fit_empirical,
    }))
}

pub fn run_feshbach(cfg: &RunConfig, out: &mut OutputDir) -> Result<serde_json::Value, CliError> {
    let disp = cfg.build_dispersion()?;
    let pot = cfg.build_potential()?;
    let params = cfg.build_params()?;
    let k = Vector2::new(cfg.feshbach.k[0], cfg.feshbach.k[1]);
    let flux = project_flux(flux_moments(&pot)?, disp.linearization())?;
    let lambda = params.lambda();
    let kinetic_halfwindow = disp.k0_lower() * std::f64::consts::PI.powf(disp.d()) / 2.0;

    let basis = BasisSet::new(cfg.run.cutoff);
    let h = assemble_fiber(k, &basis, &disp, &pot, &params)?;

    // Window for the eigenvalue-root consistency: wide enough to catch the
    // gap-edge eigenvalues.
    let root_window = match cfg.feshbach.z_window {
        Some([a, b]) => (a, b),
        None => {
            let half = if lambda * flux.norm_perp > 0.0 {
                (3.0 * lambda * flux.norm_perp).min(kinetic_halfwindow)
            } else {
                kinetic_halfwindow / 2.0
            };
            (-half, half)
        }
    };
    let roots = feshbach_root_check(&h, root_window, 0.0)?;

    // Certification scan across the candidate interval (leading-order
    // theorem halfwidth), floor at half of it.
    let candidate_half = lambda * flux.norm_perp / 2.0;
    let scan = if candidate_half > 0.0 {
        Some(feshbach_root_check(&h, (-candidate_half, candidate_half), candidate_half / 2.0)?)
    } else {
        None
    };

    let mut roots_csv = Csv::new(&[
        "eigenvalue",
        "q0_min_singular",
        "det_abs",
        "fp0_norm",
        "root",
        "root_distance",
    ]);
    for r in &roots.eigen_rows {
        roots_csv.row(&[
            CsvCell::F(r.eigenvalue),
            CsvCell::F(r.q0_min_singular),
            CsvCell::F(r.det_abs),
            CsvCell::F(r.fp0_norm),
            CsvCell::F(r.root.unwrap_or(f64::NAN)),
            CsvCell::F(r.root_distance.unwrap_or(f64::NAN)),
        ]);
    }
    out.write("feshbach_roots.csv", &roots_csv.into_bytes())?;

    let mut scan_csv = Csv::new(&["z", "sigma_min_fp0", "bp0_norm", "q0_min_singular"]);
    for row in roots.scan.iter().chain(scan.iter().flat_map(|s| s.scan.iter())) {
        scan_csv.row(&[
            CsvCell::F(row.z),
            CsvCell::F(row.sigma_min_fp0),
            CsvCell::F(row.bp0_norm),
            CsvCell::F(row.q0_min_singular),
        ]);
    }
    out.write("feshbach_scan.csv", &scan_csv.into_bytes())?;

    // Coupling norms (indicator potentials only; report the reason otherwise).
    let coupling = match coupling_norms(&disp, &pot, &params, cfg.run.cutoff, k, 0.0) {
        Ok(n) => {
            let mut csv = Csv::new(&["j", "l", "norm"]);
            for j in 0..3 {
                for l in 0..3 {
                    csv.row(&[
                        CsvCell::I(j as i64 + 1),
                        CsvCell::I(l as i64 + 1),
                        CsvCell::F(n.wru[j][l]),
                    ]);
                }
            }
            out.write("coupling_norms.csv", &csv.into_bytes())?;
            json!({ "sup_wru": n.sup_wru, "neumann_ok": n.neumann_ok })
        }
        Err(e) => json!({ "skipped": e.to_string() }),
    };

    // Optional remainder-scaling sweep.
    let bp0 = match (&cfg.feshbach.alphas, &cfg.feshbach.betas) {
        (Some(alphas), Some(betas)) => {
            let res = bp0_scaling(&disp, &pot, alphas, betas, &Bp0Options::default())?;
            let mut csv = Csv::new(&["alpha", "beta", "N", "bp0_norm", "sup_wru", "included"]);
            for r in &res.rows {
                csv.row(&[
                    CsvCell::F(r.alpha),
                    CsvCell::F(r.beta),
                    CsvCell::I(r.cutoff as i64),
                    CsvCell::F(r.bp0_norm),
                    CsvCell::F(r.sup_wru),
                    CsvCell::I(r.included as i64),
                ]);
            }
            out.write("bp0_scaling.csv", &csv.into_bytes())?;
            json!({
                "alpha_slopes": res.alpha_slopes.iter().map(|(b, f)| json!({
                    "beta": b, "slope": f.slope, "residual_rms": f.residual_rms
                })).collect::<Vec<_>>(),
                "beta_slopes": res.beta_slopes.iter().map(|(a, f)| json!({
                    "alpha": a, "slope": f.slope, "residual_rms": f.residual_rms
                })).collect::<Vec<_>>(),
                "uniform_c_max": res.uniform_c_max,
                "excluded_cells": res.excluded,
            })
        }
        _ => json!({ "skipped": "no feshbach.alphas/betas configured" }),
    };

    out.write_json(
        "feshbach_report.json",
        &json!({
            "schema_version": 1,
            "k": [k[0], k[1]],
            "root_window": [roots.window.0, roots.window.1],
            "eigenvalues_in_window": roots.eigen_rows.len(),
            "max_root_distance": roots.eigen_rows.iter()
                .filter_map(|r| r.root_distance)
                .fold(0.0f64, f64::max),
            "scan": scan.as_ref().map(|s| json!({
                "window": [s.window.0, s.window.1],
                "min_sigma_min_fp0": s.scan_min_sigma,
                "floor": s.floor,
                "floor_ok": s.floor_ok,
            })),
            "coupling": coupling,
            "bp0_scaling": bp0,
        }),
    )?;
    Ok(json!({
        "eigenvalues_in_window": roots.eigen_rows.len(),
        "scan_floor_ok": scan.as_ref().map(|s| s.floor_ok),
    }))
}

pub fn run_kernel(cfg: &RunConfig, out: &mut OutputDir) -> Result<serde_json::Value, CliError> {
    let disp = cfg.build_dispersion()?;
    let rep = decay_report(&disp, &cfg.kernel.radii, cfg.kernel.eps)?;
    let mut csv = Csv::new(&["r", "eps", "norm", "envelope", "ratio", "quadrature_error"]);
    for r in &rep.rows {
        csv.row(&[
            CsvCell::F(r.r),
            CsvCell::F(r.eps),
            CsvCell::F(r.norm),
            CsvCell::F(r.envelope),
            CsvCell::F(r.ratio),
            CsvCell::F(r.quadrature_error),
        ]);
    }
    out.write("kernel_decay.csv", &csv.into_bytes())?;

    let stab_radii: Vec<f64> = cfg
        .kernel
        .radii
        .iter()
        .copied()
        .filter(|&r| (0.01..=8.0).contains(&r))
        .collect();
    // Probe stability at the smallest admissible regulator pair; larger ε
    // has visibly unconverged singular parts at the smallest radii.
    let eps_stab = cfg.kernel.eps.min(2e-4);
    let stability = stability_check(&disp, &stab_radii, eps_stab)?;
    out.write_json(
        "kernel_report.json",
        &json!({
            "schema_version": 1,
            "eps": cfg.kernel.eps,
            "short_range_slope": rep.short_range_slope.map(|f| f.slope),
            "short_range_eps": rep.eps_short,
            "sup_ratio": rep.sup_ratio,
            "long_range_max_over_median": rep.long_range_max_over_median,
            "stability_eps": eps_stab,
            "stability_normalization": "‖K_ε − K_{ε/2}‖ / (‖K_{ε/2}‖ + M_d)",
            "stability": stability.iter().map(|(r, d)| json!({
                "r": r, "rel_change": d,
            })).collect::<Vec<_>>(),
        }),
    )?;
    Ok(json!({
        "sup_ratio": rep.sup_ratio,
        "max_stability_change": stability.iter().map(|(_, d)| *d).fold(0.0f64, f64::max),
    }))
}

/// Diagnostics shared by several commands: resolved flux geometry and the
/// derived threshold constants.
pub fn flux_diagnostics(cfg: &RunConfig) -> Result<serde_json::Value, CliError> {
    let disp = cfg.build_dispersion()?;
    let pot = cfg.build_potential()?;
    let flux = project_flux(flux_moments(&pot)?, disp.linearization())?;
    let constants = if flux.norm_perp > 0.0 && disp.is_strict() {
        let gc = gap_constants(&disp, &flux)?;
        json!({ "m": gc.m, "k_rem": gc.k_rem, "lambda0": if gc.lambda0.is_finite() { json!(gc.lambda0) } else { json!("inf") } })
    } else {
        serde_json::Value::Null
    };
    let (kin_min, kin_argmin) = free_kinetic_minimum(&disp, 64)?;
    Ok(json!({
        "phi": [flux.phi[0], flux.phi[1], flux.phi[2]],
        "phi_perp_norm": flux.norm_perp,
        "gap_constants": constants,
        "free_kinetic_minimum": kin_min,
        "free_kinetic_argmin_k": [kin_argmin[0], kin_argmin[1]],
    }))
}
