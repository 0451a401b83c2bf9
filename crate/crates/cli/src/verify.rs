//! The `verify` command: one pass/fail row per module invariant, with
//! measured values, at the config's parameters. Randomized spot checks
//! derive from the config seed, so two runs on the same config produce
//! byte-identical output.

use nalgebra::{DMatrix, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use antidot_core::feshbach::{
    bp0_norm_matrix_free, coupling_norms, neumann_consistency, q0_min_singular,
    sandwiched_resolvent_norm, schur, sqrt_chi_p0_norm, SchurSolver,
};
use antidot_core::kernel::{decay_report, stability_check, GreenSymbol, LatticeKernel};
use antidot_core::linalg;
use antidot_core::model::{
    flux_moments, gap_constants, inf_check, project_flux, Dispersion, InfCheckGrid, Params,
    Potential,
};
use antidot_core::pauli::{sigma_dot, C64};
use antidot_core::planewave::{assemble_fiber, assemble_free, split_blocks, split_matrix, BasisSet};
use antidot_core::spectrum::{
    band_structure, convergence_check, detect_gap, free_kinetic_minimum,
};
use antidot_core::fit;

use crate::config::RunConfig;
use crate::output::OutputDir;
use crate::CliError;

#[derive(serde::Serialize)]
pub struct Check {
    pub id: &'static str,
    pub module: &'static str,
    pub description: &'static str,
    pub status: &'static str,
    pub measured: serde_json::Value,
    pub threshold: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn pass(cond: bool) -> &'static str {
    if cond {
        "pass"
    } else {
        "fail"
    }
}

pub fn run_verify(
    cfg: &RunConfig,
    seed: u64,
    out: &mut OutputDir,
) -> Result<serde_json::Value, CliError> {
    let disp = cfg.build_dispersion()?;
    let pot = cfg.build_potential()?;
    let params = cfg.build_params()?;
    let flux = project_flux(flux_moments(&pot)?, disp.linearization())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks: Vec<Check> = Vec::new();

    // ── model ────────────────────────────────────────────────────────
    {
        // Growth sandwich for the shipped presets plus the configured one.
        let mut worst: f64 = 0.0;
        let presets = [
            Dispersion::dirac(),
            Dispersion::power(2.0).unwrap(),
            Dispersion::multilayer(2).unwrap(),
            disp.clone(),
        ];
        for d in &presets {
            for i in 0..100 {
                let r = 1e-3 * (1e6f64).powf(i as f64 / 99.0);
                for j in 0..8 {
                    let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.37) / 8.0;
                    let p = Vector2::new(r * th.cos(), r * th.sin());
                    let f = d.eval(p).norm();
                    let lo = d.k0_lower() * r.powf(d.d());
                    let hi = d.k0_upper() * r.powf(d.d());
                    worst = worst.max((lo - f).max(0.0) / lo).max((f - hi).max(0.0) / hi);
                }
            }
        }
        checks.push(Check {
            id: "model.sandwich",
            module: "model",
            description: "K0'|p|^d <= |F(p)| <= K0|p|^d on a 100-point log grid",
            status: pass(worst <= 1e-9),
            measured: json!({ "worst_relative_violation": worst }),
            threshold: json!(1e-9),
            note: None,
        });
    }
    {
        // Constant-mode infimum certificate over λ ∈ [0, min(λ0, 1)].
        if !disp.is_strict() {
            checks.push(Check {
                id: "model.inf_lower_bound",
                module: "model",
                description: "inf |F(p)+λΦ| >= λ|Φ⊥|/2 over 20 coupling samples",
                status: "skip",
                measured: serde_json::Value::Null,
                threshold: json!(-1e-12),
                note: Some("non-strict linearization (multilayer N>=2): excluded from λ0-dependent certificates".into()),
            });
        } else if flux.norm_perp == 0.0 {
            checks.push(Check {
                id: "model.inf_lower_bound",
                module: "model",
                description: "inf |F(p)+λΦ| >= λ|Φ⊥|/2 over 20 coupling samples",
                status: "skip",
                measured: serde_json::Value::Null,
                threshold: json!(-1e-12),
                note: Some("no transverse flux".into()),
            });
        } else {
            let gc = gap_constants(&disp, &flux).map_err(antidot_core::Error::from)?;
            let lam_max = gc.lambda0.min(1.0);
            let mut worst_margin = f64::INFINITY;
            for i in 0..20 {
                let lam = lam_max * i as f64 / 19.0;
                let v = inf_check(&disp, &flux, lam, InfCheckGrid::default())?;
                worst_margin = worst_margin.min(v - lam * flux.norm_perp / 2.0);
            }
            checks.push(Check {
                id: "model.inf_lower_bound",
                module: "model",
                description: "inf |F(p)+λΦ| >= λ|Φ⊥|/2 over 20 coupling samples",
                status: pass(worst_margin >= -1e-12),
                measured: json!({ "worst_margin": worst_margin, "lambda_max": lam_max }),
                threshold: json!(-1e-12),
                note: None,
            });
        }
    }
    {
        // Projection idempotence and flux linearity.
        let again = project_flux(flux.phi_par, disp.linearization())?;
        let idem = again.norm_perp;
        let half = {
            let mut amp = pot.amplitudes();
            for a in amp.iter_mut() {
                *a *= 0.5;
            }
            let p2 = rebuild_with_amplitudes(&pot, amp)?;
            let m2 = flux_moments(&p2)?;
            (m2 * 2.0 - flux.phi).norm()
        };
        checks.push(Check {
            id: "model.projection_linearity",
            module: "model",
            description: "flux projection idempotent; moments linear in amplitudes",
            status: pass(idem <= 1e-10 * flux.phi.norm().max(1e-15) && half <= 1e-12),
            measured: json!({ "idempotence_residual": idem, "linearity_residual": half }),
            threshold: json!({ "idempotence": 1e-10, "linearity": 1e-12 }),
            note: None,
        });
    }

    // ── planewave ───────────────────────────────────────────────────
    {
        let basis = BasisSet::new(2);
        let mut worst = 0.0f64;
        for _ in 0..6 {
            let k = Vector2::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            let alpha = 0.05 + 0.45 * rng.random::<f64>();
            let beta = 1.5 * rng.random::<f64>();
            let pr = Params::new(alpha, beta).map_err(antidot_core::Error::from)?;
            let h = assemble_fiber(k, &basis, &disp, &pot, &pr)?;
            let blocks = split_blocks(&h)?;
            let f = disp.eval(Vector2::new(
                -2.0 * std::f64::consts::PI * k[0],
                -2.0 * std::f64::consts::PI * k[1],
            ));
            let expected = sigma_dot(&f) + sigma_dot(&(flux.phi * pr.lambda()));
            let defect = (blocks.p0 - expected)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            worst = worst.max(defect).max(h.hermiticity_defect());
        }
        checks.push(Check {
            id: "planewave.p0_identity",
            module: "planewave",
            description: "P0 h_k P0 = σ·F(-2πk) + α²β Φ·σ at random (k, α, β); exact Hermiticity",
            status: pass(worst <= 1e-12),
            measured: json!({ "worst_defect": worst }),
            threshold: json!(1e-12),
            note: None,
        });
    }
    {
        // Truncated free-resolvent identity against the closed symbol.
        let basis = BasisSet::new(3);
        let symbol = GreenSymbol::new(&disp);
        let mut worst = 0.0f64;
        for _ in 0..2 {
            let k = Vector2::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            let h = assemble_free(k, &basis, &disp)?;
            let dim = h.dim();
            let shifted = h.matrix() - DMatrix::<C64>::identity(dim, dim) * C64::new(0.0, 1.0);
            let lu = shifted.lu();
            for &m in &[[0i32, 0i32], [1, 0]] {
                let idx = basis.index_of(m).unwrap();
                let p = Vector2::new(
                    2.0 * std::f64::consts::PI * (m[0] as f64 - k[0]),
                    2.0 * std::f64::consts::PI * (m[1] as f64 - k[1]),
                );
                let g = symbol.eval(p);
                for j in 0..2 {
                    let mut rhs = nalgebra::DVector::<C64>::zeros(dim);
                    rhs[2 * idx + j] = C64::new(1.0, 0.0);
                    let sol = lu.solve(&rhs).expect("free resolvent");
                    for s in 0..2 {
                        worst = worst.max((sol[2 * idx + s] - g[(s, j)]).norm());
                    }
                }
            }
        }
        checks.push(Check {
            id: "planewave.free_resolvent_identity",
            module: "planewave",
            description: "(h_k⁰ - i)⁻¹ Ψ_m⊗e_j = G(2π(m-k)) Ψ_m⊗e_j on the truncated fiber",
            status: pass(worst <= 1e-12),
            measured: json!({ "worst_defect": worst }),
            threshold: json!(1e-12),
            note: None,
        });
    }

    // ── spectrum ────────────────────────────────────────────────────
    let (kin_min, kin_argmin) = free_kinetic_minimum(&disp, 64)?;
    {
        let floor = std::f64::consts::PI.powf(disp.d()) * disp.k0_lower();
        let dirac_exact = disp.kind_name() == "dirac";
        let ok = kin_min >= floor - 1e-9
            && (!dirac_exact || (kin_min - std::f64::consts::PI).abs() <= 1e-9);
        checks.push(Check {
            id: "spectrum.kinetic_bound",
            module: "spectrum",
            description: "min over 64×64 grid, m != 0 of |F(2π(m-k))| >= π^d K0'",
            status: pass(ok),
            measured: json!({
                "minimum": kin_min,
                "argmin_k": [kin_argmin[0], kin_argmin[1]],
                "floor": floor,
            }),
            threshold: json!("π^d K0' - 1e-9; dirac also |min - π| <= 1e-9"),
            note: None,
        });
    }
    let bs = band_structure(&disp, &pot, &params, cfg.verify.cutoff, cfg.verify.kgrid)?;
    let gap = detect_gap(&bs, 0.0)?;
    {
        let (status, note) = if params.beta == 0.0 {
            (pass(gap.width <= 1e-12), Some("free case: width must be 0".into()))
        } else if flux.norm_perp > 0.0 {
            (
                pass((gap.ratio() - 1.0).abs() <= 0.2),
                Some("ratio = width / (2λ|Φ⊥|)".into()),
            )
        } else {
            ("pass", Some("no transverse flux: width reported, not asserted".into()))
        };
        checks.push(Check {
            id: "spectrum.gap",
            module: "spectrum",
            description: "detected gap vs leading-order width at the verify cell",
            status,
            measured: json!({
                "width": gap.width,
                "ratio": if gap.ratio().is_nan() { serde_json::Value::Null } else { json!(gap.ratio()) },
                "lower_edge": gap.lower_edge,
                "upper_edge": gap.upper_edge,
            }),
            threshold: json!("β=0: width 0; else |ratio - 1| <= 0.2"),
            note,
        });
    }
    {
        // Gap symmetry for the transverse-only potential.
        let amp = pot.amplitudes();
        let sigma3_only = amp[0] == 0.0 && amp[1] == 0.0 && amp[2] != 0.0;
        if sigma3_only && gap.width > 0.0 {
            let asym = (gap.lower_edge + gap.upper_edge).abs();
            checks.push(Check {
                id: "spectrum.gap_symmetry",
                module: "spectrum",
                description: "|a + b| <= 0.1 width for the σ₃-only potential",
                status: pass(asym <= 0.1 * gap.width),
                measured: json!({ "asymmetry": asym, "width": gap.width }),
                threshold: json!("0.1 · width"),
                note: None,
            });
        } else {
            checks.push(Check {
                id: "spectrum.gap_symmetry",
                module: "spectrum",
                description: "|a + b| <= 0.1 width for the σ₃-only potential",
                status: "skip",
                measured: serde_json::Value::Null,
                threshold: json!("0.1 · width"),
                note: Some("needs a σ₃-only potential and an open gap".into()),
            });
        }
    }
    {
        let bs_fine = band_structure(&disp, &pot, &params, cfg.verify.cutoff, 2 * cfg.verify.kgrid)?;
        let gap_fine = detect_gap(&bs_fine, 0.0)?;
        checks.push(Check {
            id: "spectrum.grid_refinement",
            module: "spectrum",
            description: "doubling the k-grid can only shrink the detected width",
            status: pass(gap_fine.width <= gap.width + 1e-9),
            measured: json!({ "width_coarse": gap.width, "width_fine": gap_fine.width }),
            threshold: json!("width(2 n_k) <= width(n_k) + 1e-9"),
            note: None,
        });
    }
    {
        let (converged, delta) = convergence_check(
            Vector2::zeros(),
            &disp,
            &pot,
            &params,
            cfg.verify.cutoff.max(2),
            None,
        )?;
        checks.push(Check {
            id: "spectrum.cutoff_convergence",
            module: "spectrum",
            description: "eigenvalues nearest 0 stable under cutoff doubling",
            status: pass(converged),
            measured: json!({ "delta": delta }),
            threshold: json!("1e-6 · max(1, α²β)"),
            note: None,
        });
    }

    // ── feshbach ────────────────────────────────────────────────────
    {
        // Schur identity on seeded random Hermitian matrices.
        let mut worst = 0.0f64;
        let mut checked = 0usize;
        for _ in 0..10 {
            let n = 10;
            let a = DMatrix::<C64>::from_fn(n, n, |_, _| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let herm = (&a + a.adjoint()) * C64::new(0.5, 0.0);
            let blocks = split_matrix(&herm, 0)?;
            let solver = SchurSolver::from_blocks(&blocks)?;
            let eigs = linalg::hermitian_eigenvalues(&herm).expect("random hermitian");
            for &l in &eigs {
                if solver.q0_min_singular(C64::new(l, 0.0)) < 1e-6 {
                    continue;
                }
                if let Ok(eval) = solver.eval(C64::new(l, 0.0)) {
                    // det should vanish at true eigenvalues
                    let scale = eval.fp0_norm().max(1e-12);
                    worst = worst.max(eval.det_fp0().norm() / (scale * scale));
                    checked += 1;
                }
            }
        }
        checks.push(Check {
            id: "feshbach.schur_identity",
            module: "feshbach",
            description: "det F_P(λ) = 0 at eigenvalues of random Hermitian 10×10 matrices",
            status: pass(worst <= 1e-8 && checked > 0),
            measured: json!({ "worst_scaled_det": worst, "eigenvalues_checked": checked }),
            threshold: json!(1e-8),
            note: None,
        });
    }
    {
        // Free Q-block lower bound via the closed form.
        if cfg.verify.cutoff >= 1 {
            let basis = BasisSet::new(cfg.verify.cutoff);
            let h_free = assemble_free(Vector2::new(0.5, 0.0), &basis, &disp)?;
            let v = q0_min_singular(&h_free, &disp, 0.0)?;
            let floor = std::f64::consts::PI.powf(disp.d()) * disp.k0_lower();
            checks.push(Check {
                id: "feshbach.q0_lower_bound",
                module: "feshbach",
                description: "σ_min(Q0 h_k⁰ Q0) >= π^d K0' at the edge-midpoint fiber",
                status: pass(v >= floor - 1e-9),
                measured: json!({ "sigma_min": v }),
                threshold: json!(floor),
                note: None,
            });
        }
    }
    {
        // √|χ_α| P0 norm <= α (indicator potentials with unit-bounded amplitude).
        match sqrt_chi_p0_norm(&pot, 0.25, 12) {
            Ok(_) => {
                let amp_max = pot.amplitudes().iter().map(|a| a.abs()).fold(0.0, f64::max);
                let mut worst_excess = f64::NEG_INFINITY;
                let mut vals = Vec::new();
                for &alpha in &[0.1, 0.25, 0.5] {
                    let v = sqrt_chi_p0_norm(&pot, alpha, 12)?;
                    let bound = alpha * amp_max.sqrt().max(1.0);
                    worst_excess = worst_excess.max(v - bound);
                    vals.push(json!({ "alpha": alpha, "norm": v, "bound": bound }));
                }
                checks.push(Check {
                    id: "feshbach.sqrt_chi_p0",
                    module: "feshbach",
                    description: "‖√|χ_α| P0‖ <= α (amplitude-rescaled) at α ∈ {0.1, 0.25, 0.5}",
                    status: pass(worst_excess <= 1e-12),
                    measured: json!(vals),
                    threshold: json!("α · max(1, √amp)"),
                    note: None,
                });
            }
            Err(e) => checks.push(Check {
                id: "feshbach.sqrt_chi_p0",
                module: "feshbach",
                description: "‖√|χ_α| P0‖ <= α (amplitude-rescaled) at α ∈ {0.1, 0.25, 0.5}",
                status: "skip",
                measured: serde_json::Value::Null,
                threshold: json!("α · max(1, √amp)"),
                note: Some(e.to_string()),
            }),
        }
    }
    {
        // Coupling norms: exact β-linearity and the smallness regime.
        match (
            coupling_norms(&disp, &pot, &Params::new(0.2, 0.5).unwrap(), 4, Vector2::zeros(), 0.0),
            coupling_norms(&disp, &pot, &Params::new(0.2, 1.0).unwrap(), 4, Vector2::zeros(), 0.0),
        ) {
            (Ok(n1), Ok(n2)) if n1.sup_wru > 0.0 => {
                let ratio_defect = (n2.sup_wru / n1.sup_wru - 2.0).abs();
                checks.push(Check {
                    id: "feshbach.coupling_beta_linear",
                    module: "feshbach",
                    description: "sup ‖W_j R0 U_l‖ exactly linear in β",
                    status: pass(ratio_defect <= 1e-10),
                    measured: json!({ "ratio_defect": ratio_defect, "sup_wru": n1.sup_wru }),
                    threshold: json!(1e-10),
                    note: None,
                });
            }
            (Ok(_), Ok(_)) => checks.push(Check {
                id: "feshbach.coupling_beta_linear",
                module: "feshbach",
                description: "sup ‖W_j R0 U_l‖ exactly linear in β",
                status: "skip",
                measured: serde_json::Value::Null,
                threshold: json!(1e-10),
                note: Some("zero coupling norms (trivial potential)".into()),
            }),
            (Err(e), _) | (_, Err(e)) => checks.push(Check {
                id: "feshbach.coupling_beta_linear",
                module: "feshbach",
                description: "sup ‖W_j R0 U_l‖ exactly linear in β",
                status: "skip",
                measured: serde_json::Value::Null,
                threshold: json!(1e-10),
                note: Some(e.to_string()),
            }),
        }
    }
    {
        // Neumann partial sums against the direct dense inverse.
        match neumann_consistency(&disp, &pot, &Params::new(0.4, 2.0).unwrap(), 3, Vector2::zeros(), 0.0)
        {
            Ok(rep) => checks.push(Check {
                id: "feshbach.neumann_series",
                module: "feshbach",
                description: "10-term Neumann truncation error within sup¹⁰/(1 - 3 sup)",
                status: pass(rep.within_bound),
                measured: json!({
                    "sup_wru": rep.sup_wru,
                    "truncation_error": rep.truncation_error,
                    "bound": rep.bound,
                }),
                threshold: json!("error <= sup^10 / (1 - 3 sup), sup < 1/3"),
                note: None,
            }),
            Err(e) => checks.push(Check {
                id: "feshbach.neumann_series",
                module: "feshbach",
                description: "10-term Neumann truncation error within sup¹⁰/(1 - 3 sup)",
                status: "skip",
                measured: serde_json::Value::Null,
                threshold: json!("error <= sup^10 / (1 - 3 sup)"),
                note: Some(e.to_string()),
            }),
        }
    }
    {
        // Two-sided free-resolvent smallness: fitted α-slope >= d' - 0.3.
        match sandwiched_resolvent_norm(&disp, &pot, 0.1, 8, Vector2::zeros()) {
            Ok(_) => {
                let alphas = [0.1, 0.2, 0.4];
                let mut norms = Vec::new();
                for &a in &alphas {
                    norms.push(sandwiched_resolvent_norm(&disp, &pot, a, 8, Vector2::zeros())?);
                }
                let slope = fit::log_log(&alphas, &norms).map(|f| f.slope);
                let d_floor = disp.d_prime() - 0.3;
                checks.push(Check {
                    id: "feshbach.resolvent_smallness",
                    module: "feshbach",
                    description: "α-slope of ‖√|χ_α| (h⁰-i)⁻¹ √|χ_α|‖ at least d' - 0.3",
                    status: pass(slope.map(|s| s >= d_floor).unwrap_or(false)),
                    measured: json!({ "slope": slope, "norms": norms }),
                    threshold: json!(d_floor),
                    note: None,
                });
            }
            Err(e) => checks.push(Check {
                id: "feshbach.resolvent_smallness",
                module: "feshbach",
                description: "α-slope of ‖√|χ_α| (h⁰-i)⁻¹ √|χ_α|‖ at least d' - 0.3",
                status: "skip",
                measured: serde_json::Value::Null,
                threshold: json!("d' - 0.3"),
                note: Some(e.to_string()),
            }),
        }
    }
    {
        // Coupling-norm truncation certificate: cutoff doubling moves
        // sup ‖W_j R0 U_l‖ by at most 2%.
        match (
            coupling_norms(&disp, &pot, &Params::new(0.2, 1.0).unwrap(), 8, Vector2::zeros(), 0.0),
            coupling_norms(&disp, &pot, &Params::new(0.2, 1.0).unwrap(), 16, Vector2::zeros(), 0.0),
        ) {
            (Ok(n8), Ok(n16)) if n16.sup_wru > 0.0 => {
                let rel = (n8.sup_wru - n16.sup_wru).abs() / n16.sup_wru;
                checks.push(Check {
                    id: "feshbach.coupling_truncation",
                    module: "feshbach",
                    description: "sup ‖W_j R0 U_l‖ stable under cutoff doubling (<= 2%)",
                    status: pass(rel <= 0.02),
                    measured: json!({ "sup_n8": n8.sup_wru, "sup_n16": n16.sup_wru, "rel_change": rel }),
                    threshold: json!(0.02),
                    note: None,
                });
            }
            (Ok(_), Ok(_)) => checks.push(Check {
                id: "feshbach.coupling_truncation",
                module: "feshbach",
                description: "sup ‖W_j R0 U_l‖ stable under cutoff doubling (<= 2%)",
                status: "skip",
                measured: serde_json::Value::Null,
                threshold: json!(0.02),
                note: Some("zero coupling norms (trivial potential)".into()),
            }),
            (Err(e), _) | (_, Err(e)) => checks.push(Check {
                id: "feshbach.coupling_truncation",
                module: "feshbach",
                description: "sup ‖W_j R0 U_l‖ stable under cutoff doubling (<= 2%)",
                status: "skip",
                measured: serde_json::Value::Null,
                threshold: json!(0.02),
                note: Some(e.to_string()),
            }),
        }
    }
    {
        // Remainder truncation certificate: cutoff doubling moves the norm
        // by at most 2%.
        if params.beta > 0.0 && pot.indicator_data().is_ok() {
            let k = Vector2::new(0.17, 0.29);
            let pr = Params::new(0.2, 0.2).unwrap();
            let b1 = bp0_norm_matrix_free(&disp, &pot, &pr, 8, k, 0.0)?;
            let b2 = bp0_norm_matrix_free(&disp, &pot, &pr, 16, k, 0.0)?;
            let rel = (b1 - b2).abs() / b2.max(1e-300);
            checks.push(Check {
                id: "feshbach.bp0_truncation",
                module: "feshbach",
                description: "‖B_P0(0)‖ stable under cutoff doubling (<= 2%)",
                status: pass(rel <= 0.02),
                measured: json!({ "bp0_n8": b1, "bp0_n16": b2, "rel_change": rel }),
                threshold: json!(0.02),
                note: None,
            });
        } else {
            checks.push(Check {
                id: "feshbach.bp0_truncation",
                module: "feshbach",
                description: "‖B_P0(0)‖ stable under cutoff doubling (<= 2%)",
                status: "skip",
                measured: serde_json::Value::Null,
                threshold: json!(0.02),
                note: Some("needs β > 0 and an indicator potential".into()),
            });
        }
    }
    {
        // Gap-edge eigenvalues are roots of det F_P0 (fiber at k = 0).
        if params.beta > 0.0 && flux.norm_perp > 0.0 {
            let basis = BasisSet::new(cfg.verify.cutoff);
            let h = assemble_fiber(Vector2::zeros(), &basis, &disp, &pot, &params)?;
            let lam = params.lambda() * flux.norm_perp;
            let rep = antidot_core::feshbach::feshbach_root_check(&h, (-3.0 * lam, 3.0 * lam), 0.0)?;
            let worst = rep
                .eigen_rows
                .iter()
                .filter_map(|r| r.root_distance)
                .fold(0.0f64, f64::max);
            let all_refined = rep.eigen_rows.iter().all(|r| r.root_distance.is_some());
            checks.push(Check {
                id: "feshbach.root_consistency",
                module: "feshbach",
                description: "fiber eigenvalues near 0 are roots of det F_P0 to 1e-8",
                status: pass(all_refined && worst <= 1e-8 && !rep.eigen_rows.is_empty()),
                measured: json!({
                    "eigenvalues": rep.eigen_rows.len(),
                    "worst_root_distance": worst,
                }),
                threshold: json!(1e-8),
                note: None,
            });
        } else {
            checks.push(Check {
                id: "feshbach.root_consistency",
                module: "feshbach",
                description: "fiber eigenvalues near 0 are roots of det F_P0 to 1e-8",
                status: "skip",
                measured: serde_json::Value::Null,
                threshold: json!(1e-8),
                note: Some("needs β > 0 and transverse flux".into()),
            });
        }
    }

    // ── kernel ──────────────────────────────────────────────────────
    {
        let symbol = GreenSymbol::new(&disp);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let p = Vector2::new(
                20.0 * (rng.random::<f64>() - 0.5),
                20.0 * (rng.random::<f64>() - 0.5),
            );
            worst = worst.max(symbol.identity_defect(p));
        }
        checks.push(Check {
            id: "kernel.symbol_identity",
            module: "kernel",
            description: "(σ·F(p) - i) G(p) = 1 at random p",
            status: pass(worst <= 1e-13),
            measured: json!({ "worst_defect": worst }),
            threshold: json!(1e-13),
            note: None,
        });
    }
    {
        let radii = [1e-3, 1e-2, 0.1, 1.0, 2.0, 4.0];
        let rep = decay_report(&disp, &radii, cfg.kernel.eps.min(1e-3))?;
        let slope = rep.short_range_slope.map(|f| f.slope);
        let d = disp.d();
        let slope_ok = if (d - 2.0).abs() < 1e-9 {
            // log branch: no power slope to pin; magnitudes checked below
            true
        } else {
            slope.map(|s| (s - (d - 2.0)).abs() <= 0.25).unwrap_or(false)
        };
        checks.push(Check {
            id: "kernel.envelope",
            module: "kernel",
            description: "|K_ε| <= C M_d; short-range slope near d-2; tail ratios bounded",
            status: pass(
                rep.sup_ratio.is_finite()
                    && rep.long_range_max_over_median < 10.0
                    && slope_ok,
            ),
            measured: json!({
                "sup_ratio_c_fit": rep.sup_ratio,
                "short_range_slope": slope,
                "short_range_eps": rep.eps_short,
                "long_range_max_over_median": rep.long_range_max_over_median,
            }),
            threshold: json!({
                "slope": "d-2 ± 0.25 (power branch)",
                "max_over_median": 10.0,
            }),
            note: None,
        });
    }
    {
        // The smallest admissible regulator pair (2e-4 vs 1e-4): at larger
        // ε the singular part below r ~ ε/ρ has not converged yet and the
        // change exceeds 1% at r = 0.01.
        let radii = [0.01, 0.1, 1.0, 4.0];
        let stab = stability_check(&disp, &radii, 2e-4)?;
        let worst = stab.iter().map(|(_, d)| *d).fold(0.0, f64::max);
        checks.push(Check {
            id: "kernel.eps_stability",
            module: "kernel",
            description: "halving ε moves K by <= 1% of (|K| + M_d)",
            status: pass(worst <= 0.01),
            measured: json!(stab.iter().map(|(r, d)| json!({"r": r, "rel_change": d})).collect::<Vec<_>>()),
            threshold: json!(0.01),
            note: Some("pair (2e-4, 1e-4), the smallest admissible regulators".into()),
        });
    }
    {
        if cfg.verify.lattice {
            let lk = LatticeKernel::new(&disp, 5e-4, cfg.verify.gamma_max)?;
            let mut worst = 0.0f64;
            let mut rows = Vec::new();
            for (m, k) in [
                ([0i32, 0i32], Vector2::new(0.0, 0.0)),
                ([0, 0], Vector2::new(0.25, 0.0)),
                ([1, 0], Vector2::new(0.0, 0.0)),
                ([1, 0], Vector2::new(0.25, 0.0)),
            ] {
                let r = lk.check(m, k)?;
                worst = worst.max(r.rel_err);
                rows.push(json!({ "m": m, "k": [k[0], k[1]], "rel_err": r.rel_err }));
            }
            checks.push(Check {
                id: "kernel.lattice_identity",
                module: "kernel",
                description: "phased lattice sum of the kernel reproduces G(2π(m-k)) to 1%",
                status: pass(worst <= 0.01),
                measured: json!(rows),
                threshold: json!(0.01),
                note: None,
            });
        } else {
            checks.push(Check {
                id: "kernel.lattice_identity",
                module: "kernel",
                description: "phased lattice sum of the kernel reproduces G(2π(m-k)) to 1%",
                status: "skip",
                measured: serde_json::Value::Null,
                threshold: json!(0.01),
                note: Some("disabled by verify.lattice = false".into()),
            });
        }
    }
    {
        // Fiber remainder at the verify cell: schur evaluation sanity.
        if params.beta > 0.0 {
            let basis = BasisSet::new(cfg.verify.cutoff);
            let h = assemble_fiber(Vector2::zeros(), &basis, &disp, &pot, &params)?;
            match schur(&h, C64::new(0.0, 0.0)) {
                Ok(eval) => {
                    let herm = antidot_core::pauli::herm_defect(&eval.fp0);
                    checks.push(Check {
                        id: "feshbach.fp0_hermitian",
                        module: "feshbach",
                        description: "F_P0(z) Hermitian for real z",
                        status: pass(herm <= 1e-10),
                        measured: json!({ "hermiticity_defect": herm, "bp0_norm": eval.bp0_norm }),
                        threshold: json!(1e-10),
                        note: None,
                    });
                }
                Err(e) => checks.push(Check {
                    id: "feshbach.fp0_hermitian",
                    module: "feshbach",
                    description: "F_P0(z) Hermitian for real z",
                    status: "skip",
                    measured: serde_json::Value::Null,
                    threshold: json!(1e-10),
                    note: Some(e.to_string()),
                }),
            }
        }
    }

    let passed = checks.iter().filter(|c| c.status == "pass").count();
    let failed = checks.iter().filter(|c| c.status == "fail").count();
    let skipped = checks.iter().filter(|c| c.status == "skip").count();
    out.write_json(
        "verify.json",
        &json!({
            "schema_version": 1,
            "seed": seed,
            "gap_width": gap.width,
            "checks": checks,
            "summary": { "pass": passed, "fail": failed, "skip": skipped },
        }),
    )?;
    for c in out_lines(&checks) {
        println!("{c}");
    }
    println!("verify: {passed} pass, {failed} fail, {skipped} skip");
    Ok(json!({ "pass": passed, "fail": failed, "skip": skipped }))
}

fn out_lines(checks: &[Check]) -> Vec<String> {
    checks
        .iter()
        .map(|c| format!("[{}] {} — {}", c.status.to_uppercase(), c.id, c.description))
        .collect()
}

fn rebuild_with_amplitudes(pot: &Potential, amp: [f64; 3]) -> Result<Potential, CliError> {
    use antidot_core::model::Shape;
    let p = match pot.shape() {
        Shape::Square { side } => Potential::square(*side, amp),
        Shape::Disk { radius } => Potential::disk(*radius, amp),
        Shape::Bump { radius } => Potential::bump(*radius, amp),
        Shape::Grid { n, values } => Potential::grid(*n, values.as_ref().clone(), amp),
    };
    p.map_err(CliError::from)
}
