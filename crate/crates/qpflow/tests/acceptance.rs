//! End-to-end acceptance battery.
//!
//! Runs every shipped preset once into a temporary directory and maps the
//! manifests onto the eleven headline guarantees, printing one PASS/FAIL
//! line per criterion (visible with --nocapture, or in full on failure).

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qpflow::coefficients::{CoefficientModel, NonlinearityModel};
use qpflow::experiment::{default_config, run_preset, Manifest, Verdict};
use qpflow::grid::{build_grid, Domain, Field};
use qpflow::operators::{Problem, RegularizationParams};

struct Criteria {
    lines: Vec<(usize, String, bool, String)>,
}

impl Criteria {
    fn new() -> Self {
        Criteria { lines: Vec::new() }
    }

    fn check(&mut self, id: usize, name: &str, pass: bool, detail: String) {
        self.lines.push((id, name.to_string(), pass, detail));
    }

    fn finish(self) {
        let mut failed = 0;
        for (id, name, pass, detail) in &self.lines {
            println!(
                "{} criterion {:>2} {:<24} {}",
                if *pass { "PASS" } else { "FAIL" },
                id,
                name,
                detail
            );
            if !pass {
                failed += 1;
            }
        }
        assert_eq!(
            failed,
            0,
            "{failed} acceptance criteria failed:\n{}",
            self.lines
                .iter()
                .filter(|l| !l.2)
                .map(|l| format!("  criterion {} {}: {}", l.0, l.1, l.3))
                .collect::<Vec<_>>()
                .join("\n")
        );
    }
}

fn run(name: &str, root: &std::path::Path) -> Manifest {
    let mut cfg = default_config(name).expect(name);
    cfg.output = Some(root.join(name).to_string_lossy().into_owned());
    run_preset(&cfg).expect(name)
}

fn verdict<'m>(m: &'m Manifest, name: &str) -> &'m Verdict {
    m.verdict(name)
        .unwrap_or_else(|| panic!("{} lacks verdict {name}", m.preset))
}

/// All-verdicts-pass helper with a compact witness for the failing entry.
fn all_pass(entries: &[&Verdict]) -> (bool, String) {
    for v in entries {
        if !v.pass {
            return (false, format!("{} = {:.4e} ({})", v.name, v.value, v.detail));
        }
    }
    let summary = entries
        .iter()
        .map(|v| format!("{} {:.3e}", v.name, v.value))
        .collect::<Vec<_>>()
        .join(", ");
    (true, summary)
}

fn smooth_pair(rng: &mut ChaCha8Rng, grid: &Arc<qpflow::Grid>) -> (Field, Field) {
    let mut coeffs = || {
        let c: [f64; 5] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        c
    };
    let (a, b) = (coeffs(), coeffs());
    let shape = move |c: [f64; 5], x: f64, y: f64| {
        let bump = (1.0 - x * x - y * y).max(0.0);
        bump * (c[0] + c[1] * x + c[2] * y + c[3] * x * y + c[4] * (x * x - y * y))
    };
    (
        Field::from_fn(grid, move |x, y| shape(a, x, y)),
        Field::from_fn(grid, move |x, y| shape(b, x, y)),
    )
}

/// Criterion 10 runs directly: on random smooth pairs, the directional
/// derivative must match central differences to 1e-4 relative and the
/// residual pairing must reproduce it to 1e-10 relative.
fn gradient_duality_check() -> (bool, String, bool, String) {
    let grid = build_grid(Domain::Disk { radius: 1.0 }, 48).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_fd = 0.0f64;
    let mut worst_dual = 0.0f64;
    for k in 0..20 {
        let p = [1.5, 2.0, 3.0][k % 3];
        let coeff = if k % 2 == 0 {
            CoefficientModel::constant()
        } else {
            CoefficientModel::quadratic()
        };
        let nonlin = if k % 4 < 2 {
            NonlinearityModel::zero(2, p)
        } else {
            NonlinearityModel::power(3.0, 2, p).unwrap()
        };
        let pr = Problem::new(
            Arc::clone(&grid),
            coeff,
            nonlin,
            RegularizationParams::default_for(p, &grid),
        )
        .unwrap();
        let (u, v) = smooth_pair(&mut rng, &grid);
        let dd = pr.directional_derivative(&u, &v).total;
        let scale = (1.0 + u.max_abs()).max(v.max_abs());
        let t = 1e-5 * scale;
        let fd = (pr.energy(&u.axpy(t, &v)) - pr.energy(&u.axpy(-t, &v))) / (2.0 * t);
        let denom = dd.abs().max(fd.abs()).max(1e-12);
        worst_fd = worst_fd.max((dd - fd).abs() / denom);

        let pairing = pr.residual_pairing(&u, &v);
        let denom = dd.abs().max(pairing.abs()).max(1e-300);
        worst_dual = worst_dual.max((dd - pairing).abs() / denom);
    }
    (
        worst_fd <= 1e-4,
        format!("worst finite-difference mismatch {worst_fd:.3e} over 20 pairs (tol 1e-4)"),
        worst_dual <= 1e-10,
        format!("worst residual-pairing mismatch {worst_dual:.3e} (tol 1e-10)"),
    )
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let mut manifests: BTreeMap<&str, Manifest> = BTreeMap::new();
    for name in [
        "heat_decay",
        "torsion_convergence",
        "symmetry_ball",
        "uniqueness_ball",
        "critical_vanishing",
        "poincare_shrink",
        "comparison_small_domain",
    ] {
        manifests.insert(name, run(name, tmp.path()));
    }
    let heat = &manifests["heat_decay"];
    let torsion = &manifests["torsion_convergence"];
    let symmetry = &manifests["symmetry_ball"];
    let uniq = &manifests["uniqueness_ball"];
    let poincare = &manifests["poincare_shrink"];

    let mut c = Criteria::new();

    // 1: heat-equation oracle, decay rate and energy, under 10 seconds.
    {
        let (ok, detail) = all_pass(&[verdict(heat, "decay_rate"), verdict(heat, "final_energy")]);
        let fast = heat.runtime_seconds < 10.0;
        c.check(
            1,
            "heat_oracle",
            ok && fast,
            format!("{detail}; runtime {:.2}s (cap 10s)", heat.runtime_seconds),
        );
    }

    // 2: p-torsion first-order convergence for p in {1.5, 2, 3}, under 2 minutes.
    {
        let (ok, detail) = all_pass(&[
            verdict(torsion, "convergence_p1.5"),
            verdict(torsion, "convergence_p2"),
            verdict(torsion, "convergence_p3"),
        ]);
        let fast = torsion.runtime_seconds < 120.0;
        c.check(
            2,
            "torsion_convergence",
            ok && fast,
            format!("{detail}; runtime {:.1}s (cap 120s)", torsion.runtime_seconds),
        );
    }

    // 3: the per-step energy inequality on every preset trajectory.
    {
        let entries: Vec<&Verdict> = manifests
            .values()
            .flat_map(|m| m.verdicts.iter())
            .filter(|v| v.name.ends_with("energy_inequality"))
            .collect();
        assert!(entries.len() >= 6, "expected flows in several presets");
        let (ok, _) = all_pass(&entries);
        c.check(
            3,
            "energy_inequality",
            ok,
            format!("{} trajectories dissipate within budget", entries.len()),
        );
    }

    // 4: asymptotic symmetry of the omega-limit at resolution 96, under 5 minutes.
    {
        let vanished = verdict(symmetry, "omega_limit").detail.contains("Vanished");
        let (ok, detail) = all_pass(&[
            verdict(symmetry, "asymmetry"),
            verdict(symmetry, "radial_deviation"),
            verdict(symmetry, "monotonicity"),
        ]);
        let fast = symmetry.runtime_seconds < 300.0;
        c.check(
            4,
            "asymptotic_symmetry",
            (ok || vanished) && fast,
            format!("{detail}; runtime {:.1}s (cap 300s)", symmetry.runtime_seconds),
        );
    }

    // 5: uniqueness of the nontrivial limit once the exponent window holds.
    {
        let (ok, detail) = all_pass(&[
            verdict(uniq, "uniqueness_window"),
            verdict(uniq, "a_omega_limit"),
            verdict(uniq, "b_omega_limit"),
            verdict(uniq, "omega_limit_gap"),
        ]);
        c.check(5, "uniqueness", ok, detail);
    }

    // 6: moving-plane sweep defect on every converged nontrivial steady state.
    {
        let mut entries: Vec<&Verdict> = Vec::new();
        for name in ["moving_plane_p1.5", "moving_plane_p2", "moving_plane_p3"] {
            entries.push(verdict(torsion, name));
        }
        entries.push(verdict(uniq, "moving_plane"));
        if let Some(v) = symmetry.verdict("moving_plane") {
            entries.push(v);
        }
        let (ok, detail) = all_pass(&entries);
        c.check(6, "moving_plane", ok, detail);
    }

    // 7: small critical sets and the closed-form fraction oracle.
    {
        let (ok, detail) = all_pass(&[
            verdict(torsion, "critical_fraction"),
            verdict(torsion, "fraction_oracle"),
            verdict(uniq, "critical_fraction"),
        ]);
        c.check(7, "critical_set", ok, detail);
    }

    // 8: weighted inverse-gradient integral and its y-stability.
    {
        let (ok, detail) = all_pass(&[
            verdict(torsion, "weighted_integral"),
            verdict(torsion, "y_stability"),
        ]);
        c.check(8, "weighted_integrals", ok, detail);
    }

    // 9: weighted Poincare constants and their monotone shrinkage.
    {
        let (ok, detail) = all_pass(&[
            verdict(poincare, "constant_unit_interval"),
            verdict(poincare, "constant_half_interval"),
            verdict(poincare, "monotone_shrinkage"),
        ]);
        c.check(9, "weighted_poincare", ok, detail);
    }

    // 10: gradient and duality consistency on random smooth pairs.
    {
        let (fd_ok, fd_detail, dual_ok, dual_detail) = gradient_duality_check();
        c.check(
            10,
            "gradient_duality",
            fd_ok && dual_ok,
            format!("{fd_detail}; {dual_detail}"),
        );
    }

    // 11: nodal positivity along every preset trajectory.
    {
        let entries: Vec<&Verdict> = manifests
            .values()
            .flat_map(|m| m.verdicts.iter())
            .filter(|v| v.name.ends_with("positivity"))
            .collect();
        assert!(entries.len() >= 6);
        let (ok, _) = all_pass(&entries);
        let floor = entries
            .iter()
            .map(|v| v.value)
            .fold(f64::INFINITY, f64::min);
        c.check(
            11,
            "positivity",
            ok,
            format!("{} trajectories, worst nodal minimum {floor:.2e}", entries.len()),
        );
    }

    c.finish();
}
