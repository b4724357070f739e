mod common;

use common::{problem, rel_diff};
use keps_nullctl::control::*;
use keps_nullctl::grid::{
    divergence, grad_norm2, gradient, l2_norm, vector_laplacian, GridSpec, VelocityField,
};
use keps_nullctl::stokes::Scheme;
use keps_nullctl::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SCHEMES: [Scheme; 2] = [Scheme::ImplicitEuler, Scheme::CrankNicolson];

fn total_cost(prob: &ControlProblem, u: &[VelocityField]) -> f64 {
    let g = prob.grid();
    let st = prob.solver.solve_forward(&prob.phi0, &prob.forcing, u, &prob.v0, &prob.mask).unwrap();
    let (cv, cu) = assemble_cost(g, &st.velocity, u, &prob.weights).unwrap();
    cv + cu + l2_norm(g, st.last()).powi(2) / prob.eps_pen
}

/// Field with random values on the control faces and zero elsewhere.
fn random_control(prob: &ControlProblem, rng: &mut ChaCha8Rng, scale: f64) -> Vec<VelocityField> {
    let g = prob.grid();
    let faces = prob.mask.interior_faces();
    let active = prob.active_nodes();
    (0..=g.nt)
        .map(|n| {
            let mut vals = vec![0.0; g.n_interior_faces()];
            if n < active {
                for &f in &faces {
                    vals[f] = scale * rng.random_range(-1.0..1.0);
                }
            }
            VelocityField::from_interior(g, &vals).unwrap()
        })
        .collect()
}

#[test]
fn zero_data_gives_zero_control() {
    for scheme in SCHEMES {
        let prob = problem(8, 8, scheme, 0.0);
        let sol = solve_null_control(&prob).unwrap();
        assert!(sol.converged);
        assert!(sol.control.iter().all(|u| u.max_abs() == 0.0));
        assert_eq!((sol.cost_v, sol.cost_u, sol.final_norm), (0.0, 0.0, 0.0));
    }
}

#[test]
fn assemble_cost_of_zero_is_zero() {
    let prob = problem(8, 8, Scheme::ImplicitEuler, 0.0);
    let g = prob.grid();
    let z = vec![VelocityField::zeros(g); g.nt + 1];
    assert_eq!(assemble_cost(g, &z, &z, &prob.weights).unwrap(), (0.0, 0.0));
}

#[test]
fn assemble_cost_is_quadratic() {
    let prob = problem(8, 8, Scheme::ImplicitEuler, 1e-2);
    let g = prob.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = random_control(&prob, &mut rng, 1.0);
    let v = prob.solver.solve_forward(&prob.phi0, &[], &u, &prob.v0, &prob.mask).unwrap().velocity;
    let (cv, cu) = assemble_cost(g, &v, &u, &prob.weights).unwrap();
    let twice = |s: &[VelocityField]| s.iter().map(|f| f.scaled(2.0)).collect::<Vec<_>>();
    let (cv2, cu2) = assemble_cost(g, &twice(&v), &twice(&u), &prob.weights).unwrap();
    assert!((cv2 - 4.0 * cv).abs() <= 1e-12 * cv2);
    assert!((cu2 - 4.0 * cu).abs() <= 1e-12 * cu2);
}

#[test]
fn assemble_cost_of_single_face_impulse() {
    let prob = problem(8, 8, Scheme::ImplicitEuler, 0.0);
    let g = *prob.grid();
    let (i, j, n, a) = (4, 3, 5, 0.7);
    let mut u = vec![VelocityField::zeros(&g); g.nt + 1];
    u[n].set_ux(i, j, a);
    let (_, cu) = assemble_cost(&g, &[], &u, &prob.weights).unwrap();
    // the face value is shared by the two adjacent cells, each taking half
    // of its square; interior node so the trapezoid weight is dt
    let eta = |ci: usize| prob.weights.eta_tilde.get(n, j * g.nx + ci);
    let expected = 0.5 * a * a * (eta(i - 1).powi(2) + eta(i).powi(2)) * g.dx() * g.dy() * g.dt();
    assert!((cu - expected).abs() <= 1e-14 * expected, "{cu} vs {expected}");
}

#[test]
fn assemble_cost_rejects_wrong_length() {
    let prob = problem(8, 8, Scheme::ImplicitEuler, 0.0);
    let g = prob.grid();
    let short = vec![VelocityField::zeros(g); 3];
    assert!(matches!(assemble_cost(g, &short, &[], &prob.weights), Err(Error::Shape(_))));
}

#[test]
fn cost_history_decreases_and_gradient_meets_tolerance() {
    for scheme in SCHEMES {
        let mut prob = problem(8, 16, scheme, 1e-2);
        prob.cg_tol = 1e-10;
        let sol = solve_null_control(&prob).unwrap();
        assert!(sol.converged);
        assert!(sol.relative_gradient <= prob.cg_tol);
        for w in sol.cost_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{} -> {}", w[0], w[1]);
        }
        let j = *sol.cost_history.last().unwrap();
        assert!((j - sol.objective()).abs() <= 1e-6 * sol.objective());
    }
}

#[test]
fn control_vanishes_outside_region() {
    let prob = problem(12, 12, Scheme::CrankNicolson, 1e-2);
    let sol = solve_null_control(&prob).unwrap();
    let faces = prob.mask.interior_faces();
    for u in &sol.control {
        let vals = u.interior();
        for (f, v) in vals.iter().enumerate() {
            if !faces.contains(&f) {
                assert_eq!(*v, 0.0);
            }
        }
        assert_eq!(u.boundary_normal_max(), 0.0);
    }
    assert!(sol.control.iter().any(|u| u.max_abs() > 0.0));
}

#[test]
fn iteration_cap_is_reported() {
    let mut prob = problem(8, 16, Scheme::ImplicitEuler, 1e-2);
    prob.cg_maxit = 1;
    prob.cg_tol = 1e-14;
    let sol = solve_null_control(&prob).unwrap();
    assert!(!sol.converged);
    assert!(sol.iterations <= 1);
    assert!(sol.relative_gradient > prob.cg_tol);
}

#[test]
fn invalid_penalty_is_rejected() {
    let mut prob = problem(8, 8, Scheme::ImplicitEuler, 1e-2);
    prob.eps_pen = 0.0;
    assert!(matches!(solve_null_control(&prob), Err(Error::InvalidParameter { .. })));
}

#[test]
fn final_norm_decreases_with_penalty() {
    let mut last = f64::INFINITY;
    for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
        let mut prob = problem(12, 16, Scheme::ImplicitEuler, 1e-3);
        prob.eps_pen = eps;
        let sol = solve_null_control(&prob).unwrap();
        let r = sol.relative_final_norm();
        assert!(r < last, "eps {eps}: {r} !< {last}");
        last = r;
    }
}

#[test]
fn workspace_reuse_matches_fresh_solve() {
    let prob = problem(8, 8, Scheme::CrankNicolson, 1e-2);
    let ws = ControlWorkspace::new(&prob).unwrap();
    let a = ws.solve(&prob).unwrap();
    let mut other = problem(8, 8, Scheme::CrankNicolson, 1e-2);
    other.weights = prob.weights.clone();
    other.v0 = prob.v0.scaled(-3.0);
    assert!(ws.fits(&other));
    let b = ws.solve(&other).unwrap();
    let scaled: Vec<VelocityField> = a.control.iter().map(|u| u.scaled(-3.0)).collect();
    assert!(rel_diff(&b.control, &scaled, prob.grid()) < 1e-8);
    let mut different = other.clone();
    different.eps_pen = 1e-4;
    assert!(!ws.fits(&different));
    assert!(ws.solve(&different).is_err());
}

#[test]
fn oracle_matches_cg_on_small_instance() {
    for scheme in SCHEMES {
        let prob = problem(6, 8, scheme, 1e-3);
        let g = *prob.grid();
        let cg = solve_null_control(&prob).unwrap();
        let oracle = dense_kkt_oracle(&prob).unwrap();
        let du = rel_diff(&cg.control, &oracle.control, &g);
        let dv = rel_diff(&cg.state.velocity, &oracle.state.velocity, &g);
        assert!(du <= 1e-7 && dv <= 1e-7, "{scheme:?}: control {du:e}, state {dv:e}");
    }
}

#[test]
fn oracle_zero_data_gives_zero_control() {
    let prob = problem(6, 8, Scheme::ImplicitEuler, 0.0);
    let sol = dense_kkt_oracle(&prob).unwrap();
    assert!(sol.control.iter().all(|u| u.max_abs() == 0.0));
}

#[test]
fn oracle_state_satisfies_discrete_equations() {
    let prob = problem(6, 8, Scheme::ImplicitEuler, 1e-3);
    let g: GridSpec = *prob.grid();
    let sol = dense_kkt_oracle(&prob).unwrap();
    let phys = prob.solver.phys();
    let v = &sol.state.velocity;
    let q = &sol.state.pressure;
    let dt = g.dt();
    let scale = v.iter().map(|f| f.max_abs()).fold(0.0, f64::max) / dt;
    for n in 0..g.nt {
        let mu = phys.nu + phys.c_nu * 0.5 * (prob.phi0[n] + prob.phi0[n + 1]);
        let mut r = v[n + 1].sub(&v[n]).scaled(1.0 / dt);
        r.axpy(-mu, &vector_laplacian(&g, &v[n + 1]));
        r.axpy(1.0, &gradient(&g, &q[n + 1]));
        r.axpy(-1.0, &sol.control[n]);
        r.clear_boundary();
        assert!(r.max_abs() <= 1e-10 * scale, "step {n}: momentum residual {:e}", r.max_abs() / scale);
        assert!(divergence(&g, &v[n + 1]).max_abs() <= 1e-10 * scale);
    }
}

#[test]
fn oracle_beats_random_controls() {
    let prob = problem(6, 8, Scheme::CrankNicolson, 1e-3);
    let oracle = dense_kkt_oracle(&prob).unwrap();
    let best = total_cost(&prob, &oracle.control);
    assert!((best - oracle.objective()).abs() <= 1e-8 * best);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let size = oracle.control.iter().map(|u| u.max_abs()).fold(0.0, f64::max);
    for k in 0..20 {
        // alternately far-away controls and small perturbations of the optimum
        let cost = if k % 2 == 0 {
            total_cost(&prob, &random_control(&prob, &mut rng, size))
        } else {
            let d = random_control(&prob, &mut rng, 1e-3 * size);
            let u: Vec<VelocityField> = oracle.control.iter().zip(&d).map(|(a, b)| {
                let mut s = a.clone();
                s.axpy(1.0, b);
                s
            }).collect();
            total_cost(&prob, &u)
        };
        assert!(best <= cost, "sample {k}: {best} > {cost}");
    }
}

#[test]
fn oracle_rejects_large_instances() {
    let prob = problem(16, 32, Scheme::ImplicitEuler, 1e-3);
    assert!(oracle_unknowns(&prob) > ORACLE_MAX_UNKNOWNS);
    match dense_kkt_oracle(&prob) {
        Err(Error::TooLarge { unknowns, limit }) => {
            assert_eq!(limit, ORACLE_MAX_UNKNOWNS);
            assert_eq!(unknowns, oracle_unknowns(&prob));
        }
        other => panic!("expected TooLarge, got {other:?}"),
    }
}

#[test]
fn continuity_with_zero_perturbation_has_zero_distance() {
    let prob = problem(8, 8, Scheme::ImplicitEuler, 1e-3);
    let g = prob.grid();
    let rep = continuity_check_with(&prob, &VelocityField::zeros(g), &[], 3).unwrap();
    assert!(rep.steps.iter().all(|s| s.distance() == 0.0 && s.data_distance == 0.0));
    assert!(rep.monotone);
}

#[test]
fn continuity_distances_halve_with_the_data() {
    let prob = problem(8, 16, Scheme::CrankNicolson, 1e-3);
    let rep = continuity_check(&prob, 4, 5).unwrap();
    assert!(rep.passed());
    for r in rep.halving_ratios() {
        assert!((r - 0.5).abs() < 1e-6, "{r}");
    }
    for s in &rep.steps {
        assert!(s.distance() <= rep.lipschitz * s.data_distance * (1.0 + 1e-12));
    }
    assert!(rep.lipschitz / rep.lipschitz_min < 1.0 + 1e-6);
}

#[test]
fn energy_estimates_of_zero_solution_vanish() {
    let prob = problem(8, 8, Scheme::ImplicitEuler, 0.0);
    let sol = solve_null_control(&prob).unwrap();
    let rep = verify_energy_estimates(&prob, &sol, EnergyWeighting::Carleman).unwrap();
    assert_eq!((rep.l2.lhs, rep.h1.lhs), (0.0, 0.0));
    assert!(rep.passed());
    assert_eq!(rep.l2.constant(), 0.0);
}

#[test]
fn unit_weights_give_plain_energy_norm() {
    let prob = problem(8, 16, Scheme::ImplicitEuler, 1e-2);
    let g = *prob.grid();
    let sol = solve_null_control(&prob).unwrap();
    let rep = verify_energy_estimates(&prob, &sol, EnergyWeighting::Unit).unwrap();
    // max_t |v|^2 + int_0^T |grad v|^2 with face-based norms and the
    // trapezoid rule, computed without the module's helpers
    let v = &sol.state.velocity;
    let max_e = v.iter().map(|f| l2_norm(&g, f).powi(2)).fold(0.0, f64::max);
    let mut dirichlet = 0.0;
    for (n, f) in v.iter().enumerate() {
        let w = if n == 0 || n == g.nt { 0.5 * g.dt() } else { g.dt() };
        dirichlet += w * grad_norm2(&g, f).as_slice().iter().sum::<f64>() * g.cell_area();
    }
    let expected = max_e + dirichlet;
    assert!((rep.l2.lhs - expected).abs() <= 1e-12 * expected, "{} vs {expected}", rep.l2.lhs);
    assert_eq!(rep.excluded_nodes, 0);
}

#[test]
fn energy_constants_are_stable_under_step_halving() {
    let mut consts = Vec::new();
    for nt in [16, 32] {
        let prob = problem(8, nt, Scheme::ImplicitEuler, 1e-3);
        let sol = solve_null_control(&prob).unwrap();
        let rep = verify_energy_estimates(&prob, &sol, EnergyWeighting::Carleman).unwrap();
        assert!(rep.passed());
        assert!(rep.l2.constant() > 0.0 && rep.h1.constant() > 0.0);
        consts.push((rep.l2.constant(), rep.h1.constant()));
    }
    let within = |a: f64, b: f64| a / b <= 2.0 && b / a <= 2.0;
    assert!(within(consts[0].0, consts[1].0), "{consts:?}");
    assert!(within(consts[0].1, consts[1].1), "{consts:?}");
}

#[test]
fn carleman_terms_of_zero_data_vanish() {
    let prob = problem(8, 8, Scheme::ImplicitEuler, 0.0);
    let g = prob.grid();
    let zero = vec![VelocityField::zeros(g); g.nt + 1];
    let adj = prob.solver.solve_adjoint(&prob.phi0, &zero, &VelocityField::zeros(g)).unwrap();
    for t in carleman_terms(&prob.weights, &prob.mask, &adj, &zero).unwrap() {
        assert_eq!((t.lhs, t.rhs), (0.0, 0.0));
        assert_eq!(t.ratio(), None);
    }
}

#[test]
fn carleman_ratios_are_bounded_and_decrease_with_s() {
    let prob = problem(8, 16, Scheme::ImplicitEuler, 0.0);
    let rep = carleman_ratio_test(&CarlemanTest {
        solver: &prob.solver,
        weights: &prob.weights,
        phi0: &prob.phi0,
        mask: &prob.mask,
        n_samples: 6,
        seed: 1,
    })
    .unwrap();
    assert!(rep.passed());
    assert!(rep.doubled_s_decreases, "{} > {}", rep.lhs_2s, rep.lhs_s);
    for fam in CarlemanFamily::ALL {
        let s = rep.stats(fam).unwrap();
        assert_eq!(s.count, 6);
        assert!(s.min <= s.median && s.median <= s.max);
    }
    let csv = rep.to_csv();
    assert!(csv.starts_with("sample,family,lhs,rhs,ratio\n"));
    assert_eq!(csv.lines().count(), 1 + 6 * CarlemanFamily::ALL.len());
}

#[test]
fn random_adjoint_data_is_deterministic() {
    let g = GridSpec::unit(8, 8).unwrap();
    let (f_a, t_a) = random_adjoint_data(&g, 4, 2);
    let (f_b, t_b) = random_adjoint_data(&g, 4, 2);
    assert_eq!(t_a, t_b);
    assert_eq!(f_a, f_b);
    let (_, t_other) = random_adjoint_data(&g, 4, 3);
    assert_ne!(t_a, t_other);
}
