use std::f64::consts::PI;

use keps_nullctl::grid::init::{random_smooth_scalar, random_smooth_velocity};
use keps_nullctl::grid::{grad_norm2, sym_gradient_norm2, GridSpec, ScalarField, VelocityField};
use keps_nullctl::keps::{
    advective_dt_limit, check_g_membership, compute_constants, gradient_ratio_integral, integrate_phi0,
    solve_k_equation, strain_integrals, DerivedConstants, TurbulenceState,
};
use keps_nullctl::stokes::PhysParams;
use keps_nullctl::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn still(g: &GridSpec) -> Vec<VelocityField> {
    vec![VelocityField::zeros(g); g.nt + 1]
}

#[test]
fn zero_energy_stays_zero() {
    let g = GridSpec::unit(8, 8).unwrap();
    let k = solve_k_equation(&g, &PhysParams::default(), &still(&g), &[0.1; 9], &ScalarField::zeros(&g)).unwrap();
    assert_eq!(k.len(), 9);
    assert!(k.iter().all(|f| f.max_abs() == 0.0));
}

#[test]
fn uniform_energy_with_constant_ratio_is_exact_riccati_decay() {
    // the linearized reaction adds exactly dt / phi to 1 / k per step
    let (c, phi) = (2.0, 0.1);
    let g = GridSpec::new(4, 4, 1.0, 1.0, 20, 1.0).unwrap();
    let k = solve_k_equation(&g, &PhysParams::default(), &still(&g), &[phi; 21], &ScalarField::constant(&g, c)).unwrap();
    for (n, f) in k.iter().enumerate() {
        let exact = c / (1.0 + c * g.time(n) / phi);
        assert!(f.as_slice().iter().all(|x| (x - exact).abs() <= 1e-13), "node {n}");
    }
}

#[test]
fn uniform_energy_with_varying_ratio_converges_to_first_order() {
    // k' = -k^2 / phi(t), phi = 0.1 (1 + t): 1 / k = 1 / c + 10 ln(1 + t)
    let c = 2.0;
    let mut errors = Vec::new();
    for nt in [20, 40, 80, 160] {
        let g = GridSpec::new(4, 4, 1.0, 1.0, nt, 1.0).unwrap();
        let phi: Vec<f64> = g.times().iter().map(|t| 0.1 * (1.0 + t)).collect();
        let k = solve_k_equation(&g, &PhysParams::default(), &still(&g), &phi, &ScalarField::constant(&g, c)).unwrap();
        let err = (0..=nt)
            .map(|n| {
                let exact = 1.0 / (1.0 / c + 10.0 * (1.0 + g.time(n)).ln());
                k[n].as_slice().iter().map(|x| (x - exact).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        errors.push(err);
    }
    for w in errors.windows(2) {
        let ratio = w[1] / w[0];
        assert!((0.45..0.55).contains(&ratio), "errors {errors:?}");
    }
}

/// One implicit step assembled as a dense matrix from the update rule.
fn dense_step(
    g: &GridSpec,
    phys: &PhysParams,
    v: &VelocityField,
    k: &ScalarField,
    phi_old: f64,
    phi_new: f64,
) -> Vec<f64> {
    let (nx, ny, dt) = (g.nx, g.ny, g.dt());
    let n = nx * ny;
    let d = phys.kappa + phys.c0 * phi_new;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    let shear = sym_gradient_norm2(g, v);
    for j in 0..ny {
        for i in 0..nx {
            let c = j * nx + i;
            a[(c, c)] += 1.0 / dt + k.get(i, j) / phi_new;
            let nbrs = [
                (i > 0, c.wrapping_sub(1), g.dx()),
                (i + 1 < nx, c + 1, g.dx()),
                (j > 0, c.wrapping_sub(nx), g.dy()),
                (j + 1 < ny, c + nx, g.dy()),
            ];
            for (inside, m, h) in nbrs {
                if inside {
                    a[(c, c)] += d / (h * h);
                    a[(c, m)] -= d / (h * h);
                }
            }
            let u = 0.5 * (v.ux_at(i, j) + v.ux_at(i + 1, j));
            let w = 0.5 * (v.uy_at(i, j) + v.uy_at(i, j + 1));
            let kx = if u > 0.0 {
                (k.get(i, j) - k.get(i.saturating_sub(1), j)) / g.dx()
            } else {
                (k.get((i + 1).min(nx - 1), j) - k.get(i, j)) / g.dx()
            };
            let ky = if w > 0.0 {
                (k.get(i, j) - k.get(i, j.saturating_sub(1))) / g.dy()
            } else {
                (k.get(i, (j + 1).min(ny - 1)) - k.get(i, j)) / g.dy()
            };
            b[c] = k.get(i, j) / dt - u * kx - w * ky + phys.c_nu * phi_old * shear.as_slice()[c];
        }
    }
    a.lu().solve(&b).unwrap().iter().copied().collect()
}

#[test]
fn single_step_matches_dense_assembly() {
    let g = GridSpec::new(6, 5, 1.0, 0.8, 4, 0.08).unwrap();
    let phys = PhysParams::default();
    let v = random_smooth_velocity(&g, 3, 3, 0.5);
    let k0 = random_smooth_scalar(&g, 4, 3).map(|x| 1.0 + x);
    let k = solve_k_equation(&g, &phys, &vec![v.clone(); 5], &[0.1, 0.12, 0.1, 0.1, 0.1], &k0).unwrap();
    let oracle = dense_step(&g, &phys, &v, &k0, 0.1, 0.12);
    for (x, y) in k[1].as_slice().iter().zip(&oracle) {
        assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn step_above_advective_limit_is_rejected() {
    let g = GridSpec::unit(8, 4).unwrap();
    let v = random_smooth_velocity(&g, 5, 3, 50.0);
    let mut rate = 0.0f64;
    for j in 0..8 {
        for i in 0..8 {
            let u = 0.5 * (v.ux_at(i, j) + v.ux_at(i + 1, j));
            let w = 0.5 * (v.uy_at(i, j) + v.uy_at(i, j + 1));
            rate = rate.max((u.abs() + w.abs()) / g.dx());
        }
    }
    assert!((advective_dt_limit(&g, &v) - 1.0 / rate).abs() <= 1e-12 / rate);
    let err = solve_k_equation(&g, &PhysParams::default(), &vec![v; 5], &[0.1; 5], &ScalarField::constant(&g, 1.0))
        .unwrap_err();
    match err {
        Error::Cfl { dt, required } => {
            assert_eq!(dt, 0.25);
            assert!((required - 1.0 / rate).abs() <= 1e-12 / rate);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let g = GridSpec::unit(4, 4).unwrap();
    let phys = PhysParams::default();
    let k0 = ScalarField::constant(&g, -1e-3);
    assert!(solve_k_equation(&g, &phys, &still(&g), &[0.1; 5], &k0).is_err());
    let k0 = ScalarField::constant(&g, 1.0);
    assert!(solve_k_equation(&g, &phys, &still(&g), &[0.1, 0.0, 0.1, 0.1, 0.1], &k0).is_err());
    assert!(matches!(solve_k_equation(&g, &phys, &still(&g), &[0.1; 4], &k0), Err(Error::Shape(_))));
}

#[test]
fn randomized_battery_keeps_energy_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let n = rng.random_range(4..12usize);
        let nt = rng.random_range(4..24usize);
        let t_final = rng.random_range(0.1..2.0);
        let g = GridSpec::new(n, n + rng.random_range(0..3usize), 1.0, 1.0, nt, t_final).unwrap();
        let phys = PhysParams {
            kappa: 10f64.powf(rng.random_range(-4.0..-1.0)),
            c0: rng.random_range(0.0..1.0) + 1e-6,
            c_nu: rng.random_range(0.01..1.0),
            ..PhysParams::default()
        };
        // a field with zero patches and steep fronts
        let shift = rng.random_range(-0.3..0.1);
        let scale = rng.random_range(0.1..10.0);
        let k0 = random_smooth_scalar(&g, case, 4).map(|x| (x + shift).max(0.0) * scale);
        let amp = rng.random_range(0.0..1.0);
        let v: Vec<VelocityField> =
            (0..=nt).map(|m| random_smooth_velocity(&g, 1000 + case * 50 + m as u64, 3, amp)).collect();
        let limit = v.iter().map(|f| advective_dt_limit(&g, f)).fold(f64::INFINITY, f64::min);
        let v: Vec<VelocityField> = if g.dt() > limit {
            let s = 0.9 * limit / g.dt();
            v.iter().map(|f| f.scaled(s)).collect()
        } else {
            v
        };
        let phi: Vec<f64> = (0..=nt).map(|_| 10f64.powf(rng.random_range(-3.0..0.0))).collect();
        let k = solve_k_equation(&g, &phys, &v, &phi, &k0).unwrap();
        let state = TurbulenceState { k, phi0: phi };
        assert!(state.k_min() >= 0.0, "case {case}: min k = {}", state.k_min());
    }
}

#[test]
fn flat_energy_with_a_two_keeps_phi0_constant() {
    let g = GridSpec::unit(6, 10).unwrap();
    let phys = PhysParams { a: 2.0, ..PhysParams::default() };
    let k = vec![ScalarField::constant(&g, 0.7); 11];
    let phi = integrate_phi0(&g, &phys, &k).unwrap();
    assert!(phi.iter().all(|p| (p - phys.phi00).abs() <= 1e-12));
}

#[test]
fn flat_energy_grows_phi0_linearly() {
    let g = GridSpec::new(5, 7, 2.0, 1.5, 16, 3.0).unwrap();
    let phys = PhysParams { a: 3.5, ..PhysParams::default() };
    let c = 0.4;
    let k = vec![ScalarField::constant(&g, c); 17];
    let phi = integrate_phi0(&g, &phys, &k).unwrap();
    for (n, p) in phi.iter().enumerate() {
        let exact = phys.phi00 + (phys.a - 2.0) * c * g.time(n);
        assert!((p - exact).abs() <= 1e-12, "{p} vs {exact}");
    }
}

#[test]
fn stationary_gradient_gives_riccati_decay_of_phi0() {
    let g = GridSpec::unit(8, 40).unwrap();
    let phys = PhysParams { a: 2.0, c0: 0.5, ..PhysParams::default() };
    let k0 = ScalarField::from_fn(&g, |x, _| 1.0 + x);
    let ratio = gradient_ratio_integral(&g, &k0, phys.alpha_reg);
    let phi = integrate_phi0(&g, &phys, &vec![k0; 41]).unwrap();
    let rate = 2.0 * phys.c0 * ratio;
    for (n, p) in phi.iter().enumerate() {
        let exact = phys.phi00 / (1.0 + rate * phys.phi00 * g.time(n));
        assert!((p - exact).abs() <= 1e-10, "{p} vs {exact}");
    }
}

#[test]
fn gradient_ratio_matches_hand_quadrature() {
    // k = x on 4 x 4 unit cells: unit differences on the three inner
    // vertical faces, none on the walls
    let g = GridSpec::new(4, 4, 4.0, 4.0, 4, 1.0).unwrap();
    let k = ScalarField::from_fn(&g, |x, _| x);
    let alpha: f64 = 0.1;
    let centers: [f64; 4] = [0.5, 1.5, 2.5, 3.5];
    let face_sq = [0.5, 1.0, 1.0, 0.5];
    let expected: f64 = 4.0 * centers.iter().zip(face_sq).map(|(x, f)| f / (alpha + x).powi(2)).sum::<f64>();
    assert!((gradient_ratio_integral(&g, &k, alpha) - expected).abs() <= 1e-14);
}

#[test]
fn overshoot_to_nonpositive_phi0_is_a_breakdown() {
    let g = GridSpec::unit(8, 4).unwrap();
    // past the substep budget the explicit stages overshoot
    let phys = PhysParams { a: 2.0, c0: 1e14, ..PhysParams::default() };
    let k = ScalarField::from_fn(&g, |x, y| (PI * x).cos().powi(2) * (PI * y).cos().powi(2));
    let err = integrate_phi0(&g, &phys, &vec![k; 5]).unwrap_err();
    assert!(matches!(err, Error::ModelBreakdown(_)), "{err:?}");
}

#[test]
fn constants_by_substitution() {
    let g = GridSpec::unit(4, 4).unwrap();
    let phys = PhysParams { a: 3.0, c_nu: 1.0, ..PhysParams::default() };
    let consts = compute_constants(&phys, &ScalarField::zeros(&g), 0.5, &g).unwrap();
    assert!((consts.b1 - 1.0).abs() <= 1e-15);
    assert!((consts.m - 2.0 * phys.phi00).abs() <= 1e-15);
    assert!(consts.beta0 > 0.0 && consts.beta0 < phys.phi00);
}

#[test]
fn constants_for_uniform_energy() {
    let g = GridSpec::new(4, 4, 2.0, 0.5, 4, 1.0).unwrap();
    let phys = PhysParams::default();
    let (c, t) = (0.3, 2.0);
    let consts = compute_constants(&phys, &ScalarField::constant(&g, c), t, &g).unwrap();
    // |Omega| = 1, |k0|_1 = c, |k0|_2^2 = c^2
    let m = 2.0 * (0.1 + 1.0 * t * c);
    let b1 = (1.0 / (2.0 * 1.0 * 0.09 * t)).sqrt();
    let ka2 = 1e-2 * 1e-6;
    let te = t * t.exp();
    let beta0 = ka2 * 0.1 / (ka2 + 2.0 * 0.1 * 0.1 * (te * c * c + 0.09 * 0.09 * m * m * (1.0 + te)));
    assert!((consts.m - m).abs() <= 1e-14 * m);
    assert!((consts.b1 - b1).abs() <= 1e-14 * b1);
    assert!((consts.beta0 - beta0).abs() <= 1e-12 * beta0);
}

#[test]
fn exponent_two_removes_strain_bound() {
    let g = GridSpec::unit(4, 4).unwrap();
    let phys = PhysParams { a: 2.0, ..PhysParams::default() };
    let consts = compute_constants(&phys, &ScalarField::constant(&g, 1.0), 1.0, &g).unwrap();
    assert!(consts.b1.is_infinite() && !consts.strain_bound_active());
    assert_eq!(consts.m, 0.2);
    let v = vec![random_smooth_velocity(&g, 1, 3, 0.01); 5];
    let report = check_g_membership(&g, &v, &[0.1; 5], &consts).unwrap();
    assert!(report.strain2_margin.is_infinite() && report.is_member());
}

#[test]
fn rest_with_initial_ratio_is_a_member() {
    let g = GridSpec::unit(8, 8).unwrap();
    let phys = PhysParams::default();
    let consts = compute_constants(&phys, &ScalarField::constant(&g, 0.5), 1.0, &g).unwrap();
    let report = check_g_membership(&g, &still(&g), &[phys.phi00; 9], &consts).unwrap();
    assert!(report.is_member());
    assert_eq!((report.strain2, report.strain4), (0.0, 0.0));
    let half = check_g_membership(&g, &still(&g), &[consts.m / 2.0; 9], &consts).unwrap();
    assert!(half.lower_margin > 0.0 && half.upper_margin > 0.0);
}

#[test]
fn strain_bound_violation_is_reported_when_scaled_past_b1() {
    let g = GridSpec::unit(16, 8).unwrap();
    // c_nu large makes b1 small enough that the quartic bound stays slack
    let phys = PhysParams { c_nu: 50.0, ..PhysParams::default() };
    let consts = compute_constants(&phys, &ScalarField::constant(&g, 0.1), 1.0, &g).unwrap();
    let shape: Vec<VelocityField> = (0..=8).map(|n| random_smooth_velocity(&g, 9, 3, 1.0 + n as f64 * 0.1)).collect();
    let (s2, _) = strain_integrals(&g, &shape).unwrap();
    let b1_sq = consts.b1 * consts.b1;
    for (factor, member) in [(1.01, false), (0.99, true)] {
        let scale = (factor * b1_sq / s2).sqrt();
        let v: Vec<VelocityField> = shape.iter().map(|f| f.scaled(scale)).collect();
        let report = check_g_membership(&g, &v, &[0.1; 9], &consts).unwrap();
        assert!((report.strain2 - factor * b1_sq).abs() <= 1e-12 * b1_sq);
        assert!(report.strain4_margin > 0.0, "quartic {}", report.strain4);
        assert_eq!(report.is_member(), member);
        if !member {
            assert_eq!(report.violations(), vec!["strain_l2"]);
        }
    }
}

#[test]
fn ratio_bounds_report_both_sides() {
    let g = GridSpec::unit(4, 4).unwrap();
    let consts = DerivedConstants { m: 1.0, b1: 1.0, beta0: 0.1 };
    let report = check_g_membership(&g, &still(&g), &[0.05, 0.5, 1.5, 0.5, 0.5], &consts).unwrap();
    assert_eq!(report.violations(), vec!["phi_lower", "phi_upper"]);
    assert!((report.lower_margin + 0.05).abs() < 1e-15 && (report.upper_margin + 0.5).abs() < 1e-15);
}

#[test]
fn strain_quadrature_converges_for_smooth_field() {
    // psi = sin^2(pi x) sin^2(pi y): exact int |D v|^2 = 2 int |grad v|^2
    // for a solenoidal no-slip field, and int |grad v|^2 = int (Lap psi)^2
    let exact = {
        let m = 400;
        let h = 1.0 / m as f64;
        let mut s = 0.0;
        for j in 0..m {
            for i in 0..m {
                let (x, y) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                let (sx, cx2) = ((PI * x).sin().powi(2), (2.0 * PI * x).cos());
                let (sy, cy2) = ((PI * y).sin().powi(2), (2.0 * PI * y).cos());
                let lap = 2.0 * PI * PI * (cx2 * sy + sx * cy2);
                s += lap * lap * h * h;
            }
        }
        2.0 * s
    };
    let mut errors = Vec::new();
    for n in [16, 32, 64] {
        let g = GridSpec::unit(n, 4).unwrap();
        let v = VelocityField::from_stream_function(&g, |x, y| (PI * x).sin().powi(2) * (PI * y).sin().powi(2));
        errors.push((sym_gradient_norm2(&g, &v).integral(&g) - exact).abs() / exact);
    }
    assert!(errors[2] < 0.01 && errors[2] < errors[1] && errors[1] < errors[0], "{errors:?}");
}

/// `sum_ij (d_i v_j + d_j v_i)^2` from raw face values, shears at nodes with
/// odd ghosts across the walls.
fn component_sum(g: &GridSpec, v: &VelocityField) -> Vec<f64> {
    let (nx, ny, dx, dy) = (g.nx, g.ny, g.dx(), g.dy());
    let ux = |i: isize, j: isize| -> f64 {
        if j < 0 {
            -v.ux_at(i as usize, 0)
        } else if j >= ny as isize {
            -v.ux_at(i as usize, ny - 1)
        } else {
            v.ux_at(i as usize, j as usize)
        }
    };
    let uy = |i: isize, j: isize| -> f64 {
        if i < 0 {
            -v.uy_at(0, j as usize)
        } else if i >= nx as isize {
            -v.uy_at(nx - 1, j as usize)
        } else {
            v.uy_at(i as usize, j as usize)
        }
    };
    let shear = |i: usize, j: usize| -> f64 {
        let (i, j) = (i as isize, j as isize);
        (ux(i, j) - ux(i, j - 1)) / dy + (uy(i, j) - uy(i - 1, j)) / dx
    };
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let dxx = (v.ux_at(i + 1, j) - v.ux_at(i, j)) / dx;
            let dyy = (v.uy_at(i, j + 1) - v.uy_at(i, j)) / dy;
            let corners = [shear(i, j), shear(i + 1, j), shear(i, j + 1), shear(i + 1, j + 1)];
            let off = corners.iter().map(|s| s * s).sum::<f64>() / 4.0;
            // xx and yy entries, plus the two equal off-diagonal entries
            out.push((2.0 * dxx).powi(2) + (2.0 * dyy).powi(2) + 2.0 * off);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn strain_density_matches_component_sum(seed in 0u64..10_000, nx in 4usize..10, ny in 4usize..10) {
        let g = GridSpec::new(nx, ny, 1.0, 1.3, 4, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ux: Vec<f64> = (0..g.n_ux()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let uy: Vec<f64> = (0..g.n_uy()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut v = VelocityField::from_components(&g, ux, uy).unwrap();
        v.clear_boundary();
        let d = sym_gradient_norm2(&g, &v);
        for (a, b) in d.as_slice().iter().zip(component_sum(&g, &v)) {
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn solenoidal_strain_is_twice_dirichlet(seed in 0u64..10_000, n in 4usize..16) {
        let g = GridSpec::unit(n, 4).unwrap();
        let v = random_smooth_velocity(&g, seed, 4, 1.0);
        let s = sym_gradient_norm2(&g, &v).integral(&g);
        let d = grad_norm2(&g, &v).integral(&g);
        prop_assert!((s - 2.0 * d).abs() <= 1e-10 * s.max(1e-300), "{} vs {}", s, 2.0 * d);
    }

    #[test]
    fn phi0_stays_below_upper_bound(seed in 0u64..10_000, amp in 0.0f64..2.0, a in 2.0f64..4.0) {
        let g = GridSpec::unit(8, 16).unwrap();
        let phys = PhysParams { a, ..PhysParams::default() };
        let k0 = random_smooth_scalar(&g, seed, 3).map(|x| amp * x * x);
        let k = solve_k_equation(&g, &phys, &still(&g), &vec![phys.phi00; 17], &k0).unwrap();
        let phi = integrate_phi0(&g, &phys, &k).unwrap();
        let consts = compute_constants(&phys, &k0, g.t_final, &g).unwrap();
        let state = TurbulenceState { k, phi0: phi };
        prop_assert!(state.phi0_range().1 <= consts.m);
        prop_assert!(state.k_min() >= 0.0);
    }
}
