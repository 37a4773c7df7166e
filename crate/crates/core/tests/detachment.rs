use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use relaxkit::convexify::envelope;
use relaxkit::detachment::*;
use relaxkit::gallery;
use relaxkit::{BoxDomain, Mesh, PLField, SampledSlice, XiGrid};

fn sample(name: &str, grid: &XiGrid) -> SampledSlice {
    SampledSlice::sample(&gallery::lagrangian(name).unwrap(), grid, &[0.0], 0.0).unwrap()
}

#[test]
fn sin_product_components_are_small() {
    let grid = XiGrid::centered_with_spacing(2, 4.0 * PI, PI / 8.0).unwrap();
    let s = sample("sin_product", &grid);
    let env = envelope(&s).unwrap();
    let rep = detachment_set(&s, &env, 1e-7).unwrap();
    let h = grid.max_spacing();
    assert!(!rep.components.is_empty());
    assert!(rep.max_diameter <= 2.0 * PI * 2f64.sqrt() + 2.0 * h, "{}", rep.max_diameter);
    let total: usize = rep.components.iter().map(|c| c.nodes.len()).sum();
    assert_eq!(total, rep.detached_count());
}

#[test]
fn convex_input_has_empty_mask() {
    let grid = XiGrid::centered(2, 2.0, 15).unwrap();
    let s = sample("quadratic", &grid);
    let rep = detachment_set(&s, &envelope(&s).unwrap(), 1e-7).unwrap();
    assert!(rep.is_empty());
}

#[test]
fn boundary_equality_sections() {
    let half = XiGrid::new(BoxDomain::new(vec![0.0], vec![4.0 * PI]).unwrap(), vec![65]).unwrap();
    let s = sample("sin_line", &half);
    assert!(check_boundary_equality(&s, &envelope(&s).unwrap(), 1.5 * PI, 1e-9).unwrap());
    let full = XiGrid::centered_with_spacing(1, 4.0 * PI, PI / 16.0).unwrap();
    let c = sample("cos_line", &full);
    assert!(check_boundary_equality(&c, &envelope(&c).unwrap(), PI, 1e-9).unwrap());
}

#[test]
fn double_well_condition_k_components() {
    let f = gallery::lagrangian("double_well").unwrap();
    let search = ConditionKSearch::new(Route::Components, 1, 20.0);
    let v = check_condition_k(&f, (-1.0, 1.0), 5.0, &search).unwrap();
    assert_eq!(v.holds, Holds::Yes, "{}", v.witness);
    let kp = v.k_prime.unwrap();
    assert!(kp <= 5.0 + 2.0 + search.spacing + 1e-12);
    assert!(v.validation.unwrap().passed);
    assert_eq!(v.probes.len(), 1);
}

#[test]
fn double_well_other_routes() {
    let f = gallery::lagrangian("double_well").unwrap();
    for route in [Route::Boundary, Route::Superlinear] {
        let v = check_condition_k(&f, (-1.0, 1.0), 2.0, &ConditionKSearch::new(route, 1, 12.0)).unwrap();
        assert_eq!(v.holds, Holds::Yes, "{route:?}: {}", v.witness);
    }
}

#[test]
fn exp_decay_never_validates() {
    let f = gallery::lagrangian("exp_decay").unwrap();
    let mut search = ConditionKSearch::new(Route::Components, 1, 50.0);
    search.tol = 1e-12;
    for route in [Route::Components, Route::Boundary, Route::Superlinear] {
        search.route = route;
        let v = check_condition_k(&f, (0.0, 0.0), 1.0, &search).unwrap();
        assert_ne!(v.holds, Holds::Yes, "{route:?}");
    }
    let probes = vec![Probe { x: vec![0.0], u: 0.0 }];
    for kp in [1.0, 5.0, 20.0, 30.0, 49.0] {
        assert!(!validate_k_prime(&f, &probes, 1.0, kp, &search).unwrap().passed);
    }
}

#[test]
fn sin_product_condition_k() {
    let f = gallery::lagrangian("sin_product").unwrap();
    let mut search = ConditionKSearch::new(Route::Components, 2, 5.0 * PI);
    search.spacing = PI / 8.0;
    let v = check_condition_k(&f, (0.0, 0.0), PI, &search).unwrap();
    assert_eq!(v.holds, Holds::Yes, "{} {:?}", v.witness, v.validation);
}

#[test]
fn superlinearity_radii() {
    let grid = XiGrid::centered_with_spacing(1, 10.0, 0.05).unwrap();
    let q = sample("quadratic", &grid);
    let cert = superlinearity_certificate(&[q], &[1.0, 3.0, 5.0]);
    assert!(cert.certified);
    let r3 = cert.radius(3.0).unwrap();
    let root = (3.0 + (9.0f64 + 12.0).sqrt()) / 2.0;
    assert!(r3 >= root && r3 <= root + 0.05 + 1e-9, "{r3}");
    assert!(cert.radii.windows(2).all(|w| w[0] <= w[1]));

    let a = sample("abs", &grid);
    let cert = superlinearity_certificate(&[a], &[1.0]);
    assert!(!cert.certified);
    assert_eq!(cert.failing_slope, Some(1.0));

    let g2 = XiGrid::centered(2, 8.0, 33).unwrap();
    assert!(!superlinearity_certificate(&[sample("sin_product", &g2)], &[1.0]).certified);
}

#[test]
fn phi_on_cube_root_gradients() {
    let mesh = Arc::new(Mesh::interval(0.0, 1.0, 1000).unwrap());
    let u = PLField::interpolate(mesh.clone(), |x| x[0].cbrt()).unwrap();
    let samples: Vec<(Vec<f64>, f64)> =
        (0..mesh.num_cells()).map(|c| (u.gradient(c).unwrap(), mesh.cell_measure(c))).collect();
    let phi = construct_phi(&samples, 64);
    assert!(phi.integral(&samples) <= 2.0);
    assert!(phi.thresholds.windows(2).all(|w| w[1] > w[0]));
    let ratios: Vec<f64> = [10.0, 100.0, 1000.0].iter().map(|r| phi.eval_norm(*r) / r).collect();
    assert!(ratios[0] < ratios[1] && ratios[1] < ratios[2], "{ratios:?}");
}

#[test]
fn radial_spectrum() {
    let f = gallery::lagrangian("radial_quartic").unwrap();
    let ev = hessian_eigenvalues(&f, &[0.0], 0.0, &[1.0, 0.0], 1e-3).unwrap();
    assert!((ev[0] - 4.0).abs() < 1e-4 && (ev[1] - 12.0).abs() < 1e-4, "{ev:?}");
    let dw = gallery::lagrangian("double_well").unwrap();
    assert!((hessian_min_eig(&dw, &[0.0], 0.0, &[0.0], 1e-3).unwrap() + 4.0).abs() < 1e-5);
}

#[test]
fn hessian_error_is_second_order() {
    let f = gallery::lagrangian("cos_quadratic").unwrap();
    let xi = [0.7, -0.4];
    let exact = 2.0 - 0.7f64.cos();
    let e1 = (hessian_min_eig(&f, &[0.0], 0.0, &xi, 1e-2).unwrap() - exact).abs();
    let e2 = (hessian_min_eig(&f, &[0.0], 0.0, &xi, 5e-3).unwrap() - exact).abs();
    assert!(e1 / e2 >= 3.0, "{e1} {e2}");
}

#[test]
fn theta_profiles() {
    let radii: Vec<f64> = (1..=40).map(|k| 0.05 * k as f64).collect();
    let dw = gallery::lagrangian("double_well").unwrap();
    let p = theta_profile(&dw, 1, &radii, 1, 1e-4, &[0.0], 0.0).unwrap();
    for (r, t) in p.radii.iter().zip(&p.theta) {
        let want = (4.0 - 12.0 * r * r).max(0.0);
        assert!((t - want).abs() < 1e-5, "r={r}: {t} vs {want}");
    }
    let cq = gallery::lagrangian("cos_quadratic").unwrap();
    let p = theta_profile(&cq, 2, &radii, 16, 1e-3, &[0.0], 0.0).unwrap();
    assert!(p.is_zero());
}

#[test]
fn corrections() {
    let opts = CorrectionOptions::default();
    let radii: Vec<f64> = (1..=60).map(|k| 0.1 * k as f64).collect();

    let q = gallery::lagrangian("quadratic").unwrap();
    let prof = theta_profile(&q, 1, &radii, 1, 1e-3, &[0.0], 0.0).unwrap();
    let c = convexifying_correction(&q, 1, 2.0, &prof, &opts).unwrap();
    assert!(c.convex_input && c.m == 0.0);

    let dw = gallery::lagrangian("double_well").unwrap();
    let prof = theta_profile(&dw, 1, &radii, 1, 1e-3, &[0.0], 0.0).unwrap();
    let c = convexifying_correction(&dw, 1, 4.0, &prof, &opts).unwrap();
    assert!(!c.convex_input);
    assert!(c.min_lambda >= -1e-6, "{}", c.min_lambda);

    let sl = gallery::lagrangian("sin_linear").unwrap();
    let far: Vec<f64> = (1..=200).map(|k| 0.25 * k as f64).collect();
    let prof = theta_profile(&sl, 1, &far, 1, 1e-3, &[0.0], 0.0).unwrap();
    assert!(matches!(convexifying_correction(&sl, 1, 1.0, &prof, &opts), Err(relaxkit::Error::Hypothesis(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn phi_bound_holds(vals in prop::collection::vec((-50.0f64..50.0, 0.001f64..0.1), 1..60)) {
        let samples: Vec<(Vec<f64>, f64)> = vals.into_iter().map(|(v, m)| (vec![v], m)).collect();
        let phi = construct_phi(&samples, 64);
        prop_assert!(phi.integral(&samples) <= 2.0 + 1e-12);
        prop_assert!(phi.thresholds.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn mask_empty_iff_equal(values in prop::collection::vec(0.0f64..4.0, 3..30)) {
        let n = values.len();
        let grid = XiGrid::centered(1, 1.0, n).unwrap();
        let s = relaxkit::SampledSlice::new(grid, values.into_iter().map(relaxkit::Extended::Finite).collect(), relaxkit::SliceContext::new(vec![0.0], 0.0)).unwrap();
        let env = envelope(&s).unwrap();
        let rep = detachment_set(&s, &env, 1e-9).unwrap();
        let equal = (0..n).all(|i| (s.value(i).to_f64() - env.value(i).to_f64()).abs() <= 1e-9);
        prop_assert_eq!(rep.is_empty(), equal);
    }
}
