use std::sync::Arc;

use proptest::prelude::*;
use relaxkit::convexify::ConvexDecomposition;
use relaxkit::energy::{energy, relaxed_energy, XiPolicy};
use relaxkit::laminate::{
    laminate_1d, laminate_nd, relaxation_sequence, strong_recovery_sequence, verify_weak_star, SequenceOptions,
};
use relaxkit::{gallery, BoxDomain, Error, Mesh, PLField};

fn unit(n: usize) -> Arc<Mesh> {
    Arc::new(Mesh::interval(0.0, 1.0, n).unwrap())
}

fn field(n: usize, g: impl Fn(f64) -> f64) -> PLField {
    PLField::interpolate(unit(n), |p| g(p[0])).unwrap()
}

fn decomp(parts: &[(f64, &[f64])]) -> ConvexDecomposition {
    ConvexDecomposition {
        weights: parts.iter().map(|p| p.0).collect(),
        points: parts.iter().map(|p| p.1.to_vec()).collect(),
        nodes: Vec::new(),
        value: 0.0,
    }
}

fn square(nx: usize) -> Arc<Mesh> {
    let bbox = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    Arc::new(Mesh::rectangle(&bbox, nx, nx).unwrap())
}

#[test]
fn sawtooth_from_symmetric_pair() {
    let u = field(1, |_| 0.0);
    let l = laminate_1d(&u, &[decomp(&[(0.5, &[-1.0]), (0.5, &[1.0])])], 4).unwrap();
    let v = &l.field;
    assert_eq!(v.mesh().num_cells(), 8);
    assert_eq!(v.nodal()[0], 0.0);
    assert_eq!(*v.nodal().last().unwrap(), 0.0);
    assert_eq!(v.max_abs(), 0.125);
    for c in 0..8 {
        let g = v.gradient(c).unwrap()[0];
        assert_eq!(g, if c % 2 == 0 { -1.0 } else { 1.0 });
    }
}

#[test]
fn trivial_decomposition_keeps_field() {
    let u = field(3, |x| x * x);
    let decs: Vec<_> = (0..3).map(|c| decomp(&[(1.0, &u.gradient(c).unwrap())])).collect();
    let l = laminate_1d(&u, &decs, 5).unwrap();
    assert_eq!(l.field.nodal(), u.nodal());
}

#[test]
fn staircase_keeps_endpoints() {
    let u = field(1, |x| x);
    let l = laminate_1d(&u, &[decomp(&[(0.5, &[0.0]), (0.5, &[2.0])])], 2).unwrap();
    let v = &l.field;
    assert_eq!(v.nodal(), &[0.0, 0.0, 0.5, 0.5, 1.0]);
    let slopes: Vec<f64> = (0..4).map(|c| v.gradient(c).unwrap()[0]).collect();
    assert_eq!(slopes, vec![0.0, 2.0, 0.0, 2.0]);
}

#[test]
fn inconsistent_certificate_is_rejected() {
    let u = field(1, |x| x);
    let err = laminate_1d(&u, &[decomp(&[(0.5, &[-1.0]), (0.5, &[1.0])])], 2).unwrap_err();
    assert!(matches!(err, Error::Certificate { cell: 0, .. }));
}

#[test]
fn three_point_cells_are_refused_in_2d() {
    let u = PLField::interpolate(square(1), |_| 0.0).unwrap();
    let d = decomp(&[(1.0 / 3.0, &[1.0, 0.0]), (1.0 / 3.0, &[-0.5, 0.8]), (1.0 / 3.0, &[-0.5, -0.8])]);
    let err = laminate_nd(&u, &[d.clone(), d], 4, 0.1).unwrap_err();
    assert!(matches!(err, Error::Unsupported(_)));
}

#[test]
fn planar_laminate_of_zero() {
    let u = PLField::interpolate(square(1), |_| 0.0).unwrap();
    let d = decomp(&[(0.5, &[-1.0, 0.0]), (0.5, &[1.0, 0.0])]);
    let l = laminate_nd(&u, &[d.clone(), d], 8, 0.1).unwrap();
    let v = &l.field;
    assert!(v.max_abs() <= 1.0 / 16.0 + 1e-15);
    assert!((l.cutoff_excess - (1.0 / 16.0) / 0.1).abs() < 1e-15);
    for c in 0..v.mesh().num_cells() {
        let g = v.gradient(c).unwrap();
        if !l.in_band[c] {
            assert!((g[0].abs() - 1.0).abs() < 1e-9 && g[1].abs() < 1e-9, "cell {c}: {g:?}");
        } else {
            assert!(g[0].hypot(g[1]) <= 1.0 + l.cutoff_excess + 1e-9);
        }
    }
    for &b in v.mesh().boundary_vertices() {
        assert!(v.nodal()[b].abs() < 1e-15);
    }
    // Pieces cover the square.
    assert!((v.mesh().total_measure() - 1.0).abs() < 1e-12);
}

#[test]
fn planar_laminate_of_affine_field() {
    let u = PLField::interpolate(square(2), |p| p[1]).unwrap();
    let d = decomp(&[(0.5, &[-1.0, 1.0]), (0.5, &[1.0, 1.0])]);
    let decs = vec![d; 8];
    let l = laminate_nd(&u, &decs, 4, 0.05).unwrap();
    let v = &l.field;
    for (i, &b) in u.mesh().boundary_vertices().iter().enumerate() {
        assert_eq!(v.nodal()[b], u.nodal()[b], "boundary vertex {i}");
    }
    for &b in v.mesh().boundary_vertices() {
        let p = v.mesh().vertex(b);
        assert!((v.nodal()[b] - p[1]).abs() < 1e-14);
    }
    let mut seen_x = false;
    for c in 0..v.mesh().num_cells() {
        if !l.in_band[c] {
            let g = v.gradient(c).unwrap();
            assert!((g[1] - 1.0).abs() < 1e-9 && (g[0].abs() - 1.0).abs() < 1e-9);
            seen_x = true;
        }
    }
    assert!(seen_x);
    assert!(sup_dist(v, &u) <= 0.5 * 0.5 * 2.0 / 4.0 + 1e-12);
}

fn sup_dist(v: &PLField, u: &PLField) -> f64 {
    v.mesh().vertices().iter().zip(v.nodal()).map(|(p, x)| (x - u.value_at(p).unwrap()).abs()).fold(0.0, f64::max)
}

#[test]
fn double_well_ladder() {
    let f = gallery::lagrangian("double_well").unwrap();
    let u = field(1, |_| 0.0);
    let schedule = [1, 2, 4, 8, 16];
    let (fields, report) =
        relaxation_sequence(&f, &u, &schedule, &XiPolicy::new(2.0, 81), &SequenceOptions::default()).unwrap();
    assert_eq!(fields.len(), 5);
    for (r, n) in report.rows.iter().zip(schedule) {
        assert_eq!(r.energy_f, 0.0);
        assert!((r.sup_norm_dist - 0.5 / n as f64).abs() < 1e-12);
        assert_eq!(r.grad_sup, 1.0);
    }
    assert!(report.weak_star_ok && report.energy_converged);
    assert!(!report.strong_ok, "gradients stay at distance 1");
    for v in &fields {
        assert_eq!(v.nodal()[0], 0.0);
        assert_eq!(*v.nodal().last().unwrap(), 0.0);
    }
}

#[test]
fn state_coupled_ladder_decays_quadratically() {
    let f = gallery::lagrangian("double_well_state").unwrap();
    let u = field(1, |_| 0.0);
    let schedule = [2, 4, 8, 16, 32];
    let (_, report) =
        relaxation_sequence(&f, &u, &schedule, &XiPolicy::new(2.0, 81), &SequenceOptions::default()).unwrap();
    let e: Vec<f64> = report.rows.iter().map(|r| r.energy_f).collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.05, "{e:?}");
    }
}

#[test]
fn convex_sequence_is_constant() {
    let f = gallery::lagrangian("quadratic").unwrap();
    let u = field(4, |x| x * x);
    let (fields, report) =
        relaxation_sequence(&f, &u, &[1, 2, 4], &XiPolicy::new(3.0, 61), &SequenceOptions::default()).unwrap();
    let e0 = energy(&f, &u).unwrap().total;
    for (v, r) in fields.iter().zip(&report.rows) {
        assert_eq!(v.nodal(), u.nodal());
        assert!((r.energy_f - e0).abs() < 1e-15);
    }
}

#[test]
fn planar_sequence_realizes_relaxed_energy() {
    let f = gallery::lagrangian("shifted_wells").unwrap();
    let u = PLField::interpolate(square(1), |_| 0.0).unwrap();
    let policy = XiPolicy::new(2.0, 17);
    let target = relaxed_energy(&f, &u, &policy).unwrap().total;
    let opts = SequenceOptions { cutoff_delta: 0.02, ..SequenceOptions::default() };
    let (_, report) = relaxation_sequence(&f, &u, &[2, 4, 8, 16], &policy, &opts).unwrap();
    assert!(target.abs() < 1e-9);
    for r in &report.rows {
        // Energy sandwich: relaxed ≤ E[f](uₙ) ≤ relaxed + band contribution.
        assert!(r.energy_f >= target - 1e-12);
        let band_bound = (1.0 + r.cutoff_excess).powi(2) + 1.0;
        assert!(r.energy_f <= target + r.band_measure * band_bound * 4.0, "{r:?}");
    }
    assert!(report.weak_star_ok);
}

#[test]
fn strong_recovery_gate() {
    let f = gallery::lagrangian("double_well").unwrap();
    let policy = XiPolicy::new(3.0, 121);
    let opts = SequenceOptions::default();
    let u = field(4, |x| x);
    let (_, report) = strong_recovery_sequence(&f, &u, 2.0, &[1, 2, 4, 8], &policy, &opts).unwrap();
    assert!(report.strong_ok && report.energy_converged);
    assert_eq!(report.energy_target, 0.0);

    let zero = field(4, |_| 0.0);
    match strong_recovery_sequence(&f, &zero, 2.0, &[1, 2], &policy, &opts) {
        Err(Error::DetachedCells { cells }) => assert_eq!(cells, vec![0, 1, 2, 3]),
        other => panic!("expected refusal, got {other:?}"),
    }
}

#[test]
fn strong_recovery_smooths_kinks() {
    // A kinked field inside the convex region of the double well.
    let f = gallery::lagrangian("double_well").unwrap();
    let u = PLField::new(unit(2), vec![0.0, 0.6, 0.0]).unwrap();
    let (fields, report) =
        strong_recovery_sequence(&f, &u, 1.0, &[1, 2, 4, 8, 16], &XiPolicy::new(3.0, 121), &SequenceOptions::default())
            .unwrap();
    assert!(report.strong_ok, "{:?}", report.rows);
    let d: Vec<f64> = report.rows.iter().map(|r| r.w1p_dist[0]).collect();
    assert!(d.windows(2).all(|w| w[1] < w[0]));
    let aux = report.aux.unwrap();
    assert!(aux.converged, "{aux:?}");
    let gaps: Vec<f64> = aux.length_energies.iter().map(|e| (e - aux.length_target).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] <= w[0]));
    for v in &fields {
        assert_eq!(v.nodal()[0], 0.0);
        assert_eq!(*v.nodal().last().unwrap(), 0.0);
    }
}

#[test]
fn strong_recovery_in_2d() {
    let f = gallery::lagrangian("quadratic").unwrap();
    let u = PLField::interpolate(square(2), |p| p[0] + 0.5 * p[1]).unwrap();
    let (fields, report) =
        strong_recovery_sequence(&f, &u, 2.0, &[1, 2, 3], &XiPolicy::new(3.0, 25), &SequenceOptions::default())
            .unwrap();
    assert!(report.strong_ok && report.energy_converged);
    assert_eq!(fields[2].mesh().num_cells(), 8 * 9);
}

#[test]
fn weak_star_verdicts() {
    let u = field(4, |x| x);
    let constant = vec![u.clone(), u.clone(), u.clone()];
    assert!(verify_weak_star(&constant, &u, 1.0).unwrap().ok);

    let bumps: Vec<PLField> = [1usize, 2, 4, 8]
        .iter()
        .map(|&n| {
            let mesh = unit(4 * n);
            PLField::interpolate(mesh, |p| {
                p[0] + n as f64 * (1.0 - (2.0 * p[0] - 1.0).abs()).max(0.0) / n as f64 / n as f64
            })
            .unwrap()
        })
        .collect();
    // Distances decay like 1/n but gradients stay bounded by 1 + 2/n.
    assert!(verify_weak_star(&bumps, &u, 3.0).unwrap().ok);

    let growing: Vec<PLField> = [1usize, 2, 4, 8]
        .iter()
        .map(|&n| {
            PLField::interpolate(unit(8), |p| p[0] + n as f64 * (1.0 - (8.0 * p[0] - 4.0).abs()).max(0.0)).unwrap()
        })
        .collect();
    let v = verify_weak_star(&growing, &u, 10.0).unwrap();
    assert!(!v.ok && !v.bound_ok);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn laminate_1d_invariants(
        nodal in prop::collection::vec(-1.0f64..1.0, 4),
        spread in prop::collection::vec(0.1f64..2.0, 3),
        weights in prop::collection::vec(0.05f64..0.95, 3),
        n in 1usize..9,
    ) {
        let u = PLField::new(unit(3), nodal).unwrap();
        let decs: Vec<ConvexDecomposition> = (0..3).map(|c| {
            let g = u.gradient(c).unwrap()[0];
            let a = weights[c];
            // ξ₁ = g + (1−a)s, ξ₂ = g − a s gives a ξ₁ + (1−a) ξ₂ = g.
            decomp(&[(a, &[g + (1.0 - a) * spread[c]]), (1.0 - a, &[g - a * spread[c]])])
        }).collect();
        let l = laminate_1d(&u, &decs, n).unwrap();
        let v = &l.field;
        prop_assert_eq!(v.nodal()[0], u.nodal()[0]);
        prop_assert_eq!(*v.nodal().last().unwrap(), *u.nodal().last().unwrap());
        // Amplitude law: width/n · max deviation.
        for c in 0..v.mesh().num_cells() {
            let parent = l.parent[c];
            let g = v.gradient(c).unwrap()[0];
            let pts: Vec<f64> = decs[parent].points.iter().map(|p| p[0]).collect();
            prop_assert!(pts.iter().any(|p| (p - g).abs() < 1e-8 * (1.0 + p.abs())), "{} not in {:?}", g, pts);
        }
        let bound = (1.0 / 3.0) / n as f64 * spread.iter().fold(0.0f64, |m, s| m.max(*s));
        prop_assert!(sup_dist(v, &u) <= bound + 1e-12);
    }
}
