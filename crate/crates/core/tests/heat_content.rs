use insulab::fem::FemSpace;
use insulab::geometry::{build_mesh, refine_times, DomainSpec};
use insulab::heat_content::*;
use insulab::radial_exact::AnnulusU0;
use proptest::prelude::*;

fn space(spec: &DomainSpec, levels: usize) -> FemSpace {
    FemSpace::new(&refine_times(&build_mesh(spec).unwrap(), levels))
}

fn l2_dist(fs: &FemSpace, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    fs.l2_norm(&d)
}

#[test]
fn disk_u0_has_constant_trace() {
    let mut last = f64::INFINITY;
    for levels in 0..4 {
        let fs = space(&DomainSpec::disk(1.0, 0.25), levels);
        let u0 = solve_u0(&fs).unwrap();
        assert!(fs.integral(&u0).abs() < 1e-12);
        let d = delta_omega(&fs, &u0);
        assert!(d >= 0.0 && d < last / 2.4, "{d} after {last}");
        last = d;
    }
}

#[test]
fn disk_m1_below_noise_floor() {
    let fs = space(&DomainSpec::disk(1.0, 0.25), 3);
    let rep = threshold_m1(&fs).unwrap();
    assert!(rep.below_noise_floor(), "{rep:?}");
    assert!(rep.refined.m1 < rep.m1 / 3.0);
}

#[test]
fn annulus_m1_matches_closed_form() {
    let fs = space(&DomainSpec::annulus(1.0, 2.0, 0.25), 2);
    let rep = threshold_m1(&fs).unwrap();
    let exact = AnnulusU0::new(1.0, 2.0).unwrap();
    assert!((rep.m1_extrapolated / exact.m1() - 1.0).abs() < 0.01, "{rep:?}");
    assert!((rep.refined.delta_omega / exact.delta_omega() - 1.0).abs() < 0.02);
}

#[test]
fn square_has_positive_delta() {
    let fs = space(&DomainSpec::square(1.0, 0.25), 1);
    let rep = threshold_m1(&fs).unwrap();
    assert!(rep.delta_omega > 1e-3, "{rep:?}");
    assert!((rep.refined.m1 / rep.m1 - 1.0).abs() < 0.05);
}

#[test]
fn m1_scales_quadratically() {
    let spec = DomainSpec::ellipse(2.0, 1.0, 0.4);
    let base = threshold_m1(&space(&spec, 0)).unwrap().m1;
    for t in [0.5, 2.0] {
        let mut mesh = build_mesh(&spec).unwrap();
        mesh.vertices.iter_mut().for_each(|p| *p = [t * p[0], t * p[1]]);
        mesh.domain = mesh.domain.scaled(t);
        let scaled = threshold_m1(&FemSpace::new(&mesh)).unwrap().m1;
        assert!((scaled / (t * t * base) - 1.0).abs() < 1e-8);
    }
}

#[test]
fn annulus_small_m_leaves_outer_boundary_bare() {
    let fs = space(&DomainSpec::annulus(1.0, 2.0, 0.25), 1);
    let r = minimize_heat_content(&fs, 0.1, &DEFAULT_SCHEDULE).unwrap();
    assert!(r.vanishing.measure > 0.05 * fs.perimeter);
    for &k in &r.vanishing.edges {
        assert_eq!(fs.mesh.boundary_edges[k].component, 0, "outer component is 0");
    }
    let inner_positive = fs
        .trace(&r.u)
        .iter()
        .filter(|(i, _)| fs.b_components[1][*i] > 0.0)
        .all(|(_, v)| *v > 0.0);
    assert!(inner_positive);
    let constant = vec![1.0 / fs.area; fs.n()];
    assert!(r.objective <= heat_objective(&fs, &constant, 0.1));
}

#[test]
fn minimizer_independent_of_initial_field() {
    for spec in [DomainSpec::disk(1.0, 0.3), DomainSpec::annulus(1.0, 2.0, 0.3)] {
        let fs = space(&spec, 1);
        for m in [0.1, 1.0] {
            let a = minimize_heat_content(&fs, m, &DEFAULT_SCHEDULE).unwrap();
            let init: Vec<f64> = fs.mesh.vertices.iter().map(|p| 1.0 + 0.5 * p[0] + p[1] * p[1]).collect();
            let b = minimize_heat_content_from(&fs, m, &DEFAULT_SCHEDULE, &init).unwrap();
            assert!(l2_dist(&fs, &a.u, &b.u) < 1e-6, "{spec:?} m = {m}");
        }
    }
}

#[test]
fn objective_decreases_along_schedule() {
    let fs = space(&DomainSpec::rectangle(2.0, 1.0, 0.3), 1);
    let r = minimize_heat_content(&fs, 0.05, &DEFAULT_SCHEDULE).unwrap();
    for w in r.log.windows(2) {
        assert!(w[1].objective <= w[0].objective * (1.0 + 1e-10));
    }
}

#[test]
fn torsion_peaks_on_ellipse_minor_axis() {
    let fs = space(&DomainSpec::ellipse(2.0, 1.0, 0.25), 3);
    let p = torsion_predictor(&fs, 0.05).unwrap();
    assert!((p.max_flux / 0.8 - 1.0).abs() < 0.03, "{}", p.max_flux);
    assert_eq!(p.peaks.len(), 2, "{:?}", p.peaks);
    for q in &p.peaks {
        assert!(q[0].abs() < 0.1 && (q[1].abs() - 1.0).abs() < 0.01, "{q:?}");
    }
}

#[test]
fn torsion_peaks_on_rectangle_long_sides() {
    let fs = space(&DomainSpec::rectangle(2.0, 1.0, 0.25), 2);
    let p = torsion_predictor(&fs, 0.05).unwrap();
    assert_eq!(p.peaks.len(), 2, "{:?}", p.peaks);
    for q in &p.peaks {
        assert!((q[0] - 1.0).abs() < 0.1 && (q[1] * (1.0 - q[1])).abs() < 1e-12, "{q:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regularization_gap_is_bounded(vals in proptest::collection::vec(-2.0f64..2.0, 1..200), delta in 1e-6f64..0.5, m in 0.01f64..10.0) {
        let fs = space(&DomainSpec::disk(1.0, 0.5), 0);
        let mut u = vec![0.0; fs.n()];
        for (i, v) in vals.iter().enumerate() {
            u[i % fs.n()] += v;
        }
        u[0] += 5.0;
        let l = fs.integral(&u);
        prop_assume!(l.abs() > 1e-3);
        let exact = heat_objective(&fs, &u, m) * l * l;
        let reg = regularized_heat_objective(&fs, &u, m, delta) * l * l;
        let a = fs.boundary_abs_integral(&u);
        let bound = (2.0 * delta * fs.perimeter * a + (delta * fs.perimeter).powi(2)) / m;
        prop_assert!(reg - exact >= -1e-12 * exact.abs().max(1.0));
        prop_assert!(reg - exact <= bound * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn candidate_minimum_affine_in_m(m in 1e-3f64..50.0) {
        let fs = space(&DomainSpec::rectangle(2.0, 1.0, 0.5), 0);
        let u0 = solve_u0(&fs).unwrap();
        let at_zero = fs.boundary_min(&u0) - fs.boundary_integral(&u0) / fs.perimeter;
        let u = linear_candidate(&fs, &u0, m).unwrap();
        let slope = fs.area / fs.perimeter.powi(2);
        prop_assert!((fs.boundary_min(&u) - at_zero - m * slope).abs() < 1e-12 * (1.0 + m * slope));
    }
}
