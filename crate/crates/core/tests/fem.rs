use insulab::fem::{eig_smallest, neumann_poisson, FemSpace};
use insulab::geometry::{build_mesh, refine, refine_times, DomainSpec};
use insulab::radial_exact::{ball_thresholds, first_zero, AnnulusU0};

fn space(spec: &DomainSpec, levels: usize) -> FemSpace {
    FemSpace::new(&refine_times(&build_mesh(spec).unwrap(), levels))
}

struct Spectrum {
    kappa1: f64,
    mu2: f64,
    lambda_d: f64,
}

fn spectrum(fs: &FemSpace) -> Spectrum {
    let (k, m) = (&fs.stiffness, &fs.mass);
    Spectrum {
        kappa1: eig_smallest(k, m, std::slice::from_ref(&fs.b), None, 0).unwrap().eigenvalue,
        mu2: eig_smallest(k, m, &[], None, 1).unwrap().eigenvalue,
        lambda_d: eig_smallest(k, m, &[], Some(&fs.on_boundary), 0).unwrap().eigenvalue,
    }
}

#[test]
fn disk_eigenvalues_match_bessel_roots() {
    let fs = space(&DomainSpec::disk(1.0, 0.25), 2);
    let s = spectrum(&fs);
    let j01 = first_zero(0.0).unwrap();
    let ball = ball_thresholds(2, 1.0).unwrap();
    assert!((s.lambda_d / (j01 * j01) - 1.0).abs() < 0.01, "{}", s.lambda_d);
    assert!((s.mu2 / ball.mu2 - 1.0).abs() < 0.01, "{}", s.mu2);
    assert!((s.kappa1 / s.mu2 - 1.0).abs() < 0.01, "{} {}", s.kappa1, s.mu2);
}

#[test]
fn refinement_lowers_every_eigenvalue() {
    for spec in [DomainSpec::ellipse(2.0, 1.0, 0.5), DomainSpec::rectangle(2.0, 1.0, 0.4)] {
        let coarse = build_mesh(&spec).unwrap();
        let polygonal = matches!(spec.kind, insulab::geometry::DomainKind::Polygon { .. });
        let a = spectrum(&FemSpace::new(&coarse));
        let b = spectrum(&FemSpace::new(&refine(&coarse)));
        // nested spaces only for polygons; curved boundaries move outward
        if polygonal {
            assert!(b.mu2 <= a.mu2 * (1.0 + 1e-9));
            assert!(b.kappa1 <= a.kappa1 * (1.0 + 1e-9));
        }
        assert!(b.lambda_d <= a.lambda_d * (1.0 + 1e-9));
    }
}

#[test]
fn eigenvalues_scale_with_inverse_square() {
    let base = build_mesh(&DomainSpec::ellipse(2.0, 1.0, 0.4)).unwrap();
    let a = spectrum(&FemSpace::new(&base));
    for t in [0.5, 2.0] {
        let mut scaled = base.clone();
        scaled.vertices.iter_mut().for_each(|p| *p = [t * p[0], t * p[1]]);
        scaled.domain = scaled.domain.scaled(t);
        let b = spectrum(&FemSpace::new(&scaled));
        for (x, y) in [(a.kappa1, b.kappa1), (a.mu2, b.mu2), (a.lambda_d, b.lambda_d)] {
            assert!((y * t * t / x - 1.0).abs() < 1e-7, "{x} {y}");
        }
    }
}

#[test]
fn annulus_torsion_profile() {
    let exact = AnnulusU0::new(1.0, 2.0).unwrap();
    let mut errs = Vec::new();
    for levels in 0..3 {
        let fs = space(&DomainSpec::annulus(1.0, 2.0, 0.25), levels);
        let g = -fs.area / fs.perimeter;
        let u = neumann_poisson(&fs, 1.0, &[g, g]).unwrap();
        let want: Vec<f64> = fs
            .mesh
            .vertices
            .iter()
            .map(|p| exact.value(p[0].hypot(p[1]).clamp(1.0, 2.0)).unwrap())
            .collect();
        let c = (fs.integral(&u) - fs.integral(&want)) / fs.area;
        let diff: Vec<f64> = u.iter().zip(&want).map(|(a, b)| a - b - c).collect();
        errs.push(fs.l2_norm(&diff) / fs.l2_norm(&want));
    }
    assert!(errs[2] < errs[1] / 3.0 && errs[1] < errs[0] / 3.0, "{errs:?}");
}
