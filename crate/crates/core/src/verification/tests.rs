use super::*;
use crate::analysis::Problem;
use approx::assert_relative_eq;

fn bar(load: BarLoad) -> BarParams {
    BarParams {
        young: 10.0,
        area: 1.0,
        length: 3.0,
        traction: 5.0,
        body: 2.0,
        u_d: 0.0,
    }
    .with_load(load)
}

trait WithLoad {
    fn with_load(self, load: BarLoad) -> Self;
}

impl WithLoad for BarParams {
    fn with_load(mut self, load: BarLoad) -> Self {
        if load != BarLoad::Linear {
            self.traction = 0.0;
        }
        self
    }
}

#[test]
fn bar_tip_values() {
    let tip = |l| bar_solution(l, &bar(l), 3.0).unwrap().0;
    assert_relative_eq!(tip(BarLoad::Linear), 1.5, max_relative = 1e-15);
    assert_relative_eq!(tip(BarLoad::Quadratic), 0.9, max_relative = 1e-15);
    assert_relative_eq!(tip(BarLoad::Cubic), 1.8, max_relative = 1e-15);
    assert!(bar_solution(BarLoad::Linear, &bar(BarLoad::Linear), 3.1).is_err());
    assert!(BarLoad::parse("bar-sextic").is_err());
    assert_eq!(BarLoad::parse("cubic").unwrap(), BarLoad::Cubic);
    assert_eq!(BarLoad::parse("bar-quartic").unwrap(), BarLoad::Quartic);
}

#[test]
fn bar_satisfies_the_ode() {
    // E A u'' + b = 0, u(0) = u_D and E A u'(L) = t.
    for load in BarLoad::ALL {
        let p = bar(load);
        let ea = p.young * p.area;
        let h = 1e-4;
        for x in [0.3, 1.1, 2.6] {
            let (_, d0) = bar_solution(load, &p, x - h).unwrap();
            let (_, d1) = bar_solution(load, &p, x + h).unwrap();
            let upp = (d1 - d0) / (2.0 * h);
            assert!(
                (ea * upp + load.body(p.body, x)).abs() < 1e-6,
                "{load:?} at {x}"
            );
        }
        assert_eq!(bar_solution(load, &p, 0.0).unwrap().0, 0.0);
        let (_, dl) = bar_solution(load, &p, 3.0).unwrap();
        assert_relative_eq!(ea * dl, p.traction, epsilon = 1e-12);
    }
}

fn central_difference_check(s: &AnalyticalSolution, points: &[Vec2]) {
    let h = 1e-6;
    for &x in points {
        let f = s.eval(x).unwrap();
        for (c, fc) in f.iter().enumerate() {
            let dx = (s.eval(x + Vec2::new(h, 0.0)).unwrap()[c].value
                - s.eval(x - Vec2::new(h, 0.0)).unwrap()[c].value)
                / (2.0 * h);
            let dy = (s.eval(x + Vec2::new(0.0, h)).unwrap()[c].value
                - s.eval(x - Vec2::new(0.0, h)).unwrap()[c].value)
                / (2.0 * h);
            let scale = fc.gradient.norm().max(1e-3);
            assert!((dx - fc.gradient.x).abs() <= 1e-6 * scale, "{x:?}");
            assert!((dy - fc.gradient.y).abs() <= 1e-6 * scale, "{x:?}");
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    let t = 0.4f64;
    let e = Vec2::new(t.cos(), t.sin());
    for load in BarLoad::ALL {
        let s = AnalyticalSolution::Bar {
            load,
            params: bar(load),
            origin: Vec2::new(0.1, -0.2),
            axis: e,
        };
        let pts: Vec<Vec2> = [0.2, 1.0, 2.5]
            .iter()
            .map(|&x0| Vec2::new(0.1, -0.2) + e * x0 + e.perp() * 0.1)
            .collect();
        central_difference_check(&s, &pts);
    }
    let c = AnalyticalSolution::Cylinder {
        params: INCLUSION,
        center: Vec2::ZERO,
    };
    central_difference_check(
        &c,
        &[
            Vec2::new(0.1, 0.2),
            Vec2::new(0.45, 0.1),
            Vec2::new(0.7, -0.6),
        ],
    );
}

#[test]
fn cylinder_values() {
    let v = |r| cylinder_solution(&INCLUSION, r).unwrap();
    assert_relative_eq!(v(0.0).0, 0.375, max_relative = 1e-15);
    assert_relative_eq!(v(0.5).0, 0.3125, max_relative = 1e-15);
    assert_relative_eq!(v(1.0).0, 0.3125 - 2f64.ln(), max_relative = 1e-14);
    assert!((v(1.0).0 + 0.3806).abs() < 1e-4);
    // Continuity of value and flux across r = a.
    let (a0, d0) = v(0.5 - 1e-12);
    let (a1, d1) = v(0.5 + 1e-12);
    assert!((a0 - a1).abs() < 1e-10);
    assert_relative_eq!(
        INCLUSION.kappa_i * d0,
        INCLUSION.kappa_ii * d1,
        max_relative = 1e-9
    );
    assert!(cylinder_solution(&INCLUSION, -1.0).is_err());
}

#[test]
fn rates() {
    assert_relative_eq!(
        convergence_rate(&[0.1, 0.05], &[1e-2, 2.5e-3]).unwrap(),
        2.0,
        max_relative = 1e-12
    );
    assert!(
        convergence_rate(&[0.1, 0.05, 0.025], &[0.3; 3])
            .unwrap()
            .abs()
            < 1e-14
    );
    let h = [0.4, 0.2, 0.1];
    let e: Vec<f64> = h.iter().map(|x: &f64| 7.0 * x.powi(3)).collect();
    assert_relative_eq!(convergence_rate(&h, &e).unwrap(), 3.0, max_relative = 1e-12);
    assert!(convergence_rate(&[0.1, 0.05], &[1e-2, 0.0]).is_err());
    assert!(convergence_rate(&[0.1], &[1e-2]).is_err());
    assert!(convergence_rate(&[0.1, 0.1], &[1e-2, 1e-3]).is_err());
}

#[test]
fn geometric_error() {
    use crate::cutmesh::{BackgroundMesh, IntegrationMesh};
    use crate::geometry::{LevelSet, PhaseMap, Shape};
    let bg = || BackgroundMesh::new(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0), 4, 4).unwrap();
    let pm = PhaseMap::new(1, vec![1, 2]).unwrap();
    // Four planes bound the box [-0.297, 0.323] x [-0.291, 0.249].
    let (c, hx, hy) = (Vec2::new(0.013, -0.021), 0.31, 0.27);
    let plane = |p: Vec2, n: Vec2| LevelSet::analytic(Shape::plane(p, n));
    let sides = [
        plane(c - Vec2::new(hx, 0.0), Vec2::new(-1.0, 0.0)),
        plane(c + Vec2::new(hx, 0.0), Vec2::new(1.0, 0.0)),
        plane(c - Vec2::new(0.0, hy), Vec2::new(0.0, -1.0)),
        plane(c + Vec2::new(0.0, hy), Vec2::new(0.0, 1.0)),
    ];
    let box_map = PhaseMap::from_fn(4, |p| if p == 0 { 1 } else { 2 }).unwrap();
    let m = IntegrationMesh::build(bg(), &sides, &box_map, 0).unwrap();
    let e = geo_error(&m.cells, 1, 4.0 * hx * hy).unwrap();
    assert!(e.abs() < 1e-12, "{e}");

    let circle = LevelSet::analytic(Shape::Circle {
        center: Vec2::ZERO,
        radius: 0.5,
    });
    let v = core::f64::consts::PI * 0.25;
    let errs: Vec<f64> = (2..5)
        .map(|l| {
            let m = IntegrationMesh::build(bg(), core::slice::from_ref(&circle), &pm, l).unwrap();
            geo_error(&m.cells, 1, v).unwrap()
        })
        .collect();
    assert!(errs.iter().all(|e| *e < 0.0));
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        assert!(r > 3.5 && r < 4.5, "ratio {r}");
    }
    assert!(geo_error(&m.cells, 1, 0.0).is_err());
}

fn unit_heat_field(p: usize) -> Problem {
    // Any problem will do; only its discretization is used.
    let (mut problem, _) = inclusion_problem(p, 0.5, 0.5, GAMMA_G).unwrap();
    problem.degree = p;
    problem
}

/// Coefficients whose field reproduces `f` exactly when `f` has degree <= p:
/// quasi-interpolation through the Lagrange extraction per element is not
/// needed, solving the collocation system on Greville points is.
fn interpolate(problem: &Problem, f: impl Fn(Vec2) -> f64) -> (ReferenceField, usize) {
    let d = problem.discretize().unwrap();
    let basis = &d.basis;
    let n = basis.num_basis();
    let greville = |kv: &crate::splines::KnotVector, i: usize| {
        let p = kv.degree();
        kv.knots()[i + 1..=i + p].iter().sum::<f64>() / p as f64
    };
    let mut a = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for k in 0..n {
        let (ix, iy) = basis.basis_multi_index(k);
        let x = Vec2::new(greville(basis.knots_x(), ix), greville(basis.knots_y(), iy));
        rhs[k] = f(x);
        for b in basis.tensor_eval(x, 0).unwrap() {
            a[k][b.id] = b.value;
        }
    }
    let sys = crate::system::SparseSystem::from_dense(&a, rhs).unwrap();
    let scalars = crate::system::solve(&sys).unwrap().solution;
    // Every enriched level of function k takes the same coefficient.
    let mut coefficients = vec![0.0; d.dofs.num_dofs()];
    for k in 0..n {
        for l in 0..d.dofs.levels(k) {
            if let Some(s) = d.dofs.scalar(k, l) {
                coefficients[d.dofs.dof(s, 0)] = scalars[k];
            }
        }
    }
    let dofs = d.dofs.num_dofs();
    (
        ReferenceField {
            discretization: d,
            coefficients,
        },
        dofs,
    )
}

#[test]
fn norms_of_reproduced_polynomials() {
    let cubic = |x: Vec2| 0.3 + x.x - 0.7 * x.y * x.x + 0.25 * x.x.powi(3) - 0.1 * x.y.powi(3);
    let dcubic = |x: Vec2| {
        Vec2::new(
            1.0 - 0.7 * x.y + 0.75 * x.x * x.x,
            -0.7 * x.x - 0.3 * x.y * x.y,
        )
    };
    let problem = unit_heat_field(3);
    let (rf, _) = interpolate(&problem, cubic);
    let field = rf.field();
    let exact = FnReference(|x: Vec2, _m: u32| {
        Ok(vec![FieldSample {
            value: cubic(x),
            gradient: dcubic(x),
        }])
    });
    assert!(l2_error(&field, &exact, 5).unwrap() <= 1e-10);
    assert!(h1_seminorm_error(&field, &exact, 5).unwrap() <= 1e-10);

    let doubled = FnReference(|x: Vec2, _m: u32| {
        Ok(vec![FieldSample {
            value: 0.5 * cubic(x),
            gradient: dcubic(x) * 0.5,
        }])
    });
    assert_relative_eq!(
        l2_error(&field, &doubled, 5).unwrap(),
        1.0,
        max_relative = 1e-9
    );

    let shifted = FnReference(|x: Vec2, _m: u32| {
        Ok(vec![FieldSample {
            value: cubic(x) + 2.0,
            gradient: dcubic(x),
        }])
    });
    assert!(h1_seminorm_error(&field, &shifted, 5).unwrap() <= 1e-10);
    assert!(l2_error(&field, &shifted, 5).unwrap() > 0.1);

    let nothing = FnReference(|_x: Vec2, _m: u32| Ok(vec![FieldSample::default()]));
    assert_eq!(l2_error(&field, &nothing, 5), Err(Error::ZeroReference));
}

#[test]
fn linear_gradient_is_exact_for_p1() {
    let lin = |x: Vec2| 1.0 + 2.0 * x.x - 0.5 * x.y;
    let (rf, _) = interpolate(&unit_heat_field(1), lin);
    let exact = FnReference(|x: Vec2, _m: u32| {
        Ok(vec![FieldSample {
            value: lin(x),
            gradient: Vec2::new(2.0, -0.5),
        }])
    });
    assert!(h1_seminorm_error(&rf.field(), &exact, 3).unwrap() <= 1e-12);
    assert!(l2_error(&rf.field(), &rf.field(), 3).unwrap() == 0.0);
}

#[test]
fn study_ids_and_grids() {
    assert_eq!(StudyId::parse("rotated-bar").unwrap(), StudyId::RotatedBar);
    let err = StudyId::parse("cantilever").unwrap_err();
    let msg = alloc::format!("{err}");
    for id in StudyId::ALL {
        assert!(msg.contains(id.name()));
    }
    let c = StudyConfig::default();
    assert_eq!(cases(StudyId::Sliver, &c).unwrap().len(), 18 * 8 * 3);
    assert_eq!(cases(StudyId::Junction, &c).unwrap().len(), 4 * 5 * 3);
    assert_eq!(cases(StudyId::RotatedBar, &c).unwrap().len(), 3 * 4 * 8);
    let bad = StudyConfig {
        mesh_sizes: Some(vec![0.3]),
        ..StudyConfig::default()
    };
    assert!(cases(StudyId::RotatedBar, &bad).is_err());
}

#[test]
fn multimaterial_presets() {
    use MaterialPreset::*;
    // Inside the inclusion every bit except the quadrant bits is clear.
    for q in 0..4 {
        assert_eq!(multimaterial_material(Multi13, q), 1);
    }
    // Right of the inclusion, above the center: quadrant 3, x-side piece.
    let p = 1 | 2 | (1 << 3);
    assert_eq!(multimaterial_material(Multi5, p), 5);
    assert_eq!(multimaterial_material(Multi13, p), 2 + 9);
    assert_eq!(multimaterial_material(Multi13, p | (1 << 5)), 2 + 9 + 2);
    let mut mats: Vec<u32> = (0..64)
        .map(|p| multimaterial_material(Multi13, p))
        .collect();
    mats.sort_unstable();
    mats.dedup();
    assert_eq!(mats, (1..=13).collect::<Vec<u32>>());
    assert_eq!(multimaterial_conductivity(Multi13, 13), 0.5);
    assert_eq!(multimaterial_conductivity(Multi5, 2), 0.125);
    assert_eq!(multimaterial_conductivity(Single5, 5), 1.0);
    assert_eq!(integration_level(0.5, 0.001953125), 8);
    assert_eq!(integration_level(0.03125, 0.03125), 0);
}

#[test]
fn sliver_linear_case_is_exact() {
    for p in 1..=3 {
        let (problem, exact) = sliver_problem(p, 0.25, GAMMA_G, BarLoad::Linear).unwrap();
        let s = problem.solve().unwrap();
        let (l2, h1) = error_norms(&s.field(), &exact, p + 2).unwrap();
        assert!(l2 <= 1e-10, "p = {p}: {l2}");
        assert!(h1.unwrap() <= 1e-9, "p = {p}: {h1:?}");
    }
}
