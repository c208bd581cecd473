//! Randomized invariants of the enriched discretization.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use iga_core::analysis::{constant, BoundaryCondition, Discretization, Problem};
use iga_core::cutmesh::{BoundaryTag, CellShape, Side};
use iga_core::enrichment::EnrichedField;
use iga_core::geometry::{LevelSet, Material, MaterialTable, PhaseMap, Shape};
use iga_core::system::{condition_number, SparseSystem};
use iga_core::weakform::{ElementContribution, PenaltyConfig, Physics};
use iga_core::Vec2;

/// Circle and line in `[0, 1]^2` with three materials and one void phase.
fn problem(degree: usize, n: usize, center: Vec2, radius: f64, angle: f64) -> Problem {
    let normal = Vec2::new(angle.cos(), angle.sin());
    let mut materials = MaterialTable::new();
    for m in 1..=3 {
        materials
            .insert(m, Material::new(1.0, 0.0, f64::from(m)).unwrap())
            .unwrap();
    }
    Problem {
        physics: Physics::Heat,
        degree,
        domain: (Vec2::ZERO, Vec2::new(1.0, 1.0)),
        resolution: (n, n),
        level_sets: vec![
            LevelSet::analytic(Shape::Circle { center, radius }),
            LevelSet::analytic(Shape::plane(Vec2::new(0.5, 0.5), normal)),
        ],
        // bit 0 outside the circle, bit 1 beyond the line.
        phase_map: PhaseMap::new(2, vec![1, 2, 0, 3]).unwrap(),
        materials,
        boundary_conditions: Side::ALL
            .iter()
            .map(|s| BoundaryCondition::dirichlet(BoundaryTag::Side(*s), constant([0.0, 0.0])))
            .chain([BoundaryCondition::dirichlet(
                BoundaryTag::LevelSet(1),
                constant([0.0, 0.0]),
            )])
            .collect(),
        body_load: Some(std::sync::Arc::new(|_x: Vec2, _m: u32| [1.0, 0.0])),
        penalty: PenaltyConfig::new(100.0, 1e-3).unwrap(),
        integration_level: 0,
        quadrature_order: None,
    }
}

fn random_point(cell: &CellShape, rng: &mut ChaCha8Rng) -> Vec2 {
    match *cell {
        CellShape::Quad { lo, hi } => {
            Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y))
        }
        CellShape::Triangle([a, b, c]) => {
            let (mut s, mut t): (f64, f64) = (rng.gen(), rng.gen());
            if s + t > 1.0 {
                s = 1.0 - s;
                t = 1.0 - t;
            }
            a + (b - a) * s + (c - a) * t
        }
    }
}

fn ones(d: &Discretization) -> Vec<f64> {
    vec![1.0; d.dofs.num_dofs()]
}

fn config() -> impl Strategy<Value = (usize, usize, f64, f64, f64, f64, u64)> {
    (
        1usize..=3,
        3usize..=6,
        0.3f64..0.7,
        0.3f64..0.7,
        0.12f64..0.35,
        0.0f64..std::f64::consts::PI,
        any::<u64>(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn enriched_partition_of_unity((p, n, cx, cy, r, a, seed) in config()) {
        let pr = problem(p, n, Vec2::new(cx, cy), r, a);
        let d = pr.discretize().unwrap();
        let c = ones(&d);
        let field = EnrichedField { basis: &d.basis, mesh: &d.mesh, dofs: &d.dofs, coefficients: &c };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells: Vec<usize> = (0..d.mesh.cells.len())
            .filter(|&i| d.mesh.cells[i].material != 0)
            .collect();
        for _ in 0..50 {
            let cell = cells[rng.gen_range(0..cells.len())];
            let x = random_point(&d.mesh.cells[cell].shape, &mut rng);
            let v = field.eval(cell, x)[0].value;
            prop_assert!((v - 1.0).abs() <= 1e-12, "{v}");
        }
    }

    #[test]
    fn every_supported_function_has_one_active_level((p, n, cx, cy, r, a, _s) in config()) {
        let d = problem(p, n, Vec2::new(cx, cy), r, a).discretize().unwrap();
        prop_assume!(d.dofs.dropped.is_empty());
        for (e, el) in d.mesh.elements.iter().enumerate() {
            for (k, comp) in el.components.iter().enumerate() {
                if comp.material == 0 {
                    continue;
                }
                let scalars = d.dofs.local_scalars(e, k);
                prop_assert_eq!(scalars.len(), (p + 1) * (p + 1));
                prop_assert!(scalars.iter().all(Option::is_some));
            }
        }
        // Each level is realized by at least one material component in the
        // support; functions supported only in void carry no levels.
        for k in 0..d.dofs.num_basis() {
            let pieces: usize = d
                .basis
                .support_elements(k)
                .iter()
                .map(|&e| d.mesh.elements[e].components.iter().filter(|c| c.material != 0).count())
                .sum();
            let levels = d.dofs.levels(k);
            prop_assert!(levels <= pieces && (pieces == 0) == (levels == 0), "{k}: {levels} of {pieces}");
        }
    }

    #[test]
    fn element_bases_are_locally_independent((p, n, cx, cy, r, a, _s) in config()) {
        let d = problem(p, n, Vec2::new(cx, cy), r, a).discretize().unwrap();
        let h = d.mesh.background.h();
        let nloc = (p + 1) * (p + 1);
        for (e, el) in d.mesh.elements.iter().enumerate() {
            let space = d.basis.element_space(e);
            for (k, comp) in el.components.iter().enumerate() {
                if comp.material == 0 || comp.area < 1e-2 * h * h {
                    continue;
                }
                let pts: Vec<Vec2> = d
                    .mesh
                    .element_cells(e)
                    .iter()
                    .filter(|c| c.component == k)
                    .flat_map(|c| c.quadrature(p + 2).unwrap())
                    .map(|q| q.x)
                    .collect();
                prop_assert!(pts.len() >= nloc);
                let m = nalgebra::DMatrix::from_fn(pts.len(), nloc, |i, j| {
                    space.eval(pts[i], 0).value(j)
                });
                let sv = m.singular_values();
                let ratio = sv.min() / sv.max();
                prop_assert!(ratio > 1e-12, "element {e} component {k}: {ratio}");
            }
        }
    }

    #[test]
    fn assembly_is_linear((p, n, cx, cy, r, a, _s) in config(), alpha in -3.0f64..3.0) {
        let pr = problem(p, n, Vec2::new(cx, cy), r, a);
        let d = pr.discretize().unwrap();
        let c = pr.contributions(&d).unwrap();
        let nd = d.dofs.num_dofs();
        let base = SparseSystem::assemble(nd, c.all()).unwrap();
        let scaled: Vec<ElementContribution> = c
            .all()
            .map(|e| ElementContribution {
                matrix: e.matrix.iter().map(|&(i, j, v)| (i, j, alpha * v)).collect(),
                rhs: e.rhs.iter().map(|&(i, v)| (i, alpha * v)).collect(),
            })
            .collect();
        let sys = SparseSystem::assemble(nd, scaled.iter()).unwrap();
        let want = base.scaled(alpha);
        let tol = 1e-13 * base.frobenius_norm().max(1.0);
        for i in 0..nd {
            for (j, v) in sys.row(i) {
                prop_assert!((v - want.get(i, j)).abs() <= tol);
            }
            prop_assert!((sys.rhs[i] - alpha * base.rhs[i]).abs() <= tol);
        }
    }

    #[test]
    fn material_away_from_interfaces_is_stable_under_refinement(
        (p, n, cx, cy, r, a, seed) in config()
    ) {
        let center = Vec2::new(cx, cy);
        let coarse = problem(p, n, center, r, a).discretize().unwrap();
        let fine = problem(p, 2 * n, center, r, a).discretize().unwrap();
        let normal = Vec2::new(a.cos(), a.sin());
        let h = coarse.mesh.background.h();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let material_at = |d: &Discretization, x: Vec2| {
            let e = d.mesh.background.locate(x).unwrap();
            d.mesh.cells[d.mesh.find_cell(e, x, None).unwrap()].material
        };
        for _ in 0..100 {
            let x = Vec2::new(rng.gen(), rng.gen());
            let circle = (x - center).norm() - r;
            let line = normal.dot(x - Vec2::new(0.5, 0.5));
            if circle.abs() <= 1.5 * h || line.abs() <= 1.5 * h {
                continue;
            }
            let expected = [1, 2, 0, 3][usize::from(circle > 0.0) + 2 * usize::from(line > 0.0)];
            prop_assert_eq!(material_at(&coarse, x), expected);
            prop_assert_eq!(material_at(&fine, x), expected);
        }
    }
}

#[test]
fn heat_system_condition_number_is_at_least_one() {
    for p in 1..=3 {
        let pr = problem(p, 4, Vec2::new(0.45, 0.55), 0.3, 0.4);
        let d = pr.discretize().unwrap();
        let sys = pr.assemble(&d).unwrap();
        let k = condition_number(&sys).unwrap();
        assert!(k >= 1.0 && k.is_finite(), "p={p}: {k}");
    }
}
