use crate::bench::{eoc, manifold_distance};
use crate::fem::{FemSpace, SparseMatrix};
use crate::mesh::{generate, GeneratorSpec, Point, SimplicialSurface};
use proptest::prelude::*;

fn perturbed(base: &SimplicialSurface, shifts: &[(f64, f64, f64)]) -> SimplicialSurface {
    let d = base.ambient_dim();
    let v = base
        .vertices()
        .iter()
        .zip(shifts.iter().cycle())
        .map(|(p, &(a, b, c))| p + Point::new(a, b, if d == 3 { c } else { 0.0 }))
        .collect();
    base.with_vertices(v).unwrap()
}

fn meshes() -> Vec<SimplicialSurface> {
    vec![
        generate(&GeneratorSpec::CircleNonuniform { segments: 24 }).unwrap(),
        generate(&GeneratorSpec::Sphere {
            level: 1,
            radius: 1.0,
        })
        .unwrap(),
    ]
}

fn small_shifts() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-0.04..0.04f64, -0.04..0.04f64, -0.04..0.04f64), 1..50)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn convective_form_is_exactly_antisymmetric(
        shifts in small_shifts(),
        eta in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64), 1..50),
        which in 0..2usize,
    ) {
        let mesh = perturbed(&meshes()[which], &shifts);
        let space = FemSpace::new(&mesh).unwrap();
        let eta: Vec<Point> = (0..mesh.num_vertices())
            .map(|q| {
                let (a, b, c) = eta[q % eta.len()];
                Point::new(a, b, if mesh.ambient_dim() == 3 { c } else { 0.0 })
            })
            .collect();
        let a = space.antisym(&eta);
        for (i, j, v) in a.triplets() {
            prop_assert_eq!(v, -a.get(j, i));
        }
    }

    #[test]
    fn stiffness_kills_constants_and_mass_lumps_to_row_sums(shifts in small_shifts(), which in 0..2usize) {
        let mesh = perturbed(&meshes()[which], &shifts);
        let space = FemSpace::new(&mesh).unwrap();
        let a = space.stiffness();
        let scale = a.max_abs();
        for s in a.row_sums() {
            prop_assert!(s.abs() <= 1e-12 * scale);
        }
        let lumped = space.lumped_masses();
        for (s, l) in space.mass().row_sums().iter().zip(&lumped) {
            prop_assert!((s - l).abs() <= 1e-13 * l.abs().max(1e-300));
        }
        let total: f64 = lumped.iter().sum();
        prop_assert!((total - mesh.total_measure().unwrap()).abs() <= 1e-13 * total);
    }

    #[test]
    fn triplet_order_does_not_change_the_matrix(
        entries in prop::collection::vec((0..6usize, 0..6usize, -5.0..5.0f64), 1..60),
        seed in any::<u64>(),
    ) {
        let a = SparseMatrix::from_triplets(6, 6, entries.clone());
        let mut shuffled = entries;
        let mut s = seed | 1;
        for i in (1..shuffled.len()).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            shuffled.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let b = SparseMatrix::from_triplets(6, 6, shuffled);
        prop_assert_eq!(a.nnz(), b.nnz());
        for (i, j, v) in a.triplets() {
            prop_assert!((v - b.get(i, j)).abs() <= 1e-12);
        }
    }

    #[test]
    fn manifold_distance_is_symmetric_and_vanishes_on_itself(
        r in 0.5..2.0f64,
        dx in -0.5..0.5f64,
        n in 5..40usize,
    ) {
        let poly = |c: f64, rad: f64| -> Vec<Point> {
            (0..n)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    Point::new(c + rad * t.cos(), rad * t.sin(), 0.0)
                })
                .collect()
        };
        let a = poly(0.0, 1.0);
        let b = poly(dx, r);
        let ab = manifold_distance(&a, &b, 512).value;
        let ba = manifold_distance(&b, &a, 512).value;
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
        prop_assert_eq!(manifold_distance(&a, &a, 512).value, 0.0);
    }

    #[test]
    fn eoc_is_scale_invariant(
        e in prop::collection::vec(1e-8..1.0f64, 2..6),
        c in 1e-3..1e3f64,
    ) {
        let h: Vec<f64> = (0..e.len()).map(|i| 0.5f64.powi(i as i32)).collect();
        let scaled: Vec<f64> = e.iter().map(|x| c * x).collect();
        for (p, q) in eoc(&e, &h).iter().zip(eoc(&scaled, &h)) {
            prop_assert!((p - q).abs() <= 1e-9 * p.abs().max(1.0));
        }
    }
}
