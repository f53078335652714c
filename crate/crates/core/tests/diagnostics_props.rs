//! Cutoff partitions and overlap bounds for arbitrary states.

use std::sync::Arc;

use confined_qdyn::diagnostics::{cutoff_mass, evolution_overlap};
use confined_qdyn::geometry::{make_curve, CurveKind};
use confined_qdyn::operators::{CurveFrame, Grid2D, Region};
use confined_qdyn::propagation::WaveFunction;
use num_complex::Complex64;
use proptest::prelude::*;

fn state(grid: &Arc<Grid2D>, parts: &[(f64, f64)]) -> WaveFunction {
    let values = (0..grid.len())
        .map(|k| {
            let (re, im) = parts[k % parts.len()];
            Complex64::new(re, im) * (1.0 + (k as f64 * 0.37).sin())
        })
        .collect();
    WaveFunction::new(grid.clone(), values).unwrap()
}

fn parts() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn complementary_cutoffs_partition_the_norm(p in parts(), eps in 0.05f64..0.6, s_exp in 0.1f64..0.9) {
        let curve = make_curve(CurveKind::Circle, &[1.0], 512).unwrap();
        let bx = Arc::new(Grid2D::cartesian_box(2.0, 40).unwrap());
        let frame = CurveFrame::compute(&bx, &curve);
        let psi = state(&bx, &p);
        let total = psi.norm().powi(2);
        let m1 = cutoff_mass(&psi, Region::DistanceAtLeast(eps), Some(&frame)).unwrap();
        let m2 = cutoff_mass(&psi, Region::DistanceBelow(eps), Some(&frame)).unwrap();
        prop_assert!((m1 * m1 + m2 * m2 - total).abs() <= 1e-10 * total.max(1.0));
        prop_assert!(m1 <= psi.norm() * (1.0 + 1e-12));

        let nb = Arc::new(Grid2D::normal_bundle(curve.length(), 32, 8.0, 63).unwrap());
        let phi = state(&nb, &p);
        let total = phi.norm().powi(2);
        let core = Region::NormalCore { lambda: 4.0, s_exp };
        let m1 = cutoff_mass(&phi, core, None).unwrap();
        let m2 = cutoff_mass(&phi, core.complement().unwrap(), None).unwrap();
        prop_assert!((m1 * m1 + m2 * m2 - total).abs() <= 1e-10 * total.max(1.0));
    }

    #[test]
    fn overlap_obeys_cauchy_schwarz(a in parts(), b in parts()) {
        let bx = Arc::new(Grid2D::cartesian_box(1.0, 24).unwrap());
        let (pa, pb) = (state(&bx, &a), state(&bx, &b));
        let ov = evolution_overlap(&pa, &pb).unwrap();
        prop_assert!(ov.norm() <= pa.norm() * pb.norm() + 1e-12);
    }
}
