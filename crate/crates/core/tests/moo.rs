use proptest::prelude::*;
use skillmoo_core::moo::{
    crowding_distance, dominates, hypervolume_2d, nondominated_sort, nsga2_select, HvPoint, ObjectiveVector,
    ReferencePoint,
};

/// Values on a coarse grid so ties and duplicates show up often.
fn grid_vec() -> impl Strategy<Value = ObjectiveVector> {
    (0u32..6, 0u32..6).prop_map(|(p, c)| ObjectiveVector::new(f64::from(p) / 5.0, f64::from(c) * 0.4))
}

fn hv_point() -> impl Strategy<Value = HvPoint> {
    (0.0..1.0f64, 0.0..2.0f64).prop_map(|(p, c)| HvPoint::new(p, c))
}

/// Front index by repeatedly peeling the undominated remainder.
fn peel_fronts(points: &[ObjectiveVector]) -> Vec<usize> {
    let mut front = vec![usize::MAX; points.len()];
    let mut rank = 0;
    while front.contains(&usize::MAX) {
        let left: Vec<usize> = (0..points.len()).filter(|&i| front[i] == usize::MAX).collect();
        let layer: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| !left.iter().any(|&j| dominates(&points[j], &points[i])))
            .collect();
        for i in layer {
            front[i] = rank;
        }
        rank += 1;
    }
    front
}

proptest! {
    #[test]
    fn sort_matches_peeling(points in prop::collection::vec(grid_vec(), 0..14)) {
        prop_assert_eq!(nondominated_sort(&points).front, peel_fronts(&points));
    }

    #[test]
    fn fronts_are_mutually_nondominated(points in prop::collection::vec(grid_vec(), 1..14)) {
        for members in nondominated_sort(&points).fronts() {
            for &a in &members {
                for &b in &members {
                    prop_assert!(!dominates(&points[a], &points[b]));
                }
            }
        }
    }

    #[test]
    fn selection_is_nested(points in prop::collection::vec(grid_vec(), 1..11)) {
        let cands: Vec<(ObjectiveVector, u64)> = points.iter().copied().zip(0u64..).collect();
        for k in 0..cands.len() {
            let small = nsga2_select(&cands, k);
            let big = nsga2_select(&cands, k + 1);
            prop_assert_eq!(&big[..k], &small[..]);
        }
    }

    #[test]
    fn crowding_boundaries_are_infinite(points in prop::collection::vec(grid_vec(), 1..10)) {
        let d = crowding_distance(&points);
        prop_assert_eq!(d.len(), points.len());
        prop_assert!(d.iter().all(|x| *x >= 0.0));
        prop_assert!(d.iter().filter(|x| x.is_infinite()).count() >= points.len().min(2));
    }

    #[test]
    fn cost_scaling_changes_nothing(points in prop::collection::vec(grid_vec(), 1..10), scale in 0.1..50.0f64) {
        let scaled: Vec<ObjectiveVector> = points.iter().map(|p| ObjectiveVector::new(p.pass_rate(), p.cost * scale)).collect();
        prop_assert_eq!(nondominated_sort(&points).front, nondominated_sort(&scaled).front);
        let a: Vec<(ObjectiveVector, u64)> = points.iter().copied().zip(0u64..).collect();
        let b: Vec<(ObjectiveVector, u64)> = scaled.iter().copied().zip(0u64..).collect();
        prop_assert_eq!(nsga2_select(&a, 3), nsga2_select(&b, 3));

        let hp: Vec<HvPoint> = points.iter().map(|p| HvPoint::new(p.pass_rate(), p.cost)).collect();
        let hs: Vec<HvPoint> = scaled.iter().map(|p| HvPoint::new(p.pass_rate(), p.cost)).collect();
        let r = ReferencePoint::default();
        let x = hypervolume_2d(&hp, r, 2.5).unwrap().value;
        let y = hypervolume_2d(&hs, r, 2.5 * scale).unwrap().value;
        prop_assert!((x - y).abs() < 1e-12);
    }

    #[test]
    fn hv_is_monotone_and_ignores_dominated(points in prop::collection::vec(hv_point(), 0..8), extra in hv_point()) {
        let r = ReferencePoint::default();
        let base = hypervolume_2d(&points, r, 2.0).unwrap().value;
        let mut more = points.clone();
        more.push(extra);
        let grown = hypervolume_2d(&more, r, 2.0).unwrap().value;
        prop_assert!(grown >= base - 1e-15);

        let dominated = points.iter().any(|p| p.pass >= extra.pass && p.cost <= extra.cost);
        if dominated {
            prop_assert!((grown - base).abs() < 1e-15);
        }
        prop_assert!((0.0..=1.0).contains(&grown));
    }
}
