use proptest::prelude::*;

use qpmseg::eval::{evaluate, EvalConfig, Mask, PredictedCell, PredictedInternal};
use qpmseg::features::shape_scores;
use qpmseg::phantom::{generate_phantom, PhantomParams};
use qpmseg::plausibility::discard_nested;
use qpmseg::segment::{binarize, connected_components, detect_candidates, BinaryMask};
use qpmseg::stats::image_stats;
use qpmseg::{PhaseImage, Region};

fn mask_strategy() -> impl Strategy<Value = BinaryMask> {
    (1usize..20, 1usize..20).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<bool>(), w * h).prop_map(move |d| BinaryMask::new(w, h, d))
    })
}

fn regions(mask: &BinaryMask, s: f64) -> Vec<Region> {
    connected_components(mask).into_iter().map(|c| Region::from_pixels(c, s).unwrap()).collect()
}

fn phase_strategy() -> impl Strategy<Value = PhaseImage> {
    (2usize..24, 2usize..24).prop_flat_map(|(w, h)| {
        prop::collection::vec(-1.0f64..2.0, w * h).prop_map(move |v| PhaseImage::new("p", w, h, v, 0.5, 528.0).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn region_invariants(mask in mask_strategy(), s in 0.05f64..3.0) {
        for r in regions(&mask, s) {
            let b = r.bbox();
            prop_assert!(r.area_px() <= b.width() * b.height());
            let c = r.centroid();
            prop_assert!(c.x >= b.x_min as f64 * s - 1e-9 && c.x <= b.x_max as f64 * s + 1e-9);
            prop_assert!(c.y >= b.y_min as f64 * s - 1e-9 && c.y <= b.y_max as f64 * s + 1e-9);
            let circle = r.enclosing_circle();
            for p in r.pixels() {
                prop_assert!(circle.contains(qpmseg::geometry::Point::new(p.x as f64 * s, p.y as f64 * s)));
            }
            for p in r.boundary() {
                prop_assert!(r.contains(*p));
            }
        }
    }

    #[test]
    fn shape_scores_in_unit_interval(mask in mask_strategy(), s in 0.05f64..3.0) {
        for r in regions(&mask, s) {
            if let Ok(sc) = shape_scores(&r) {
                for v in [sc.circularity, sc.roundness, sc.polygonality, sc.ellipticity] {
                    prop_assert!((0.0..=1.0).contains(&v), "{:?}", sc);
                }
            }
        }
    }

    #[test]
    fn scale_covariance(mask in mask_strategy(), k in 0.2f64..5.0) {
        for a in regions(&mask, 1.0) {
            let b = a.with_pixel_size(k);
            let rel = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs());
            prop_assert!(rel(a.diameter_um() * k, b.diameter_um()));
            prop_assert!(rel(a.area_um2() * k * k, b.area_um2()));
            if let (Ok(x), Ok(y)) = (shape_scores(&a), shape_scores(&b)) {
                prop_assert!(rel(x.circularity, y.circularity) && rel(x.roundness, y.roundness));
                prop_assert!(rel(x.polygonality, y.polygonality) && rel(x.ellipticity, y.ellipticity));
            }
        }
    }

    #[test]
    fn stats_ignore_pixel_order(img in phase_strategy(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut v = img.phase().to_vec();
        v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let shuffled = PhaseImage::new("p", img.width(), img.height(), v, 0.5, 528.0).unwrap();
        let (a, b) = (image_stats(&img, 0.01), image_stats(&shuffled, 0.01));
        prop_assert_eq!(a.phase_min, b.phase_min);
        prop_assert_eq!(a.phase_max, b.phase_max);
        prop_assert_eq!(a.background, b.background);
        prop_assert!((a.phase_mean - b.phase_mean).abs() <= 1e-12);
    }

    #[test]
    fn raising_the_threshold_shrinks_components(img in phase_strategy(), t in 0.0f64..1.0, dt in 0.0f64..1.0) {
        let low = binarize(&img, t);
        let high = binarize(&img, t + dt);
        prop_assert!(high.count() <= low.count());
        let low_components = connected_components(&low);
        for c in connected_components(&high) {
            prop_assert!(low_components.iter().any(|l| c.iter().all(|p| l.contains(p))));
        }
    }

    #[test]
    fn discard_nested_is_idempotent(img in phase_strategy(), t in 0.0f64..1.0) {
        let rs: Vec<Region> = detect_candidates(&img, t).unwrap().into_iter().map(|c| c.region).collect();
        let once = discard_nested(rs);
        let twice = discard_nested(once.clone());
        prop_assert_eq!(once, twice);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ground_truth_evaluates_to_zero(seed in any::<u64>()) {
        let scene = generate_phantom(&PhantomParams::default(), seed).unwrap();
        let t = &scene.truth;
        let predicted: Vec<PredictedCell> = t
            .cells
            .iter()
            .map(|c| {
                let mut structures: Vec<Mask> = c.blobs.iter().map(|b| Mask::from_runs(&b.mask)).collect();
                let nucleus = c.nucleus.as_ref().map(|n| Mask::from_runs(&n.mask));
                structures.extend(nucleus.clone());
                PredictedCell { mask: Mask::from_runs(&c.body.mask), internal: Some(PredictedInternal { structures, nucleus }) }
            })
            .collect();
        let r = evaluate(t, &t.image_id, &predicted, &EvalConfig::default()).unwrap();
        prop_assert!(r.classes.iter().all(|c| c.count == 0));
    }

    #[test]
    fn phantom_regeneration_is_identical(seed in any::<u64>()) {
        let p = PhantomParams::default();
        prop_assert_eq!(generate_phantom(&p, seed).unwrap(), generate_phantom(&p, seed).unwrap());
    }
}
