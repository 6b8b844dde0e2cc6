use proptest::prelude::*;

use oft_core::metrics::{ate, depth_metrics, flow_epe};
use oft_core::{DepthMap, FlowField};

fn depths(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.5f64..60.0, n)
}

proptest! {
    #[test]
    fn median_scaling_removes_any_scale(gt in depths(9), noise in prop::collection::vec(0.8f64..1.25, 9), s in 0.01f64..100.0) {
        let g = DepthMap::new(9, 1, gt.clone()).unwrap();
        let p = DepthMap::new(9, 1, gt.iter().zip(&noise).map(|(a, b)| a * b).collect()).unwrap();
        let ps = DepthMap::new(9, 1, p.data().iter().map(|v| v * s).collect()).unwrap();
        let a = depth_metrics(&p, &g, None, true, 80.0).unwrap().as_array();
        let b = depth_metrics(&ps, &g, None, true, 80.0).unwrap().as_array();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn depth_statistics_are_ordered(gt in depths(12), pred in depths(12)) {
        let m = depth_metrics(&DepthMap::new(12, 1, pred).unwrap(), &DepthMap::new(12, 1, gt).unwrap(), None, false, 80.0).unwrap();
        prop_assert!(m.abs_rel >= 0.0 && m.sq_rel >= 0.0 && m.rmse >= 0.0 && m.rmse_log >= 0.0);
        prop_assert!(m.a1 <= m.a2 && m.a2 <= m.a3 && m.a3 <= 1.0);
    }

    #[test]
    fn masked_pixels_do_not_matter(gt in depths(8), pred in depths(8), junk in depths(8)) {
        let mask: Vec<bool> = (0..8).map(|i| i % 3 != 0).collect();
        let mixed: Vec<f64> = (0..8).map(|i| if mask[i] { pred[i] } else { junk[i] }).collect();
        let g = DepthMap::new(8, 1, gt).unwrap();
        let a = depth_metrics(&DepthMap::new(8, 1, pred).unwrap(), &g, Some(&mask), false, 80.0).unwrap();
        let b = depth_metrics(&DepthMap::new(8, 1, mixed).unwrap(), &g, Some(&mask), false, 80.0).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn constant_flow_offset_gives_its_length(dx in -5.0f64..5.0, dy in -5.0f64..5.0) {
        let gt = FlowField::from_fn(5, 4, |x, y| [x as f64 * 0.3, 1.0 - y as f64]);
        let p = FlowField::from_fn(5, 4, |x, y| [x as f64 * 0.3 + dx, 1.0 - y as f64 + dy]);
        let m = flow_epe(&p, &gt, None, None).unwrap();
        prop_assert!((m.epe_all - dx.hypot(dy)).abs() < 1e-12);
        prop_assert_eq!(m.epe_all, m.epe_noc);
    }

    #[test]
    fn ate_ignores_scale_and_start(s in 0.1f64..10.0, o in prop::array::uniform3(-5.0f64..5.0)) {
        let gt: Vec<[f64; 3]> = (0..8).map(|i| [0.2 * i as f64, (0.3 * i as f64).sin(), i as f64]).collect();
        let pred: Vec<[f64; 3]> = gt.iter().map(|p| std::array::from_fn(|c| s * p[c] + o[c])).collect();
        let m = ate(&pred, &gt, 5).unwrap();
        prop_assert!(m.ate_mean < 1e-9 && m.ate_std < 1e-9);
    }
}
