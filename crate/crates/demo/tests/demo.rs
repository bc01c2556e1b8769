use aquaseg_demo::{fusion_geometry, ToyScene, CATEGORIES, GEO_SIDE, IMAGE_SIDE};

#[test]
fn fusion_geometry_reproduces_the_worked_example() {
    // Unit vector [0.8, 0.6] fused with [1, 0] at w_max = tau = 0.5.
    let text_deg = 0.6f64.atan2(0.8).to_degrees();
    let out = fusion_geometry(text_deg, 0.0, 0.5, 0.5).unwrap();
    assert!((out[0] - 0.8).abs() < 1e-12);
    assert_eq!(out[1], 0.5);
    assert!((out[2] - 0.9079).abs() < 1e-4);
    assert!((out[3] - 0.4190).abs() < 1e-4);
    assert!(out[4] < text_deg && out[4] > 0.0);
}

#[test]
fn closed_gate_leaves_the_category_vector() {
    let out = fusion_geometry(80.0, 0.0, 0.5, 0.5).unwrap();
    assert_eq!(out[1], 0.0);
    assert!((out[4] - 80.0).abs() < 1e-9);
}

#[test]
fn attention_rows_are_distributions_or_fallbacks() {
    let scene = ToyScene::new(0, 0.9);
    for beta in [0.8, 1.2, 2.0] {
        let mask = scene.fallback_mask(beta, 3.0).unwrap();
        assert_eq!(mask.len(), GEO_SIDE * GEO_SIDE);
        for q in [0, 17, 70, 143] {
            let row = scene.attention_row(q, beta, 3.0).unwrap();
            if mask[q] == 1 {
                assert_eq!(row[q], 1.0);
                assert_eq!(row.iter().sum::<f64>(), 1.0);
            } else {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
    let fallbacks = |beta| scene.fallback_mask(beta, 3.0).unwrap().iter().filter(|&&m| m == 1).count();
    assert_eq!(fallbacks(0.8), 0);
    assert!(fallbacks(2.0) > fallbacks(1.2));
    assert!(scene.attention_row(GEO_SIDE * GEO_SIDE, 1.2, 3.0).is_err());
}

#[test]
fn toy_segmentation() {
    let scene = ToyScene::new(0, 1.2);
    let gt = scene.ground_truth();
    assert_eq!(gt.len(), IMAGE_SIDE * IMAGE_SIDE);
    for c in 0..CATEGORIES.len() as u16 {
        assert!(gt.contains(&c));
    }
    let with = scene.segment(1.2, 3.0, 0.5, 0.5, true, true).unwrap();
    let without = scene.segment(1.2, 3.0, 0.5, 0.5, false, true).unwrap();
    assert_eq!(with.labels().len(), gt.len());
    assert!((0.0..=1.0).contains(&with.miou()));
    assert!(with.miou() > without.miou());
    let again = scene.segment(1.2, 3.0, 0.5, 0.5, true, true).unwrap();
    assert_eq!(again.labels(), with.labels());
    let closed = scene.segment(1.2, 3.0, 0.5, 1.0, true, true).unwrap();
    let off = scene.segment(1.2, 3.0, 0.5, 0.5, true, false).unwrap();
    assert_eq!(closed.labels(), off.labels());
}

#[test]
fn bad_parameters_are_rejected() {
    let scene = ToyScene::new(0, 0.9);
    assert!(scene.fallback_mask(1.0, 0.0).is_err());
    assert!(fusion_geometry(0.0, 0.0, 0.5, 2.0).is_err());
}
