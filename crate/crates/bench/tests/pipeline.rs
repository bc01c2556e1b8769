mod common;

use aquaseg_bench::report::report_to_json;
use aquaseg_bench::runner::prediction_path;
use aquaseg_bench::{BenchError, Pipeline, RunConfig, EXIT_DATA};
use aquaseg_core::gmg::{correct_features, interpolate_features, AttentionMap};
use aquaseg_core::mask_classifier::{mask_logits, upsample_argmax};
use aquaseg_core::tensor_store::npy;
use aquaseg_core::{FeatureGrid, LabelMap};
use common::*;

fn evaluate(cfg: RunConfig) -> aquaseg_core::metrics::MetricsReport {
    Pipeline::new(cfg).unwrap().evaluate().unwrap()
}

#[test]
fn every_pinned_configuration_matches_the_oracle() {
    let manifest = fixture_manifest();
    for name in ["default", "no_gmg", "no_csa", "plain", "stage1"] {
        let report = evaluate(pinned_config(name, &manifest));
        let diff = max_report_diff(&report_to_json(&report), &pinned_report(name));
        assert!(diff <= 1e-9, "{name}: max deviation {diff:e}");
    }
}

#[test]
fn worker_count_does_not_change_the_report() {
    let manifest = fixture_manifest();
    let one = evaluate(RunConfig {
        workers: 1,
        ..pinned_config("default", &manifest)
    });
    for workers in [2, 3, 4, 8] {
        let many = evaluate(RunConfig {
            workers,
            ..pinned_config("default", &manifest)
        });
        assert_eq!(many, one, "workers={workers}");
    }
}

#[test]
fn disabling_csa_equals_a_closed_gate() {
    let manifest = fixture_manifest();
    let off = evaluate(RunConfig {
        enable_csa: false,
        ..pinned_config("default", &manifest)
    });
    let mut closed = pinned_config("default", &manifest);
    closed.fusion.tau = 1.0;
    assert_eq!(evaluate(closed), off);
    // The fixture's gates do open at the default tau, so the check is not vacuous.
    assert_ne!(evaluate(pinned_config("default", &manifest)), off);
}

#[test]
fn disabling_gmg_equals_identity_attention() {
    let manifest = fixture_manifest();
    let pipeline = Pipeline::new(RunConfig {
        enable_gmg: false,
        ..pinned_config("default", &manifest)
    })
    .unwrap();
    for sample in &pipeline.manifest().samples {
        let (labels, trace) = pipeline.predict(sample).unwrap();
        assert_eq!(trace.fallback_rows, 0);

        let v = FeatureGrid::load(&sample.clip_features_path).unwrap();
        let geo = FeatureGrid::load(sample.geo_features_path(3)).unwrap();
        let resized = interpolate_features(&v, geo.height(), geo.width());
        let identity = AttentionMap::identity(resized.positions());
        let corrected = correct_features(&identity, &resized).unwrap();
        // Text embeddings with this sample's fusion applied, via a CSA-only run.
        let text = if trace.fused {
            let r = aquaseg_core::EmbeddingMatrix::load(sample.reasoning_embedding_path.as_ref().unwrap()).unwrap();
            aquaseg_core::csa::fuse(pipeline.text_embeddings(), r.row(0), &pipeline.config().fusion).unwrap()
        } else {
            pipeline.text_embeddings().clone()
        };
        let expected = upsample_argmax(
            &mask_logits(&text, &corrected).unwrap(),
            sample.image_height,
            sample.image_width,
        );
        assert_eq!(labels, expected, "{}", sample.sample_id);
    }
}

#[test]
fn corrupt_sample_aborts_and_is_named() {
    let (dir, manifest) = fixture_copy();
    let clip = dir.path().join("dive02/clip.npy");
    let mut bytes = std::fs::read(&clip).unwrap();
    bytes.truncate(bytes.len() - 7);
    std::fs::write(&clip, bytes).unwrap();

    let err = Pipeline::new(pinned_config("default", &manifest))
        .unwrap()
        .evaluate()
        .unwrap_err();
    match &err {
        BenchError::Sample { sample_id, .. } => assert_eq!(sample_id, "dive02"),
        other => panic!("unexpected error {other:?}"),
    }
    assert_eq!(err.exit_code(), EXIT_DATA);
    assert!(err.to_string().contains("dive02"));
}

#[test]
fn non_finite_features_abort() {
    let (dir, manifest) = fixture_copy();
    let geo = dir.path().join("dive01/geo_stage3.npy");
    let mut arr = npy::read_file(&geo).unwrap();
    if let npy::NpyData::F32(values) = &mut arr.data {
        values[5] = f32::NAN;
    }
    npy::write_file(&geo, &arr).unwrap();
    let err = Pipeline::new(pinned_config("default", &manifest))
        .unwrap()
        .evaluate()
        .unwrap_err();
    assert!(matches!(
        err,
        BenchError::Sample { ref sample_id, source: aquaseg_core::Error::NonFiniteValue { index: 5, .. } } if sample_id == "dive01"
    ));
}

#[test]
fn missing_reasoning_record_falls_back_to_templates() {
    let (dir, manifest) = fixture_copy();
    std::fs::remove_file(dir.path().join("dive00/reasoning.json")).unwrap();
    let damaged = Pipeline::new(pinned_config("default", &manifest)).unwrap();
    let intact = Pipeline::new(pinned_config("default", &fixture_manifest())).unwrap();
    let no_csa = Pipeline::new(RunConfig {
        enable_csa: false,
        ..pinned_config("default", &fixture_manifest())
    })
    .unwrap();

    let sample = &damaged.manifest().samples[0];
    let (labels, trace) = damaged.predict(sample).unwrap();
    assert!(!trace.fused);
    assert_eq!(labels, no_csa.predict(&no_csa.manifest().samples[0]).unwrap().0);
    assert!(intact.predict(&intact.manifest().samples[0]).unwrap().1.fused);

    std::fs::write(dir.path().join("dive00/reasoning.json"), "{not json").unwrap();
    let (_, trace) = damaged.predict(sample).unwrap();
    assert!(!trace.fused);
}

#[test]
fn plain_bank_is_required_without_templates() {
    let (dir, manifest) = fixture_copy();
    let text = std::fs::read_to_string(&manifest).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    json.as_object_mut().unwrap().remove("plain_embeddings");
    std::fs::write(&manifest, json.to_string()).unwrap();
    let cfg = RunConfig {
        enable_templates: false,
        ..pinned_config("default", &manifest)
    };
    let err = Pipeline::new(cfg).err().unwrap();
    assert_eq!(err.exit_code(), EXIT_DATA);
    drop(dir);
}

#[test]
fn dumped_predictions_are_uint16_label_maps() {
    let out = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        dump_predictions: true,
        output_dir: out.path().to_path_buf(),
        workers: 3,
        ..pinned_config("default", &fixture_manifest())
    };
    let pipeline = Pipeline::new(cfg).unwrap();
    pipeline.evaluate().unwrap();
    for sample in &pipeline.manifest().samples {
        let path = prediction_path(out.path(), &sample.sample_id);
        let header = npy::read_header_only(&path).unwrap();
        assert_eq!(header.dtype, npy::Dtype::U16);
        assert_eq!(header.shape, [sample.image_height, sample.image_width]);
        let dumped = LabelMap::load(&path).unwrap();
        assert_eq!(dumped, pipeline.predict(sample).unwrap().0);
    }
}

#[test]
fn other_geometric_stages_load_through_the_placeholder() {
    let manifest = fixture_manifest();
    for stage in 0..4 {
        let mut cfg = pinned_config("default", &manifest);
        cfg.gmg.geo_stage = stage;
        let report = evaluate(cfg);
        assert_eq!(report.sample_count, 5);
    }
}
