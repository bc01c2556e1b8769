//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The Rust API returns `Result<_, String>` and is tested natively. The
//! `#[wasm_bindgen]` wrappers only rename and convert errors for JavaScript.

use aquaseg_core::csa::{average_templates, fuse, FusionConfig};
use aquaseg_core::gmg::{geometric_attention, gmg_forward, interpolate_features, GmgConfig};
use aquaseg_core::mask_classifier::{mask_logits, upsample_argmax};
use aquaseg_core::metrics::{compute, ConfusionMatrix};
use aquaseg_core::tensor_store::TemplateEmbeddings;
use aquaseg_core::{CategoryRegistry, EmbeddingMatrix, FeatureGrid, LabelMap};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

pub const CATEGORIES: [&str; 3] = ["open water", "clownfish", "brain coral"];
pub const IMAGE_SIDE: usize = 24;
pub const GEO_SIDE: usize = 12;
pub const CLIP_SIDE: usize = 6;
const CLIP_CHANNELS: usize = 8;
const GEO_CHANNELS: usize = 4;
const TEMPLATES: usize = 4;

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn scene_label(y: f64, x: f64) -> u16 {
    let (fy, fx) = (y - 8.0, x - 10.0);
    if fy * fy / 16.0 + fx * fx / 36.0 <= 1.0 {
        1
    } else if y >= 17.0 + 2.0 * (x / 3.0).sin() {
        2
    } else {
        0
    }
}

/// Label at the centre of cell `(y, x)` of a `side x side` grid laid over
/// the image.
fn cell_label(side: usize, y: usize, x: usize) -> u16 {
    let scale = IMAGE_SIDE as f64 / side as f64;
    scene_label((y as f64 + 0.5) * scale, (x as f64 + 0.5) * scale)
}

fn err(e: aquaseg_core::Error) -> String {
    e.to_string()
}

fn js(e: String) -> JsValue {
    JsValue::from_str(&e)
}

/// A small synthetic underwater scene: a fish above a coral bed in open
/// water, with noisy patch features, clean geometric features and text
/// embeddings for three categories.
#[wasm_bindgen]
pub struct ToyScene {
    ground_truth: LabelMap,
    clip: FeatureGrid,
    geo: FeatureGrid,
    templates: TemplateEmbeddings,
    reasoning: Vec<f64>,
}

impl ToyScene {
    pub fn new(seed: u32, noise: f64) -> ToyScene {
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
        let protos: Vec<Vec<f64>> = (0..CATEGORIES.len())
            .map(|_| (0..CLIP_CHANNELS).map(|_| uniform(&mut rng)).collect())
            .collect();
        let ground_truth = LabelMap::new(
            IMAGE_SIDE,
            IMAGE_SIDE,
            (0..IMAGE_SIDE * IMAGE_SIDE)
                .map(|p| scene_label((p / IMAGE_SIDE) as f64 + 0.5, (p % IMAGE_SIDE) as f64 + 0.5))
                .collect(),
        )
        .unwrap();

        let mut clip = Vec::with_capacity(CLIP_SIDE * CLIP_SIDE * CLIP_CHANNELS);
        for y in 0..CLIP_SIDE {
            for x in 0..CLIP_SIDE {
                let label = cell_label(CLIP_SIDE, y, x) as usize;
                clip.extend(protos[label].iter().map(|v| v + noise * uniform(&mut rng)));
            }
        }
        // Open water is geometrically featureless: weak vectors whose rows
        // fall back to the identity once beta is large enough.
        let mut geo = Vec::with_capacity(GEO_SIDE * GEO_SIDE * GEO_CHANNELS);
        for y in 0..GEO_SIDE {
            for x in 0..GEO_SIDE {
                let label = cell_label(GEO_SIDE, y, x) as usize;
                let strength = if label == 0 { 0.35 } else { 1.0 };
                for c in 0..GEO_CHANNELS {
                    let hot = if c == label { 1.0 } else { 0.0 };
                    geo.push(strength * hot + 0.15 * uniform(&mut rng));
                }
            }
        }
        let mut templates = Vec::with_capacity(CATEGORIES.len() * TEMPLATES * CLIP_CHANNELS);
        for proto in &protos {
            for _ in 0..TEMPLATES {
                templates.extend(proto.iter().map(|v| v + 0.8 * uniform(&mut rng)));
            }
        }
        let reasoning = protos[1].iter().map(|v| v + 0.3 * uniform(&mut rng)).collect();
        ToyScene {
            ground_truth,
            clip: FeatureGrid::new(CLIP_SIDE, CLIP_SIDE, CLIP_CHANNELS, clip).unwrap(),
            geo: FeatureGrid::new(GEO_SIDE, GEO_SIDE, GEO_CHANNELS, geo).unwrap(),
            templates: TemplateEmbeddings::new(CATEGORIES.len(), TEMPLATES, CLIP_CHANNELS, templates).unwrap(),
            reasoning,
        }
    }

    pub fn ground_truth(&self) -> Vec<u16> {
        self.ground_truth.labels().to_vec()
    }

    /// Attention weights from geometric position `query` to every position
    /// of the 12x12 geometric grid.
    pub fn attention_row(&self, query: usize, beta: f64, gamma: f64) -> Result<Vec<f64>, String> {
        let cfg = gmg_config(beta, gamma)?;
        let a = geometric_attention(&self.geo, &cfg);
        if query >= a.n() {
            return Err("query position out of range".into());
        }
        Ok(a.row(query).to_vec())
    }

    /// 1 for every geometric position whose attention row fell back to the
    /// identity, 0 elsewhere.
    pub fn fallback_mask(&self, beta: f64, gamma: f64) -> Result<Vec<u8>, String> {
        let cfg = gmg_config(beta, gamma)?;
        let a = geometric_attention(&self.geo, &cfg);
        Ok((0..a.n()).map(|i| a.fallback_rows().contains(&i) as u8).collect())
    }

    /// Segments the scene and scores it against the ground truth.
    pub fn segment(
        &self,
        beta: f64,
        gamma: f64,
        w_max: f64,
        tau: f64,
        use_gmg: bool,
        use_csa: bool,
    ) -> Result<Segmentation, String> {
        let features = if use_gmg {
            gmg_forward(&self.clip, &self.geo, &gmg_config(beta, gamma)?).map_err(err)?
        } else {
            interpolate_features(&self.clip, GEO_SIDE, GEO_SIDE)
        };
        let mut text = average_templates(&self.templates).map_err(err)?;
        if use_csa {
            text = fuse(&text, &self.reasoning, &FusionConfig { w_max, tau }).map_err(err)?;
        }
        let logits = mask_logits(&text, &features).map_err(err)?;
        let labels = upsample_argmax(&logits, IMAGE_SIDE, IMAGE_SIDE);
        let mut cm = ConfusionMatrix::new(CATEGORIES.len());
        cm.accumulate(&labels, &self.ground_truth).map_err(err)?;
        let registry = CategoryRegistry::new(CATEGORIES.map(String::from).to_vec(), vec![]).map_err(err)?;
        let report = compute(&cm, &registry, 1).map_err(err)?;
        Ok(Segmentation {
            labels: labels.labels().to_vec(),
            miou: report.miou,
            aacc: report.aacc,
        })
    }
}

fn gmg_config(beta: f64, gamma: f64) -> Result<GmgConfig, String> {
    let cfg = GmgConfig {
        beta,
        gamma,
        ..GmgConfig::default()
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

#[wasm_bindgen]
pub struct Segmentation {
    labels: Vec<u16>,
    miou: f64,
    aacc: f64,
}

#[wasm_bindgen]
impl Segmentation {
    pub fn labels(&self) -> Vec<u16> {
        self.labels.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn miou(&self) -> f64 {
        self.miou
    }

    #[wasm_bindgen(getter)]
    pub fn aacc(&self) -> f64 {
        self.aacc
    }
}

/// Fuses a unit category vector at `text_deg` with a reasoning vector at
/// `reasoning_deg` in the plane.
///
/// Returns `[similarity, weight, fused_x, fused_y, fused_deg]`.
pub fn fusion_geometry(text_deg: f64, reasoning_deg: f64, w_max: f64, tau: f64) -> Result<Vec<f64>, String> {
    let (t, r) = (text_deg.to_radians(), reasoning_deg.to_radians());
    let text = EmbeddingMatrix::new(1, 2, vec![t.cos(), t.sin()]).map_err(err)?;
    let reasoning = [r.cos(), r.sin()];
    let cfg = FusionConfig { w_max, tau };
    let fused = fuse(&text, &reasoning, &cfg).map_err(err)?;
    let similarity = t.cos() * r.cos() + t.sin() * r.sin();
    let weight = aquaseg_core::csa::fusion_weights(&[similarity], &cfg)[0];
    let (x, y) = (fused.row(0)[0], fused.row(0)[1]);
    Ok(vec![similarity, weight, x, y, y.atan2(x).to_degrees()])
}

#[wasm_bindgen]
impl ToyScene {
    #[wasm_bindgen(constructor)]
    pub fn js_new(seed: u32, noise: f64) -> ToyScene {
        ToyScene::new(seed, noise)
    }

    #[wasm_bindgen(getter, js_name = geoSide)]
    pub fn geo_side(&self) -> usize {
        GEO_SIDE
    }

    #[wasm_bindgen(getter, js_name = imageSide)]
    pub fn image_side(&self) -> usize {
        IMAGE_SIDE
    }

    #[wasm_bindgen(js_name = groundTruth)]
    pub fn js_ground_truth(&self) -> Vec<u16> {
        self.ground_truth()
    }

    #[wasm_bindgen(js_name = attentionRow)]
    pub fn js_attention_row(&self, query: usize, beta: f64, gamma: f64) -> Result<Vec<f64>, JsValue> {
        self.attention_row(query, beta, gamma).map_err(js)
    }

    #[wasm_bindgen(js_name = fallbackMask)]
    pub fn js_fallback_mask(&self, beta: f64, gamma: f64) -> Result<Vec<u8>, JsValue> {
        self.fallback_mask(beta, gamma).map_err(js)
    }

    #[wasm_bindgen(js_name = segment)]
    pub fn js_segment(
        &self,
        beta: f64,
        gamma: f64,
        w_max: f64,
        tau: f64,
        use_gmg: bool,
        use_csa: bool,
    ) -> Result<Segmentation, JsValue> {
        self.segment(beta, gamma, w_max, tau, use_gmg, use_csa).map_err(js)
    }
}

#[wasm_bindgen(js_name = fusionGeometry)]
pub fn js_fusion_geometry(text_deg: f64, reasoning_deg: f64, w_max: f64, tau: f64) -> Result<Vec<f64>, JsValue> {
    fusion_geometry(text_deg, reasoning_deg, w_max, tau).map_err(js)
}
