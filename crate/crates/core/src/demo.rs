//! The pinned demo network and benchmark scenes.
//!
//! A fixed small CNN (conv-relu x2, max-pool, conv-relu, fully-connected)
//! with seeded random weights, plus the two scene specifications used by the
//! benchmark suite. Everything here is deterministic so that reported
//! numbers are reproducible; `write_demo_assets` emits the same network as
//! config + weight files.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::Result;
use crate::graph::{LayerSpec, NetworkGraph};
use crate::io;
use crate::scene::{Background, SceneSpec, SpriteShape, SpriteSpec};
use crate::tensor::DenseTensor;

pub const DEMO_SEED: u64 = 7;
pub const DEMO_INPUT: (usize, usize) = (16, 16);

fn uniform_tensor(rng: &mut ChaCha8Rng, shape: &[usize], amplitude: f32) -> DenseTensor {
    shifted_tensor(rng, shape, amplitude, 0.0)
}

fn shifted_tensor(rng: &mut ChaCha8Rng, shape: &[usize], amplitude: f32, mean: f32) -> DenseTensor {
    let numel: usize = shape.iter().product();
    let values =
        (0..numel).map(|_| mean + rng.random_range(-amplitude..=amplitude)).collect();
    DenseTensor::from_vec(shape, values).expect("valid demo tensor")
}

/// Seeded weight set of the demo network, in insertion order
/// (name, tensor).
pub fn demo_weights(seed: u64) -> Vec<(String, DenseTensor)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = DEMO_INPUT;
    let fc_in = 8 * (h / 2) * (w / 2);
    // amplitudes scale with 1/sqrt(fan_in); the deeper convolutions are
    // damped so activation changes shrink with depth, the way trained
    // features persist longer than pixels. A small positive weight mean
    // keeps each layer's DC gain near one, so uniform intensity shifts
    // survive to the output.
    vec![
        ("conv1_w".into(), shifted_tensor(&mut rng, &[4, 1, 3, 3], (3.0f32 / 9.0).sqrt(), 0.1)),
        ("conv1_b".into(), uniform_tensor(&mut rng, &[4], 0.05)),
        ("conv2_w".into(), shifted_tensor(&mut rng, &[4, 4, 3, 3], (0.5f32 / 36.0).sqrt(), 0.014)),
        ("conv2_b".into(), uniform_tensor(&mut rng, &[4], 0.05)),
        ("conv3_w".into(), shifted_tensor(&mut rng, &[8, 4, 3, 3], (0.5f32 / 36.0).sqrt(), 0.014)),
        ("conv3_b".into(), uniform_tensor(&mut rng, &[8], 0.05)),
        (
            "fc_w".into(),
            shifted_tensor(&mut rng, &[10, fc_in], (3.0f32 / fc_in as f32).sqrt(), 0.002),
        ),
        ("fc_b".into(), uniform_tensor(&mut rng, &[10], 0.05)),
    ]
}

/// The demo CNN with the given weight seed.
pub fn demo_graph_with_seed(seed: u64) -> NetworkGraph {
    let weights: HashMap<String, DenseTensor> = demo_weights(seed).into_iter().collect();
    let (h, w) = DEMO_INPUT;
    let get = |name: &str| weights[name].clone();
    NetworkGraph::from_layers(vec![
        LayerSpec::input("in", &[1, h, w]),
        LayerSpec::conv2d("conv1", "in", get("conv1_w"), Some(get("conv1_b")), (1, 1), (1, 1)),
        LayerSpec::relu("relu1", "conv1"),
        LayerSpec::conv2d("conv2", "relu1", get("conv2_w"), Some(get("conv2_b")), (1, 1), (1, 1)),
        LayerSpec::relu("relu2", "conv2"),
        LayerSpec::max_pool("pool", "relu2", (2, 2), (2, 2)),
        LayerSpec::conv2d("conv3", "pool", get("conv3_w"), Some(get("conv3_b")), (1, 1), (1, 1)),
        LayerSpec::relu("relu3", "conv3"),
        LayerSpec::fully_connected("fc", "relu3", get("fc_w"), Some(get("fc_b"))),
        LayerSpec::output("out", "fc"),
    ])
    .expect("demo graph is valid")
}

pub fn demo_graph() -> NetworkGraph {
    demo_graph_with_seed(DEMO_SEED)
}

/// The pinned 40-frame moving-sprite benchmark scene.
pub fn demo_scene() -> SceneSpec {
    SceneSpec {
        width: DEMO_INPUT.1,
        height: DEMO_INPUT.0,
        frames: 40,
        background: Background::Constant { level: 0.1 },
        sprite: Some(SpriteSpec {
            shape: SpriteShape::Square,
            size: 5,
            value: 0.9,
            position: (2, 2),
            velocity: (1, 1),
        }),
        drift: 0.0,
        pan: (0, 0),
        noise: 0.0,
    }
}

/// Drift-plus-sprite scene for the memory-ablation benchmark: the global
/// intensity climbs slowly under the firing threshold while a sprite moves.
pub fn drift_scene() -> SceneSpec {
    SceneSpec {
        width: DEMO_INPUT.1,
        height: DEMO_INPUT.0,
        frames: 40,
        background: Background::Constant { level: 0.2 },
        sprite: Some(SpriteSpec {
            shape: SpriteShape::Square,
            size: 4,
            value: 0.85,
            position: (3, 3),
            velocity: (1, 0),
        }),
        drift: 0.02,
        pan: (0, 0),
        noise: 0.001,
    }
}

/// Graph document (JSON) that reproduces the demo network when parsed with
/// the weight files written by `write_demo_assets`.
pub fn demo_graph_document() -> serde_json::Value {
    let weight_names: Vec<String> = demo_weights(DEMO_SEED).into_iter().map(|(n, _)| n).collect();
    let weights: serde_json::Map<String, serde_json::Value> = weight_names
        .iter()
        .map(|n| (n.clone(), json!(format!("weights/{n}.evts"))))
        .collect();
    let (h, w) = DEMO_INPUT;
    json!({
        "layers": [
            {"id": "in", "kind": "input", "inputs": [], "params": {"shape": [1, h, w]}},
            {"id": "conv1", "kind": "conv2d", "inputs": ["in"],
             "params": {"weight": "conv1_w", "bias": "conv1_b", "stride": [1, 1], "padding": [1, 1]}},
            {"id": "relu1", "kind": "relu", "inputs": ["conv1"], "params": {}},
            {"id": "conv2", "kind": "conv2d", "inputs": ["relu1"],
             "params": {"weight": "conv2_w", "bias": "conv2_b", "stride": [1, 1], "padding": [1, 1]}},
            {"id": "relu2", "kind": "relu", "inputs": ["conv2"], "params": {}},
            {"id": "pool", "kind": "max_pool", "inputs": ["relu2"],
             "params": {"window": [2, 2], "stride": [2, 2]}},
            {"id": "conv3", "kind": "conv2d", "inputs": ["pool"],
             "params": {"weight": "conv3_w", "bias": "conv3_b", "stride": [1, 1], "padding": [1, 1]}},
            {"id": "relu3", "kind": "relu", "inputs": ["conv3"], "params": {}},
            {"id": "fc", "kind": "fully_connected", "inputs": ["relu3"],
             "params": {"weight": "fc_w", "bias": "fc_b"}},
            {"id": "out", "kind": "output", "inputs": ["fc"], "params": {}}
        ],
        "weights": weights,
    })
}

/// Write the demo network config, its weight files, and the benchmark scene
/// specs under `dir`.
pub fn write_demo_assets(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("weights"))?;
    for (name, tensor) in demo_weights(DEMO_SEED) {
        io::write_tensor_file(dir.join("weights").join(format!("{name}.evts")), &tensor)?;
    }
    fs::write(
        dir.join("demo_net.json"),
        format!("{}\n", serde_json::to_string_pretty(&demo_graph_document())?),
    )?;
    fs::write(
        dir.join("scene_moving.json"),
        format!("{}\n", serde_json::to_string_pretty(&serde_json::to_value(demo_scene())?)?),
    )?;
    fs::write(
        dir.join("scene_drift.json"),
        format!("{}\n", serde_json::to_string_pretty(&serde_json::to_value(drift_scene())?)?),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers;

    #[test]
    fn demo_graph_shapes_and_macs() {
        let g = demo_graph();
        assert_eq!(g.input_shape(), &[1, 16, 16]);
        assert_eq!(g.output_shape(), &[10]);
        // hand count: conv1 16*16*4*9, conv2 16*16*4*36, conv3 8*8*8*36,
        // fc 512*10
        let expect = 16 * 16 * 4 * 9 + 16 * 16 * 4 * 36 + 8 * 8 * 8 * 36 + 512 * 10;
        assert_eq!(g.conventional_macs_per_frame(), expect as u64);
    }

    #[test]
    fn demo_weights_are_seed_stable() {
        let a = demo_weights(DEMO_SEED);
        let b = demo_weights(DEMO_SEED);
        assert_eq!(a, b);
        let c = demo_weights(DEMO_SEED + 1);
        assert_ne!(a, c);
    }

    #[test]
    fn demo_activations_stay_moderate() {
        // sanity for threshold choices: a mid-gray frame keeps activations
        // within a few units everywhere
        let g = demo_graph();
        let frame = DenseTensor::new(&[1, 16, 16], 0.5).unwrap();
        let mut values: Vec<Option<DenseTensor>> = vec![None; g.nodes().len()];
        for &i in g.topo_order() {
            let node = g.node(i);
            let v = if node.inputs.is_empty() {
                frame.clone()
            } else {
                let inputs: Vec<&DenseTensor> =
                    node.inputs.iter().map(|&j| values[j].as_ref().unwrap()).collect();
                layers::dense_forward(&node.spec, &inputs).unwrap().0
            };
            values[i] = Some(v);
        }
        for v in values.iter().flatten() {
            assert!(v.max_abs() < 16.0);
        }
    }

    #[test]
    fn assets_round_trip_through_the_parser() {
        let dir = tempfile::tempdir().unwrap();
        write_demo_assets(dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("demo_net.json")).unwrap();
        let parsed = NetworkGraph::parse_document(&text, dir.path()).unwrap();
        let built = demo_graph();
        assert_eq!(parsed.conventional_macs_per_frame(), built.conventional_macs_per_frame());
        // weights survive bit-exactly
        let idx = parsed.node_index("conv1").unwrap();
        let built_idx = built.node_index("conv1").unwrap();
        match (&parsed.node(idx).spec.params, &built.node(built_idx).spec.params) {
            (
                crate::graph::LayerParams::Conv2d { weight: a, .. },
                crate::graph::LayerParams::Conv2d { weight: b, .. },
            ) => assert_eq!(a, b),
            _ => panic!("expected conv params"),
        }
    }
}
