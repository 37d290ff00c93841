//! Conventional network description: a DAG of layer specifications.
//!
//! Graphs are parsed from a JSON document (see `docs/graph-schema.md`),
//! validated, and shape-inferred once; after that they are immutable and
//! safe to share between threads.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io;
use crate::tensor::DenseTensor;

/// Layer kinds supported by both execution modes.
///
/// Kinds are classified LINEAR (they commute with differences, so they can
/// consume delta-based inputs directly) or NONLINEAR (they need value-based
/// inputs). `add` and `concat` are linear maps of their inputs; `affine` is
/// batch normalization folded to a per-channel scale and shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Input,
    Output,
    Conv2d,
    FullyConnected,
    AvgPool,
    MaxPool,
    Affine,
    Add,
    Concat,
    Relu,
}

impl LayerKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "input" => Self::Input,
            "output" => Self::Output,
            "conv2d" => Self::Conv2d,
            "fully_connected" => Self::FullyConnected,
            "avg_pool" => Self::AvgPool,
            "max_pool" => Self::MaxPool,
            "affine" => Self::Affine,
            "add" => Self::Add,
            "concat" => Self::Concat,
            "relu" => Self::Relu,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Input => "input",
            Self::Output => "output",
            Self::Conv2d => "conv2d",
            Self::FullyConnected => "fully_connected",
            Self::AvgPool => "avg_pool",
            Self::MaxPool => "max_pool",
            Self::Affine => "affine",
            Self::Add => "add",
            Self::Concat => "concat",
            Self::Relu => "relu",
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(
            self,
            Self::Conv2d
                | Self::FullyConnected
                | Self::AvgPool
                | Self::Affine
                | Self::Add
                | Self::Concat
        )
    }

    pub fn is_nonlinear(&self) -> bool {
        matches!(self, Self::Relu | Self::MaxPool)
    }

    /// Nonlinear kinds that act element-wise and can be recomputed at
    /// touched indices without a buffer.
    pub fn is_pointwise(&self) -> bool {
        matches!(self, Self::Relu)
    }
}

/// Kind-specific layer parameters with weights resolved to tensors.
#[derive(Debug, Clone)]
pub enum LayerParams {
    Input {
        shape: Vec<usize>,
    },
    Conv2d {
        /// `[c_out, c_in, k_h, k_w]`
        weight: DenseTensor,
        /// `[c_out]`
        bias: Option<DenseTensor>,
        stride: (usize, usize),
        padding: (usize, usize),
    },
    FullyConnected {
        /// `[m_out, n_in]`
        weight: DenseTensor,
        /// `[m_out]`
        bias: Option<DenseTensor>,
    },
    Pool {
        window: (usize, usize),
        stride: (usize, usize),
    },
    Affine {
        /// Per-channel scale `[c]`, applied along dimension 0.
        scale: DenseTensor,
        /// Per-channel shift `[c]`.
        shift: Option<DenseTensor>,
    },
    Concat {
        axis: usize,
    },
    None,
}

/// One layer of the network: identifier, kind, upstream ids, parameters.
#[derive(Debug, Clone)]
pub struct LayerSpec {
    pub id: String,
    pub kind: LayerKind,
    pub inputs: Vec<String>,
    pub params: LayerParams,
}

impl LayerSpec {
    pub fn input(id: &str, shape: &[usize]) -> Self {
        Self {
            id: id.into(),
            kind: LayerKind::Input,
            inputs: vec![],
            params: LayerParams::Input { shape: shape.to_vec() },
        }
    }

    pub fn output(id: &str, input: &str) -> Self {
        Self {
            id: id.into(),
            kind: LayerKind::Output,
            inputs: vec![input.into()],
            params: LayerParams::None,
        }
    }

    pub fn conv2d(
        id: &str,
        input: &str,
        weight: DenseTensor,
        bias: Option<DenseTensor>,
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Self {
        Self {
            id: id.into(),
            kind: LayerKind::Conv2d,
            inputs: vec![input.into()],
            params: LayerParams::Conv2d { weight, bias, stride, padding },
        }
    }

    pub fn fully_connected(
        id: &str,
        input: &str,
        weight: DenseTensor,
        bias: Option<DenseTensor>,
    ) -> Self {
        Self {
            id: id.into(),
            kind: LayerKind::FullyConnected,
            inputs: vec![input.into()],
            params: LayerParams::FullyConnected { weight, bias },
        }
    }

    pub fn relu(id: &str, input: &str) -> Self {
        Self {
            id: id.into(),
            kind: LayerKind::Relu,
            inputs: vec![input.into()],
            params: LayerParams::None,
        }
    }

    pub fn max_pool(id: &str, input: &str, window: (usize, usize), stride: (usize, usize)) -> Self {
        Self {
            id: id.into(),
            kind: LayerKind::MaxPool,
            inputs: vec![input.into()],
            params: LayerParams::Pool { window, stride },
        }
    }

    pub fn avg_pool(id: &str, input: &str, window: (usize, usize), stride: (usize, usize)) -> Self {
        Self {
            id: id.into(),
            kind: LayerKind::AvgPool,
            inputs: vec![input.into()],
            params: LayerParams::Pool { window, stride },
        }
    }

    pub fn affine(id: &str, input: &str, scale: DenseTensor, shift: Option<DenseTensor>) -> Self {
        Self {
            id: id.into(),
            kind: LayerKind::Affine,
            inputs: vec![input.into()],
            params: LayerParams::Affine { scale, shift },
        }
    }

    pub fn add(id: &str, inputs: &[&str]) -> Self {
        Self {
            id: id.into(),
            kind: LayerKind::Add,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            params: LayerParams::None,
        }
    }

    pub fn concat(id: &str, inputs: &[&str], axis: usize) -> Self {
        Self {
            id: id.into(),
            kind: LayerKind::Concat,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            params: LayerParams::Concat { axis },
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraphNode {
    pub spec: LayerSpec,
    /// Indices of upstream nodes, parallel to `spec.inputs`.
    pub inputs: Vec<usize>,
    /// Inferred output shape.
    pub output_shape: Vec<usize>,
}

/// Validated, shape-inferred DAG of layers with exactly one input and one
/// output node.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    nodes: Vec<GraphNode>,
    topo: Vec<usize>,
    input_node: usize,
    output_node: usize,
}

impl NetworkGraph {
    pub fn from_layers(layers: Vec<LayerSpec>) -> Result<Self> {
        let mut by_id: HashMap<String, usize> = HashMap::new();
        for (i, layer) in layers.iter().enumerate() {
            if by_id.insert(layer.id.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate layer id '{}'", layer.id)));
            }
        }

        let mut nodes = Vec::with_capacity(layers.len());
        for layer in layers {
            let mut inputs = Vec::with_capacity(layer.inputs.len());
            for input_id in &layer.inputs {
                let idx = *by_id.get(input_id).ok_or_else(|| {
                    Error::Graph(format!(
                        "layer '{}' references unknown input '{input_id}'",
                        layer.id
                    ))
                })?;
                inputs.push(idx);
            }
            nodes.push(GraphNode { spec: layer, inputs, output_shape: vec![] });
        }

        validate_arity(&nodes)?;
        let (input_node, output_node) = find_endpoints(&nodes)?;
        let topo = topo_sort(&nodes)?;
        let mut graph = Self { nodes, topo, input_node, output_node };
        graph.infer_shapes()?;
        Ok(graph)
    }

    /// Parse a JSON graph document; weight file paths resolve against
    /// `base_dir`.
    pub fn parse_document(text: &str, base_dir: &Path) -> Result<Self> {
        let doc: GraphDoc =
            serde_json::from_str(text).map_err(|e| Error::Schema(format!("bad document: {e}")))?;
        let mut tensors = HashMap::new();
        for (name, rel_path) in &doc.weights {
            let path = base_dir.join(rel_path);
            let tensor = io::read_tensor_file(&path)?;
            tensors.insert(name.clone(), tensor);
        }
        Self::from_document(doc, &tensors)
    }

    /// Build from a parsed document and preloaded weight tensors.
    pub fn from_document(doc: GraphDoc, tensors: &HashMap<String, DenseTensor>) -> Result<Self> {
        let mut layers = Vec::with_capacity(doc.layers.len());
        for layer_doc in doc.layers {
            layers.push(layer_from_doc(layer_doc, tensors)?);
        }
        Self::from_layers(layers)
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &GraphNode {
        &self.nodes[idx]
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn input_node(&self) -> usize {
        self.input_node
    }

    pub fn output_node(&self) -> usize {
        self.output_node
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.spec.id == id)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.nodes[self.input_node].output_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.nodes[self.output_node].output_shape
    }

    /// Exact multiply-accumulate count of one conventional forward pass.
    pub fn conventional_macs_per_frame(&self) -> u64 {
        self.nodes
            .iter()
            .map(|n| {
                let in_shapes: Vec<&[usize]> = n
                    .inputs
                    .iter()
                    .map(|&i| self.nodes[i].output_shape.as_slice())
                    .collect();
                crate::layers::mac_count(&n.spec.kind, &n.spec.params, &in_shapes, &n.output_shape)
            })
            .sum()
    }

    fn infer_shapes(&mut self) -> Result<()> {
        for &idx in &self.topo.clone() {
            let in_shapes: Vec<Vec<usize>> = self.nodes[idx]
                .inputs
                .iter()
                .map(|&i| self.nodes[i].output_shape.clone())
                .collect();
            let node = &self.nodes[idx];
            let shape = infer_output_shape(&node.spec, &in_shapes)?;
            self.nodes[idx].output_shape = shape;
        }
        Ok(())
    }
}

fn validate_arity(nodes: &[GraphNode]) -> Result<()> {
    for node in nodes {
        let n = node.inputs.len();
        let ok = match node.spec.kind {
            LayerKind::Input => n == 0,
            LayerKind::Add | LayerKind::Concat => n >= 2,
            _ => n == 1,
        };
        if !ok {
            return Err(Error::Graph(format!(
                "layer '{}' ({}) has {n} inputs",
                node.spec.id,
                node.spec.kind.name()
            )));
        }
    }
    Ok(())
}

fn find_endpoints(nodes: &[GraphNode]) -> Result<(usize, usize)> {
    let inputs: Vec<usize> = nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.spec.kind == LayerKind::Input)
        .map(|(i, _)| i)
        .collect();
    let outputs: Vec<usize> = nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.spec.kind == LayerKind::Output)
        .map(|(i, _)| i)
        .collect();
    if inputs.len() != 1 {
        return Err(Error::Graph(format!("expected exactly one input node, found {}", inputs.len())));
    }
    if outputs.len() != 1 {
        return Err(Error::Graph(format!(
            "expected exactly one output node, found {}",
            outputs.len()
        )));
    }
    Ok((inputs[0], outputs[0]))
}

fn topo_sort(nodes: &[GraphNode]) -> Result<Vec<usize>> {
    let mut indegree = vec![0usize; nodes.len()];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (i, node) in nodes.iter().enumerate() {
        indegree[i] = node.inputs.len();
        for &src in &node.inputs {
            consumers[src].push(i);
        }
    }
    let mut queue: VecDeque<usize> =
        (0..nodes.len()).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &c in &consumers[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                queue.push_back(c);
            }
        }
    }
    if order.len() != nodes.len() {
        return Err(Error::Graph("graph contains a cycle".into()));
    }
    Ok(order)
}

pub(crate) fn conv_out_extent(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Option<usize> {
    let padded = input + 2 * padding;
    if padded < kernel || stride == 0 {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

fn infer_output_shape(spec: &LayerSpec, in_shapes: &[Vec<usize>]) -> Result<Vec<usize>> {
    let shape_err = |msg: String| Err(Error::Shape(format!("layer '{}': {msg}", spec.id)));
    match (&spec.kind, &spec.params) {
        (LayerKind::Input, LayerParams::Input { shape }) => {
            if shape.is_empty() || shape.contains(&0) {
                return shape_err(format!("invalid input shape {shape:?}"));
            }
            Ok(shape.clone())
        }
        (LayerKind::Output, _) => Ok(in_shapes[0].clone()),
        (LayerKind::Relu, _) => Ok(in_shapes[0].clone()),
        (LayerKind::Conv2d, LayerParams::Conv2d { weight, bias, stride, padding }) => {
            let input = &in_shapes[0];
            if input.len() != 3 {
                return shape_err(format!("conv2d expects (C,H,W) input, got {input:?}"));
            }
            let w = weight.shape();
            if w.len() != 4 {
                return shape_err(format!("conv2d weight must be rank 4, got {w:?}"));
            }
            let (c_out, c_in, kh, kw) = (w[0], w[1], w[2], w[3]);
            if c_in != input[0] {
                return shape_err(format!(
                    "weight expects {c_in} input channels, input has {}",
                    input[0]
                ));
            }
            if let Some(b) = bias {
                if b.shape() != [c_out] {
                    return shape_err(format!("bias shape {:?} != [{c_out}]", b.shape()));
                }
            }
            let oh = conv_out_extent(input[1], kh, stride.0, padding.0);
            let ow = conv_out_extent(input[2], kw, stride.1, padding.1);
            match (oh, ow) {
                (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok(vec![c_out, oh, ow]),
                _ => shape_err(format!(
                    "kernel {kh}x{kw} stride {stride:?} padding {padding:?} yields empty output on {input:?}"
                )),
            }
        }
        (LayerKind::FullyConnected, LayerParams::FullyConnected { weight, bias }) => {
            let n: usize = in_shapes[0].iter().product();
            let w = weight.shape();
            if w.len() != 2 {
                return shape_err(format!("fully_connected weight must be rank 2, got {w:?}"));
            }
            if w[1] != n {
                return shape_err(format!("weight expects {} inputs, input has {n}", w[1]));
            }
            if let Some(b) = bias {
                if b.shape() != [w[0]] {
                    return shape_err(format!("bias shape {:?} != [{}]", b.shape(), w[0]));
                }
            }
            Ok(vec![w[0]])
        }
        (LayerKind::AvgPool | LayerKind::MaxPool, LayerParams::Pool { window, stride }) => {
            let input = &in_shapes[0];
            if input.len() != 3 {
                return shape_err(format!("pool expects (C,H,W) input, got {input:?}"));
            }
            let oh = conv_out_extent(input[1], window.0, stride.0, 0);
            let ow = conv_out_extent(input[2], window.1, stride.1, 0);
            match (oh, ow) {
                (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok(vec![input[0], oh, ow]),
                _ => shape_err(format!("window {window:?} stride {stride:?} too large for {input:?}")),
            }
        }
        (LayerKind::Affine, LayerParams::Affine { scale, shift }) => {
            let input = &in_shapes[0];
            if scale.shape() != [input[0]] {
                return shape_err(format!(
                    "scale shape {:?} != [{}] (per-channel along dim 0)",
                    scale.shape(),
                    input[0]
                ));
            }
            if let Some(s) = shift {
                if s.shape() != [input[0]] {
                    return shape_err(format!("shift shape {:?} != [{}]", s.shape(), input[0]));
                }
            }
            Ok(input.clone())
        }
        (LayerKind::Add, _) => {
            let first = &in_shapes[0];
            for s in &in_shapes[1..] {
                if s != first {
                    return shape_err(format!("add inputs disagree: {first:?} vs {s:?}"));
                }
            }
            Ok(first.clone())
        }
        (LayerKind::Concat, LayerParams::Concat { axis }) => {
            let first = &in_shapes[0];
            if *axis >= first.len() {
                return shape_err(format!("concat axis {axis} out of range for {first:?}"));
            }
            let mut out = first.clone();
            for s in &in_shapes[1..] {
                if s.len() != first.len() {
                    return shape_err(format!("concat rank mismatch: {first:?} vs {s:?}"));
                }
                for (d, (&a, &b)) in first.iter().zip(s.iter()).enumerate() {
                    if d != *axis && a != b {
                        return shape_err(format!("concat extent mismatch at dim {d}"));
                    }
                }
                out[*axis] += s[*axis];
            }
            Ok(out)
        }
        (kind, _) => Err(Error::Schema(format!(
            "layer '{}': params do not match kind {}",
            spec.id,
            kind.name()
        ))),
    }
}

// --- JSON document ---------------------------------------------------------

#[derive(Debug, Deserialize)]
pub struct GraphDoc {
    pub layers: Vec<LayerDoc>,
    #[serde(default)]
    pub weights: HashMap<String, String>,
}

#[derive(Debug, Deserialize)]
pub struct LayerDoc {
    pub id: String,
    pub kind: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub params: serde_json::Value,
}

fn layer_from_doc(doc: LayerDoc, tensors: &HashMap<String, DenseTensor>) -> Result<LayerSpec> {
    let kind = LayerKind::parse(&doc.kind)
        .ok_or_else(|| Error::Schema(format!("layer '{}': unknown kind '{}'", doc.id, doc.kind)))?;
    let p = &doc.params;
    let params = match kind {
        LayerKind::Input => LayerParams::Input { shape: usize_list(p, "shape", &doc.id)? },
        LayerKind::Conv2d => LayerParams::Conv2d {
            weight: tensor_ref(p, "weight", &doc.id, tensors)?,
            bias: opt_tensor_ref(p, "bias", &doc.id, tensors)?,
            stride: pair_or(p, "stride", (1, 1), &doc.id)?,
            padding: pair_or(p, "padding", (0, 0), &doc.id)?,
        },
        LayerKind::FullyConnected => LayerParams::FullyConnected {
            weight: tensor_ref(p, "weight", &doc.id, tensors)?,
            bias: opt_tensor_ref(p, "bias", &doc.id, tensors)?,
        },
        LayerKind::AvgPool | LayerKind::MaxPool => {
            let window = pair(p, "window", &doc.id)?;
            LayerParams::Pool { window, stride: pair_or(p, "stride", window, &doc.id)? }
        }
        LayerKind::Affine => LayerParams::Affine {
            scale: tensor_ref(p, "scale", &doc.id, tensors)?,
            shift: opt_tensor_ref(p, "shift", &doc.id, tensors)?,
        },
        LayerKind::Concat => {
            let axis = p
                .get("axis")
                .and_then(|v| v.as_u64())
                .ok_or_else(|| Error::Schema(format!("layer '{}': missing concat axis", doc.id)))?;
            LayerParams::Concat { axis: axis as usize }
        }
        LayerKind::Relu | LayerKind::Add | LayerKind::Output => LayerParams::None,
    };
    Ok(LayerSpec { id: doc.id, kind, inputs: doc.inputs, params })
}

fn usize_list(p: &serde_json::Value, key: &str, id: &str) -> Result<Vec<usize>> {
    p.get(key)
        .and_then(|v| v.as_array())
        .and_then(|arr| {
            arr.iter()
                .map(|v| v.as_u64().map(|u| u as usize))
                .collect::<Option<Vec<usize>>>()
        })
        .ok_or_else(|| Error::Schema(format!("layer '{id}': missing or invalid '{key}' list")))
}

fn pair(p: &serde_json::Value, key: &str, id: &str) -> Result<(usize, usize)> {
    let list = usize_list(p, key, id)?;
    if list.len() != 2 {
        return Err(Error::Schema(format!("layer '{id}': '{key}' must have 2 entries")));
    }
    Ok((list[0], list[1]))
}

fn pair_or(
    p: &serde_json::Value,
    key: &str,
    default: (usize, usize),
    id: &str,
) -> Result<(usize, usize)> {
    if p.get(key).is_none() {
        return Ok(default);
    }
    pair(p, key, id)
}

fn tensor_ref(
    p: &serde_json::Value,
    key: &str,
    id: &str,
    tensors: &HashMap<String, DenseTensor>,
) -> Result<DenseTensor> {
    let name = p
        .get(key)
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Schema(format!("layer '{id}': missing tensor reference '{key}'")))?;
    tensors
        .get(name)
        .cloned()
        .ok_or_else(|| Error::Schema(format!("layer '{id}': weight '{name}' not in weights map")))
}

fn opt_tensor_ref(
    p: &serde_json::Value,
    key: &str,
    id: &str,
    tensors: &HashMap<String, DenseTensor>,
) -> Result<Option<DenseTensor>> {
    if p.get(key).is_none() || p.get(key) == Some(&serde_json::Value::Null) {
        return Ok(None);
    }
    tensor_ref(p, key, id, tensors).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(shape: &[usize]) -> DenseTensor {
        DenseTensor::new(shape, 1.0).unwrap()
    }

    fn minimal_doc() -> String {
        r#"{
            "layers": [
                {"id": "in", "kind": "input", "params": {"shape": [1, 4, 4]}},
                {"id": "conv", "kind": "conv2d", "inputs": ["in"],
                 "params": {"weight": "w", "padding": [1, 1]}},
                {"id": "act", "kind": "relu", "inputs": ["conv"]},
                {"id": "out", "kind": "output", "inputs": ["act"]}
            ],
            "weights": {}
        }"#
        .to_string()
    }

    #[test]
    fn parse_minimal_conv_relu() {
        let doc: GraphDoc = serde_json::from_str(&minimal_doc()).unwrap();
        let mut tensors = HashMap::new();
        tensors.insert("w".to_string(), ones(&[2, 1, 3, 3]));
        let g = NetworkGraph::from_document(doc, &tensors).unwrap();
        assert_eq!(g.nodes().len(), 4);
        assert_eq!(g.node(g.node_index("conv").unwrap()).output_shape, vec![2, 4, 4]);
        assert_eq!(g.output_shape(), &[2, 4, 4]);
    }

    #[test]
    fn cycle_is_graph_error() {
        let layers = vec![
            LayerSpec::input("in", &[1, 2, 2]),
            LayerSpec::relu("a", "b"),
            LayerSpec::relu("b", "a"),
            LayerSpec::output("out", "a"),
        ];
        assert!(matches!(NetworkGraph::from_layers(layers), Err(Error::Graph(_))));
    }

    #[test]
    fn unknown_kind_is_schema_error() {
        let doc: GraphDoc = serde_json::from_str(
            r#"{"layers": [{"id": "x", "kind": "softmax"}], "weights": {}}"#,
        )
        .unwrap();
        assert!(matches!(
            NetworkGraph::from_document(doc, &HashMap::new()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn weight_shape_mismatch_is_shape_error() {
        let doc: GraphDoc = serde_json::from_str(&minimal_doc()).unwrap();
        let mut tensors = HashMap::new();
        // 3 input channels, but the graph input has 1
        tensors.insert("w".to_string(), ones(&[2, 3, 3, 3]));
        assert!(matches!(
            NetworkGraph::from_document(doc, &tensors),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn two_inputs_rejected() {
        let layers = vec![
            LayerSpec::input("in1", &[4]),
            LayerSpec::input("in2", &[4]),
            LayerSpec::add("sum", &["in1", "in2"]),
            LayerSpec::output("out", "sum"),
        ];
        assert!(matches!(NetworkGraph::from_layers(layers), Err(Error::Graph(_))));
    }

    #[test]
    fn skip_connection_shapes() {
        let layers = vec![
            LayerSpec::input("in", &[2, 4, 4]),
            LayerSpec::affine("bn", "in", ones(&[2]), None),
            LayerSpec::add("sum", &["in", "bn"]),
            LayerSpec::concat("cat", &["sum", "bn"], 0),
            LayerSpec::output("out", "cat"),
        ];
        let g = NetworkGraph::from_layers(layers).unwrap();
        assert_eq!(g.output_shape(), &[4, 4, 4]);
    }

    #[test]
    fn dangling_input_reference_is_graph_error() {
        let layers = vec![
            LayerSpec::input("in", &[4]),
            LayerSpec::relu("act", "missing"),
            LayerSpec::output("out", "act"),
        ];
        assert!(matches!(NetworkGraph::from_layers(layers), Err(Error::Graph(_))));
    }

    #[test]
    fn pool_shape_inference() {
        let layers = vec![
            LayerSpec::input("in", &[3, 8, 8]),
            LayerSpec::max_pool("pool", "in", (2, 2), (2, 2)),
            LayerSpec::output("out", "pool"),
        ];
        let g = NetworkGraph::from_layers(layers).unwrap();
        assert_eq!(g.node(g.node_index("pool").unwrap()).output_shape, vec![3, 4, 4]);
    }
}
