//! Event-network construction: state-layer insertion, initialization, and
//! internal-consistency checking.
//!
//! Conversion is demand-driven. Every edge of the base graph carries either
//! delta-based or value-based signals; state layers are inserted exactly
//! where the representation must change:
//!
//! - a gate (value -> delta, applies the transmission policy) before every
//!   linear consumer of a value edge, and unconditionally after the input;
//! - an accumulator (delta -> value) before every nonlinear consumer of a
//!   delta edge, and unconditionally before the output;
//! - a buffer (stores raw input values) before every non-pointwise nonlinear
//!   layer (max pooling).
//!
//! Built this way, degenerate accumulator->gate chains never arise: two
//! linear layers in sequence exchange deltas directly.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::graph::{LayerKind, NetworkGraph};
use crate::layers;
use crate::policy::PolicyConfig;
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalDomain {
    Value,
    Delta,
}

#[derive(Debug, Clone)]
pub enum EventNodeKind {
    /// Emits the raw frame each step.
    Input,
    /// Terminal marker; consumes the output accumulator's values.
    Output,
    /// Holds state vectors `b` (best estimate) and `d` (accumulated
    /// untransmitted difference); converts values to deltas under a policy.
    Gate { policy: PolicyConfig, input_gate: bool },
    /// Holds state vector `a`; converts deltas back to values.
    Accumulator { output: bool },
    /// Holds raw input values `x` for window recomputation.
    Buffer,
    /// A layer of the base network, index into `base.nodes()`. Excluded
    /// layers stay conventional inside the event network: they recompute
    /// densely every frame from buffered full inputs and emit value-based
    /// outputs at every index.
    Compute { base: usize, excluded: bool },
}

impl EventNodeKind {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Input => "input",
            Self::Output => "output",
            Self::Gate { .. } => "gate",
            Self::Accumulator { .. } => "accumulator",
            Self::Buffer => "buffer",
            Self::Compute { .. } => "compute",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EventNode {
    pub name: String,
    pub kind: EventNodeKind,
    pub inputs: Vec<usize>,
    pub shape: Vec<usize>,
}

/// One base-graph edge and the state layers inserted (or reused) on it.
#[derive(Debug, Clone)]
pub struct Placement {
    pub from: String,
    pub to: String,
    pub inserted: Vec<String>,
}

/// The base network plus inserted state layers, in executable topological
/// order. Immutable after conversion and shareable across executors.
#[derive(Debug, Clone)]
pub struct EventGraph {
    base: NetworkGraph,
    nodes: Vec<EventNode>,
    placements: Vec<Placement>,
    input_node: usize,
    output_node: usize,
    output_accumulator: usize,
}

impl EventGraph {
    pub fn base(&self) -> &NetworkGraph {
        &self.base
    }

    pub fn nodes(&self) -> &[EventNode] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &EventNode {
        &self.nodes[idx]
    }

    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    pub fn input_node(&self) -> usize {
        self.input_node
    }

    pub fn output_node(&self) -> usize {
        self.output_node
    }

    pub fn output_accumulator(&self) -> usize {
        self.output_accumulator
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn node_names(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.name.clone()).collect()
    }

    /// Signal domain on the output edge of a node.
    pub fn domain_of(&self, idx: usize) -> SignalDomain {
        match &self.nodes[idx].kind {
            EventNodeKind::Input => SignalDomain::Value,
            EventNodeKind::Gate { .. } => SignalDomain::Delta,
            EventNodeKind::Accumulator { .. } => SignalDomain::Value,
            EventNodeKind::Buffer => SignalDomain::Value,
            EventNodeKind::Output => SignalDomain::Value,
            EventNodeKind::Compute { base, excluded } => {
                if self.base.node(*base).spec.kind.is_linear() && !*excluded {
                    SignalDomain::Delta
                } else {
                    SignalDomain::Value
                }
            }
        }
    }
}

struct Converter<'a> {
    base: &'a NetworkGraph,
    policy: &'a PolicyConfig,
    gamma: &'a HashMap<String, Vec<f32>>,
    nodes: Vec<EventNode>,
    /// base node index -> (event node producing its signal, origin base id)
    produced: HashMap<usize, usize>,
    /// (producer event idx, state layer tag) -> event idx
    state_cache: HashMap<(usize, &'static str), usize>,
    /// event idx -> base id whose signal this node carries
    origin: Vec<String>,
}

impl<'a> Converter<'a> {
    fn push(&mut self, node: EventNode, origin: String) -> usize {
        self.nodes.push(node);
        self.origin.push(origin);
        self.nodes.len() - 1
    }

    fn domain(&self, idx: usize) -> SignalDomain {
        match &self.nodes[idx].kind {
            EventNodeKind::Input => SignalDomain::Value,
            EventNodeKind::Gate { .. } => SignalDomain::Delta,
            EventNodeKind::Accumulator { .. } | EventNodeKind::Buffer | EventNodeKind::Output => {
                SignalDomain::Value
            }
            EventNodeKind::Compute { base, excluded } => {
                if self.base.node(*base).spec.kind.is_linear() && !*excluded {
                    SignalDomain::Delta
                } else {
                    SignalDomain::Value
                }
            }
        }
    }

    fn gate_policy(&self, origin: &str) -> Result<PolicyConfig> {
        let mut cfg = self.policy.clone();
        if let Some(gamma) = self.gamma.get(origin) {
            cfg = cfg.with_channel_scale(gamma.clone());
        }
        cfg.validate()?;
        if let Some(gamma) = &cfg.channel_scale {
            let node = self
                .base
                .node_index(origin)
                .ok_or_else(|| Error::Config(format!("channel scale for unknown layer '{origin}'")))?;
            let channels = self.base.node(node).output_shape[0];
            if gamma.len() != channels {
                return Err(Error::Config(format!(
                    "channel scale for '{origin}' has {} entries, layer has {channels} channels",
                    gamma.len()
                )));
            }
        }
        Ok(cfg)
    }

    fn get_or_insert_gate(&mut self, producer: usize, inserted: &mut Vec<String>) -> Result<usize> {
        if let Some(&idx) = self.state_cache.get(&(producer, "gate")) {
            inserted.push(self.nodes[idx].name.clone());
            return Ok(idx);
        }
        let origin = self.origin[producer].clone();
        let shape = self.nodes[producer].shape.clone();
        let is_input = matches!(self.nodes[producer].kind, EventNodeKind::Input);
        let policy = self.gate_policy(&origin)?;
        let name = format!("{origin}:gate");
        let idx = self.push(
            EventNode {
                name: name.clone(),
                kind: EventNodeKind::Gate { policy, input_gate: is_input },
                inputs: vec![producer],
                shape,
            },
            origin,
        );
        self.state_cache.insert((producer, "gate"), idx);
        inserted.push(name);
        Ok(idx)
    }

    fn get_or_insert_accumulator(&mut self, producer: usize, inserted: &mut Vec<String>) -> usize {
        if let Some(&idx) = self.state_cache.get(&(producer, "acc")) {
            inserted.push(self.nodes[idx].name.clone());
            return idx;
        }
        let origin = self.origin[producer].clone();
        let shape = self.nodes[producer].shape.clone();
        let name = format!("{origin}:acc");
        let idx = self.push(
            EventNode {
                name: name.clone(),
                kind: EventNodeKind::Accumulator { output: false },
                inputs: vec![producer],
                shape,
            },
            origin,
        );
        self.state_cache.insert((producer, "acc"), idx);
        inserted.push(name);
        idx
    }

    fn get_or_insert_buffer(&mut self, producer: usize, inserted: &mut Vec<String>) -> usize {
        if let Some(&idx) = self.state_cache.get(&(producer, "buf")) {
            inserted.push(self.nodes[idx].name.clone());
            return idx;
        }
        let origin = self.origin[producer].clone();
        let shape = self.nodes[producer].shape.clone();
        let name = format!("{origin}:buf");
        let idx = self.push(
            EventNode {
                name: name.clone(),
                kind: EventNodeKind::Buffer,
                inputs: vec![producer],
                shape,
            },
            origin,
        );
        self.state_cache.insert((producer, "buf"), idx);
        inserted.push(name);
        idx
    }

    /// Resolve the edge from a base producer for a consumer that needs the
    /// given domain, inserting state layers as required.
    fn edge(
        &mut self,
        producer_base: usize,
        want: SignalDomain,
        buffered: bool,
        inserted: &mut Vec<String>,
    ) -> Result<usize> {
        let mut idx = self.produced[&producer_base];
        let have = self.domain(idx);
        match (have, want) {
            (SignalDomain::Value, SignalDomain::Delta) => {
                idx = self.get_or_insert_gate(idx, inserted)?;
            }
            (SignalDomain::Delta, SignalDomain::Value) => {
                idx = self.get_or_insert_accumulator(idx, inserted);
            }
            _ => {}
        }
        if buffered {
            idx = self.get_or_insert_buffer(idx, inserted);
        }
        Ok(idx)
    }
}

/// Convert a conventional network to event form.
///
/// `gamma_by_layer` optionally maps base layer ids to per-channel threshold
/// scales for the gate transmitting that layer's signal.
pub fn convert_to_event_scaled(
    graph: &NetworkGraph,
    policy: &PolicyConfig,
    gamma_by_layer: &HashMap<String, Vec<f32>>,
) -> Result<EventGraph> {
    convert_to_event_excluding(graph, policy, gamma_by_layer, &HashSet::new())
}

/// Convert with manually marked excluded layers: those run conventionally
/// inside the event network, reading buffered full inputs and recomputing
/// densely every frame, with gates re-sparsifying their outputs.
pub fn convert_to_event_excluding(
    graph: &NetworkGraph,
    policy: &PolicyConfig,
    gamma_by_layer: &HashMap<String, Vec<f32>>,
    excluded: &HashSet<String>,
) -> Result<EventGraph> {
    policy.validate()?;
    for id in gamma_by_layer.keys() {
        if graph.node_index(id).is_none() {
            return Err(Error::Config(format!("channel scale for unknown layer '{id}'")));
        }
    }
    for id in excluded {
        match graph.node_index(id) {
            None => return Err(Error::Config(format!("excluded layer '{id}' does not exist"))),
            Some(idx) => {
                let kind = graph.node(idx).spec.kind;
                if matches!(kind, LayerKind::Input | LayerKind::Output) {
                    return Err(Error::Config(format!(
                        "'{id}' ({}) cannot be excluded from conversion",
                        kind.name()
                    )));
                }
            }
        }
    }

    let mut conv = Converter {
        base: graph,
        policy,
        gamma: gamma_by_layer,
        nodes: Vec::new(),
        produced: HashMap::new(),
        state_cache: HashMap::new(),
        origin: Vec::new(),
    };
    let mut placements = Vec::new();
    let mut input_node = 0;
    let mut output_node = 0;
    let mut output_accumulator = 0;

    for &base_idx in graph.topo_order() {
        let node = graph.node(base_idx);
        let id = node.spec.id.clone();
        let shape = node.output_shape.clone();
        match node.spec.kind {
            LayerKind::Input => {
                let idx = conv.push(
                    EventNode {
                        name: id.clone(),
                        kind: EventNodeKind::Input,
                        inputs: vec![],
                        shape,
                    },
                    id.clone(),
                );
                input_node = idx;
                // a gate always precedes the first layer; at this gate b and
                // d update from raw pixel values at every timestep
                let mut inserted = Vec::new();
                let gate = conv.get_or_insert_gate(idx, &mut inserted)?;
                conv.produced.insert(base_idx, gate);
                placements.push(Placement { from: id.clone(), to: "*".into(), inserted });
            }
            LayerKind::Output => {
                let producer_base = node.inputs[0];
                let mut inserted = Vec::new();
                // an accumulator always follows the last layer; if the last
                // signal is value-based it passes through a gate first
                let mut idx = conv.produced[&producer_base];
                if conv.domain(idx) == SignalDomain::Value {
                    idx = conv.get_or_insert_gate(idx, &mut inserted)?;
                }
                let acc = conv.get_or_insert_accumulator(idx, &mut inserted);
                if let EventNodeKind::Accumulator { output } = &mut conv.nodes[acc].kind {
                    *output = true;
                }
                output_accumulator = acc;
                let out_idx = conv.push(
                    EventNode {
                        name: id.clone(),
                        kind: EventNodeKind::Output,
                        inputs: vec![acc],
                        shape,
                    },
                    id.clone(),
                );
                output_node = out_idx;
                conv.produced.insert(base_idx, out_idx);
                placements.push(Placement {
                    from: graph.node(producer_base).spec.id.clone(),
                    to: id,
                    inserted,
                });
            }
            kind => {
                let is_excluded = excluded.contains(&id);
                // excluded layers read buffered full values; everything else
                // follows the linear/nonlinear domain rules
                let (want, buffered) = if is_excluded {
                    (SignalDomain::Value, true)
                } else {
                    (
                        if kind.is_linear() { SignalDomain::Delta } else { SignalDomain::Value },
                        kind.is_nonlinear() && !kind.is_pointwise(),
                    )
                };
                let mut inputs = Vec::with_capacity(node.inputs.len());
                for &producer_base in &node.inputs {
                    let mut inserted = Vec::new();
                    let idx = conv.edge(producer_base, want, buffered, &mut inserted)?;
                    if !inserted.is_empty() {
                        placements.push(Placement {
                            from: graph.node(producer_base).spec.id.clone(),
                            to: id.clone(),
                            inserted,
                        });
                    }
                    inputs.push(idx);
                }
                let idx = conv.push(
                    EventNode {
                        name: id.clone(),
                        kind: EventNodeKind::Compute { base: base_idx, excluded: is_excluded },
                        inputs,
                        shape,
                    },
                    id.clone(),
                );
                conv.produced.insert(base_idx, idx);
            }
        }
    }

    let eg = EventGraph {
        base: graph.clone(),
        nodes: conv.nodes,
        placements,
        input_node,
        output_node,
        output_accumulator,
    };
    validate_placement(&eg)?;
    Ok(eg)
}

pub fn convert_to_event(graph: &NetworkGraph, policy: &PolicyConfig) -> Result<EventGraph> {
    convert_to_event_scaled(graph, policy, &HashMap::new())
}

/// Check every placement invariant of an event graph. Used directly by
/// property tests and run once after every conversion.
pub fn validate_placement(eg: &EventGraph) -> Result<()> {
    let fail = |msg: String| Err(Error::Conversion(msg));
    for (idx, node) in eg.nodes().iter().enumerate() {
        match &node.kind {
            EventNodeKind::Compute { base, excluded } => {
                let kind = eg.base().node(*base).spec.kind;
                for &src in &node.inputs {
                    if *excluded {
                        // excluded layers read full values from buffers
                        if !matches!(eg.node(src).kind, EventNodeKind::Buffer) {
                            return fail(format!(
                                "excluded layer '{}' is not fed from a buffer",
                                node.name
                            ));
                        }
                        continue;
                    }
                    let domain = eg.domain_of(src);
                    if kind.is_linear() && domain != SignalDomain::Delta {
                        return fail(format!(
                            "linear layer '{}' receives value-based input",
                            node.name
                        ));
                    }
                    if kind.is_nonlinear() && domain != SignalDomain::Value {
                        return fail(format!(
                            "nonlinear layer '{}' receives delta-based input",
                            node.name
                        ));
                    }
                    if kind.is_nonlinear()
                        && !kind.is_pointwise()
                        && !matches!(eg.node(src).kind, EventNodeKind::Buffer)
                    {
                        return fail(format!(
                            "non-pointwise nonlinear layer '{}' is not preceded by a buffer",
                            node.name
                        ));
                    }
                }
            }
            EventNodeKind::Gate { .. } => {
                let src = node.inputs[0];
                if matches!(eg.node(src).kind, EventNodeKind::Accumulator { .. }) {
                    return fail(format!("accumulator feeds directly into gate '{}'", node.name));
                }
                if eg.domain_of(src) != SignalDomain::Value {
                    return fail(format!("gate '{}' receives delta-based input", node.name));
                }
            }
            EventNodeKind::Accumulator { .. } => {
                let src = node.inputs[0];
                if eg.domain_of(src) != SignalDomain::Delta {
                    return fail(format!(
                        "accumulator '{}' receives value-based input",
                        node.name
                    ));
                }
            }
            EventNodeKind::Input => {
                // the node after the input must be the input gate
                let consumers: Vec<usize> = eg
                    .nodes()
                    .iter()
                    .enumerate()
                    .filter(|(_, n)| n.inputs.contains(&idx))
                    .map(|(i, _)| i)
                    .collect();
                if consumers.len() != 1
                    || !matches!(eg.node(consumers[0]).kind, EventNodeKind::Gate { input_gate: true, .. })
                {
                    return fail("input is not followed by exactly one input gate".into());
                }
            }
            EventNodeKind::Output => {
                let src = node.inputs[0];
                if !matches!(eg.node(src).kind, EventNodeKind::Accumulator { output: true }) {
                    return fail("output is not preceded by an output accumulator".into());
                }
            }
            EventNodeKind::Buffer => {}
        }
    }
    Ok(())
}

// --- Event state -----------------------------------------------------------

#[derive(Debug, Clone)]
pub enum SlotState {
    Empty,
    Acc(DenseTensor),
    Gate { b: DenseTensor, d: DenseTensor },
    Buf(DenseTensor),
}

/// Per-network store of accumulator (`a`), gate (`b`, `d`), and buffer (`x`)
/// vectors, owned by exactly one executor at a time.
#[derive(Debug, Clone)]
pub struct EventState {
    slots: Vec<SlotState>,
    initialized: bool,
    canonical: DenseTensor,
    init_macs: u64,
}

impl EventState {
    pub fn initialized(&self) -> bool {
        self.initialized
    }

    pub fn canonical(&self) -> &DenseTensor {
        &self.canonical
    }

    /// MACs spent flushing the canonical input through the network.
    pub fn init_macs(&self) -> u64 {
        self.init_macs
    }

    pub fn slot(&self, idx: usize) -> &SlotState {
        &self.slots[idx]
    }

    pub fn slot_mut(&mut self, idx: usize) -> &mut SlotState {
        &mut self.slots[idx]
    }

    pub fn accumulator(&self, idx: usize) -> Option<&DenseTensor> {
        match &self.slots[idx] {
            SlotState::Acc(a) => Some(a),
            _ => None,
        }
    }

    pub fn gate(&self, idx: usize) -> Option<(&DenseTensor, &DenseTensor)> {
        match &self.slots[idx] {
            SlotState::Gate { b, d } => Some((b, d)),
            _ => None,
        }
    }

    pub fn buffer(&self, idx: usize) -> Option<&DenseTensor> {
        match &self.slots[idx] {
            SlotState::Buf(x) => Some(x),
            _ => None,
        }
    }

    /// True when every stored state tensor is finite. Checked at frame
    /// boundaries by the executor.
    pub fn all_finite(&self) -> bool {
        self.slots.iter().all(|s| match s {
            SlotState::Empty => true,
            SlotState::Acc(a) => a.all_finite(),
            SlotState::Gate { b, d } => b.all_finite() && d.all_finite(),
            SlotState::Buf(x) => x.all_finite(),
        })
    }
}

/// Flush a canonical input through the network, layer by layer in
/// topological order: `a = g(b_in)` including bias terms, `b = f(a)`,
/// `d = 0`, buffers hold their input values. After this the output
/// accumulator holds the conventional output for the canonical input and the
/// whole network is internally consistent.
pub fn initialize(eg: &EventGraph, canonical: &DenseTensor) -> Result<EventState> {
    let input_shape = eg.node(eg.input_node()).shape.clone();
    if canonical.shape() != input_shape {
        return Err(Error::Shape(format!(
            "canonical input shape {:?} does not match network input {:?}",
            canonical.shape(),
            input_shape
        )));
    }

    let mut slots = vec![SlotState::Empty; eg.nodes().len()];
    let mut values: Vec<Option<DenseTensor>> = vec![None; eg.nodes().len()];
    let mut init_macs = 0u64;

    for (idx, node) in eg.nodes().iter().enumerate() {
        let value = match &node.kind {
            EventNodeKind::Input => canonical.clone(),
            EventNodeKind::Gate { .. } => {
                let v = values[node.inputs[0]].clone().ok_or_else(|| {
                    Error::State(format!("gate '{}' has no flushed input", node.name))
                })?;
                slots[idx] = SlotState::Gate { b: v.clone(), d: DenseTensor::zeros(v.shape())? };
                v
            }
            EventNodeKind::Accumulator { .. } => {
                let v = values[node.inputs[0]].clone().ok_or_else(|| {
                    Error::State(format!("accumulator '{}' has no flushed input", node.name))
                })?;
                slots[idx] = SlotState::Acc(v.clone());
                v
            }
            EventNodeKind::Buffer => {
                let v = values[node.inputs[0]].clone().ok_or_else(|| {
                    Error::State(format!("buffer '{}' has no flushed input", node.name))
                })?;
                slots[idx] = SlotState::Buf(v.clone());
                v
            }
            EventNodeKind::Output => values[node.inputs[0]].clone().ok_or_else(|| {
                Error::State(format!("output '{}' has no flushed input", node.name))
            })?,
            EventNodeKind::Compute { base, .. } => {
                let spec = &eg.base().node(*base).spec;
                let inputs: Vec<&DenseTensor> = node
                    .inputs
                    .iter()
                    .map(|&i| {
                        values[i].as_ref().ok_or_else(|| {
                            Error::State(format!("layer '{}' has no flushed input", node.name))
                        })
                    })
                    .collect::<Result<_>>()?;
                let (out, macs) = layers::dense_forward(spec, &inputs)?;
                init_macs += macs;
                out
            }
        };
        values[idx] = Some(value);
    }

    Ok(EventState {
        slots,
        initialized: true,
        canonical: canonical.clone(),
        init_macs,
    })
}

/// One entry of a consistency report: node name and the largest violation
/// attributed to it.
pub type ConsistencyReport = Vec<(String, f32)>;

/// Check internal consistency: for every neuron, `a = g(b_in - d_in)` and
/// `b = f(a)`, each against the stored state of the previous layer, plus
/// buffered inputs against their upstream values.
///
/// Violations of both neuron conditions are attributed to the neuron's gate
/// (its state-carrying downstream end); the output accumulator reports
/// itself; buffers report themselves. An empty report means consistent.
pub fn consistency_check(eg: &EventGraph, state: &EventState, tol: f32) -> Result<ConsistencyReport> {
    if !state.initialized() {
        return Err(Error::State("consistency check on uninitialized state".into()));
    }

    let n = eg.nodes().len();
    let mut believed: Vec<Option<DenseTensor>> = vec![None; n];
    let mut raw: Vec<f32> = vec![0.0; n];

    let max_diff = |a: &DenseTensor, b: &DenseTensor| -> f32 {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0f32, |m, (x, y)| m.max((x - y).abs()))
    };

    for (idx, node) in eg.nodes().iter().enumerate() {
        let value = match &node.kind {
            EventNodeKind::Input => {
                // b of the input gate is externally driven; no check here
                DenseTensor::zeros(&node.shape)?
            }
            EventNodeKind::Gate { input_gate, .. } => {
                let (b, d) = state.gate(idx).ok_or_else(|| {
                    Error::State(format!("gate '{}' has no state", node.name))
                })?;
                if !input_gate {
                    let expected = believed[node.inputs[0]].as_ref().unwrap();
                    raw[idx] = max_diff(b, expected);
                }
                // downstream sees the transmitted value b - d
                let values = b.values().iter().zip(d.values()).map(|(b, d)| b - d).collect();
                DenseTensor::from_vec(b.shape(), values)
                    .unwrap_or(DenseTensor::zeros(b.shape())?)
            }
            EventNodeKind::Accumulator { .. } => {
                let a = state.accumulator(idx).ok_or_else(|| {
                    Error::State(format!("accumulator '{}' has no state", node.name))
                })?;
                let expected = believed[node.inputs[0]].as_ref().unwrap();
                raw[idx] = max_diff(a, expected);
                a.clone()
            }
            EventNodeKind::Buffer => {
                let x = state.buffer(idx).ok_or_else(|| {
                    Error::State(format!("buffer '{}' has no state", node.name))
                })?;
                let expected = believed[node.inputs[0]].as_ref().unwrap();
                raw[idx] = max_diff(x, expected);
                x.clone()
            }
            EventNodeKind::Output => believed[node.inputs[0]].as_ref().unwrap().clone(),
            EventNodeKind::Compute { base, .. } => {
                let spec = &eg.base().node(*base).spec;
                let inputs: Vec<&DenseTensor> =
                    node.inputs.iter().map(|&i| believed[i].as_ref().unwrap()).collect();
                let (out, _) = layers::dense_forward(spec, &inputs)?;
                out
            }
        };
        believed[idx] = Some(value);
    }

    // Attribution: walk back from each gate through its value chain to the
    // accumulator whose `a` feeds it; the neuron's violations surface at the
    // gate. Accumulators consumed this way do not self-report.
    let mut attributed = vec![0.0f32; n];
    let mut acc_consumed = vec![false; n];
    for (idx, node) in eg.nodes().iter().enumerate() {
        if let EventNodeKind::Gate { input_gate: false, .. } = &node.kind {
            let mut violation = raw[idx];
            let mut cursor = node.inputs[0];
            loop {
                match &eg.node(cursor).kind {
                    EventNodeKind::Accumulator { .. } => {
                        violation = violation.max(raw[cursor]);
                        acc_consumed[cursor] = true;
                        break;
                    }
                    EventNodeKind::Compute { .. } | EventNodeKind::Buffer => {
                        if matches!(eg.node(cursor).kind, EventNodeKind::Buffer) {
                            // buffers report themselves
                        }
                        let node = eg.node(cursor);
                        if node.inputs.is_empty() {
                            break;
                        }
                        cursor = node.inputs[0];
                    }
                    _ => break,
                }
            }
            attributed[idx] = violation;
        }
    }

    let mut report = Vec::new();
    for (idx, node) in eg.nodes().iter().enumerate() {
        let v = match &node.kind {
            EventNodeKind::Gate { input_gate: false, .. } => attributed[idx],
            EventNodeKind::Accumulator { .. } if !acc_consumed[idx] => raw[idx],
            EventNodeKind::Buffer => raw[idx],
            _ => 0.0,
        };
        if v > tol {
            report.push((node.name.clone(), v));
        }
    }
    Ok(report)
}
