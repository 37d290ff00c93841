//! Frame-synchronous execution of conventional and event networks.
//!
//! The event executor owns one `EventState` and advances it frame by frame;
//! all deltas for a frame propagate fully, in topological order, before the
//! next frame starts. Executors for different (state, video) pairs may run
//! concurrently; a single state region never has more than one writer, which
//! the `&mut self` receiver enforces.
//!
//! Operation accounting follows fixed per-touch rules:
//! - accumulator update: 1 load (a), 1 add (a + g(delta)), 1 store (a)
//! - gate update: 2 loads (b, d), 3 adds (d + f(a) - b and |d| - h),
//!   2 stores (b, d)
//! - transmission: 1 load (d) + 1 store (d) per firing neuron
//! - buffer update: 1 load + 1 store per touched element (charged on the
//!   buffer's own trace row so it stays separately visible)
//! - relu recompute: 1 arithmetic op per touched index
//! - max-pool window recompute: 1 comparison per window element read
//! - output accumulator: its full per-frame read is tracked as
//!   `output_reads`, reported separately and excluded from overhead ratios
//!
//! The input gate updates b and d from raw pixel values at every index on
//! every frame; those updates are charged as overhead like any other gate.

use crate::error::{Error, Result};
use crate::event::{EventGraph, EventNodeKind, EventState, SlotState};
use crate::graph::{LayerKind, LayerParams, NetworkGraph};
use crate::layers::{self, PointwiseFn};
use crate::policy::PolicyConfig;
use crate::tensor::{DeltaEntry, DenseTensor};

/// Per-layer, per-frame operation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LayerCounters {
    pub macs: u64,
    pub overhead_arith: u64,
    pub mem_loads: u64,
    pub mem_stores: u64,
    pub transmissions: u64,
    pub policy_evals: u64,
    /// Full-frame element reads of the output accumulator.
    pub output_reads: u64,
}

/// Counters for every node of one frame, in node order.
#[derive(Debug, Clone)]
pub struct FrameTrace {
    pub frame_index: usize,
    pub layers: Vec<LayerCounters>,
}

impl FrameTrace {
    pub fn total_macs(&self) -> u64 {
        self.layers.iter().map(|l| l.macs).sum()
    }

    pub fn total_overhead_arith(&self) -> u64 {
        self.layers.iter().map(|l| l.overhead_arith).sum()
    }

    pub fn total_transmissions(&self) -> u64 {
        self.layers.iter().map(|l| l.transmissions).sum()
    }
}

/// Result of a conventional run.
#[derive(Debug, Clone)]
pub struct ConventionalRun {
    pub outputs: Vec<DenseTensor>,
    pub traces: Vec<FrameTrace>,
}

/// Result of an event run.
#[derive(Debug, Clone)]
pub struct EventRun {
    pub outputs: Vec<DenseTensor>,
    pub traces: Vec<FrameTrace>,
    /// MACs spent on the initialization flush, kept out of the frame traces.
    pub init_macs: u64,
}

/// Dense per-frame execution of the base graph. Traces carry MACs only;
/// conventional mode has no overhead and no transmissions.
pub fn run_conventional(graph: &NetworkGraph, video: &[DenseTensor]) -> Result<ConventionalRun> {
    let input_shape = graph.input_shape().to_vec();
    let mut outputs = Vec::with_capacity(video.len());
    let mut traces = Vec::with_capacity(video.len());
    for (frame_index, frame) in video.iter().enumerate() {
        if frame.shape() != input_shape {
            return Err(Error::Shape(format!(
                "frame {frame_index} shape {:?} does not match input {:?}",
                frame.shape(),
                input_shape
            )));
        }
        let mut counters = vec![LayerCounters::default(); graph.nodes().len()];
        let mut values: Vec<Option<DenseTensor>> = vec![None; graph.nodes().len()];
        for &idx in graph.topo_order() {
            let node = graph.node(idx);
            let value = if node.spec.kind == LayerKind::Input {
                frame.clone()
            } else {
                let inputs: Vec<&DenseTensor> = node
                    .inputs
                    .iter()
                    .map(|&i| values[i].as_ref().expect("topological order"))
                    .collect();
                let (out, macs) = layers::dense_forward(&node.spec, &inputs)
                    .map_err(|e| Error::Shape(format!("frame {frame_index}: {e}")))?;
                counters[idx].macs = macs;
                out
            };
            values[idx] = Some(value);
        }
        outputs.push(values[graph.output_node()].take().expect("output value"));
        traces.push(FrameTrace { frame_index, layers: counters });
    }
    Ok(ConventionalRun { outputs, traces })
}

#[derive(Debug, Clone)]
enum Signal {
    Delta(Vec<DeltaEntry>),
    /// Touched indices with their new values; sorted by index. A value may
    /// equal its previous value (touch without change), zero deltas never
    /// appear.
    Values(Vec<(usize, f32)>),
}

/// Owns one event state and advances it one frame at a time.
pub struct EventExecutor<'g> {
    graph: &'g EventGraph,
    state: EventState,
    ablate_memory: bool,
    frames_done: usize,
    instrument: bool,
    // per-gate instrumentation: cumulative transmitted sums and the value
    // the downstream network believed at initialization (b at init)
    cum_dout: Vec<Option<Vec<f32>>>,
    believed_init: Vec<Option<Vec<f32>>>,
}

impl<'g> EventExecutor<'g> {
    pub fn new(graph: &'g EventGraph, state: EventState) -> Result<Self> {
        if !state.initialized() {
            return Err(Error::State("executor requires an initialized event state".into()));
        }
        Ok(Self {
            graph,
            state,
            ablate_memory: false,
            frames_done: 0,
            instrument: false,
            cum_dout: vec![None; graph.nodes().len()],
            believed_init: vec![None; graph.nodes().len()],
        })
    }

    /// Reset every gate's `d` to zero after its policy evaluation each
    /// frame, removing long-term memory.
    pub fn with_ablation(mut self, ablate: bool) -> Self {
        self.ablate_memory = ablate;
        self
    }

    /// Track per-gate transmitted sums so memory-identity checks can run.
    pub fn with_instrumentation(mut self) -> Self {
        self.instrument = true;
        for (idx, node) in self.graph.nodes().iter().enumerate() {
            if matches!(node.kind, EventNodeKind::Gate { .. }) {
                if let Some((b, _)) = self.state.gate(idx) {
                    self.cum_dout[idx] = Some(vec![0.0; b.numel()]);
                    self.believed_init[idx] = Some(b.values().to_vec());
                }
            }
        }
        self
    }

    pub fn state(&self) -> &EventState {
        &self.state
    }

    pub fn into_state(self) -> EventState {
        self.state
    }

    pub fn frames_done(&self) -> usize {
        self.frames_done
    }

    /// Process one frame: returns the output accumulator snapshot and the
    /// per-layer trace.
    pub fn step(&mut self, frame: &DenseTensor) -> Result<(DenseTensor, FrameTrace)> {
        let input_shape = &self.graph.node(self.graph.input_node()).shape;
        if frame.shape() != input_shape.as_slice() {
            return Err(Error::Shape(format!(
                "frame {} shape {:?} does not match input {:?}",
                self.frames_done,
                frame.shape(),
                input_shape
            )));
        }
        if self.frames_done == 0 && frame.values() != self.state.canonical().values() {
            return Err(Error::State(
                "frame 0 must be the canonical input the state was initialized with".into(),
            ));
        }

        let n = self.graph.nodes().len();
        let mut counters = vec![LayerCounters::default(); n];
        let mut signals: Vec<Option<Signal>> = vec![None; n];
        let mut output_snapshot: Option<DenseTensor> = None;
        let frame_index = self.frames_done;

        for idx in 0..n {
            let node = self.graph.node(idx);
            let c = &mut counters[idx];
            let signal = match &node.kind {
                EventNodeKind::Input => {
                    // raw pixel values reach the input gate at every index
                    Signal::Values(frame.values().iter().copied().enumerate().collect())
                }
                EventNodeKind::Gate { policy, .. } => {
                    let updates = match signals[node.inputs[0]].take() {
                        Some(Signal::Values(u)) => u,
                        _ => {
                            return Err(Error::State(format!(
                                "gate '{}' expected value-based input",
                                node.name
                            )))
                        }
                    };
                    // gates feed exactly one signal forward; restore for
                    // potential second consumers
                    let out = self.gate_step(idx, policy.clone(), &updates, c, frame_index)?;
                    Signal::Delta(out)
                }
                EventNodeKind::Accumulator { output } => {
                    let entries = take_delta(&signals, node.inputs[0], &node.name)?;
                    let a = match self.state.slot_mut(idx) {
                        SlotState::Acc(a) => a,
                        _ => {
                            return Err(Error::State(format!(
                                "accumulator '{}' missing state",
                                node.name
                            )))
                        }
                    };
                    let mut updates = Vec::with_capacity(entries.len());
                    for e in &entries {
                        if e.index >= a.numel() {
                            return Err(Error::Shape(format!(
                                "accumulator '{}': index {} out of range",
                                node.name, e.index
                            )));
                        }
                        a.add(e.index, e.value);
                        updates.push((e.index, a.get(e.index)));
                    }
                    let touched = entries.len() as u64;
                    c.mem_loads += touched;
                    c.overhead_arith += touched;
                    c.mem_stores += touched;
                    if *output {
                        c.output_reads += a.numel() as u64;
                        output_snapshot = Some(a.clone());
                    }
                    Signal::Values(updates)
                }
                EventNodeKind::Buffer => {
                    let updates = take_values(&signals, node.inputs[0], &node.name)?;
                    let x = match self.state.slot_mut(idx) {
                        SlotState::Buf(x) => x,
                        _ => {
                            return Err(Error::State(format!(
                                "buffer '{}' missing state",
                                node.name
                            )))
                        }
                    };
                    for &(i, v) in &updates {
                        if i >= x.numel() {
                            return Err(Error::Shape(format!(
                                "buffer '{}': index {i} out of range",
                                node.name
                            )));
                        }
                        x.set(i, v);
                    }
                    c.mem_loads += updates.len() as u64;
                    c.mem_stores += updates.len() as u64;
                    Signal::Values(updates)
                }
                EventNodeKind::Output => Signal::Values(Vec::new()),
                EventNodeKind::Compute { base, excluded: true } => {
                    // excluded layer: conventional recompute from buffered
                    // full inputs, charged at full dense cost every frame
                    let spec = &self.graph.base().node(*base).spec;
                    let mut inputs = Vec::with_capacity(node.inputs.len());
                    for &src in &node.inputs {
                        let buffer = self.state.buffer(src).ok_or_else(|| {
                            Error::State(format!(
                                "excluded layer '{}' has no input buffer",
                                node.name
                            ))
                        })?;
                        inputs.push(buffer.clone());
                    }
                    let input_refs: Vec<&DenseTensor> = inputs.iter().collect();
                    let (out, macs) = layers::dense_forward(spec, &input_refs).map_err(|e| {
                        Error::State(format!("frame {frame_index}, layer '{}': {e}", node.name))
                    })?;
                    c.macs += macs;
                    Signal::Values(out.values().iter().copied().enumerate().collect())
                }
                EventNodeKind::Compute { base, excluded: false } => {
                    let spec = &self.graph.base().node(*base).spec;
                    match spec.kind {
                        LayerKind::Relu => {
                            let updates = take_values(&signals, node.inputs[0], &node.name)?;
                            let (out, ops) = layers::pointwise_recompute(&PointwiseFn::Relu, &updates);
                            c.overhead_arith += ops;
                            Signal::Values(out)
                        }
                        LayerKind::MaxPool => {
                            let updates = take_values(&signals, node.inputs[0], &node.name)?;
                            let (window, stride) = match &spec.params {
                                LayerParams::Pool { window, stride } => (*window, *stride),
                                _ => unreachable!("validated at parse"),
                            };
                            let buffer_idx = node.inputs[0];
                            let buffer = self.state.buffer(buffer_idx).ok_or_else(|| {
                                Error::State(format!("max_pool '{}' has no buffer", node.name))
                            })?;
                            let touched: Vec<usize> = updates.iter().map(|&(i, _)| i).collect();
                            let windows = layers::pool_touched_windows(
                                window,
                                stride,
                                buffer.shape(),
                                &node.shape,
                                &touched,
                            )?;
                            let (out, comparisons) = layers::maxpool_recompute(
                                window,
                                stride,
                                buffer,
                                &node.shape,
                                &windows,
                            )?;
                            c.overhead_arith += comparisons;
                            Signal::Values(out)
                        }
                        _ => {
                            // LINEAR kinds: homogeneous delta forward
                            let mut inputs: Vec<Vec<DeltaEntry>> =
                                Vec::with_capacity(node.inputs.len());
                            for &src in &node.inputs {
                                inputs.push(take_delta(&signals, src, &node.name)?);
                            }
                            let input_slices: Vec<&[DeltaEntry]> =
                                inputs.iter().map(|v| v.as_slice()).collect();
                            let in_shapes: Vec<&[usize]> = node
                                .inputs
                                .iter()
                                .map(|&src| self.graph.node(src).shape.as_slice())
                                .collect();
                            let (out, macs) = layers::delta_forward_linear(
                                spec,
                                &input_slices,
                                &in_shapes,
                                &node.shape,
                            )
                            .map_err(|e| {
                                Error::State(format!("frame {frame_index}, layer '{}': {e}", node.name))
                            })?;
                            c.macs += macs;
                            Signal::Delta(out)
                        }
                    }
                }
            };
            signals[idx] = Some(signal);
        }

        if !self.state.all_finite() {
            return Err(Error::State(format!(
                "non-finite state after frame {frame_index}"
            )));
        }

        self.frames_done += 1;
        let output = output_snapshot
            .ok_or_else(|| Error::State("event graph has no output accumulator".into()))?;
        Ok((output, FrameTrace { frame_index, layers: counters }))
    }

    fn gate_step(
        &mut self,
        idx: usize,
        policy: PolicyConfig,
        updates: &[(usize, f32)],
        c: &mut LayerCounters,
        frame_index: usize,
    ) -> Result<Vec<DeltaEntry>> {
        let (b, d) = match self.state.slot_mut(idx) {
            SlotState::Gate { b, d } => (b, d),
            _ => {
                return Err(Error::State(format!(
                    "gate '{}' missing state",
                    self.graph.node(idx).name
                )))
            }
        };
        let numel = b.numel();
        for &(i, v) in updates {
            if i >= numel {
                return Err(Error::Shape(format!(
                    "gate '{}': index {i} out of range (frame {frame_index})",
                    self.graph.node(idx).name
                )));
            }
            let diff = v - b.get(i);
            d.add(i, diff);
            b.set(i, v);
        }
        let touched_n = updates.len() as u64;
        c.mem_loads += 2 * touched_n;
        c.overhead_arith += 3 * touched_n;
        c.mem_stores += 2 * touched_n;

        let touched: Vec<usize> = updates.iter().map(|&(i, _)| i).collect();
        let decision = crate::policy::evaluate(&policy, d, &touched)?;
        c.policy_evals += decision.policy_evals;
        c.overhead_arith += decision.extra_arith;
        c.mem_loads += decision.extra_loads;

        let mut out = Vec::with_capacity(decision.fired.len());
        for &i in &decision.fired {
            let value = d.get(i);
            if value != 0.0 {
                out.push(DeltaEntry { index: i, value });
                if let Some(cum) = &mut self.cum_dout[idx] {
                    cum[i] += value;
                }
            }
            d.set(i, 0.0);
        }
        c.transmissions += decision.fired.len() as u64;
        c.mem_loads += decision.fired.len() as u64;
        c.mem_stores += decision.fired.len() as u64;

        if self.ablate_memory {
            d.fill(0.0);
        }
        Ok(out)
    }

    /// Largest amount by which any gate neuron's |d| exceeds its per-neuron
    /// threshold h_i, over all gates. For the singular threshold policy this
    /// is <= 0 after every completed frame.
    pub fn max_residual_excess(&self) -> f32 {
        let mut worst = f32::NEG_INFINITY;
        for (idx, node) in self.graph.nodes().iter().enumerate() {
            if let EventNodeKind::Gate { policy, .. } = &node.kind {
                if let Some((_, d)) = self.state.gate(idx) {
                    let plane = d.numel() / d.shape()[0];
                    for (i, v) in d.values().iter().enumerate() {
                        let h_i = match &policy.channel_scale {
                            Some(gamma) => policy.h / gamma[i / plane],
                            None => policy.h,
                        };
                        worst = worst.max(v.abs() - h_i);
                    }
                }
            }
        }
        worst
    }

    /// Memory identity: for every gate neuron, `b - d` equals the value the
    /// downstream network currently believes (initial f(a) plus the sum of
    /// transmitted deltas). Returns the largest absolute violation; requires
    /// instrumentation.
    pub fn memory_identity_violation(&self) -> Result<f32> {
        if !self.instrument {
            return Err(Error::State("memory identity requires instrumentation".into()));
        }
        let mut worst = 0.0f32;
        for (idx, node) in self.graph.nodes().iter().enumerate() {
            if matches!(node.kind, EventNodeKind::Gate { .. }) {
                let (b, d) = self.state.gate(idx).expect("gate state");
                let cum = self.cum_dout[idx].as_ref().expect("instrumented");
                let init = self.believed_init[idx].as_ref().expect("instrumented");
                for i in 0..b.numel() {
                    let believed = init[i] + cum[i];
                    worst = worst.max(((b.get(i) - d.get(i)) - believed).abs());
                }
            }
        }
        Ok(worst)
    }
}

fn take_delta(signals: &[Option<Signal>], src: usize, consumer: &str) -> Result<Vec<DeltaEntry>> {
    match &signals[src] {
        Some(Signal::Delta(entries)) => Ok(entries.clone()),
        _ => Err(Error::State(format!("'{consumer}' expected delta-based input"))),
    }
}

fn take_values(signals: &[Option<Signal>], src: usize, consumer: &str) -> Result<Vec<(usize, f32)>> {
    match &signals[src] {
        Some(Signal::Values(updates)) => Ok(updates.clone()),
        _ => Err(Error::State(format!("'{consumer}' expected value-based input"))),
    }
}

/// Run a whole video through an event network. The state must have been
/// initialized with the first frame of the video as canonical input.
pub fn run_event(
    graph: &EventGraph,
    state: EventState,
    video: &[DenseTensor],
    ablate_memory: bool,
) -> Result<EventRun> {
    let init_macs = state.init_macs();
    let mut executor = EventExecutor::new(graph, state)?.with_ablation(ablate_memory);
    let mut outputs = Vec::with_capacity(video.len());
    let mut traces = Vec::with_capacity(video.len());
    for frame in video {
        let (out, trace) = executor.step(frame)?;
        outputs.push(out);
        traces.push(trace);
    }
    Ok(EventRun { outputs, traces, init_macs })
}

// --- Overhead accounting ----------------------------------------------------

/// Aggregated operation totals of an event run, with overhead ratios against
/// the MACs saved relative to conventional execution.
#[derive(Debug, Clone, PartialEq)]
pub struct OverheadTotals {
    pub event_macs: u64,
    pub conventional_macs: u64,
    pub overhead_arith: u64,
    pub overhead_mem_loads: u64,
    pub overhead_mem_stores: u64,
    pub transmissions: u64,
    pub policy_evals: u64,
    /// Buffer-row loads/stores, included in the totals above but also
    /// reported on their own: their charging rule is artifact-defined.
    pub buffer_loads: u64,
    pub buffer_stores: u64,
    /// Full-frame output accumulator reads; part of model function, not
    /// overhead, and excluded from the ratios.
    pub output_read_loads: u64,
    /// conventional - event; negative when event mode does more work.
    pub macs_saved: i64,
    /// overhead_arith / macs_saved (0 when both are zero, infinite when
    /// nothing was saved but overhead was spent).
    pub arith_ratio: f64,
    /// (loads + stores) / macs_saved under the same convention.
    pub mem_ratio: f64,
}

/// Sum an event run's counters and compute §-style overhead ratios against
/// a conventional baseline. The baseline is required.
pub fn overhead_account(
    graph: &EventGraph,
    event_traces: &[FrameTrace],
    conventional_macs: Option<u64>,
) -> Result<OverheadTotals> {
    let conventional_macs = conventional_macs
        .ok_or_else(|| Error::Report("conventional baseline absent".into()))?;
    let mut t = OverheadTotals {
        event_macs: 0,
        conventional_macs,
        overhead_arith: 0,
        overhead_mem_loads: 0,
        overhead_mem_stores: 0,
        transmissions: 0,
        policy_evals: 0,
        buffer_loads: 0,
        buffer_stores: 0,
        output_read_loads: 0,
        macs_saved: 0,
        arith_ratio: 0.0,
        mem_ratio: 0.0,
    };
    for trace in event_traces {
        if trace.layers.len() != graph.nodes().len() {
            return Err(Error::Report(format!(
                "trace for frame {} has {} rows, graph has {} nodes",
                trace.frame_index,
                trace.layers.len(),
                graph.nodes().len()
            )));
        }
        for (idx, c) in trace.layers.iter().enumerate() {
            t.event_macs += c.macs;
            t.overhead_arith += c.overhead_arith;
            t.overhead_mem_loads += c.mem_loads;
            t.overhead_mem_stores += c.mem_stores;
            t.transmissions += c.transmissions;
            t.policy_evals += c.policy_evals;
            t.output_read_loads += c.output_reads;
            if matches!(graph.node(idx).kind, EventNodeKind::Buffer) {
                t.buffer_loads += c.mem_loads;
                t.buffer_stores += c.mem_stores;
            }
        }
    }
    t.macs_saved = conventional_macs as i64 - t.event_macs as i64;
    t.arith_ratio = ratio(t.overhead_arith, t.macs_saved);
    t.mem_ratio = ratio(t.overhead_mem_loads + t.overhead_mem_stores, t.macs_saved);
    Ok(t)
}

fn ratio(numerator: u64, saved: i64) -> f64 {
    if numerator == 0 {
        0.0
    } else if saved == 0 {
        f64::INFINITY
    } else {
        numerator as f64 / saved as f64
    }
}

// --- Agreement metrics ------------------------------------------------------

/// Per-frame agreement between event and conventional outputs.
#[derive(Debug, Clone, Copy)]
pub struct FrameAgreement {
    /// ||event - conventional||_2 / ||conventional||_2
    pub rel_l2: f64,
    /// max |event - conventional|
    pub linf: f64,
    /// 20 log10(peak / rmse); peak is the maximum |conventional| over the
    /// whole video. +inf for identical frames.
    pub psnr: f64,
}

/// Compare output sequences frame by frame.
pub fn agreement(event: &[DenseTensor], conventional: &[DenseTensor]) -> Result<Vec<FrameAgreement>> {
    if event.len() != conventional.len() {
        return Err(Error::Shape(format!(
            "sequence lengths differ: {} vs {}",
            event.len(),
            conventional.len()
        )));
    }
    let peak = conventional.iter().map(|t| t.max_abs() as f64).fold(0.0f64, f64::max);
    let mut out = Vec::with_capacity(event.len());
    for (i, (e, c)) in event.iter().zip(conventional).enumerate() {
        if e.shape() != c.shape() {
            return Err(Error::Shape(format!("frame {i}: shapes differ")));
        }
        let mut sq_err = 0.0f64;
        let mut sq_ref = 0.0f64;
        let mut linf = 0.0f64;
        for (ev, cv) in e.values().iter().zip(c.values()) {
            let diff = (*ev as f64) - (*cv as f64);
            sq_err += diff * diff;
            sq_ref += (*cv as f64) * (*cv as f64);
            linf = linf.max(diff.abs());
        }
        let l2_err = sq_err.sqrt();
        let rel_l2 = if l2_err == 0.0 {
            0.0
        } else if sq_ref == 0.0 {
            f64::INFINITY
        } else {
            l2_err / sq_ref.sqrt()
        };
        let rmse = (sq_err / e.numel() as f64).sqrt();
        let psnr = if rmse == 0.0 {
            f64::INFINITY
        } else {
            20.0 * (peak / rmse).log10()
        };
        out.push(FrameAgreement { rel_l2, linf, psnr });
    }
    Ok(out)
}

/// Full comparison report for a both-mode run.
#[derive(Debug, Clone)]
pub struct AgreementReport {
    pub per_frame: Vec<FrameAgreement>,
    /// Total conventional MACs / total event frame MACs. When the event side
    /// spent zero frame MACs the report carries the conventional total
    /// itself (documented convention for the degenerate denominator).
    pub savings_ratio: f64,
    /// Same ratio with the initialization flush charged to the event side.
    pub savings_ratio_with_init: f64,
    pub init_macs: u64,
    pub overhead: OverheadTotals,
}

pub fn build_agreement_report(
    graph: &EventGraph,
    event_run: &EventRun,
    conventional_run: &ConventionalRun,
) -> Result<AgreementReport> {
    let per_frame = agreement(&event_run.outputs, &conventional_run.outputs)?;
    let conventional_macs: u64 = conventional_run.traces.iter().map(|t| t.total_macs()).sum();
    let overhead = overhead_account(graph, &event_run.traces, Some(conventional_macs))?;
    let event_macs = overhead.event_macs;
    let savings_ratio = if event_macs == 0 {
        conventional_macs as f64
    } else {
        conventional_macs as f64 / event_macs as f64
    };
    let with_init = event_macs + event_run.init_macs;
    let savings_ratio_with_init = if with_init == 0 {
        conventional_macs as f64
    } else {
        conventional_macs as f64 / with_init as f64
    };
    Ok(AgreementReport {
        per_frame,
        savings_ratio,
        savings_ratio_with_init,
        init_macs: event_run.init_macs,
        overhead,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{convert_to_event, initialize};
    use crate::graph::LayerSpec;

    fn t(shape: &[usize], values: Vec<f32>) -> DenseTensor {
        DenseTensor::from_vec(shape, values).unwrap()
    }

    fn identity_graph() -> NetworkGraph {
        // input -> output; the event form is a single gate + accumulator,
        // i.e. one event neuron with f = identity
        NetworkGraph::from_layers(vec![
            LayerSpec::input("in", &[1]),
            LayerSpec::output("out", "in"),
        ])
        .unwrap()
    }

    fn small_cnn() -> NetworkGraph {
        let w1 = t(&[2, 1, 3, 3], (0..18).map(|i| ((i % 7) as f32 - 3.0) * 0.1).collect());
        let b1 = t(&[2], vec![0.05, -0.05]);
        let w2 = t(&[2, 2, 3, 3], (0..36).map(|i| ((i % 5) as f32 - 2.0) * 0.1).collect());
        NetworkGraph::from_layers(vec![
            LayerSpec::input("in", &[1, 6, 6]),
            LayerSpec::conv2d("c1", "in", w1, Some(b1), (1, 1), (1, 1)),
            LayerSpec::relu("r1", "c1"),
            LayerSpec::conv2d("c2", "r1", w2, None, (1, 1), (1, 1)),
            LayerSpec::output("out", "c2"),
        ])
        .unwrap()
    }

    fn video_from(frames: Vec<Vec<f32>>, shape: &[usize]) -> Vec<DenseTensor> {
        frames.into_iter().map(|v| t(shape, v)).collect()
    }

    #[test]
    fn conventional_identical_frames_identical_traces() {
        let g = small_cnn();
        let frame: Vec<f32> = (0..36).map(|i| (i as f32) / 40.0).collect();
        let video = video_from(vec![frame.clone(), frame], &[1, 6, 6]);
        let run = run_conventional(&g, &video).unwrap();
        assert_eq!(run.outputs[0], run.outputs[1]);
        assert_eq!(run.traces[0].total_macs(), run.traces[1].total_macs());
        // conventional traces carry zero overhead and zero transmissions
        for trace in &run.traces {
            for c in &trace.layers {
                assert_eq!(c.overhead_arith, 0);
                assert_eq!(c.mem_loads, 0);
                assert_eq!(c.transmissions, 0);
            }
        }
    }

    #[test]
    fn conventional_frame_shape_drift_is_error() {
        let g = small_cnn();
        let video = vec![
            DenseTensor::zeros(&[1, 6, 6]).unwrap(),
            DenseTensor::zeros(&[1, 5, 5]).unwrap(),
        ];
        assert!(matches!(run_conventional(&g, &video), Err(Error::Shape(_))));
    }

    #[test]
    fn single_frame_run_equals_initialization_flush() {
        let g = small_cnn();
        let eg = convert_to_event(&g, &PolicyConfig::threshold(0.05)).unwrap();
        let frame = t(&[1, 6, 6], (0..36).map(|i| (i as f32) / 50.0).collect());
        let state = initialize(&eg, &frame).unwrap();
        let flushed = state.accumulator(eg.output_accumulator()).unwrap().clone();
        let conv = run_conventional(&g, std::slice::from_ref(&frame)).unwrap();
        for (a, b) in flushed.values().iter().zip(conv.outputs[0].values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn event_run_requires_initialized_state_and_matching_frame0() {
        let g = small_cnn();
        let eg = convert_to_event(&g, &PolicyConfig::exact()).unwrap();
        let f0 = t(&[1, 6, 6], vec![0.25; 36]);
        let f1 = t(&[1, 6, 6], vec![0.5; 36]);
        let state = initialize(&eg, &f0).unwrap();
        // wrong frame 0
        let result = run_event(&eg, state, &[f1.clone(), f0.clone()], false);
        assert!(matches!(result, Err(Error::State(_))));
    }

    #[test]
    fn static_video_is_free_past_the_input_gate() {
        let g = small_cnn();
        let eg = convert_to_event(&g, &PolicyConfig::threshold(0.02)).unwrap();
        let frame = t(&[1, 6, 6], (0..36).map(|i| (i as f32) / 50.0).collect());
        let video = vec![frame.clone(); 5];
        let state = initialize(&eg, &frame).unwrap();
        let run = run_event(&eg, state, &video, false).unwrap();
        let input_gate = eg.node_index("in:gate").unwrap();
        for trace in &run.traces {
            assert_eq!(trace.total_macs(), 0, "static video must not touch linear layers");
            assert_eq!(trace.total_transmissions(), 0);
            // only input-gate updates and output reads are charged
            for (idx, c) in trace.layers.iter().enumerate() {
                if idx != input_gate {
                    assert_eq!(c.overhead_arith, 0, "node {}", eg.node(idx).name);
                    assert_eq!(c.mem_loads, 0);
                }
            }
        }
    }

    #[test]
    fn h_zero_event_matches_conventional() {
        let g = small_cnn();
        let eg = convert_to_event(&g, &PolicyConfig::exact()).unwrap();
        let mut video = Vec::new();
        for f in 0..6 {
            video.push(t(
                &[1, 6, 6],
                (0..36)
                    .map(|i| ((i + f) % 9) as f32 * 0.1 + if i == f { 0.4 } else { 0.0 })
                    .collect(),
            ));
        }
        let conv = run_conventional(&g, &video).unwrap();
        let state = initialize(&eg, &video[0]).unwrap();
        let ev = run_event(&eg, state, &video, false).unwrap();
        for (frame, (e, c)) in ev.outputs.iter().zip(&conv.outputs).enumerate() {
            for (x, y) in e.values().iter().zip(c.values()) {
                assert!(
                    (x - y).abs() < 1e-5,
                    "frame {frame}: event {x} vs conventional {y}"
                );
            }
        }
    }

    #[test]
    fn gate_touch_counters_follow_the_rules() {
        // identity network: one gate, one accumulator, one output
        let g = identity_graph();
        let eg = convert_to_event(&g, &PolicyConfig::threshold(0.1)).unwrap();
        let v0 = t(&[1], vec![0.0]);
        let state = initialize(&eg, &v0).unwrap();
        let mut ex = EventExecutor::new(&eg, state).unwrap();
        ex.step(&v0).unwrap();

        // frame 1: touched but below threshold -> 2 loads, 3 adds, 2 stores
        let (_, trace) = ex.step(&t(&[1], vec![0.05])).unwrap();
        let gate = eg.node_index("in:gate").unwrap();
        let c = trace.layers[gate];
        assert_eq!(c.mem_loads, 2);
        assert_eq!(c.overhead_arith, 3);
        assert_eq!(c.mem_stores, 2);
        assert_eq!(c.transmissions, 0);

        // frame 2: fires -> one extra load and store
        let (_, trace) = ex.step(&t(&[1], vec![0.5])).unwrap();
        let c = trace.layers[gate];
        assert_eq!(c.mem_loads, 3);
        assert_eq!(c.mem_stores, 3);
        assert_eq!(c.transmissions, 1);

        // downstream accumulator: 1 load, 1 add, 1 store on the fired update
        let acc = eg.output_accumulator();
        let c = trace.layers[acc];
        assert_eq!(c.mem_loads, 1);
        assert_eq!(c.overhead_arith, 1);
        assert_eq!(c.mem_stores, 1);
    }

    #[test]
    fn residual_bound_holds_after_every_frame() {
        let g = small_cnn();
        let eg = convert_to_event(&g, &PolicyConfig::threshold(0.05)).unwrap();
        let mut video = Vec::new();
        for f in 0..8 {
            video.push(t(
                &[1, 6, 6],
                (0..36).map(|i| ((i * 3 + f * 5) % 11) as f32 * 0.05).collect(),
            ));
        }
        let state = initialize(&eg, &video[0]).unwrap();
        let mut ex = EventExecutor::new(&eg, state).unwrap();
        for frame in &video {
            ex.step(frame).unwrap();
            assert!(
                ex.max_residual_excess() <= 0.0,
                "a gate neuron exceeded its threshold after a frame"
            );
        }
    }

    #[test]
    fn memory_identity_holds_under_instrumentation() {
        let g = small_cnn();
        let eg = convert_to_event(&g, &PolicyConfig::threshold(0.08)).unwrap();
        let mut video = Vec::new();
        for f in 0..8 {
            video.push(t(
                &[1, 6, 6],
                (0..36).map(|i| ((i * 7 + f * 3) % 13) as f32 * 0.04).collect(),
            ));
        }
        let state = initialize(&eg, &video[0]).unwrap();
        let mut ex = EventExecutor::new(&eg, state).unwrap().with_instrumentation();
        for frame in &video {
            ex.step(frame).unwrap();
            let violation = ex.memory_identity_violation().unwrap();
            assert!(violation < 1e-5, "b - d drifted from believed value: {violation}");
        }
    }

    #[test]
    fn ablated_gate_forgets_subthreshold_drift() {
        // identity neuron, delta threshold; gradual steps below h are lost
        let g = identity_graph();
        let eg = convert_to_event(&g, &PolicyConfig::threshold(0.1)).unwrap();
        let frames: Vec<DenseTensor> =
            (0..11).map(|i| t(&[1], vec![i as f32 * 0.02])).collect();
        let state = initialize(&eg, &frames[0]).unwrap();
        let ablated = run_event(&eg, state, &frames, true).unwrap();
        // never fires: every frame-to-frame step is 0.02 < 0.1
        let final_out = ablated.outputs.last().unwrap().get(0);
        assert_eq!(final_out, 0.0);

        let state = initialize(&eg, &frames[0]).unwrap();
        let retained = run_event(&eg, state, &frames, false).unwrap();
        // accumulated d crosses h and fires at least once
        let final_out = retained.outputs.last().unwrap().get(0);
        assert!(final_out > 0.0);
    }

    #[test]
    fn excluded_layer_stays_dense_and_exact() {
        let g = small_cnn();
        let excluded: std::collections::HashSet<String> = ["c2".to_string()].into();
        let eg = crate::event::convert_to_event_excluding(
            &g,
            &PolicyConfig::exact(),
            &std::collections::HashMap::new(),
            &excluded,
        )
        .unwrap();
        let mut video = Vec::new();
        for f in 0..5 {
            video.push(t(
                &[1, 6, 6],
                (0..36).map(|i| ((i * 5 + f * 7) % 9) as f32 * 0.1).collect(),
            ));
        }
        let conv = run_conventional(&g, &video).unwrap();
        let state = initialize(&eg, &video[0]).unwrap();
        let ev = run_event(&eg, state, &video, false).unwrap();
        for (e, c) in ev.outputs.iter().zip(&conv.outputs) {
            for (x, y) in e.values().iter().zip(c.values()) {
                assert!((x - y).abs() < 1e-5);
            }
        }
        // the excluded conv is charged its full dense cost every frame
        let c2 = eg.node_index("c2").unwrap();
        let dense_macs = 6 * 6 * 2 * (3 * 3 * 2) as u64;
        for trace in &ev.traces {
            assert_eq!(trace.layers[c2].macs, dense_macs);
        }
    }

    #[test]
    fn overhead_account_requires_baseline() {
        let g = identity_graph();
        let eg = convert_to_event(&g, &PolicyConfig::exact()).unwrap();
        assert!(matches!(
            overhead_account(&eg, &[], None),
            Err(Error::Report(_))
        ));
    }

    #[test]
    fn agreement_identity_and_uniform_offset() {
        let a = vec![t(&[2], vec![0.5, 1.0])];
        let m = agreement(&a, &a).unwrap();
        assert_eq!(m[0].rel_l2, 0.0);
        assert_eq!(m[0].linf, 0.0);
        assert!(m[0].psnr.is_infinite() && m[0].psnr > 0.0);

        // uniform 1e-3 difference on a unit-peak signal: PSNR = 60 dB
        let c = vec![t(&[4], vec![1.0, -1.0, 1.0, -1.0])];
        let e = vec![t(&[4], vec![1.001, -0.999, 1.001, -0.999])];
        let m = agreement(&e, &c).unwrap();
        assert!((m[0].psnr - 60.0).abs() < 0.01, "psnr {}", m[0].psnr);
    }

    #[test]
    fn agreement_shape_mismatch_is_error() {
        let a = vec![t(&[2], vec![0.0, 0.0])];
        let b = vec![t(&[3], vec![0.0, 0.0, 0.0])];
        assert!(matches!(agreement(&a, &b), Err(Error::Shape(_))));
    }
}
