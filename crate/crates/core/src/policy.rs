//! Transmission policies: which gate neurons fire.
//!
//! A policy maps the accumulated-difference vector `d` of a gate, restricted
//! to the neurons touched this frame, to a fire mask. Policies are pure
//! functions and safe to evaluate concurrently across gates. Untouched
//! regions incur zero cost: evaluation only ever walks the touched set and
//! the chunks it intersects.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Threshold semantics with h pinned to 0: fire on any nonzero change.
    ExactH0,
    /// Isolated singular threshold: neuron i fires iff |d_i| > h_i.
    Threshold,
    /// Spatial chunks fire together when the chunk mean of |d| crosses the
    /// (scaled) threshold.
    ChunkedSpatial,
    /// Whole channels fire together.
    ChunkedChannel,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ExactH0 => "exact_h0",
            Self::Threshold => "threshold",
            Self::ChunkedSpatial => "chunked_spatial",
            Self::ChunkedChannel => "chunked_channel",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "exact_h0" => Self::ExactH0,
            "threshold" => Self::Threshold,
            "chunked_spatial" => Self::ChunkedSpatial,
            "chunked_channel" => Self::ChunkedChannel,
            _ => return None,
        })
    }
}

/// Policy configuration for one gate.
///
/// `channel_scale` holds optional per-channel positive scalars gamma with
/// thresholds applied as `h_i = h / gamma_c` (channel = dimension 0 of the
/// gated tensor). Chunked kinds refuse channel scaling: the combination is
/// undefined, so it is rejected rather than guessed.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub h: f32,
    /// Spatial chunk extents (rows, cols) over the trailing two dimensions.
    pub chunk: (usize, usize),
    pub channel_scale: Option<Vec<f32>>,
}

impl PolicyConfig {
    pub fn exact() -> Self {
        Self { kind: PolicyKind::ExactH0, h: 0.0, chunk: (1, 1), channel_scale: None }
    }

    pub fn threshold(h: f32) -> Self {
        Self { kind: PolicyKind::Threshold, h, chunk: (1, 1), channel_scale: None }
    }

    pub fn chunked_spatial(h: f32, chunk: (usize, usize)) -> Self {
        Self { kind: PolicyKind::ChunkedSpatial, h, chunk, channel_scale: None }
    }

    pub fn chunked_channel(h: f32) -> Self {
        Self { kind: PolicyKind::ChunkedChannel, h, chunk: (1, 1), channel_scale: None }
    }

    pub fn with_channel_scale(mut self, gamma: Vec<f32>) -> Self {
        self.channel_scale = Some(gamma);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.h.is_finite() || self.h < 0.0 {
            return Err(Error::Config(format!("threshold h must be finite and >= 0, got {}", self.h)));
        }
        if self.kind == PolicyKind::ExactH0 && self.h != 0.0 {
            return Err(Error::Config(format!("exact_h0 requires h == 0, got {}", self.h)));
        }
        if self.kind == PolicyKind::ChunkedSpatial && (self.chunk.0 == 0 || self.chunk.1 == 0) {
            return Err(Error::Config(format!("chunk extents must be >= 1, got {:?}", self.chunk)));
        }
        if let Some(gamma) = &self.channel_scale {
            if matches!(self.kind, PolicyKind::ChunkedSpatial | PolicyKind::ChunkedChannel) {
                return Err(Error::Config(
                    "channel scaling cannot be combined with chunked policies".into(),
                ));
            }
            if gamma.iter().any(|g| !g.is_finite() || *g <= 0.0) {
                return Err(Error::Config("channel scales must be finite and > 0".into()));
            }
        }
        Ok(())
    }

    /// Default chunk threshold scaling: `h / (ch*cw)^(1/4)`, i.e. `h/sqrt(k)`
    /// for square k x k chunks. The chunk mean averages several |d| values,
    /// so the threshold is reduced as the chunk grows. Channel chunks use
    /// `h` as given.
    pub fn effective_chunk_threshold(&self) -> f32 {
        match self.kind {
            PolicyKind::ChunkedSpatial => {
                self.h / ((self.chunk.0 * self.chunk.1) as f32).powf(0.25)
            }
            _ => self.h,
        }
    }
}

/// Outcome of one gate-level policy evaluation.
#[derive(Debug, Clone, Default)]
pub struct PolicyDecision {
    /// Sorted indices of the neurons selected to transmit.
    pub fired: Vec<usize>,
    /// Policy evaluations this frame: touched neurons for singular kinds,
    /// evaluated chunks for chunked kinds.
    pub policy_evals: u64,
    /// Arithmetic beyond the gate update itself. Singular kinds cost nothing
    /// extra (the |d|-h subtraction is one of the three per-neuron gate
    /// additions); chunked kinds charge chunk_len + 1 per evaluated chunk.
    pub extra_arith: u64,
    /// Memory loads beyond the gate update: chunked kinds read every stored
    /// d in an evaluated chunk.
    pub extra_loads: u64,
}

/// Evaluate a policy over the touched neurons of a gate.
///
/// `touched` must be sorted and in range; only touched indices (and, for
/// chunked kinds, the chunks containing them) are visited.
pub fn evaluate(cfg: &PolicyConfig, d: &DenseTensor, touched: &[usize]) -> Result<PolicyDecision> {
    cfg.validate()?;
    match cfg.kind {
        PolicyKind::ExactH0 | PolicyKind::Threshold => threshold_mask(cfg, d, touched),
        PolicyKind::ChunkedSpatial => chunked_spatial_mask(cfg, d, touched),
        PolicyKind::ChunkedChannel => chunked_channel_mask(cfg, d, touched),
    }
}

fn threshold_mask(cfg: &PolicyConfig, d: &DenseTensor, touched: &[usize]) -> Result<PolicyDecision> {
    let plane = d.numel() / d.shape()[0];
    if let Some(gamma) = &cfg.channel_scale {
        if gamma.len() != d.shape()[0] {
            return Err(Error::Config(format!(
                "channel scale has {} entries for {} channels",
                gamma.len(),
                d.shape()[0]
            )));
        }
    }
    let mut fired = Vec::new();
    for &i in touched {
        let h_i = match &cfg.channel_scale {
            Some(gamma) => cfg.h / gamma[i / plane],
            None => cfg.h,
        };
        // strict: H(0) is treated as no-fire
        if d.get(i).abs() > h_i {
            fired.push(i);
        }
    }
    Ok(PolicyDecision { fired, policy_evals: touched.len() as u64, extra_arith: 0, extra_loads: 0 })
}

/// Chunk geometry over the trailing two dimensions; leading dimensions are
/// independent planes. Rank-1 tensors chunk along their only dimension.
struct ChunkGrid {
    h: usize,
    w: usize,
    ch: usize,
    cw: usize,
    chunks_y: usize,
    chunks_x: usize,
}

impl ChunkGrid {
    fn new(shape: &[usize], chunk: (usize, usize)) -> Result<Self> {
        let (h, w) = match shape.len() {
            1 => (shape[0], 1),
            n => (shape[n - 2], shape[n - 1]),
        };
        let (ch, cw) = if shape.len() == 1 { (chunk.0 * chunk.1, 1) } else { chunk };
        if ch > h || cw > w {
            return Err(Error::Config(format!(
                "chunk {chunk:?} larger than spatial extent ({h}, {w})"
            )));
        }
        Ok(Self {
            h,
            w,
            ch,
            cw,
            chunks_y: h.div_ceil(ch),
            chunks_x: w.div_ceil(cw),
        })
    }
}

fn chunked_spatial_mask(
    cfg: &PolicyConfig,
    d: &DenseTensor,
    touched: &[usize],
) -> Result<PolicyDecision> {
    let grid = ChunkGrid::new(d.shape(), cfg.chunk)?;
    let plane = grid.h * grid.w;
    let h_eff = cfg.effective_chunk_threshold();

    // chunks containing at least one touched index
    let mut hit: Vec<usize> = touched
        .iter()
        .map(|&i| {
            let p = i / plane;
            let y = (i % plane) / grid.w;
            let x = i % grid.w;
            (p * grid.chunks_y + y / grid.ch) * grid.chunks_x + x / grid.cw
        })
        .collect();
    hit.sort_unstable();
    hit.dedup();

    let mut decision = PolicyDecision::default();
    for chunk_id in hit {
        let cx = chunk_id % grid.chunks_x;
        let cy = (chunk_id / grid.chunks_x) % grid.chunks_y;
        let p = chunk_id / (grid.chunks_x * grid.chunks_y);
        let y_end = ((cy + 1) * grid.ch).min(grid.h);
        let x_end = ((cx + 1) * grid.cw).min(grid.w);

        let mut sum = 0.0f32;
        let mut members = Vec::new();
        for y in cy * grid.ch..y_end {
            for x in cx * grid.cw..x_end {
                let idx = p * plane + y * grid.w + x;
                sum += d.get(idx).abs();
                members.push(idx);
            }
        }
        let mean = sum / members.len() as f32;
        decision.policy_evals += 1;
        decision.extra_arith += members.len() as u64 + 1;
        decision.extra_loads += members.len() as u64;
        if mean > h_eff {
            decision.fired.extend(members);
        }
    }
    decision.fired.sort_unstable();
    Ok(decision)
}

fn chunked_channel_mask(
    cfg: &PolicyConfig,
    d: &DenseTensor,
    touched: &[usize],
) -> Result<PolicyDecision> {
    let plane = d.numel() / d.shape()[0];
    let mut hit: Vec<usize> = touched.iter().map(|&i| i / plane).collect();
    hit.sort_unstable();
    hit.dedup();

    let mut decision = PolicyDecision::default();
    for c in hit {
        let mut sum = 0.0f32;
        for i in c * plane..(c + 1) * plane {
            sum += d.get(i).abs();
        }
        let mean = sum / plane as f32;
        decision.policy_evals += 1;
        decision.extra_arith += plane as u64 + 1;
        decision.extra_loads += plane as u64;
        if mean > cfg.h {
            decision.fired.extend(c * plane..(c + 1) * plane);
        }
    }
    Ok(decision)
}
