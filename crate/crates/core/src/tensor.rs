//! Dense tensors and sparse delta packets.
//!
//! `DenseTensor` carries every dense activation and weight in the crate:
//! a row-major `f32` buffer plus its shape. `DeltaPacket` is the sparse
//! differential update transmitted between layers in event mode: a sorted
//! coordinate list of `(flat_index, delta)` pairs with no zero entries, so
//! that every cost downstream stays linear in the number of updated values.
//!
//! Both types are immutable in normal use and safe to share between threads;
//! the engine mutates its own private state tensors through the explicit
//! `set`/`add` accessors.

use crate::error::{Error, Result};

/// Identifier of a node in a (base or event) graph.
///
/// Packets carry the id of the node that emitted them so that merges across
/// unrelated layers are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Row-major multi-dimensional array of `f32` values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    values: Vec<f32>,
}

impl DenseTensor {
    /// Tensor filled with a constant. Every extent must be at least 1.
    pub fn new(shape: &[usize], fill: f32) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::Shape("tensor shape must have at least one extent".into()));
        }
        if let Some(extent) = shape.iter().find(|&&e| e == 0) {
            let _ = extent;
            return Err(Error::Shape(format!("zero extent in shape {shape:?}")));
        }
        if !fill.is_finite() {
            return Err(Error::Shape(format!("non-finite fill value {fill}")));
        }
        let numel = shape.iter().product();
        Ok(Self { shape: shape.to_vec(), values: vec![fill; numel] })
    }

    /// Tensor from existing row-major values. Length must match the shape
    /// and all values must be finite.
    pub fn from_vec(shape: &[usize], values: Vec<f32>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Shape(format!("invalid shape {shape:?}")));
        }
        let numel: usize = shape.iter().product();
        if values.len() != numel {
            return Err(Error::Shape(format!(
                "shape {shape:?} implies {numel} values, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!(
                "non-finite value {} at flat index {pos}",
                values[pos]
            )));
        }
        Ok(Self { shape: shape.to_vec(), values })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::new(shape, 0.0)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, flat: usize) -> f32 {
        self.values[flat]
    }

    pub fn set(&mut self, flat: usize, value: f32) {
        self.values[flat] = value;
    }

    pub fn add(&mut self, flat: usize, delta: f32) {
        self.values[flat] += delta;
    }

    pub fn fill(&mut self, value: f32) {
        self.values.fill(value);
    }

    /// Largest absolute value, 0 for the degenerate all-zero tensor.
    pub fn max_abs(&self) -> f32 {
        self.values.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    /// True when every element is finite. State tensors are checked against
    /// this at frame boundaries.
    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Row-major strides for this shape.
    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

/// One sparse update: a flat index into the target tensor and the change
/// in value at that index. Never zero-valued inside a packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEntry {
    pub index: usize,
    pub value: f32,
}

/// Sparse set of differential updates transmitted between layers.
///
/// Entries are kept in strictly increasing index order with duplicates
/// summed and exact zeros dropped (a zero delta triggers no state change
/// anywhere, so storing it would only inflate operation counts).
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaPacket {
    pub layer_id: NodeId,
    pub frame_index: u64,
    entries: Vec<DeltaEntry>,
}

impl DeltaPacket {
    pub fn empty(layer_id: NodeId, frame_index: u64) -> Self {
        Self { layer_id, frame_index, entries: Vec::new() }
    }

    /// Build a packet from possibly unsorted, possibly duplicated entries.
    /// Duplicate indices are summed; exact zeros are dropped.
    pub fn from_entries(
        layer_id: NodeId,
        frame_index: u64,
        mut raw: Vec<DeltaEntry>,
    ) -> Self {
        raw.sort_by_key(|e| e.index);
        let mut entries: Vec<DeltaEntry> = Vec::with_capacity(raw.len());
        for e in raw {
            match entries.last_mut() {
                Some(last) if last.index == e.index => last.value += e.value,
                _ => entries.push(e),
            }
        }
        entries.retain(|e| e.value != 0.0);
        Self { layer_id, frame_index, entries }
    }

    /// Entry-wise difference `after - before`, keeping every element whose
    /// absolute change exceeds `eps`.
    pub fn from_diff(
        layer_id: NodeId,
        frame_index: u64,
        before: &DenseTensor,
        after: &DenseTensor,
        eps: f32,
    ) -> Result<Self> {
        if before.shape() != after.shape() {
            return Err(Error::Shape(format!(
                "diff between shapes {:?} and {:?}",
                before.shape(),
                after.shape()
            )));
        }
        if eps < 0.0 || !eps.is_finite() {
            return Err(Error::Config(format!("eps must be finite and >= 0, got {eps}")));
        }
        let entries = before
            .values()
            .iter()
            .zip(after.values())
            .enumerate()
            .filter_map(|(i, (b, a))| {
                let d = a - b;
                (d.abs() > eps).then_some(DeltaEntry { index: i, value: d })
            })
            .collect();
        Ok(Self { layer_id, frame_index, entries })
    }

    /// Entry-wise sum of two packets with identical metadata.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.layer_id != other.layer_id {
            return Err(Error::Routing(format!(
                "merge across layers {} and {}",
                self.layer_id, other.layer_id
            )));
        }
        if self.frame_index != other.frame_index {
            return Err(Error::Routing(format!(
                "merge across frames {} and {}",
                self.frame_index, other.frame_index
            )));
        }
        let mut raw = self.entries.clone();
        raw.extend_from_slice(&other.entries);
        Ok(Self::from_entries(self.layer_id, self.frame_index, raw))
    }

    pub fn entries(&self) -> &[DeltaEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Add every entry onto `target` in place.
    pub fn apply_to(&self, target: &mut DenseTensor) -> Result<()> {
        let numel = target.numel();
        for e in &self.entries {
            if e.index >= numel {
                return Err(Error::Shape(format!(
                    "delta index {} out of range for {numel} elements",
                    e.index
                )));
            }
            target.add(e.index, e.value);
        }
        Ok(())
    }

    /// Dense tensor of the given shape holding the packet values and zeros
    /// elsewhere. Used by linearity oracles in tests.
    pub fn materialize(&self, shape: &[usize]) -> Result<DenseTensor> {
        let mut out = DenseTensor::zeros(shape)?;
        self.apply_to(&mut out)?;
        Ok(out)
    }
}
