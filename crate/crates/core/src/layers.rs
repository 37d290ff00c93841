//! Layer execution in both modes.
//!
//! Every layer kind runs dense (conventional, full recompute) and the LINEAR
//! kinds additionally run sparse: a delta packet in, a delta packet out,
//! touching only the receptive fan-out of each incoming entry. Nonlinear
//! kinds are handled by point recomputation (`relu`) or buffered window
//! recomputation (`max_pool`).
//!
//! MAC counting is exact and part of the contract:
//! - dense conv: output elements x kernel fan-in (padding positions count,
//!   as in the conventional definition)
//! - dense fully-connected: N x M
//! - sparse linear: one MAC per scalar multiplication actually performed,
//!   i.e. the sum over input entries of their valid fan-out
//! - relu / max_pool / add / concat: zero MACs in both modes; their event
//!   costs are charged as arithmetic overhead by the engine

use crate::error::{Error, Result};
use crate::graph::{conv_out_extent, LayerKind, LayerParams, LayerSpec};
use crate::tensor::{strides_of, DeltaEntry, DenseTensor};

/// Exact MACs of one dense application of a layer.
pub fn mac_count(
    kind: &LayerKind,
    params: &LayerParams,
    in_shapes: &[&[usize]],
    out_shape: &[usize],
) -> u64 {
    let out_elems: u64 = out_shape.iter().product::<usize>() as u64;
    match (kind, params) {
        (LayerKind::Conv2d, LayerParams::Conv2d { weight, .. }) => {
            let w = weight.shape();
            out_elems * (w[1] * w[2] * w[3]) as u64
        }
        (LayerKind::FullyConnected, LayerParams::FullyConnected { weight, .. }) => {
            let w = weight.shape();
            (w[0] * w[1]) as u64
        }
        (LayerKind::AvgPool, LayerParams::Pool { window, .. }) => {
            out_elems * (window.0 * window.1) as u64
        }
        (LayerKind::Affine, _) => out_elems,
        _ => {
            let _ = in_shapes;
            0
        }
    }
}

/// Dense forward pass of a single layer. Returns the output tensor and the
/// exact MAC count.
pub fn dense_forward(spec: &LayerSpec, inputs: &[&DenseTensor]) -> Result<(DenseTensor, u64)> {
    let out = match (&spec.kind, &spec.params) {
        (LayerKind::Output, _) | (LayerKind::Input, _) => inputs
            .first()
            .map(|t| (*t).clone())
            .ok_or_else(|| Error::Shape(format!("layer '{}' got no input tensor", spec.id)))?,
        (LayerKind::Relu, _) => {
            let x = inputs[0];
            DenseTensor::from_vec(
                x.shape(),
                x.values().iter().map(|&v| v.max(0.0)).collect(),
            )?
        }
        (LayerKind::Conv2d, LayerParams::Conv2d { weight, bias, stride, padding }) => {
            dense_conv2d(spec, inputs[0], weight, bias.as_ref(), *stride, *padding)?
        }
        (LayerKind::FullyConnected, LayerParams::FullyConnected { weight, bias }) => {
            let x = inputs[0];
            let (m, n) = (weight.shape()[0], weight.shape()[1]);
            if x.numel() != n {
                return Err(Error::Shape(format!(
                    "layer '{}': expected {n} inputs, got {}",
                    spec.id,
                    x.numel()
                )));
            }
            let mut out = vec![0.0f32; m];
            for (j, o) in out.iter_mut().enumerate() {
                let mut sum = bias.as_ref().map_or(0.0, |b| b.get(j));
                for i in 0..n {
                    sum += weight.get(j * n + i) * x.get(i);
                }
                *o = sum;
            }
            DenseTensor::from_vec(&[m], out)?
        }
        (LayerKind::AvgPool, LayerParams::Pool { window, stride }) => {
            dense_pool(spec, inputs[0], *window, *stride, PoolMode::Avg)?
        }
        (LayerKind::MaxPool, LayerParams::Pool { window, stride }) => {
            dense_pool(spec, inputs[0], *window, *stride, PoolMode::Max)?
        }
        (LayerKind::Affine, LayerParams::Affine { scale, shift }) => {
            let x = inputs[0];
            let plane = x.numel() / x.shape()[0];
            let values = x
                .values()
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let c = i / plane;
                    scale.get(c) * v + shift.as_ref().map_or(0.0, |s| s.get(c))
                })
                .collect();
            DenseTensor::from_vec(x.shape(), values)?
        }
        (LayerKind::Add, _) => {
            let first = inputs[0];
            for t in &inputs[1..] {
                if t.shape() != first.shape() {
                    return Err(Error::Shape(format!(
                        "layer '{}': add input shapes disagree",
                        spec.id
                    )));
                }
            }
            let mut values = first.values().to_vec();
            for t in &inputs[1..] {
                for (o, v) in values.iter_mut().zip(t.values()) {
                    *o += v;
                }
            }
            DenseTensor::from_vec(first.shape(), values)?
        }
        (LayerKind::Concat, LayerParams::Concat { axis }) => dense_concat(spec, inputs, *axis)?,
        _ => {
            return Err(Error::Schema(format!(
                "layer '{}': params do not match kind {}",
                spec.id,
                spec.kind.name()
            )))
        }
    };
    let in_shapes: Vec<&[usize]> = inputs.iter().map(|t| t.shape()).collect();
    let macs = mac_count(&spec.kind, &spec.params, &in_shapes, out.shape());
    Ok((out, macs))
}

fn dense_conv2d(
    spec: &LayerSpec,
    x: &DenseTensor,
    weight: &DenseTensor,
    bias: Option<&DenseTensor>,
    stride: (usize, usize),
    padding: (usize, usize),
) -> Result<DenseTensor> {
    let (c_in, h, w) = shape3(x.shape(), &spec.id)?;
    let ws = weight.shape();
    let (c_out, wc_in, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
    if wc_in != c_in {
        return Err(Error::Shape(format!(
            "layer '{}': weight expects {wc_in} channels, input has {c_in}",
            spec.id
        )));
    }
    let oh = conv_out_extent(h, kh, stride.0, padding.0)
        .ok_or_else(|| Error::Shape(format!("layer '{}': empty conv output", spec.id)))?;
    let ow = conv_out_extent(w, kw, stride.1, padding.1)
        .ok_or_else(|| Error::Shape(format!("layer '{}': empty conv output", spec.id)))?;

    let mut out = vec![0.0f32; c_out * oh * ow];
    for co in 0..c_out {
        let bias_val = bias.map_or(0.0, |b| b.get(co));
        for oy in 0..oh {
            for ox in 0..ow {
                let mut sum = bias_val;
                for ci in 0..c_in {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * stride.0 + ky) as isize - padding.0 as isize;
                            let ix = (ox * stride.1 + kx) as isize - padding.1 as isize;
                            if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                let xv = x.get((ci * h + iy as usize) * w + ix as usize);
                                let wv = weight.get(((co * c_in + ci) * kh + ky) * kw + kx);
                                sum += wv * xv;
                            }
                        }
                    }
                }
                out[(co * oh + oy) * ow + ox] = sum;
            }
        }
    }
    DenseTensor::from_vec(&[c_out, oh, ow], out)
}

enum PoolMode {
    Avg,
    Max,
}

fn dense_pool(
    spec: &LayerSpec,
    x: &DenseTensor,
    window: (usize, usize),
    stride: (usize, usize),
    mode: PoolMode,
) -> Result<DenseTensor> {
    let (c, h, w) = shape3(x.shape(), &spec.id)?;
    let oh = conv_out_extent(h, window.0, stride.0, 0)
        .ok_or_else(|| Error::Shape(format!("layer '{}': empty pool output", spec.id)))?;
    let ow = conv_out_extent(w, window.1, stride.1, 0)
        .ok_or_else(|| Error::Shape(format!("layer '{}': empty pool output", spec.id)))?;
    let mut out = vec![0.0f32; c * oh * ow];
    let norm = 1.0 / (window.0 * window.1) as f32;
    for ci in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = match mode {
                    PoolMode::Avg => 0.0f32,
                    PoolMode::Max => f32::NEG_INFINITY,
                };
                for wy in 0..window.0 {
                    for wx in 0..window.1 {
                        let v = x.get((ci * h + oy * stride.0 + wy) * w + ox * stride.1 + wx);
                        match mode {
                            PoolMode::Avg => acc += v,
                            PoolMode::Max => acc = acc.max(v),
                        }
                    }
                }
                out[(ci * oh + oy) * ow + ox] = match mode {
                    PoolMode::Avg => acc * norm,
                    PoolMode::Max => acc,
                };
            }
        }
    }
    DenseTensor::from_vec(&[c, oh, ow], out)
}

fn dense_concat(spec: &LayerSpec, inputs: &[&DenseTensor], axis: usize) -> Result<DenseTensor> {
    let rank = inputs[0].shape().len();
    if axis >= rank {
        return Err(Error::Shape(format!("layer '{}': concat axis out of range", spec.id)));
    }
    let mut out_shape = inputs[0].shape().to_vec();
    out_shape[axis] = inputs.iter().map(|t| t.shape()[axis]).sum();
    let mut out = DenseTensor::zeros(&out_shape)?;
    let out_strides = strides_of(&out_shape);
    let mut axis_offset = 0usize;
    for t in inputs {
        let in_strides = t.strides();
        for (flat, &v) in t.values().iter().enumerate() {
            let mut rem = flat;
            let mut out_flat = 0usize;
            for d in 0..rank {
                let mut coord = rem / in_strides[d];
                rem %= in_strides[d];
                if d == axis {
                    coord += axis_offset;
                }
                out_flat += coord * out_strides[d];
            }
            out.set(out_flat, v);
        }
        axis_offset += t.shape()[axis];
    }
    Ok(out)
}

/// Sparse forward through a LINEAR layer: the homogeneous-linear image of the
/// incoming deltas (bias terms excluded, they cancel in differences).
///
/// `inputs` holds one entry slice per upstream edge, parallel to
/// `in_shapes`. Returns canonicalized output entries and the exact number of
/// scalar multiplications performed.
pub fn delta_forward_linear(
    spec: &LayerSpec,
    inputs: &[&[DeltaEntry]],
    in_shapes: &[&[usize]],
    out_shape: &[usize],
) -> Result<(Vec<DeltaEntry>, u64)> {
    if !spec.kind.is_linear() {
        return Err(Error::Classification(format!(
            "layer '{}' ({}) is not LINEAR; delta forward undefined",
            spec.id,
            spec.kind.name()
        )));
    }
    for (entries, shape) in inputs.iter().zip(in_shapes) {
        let numel: usize = shape.iter().product();
        if let Some(e) = entries.iter().find(|e| e.index >= numel) {
            return Err(Error::Shape(format!(
                "layer '{}': delta index {} out of range for input of {numel}",
                spec.id, e.index
            )));
        }
    }

    let mut raw: Vec<DeltaEntry> = Vec::new();
    let mut macs = 0u64;
    match (&spec.kind, &spec.params) {
        (LayerKind::Conv2d, LayerParams::Conv2d { weight, stride, padding, .. }) => {
            let (c_in, h, w) = shape3(in_shapes[0], &spec.id)?;
            let (c_out, oh, ow) = shape3(out_shape, &spec.id)?;
            let ws = weight.shape();
            let (kh, kw) = (ws[2], ws[3]);
            let _ = (h, c_in);
            for e in inputs[0] {
                let (ci, iy, ix) = unflatten3(e.index, in_shapes[0]);
                let (oy_lo, oy_hi) = covered_range(iy, kh, stride.0, padding.0, oh);
                let (ox_lo, ox_hi) = covered_range(ix, kw, stride.1, padding.1, ow);
                for oy in oy_lo..oy_hi {
                    let ky = iy + padding.0 - oy * stride.0;
                    for ox in ox_lo..ox_hi {
                        let kx = ix + padding.1 - ox * stride.1;
                        for co in 0..c_out {
                            let wv = weight.get(((co * c_in + ci) * kh + ky) * kw + kx);
                            raw.push(DeltaEntry {
                                index: (co * oh + oy) * ow + ox,
                                value: wv * e.value,
                            });
                            macs += 1;
                        }
                    }
                }
                let _ = w;
            }
        }
        (LayerKind::FullyConnected, LayerParams::FullyConnected { weight, .. }) => {
            let (m, n) = (weight.shape()[0], weight.shape()[1]);
            for e in inputs[0] {
                for j in 0..m {
                    raw.push(DeltaEntry { index: j, value: weight.get(j * n + e.index) * e.value });
                    macs += 1;
                }
            }
        }
        (LayerKind::AvgPool, LayerParams::Pool { window, stride }) => {
            let (_c, _h, _w) = shape3(in_shapes[0], &spec.id)?;
            let (_co, oh, ow) = shape3(out_shape, &spec.id)?;
            let norm = 1.0 / (window.0 * window.1) as f32;
            for e in inputs[0] {
                let (ci, iy, ix) = unflatten3(e.index, in_shapes[0]);
                let (oy_lo, oy_hi) = covered_range(iy, window.0, stride.0, 0, oh);
                let (ox_lo, ox_hi) = covered_range(ix, window.1, stride.1, 0, ow);
                for oy in oy_lo..oy_hi {
                    for ox in ox_lo..ox_hi {
                        raw.push(DeltaEntry {
                            index: (ci * oh + oy) * ow + ox,
                            value: norm * e.value,
                        });
                        macs += 1;
                    }
                }
            }
        }
        (LayerKind::Affine, LayerParams::Affine { scale, .. }) => {
            let plane: usize = in_shapes[0].iter().product::<usize>() / in_shapes[0][0];
            for e in inputs[0] {
                raw.push(DeltaEntry { index: e.index, value: scale.get(e.index / plane) * e.value });
                macs += 1;
            }
        }
        (LayerKind::Add, _) => {
            for entries in inputs {
                raw.extend_from_slice(entries);
            }
        }
        (LayerKind::Concat, LayerParams::Concat { axis }) => {
            let out_strides = strides_of(out_shape);
            let mut axis_offset = 0usize;
            for (entries, shape) in inputs.iter().zip(in_shapes) {
                let in_strides = strides_of(shape);
                for e in *entries {
                    let mut rem = e.index;
                    let mut out_flat = 0usize;
                    for d in 0..shape.len() {
                        let mut coord = rem / in_strides[d];
                        rem %= in_strides[d];
                        if d == *axis {
                            coord += axis_offset;
                        }
                        out_flat += coord * out_strides[d];
                    }
                    raw.push(DeltaEntry { index: out_flat, value: e.value });
                }
                axis_offset += shape[*axis];
            }
        }
        _ => {
            return Err(Error::Schema(format!(
                "layer '{}': params do not match kind {}",
                spec.id,
                spec.kind.name()
            )))
        }
    }
    Ok((canonicalize(raw), macs))
}

/// Sort by index, coalesce entries hitting the same output, drop exact zeros.
/// Coalescing keeps downstream recomputation at one visit per touched neuron.
pub fn canonicalize(mut raw: Vec<DeltaEntry>) -> Vec<DeltaEntry> {
    raw.sort_by_key(|e| e.index);
    let mut out: Vec<DeltaEntry> = Vec::with_capacity(raw.len());
    for e in raw {
        match out.last_mut() {
            Some(last) if last.index == e.index => last.value += e.value,
            _ => out.push(e),
        }
    }
    out.retain(|e| e.value != 0.0);
    out
}

/// Pointwise functions that can be recomputed per touched index.
#[derive(Debug, Clone)]
pub enum PointwiseFn {
    Relu,
    /// Per-channel scale and shift treated as an activation; `plane` is the
    /// number of elements per channel.
    Affine { scale: Vec<f32>, shift: Vec<f32>, plane: usize },
}

impl PointwiseFn {
    pub fn apply(&self, index: usize, v: f32) -> f32 {
        match self {
            Self::Relu => v.max(0.0),
            Self::Affine { scale, shift, plane } => {
                let c = index / plane;
                scale[c] * v + shift[c]
            }
        }
    }
}

/// Recompute a pointwise function only at touched indices. Cost: one
/// arithmetic op per index.
pub fn pointwise_recompute(
    f: &PointwiseFn,
    updates: &[(usize, f32)],
) -> (Vec<(usize, f32)>, u64) {
    let out = updates.iter().map(|&(i, v)| (i, f.apply(i, v))).collect();
    (out, updates.len() as u64)
}

/// Output window indices affected by the touched input indices of a pooling
/// layer, deduplicated and sorted.
pub fn pool_touched_windows(
    window: (usize, usize),
    stride: (usize, usize),
    in_shape: &[usize],
    out_shape: &[usize],
    touched: &[usize],
) -> Result<Vec<usize>> {
    let numel: usize = in_shape.iter().product();
    let (_c, oh, ow) = shape3(out_shape, "pool")?;
    let mut windows = Vec::new();
    for &idx in touched {
        if idx >= numel {
            return Err(Error::Shape(format!("touched index {idx} outside buffer of {numel}")));
        }
        let (ci, iy, ix) = unflatten3(idx, in_shape);
        let (oy_lo, oy_hi) = covered_range(iy, window.0, stride.0, 0, oh);
        let (ox_lo, ox_hi) = covered_range(ix, window.1, stride.1, 0, ow);
        for oy in oy_lo..oy_hi {
            for ox in ox_lo..ox_hi {
                windows.push((ci * oh + oy) * ow + ox);
            }
        }
    }
    windows.sort_unstable();
    windows.dedup();
    Ok(windows)
}

/// Recompute max pooling over the given output windows from the buffered
/// input. Returns `(window index, new max)` updates and the comparison count
/// (one per window element read).
pub fn maxpool_recompute(
    window: (usize, usize),
    stride: (usize, usize),
    buffer: &DenseTensor,
    out_shape: &[usize],
    windows: &[usize],
) -> Result<(Vec<(usize, f32)>, u64)> {
    let (_c, h, w) = shape3(buffer.shape(), "max_pool buffer")?;
    let (_co, oh, ow) = shape3(out_shape, "max_pool")?;
    let mut updates = Vec::with_capacity(windows.len());
    let mut comparisons = 0u64;
    for &widx in windows {
        let (ci, oy, ox) = unflatten3(widx, out_shape);
        let _ = oh;
        let mut m = f32::NEG_INFINITY;
        for wy in 0..window.0 {
            for wx in 0..window.1 {
                let iy = oy * stride.0 + wy;
                let ix = ox * stride.1 + wx;
                if iy >= h || ix >= w {
                    return Err(Error::Shape(format!(
                        "window {widx} reads ({iy},{ix}) outside buffer {h}x{w}"
                    )));
                }
                m = m.max(buffer.get((ci * h + iy) * w + ix));
                comparisons += 1;
            }
        }
        updates.push(((ci * oh + oy) * ow + ox, m));
        let _ = ow;
    }
    Ok((updates, comparisons))
}

/// Event-mode max pooling as a standalone operation: apply the incoming
/// deltas to the buffer, then recompute every window containing a touched
/// index.
pub fn maxpool_event(
    spec: &LayerSpec,
    buffer: &mut DenseTensor,
    din: &[DeltaEntry],
    out_shape: &[usize],
) -> Result<(Vec<(usize, f32)>, u64)> {
    let (window, stride) = match &spec.params {
        LayerParams::Pool { window, stride } => (*window, *stride),
        _ => {
            return Err(Error::Schema(format!("layer '{}': not a pooling layer", spec.id)));
        }
    };
    let numel = buffer.numel();
    for e in din {
        if e.index >= numel {
            return Err(Error::Shape(format!(
                "layer '{}': delta index {} outside buffer of {numel}",
                spec.id, e.index
            )));
        }
        buffer.add(e.index, e.value);
    }
    let touched: Vec<usize> = din.iter().map(|e| e.index).collect();
    let in_shape = buffer.shape().to_vec();
    let windows = pool_touched_windows(window, stride, &in_shape, out_shape, &touched)?;
    maxpool_recompute(window, stride, buffer, out_shape, &windows)
}

fn shape3(shape: &[usize], what: &str) -> Result<(usize, usize, usize)> {
    if shape.len() != 3 {
        return Err(Error::Shape(format!("{what}: expected rank-3 (C,H,W), got {shape:?}")));
    }
    Ok((shape[0], shape[1], shape[2]))
}

pub(crate) fn unflatten3(idx: usize, shape: &[usize]) -> (usize, usize, usize) {
    let (h, w) = (shape[1], shape[2]);
    (idx / (h * w), (idx / w) % h, idx % w)
}

/// Half-open range `lo..hi` of output coordinates whose window covers input
/// coordinate `i`, respecting stride and padding.
fn covered_range(i: usize, kernel: usize, stride: usize, padding: usize, out_extent: usize) -> (usize, usize) {
    let hi_num = i + padding;
    let lo_num = hi_num.saturating_sub(kernel - 1);
    let lo = lo_num.div_ceil(stride);
    let hi = (hi_num / stride + 1).min(out_extent);
    if lo >= hi {
        (0, 0)
    } else {
        (lo, hi)
    }
}
