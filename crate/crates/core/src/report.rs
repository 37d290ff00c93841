//! Report emission and parsing: trace CSV, agreement CSV, run summary JSON,
//! sweep CSV, and the per-layer-depth cost profile.
//!
//! All emitters are pure string builders so outputs are byte-identical for
//! identical inputs. Non-finite floats serialize as the strings "inf",
//! "-inf", "nan" in JSON and as Rust's `Display` forms in CSV.

use serde_json::{json, Value};

use crate::engine::{AgreementReport, FrameAgreement, FrameTrace};
use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "frame,layer,macs,overhead_arith,mem_loads,mem_stores,transmissions";

/// Serialize per-frame, per-layer traces. `names` must be parallel to each
/// trace's layer counters.
pub fn trace_csv(names: &[String], traces: &[FrameTrace]) -> Result<String> {
    let mut out = String::new();
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for trace in traces {
        if trace.layers.len() != names.len() {
            return Err(Error::Report(format!(
                "frame {} has {} rows for {} layer names",
                trace.frame_index,
                trace.layers.len(),
                names.len()
            )));
        }
        for (name, c) in names.iter().zip(&trace.layers) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                trace.frame_index,
                name,
                c.macs,
                c.overhead_arith,
                c.mem_loads,
                c.mem_stores,
                c.transmissions
            ));
        }
    }
    Ok(out)
}

/// One parsed trace row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRow {
    pub frame: usize,
    pub layer: String,
    pub macs: u64,
    pub overhead_arith: u64,
    pub mem_loads: u64,
    pub mem_stores: u64,
    pub transmissions: u64,
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRACE_HEADER => {}
        other => {
            return Err(Error::Report(format!(
                "unexpected trace header {other:?}, want '{TRACE_HEADER}'"
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Report(format!("trace line {}: expected 7 fields", lineno + 2)));
        }
        let num = |s: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| Error::Report(format!("trace line {}: bad number '{s}'", lineno + 2)))
        };
        rows.push(TraceRow {
            frame: num(fields[0])? as usize,
            layer: fields[1].to_string(),
            macs: num(fields[2])?,
            overhead_arith: num(fields[3])?,
            mem_loads: num(fields[4])?,
            mem_stores: num(fields[5])?,
            transmissions: num(fields[6])?,
        });
    }
    Ok(rows)
}

pub fn agreement_csv(per_frame: &[FrameAgreement]) -> String {
    let mut out = String::from("frame,rel_l2,linf,psnr\n");
    for (i, m) in per_frame.iter().enumerate() {
        out.push_str(&format!("{},{},{},{}\n", i, m.rel_l2, m.linf, m.psnr));
    }
    out
}

/// JSON value for a float; non-finite values become strings so the document
/// stays valid JSON without losing the sentinel.
pub fn json_float(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

/// Run summary document. Optional sections are omitted when a mode did not
/// run.
pub fn summary_json(
    mode: &str,
    frames: usize,
    seed: u64,
    policy: Option<Value>,
    conventional_macs: Option<u64>,
    report: Option<&AgreementReport>,
) -> Value {
    let mut doc = serde_json::Map::new();
    doc.insert("mode".into(), json!(mode));
    doc.insert("frames".into(), json!(frames));
    doc.insert("seed".into(), json!(seed));
    if let Some(p) = policy {
        doc.insert("policy".into(), p);
    }
    if let Some(macs) = conventional_macs {
        doc.insert(
            "conventional".into(),
            json!({
                "total_macs": macs,
                "macs_per_frame": if frames > 0 { macs / frames as u64 } else { 0 },
            }),
        );
    }
    if let Some(r) = report {
        let o = &r.overhead;
        doc.insert(
            "event".into(),
            json!({
                "total_macs": o.event_macs,
                "init_macs": r.init_macs,
                "overhead_arith": o.overhead_arith,
                "mem_loads": o.overhead_mem_loads,
                "mem_stores": o.overhead_mem_stores,
                "transmissions": o.transmissions,
                "policy_evals": o.policy_evals,
                "buffer_loads": o.buffer_loads,
                "buffer_stores": o.buffer_stores,
                "output_read_loads": o.output_read_loads,
            }),
        );
        let n = r.per_frame.len().max(1) as f64;
        let mean_rel_l2 = r.per_frame.iter().map(|m| m.rel_l2).sum::<f64>() / n;
        let max_linf = r.per_frame.iter().map(|m| m.linf).fold(0.0f64, f64::max);
        // frames with bit-identical outputs report +inf PSNR; the mean is
        // taken over the finite frames so it stays informative
        let finite_psnr: Vec<f64> =
            r.per_frame.iter().map(|m| m.psnr).filter(|p| p.is_finite()).collect();
        let mean_psnr = if finite_psnr.is_empty() {
            f64::INFINITY
        } else {
            finite_psnr.iter().sum::<f64>() / finite_psnr.len() as f64
        };
        let min_psnr = r.per_frame.iter().map(|m| m.psnr).fold(f64::INFINITY, f64::min);
        let final_linf = r.per_frame.last().map(|m| m.linf).unwrap_or(0.0);
        doc.insert(
            "agreement".into(),
            json!({
                "savings_ratio": json_float(r.savings_ratio),
                "savings_ratio_with_init": json_float(r.savings_ratio_with_init),
                "arith_overhead_ratio": json_float(o.arith_ratio),
                "mem_overhead_ratio": json_float(o.mem_ratio),
                "macs_saved": o.macs_saved,
                "mean_rel_l2": json_float(mean_rel_l2),
                "max_linf": json_float(max_linf),
                "final_linf": json_float(final_linf),
                "mean_psnr": json_float(mean_psnr),
                "min_psnr": json_float(min_psnr),
            }),
        );
    }
    Value::Object(doc)
}

// --- Sweep ------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub label: String,
    pub savings_ratio: f64,
    pub savings_ratio_with_init: f64,
    pub event_macs: u64,
    pub conventional_macs: u64,
    pub mean_rel_l2: f64,
    pub max_linf: f64,
    pub mean_psnr: f64,
    pub arith_ratio: f64,
    pub mem_ratio: f64,
}

pub const SWEEP_HEADER: &str = "point,savings_ratio,savings_ratio_with_init,event_macs,conventional_macs,mean_rel_l2,max_linf,mean_psnr,arith_overhead_ratio,mem_overhead_ratio";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.label,
            r.savings_ratio,
            r.savings_ratio_with_init,
            r.event_macs,
            r.conventional_macs,
            r.mean_rel_l2,
            r.max_linf,
            r.mean_psnr,
            r.arith_ratio,
            r.mem_ratio
        ));
    }
    out
}

// --- Layer-depth profile -----------------------------------------------------

#[derive(Debug, Clone)]
pub struct LayerDepthRow {
    pub layer: String,
    pub depth: usize,
    /// 0 = shallow, 1 = middle, 2 = deep.
    pub group: usize,
    pub conventional_macs: u64,
    pub event_macs: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct TimeseriesRow {
    pub frame: usize,
    pub shallow_macs: u64,
    pub middle_macs: u64,
    pub deep_macs: u64,
    pub total_macs: u64,
}

#[derive(Debug, Clone)]
pub struct LayerReport {
    pub per_layer: Vec<LayerDepthRow>,
    pub timeseries: Vec<TimeseriesRow>,
}

impl LayerReport {
    pub fn group_mean_ratio(&self, group: usize) -> f64 {
        let rows: Vec<&LayerDepthRow> =
            self.per_layer.iter().filter(|r| r.group == group).collect();
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().map(|r| r.ratio).sum::<f64>() / rows.len() as f64
    }
}

/// Build the per-layer-depth cost profile from parsed conventional and event
/// trace rows. Depth is the order of first appearance among MAC-bearing
/// layers in the conventional trace; layers are grouped into
/// shallow/middle/deep thirds by depth.
pub fn layer_report(conventional: &[TraceRow], event: &[TraceRow]) -> Result<LayerReport> {
    if conventional.is_empty() || event.is_empty() {
        return Err(Error::Report("layer report requires traces from both modes".into()));
    }

    // depth order: first appearance of layers that ever spend MACs
    let mut order: Vec<String> = Vec::new();
    let mut conv_totals: std::collections::HashMap<String, u64> = Default::default();
    for row in conventional {
        *conv_totals.entry(row.layer.clone()).or_default() += row.macs;
    }
    for row in conventional {
        if conv_totals.get(&row.layer).copied().unwrap_or(0) > 0
            && !order.contains(&row.layer)
        {
            order.push(row.layer.clone());
        }
    }
    if order.is_empty() {
        return Err(Error::Report("conventional trace has no MAC-bearing layers".into()));
    }

    let mut event_totals: std::collections::HashMap<String, u64> = Default::default();
    let mut frames = 0usize;
    for row in event {
        *event_totals.entry(row.layer.clone()).or_default() += row.macs;
        frames = frames.max(row.frame + 1);
    }
    for layer in &order {
        if !event_totals.contains_key(layer) {
            return Err(Error::Report(format!(
                "event trace is missing layer '{layer}'; traces are from different graphs"
            )));
        }
    }

    let n = order.len();
    let group_of = |depth: usize| (depth * 3) / n;
    let per_layer: Vec<LayerDepthRow> = order
        .iter()
        .enumerate()
        .map(|(depth, layer)| {
            let conv = conv_totals[layer];
            let ev = event_totals.get(layer).copied().unwrap_or(0);
            LayerDepthRow {
                layer: layer.clone(),
                depth,
                group: group_of(depth),
                conventional_macs: conv,
                event_macs: ev,
                ratio: ev as f64 / conv as f64,
            }
        })
        .collect();

    let mut timeseries: Vec<TimeseriesRow> = (0..frames)
        .map(|frame| TimeseriesRow {
            frame,
            shallow_macs: 0,
            middle_macs: 0,
            deep_macs: 0,
            total_macs: 0,
        })
        .collect();
    for row in event {
        if let Some(depth) = order.iter().position(|l| l == &row.layer) {
            let ts = &mut timeseries[row.frame];
            match group_of(depth) {
                0 => ts.shallow_macs += row.macs,
                1 => ts.middle_macs += row.macs,
                _ => ts.deep_macs += row.macs,
            }
            ts.total_macs += row.macs;
        }
    }

    Ok(LayerReport { per_layer, timeseries })
}

pub const LAYER_REPORT_HEADER: &str = "layer,depth,group,conventional_macs,event_macs,ratio";

pub fn layer_report_csv(report: &LayerReport) -> String {
    let mut out = String::from(LAYER_REPORT_HEADER);
    out.push('\n');
    for r in &report.per_layer {
        let group = match r.group {
            0 => "shallow",
            1 => "middle",
            _ => "deep",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.layer, r.depth, group, r.conventional_macs, r.event_macs, r.ratio
        ));
    }
    out
}

pub const TIMESERIES_HEADER: &str = "frame,shallow_macs,middle_macs,deep_macs,total_macs";

pub fn timeseries_csv(report: &LayerReport) -> String {
    let mut out = String::from(TIMESERIES_HEADER);
    out.push('\n');
    for r in &report.timeseries {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.frame, r.shallow_macs, r.middle_macs, r.deep_macs, r.total_macs
        ));
    }
    out
}
