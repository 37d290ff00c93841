//! Dual-mode neural inference engine.
//!
//! Runs small feed-forward DAG networks two ways: conventionally (dense,
//! per-frame recompute) and as event networks, where neurons keep state and
//! layers exchange sparse delta packets, so per-frame cost scales with the
//! amount of change in the input rather than its size. Both modes count
//! multiply-accumulates exactly, and event mode additionally accounts every
//! state-update, transmission, and policy operation, so the computation
//! savings and their overhead can be measured honestly.

pub mod demo;
pub mod engine;
pub mod error;
pub mod event;
pub mod graph;
pub mod io;
pub mod layers;
pub mod policy;
pub mod probe;
pub mod report;
pub mod scene;
pub mod tensor;

pub use engine::{
    agreement, build_agreement_report, overhead_account, run_conventional, run_event,
    AgreementReport, ConventionalRun, EventExecutor, EventRun, FrameAgreement, FrameTrace,
    LayerCounters, OverheadTotals,
};
pub use error::{Error, Result};
pub use event::{
    consistency_check, convert_to_event, convert_to_event_scaled, initialize, validate_placement,
    EventGraph, EventNode, EventNodeKind, EventState,
};
pub use graph::{GraphDoc, LayerKind, LayerParams, LayerSpec, NetworkGraph};
pub use policy::{PolicyConfig, PolicyDecision, PolicyKind};
pub use scene::{scene_generate, Background, SceneSpec, SpriteShape, SpriteSpec};
pub use tensor::{DeltaEntry, DeltaPacket, DenseTensor, NodeId};
