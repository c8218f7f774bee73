//! Monodomain three-variable Fenton–Karma solver.

pub mod diffusion;
pub mod params;
pub mod reaction;
pub mod sink;
pub mod solver;
pub mod stimulus;

pub use diffusion::{diffusion_term, DiffusionOperator};
pub use params::FkParams;
pub use reaction::{currents, reaction_rates, Currents, Rates};
pub use sink::{
    load_vm_stack, read_vm_frame, read_vm_manifest, FnSink, FrameInfo, FrameSink, MemorySink,
    NullSink, Tee, VmStackManifest, VmStackWriter,
};
pub use solver::{run, step, RunSummary, SimConfig, SimState, Simulator};
pub use stimulus::{Rect, StimulusProtocol};
