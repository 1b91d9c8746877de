//! Unstacked DeepONet: branch and trunk MLPs joined by a grouped dot product
//! plus a per-output bias. Multiple output functions are handled either by
//! splitting one network's final layer into groups or by one independent
//! network per output.

mod file;
mod mlp;
mod network;
mod params;
mod spec;

pub use file::{ModelFile, ModelManifest};
pub use mlp::{backward_batch, forward_batch, mlp_forward, standalone_slots, MlpCache};
pub use network::{combine, ForwardCache, MemberCache, Network};
pub use params::{init, DeepONetParams, LayerSlot, Layout, MemberLayout};
pub use spec::{Activation, DeepONetSpec, MlpSpec, Strategy};
