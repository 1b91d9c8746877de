//! Plane frame finite elements: lattice geometry, Timoshenko element
//! stiffness, assembly, support elimination, line loads and static solves.

mod assembly;
mod element;
mod loads;
mod model;
mod section;

pub use assembly::{assemble, solve_static, GlobalSystem, StaticSolver};
pub use element::{element_stiffness, local_stiffness, MIN_ELEMENT_LENGTH};
pub use loads::{
    equivalent_nodal_loads, load_resultant, LoadCase, Scenario, UvlDirection, MAX_INTENSITY_KN,
    MIN_INTENSITY_KN,
};
pub use model::{
    build_lattice, build_lattice_with, dof, lattice_top_node, Element, FrameModel, Support,
    DOFS_PER_NODE, LATTICE_BAYS, LATTICE_NODES, OPEN_BAYS,
};
pub use section::MaterialSection;
