use std::path::Path;

use serde::{Deserialize, Serialize};

use super::section::MaterialSection;
use crate::error::{Error, Result};

pub const DOFS_PER_NODE: usize = 3;

/// Number of nodes in the standard lattice.
pub const LATTICE_NODES: usize = 56;
/// Bays along the span; the bottom chord has one more node than this.
pub const LATTICE_BAYS: usize = 20;
/// Bays left without X-bracing. Mirror-symmetric about midspan.
pub const OPEN_BAYS: [usize; 6] = [3, 6, 9, 10, 13, 16];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Element {
    pub node_a: usize,
    pub node_b: usize,
    pub section: MaterialSection,
}

/// Constrained DOFs at one node, ordered `[u_x, u_y, r_z]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Support {
    pub node: usize,
    pub fixed: [bool; 3],
}

impl Support {
    pub fn hinge(node: usize) -> Self {
        Self {
            node,
            fixed: [true, true, false],
        }
    }

    pub fn roller(node: usize) -> Self {
        Self {
            node,
            fixed: [false, true, false],
        }
    }

    pub fn clamp(node: usize) -> Self {
        Self {
            node,
            fixed: [true, true, true],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameModel {
    pub span: f64,
    pub height: f64,
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<Element>,
    pub supports: Vec<Support>,
    /// Loaded chord, ordered by increasing x.
    pub bottom_chord: Vec<usize>,
}

#[inline]
pub fn dof(node: usize, var: usize) -> usize {
    node * DOFS_PER_NODE + var
}

impl FrameModel {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.nodes.len() * DOFS_PER_NODE
    }

    /// Global DOF indices fixed by supports, ascending.
    pub fn constrained_dofs(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .supports
            .iter()
            .flat_map(|s| {
                (0..DOFS_PER_NODE)
                    .filter(move |&v| s.fixed[v])
                    .map(move |v| dof(s.node, v))
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn free_dofs(&self) -> Vec<usize> {
        let constrained = self.constrained_dofs();
        (0..self.n_dofs())
            .filter(|d| constrained.binary_search(d).is_err())
            .collect()
    }

    /// Structural checks shared by every model.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.nodes.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Model("non-finite node coordinate".into()));
        }
        for (i, e) in self.elements.iter().enumerate() {
            if e.node_a >= n || e.node_b >= n {
                return Err(Error::Model(format!(
                    "element {i} references a missing node"
                )));
            }
            if e.node_a == e.node_b {
                return Err(Error::Model(format!(
                    "element {i} has coincident endpoints"
                )));
            }
            e.section.validate()?;
        }
        for s in &self.supports {
            if s.node >= n {
                return Err(Error::Model(format!("support at missing node {}", s.node)));
            }
        }
        if self.bottom_chord.iter().any(|&i| i >= n) {
            return Err(Error::Model(
                "bottom chord references a missing node".into(),
            ));
        }
        if self
            .bottom_chord
            .windows(2)
            .any(|w| self.nodes[w[1]][0] <= self.nodes[w[0]][0])
        {
            return Err(Error::Model(
                "bottom chord must be ordered by increasing x".into(),
            ));
        }
        Ok(())
    }

    /// Checks the counts the standard lattice must satisfy.
    pub fn validate_lattice(&self) -> Result<()> {
        self.validate()?;
        if self.nodes.len() != LATTICE_NODES {
            return Err(Error::Model(format!(
                "lattice must have {LATTICE_NODES} nodes, found {}",
                self.nodes.len()
            )));
        }
        if self.bottom_chord.len() != LATTICE_BAYS + 1 {
            return Err(Error::Model(format!(
                "bottom chord must have {} nodes",
                LATTICE_BAYS + 1
            )));
        }
        let pitch = self.span / LATTICE_BAYS as f64;
        for (k, &i) in self.bottom_chord.iter().enumerate() {
            let [x, y] = self.nodes[i];
            if y != 0.0 || (x - k as f64 * pitch).abs() > 1e-12 * self.span {
                return Err(Error::Model(format!(
                    "bottom chord node {i} is not at ({}, 0)",
                    k as f64 * pitch
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Builds the 56-node rigid-jointed truss.
///
/// Node order: 21 bottom-chord nodes (y = 0), 21 top-chord nodes
/// (y = `height`), then 14 mid-height web nodes. Every bay has a vertical at
/// each end; all bays except [`OPEN_BAYS`] are X-braced through a web node at
/// the bay centre. Hinge at the bottom-left node, roller at the bottom-right.
pub fn build_lattice(span: f64, height: f64) -> Result<FrameModel> {
    build_lattice_with(span, height, MaterialSection::steel_400x250())
}

pub fn build_lattice_with(span: f64, height: f64, section: MaterialSection) -> Result<FrameModel> {
    if !(span > 0.0 && height > 0.0 && span.is_finite() && height.is_finite()) {
        return Err(Error::Model(format!(
            "span and height must be positive, got {span} × {height}"
        )));
    }
    section.validate()?;
    let bays = LATTICE_BAYS;
    let pitch = span / bays as f64;
    let bottom = |i: usize| i;
    let top = |i: usize| bays + 1 + i;

    let mut nodes = Vec::with_capacity(LATTICE_NODES);
    nodes.extend((0..=bays).map(|i| [i as f64 * pitch, 0.0]));
    nodes.extend((0..=bays).map(|i| [i as f64 * pitch, height]));
    let braced: Vec<usize> = (0..bays).filter(|b| !OPEN_BAYS.contains(b)).collect();
    nodes.extend(
        braced
            .iter()
            .map(|&b| [(b as f64 + 0.5) * pitch, 0.5 * height]),
    );

    let el = |a, b| Element {
        node_a: a,
        node_b: b,
        section,
    };
    let mut elements = Vec::new();
    elements.extend((0..bays).map(|i| el(bottom(i), bottom(i + 1))));
    elements.extend((0..bays).map(|i| el(top(i), top(i + 1))));
    elements.extend((0..=bays).map(|i| el(bottom(i), top(i))));
    for (w, &b) in braced.iter().enumerate() {
        let web = 2 * (bays + 1) + w;
        elements.push(el(bottom(b), web));
        elements.push(el(web, top(b + 1)));
        elements.push(el(bottom(b + 1), web));
        elements.push(el(web, top(b)));
    }

    let model = FrameModel {
        span,
        height,
        nodes,
        elements,
        supports: vec![Support::hinge(bottom(0)), Support::roller(bottom(bays))],
        bottom_chord: (0..=bays).map(bottom).collect(),
    };
    model.validate_lattice()?;
    Ok(model)
}

/// Index of the top-chord node directly above bottom-chord position `i`.
pub fn lattice_top_node(i: usize) -> usize {
    LATTICE_BAYS + 1 + i
}
