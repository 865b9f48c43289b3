//! Interface-aligned 1D meshes with nested bisection.

use serde::{Deserialize, Serialize};

use super::Geometry;
use crate::error::{Error, Result};

pub const MAX_LEVEL: usize = 2;
pub const BASE_ELEMENTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Vacuum,
    Inlay,
}

/// Level-0 element counts per segment. Fixed across parameter points so that
/// dof vectors from different geometries line up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshTopology {
    pub left: usize,
    pub inlay: usize,
    pub right: usize,
}

impl MeshTopology {
    /// Distributes `base` elements proportionally to segment lengths.
    pub fn for_geometry(geom: &Geometry, base: usize) -> Self {
        let len = geom.total_len();
        let inlay = if geom.inlay_len > 0.0 {
            ((base as f64 * geom.inlay_len / len).round() as usize)
                .clamp(1, base.saturating_sub(2).max(1))
        } else {
            0
        };
        let rest = base.saturating_sub(inlay).max(2);
        let left = rest / 2;
        Self {
            left,
            inlay,
            right: rest - left,
        }
    }

    pub fn elements(&self) -> usize {
        self.left + self.inlay + self.right
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    level: usize,
    topology: MeshTopology,
    nodes: Vec<f64>,
    regions: Vec<Region>,
}

impl Mesh1D {
    pub fn new(geom: &Geometry, topology: MeshTopology) -> Result<Self> {
        geom.validate()?;
        if topology.left == 0 || topology.right == 0 {
            return Err(Error::InvalidInput(
                "mesh needs elements in both offsets".into(),
            ));
        }
        if topology.inlay > 0 && geom.inlay_len <= 0.0 {
            return Err(Error::DegenerateGeometry(
                "inlay elements on a zero-length inlay".into(),
            ));
        }
        if topology.inlay == 0 && geom.inlay_len > 0.0 {
            return Err(Error::InvalidInput(
                "mesh topology has no inlay elements".into(),
            ));
        }
        let [z1, z2] = geom.interfaces();
        let mut nodes = Vec::with_capacity(topology.elements() + 1);
        let mut regions = Vec::with_capacity(topology.elements());
        let mut push = |z0: f64, z1: f64, n: usize, r: Region, nodes: &mut Vec<f64>| {
            for i in 0..n {
                nodes.push(z0 + (z1 - z0) * i as f64 / n as f64);
                regions.push(r);
            }
        };
        push(0.0, z1, topology.left, Region::Vacuum, &mut nodes);
        push(z1, z2, topology.inlay, Region::Inlay, &mut nodes);
        push(
            z2,
            geom.total_len(),
            topology.right,
            Region::Vacuum,
            &mut nodes,
        );
        nodes.push(geom.total_len());
        Ok(Self {
            level: 0,
            topology,
            nodes,
            regions,
        })
    }

    pub fn at_level(geom: &Geometry, topology: MeshTopology, level: usize) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::MaxRefinement(MAX_LEVEL));
        }
        let mut m = Self::new(geom, topology)?;
        for _ in 0..level {
            m = m.refine()?;
        }
        Ok(m)
    }

    /// Bisects every element.
    pub fn refine(&self) -> Result<Self> {
        if self.level >= MAX_LEVEL {
            return Err(Error::MaxRefinement(MAX_LEVEL));
        }
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        let mut regions = Vec::with_capacity(2 * self.regions.len());
        for (w, r) in self.nodes.windows(2).zip(&self.regions) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
            regions.push(*r);
            regions.push(*r);
        }
        nodes.push(*self.nodes.last().expect("mesh has nodes"));
        Ok(Self {
            level: self.level + 1,
            topology: self.topology,
            nodes,
            regions,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn topology(&self) -> MeshTopology {
        self.topology
    }

    pub fn base_elements(&self) -> usize {
        self.topology.elements()
    }

    /// Element vertices in mm.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn element_count(&self) -> usize {
        self.regions.len()
    }

    pub fn dof_count(&self) -> usize {
        2 * self.element_count() + 1
    }

    /// `(z_left, z_right, region)` of element `e`.
    pub fn element(&self, e: usize) -> (f64, f64, Region) {
        (self.nodes[e], self.nodes[e + 1], self.regions[e])
    }
}
