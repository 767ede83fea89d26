//! The assembled hand model: palm, five chains, loadcell sites.

use nalgebra::{Isometry3, Point3};
use serde::{Deserialize, Serialize};

use crate::chain::{FingerChain, FingerName};
use crate::error::ModelError;
use crate::joint::AxisLabel;

/// Which rigid body a point or contact belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BodyRef {
    /// A link of a finger chain: (chain index, link index).
    Link { chain: usize, link: usize },
    Palm,
}

impl BodyRef {
    pub fn describe(&self, hand: &HandModel) -> String {
        match self {
            BodyRef::Palm => "palm".to_string(),
            BodyRef::Link { chain, link } => {
                format!("{}[{}]", hand.chains[*chain].name, link)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteKind {
    Palm,
    Fingertip,
}

/// A single-axis loadcell site.
///
/// Palm sites are points in the palm frame; fingertip sites are points in
/// the distal link frame of their finger and move with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadcellSite {
    pub id: String,
    pub kind: SiteKind,
    pub body: BodyRef,
    pub position: Point3<f64>,
}

/// Flat palm geometry: a rectangular contact patch on the palmar face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalmGeometry {
    /// Palmar surface height above the palm frame origin, meters.
    pub surface_z: f64,
    /// Half extents of the palm rectangle in x and y, meters.
    pub half_extents: [f64; 2],
    /// Contact sample points in the palm frame.
    pub surface_samples: Vec<Point3<f64>>,
}

/// Identifies one DOF globally: (chain, joint, dof) plus cached spring data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofRef {
    pub chain: usize,
    pub joint: usize,
    pub dof: usize,
    pub name: String,
    pub axis_label: AxisLabel,
    pub stiffness: f64,
    pub rest_angle: f64,
    pub rom: [f64; 2],
}

/// Kinematic and elastic description of the whole hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandModel {
    /// World pose of the palm frame.
    pub palm_pose: Isometry3<f64>,
    pub palm: PalmGeometry,
    pub chains: Vec<FingerChain>,
    pub loadcells: Vec<LoadcellSite>,
    dof_index: Vec<DofRef>,
}

impl HandModel {
    pub fn new(
        palm_pose: Isometry3<f64>,
        palm: PalmGeometry,
        chains: Vec<FingerChain>,
        loadcells: Vec<LoadcellSite>,
    ) -> Result<Self, ModelError> {
        if chains.len() != 5 {
            return Err(ModelError::InvalidModel(format!(
                "hand must have 5 finger chains, got {}",
                chains.len()
            )));
        }
        let mut names: Vec<FingerName> = chains.iter().map(|c| c.name).collect();
        names.sort();
        names.dedup();
        if names.len() != 5 {
            return Err(ModelError::InvalidModel(
                "finger chain names must be the five distinct fingers".into(),
            ));
        }

        if loadcells.len() != 9 {
            return Err(ModelError::InvalidModel(format!(
                "hand must have 9 loadcell sites, got {}",
                loadcells.len()
            )));
        }
        let palm_sites = loadcells.iter().filter(|s| s.kind == SiteKind::Palm).count();
        let tip_sites = loadcells
            .iter()
            .filter(|s| s.kind == SiteKind::Fingertip)
            .count();
        if palm_sites != 4 || tip_sites != 5 {
            return Err(ModelError::InvalidModel(format!(
                "loadcell census must be 4 palm + 5 fingertip, got {palm_sites} + {tip_sites}"
            )));
        }
        for site in &loadcells {
            match (site.kind, site.body) {
                (SiteKind::Palm, BodyRef::Palm) => {}
                (SiteKind::Fingertip, BodyRef::Link { chain, link }) => {
                    let c = chains.get(chain).ok_or_else(|| {
                        ModelError::InvalidModel(format!(
                            "loadcell `{}` references missing chain {chain}",
                            site.id
                        ))
                    })?;
                    if link + 1 != c.links.len() {
                        return Err(ModelError::InvalidModel(format!(
                            "fingertip loadcell `{}` must sit on the distal link",
                            site.id
                        )));
                    }
                }
                _ => {
                    return Err(ModelError::InvalidModel(format!(
                        "loadcell `{}` kind does not match its body",
                        site.id
                    )));
                }
            }
        }

        let dof_index = build_dof_index(&chains);
        Ok(Self {
            palm_pose,
            palm,
            chains,
            loadcells,
            dof_index,
        })
    }

    /// Global DOF table ordered by (finger, joint, dof).
    pub fn dofs(&self) -> &[DofRef] {
        &self.dof_index
    }

    pub fn dof_count(&self) -> usize {
        self.dof_index.len()
    }

    /// Global index of a DOF addressed by chain/joint/dof position.
    pub fn dof_id(&self, chain: usize, joint: usize, dof: usize) -> Option<usize> {
        self.dof_index
            .iter()
            .position(|d| d.chain == chain && d.joint == joint && d.dof == dof)
    }

    /// Global index of a DOF addressed by name, e.g. `index/mp/abduction`.
    pub fn dof_id_by_name(&self, name: &str) -> Option<usize> {
        self.dof_index.iter().position(|d| d.name == name)
    }

    pub fn chain_index(&self, name: FingerName) -> Option<usize> {
        self.chains.iter().position(|c| c.name == name)
    }

    /// Loadcell sites attached to a given body, with their channel index.
    pub fn sites_on_body(&self, body: BodyRef) -> Vec<(usize, &LoadcellSite)> {
        self.loadcells
            .iter()
            .enumerate()
            .filter(|(_, s)| match (s.body, body) {
                (BodyRef::Palm, BodyRef::Palm) => true,
                // A finger is instrumented by its fingertip cell: any link
                // of the chain maps to that cell.
                (BodyRef::Link { chain: sc, .. }, BodyRef::Link { chain: bc, .. }) => sc == bc,
                _ => false,
            })
            .collect()
    }
}

fn build_dof_index(chains: &[FingerChain]) -> Vec<DofRef> {
    let mut out = Vec::new();
    for (ci, chain) in chains.iter().enumerate() {
        for (ji, joint) in chain.joints.iter().enumerate() {
            for (di, dof) in joint.dofs.iter().enumerate() {
                out.push(DofRef {
                    chain: ci,
                    joint: ji,
                    dof: di,
                    name: format!(
                        "{}/{}/{}",
                        chain.name,
                        joint.name,
                        dof.axis_label.as_str()
                    ),
                    axis_label: dof.axis_label,
                    stiffness: dof.base_stiffness(),
                    rest_angle: dof.rest_angle,
                    rom: dof.rom,
                });
            }
        }
    }
    out
}
