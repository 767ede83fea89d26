//! Tendon routing: actuators, branched paths, junctions and the
//! variable-rigidity law.
//!
//! Tension spreads from each actuator through its branch tree. A ring
//! connector is a frictionless pulley: both children carry the parent
//! tension. A knot is a rigid junction: child tensions satisfy planar
//! force balance over the branch angles.

use nalgebra::{DVector, Matrix2xX, Vector2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::configuration::Configuration;
use crate::error::ModelError;
use crate::hand::HandModel;
use crate::joint::AxisLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActuatorGroup {
    /// Wrist actuators are represented but inert; the wrist pose is an
    /// input, not a solved quantity.
    Wrist,
    Hand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActuatorMode {
    /// Command is a wire tension in N.
    TensionCommanded,
    /// Command is a reel-in length in m; tension builds through the
    /// actuator's series stiffness when the commanded reel-in exceeds
    /// what the joints have yielded.
    LengthCommanded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actuator {
    pub id: String,
    pub group: ActuatorGroup,
    pub mode: ActuatorMode,
    /// Largest tension any branch of this actuator may carry before the
    /// connection is considered failed, N.
    pub tension_capacity: f64,
    /// Reel-in range, m.
    pub excursion_limits: [f64; 2],
}

/// One joint crossing of a tendon path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    /// Global DOF name, e.g. `index/mp/flexion`.
    pub dof: String,
    /// Signed moment arm, m. Positive tension produces `arm * T` torque.
    pub moment_arm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathTerminal {
    /// Insertion point label on the skeleton.
    Anchor(String),
    /// The path feeds a junction that splits it onward.
    Junction(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TendonPath {
    pub id: String,
    pub actuator: String,
    pub segments: Vec<PathSegment>,
    pub terminal: PathTerminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JunctionKind {
    Ring,
    Knot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchJunction {
    pub id: String,
    pub kind: JunctionKind,
    pub parent: String,
    pub children: Vec<String>,
    /// Signed angle of each child direction from the parent direction,
    /// rad. Knots only; empty for rings.
    pub branch_angles: Vec<f64>,
}

/// Geometry of the antagonistic interossei pair used by the
/// variable-rigidity law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidityGeometry {
    /// Lateral offset of the pair from the MP abduction axis, m.
    pub moment_arm: f64,
    /// Free wire span across the joint, m.
    pub free_span: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TendonNetwork {
    pub actuators: Vec<Actuator>,
    pub paths: Vec<TendonPath>,
    pub junctions: Vec<BranchJunction>,
    /// The single actuator driving the palmar/dorsal interossei tree.
    pub rigidity_actuator: String,
    pub rigidity_geometry: RigidityGeometry,
    /// Series stiffness used by length-commanded actuators, N/m.
    pub actuator_stiffness: f64,
}

/// Variable rigidity of an abduction DOF under antagonist tension:
/// k_eff = base + 2 T r^2 / L (taut-string lateral stiffening).
pub fn effective_abduction_stiffness(
    base: f64,
    interossei_tension: f64,
    geometry: &RigidityGeometry,
) -> Result<f64, ModelError> {
    if interossei_tension < 0.0 {
        return Err(ModelError::SlackViolation(interossei_tension));
    }
    if !(geometry.moment_arm > 0.0) || !(geometry.free_span > 0.0) {
        return Err(ModelError::InvalidModel(format!(
            "rigidity geometry must be positive (r = {}, L = {})",
            geometry.moment_arm, geometry.free_span
        )));
    }
    Ok(base + 2.0 * interossei_tension * geometry.moment_arm * geometry.moment_arm
        / geometry.free_span)
}

impl TendonPath {
    /// Wire reel-in produced by a configuration change from rest:
    /// sum of arm * (q - rest) over the crossed DOFs.
    pub fn excursion(&self, hand: &HandModel, q: &Configuration) -> Result<f64, ModelError> {
        q.check_shape(hand)?;
        let mut total = 0.0;
        for seg in &self.segments {
            let gid = hand.dof_id_by_name(&seg.dof).ok_or_else(|| {
                ModelError::NetworkConsistency(format!(
                    "path `{}` references unknown dof `{}`",
                    self.id, seg.dof
                ))
            })?;
            total += seg.moment_arm * (q[gid] - hand.dofs()[gid].rest_angle);
        }
        Ok(total)
    }

    /// Joint torques produced by this path carrying `tension`:
    /// tau[dof] = arm * tension on each crossed DOF, zero elsewhere.
    pub fn joint_torques_from_tension(
        &self,
        hand: &HandModel,
        tension: f64,
    ) -> Result<DVector<f64>, ModelError> {
        if tension < 0.0 {
            return Err(ModelError::SlackViolation(tension));
        }
        let mut tau = DVector::zeros(hand.dof_count());
        for seg in &self.segments {
            let gid = hand.dof_id_by_name(&seg.dof).ok_or_else(|| {
                ModelError::NetworkConsistency(format!(
                    "path `{}` references unknown dof `{}`",
                    self.id, seg.dof
                ))
            })?;
            tau[gid] += seg.moment_arm * tension;
        }
        Ok(tau)
    }
}

/// Tension share of each child of a knot for unit parent tension.
///
/// Solves the planar force balance at the junction: along the parent
/// direction the child components sum to the parent tension, laterally
/// they cancel. With more than two children the minimum-norm balanced
/// solution is used; parallel symmetric children split evenly.
fn knot_shares(junction: &BranchJunction) -> Result<Vec<f64>, ModelError> {
    let n = junction.children.len();
    let mut a = Matrix2xX::zeros(n);
    for (i, th) in junction.branch_angles.iter().enumerate() {
        a[(0, i)] = th.cos();
        a[(1, i)] = th.sin();
    }
    let b = Vector2::new(1.0, 0.0);
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(&b, 1e-12)
        .map_err(|e| ModelError::NetworkConsistency(e.to_string()))?;
    let residual = (&a * &x - b).norm();
    if residual > 1e-9 {
        return Err(ModelError::JunctionInfeasible {
            junction: junction.id.clone(),
        });
    }
    let mut shares = Vec::with_capacity(n);
    for v in x.iter() {
        if *v < -1e-9 {
            return Err(ModelError::JunctionInfeasible {
                junction: junction.id.clone(),
            });
        }
        shares.push(v.max(0.0));
    }
    Ok(shares)
}

/// Per-path tensions for one set of actuator tensions.
///
/// Returns `(path id, tension)` for every path in declaration order.
pub fn distribute_tension(
    network: &TendonNetwork,
    actuator_tensions: &BTreeMap<String, f64>,
) -> Result<Vec<(String, f64)>, ModelError> {
    for (id, t) in actuator_tensions {
        if *t < 0.0 {
            return Err(ModelError::SlackViolation(*t));
        }
        if network.actuators.iter().all(|a| &a.id != id) {
            return Err(ModelError::NetworkConsistency(format!(
                "tension given for unknown actuator `{id}`"
            )));
        }
    }
    let factors = network.tension_factors()?;
    Ok(network
        .paths
        .iter()
        .map(|p| {
            let t_act = actuator_tensions.get(&p.actuator).copied().unwrap_or(0.0);
            (p.id.clone(), t_act * factors[&p.id])
        })
        .collect())
}

/// Structural diagnostics over the network graph.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NetworkDiagnostics {
    pub errors: Vec<String>,
    pub actuator_count: usize,
    pub wrist_actuator_count: usize,
    pub hand_actuator_count: usize,
    pub rigidity_actuator_count: usize,
    pub path_count: usize,
    pub junction_count: usize,
}

impl NetworkDiagnostics {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

impl TendonNetwork {
    fn path(&self, id: &str) -> Option<&TendonPath> {
        self.paths.iter().find(|p| p.id == id)
    }

    fn junction(&self, id: &str) -> Option<&BranchJunction> {
        self.junctions.iter().find(|j| j.id == id)
    }

    /// Tension share of every path relative to its actuator's tension.
    ///
    /// Roots carry factor 1; rings copy the parent factor to both
    /// children; knots scale by the force-balance shares.
    pub fn tension_factors(&self) -> Result<BTreeMap<String, f64>, ModelError> {
        let mut factors: BTreeMap<String, f64> = BTreeMap::new();
        for root in self.root_paths() {
            self.propagate(root, 1.0, &mut factors, 0)?;
        }
        for p in &self.paths {
            if !factors.contains_key(&p.id) {
                return Err(ModelError::NetworkConsistency(format!(
                    "path `{}` is not reachable from any actuator root",
                    p.id
                )));
            }
        }
        Ok(factors)
    }

    fn propagate(
        &self,
        path: &TendonPath,
        factor: f64,
        factors: &mut BTreeMap<String, f64>,
        depth: usize,
    ) -> Result<(), ModelError> {
        if depth > self.paths.len() {
            return Err(ModelError::NetworkConsistency(
                "junction graph contains a cycle".into(),
            ));
        }
        if factors.insert(path.id.clone(), factor).is_some() {
            return Err(ModelError::NetworkConsistency(format!(
                "path `{}` reached twice; junction graph is not a forest",
                path.id
            )));
        }
        if let PathTerminal::Junction(jid) = &path.terminal {
            let j = self.junction(jid).ok_or_else(|| {
                ModelError::NetworkConsistency(format!(
                    "path `{}` terminates at unknown junction `{jid}`",
                    path.id
                ))
            })?;
            let shares = match j.kind {
                JunctionKind::Ring => vec![1.0; j.children.len()],
                JunctionKind::Knot => knot_shares(j)?,
            };
            for (child_id, share) in j.children.iter().zip(shares) {
                let child = self.path(child_id).ok_or_else(|| {
                    ModelError::NetworkConsistency(format!(
                        "junction `{}` references unknown child `{child_id}`",
                        j.id
                    ))
                })?;
                self.propagate(child, factor * share, factors, depth + 1)?;
            }
        }
        Ok(())
    }

    /// Paths that are no junction's child: the actuator-side roots.
    pub fn root_paths(&self) -> Vec<&TendonPath> {
        self.paths
            .iter()
            .filter(|p| {
                self.junctions
                    .iter()
                    .all(|j| j.children.iter().all(|c| c != &p.id))
            })
            .collect()
    }

    pub fn actuator(&self, id: &str) -> Option<&Actuator> {
        self.actuators.iter().find(|a| a.id == id)
    }

    /// Leaf paths (anchored, not junction-fed) of one actuator, with
    /// their tension factors.
    pub fn leaves_of(&self, actuator: &str) -> Result<Vec<(&TendonPath, f64)>, ModelError> {
        let factors = self.tension_factors()?;
        Ok(self
            .paths
            .iter()
            .filter(|p| p.actuator == actuator && matches!(p.terminal, PathTerminal::Anchor(_)))
            .map(|p| (p, factors[&p.id]))
            .collect())
    }

    /// Structural validation: junction arity and angle lists, DOF
    /// references, reachability/cycles, census counters. Reports
    /// diagnostics instead of failing.
    pub fn validate(&self, hand: &HandModel) -> NetworkDiagnostics {
        let mut d = NetworkDiagnostics {
            actuator_count: self.actuators.len(),
            wrist_actuator_count: self
                .actuators
                .iter()
                .filter(|a| a.group == ActuatorGroup::Wrist)
                .count(),
            hand_actuator_count: self
                .actuators
                .iter()
                .filter(|a| a.group == ActuatorGroup::Hand)
                .count(),
            rigidity_actuator_count: self
                .actuators
                .iter()
                .filter(|a| a.id == self.rigidity_actuator)
                .count(),
            path_count: self.paths.len(),
            junction_count: self.junctions.len(),
            ..Default::default()
        };

        if d.rigidity_actuator_count != 1 {
            d.errors.push(format!(
                "rigidity actuator `{}` matches {} actuators, expected exactly 1",
                self.rigidity_actuator, d.rigidity_actuator_count
            ));
        }

        for p in &self.paths {
            if self.actuator(&p.actuator).is_none() {
                d.errors
                    .push(format!("path `{}` references unknown actuator `{}`", p.id, p.actuator));
            }
            for s in &p.segments {
                if hand.dof_id_by_name(&s.dof).is_none() {
                    d.errors
                        .push(format!("path `{}` references unknown dof `{}`", p.id, s.dof));
                }
                if s.moment_arm == 0.0 {
                    d.errors.push(format!(
                        "path `{}` lists dof `{}` with zero moment arm; omit the segment instead",
                        p.id, s.dof
                    ));
                }
            }
        }

        for j in &self.junctions {
            match j.kind {
                JunctionKind::Ring => {
                    if j.children.len() != 2 {
                        d.errors.push(format!(
                            "ring junction `{}` must have exactly 2 children, got {}",
                            j.id,
                            j.children.len()
                        ));
                    }
                    if !j.branch_angles.is_empty() {
                        d.errors.push(format!(
                            "ring junction `{}` must not carry branch angles",
                            j.id
                        ));
                    }
                }
                JunctionKind::Knot => {
                    if j.children.len() < 2 {
                        d.errors.push(format!(
                            "knot junction `{}` must have at least 2 children, got {}",
                            j.id,
                            j.children.len()
                        ));
                    }
                    if j.branch_angles.len() != j.children.len() {
                        d.errors.push(format!(
                            "knot junction `{}` needs one branch angle per child",
                            j.id
                        ));
                    }
                }
            }
            match self.path(&j.parent) {
                None => d
                    .errors
                    .push(format!("junction `{}` has unknown parent path `{}`", j.id, j.parent)),
                Some(p) => {
                    if p.terminal != PathTerminal::Junction(j.id.clone()) {
                        d.errors.push(format!(
                            "junction `{}` parent path `{}` does not terminate at it",
                            j.id, j.parent
                        ));
                    }
                    for c in &j.children {
                        if let Some(cp) = self.path(c) {
                            if cp.actuator != p.actuator {
                                d.errors.push(format!(
                                    "junction `{}` mixes actuators `{}` and `{}`",
                                    j.id, p.actuator, cp.actuator
                                ));
                            }
                        } else {
                            d.errors
                                .push(format!("junction `{}` has unknown child path `{c}`", j.id));
                        }
                    }
                }
            }
        }

        // Reachability / forest shape, including cycles.
        if let Err(e) = self.tension_factors() {
            d.errors.push(e.to_string());
        }

        // The rigidity tree must reach the MP abduction DOF of all four
        // fingers.
        let mut reached: Vec<String> = Vec::new();
        for p in self
            .paths
            .iter()
            .filter(|p| p.actuator == self.rigidity_actuator)
        {
            for s in &p.segments {
                if let Some(gid) = hand.dof_id_by_name(&s.dof) {
                    let dof = &hand.dofs()[gid];
                    if dof.axis_label == AxisLabel::Abduction {
                        reached.push(s.dof.clone());
                    }
                }
            }
        }
        for finger in ["index", "middle", "ring", "little"] {
            let dof = format!("{finger}/mp/abduction");
            if !reached.contains(&dof) {
                d.errors.push(format!(
                    "rigidity actuator tree does not reach `{dof}`"
                ));
            }
        }

        d
    }
}

/// Standalone form of the network diagnostics operation.
pub fn validate_network(network: &TendonNetwork, hand: &HandModel) -> NetworkDiagnostics {
    network.validate(hand)
}
