//! Point contacts between hand surface samples and scene objects.

use nalgebra::{Point3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::configuration::Configuration;
use crate::error::ModelError;
use crate::hand::{BodyRef, HandModel};
use crate::kinematics::{forward_kinematics, sample_points};
use crate::object::ObjectSet;

/// A resolved point contact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    /// Contact position on the object surface, world frame.
    pub position: Point3<f64>,
    /// Outward object normal at the contact.
    pub normal: Unit<Vector3<f64>>,
    /// Compressive normal force on the object boundary, N (>= 0).
    pub normal_force: f64,
    /// Friction force on the hand, world frame, orthogonal to `normal`.
    pub tangential_force: Vector3<f64>,
    /// Hand body carrying the contact.
    pub owner: BodyRef,
    /// Sample index within the owner body.
    pub sample: usize,
    /// Index of the object in the scene.
    pub object: usize,
    /// Gap to the object surface: max(0, signed distance).
    pub separation: f64,
    /// Friction coefficient at this contact (from the object).
    pub friction: f64,
}

impl ContactPoint {
    /// Coulomb cone satisfaction: |F_t| <= mu * F_n (+ slack tolerance).
    pub fn within_friction_cone(&self, tol: f64) -> bool {
        self.tangential_force.norm() <= self.friction * self.normal_force + tol
    }
}

/// Contacts in deterministic order: finger chains first (link, sample),
/// palm samples last, objects in scene order within a sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactSet {
    pub contacts: Vec<ContactPoint>,
}

impl ContactSet {
    pub fn len(&self) -> usize {
        self.contacts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contacts.is_empty()
    }

    pub fn total_normal_force(&self) -> f64 {
        self.contacts.iter().map(|c| c.normal_force).sum()
    }

    /// Net force the hand exerts on one object, world frame.
    pub fn force_on_object(&self, object: usize) -> Vector3<f64> {
        let mut f = Vector3::zeros();
        for c in self.contacts.iter().filter(|c| c.object == object) {
            f += -c.normal.into_inner() * c.normal_force - c.tangential_force;
        }
        f
    }
}

/// Geometric contact candidates: every surface sample within
/// `penetration_tol` of an object boundary (or inside it).
///
/// Candidates carry zero force; the equilibrium solver produces the
/// loaded contact set.
pub fn detect_contacts(
    hand: &HandModel,
    q: &Configuration,
    objects: &ObjectSet,
    penetration_tol: f64,
) -> Result<ContactSet, ModelError> {
    let fk = forward_kinematics(hand, q)?;
    let mut contacts = Vec::new();
    for (body, sample, p) in sample_points(hand, &fk) {
        for (oi, scene) in objects.iter().enumerate() {
            let (d, n) = scene.object.signed_distance(&p, &Vector3::zeros());
            if d <= penetration_tol {
                let surface = p - n.into_inner() * d;
                contacts.push(ContactPoint {
                    position: surface,
                    normal: n,
                    normal_force: 0.0,
                    tangential_force: Vector3::zeros(),
                    owner: body,
                    sample,
                    object: oi,
                    separation: d.max(0.0),
                    friction: scene.object.friction,
                });
            }
        }
    }
    Ok(ContactSet { contacts })
}
