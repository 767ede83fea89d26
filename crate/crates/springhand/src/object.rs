//! Grasped objects: primitive shapes with signed-distance geometry.

use nalgebra::{Isometry3, Point3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Primitive object shapes. Cylinders and bars run along their local +Y
/// axis; the bar is capsule-ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Cylinder { radius: f64, length: f64 },
    Sphere { radius: f64 },
    Box { half_extents: [f64; 3] },
    Bar { radius: f64, length: f64 },
}

impl Shape {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = match self {
            Shape::Cylinder { radius, length } | Shape::Bar { radius, length } => {
                *radius > 0.0 && *length > 0.0
            }
            Shape::Sphere { radius } => *radius > 0.0,
            Shape::Box { half_extents } => half_extents.iter().all(|e| *e > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidModel(format!(
                "object shape has non-positive dimensions: {self:?}"
            )))
        }
    }

    /// Signed distance (negative inside) and outward surface normal for a
    /// point in the shape's local frame.
    fn signed_distance_local(&self, p: &Point3<f64>) -> (f64, Vector3<f64>) {
        match self {
            Shape::Sphere { radius } => {
                let r = p.coords.norm();
                if r < 1e-12 {
                    (-radius, Vector3::z())
                } else {
                    (r - radius, p.coords / r)
                }
            }
            Shape::Bar { radius, length } => {
                // Capsule: distance to the core segment minus the radius.
                let h = 0.5 * length;
                let y = p.y.clamp(-h, h);
                let closest = Vector3::new(0.0, y, 0.0);
                let d = p.coords - closest;
                let r = d.norm();
                if r < 1e-12 {
                    (-radius, Vector3::z())
                } else {
                    (r - radius, d / r)
                }
            }
            Shape::Cylinder { radius, length } => {
                let h = 0.5 * length;
                let rad = (p.x * p.x + p.z * p.z).sqrt();
                let dr = rad - radius;
                let dy = p.y.abs() - h;
                let radial = if rad < 1e-12 {
                    Vector3::x()
                } else {
                    Vector3::new(p.x / rad, 0.0, p.z / rad)
                };
                let cap = Vector3::new(0.0, p.y.signum(), 0.0);
                if dr <= 0.0 && dy <= 0.0 {
                    // Inside: nearest face wins.
                    if dr >= dy {
                        (dr, radial)
                    } else {
                        (dy, cap)
                    }
                } else if dr > 0.0 && dy > 0.0 {
                    let dist = (dr * dr + dy * dy).sqrt();
                    let n = (radial * dr + cap * dy) / dist;
                    (dist, n)
                } else if dr > 0.0 {
                    (dr, radial)
                } else {
                    (dy, cap)
                }
            }
            Shape::Box { half_extents } => {
                let h = Vector3::new(half_extents[0], half_extents[1], half_extents[2]);
                let q = Vector3::new(p.x.abs() - h.x, p.y.abs() - h.y, p.z.abs() - h.z);
                let signs = Vector3::new(
                    if p.x >= 0.0 { 1.0 } else { -1.0 },
                    if p.y >= 0.0 { 1.0 } else { -1.0 },
                    if p.z >= 0.0 { 1.0 } else { -1.0 },
                );
                let outside = Vector3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0));
                let out_norm = outside.norm();
                if out_norm > 0.0 {
                    let n = Vector3::new(
                        outside.x * signs.x,
                        outside.y * signs.y,
                        outside.z * signs.z,
                    ) / out_norm;
                    (out_norm, n)
                } else {
                    // Inside: exit through the closest face.
                    let (mut axis, mut best) = (0usize, q.x);
                    if q.y > best {
                        axis = 1;
                        best = q.y;
                    }
                    if q.z > best {
                        axis = 2;
                        best = q.z;
                    }
                    let mut n = Vector3::zeros();
                    n[axis] = signs[axis];
                    (best, n)
                }
            }
        }
    }
}

/// A rigid object in the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidObject {
    pub id: String,
    pub shape: Shape,
    pub pose: Isometry3<f64>,
    /// Coulomb friction coefficient against the hand surface.
    pub friction: f64,
}

impl RigidObject {
    pub fn new(
        id: impl Into<String>,
        shape: Shape,
        pose: Isometry3<f64>,
        friction: f64,
    ) -> Result<Self, ModelError> {
        shape.validate()?;
        if friction < 0.0 {
            return Err(ModelError::InvalidModel(format!(
                "friction coefficient must be non-negative, got {friction}"
            )));
        }
        Ok(Self {
            id: id.into(),
            shape,
            pose,
            friction,
        })
    }

    /// Signed distance and outward world normal for a world point, with
    /// the object displaced from its file pose by `offset`.
    pub fn signed_distance(
        &self,
        p_world: &Point3<f64>,
        offset: &Vector3<f64>,
    ) -> (f64, Unit<Vector3<f64>>) {
        let local = self.pose.inverse_transform_point(&(p_world - offset));
        let (d, n_local) = self.shape.signed_distance_local(&local);
        (d, Unit::new_normalize(self.pose.rotation * n_local))
    }
}

/// The objects of one scene, with per-object motion semantics for the
/// solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub object: RigidObject,
    /// Free objects translate to their own force balance; fixed objects
    /// are kinematic scenery.
    pub free: bool,
    /// External force applied to a free object, N (world frame).
    pub external_force: Vector3<f64>,
}

impl SceneObject {
    pub fn fixed(object: RigidObject) -> Self {
        Self {
            object,
            free: false,
            external_force: Vector3::zeros(),
        }
    }

    pub fn free(object: RigidObject) -> Self {
        Self {
            object,
            free: true,
            external_force: Vector3::zeros(),
        }
    }
}

/// Scene container.
pub type ObjectSet = Vec<SceneObject>;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Translation3;

    fn at_origin(shape: Shape) -> RigidObject {
        RigidObject::new("o", shape, Isometry3::identity(), 0.8).unwrap()
    }

    #[test]
    fn sphere_distance_and_normal() {
        let o = at_origin(Shape::Sphere { radius: 0.05 });
        let (d, n) = o.signed_distance(&Point3::new(0.1, 0.0, 0.0), &Vector3::zeros());
        assert_relative_eq!(d, 0.05, max_relative = 1e-12);
        assert_relative_eq!(n.x, 1.0, max_relative = 1e-12);
        let (d_in, _) = o.signed_distance(&Point3::new(0.03, 0.0, 0.0), &Vector3::zeros());
        assert_relative_eq!(d_in, -0.02, max_relative = 1e-12);
    }

    #[test]
    fn cylinder_side_and_cap() {
        let o = at_origin(Shape::Cylinder {
            radius: 0.02,
            length: 0.1,
        });
        let (d, n) = o.signed_distance(&Point3::new(0.05, 0.0, 0.0), &Vector3::zeros());
        assert_relative_eq!(d, 0.03, max_relative = 1e-12);
        assert_relative_eq!(n.x, 1.0, max_relative = 1e-12);
        let (d2, n2) = o.signed_distance(&Point3::new(0.0, 0.08, 0.0), &Vector3::zeros());
        assert_relative_eq!(d2, 0.03, max_relative = 1e-12);
        assert_relative_eq!(n2.y, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn bar_is_capsule_ended() {
        let o = at_origin(Shape::Bar {
            radius: 0.01,
            length: 0.1,
        });
        // Beyond the end: distance measured from the segment tip.
        let (d, _) = o.signed_distance(&Point3::new(0.0, 0.06, 0.0), &Vector3::zeros());
        assert_relative_eq!(d, 0.0, epsilon = 1e-12);
        let (d2, n2) = o.signed_distance(&Point3::new(0.0, 0.05 + 0.03, 0.0), &Vector3::zeros());
        assert_relative_eq!(d2, 0.02, max_relative = 1e-12);
        assert_relative_eq!(n2.y, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn box_face_edge_inside() {
        let o = at_origin(Shape::Box {
            half_extents: [0.01, 0.02, 0.03],
        });
        let (d, n) = o.signed_distance(&Point3::new(0.02, 0.0, 0.0), &Vector3::zeros());
        assert_relative_eq!(d, 0.01, max_relative = 1e-12);
        assert_relative_eq!(n.x, 1.0, max_relative = 1e-12);
        // Corner region: Euclidean distance to the corner.
        let (d2, _) = o.signed_distance(&Point3::new(0.02, 0.03, 0.0), &Vector3::zeros());
        assert_relative_eq!(d2, (0.01f64.powi(2) + 0.01f64.powi(2)).sqrt(), max_relative = 1e-12);
        // Inside: closest face is x.
        let (d3, n3) = o.signed_distance(&Point3::new(0.005, 0.0, 0.0), &Vector3::zeros());
        assert_relative_eq!(d3, -0.005, max_relative = 1e-12);
        assert_relative_eq!(n3.x, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn pose_and_offset_compose() {
        let o = RigidObject::new(
            "o",
            Shape::Sphere { radius: 0.01 },
            Isometry3::from_parts(Translation3::new(0.1, 0.0, 0.0), Default::default()),
            0.5,
        )
        .unwrap();
        let (d, _) = o.signed_distance(&Point3::new(0.13, 0.0, 0.0), &Vector3::new(0.01, 0.0, 0.0));
        // Object center effectively at 0.11.
        assert_relative_eq!(d, 0.01, max_relative = 1e-10);
    }

    #[test]
    fn bad_dimensions_rejected() {
        assert!(RigidObject::new(
            "o",
            Shape::Sphere { radius: 0.0 },
            Isometry3::identity(),
            0.5
        )
        .is_err());
        assert!(RigidObject::new(
            "o",
            Shape::Sphere { radius: 0.1 },
            Isometry3::identity(),
            -0.5
        )
        .is_err());
    }
}
