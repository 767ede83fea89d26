//! Forward kinematics of the finger chains.

use nalgebra::{Isometry3, Matrix3xX, Point3, Translation3, Unit, UnitQuaternion, Vector3};

use crate::configuration::Configuration;
use crate::error::ModelError;
use crate::hand::{BodyRef, HandModel};

/// World placement of every link plus the data needed for point Jacobians.
#[derive(Debug, Clone)]
pub struct FkResult {
    /// Link frames per chain; `link_poses[c][l]` is the frame whose origin
    /// is joint l of chain c, +Y along the link.
    pub link_poses: Vec<Vec<Isometry3<f64>>>,
    /// World fingertip positions, one per chain.
    pub fingertips: Vec<Point3<f64>>,
    /// World positions of the 9 loadcell sites, in channel order.
    pub loadcell_positions: Vec<Point3<f64>>,
    /// Per global DOF: instantaneous world rotation axis and joint origin.
    pub dof_axes: Vec<(Unit<Vector3<f64>>, Point3<f64>)>,
}

impl FkResult {
    /// World position of a point given in the frame of `body`.
    pub fn body_point(&self, hand: &HandModel, body: BodyRef, local: &Point3<f64>) -> Point3<f64> {
        match body {
            BodyRef::Palm => hand.palm_pose * local,
            BodyRef::Link { chain, link } => self.link_poses[chain][link] * local,
        }
    }

    /// Jacobian of a world point attached to `body` with respect to all
    /// hand DOFs (3 x n). Columns for DOFs that do not move the body are
    /// zero.
    pub fn point_jacobian(
        &self,
        hand: &HandModel,
        body: BodyRef,
        world_point: &Point3<f64>,
    ) -> Matrix3xX<f64> {
        let n = hand.dof_count();
        let mut jac = Matrix3xX::zeros(n);
        if let BodyRef::Link { chain, link } = body {
            for (gid, dof) in hand.dofs().iter().enumerate() {
                if dof.chain == chain && dof.joint <= link {
                    let (axis, origin) = &self.dof_axes[gid];
                    let col = axis.cross(&(world_point - origin));
                    jac.set_column(gid, &col);
                }
            }
        }
        jac
    }
}

/// Compose link frames for every chain; returns poses, fingertips,
/// loadcell world positions and per-DOF axis data.
pub fn forward_kinematics(hand: &HandModel, q: &Configuration) -> Result<FkResult, ModelError> {
    q.check_shape(hand)?;

    let mut link_poses = Vec::with_capacity(hand.chains.len());
    let mut fingertips = Vec::with_capacity(hand.chains.len());
    let mut dof_axes = Vec::with_capacity(hand.dof_count());

    let mut gid = 0usize;
    for chain in &hand.chains {
        let mut frame = hand.palm_pose * chain.base;
        let mut poses = Vec::with_capacity(chain.links.len());
        for (ji, joint) in chain.joints.iter().enumerate() {
            for dof in &joint.dofs {
                // Instantaneous axis before this DOF's own rotation.
                let world_axis = Unit::new_normalize(frame.rotation * dof.axis.into_inner());
                let origin = Point3::from(frame.translation.vector);
                dof_axes.push((world_axis, origin));
                let rot = UnitQuaternion::from_axis_angle(&dof.axis, q[gid]);
                frame *= Isometry3::from_parts(Translation3::identity(), rot);
                gid += 1;
            }
            poses.push(frame);
            frame *= Translation3::new(0.0, chain.links[ji].length, 0.0);
        }
        fingertips.push(Point3::from(frame.translation.vector));
        link_poses.push(poses);
    }

    let mut fk = FkResult {
        link_poses,
        fingertips,
        loadcell_positions: Vec::new(),
        dof_axes,
    };
    fk.loadcell_positions = hand
        .loadcells
        .iter()
        .map(|s| fk.body_point(hand, s.body, &s.position))
        .collect();
    Ok(fk)
}

/// All contact sample points in world coordinates, deterministically
/// ordered: finger chains in declaration order (link index, then sample
/// index within the link), palm samples last.
pub fn sample_points(hand: &HandModel, fk: &FkResult) -> Vec<(BodyRef, usize, Point3<f64>)> {
    let mut out = Vec::new();
    for (ci, chain) in hand.chains.iter().enumerate() {
        for (li, link) in chain.links.iter().enumerate() {
            let body = BodyRef::Link {
                chain: ci,
                link: li,
            };
            for (si, p) in link.surface_samples.iter().enumerate() {
                out.push((body, si, fk.body_point(hand, body, p)));
            }
        }
    }
    for (si, p) in hand.palm.surface_samples.iter().enumerate() {
        out.push((BodyRef::Palm, si, hand.palm_pose * p));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{FingerChain, FingerName, Link};
    use crate::defaults;
    use crate::hand::{HandModel, LoadcellSite, PalmGeometry, SiteKind};
    use crate::joint::{AxisLabel, DofSpec, JointSpec};
    use crate::spring::SpringArrangement;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn flexion_dof(rom: [f64; 2]) -> DofSpec {
        DofSpec::new(
            AxisLabel::Flexion,
            SpringArrangement::single(443.0).unwrap(),
            0.0,
            rom,
            Vector3::x(),
        )
        .unwrap()
    }

    /// A hand with one real planar finger (3 joints along +Y, flexing
    /// about +X) and four stub fingers so the census holds.
    fn planar_test_hand(lengths: [f64; 3]) -> HandModel {
        let mut chains = Vec::new();
        for name in FingerName::ALL {
            let (joints, links) = if name == FingerName::Index {
                let joints = vec![
                    JointSpec::new(
                        "mp",
                        vec![
                            flexion_dof([-3.0, 3.0]),
                            DofSpec::new(
                                AxisLabel::Abduction,
                                SpringArrangement::single(664.0).unwrap(),
                                0.0,
                                [-3.0, 3.0],
                                Vector3::z(),
                            )
                            .unwrap(),
                        ],
                    )
                    .unwrap(),
                    JointSpec::new("pip", vec![flexion_dof([-3.0, 3.0])]).unwrap(),
                    JointSpec::new("dip", vec![flexion_dof([-3.0, 3.0])]).unwrap(),
                ];
                let links = lengths
                    .iter()
                    .map(|&l| Link::new(l, vec![]).unwrap())
                    .collect();
                (joints, links)
            } else {
                defaults::default_hand()
                    .chains
                    .iter()
                    .find(|c| c.name == name)
                    .map(|c| (c.joints.clone(), c.links.clone()))
                    .unwrap()
            };
            let base = defaults::default_hand()
                .chains
                .iter()
                .find(|c| c.name == name)
                .unwrap()
                .base;
            chains.push(FingerChain::new(name, base, joints, links).unwrap());
        }
        let d = defaults::default_hand();
        HandModel::new(d.palm_pose, d.palm.clone(), chains, d.loadcells.clone()).unwrap()
    }

    #[test]
    fn rest_pose_gives_straight_fingers() {
        let hand = defaults::default_hand();
        let q = Configuration::rest(&hand);
        let fk = forward_kinematics(&hand, &q).unwrap();
        for (ci, chain) in hand.chains.iter().enumerate() {
            let base = hand.palm_pose * chain.base;
            let total: f64 = chain.links.iter().map(|l| l.length).sum();
            let expect = base * Point3::new(0.0, total, 0.0);
            let got = fk.fingertips[ci];
            assert_relative_eq!((got - expect).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn quarter_turn_single_joint() {
        // One joint flexed 90 deg: the remaining chain rotates a quarter
        // turn about the joint axis.
        let hand = planar_test_hand([0.04, 0.03, 0.02]);
        let idx = hand.chain_index(FingerName::Index).unwrap();
        let mut q = Configuration::rest(&hand);
        let dip = hand.dof_id_by_name("index/dip/flexion").unwrap();
        q[dip] = std::f64::consts::FRAC_PI_2;
        let fk = forward_kinematics(&hand, &q).unwrap();

        let base = hand.palm_pose * hand.chains[idx].base;
        // dip joint sits 0.07 along local +Y; the last 0.02 goes along +Z.
        let expect = base * Point3::new(0.0, 0.07, 0.02);
        assert_relative_eq!((fk.fingertips[idx] - expect).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn two_link_right_angles_fold_back() {
        // Symbolic 2-link planar chain oracle:
        //   y = L cos q1 + L cos(q1+q2), z = L sin q1 + L sin(q1+q2)
        // at q1 = q2 = 90 deg the 2-link tip sits at (y, z) = (-L, L)
        // relative to the mp base; the third link continues along -Y.
        let l = 0.05;
        let hand = planar_test_hand([l, l, 0.02]);
        let idx = hand.chain_index(FingerName::Index).unwrap();
        let mut q = Configuration::rest(&hand);
        q[hand.dof_id_by_name("index/mp/flexion").unwrap()] = std::f64::consts::FRAC_PI_2;
        q[hand.dof_id_by_name("index/pip/flexion").unwrap()] = std::f64::consts::FRAC_PI_2;
        let fk = forward_kinematics(&hand, &q).unwrap();

        let base = hand.palm_pose * hand.chains[idx].base;
        let dip_origin = fk.link_poses[idx][2] * Point3::origin();
        let expect_dip = base * Point3::new(0.0, -l, l);
        assert_relative_eq!((dip_origin - expect_dip).norm(), 0.0, epsilon = 1e-12);
        let expect = base * Point3::new(0.0, -l - 0.02, l);
        assert_relative_eq!((fk.fingertips[idx] - expect).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let hand = defaults::default_hand();
        let q = Configuration::new(vec![0.0; 7]);
        assert!(matches!(
            forward_kinematics(&hand, &q),
            Err(ModelError::ConfigurationShape { .. })
        ));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let hand = defaults::default_hand();
        let mut q = Configuration::rest(&hand);
        // A generic pose.
        for i in 0..q.len() {
            q[i] += 0.05 + 0.01 * i as f64;
        }
        let q = q.clamped_to_rom(&hand);
        let fk = forward_kinematics(&hand, &q).unwrap();
        let body = BodyRef::Link { chain: 1, link: 2 };
        let local = Point3::new(0.0, 0.02, 0.008);
        let p0 = fk.body_point(&hand, body, &local);
        let jac = fk.point_jacobian(&hand, body, &p0);

        let h = 1e-7;
        for gid in 0..hand.dof_count() {
            let mut qp = q.clone();
            qp[gid] += h;
            let fkp = forward_kinematics(&hand, &qp).unwrap();
            let pp = fkp.body_point(&hand, body, &local);
            let fd = (pp - p0) / h;
            let col = jac.column(gid);
            assert_relative_eq!(fd.x, col[0], epsilon = 1e-5);
            assert_relative_eq!(fd.y, col[1], epsilon = 1e-5);
            assert_relative_eq!(fd.z, col[2], epsilon = 1e-5);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn link_lengths_preserved(seed in 0u64..1000) {
                // Pseudo-random in-ROM configuration from the seed.
                let hand = defaults::default_hand();
                let mut q = Configuration::rest(&hand);
                let mut s = seed;
                for i in 0..q.len() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let u = (s >> 11) as f64 / (1u64 << 53) as f64;
                    let d = &hand.dofs()[i];
                    q[i] = d.rom[0] + u * (d.rom[1] - d.rom[0]);
                }
                let fk = forward_kinematics(&hand, &q).unwrap();
                for (ci, chain) in hand.chains.iter().enumerate() {
                    for li in 0..chain.links.len() {
                        let a = fk.link_poses[ci][li] * Point3::origin();
                        let b = if li + 1 < chain.links.len() {
                            fk.link_poses[ci][li + 1] * Point3::origin()
                        } else {
                            fk.fingertips[ci]
                        };
                        let dist = (b - a).norm();
                        prop_assert!((dist - chain.links[li].length).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
