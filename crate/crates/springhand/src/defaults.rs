//! Built-in hand and tendon-network description.
//!
//! Spring constants come from the machined-spring table (deg/Nm); link
//! lengths, sample layouts, moment arms and junction angles are not
//! published and are implementer-chosen, scaled to a human-sized hand.
//! Everything here can be overridden through the JSON description file.

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use std::collections::BTreeMap;

use crate::chain::{FingerChain, FingerName, Link};
use crate::hand::{BodyRef, HandModel, LoadcellSite, PalmGeometry, SiteKind};
use crate::joint::{AxisLabel, DofSpec, JointSpec};
use crate::spring::SpringArrangement;
use crate::tendon::{
    Actuator, ActuatorGroup, ActuatorMode, BranchJunction, JunctionKind, PathSegment,
    PathTerminal, RigidityGeometry, TendonNetwork, TendonPath,
};
use crate::units::deg_to_rad;

/// Table of per-joint spring compliances, deg/Nm.
pub mod compliance {
    /// Thumb CM, the pre-paired parallel springs (combined value).
    pub const CM_PARALLEL_PAIR: f64 = 903.0;
    /// Thumb CM, the third spring.
    pub const CM_THIRD: f64 = 443.0;
    pub const THUMB_MP: f64 = 443.0;
    pub const THUMB_IP: f64 = 443.0;
    pub const FINGER_MP: f64 = 664.0;
    pub const FINGER_PIP: f64 = 863.0;
    pub const FINGER_DIP: f64 = 443.0;
}

/// Default tendon moment arms, meters.
pub mod arms {
    pub const MP_FLEXION: f64 = 0.008;
    pub const PIP_FLEXION: f64 = 0.006;
    pub const DIP_FLEXION: f64 = 0.005;
    pub const IP_FLEXION: f64 = 0.005;
    pub const ABDUCTION: f64 = 0.004;
    pub const CM_OPPOSITION: f64 = 0.008;
    pub const CM_ADDUCTION: f64 = 0.004;
}

/// Finger radius used for surface sample offsets, meters.
pub const LINK_RADIUS: f64 = 0.008;

/// Default per-actuator tension capacity, N.
pub const TENSION_CAPACITY: f64 = 600.0;

/// Series stiffness of a length-commanded actuator, N/m.
pub const ACTUATOR_STIFFNESS: f64 = 4.0e4;

/// Interossei knot half-angle between palmar and dorsal branches, rad.
pub fn interossei_half_angle() -> f64 {
    deg_to_rad(20.0)
}

fn flexion_dof(compliance: f64, rom_deg: [f64; 2]) -> DofSpec {
    DofSpec::new(
        AxisLabel::Flexion,
        SpringArrangement::single(compliance).unwrap(),
        0.0,
        [deg_to_rad(rom_deg[0]), deg_to_rad(rom_deg[1])],
        Vector3::x(),
    )
    .unwrap()
}

fn abduction_dof(compliance: f64, rom_deg: [f64; 2]) -> DofSpec {
    DofSpec::new(
        AxisLabel::Abduction,
        SpringArrangement::single(compliance).unwrap(),
        0.0,
        [deg_to_rad(rom_deg[0]), deg_to_rad(rom_deg[1])],
        Vector3::z(),
    )
    .unwrap()
}

/// Samples on the palmar face plus both lateral faces of a phalanx.
fn link_samples(length: f64, distal: bool) -> Vec<Point3<f64>> {
    let r = LINK_RADIUS;
    let mut s = vec![
        Point3::new(0.0, 0.35 * length, r),
        Point3::new(0.0, 0.70 * length, r),
        Point3::new(0.0, length, r),
        Point3::new(r, 0.55 * length, 0.0),
        Point3::new(-r, 0.55 * length, 0.0),
    ];
    if distal {
        // Fingertip pad and the rounded tip end.
        s.push(Point3::new(0.0, length, 0.5 * r));
        s.push(Point3::new(0.0, length + 0.6 * r, 0.0));
    }
    s
}

fn finger_chain(name: FingerName, base_x: f64, base_y: f64, lengths: [f64; 3]) -> FingerChain {
    let joints = vec![
        JointSpec::new(
            "mp",
            vec![
                flexion_dof(compliance::FINGER_MP, [0.0, 100.0]),
                abduction_dof(compliance::FINGER_MP, [-15.0, 15.0]),
            ],
        )
        .unwrap(),
        JointSpec::new("pip", vec![flexion_dof(compliance::FINGER_PIP, [0.0, 110.0])]).unwrap(),
        JointSpec::new("dip", vec![flexion_dof(compliance::FINGER_DIP, [0.0, 90.0])]).unwrap(),
    ];
    let links = vec![
        Link::new(lengths[0], link_samples(lengths[0], false)).unwrap(),
        Link::new(lengths[1], link_samples(lengths[1], false)).unwrap(),
        Link::new(lengths[2], link_samples(lengths[2], true)).unwrap(),
    ];
    FingerChain::new(
        name,
        Isometry3::from_parts(
            Translation3::new(base_x, base_y, 0.0),
            UnitQuaternion::identity(),
        ),
        joints,
        links,
    )
    .unwrap()
}

fn thumb_chain() -> FingerChain {
    // Opposition: the parallel pair and the third spring bend in series.
    // Adduction: only the third spring bends.
    let cm_opposition = DofSpec::new(
        AxisLabel::Opposition,
        SpringArrangement::Series(vec![
            SpringArrangement::single(compliance::CM_PARALLEL_PAIR).unwrap(),
            SpringArrangement::single(compliance::CM_THIRD).unwrap(),
        ]),
        0.0,
        [deg_to_rad(0.0), deg_to_rad(120.0)],
        Vector3::x(),
    )
    .unwrap();
    let cm_abduction = DofSpec::new(
        AxisLabel::Abduction,
        SpringArrangement::single(compliance::CM_THIRD).unwrap(),
        0.0,
        [deg_to_rad(-25.0), deg_to_rad(25.0)],
        Vector3::z(),
    )
    .unwrap();
    let joints = vec![
        JointSpec::new("cm", vec![cm_opposition, cm_abduction]).unwrap(),
        JointSpec::new("mp", vec![flexion_dof(compliance::THUMB_MP, [0.0, 100.0])]).unwrap(),
        JointSpec::new("ip", vec![flexion_dof(compliance::THUMB_IP, [0.0, 100.0])]).unwrap(),
    ];
    let lengths = [0.046, 0.032, 0.026];
    let links = vec![
        Link::new(lengths[0], link_samples(lengths[0], false)).unwrap(),
        Link::new(lengths[1], link_samples(lengths[1], false)).unwrap(),
        Link::new(lengths[2], link_samples(lengths[2], true)).unwrap(),
    ];
    // The thumb column leaves the palm at 25 deg above the +X axis.
    let base = Isometry3::from_parts(
        Translation3::new(0.034, -0.010, 0.0),
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), deg_to_rad(-65.0)),
    );
    FingerChain::new(FingerName::Thumb, base, joints, links).unwrap()
}

fn palm_geometry() -> PalmGeometry {
    let surface_z = 0.010;
    let half = [0.0425, 0.0475];
    let mut samples = Vec::new();
    for iy in 0..4 {
        for ix in 0..4 {
            let x = -0.033 + 0.022 * ix as f64;
            let y = -0.036 + 0.024 * iy as f64;
            samples.push(Point3::new(x, y, surface_z));
        }
    }
    PalmGeometry {
        surface_z,
        half_extents: half,
        surface_samples: samples,
    }
}

fn loadcells(chains: &[FingerChain]) -> Vec<LoadcellSite> {
    let mut cells = Vec::new();
    let z = 0.010;
    for (i, (x, y)) in [
        (0.021, 0.024),
        (-0.021, 0.024),
        (0.021, -0.024),
        (-0.021, -0.024),
    ]
    .iter()
    .enumerate()
    {
        cells.push(LoadcellSite {
            id: format!("palm{}", i + 1),
            kind: SiteKind::Palm,
            body: BodyRef::Palm,
            position: Point3::new(*x, *y, z),
        });
    }
    for name in FingerName::ALL {
        let ci = chains.iter().position(|c| c.name == name).unwrap();
        let distal = chains[ci].links.len() - 1;
        let tip_len = chains[ci].links[distal].length;
        cells.push(LoadcellSite {
            id: format!("{name}tip"),
            kind: SiteKind::Fingertip,
            body: BodyRef::Link {
                chain: ci,
                link: distal,
            },
            position: Point3::new(0.0, tip_len, 0.5 * LINK_RADIUS),
        });
    }
    cells
}

/// The default hand: palm-up right hand, fingers along +Y, thumb on +X.
pub fn default_hand() -> HandModel {
    let chains = vec![
        thumb_chain(),
        finger_chain(FingerName::Index, 0.027, 0.046, [0.042, 0.025, 0.020]),
        finger_chain(FingerName::Middle, 0.009, 0.0475, [0.046, 0.028, 0.021]),
        finger_chain(FingerName::Ring, -0.009, 0.046, [0.042, 0.026, 0.020]),
        finger_chain(FingerName::Little, -0.027, 0.042, [0.034, 0.020, 0.017]),
    ];
    let cells = loadcells(&chains);
    HandModel::new(Isometry3::identity(), palm_geometry(), chains, cells).unwrap()
}

fn actuator(id: &str, group: ActuatorGroup) -> Actuator {
    Actuator {
        id: id.to_string(),
        group,
        mode: ActuatorMode::TensionCommanded,
        tension_capacity: TENSION_CAPACITY,
        excursion_limits: [-0.01, 0.08],
    }
}

fn seg(dof: &str, arm: f64) -> PathSegment {
    PathSegment {
        dof: dof.to_string(),
        moment_arm: arm,
    }
}

fn flexor_segments(finger: &str) -> Vec<PathSegment> {
    vec![
        seg(&format!("{finger}/mp/flexion"), arms::MP_FLEXION),
        seg(&format!("{finger}/pip/flexion"), arms::PIP_FLEXION),
        seg(&format!("{finger}/dip/flexion"), arms::DIP_FLEXION),
    ]
}

/// The eight-actuator network: three inert wrist actuators, two thumb
/// actuators, two ring-coupled finger flexor pairs and the single
/// interossei rigidity actuator branching to all four fingers.
pub fn default_network() -> TendonNetwork {
    let mut actuators = vec![
        actuator("wrist_a", ActuatorGroup::Wrist),
        actuator("wrist_b", ActuatorGroup::Wrist),
        actuator("wrist_c", ActuatorGroup::Wrist),
        actuator("thumb_flexor", ActuatorGroup::Hand),
        actuator("thumb_opposer", ActuatorGroup::Hand),
        actuator("index_middle_flexor", ActuatorGroup::Hand),
        actuator("ring_little_flexor", ActuatorGroup::Hand),
        actuator("interossei", ActuatorGroup::Hand),
    ];
    // The interossei actuator only stiffens; give it headroom for the
    // 500 N rigidity setting.
    actuators.iter_mut().find(|a| a.id == "interossei").unwrap().tension_capacity = 800.0;

    let mut paths = vec![
        TendonPath {
            id: "thumb_flexor_path".into(),
            actuator: "thumb_flexor".into(),
            segments: vec![
                seg("thumb/mp/flexion", arms::MP_FLEXION),
                seg("thumb/ip/flexion", arms::IP_FLEXION),
            ],
            terminal: PathTerminal::Anchor("thumb_distal".into()),
        },
        TendonPath {
            id: "thumb_opposer_path".into(),
            actuator: "thumb_opposer".into(),
            segments: vec![
                seg("thumb/cm/opposition", arms::CM_OPPOSITION),
                seg("thumb/cm/abduction", arms::CM_ADDUCTION),
            ],
            terminal: PathTerminal::Anchor("thumb_metacarpal".into()),
        },
        TendonPath {
            id: "im_flexor_root".into(),
            actuator: "index_middle_flexor".into(),
            segments: vec![],
            terminal: PathTerminal::Junction("im_ring".into()),
        },
        TendonPath {
            id: "index_flexor".into(),
            actuator: "index_middle_flexor".into(),
            segments: flexor_segments("index"),
            terminal: PathTerminal::Anchor("index_distal".into()),
        },
        TendonPath {
            id: "middle_flexor".into(),
            actuator: "index_middle_flexor".into(),
            segments: flexor_segments("middle"),
            terminal: PathTerminal::Anchor("middle_distal".into()),
        },
        TendonPath {
            id: "rl_flexor_root".into(),
            actuator: "ring_little_flexor".into(),
            segments: vec![],
            terminal: PathTerminal::Junction("rl_ring".into()),
        },
        TendonPath {
            id: "ring_flexor".into(),
            actuator: "ring_little_flexor".into(),
            segments: flexor_segments("ring"),
            terminal: PathTerminal::Anchor("ring_distal".into()),
        },
        TendonPath {
            id: "little_flexor".into(),
            actuator: "ring_little_flexor".into(),
            segments: flexor_segments("little"),
            terminal: PathTerminal::Anchor("little_distal".into()),
        },
        TendonPath {
            id: "interossei_root".into(),
            actuator: "interossei".into(),
            segments: vec![],
            terminal: PathTerminal::Junction("interossei_split".into()),
        },
        TendonPath {
            id: "interossei_im".into(),
            actuator: "interossei".into(),
            segments: vec![],
            terminal: PathTerminal::Junction("im_interossei_ring".into()),
        },
        TendonPath {
            id: "interossei_rl".into(),
            actuator: "interossei".into(),
            segments: vec![],
            terminal: PathTerminal::Junction("rl_interossei_ring".into()),
        },
    ];

    let mut junctions = vec![
        BranchJunction {
            id: "im_ring".into(),
            kind: JunctionKind::Ring,
            parent: "im_flexor_root".into(),
            children: vec!["index_flexor".into(), "middle_flexor".into()],
            branch_angles: vec![],
        },
        BranchJunction {
            id: "rl_ring".into(),
            kind: JunctionKind::Ring,
            parent: "rl_flexor_root".into(),
            children: vec!["ring_flexor".into(), "little_flexor".into()],
            branch_angles: vec![],
        },
        BranchJunction {
            id: "interossei_split".into(),
            kind: JunctionKind::Ring,
            parent: "interossei_root".into(),
            children: vec!["interossei_im".into(), "interossei_rl".into()],
            branch_angles: vec![],
        },
        BranchJunction {
            id: "im_interossei_ring".into(),
            kind: JunctionKind::Ring,
            parent: "interossei_im".into(),
            children: vec!["index_interossei".into(), "middle_interossei".into()],
            branch_angles: vec![],
        },
        BranchJunction {
            id: "rl_interossei_ring".into(),
            kind: JunctionKind::Ring,
            parent: "interossei_rl".into(),
            children: vec!["ring_interossei".into(), "little_interossei".into()],
            branch_angles: vec![],
        },
    ];

    let phi = interossei_half_angle();
    for finger in ["index", "middle", "ring", "little"] {
        paths.push(TendonPath {
            id: format!("{finger}_interossei"),
            actuator: "interossei".into(),
            segments: vec![],
            terminal: PathTerminal::Junction(format!("{finger}_interossei_knot")),
        });
        paths.push(TendonPath {
            id: format!("{finger}_palmar_interossei"),
            actuator: "interossei".into(),
            segments: vec![seg(&format!("{finger}/mp/abduction"), arms::ABDUCTION)],
            terminal: PathTerminal::Anchor(format!("{finger}_proximal_palmar")),
        });
        paths.push(TendonPath {
            id: format!("{finger}_dorsal_interossei"),
            actuator: "interossei".into(),
            segments: vec![seg(&format!("{finger}/mp/abduction"), -arms::ABDUCTION)],
            terminal: PathTerminal::Anchor(format!("{finger}_proximal_dorsal")),
        });
        junctions.push(BranchJunction {
            id: format!("{finger}_interossei_knot"),
            kind: JunctionKind::Knot,
            parent: format!("{finger}_interossei"),
            children: vec![
                format!("{finger}_palmar_interossei"),
                format!("{finger}_dorsal_interossei"),
            ],
            branch_angles: vec![phi, -phi],
        });
    }

    TendonNetwork {
        actuators,
        paths,
        junctions,
        rigidity_actuator: "interossei".into(),
        rigidity_geometry: RigidityGeometry {
            moment_arm: 0.005,
            free_span: 0.020,
        },
        actuator_stiffness: ACTUATOR_STIFFNESS,
    }
}

/// Zero command for every actuator.
pub fn zero_commands(network: &TendonNetwork) -> BTreeMap<String, f64> {
    network
        .actuators
        .iter()
        .map(|a| (a.id.clone(), 0.0))
        .collect()
}
