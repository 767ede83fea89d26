//! Quasi-static simulator of a tendon-driven five-fingered hand with
//! machined-spring joints.
//!
//! The hand is modeled as five rigid-link chains on a palm, each joint a
//! linear elastic bending DOF derived from serial/parallel machined-spring
//! composition. Eight actuators drive the fingers through a branched
//! tendon network with ring connectors (tension-equalizing) and knots
//! (force-balance splits); a single interossei actuator stiffens the MP
//! abduction DOFs of the four fingers. Grasps are solved as quasi-static
//! equilibria with unilateral contacts and Coulomb friction, evaluated
//! for force closure and maximum supported load, and scripted scenario
//! runs emit deterministic CSV/JSON/SVG traces.

pub mod chain;
pub mod configuration;
pub mod contact;
pub mod defaults;
pub mod equilibrium;
pub mod error;
pub mod hand;
pub mod joint;
pub mod kinematics;
pub mod object;
pub mod sensors;
pub mod spring;
pub mod tendon;
pub mod units;

pub use chain::{FingerChain, FingerName, Link};
pub use configuration::Configuration;
pub use contact::{detect_contacts, ContactPoint, ContactSet};
pub use equilibrium::{
    grasp_quality, max_supported_load, solve_equilibrium, EquilibriumOptions, EquilibriumResult,
    FailureMode, GraspQuality, LoadRampOptions, LoadTestOutcome,
};
pub use error::{IoError, ModelError, SolveError};
pub use hand::{BodyRef, HandModel, LoadcellSite, PalmGeometry, SiteKind};
pub use joint::{joint_torque, AxisLabel, DofSpec, JointSpec};
pub use kinematics::{forward_kinematics, FkResult};
pub use object::{ObjectSet, RigidObject, Shape};
pub use sensors::{contact_event, loadcell_readout, ContactEvent, LoadcellFrame};
pub use spring::{composite_compliance, SpringArrangement, SpringElement};
pub use tendon::{
    distribute_tension, effective_abduction_stiffness, validate_network, Actuator, ActuatorGroup,
    ActuatorMode, BranchJunction, JunctionKind, PathSegment, PathTerminal, RigidityGeometry,
    TendonNetwork, TendonPath,
};
