//! The nine-channel loadcell readout and threshold contact detection.

use serde::{Deserialize, Serialize};

use crate::equilibrium::EquilibriumResult;
use crate::hand::{BodyRef, HandModel};

/// Channel order, fixed: four palm cells then the five fingertips.
pub const CHANNEL_COUNT: usize = 9;

/// One frame of compressive loadcell readings, N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadcellFrame {
    pub channels: [f64; CHANNEL_COUNT],
    pub step: usize,
}

impl LoadcellFrame {
    pub fn zero(step: usize) -> Self {
        Self {
            channels: [0.0; CHANNEL_COUNT],
            step,
        }
    }

    pub fn total(&self) -> f64 {
        self.channels.iter().sum()
    }

    pub fn palm_total(&self) -> f64 {
        self.channels[..4].iter().sum()
    }
}

/// Map contact normal forces onto loadcell channels.
///
/// Each contact is assigned to the nearest site on its owning body: any
/// contact on a finger goes to that finger's tip cell, palm contacts to
/// the nearest of the four palm cells. Contacts on bodies without a site
/// are dropped. Forces accumulate in contact order.
pub fn loadcell_readout(result: &EquilibriumResult, hand: &HandModel, step: usize) -> LoadcellFrame {
    let mut frame = LoadcellFrame::zero(step);
    for c in &result.contacts.contacts {
        let sites = hand.sites_on_body(c.owner);
        if sites.is_empty() {
            continue;
        }
        let best = sites
            .iter()
            .min_by(|(_, a), (_, b)| {
                // Site positions are local to their body; palm contacts
                // compare against palm-frame cell positions, fingertip
                // cells win by being the only site on the chain.
                let pa = match a.body {
                    BodyRef::Palm => hand.palm_pose * a.position,
                    BodyRef::Link { .. } => a.position,
                };
                let pb = match b.body {
                    BodyRef::Palm => hand.palm_pose * b.position,
                    BodyRef::Link { .. } => b.position,
                };
                let da = (c.position - pa).norm_squared();
                let db = (c.position - pb).norm_squared();
                da.partial_cmp(&db).unwrap()
            })
            .map(|(i, _)| *i)
            .unwrap();
        frame.channels[best] += c.normal_force;
    }
    frame
}

/// Threshold detection outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub detected: bool,
    /// Channel indices at or above the threshold.
    pub sites: Vec<usize>,
}

/// A channel at or above the threshold counts as detected (inclusive
/// comparison).
pub fn contact_event(frame: &LoadcellFrame, threshold: f64) -> ContactEvent {
    let sites: Vec<usize> = frame
        .channels
        .iter()
        .enumerate()
        .filter(|(_, v)| **v >= threshold)
        .map(|(i, _)| i)
        .collect();
    ContactEvent {
        detected: !sites.is_empty(),
        sites,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_frame_below_threshold() {
        let f = LoadcellFrame::zero(0);
        let e = contact_event(&f, 1.0);
        assert!(!e.detected);
        assert!(e.sites.is_empty());
    }

    #[test]
    fn exact_threshold_detects() {
        let mut f = LoadcellFrame::zero(0);
        f.channels[2] = 1.0;
        let e = contact_event(&f, 1.0);
        assert!(e.detected);
        assert_eq!(e.sites, vec![2]);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn raising_threshold_never_adds_sites(
                vals in prop::collection::vec(0.0f64..20.0, 9),
                t1 in 0.1f64..10.0,
                dt in 0.0f64..10.0,
            ) {
                let mut f = LoadcellFrame::zero(0);
                f.channels.copy_from_slice(&vals);
                let lo = contact_event(&f, t1);
                let hi = contact_event(&f, t1 + dt);
                for s in &hi.sites {
                    prop_assert!(lo.sites.contains(s));
                }
                prop_assert!(lo.sites.len() >= hi.sites.len());
            }
        }
    }
}
