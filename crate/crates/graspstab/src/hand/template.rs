//! The canonical rest-pose hand template: 16 ellipsoid links in a tree
//! rooted at the palm, with per-link anchor points that tie each child to
//! its parent.
//!
//! Coordinate convention: palm center at the origin, +X distal (fingers),
//! +Y out of the palm, +Z from the index side toward the pinky side. Each
//! finger link's local +X axis is its bone axis. The shipped numbers are
//! adult-scale defaults; the template is a replaceable data asset.

use super::HandError;
use crate::geom::Ellipsoid;
use crate::Vec3;
use serde::{Deserialize, Serialize};

pub const NUM_LINKS: usize = 16;
pub const NUM_FINGERS: usize = 5;
/// Link index of the palm (the kinematic root).
pub const PALM: usize = 0;

pub const FINGER_NAMES: [&str; 5] = ["thumb", "index", "middle", "ring", "pinky"];

pub const LINK_NAMES: [&str; 16] = [
    "palm",
    "thumb_proximal",
    "thumb_middle",
    "thumb_distal",
    "index_proximal",
    "index_middle",
    "index_distal",
    "middle_proximal",
    "middle_middle",
    "middle_distal",
    "ring_proximal",
    "ring_middle",
    "ring_distal",
    "pinky_proximal",
    "pinky_middle",
    "pinky_distal",
];

/// Attachment of a child link to its parent: the same physical point
/// expressed in each body's local frame. Anchor coordinates scale with the
/// link radii when shape deltas are applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkAnchor {
    pub child: usize,
    pub parent_point: [f64; 3],
    pub child_point: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandTemplate {
    /// 16 rest-pose ellipsoids, palm first, then five proximal/middle/distal
    /// chains in thumb..pinky order.
    pub ellipsoids: Vec<Ellipsoid>,
    /// Parent link index per link, -1 for the palm.
    pub parents: Vec<i32>,
    /// One anchor per non-root link, ascending child index.
    pub anchors: Vec<LinkAnchor>,
    /// Wrist attachment point in the palm frame.
    pub wrist_anchor: [f64; 3],
}

impl HandTemplate {
    pub fn parent_of(&self, link: usize) -> Option<usize> {
        let p = self.parents[link];
        (p >= 0).then_some(p as usize)
    }

    pub fn anchor_of(&self, child: usize) -> &LinkAnchor {
        &self.anchors[child - 1]
    }

    /// Finger and segment (0 = proximal) for a non-palm link.
    pub fn finger_segment(link: usize) -> (usize, usize) {
        debug_assert!((1..NUM_LINKS).contains(&link));
        ((link - 1) / 3, (link - 1) % 3)
    }

    pub fn link_index(finger: usize, segment: usize) -> usize {
        1 + finger * 3 + segment
    }

    pub fn validate(&self) -> Result<(), HandError> {
        let fail = |m: String| Err(HandError::InvalidTemplate(m));
        if self.ellipsoids.len() != NUM_LINKS || self.parents.len() != NUM_LINKS {
            return fail(format!(
                "expected {NUM_LINKS} links, got {} ellipsoids / {} parents",
                self.ellipsoids.len(),
                self.parents.len()
            ));
        }
        if self.parents[PALM] != -1 {
            return fail("palm must have parent -1".into());
        }
        for f in 0..NUM_FINGERS {
            let prox = Self::link_index(f, 0);
            if self.parents[prox] != PALM as i32
                || self.parents[prox + 1] != prox as i32
                || self.parents[prox + 2] != (prox + 1) as i32
            {
                return fail(format!("finger {f} is not a proximal-middle-distal chain"));
            }
        }
        if self.anchors.len() != NUM_LINKS - 1 {
            return fail(format!("expected {} anchors", NUM_LINKS - 1));
        }
        for (k, a) in self.anchors.iter().enumerate() {
            if a.child != k + 1 {
                return fail(format!("anchor {k} child {} out of order", a.child));
            }
        }
        // rest pose must close every joint
        for a in &self.anchors {
            let p = self.parent_of(a.child).unwrap();
            let gp = self.ellipsoids[p].center()
                + self.ellipsoids[p].rotation() * Vec3::from(a.parent_point);
            let gc = self.ellipsoids[a.child].center()
                + self.ellipsoids[a.child].rotation() * Vec3::from(a.child_point);
            if (gp - gc).norm() >= 1e-9 {
                return fail(format!(
                    "rest anchor gap {:.3e} m at link '{}'",
                    (gp - gc).norm(),
                    LINK_NAMES[a.child]
                ));
            }
        }
        Ok(())
    }
}

impl Default for HandTemplate {
    fn default() -> Self {
        // palm anchor xz-offsets chosen on the palm surface so each finger's
        // rest direction equals the palm surface normal there: adjacent
        // bodies touch tangentially at rest instead of overlapping. The
        // angular spread keeps neighboring chains disjoint: the closest
        // approach of two radial chains is 2*R*sin(gamma/2) at the anchors,
        // which must exceed the summed cross radii.
        const PALM_RX: f64 = 0.045;
        const PALM_RY: f64 = 0.0125;
        const FINGER_Z: [f64; 5] = [-0.0405, -0.0277, -0.0101, 0.0101, 0.0277];
        // per finger: segment lengths and cross-section radii, proximal first
        const LENGTHS: [[f64; 3]; 5] = [
            [0.046, 0.035, 0.028],
            [0.045, 0.026, 0.022],
            [0.050, 0.030, 0.023],
            [0.047, 0.028, 0.022],
            [0.038, 0.022, 0.020],
        ];
        const WIDTHS: [[f64; 3]; 5] = [
            [0.010, 0.009, 0.008],
            [0.009, 0.008, 0.007],
            [0.009, 0.008, 0.007],
            [0.009, 0.008, 0.007],
            [0.008, 0.0075, 0.007],
        ];

        let mut ellipsoids = vec![Ellipsoid::new(
            Vec3::zeros(),
            Vec3::new(PALM_RX, PALM_RY, PALM_RX),
            Vec3::zeros(),
        )
        .unwrap()];
        let mut parents = vec![-1i32];
        let mut anchors = Vec::new();

        for f in 0..NUM_FINGERS {
            let az = FINGER_Z[f];
            let ax = (PALM_RX * PALM_RX - az * az).sqrt();
            let palm_anchor = Vec3::new(ax, 0.0, az);
            let dir = palm_anchor / PALM_RX;
            let psi = (-az).atan2(ax);
            let aa = Vec3::new(0.0, psi, 0.0);

            let mut run = 0.0;
            for s in 0..3 {
                let len = LENGTHS[f][s];
                let w = WIDTHS[f][s];
                let center = palm_anchor + dir * (run + len / 2.0);
                ellipsoids
                    .push(Ellipsoid::new(center, Vec3::new(len / 2.0, w, w), aa).unwrap());
                let link = HandTemplate::link_index(f, s);
                if s == 0 {
                    parents.push(PALM as i32);
                    anchors.push(LinkAnchor {
                        child: link,
                        parent_point: palm_anchor.into(),
                        child_point: [-len / 2.0, 0.0, 0.0],
                    });
                } else {
                    parents.push((link - 1) as i32);
                    anchors.push(LinkAnchor {
                        child: link,
                        parent_point: [LENGTHS[f][s - 1] / 2.0, 0.0, 0.0],
                        child_point: [-len / 2.0, 0.0, 0.0],
                    });
                }
                run += len;
            }
        }
        let t = HandTemplate {
            ellipsoids,
            parents,
            wrist_anchor: [-PALM_RX, 0.0, 0.0],
            anchors,
        };
        debug_assert!(t.validate().is_ok());
        t
    }
}
