//! Forward kinematics: resolving template + (beta, theta, phi, root
//! translation) into 17 posed world ellipsoids, and analytic extraction of
//! the 21 joint positions.

use super::{HandError, HandTemplate, ObjectParams, PoseParams, ShapeParams, LINK_NAMES, NUM_LINKS};
use crate::geom::Ellipsoid;
use crate::{Quat, Rot3, Vec3};
use serde::{Deserialize, Serialize};

/// A fully resolved hand-object state. Links are posed in the palm-centered
/// world frame and then shifted by the root translation; the object is
/// placed relative to the posed palm at the origin and is *not* shifted by
/// the root translation, so sampling a new root moves the hand relative to
/// the object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    pub links: Vec<Ellipsoid>,
    pub object: Ellipsoid,
    pub root_t: Vec3,
    /// World anchor position per non-root link (MCP/PIP/DIP joints).
    pub anchor_points: Vec<Vec3>,
    pub wrist_point: Vec3,
    /// Template relative rotation parent->child per non-root link; kept so a
    /// simulator can read joint deltas back without the template.
    pub rel_rest: Vec<Quat>,
    pub palm_rest: Quat,
}

impl HandState {
    /// Object pose as (position, orientation).
    pub fn object_pose(&self) -> (Vec3, Quat) {
        (
            self.object.center(),
            Quat::from_scaled_axis(self.object.axis_angle()),
        )
    }

    /// All 17 primitives, object first (index 0), then the 16 hand links.
    pub fn all_ellipsoids(&self) -> Vec<Ellipsoid> {
        let mut v = Vec::with_capacity(17);
        v.push(self.object);
        v.extend_from_slice(&self.links);
        v
    }
}

/// The 21 joint positions: wrist, then MCP, PIP, DIP, TIP for each finger
/// in thumb..pinky order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSet {
    pub positions: Vec<Vec3>,
}

impl JointSet {
    pub fn wrist(&self) -> Vec3 {
        self.positions[0]
    }

    pub fn joint(&self, finger: usize, which: usize) -> Vec3 {
        self.positions[1 + finger * 4 + which]
    }
}

/// Poses the 16 links and the object. Each link is scaled by its radii
/// delta and rotated by its rotation delta in its local frame, child
/// centers are solved so parent/child anchors coincide (anchors scale with
/// the radii), and the whole hand is translated by `root_t`.
pub fn compose_state(
    template: &HandTemplate,
    beta: &ShapeParams,
    theta: &PoseParams,
    phi: &ObjectParams,
    root_t: Vec3,
) -> Result<HandState, HandError> {
    let mut radii = Vec::with_capacity(NUM_LINKS);
    let mut scale = Vec::with_capacity(NUM_LINKS);
    for link in 0..NUM_LINKS {
        let base = template.ellipsoids[link].radii();
        let posed = base + beta.delta(link);
        if posed.iter().any(|r| *r < 1e-3) {
            return Err(HandError::RadiiUnderflow(LINK_NAMES[link], posed.min()));
        }
        scale.push(Vec3::new(posed.x / base.x, posed.y / base.y, posed.z / base.z));
        radii.push(posed);
    }

    let mut rot = vec![Rot3::identity(); NUM_LINKS];
    let mut center = vec![Vec3::zeros(); NUM_LINKS];
    let mut anchor_points = Vec::with_capacity(NUM_LINKS - 1);
    let mut rel_rest = Vec::with_capacity(NUM_LINKS - 1);

    let palm_rest = template.ellipsoids[0].rotation();
    rot[0] = palm_rest * theta.link_rotation(0);
    center[0] = Vec3::zeros();

    for link in 1..NUM_LINKS {
        let parent = template.parent_of(link).unwrap();
        let anchor = template.anchor_of(link);
        let rest_rel =
            template.ellipsoids[parent].rotation().inverse() * template.ellipsoids[link].rotation();
        let g = center[parent]
            + rot[parent] * Vec3::from(anchor.parent_point).component_mul(&scale[parent]);
        rot[link] = rot[parent] * rest_rel * theta.link_rotation(link);
        center[link] = g - rot[link] * Vec3::from(anchor.child_point).component_mul(&scale[link]);
        anchor_points.push(g);
        rel_rest.push(Quat::from_rotation_matrix(&rest_rel));
    }

    // object relative to the posed palm (at the origin, before root shift)
    let obj_radii = radii[0] + Vec3::from(phi.radii_delta);
    if obj_radii.iter().any(|r| *r <= 0.0) {
        return Err(HandError::ObjectRadii(obj_radii.into()));
    }
    let obj_rot = rot[0] * Rot3::from_scaled_axis(Vec3::from(phi.axis_angle));
    let obj_center = center[0] + rot[0] * Vec3::from(phi.center_offset);
    let object = Ellipsoid::new(obj_center, obj_radii, obj_rot.scaled_axis())?;

    let wrist_point =
        center[0] + rot[0] * Vec3::from(template.wrist_anchor).component_mul(&scale[0]) + root_t;
    let links: Result<Vec<Ellipsoid>, _> = (0..NUM_LINKS)
        .map(|l| Ellipsoid::new(center[l] + root_t, radii[l], rot[l].scaled_axis()))
        .collect();
    for g in anchor_points.iter_mut() {
        *g += root_t;
    }

    Ok(HandState {
        links: links?,
        object,
        root_t,
        anchor_points,
        wrist_point,
        rel_rest,
        palm_rest: Quat::from_rotation_matrix(&palm_rest),
    })
}

/// Wrist from the palm anchor, MCP/PIP/DIP from the coinciding anchor
/// points of adjacent links, fingertip from the distal principal-axis
/// endpoint of each distal ellipsoid.
pub fn extract_joints(state: &HandState) -> JointSet {
    let mut positions = Vec::with_capacity(21);
    positions.push(state.wrist_point);
    for f in 0..super::NUM_FINGERS {
        for s in 0..3 {
            positions.push(state.anchor_points[HandTemplate::link_index(f, s) - 1]);
        }
        let distal = &state.links[HandTemplate::link_index(f, 2)];
        positions.push(distal.center() + distal.rotation() * Vec3::new(distal.radii()[0], 0.0, 0.0));
    }
    JointSet { positions }
}
