//! Quasi-static block pushing.

use serde::{Deserialize, Serialize};

use super::agent::AgentState;
use crate::error::{Error, Result};

/// Rectangular block footprint; `half_extents` are along the block's own axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockState {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub half_extents: (f64, f64),
    pub mass: f64,
}

impl BlockState {
    pub fn new(x: f64, y: f64, yaw: f64, half_extents: (f64, f64), mass: f64) -> Self {
        Self {
            x,
            y,
            yaw,
            half_extents,
            mass,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn validate(&self) -> Result<()> {
        let (hx, hy) = self.half_extents;
        if !(hx > 0.0 && hy > 0.0) {
            return Err(Error::config(format!("degenerate block half extents ({hx}, {hy})")));
        }
        Ok(())
    }

    /// Point at `local` (block frame) expressed in the world frame.
    pub fn to_world(&self, local: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [self.x + c * local[0] - s * local[1], self.y + s * local[0] + c * local[1]]
    }

    pub fn to_local(&self, world: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        let dx = world[0] - self.x;
        let dy = world[1] - self.y;
        [c * dx + s * dy, -s * dx + c * dy]
    }
}

/// Disc-versus-rectangle contact, world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    /// Unit normal pointing from the block towards the disc centre.
    pub normal: [f64; 2],
    pub depth: f64,
    /// Contact point on the block boundary, world frame.
    pub point: [f64; 2],
}

/// Penetration of a disc at `center` with `radius` into `block`, if any.
pub fn disc_contact(center: [f64; 2], radius: f64, block: &BlockState) -> Option<Contact> {
    let (hx, hy) = block.half_extents;
    let p = block.to_local(center);
    let inside = p[0].abs() < hx && p[1].abs() < hy;
    let (normal_local, depth, point_local) = if inside {
        // Leave through the nearest face.
        let gap_x = hx - p[0].abs();
        let gap_y = hy - p[1].abs();
        if gap_x <= gap_y {
            let sx = if p[0] >= 0.0 { 1.0 } else { -1.0 };
            ([sx, 0.0], radius + gap_x, [sx * hx, p[1]])
        } else {
            let sy = if p[1] >= 0.0 { 1.0 } else { -1.0 };
            ([0.0, sy], radius + gap_y, [p[0], sy * hy])
        }
    } else {
        let q = [p[0].clamp(-hx, hx), p[1].clamp(-hy, hy)];
        let d = [p[0] - q[0], p[1] - q[1]];
        let dist = d[0].hypot(d[1]);
        if dist >= radius || dist == 0.0 {
            return None;
        }
        ([d[0] / dist, d[1] / dist], radius - dist, q)
    };
    let (s, c) = block.yaw.sin_cos();
    let normal = [c * normal_local[0] - s * normal_local[1], s * normal_local[0] + c * normal_local[1]];
    Some(Contact {
        normal,
        depth,
        point: block.to_world(point_local),
    })
}

pub fn penetration(center: [f64; 2], radius: f64, block: &BlockState) -> f64 {
    disc_contact(center, radius, block).map_or(0.0, |c| c.depth)
}

/// Pushes `block` out of the disc footprint of `agent`.
///
/// The block is first rotated about its centre by `(r × d) / (1 + mass)`,
/// where `r` is the contact arm and `d = -normal·depth` the push, then
/// translated along the (recomputed) contact normal by the remaining depth.
/// `dt` only guards against degenerate calls; the model keeps no momentum.
pub fn resolve_push(agent: &AgentState, agent_radius: f64, block: &BlockState, dt: f64) -> Result<BlockState> {
    block.validate()?;
    if !(dt > 0.0) {
        return Err(Error::config(format!("resolve_push needs dt > 0, got {dt}")));
    }
    let center = agent.position();
    let Some(contact) = disc_contact(center, agent_radius, block) else {
        return Ok(block.clone());
    };

    let mut out = block.clone();
    let arm = [contact.point[0] - block.x, contact.point[1] - block.y];
    let push = [-contact.normal[0] * contact.depth, -contact.normal[1] * contact.depth];
    out.yaw += (arm[0] * push[1] - arm[1] * push[0]) / (1.0 + block.mass);

    // Rotation can change which feature is closest; translating along the
    // fresh normal removes the remaining overlap exactly.
    if let Some(after) = disc_contact(center, agent_radius, &out) {
        out.x -= after.normal[0] * after.depth;
        out.y -= after.normal[1] * after.depth;
    }
    Ok(out)
}
