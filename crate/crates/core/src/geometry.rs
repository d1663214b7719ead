//! Uniform placement and snapshot mobility inside the deployment rectangle.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scenario::{ScenarioConfig, Stream};

/// Heading resamples tried before a pose holds position for the slot.
pub const MAX_HEADING_RESAMPLES: usize = 16;

/// Rejection-sampling attempts per pose during placement.
const PLACEMENT_ATTEMPTS_PER_POSE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubnetPose {
    pub position: Point,
    /// Radians.
    pub heading: f64,
    /// Meters per second.
    pub speed: f64,
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Center of the deployment area, where the CAP sits.
pub fn area_center(config: &ScenarioConfig) -> Point {
    Point::new(config.area_width_m / 2.0, config.area_height_m / 2.0)
}

pub fn inside(p: Point, config: &ScenarioConfig) -> bool {
    (0.0..=config.area_width_m).contains(&p.x) && (0.0..=config.area_height_m).contains(&p.y)
}

pub fn uniform_point(config: &ScenarioConfig, stream: &mut Stream) -> Point {
    Point::new(
        stream.random::<f64>() * config.area_width_m,
        stream.random::<f64>() * config.area_height_m,
    )
}

fn uniform_heading(stream: &mut Stream) -> f64 {
    stream.random::<f64>() * 2.0 * PI
}

/// Places `n_subnets` poses uniformly with pairwise distance at least
/// `min_separation_m`.
pub fn place_uniform(config: &ScenarioConfig, stream: &mut Stream) -> Result<Vec<SubnetPose>> {
    let n = config.n_subnets;
    let sep = config.min_separation_m;
    let area = config.area_width_m * config.area_height_m;
    if sep > 0.0 {
        let radius = sep / 2.0;
        let bound = area / (PI * radius * radius);
        if n as f64 > bound {
            return Err(Error::PlacementInfeasible(format!(
                "{n} subnets exceed packing bound {bound:.0} for {area} m² at {sep} m separation"
            )));
        }
    }

    let mut poses: Vec<SubnetPose> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    let cap = PLACEMENT_ATTEMPTS_PER_POSE * n;
    while poses.len() < n {
        attempts += 1;
        if attempts > cap {
            return Err(Error::PlacementInfeasible(format!(
                "placed {} of {n} subnets after {cap} attempts",
                poses.len()
            )));
        }
        let p = uniform_point(config, stream);
        if poses.iter().all(|q| distance(p, q.position) >= sep) {
            poses.push(SubnetPose {
                position: p,
                heading: uniform_heading(stream),
                speed: config.speed_mps,
            });
        }
    }
    Ok(poses)
}

/// Advances every pose by one slot.
///
/// Poses move in index order; each candidate step is checked against the
/// rectangle and against every other pose's current position (already moved
/// for lower indices). A rejected step resamples the heading, and after
/// [`MAX_HEADING_RESAMPLES`] failures the pose holds position.
pub fn step_mobility(poses: &mut [SubnetPose], config: &ScenarioConfig, stream: &mut Stream) {
    let dt = config.slot_ms / 1000.0;
    for i in 0..poses.len() {
        let mut pose = poses[i];
        let step = pose.speed * dt;
        // Falling through every attempt leaves the pose in place.
        for attempt in 0..=MAX_HEADING_RESAMPLES {
            if attempt > 0 {
                pose.heading = uniform_heading(stream);
            }
            let cand = Point::new(
                pose.position.x + step * pose.heading.cos(),
                pose.position.y + step * pose.heading.sin(),
            );
            let clear = poses
                .iter()
                .enumerate()
                .all(|(j, q)| j == i || distance(cand, q.position) >= config.min_separation_m);
            if inside(cand, config) && clear {
                pose.position = cand;
                break;
            }
        }
        poses[i] = pose;
    }
}
