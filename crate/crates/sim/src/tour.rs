//! Deterministic exploration tour: repeatedly drive to the nearest
//! reachable free cell that is still unknown.

use std::collections::VecDeque;

use rosdeck_core::msg::{OccupancyGrid, Twist};
use rosdeck_core::wrap_angle;

use crate::world::World;

pub const TOUR_SPEED: f64 = 0.5;
pub const TOUR_TURN_RATE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TourStep {
    pub cmd: Twist,
    pub duration: f64,
}

/// BFS through free cells; returns the path (excluding `start`) to the
/// nearest free cell not yet revealed.
fn path_to_frontier(world: &World, start: (usize, usize)) -> Option<Vec<(usize, usize)>> {
    let plan = &world.plan;
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; plan.width() * plan.height()];
    let mut seen = vec![false; parent.len()];
    seen[plan.index(start.0, start.1)] = true;
    let mut q = VecDeque::from([start]);
    while let Some(c) = q.pop_front() {
        if world.known.get(c.0, c.1) == OccupancyGrid::UNKNOWN {
            let mut path = vec![c];
            let mut cur = c;
            while let Some(p) = parent[plan.index(cur.0, cur.1)] {
                if p == start {
                    break;
                }
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        for n in plan.free_neighbours(c.0, c.1) {
            let k = plan.index(n.0, n.1);
            if !seen[k] {
                seen[k] = true;
                parent[k] = Some(c);
                q.push_back(n);
            }
        }
    }
    None
}

/// Collapses a cell path into its turning points.
fn corners(start: (usize, usize), path: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let dir = |a: (usize, usize), b: (usize, usize)| (b.0 as i64 - a.0 as i64, b.1 as i64 - a.1 as i64);
    let mut out = Vec::new();
    let mut prev = start;
    for (k, &c) in path.iter().enumerate() {
        match path.get(k + 1) {
            Some(&next) if dir(prev, c) == dir(c, next) => {}
            _ => out.push(c),
        }
        prev = c;
    }
    out
}

fn turn_and_drive(world: &mut World, steps: &mut Vec<TourStep>, target: (f64, f64)) {
    let pose = world.robot.pose;
    let (dx, dy) = (target.0 - pose.x, target.1 - pose.y);
    let dist = dx.hypot(dy);
    if dist < 1e-9 {
        return;
    }
    let turn = wrap_angle(dy.atan2(dx) - pose.theta);
    if turn.abs() > 1e-12 {
        let step = TourStep { cmd: Twist::planar(0.0, TOUR_TURN_RATE * turn.signum()), duration: turn.abs() / TOUR_TURN_RATE };
        world.drive(&step.cmd, step.duration);
        steps.push(step);
    }
    let step = TourStep { cmd: Twist::planar(TOUR_SPEED, 0.0), duration: dist / TOUR_SPEED };
    world.drive(&step.cmd, step.duration);
    steps.push(step);
}

/// Plans the tour from the world's current state. The returned steps,
/// replayed with [`World::drive`] from the same state, reproduce the run.
pub fn plan_tour(world: &World) -> Vec<TourStep> {
    let mut w = world.clone();
    let mut steps = Vec::new();
    let Some(mut cell) = w.plan.cell_at(w.robot.pose.x, w.robot.pose.y) else {
        return steps;
    };
    let target = w.plan.cell_center(cell.0, cell.1);
    turn_and_drive(&mut w, &mut steps, target);
    while let Some(path) = path_to_frontier(&w, cell) {
        for c in corners(cell, &path) {
            let target = w.plan.cell_center(c.0, c.1);
            turn_and_drive(&mut w, &mut steps, target);
        }
        cell = *path.last().expect("frontier paths are nonempty");
        if w.known.get(cell.0, cell.1) == OccupancyGrid::UNKNOWN {
            break;
        }
    }
    steps
}

/// Replays `steps` on `world`.
pub fn run_tour(world: &mut World, steps: &[TourStep]) {
    for s in steps {
        world.drive(&s.cmd, s.duration);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floorplan::Floorplan;
    use rosdeck_core::Pose2d;

    #[test]
    fn corners_keep_turning_points() {
        let path = [(1, 0), (2, 0), (2, 1), (2, 2)];
        assert_eq!(corners((0, 0), &path), vec![(2, 0), (2, 2)]);
    }

    #[test]
    fn tour_reveals_small_plan() {
        let plan = Floorplan::parse(
            "##############\n#......#.....#\n#......#.....#\n#............#\n##############",
            0.5,
        )
        .unwrap();
        let (x, y) = plan.cell_center(1, 1);
        let world = World::new(plan, Pose2d::new(x, y, 0.0), 0.6);
        let steps = plan_tour(&world);
        let mut w = world.clone();
        run_tour(&mut w, &steps);
        for (i, j) in w.plan.free_cells() {
            assert_eq!(w.known.get(i, j), 0, "cell {i},{j}");
        }
    }
}
