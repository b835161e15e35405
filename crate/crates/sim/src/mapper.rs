//! Reveal mapper: uncovers ground truth around the robot.

use rosdeck_core::msg::{Header, MapMetaData, OccupancyGrid, Point, Pose, Quaternion, RosTime};

use crate::floorplan::Floorplan;

pub const DEFAULT_SENSOR_RADIUS: f64 = 1.0;

/// The robot's accumulated knowledge, laid out like the floorplan.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownMap {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<i8>,
    revealed: usize,
}

impl KnownMap {
    pub fn unknown(plan: &Floorplan) -> Self {
        KnownMap {
            width: plan.width(),
            height: plan.height(),
            resolution: plan.resolution(),
            cells: vec![OccupancyGrid::UNKNOWN; plan.width() * plan.height()],
            revealed: 0,
        }
    }

    pub fn cells(&self) -> &[i8] {
        &self.cells
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.cells[j * self.width + i]
    }

    pub fn revealed(&self) -> usize {
        self.revealed
    }

    /// Reveals every cell whose center lies within `radius` of `(x, y)`.
    /// Returns the number of newly revealed cells.
    pub fn reveal(&mut self, plan: &Floorplan, x: f64, y: f64, radius: f64) -> usize {
        assert_eq!((plan.width(), plan.height()), (self.width, self.height), "plan and map dims differ");
        let res = self.resolution;
        let span = |c: f64, n: usize| {
            let lo = ((c - radius) / res - 0.5).floor().max(0.0);
            let hi = ((c + radius) / res - 0.5).ceil().min(n as f64 - 1.0);
            (lo as usize, hi)
        };
        let (i0, i1) = span(x, self.width);
        let (j0, j1) = span(y, self.height);
        if i1 < 0.0 || j1 < 0.0 {
            return 0;
        }
        let r2 = radius * radius;
        let mut fresh = 0;
        for j in j0..=j1 as usize {
            for i in i0..=i1 as usize {
                let (cx, cy) = plan.cell_center(i, j);
                if (cx - x).powi(2) + (cy - y).powi(2) > r2 {
                    continue;
                }
                let k = j * self.width + i;
                if self.cells[k] == OccupancyGrid::UNKNOWN {
                    self.cells[k] = if plan.is_wall(i, j) { OccupancyGrid::OCCUPIED } else { OccupancyGrid::FREE };
                    fresh += 1;
                }
            }
        }
        self.revealed += fresh;
        fresh
    }

    pub fn to_grid(&self, seq: u32, stamp: RosTime, load_time: RosTime) -> OccupancyGrid {
        OccupancyGrid {
            header: Header { seq, stamp, frame_id: "map".into() },
            info: MapMetaData {
                map_load_time: load_time,
                resolution: self.resolution as f32,
                width: self.width as u32,
                height: self.height as u32,
                origin: Pose { position: Point::default(), orientation: Quaternion::default() },
            },
            data: self.cells.clone(),
        }
    }
}
