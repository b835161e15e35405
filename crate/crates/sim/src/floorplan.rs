//! ASCII floorplans: `#` is wall, `.` is free.
//!
//! The first text line is the top of the map (largest y). Cell `(i, j)` has
//! its lower-left corner at `(i * res, j * res)` with `j = 0` the bottom row,
//! matching occupancy-grid row order.

use std::collections::VecDeque;
use std::path::Path;

use thiserror::Error;

pub const DEFAULT_RESOLUTION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum FloorplanError {
    #[error("cannot read floorplan: {0}")]
    Io(#[from] std::io::Error),
    #[error("floorplan is empty")]
    Empty,
    #[error("line {line}: expected {expected} cells, found {found}")]
    Ragged { line: usize, expected: usize, found: usize },
    #[error("line {line}, column {column}: unexpected character {ch:?}")]
    BadChar { line: usize, column: usize, ch: char },
    #[error("line {line}, column {column}: border cell is not a wall")]
    OpenBorder { line: usize, column: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Floorplan {
    width: usize,
    height: usize,
    resolution: f64,
    /// Row-major from the bottom row; `true` is wall.
    walls: Vec<bool>,
}

impl Floorplan {
    pub fn parse(text: &str, resolution: f64) -> Result<Floorplan, FloorplanError> {
        let lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
        let lines: Vec<&str> = match lines.iter().rposition(|l| !l.is_empty()) {
            Some(last) => lines[..=last].to_vec(),
            None => return Err(FloorplanError::Empty),
        };
        let width = lines[0].chars().count();
        let height = lines.len();
        let mut walls = vec![false; width * height];
        for (li, line) in lines.iter().enumerate() {
            let found = line.chars().count();
            if found != width {
                return Err(FloorplanError::Ragged { line: li + 1, expected: width, found });
            }
            let j = height - 1 - li;
            for (i, ch) in line.chars().enumerate() {
                let wall = match ch {
                    '#' => true,
                    '.' => false,
                    ch => return Err(FloorplanError::BadChar { line: li + 1, column: i + 1, ch }),
                };
                let border = li == 0 || li == height - 1 || i == 0 || i == width - 1;
                if border && !wall {
                    return Err(FloorplanError::OpenBorder { line: li + 1, column: i + 1 });
                }
                walls[j * width + i] = wall;
            }
        }
        Ok(Floorplan { width, height, resolution, walls })
    }

    pub fn load(path: impl AsRef<Path>, resolution: f64) -> Result<Floorplan, FloorplanError> {
        Floorplan::parse(&std::fs::read_to_string(path)?, resolution)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    pub fn is_wall(&self, i: usize, j: usize) -> bool {
        self.walls[self.index(i, j)]
    }

    /// Cell containing world point `(x, y)`, if inside the plan.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (fi, fj) = ((x / self.resolution).floor(), (y / self.resolution).floor());
        if fi < 0.0 || fj < 0.0 || fi >= self.width as f64 || fj >= self.height as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }

    /// True for points in wall cells or off the plan.
    pub fn blocks(&self, x: f64, y: f64) -> bool {
        self.cell_at(x, y).is_none_or(|(i, j)| self.is_wall(i, j))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.resolution, (j as f64 + 0.5) * self.resolution)
    }

    pub fn free_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height).flat_map(move |j| (0..self.width).map(move |i| (i, j))).filter(|&(i, j)| !self.is_wall(i, j))
    }

    pub fn free_count(&self) -> usize {
        self.walls.iter().filter(|w| !**w).count()
    }

    /// Free 4-neighbours of a cell.
    pub fn free_neighbours(&self, i: usize, j: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cand = [
            (i.wrapping_sub(1), j),
            (i + 1, j),
            (i, j.wrapping_sub(1)),
            (i, j + 1),
        ];
        cand.into_iter().filter(|&(a, b)| a < self.width && b < self.height && !self.is_wall(a, b))
    }

    /// BFS distances (in cells, 4-connected) from `start`; `None` when unreachable.
    pub fn distances_from(&self, start: (usize, usize)) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.walls.len()];
        if self.is_wall(start.0, start.1) {
            return dist;
        }
        dist[self.index(start.0, start.1)] = Some(0);
        let mut q = VecDeque::from([start]);
        while let Some((i, j)) = q.pop_front() {
            let d = dist[self.index(i, j)].expect("queued cells have a distance");
            for (a, b) in self.free_neighbours(i, j) {
                let k = self.index(a, b);
                if dist[k].is_none() {
                    dist[k] = Some(d + 1);
                    q.push_back((a, b));
                }
            }
        }
        dist
    }

    /// Free cell closest (Euclidean, ties by row then column) to the plan center.
    pub fn central_free_cell(&self) -> Option<(usize, usize)> {
        let (cx, cy) = (self.width as f64 / 2.0, self.height as f64 / 2.0);
        self.free_cells().min_by(|a, b| {
            let da = (a.0 as f64 + 0.5 - cx).powi(2) + (a.1 as f64 + 0.5 - cy).powi(2);
            let db = (b.0 as f64 + 0.5 - cx).powi(2) + (b.1 as f64 + 0.5 - cy).powi(2);
            da.total_cmp(&db).then((a.1, a.0).cmp(&(b.1, b.0)))
        })
    }
}
