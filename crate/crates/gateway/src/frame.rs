//! Occupancy grids to dashboard frames.

use rosdeck_core::msg::OccupancyGrid;
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_BUDGET: u32 = 512;
/// Frame cell value for unknown.
pub const UNKNOWN_CELL: u8 = 255;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("malformed grid: {0}")]
    Malformed(String),
    #[error("budget must be positive")]
    ZeroBudget,
    #[error("cell value {0} is neither 255 nor in 0..=100")]
    OutOfRange(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameOrigin {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFrame {
    pub widget: String,
    pub width: u32,
    pub height: u32,
    /// Meters per frame cell.
    pub resolution: f64,
    pub origin: FrameOrigin,
    /// Row-major, 255 unknown or 0..=100.
    pub cells: Vec<u8>,
    /// `header.seq` of the source grid.
    pub seq: u32,
}

/// Smallest integer factor bringing both dimensions within `budget`.
pub fn downsample_factor(width: u32, height: u32, budget: u32) -> Result<u32, FrameError> {
    if budget == 0 {
        return Err(FrameError::ZeroBudget);
    }
    Ok(width.div_ceil(budget).max(height.div_ceil(budget)).max(1))
}

/// Block-max downsampling with unknown ranked below free; edge blocks use
/// the cells they cover.
pub fn gridmap_to_frame(widget: &str, g: &OccupancyGrid, budget: u32) -> Result<GridFrame, FrameError> {
    g.validate().map_err(|e| FrameError::Malformed(e.to_string()))?;
    let (w, h) = (g.info.width as usize, g.info.height as usize);
    let k = downsample_factor(g.info.width, g.info.height, budget)? as usize;
    let (fw, fh) = (w.div_ceil(k), h.div_ceil(k));
    let mut cells = vec![UNKNOWN_CELL; fw * fh];
    for fy in 0..fh {
        for fx in 0..fw {
            let mut best: i8 = -1;
            for y in fy * k..((fy + 1) * k).min(h) {
                let row = &g.data[y * w..(y + 1) * w];
                for &v in &row[fx * k..((fx + 1) * k).min(w)] {
                    best = best.max(v);
                }
            }
            if best >= 0 {
                cells[fy * fw + fx] = best as u8;
            }
        }
    }
    let o = &g.info.origin;
    Ok(GridFrame {
        widget: widget.to_string(),
        width: fw as u32,
        height: fh as u32,
        resolution: g.info.resolution as f64 * k as f64,
        origin: FrameOrigin { x: o.position.x, y: o.position.y, yaw: o.orientation.yaw() },
        cells,
        seq: g.header.seq,
    })
}

/// 255 (unknown) is mid-gray; 0 is white and 100 black, rounding half up.
pub fn occupancy_to_gray(v: u8) -> Result<u8, FrameError> {
    match v {
        UNKNOWN_CELL => Ok(128),
        0..=100 => Ok(((255 * (100 - v as u32) + 50) / 100) as u8),
        other => Err(FrameError::OutOfRange(other)),
    }
}
