//! Sparse voxelization of point clouds.
//!
//! Cells are stored in a map keyed by the linearized voxel index (x-major,
//! then y, then z — the order used by the dump format); empty cells take no
//! memory, which matters because real outdoor frames leave well over 90% of
//! the grid empty. Cells hold raw point indices only.

use crate::geometry::PointCloud;
use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VoxelError {
    #[error("non-positive range span on axis {axis}: [{min}, {max}]")]
    NonPositiveSpan { axis: usize, min: f64, max: f64 },
    #[error("non-positive voxel size on axis {axis}: {size}")]
    NonPositiveSize { axis: usize, size: f64 },
}

/// Grid parameterization: an axis-aligned crop range and per-axis voxel size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelConfig {
    pub range_min: [f64; 3],
    pub range_max: [f64; 3],
    pub voxel_size: [f64; 3],
}

impl VoxelConfig {
    /// KITTI car grid: x [0, 70.4], y [−40, 40], z [−3, 1], 5 cm × 5 cm × 10 cm.
    pub fn kitti() -> Self {
        Self {
            range_min: [0.0, -40.0, -3.0],
            range_max: [70.4, 40.0, 1.0],
            voxel_size: [0.05, 0.05, 0.1],
        }
    }

    /// Waymo vehicle grid: x, y [−75.2, 75.2], z [−2, 4], 10 cm × 10 cm × 15 cm.
    pub fn waymo() -> Self {
        Self {
            range_min: [-75.2, -75.2, -2.0],
            range_max: [75.2, 75.2, 4.0],
            voxel_size: [0.1, 0.1, 0.15],
        }
    }

    pub fn validate(&self) -> Result<(), VoxelError> {
        for axis in 0..3 {
            let span = self.range_max[axis] - self.range_min[axis];
            if span.is_nan() || span <= 0.0 {
                return Err(VoxelError::NonPositiveSpan {
                    axis,
                    min: self.range_min[axis],
                    max: self.range_max[axis],
                });
            }
            if self.voxel_size[axis].is_nan() || self.voxel_size[axis] <= 0.0 {
                return Err(VoxelError::NonPositiveSize {
                    axis,
                    size: self.voxel_size[axis],
                });
            }
        }
        Ok(())
    }
}

/// Per-axis cell counts: floor(span / size), with an epsilon guard so spans
/// that are exact multiples of the size don't lose a cell to rounding
/// (80 / 0.05 evaluates just below 1600 in f64).
pub fn grid_dims(config: &VoxelConfig) -> Result<[usize; 3], VoxelError> {
    config.validate()?;
    let mut dims = [0usize; 3];
    for (axis, dim) in dims.iter_mut().enumerate() {
        let span = config.range_max[axis] - config.range_min[axis];
        let quotient = span / config.voxel_size[axis];
        *dim = (quotient + 1e-9).floor() as usize;
    }
    Ok(dims)
}

/// Sparse occupancy grid: map from linearized cell index to the point
/// indices that landed in the cell.
#[derive(Debug, Clone)]
pub struct SparseVoxelGrid {
    config: VoxelConfig,
    dims: [usize; 3],
    cells: HashMap<u64, Vec<usize>>,
    stored_points: usize,
}

impl SparseVoxelGrid {
    pub fn config(&self) -> &VoxelConfig {
        &self.config
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn total_cells(&self) -> u64 {
        self.dims.iter().map(|&d| d as u64).product()
    }

    pub fn nonempty_cells(&self) -> usize {
        self.cells.len()
    }

    /// Number of in-range points stored across all cells.
    pub fn stored_points(&self) -> usize {
        self.stored_points
    }

    pub fn linear_index(&self, cell: [usize; 3]) -> u64 {
        ((cell[0] as u64 * self.dims[1] as u64) + cell[1] as u64) * self.dims[2] as u64
            + cell[2] as u64
    }

    pub fn cell_of_linear(&self, linear: u64) -> [usize; 3] {
        let nz = self.dims[2] as u64;
        let ny = self.dims[1] as u64;
        [
            (linear / (ny * nz)) as usize,
            ((linear / nz) % ny) as usize,
            (linear % nz) as usize,
        ]
    }

    pub fn points_in_cell(&self, cell: [usize; 3]) -> Option<&[usize]> {
        self.cells.get(&self.linear_index(cell)).map(Vec::as_slice)
    }

    /// Cells sorted by linear index, for deterministic iteration and dumps.
    pub fn sorted_cells(&self) -> Vec<([usize; 3], &[usize])> {
        let mut keys: Vec<u64> = self.cells.keys().copied().collect();
        keys.sort_unstable();
        keys.into_iter()
            .map(|k| (self.cell_of_linear(k), self.cells[&k].as_slice()))
            .collect()
    }

    /// World-space center of a cell.
    pub fn cell_center(&self, cell: [usize; 3]) -> [f64; 3] {
        let mut c = [0.0; 3];
        for axis in 0..3 {
            c[axis] = self.config.range_min[axis]
                + (cell[axis] as f64 + 0.5) * self.config.voxel_size[axis];
        }
        c
    }
}

/// Quantizes in-range points onto the grid.
///
/// The crop is half-open per axis: a point at exactly `range_max` is
/// dropped. In-range points whose quotient rounds onto the upper boundary
/// are clamped into the last cell so every in-range point is stored.
pub fn voxelize(cloud: &PointCloud, config: &VoxelConfig) -> Result<SparseVoxelGrid, VoxelError> {
    let dims = grid_dims(config)?;
    let mut grid = SparseVoxelGrid {
        config: *config,
        dims,
        cells: HashMap::new(),
        stored_points: 0,
    };
    'points: for i in 0..cloud.len() {
        let p = cloud.point(i);
        let mut cell = [0usize; 3];
        for axis in 0..3 {
            if p[axis] < config.range_min[axis] || p[axis] >= config.range_max[axis] {
                continue 'points;
            }
            let q = ((p[axis] - config.range_min[axis]) / config.voxel_size[axis]).floor();
            cell[axis] = (q.max(0.0) as usize).min(dims[axis] - 1);
        }
        let key = grid.linear_index(cell);
        grid.cells.entry(key).or_default().push(i);
        grid.stored_points += 1;
    }
    Ok(grid)
}

/// Occupancy summary of a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyStats {
    pub nonempty_count: usize,
    pub total_cells: u64,
    pub empty_fraction: f64,
}

pub fn occupancy_stats(grid: &SparseVoxelGrid) -> OccupancyStats {
    let total = grid.total_cells();
    let nonempty = grid.nonempty_cells();
    let empty_fraction = if total == 0 {
        1.0
    } else {
        1.0 - nonempty as f64 / total as f64
    };
    OccupancyStats {
        nonempty_count: nonempty,
        total_cells: total,
        empty_fraction,
    }
}

/// Dense per-column point counts after collapsing the grid along Z.
#[derive(Debug, Clone, PartialEq)]
pub struct BevCountMap {
    pub nx: usize,
    pub ny: usize,
    counts: Vec<u64>,
}

impl BevCountMap {
    pub fn at(&self, ix: usize, iy: usize) -> u64 {
        self.counts[ix * self.ny + iy]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

pub fn bev_collapse(grid: &SparseVoxelGrid) -> BevCountMap {
    let [nx, ny, _] = grid.dims();
    let mut counts = vec![0u64; nx * ny];
    for (cell, points) in grid.sorted_cells() {
        counts[cell[0] * ny + cell[1]] += points.len() as u64;
    }
    BevCountMap { nx, ny, counts }
}

/// Writes the grid dump: a `#`-prefixed header with dims and config, then
/// one `ix iy iz count` line per nonempty cell in linear-index order.
pub fn write_grid_dump<W: Write>(grid: &SparseVoxelGrid, mut out: W) -> io::Result<()> {
    let [nx, ny, nz] = grid.dims();
    let c = grid.config();
    writeln!(out, "# dims {nx} {ny} {nz}")?;
    writeln!(
        out,
        "# range_min {} {} {}",
        c.range_min[0], c.range_min[1], c.range_min[2]
    )?;
    writeln!(
        out,
        "# range_max {} {} {}",
        c.range_max[0], c.range_max[1], c.range_max[2]
    )?;
    writeln!(
        out,
        "# voxel_size {} {} {}",
        c.voxel_size[0], c.voxel_size[1], c.voxel_size[2]
    )?;
    for (cell, points) in grid.sorted_cells() {
        writeln!(out, "{} {} {} {}", cell[0], cell[1], cell[2], points.len())?;
    }
    Ok(())
}

/// Reads back the nonempty-cell portion of a grid dump as (cell, count) rows.
pub fn read_grid_dump<R: BufRead>(reader: R) -> io::Result<Vec<([usize; 3], usize)>> {
    let mut rows = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("expected 4 fields in grid dump line, got {}", fields.len()),
            ));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
        };
        rows.push((
            [parse(fields[0])?, parse(fields[1])?, parse(fields[2])?],
            parse(fields[3])?,
        ));
    }
    Ok(rows)
}
