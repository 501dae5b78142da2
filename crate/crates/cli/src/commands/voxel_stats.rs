//! `voxel-stats`: per-frame and aggregate occupancy under the configured
//! grid.

use crate::config::{DatasetKind, Settings};
use crate::frames::waymo_cloud_path;
use crate::table::{fmt_f64, Table};
use anyhow::{Context, Result};
use lidarkit::dataset::kitti as kio;
use lidarkit::voxel::{grid_dims, occupancy_stats, voxelize, write_grid_dump};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

pub fn run(settings: &Settings, dump_dir: Option<&Path>) -> Result<Vec<String>> {
    let root = settings
        .dataset_root
        .as_deref()
        .context("voxel-stats requires --dataset-root")?;
    let velodyne_dir = root.join("velodyne");
    let ids = kio::list_frame_ids(&velodyne_dir)?;
    let dims = grid_dims(&settings.voxel)?;
    if let Some(dir) = dump_dir {
        std::fs::create_dir_all(dir)?;
    }

    type FrameStats = (usize, usize, usize, u64, f64);
    let results: Vec<(String, Result<FrameStats, String>)> = ids
        .par_iter()
        .map(|id| {
            let path: PathBuf = match settings.dataset_kind {
                DatasetKind::Kitti => kio::velodyne_path(root, id),
                DatasetKind::WaymoExport => waymo_cloud_path(root, id),
            };
            let outcome = kio::read_velodyne_bin(&path)
                .map_err(|e| e.to_string())
                .and_then(|read| {
                    let grid = voxelize(&read.cloud, &settings.voxel).map_err(|e| e.to_string())?;
                    if let Some(dir) = dump_dir {
                        let file = std::fs::File::create(dir.join(format!("{id}.voxels")))
                            .map_err(|e| e.to_string())?;
                        write_grid_dump(&grid, std::io::BufWriter::new(file))
                            .map_err(|e| e.to_string())?;
                    }
                    let stats = occupancy_stats(&grid);
                    Ok((
                        read.cloud.len(),
                        grid.stored_points(),
                        stats.nonempty_count,
                        stats.total_cells,
                        stats.empty_fraction,
                    ))
                });
            (id.clone(), outcome)
        })
        .collect();

    let mut results = results;
    results.sort_by(|a, b| a.0.cmp(&b.0));

    let mut table = Table::new(&[
        "frame",
        "points",
        "in_range",
        "nonempty_cells",
        "total_cells",
        "empty_fraction",
    ]);
    let mut errors = Vec::new();
    let mut agg_nonempty = 0u64;
    let mut agg_total = 0u64;
    let mut frames_ok = 0usize;
    for (id, outcome) in results {
        match outcome {
            Ok((points, in_range, nonempty, total, empty_fraction)) => {
                table.push(vec![
                    id,
                    points.to_string(),
                    in_range.to_string(),
                    nonempty.to_string(),
                    total.to_string(),
                    fmt_f64(empty_fraction),
                ]);
                agg_nonempty += nonempty as u64;
                agg_total += total;
                frames_ok += 1;
            }
            Err(e) => errors.push(e),
        }
    }
    let aggregate_empty = if agg_total == 0 {
        1.0
    } else {
        1.0 - agg_nonempty as f64 / agg_total as f64
    };
    table.push(vec![
        "aggregate".to_string(),
        String::new(),
        String::new(),
        agg_nonempty.to_string(),
        agg_total.to_string(),
        fmt_f64(aggregate_empty),
    ]);

    let echo = format!("{} dims={},{},{}", settings.echo(), dims[0], dims[1], dims[2]);
    table.write_to(&settings.out.join("voxel_stats.tsv"), "voxel-stats", settings.seed, &echo)?;
    println!(
        "voxel-stats: dims ({}, {}, {}), {} frames, aggregate empty fraction {:.4} -> {}",
        dims[0],
        dims[1],
        dims[2],
        frames_ok,
        aggregate_empty,
        settings.out.display()
    );
    Ok(errors)
}
