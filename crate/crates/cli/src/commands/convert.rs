//! `convert`: camera-frame KITTI labels to a LiDAR-frame box dump.

use crate::config::Settings;
use crate::frames::load_frames;
use crate::table::{fmt_f64, Table};
use anyhow::{Context, Result};

pub fn run(settings: &Settings) -> Result<Vec<String>> {
    let root = settings
        .dataset_root
        .as_deref()
        .context("convert requires --dataset-root")?;
    let load = load_frames(root, settings.dataset_kind, false, Some(&settings.classes));

    let mut table = Table::new(&[
        "frame", "class", "cx", "cy", "cz", "l", "w", "h", "yaw", "difficulty",
    ]);
    let mut rows = 0usize;
    for frame in &load.frames {
        for gt in &frame.record.ground_truths {
            let b = &gt.box3d;
            table.push(vec![
                frame.record.frame_id.clone(),
                gt.class_name.clone(),
                fmt_f64(b.cx),
                fmt_f64(b.cy),
                fmt_f64(b.cz),
                fmt_f64(b.l),
                fmt_f64(b.w),
                fmt_f64(b.h),
                fmt_f64(b.yaw),
                gt.difficulty.name().to_string(),
            ]);
            rows += 1;
        }
    }
    table.write_to(
        &settings.out.join("lidar_boxes.tsv"),
        "convert",
        settings.seed,
        &settings.echo(),
    )?;
    println!(
        "convert: {} boxes over {} frames -> {}",
        rows,
        load.frames.len(),
        settings.out.display()
    );
    Ok(load.errors)
}
