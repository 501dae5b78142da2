//! `pcs-stats`: per-object completeness scores, their histogram, and the
//! sparsity-group breakdown.

use crate::config::Settings;
use crate::frames::load_frames;
use crate::table::{fmt_f64, Table};
use anyhow::{Context, Result};
use lidarkit::completeness::{score_histogram, sparsity_level, SparsityLevel};

pub fn run(settings: &Settings) -> Result<Vec<String>> {
    let root = settings
        .dataset_root
        .as_deref()
        .context("pcs-stats requires --dataset-root")?;
    let load = load_frames(root, settings.dataset_kind, true, Some(&settings.classes));

    let mut scores_table = Table::new(&["frame", "object", "class", "q", "num_points", "level"]);
    let mut scores = Vec::new();
    for frame in &load.frames {
        for (i, gt) in frame.record.ground_truths.iter().enumerate() {
            let level = sparsity_level(gt.q)
                .map(|l| l.name().to_string())
                .unwrap_or_else(|_| "invalid".to_string());
            scores_table.push(vec![
                frame.record.frame_id.clone(),
                i.to_string(),
                gt.class_name.clone(),
                fmt_f64(gt.q),
                gt.num_points.to_string(),
                level,
            ]);
            scores.push(gt.q);
        }
    }

    let mut histogram_table = Table::new(&["lo", "hi", "count", "fraction"]);
    for bin in score_histogram(scores.iter().copied(), settings.bin_width)? {
        histogram_table.push(vec![
            fmt_f64(bin.lo),
            fmt_f64(bin.hi),
            bin.count.to_string(),
            fmt_f64(bin.fraction),
        ]);
    }

    let mut sparsity_counts = [0usize; 3];
    for &q in &scores {
        if let Ok(level) = sparsity_level(q) {
            let idx = match level {
                SparsityLevel::Sparse => 0,
                SparsityLevel::Modest => 1,
                SparsityLevel::Complete => 2,
            };
            sparsity_counts[idx] += 1;
        }
    }
    let total = scores.len().max(1);
    let mut sparsity_table = Table::new(&["level", "count", "fraction"]);
    for (name, count) in ["Sparse", "Modest", "Complete"].iter().zip(sparsity_counts) {
        sparsity_table.push(vec![
            name.to_string(),
            count.to_string(),
            fmt_f64(count as f64 / total as f64),
        ]);
    }

    let echo = settings.echo();
    scores_table.write_to(&settings.out.join("pcs_scores.tsv"), "pcs-stats", settings.seed, &echo)?;
    histogram_table.write_to(
        &settings.out.join("pcs_histogram.tsv"),
        "pcs-stats",
        settings.seed,
        &echo,
    )?;
    sparsity_table.write_to(
        &settings.out.join("pcs_sparsity.tsv"),
        "pcs-stats",
        settings.seed,
        &echo,
    )?;
    println!(
        "pcs-stats: {} objects over {} frames -> {}",
        scores.len(),
        load.frames.len(),
        settings.out.display()
    );
    Ok(load.errors)
}
