//! `report`: regenerate charts from a results CSV (sweep or few-shot).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cicl_core::{Error, Result};

use crate::chart::{mean_series, Chart};

use super::{create_writer, finish, open_reader};
use std::io::BufRead;

pub fn run(csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let reader = open_reader(csv)?;
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty results csv".to_string()))??;
    let columns: Vec<&str> = header.split(',').collect();
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
        if fields.len() != columns.len() {
            return Err(Error::Data(format!("ragged csv row: {line:?}")));
        }
        rows.push(fields);
    }
    std::fs::create_dir_all(out_dir)?;
    match columns.as_slice() {
        ["task", "heuristic", "k", "seed", "spearman", "coverage"] => {
            charts(&rows, out_dir, 2, &[(4, "spearman r", "", true)])
        }
        ["task", "heuristic", "shots", "seed", "median_rank", "spearman", "coverage"] => charts(
            &rows,
            out_dir,
            2,
            &[
                (4, "median rank", "-rank", false),
                (5, "spearman r", "-spearman", false),
            ],
        ),
        _ => Err(Error::Data(format!("unrecognized results header: {header}"))),
    }
}

fn charts(
    rows: &[Vec<String>],
    out_dir: &Path,
    x_col: usize,
    metrics: &[(usize, &str, &str, bool)],
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for &(y_col, y_label, suffix, log2_x) in metrics {
        let mut by_task: BTreeMap<&str, Vec<(String, f64, f64)>> = BTreeMap::new();
        for row in rows {
            let x: f64 = row[x_col]
                .parse()
                .map_err(|_| Error::Data(format!("bad numeric field {:?}", row[x_col])))?;
            let y: f64 = row[y_col]
                .parse()
                .map_err(|_| Error::Data(format!("bad numeric field {:?}", row[y_col])))?;
            by_task
                .entry(row[0].as_str())
                .or_default()
                .push((row[1].clone(), x, y));
        }
        for (task, entries) in by_task {
            let chart = Chart {
                title: format!("{task}: {y_label}"),
                x_label: "sentences per target word".to_string(),
                y_label: y_label.to_string(),
                log2_x,
                series: mean_series(&entries),
            };
            let path = out_dir.join(format!("{task}{suffix}.svg"));
            let mut w = create_writer(&path)?;
            chart.write_svg(&mut w)?;
            finish(w)?;
            written.push(path);
        }
    }
    Ok(written)
}
