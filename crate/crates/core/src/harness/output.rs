use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsom::{self, SomMap};
use crate::qlearn::WeightVector;

use super::curriculum::{RunMetrics, Strategy};
use super::scaling::ScalingRecord;
use super::stats::{trailing_mean, trailing_mean_finite};

pub const RETURNS_HEADER: [&str; 5] = ["run", "task", "episode", "strategy", "avg_return"];
pub const SIMILARITY_HEADER: [&str; 4] = ["run", "task", "episode", "best_similarity"];
pub const NODES_HEADER: [&str; 3] = ["run", "after_task", "node_count"];
pub const SCALING_HEADER: [&str; 3] = ["g_t", "task_count", "node_count"];
pub const SOM_NODES_HEADER: [&str; 5] = ["node", "row", "col", "best_task", "similarity"];

const PLOT_SCRIPTS: [(&str, &str); 4] = [
    ("plot_returns.py", include_str!("../../scripts/plot_returns.py")),
    ("plot_similarity.py", include_str!("../../scripts/plot_similarity.py")),
    ("plot_map.py", include_str!("../../scripts/plot_map.py")),
    ("plot_scaling.py", include_str!("../../scripts/plot_scaling.py")),
];

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Format {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs whose similarity and node-count timelines are reported: the
/// SOM-guided runs when there are any, all runs otherwise.
fn reported_runs(runs: &[RunMetrics]) -> Vec<&RunMetrics> {
    let guided: Vec<&RunMetrics> = runs.iter().filter(|r| r.strategy == Strategy::SomGuided).collect();
    if guided.is_empty() {
        runs.iter().collect()
    } else {
        guided
    }
}

fn returns_rows(runs: &[RunMetrics], window: Option<usize>) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in runs {
        for t in &r.tasks {
            let values = match window {
                Some(w) => trailing_mean(&t.returns, w),
                None => t.returns.clone(),
            };
            for (e, v) in values.iter().enumerate() {
                rows.push(vec![
                    r.run.to_string(),
                    t.task.to_string(),
                    (e + 1).to_string(),
                    r.strategy.to_string(),
                    v.to_string(),
                ]);
            }
        }
    }
    rows
}

fn similarity_rows(runs: &[&RunMetrics], window: Option<usize>) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in runs {
        for t in &r.tasks {
            let values = match window {
                Some(w) => trailing_mean_finite(&t.similarity, w),
                None => t.similarity.clone(),
            };
            for (e, v) in values.iter().enumerate() {
                rows.push(vec![r.run.to_string(), t.task.to_string(), (e + 1).to_string(), v.to_string()]);
            }
        }
    }
    rows
}

/// Stored weights of one learned task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub format: String,
    pub version: u32,
    pub task: usize,
    pub name: String,
    pub weights: WeightVector,
}

const WEIGHTS_FORMAT: &str = "somrl-weights";
const WEIGHTS_VERSION: u32 = 1;

pub fn save_weights(task: usize, name: &str, w: &WeightVector, path: &Path) -> Result<()> {
    let file = WeightsFile {
        format: WEIGHTS_FORMAT.into(),
        version: WEIGHTS_VERSION,
        task,
        name: name.into(),
        weights: w.clone(),
    };
    let text = serde_json::to_string(&file).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: &Path) -> Result<WeightsFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let file: WeightsFile = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if file.format != WEIGHTS_FORMAT {
        return Err(bad(format!("unexpected format tag {:?}", file.format)));
    }
    if file.version != WEIGHTS_VERSION {
        return Err(bad(format!("unsupported version {}", file.version)));
    }
    Ok(file)
}

pub fn map_path(dir: &Path, run: usize, strategy: Strategy) -> PathBuf {
    dir.join("maps").join(format!("run-{run}-{strategy}.json"))
}

pub fn weights_path(dir: &Path, run: usize, strategy: Strategy, task: usize) -> PathBuf {
    dir.join("weights").join(format!("run-{run}-{strategy}-task-{task}.json"))
}

/// Writes the curriculum CSVs (raw and smoothed), the final maps and the
/// learned weights of every run.
pub fn write_curriculum_outputs(
    runs: &[RunMetrics],
    gsom_cfg: Option<&gsom::GsomConfig>,
    dir: &Path,
    window: usize,
) -> Result<()> {
    create_dir(dir)?;
    write_rows(&dir.join("returns.csv"), &RETURNS_HEADER, returns_rows(runs, None))?;
    write_rows(
        &dir.join("returns_smoothed.csv"),
        &RETURNS_HEADER,
        returns_rows(runs, Some(window)),
    )?;
    let reported = reported_runs(runs);
    write_rows(&dir.join("similarity.csv"), &SIMILARITY_HEADER, similarity_rows(&reported, None))?;
    write_rows(
        &dir.join("similarity_smoothed.csv"),
        &SIMILARITY_HEADER,
        similarity_rows(&reported, Some(window)),
    )?;
    let nodes = reported.iter().flat_map(|r| {
        r.node_counts
            .iter()
            .enumerate()
            .map(move |(k, n)| vec![r.run.to_string(), k.to_string(), n.to_string()])
    });
    write_rows(&dir.join("nodes.csv"), &NODES_HEADER, nodes)?;
    let failures = runs
        .iter()
        .filter_map(|r| r.failure.as_ref().map(|f| vec![r.run.to_string(), r.strategy.to_string(), f.clone()]));
    write_rows(&dir.join("failures.csv"), &["run", "strategy", "reason"], failures)?;

    if !runs.is_empty() {
        create_dir(&dir.join("maps"))?;
        create_dir(&dir.join("weights"))?;
    }
    for r in runs {
        r.map.save(gsom_cfg, &map_path(dir, r.run, r.strategy))?;
        for t in &r.tasks {
            save_weights(t.task, &t.name, &t.weights, &weights_path(dir, r.run, r.strategy, t.task))?;
        }
    }
    Ok(())
}

pub fn write_scaling_outputs(records: &[ScalingRecord], dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let rows = records
        .iter()
        .map(|r| vec![r.g_t.to_string(), r.task_count.to_string(), r.node_count.to_string()]);
    write_rows(&dir.join("scaling.csv"), &SCALING_HEADER, rows)
}

pub fn write_plot_scripts(dir: &Path) -> Result<()> {
    create_dir(dir)?;
    for (name, body) in PLOT_SCRIPTS {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Writes every output file: curriculum CSVs, maps and weights, the scaling
/// CSV and the plot scripts. Empty inputs give header-only CSVs.
pub fn emit_outputs(
    runs: &[RunMetrics],
    scaling: &[ScalingRecord],
    gsom_cfg: Option<&gsom::GsomConfig>,
    dir: &Path,
    window: usize,
) -> Result<()> {
    write_curriculum_outputs(runs, gsom_cfg, dir, window)?;
    write_scaling_outputs(scaling, dir)?;
    write_plot_scripts(dir)
}

/// The task a map node represents best.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSummary {
    pub node: usize,
    pub row: usize,
    pub col: usize,
    /// One-based task number.
    pub best_task: usize,
    pub similarity: f64,
}

/// For every node, the stored task it is most similar to.
pub fn summarize_nodes(map: &SomMap, tasks: &[WeightVector]) -> Result<Vec<NodeSummary>> {
    if tasks.is_empty() {
        return Err(Error::contract("no task weights to compare against"));
    }
    (0..map.len())
        .map(|i| {
            let node = WeightVector::from_vec(map.node_weights(i).to_vec());
            let mut best = (0, f64::NEG_INFINITY);
            for (k, w) in tasks.iter().enumerate() {
                let c = gsom::cosine_similarity(&node, w)?;
                if c > best.1 {
                    best = (k, c);
                }
            }
            let (row, col) = map.grid_position(i);
            Ok(NodeSummary {
                node: i,
                row,
                col,
                best_task: best.0 + 1,
                similarity: best.1,
            })
        })
        .collect()
}

/// Reloads the map and task weights a curriculum run saved under `dir`.
pub fn load_run(dir: &Path, run: usize, strategy: Strategy) -> Result<(SomMap, Vec<WeightVector>)> {
    let (map, _) = SomMap::load(&map_path(dir, run, strategy))?;
    let mut tasks = Vec::new();
    for k in 1.. {
        let path = weights_path(dir, run, strategy, k);
        if !path.exists() {
            break;
        }
        tasks.push(load_weights(&path)?.weights);
    }
    Ok((map, tasks))
}

pub fn write_node_summary(nodes: &[NodeSummary], path: &Path) -> Result<()> {
    let rows = nodes.iter().map(|n| {
        vec![
            n.node.to_string(),
            n.row.to_string(),
            n.col.to_string(),
            n.best_task.to_string(),
            n.similarity.to_string(),
        ]
    });
    write_rows(path, &SOM_NODES_HEADER, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        let w = WeightVector::from_vec(vec![0.1, -1.0 / 3.0, 1e-300, f64::MAX, -0.0]);
        save_weights(2, "task-2", &w, &path).unwrap();
        let back = load_weights(&path).unwrap();
        assert_eq!(back.task, 2);
        for (a, b) in w.as_slice().iter().zip(back.weights.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn foreign_weights_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        fs::write(&path, r#"{"format":"other","version":1,"task":1,"name":"","weights":[1.0]}"#).unwrap();
        assert!(matches!(load_weights(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn nodes_are_labelled_with_their_closest_task() {
        let map = SomMap::from_nodes(
            1,
            2,
            vec![
                WeightVector::from_vec(vec![1.0, 0.1]),
                WeightVector::from_vec(vec![0.0, 1.0]),
            ],
        )
        .unwrap();
        let tasks = [
            WeightVector::from_vec(vec![0.0, 2.0]),
            WeightVector::from_vec(vec![3.0, 0.0]),
        ];
        let s = summarize_nodes(&map, &tasks).unwrap();
        assert_eq!((s[0].best_task, s[1].best_task), (2, 1));
        assert!((s[1].similarity - 1.0).abs() < 1e-12);
        assert_eq!((s[1].row, s[1].col), (0, 1));
    }
}
