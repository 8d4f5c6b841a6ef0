//! On-disk formats: graph directories, task streams, memories, model
//! checkpoints, accuracy matrices, and atomic JSON writes.
//!
//! Graph directory layout:
//!   manifest.json   {num_nodes, feature_dim, num_classes}
//!   edges.csv       one `u,v` pair per line, 0-indexed, undirected
//!   features.bin    row-major little-endian f64, num_nodes x feature_dim
//!   labels.csv      one class id per line, line index = node id
//!
//! Stream directories add `stream.json` plus `task_<i>/` subdirectories in
//! graph format with an extra `masks.csv` (`node_id,split`).

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::condense::{with_task_id, SyntheticMemory};
use crate::error::{Error, Result};
use crate::eval::AccuracyMatrix;
use crate::graph::SparseGraph;
use crate::model::LinearSgcModel;
use crate::stream::{Split, TaskGraph, TaskStream};

#[derive(Debug, Serialize, Deserialize)]
struct GraphManifest {
    num_nodes: usize,
    feature_dim: usize,
    num_classes: usize,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn le_bytes(values: impl Iterator<Item = f64>) -> Vec<u8> {
    let mut out = Vec::new();
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_f64_file(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected * 8 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!(
                "expected {} bytes ({expected} f64 values), found {}",
                expected * 8,
                bytes.len()
            ),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn parse_usize(path: &Path, line: usize, field: &str) -> Result<usize> {
    field.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("expected an unsigned integer, found {field:?}"),
    })
}

/// Save a graph directory; `num_classes` sizes the global class space (use
/// [`save_graph`] when the graph itself defines it).
pub fn save_graph_with_classes(graph: &SparseGraph, num_classes: usize, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let manifest = GraphManifest {
        num_nodes: graph.num_nodes(),
        feature_dim: graph.feature_dim(),
        num_classes,
    };
    write_file(
        &dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)
            .expect("manifest serializes")
            .as_bytes(),
    )?;
    let mut edges = String::new();
    for &(u, v) in graph.edges() {
        edges.push_str(&format!("{u},{v}\n"));
    }
    write_file(&dir.join("edges.csv"), edges.as_bytes())?;
    write_file(
        &dir.join("features.bin"),
        &le_bytes(graph.features().iter().copied()),
    )?;
    let mut labels = String::new();
    for &l in graph.labels() {
        labels.push_str(&format!("{l}\n"));
    }
    write_file(&dir.join("labels.csv"), labels.as_bytes())
}

pub fn save_graph(graph: &SparseGraph, dir: &Path) -> Result<()> {
    let num_classes = graph.labels().iter().max().map_or(0, |&m| m + 1);
    save_graph_with_classes(graph, num_classes, dir)
}

/// Load a graph directory, validating sizes and label range against the
/// manifest. Returns the graph and the manifest's class-space size.
pub fn load_graph_with_classes(dir: &Path) -> Result<(SparseGraph, usize)> {
    let manifest_path = dir.join("manifest.json");
    let manifest: GraphManifest =
        serde_json::from_str(&read_to_string(&manifest_path)?).map_err(|e| Error::Parse {
            path: manifest_path.clone(),
            line: e.line(),
            msg: e.to_string(),
        })?;

    let edges_path = dir.join("edges.csv");
    let mut edges = Vec::new();
    for (i, line) in read_to_string(&edges_path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let u = parse_usize(&edges_path, i + 1, parts.next().unwrap_or(""))?;
        let v = parse_usize(
            &edges_path,
            i + 1,
            parts.next().ok_or_else(|| Error::Parse {
                path: edges_path.clone(),
                line: i + 1,
                msg: "expected two comma-separated columns".into(),
            })?,
        )?;
        edges.push((u, v));
    }

    let values = read_f64_file(
        &dir.join("features.bin"),
        manifest.num_nodes * manifest.feature_dim,
    )?;
    let features = Array2::from_shape_vec((manifest.num_nodes, manifest.feature_dim), values)
        .expect("shape checked by byte count");

    let labels_path = dir.join("labels.csv");
    let mut labels = Vec::new();
    for (i, line) in read_to_string(&labels_path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        labels.push(parse_usize(&labels_path, i + 1, line)?);
    }
    if labels.len() != manifest.num_nodes {
        return Err(Error::Format {
            path: labels_path.clone(),
            msg: format!("{} labels for {} nodes", labels.len(), manifest.num_nodes),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= manifest.num_classes) {
        return Err(Error::Format {
            path: labels_path,
            msg: format!(
                "label {bad} >= manifest num_classes {}",
                manifest.num_classes
            ),
        });
    }
    let graph = SparseGraph::new(manifest.num_nodes, edges, features, labels)?;
    Ok((graph, manifest.num_classes))
}

pub fn load_graph(dir: &Path) -> Result<SparseGraph> {
    load_graph_with_classes(dir).map(|(g, _)| g)
}

#[derive(Debug, Serialize, Deserialize)]
struct StreamManifest {
    classes_per_task: usize,
    num_tasks: usize,
    num_classes: usize,
    seed: u64,
    dropped_classes: Vec<usize>,
    task_classes: Vec<Vec<usize>>,
}

fn split_name(s: Split) -> &'static str {
    match s {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
    }
}

pub fn save_stream(stream: &TaskStream, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let manifest = StreamManifest {
        classes_per_task: stream.classes_per_task(),
        num_tasks: stream.num_tasks(),
        num_classes: stream.num_classes(),
        seed: stream.seed(),
        dropped_classes: stream.dropped_classes().to_vec(),
        task_classes: stream
            .tasks()
            .iter()
            .map(|t| t.classes().to_vec())
            .collect(),
    };
    write_file(
        &dir.join("stream.json"),
        serde_json::to_string_pretty(&manifest)
            .expect("manifest serializes")
            .as_bytes(),
    )?;
    for (i, task) in stream.tasks().iter().enumerate() {
        let task_dir = dir.join(format!("task_{i}"));
        save_graph_with_classes(task.graph(), stream.num_classes(), &task_dir)?;
        let mut masks = String::new();
        for (node, &split) in task.masks().iter().enumerate() {
            masks.push_str(&format!("{node},{}\n", split_name(split)));
        }
        write_file(&task_dir.join("masks.csv"), masks.as_bytes())?;
    }
    Ok(())
}

pub fn load_stream(dir: &Path) -> Result<TaskStream> {
    let manifest_path = dir.join("stream.json");
    let manifest: StreamManifest =
        serde_json::from_str(&read_to_string(&manifest_path)?).map_err(|e| Error::Parse {
            path: manifest_path.clone(),
            line: e.line(),
            msg: e.to_string(),
        })?;
    let mut tasks = Vec::with_capacity(manifest.num_tasks);
    for i in 0..manifest.num_tasks {
        let task_dir = dir.join(format!("task_{i}"));
        let (graph, _) = load_graph_with_classes(&task_dir)?;
        let masks_path = task_dir.join("masks.csv");
        let mut masks = vec![Split::Train; graph.num_nodes()];
        let mut seen = vec![false; graph.num_nodes()];
        for (ln, line) in read_to_string(&masks_path)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, ',');
            let node = parse_usize(&masks_path, ln + 1, parts.next().unwrap_or(""))?;
            let split = match parts.next().map(str::trim) {
                Some("train") => Split::Train,
                Some("val") => Split::Val,
                Some("test") => Split::Test,
                other => {
                    return Err(Error::Parse {
                        path: masks_path.clone(),
                        line: ln + 1,
                        msg: format!("unknown split {other:?}"),
                    })
                }
            };
            if node >= masks.len() {
                return Err(Error::Parse {
                    path: masks_path.clone(),
                    line: ln + 1,
                    msg: format!("node {node} out of range"),
                });
            }
            masks[node] = split;
            seen[node] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::Format {
                path: masks_path,
                msg: format!("node {missing} has no split assignment"),
            });
        }
        tasks.push(TaskGraph::new(
            graph,
            manifest.task_classes[i].clone(),
            masks,
        )?);
    }
    TaskStream::from_parts(
        tasks,
        manifest.classes_per_task,
        manifest.num_classes,
        manifest.seed,
        manifest.dropped_classes,
    )
}

#[derive(Debug, Serialize, Deserialize)]
struct MemoryManifest {
    task_id: usize,
    classes: Vec<usize>,
    per_class_budget: Vec<usize>,
    feature_dim: usize,
}

/// Write `memory_<t>.json` and `memory_<t>.bin` into `dir`. Only synthetic
/// features and class counts leave the process; no original node data.
pub fn save_memory(memory: &SyntheticMemory, dir: &Path) -> Result<PathBuf> {
    create_dir(dir)?;
    let classes = memory.classes().to_vec();
    let budget = memory.per_class_budget();
    let manifest = MemoryManifest {
        task_id: memory.task_id(),
        per_class_budget: classes.iter().map(|c| budget[c]).collect(),
        classes,
        feature_dim: memory.features().ncols(),
    };
    let json_path = dir.join(format!("memory_{}.json", memory.task_id()));
    write_file(
        &json_path,
        serde_json::to_string_pretty(&manifest)
            .expect("manifest serializes")
            .as_bytes(),
    )?;
    write_file(
        &dir.join(format!("memory_{}.bin", memory.task_id())),
        &le_bytes(memory.features().iter().copied()),
    )?;
    Ok(json_path)
}

pub fn load_memory(dir: &Path, task_id: usize) -> Result<SyntheticMemory> {
    let json_path = dir.join(format!("memory_{task_id}.json"));
    let manifest: MemoryManifest =
        serde_json::from_str(&read_to_string(&json_path)?).map_err(|e| Error::Parse {
            path: json_path.clone(),
            line: e.line(),
            msg: e.to_string(),
        })?;
    if manifest.classes.len() != manifest.per_class_budget.len() {
        return Err(Error::Format {
            path: json_path,
            msg: "classes and per_class_budget lengths differ".into(),
        });
    }
    let rows: usize = manifest.per_class_budget.iter().sum();
    let values = read_f64_file(
        &dir.join(format!("memory_{task_id}.bin")),
        rows * manifest.feature_dim,
    )?;
    let features = Array2::from_shape_vec((rows, manifest.feature_dim), values)
        .expect("shape checked by byte count");
    let mut labels = Vec::with_capacity(rows);
    for (&class, &count) in manifest.classes.iter().zip(&manifest.per_class_budget) {
        labels.extend(std::iter::repeat(class).take(count));
    }
    Ok(with_task_id(
        SyntheticMemory::from_parts(0, features, labels)?,
        manifest.task_id,
    ))
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelManifest {
    prop_depth: usize,
    class_count: usize,
    feature_dim: usize,
}

/// Checkpoint: `model.json` plus `weights.bin` (row-major weight, then bias).
pub fn save_model(model: &LinearSgcModel, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let manifest = ModelManifest {
        prop_depth: model.prop_depth(),
        class_count: model.class_count(),
        feature_dim: model.feature_dim(),
    };
    write_file(
        &dir.join("model.json"),
        serde_json::to_string_pretty(&manifest)
            .expect("manifest serializes")
            .as_bytes(),
    )?;
    let bytes = le_bytes(
        model
            .weight()
            .iter()
            .copied()
            .chain(model.bias().iter().copied()),
    );
    write_file(&dir.join("weights.bin"), &bytes)
}

pub fn load_model(dir: &Path) -> Result<LinearSgcModel> {
    let json_path = dir.join("model.json");
    let manifest: ModelManifest =
        serde_json::from_str(&read_to_string(&json_path)?).map_err(|e| Error::Parse {
            path: json_path,
            line: e.line(),
            msg: e.to_string(),
        })?;
    let total = manifest.feature_dim * manifest.class_count + manifest.class_count;
    let values = read_f64_file(&dir.join("weights.bin"), total)?;
    let (w, b) = values.split_at(manifest.feature_dim * manifest.class_count);
    let weight = Array2::from_shape_vec((manifest.feature_dim, manifest.class_count), w.to_vec())
        .expect("shape checked by byte count");
    let bias = Array1::from_vec(b.to_vec());
    LinearSgcModel::from_parts(weight, bias, manifest.prop_depth)
}

/// Lower-triangular CSV: row `t` holds `t+1` accuracies followed by empty
/// cells up to the full width. Values print in shortest round-trip form.
pub fn write_matrix_csv(matrix: &AccuracyMatrix, path: &Path) -> Result<()> {
    let t = matrix.num_tasks();
    let mut out = String::new();
    for row in matrix.rows() {
        let mut cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        cells.resize(t, String::new());
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn read_matrix_csv(path: &Path) -> Result<AccuracyMatrix> {
    let mut matrix = AccuracyMatrix::new();
    for (i, line) in read_to_string(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for cell in line.split(',') {
            let cell = cell.trim();
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected a number, found {cell:?}"),
            })?;
            row.push(v);
        }
        matrix.push_row(row).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
    }
    if matrix.num_tasks() == 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: "empty matrix".into(),
        });
    }
    Ok(matrix)
}

/// Serialize JSON to a temp file and rename into place.
pub fn write_json_atomic<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(json.as_bytes())
            .map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_sbm, SbmParams};
    use crate::stream::build_stream;
    use tempfile::tempdir;

    fn fixture_graph(seed: u64) -> SparseGraph {
        generate_sbm(&SbmParams {
            block_sizes: vec![12, 10, 11, 9],
            intra_prob: 0.4,
            inter_prob: 0.05,
            feature_dim: 5,
            feature_center_scale: 1.0,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn graph_round_trip_is_bitwise() {
        let dir = tempdir().unwrap();
        let g = fixture_graph(1);
        save_graph(&g, dir.path()).unwrap();
        let loaded = load_graph(dir.path()).unwrap();
        assert_eq!(g, loaded);
    }

    #[test]
    fn stream_round_trip() {
        let dir = tempdir().unwrap();
        let stream = build_stream(&fixture_graph(2), 2, 9).unwrap();
        save_stream(&stream, dir.path()).unwrap();
        let loaded = load_stream(dir.path()).unwrap();
        assert_eq!(stream, loaded);
    }

    #[test]
    fn truncated_features_bin_names_expected_bytes() {
        let dir = tempdir().unwrap();
        let g = fixture_graph(3);
        save_graph(&g, dir.path()).unwrap();
        let path = dir.path().join("features.bin");
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        match load_graph(dir.path()) {
            Err(Error::Format { msg, .. }) => {
                assert!(msg.contains(&format!("{}", bytes.len())), "message: {msg}");
            }
            other => panic!("expected Format error, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_num_classes_rejected() {
        let dir = tempdir().unwrap();
        let g = fixture_graph(4);
        save_graph_with_classes(&g, 2, dir.path()).unwrap(); // labels reach 3
        assert!(matches!(load_graph(dir.path()), Err(Error::Format { .. })));
    }

    #[test]
    fn malformed_edge_line_reports_location() {
        let dir = tempdir().unwrap();
        let g = fixture_graph(5);
        save_graph(&g, dir.path()).unwrap();
        fs::write(dir.path().join("edges.csv"), "0,1\nnot-a-number,2\n").unwrap();
        match load_graph(dir.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected Parse error, got {other:?}"),
        }
    }

    #[test]
    fn memory_round_trip() {
        let dir = tempdir().unwrap();
        let stream = build_stream(&fixture_graph(6), 2, 1).unwrap();
        let memory = with_task_id(
            crate::condense::init_memory(&stream.tasks()[0], 3, 7).unwrap(),
            4,
        );
        save_memory(&memory, dir.path()).unwrap();
        let loaded = load_memory(dir.path(), 4).unwrap();
        assert_eq!(memory, loaded);
    }

    #[test]
    fn model_round_trip() {
        let dir = tempdir().unwrap();
        let model = crate::model::InitSampler::new(3).sample(5, 4, 2, 0);
        save_model(&model, dir.path()).unwrap();
        let loaded = load_model(dir.path()).unwrap();
        assert_eq!(model, loaded);
    }

    #[test]
    fn matrix_csv_round_trip_with_empty_upper_cells() {
        let dir = tempdir().unwrap();
        let matrix =
            AccuracyMatrix::from_rows(vec![vec![0.9], vec![0.8234567890123456, 0.7]]).unwrap();
        let path = dir.path().join("matrix.csv");
        write_matrix_csv(&matrix, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(
            text.lines().next().unwrap().contains(','),
            "upper cells present"
        );
        let loaded = read_matrix_csv(&path).unwrap();
        assert_eq!(matrix, loaded);
    }

    #[test]
    fn malformed_matrix_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("matrix.csv");
        fs::write(&path, "0.9,\nabc,0.7\n").unwrap();
        assert!(matches!(read_matrix_csv(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn atomic_json_lands_in_place() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("metrics.json");
        write_json_atomic(&serde_json::json!({"aa": 0.5}), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("0.5"));
        assert!(!dir.path().join("metrics.tmp").exists());
    }
}
