//! Metric tables recomputed from persisted artifacts. Batch evaluation and
//! the `metrics report` subcommand both go through here, so every number in
//! a table can be traced back to files on disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::artifacts::{find_files, read_json, write_json, write_text, ArtifactIoError};
use crate::config::Config;
use crate::metrics::{gfl, mvr, pca_fit, pca_project, task_diversity, DiversityItem, FeatureVector, FEATURE_NAMES};
use crate::model::{format_float, CandidateStatus, DesignCandidate, FilterRecord, GraspType, SemanticSchema};

/// One generated design as persisted by any generation mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    pub task_id: String,
    pub grasp_type: Option<GraspType>,
    pub record: FilterRecord,
}

fn run_dir_of(file: &Path) -> PathBuf {
    // <run>/<variant>/<file>
    file.parent().and_then(Path::parent).map(Path::to_path_buf).unwrap_or_default()
}

fn task_id_of(run_dir: &Path, root: &Path) -> String {
    if run_dir == root {
        "run".into()
    } else {
        run_dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("run")
            .to_string()
    }
}

fn schema_grasp(run_dir: &Path) -> Option<GraspType> {
    let path = run_dir.join("schema.json");
    path.is_file()
        .then(|| read_json::<SemanticSchema>(&path).ok().map(|s| s.grasp_type))
        .flatten()
}

/// Every `filter_v*.json` under `root`, labelled by task. Records without a
/// grasp label fall back to the run's extracted schema.
pub fn collect_records(root: &Path) -> Result<Vec<DesignRow>, ArtifactIoError> {
    let files = find_files(root, &|n| n.starts_with("filter_v") && n.ends_with(".json"))?;
    let mut rows = Vec::new();
    for f in files {
        let record: FilterRecord = read_json(&f)?;
        let run_dir = run_dir_of(&f);
        let grasp_type = record.grasp_type_label.or_else(|| schema_grasp(&run_dir));
        rows.push(DesignRow {
            task_id: task_id_of(&run_dir, root),
            grasp_type,
            record,
        });
    }
    rows.sort_by(|a, b| (&a.task_id, a.record.variant_id).cmp(&(&b.task_id, b.record.variant_id)));
    Ok(rows)
}

/// Candidates grouped by task id.
pub fn collect_candidates(root: &Path) -> Result<BTreeMap<String, Vec<DesignCandidate>>, ArtifactIoError> {
    let files = find_files(root, &|n| n.starts_with("candidate_v") && n.ends_with(".json"))?;
    let mut out: BTreeMap<String, Vec<DesignCandidate>> = BTreeMap::new();
    for f in files {
        let c: DesignCandidate = read_json(&f)?;
        out.entry(task_id_of(&run_dir_of(&f), root)).or_default().push(c);
    }
    for v in out.values_mut() {
        v.sort_by_key(|c| c.variant_id);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvrRow {
    pub method: String,
    /// A grasp type or `all`.
    pub grasp_type: String,
    pub valid: usize,
    pub total: usize,
    pub mvr: f64,
}

pub fn mvr_rows(method: &str, rows: &[DesignRow]) -> Vec<MvrRow> {
    let mut groups: Vec<(String, Vec<&DesignRow>)> = GraspType::ALL
        .iter()
        .map(|g| (g.as_str().to_string(), rows.iter().filter(|r| r.grasp_type == Some(*g)).collect()))
        .collect();
    groups.push(("all".into(), rows.iter().collect()));
    groups
        .into_iter()
        .filter(|(_, g)| !g.is_empty())
        .map(|(name, g)| {
            let valid = g.iter().filter(|r| r.record.filter_result.passed).count();
            MvrRow {
                method: method.into(),
                grasp_type: name,
                valid,
                total: g.len(),
                mvr: mvr(valid, g.len()).expect("group is non-empty"),
            }
        })
        .collect()
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> ArtifactIoError {
    ArtifactIoError {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, ArtifactIoError> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| csv_err(&path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(&path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| csv_err(&path, e))?;
    write_text(dir, name, &String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn label(g: Option<GraspType>) -> String {
    g.map(|g| g.as_str().to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for fewer than two values.
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Some(MeanStd { n, mean, std })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub method: String,
    pub designs: usize,
    pub mvr: Vec<MvrRow>,
    /// Per-task diversity over surviving candidates, where at least two survived.
    pub diversity: BTreeMap<String, f64>,
    pub diversity_stats: Option<MeanStd>,
    /// GFL of filter-passing designs per grasp type.
    pub gfl_by_grasp: BTreeMap<String, MeanStd>,
    pub pca_explained_ratio: Option<Vec<f64>>,
}

/// Writes `mvr.csv`, `diversity.csv`, `gfl.csv`, `features.csv`, `pca.csv`
/// and `summary.json` into `tables_dir`, computed from the artifacts under
/// `root`.
pub fn write_tables(root: &Path, tables_dir: &Path, method: &str, config: &Config) -> Result<ReportSummary, ArtifactIoError> {
    let rows = collect_records(root)?;
    let mvr = mvr_rows(method, &rows);
    write_csv(
        tables_dir,
        "mvr.csv",
        &["method", "grasp_type", "valid", "total", "mvr"],
        &mvr.iter()
            .map(|r| vec![r.method.clone(), r.grasp_type.clone(), r.valid.to_string(), r.total.to_string(), format_float(r.mvr)])
            .collect::<Vec<_>>(),
    )?;

    let task_grasp: BTreeMap<&str, Option<GraspType>> =
        rows.iter().map(|r| (r.task_id.as_str(), r.grasp_type)).collect();
    let candidates = collect_candidates(root)?;
    let mut diversity = BTreeMap::new();
    let mut div_rows = Vec::new();
    for (task, cs) in &candidates {
        let survivors: Vec<&DesignCandidate> = cs.iter().filter(|c| c.status == CandidateStatus::Survived).collect();
        let labels: Vec<String> = survivors.iter().map(|c| c.variant_id.to_string()).collect();
        let items: Vec<DiversityItem<'_>> = survivors
            .iter()
            .zip(&labels)
            .filter_map(|(c, label)| {
                Some(DiversityItem {
                    label,
                    grammar: c.grammar.as_ref()?,
                    graph: c.graph.as_ref()?,
                    params: c.params.as_ref()?,
                })
            })
            .collect();
        let grasp = label(task_grasp.get(task.as_str()).copied().flatten());
        match task_diversity(&items, &config.metrics.diversity_weights, &config.norms) {
            Ok(d) => {
                let mean = |f: fn(&crate::metrics::PairDiversity) -> f64| {
                    d.pairs.iter().map(f).sum::<f64>() / d.pairs.len() as f64
                };
                div_rows.push(vec![
                    task.clone(),
                    grasp,
                    items.len().to_string(),
                    format_float(d.score),
                    format_float(mean(|p| p.text)),
                    format_float(mean(|p| p.graph)),
                    format_float(mean(|p| p.geometry)),
                ]);
                diversity.insert(task.clone(), d.score);
            }
            Err(_) => div_rows.push(vec![task.clone(), grasp, items.len().to_string(), String::new(), String::new(), String::new(), String::new()]),
        }
    }
    let scores: Vec<f64> = diversity.values().copied().collect();
    let diversity_stats = mean_std(&scores);
    if let Some(s) = &diversity_stats {
        div_rows.push(vec!["mean".into(), String::new(), s.n.to_string(), format_float(s.mean), String::new(), String::new(), String::new()]);
        div_rows.push(vec!["std".into(), String::new(), s.n.to_string(), format_float(s.std), String::new(), String::new(), String::new()]);
    }
    write_csv(
        tables_dir,
        "diversity.csv",
        &["task_id", "grasp_type", "survivors", "diversity", "text", "graph", "geometry"],
        &div_rows,
    )?;

    let passing: Vec<&DesignRow> = rows.iter().filter(|r| r.record.filter_result.passed).collect();
    let mut gfl_rows = Vec::new();
    let mut by_grasp: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut feature_rows = Vec::new();
    let mut features = Vec::new();
    for r in &passing {
        let (Some(p), Some(g)) = (&r.record.params, &r.record.geometry) else {
            continue;
        };
        let value = gfl(g, p, &config.metrics.gfl_norms, &config.metrics.gfl_weights);
        by_grasp.entry(label(r.grasp_type)).or_default().push(value);
        gfl_rows.push(vec![r.task_id.clone(), label(r.grasp_type), r.record.variant_id.to_string(), format_float(value)]);
        let fv = FeatureVector::from_design(p, g).to_array();
        let mut row = vec![r.task_id.clone(), label(r.grasp_type), r.record.variant_id.to_string()];
        row.extend(fv.iter().map(|x| format_float(*x)));
        feature_rows.push(row);
        features.push((r, fv.to_vec()));
    }
    write_csv(tables_dir, "gfl.csv", &["task_id", "grasp_type", "variant", "gfl"], &gfl_rows)?;
    let mut header = vec!["task_id", "grasp_type", "variant"];
    header.extend(FEATURE_NAMES);
    write_csv(tables_dir, "features.csv", &header, &feature_rows)?;

    let data: Vec<Vec<f64>> = features.iter().map(|(_, f)| f.clone()).collect();
    let mut pca_rows = Vec::new();
    let mut pca_explained_ratio = None;
    if let Ok(model) = pca_fit(&data, 2) {
        let points = pca_project(&model, &data).expect("fit data matches its own model");
        for ((r, _), pt) in features.iter().zip(points) {
            pca_rows.push(vec![
                r.task_id.clone(),
                label(r.grasp_type),
                r.record.variant_id.to_string(),
                format_float(pt[0]),
                format_float(pt[1]),
            ]);
        }
        pca_explained_ratio = Some(model.explained_ratio.clone());
    }
    write_csv(tables_dir, "pca.csv", &["task_id", "grasp_type", "variant", "pc1", "pc2"], &pca_rows)?;

    let summary = ReportSummary {
        method: method.into(),
        designs: rows.len(),
        mvr,
        diversity,
        diversity_stats,
        gfl_by_grasp: by_grasp.iter().filter_map(|(k, v)| Some((k.clone(), mean_std(v)?))).collect(),
        pca_explained_ratio,
    };
    write_json(tables_dir, "summary.json", &summary)?;
    Ok(summary)
}
