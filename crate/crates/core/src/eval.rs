//! Accuracy metrics, confusion matrices, report files and a 2-D linear
//! projection for inspecting embeddings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{dot, norm, Matrix};

/// Run metadata attached to a report. All fields are optional so that
/// library callers can omit them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seed: Option<u64>,
    pub config_digest: Option<String>,
    /// Seconds since the Unix epoch.
    pub timestamp: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_per_class: f64,
    pub overall: f64,
    /// Accuracy of every class that has at least one sample.
    pub per_class: BTreeMap<String, f64>,
    /// Row and column order of `confusion`.
    pub classes: Vec<String>,
    /// `confusion[t][p]` counts samples of class `t` predicted as `p`.
    pub confusion: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub meta: ReportMeta,
}

fn class_index(classes: &[String]) -> Result<BTreeMap<&str, usize>> {
    let mut index = BTreeMap::new();
    for (i, c) in classes.iter().enumerate() {
        if index.insert(c.as_str(), i).is_some() {
            return Err(Error::Invalid(format!("duplicate class '{c}'")));
        }
    }
    Ok(index)
}

fn to_indices(labels: &[String], index: &BTreeMap<&str, usize>, what: &str) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            index
                .get(l.as_str())
                .copied()
                .ok_or_else(|| Error::Invalid(format!("{what} label '{l}' is not an evaluated class")))
        })
        .collect()
}

/// Confusion counts over `classes`; rows are true classes.
pub fn confusion_matrix(predicted: &[String], truth: &[String], classes: &[String]) -> Result<Vec<Vec<usize>>> {
    if predicted.len() != truth.len() {
        return Err(Error::shape("confusion_matrix", truth.len(), predicted.len()));
    }
    let index = class_index(classes)?;
    let p = to_indices(predicted, &index, "predicted")?;
    let t = to_indices(truth, &index, "true")?;
    Ok(confusion_from_indices(&p, &t, classes.len()))
}

fn confusion_from_indices(predicted: &[usize], truth: &[usize], n: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0usize; n]; n];
    for (&p, &t) in predicted.iter().zip(truth) {
        m[t][p] += 1;
    }
    m
}

/// Mean of per-class accuracies over the classes present in `truth`.
/// Returns `None` when there are no samples.
pub fn mean_per_class_from_indices(predicted: &[usize], truth: &[usize], n_classes: usize) -> Option<f64> {
    let mut hits = vec![0usize; n_classes];
    let mut counts = vec![0usize; n_classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        counts[t] += 1;
        hits[t] += usize::from(p == t);
    }
    let accs: Vec<f64> = hits
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&h, &c)| h as f64 / c as f64)
        .collect();
    (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
}

/// Mean per-class top-1 accuracy over `classes`. Classes without samples
/// are left out of the mean and noted in `warnings`.
pub fn mean_per_class_top1(predicted: &[String], truth: &[String], classes: &[String]) -> Result<EvalReport> {
    if truth.is_empty() {
        return Err(Error::EmptyInput("no samples to evaluate".into()));
    }
    let confusion = confusion_matrix(predicted, truth, classes)?;
    let mut per_class = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut correct = 0usize;
    for (i, row) in confusion.iter().enumerate() {
        let count: usize = row.iter().sum();
        correct += row[i];
        if count == 0 {
            warnings.push(format!("class '{}' has no samples and is excluded", classes[i]));
        } else {
            per_class.insert(classes[i].clone(), row[i] as f64 / count as f64);
        }
    }
    let mean_per_class = per_class.values().sum::<f64>() / per_class.len() as f64;
    Ok(EvalReport {
        mean_per_class,
        overall: correct as f64 / truth.len() as f64,
        per_class,
        classes: classes.to_vec(),
        confusion,
        warnings,
        meta: ReportMeta::default(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Invalid(format!("unknown report format '{other}'"))),
        }
    }
}

pub const REPORT_CSV_HEADER: &str = "kind,name,samples,accuracy";

impl EvalReport {
    /// One row per class followed by the two summary rows.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{REPORT_CSV_HEADER}\n");
        let mut total = 0;
        for (i, class) in self.classes.iter().enumerate() {
            let count: usize = self.confusion[i].iter().sum();
            total += count;
            let acc = self.per_class.get(class).map(|a| a.to_string()).unwrap_or_default();
            s.push_str(&format!("class,{class},{count},{acc}\n"));
        }
        s.push_str(&format!("summary,mean_per_class,{total},{}\n", self.mean_per_class));
        s.push_str(&format!("summary,overall,{total},{}\n", self.overall));
        s
    }
}

pub fn emit_report(report: &EvalReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let body = match format {
        ReportFormat::Json => serde_json::to_string_pretty(report)? + "\n",
        ReportFormat::Csv => report.to_csv(),
    };
    std::fs::write(path, body).map_err(|e| Error::io(format!("writing report {}", path.display()), e))
}

pub fn load_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading report {}", path.display()), e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Method-by-group accuracy table built from several runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultGrid {
    pub groups: Vec<String>,
    pub methods: Vec<String>,
    /// `cells[m][g]`, `None` where a run is missing.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl ResultGrid {
    /// Builds the grid from `(method, group, report)` triples. Rows and
    /// columns follow first appearance; a repeated pair keeps the last run.
    pub fn aggregate<'a>(runs: impl IntoIterator<Item = (&'a str, &'a str, &'a EvalReport)>) -> ResultGrid {
        let mut grid = ResultGrid::default();
        let mut entries = Vec::new();
        for (method, group, report) in runs {
            let m = position_or_push(&mut grid.methods, method);
            let g = position_or_push(&mut grid.groups, group);
            entries.push((m, g, report.mean_per_class));
        }
        grid.cells = vec![vec![None; grid.groups.len()]; grid.methods.len()];
        for (m, g, v) in entries {
            grid.cells[m][g] = Some(v);
        }
        grid
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("method");
        for g in &self.groups {
            s.push(',');
            s.push_str(g);
        }
        s.push('\n');
        for (method, row) in self.methods.iter().zip(&self.cells) {
            s.push_str(method);
            for cell in row {
                s.push(',');
                if let Some(v) = cell {
                    s.push_str(&v.to_string());
                }
            }
            s.push('\n');
        }
        s
    }
}

fn position_or_push(list: &mut Vec<String>, item: &str) -> usize {
    match list.iter().position(|x| x == item) {
        Some(i) => i,
        None => {
            list.push(item.to_string());
            list.len() - 1
        }
    }
}

/// Principal-component projection onto two axes.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    /// `N x 2` coordinates of the centered rows.
    pub coords: Matrix,
    /// `2 x d`, unit rows (a zero row when the axis is missing).
    pub axes: Matrix,
    /// Variance captured by each axis (eigenvalues of the scatter matrix).
    pub eigenvalues: [f64; 2],
    /// True when the centered data has rank below 2.
    pub rank_deficient: bool,
}

const POWER_TOL: f64 = 1e-9;
const POWER_MAX_ITER: usize = 100_000;

fn power_iteration(c: &Matrix, against: Option<&[f64]>) -> (Vec<f64>, f64) {
    let d = c.rows();
    let orthogonalize = |v: &mut Vec<f64>| {
        if let Some(u) = against {
            let p = dot(v, u);
            v.iter_mut().zip(u).for_each(|(x, ui)| *x -= p * ui);
        }
    };
    // A fixed, non-symmetric start so no eigenvector is orthogonal to it by construction.
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + (i as f64 + 1.0).sqrt() / d as f64).collect();
    orthogonalize(&mut v);
    let n0 = norm(&v);
    if n0 == 0.0 {
        return (vec![0.0; d], 0.0);
    }
    v.iter_mut().for_each(|x| *x /= n0);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let mut w: Vec<f64> = (0..d).map(|r| dot(c.row(r), &v)).collect();
        orthogonalize(&mut w);
        let nw = norm(&w);
        if nw == 0.0 {
            return (vec![0.0; d], 0.0);
        }
        w.iter_mut().for_each(|x| *x /= nw);
        let delta = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = w;
        lambda = nw;
        if delta < POWER_TOL {
            break;
        }
    }
    // Deterministic sign: the largest-magnitude component is positive.
    let lead = v.iter().copied().fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m });
    if lead < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    (v, lambda)
}

/// Projects the rows of `features` onto the top two principal directions,
/// found by power iteration with deflation.
pub fn project_2d(features: &Matrix) -> Result<Projection> {
    if features.rows() < 3 {
        return Err(Error::Invalid(format!("project_2d needs at least 3 rows, got {}", features.rows())));
    }
    let means = features.column_means();
    let mut centered = features.clone();
    for r in 0..centered.rows() {
        centered.row_mut(r).iter_mut().zip(&means).for_each(|(x, m)| *x -= m);
    }
    let scatter = centered.matmul_tn(&centered)?;
    let scale = scatter.data().iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    let negligible = |lambda: f64| lambda <= 1e-12 * scale.max(f64::MIN_POSITIVE);

    let (mut v1, mut l1) = power_iteration(&scatter, None);
    if scale == 0.0 || negligible(l1) {
        v1.iter_mut().for_each(|x| *x = 0.0);
        l1 = 0.0;
    }
    let (mut v2, mut l2) = if l1 > 0.0 {
        power_iteration(&scatter, Some(&v1))
    } else {
        (vec![0.0; features.cols()], 0.0)
    };
    let rank_deficient = l1 == 0.0 || negligible(l2);
    if rank_deficient {
        v2.iter_mut().for_each(|x| *x = 0.0);
        l2 = 0.0;
    }
    let axes = Matrix::from_rows(&[v1, v2])?;
    let coords = centered.matmul_nt(&axes)?;
    Ok(Projection {
        coords,
        axes,
        eigenvalues: [l1, l2],
        rank_deficient,
    })
}
