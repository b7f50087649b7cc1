//! Feature datasets, class attribute tables and seen/unseen splits: CSV/JSON
//! loading, validation, and the synthetic generator.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{norm, Matrix};

/// Name of the generator used by [`gen_synthetic`] and the rest of the crate.
pub const RNG_NAME: &str = "ChaCha8";

/// N feature vectors with optional class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDataset {
    pub sample_ids: Vec<String>,
    pub features: Matrix,
    pub labels: Vec<Option<String>>,
}

impl FeatureDataset {
    pub fn new(sample_ids: Vec<String>, features: Matrix, labels: Vec<Option<String>>) -> Result<Self> {
        let n = features.rows();
        if n == 0 {
            return Err(Error::EmptyInput("feature dataset has no rows".into()));
        }
        if features.cols() == 0 {
            return Err(Error::Invalid("feature dimension must be >= 1".into()));
        }
        if sample_ids.len() != n || labels.len() != n {
            return Err(Error::shape("FeatureDataset", n, sample_ids.len().min(labels.len())));
        }
        Ok(FeatureDataset {
            sample_ids,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows at `idx`, in that order. May be empty.
    pub fn subset(&self, idx: &[usize]) -> FeatureDataset {
        FeatureDataset {
            sample_ids: idx.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    /// Indices of rows whose label is in `classes`.
    pub fn rows_labeled_in(&self, classes: &[String]) -> Vec<usize> {
        let set: HashSet<&str> = classes.iter().map(String::as_str).collect();
        (0..self.len())
            .filter(|&i| self.labels[i].as_deref().is_some_and(|l| set.contains(l)))
            .collect()
    }

    /// Indices of rows that are unlabeled or labeled with a class outside `seen`.
    pub fn rows_not_in(&self, seen: &[String]) -> Vec<usize> {
        let set: HashSet<&str> = seen.iter().map(String::as_str).collect();
        (0..self.len())
            .filter(|&i| !self.labels[i].as_deref().is_some_and(|l| set.contains(l)))
            .collect()
    }

    /// Copy with every label removed.
    pub fn unlabeled(&self) -> FeatureDataset {
        FeatureDataset {
            labels: vec![None; self.len()],
            ..self.clone()
        }
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut header = String::from("id,label");
        for j in 0..self.dim() {
            header.push_str(&format!(",f{j}"));
        }
        writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
        for i in 0..self.len() {
            let mut line = format!("{},{}", self.sample_ids[i], self.labels[i].as_deref().unwrap_or(""));
            for v in self.features.row(i) {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Per-class attribute vectors, rows in class order.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassAttributeTable {
    pub class_names: Vec<String>,
    pub attributes: Matrix,
}

impl ClassAttributeTable {
    pub fn new(class_names: Vec<String>, attributes: Matrix) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::EmptyInput("attribute table has no classes".into()));
        }
        if attributes.rows() != class_names.len() {
            return Err(Error::shape("ClassAttributeTable", class_names.len(), attributes.rows()));
        }
        if attributes.cols() < 2 {
            return Err(Error::Invalid(format!(
                "attribute dimension must be >= 2, got {}",
                attributes.cols()
            )));
        }
        let mut seen = HashSet::new();
        for name in &class_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Invalid(format!("duplicate class name '{name}'")));
            }
        }
        for i in 0..attributes.rows() {
            for j in 0..i {
                if attributes.row(i) == attributes.row(j) {
                    return Err(Error::Invalid(format!(
                        "classes '{}' and '{}' have identical attribute vectors",
                        class_names[j], class_names[i]
                    )));
                }
            }
        }
        Ok(ClassAttributeTable {
            class_names,
            attributes,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn dim(&self) -> usize {
        self.attributes.cols()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    /// Attribute rows for `names`, in that order.
    pub fn rows_for(&self, names: &[String]) -> Result<Matrix> {
        let idx = names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .ok_or_else(|| Error::Invalid(format!("class '{n}' is not in the attribute table")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.attributes.select_rows(&idx))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut header = String::from("class");
        for j in 0..self.dim() {
            header.push_str(&format!(",a{j}"));
        }
        writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
        for (i, name) in self.class_names.iter().enumerate() {
            let mut line = name.clone();
            for v in self.attributes.row(i) {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seen: Vec<String>,
    pub unseen: Vec<String>,
}

impl SplitSpec {
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

struct CsvTable {
    header: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

fn read_csv(path: &Path) -> Result<CsvTable> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Invalid(format!("{display}: {other:?}")),
        })?;
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(Error::EmptyInput(display)),
        Some(rec) => rec
            .map_err(|e| parse_err(&display, 1, e.to_string()))?
            .iter()
            .map(|s| s.trim().to_string())
            .collect::<Vec<_>>(),
    };
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(&display, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != header.len() {
            return Err(parse_err(
                &display,
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        rows.push((line, rec.iter().map(|s| s.to_string()).collect()));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("{display} has a header but no rows")));
    }
    Ok(CsvTable { header, rows })
}

fn parse_err(path: &str, line: usize, message: String) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message,
    }
}

fn parse_number(path: &str, line: usize, column: &str, cell: &str) -> Result<f64> {
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_err(path, line, format!("column '{column}': '{cell}' is not a finite number"))),
    }
}

fn check_header(path: &str, header: &[String], fixed: &[&str], prefix: &str) -> Result<usize> {
    for (i, name) in fixed.iter().enumerate() {
        if header.get(i).map(String::as_str) != Some(*name) {
            return Err(parse_err(path, 1, format!("header column {} must be '{name}'", i + 1)));
        }
    }
    let width = header.len() - fixed.len().min(header.len());
    for (j, col) in header[fixed.len().min(header.len())..].iter().enumerate() {
        if *col != format!("{prefix}{j}") {
            return Err(parse_err(path, 1, format!("expected header '{prefix}{j}', found '{col}'")));
        }
    }
    Ok(width)
}

/// Reads a features CSV (`id,label,f0,…`).
pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let table = read_csv(path)?;
    let d = check_header(&display, &table.header, &["id", "label"], "f")?;
    if d == 0 {
        return Err(parse_err(&display, 1, "no feature columns".into()));
    }
    let mut ids = Vec::with_capacity(table.rows.len());
    let mut labels = Vec::with_capacity(table.rows.len());
    let mut data = Vec::with_capacity(table.rows.len() * d);
    for (line, row) in &table.rows {
        ids.push(row[0].clone());
        let label = row[1].trim();
        labels.push((!label.is_empty()).then(|| label.to_string()));
        for (j, cell) in row[2..].iter().enumerate() {
            data.push(parse_number(&display, *line, &table.header[j + 2], cell)?);
        }
    }
    let n = ids.len();
    FeatureDataset::new(ids, Matrix::new(n, d, data)?, labels)
}

/// Reads an attributes CSV (`class,a0,…`).
pub fn load_attributes(path: impl AsRef<Path>) -> Result<ClassAttributeTable> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let table = read_csv(path)?;
    let k = check_header(&display, &table.header, &["class"], "a")?;
    let mut names: Vec<String> = Vec::with_capacity(table.rows.len());
    let mut data = Vec::with_capacity(table.rows.len() * k);
    for (line, row) in &table.rows {
        let name = row[0].trim().to_string();
        if name.is_empty() {
            return Err(parse_err(&display, *line, "empty class name".into()));
        }
        if names.contains(&name) {
            return Err(parse_err(&display, *line, format!("duplicate class name '{name}'")));
        }
        names.push(name);
        for (j, cell) in row[1..].iter().enumerate() {
            data.push(parse_number(&display, *line, &table.header[j + 1], cell)?);
        }
    }
    let c = names.len();
    ClassAttributeTable::new(names, Matrix::new(c, k, data)?)
}

/// Reads a split file `{"seen": [...], "unseen": [...]}`.
pub fn load_split(path: impl AsRef<Path>) -> Result<SplitSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Err(Error::EmptyInput(path.display().to_string()));
    }
    let split: SplitSpec = serde_json::from_str(&text)?;
    for list in [&split.seen, &split.unseen] {
        let mut set = HashSet::new();
        if let Some(dup) = list.iter().find(|c| !set.insert(c.as_str())) {
            return Err(Error::Invalid(format!("duplicate class '{dup}' in split")));
        }
    }
    Ok(split)
}

/// Scales each class row to unit Euclidean norm.
pub fn normalize_attributes(table: &ClassAttributeTable) -> Result<ClassAttributeTable> {
    let mut attrs = table.attributes.clone();
    for (i, name) in table.class_names.iter().enumerate() {
        let n = norm(attrs.row(i));
        if n == 0.0 {
            return Err(Error::Invalid(format!(
                "class '{name}' has an all-zero attribute vector; cannot normalize"
            )));
        }
        attrs.row_mut(i).iter_mut().for_each(|x| *x /= n);
    }
    Ok(ClassAttributeTable {
        class_names: table.class_names.clone(),
        attributes: attrs,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    UnknownLabel { row: usize, label: String },
    SeenUnseenOverlap { class: String },
    SplitClassNotInTable { class: String },
    LabelNotInSplit { label: String },
    TooFewSeen(usize),
    NoUnseen,
    DimensionMismatch { expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownLabel { row, label } => {
                write!(f, "row {row}: label '{label}' is not in the attribute table")
            }
            Violation::SeenUnseenOverlap { class } => {
                write!(f, "seen/unseen overlap: '{class}' appears in both")
            }
            Violation::SplitClassNotInTable { class } => {
                write!(f, "split class '{class}' is not in the attribute table")
            }
            Violation::LabelNotInSplit { label } => {
                write!(f, "label '{label}' is neither seen nor unseen")
            }
            Violation::TooFewSeen(n) => write!(f, "need at least 2 seen classes, found {n}"),
            Violation::NoUnseen => write!(f, "need at least 1 unseen class"),
            Violation::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
        }
    }
}

/// Every invariant violation found in a bundle; empty means usable.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn check_dim(&mut self, expected: usize, found: usize) {
        if expected != found {
            self.violations.push(Violation::DimensionMismatch { expected, found });
        }
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
            Err(Error::Invalid(msgs.join("; ")))
        }
    }
}

pub fn validate_bundle(
    features: &FeatureDataset,
    table: &ClassAttributeTable,
    split: &SplitSpec,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let known: HashSet<&str> = table.class_names.iter().map(String::as_str).collect();
    let seen: HashSet<&str> = split.seen.iter().map(String::as_str).collect();
    let unseen: HashSet<&str> = split.unseen.iter().map(String::as_str).collect();

    for class in &split.seen {
        if unseen.contains(class.as_str()) {
            report.violations.push(Violation::SeenUnseenOverlap { class: class.clone() });
        }
    }
    for class in split.seen.iter().chain(&split.unseen) {
        if !known.contains(class.as_str()) {
            report
                .violations
                .push(Violation::SplitClassNotInTable { class: class.clone() });
        }
    }
    if split.seen.len() < 2 {
        report.violations.push(Violation::TooFewSeen(split.seen.len()));
    }
    if split.unseen.is_empty() {
        report.violations.push(Violation::NoUnseen);
    }

    let mut reported: HashSet<&str> = HashSet::new();
    for (row, label) in features.labels.iter().enumerate() {
        let Some(label) = label.as_deref() else { continue };
        if !known.contains(label) {
            report.violations.push(Violation::UnknownLabel {
                row,
                label: label.to_string(),
            });
        } else if !seen.contains(label) && !unseen.contains(label) && reported.insert(label) {
            report.violations.push(Violation::LabelNotInSplit {
                label: label.to_string(),
            });
        }
    }
    report
}

/// Parameters of the synthetic attribute-linear generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_seen: usize,
    pub n_unseen: usize,
    pub d: usize,
    pub k: usize,
    pub samples_per_class: usize,
    pub noise_sigma: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 7,
            n_seen: 8,
            n_unseen: 3,
            d: 32,
            k: 16,
            samples_per_class: 100,
            noise_sigma: 0.1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [self.n_seen, self.n_unseen, self.d, self.k, self.samples_per_class];
        if counts.contains(&0) {
            return Err(Error::Invalid("synthetic counts must all be >= 1".into()));
        }
        if self.d < self.k {
            return Err(Error::Invalid(format!("need d >= K, got d={} K={}", self.d, self.k)));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Invalid("noise_sigma must be a finite nonnegative number".into()));
        }
        Ok(())
    }
}

/// Output of [`gen_synthetic`], including the true class means.
#[derive(Clone, Debug)]
pub struct SyntheticBundle {
    pub features: FeatureDataset,
    pub attributes: ClassAttributeTable,
    pub split: SplitSpec,
    /// `M · a_c` per class, rows in attribute-table order.
    pub class_means: Matrix,
}

/// Attribute-linear synthetic data: `a_c ~ U[0,1)^K` normalized, class mean
/// `M a_c` for one shared Gaussian `M`, samples `N(M a_c, σ² I)`.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<SyntheticBundle> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_classes = spec.n_seen + spec.n_unseen;
    let class_names: Vec<String> = (0..n_classes).map(|c| format!("class_{c:02}")).collect();

    let mut raw = Matrix::zeros(n_classes, spec.k);
    for x in raw.data_mut() {
        *x = rng.random::<f64>();
    }
    let attributes = normalize_attributes(&ClassAttributeTable::new(class_names.clone(), raw)?)?;

    let mut map = Matrix::zeros(spec.d, spec.k);
    for x in map.data_mut() {
        *x = StandardNormal.sample(&mut rng);
    }
    let class_means = attributes.attributes.matmul_nt(&map)?;

    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Invalid(e.to_string()))?;
    let n = n_classes * spec.samples_per_class;
    let mut ids = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * spec.d);
    for (c, name) in class_names.iter().enumerate() {
        for s in 0..spec.samples_per_class {
            ids.push(format!("s{:05}", c * spec.samples_per_class + s));
            labels.push(Some(name.clone()));
            for &mu in class_means.row(c) {
                let eps = if spec.noise_sigma == 0.0 { 0.0 } else { noise.sample(&mut rng) };
                data.push(mu + eps);
            }
        }
    }
    let features = FeatureDataset::new(ids, Matrix::new(n, spec.d, data)?, labels)?;
    let split = SplitSpec {
        seen: class_names[..spec.n_seen].to_vec(),
        unseen: class_names[spec.n_seen..].to_vec(),
    };
    Ok(SyntheticBundle {
        features,
        attributes,
        split,
        class_means,
    })
}

/// Maps labels to indices of `classes`; unlabeled rows and rows whose label
/// is outside `classes` yield `None`.
pub fn label_indices(labels: &[Option<String>], classes: &[String]) -> Vec<Option<usize>> {
    let lookup: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    labels
        .iter()
        .map(|l| l.as_deref().and_then(|l| lookup.get(l).copied()))
        .collect()
}
