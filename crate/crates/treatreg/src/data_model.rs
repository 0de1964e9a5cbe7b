//! Tabular ingestion, design-matrix expansion, and standardization.
//!
//! A [`DataTable`] holds raw CSV columns (numeric or categorical). A
//! [`DesignSpec`] describes how to expand it into a [`RegressionData`]:
//! which column is the response, which is the treatment, which numeric
//! controls enter directly, which categorical columns become dummy sets,
//! and which control sets get interacted with a (linear or quadratic)
//! time trend.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single table column: fully numeric, or categorical otherwise.
#[derive(Debug, Clone)]
pub enum Column {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An in-memory table with uniquely named, equal-length columns.
#[derive(Debug, Clone)]
pub struct DataTable {
    names: Vec<String>,
    columns: Vec<Column>,
}

impl DataTable {
    pub fn new(names: Vec<String>, columns: Vec<Column>) -> Result<Self> {
        if columns.is_empty() || columns[0].is_empty() {
            return Err(Error::EmptyTable);
        }
        let n = columns[0].len();
        for c in &columns {
            if c.len() != n {
                return Err(Error::RaggedRows { row: 0, got: c.len(), expected: n });
            }
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.clone()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        Ok(DataTable { names, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    fn numeric(&self, name: &str) -> Result<&[f64]> {
        match self.column(name)? {
            Column::Numeric(v) => Ok(v),
            Column::Categorical(_) => Err(Error::NotNumeric(name.to_string())),
        }
    }
}

/// Loads a CSV file with a header row. Columns where every field parses
/// as a number become numeric; everything else stays categorical.
/// Missing (empty) fields are an error.
pub fn load_table(path: impl AsRef<Path>) -> Result<DataTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path.as_ref())?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let expected = headers.len();
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); expected];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != expected {
            return Err(Error::RaggedRows { row: i + 1, got: record.len(), expected });
        }
        for (j, field) in record.iter().enumerate() {
            let field = field.trim();
            if field.is_empty() {
                return Err(Error::MissingValue { row: i + 1, column: headers[j].clone() });
            }
            raw[j].push(field.to_string());
        }
    }
    if raw.is_empty() || raw[0].is_empty() {
        return Err(Error::EmptyTable);
    }
    let columns = raw
        .into_iter()
        .map(|vals| {
            let parsed: Option<Vec<f64>> = vals.iter().map(|s| s.parse::<f64>().ok()).collect();
            match parsed {
                Some(nums) => Column::Numeric(nums),
                None => Column::Categorical(vals),
            }
        })
        .collect();
    DataTable::new(headers, columns)
}

/// Trend term entering interaction columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    LinearInYear,
    QuadraticInYear,
}

/// One interaction rule: every listed column (numeric control, or
/// categorical column standing for its dummy set) times the trend term.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InteractionRule {
    pub columns: Vec<String>,
    pub trend: Trend,
}

/// Recipe for expanding a [`DataTable`] into a regression design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignSpec {
    pub response: String,
    pub treatment: String,
    #[serde(default)]
    pub controls: Vec<String>,
    /// Categorical columns expanded into dummies (first level in sorted
    /// order is the dropped reference).
    #[serde(default)]
    pub dummies: Vec<String>,
    /// Numeric column supplying the trend term for interactions.
    #[serde(default)]
    pub trend_column: Option<String>,
    #[serde(default)]
    pub interactions: Vec<InteractionRule>,
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Center the trend column before forming interaction terms. The
    /// convention for whether year enters raw or centered is not fixed
    /// by common practice, so both are supported.
    #[serde(default = "default_true")]
    pub center_trend: bool,
}

fn default_true() -> bool {
    true
}

/// Response, treatment, and control matrix with consistent dimensions.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub x: DMatrix<f64>,
    pub control_names: Vec<String>,
}

impl RegressionData {
    pub fn new(
        y: DVector<f64>,
        z: DVector<f64>,
        x: DMatrix<f64>,
        control_names: Vec<String>,
    ) -> Result<Self> {
        let n = y.len();
        if z.len() != n || x.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "y has {n} rows, z has {}, X has {}",
                z.len(),
                x.nrows()
            )));
        }
        if control_names.len() != x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} control names for {} columns",
                control_names.len(),
                x.ncols()
            )));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("y".into()));
        }
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("z".into()));
        }
        for (j, col) in x.column_iter().enumerate() {
            if !col.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(control_names[j].clone()));
            }
        }
        Ok(RegressionData { y, z, x, control_names })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// Centering and scaling applied by [`standardize`], invertible on the
/// coefficient scale.
#[derive(Debug, Clone)]
pub struct StandardizationInfo {
    pub x_means: Vec<f64>,
    pub x_scales: Vec<f64>,
    pub y_mean: f64,
    pub z_mean: f64,
}

impl StandardizationInfo {
    /// Maps coefficients on the standardized X scale back to the raw scale.
    pub fn coefs_to_original(&self, beta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(beta.len(), beta.iter().zip(&self.x_scales).map(|(b, s)| b / s))
    }

    /// Inverse of [`Self::coefs_to_original`].
    pub fn coefs_to_standardized(&self, beta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(beta.len(), beta.iter().zip(&self.x_scales).map(|(b, s)| b * s))
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Centers y and z, and centers and unit-scales every X column
/// (sample variance with n-1 denominator).
pub fn standardize(data: &RegressionData) -> Result<(RegressionData, StandardizationInfo)> {
    let n = data.n();
    if n < 2 {
        return Err(Error::Precondition("need at least 2 rows to standardize".into()));
    }
    let y_mean = data.y.mean();
    let z_mean = data.z.mean();
    let y = data.y.map(|v| v - y_mean);
    let z = data.z.map(|v| v - z_mean);
    let mut x = data.x.clone();
    let mut x_means = Vec::with_capacity(data.p());
    let mut x_scales = Vec::with_capacity(data.p());
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let m = col.iter().sum::<f64>() / n as f64;
        col.iter_mut().for_each(|v| *v -= m);
        let var = col.iter().map(|v| v * v).sum::<f64>() / (n as f64 - 1.0);
        if var <= f64::EPSILON * f64::EPSILON {
            return Err(Error::ZeroVariance(data.control_names[j].clone()));
        }
        let s = var.sqrt();
        col.iter_mut().for_each(|v| *v /= s);
        x_means.push(m);
        x_scales.push(s);
    }
    let out = RegressionData::new(y, z, x, data.control_names.clone())?;
    Ok((out, StandardizationInfo { x_means, x_scales, y_mean, z_mean }))
}

/// Sorted distinct levels of a categorical column.
fn levels(vals: &[String]) -> Vec<String> {
    let mut lv: Vec<String> = vals.iter().cloned().collect::<HashSet<_>>().into_iter().collect();
    lv.sort();
    lv
}

/// Dummy columns for a categorical variable, reference (first sorted)
/// level dropped. Returns (generated name, 0/1 column) pairs.
fn dummy_columns(name: &str, vals: &[String]) -> Result<Vec<(String, Vec<f64>)>> {
    let lv = levels(vals);
    if lv.len() < 2 {
        return Err(Error::SingleLevel(name.to_string()));
    }
    Ok(lv[1..]
        .iter()
        .map(|level| {
            let col = vals.iter().map(|v| if v == level { 1.0 } else { 0.0 }).collect();
            (format!("{name}={level}"), col)
        })
        .collect())
}

/// Expands a table into regression data per the design spec.
///
/// Column order is deterministic: numeric controls in spec order, then
/// dummy sets in spec order (levels sorted), then interaction columns in
/// rule order. Standardization, when requested, happens last.
pub fn build_design(table: &DataTable, spec: &DesignSpec) -> Result<RegressionData> {
    let n = table.n_rows();
    let y = DVector::from_column_slice(table.numeric(&spec.response)?);
    let z = DVector::from_column_slice(table.numeric(&spec.treatment)?);

    let mut names: Vec<String> = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let push = |name: String, col: Vec<f64>, names: &mut Vec<String>, cols: &mut Vec<Vec<f64>>| -> Result<()> {
        if names.contains(&name) {
            return Err(Error::DuplicateColumn(name));
        }
        names.push(name);
        cols.push(col);
        Ok(())
    };

    for c in &spec.controls {
        push(c.clone(), table.numeric(c)?.to_vec(), &mut names, &mut cols)?;
    }
    for d in &spec.dummies {
        let vals = match table.column(d)? {
            Column::Categorical(v) => v.clone(),
            Column::Numeric(v) => v.iter().map(|x| format!("{x}")).collect(),
        };
        for (name, col) in dummy_columns(d, &vals)? {
            push(name, col, &mut names, &mut cols)?;
        }
    }

    if !spec.interactions.is_empty() {
        let trend_name = spec
            .trend_column
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("interactions require trend_column".into()))?;
        let mut t = table.numeric(trend_name)?.to_vec();
        if spec.center_trend {
            let m = mean(&t);
            t.iter_mut().for_each(|v| *v -= m);
        }
        for rule in &spec.interactions {
            let (term, suffix): (Vec<f64>, &str) = match rule.trend {
                Trend::LinearInYear => (t.clone(), "trend"),
                Trend::QuadraticInYear => (t.iter().map(|v| v * v).collect(), "trend2"),
            };
            for cname in &rule.columns {
                match table.column(cname)? {
                    Column::Numeric(v) => {
                        let col = v.iter().zip(&term).map(|(a, b)| a * b).collect();
                        push(format!("{cname}:{suffix}"), col, &mut names, &mut cols)?;
                    }
                    Column::Categorical(v) => {
                        for (dname, dcol) in dummy_columns(cname, v)? {
                            let col = dcol.iter().zip(&term).map(|(a, b)| a * b).collect();
                            push(format!("{dname}:{suffix}"), col, &mut names, &mut cols)?;
                        }
                    }
                }
            }
        }
    }

    let p = cols.len();
    let x = DMatrix::from_fn(n, p, |i, j| cols[j][i]);
    let data = RegressionData::new(y, z, x, names)?;
    if spec.standardize {
        let (std_data, _) = standardize(&data)?;
        Ok(std_data)
    } else {
        Ok(data)
    }
}
