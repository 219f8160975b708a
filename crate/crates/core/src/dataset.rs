//! CSV ingestion, categorical encoding, invalid-value imputation and
//! stratified train/test splitting.

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::ident::string_enum;
use crate::rng::stage_rng;

string_enum! {
    /// Known CSV layouts.
    pub enum Schema {
        Pima => "pima",
        Stroke => "stroke",
        Generic => "generic",
    }
}

pub const PIMA_COLUMNS: [&str; 9] = [
    "Pregnancies",
    "Glucose",
    "BloodPressure",
    "SkinThickness",
    "Insulin",
    "BMI",
    "DiabetesPedigreeFunction",
    "Age",
    "Outcome",
];

/// Columns where a recorded zero is physiologically impossible.
pub const PIMA_INVALID_ZERO: [&str; 5] = [
    "Glucose",
    "BloodPressure",
    "SkinThickness",
    "Insulin",
    "BMI",
];

pub const STROKE_COLUMNS: [&str; 12] = [
    "id",
    "gender",
    "age",
    "hypertension",
    "heart_disease",
    "ever_married",
    "work_type",
    "Residence_type",
    "avg_glucose_level",
    "bmi",
    "smoking_status",
    "stroke",
];

const MISSING_TOKENS: [&str; 6] = ["", "NA", "N/A", "NaN", "nan", "?"];

fn is_missing(cell: &str) -> bool {
    MISSING_TOKENS.contains(&cell.trim())
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    /// Missing cells are NaN.
    Numeric(Vec<f64>),
    Text(Vec<Option<String>>),
}

impl RawColumn {
    pub fn len(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.len(),
            RawColumn::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Typed columns straight from the CSV, label separated out.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub column_names: Vec<String>,
    pub columns: Vec<RawColumn>,
    pub labels: Vec<u8>,
    pub invalid_zero_flags: Vec<bool>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: Schema) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: std::io::Read>(reader: R, schema: Schema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Data(format!("reading header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();

    let expected: Option<&[&str]> = match schema {
        Schema::Pima => Some(&PIMA_COLUMNS),
        Schema::Stroke => Some(&STROKE_COLUMNS),
        Schema::Generic => None,
    };
    if let Some(expected) = expected {
        if header != expected {
            return Err(Error::Data(format!(
                "header mismatch for schema {schema}: expected {expected:?}, found {header:?}"
            )));
        }
    }
    if header.len() < 2 {
        return Err(Error::Data(
            "need at least one feature column and a label column".into(),
        ));
    }

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("row {}: {e}", line + 2)))?;
        if record.len() != header.len() {
            return Err(Error::Data(format!(
                "row {} has {} fields, header has {}",
                line + 2,
                record.len(),
                header.len()
            )));
        }
        for (col, cell) in record.iter().enumerate() {
            cells[col].push(cell.to_string());
        }
    }

    let label_col = header.len() - 1;
    let labels = cells[label_col]
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            parse_label(cell).ok_or_else(|| {
                Error::Data(format!("row {}: label `{cell}` is not binary (0/1)", i + 2))
            })
        })
        .collect::<Result<Vec<u8>>>()?;

    let skip_id = schema == Schema::Stroke;
    let mut column_names = Vec::new();
    let mut columns = Vec::new();
    for (col, name) in header.iter().enumerate().take(label_col) {
        if skip_id && col == 0 {
            continue;
        }
        column_names.push(name.clone());
        columns.push(type_column(&cells[col]));
    }
    let invalid_zero_flags = column_names
        .iter()
        .map(|n| schema == Schema::Pima && PIMA_INVALID_ZERO.contains(&n.as_str()))
        .collect();

    Ok(RawTable {
        column_names,
        columns,
        labels,
        invalid_zero_flags,
    })
}

fn parse_label(cell: &str) -> Option<u8> {
    match cell.trim().parse::<f64>() {
        Ok(v) if v == 0.0 => Some(0),
        Ok(v) if v == 1.0 => Some(1),
        _ => None,
    }
}

fn type_column(cells: &[String]) -> RawColumn {
    let numeric: Option<Vec<f64>> = cells
        .iter()
        .map(|c| {
            if is_missing(c) {
                Some(f64::NAN)
            } else {
                c.parse::<f64>().ok().filter(|v| v.is_finite())
            }
        })
        .collect();
    match numeric {
        Some(values) => RawColumn::Numeric(values),
        None => RawColumn::Text(
            cells
                .iter()
                .map(|c| if is_missing(c) { None } else { Some(c.clone()) })
                .collect(),
        ),
    }
}

/// Ordinal code book for one categorical column: code `i` decodes to
/// `values[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeBook {
    pub column: String,
    pub values: Vec<String>,
}

impl CodeBook {
    pub fn decode(&self, code: f64) -> Option<&str> {
        if code.fract() != 0.0 || code < 0.0 {
            return None;
        }
        self.values.get(code as usize).map(String::as_str)
    }
}

/// Feature matrix with binary labels and per-column metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    pub features: Array2<f64>,
    pub labels: Vec<u8>,
    pub column_names: Vec<String>,
    pub categorical_flags: Vec<bool>,
    pub invalid_zero_flags: Vec<bool>,
}

impl TabularDataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<u8>,
        column_names: Vec<String>,
        categorical_flags: Vec<bool>,
        invalid_zero_flags: Vec<bool>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::Data(format!(
                "dataset must be non-empty, got {n}x{d}"
            )));
        }
        if labels.len() != n {
            return Err(Error::Data(format!("{} labels for {n} rows", labels.len())));
        }
        if column_names.len() != d || categorical_flags.len() != d || invalid_zero_flags.len() != d
        {
            return Err(Error::Data(
                "column metadata length does not match feature count".into(),
            ));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::Data("labels must be 0 or 1".into()));
        }
        let ds = TabularDataset {
            features,
            labels,
            column_names,
            categorical_flags,
            invalid_zero_flags,
        };
        let counts = ds.class_counts();
        if counts[0] == 0 || counts[1] == 0 {
            return Err(Error::Data("labels must contain both classes".into()));
        }
        Ok(ds)
    }

    /// Builds a dataset with plain numeric columns named `x0..`.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[u8]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let features = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| Error::Data(format!("ragged rows: {e}")))?;
        Self::new(
            features,
            labels.to_vec(),
            (0..d).map(|j| format!("x{j}")).collect(),
            vec![false; d],
            vec![false; d],
        )
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&y| y == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// Rows in the given order; metadata is kept. Does not re-check the
    /// both-classes invariant since subsets may legitimately be one-class.
    pub fn subset_rows(&self, rows: &[usize]) -> TabularDataset {
        TabularDataset {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            column_names: self.column_names.clone(),
            categorical_flags: self.categorical_flags.clone(),
            invalid_zero_flags: self.invalid_zero_flags.clone(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> TabularDataset {
        TabularDataset {
            features: self.features.select(Axis(1), cols),
            labels: self.labels.clone(),
            column_names: cols.iter().map(|&j| self.column_names[j].clone()).collect(),
            categorical_flags: cols.iter().map(|&j| self.categorical_flags[j]).collect(),
            invalid_zero_flags: cols.iter().map(|&j| self.invalid_zero_flags[j]).collect(),
        }
    }

    pub fn has_missing(&self) -> bool {
        self.features.iter().any(|v| v.is_nan())
    }
}

/// Replaces text columns by first-appearance ordinal codes. Missing text
/// cells stay missing (NaN) until imputation.
pub fn encode_categoricals(raw: &RawTable) -> Result<(TabularDataset, Vec<CodeBook>)> {
    let n = raw.n_rows();
    let d = raw.columns.len();
    let mut features = Array2::<f64>::zeros((n, d));
    let mut flags = vec![false; d];
    let mut books = Vec::new();
    for (j, column) in raw.columns.iter().enumerate() {
        if column.len() != n {
            return Err(Error::Data(format!(
                "column `{}` length mismatch",
                raw.column_names[j]
            )));
        }
        match column {
            RawColumn::Numeric(values) => {
                for (i, v) in values.iter().enumerate() {
                    features[[i, j]] = *v;
                }
            }
            RawColumn::Text(values) => {
                flags[j] = true;
                let mut book = CodeBook {
                    column: raw.column_names[j].clone(),
                    values: Vec::new(),
                };
                for (i, v) in values.iter().enumerate() {
                    features[[i, j]] = match v {
                        None => f64::NAN,
                        Some(s) => match book.values.iter().position(|b| b == s) {
                            Some(code) => code as f64,
                            None => {
                                book.values.push(s.clone());
                                (book.values.len() - 1) as f64
                            }
                        },
                    };
                }
                books.push(book);
            }
        }
    }
    let ds = TabularDataset::new(
        features,
        raw.labels.clone(),
        raw.column_names.clone(),
        flags,
        raw.invalid_zero_flags.clone(),
    )?;
    Ok((ds, books))
}

/// Loads, encodes and returns a dataset ready for splitting.
pub fn load_dataset(path: impl AsRef<Path>, schema: Schema) -> Result<TabularDataset> {
    let raw = load_csv(path, schema)?;
    Ok(encode_categoricals(&raw)?.0)
}

/// Per-column replacement means computed from valid entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputeParams {
    pub means: Vec<f64>,
    pub invalid_zero_flags: Vec<bool>,
}

fn is_invalid(v: f64, zero_invalid: bool) -> bool {
    v.is_nan() || (zero_invalid && v == 0.0)
}

impl ImputeParams {
    pub fn fit(ds: &TabularDataset, invalid_zero_flags: &[bool]) -> Result<Self> {
        if invalid_zero_flags.len() != ds.n_features() {
            return Err(Error::Data(
                "imputation policy length does not match feature count".into(),
            ));
        }
        let mut means = Vec::with_capacity(ds.n_features());
        for (j, column) in ds.features.columns().into_iter().enumerate() {
            let zero_invalid = invalid_zero_flags[j];
            let mut sum = 0.0;
            let mut count = 0usize;
            let mut needs = false;
            for &v in column {
                if is_invalid(v, zero_invalid) {
                    needs = true;
                } else {
                    sum += v;
                    count += 1;
                }
            }
            if count == 0 && (needs || zero_invalid) {
                return Err(Error::Data(format!(
                    "column `{}` has no valid entries to impute from",
                    ds.column_names[j]
                )));
            }
            means.push(if count == 0 { 0.0 } else { sum / count as f64 });
        }
        Ok(ImputeParams {
            means,
            invalid_zero_flags: invalid_zero_flags.to_vec(),
        })
    }

    pub fn apply(&self, ds: &TabularDataset) -> Result<TabularDataset> {
        if ds.n_features() != self.means.len() {
            return Err(Error::stage("impute", "feature count mismatch"));
        }
        let mut out = ds.clone();
        for (j, mut column) in out.features.columns_mut().into_iter().enumerate() {
            let zero_invalid = self.invalid_zero_flags[j];
            for v in column.iter_mut() {
                if is_invalid(*v, zero_invalid) {
                    *v = self.means[j];
                }
            }
        }
        Ok(out)
    }
}

/// Mean-substitutes missing cells and zeros in invalid-zero columns, using
/// the dataset's own statistics.
pub fn impute_invalid(ds: &TabularDataset, invalid_zero_flags: &[bool]) -> Result<TabularDataset> {
    ImputeParams::fit(ds, invalid_zero_flags)?.apply(ds)
}

#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: TabularDataset,
    pub test: TabularDataset,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub split_ratio: f64,
    pub seed: u64,
}

/// Stratified split: each class contributes `round(n_c * ratio)` test rows,
/// clamped so both sides keep at least one member of each class.
pub fn split_train_test(ds: &TabularDataset, ratio: f64, seed: u64) -> Result<SplitPair> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config(
            "split_ratio",
            format!("{ratio} is not in (0, 1)"),
        ));
    }
    let mut rng = stage_rng(seed, "split");
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..ds.n_rows())
            .filter(|&i| ds.labels[i] == class)
            .collect();
        if members.len() < 2 {
            return Err(Error::Data(format!(
                "class {class} has {} member(s); stratified splitting needs at least 2",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n_test = ((members.len() as f64 * ratio).round() as usize).clamp(1, members.len() - 1);
        test_rows.extend_from_slice(&members[..n_test]);
        train_rows.extend_from_slice(&members[n_test..]);
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok(SplitPair {
        train: ds.subset_rows(&train_rows),
        test: ds.subset_rows(&test_rows),
        train_rows,
        test_rows,
        split_ratio: ratio,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn generic(csv: &str) -> Result<RawTable> {
        read_csv(csv.as_bytes(), Schema::Generic)
    }

    #[test]
    fn generic_three_rows() {
        let raw = generic("a,b,y\n1,2,0\n3,4,1\n5,6,0\n").unwrap();
        assert_eq!(raw.n_rows(), 3);
        assert_eq!(raw.column_names, vec!["a", "b"]);
        assert_eq!(raw.labels, vec![0, 1, 0]);
    }

    #[test]
    fn non_binary_label_rejected() {
        let err = generic("a,y\n1,0\n2,2\n").unwrap_err();
        assert!(err.to_string().contains("not binary"), "{err}");
    }

    #[test]
    fn pima_header_checked() {
        let bad = "a,b,c,d,e,f,g,h,Outcome\n1,2,3,4,5,6,7,8,0\n";
        assert!(read_csv(bad.as_bytes(), Schema::Pima).is_err());
    }

    #[test]
    fn stroke_drops_id_and_reads_na() {
        let csv = "id,gender,age,hypertension,heart_disease,ever_married,work_type,Residence_type,avg_glucose_level,bmi,smoking_status,stroke\n\
                   1,Male,67,0,1,Yes,Private,Urban,228.69,36.6,formerly smoked,1\n\
                   2,Female,61,0,0,Yes,Self-employed,Rural,202.21,N/A,never smoked,1\n\
                   3,Male,80,0,1,Yes,Private,Rural,105.92,32.5,never smoked,0\n\
                   4,Female,49,0,0,No,Private,Urban,171.23,34.4,smokes,0\n";
        let raw = read_csv(csv.as_bytes(), Schema::Stroke).unwrap();
        assert_eq!(raw.column_names.len(), 10);
        assert_eq!(raw.column_names[0], "gender");
        let (ds, books) = encode_categoricals(&raw).unwrap();
        let bmi = ds.column_names.iter().position(|c| c == "bmi").unwrap();
        assert!(ds.features[[1, bmi]].is_nan());
        assert!(!ds.categorical_flags[bmi]);
        let smoking = books.iter().find(|b| b.column == "smoking_status").unwrap();
        assert_eq!(
            smoking.values,
            vec!["formerly smoked", "never smoked", "smokes"]
        );
        let imputed = impute_invalid(&ds, &ds.invalid_zero_flags).unwrap();
        assert!((imputed.features[[1, bmi]] - (36.6 + 32.5 + 34.4) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn first_appearance_codes() {
        let raw = generic("c,y\nA,0\nB,1\nA,1\n").unwrap();
        let (ds, books) = encode_categoricals(&raw).unwrap();
        assert_eq!(ds.features.column(0).to_vec(), vec![0.0, 1.0, 0.0]);
        assert!(ds.categorical_flags[0]);
        assert_eq!(books[0].decode(1.0), Some("B"));
    }

    #[test]
    fn numeric_table_passes_through() {
        let raw = generic("a,b,y\n1.5,2,0\n3,4,1\n").unwrap();
        let (ds, books) = encode_categoricals(&raw).unwrap();
        assert!(books.is_empty());
        assert_eq!(ds.features[[0, 0]], 1.5);
        assert_eq!(ds.categorical_flags, vec![false, false]);
    }

    #[test]
    fn zero_invalid_mean_substitution() {
        let ds = TabularDataset::from_rows(&[vec![2.0], vec![0.0], vec![4.0]], &[0, 1, 0]).unwrap();
        let out = impute_invalid(&ds, &[true]).unwrap();
        assert_eq!(out.features.column(0).to_vec(), vec![2.0, 3.0, 4.0]);
        // without the flag the zero is legitimate
        let same = impute_invalid(&ds, &[false]).unwrap();
        assert_eq!(same, ds);
    }

    #[test]
    fn all_invalid_column_named_in_error() {
        let ds = TabularDataset::from_rows(&[vec![0.0], vec![0.0]], &[0, 1]).unwrap();
        let err = impute_invalid(&ds, &[true]).unwrap_err();
        assert!(err.to_string().contains("x0"), "{err}");
    }

    #[test]
    fn balanced_split_of_ten() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
        let ds = TabularDataset::from_rows(&rows, &labels).unwrap();
        let split = split_train_test(&ds, 0.2, 3).unwrap();
        assert_eq!(split.test.n_rows(), 2);
        assert_eq!(split.test.class_counts(), [1, 1]);
        let again = split_train_test(&ds, 0.2, 3).unwrap();
        assert_eq!(split.test_rows, again.test_rows);
    }

    #[test]
    fn split_rejects_bad_inputs() {
        let ds = TabularDataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0]], &[0, 0, 1]).unwrap();
        assert!(split_train_test(&ds, 0.2, 1).is_err());
        let ds =
            TabularDataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]], &[0, 0, 1, 1])
                .unwrap();
        assert!(split_train_test(&ds, 1.0, 1).is_err());
        assert!(split_train_test(&ds, 0.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn split_partitions_rows(n0 in 2usize..40, n1 in 2usize..40, ratio in 0.05f64..0.95, seed in 0u64..1000) {
            let labels: Vec<u8> = (0..n0 + n1).map(|i| u8::from(i >= n0)).collect();
            let rows: Vec<Vec<f64>> = (0..n0 + n1).map(|i| vec![i as f64]).collect();
            let ds = TabularDataset::from_rows(&rows, &labels).unwrap();
            let split = split_train_test(&ds, ratio, seed).unwrap();
            let mut all: Vec<usize> = split.train_rows.iter().chain(&split.test_rows).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n0 + n1).collect::<Vec<_>>());
            for (c, n) in [(0usize, n0), (1, n1)] {
                let test_c = split.test.class_counts()[c] as f64;
                prop_assert!((test_c - n as f64 * ratio).abs() <= 1.0);
            }
        }

        #[test]
        fn imputation_is_idempotent(values in proptest::collection::vec(0u8..5, 3..30)) {
            let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![f64::from(v)]).collect();
            let labels: Vec<u8> = (0..rows.len()).map(|i| (i % 2) as u8).collect();
            prop_assume!(values.iter().any(|&v| v != 0));
            let ds = TabularDataset::from_rows(&rows, &labels).unwrap();
            let once = impute_invalid(&ds, &[true]).unwrap();
            let twice = impute_invalid(&once, &[true]).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
