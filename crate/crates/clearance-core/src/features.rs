//! Design-matrix construction: one-hot dictionaries over the categorical
//! variables, calendar-decade and age-span binning, and numeric passthrough
//! for the count features.
//!
//! The intended pipeline order is: load, filter unknown ages, attach the
//! monthly-overlap flag (over the whole analysis file, so counterpart events
//! stay visible across split boundaries), then split, then `fit_schema` on
//! the training split and `encode` everywhere. The fitted schema is frozen:
//! encoding the same records with the same schema is bit-identical across
//! processes, and unseen categories encode to an all-zero group.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Dataset, Record, MONTHS};

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("cannot fit a schema on an empty dataset")]
    EmptyDataset,
    #[error("cannot encode with an empty schema")]
    EmptySchema,
    #[error("year {0} outside the supported 1976-2019 range")]
    YearOutOfRange(i32),
    #[error("negative age {0}")]
    NegativeAge(i32),
    #[error("record {row} has unknown victim age; filter before encoding")]
    UnknownAge { row: usize },
    #[error("monthly-overlap flag not attached; call Dataset::with_monthly_overlap first")]
    OverlapNotAttached,
    #[error("age bin edges must be positive and strictly ascending")]
    BadEdges,
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema (de)serialization failed: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Column payload type: one-hot indicator or numeric count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Binary,
    Count,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// Source variables that expand into one-hot groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceVariable {
    Decade,
    Month,
    HomicideType,
    AgeBin,
    VictimSex,
    VictimRace,
    Circumstance,
    Weapon,
    AgencyType,
}

impl SourceVariable {
    /// Prefix used in column names, matching the reporting convention
    /// ("Circumstance: Undetermined", "Victim Sex: Female", ...).
    pub fn label(&self) -> &'static str {
        match self {
            SourceVariable::Decade => "Decade",
            SourceVariable::Month => "Month",
            SourceVariable::HomicideType => "Homicide Type",
            SourceVariable::AgeBin => "Age",
            SourceVariable::VictimSex => "Victim Sex",
            SourceVariable::VictimRace => "Victim Race",
            SourceVariable::Circumstance => "Circumstance",
            SourceVariable::Weapon => "Weapon",
            SourceVariable::AgencyType => "Agency",
        }
    }
}

/// One fitted one-hot dictionary: the ordered levels of a source variable and
/// where its columns start in the matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub variable: SourceVariable,
    pub levels: Vec<String>,
    pub start: usize,
}

pub const COUNT_VICTIMS: &str = "N of Victims";
pub const COUNT_OFFENDERS: &str = "N of Offenders";
pub const COUNT_OVERLAP: &str = "Monthly Overlap";

/// Default age spans: `[0,5]`, then `(5,10]`, `(10,15]`, ... `(95,100]`, then 100+.
pub const DEFAULT_AGE_BIN_EDGES: [i32; 20] = [
    5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70, 75, 80, 85, 90, 95, 100,
];

/// Feature-engineering knobs carried by run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureOptions {
    /// Ascending upper edges of the age spans; ages above the last edge fall
    /// into the open terminal bin.
    pub age_bin_edges: Vec<i32>,
    /// Robustness re-fits on the linked subsample drop the decade group.
    pub include_decade: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            age_bin_edges: DEFAULT_AGE_BIN_EDGES.to_vec(),
            include_decade: true,
        }
    }
}

/// Frozen encoding dictionary. Fit once on the training split, reused
/// verbatim everywhere else.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<Column>,
    pub groups: Vec<Group>,
    pub age_bin_edges: Vec<i32>,
    pub decade_labels: Vec<String>,
    pub include_decade: bool,
}

impl FeatureSchema {
    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Hex digest tying models and explanations to this exact schema.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("schema serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path.as_ref(), json).map_err(|source| FeatureError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<FeatureSchema, FeatureError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|source| FeatureError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Encoded design matrix with per-row labels. Values are stored row-major;
/// binary columns hold 0/1 and count columns small non-negative integers.
#[derive(Clone, Debug)]
pub struct FeatureMatrix {
    pub schema: Arc<FeatureSchema>,
    n_rows: usize,
    values: Vec<f32>,
    pub labels: Vec<bool>,
    pub row_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.schema.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let w = self.n_cols();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn value(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.n_cols() + col]
    }

    /// Copy of the selected rows, schema shared.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let w = self.n_cols();
        let mut values = Vec::with_capacity(rows.len() * w);
        let mut labels = Vec::with_capacity(rows.len());
        let mut row_ids = Vec::with_capacity(rows.len());
        for &i in rows {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
            row_ids.push(self.row_ids[i].clone());
        }
        FeatureMatrix {
            schema: Arc::clone(&self.schema),
            n_rows: rows.len(),
            values,
            labels,
            row_ids,
        }
    }

    /// Build directly from raw rows; used by tests and the explainer oracle.
    pub fn from_rows(
        schema: Arc<FeatureSchema>,
        rows: Vec<Vec<f32>>,
        labels: Vec<bool>,
    ) -> FeatureMatrix {
        let n_rows = rows.len();
        let w = schema.columns.len();
        let mut values = Vec::with_capacity(n_rows * w);
        for r in &rows {
            assert_eq!(r.len(), w, "row width must match schema");
            values.extend_from_slice(r);
        }
        FeatureMatrix {
            schema,
            n_rows,
            values,
            labels,
            row_ids: (0..n_rows).map(|i| i.to_string()).collect(),
        }
    }

    pub fn positive_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

/// An anonymous schema of unnamed binary columns, for synthetic matrices.
pub fn anonymous_schema(n_cols: usize) -> FeatureSchema {
    FeatureSchema {
        columns: (0..n_cols)
            .map(|i| Column {
                name: format!("f{i}"),
                kind: ColumnKind::Binary,
            })
            .collect(),
        groups: Vec::new(),
        age_bin_edges: DEFAULT_AGE_BIN_EDGES.to_vec(),
        decade_labels: Vec::new(),
        include_decade: true,
    }
}

/// Calendar decade label for a year in the supported observation window.
pub fn bin_decade(year: i32) -> Result<String, FeatureError> {
    if !(1976..=2019).contains(&year) {
        return Err(FeatureError::YearOutOfRange(year));
    }
    Ok(format!("{}s", year / 10 * 10))
}

/// Age-span label under explicit edges. The first span is inclusive on both
/// ends ("0-5" covers ages 0..=5); every later label "a-b" covers (a, b];
/// ages past the last edge fall into the open "b+" bin.
pub fn bin_age_with(edges: &[i32], age: i32) -> Result<String, FeatureError> {
    if age < 0 {
        return Err(FeatureError::NegativeAge(age));
    }
    if edges.is_empty() || edges[0] <= 0 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FeatureError::BadEdges);
    }
    let mut lo = 0;
    for &hi in edges {
        if age <= hi {
            return Ok(format!("{lo}-{hi}"));
        }
        lo = hi;
    }
    Ok(format!("{}+", edges[edges.len() - 1]))
}

/// Age-span label under the default 5-year edges.
pub fn bin_age(age: i32) -> Result<String, FeatureError> {
    bin_age_with(&DEFAULT_AGE_BIN_EDGES, age)
}

fn record_level(
    r: &Record,
    row: usize,
    variable: SourceVariable,
    edges: &[i32],
) -> Result<String, FeatureError> {
    Ok(match variable {
        SourceVariable::Decade => bin_decade(r.year)?,
        SourceVariable::Month => r.month.name().to_string(),
        SourceVariable::HomicideType => r.homicide_type.clone(),
        SourceVariable::AgeBin => {
            let age = r.victim_age.ok_or(FeatureError::UnknownAge { row })?;
            bin_age_with(edges, age)?
        }
        SourceVariable::VictimSex => r.victim_sex.name().to_string(),
        SourceVariable::VictimRace => r.victim_race.clone(),
        SourceVariable::Circumstance => r.circumstance.clone(),
        SourceVariable::Weapon => r.weapon.clone(),
        SourceVariable::AgencyType => r.agency_type.clone(),
    })
}

fn ordered_levels(variable: SourceVariable, observed: BTreeSet<String>) -> Vec<String> {
    match variable {
        // chronological rather than lexicographic
        SourceVariable::Month => MONTHS
            .iter()
            .map(|m| m.name().to_string())
            .filter(|m| observed.contains(m))
            .collect(),
        // BTreeSet order is already correct for zero-padded decade and
        // alphabetical categories; age bins need numeric order
        SourceVariable::AgeBin => {
            let mut v: Vec<String> = observed.into_iter().collect();
            v.sort_by_key(|label| {
                label
                    .split(['-', '+'])
                    .next()
                    .and_then(|s| s.parse::<i32>().ok())
                    .unwrap_or(i32::MAX)
            });
            v
        }
        _ => observed.into_iter().collect(),
    }
}

const GROUPED: [SourceVariable; 9] = [
    SourceVariable::Decade,
    SourceVariable::Month,
    SourceVariable::HomicideType,
    SourceVariable::AgeBin,
    SourceVariable::VictimSex,
    SourceVariable::VictimRace,
    SourceVariable::Circumstance,
    SourceVariable::Weapon,
    SourceVariable::AgencyType,
];

/// Fit the one-hot dictionaries on (training) data. Every observed level of
/// every categorical variable gets exactly one column.
pub fn fit_schema(d: &Dataset, options: &FeatureOptions) -> Result<FeatureSchema, FeatureError> {
    if d.is_empty() {
        return Err(FeatureError::EmptyDataset);
    }
    if options.age_bin_edges.is_empty()
        || options.age_bin_edges[0] <= 0
        || options.age_bin_edges.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(FeatureError::BadEdges);
    }
    let variables: Vec<SourceVariable> = GROUPED
        .iter()
        .copied()
        .filter(|v| options.include_decade || *v != SourceVariable::Decade)
        .collect();

    let mut observed: Vec<BTreeSet<String>> = vec![BTreeSet::new(); variables.len()];
    for (row, r) in d.records.iter().enumerate() {
        for (vi, v) in variables.iter().enumerate() {
            observed[vi].insert(record_level(r, row, *v, &options.age_bin_edges)?);
        }
    }

    let mut columns = Vec::new();
    let mut groups = Vec::new();
    let mut push_group =
        |variable: SourceVariable, levels: Vec<String>, columns: &mut Vec<Column>| {
            let start = columns.len();
            for level in &levels {
                columns.push(Column {
                    name: format!("{}: {}", variable.label(), level),
                    kind: ColumnKind::Binary,
                });
            }
            groups.push(Group {
                variable,
                levels,
                start,
            });
        };
    let mut decade_labels = Vec::new();
    for (vi, v) in variables.iter().enumerate() {
        let levels = ordered_levels(*v, std::mem::take(&mut observed[vi]));
        if *v == SourceVariable::Decade {
            decade_labels = levels.clone();
        }
        push_group(*v, levels, &mut columns);
        // count features slot in after the group they follow in the raw table
        match v {
            SourceVariable::VictimRace => columns.push(Column {
                name: COUNT_VICTIMS.to_string(),
                kind: ColumnKind::Count,
            }),
            SourceVariable::Weapon => {
                columns.push(Column {
                    name: COUNT_OFFENDERS.to_string(),
                    kind: ColumnKind::Count,
                });
                columns.push(Column {
                    name: COUNT_OVERLAP.to_string(),
                    kind: ColumnKind::Count,
                });
            }
            _ => {}
        }
    }

    Ok(FeatureSchema {
        columns,
        groups,
        age_bin_edges: options.age_bin_edges.clone(),
        decade_labels,
        include_decade: options.include_decade,
    })
}

/// Encode records under a frozen schema. Unseen categorical levels yield an
/// all-zero group; count features pass through numerically.
pub fn encode(d: &Dataset, schema: &FeatureSchema) -> Result<FeatureMatrix, FeatureError> {
    if schema.columns.is_empty() {
        return Err(FeatureError::EmptySchema);
    }
    if !d.overlap_attached {
        return Err(FeatureError::OverlapNotAttached);
    }
    let w = schema.columns.len();
    let victims_col = schema
        .column_index(COUNT_VICTIMS)
        .ok_or(FeatureError::EmptySchema)?;
    let offenders_col = schema
        .column_index(COUNT_OFFENDERS)
        .ok_or(FeatureError::EmptySchema)?;
    let overlap_col = schema
        .column_index(COUNT_OVERLAP)
        .ok_or(FeatureError::EmptySchema)?;

    let mut values = vec![0.0f32; d.len() * w];
    let mut labels = Vec::with_capacity(d.len());
    let mut row_ids = Vec::with_capacity(d.len());
    for (row, r) in d.records.iter().enumerate() {
        let out = &mut values[row * w..(row + 1) * w];
        for g in &schema.groups {
            let level = record_level(r, row, g.variable, &schema.age_bin_edges)?;
            if let Some(k) = g.levels.iter().position(|l| *l == level) {
                out[g.start + k] = 1.0;
            }
        }
        out[victims_col] = r.victim_count as f32;
        out[offenders_col] = r.offender_count as f32;
        out[overlap_col] = if r.monthly_overlap { 1.0 } else { 0.0 };
        labels.push(r.solved);
        row_ids.push(r.id.clone());
    }
    Ok(FeatureMatrix {
        schema: Arc::new(schema.clone()),
        n_rows: d.len(),
        values,
        labels,
        row_ids,
    })
}
