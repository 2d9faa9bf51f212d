//! MAP-schema victim records: CSV ingestion, target handling, filtering,
//! deterministic splits and per-state partitions.
//!
//! One `Record` is one victim, not one incident; multi-victim events share an
//! event id. The `Solved` column is authoritative for the target;
//! [`derive_target_check`] exists only to cross-check it against the
//! offender-sex convention.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rng;

/// Errors raised by ingestion and splitting.
#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column: {0}")]
    MissingColumn(String),
    #[error("dataset is empty")]
    Empty,
    #[error("dataset has {0} records; at least {1} required")]
    TooSmall(usize, usize),
    #[error("train fraction must be in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("split leaves an empty side (n={n}, fraction={fraction})")]
    DegenerateSplit { n: usize, fraction: f64 },
}

/// Calendar month, canonicalized to English names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Month {
    January,
    February,
    March,
    April,
    May,
    June,
    July,
    August,
    September,
    October,
    November,
    December,
}

pub const MONTHS: [Month; 12] = [
    Month::January,
    Month::February,
    Month::March,
    Month::April,
    Month::May,
    Month::June,
    Month::July,
    Month::August,
    Month::September,
    Month::October,
    Month::November,
    Month::December,
];

impl Month {
    pub fn name(&self) -> &'static str {
        match self {
            Month::January => "January",
            Month::February => "February",
            Month::March => "March",
            Month::April => "April",
            Month::May => "May",
            Month::June => "June",
            Month::July => "July",
            Month::August => "August",
            Month::September => "September",
            Month::October => "October",
            Month::November => "November",
            Month::December => "December",
        }
    }

    pub fn number(&self) -> u32 {
        MONTHS.iter().position(|m| m == self).unwrap() as u32 + 1
    }

    pub fn from_number(n: u32) -> Option<Month> {
        if (1..=12).contains(&n) {
            Some(MONTHS[(n - 1) as usize])
        } else {
            None
        }
    }

    /// Accepts full names, three-letter abbreviations, and numbers 1-12
    /// (the raw files are inconsistent about the encoding).
    pub fn parse(s: &str) -> Option<Month> {
        let t = s.trim();
        if t.is_empty() {
            return None;
        }
        if let Ok(n) = t.parse::<u32>() {
            return Month::from_number(n);
        }
        let lower = t.to_ascii_lowercase();
        if let Some(m) = MONTHS
            .iter()
            .copied()
            .find(|m| m.name().to_ascii_lowercase() == lower)
        {
            return Some(m);
        }
        if lower.len() == 3 {
            return MONTHS
                .iter()
                .copied()
                .find(|m| m.name().to_ascii_lowercase().starts_with(&lower));
        }
        None
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sex of a victim or offender as recorded by the reporting agency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    Female,
    Male,
    Unknown,
}

impl Sex {
    pub fn parse(s: &str) -> Sex {
        match s.trim().to_ascii_lowercase().as_str() {
            "f" | "female" => Sex::Female,
            "m" | "male" => Sex::Male,
            _ => Sex::Unknown,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Sex::Female => "Female",
            Sex::Male => "Male",
            Sex::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One homicide-victim observation in the MAP schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// Event identifier; shared by all victims of one incident.
    pub id: String,
    pub year: i32,
    pub month: Month,
    pub state: String,
    /// Reporting agency; doubles as the city key for record linkage.
    pub agency_name: String,
    pub agency_type: String,
    pub homicide_type: String,
    /// Age in years; `None` when the file carries the unknown sentinel.
    pub victim_age: Option<i32>,
    pub victim_sex: Sex,
    pub victim_race: String,
    /// Victim count as the file encodes it (totals in some exports,
    /// additional victims in SHR-derived ones).
    pub victim_count: u32,
    pub offender_count: u32,
    pub offender_sex: Sex,
    pub circumstance: String,
    pub weapon: String,
    /// Authoritative outcome from the file's `Solved` column.
    pub solved: bool,
    /// Set by [`Dataset::with_monthly_overlap`]; false until attached.
    pub monthly_overlap: bool,
}

/// A row that failed to parse; the row is dropped and counted.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line number in the source file (header is line 1).
    pub line: u64,
    pub reason: String,
}

/// Where a dataset came from and how much of the file survived.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub rows_read: u64,
    pub rows_kept: u64,
    pub rows_dropped: u64,
    /// First few row errors, for diagnostics; counts above are authoritative.
    pub row_errors: Vec<RowError>,
}

const MAX_LOGGED_ROW_ERRORS: usize = 50;

/// An ordered, immutable collection of records.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub provenance: Provenance,
    /// True once [`Dataset::with_monthly_overlap`] has stamped the flag;
    /// encoding refuses datasets where it was never computed.
    #[serde(default)]
    pub overlap_attached: bool,
}

/// A disjoint train/test split produced by [`shuffled_split`].
#[derive(Clone, Debug)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
}

impl Dataset {
    pub fn from_records(records: Vec<Record>, source: &str) -> Dataset {
        let n = records.len() as u64;
        Dataset {
            records,
            provenance: Provenance {
                source: source.to_string(),
                rows_read: n,
                rows_kept: n,
                rows_dropped: 0,
                row_errors: Vec::new(),
            },
            overlap_attached: false,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn solved_count(&self) -> usize {
        self.records.iter().filter(|r| r.solved).count()
    }

    pub fn unsolved_count(&self) -> usize {
        self.len() - self.solved_count()
    }

    /// Attach the monthly-overlap flag to every record. Run this before
    /// splitting: the flag is defined over the whole file, and counterpart
    /// events must be visible across split boundaries.
    pub fn with_monthly_overlap(mut self) -> Dataset {
        let flags = compute_monthly_overlap(&self);
        for (r, f) in self.records.iter_mut().zip(flags) {
            r.monthly_overlap = f;
        }
        self.overlap_attached = true;
        self
    }

    /// Per-year (solved, unsolved) counts, ascending by year.
    pub fn yearly_counts(&self) -> Vec<(i32, u64, u64)> {
        let mut map: BTreeMap<i32, (u64, u64)> = BTreeMap::new();
        for r in &self.records {
            let e = map.entry(r.year).or_default();
            if r.solved {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
        map.into_iter().map(|(y, (s, u))| (y, s, u)).collect()
    }

    /// Per-state (total, solved) counts keyed by the normalized state name.
    pub fn state_counts(&self) -> BTreeMap<String, (u64, u64)> {
        let mut map: BTreeMap<String, (u64, u64)> = BTreeMap::new();
        for r in &self.records {
            let e = map.entry(normalize_state(&r.state)).or_default();
            e.0 += 1;
            if r.solved {
                e.1 += 1;
            }
        }
        map
    }
}

/// Required header names, matched case-insensitively.
pub const REQUIRED_COLUMNS: [&str; 16] = [
    "ID",
    "Year",
    "Month",
    "State",
    "Agency",
    "Agentype",
    "Homicide",
    "VicAge",
    "VicSex",
    "VicRace",
    "VicCount",
    "OffSex",
    "OffCount",
    "Circumstance",
    "Weapon",
    "Solved",
];

/// Age values above this are treated as the unknown sentinel (MAP uses 999).
const MAX_KNOWN_AGE: i32 = 120;

fn categorical(cell: &str) -> String {
    let t = cell.trim();
    if t.is_empty() {
        "Unknown".to_string()
    } else {
        t.to_string()
    }
}

/// Uppercased, trimmed state key; DC is a first-class unit like any state.
pub fn normalize_state(raw: &str) -> String {
    raw.trim().to_ascii_uppercase()
}

struct ColumnIndex {
    idx: [usize; 16],
}

impl ColumnIndex {
    fn from_headers(headers: &csv::StringRecord) -> Result<ColumnIndex, DataError> {
        let lower: Vec<String> = headers
            .iter()
            .map(|h| h.trim().to_ascii_lowercase())
            .collect();
        let mut idx = [0usize; 16];
        for (k, name) in REQUIRED_COLUMNS.iter().enumerate() {
            match lower.iter().position(|h| h == &name.to_ascii_lowercase()) {
                Some(i) => idx[k] = i,
                None => return Err(DataError::MissingColumn(name.to_string())),
            }
        }
        Ok(ColumnIndex { idx })
    }

    fn get<'a>(&self, row: &'a csv::StringRecord, col: usize) -> &'a str {
        row.get(self.idx[col]).unwrap_or("")
    }
}

fn parse_row(cols: &ColumnIndex, row: &csv::StringRecord) -> Result<Record, String> {
    let year: i32 = cols
        .get(row, 1)
        .trim()
        .parse()
        .map_err(|_| format!("unparseable Year {:?}", cols.get(row, 1)))?;
    if !(1900..=2100).contains(&year) {
        return Err(format!("Year {year} out of plausible range"));
    }
    let month = Month::parse(cols.get(row, 2))
        .ok_or_else(|| format!("unparseable Month {:?}", cols.get(row, 2)))?;
    let victim_age = {
        let raw = cols.get(row, 7).trim();
        if raw.is_empty() || raw.eq_ignore_ascii_case("unknown") {
            None
        } else {
            let age: i32 = raw
                .parse()
                .map_err(|_| format!("unparseable VicAge {raw:?}"))?;
            if (0..=MAX_KNOWN_AGE).contains(&age) {
                Some(age)
            } else {
                None // 999 and other sentinels
            }
        }
    };
    // SHR-derived exports count *additional* victims/offenders (0 for a
    // single-victim, single-offender case); other exports carry totals.
    // Either way the raw value passes through: count features are
    // shift-invariant for every learner downstream.
    let victim_count: u32 = cols
        .get(row, 10)
        .trim()
        .parse()
        .map_err(|_| format!("unparseable VicCount {:?}", cols.get(row, 10)))?;
    let offender_count: u32 = cols
        .get(row, 12)
        .trim()
        .parse()
        .map_err(|_| format!("unparseable OffCount {:?}", cols.get(row, 12)))?;
    let solved = match cols.get(row, 15).trim().to_ascii_lowercase().as_str() {
        "yes" => true,
        "no" => false,
        other => return Err(format!("unparseable Solved {other:?} (expected Yes/No)")),
    };
    Ok(Record {
        id: cols.get(row, 0).trim().to_string(),
        year,
        month,
        state: cols.get(row, 3).trim().to_string(),
        agency_name: cols.get(row, 4).trim().to_string(),
        agency_type: categorical(cols.get(row, 5)),
        homicide_type: categorical(cols.get(row, 6)),
        victim_age,
        victim_sex: Sex::parse(cols.get(row, 8)),
        victim_race: categorical(cols.get(row, 9)),
        victim_count,
        offender_count,
        offender_sex: Sex::parse(cols.get(row, 11)),
        circumstance: categorical(cols.get(row, 13)),
        weapon: categorical(cols.get(row, 14)),
        solved,
        monthly_overlap: false,
    })
}

/// Load a MAP-schema CSV. Rows that fail to parse are dropped and counted in
/// the provenance; a missing required column aborts with a schema error.
pub fn load_map_csv(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(std::io::BufReader::new(file));
    let cols = ColumnIndex::from_headers(reader.headers()?)?;

    let mut records = Vec::new();
    let mut provenance = Provenance {
        source: path.display().to_string(),
        ..Provenance::default()
    };
    for (i, row) in reader.records().enumerate() {
        provenance.rows_read += 1;
        let line = i as u64 + 2; // header occupies line 1
        let parsed = match row {
            Ok(row) => parse_row(&cols, &row),
            Err(e) => Err(format!("malformed csv row: {e}")),
        };
        match parsed {
            Ok(r) => {
                provenance.rows_kept += 1;
                records.push(r);
            }
            Err(reason) => {
                provenance.rows_dropped += 1;
                if provenance.row_errors.len() < MAX_LOGGED_ROW_ERRORS {
                    provenance.row_errors.push(RowError { line, reason });
                }
            }
        }
    }
    Ok(Dataset {
        records,
        provenance,
        overlap_attached: false,
    })
}

/// Keep only records whose victim age is known. Order preserved; idempotent.
pub fn filter_unknown_age(d: &Dataset) -> Dataset {
    let records: Vec<Record> = d
        .records
        .iter()
        .filter(|r| r.victim_age.is_some())
        .cloned()
        .collect();
    let kept = records.len() as u64;
    Dataset {
        records,
        provenance: Provenance {
            source: d.provenance.source.clone(),
            rows_read: d.provenance.rows_read,
            rows_kept: kept,
            rows_dropped: d.provenance.rows_read - kept,
            row_errors: d.provenance.row_errors.clone(),
        },
        overlap_attached: d.overlap_attached,
    }
}

/// The file-construction convention for the target: a case counts as solved
/// unless the offender's sex is unknown. The stored `Solved` column stays
/// authoritative; this is a diagnostic for counting disagreements.
pub fn derive_target_check(r: &Record) -> bool {
    r.offender_sex != Sex::Unknown
}

/// Number of records whose stored label disagrees with [`derive_target_check`].
pub fn target_disagreements(d: &Dataset) -> usize {
    d.records
        .iter()
        .filter(|r| r.solved != derive_target_check(r))
        .count()
}

/// Deterministically shuffle and split. The permutation orders indices by
/// their SplitMix64 counter hash keyed on `seed`, so equal seeds give
/// byte-identical member lists on any platform. Train size is
/// `round(train_fraction * n)`.
pub fn shuffled_split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitPair, DataError> {
    if d.is_empty() {
        return Err(DataError::Empty);
    }
    if d.len() < 2 {
        return Err(DataError::TooSmall(d.len(), 2));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::BadFraction(train_fraction));
    }
    let n = d.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(DataError::DegenerateSplit {
            n,
            fraction: train_fraction,
        });
    }
    let order = rng::permutation(seed, n);
    let take = |ix: &[usize], tag: &str| -> Dataset {
        let records: Vec<Record> = ix.iter().map(|&i| d.records[i].clone()).collect();
        let kept = records.len() as u64;
        Dataset {
            records,
            provenance: Provenance {
                source: format!("{}#{tag}", d.provenance.source),
                rows_read: kept,
                rows_kept: kept,
                rows_dropped: 0,
                row_errors: Vec::new(),
            },
            overlap_attached: d.overlap_attached,
        }
    };
    Ok(SplitPair {
        train: take(&order[..n_train], "train"),
        test: take(&order[n_train..], "test"),
        seed,
    })
}

/// Partition by normalized state key. Every record lands in exactly one
/// partition; iteration order is lexicographic in the key.
pub fn partition_by_state(d: &Dataset) -> BTreeMap<String, Dataset> {
    let mut map: BTreeMap<String, Vec<Record>> = BTreeMap::new();
    for r in &d.records {
        map.entry(normalize_state(&r.state))
            .or_default()
            .push(r.clone());
    }
    map.into_iter()
        .map(|(state, records)| {
            let source = format!("{}#state={state}", d.provenance.source);
            let mut part = Dataset::from_records(records, &source);
            part.overlap_attached = d.overlap_attached;
            (state, part)
        })
        .collect()
}

/// Flag records whose reporting agency had another homicide (different event
/// id) in the same state, year and month. The agency identifier stands in for
/// the city: the MAP schema locates agencies, not street addresses.
pub fn compute_monthly_overlap(d: &Dataset) -> Vec<bool> {
    #[derive(Hash, PartialEq, Eq)]
    struct Key<'a> {
        agency: &'a str,
        state: String,
        year: i32,
        month: Month,
    }
    // per jurisdiction-month: one observed event id, or None once 2+ distinct
    let mut groups: HashMap<Key<'_>, (usize, Option<&str>)> = HashMap::new();
    for r in &d.records {
        let k = Key {
            agency: &r.agency_name,
            state: normalize_state(&r.state),
            year: r.year,
            month: r.month,
        };
        let entry = groups.entry(k).or_insert((0, Some(&r.id)));
        entry.0 += 1;
        if entry.1.is_some_and(|id| id != r.id) {
            entry.1 = None;
        }
    }
    d.records
        .iter()
        .map(|r| {
            let k = Key {
                agency: &r.agency_name,
                state: normalize_state(&r.state),
                year: r.year,
                month: r.month,
            };
            match groups.get(&k) {
                // None sentinel: at least two distinct event ids share the key
                Some((_, None)) => true,
                _ => false,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn tiny_record(id: &str, state: &str, solved: bool) -> Record {
        Record {
            id: id.to_string(),
            year: 2001,
            month: Month::March,
            state: state.to_string(),
            agency_name: "Test PD".to_string(),
            agency_type: "Municipal Police".to_string(),
            homicide_type: "Murder and non-negligent manslaughter".to_string(),
            victim_age: Some(30),
            victim_sex: Sex::Male,
            victim_race: "White".to_string(),
            victim_count: 1,
            offender_count: if solved { 1 } else { 0 },
            offender_sex: if solved { Sex::Male } else { Sex::Unknown },
            circumstance: "Other arguments".to_string(),
            weapon: "Handgun".to_string(),
            solved,
            monthly_overlap: false,
        }
    }

    #[test]
    fn month_parses_names_numbers_abbreviations() {
        assert_eq!(Month::parse("January"), Some(Month::January));
        assert_eq!(Month::parse("jan"), Some(Month::January));
        assert_eq!(Month::parse("9"), Some(Month::September));
        assert_eq!(Month::parse("DECEMBER"), Some(Month::December));
        assert_eq!(Month::parse("13"), None);
        assert_eq!(Month::parse(""), None);
    }

    #[test]
    fn load_well_formed_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixture.csv");
        let d = synth::generate(&synth::SynthConfig {
            rows: 10,
            seed: 1,
            ..Default::default()
        });
        synth::write_map_csv(&path, &d.records).unwrap();
        let loaded = load_map_csv(&path).unwrap();
        assert_eq!(loaded.len(), 10);
        assert_eq!(loaded.provenance.rows_dropped, 0);
        assert_eq!(loaded.provenance.rows_read, 10);
    }

    #[test]
    fn missing_solved_column_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "ID,Year,Month,State,Agency,Agentype,Homicide,VicAge,VicSex,VicRace,VicCount,OffSex,OffCount,Circumstance,Weapon\n\
             a1,2001,March,Ohio,PD,Municipal Police,Murder,30,Male,White,1,Male,1,Robbery,Handgun\n",
        )
        .unwrap();
        match load_map_csv(&path) {
            Err(DataError::MissingColumn(c)) => assert_eq!(c, "Solved"),
            other => panic!("expected MissingColumn(Solved), got {other:?}"),
        }
    }

    #[test]
    fn unparseable_rows_are_dropped_and_counted_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        std::fs::write(
            &path,
            "ID,Year,Month,State,Agency,Agentype,Homicide,VicAge,VicSex,VicRace,VicCount,OffSex,OffCount,Circumstance,Weapon,Solved\n\
             a1,2001,March,Ohio,PD,Municipal Police,Murder,30,Male,White,1,Male,1,Robbery,Handgun,Yes\n\
             a2,notayear,March,Ohio,PD,Municipal Police,Murder,30,Male,White,1,Male,1,Robbery,Handgun,Yes\n\
             a3,2002,March,Ohio,PD,Municipal Police,Murder,30,Male,White,1,Male,1,Robbery,Handgun,No\n",
        )
        .unwrap();
        let d = load_map_csv(&path).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.provenance.rows_read, 3);
        assert_eq!(d.provenance.rows_dropped, 1);
        assert_eq!(d.provenance.row_errors[0].line, 3);
        assert!(d.provenance.row_errors[0].reason.contains("Year"));
    }

    #[test]
    fn ingestion_counts_balance() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let d = synth::generate(&synth::SynthConfig {
            rows: 200,
            seed: 3,
            ..Default::default()
        });
        synth::write_map_csv(&path, &d.records).unwrap();
        let loaded = load_map_csv(&path).unwrap();
        let p = &loaded.provenance;
        assert_eq!(p.rows_read, p.rows_kept + p.rows_dropped);
    }

    #[test]
    fn unknown_cells_become_unknown_category() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        std::fs::write(
            &path,
            "ID,Year,Month,State,Agency,Agentype,Homicide,VicAge,VicSex,VicRace,VicCount,OffSex,OffCount,Circumstance,Weapon,Solved\n\
             a1,2001,3,Ohio,PD,,Murder,999,,White,1,,0,,Handgun,No\n",
        )
        .unwrap();
        let d = load_map_csv(&path).unwrap();
        let r = &d.records[0];
        assert_eq!(r.agency_type, "Unknown");
        assert_eq!(r.circumstance, "Unknown");
        assert_eq!(r.victim_sex, Sex::Unknown);
        assert_eq!(r.victim_age, None); // 999 sentinel
        assert_eq!(r.month, Month::March);
    }

    #[test]
    fn filter_unknown_age_behaviour() {
        let mut records = vec![tiny_record("a", "Ohio", true); 4];
        records[1].victim_age = None;
        let d = Dataset::from_records(records, "mem");
        let f = filter_unknown_age(&d);
        assert_eq!(f.len(), 3);
        assert!(f.records.iter().all(|r| r.victim_age.is_some()));
        // idempotent
        let ff = filter_unknown_age(&f);
        assert_eq!(ff.records, f.records);
        // annihilation
        let mut all_unknown = vec![tiny_record("a", "Ohio", true); 3];
        for r in &mut all_unknown {
            r.victim_age = None;
        }
        let e = filter_unknown_age(&Dataset::from_records(all_unknown, "mem"));
        assert!(e.is_empty());
        // identity
        let clean = Dataset::from_records(vec![tiny_record("a", "Ohio", true); 3], "mem");
        assert_eq!(filter_unknown_age(&clean).records, clean.records);
    }

    #[test]
    fn derived_target_rule() {
        let solved = tiny_record("a", "Ohio", true);
        let unsolved = tiny_record("b", "Ohio", false);
        assert!(derive_target_check(&solved));
        assert!(!derive_target_check(&unsolved));
        // anomalous: marked solved but offender sex unknown
        let mut odd = tiny_record("c", "Alabama", true);
        odd.offender_sex = Sex::Unknown;
        assert!(!derive_target_check(&odd));
        let d = Dataset::from_records(vec![solved, unsolved, odd], "mem");
        assert_eq!(target_disagreements(&d), 1);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = Dataset::from_records(
            (0..10)
                .map(|i| tiny_record(&format!("r{i}"), "Ohio", i % 2 == 0))
                .collect(),
            "mem",
        );
        let s = shuffled_split(&d, 0.7, 1).unwrap();
        assert_eq!(s.train.len(), 7);
        assert_eq!(s.test.len(), 3);
        let s2 = shuffled_split(&d, 0.7, 1).unwrap();
        assert_eq!(s.train.records, s2.train.records);
        assert_eq!(s.test.records, s2.test.records);
        let s3 = shuffled_split(&d, 0.7, 2).unwrap();
        assert_ne!(
            s.train.records, s3.train.records,
            "different seeds should permute differently"
        );
    }

    #[test]
    fn split_is_a_partition() {
        let d = synth::generate(&synth::SynthConfig {
            rows: 101,
            seed: 9,
            ..Default::default()
        });
        let s = shuffled_split(&d, 0.7, 42).unwrap();
        assert_eq!(s.train.len() + s.test.len(), d.len());
        let mut ids: Vec<&str> = s
            .train
            .records
            .iter()
            .chain(s.test.records.iter())
            .map(|r| r.id.as_str())
            .collect();
        ids.sort_unstable();
        let mut orig: Vec<&str> = d.records.iter().map(|r| r.id.as_str()).collect();
        orig.sort_unstable();
        assert_eq!(ids, orig);
    }

    #[test]
    fn split_error_paths() {
        let empty = Dataset::default();
        assert!(matches!(
            shuffled_split(&empty, 0.7, 1),
            Err(DataError::Empty)
        ));
        let one = Dataset::from_records(vec![tiny_record("a", "Ohio", true)], "mem");
        assert!(shuffled_split(&one, 0.7, 1).is_err());
        let two = Dataset::from_records(
            vec![
                tiny_record("a", "Ohio", true),
                tiny_record("b", "Ohio", false),
            ],
            "mem",
        );
        assert!(matches!(
            shuffled_split(&two, 1.0, 1),
            Err(DataError::BadFraction(_))
        ));
        assert!(matches!(
            shuffled_split(&two, 0.01, 1),
            Err(DataError::DegenerateSplit { .. })
        ));
    }

    #[test]
    fn state_partition_identity_and_normalization() {
        let single = Dataset::from_records(
            vec![
                tiny_record("a", "Ohio", true),
                tiny_record("b", "ohio ", false),
            ],
            "mem",
        );
        let parts = partition_by_state(&single);
        assert_eq!(parts.len(), 1);
        assert_eq!(parts["OHIO"].len(), 2);

        let multi = Dataset::from_records(
            vec![
                tiny_record("a", "Ohio", true),
                tiny_record("b", "Texas", false),
                tiny_record("c", "Ohio", true),
            ],
            "mem",
        );
        let parts = partition_by_state(&multi);
        assert_eq!(parts.len(), 2);
        let total: usize = parts.values().map(|d| d.len()).sum();
        assert_eq!(total, multi.len());
    }

    #[test]
    fn overlap_examples() {
        let mut a = tiny_record("e1", "Ohio", true);
        let mut b = tiny_record("e2", "Ohio", true);
        a.month = Month::May;
        b.month = Month::May;
        let d = Dataset::from_records(vec![a.clone(), b], "mem");
        assert_eq!(compute_monthly_overlap(&d), vec![true, true]);

        let solo = Dataset::from_records(vec![a.clone()], "mem");
        assert_eq!(compute_monthly_overlap(&solo), vec![false]);

        // two victims of one event: same id, no other event that month
        let mut twin = a.clone();
        twin.victim_sex = Sex::Female;
        let d = Dataset::from_records(vec![a, twin], "mem");
        assert_eq!(compute_monthly_overlap(&d), vec![false, false]);
    }

    #[test]
    fn overlap_matches_pairwise_oracle() {
        let d = synth::generate(&synth::SynthConfig {
            rows: 1000,
            seed: 17,
            ..Default::default()
        });
        let fast = compute_monthly_overlap(&d);
        // O(N^2) definition: some other record, different event id, same key
        let slow: Vec<bool> = d
            .records
            .iter()
            .map(|r| {
                d.records.iter().any(|o| {
                    o.id != r.id
                        && o.agency_name == r.agency_name
                        && normalize_state(&o.state) == normalize_state(&r.state)
                        && o.year == r.year
                        && o.month == r.month
                })
            })
            .collect();
        assert_eq!(fast, slow);
        // symmetry comes with the definition; spot-check flagged pairs
        for (i, r) in d.records.iter().enumerate() {
            if fast[i] {
                assert!(d.records.iter().enumerate().any(|(j, o)| {
                    j != i
                        && fast[j]
                        && o.agency_name == r.agency_name
                        && o.year == r.year
                        && o.month == r.month
                }));
            }
        }
    }
}
