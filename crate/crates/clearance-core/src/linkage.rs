//! Composite-key record linkage between two homicide datasets, with
//! agreement accounting and an outcome-override variant for robustness
//! re-fits.
//!
//! The key joins year, month, city, victim age and victim sex; on the MAP
//! side the reporting agency stands in for the city. Pairing on duplicate
//! keys is greedy in file order on both sides and the affected keys are
//! counted, so either de-duplication reading can be audited.

use std::collections::HashMap;
use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Month, Provenance, Record, RowError, Sex};

#[derive(Debug, thiserror::Error)]
pub enum LinkError {
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
    #[error("missing key field: {0}")]
    MissingField(&'static str),
}

/// Canonical five-field composite key: `Year-Month-city-Age-Sex`, with the
/// city trimmed and case-folded and the month spelled out.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatchKey(pub String);

impl MatchKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Build the composite key from the five linkage fields.
pub fn build_code(
    year: i32,
    month: Month,
    city: &str,
    victim_age: Option<i32>,
    victim_sex: Sex,
) -> Result<MatchKey, LinkError> {
    let city = city.trim();
    if city.is_empty() {
        return Err(LinkError::MissingField("city"));
    }
    let age = victim_age.ok_or(LinkError::MissingField("victim_age"))?;
    Ok(MatchKey(format!(
        "{year}-{}-{}-{age}-{}",
        month.name(),
        city.to_lowercase(),
        victim_sex.name()
    )))
}

/// Key for a MAP record; the agency identifies the city.
pub fn map_key(r: &Record) -> Result<MatchKey, LinkError> {
    build_code(r.year, r.month, &r.agency_name, r.victim_age, r.victim_sex)
}

/// One row of the second (Washington Post style) dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WpRecord {
    pub city: String,
    pub year: i32,
    pub month: Month,
    pub victim_age: Option<i32>,
    pub victim_sex: Sex,
    pub solved: bool,
}

pub fn wp_key(r: &WpRecord) -> Result<MatchKey, LinkError> {
    build_code(r.year, r.month, &r.city, r.victim_age, r.victim_sex)
}

/// Maps raw disposition strings to the solved flag. A disposition counts as
/// solved only when it indicates an arrest; the table ships as data because
/// source files are not consistent about wording.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DispositionMap {
    pub map: BTreeMap<String, bool>,
}

impl Default for DispositionMap {
    fn default() -> Self {
        let mut map = BTreeMap::new();
        map.insert("closed by arrest".to_string(), true);
        map.insert("closed without arrest".to_string(), false);
        map.insert("open/no arrest".to_string(), false);
        DispositionMap { map }
    }
}

impl DispositionMap {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, LinkError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|source| LinkError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })?;
        let map: BTreeMap<String, bool> =
            serde_json::from_str(&text).map_err(|e| LinkError::MissingColumn(e.to_string()))?;
        Ok(DispositionMap {
            map: map
                .into_iter()
                .map(|(k, v)| (k.trim().to_lowercase(), v))
                .collect(),
        })
    }

    pub fn solved(&self, disposition: &str) -> Option<bool> {
        self.map
            .get(disposition.trim().to_lowercase().as_str())
            .copied()
    }
}

/// Second-source dataset plus ingestion provenance.
#[derive(Clone, Debug, Default)]
pub struct WpDataset {
    pub records: Vec<WpRecord>,
    pub provenance: Provenance,
}

/// Load the second-source CSV (`city, reported_date, victim_age, victim_sex,
/// disposition`; date is YYYYMMDD). Unparseable rows and unmapped
/// dispositions are dropped and counted.
pub fn load_wp_csv(
    path: impl AsRef<Path>,
    dispositions: &DispositionMap,
) -> Result<WpDataset, LinkError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| LinkError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(std::io::BufReader::new(file));
    let headers = reader.headers()?.clone();
    let lower: Vec<String> = headers.iter().map(|h| h.trim().to_lowercase()).collect();
    let col = |name: &str| -> Result<usize, LinkError> {
        lower
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LinkError::MissingColumn(name.to_string()))
    };
    let c_city = col("city")?;
    let c_date = col("reported_date")?;
    let c_age = col("victim_age")?;
    let c_sex = col("victim_sex")?;
    let c_disp = col("disposition")?;

    let mut out = WpDataset {
        provenance: Provenance {
            source: path.display().to_string(),
            ..Provenance::default()
        },
        ..WpDataset::default()
    };
    for (i, row) in reader.records().enumerate() {
        out.provenance.rows_read += 1;
        let line = i as u64 + 2;
        let parsed = (|| -> Result<WpRecord, String> {
            let row = row
                .as_ref()
                .map_err(|e| format!("malformed csv row: {e}"))?;
            let get = |c: usize| row.get(c).unwrap_or("").trim();
            let date: u64 = get(c_date)
                .parse()
                .map_err(|_| format!("unparseable reported_date {:?}", get(c_date)))?;
            let year = (date / 10_000) as i32;
            let month = Month::from_number(((date / 100) % 100) as u32)
                .ok_or_else(|| format!("reported_date {date} has no valid month"))?;
            let victim_age = {
                let raw = get(c_age);
                if raw.is_empty() || raw.eq_ignore_ascii_case("unknown") {
                    None
                } else {
                    Some(
                        raw.parse::<i32>()
                            .map_err(|_| format!("unparseable victim_age {raw:?}"))?,
                    )
                }
            };
            let disposition = get(c_disp);
            let solved = dispositions
                .solved(disposition)
                .ok_or_else(|| format!("unmapped disposition {disposition:?}"))?;
            Ok(WpRecord {
                city: get(c_city).to_string(),
                year,
                month,
                victim_age,
                victim_sex: Sex::parse(get(c_sex)),
                solved,
            })
        })();
        match parsed {
            Ok(r) => {
                out.provenance.rows_kept += 1;
                out.records.push(r);
            }
            Err(reason) => {
                out.provenance.rows_dropped += 1;
                if out.provenance.row_errors.len() < 50 {
                    out.provenance.row_errors.push(RowError { line, reason });
                }
            }
        }
    }
    Ok(out)
}

/// One greedy key match: indices into the two inputs plus both outcomes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatchedPair {
    pub a_index: usize,
    pub b_index: usize,
    pub key: MatchKey,
    pub a_solved: bool,
    pub b_solved: bool,
}

/// Match counts and pairs. `agree + wp_solved_map_unsolved +
/// map_solved_wp_unsolved = matched`; side a is the MAP dataset, side b the
/// second source.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LinkResult {
    pub matched: u64,
    pub agree: u64,
    pub wp_solved_map_unsolved: u64,
    pub map_solved_wp_unsolved: u64,
    /// Shared keys with more than one candidate on either side.
    pub ambiguous_keys: u64,
    pub unmatched_a: u64,
    pub unmatched_b: u64,
    /// Rows that could not produce a key (e.g. unknown age), per side;
    /// included in the unmatched counts.
    pub unkeyed_a: u64,
    pub unkeyed_b: u64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub pairs: Vec<MatchedPair>,
}

/// Core matcher over pre-built keys; exposed so both orientations (and the
/// symmetry property) can be exercised directly.
pub fn match_keyed(
    a_keys: &[Option<MatchKey>],
    a_solved: &[bool],
    b_keys: &[Option<MatchKey>],
    b_solved: &[bool],
) -> LinkResult {
    assert_eq!(a_keys.len(), a_solved.len());
    assert_eq!(b_keys.len(), b_solved.len());
    let mut b_buckets: HashMap<&MatchKey, VecDeque<usize>> = HashMap::new();
    for (j, k) in b_keys.iter().enumerate() {
        if let Some(k) = k {
            b_buckets.entry(k).or_default().push_back(j);
        }
    }
    let mut a_counts: HashMap<&MatchKey, u64> = HashMap::new();
    for k in a_keys.iter().flatten() {
        *a_counts.entry(k).or_default() += 1;
    }
    let b_counts: HashMap<&MatchKey, u64> = b_buckets
        .iter()
        .map(|(k, v)| (*k, v.len() as u64))
        .collect();

    let mut out = LinkResult {
        unkeyed_a: a_keys.iter().filter(|k| k.is_none()).count() as u64,
        unkeyed_b: b_keys.iter().filter(|k| k.is_none()).count() as u64,
        ..LinkResult::default()
    };

    let mut ambiguous: Vec<&MatchKey> = Vec::new();
    let mut matched_b = vec![false; b_keys.len()];
    for (i, key) in a_keys.iter().enumerate() {
        let Some(key) = key else { continue };
        let Some(bucket) = b_buckets.get_mut(key) else {
            continue;
        };
        let Some(j) = bucket.pop_front() else {
            continue;
        };
        matched_b[j] = true;
        out.matched += 1;
        let (sa, sb) = (a_solved[i], b_solved[j]);
        if sa == sb {
            out.agree += 1;
        } else if sb {
            out.wp_solved_map_unsolved += 1;
        } else {
            out.map_solved_wp_unsolved += 1;
        }
        out.pairs.push(MatchedPair {
            a_index: i,
            b_index: j,
            key: key.clone(),
            a_solved: sa,
            b_solved: sb,
        });
        if a_counts[key] > 1 || b_counts[key] > 1 {
            ambiguous.push(key);
        }
    }
    ambiguous.sort_unstable();
    ambiguous.dedup();
    out.ambiguous_keys = ambiguous.len() as u64;
    out.unmatched_a = a_keys.len() as u64 - out.pairs.len() as u64;
    out.unmatched_b = b_keys.len() as u64 - matched_b.iter().filter(|&&m| m).count() as u64;
    out
}

/// Match the MAP dataset against the second source on equal composite keys.
/// Unmatched and unkeyable rows are counted, never errors.
pub fn match_datasets(map: &Dataset, wp: &[WpRecord]) -> LinkResult {
    let a_keys: Vec<Option<MatchKey>> = map.records.iter().map(|r| map_key(r).ok()).collect();
    let a_solved: Vec<bool> = map.records.iter().map(|r| r.solved).collect();
    let b_keys: Vec<Option<MatchKey>> = wp.iter().map(|r| wp_key(r).ok()).collect();
    let b_solved: Vec<bool> = wp.iter().map(|r| r.solved).collect();
    match_keyed(&a_keys, &a_solved, &b_keys, &b_solved)
}

/// Copy of the MAP dataset in which every matched record carries its
/// counterpart's outcome; unmatched records are unchanged.
pub fn override_outcomes(map: &Dataset, link: &LinkResult) -> Dataset {
    let mut out = map.clone();
    for p in &link.pairs {
        out.records[p.a_index].solved = p.b_solved;
    }
    out.provenance.source = format!("{}#wp-override", map.provenance.source);
    out
}

/// Dataset restricted to the matched MAP rows (the paired subsample used for
/// robustness re-fits), with outcomes optionally overridden first.
pub fn matched_subset(map: &Dataset, link: &LinkResult, override_first: bool) -> Dataset {
    let base = if override_first {
        override_outcomes(map, link)
    } else {
        map.clone()
    };
    let records: Vec<Record> = link
        .pairs
        .iter()
        .map(|p| base.records[p.a_index].clone())
        .collect();
    Dataset::from_records(records, &format!("{}#matched", map.provenance.source))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn key_format_is_canonical() {
        let k = build_code(2015, Month::January, " Baltimore ", Some(25), Sex::Male).unwrap();
        assert_eq!(k.as_str(), "2015-January-baltimore-25-Male");
    }

    #[test]
    fn equal_inputs_equal_keys_and_casefold() {
        let a = build_code(2010, Month::June, "Dallas", Some(40), Sex::Female).unwrap();
        let b = build_code(2010, Month::June, "DALLAS", Some(40), Sex::Female).unwrap();
        assert_eq!(a, b);
        // any canonical field change produces a different key
        for other in [
            build_code(2011, Month::June, "Dallas", Some(40), Sex::Female),
            build_code(2010, Month::July, "Dallas", Some(40), Sex::Female),
            build_code(2010, Month::June, "Dalla", Some(40), Sex::Female),
            build_code(2010, Month::June, "Dallas", Some(41), Sex::Female),
            build_code(2010, Month::June, "Dallas", Some(40), Sex::Male),
        ] {
            assert_ne!(a, other.unwrap());
        }
    }

    #[test]
    fn missing_field_is_an_error() {
        assert!(matches!(
            build_code(2010, Month::June, "Dallas", None, Sex::Female),
            Err(LinkError::MissingField("victim_age"))
        ));
        assert!(matches!(
            build_code(2010, Month::June, "  ", Some(1), Sex::Female),
            Err(LinkError::MissingField("city"))
        ));
    }

    #[test]
    fn disjoint_datasets_match_nothing() {
        let map = synth::generate(&synth::SynthConfig {
            rows: 40,
            seed: 5,
            year_lo: 1980,
            year_hi: 1985,
            ..Default::default()
        });
        let wp = vec![WpRecord {
            city: "Nowhere".into(),
            year: 2012,
            month: Month::May,
            victim_age: Some(33),
            victim_sex: Sex::Male,
            solved: true,
        }];
        let link = match_datasets(&map, &wp);
        assert_eq!(link.matched, 0);
        assert_eq!(link.unmatched_a, map.len() as u64);
        assert_eq!(link.unmatched_b, 1);
    }

    fn oracle_counts(map: &Dataset, wp: &[WpRecord]) -> (u64, u64, u64, u64) {
        // exhaustive greedy pairing oracle, quadratic on purpose
        let mut used = vec![false; wp.len()];
        let (mut matched, mut agree, mut wp_s, mut map_s) = (0, 0, 0, 0);
        for r in &map.records {
            let Ok(k) = map_key(r) else { continue };
            let mut hit = None;
            for (j, w) in wp.iter().enumerate() {
                if used[j] {
                    continue;
                }
                if wp_key(w).ok().as_ref() == Some(&k) {
                    hit = Some(j);
                    break;
                }
            }
            if let Some(j) = hit {
                used[j] = true;
                matched += 1;
                if wp[j].solved == r.solved {
                    agree += 1;
                } else if wp[j].solved {
                    wp_s += 1;
                } else {
                    map_s += 1;
                }
            }
        }
        (matched, agree, wp_s, map_s)
    }

    #[test]
    fn matches_quadratic_oracle_with_collisions() {
        let map = synth::generate(&synth::SynthConfig {
            rows: 120,
            seed: 7,
            year_lo: 2007,
            year_hi: 2017,
            ..Default::default()
        });
        let wp = synth::generate_wp(
            &map,
            &synth::WpSynthConfig {
                seed: 7,
                duplicate_keys: 3,
                extra_rows: 20,
                ..Default::default()
            },
        );
        let link = match_datasets(&map, &wp);
        let (m, a, ws, ms) = oracle_counts(&map, &wp);
        assert_eq!(link.matched, m);
        assert_eq!(link.agree, a);
        assert_eq!(link.wp_solved_map_unsolved, ws);
        assert_eq!(link.map_solved_wp_unsolved, ms);
        assert_eq!(
            link.agree + link.wp_solved_map_unsolved + link.map_solved_wp_unsolved,
            link.matched
        );
        // conservation on both sides
        assert_eq!(link.matched + link.unmatched_a, map.len() as u64);
        assert_eq!(link.matched + link.unmatched_b, wp.len() as u64);
        assert!(
            link.ambiguous_keys >= 1,
            "engineered collisions should be flagged"
        );
    }

    #[test]
    fn matching_count_is_symmetric() {
        let map = synth::generate(&synth::SynthConfig {
            rows: 90,
            seed: 11,
            year_lo: 2007,
            year_hi: 2017,
            ..Default::default()
        });
        let wp = synth::generate_wp(&map, &synth::WpSynthConfig::default());
        let a_keys: Vec<_> = map.records.iter().map(|r| map_key(r).ok()).collect();
        let a_solved: Vec<_> = map.records.iter().map(|r| r.solved).collect();
        let b_keys: Vec<_> = wp.iter().map(|r| wp_key(r).ok()).collect();
        let b_solved: Vec<_> = wp.iter().map(|r| r.solved).collect();
        let forward = match_keyed(&a_keys, &a_solved, &b_keys, &b_solved);
        let backward = match_keyed(&b_keys, &b_solved, &a_keys, &a_solved);
        assert_eq!(forward.matched, backward.matched);
        assert_eq!(forward.agree, backward.agree);
    }

    #[test]
    fn override_flips_exactly_the_disagreements() {
        let map = synth::generate(&synth::SynthConfig {
            rows: 80,
            seed: 13,
            year_lo: 2007,
            year_hi: 2017,
            ..Default::default()
        });
        // zero-flip mirror: override must be the identity
        let wp_same = synth::generate_wp(
            &map,
            &synth::WpSynthConfig {
                seed: 13,
                flip_rate: 0.0,
                duplicate_keys: 0,
                extra_rows: 0,
                ..Default::default()
            },
        );
        let link = match_datasets(&map, &wp_same);
        assert_eq!(link.agree, link.matched);
        let same = override_outcomes(&map, &link);
        assert_eq!(same.records, map.records);

        // a single engineered disagreement flips exactly one label
        let mut wp_one = wp_same.clone();
        if let Some(first) = wp_one.first_mut() {
            first.solved = !first.solved;
        }
        let link = match_datasets(&map, &wp_one);
        let flipped = override_outcomes(&map, &link);
        let diffs = flipped
            .records
            .iter()
            .zip(&map.records)
            .filter(|(x, y)| x.solved != y.solved)
            .count();
        assert_eq!(diffs, 1);
    }

    #[test]
    fn wp_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wp.csv");
        let map = synth::generate(&synth::SynthConfig {
            rows: 60,
            seed: 21,
            year_lo: 2007,
            year_hi: 2017,
            ..Default::default()
        });
        let wp = synth::generate_wp(&map, &synth::WpSynthConfig::default());
        synth::write_wp_csv(&path, &wp).unwrap();
        let loaded = load_wp_csv(&path, &DispositionMap::default()).unwrap();
        assert_eq!(loaded.records.len(), wp.len());
        assert_eq!(loaded.provenance.rows_dropped, 0);
        assert_eq!(loaded.records[0].city, wp[0].city);
        assert_eq!(loaded.records[0].solved, wp[0].solved);
    }

    #[test]
    fn unmapped_disposition_is_dropped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wp.csv");
        std::fs::write(
            &path,
            "city,reported_date,victim_age,victim_sex,disposition\n\
             Baltimore,20150110,25,Male,Closed by arrest\n\
             Baltimore,20150211,30,Male,Alien abduction\n",
        )
        .unwrap();
        let loaded = load_wp_csv(&path, &DispositionMap::default()).unwrap();
        assert_eq!(loaded.records.len(), 1);
        assert_eq!(loaded.provenance.rows_dropped, 1);
        assert!(loaded.provenance.row_errors[0]
            .reason
            .contains("disposition"));
    }
}
