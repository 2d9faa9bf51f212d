//! Synthetic MAP-schema fixtures.
//!
//! The generator emits files in the exact ingestion schema so the whole test
//! suite runs without the real data. Labels are drawn from a documented
//! latent log-odds score over the generated fields, so learners have real
//! signal to find: undetermined circumstances and firearms push cases toward
//! unsolved, arguments, knives, female and very young victims toward solved.

use std::path::Path;

use crate::dataset::{normalize_state, Dataset, Record, Sex, MONTHS};
use crate::linkage::WpRecord;
use crate::rng::Rng;

pub const STATES: [&str; 51] = [
    "Alabama",
    "Alaska",
    "Arizona",
    "Arkansas",
    "California",
    "Colorado",
    "Connecticut",
    "Delaware",
    "District of Columbia",
    "Florida",
    "Georgia",
    "Hawaii",
    "Idaho",
    "Illinois",
    "Indiana",
    "Iowa",
    "Kansas",
    "Kentucky",
    "Louisiana",
    "Maine",
    "Maryland",
    "Massachusetts",
    "Michigan",
    "Minnesota",
    "Mississippi",
    "Missouri",
    "Montana",
    "Nebraska",
    "Nevada",
    "New Hampshire",
    "New Jersey",
    "New Mexico",
    "New York",
    "North Carolina",
    "North Dakota",
    "Ohio",
    "Oklahoma",
    "Oregon",
    "Pennsylvania",
    "Rhode Island",
    "South Carolina",
    "South Dakota",
    "Tennessee",
    "Texas",
    "Utah",
    "Vermont",
    "Virginia",
    "Washington",
    "West Virginia",
    "Wisconsin",
    "Wyoming",
];

pub const AGENCY_TYPES: [&str; 7] = [
    "Municipal Police",
    "Sheriff",
    "County Police",
    "State Police",
    "Special Police",
    "Tribal",
    "Regional Police",
];

pub const CIRCUMSTANCES: [&str; 16] = [
    "Circumstances undetermined",
    "Other arguments",
    "Robbery",
    "Narcotic drug laws",
    "Juvenile gang killings",
    "Other",
    "Brawl due to influence of alcohol",
    "Lovers triangle",
    "Argument over money or property",
    "Burglary",
    "Gangland killings",
    "Rape",
    "All suspected felony type",
    "Other - not specified",
    "Institutional killings",
    "Children playing with gun",
];

pub const WEAPONS: [&str; 12] = [
    "Handgun - pistol, revolver, etc",
    "Knife or cutting instrument",
    "Firearm, type not stated",
    "Personal weapons, includes beating",
    "Blunt object - hammer, club, etc",
    "Shotgun",
    "Rifle",
    "Strangulation - hanging",
    "Fire",
    "Asphyxiation - includes death by gas",
    "Other or type unknown",
    "Narcotics or drugs, sleeping pills",
];

pub const RACES: [&str; 6] = [
    "White",
    "Black",
    "Asian",
    "American Indian or Alaskan Native",
    "Native Hawaiian or Pacific Islander",
    "Unknown",
];

/// Knobs for the generator; defaults give a 1,000-row national-style file.
#[derive(Clone, Debug)]
pub struct SynthConfig {
    /// Number of victim records (not events) to emit.
    pub rows: usize,
    pub seed: u64,
    /// How many distinct states to draw from (1..=51).
    pub states: usize,
    pub year_lo: i32,
    pub year_hi: i32,
    /// Fraction of records with the unknown-age sentinel.
    pub unknown_age_rate: f64,
    /// Fraction of solved records whose offender sex is left Unknown,
    /// mimicking the anomalous rows real files contain.
    pub anomaly_rate: f64,
    /// Probability that a record reuses an earlier record's
    /// agency/state/year/month, creating genuine monthly overlaps.
    pub busy_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rows: 1000,
            seed: 0,
            states: 51,
            year_lo: 1976,
            year_hi: 2019,
            unknown_age_rate: 0.015,
            anomaly_rate: 0.002,
            busy_rate: 0.15,
        }
    }
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

/// Latent log-odds that a generated case is solved, before the label draw.
fn solved_score(r: &Record, overlap: bool) -> f64 {
    let mut s = 0.9;
    s += match r.circumstance.as_str() {
        "Circumstances undetermined" => -2.2,
        "Other arguments" => 1.2,
        "Robbery" => -0.8,
        "Juvenile gang killings" => -1.0,
        "Lovers triangle" => 1.0,
        "Argument over money or property" => 0.8,
        "Gangland killings" => -0.9,
        "All suspected felony type" => -0.7,
        _ => 0.0,
    };
    s += match r.weapon.as_str() {
        "Handgun - pistol, revolver, etc" => -0.5,
        "Firearm, type not stated" => -0.6,
        "Shotgun" => -0.3,
        "Knife or cutting instrument" => 0.6,
        "Personal weapons, includes beating" => 0.5,
        "Strangulation - hanging" => 0.4,
        _ => 0.0,
    };
    if r.victim_sex == Sex::Female {
        s += 0.7;
    }
    if matches!(r.victim_age, Some(a) if a <= 5) {
        s += 0.9;
    }
    if r.victim_race == "Black" {
        s -= 0.3;
    }
    if r.homicide_type == "Manslaughter by negligence" {
        s += 1.8;
    }
    s += 0.45 * (r.offender_count.min(3) as f64);
    if overlap {
        s -= 0.4;
    }
    match r.year / 10 * 10 {
        2010 => s -= 0.3,
        1980 => s += 0.2,
        _ => {}
    }
    s
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Generate a synthetic dataset. Deterministic per config.
pub fn generate(cfg: &SynthConfig) -> Dataset {
    assert!(cfg.rows > 0, "fixture must have at least one row");
    let n_states = cfg.states.clamp(1, STATES.len());
    let mut rng = Rng::new(cfg.seed);

    // population-like state weights: a few heavy states, long light tail
    let state_weights: Vec<f64> = (0..n_states)
        .map(|i| 1.0 / (1.0 + i as f64 * 0.35))
        .collect();
    let state_cum = cumulative(&state_weights);
    let circ_weights: Vec<f64> = vec![
        26.0, 26.0, 7.0, 4.0, 3.0, 6.0, 3.0, 1.5, 2.5, 1.5, 1.0, 1.0, 4.0, 2.0, 0.5, 0.5,
    ];
    let circ_cum = cumulative(&circ_weights);
    let weapon_weights: Vec<f64> =
        vec![49.0, 14.6, 8.0, 6.0, 4.5, 4.0, 3.0, 1.5, 1.0, 1.0, 6.0, 1.4];
    let weapon_cum = cumulative(&weapon_weights);
    let race_cum = cumulative(&[45.0, 44.0, 3.0, 1.5, 0.5, 6.0]);
    let agency_type_cum = cumulative(&[77.6, 16.9, 2.0, 1.5, 1.0, 0.4, 0.6]);
    let age_cum = cumulative(&[4.0, 6.0, 55.0, 27.0, 8.0]);
    let victim_count_cum = cumulative(&[92.0, 6.0, 1.5, 0.5]);

    let mut records: Vec<Record> = Vec::with_capacity(cfg.rows);
    let mut event = 0usize;
    while records.len() < cfg.rows {
        event += 1;
        let id = format!("E{event:06}");

        // jurisdiction-month: fresh draw, or revisit a busy agency month
        let (state, agency_name, year, month) =
            if !records.is_empty() && rng.bernoulli(cfg.busy_rate) {
                let j = rng.below(records.len() as u64) as usize;
                let p = &records[j];
                (p.state.clone(), p.agency_name.clone(), p.year, p.month)
            } else {
                let state = STATES[rng.weighted(&state_cum)].to_string();
                let agency = format!("{} Agency {}", state, rng.below(3) + 1);
                let year = rng.range_i64(cfg.year_lo as i64, cfg.year_hi as i64) as i32;
                let month = MONTHS[rng.below(12) as usize];
                (state, agency, year, month)
            };

        let agency_type = AGENCY_TYPES[rng.weighted(&agency_type_cum)].to_string();
        let homicide_type = if rng.bernoulli(0.96) {
            "Murder and non-negligent manslaughter"
        } else {
            "Manslaughter by negligence"
        }
        .to_string();
        let circumstance = CIRCUMSTANCES[rng.weighted(&circ_cum)].to_string();
        let weapon = WEAPONS[rng.weighted(&weapon_cum)].to_string();
        let victim_count = (rng.weighted(&victim_count_cum) + 1) as u32;
        let offender_count_seed = rng.weighted(&cumulative(&[30.0, 52.0, 12.0, 6.0])) as u32;

        for _ in 0..victim_count {
            if records.len() >= cfg.rows {
                break;
            }
            let victim_age = if rng.bernoulli(cfg.unknown_age_rate) {
                None
            } else {
                Some(match rng.weighted(&age_cum) {
                    0 => rng.range_i64(0, 5),
                    1 => rng.range_i64(6, 17),
                    2 => rng.range_i64(18, 35),
                    3 => rng.range_i64(36, 60),
                    _ => rng.range_i64(61, 99),
                } as i32)
            };
            let victim_sex = if rng.bernoulli(0.22) {
                Sex::Female
            } else if rng.bernoulli(0.02) {
                Sex::Unknown
            } else {
                Sex::Male
            };
            let victim_race = RACES[rng.weighted(&race_cum)].to_string();
            let mut r = Record {
                id: id.clone(),
                year,
                month,
                state: state.clone(),
                agency_name: agency_name.clone(),
                agency_type: agency_type.clone(),
                homicide_type: homicide_type.clone(),
                victim_age,
                victim_sex,
                victim_race,
                victim_count,
                offender_count: offender_count_seed,
                offender_sex: Sex::Unknown,
                circumstance: circumstance.clone(),
                weapon: weapon.clone(),
                solved: false,
                monthly_overlap: false,
            };
            records.push(r.clone());
            // placeholder; labels are assigned in the second pass below
            let _ = &mut r;
        }
    }

    // second pass: overlap flags are defined over the finished file, and the
    // label depends on them
    let probe = Dataset::from_records(records, "synthetic");
    let overlap = crate::dataset::compute_monthly_overlap(&probe);
    let mut records = probe.records;
    for (i, r) in records.iter_mut().enumerate() {
        let p = sigmoid(solved_score(r, overlap[i]));
        let solved = rng.bernoulli(p);
        r.solved = solved;
        if solved {
            if r.offender_count == 0 {
                r.offender_count = 1;
            }
            r.offender_sex = if rng.bernoulli(cfg.anomaly_rate) {
                Sex::Unknown
            } else if rng.bernoulli(0.11) {
                Sex::Female
            } else {
                Sex::Male
            };
        } else {
            r.offender_sex = Sex::Unknown;
            if rng.bernoulli(0.8) {
                r.offender_count = 0;
            }
        }
    }
    Dataset::from_records(records, &format!("synthetic(seed={})", cfg.seed))
}

/// Write records in the MAP ingestion schema (unknown age becomes 999).
pub fn write_map_csv(path: impl AsRef<Path>, records: &[Record]) -> Result<(), std::io::Error> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record([
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
    ])?;
    for r in records {
        w.write_record([
            r.id.as_str(),
            &r.year.to_string(),
            r.month.name(),
            r.state.as_str(),
            r.agency_name.as_str(),
            r.agency_type.as_str(),
            r.homicide_type.as_str(),
            &r.victim_age
                .map_or_else(|| "999".to_string(), |a| a.to_string()),
            r.victim_sex.name(),
            r.victim_race.as_str(),
            &r.victim_count.to_string(),
            r.offender_sex.name(),
            &r.offender_count.to_string(),
            r.circumstance.as_str(),
            r.weapon.as_str(),
            if r.solved { "Yes" } else { "No" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Knobs for the paired second-source fixture used by the linkage tests.
#[derive(Clone, Debug)]
pub struct WpSynthConfig {
    pub seed: u64,
    /// Fraction of in-window records mirrored into the second dataset.
    pub match_fraction: f64,
    /// Probability a mirrored record's outcome disagrees.
    pub flip_rate: f64,
    /// Extra rows with no counterpart.
    pub extra_rows: usize,
    /// Number of mirrored rows duplicated to engineer key collisions.
    pub duplicate_keys: usize,
    pub year_lo: i32,
    pub year_hi: i32,
}

impl Default for WpSynthConfig {
    fn default() -> Self {
        WpSynthConfig {
            seed: 0,
            match_fraction: 0.6,
            flip_rate: 0.12,
            extra_rows: 30,
            duplicate_keys: 3,
            year_lo: 2007,
            year_hi: 2017,
        }
    }
}

/// Mirror part of a MAP dataset into the second-source schema.
pub fn generate_wp(map: &Dataset, cfg: &WpSynthConfig) -> Vec<WpRecord> {
    let mut rng = Rng::new(cfg.seed ^ 0x7770);
    let mut out = Vec::new();
    for r in &map.records {
        if r.year < cfg.year_lo || r.year > cfg.year_hi {
            continue;
        }
        let Some(age) = r.victim_age else { continue };
        if !rng.bernoulli(cfg.match_fraction) {
            continue;
        }
        let solved = if rng.bernoulli(cfg.flip_rate) {
            !r.solved
        } else {
            r.solved
        };
        out.push(WpRecord {
            city: r.agency_name.clone(),
            year: r.year,
            month: r.month,
            victim_age: Some(age),
            victim_sex: r.victim_sex,
            solved,
        });
    }
    for i in 0..cfg.duplicate_keys.min(out.len()) {
        let mut dup = out[i].clone();
        dup.solved = !dup.solved;
        out.push(dup);
    }
    for _ in 0..cfg.extra_rows {
        out.push(WpRecord {
            city: format!("Elsewhere City {}", rng.below(1000)),
            year: rng.range_i64(cfg.year_lo as i64, cfg.year_hi as i64) as i32,
            month: MONTHS[rng.below(12) as usize],
            victim_age: Some(rng.range_i64(0, 99) as i32),
            victim_sex: if rng.bernoulli(0.5) {
                Sex::Male
            } else {
                Sex::Female
            },
            solved: rng.bernoulli(0.6),
        });
    }
    out
}

/// Write second-source records in their ingestion schema
/// (`city, reported_date, victim_age, victim_sex, disposition`).
pub fn write_wp_csv(path: impl AsRef<Path>, records: &[WpRecord]) -> Result<(), std::io::Error> {
    let mut rng = Rng::new(0x6461_7973);
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record([
        "city",
        "reported_date",
        "victim_age",
        "victim_sex",
        "disposition",
    ])?;
    for r in records {
        let day = rng.below(28) + 1;
        let date = r.year as u64 * 10_000 + r.month.number() as u64 * 100 + day;
        w.write_record([
            r.city.as_str(),
            &date.to_string(),
            &r.victim_age
                .map_or_else(|| "Unknown".to_string(), |a| a.to_string()),
            r.victim_sex.name(),
            if r.solved {
                "Closed by arrest"
            } else {
                "Open/No arrest"
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Quick sanity counters used by a few tests.
pub fn state_spread(d: &Dataset) -> usize {
    let mut states: Vec<String> = d
        .records
        .iter()
        .map(|r| normalize_state(&r.state))
        .collect();
    states.sort_unstable();
    states.dedup();
    states.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic() {
        let cfg = SynthConfig {
            rows: 50,
            seed: 4,
            ..Default::default()
        };
        let a = generate(&cfg);
        let b = generate(&cfg);
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn generator_honors_row_count_and_labels_both_classes() {
        let d = generate(&SynthConfig {
            rows: 500,
            seed: 1,
            ..Default::default()
        });
        assert_eq!(d.len(), 500);
        let solved = d.solved_count();
        assert!(solved > 50 && solved < 450, "labels too lopsided: {solved}");
    }

    #[test]
    fn unsolved_records_follow_offender_convention_mostly() {
        let d = generate(&SynthConfig {
            rows: 300,
            seed: 2,
            anomaly_rate: 0.0,
            ..Default::default()
        });
        for r in &d.records {
            if !r.solved {
                assert_eq!(r.offender_sex, crate::dataset::Sex::Unknown);
            } else {
                assert_ne!(r.offender_sex, crate::dataset::Sex::Unknown);
            }
        }
    }

    #[test]
    fn wp_mirror_stays_in_window() {
        let map = generate(&SynthConfig {
            rows: 400,
            seed: 3,
            ..Default::default()
        });
        let wp = generate_wp(&map, &WpSynthConfig::default());
        assert!(!wp.is_empty());
        assert!(wp.iter().all(|r| (2007..=2017).contains(&r.year)));
    }
}
