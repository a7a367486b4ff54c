//! Hourly load, PV-generation and spot-price series, and the participant
//! roster built from them.
//!
//! Energy is carried in kWh per hour, prices in EUR/MWh. All series share a
//! fixed one-hour step; a [`TimeSeries`] only stores its start timestamp and
//! the values.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Duration, NaiveDateTime, TimeZone, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use thiserror::Error;

/// Hours in a non-leap simulation year.
pub const HOURS_PER_YEAR: usize = 8760;

/// Default start of synthetic series: 2019-01-01T00:00:00Z.
pub fn default_start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap()
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: row {row}: {message}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        message: String,
    },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    BadHeader {
        path: PathBuf,
        expected: &'static str,
        found: String,
    },
    #[error("series is empty")]
    Empty,
    #[error("value at index {index} is not finite")]
    NonFinite { index: usize },
    #[error("energy value at index {index} is negative ({value})")]
    Negative { index: usize, value: f64 },
    #[error("timestamp {0} is not hour-aligned")]
    NotHourAligned(DateTime<Utc>),
    #[error("timestep {t} out of range for horizon {horizon}")]
    OutOfRange { t: usize, horizon: usize },
    #[error("participant `{id}`: {reason}")]
    InvalidParticipant { id: String, reason: String },
    #[error("neighborhood: {0}")]
    InvalidNeighborhood(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// What a series measures. Energy series must be non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesUnit {
    /// kWh per hourly step.
    EnergyKwh,
    /// EUR/MWh.
    PriceEurPerMwh,
}

/// Hourly-indexed sequence of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    start: DateTime<Utc>,
    values: Vec<f64>,
}

impl TimeSeries {
    /// Builds a series, checking that it is non-empty, finite and hour-aligned.
    pub fn new(start: DateTime<Utc>, values: Vec<f64>) -> Result<Self, ProfileError> {
        if values.is_empty() {
            return Err(ProfileError::Empty);
        }
        if !is_hour_aligned(&start) {
            return Err(ProfileError::NotHourAligned(start));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ProfileError::NonFinite { index });
        }
        Ok(Self { start, values })
    }

    /// Like [`TimeSeries::new`] but additionally rejects negative values.
    pub fn energy(start: DateTime<Utc>, values: Vec<f64>) -> Result<Self, ProfileError> {
        let series = Self::new(start, values)?;
        series.check_unit(SeriesUnit::EnergyKwh)?;
        Ok(series)
    }

    pub fn zeros(start: DateTime<Utc>, len: usize) -> Result<Self, ProfileError> {
        Self::new(start, vec![0.0; len])
    }

    fn check_unit(&self, unit: SeriesUnit) -> Result<(), ProfileError> {
        if unit == SeriesUnit::EnergyKwh {
            if let Some((index, &value)) = self.values.iter().enumerate().find(|(_, v)| **v < 0.0)
            {
                return Err(ProfileError::Negative { index, value });
            }
        }
        Ok(())
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, t: usize) -> Result<f64, ProfileError> {
        self.values.get(t).copied().ok_or(ProfileError::OutOfRange {
            t,
            horizon: self.values.len(),
        })
    }

    /// Timestamp of step `t` (start of the hour).
    pub fn timestamp(&self, t: usize) -> DateTime<Utc> {
        self.start + Duration::hours(t as i64)
    }

    pub fn sum(&self) -> f64 {
        crate::numeric::compensated_sum(self.values.iter().copied())
    }

    /// True when both series start at the same instant and have equal length.
    pub fn same_axis(&self, other: &TimeSeries) -> bool {
        self.start == other.start && self.len() == other.len()
    }
}

fn is_hour_aligned(ts: &DateTime<Utc>) -> bool {
    ts.minute() == 0 && ts.second() == 0 && ts.nanosecond() == 0
}

/// One household. Its prosumer/consumer role is decided per timestep by its
/// net position.
#[derive(Debug, Clone, PartialEq)]
pub struct Participant {
    id: String,
    load: TimeSeries,
    pv_capacity: f64,
    generation: TimeSeries,
}

impl Participant {
    pub fn new(
        id: impl Into<String>,
        load: TimeSeries,
        pv_capacity: f64,
        generation: TimeSeries,
    ) -> Result<Self, ProfileError> {
        let id = id.into();
        let invalid = |reason: String| ProfileError::InvalidParticipant {
            id: id.clone(),
            reason,
        };
        if id.is_empty() {
            return Err(invalid("empty id".into()));
        }
        if !pv_capacity.is_finite() || pv_capacity < 0.0 {
            return Err(invalid(format!("pv capacity {pv_capacity} must be >= 0")));
        }
        if !load.same_axis(&generation) {
            return Err(invalid("load and generation time axes differ".into()));
        }
        load.check_unit(SeriesUnit::EnergyKwh)
            .map_err(|e| invalid(format!("load: {e}")))?;
        generation
            .check_unit(SeriesUnit::EnergyKwh)
            .map_err(|e| invalid(format!("generation: {e}")))?;
        let generates = generation.values().iter().any(|&g| g != 0.0);
        if (pv_capacity == 0.0) == generates {
            return Err(invalid(
                "pv capacity is zero exactly when generation is identically zero".into(),
            ));
        }
        Ok(Self {
            id,
            load,
            pv_capacity,
            generation,
        })
    }

    /// A participant without PV.
    pub fn consumer(id: impl Into<String>, load: TimeSeries) -> Result<Self, ProfileError> {
        let generation = TimeSeries::zeros(load.start(), load.len())?;
        Self::new(id, load, 0.0, generation)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn load(&self) -> &TimeSeries {
        &self.load
    }

    pub fn generation(&self) -> &TimeSeries {
        &self.generation
    }

    pub fn pv_capacity(&self) -> f64 {
        self.pv_capacity
    }

    pub fn has_pv(&self) -> bool {
        self.pv_capacity > 0.0
    }

    pub fn horizon(&self) -> usize {
        self.load.len()
    }

    /// Surplus and net demand at step `t`.
    pub fn net_position(&self, t: usize) -> Result<(f64, f64), ProfileError> {
        let load = self.load.get(t)?;
        let generation = self.generation.get(t)?;
        Ok(split_net(generation, load))
    }
}

/// `(max(g - l, 0), max(l - g, 0))`.
pub fn split_net(generation: f64, load: f64) -> (f64, f64) {
    if generation > load {
        (generation - load, 0.0)
    } else {
        (0.0, load - generation)
    }
}

/// Free-function form of [`Participant::net_position`].
pub fn net_position(p: &Participant, t: usize) -> Result<(f64, f64), ProfileError> {
    p.net_position(t)
}

/// Ordered participants sharing one time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    participants: Vec<Participant>,
}

impl Neighborhood {
    pub fn new(participants: Vec<Participant>) -> Result<Self, ProfileError> {
        let first = participants
            .first()
            .ok_or_else(|| ProfileError::InvalidNeighborhood("no participants".into()))?;
        let mut seen = HashSet::new();
        for p in &participants {
            if !p.load().same_axis(first.load()) {
                return Err(ProfileError::InvalidNeighborhood(format!(
                    "participant `{}` does not share the time axis of `{}`",
                    p.id(),
                    first.id()
                )));
            }
            if !seen.insert(p.id()) {
                return Err(ProfileError::InvalidNeighborhood(format!(
                    "duplicate participant id `{}`",
                    p.id()
                )));
            }
        }
        Ok(Self { participants })
    }

    pub fn participants(&self) -> &[Participant] {
        &self.participants
    }

    pub fn len(&self) -> usize {
        self.participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.participants[0].horizon()
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.participants[0].load().start()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.participants.iter().position(|p| p.id() == id)
    }
}

// ---------------------------------------------------------------------------
// CSV I/O

const PROFILE_HEADER: &str = "timestamp,value";
const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(raw) {
        return Some(ts.with_timezone(&Utc));
    }
    NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
        .ok()
        .map(|naive| naive.and_utc())
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

/// Reads a `timestamp,value` profile. Rows are numbered from 1, excluding the header.
pub fn load_profile_csv(path: &Path, unit: SeriesUnit) -> Result<TimeSeries, ProfileError> {
    let io_err = |source| ProfileError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let malformed = |row: usize, message: String| ProfileError::MalformedRow {
        path: path.to_path_buf(),
        row,
        message,
    };

    let headers = reader
        .headers()
        .map_err(|e| malformed(0, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if headers != PROFILE_HEADER {
        return Err(ProfileError::BadHeader {
            path: path.to_path_buf(),
            expected: PROFILE_HEADER,
            found: headers,
        });
    }

    let mut start = None;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| malformed(row, e.to_string()))?;
        if record.len() != 2 {
            return Err(malformed(row, format!("expected 2 fields, found {}", record.len())));
        }
        let ts = parse_timestamp(&record[0])
            .ok_or_else(|| malformed(row, format!("invalid timestamp `{}`", &record[0])))?;
        if !is_hour_aligned(&ts) {
            return Err(malformed(row, format!("timestamp {ts} is not hour-aligned")));
        }
        let start = *start.get_or_insert(ts);
        let expected = start + Duration::hours(i as i64);
        if ts != expected {
            return Err(malformed(
                row,
                format!("timestamp {ts} breaks the hourly sequence (expected {expected})"),
            ));
        }
        let value: f64 = record[1]
            .parse()
            .map_err(|_| malformed(row, format!("invalid value `{}`", &record[1])))?;
        if !value.is_finite() {
            return Err(malformed(row, format!("value `{}` is not finite", &record[1])));
        }
        if unit == SeriesUnit::EnergyKwh && value < 0.0 {
            return Err(malformed(row, format!("negative energy value {value}")));
        }
        values.push(value);
    }
    let start = start.ok_or(ProfileError::Empty)?;
    TimeSeries::new(start, values)
}

/// Writes a series in the profile schema. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_profile_csv(path: &Path, series: &TimeSeries) -> Result<(), ProfileError> {
    let io_err = |source| ProfileError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(out, "{PROFILE_HEADER}").map_err(io_err)?;
    for (t, v) in series.values().iter().enumerate() {
        writeln!(out, "{},{}", format_timestamp(&series.timestamp(t)), v).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

// ---------------------------------------------------------------------------
// Synthetic generators

/// Prefix marking a roster or config entry that should be synthesized.
pub const SYNTH_PREFIX: &str = "synth:";

/// Parses `synth:<seed>`; `None` when the token is a path.
pub fn parse_synth_token(token: &str) -> Option<Result<u64, ProfileError>> {
    token.trim().strip_prefix(SYNTH_PREFIX).map(|seed| {
        seed.trim()
            .parse()
            .map_err(|_| ProfileError::InvalidParameter(format!("invalid synth seed in `{token}`")))
    })
}

/// Combines a run-level seed with a per-series seed (splitmix64 finalizer).
pub fn mix_seed(run_seed: u64, series_seed: u64) -> u64 {
    let mut z = run_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(series_seed)
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_horizon(horizon: usize) -> Result<(), ProfileError> {
    if horizon < 24 {
        return Err(ProfileError::InvalidParameter(format!(
            "horizon {horizon} must be at least 24 hours"
        )));
    }
    Ok(())
}

/// Phase of the year in radians, zero at the March equinox (day 80).
fn equinox_phase(ts: &DateTime<Utc>) -> f64 {
    2.0 * PI * (ts.ordinal() as f64 - 80.0) / 365.0
}

fn bump(hour: f64, center: f64, width: f64) -> f64 {
    let z = (hour - center) / width;
    (-0.5 * z * z).exp()
}

/// Synthetic household load in kWh/h starting at [`default_start`].
///
/// Shape: a flat base load plus a morning peak around 06:30 UTC and a larger
/// evening peak around 18:00 UTC, a winter-heavy seasonal factor of ±20 %,
/// and seeded day-level and hour-level log-normal noise. The result is scaled
/// so that it sums to `annual_kwh * horizon / 8760`, i.e. exactly `annual_kwh`
/// for a full year.
pub fn synth_load(seed: u64, annual_kwh: f64, horizon: usize) -> Result<TimeSeries, ProfileError> {
    synth_load_from(default_start(), seed, annual_kwh, horizon)
}

pub fn synth_load_from(
    start: DateTime<Utc>,
    seed: u64,
    annual_kwh: f64,
    horizon: usize,
) -> Result<TimeSeries, ProfileError> {
    if !annual_kwh.is_finite() || annual_kwh <= 0.0 {
        return Err(ProfileError::InvalidParameter(format!(
            "annual_kwh {annual_kwh} must be > 0"
        )));
    }
    check_horizon(horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let day_noise = Normal::new(0.0, 0.12).unwrap();
    let hour_noise = Normal::new(0.0, 0.30).unwrap();
    // Households differ in when they get up and come home.
    let morning = 6.5 + rng.gen_range(-1.0..1.0);
    let evening = 18.0 + rng.gen_range(-1.0..1.5);

    let mut values = Vec::with_capacity(horizon);
    let mut day_factor = 1.0;
    for t in 0..horizon {
        let ts = start + Duration::hours(t as i64);
        if t == 0 || ts.hour() == 0 {
            day_factor = f64::exp(day_noise.sample(&mut rng));
        }
        let hour = ts.hour() as f64 + 0.5;
        let diurnal = 0.45 + 0.8 * bump(hour, morning, 1.3) + 1.3 * bump(hour, evening, 2.0)
            - 0.15 * bump(hour, 3.5, 2.0);
        let seasonal = 1.0 + 0.2 * (2.0 * PI * (ts.ordinal() as f64 - 15.0) / 365.0).cos();
        let noise = f64::exp(hour_noise.sample(&mut rng));
        values.push((diurnal * seasonal * day_factor * noise).max(0.0));
    }
    let target = annual_kwh * horizon as f64 / HOURS_PER_YEAR as f64;
    let total: f64 = crate::numeric::compensated_sum(values.iter().copied());
    let scale = target / total;
    values.iter_mut().for_each(|v| *v *= scale);
    TimeSeries::energy(start, values)
}

/// Synthetic rooftop PV output in kWh/h starting at [`default_start`].
///
/// A clear-sky model for a mid-latitude northern site (about 48°N, solar
/// noon near 11:30 UTC): day length and noon elevation follow the solar
/// declination, the in-day profile is a sine bell between sunrise and sunset,
/// and a seeded daily clearness index (sunnier in summer) plus small hourly
/// noise is applied. Zero outside daylight; yields roughly 1000 kWh/kWp/yr.
pub fn synth_pv(seed: u64, capacity_kwp: f64, horizon: usize) -> Result<TimeSeries, ProfileError> {
    synth_pv_from(default_start(), seed, capacity_kwp, horizon)
}

pub fn synth_pv_from(
    start: DateTime<Utc>,
    seed: u64,
    capacity_kwp: f64,
    horizon: usize,
) -> Result<TimeSeries, ProfileError> {
    if !capacity_kwp.is_finite() || capacity_kwp < 0.0 {
        return Err(ProfileError::InvalidParameter(format!(
            "capacity_kwp {capacity_kwp} must be >= 0"
        )));
    }
    check_horizon(horizon)?;
    if capacity_kwp == 0.0 {
        return TimeSeries::zeros(start, horizon);
    }
    const LATITUDE_DEG: f64 = 48.0;
    const SOLAR_NOON_UTC: f64 = 11.5;
    const PEAK_KW_PER_KWP: f64 = 0.85;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hour_noise = Normal::new(1.0, 0.08).unwrap();
    let mut clearness = 1.0;
    let mut values = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let ts = start + Duration::hours(t as i64);
        let phase = equinox_phase(&ts);
        if t == 0 || ts.hour() == 0 {
            let summer = 0.5 * (1.0 + phase.sin());
            let beta = Beta::new(1.3 + 1.5 * summer, 1.1).unwrap();
            clearness = 0.1 + 0.9 * beta.sample(&mut rng);
        }
        let declination = 23.44_f64.to_radians() * phase.sin();
        let lat = LATITUDE_DEG.to_radians();
        let half_day = (-(lat.tan() * declination.tan())).acos().to_degrees() / 15.0;
        let noon_elevation = (PI / 2.0 - lat + declination).sin();

        let sunrise = SOLAR_NOON_UTC - half_day;
        let sunset = SOLAR_NOON_UTC + half_day;
        let mid = ts.hour() as f64 + 0.5;
        let value = if mid > sunrise && mid < sunset {
            let bell = (PI * (mid - sunrise) / (sunset - sunrise)).sin().powf(1.3);
            let noise: f64 = hour_noise.sample(&mut rng);
            let noise = noise.clamp(0.6, 1.3);
            PEAK_KW_PER_KWP * noon_elevation.powf(1.2) * bell * clearness * noise
        } else {
            0.0
        };
        values.push(capacity_kwp * value);
    }
    TimeSeries::energy(start, values)
}

/// Synthetic day-ahead spot price in EUR/MWh starting at [`default_start`].
///
/// Mean level near 38 EUR/MWh with a winter premium, a morning and evening
/// peak, a midday dip that deepens in summer, AR(1) day-level shocks and
/// occasional windy-night and sunny-weekend lows that go negative.
pub fn synth_spot(seed: u64, horizon: usize) -> Result<TimeSeries, ProfileError> {
    synth_spot_from(default_start(), seed, horizon)
}

pub fn synth_spot_from(
    start: DateTime<Utc>,
    seed: u64,
    horizon: usize,
) -> Result<TimeSeries, ProfileError> {
    check_horizon(horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shock = Normal::new(0.0, 6.0).unwrap();
    let hourly = Normal::new(0.0, 3.0).unwrap();
    let mut level = 0.0;
    let mut windy = false;
    let mut values = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let ts = start + Duration::hours(t as i64);
        let phase = equinox_phase(&ts);
        let summer = 0.5 * (1.0 + phase.sin());
        if t == 0 || ts.hour() == 0 {
            level = 0.6 * level + shock.sample(&mut rng);
            windy = rng.gen_bool(0.04);
        }
        let hour = ts.hour() as f64 + 0.5;
        let weekend = ts.weekday().number_from_monday() >= 6;
        let mut price = 40.0 + 6.0 * (1.0 - summer) + level
            + 9.0 * bump(hour, 7.5, 1.5)
            + 12.0 * bump(hour, 18.0, 2.0)
            - 8.0 * bump(hour, 3.0, 2.5)
            - (6.0 + 14.0 * summer) * bump(hour, 12.0, 2.5)
            + hourly.sample(&mut rng);
        if weekend {
            price -= 7.0;
        }
        if windy {
            price -= 45.0 * (0.5 + 0.5 * bump(hour, 3.0, 4.0));
        }
        values.push(price);
    }
    TimeSeries::new(start, values)
}

// ---------------------------------------------------------------------------
// Roster

/// Header of the participant roster CSV.
pub const ROSTER_HEADER: &str = "id,annual_kwh,pv_capacity_kwp,load_file,generation_file";

/// Settings needed to materialize `synth:<seed>` roster entries.
#[derive(Debug, Clone, Copy)]
pub struct SynthContext {
    pub start: DateTime<Utc>,
    pub horizon: usize,
    pub run_seed: u64,
}

/// One parsed roster row, before profiles are materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct RosterEntry {
    pub id: String,
    pub annual_kwh: f64,
    pub pv_capacity_kwp: f64,
    pub load_source: String,
    pub generation_source: String,
}

/// Reads the roster CSV without touching any profile file.
pub fn read_roster_entries(path: &Path) -> Result<Vec<RosterEntry>, ProfileError> {
    let file = File::open(path).map_err(|source| ProfileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let malformed = |row: usize, message: String| ProfileError::MalformedRow {
        path: path.to_path_buf(),
        row,
        message,
    };
    let headers = reader
        .headers()
        .map_err(|e| malformed(0, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if headers != ROSTER_HEADER {
        return Err(ProfileError::BadHeader {
            path: path.to_path_buf(),
            expected: ROSTER_HEADER,
            found: headers,
        });
    }
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| malformed(row, e.to_string()))?;
        if record.len() != 5 {
            return Err(malformed(row, format!("expected 5 fields, found {}", record.len())));
        }
        let number = |idx: usize, name: &str| -> Result<f64, ProfileError> {
            let raw = &record[idx];
            if raw.is_empty() {
                return Ok(0.0);
            }
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| malformed(row, format!("{name} `{raw}` must be a number >= 0")))
        };
        entries.push(RosterEntry {
            id: record[0].to_string(),
            annual_kwh: number(1, "annual_kwh")?,
            pv_capacity_kwp: number(2, "pv_capacity_kwp")?,
            load_source: record[3].to_string(),
            generation_source: record[4].to_string(),
        });
    }
    Ok(entries)
}

impl RosterEntry {
    /// Builds the participant, resolving file paths against `base_dir`.
    pub fn materialize(
        &self,
        base_dir: &Path,
        ctx: &SynthContext,
    ) -> Result<Participant, ProfileError> {
        let invalid = |reason: String| ProfileError::InvalidParticipant {
            id: self.id.clone(),
            reason,
        };
        let load = match parse_synth_token(&self.load_source) {
            Some(seed) => {
                if self.annual_kwh <= 0.0 {
                    return Err(invalid("synthetic load needs annual_kwh > 0".into()));
                }
                synth_load_from(ctx.start, mix_seed(ctx.run_seed, seed?), self.annual_kwh, ctx.horizon)?
            }
            None if self.load_source.is_empty() => {
                return Err(invalid("load_file is required".into()))
            }
            None => load_profile_csv(&base_dir.join(&self.load_source), SeriesUnit::EnergyKwh)?,
        };
        let generation = match parse_synth_token(&self.generation_source) {
            Some(seed) => synth_pv_from(
                load.start(),
                mix_seed(ctx.run_seed, seed?),
                self.pv_capacity_kwp,
                load.len(),
            )?,
            None if self.generation_source.is_empty() => {
                if self.pv_capacity_kwp > 0.0 {
                    return Err(invalid(
                        "generation_file is required when pv_capacity_kwp > 0".into(),
                    ));
                }
                TimeSeries::zeros(load.start(), load.len())?
            }
            None => {
                load_profile_csv(&base_dir.join(&self.generation_source), SeriesUnit::EnergyKwh)?
            }
        };
        Participant::new(self.id.clone(), load, self.pv_capacity_kwp, generation)
    }

    /// Profile files this entry reads (synthetic tokens excluded).
    pub fn input_files(&self, base_dir: &Path) -> Vec<PathBuf> {
        [&self.load_source, &self.generation_source]
            .into_iter()
            .filter(|s| !s.is_empty() && parse_synth_token(s).is_none())
            .map(|s| base_dir.join(s))
            .collect()
    }
}

/// Reads a roster CSV and materializes every participant.
pub fn load_roster(path: &Path, ctx: &SynthContext) -> Result<Neighborhood, ProfileError> {
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
    let participants = read_roster_entries(path)?
        .iter()
        .map(|entry| entry.materialize(base_dir, ctx))
        .collect::<Result<Vec<_>, _>>()?;
    Neighborhood::new(participants)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn start() -> DateTime<Utc> {
        default_start()
    }

    fn write_file(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn three_row_profile_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "p.csv",
            "timestamp,value\n2019-01-01T00:00:00Z,1.0\n2019-01-01T01:00:00Z,2.0\n2019-01-01T02:00:00Z,0.5\n",
        );
        let ts = load_profile_csv(&path, SeriesUnit::EnergyKwh).unwrap();
        assert_eq!(ts.values(), &[1.0, 2.0, 0.5]);
        assert_eq!(ts.start(), start());
    }

    #[test]
    fn bad_value_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("timestamp,value\n");
        for h in 0..10 {
            let v = if h == 6 { "abc".to_string() } else { "1.0".to_string() };
            body.push_str(&format!("2019-01-01T{h:02}:00:00Z,{v}\n"));
        }
        let path = write_file(dir.path(), "p.csv", &body);
        let err = load_profile_csv(&path, SeriesUnit::EnergyKwh).unwrap_err();
        match err {
            ProfileError::MalformedRow { row, .. } => assert_eq!(row, 7),
            other => panic!("unexpected {other}"),
        }
        assert!(err_string(&path).contains("row 7"));
    }

    fn err_string(path: &Path) -> String {
        load_profile_csv(path, SeriesUnit::EnergyKwh)
            .unwrap_err()
            .to_string()
    }

    #[test]
    fn rejects_negative_energy_but_not_negative_price() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "p.csv",
            "timestamp,value\n2019-01-01T00:00:00Z,-1.5\n",
        );
        assert!(load_profile_csv(&path, SeriesUnit::EnergyKwh).is_err());
        let price = load_profile_csv(&path, SeriesUnit::PriceEurPerMwh).unwrap();
        assert_eq!(price.values(), &[-1.5]);
    }

    #[test]
    fn rejects_nan_and_misaligned_timestamps() {
        let dir = tempfile::tempdir().unwrap();
        let nan = write_file(dir.path(), "a.csv", "timestamp,value\n2019-01-01T00:00:00Z,NaN\n");
        assert!(matches!(
            load_profile_csv(&nan, SeriesUnit::PriceEurPerMwh),
            Err(ProfileError::MalformedRow { row: 1, .. })
        ));
        let off = write_file(dir.path(), "b.csv", "timestamp,value\n2019-01-01T00:30:00Z,1\n");
        assert!(load_profile_csv(&off, SeriesUnit::EnergyKwh).is_err());
        let gap = write_file(
            dir.path(),
            "c.csv",
            "timestamp,value\n2019-01-01T00:00:00Z,1\n2019-01-01T02:00:00Z,1\n",
        );
        assert!(matches!(
            load_profile_csv(&gap, SeriesUnit::EnergyKwh),
            Err(ProfileError::MalformedRow { row: 2, .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_profile_csv(Path::new("/nonexistent/p.csv"), SeriesUnit::EnergyKwh);
        assert!(matches!(err, Err(ProfileError::Io { .. })));
    }

    #[test]
    fn synthetic_year_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let series = synth_load(1, 3500.0, HOURS_PER_YEAR).unwrap();
        let path = dir.path().join("load.csv");
        write_profile_csv(&path, &series).unwrap();
        let back = load_profile_csv(&path, SeriesUnit::EnergyKwh).unwrap();
        assert_eq!(back, series);
    }

    #[test]
    fn synth_load_is_deterministic_and_seeded() {
        let a = synth_load(1, 3500.0, HOURS_PER_YEAR).unwrap();
        let b = synth_load(1, 3500.0, HOURS_PER_YEAR).unwrap();
        let c = synth_load(2, 3500.0, HOURS_PER_YEAR).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
        let total: f64 = a.values().iter().sum();
        assert!((total - 3500.0).abs() <= 3.5, "sum {total}");
        assert!(a.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn synth_load_has_morning_and_evening_peaks() {
        let load = synth_load(3, 3500.0, HOURS_PER_YEAR).unwrap();
        let mut by_hour = [0.0; 24];
        for (t, v) in load.values().iter().enumerate() {
            by_hour[t % 24] += v;
        }
        let night = by_hour[2];
        let midday = by_hour[12];
        let morning = by_hour[4..10].iter().cloned().fold(0.0, f64::max);
        let evening = by_hour[16..22].iter().cloned().fold(0.0, f64::max);
        assert!(morning > midday && morning > night);
        assert!(evening > midday && evening > morning);
    }

    #[test]
    fn synth_load_rejects_bad_params() {
        assert!(synth_load(1, 0.0, 48).is_err());
        assert!(synth_load(1, -5.0, 48).is_err());
        assert!(synth_load(1, 3500.0, 23).is_err());
    }

    #[test]
    fn synth_pv_zero_capacity_and_night() {
        let zero = synth_pv(5, 0.0, HOURS_PER_YEAR).unwrap();
        assert!(zero.values().iter().all(|v| *v == 0.0));
        for seed in [1, 2, 99] {
            let pv = synth_pv(seed, 5.0, HOURS_PER_YEAR).unwrap();
            for t in (2..HOURS_PER_YEAR).step_by(24) {
                assert_eq!(pv.values()[t], 0.0, "02:00 of day {}", t / 24);
            }
        }
        assert!(synth_pv(1, -1.0, 48).is_err());
    }

    #[test]
    fn synth_pv_july_beats_january() {
        for seed in [1, 7, 42] {
            let pv = synth_pv(seed, 5.0, HOURS_PER_YEAR).unwrap();
            let daily = |first_day: usize| -> f64 {
                pv.values()[first_day * 24..(first_day + 31) * 24].iter().sum::<f64>() / 31.0
            };
            let january = daily(0);
            let july = daily(181);
            assert!(july > january, "seed {seed}: {july} vs {january}");
        }
    }

    #[test]
    fn synth_pv_annual_yield_is_plausible() {
        let pv = synth_pv(11, 1.0, HOURS_PER_YEAR).unwrap();
        let specific_yield = pv.sum();
        assert!((800.0..1300.0).contains(&specific_yield), "{specific_yield}");
    }

    #[test]
    fn net_position_examples() {
        assert_eq!(split_net(5.0, 3.0), (2.0, 0.0));
        assert_eq!(split_net(3.0, 3.0), (0.0, 0.0));
        assert_eq!(split_net(1.5, 4.0), (0.0, 2.5));
    }

    #[test]
    fn net_position_out_of_range() {
        let load = TimeSeries::energy(start(), vec![1.0, 2.0]).unwrap();
        let p = Participant::consumer("a", load).unwrap();
        assert_eq!(p.net_position(1).unwrap(), (0.0, 2.0));
        assert!(matches!(
            p.net_position(2),
            Err(ProfileError::OutOfRange { t: 2, horizon: 2 })
        ));
    }

    #[test]
    fn participant_invariants() {
        let load = TimeSeries::energy(start(), vec![1.0; 3]).unwrap();
        let gen = TimeSeries::energy(start(), vec![0.0, 1.0, 0.0]).unwrap();
        assert!(Participant::new("p", load.clone(), 0.0, gen.clone()).is_err());
        assert!(Participant::new("p", load.clone(), 2.0, gen).is_ok());
        let zeros = TimeSeries::zeros(start(), 3).unwrap();
        assert!(Participant::new("p", load.clone(), 2.0, zeros).is_err());
        let short = TimeSeries::zeros(start(), 2).unwrap();
        assert!(Participant::new("p", load, 0.0, short).is_err());
    }

    #[test]
    fn neighborhood_invariants() {
        assert!(Neighborhood::new(vec![]).is_err());
        let a = Participant::consumer("a", TimeSeries::energy(start(), vec![1.0; 3]).unwrap())
            .unwrap();
        let b = Participant::consumer("b", TimeSeries::energy(start(), vec![1.0; 4]).unwrap())
            .unwrap();
        assert!(Neighborhood::new(vec![a.clone(), b]).is_err());
        assert!(Neighborhood::new(vec![a.clone(), a.clone()]).is_err());
        let n = Neighborhood::new(vec![a]).unwrap();
        assert_eq!(n.horizon(), 3);
    }

    #[test]
    fn roster_with_synth_tokens_and_files() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            dir.path(),
            "load.csv",
            "timestamp,value\n2019-01-01T00:00:00Z,1\n2019-01-01T01:00:00Z,2\n",
        );
        let roster = write_file(
            dir.path(),
            "roster.csv",
            "id,annual_kwh,pv_capacity_kwp,load_file,generation_file\n\
             H01,3500,5,synth:1,synth:2\n\
             H02,3500,0,synth:3,\n",
        );
        let ctx = SynthContext {
            start: start(),
            horizon: 48,
            run_seed: 0,
        };
        let n = load_roster(&roster, &ctx).unwrap();
        assert_eq!(n.len(), 2);
        assert!(n.participants()[0].has_pv());
        assert!(!n.participants()[1].has_pv());

        let mismatched = write_file(
            dir.path(),
            "bad.csv",
            "id,annual_kwh,pv_capacity_kwp,load_file,generation_file\nH01,0,0,load.csv,\nH02,3500,0,synth:3,\n",
        );
        assert!(load_roster(&mismatched, &ctx).is_err());

        let missing_gen = write_file(
            dir.path(),
            "bad2.csv",
            "id,annual_kwh,pv_capacity_kwp,load_file,generation_file\nH01,3500,5,synth:1,\n",
        );
        assert!(load_roster(&missing_gen, &ctx).is_err());
    }

    proptest! {
        #[test]
        fn net_position_identity(g in 0.0f64..50.0, l in 0.0f64..50.0) {
            let (s, d) = split_net(g, l);
            prop_assert!(s >= 0.0 && d >= 0.0);
            prop_assert_eq!(s * d, 0.0);
            prop_assert!(((s - d) - (g - l)).abs() <= 1e-12 * (g.abs() + l.abs()).max(1.0));
        }

        #[test]
        fn csv_round_trip_six_digits(raw in proptest::collection::vec(0u64..100_000_000_000, 1..40)) {
            let values: Vec<f64> = raw.iter().map(|v| format!("{}.{:06}", v / 1_000_000, v % 1_000_000).parse().unwrap()).collect();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.csv");
            let series = TimeSeries::energy(start(), values).unwrap();
            write_profile_csv(&path, &series).unwrap();
            let back = load_profile_csv(&path, SeriesUnit::EnergyKwh).unwrap();
            prop_assert_eq!(back, series);
        }
    }
}
