//! Heartbeat sentence codec.
//!
//! Wire grammar (normative for this stack, versioned here as v1):
//!
//! ```text
//! $RXHRB,<ddmmyy>,<hhmmss>,<lat>,<N|S>,<lon>,<E|W>,<team>,<mode>*<CS>\r\n
//! ```
//!
//! Latitude/longitude are non-negative decimal degrees printed in Rust's
//! shortest round-trip form; the hemisphere carries the sign. `CS` is the
//! XOR of every byte between `$` and `*`, exactly two uppercase hex digits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum HeartbeatError {
    #[error("bad framing: {0}")]
    Framing(&'static str),
    #[error("expected 9 fields, got {0}")]
    FieldCount(usize),
    #[error("unexpected sentence tag `{0}`")]
    Tag(String),
    #[error("checksum mismatch: computed {computed:02X}, stated {stated}")]
    Checksum { computed: u8, stated: String },
    #[error("invalid field `{field}`: {reason}")]
    Value { field: &'static str, reason: String },
}

/// Vehicle system mode reported in the heartbeat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemMode {
    Remote,
    Autonomous,
    Killed,
}

impl SystemMode {
    pub fn code(&self) -> u8 {
        match self {
            SystemMode::Remote => 1,
            SystemMode::Autonomous => 2,
            SystemMode::Killed => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(SystemMode::Remote),
            2 => Some(SystemMode::Autonomous),
            3 => Some(SystemMode::Killed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeartbeatSentence {
    /// (day, month, two-digit year)
    pub date: (u8, u8, u8),
    /// (hour, minute, second)
    pub time: (u8, u8, u8),
    /// Non-negative decimal degrees, in [0, 90].
    pub lat: f64,
    pub lat_hemisphere: char,
    /// Non-negative decimal degrees, in [0, 180].
    pub lon: f64,
    pub lon_hemisphere: char,
    pub team_id: String,
    pub mode: SystemMode,
}

/// Flat-earth datum converting local ENU meters to geographic degrees.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Datum {
    pub lat0: f64,
    pub lon0: f64,
}

const M_PER_DEG_LAT: f64 = 111_320.0;

impl Datum {
    /// ENU position (x east, y north) to signed (lat, lon) degrees.
    pub fn to_geographic(&self, x: f64, y: f64) -> (f64, f64) {
        let lat = self.lat0 + y / M_PER_DEG_LAT;
        let lon = self.lon0 + x / (M_PER_DEG_LAT * self.lat0.to_radians().cos());
        (lat, lon)
    }
}

impl HeartbeatSentence {
    pub fn validate(&self) -> Result<(), HeartbeatError> {
        let value = |field: &'static str, reason: String| HeartbeatError::Value { field, reason };
        let (d, m, _) = self.date;
        if !(1..=31).contains(&d) || !(1..=12).contains(&m) {
            return Err(value("date", format!("day {d} month {m}")));
        }
        let (h, mi, s) = self.time;
        if h >= 24 || mi >= 60 || s >= 60 {
            return Err(value("time", format!("{h:02}{mi:02}{s:02}")));
        }
        if !self.lat.is_finite() || !(0.0..=90.0).contains(&self.lat) {
            return Err(value("lat", format!("{}", self.lat)));
        }
        if !self.lon.is_finite() || !(0.0..=180.0).contains(&self.lon) {
            return Err(value("lon", format!("{}", self.lon)));
        }
        if self.lat_hemisphere != 'N' && self.lat_hemisphere != 'S' {
            return Err(value("lat_hemisphere", self.lat_hemisphere.to_string()));
        }
        if self.lon_hemisphere != 'E' && self.lon_hemisphere != 'W' {
            return Err(value("lon_hemisphere", self.lon_hemisphere.to_string()));
        }
        if self.team_id.is_empty() || !self.team_id.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(value("team_id", self.team_id.clone()));
        }
        Ok(())
    }

    /// Build a sentence from a local ENU position against a datum. Sim time
    /// is folded into hhmmss; the date is fixed by the scenario.
    pub fn from_enu(
        x: f64,
        y: f64,
        datum: &Datum,
        date: (u8, u8, u8),
        sim_time_s: f64,
        team_id: &str,
        mode: SystemMode,
    ) -> Self {
        let (lat, lon) = datum.to_geographic(x, y);
        let total = sim_time_s.max(0.0) as u64;
        let time = (
            ((total / 3600) % 24) as u8,
            ((total / 60) % 60) as u8,
            (total % 60) as u8,
        );
        Self {
            date,
            time,
            lat: lat.abs(),
            lat_hemisphere: if lat >= 0.0 { 'N' } else { 'S' },
            lon: lon.abs(),
            lon_hemisphere: if lon >= 0.0 { 'E' } else { 'W' },
            team_id: team_id.to_string(),
            mode,
        }
    }
}

fn xor_checksum(payload: &str) -> u8 {
    payload.bytes().fold(0, |acc, b| acc ^ b)
}

/// Serialize to one CRLF-terminated wire line.
pub fn encode(s: &HeartbeatSentence) -> String {
    let payload = format!(
        "RXHRB,{:02}{:02}{:02},{:02}{:02}{:02},{},{},{},{},{},{}",
        s.date.0,
        s.date.1,
        s.date.2,
        s.time.0,
        s.time.1,
        s.time.2,
        s.lat,
        s.lat_hemisphere,
        s.lon,
        s.lon_hemisphere,
        s.team_id,
        s.mode.code()
    );
    format!("${payload}*{:02X}\r\n", xor_checksum(&payload))
}

fn parse_u8_pair(s: &str, field: &'static str) -> Result<(u8, u8, u8), HeartbeatError> {
    if s.len() != 6 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(HeartbeatError::Value {
            field,
            reason: format!("expected 6 digits, got `{s}`"),
        });
    }
    Ok((
        s[0..2].parse().unwrap(),
        s[2..4].parse().unwrap(),
        s[4..6].parse().unwrap(),
    ))
}

fn parse_degrees(s: &str, field: &'static str) -> Result<f64, HeartbeatError> {
    // plain non-negative decimal only; anything fancier is a wire error
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit() || b == b'.') {
        return Err(HeartbeatError::Value {
            field,
            reason: format!("`{s}` is not plain decimal degrees"),
        });
    }
    s.parse::<f64>().map_err(|e| HeartbeatError::Value {
        field,
        reason: e.to_string(),
    })
}

/// Parse and validate one wire line (trailing CRLF optional).
pub fn decode(line: &str) -> Result<HeartbeatSentence, HeartbeatError> {
    let line = line.strip_suffix("\r\n").or_else(|| line.strip_suffix('\n')).unwrap_or(line);
    let body = line
        .strip_prefix('$')
        .ok_or(HeartbeatError::Framing("missing `$`"))?;
    let star = body.rfind('*').ok_or(HeartbeatError::Framing("missing `*`"))?;
    let (payload, stated) = body.split_at(star);
    let stated = &stated[1..];
    if stated.len() != 2 || !stated.bytes().all(|b| b.is_ascii_digit() || (b'A'..=b'F').contains(&b)) {
        return Err(HeartbeatError::Framing("checksum must be two uppercase hex digits"));
    }
    let computed = xor_checksum(payload);
    let stated_value = u8::from_str_radix(stated, 16).expect("validated hex");
    if computed != stated_value {
        return Err(HeartbeatError::Checksum {
            computed,
            stated: stated.to_string(),
        });
    }
    let fields: Vec<&str> = payload.split(',').collect();
    if fields.len() != 9 {
        return Err(HeartbeatError::FieldCount(fields.len()));
    }
    if fields[0] != "RXHRB" {
        return Err(HeartbeatError::Tag(fields[0].to_string()));
    }
    let date = parse_u8_pair(fields[1], "date")?;
    let time = parse_u8_pair(fields[2], "time")?;
    let lat = parse_degrees(fields[3], "lat")?;
    let lat_hemisphere = single_char(fields[4], "lat_hemisphere")?;
    let lon = parse_degrees(fields[5], "lon")?;
    let lon_hemisphere = single_char(fields[6], "lon_hemisphere")?;
    let mode_code: u8 = fields[8].parse().map_err(|_| HeartbeatError::Value {
        field: "mode",
        reason: format!("`{}`", fields[8]),
    })?;
    let mode = SystemMode::from_code(mode_code).ok_or(HeartbeatError::Value {
        field: "mode",
        reason: format!("code {mode_code}"),
    })?;
    let sentence = HeartbeatSentence {
        date,
        time,
        lat,
        lat_hemisphere,
        lon,
        lon_hemisphere,
        team_id: fields[7].to_string(),
        mode,
    };
    sentence.validate()?;
    Ok(sentence)
}

fn single_char(s: &str, field: &'static str) -> Result<char, HeartbeatError> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(HeartbeatError::Value {
            field,
            reason: format!("`{s}`"),
        }),
    }
}
