//! Identifiers, call records and weekly time slotting.

use std::fmt;

use crate::error::{Error, Result};

pub const SECONDS_PER_HOUR: i64 = 3_600;
pub const SECONDS_PER_DAY: i64 = 86_400;
pub const SECONDS_PER_WEEK: i64 = 7 * SECONDS_PER_DAY;

/// Number of hour-of-week slots.
pub const SLOTS_PER_WEEK: usize = 7 * 24;

/// Anonymized subscriber identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(pub u64);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AntennaId(pub u32);

impl fmt::Display for AntennaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A point on the sphere in decimal degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Builds a point, rejecting coordinates outside [-90, 90] x [-180, 180] (and NaN).
    pub fn new(lat: f64, lon: f64) -> Option<Self> {
        let p = GeoPoint { lat, lon };
        p.is_valid().then_some(p)
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Antenna {
    pub id: AntennaId,
    pub location: GeoPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CallDirection {
    Outgoing,
    Incoming,
}

impl CallDirection {
    pub fn token(self) -> &'static str {
        match self {
            CallDirection::Outgoing => "OUT",
            CallDirection::Incoming => "IN",
        }
    }

    pub fn from_token(token: &[u8]) -> Option<Self> {
        match token {
            b"OUT" => Some(CallDirection::Outgoing),
            b"IN" => Some(CallDirection::Incoming),
            _ => None,
        }
    }
}

/// One located call event. `user` is the subscriber whose position the
/// antenna gives; `peer` is carried as metadata only.
///
/// Field order matters: the derived `Ord` sorts by timestamp first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CdrRecord {
    pub timestamp: i64,
    pub user: UserId,
    pub antenna: AntennaId,
    pub direction: CallDirection,
    pub peer: Option<UserId>,
}

/// A fixed offset from UTC in whole hours, within [-12, +14].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct UtcOffset(i8);

impl UtcOffset {
    pub const UTC: UtcOffset = UtcOffset(0);

    pub fn new(hours: i32) -> Result<Self> {
        if (-12..=14).contains(&hours) {
            Ok(UtcOffset(hours as i8))
        } else {
            Err(Error::config(format!("utc offset {hours} outside [-12, 14]")))
        }
    }

    pub fn hours(self) -> i32 {
        self.0 as i32
    }

    pub fn seconds(self) -> i64 {
        self.0 as i64 * SECONDS_PER_HOUR
    }

    pub fn to_local(self, timestamp: i64) -> i64 {
        timestamp + self.seconds()
    }

    pub fn to_utc(self, local: i64) -> i64 {
        local - self.seconds()
    }
}

/// Hour-of-week bucket: `weekday * 24 + hour`, Monday = 0, local wall clock.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeSlot(u8);

impl TimeSlot {
    pub fn new(index: usize) -> Option<Self> {
        (index < SLOTS_PER_WEEK).then_some(TimeSlot(index as u8))
    }

    /// `weekday` 0 = Monday.
    pub fn from_parts(weekday: u8, hour: u8) -> Option<Self> {
        (weekday < 7 && hour < 24).then(|| TimeSlot(weekday * 24 + hour))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn weekday(self) -> u8 {
        self.0 / 24
    }

    pub fn hour(self) -> u8 {
        self.0 % 24
    }

    pub fn is_weekend(self) -> bool {
        self.weekday() >= 5
    }

    pub fn all() -> impl Iterator<Item = TimeSlot> {
        (0..SLOTS_PER_WEEK as u8).map(TimeSlot)
    }
}

impl fmt::Display for TimeSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Days since 1970-01-01 of the local calendar day.
pub fn local_day(timestamp: i64, offset: UtcOffset) -> i64 {
    offset.to_local(timestamp).div_euclid(SECONDS_PER_DAY)
}

pub fn local_hour(timestamp: i64, offset: UtcOffset) -> u8 {
    (offset.to_local(timestamp).rem_euclid(SECONDS_PER_DAY) / SECONDS_PER_HOUR) as u8
}

pub fn time_slot(timestamp: i64, offset: UtcOffset) -> TimeSlot {
    // 1970-01-01 was a Thursday, i.e. weekday 3 with Monday = 0.
    let weekday = (local_day(timestamp, offset) + 3).rem_euclid(7) as u8;
    TimeSlot(weekday * 24 + local_hour(timestamp, offset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // 2024-01-01 00:00:00 UTC, a Monday.
    const MONDAY: i64 = 1_704_067_200;

    #[test]
    fn slot_examples() {
        assert_eq!(time_slot(MONDAY + 30 * 60, UtcOffset::UTC).index(), 0);
        let sunday_2359 = MONDAY + 6 * SECONDS_PER_DAY + 23 * SECONDS_PER_HOUR + 59 * 60;
        assert_eq!(time_slot(sunday_2359, UtcOffset::UTC).index(), 167);
        let wednesday_1430 = MONDAY + 2 * SECONDS_PER_DAY + 14 * SECONDS_PER_HOUR + 30 * 60;
        assert_eq!(time_slot(wednesday_1430, UtcOffset::UTC).index(), 62);
    }

    #[test]
    fn offset_shifts_to_local_wall_clock() {
        let offset = UtcOffset::new(-3).unwrap();
        // Monday 02:00 UTC is Sunday 23:00 at UTC-3.
        let ts = MONDAY + 2 * SECONDS_PER_HOUR;
        assert_eq!(time_slot(ts, offset).index(), 6 * 24 + 23);
        assert_eq!(local_day(ts, offset), local_day(MONDAY, UtcOffset::UTC) - 1);
    }

    #[test]
    fn offset_bounds() {
        assert!(UtcOffset::new(-12).is_ok());
        assert!(UtcOffset::new(14).is_ok());
        assert!(UtcOffset::new(15).is_err());
        assert!(UtcOffset::new(-13).is_err());
    }

    #[test]
    fn pre_epoch_timestamps() {
        // 1969-12-29 was a Monday.
        assert_eq!(time_slot(-3 * SECONDS_PER_DAY, UtcOffset::UTC).index(), 0);
        assert_eq!(time_slot(-1, UtcOffset::UTC).index(), 3 * 24 - 1);
    }

    #[test]
    fn direction_tokens() {
        assert_eq!(CallDirection::from_token(b"OUT"), Some(CallDirection::Outgoing));
        assert_eq!(CallDirection::from_token(b"IN"), Some(CallDirection::Incoming));
        assert_eq!(CallDirection::from_token(b"in"), None);
    }

    proptest! {
        #[test]
        fn slot_in_range_and_weekly(t in -4_000_000_000i64..4_000_000_000, o in -12i32..=14) {
            let offset = UtcOffset::new(o).unwrap();
            let slot = time_slot(t, offset);
            prop_assert!(slot.index() < SLOTS_PER_WEEK);
            prop_assert_eq!(slot, time_slot(t + SECONDS_PER_WEEK, offset));
            prop_assert_eq!(slot.hour(), local_hour(t, offset));
        }
    }
}
