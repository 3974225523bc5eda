use super::{Fixture, MatchEvent, MatchId};
use crate::error::{Error, Result};
use crate::ingest::AntennaRegistry;
use crate::types::AntennaId;

pub const DEFAULT_ZONE_RADIUS_KM: f64 = 1.0;

/// Antennas around one match venue.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StadiumZone {
    pub match_id: MatchId,
    /// Ascending.
    pub antennas: Vec<AntennaId>,
    /// Antenna nearest the venue (smallest id on ties).
    pub representative: AntennaId,
}

impl StadiumZone {
    pub fn contains(&self, antenna: AntennaId) -> bool {
        self.antennas.binary_search(&antenna).is_ok()
    }
}

pub fn stadium_zone(registry: &AntennaRegistry, event: &MatchEvent, zone_radius_km: f64) -> Result<StadiumZone> {
    if zone_radius_km.is_nan() || zone_radius_km <= 0.0 {
        return Err(Error::config("zone radius must be positive"));
    }
    let antennas = registry.within(event.venue, zone_radius_km);
    if antennas.is_empty() {
        return Err(Error::EmptyZone(event.match_id.0.clone()));
    }
    // The nearest antenna is no farther than any zone member, so it is a member.
    let representative = registry.nearest(event.venue).id;
    debug_assert!(antennas.contains(&representative));
    Ok(StadiumZone {
        match_id: event.match_id.clone(),
        antennas,
        representative,
    })
}

/// One zone per match, in fixture order.
pub fn stadium_zones(registry: &AntennaRegistry, fixture: &Fixture, zone_radius_km: f64) -> Result<Vec<StadiumZone>> {
    fixture
        .matches()
        .iter()
        .map(|m| stadium_zone(registry, m, zone_radius_km))
        .collect()
}
