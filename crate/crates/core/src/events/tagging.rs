use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;

use rayon::prelude::*;

use super::{stadium_zones, Fixture, StadiumZone};
use crate::error::{Error, Result};
use crate::ingest::AntennaRegistry;
use crate::predictor::PAR_MIN_LEN;
use crate::types::{CdrRecord, UserId};

pub const TAGS_HEADER: &str = "user_id,team";

/// Users seen in the stadium zone during `k_consecutive` consecutive matches.
#[derive(Clone, Debug, PartialEq)]
pub struct FanTagSet {
    pub team: String,
    pub users: BTreeSet<UserId>,
    pub k_consecutive: usize,
    pub zone_radius_km: f64,
}

impl FanTagSet {
    pub fn contains(&self, user: UserId) -> bool {
        self.users.contains(&user)
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

/// `(user, match index)` pairs where the user called from the match's zone
/// inside its window.
pub(crate) fn zone_presence(records: &[CdrRecord], fixture: &Fixture, zones: &[StadiumZone]) -> HashSet<(UserId, usize)> {
    records
        .par_iter()
        .with_min_len(PAR_MIN_LEN)
        .fold(HashSet::new, |mut seen, r| {
            if let Some(m) = fixture.match_at(r.timestamp) {
                if zones[m].contains(r.antenna) {
                    seen.insert((r.user, m));
                }
            }
            seen
        })
        .reduce(HashSet::new, |mut a, b| {
            a.extend(b);
            a
        })
}

fn has_run(matches: &BTreeSet<usize>, k: usize) -> bool {
    let mut run = 0;
    let mut prev: Option<usize> = None;
    for &m in matches {
        run = if prev.is_some_and(|p| p + 1 == m) { run + 1 } else { 1 };
        if run >= k {
            return true;
        }
        prev = Some(m);
    }
    false
}

/// Tags a user when, for `k` consecutive fixture matches (home and away alike),
/// they have at least one record inside the match window from an antenna in
/// that match's zone.
pub fn tag_fans(
    records: &[CdrRecord],
    fixture: &Fixture,
    registry: &AntennaRegistry,
    zone_radius_km: f64,
    k: usize,
) -> Result<FanTagSet> {
    if k == 0 {
        return Err(Error::config("k_consecutive must be at least 1"));
    }
    let Some(team) = fixture.team() else {
        return Err(Error::InvalidFixture("fixture is empty".into()));
    };
    let zones = stadium_zones(registry, fixture, zone_radius_km)?;
    let mut per_user: BTreeMap<UserId, BTreeSet<usize>> = BTreeMap::new();
    for (user, m) in zone_presence(records, fixture, &zones) {
        per_user.entry(user).or_default().insert(m);
    }
    let users = per_user
        .into_iter()
        .filter(|(_, ms)| has_run(ms, k))
        .map(|(u, _)| u)
        .collect();
    Ok(FanTagSet {
        team: team.to_string(),
        users,
        k_consecutive: k,
        zone_radius_km,
    })
}

pub fn write_tags_csv<W: Write>(tags: &FanTagSet, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TAGS_HEADER}")?;
    for u in &tags.users {
        writeln!(out, "{u},{}", tags.team)?;
    }
    out.flush()
}
