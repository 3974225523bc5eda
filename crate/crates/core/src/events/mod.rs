//! Sports fixtures as an external signal: stadium zones, fan tagging from
//! repeated in-zone presence, a fixture-aware predictor and convergence grids.

mod enriched;
mod tagging;
mod zone;

use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{check_header, csv_error, csv_reader, parse_field};
use crate::types::{GeoPoint, SECONDS_PER_HOUR};

pub use enriched::{
    compare_on_matches, convergence_grids, enriched_predict, write_enriched_csv, ClusterMode, EnrichedEvalReport,
    EnrichedPredictor, Prediction, ENRICHED_HEADER,
};
pub use tagging::{tag_fans, write_tags_csv, FanTagSet, TAGS_HEADER};
pub use zone::{stadium_zone, stadium_zones, StadiumZone, DEFAULT_ZONE_RADIUS_KM};

pub const FIXTURE_HEADER: &str =
    "match_id,team,venue_lat,venue_lon,kickoff_epoch,window_start_epoch,window_end_epoch";

/// Default window: one hour before kickoff to three hours after.
pub const DEFAULT_WINDOW_BEFORE_S: i64 = SECONDS_PER_HOUR;
pub const DEFAULT_WINDOW_AFTER_S: i64 = 3 * SECONDS_PER_HOUR;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MatchId(pub String);

impl fmt::Display for MatchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchEvent {
    pub match_id: MatchId,
    pub team: String,
    pub venue: GeoPoint,
    pub kickoff: i64,
    /// Half-open `[start, end)`, with `start <= kickoff < end`.
    pub window: (i64, i64),
}

impl MatchEvent {
    pub fn with_default_window(match_id: impl Into<String>, team: impl Into<String>, venue: GeoPoint, kickoff: i64) -> Self {
        MatchEvent {
            match_id: MatchId(match_id.into()),
            team: team.into(),
            venue,
            kickoff,
            window: (kickoff - DEFAULT_WINDOW_BEFORE_S, kickoff + DEFAULT_WINDOW_AFTER_S),
        }
    }

    pub fn in_window(&self, timestamp: i64) -> bool {
        (self.window.0..self.window.1).contains(&timestamp)
    }
}

/// One team's matches in kickoff order, with disjoint windows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Fixture {
    matches: Vec<MatchEvent>,
}

impl Fixture {
    pub fn new(matches: Vec<MatchEvent>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidFixture(msg));
        for m in &matches {
            if !(m.window.0 <= m.kickoff && m.kickoff < m.window.1) {
                return bad(format!("match {}: window must satisfy start <= kickoff < end", m.match_id));
            }
            if !m.venue.is_valid() {
                return bad(format!("match {}: venue coordinates out of range", m.match_id));
            }
            if m.team != matches[0].team {
                return bad(format!("match {}: fixture mixes teams", m.match_id));
            }
        }
        for w in matches.windows(2) {
            if w[1].kickoff <= w[0].kickoff {
                return bad(format!("match {}: kickoffs must strictly increase", w[1].match_id));
            }
            if w[1].window.0 < w[0].window.1 {
                return bad(format!("match {}: window overlaps the previous match", w[1].match_id));
            }
        }
        let mut ids: Vec<&MatchId> = matches.iter().map(|m| &m.match_id).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("duplicate match id {}", w[0]));
        }
        Ok(Fixture { matches })
    }

    pub fn matches(&self) -> &[MatchEvent] {
        &self.matches
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn team(&self) -> Option<&str> {
        self.matches.first().map(|m| m.team.as_str())
    }

    /// Index of the match whose window contains `timestamp`.
    pub fn match_at(&self, timestamp: i64) -> Option<usize> {
        let i = self.matches.partition_point(|m| m.window.0 <= timestamp);
        (i > 0 && self.matches[i - 1].in_window(timestamp)).then(|| i - 1)
    }

    pub fn index_of(&self, id: &MatchId) -> Option<usize> {
        self.matches.iter().position(|m| &m.match_id == id)
    }

    /// Matches whose whole window lies in `[start, end)`.
    pub fn restricted_to(&self, start: i64, end: i64) -> Fixture {
        Fixture {
            matches: self
                .matches
                .iter()
                .filter(|m| m.window.0 >= start && m.window.1 <= end)
                .cloned()
                .collect(),
        }
    }
}

pub fn read_fixture<R: Read>(reader: R, origin: &Path) -> Result<Fixture> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, origin, FIXTURE_HEADER)?;
    let mut matches = Vec::new();
    let mut row = csv::StringRecord::new();
    while rdr.read_record(&mut row).map_err(|e| csv_error(origin, e))? {
        let line = row.position().map_or(0, |p| p.line());
        let parsed = (row.len() == 7).then(|| {
            let num = |i: usize| parse_field::<i64>(row[i].as_bytes());
            let deg = |i: usize| parse_field::<f64>(row[i].as_bytes());
            Some(MatchEvent {
                match_id: MatchId(row[0].to_string()),
                team: row[1].to_string(),
                venue: GeoPoint { lat: deg(2)?, lon: deg(3)? },
                kickoff: num(4)?,
                window: (num(5)?, num(6)?),
            })
        });
        match parsed {
            Some(Some(m)) if !m.match_id.0.is_empty() => matches.push(m),
            _ => return Err(Error::malformed(origin, line, "bad fixture row")),
        }
    }
    Fixture::new(matches)
}

pub fn load_fixture(path: impl AsRef<Path>) -> Result<Fixture> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_fixture(BufReader::new(file), path)
}

pub fn write_fixture<W: Write>(fixture: &Fixture, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{FIXTURE_HEADER}")?;
    for m in fixture.matches() {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            m.match_id, m.team, m.venue.lat, m.venue.lon, m.kickoff, m.window.0, m.window.1
        )?;
    }
    out.flush()
}
