use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;

use super::{tagging::zone_presence, FanTagSet, Fixture, MatchEvent, StadiumZone};
use crate::commute::{density_grid_where, DensityGrid, TimeFilter};
use crate::error::{Error, Result};
use crate::geo::GridSpec;
use crate::ingest::AntennaRegistry;
use crate::predictor::{BaselineModel, EvalReport, PAR_MIN_LEN};
use crate::types::{time_slot, AntennaId, CdrRecord, UserId, UtcOffset, SECONDS_PER_HOUR};

pub const ENRICHED_HEADER: &str = "variant,total,predicted,correct,accuracy,coverage";

/// How an event-driven prediction is scored against the observed antenna.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ClusterMode {
    /// Correct only on the zone representative itself.
    ExactAntenna,
    /// Correct on any antenna of the match's zone.
    #[default]
    ZoneSet,
}

impl ClusterMode {
    pub fn label(self) -> &'static str {
        match self {
            ClusterMode::ExactAntenna => "exact",
            ClusterMode::ZoneSet => "zone",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(ClusterMode::ExactAntenna),
            "zone" => Some(ClusterMode::ZoneSet),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Prediction {
    /// From the slot histogram.
    Baseline(AntennaId),
    /// Zone representative of the fixture match at `match_index`.
    Event { match_index: usize, antenna: AntennaId },
}

impl Prediction {
    pub fn antenna(self) -> AntennaId {
        match self {
            Prediction::Baseline(a) | Prediction::Event { antenna: a, .. } => a,
        }
    }
}

/// Baseline model plus the fixture override for tagged fans.
#[derive(Clone, Copy, Debug)]
pub struct EnrichedPredictor<'a> {
    pub model: &'a BaselineModel,
    pub tags: &'a FanTagSet,
    pub fixture: &'a Fixture,
    pub zones: &'a [StadiumZone],
}

impl<'a> EnrichedPredictor<'a> {
    pub fn new(
        model: &'a BaselineModel,
        tags: &'a FanTagSet,
        fixture: &'a Fixture,
        zones: &'a [StadiumZone],
    ) -> Result<Self> {
        let aligned = zones.len() == fixture.len()
            && zones.iter().zip(fixture.matches()).all(|(z, m)| z.match_id == m.match_id);
        if !aligned {
            return Err(Error::config("zones must be computed for every fixture match, in order"));
        }
        Ok(EnrichedPredictor {
            model,
            tags,
            fixture,
            zones,
        })
    }

    /// Tagged users inside a match window get that match's zone representative,
    /// whether or not they were ever seen there. Everyone else gets the baseline.
    pub fn predict(&self, user: UserId, timestamp: i64, offset: UtcOffset) -> Option<Prediction> {
        if self.tags.contains(user) {
            if let Some(m) = self.fixture.match_at(timestamp) {
                return Some(Prediction::Event {
                    match_index: m,
                    antenna: self.zones[m].representative,
                });
            }
        }
        self.model.predict(user, time_slot(timestamp, offset)).map(Prediction::Baseline)
    }
}

pub fn enriched_predict(
    model: &BaselineModel,
    tags: &FanTagSet,
    fixture: &Fixture,
    zones: &[StadiumZone],
    user: UserId,
    timestamp: i64,
    offset: UtcOffset,
) -> Result<Option<AntennaId>> {
    Ok(EnrichedPredictor::new(model, tags, fixture, zones)?
        .predict(user, timestamp, offset)
        .map(Prediction::antenna))
}

/// Baseline and enriched scores over the same event set: test records of
/// tagged users that fall inside a match window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnrichedEvalReport {
    pub mode: ClusterMode,
    pub baseline: EvalReport,
    pub enriched: EvalReport,
}

pub fn compare_on_matches(
    model: &BaselineModel,
    tags: &FanTagSet,
    fixture: &Fixture,
    zones: &[StadiumZone],
    test: &[CdrRecord],
    mode: ClusterMode,
) -> Result<EnrichedEvalReport> {
    let predictor = EnrichedPredictor::new(model, tags, fixture, zones)?;
    let offset = model.utc_offset;
    let empty = || (EvalReport::default(), EvalReport::default());
    let (baseline, enriched) = test
        .par_iter()
        .with_min_len(PAR_MIN_LEN)
        .filter(|r| tags.contains(r.user) && fixture.match_at(r.timestamp).is_some())
        .fold(empty, |(mut base, mut rich), r| {
            let slot = time_slot(r.timestamp, offset);
            let guess = model.predict(r.user, slot);
            base.record(slot, guess.is_some(), guess == Some(r.antenna));

            let correct = match predictor.predict(r.user, r.timestamp, offset) {
                Some(Prediction::Event { match_index, antenna }) => match mode {
                    ClusterMode::ZoneSet => zones[match_index].contains(r.antenna),
                    ClusterMode::ExactAntenna => antenna == r.antenna,
                },
                // Unreachable on this event set, kept for completeness.
                Some(Prediction::Baseline(a)) => a == r.antenna,
                None => false,
            };
            rich.record(slot, true, correct);
            (base, rich)
        })
        .reduce(empty, |(a, b), (c, d)| (a.merge(&c), b.merge(&d)));
    Ok(EnrichedEvalReport {
        mode,
        baseline,
        enriched,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_enriched_csv<W: Write>(report: &EnrichedEvalReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{ENRICHED_HEADER}")?;
    for (name, r) in [("baseline", &report.baseline), ("enriched", &report.enriched)] {
        writeln!(
            out,
            "{name},{},{},{},{},{}",
            r.total_events,
            r.predicted_events,
            r.correct_events,
            fmt_opt(r.accuracy()),
            fmt_opt(r.coverage())
        )?;
    }
    out.flush()
}

/// Hourly grids around one match, restricted to users with at least one
/// in-zone record during its window. Grid `i` covers
/// `[kickoff + offsets_hours[i] h, +1 h)`.
pub fn convergence_grids(
    records: &[CdrRecord],
    registry: &AntennaRegistry,
    event: &MatchEvent,
    zone: &StadiumZone,
    spec: GridSpec,
    offsets_hours: &[i32],
    utc_offset: UtcOffset,
) -> Vec<DensityGrid> {
    let fixture = Fixture {
        matches: vec![event.clone()],
    };
    let attendees: HashSet<UserId> = zone_presence(records, &fixture, std::slice::from_ref(zone))
        .into_iter()
        .map(|(u, _)| u)
        .collect();
    offsets_hours
        .iter()
        .map(|&h| {
            let start = event.kickoff + h as i64 * SECONDS_PER_HOUR;
            let filter = TimeFilter::Window {
                start,
                end: start + SECONDS_PER_HOUR,
            };
            density_grid_where(records, registry, spec, filter, utc_offset, |r| attendees.contains(&r.user))
        })
        .collect()
}
