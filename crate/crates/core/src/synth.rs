//! Seeded synthetic populations and CDR streams with planted ground truth.
//!
//! Every user has a home and a work antenna. Calls arrive as a Poisson
//! process per user and local day at uniform times; a call is placed at the
//! slot's anchor (work on weekdays 09:00-18:00, home otherwise) with
//! probability `p_slot_adherence`, else at a uniformly drawn antenna. Fans who
//! attend a match place every call inside its window at the antenna nearest the
//! venue, plus `match_calls` extra calls spread over the window.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`). Each `(user, day)` and
//! `(user, match)` pair gets its own stream derived from the seed, so output
//! does not depend on how work is split across threads.

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::events::{Fixture, MatchEvent, MatchId};
use crate::geo::BBox;
use crate::ingest::{AntennaRegistry, ANTENNA_HEADER, CDR_HEADER};
use crate::types::{
    time_slot, Antenna, AntennaId, CallDirection, CdrRecord, GeoPoint, TimeSlot, UserId, UtcOffset,
    SECONDS_PER_DAY, SECONDS_PER_HOUR,
};

pub const GROUND_TRUTH_HEADER: &str = "user_id,home_antenna,work_antenna,is_fan";
pub const ATTENDANCE_HEADER: &str = "user_id,match_id";

const TAG_POPULATION: u64 = 1;
const TAG_CALLS: u64 = 2;
const TAG_ATTEND: u64 = 3;
const TAG_MATCH_CALLS: u64 = 4;
const TAG_FIXTURE: u64 = 5;

fn substream(seed: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream((a << 32) ^ b);
    rng
}

/// Greater Buenos Aires, roughly.
pub fn default_bbox() -> BBox {
    BBox {
        min: GeoPoint { lat: -34.80, lon: -58.60 },
        max: GeoPoint { lat: -34.50, lon: -58.30 },
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_users: u32,
    pub n_antennas: u32,
    pub bbox: BBox,
    pub weeks: u32,
    pub utc_offset: UtcOffset,
    /// First generated local calendar day, as days since 1970-01-01.
    pub start_day: i64,
    /// Mean calls per user per day.
    pub call_rate: f64,
    pub p_slot_adherence: f64,
    pub fan_fraction: f64,
    pub p_attend: f64,
    /// Extra calls a fan places during each attended match window.
    pub match_calls: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 1000,
            n_antennas: 50,
            bbox: default_bbox(),
            weeks: 17,
            utc_offset: UtcOffset::new(-3).expect("valid offset"),
            // 2012-03-05, a Monday.
            start_day: 15_404,
            call_rate: 2.0,
            p_slot_adherence: 0.8,
            fan_fraction: 0.1,
            p_attend: 0.5,
            match_calls: 1,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must lie in [0, 1], got {p}")))
            }
        };
        prob("p_slot_adherence", self.p_slot_adherence)?;
        prob("fan_fraction", self.fan_fraction)?;
        prob("p_attend", self.p_attend)?;
        if self.n_users == 0 || self.weeks == 0 {
            return Err(Error::config("n_users and weeks must be positive"));
        }
        if self.n_antennas < 2 {
            return Err(Error::config("n_antennas must be at least 2 so home and work can differ"));
        }
        if !(self.call_rate > 0.0 && self.call_rate.is_finite()) {
            return Err(Error::config("call_rate must be positive"));
        }
        BBox::new(self.bbox.min, self.bbox.max)?;
        Ok(())
    }

    /// UTC instant of the first local midnight.
    pub fn start_epoch(&self) -> i64 {
        self.utc_offset.to_utc(self.start_day * SECONDS_PER_DAY)
    }

    /// Half-open `[start, end)` of generated timestamps.
    pub fn time_range(&self) -> (i64, i64) {
        let start = self.start_epoch();
        (start, start + self.days() as i64 * SECONDS_PER_DAY)
    }

    pub fn days(&self) -> u32 {
        self.weeks * 7
    }

    /// UTC instant at which week `w` begins.
    pub fn week_start(&self, w: u32) -> i64 {
        self.start_epoch() + w as i64 * 7 * SECONDS_PER_DAY
    }
}

/// Weekday 09:00-18:00 slots belong to work; everything else to home.
pub fn is_work_slot(slot: TimeSlot) -> bool {
    !slot.is_weekend() && (9..18).contains(&slot.hour())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlantedUser {
    pub user: UserId,
    pub home: AntennaId,
    pub work: AntennaId,
    pub is_fan: bool,
}

impl PlantedUser {
    pub fn anchor(&self, slot: TimeSlot) -> AntennaId {
        if is_work_slot(slot) {
            self.work
        } else {
            self.home
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SyntheticGroundTruth {
    /// Ascending user id.
    pub users: Vec<PlantedUser>,
    pub attended: BTreeSet<(UserId, MatchId)>,
}

impl SyntheticGroundTruth {
    pub fn user(&self, id: UserId) -> Option<&PlantedUser> {
        self.users
            .binary_search_by_key(&id, |u| u.user)
            .ok()
            .map(|i| &self.users[i])
    }

    pub fn fans(&self) -> impl Iterator<Item = &PlantedUser> {
        self.users.iter().filter(|u| u.is_fan)
    }
}

/// Antennas uniform over the bbox; homes and works uniform over antennas with
/// home != work; fans drawn with probability `fan_fraction`.
pub fn generate_population(cfg: &SynthConfig) -> Result<(AntennaRegistry, SyntheticGroundTruth)> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, TAG_POPULATION, 0, 0);
    let (min, max) = (cfg.bbox.min, cfg.bbox.max);
    let antennas: Vec<Antenna> = (1..=cfg.n_antennas)
        .map(|id| Antenna {
            id: AntennaId(id),
            location: GeoPoint {
                lat: rng.random_range(min.lat..max.lat),
                lon: rng.random_range(min.lon..max.lon),
            },
        })
        .collect();
    let registry = AntennaRegistry::new(antennas)?;
    let users = (1..=cfg.n_users as u64)
        .map(|id| {
            let home = rng.random_range(1..=cfg.n_antennas);
            // Uniform over the other n - 1 antennas.
            let mut work = rng.random_range(1..cfg.n_antennas);
            if work >= home {
                work += 1;
            }
            PlantedUser {
                user: UserId(id),
                home: AntennaId(home),
                work: AntennaId(work),
                is_fan: rng.random_bool(cfg.fan_fraction),
            }
        })
        .collect();
    Ok((
        registry,
        SyntheticGroundTruth {
            users,
            attended: BTreeSet::new(),
        },
    ))
}

/// Shape of a generated fixture.
#[derive(Clone, Debug, PartialEq)]
pub struct FixturePlan {
    pub team: String,
    pub n_matches: usize,
    /// Day of the first match, counted from the first generated day.
    pub first_day: u32,
    /// Gaps between consecutive matches in days, cycled.
    pub spacing_days: Vec<u32>,
    /// Local kickoff hours to draw from.
    pub kickoff_hours: Vec<u8>,
    pub window_before_s: i64,
    pub window_after_s: i64,
    /// When set, venues are only placed at antennas with no planted home or
    /// work within this radius.
    pub avoid_anchors_km: Option<f64>,
}

impl Default for FixturePlan {
    fn default() -> Self {
        FixturePlan {
            team: "boca".into(),
            n_matches: 10,
            first_day: 5,
            spacing_days: vec![7],
            kickoff_hours: vec![15, 17, 19, 21],
            window_before_s: SECONDS_PER_HOUR,
            window_after_s: 3 * SECONDS_PER_HOUR,
            avoid_anchors_km: None,
        }
    }
}

/// Builds a fixture whose venues sit on antennas of the registry. Even-indexed
/// matches are home games at a single stadium; odd ones are away at
/// different antennas.
pub fn generate_fixture(
    registry: &AntennaRegistry,
    truth: &SyntheticGroundTruth,
    cfg: &SynthConfig,
    plan: &FixturePlan,
) -> Result<Fixture> {
    if plan.n_matches == 0 {
        return Fixture::new(Vec::new());
    }
    if plan.spacing_days.is_empty() || plan.kickoff_hours.is_empty() || plan.kickoff_hours.iter().any(|&h| h > 23) {
        return Err(Error::config("fixture plan needs spacing days and kickoff hours in 0..24"));
    }
    let candidates: Vec<&Antenna> = match plan.avoid_anchors_km {
        None => registry.iter().collect(),
        Some(radius) => {
            let anchors: BTreeSet<AntennaId> = truth.users.iter().flat_map(|u| [u.home, u.work]).collect();
            registry
                .iter()
                .filter(|a| registry.within(a.location, radius).iter().all(|id| !anchors.contains(id)))
                .collect()
        }
    };
    if candidates.len() < 2 {
        return Err(Error::config("not enough antennas to place fixture venues"));
    }
    let mut rng = substream(cfg.seed, TAG_FIXTURE, 0, 0);
    let stadium = candidates[rng.random_range(0..candidates.len())];
    let mut day = plan.first_day as i64;
    let mut matches = Vec::with_capacity(plan.n_matches);
    for i in 0..plan.n_matches {
        let venue = if i % 2 == 0 {
            stadium
        } else {
            loop {
                let a = candidates[rng.random_range(0..candidates.len())];
                if a.id != stadium.id {
                    break a;
                }
            }
        };
        let hour = plan.kickoff_hours[rng.random_range(0..plan.kickoff_hours.len())] as i64;
        let kickoff = cfg
            .utc_offset
            .to_utc((cfg.start_day + day) * SECONDS_PER_DAY + hour * SECONDS_PER_HOUR);
        matches.push(MatchEvent {
            match_id: MatchId(format!("{}-{i:03}", plan.team)),
            team: plan.team.clone(),
            venue: venue.location,
            kickoff,
            window: (kickoff - plan.window_before_s, kickoff + plan.window_after_s),
        });
        day += plan.spacing_days[i % plan.spacing_days.len()] as i64;
    }
    Fixture::new(matches)
}

/// Lazily produces one local day of records at a time, sorted.
pub struct CdrGenerator<'a> {
    cfg: &'a SynthConfig,
    truth: &'a SyntheticGroundTruth,
    fixture: &'a Fixture,
    venue_antenna: Vec<AntennaId>,
    /// Attended match indices per user, ascending.
    attendance: HashMap<UserId, Vec<usize>>,
    antenna_ids: Vec<AntennaId>,
    calls: Poisson<f64>,
}

impl<'a> CdrGenerator<'a> {
    pub fn new(
        cfg: &'a SynthConfig,
        registry: &'a AntennaRegistry,
        truth: &'a SyntheticGroundTruth,
        fixture: &'a Fixture,
    ) -> Result<Self> {
        cfg.validate()?;
        let (start, end) = cfg.time_range();
        if let Some(m) = fixture.matches().iter().find(|m| m.window.0 < start || m.window.1 > end) {
            return Err(Error::config(format!("match {} lies outside the generated time range", m.match_id)));
        }
        let venue_antenna = fixture.matches().iter().map(|m| registry.nearest(m.venue).id).collect();
        let mut attendance = HashMap::new();
        for fan in truth.fans() {
            let attended: Vec<usize> = (0..fixture.len())
                .filter(|&m| substream(cfg.seed, TAG_ATTEND, fan.user.0, m as u64).random_bool(cfg.p_attend))
                .collect();
            if !attended.is_empty() {
                attendance.insert(fan.user, attended);
            }
        }
        let calls = Poisson::new(cfg.call_rate).map_err(|e| Error::config(format!("call_rate: {e}")))?;
        Ok(CdrGenerator {
            cfg,
            truth,
            fixture,
            venue_antenna,
            attendance,
            antenna_ids: registry.iter().map(|a| a.id).collect(),
            calls,
        })
    }

    /// Planted attendance as `(user, match)` pairs.
    pub fn attended(&self) -> BTreeSet<(UserId, MatchId)> {
        self.attendance
            .iter()
            .flat_map(|(&u, ms)| ms.iter().map(move |&m| (u, self.fixture.matches()[m].match_id.clone())))
            .collect()
    }

    pub fn days(&self) -> u32 {
        self.cfg.days()
    }

    fn attended_match_at(&self, user: UserId, t: i64) -> Option<usize> {
        let m = self.fixture.match_at(t)?;
        self.attendance.get(&user)?.binary_search(&m).ok().map(|_| m)
    }

    fn peer<R: Rng>(&self, rng: &mut R, user: UserId) -> Option<UserId> {
        if self.cfg.n_users < 2 {
            return None;
        }
        let mut p = rng.random_range(1..self.cfg.n_users as u64);
        if p >= user.0 {
            p += 1;
        }
        Some(UserId(p))
    }

    fn direction<R: Rng>(rng: &mut R) -> CallDirection {
        if rng.random_bool(0.5) {
            CallDirection::Outgoing
        } else {
            CallDirection::Incoming
        }
    }

    fn user_day(&self, u: &PlantedUser, day: u32, out: &mut Vec<CdrRecord>) {
        let cfg = self.cfg;
        let day_start = cfg.start_epoch() + day as i64 * SECONDS_PER_DAY;
        let day_end = day_start + SECONDS_PER_DAY;
        let mut rng = substream(cfg.seed, TAG_CALLS, u.user.0, day as u64);
        let n = self.calls.sample(&mut rng) as u64;
        for _ in 0..n {
            let timestamp = day_start + rng.random_range(0..SECONDS_PER_DAY);
            let antenna = match self.attended_match_at(u.user, timestamp) {
                Some(m) => self.venue_antenna[m],
                None if rng.random_bool(cfg.p_slot_adherence) => u.anchor(time_slot(timestamp, cfg.utc_offset)),
                None => self.antenna_ids[rng.random_range(0..self.antenna_ids.len())],
            };
            out.push(CdrRecord {
                timestamp,
                user: u.user,
                antenna,
                direction: Self::direction(&mut rng),
                peer: self.peer(&mut rng, u.user),
            });
        }
        let Some(attended) = self.attendance.get(&u.user) else { return };
        for &m in attended {
            let (ws, we) = self.fixture.matches()[m].window;
            if we <= day_start || ws >= day_end {
                continue;
            }
            let mut rng = substream(cfg.seed, TAG_MATCH_CALLS, u.user.0, m as u64);
            for _ in 0..cfg.match_calls {
                let timestamp = rng.random_range(ws..we);
                let direction = Self::direction(&mut rng);
                let peer = self.peer(&mut rng, u.user);
                if (day_start..day_end).contains(&timestamp) {
                    out.push(CdrRecord {
                        timestamp,
                        user: u.user,
                        antenna: self.venue_antenna[m],
                        direction,
                        peer,
                    });
                }
            }
        }
    }

    /// All records of local day `day`, sorted by (timestamp, user, ...).
    pub fn day_records(&self, day: u32) -> Vec<CdrRecord> {
        let mut recs: Vec<CdrRecord> = self
            .truth
            .users
            .par_iter()
            .with_min_len(256)
            .fold(Vec::new, |mut acc, u| {
                self.user_day(u, day, &mut acc);
                acc
            })
            .reduce(Vec::new, |mut a, mut b| {
                a.append(&mut b);
                a
            });
        recs.par_sort_unstable();
        recs
    }

    /// Calls `sink` once per day, in time order.
    pub fn for_each_day(&self, mut sink: impl FnMut(&[CdrRecord]) -> Result<()>) -> Result<()> {
        for day in 0..self.days() {
            sink(&self.day_records(day))?;
        }
        Ok(())
    }
}

/// Whole record stream in memory, plus ground truth with attendance filled in.
pub fn generate_records(
    registry: &AntennaRegistry,
    truth: &SyntheticGroundTruth,
    fixture: &Fixture,
    cfg: &SynthConfig,
) -> Result<(Vec<CdrRecord>, SyntheticGroundTruth)> {
    let gen = CdrGenerator::new(cfg, registry, truth, fixture)?;
    let mut all = Vec::new();
    gen.for_each_day(|day| {
        all.extend_from_slice(day);
        Ok(())
    })?;
    let mut truth = truth.clone();
    truth.attended = gen.attended();
    Ok((all, truth))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthOutput {
    pub truth: SyntheticGroundTruth,
    pub records_written: u64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(|f| BufWriter::with_capacity(1 << 16, f))
        .map_err(|e| Error::io(path, e))
}

/// Streams `cdrs.csv`, `ground_truth.csv` and `attendance.csv` into `dir`.
pub fn generate_cdrs(
    registry: &AntennaRegistry,
    truth: &SyntheticGroundTruth,
    fixture: &Fixture,
    cfg: &SynthConfig,
    dir: &Path,
) -> Result<SynthOutput> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let gen = CdrGenerator::new(cfg, registry, truth, fixture)?;
    let path = dir.join("cdrs.csv");
    let mut writer = CdrWriter::new(create(&path)?).map_err(|e| Error::io(&path, e))?;
    gen.for_each_day(|day| {
        day.iter()
            .try_for_each(|r| writer.write(r))
            .map_err(|e| Error::io(&path, e))
    })?;
    let records_written = writer.count();
    writer.finish().map_err(|e| Error::io(&path, e))?;

    let mut truth = truth.clone();
    truth.attended = gen.attended();
    let path = dir.join("ground_truth.csv");
    write_ground_truth(&truth, create(&path)?).map_err(|e| Error::io(&path, e))?;
    let path = dir.join("attendance.csv");
    write_attendance(&truth, create(&path)?).map_err(|e| Error::io(&path, e))?;
    Ok(SynthOutput {
        truth,
        records_written,
    })
}

pub fn write_antennas<W: Write>(registry: &AntennaRegistry, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{ANTENNA_HEADER}")?;
    for a in registry.iter() {
        writeln!(out, "{},{},{}", a.id, a.location.lat, a.location.lon)?;
    }
    out.flush()
}

pub fn save_antennas(registry: &AntennaRegistry, path: &Path) -> Result<()> {
    write_antennas(registry, create(path)?).map_err(|e| Error::io(path, e))
}

pub fn write_ground_truth<W: Write>(truth: &SyntheticGroundTruth, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{GROUND_TRUTH_HEADER}")?;
    for u in &truth.users {
        writeln!(out, "{},{},{},{}", u.user, u.home, u.work, u8::from(u.is_fan))?;
    }
    out.flush()
}

pub fn write_attendance<W: Write>(truth: &SyntheticGroundTruth, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{ATTENDANCE_HEADER}")?;
    for (u, m) in &truth.attended {
        writeln!(out, "{u},{m}")?;
    }
    out.flush()
}

/// Writes CDR CSV in the format [`crate::ingest::stream_cdrs`] reads.
pub struct CdrWriter<W: Write> {
    out: W,
    count: u64,
}

impl<W: Write> CdrWriter<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "{CDR_HEADER}")?;
        Ok(CdrWriter { out, count: 0 })
    }

    pub fn write(&mut self, r: &CdrRecord) -> std::io::Result<()> {
        self.count += 1;
        match r.peer {
            Some(p) => writeln!(self.out, "{},{},{},{},{}", r.timestamp, r.user, p, r.direction.token(), r.antenna),
            None => writeln!(self.out, "{},{},,{},{}", r.timestamp, r.user, r.direction.token(), r.antenna),
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}
