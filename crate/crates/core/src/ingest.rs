//! Antenna registries and streaming CDR ingestion.
//!
//! Both inputs are headered CSV files:
//!
//! ```text
//! antenna_id,lat,lon
//! timestamp,user_id,peer_id,direction,antenna_id
//! ```
//!
//! A CDR line is malformed when it has the wrong number of fields, a number
//! fails to parse, or the direction is neither `OUT` nor `IN`. The reader
//! keeps a single reusable record buffer, so memory does not grow with the
//! file (apart from the per-user set behind [`DatasetStats::user_count`]).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geo::{haversine_km, BBox};
use crate::types::{
    local_day, Antenna, AntennaId, CallDirection, CdrRecord, GeoPoint, UserId, UtcOffset,
};

pub const ANTENNA_HEADER: &str = "antenna_id,lat,lon";
pub const CDR_HEADER: &str = "timestamp,user_id,peer_id,direction,antenna_id";

/// Antennas keyed by id; iteration is in ascending id order.
#[derive(Clone, Debug, PartialEq)]
pub struct AntennaRegistry {
    antennas: Vec<Antenna>,
    index: HashMap<AntennaId, usize>,
}

impl AntennaRegistry {
    pub fn new(antennas: impl IntoIterator<Item = Antenna>) -> Result<Self> {
        let mut antennas: Vec<Antenna> = antennas.into_iter().collect();
        if antennas.is_empty() {
            return Err(Error::EmptyRegistry);
        }
        antennas.sort_by_key(|a| a.id);
        if let Some(w) = antennas.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::DuplicateAntenna(w[0].id));
        }
        if let Some(a) = antennas.iter().find(|a| !a.location.is_valid()) {
            return Err(Error::CoordinateOutOfRange(a.id));
        }
        let index = antennas.iter().enumerate().map(|(i, a)| (a.id, i)).collect();
        Ok(AntennaRegistry { antennas, index })
    }

    pub fn len(&self) -> usize {
        self.antennas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.antennas.is_empty()
    }

    pub fn get(&self, id: AntennaId) -> Option<&Antenna> {
        self.index.get(&id).map(|&i| &self.antennas[i])
    }

    pub fn location(&self, id: AntennaId) -> Option<GeoPoint> {
        self.get(id).map(|a| a.location)
    }

    pub fn contains(&self, id: AntennaId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Antenna> {
        self.antennas.iter()
    }

    /// Position of `id` in ascending-id order, usable as a dense index.
    pub fn position(&self, id: AntennaId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Antenna closest to `point`; ties go to the smallest id.
    pub fn nearest(&self, point: GeoPoint) -> &Antenna {
        // Registry is never empty and iteration is id-ascending, so strict `<` keeps the smallest id.
        let mut best = &self.antennas[0];
        let mut best_d = haversine_km(point, best.location);
        for a in &self.antennas[1..] {
            let d = haversine_km(point, a.location);
            if d < best_d {
                best = a;
                best_d = d;
            }
        }
        best
    }

    /// Ids of antennas within `radius_km` of `point`, ascending.
    pub fn within(&self, point: GeoPoint, radius_km: f64) -> Vec<AntennaId> {
        self.antennas
            .iter()
            .filter(|a| haversine_km(point, a.location) <= radius_km)
            .map(|a| a.id)
            .collect()
    }

    /// Smallest box holding every antenna, padded by `pad_deg` on each side.
    pub fn bounds(&self, pad_deg: f64) -> BBox {
        let pad = pad_deg.max(1e-6);
        let (mut min_lat, mut min_lon) = (f64::INFINITY, f64::INFINITY);
        let (mut max_lat, mut max_lon) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for a in &self.antennas {
            min_lat = min_lat.min(a.location.lat);
            min_lon = min_lon.min(a.location.lon);
            max_lat = max_lat.max(a.location.lat);
            max_lon = max_lon.max(a.location.lon);
        }
        BBox {
            min: GeoPoint {
                lat: (min_lat - pad).max(-90.0),
                lon: (min_lon - pad).max(-180.0),
            },
            max: GeoPoint {
                lat: (max_lat + pad).min(90.0),
                lon: (max_lon + pad).min(180.0),
            },
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(|f| BufReader::with_capacity(1 << 16, f))
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_reader<R: Read>(inner: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(inner)
}

/// Maps csv-crate errors onto ours: I/O stays I/O, anything else is a malformed line.
pub(crate) fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::malformed(path, line, format!("{other:?}")),
    }
}

pub(crate) fn check_header<R: Read>(
    reader: &mut csv::Reader<R>,
    path: &Path,
    expected: &str,
) -> Result<()> {
    let header = reader.byte_headers().map_err(|e| csv_error(path, e))?;
    let got: Vec<&[u8]> = header.iter().collect();
    let want: Vec<&[u8]> = expected.split(',').map(str::as_bytes).collect();
    if got != want {
        return Err(Error::malformed(path, 1, format!("expected header `{expected}`")));
    }
    Ok(())
}

pub(crate) fn parse_field<T: std::str::FromStr>(field: &[u8]) -> Option<T> {
    std::str::from_utf8(field).ok()?.parse().ok()
}

pub fn load_antennas(path: impl AsRef<Path>) -> Result<AntennaRegistry> {
    let path = path.as_ref();
    read_antennas(open(path)?, path)
}

/// Parses an antenna CSV from any reader; `origin` labels errors.
pub fn read_antennas<R: Read>(reader: R, origin: &Path) -> Result<AntennaRegistry> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, origin, ANTENNA_HEADER)?;
    let mut antennas = Vec::new();
    let mut seen = HashSet::new();
    let mut row = csv::ByteRecord::new();
    while rdr.read_byte_record(&mut row).map_err(|e| csv_error(origin, e))? {
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 3 {
            return Err(Error::malformed(origin, line, format!("expected 3 fields, got {}", row.len())));
        }
        let (Some(id), Some(lat), Some(lon)) = (
            parse_field::<u32>(&row[0]),
            parse_field::<f64>(&row[1]),
            parse_field::<f64>(&row[2]),
        ) else {
            return Err(Error::malformed(origin, line, "unparsable number"));
        };
        let id = AntennaId(id);
        let location = GeoPoint { lat, lon };
        if !location.is_valid() {
            return Err(Error::CoordinateOutOfRange(id));
        }
        if !seen.insert(id) {
            return Err(Error::DuplicateAntenna(id));
        }
        antennas.push(Antenna { id, location });
    }
    AntennaRegistry::new(antennas)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ParsePolicy {
    /// First bad line aborts the stream.
    Strict,
    /// Malformed and unknown-antenna lines are skipped and counted.
    #[default]
    SkipAndCount,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetStats {
    pub record_count: u64,
    /// Local calendar day (days since 1970-01-01) to record count.
    pub per_day_counts: BTreeMap<i64, u64>,
    pub user_count: u64,
    pub malformed_count: u64,
    pub time_range: Option<(i64, i64)>,
}

/// Incremental builder for [`DatasetStats`].
#[derive(Debug)]
pub struct StatsAccumulator {
    offset: UtcOffset,
    per_day: BTreeMap<i64, u64>,
    users: HashSet<UserId>,
    count: u64,
    range: Option<(i64, i64)>,
}

impl StatsAccumulator {
    pub fn new(offset: UtcOffset) -> Self {
        StatsAccumulator {
            offset,
            per_day: BTreeMap::new(),
            users: HashSet::new(),
            count: 0,
            range: None,
        }
    }

    pub fn push(&mut self, r: &CdrRecord) {
        self.count += 1;
        *self.per_day.entry(local_day(r.timestamp, self.offset)).or_default() += 1;
        self.users.insert(r.user);
        self.range = Some(match self.range {
            None => (r.timestamp, r.timestamp),
            Some((lo, hi)) => (lo.min(r.timestamp), hi.max(r.timestamp)),
        });
    }

    pub fn finish(&self, malformed_count: u64) -> DatasetStats {
        DatasetStats {
            record_count: self.count,
            per_day_counts: self.per_day.clone(),
            user_count: self.users.len() as u64,
            malformed_count,
            time_range: self.range,
        }
    }
}

pub fn dataset_stats<'a>(
    records: impl IntoIterator<Item = &'a CdrRecord>,
    offset: UtcOffset,
) -> DatasetStats {
    let mut acc = StatsAccumulator::new(offset);
    for r in records {
        acc.push(r);
    }
    acc.finish(0)
}

/// Streaming CDR reader. Yields records in file order and accumulates
/// [`DatasetStats`] as it goes.
pub struct CdrReader<'r, R: Read = BufReader<File>> {
    reader: csv::Reader<R>,
    registry: &'r AntennaRegistry,
    policy: ParsePolicy,
    path: PathBuf,
    row: csv::ByteRecord,
    stats: StatsAccumulator,
    malformed: u64,
    done: bool,
}

pub fn stream_cdrs<'r>(
    path: impl AsRef<Path>,
    registry: &'r AntennaRegistry,
    policy: ParsePolicy,
    offset: UtcOffset,
) -> Result<CdrReader<'r>> {
    let path = path.as_ref();
    CdrReader::from_reader(open(path)?, path, registry, policy, offset)
}

enum LineError {
    Malformed(String),
    UnknownAntenna(AntennaId),
}

impl<'r, R: Read> CdrReader<'r, R> {
    pub fn from_reader(
        inner: R,
        origin: &Path,
        registry: &'r AntennaRegistry,
        policy: ParsePolicy,
        offset: UtcOffset,
    ) -> Result<Self> {
        let mut reader = csv_reader(inner);
        check_header(&mut reader, origin, CDR_HEADER)?;
        Ok(CdrReader {
            reader,
            registry,
            policy,
            path: origin.to_path_buf(),
            row: csv::ByteRecord::new(),
            stats: StatsAccumulator::new(offset),
            malformed: 0,
            done: false,
        })
    }

    pub fn malformed_count(&self) -> u64 {
        self.malformed
    }

    /// Statistics over everything read so far.
    pub fn stats(&self) -> DatasetStats {
        self.stats.finish(self.malformed)
    }

    fn parse_row(&self) -> Result<CdrRecord, LineError> {
        let row = &self.row;
        if row.len() != 5 {
            return Err(LineError::Malformed(format!("expected 5 fields, got {}", row.len())));
        }
        let bad = |what: &str| LineError::Malformed(format!("unparsable {what}"));
        let timestamp = parse_field::<i64>(&row[0]).ok_or_else(|| bad("timestamp"))?;
        let user = parse_field::<u64>(&row[1]).ok_or_else(|| bad("user_id"))?;
        let peer = match &row[2] {
            b"" => None,
            p => Some(UserId(parse_field::<u64>(p).ok_or_else(|| bad("peer_id"))?)),
        };
        let direction = CallDirection::from_token(&row[3]).ok_or_else(|| bad("direction"))?;
        let antenna = AntennaId(parse_field::<u32>(&row[4]).ok_or_else(|| bad("antenna_id"))?);
        if !self.registry.contains(antenna) {
            return Err(LineError::UnknownAntenna(antenna));
        }
        Ok(CdrRecord {
            timestamp,
            user: UserId(user),
            antenna,
            direction,
            peer,
        })
    }
}

impl<R: Read> Iterator for CdrReader<'_, R> {
    type Item = Result<CdrRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            match self.reader.read_byte_record(&mut self.row) {
                Ok(false) => self.done = true,
                Err(e) => {
                    // Quoting/UTF-8 problems land here as malformed lines; I/O is fatal.
                    let err = csv_error(&self.path, e);
                    if matches!(err, Error::MalformedLine { .. }) && self.policy == ParsePolicy::SkipAndCount {
                        self.malformed += 1;
                        continue;
                    }
                    self.done = true;
                    return Some(Err(err));
                }
                Ok(true) => match self.parse_row() {
                    Ok(record) => {
                        self.stats.push(&record);
                        return Some(Ok(record));
                    }
                    Err(_) if self.policy == ParsePolicy::SkipAndCount => self.malformed += 1,
                    Err(e) => {
                        self.done = true;
                        let line = self.row.position().map_or(0, |p| p.line());
                        return Some(Err(match e {
                            LineError::Malformed(reason) => Error::malformed(&self.path, line, reason),
                            LineError::UnknownAntenna(antenna) => Error::UnknownAntenna {
                                antenna,
                                context: format!("{}:{line}", self.path.display()),
                            },
                        }));
                    }
                },
            }
        }
        None
    }
}
