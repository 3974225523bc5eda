//! Most-frequent-antenna location model over hour-of-week slots.
//!
//! For every `(user, slot)` the model keeps a histogram of the antennas seen in
//! training and predicts its argmax (ties to the smallest antenna id). A pair
//! with no training data gets no prediction; evaluation reports that
//! abstention as coverage, separately from accuracy.

mod cluster;
mod eval;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{check_header, csv_error, csv_reader, parse_field};
use crate::types::{
    time_slot, AntennaId, CallDirection, CdrRecord, TimeSlot, UserId, UtcOffset, SLOTS_PER_WEEK,
};

pub use cluster::{cluster_antennas, AntennaClustering, ClusterId};
pub use eval::{evaluate, write_per_slot_csv, EvalReport, SlotTally, PER_SLOT_HEADER};

pub const MODEL_HEADER: &str = "user_id,slot,antenna_id,count";

/// Minimum records per parallel training/evaluation job.
pub(crate) const PAR_MIN_LEN: usize = 1 << 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum DirectionFilter {
    #[default]
    All,
    OutgoingOnly,
    IncomingOnly,
}

impl DirectionFilter {
    pub const EACH: [DirectionFilter; 3] = [
        DirectionFilter::All,
        DirectionFilter::OutgoingOnly,
        DirectionFilter::IncomingOnly,
    ];

    pub fn accepts(self, direction: CallDirection) -> bool {
        match self {
            DirectionFilter::All => true,
            DirectionFilter::OutgoingOnly => direction == CallDirection::Outgoing,
            DirectionFilter::IncomingOnly => direction == CallDirection::Incoming,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DirectionFilter::All => "all",
            DirectionFilter::OutgoingOnly => "out",
            DirectionFilter::IncomingOnly => "in",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        DirectionFilter::EACH.into_iter().find(|f| f.label() == label)
    }
}

/// Antenna counts for one `(user, slot)`, kept sorted by antenna id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AntennaCounts(Vec<(AntennaId, u32)>);

impl AntennaCounts {
    pub fn add(&mut self, antenna: AntennaId, n: u32) {
        match self.0.binary_search_by_key(&antenna, |&(a, _)| a) {
            Ok(i) => self.0[i].1 += n,
            Err(i) => self.0.insert(i, (antenna, n)),
        }
    }

    pub fn merge(&mut self, other: &AntennaCounts) {
        for &(a, n) in &other.0 {
            self.add(a, n);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self, antenna: AntennaId) -> u32 {
        self.0
            .binary_search_by_key(&antenna, |&(a, _)| a)
            .map_or(0, |i| self.0[i].1)
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&(_, n)| n as u64).sum()
    }

    /// Ascending antenna id.
    pub fn iter(&self) -> impl Iterator<Item = (AntennaId, u32)> + '_ {
        self.0.iter().copied()
    }

    /// Entries ordered by count descending, then antenna id ascending.
    pub fn ranked(&self) -> Vec<(AntennaId, u32)> {
        let mut v = self.0.clone();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    /// Most frequent antenna; the smallest id wins ties.
    pub fn argmax(&self) -> Option<AntennaId> {
        // Entries are id-ascending, so a strict `>` keeps the first (smallest) id on ties.
        let mut best: Option<(AntennaId, u32)> = None;
        for &(a, n) in &self.0 {
            if best.is_none_or(|(_, m)| n > m) {
                best = Some((a, n));
            }
        }
        best.map(|(a, _)| a)
    }
}

/// Per-user, per-slot antenna histograms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SlotHistogram {
    users: HashMap<UserId, Box<[AntennaCounts]>>,
}

impl SlotHistogram {
    pub fn add(&mut self, user: UserId, slot: TimeSlot, antenna: AntennaId, n: u32) {
        self.users
            .entry(user)
            .or_insert_with(|| vec![AntennaCounts::default(); SLOTS_PER_WEEK].into_boxed_slice())[slot.index()]
            .add(antenna, n);
    }

    pub fn merge(&mut self, other: SlotHistogram) {
        if self.users.len() < other.users.len() {
            let mine = std::mem::replace(self, other);
            return self.merge(mine);
        }
        for (user, slots) in other.users {
            match self.users.get_mut(&user) {
                Some(mine) => {
                    for (m, o) in mine.iter_mut().zip(slots.iter()) {
                        m.merge(o);
                    }
                }
                None => {
                    self.users.insert(user, slots);
                }
            }
        }
    }

    /// Counts for `(user, slot)`, or `None` when nothing was recorded there.
    pub fn get(&self, user: UserId, slot: TimeSlot) -> Option<&AntennaCounts> {
        self.users
            .get(&user)
            .map(|s| &s[slot.index()])
            .filter(|c| !c.is_empty())
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    /// Users in ascending id order.
    pub fn users(&self) -> Vec<UserId> {
        let mut v: Vec<UserId> = self.users.keys().copied().collect();
        v.sort_unstable();
        v
    }

    /// One user's counts summed across all slots.
    pub fn user_totals(&self, user: UserId) -> AntennaCounts {
        let mut total = AntennaCounts::default();
        if let Some(slots) = self.users.get(&user) {
            for c in slots.iter() {
                total.merge(c);
            }
        }
        total
    }

    /// Non-empty cells ordered by user then slot.
    pub fn cells(&self) -> impl Iterator<Item = (UserId, TimeSlot, &AntennaCounts)> + '_ {
        self.users().into_iter().flat_map(move |u| {
            self.users[&u]
                .iter()
                .zip(TimeSlot::all())
                .filter(|(c, _)| !c.is_empty())
                .map(move |(c, s)| (u, s, c))
        })
    }

    pub fn total_count(&self) -> u64 {
        self.users.values().flat_map(|s| s.iter()).map(AntennaCounts::total).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineModel {
    pub histogram: SlotHistogram,
    argmax: HashMap<UserId, Box<[Option<AntennaId>]>>,
    pub direction_filter: DirectionFilter,
    pub utc_offset: UtcOffset,
    pub training_range: Option<(i64, i64)>,
}

impl BaselineModel {
    pub fn from_histogram(
        histogram: SlotHistogram,
        direction_filter: DirectionFilter,
        utc_offset: UtcOffset,
        training_range: Option<(i64, i64)>,
    ) -> Self {
        let argmax = histogram
            .users
            .iter()
            .map(|(&u, slots)| (u, slots.iter().map(AntennaCounts::argmax).collect()))
            .collect();
        BaselineModel {
            histogram,
            argmax,
            direction_filter,
            utc_offset,
            training_range,
        }
    }

    pub fn predict(&self, user: UserId, slot: TimeSlot) -> Option<AntennaId> {
        self.argmax.get(&user).and_then(|s| s[slot.index()])
    }

    /// Whether the model has any data for `user`.
    pub fn knows(&self, user: UserId) -> bool {
        self.argmax.contains_key(&user)
    }
}

/// Accumulates training records, in any order and in any number of batches.
#[derive(Debug)]
pub struct ModelBuilder {
    filter: DirectionFilter,
    offset: UtcOffset,
    histogram: SlotHistogram,
    range: Option<(i64, i64)>,
}

fn widen(range: Option<(i64, i64)>, other: Option<(i64, i64)>) -> Option<(i64, i64)> {
    match (range, other) {
        (Some((a, b)), Some((c, d))) => Some((a.min(c), b.max(d))),
        (r, None) | (None, r) => r,
    }
}

impl ModelBuilder {
    pub fn new(filter: DirectionFilter, offset: UtcOffset) -> Self {
        ModelBuilder {
            filter,
            offset,
            histogram: SlotHistogram::default(),
            range: None,
        }
    }

    pub fn push(&mut self, r: &CdrRecord) {
        if self.filter.accepts(r.direction) {
            self.histogram.add(r.user, time_slot(r.timestamp, self.offset), r.antenna, 1);
        }
        self.range = widen(self.range, Some((r.timestamp, r.timestamp)));
    }

    /// Adds a batch, splitting it across the current rayon pool.
    pub fn extend_par(&mut self, records: &[CdrRecord]) {
        let (filter, offset) = (self.filter, self.offset);
        let (hist, range) = records
            .par_iter()
            .with_min_len(PAR_MIN_LEN)
            .fold(
                || (SlotHistogram::default(), None),
                |(mut h, range), r| {
                    if filter.accepts(r.direction) {
                        h.add(r.user, time_slot(r.timestamp, offset), r.antenna, 1);
                    }
                    (h, widen(range, Some((r.timestamp, r.timestamp))))
                },
            )
            .reduce(
                || (SlotHistogram::default(), None),
                |(mut a, ra), (b, rb)| {
                    a.merge(b);
                    (a, widen(ra, rb))
                },
            );
        self.histogram.merge(hist);
        self.range = widen(self.range, range);
    }

    pub fn finish(self) -> BaselineModel {
        BaselineModel::from_histogram(self.histogram, self.filter, self.offset, self.range)
    }
}

/// Trains on every record accepted by `filter`.
pub fn train<'a>(
    records: impl IntoIterator<Item = &'a CdrRecord>,
    filter: DirectionFilter,
    offset: UtcOffset,
) -> BaselineModel {
    let mut b = ModelBuilder::new(filter, offset);
    for r in records {
        b.push(r);
    }
    b.finish()
}

/// Same result as [`train`], computed on the current rayon pool.
pub fn train_parallel(records: &[CdrRecord], filter: DirectionFilter, offset: UtcOffset) -> BaselineModel {
    let mut b = ModelBuilder::new(filter, offset);
    b.extend_par(records);
    b.finish()
}

pub fn predict(model: &BaselineModel, user: UserId, slot: TimeSlot) -> Option<AntennaId> {
    model.predict(user, slot)
}

/// Writes histogram rows sorted by user, slot and antenna.
pub fn write_model<W: Write>(model: &BaselineModel, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MODEL_HEADER}")?;
    for (user, slot, counts) in model.histogram.cells() {
        for (antenna, n) in counts.iter() {
            writeln!(out, "{user},{slot},{antenna},{n}")?;
        }
    }
    out.flush()
}

pub fn save_model(model: &BaselineModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_model(model, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_model<R: Read>(
    reader: R,
    origin: &Path,
    filter: DirectionFilter,
    offset: UtcOffset,
) -> Result<BaselineModel> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, origin, MODEL_HEADER)?;
    let mut hist = SlotHistogram::default();
    let mut row = csv::ByteRecord::new();
    while rdr.read_byte_record(&mut row).map_err(|e| csv_error(origin, e))? {
        let line = row.position().map_or(0, |p| p.line());
        let parsed = (row.len() == 4).then(|| {
            Some((
                parse_field::<u64>(&row[0])?,
                TimeSlot::new(parse_field::<usize>(&row[1])?)?,
                parse_field::<u32>(&row[2])?,
                parse_field::<u32>(&row[3]).filter(|&n| n > 0)?,
            ))
        });
        let Some(Some((user, slot, antenna, n))) = parsed else {
            return Err(Error::malformed(origin, line, "bad model row"));
        };
        hist.add(UserId(user), slot, AntennaId(antenna), n);
    }
    Ok(BaselineModel::from_histogram(hist, filter, offset, None))
}

pub fn load_model(path: impl AsRef<Path>, filter: DirectionFilter, offset: UtcOffset) -> Result<BaselineModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(BufReader::new(file), path, filter, offset)
}
