//! Home/work anchors, commute radius and spatial call-density grids.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geo::{haversine_km, GridSpec};
use crate::ingest::AntennaRegistry;
use crate::predictor::{SlotHistogram, PAR_MIN_LEN};
use crate::types::{local_hour, time_slot, AntennaId, CdrRecord, UserId, UtcOffset};

pub const DEFAULT_MIN_CALLS: u64 = 10;
pub const COMMUTE_HEADER: &str = "users_considered,users_qualified,mean_radius_km,median_radius_km";
pub const GRID_HEADER: &str = "bbox_min_lat,bbox_min_lon,bbox_max_lat,bbox_max_lon,cell_deg,rows,cols";

/// A user's two most used antennas over all slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImportantPlaces {
    pub user: UserId,
    pub first: (AntennaId, u64),
    pub second: Option<(AntennaId, u64)>,
    pub total_calls: u64,
    /// At least `min_calls` calls and two distinct antennas.
    pub qualified: bool,
}

impl ImportantPlaces {
    /// Unordered anchor pair, smaller id first.
    pub fn pair(&self) -> Option<(AntennaId, AntennaId)> {
        let (a, b) = (self.first.0, self.second?.0);
        Some((a.min(b), a.max(b)))
    }
}

/// Ranks each user's antennas by total count (ties to the smallest id).
/// Output is sorted by user.
pub fn important_places(histogram: &SlotHistogram, min_calls: u64) -> Vec<ImportantPlaces> {
    let min_calls = min_calls.max(1);
    histogram
        .users()
        .into_par_iter()
        .filter_map(|user| {
            let totals = histogram.user_totals(user);
            let ranked = totals.ranked();
            let first = ranked.first().map(|&(a, n)| (a, n as u64))?;
            let second = ranked.get(1).map(|&(a, n)| (a, n as u64));
            let total_calls = totals.total();
            Some(ImportantPlaces {
                user,
                first,
                second,
                total_calls,
                qualified: second.is_some() && total_calls >= min_calls,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommuteReport {
    pub users_considered: u64,
    pub users_qualified: u64,
    pub mean_radius_km: Option<f64>,
    pub median_radius_km: Option<f64>,
    /// `histogram[i]` counts radii in `[i, i + 1)` km.
    pub histogram: Vec<u64>,
}

/// Distance between each qualified user's two important places, summarized.
pub fn commute_radius(places: &[ImportantPlaces], registry: &AntennaRegistry) -> Result<CommuteReport> {
    let locate = |a: AntennaId| {
        registry.location(a).ok_or_else(|| Error::UnknownAntenna {
            antenna: a,
            context: "important places".into(),
        })
    };
    let mut radii = Vec::new();
    for p in places.iter().filter(|p| p.qualified) {
        let Some((second, _)) = p.second else { continue };
        radii.push(haversine_km(locate(p.first.0)?, locate(second)?));
    }
    radii.sort_by(f64::total_cmp);
    let n = radii.len();
    let mean = (n > 0).then(|| radii.iter().sum::<f64>() / n as f64);
    let median = match n {
        0 => None,
        _ if n % 2 == 1 => Some(radii[n / 2]),
        _ => Some((radii[n / 2 - 1] + radii[n / 2]) / 2.0),
    };
    let mut histogram = vec![0u64; radii.last().map_or(0, |&r| r.floor() as usize + 1)];
    for r in &radii {
        histogram[r.floor() as usize] += 1;
    }
    Ok(CommuteReport {
        users_considered: places.len() as u64,
        users_qualified: n as u64,
        mean_radius_km: mean,
        median_radius_km: median,
        histogram,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_commute_csv<W: Write>(report: &CommuteReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{COMMUTE_HEADER}")?;
    writeln!(
        out,
        "{},{},{},{}",
        report.users_considered,
        report.users_qualified,
        fmt_opt(report.mean_radius_km),
        fmt_opt(report.median_radius_km)
    )?;
    writeln!(out, "bin_start_km,count")?;
    for (km, n) in report.histogram.iter().enumerate() {
        writeln!(out, "{km},{n}")?;
    }
    out.flush()
}

/// Which records a grid counts, by time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeFilter {
    Any,
    /// Local hour of day, optionally Monday to Friday only.
    LocalHour { hour: u8, weekdays_only: bool },
    /// Half-open `[start, end)` in epoch seconds.
    Window { start: i64, end: i64 },
}

impl TimeFilter {
    pub fn accepts(self, timestamp: i64, offset: UtcOffset) -> bool {
        match self {
            TimeFilter::Any => true,
            TimeFilter::LocalHour { hour, weekdays_only } => {
                local_hour(timestamp, offset) == hour && !(weekdays_only && time_slot(timestamp, offset).is_weekend())
            }
            TimeFilter::Window { start, end } => (start..end).contains(&timestamp),
        }
    }
}

/// Call counts over a lat/lon grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub spec: GridSpec,
    pub filter: TimeFilter,
    /// Row-major, `rows * cols`.
    pub cells: Vec<u64>,
}

impl DensityGrid {
    pub fn empty(spec: GridSpec, filter: TimeFilter) -> Self {
        DensityGrid {
            spec,
            filter,
            cells: vec![0; spec.rows * spec.cols],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.cells[row * self.spec.cols + col]
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    /// `(row, col, count)` for non-zero cells, row-major.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        let cols = self.spec.cols;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(move |(i, &n)| (i / cols, i % cols, n))
    }

    fn merge(mut self, other: &DensityGrid) -> Self {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
        self
    }
}

/// Counts records whose antenna lies inside the grid and whose time passes `filter`.
pub fn density_grid(
    records: &[CdrRecord],
    registry: &AntennaRegistry,
    spec: GridSpec,
    filter: TimeFilter,
    offset: UtcOffset,
) -> DensityGrid {
    density_grid_where(records, registry, spec, filter, offset, |_| true)
}

/// [`density_grid`] restricted to records accepted by `keep`.
pub fn density_grid_where<F>(
    records: &[CdrRecord],
    registry: &AntennaRegistry,
    spec: GridSpec,
    filter: TimeFilter,
    offset: UtcOffset,
    keep: F,
) -> DensityGrid
where
    F: Fn(&CdrRecord) -> bool + Sync,
{
    let antenna_cell: Vec<Option<usize>> = registry
        .iter()
        .map(|a| spec.cell(a.location).map(|(r, c)| r * spec.cols + c))
        .collect();
    records
        .par_iter()
        .with_min_len(PAR_MIN_LEN)
        .fold(
            || DensityGrid::empty(spec, filter),
            |mut grid, r| {
                if filter.accepts(r.timestamp, offset) && keep(r) {
                    if let Some(cell) = registry.position(r.antenna).and_then(|i| antenna_cell[i]) {
                        grid.cells[cell] += 1;
                    }
                }
                grid
            },
        )
        .reduce(|| DensityGrid::empty(spec, filter), |a, b| a.merge(&b))
}

pub fn write_grid_csv<W: Write>(grid: &DensityGrid, mut out: W) -> std::io::Result<()> {
    let s = &grid.spec;
    writeln!(out, "{GRID_HEADER}")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        s.bbox.min.lat, s.bbox.min.lon, s.bbox.max.lat, s.bbox.max.lon, s.cell_deg, s.rows, s.cols
    )?;
    writeln!(out, "row,col,count")?;
    for (r, c, n) in grid.nonzero() {
        writeln!(out, "{r},{c},{n}")?;
    }
    out.flush()
}
