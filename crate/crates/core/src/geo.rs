//! Great-circle distance and rectangular lat/lon grids.

use crate::error::{Error, Result};
use crate::types::GeoPoint;

/// Mean Earth radius (IUGG), kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Haversine distance on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let half_dlat = (lat2 - lat1) / 2.0;
    let half_dlon = (b.lon - a.lon).to_radians() / 2.0;
    let h = half_dlat.sin().powi(2) + lat1.cos() * lat2.cos() * half_dlon.sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Point `km` kilometers due north (negative: south) of `origin`.
pub fn offset_north(origin: GeoPoint, km: f64) -> GeoPoint {
    GeoPoint {
        lat: origin.lat + (km / EARTH_RADIUS_KM).to_degrees(),
        lon: origin.lon,
    }
}

/// Axis-aligned lat/lon box, `min` strictly south-west of `max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub min: GeoPoint,
    pub max: GeoPoint,
}

impl BBox {
    pub fn new(min: GeoPoint, max: GeoPoint) -> Result<Self> {
        if !(min.is_valid() && max.is_valid()) {
            return Err(Error::config("bbox corner out of coordinate range"));
        }
        if !(min.lat < max.lat && min.lon < max.lon) {
            return Err(Error::config("bbox min must be below max on both axes"));
        }
        Ok(BBox { min, max })
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.min.lat && p.lat <= self.max.lat && p.lon >= self.min.lon && p.lon <= self.max.lon
    }
}

/// A `rows x cols` partition of a bbox into square cells of `cell_deg` degrees.
/// Rows run along latitude, columns along longitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub bbox: BBox,
    pub cell_deg: f64,
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn new(bbox: BBox, cell_deg: f64) -> Result<Self> {
        if !(cell_deg > 0.0 && cell_deg.is_finite()) {
            return Err(Error::config("cell size must be positive"));
        }
        let count = |span: f64| ((span / cell_deg - 1e-9).ceil() as usize).max(1);
        Ok(GridSpec {
            bbox,
            cell_deg,
            rows: count(bbox.max.lat - bbox.min.lat),
            cols: count(bbox.max.lon - bbox.min.lon),
        })
    }

    pub fn cell(&self, p: GeoPoint) -> Option<(usize, usize)> {
        if !self.bbox.contains(p) {
            return None;
        }
        let index = |v: f64, lo: f64, n: usize| (((v - lo) / self.cell_deg).floor() as usize).min(n - 1);
        Some((
            index(p.lat, self.bbox.min.lat, self.rows),
            index(p.lon, self.bbox.min.lon, self.cols),
        ))
    }
}

/// Cell of `point` in the grid over `bbox`, or `None` outside it. Points on
/// the max edges clamp into the last row/column.
pub fn grid_cell(point: GeoPoint, bbox: BBox, cell_deg: f64) -> Option<(usize, usize)> {
    GridSpec::new(bbox, cell_deg).ok()?.cell(point)
}
