//! Time slots, great-circle distance and grid cells.

use cdr_mobility::{grid_cell, haversine_km, time_slot, BBox, GeoPoint, Result, UtcOffset};

pub fn run() -> Result<()> {
    // Monday 2024-01-01 00:00 UTC.
    let monday = 1_704_067_200;
    let utc = UtcOffset::UTC;
    for (label, ts) in [
        ("monday 00:00", monday),
        ("sunday 23:00", monday + 6 * 86_400 + 23 * 3_600),
        ("wednesday 14:00", monday + 2 * 86_400 + 14 * 3_600),
    ] {
        let s = time_slot(ts, utc);
        println!("{label:>16}: slot {:3} (weekday {}, hour {:2})", s.index(), s.weekday(), s.hour());
    }
    // The same instant is still Sunday evening three hours west.
    let ba = UtcOffset::new(-3)?;
    println!("monday 00:00 UTC in UTC-3 falls in slot {}", time_slot(monday, ba).index());

    let obelisco = GeoPoint { lat: -34.6037, lon: -58.3816 };
    let bombonera = GeoPoint { lat: -34.6356, lon: -58.3649 };
    println!("obelisco to bombonera: {:.3} km", haversine_km(obelisco, bombonera));
    println!(
        "one degree of latitude: {:.3} km",
        haversine_km(GeoPoint { lat: 0.0, lon: 0.0 }, GeoPoint { lat: 1.0, lon: 0.0 })
    );

    let bbox = BBox::new(GeoPoint { lat: -34.80, lon: -58.60 }, GeoPoint { lat: -34.50, lon: -58.30 })?;
    for p in [obelisco, bombonera, GeoPoint { lat: -34.0, lon: -58.4 }] {
        match grid_cell(p, bbox, 0.01) {
            Some((r, c)) => println!("({:.4}, {:.4}) -> cell ({r}, {c})", p.lat, p.lon),
            None => println!("({:.4}, {:.4}) -> outside", p.lat, p.lon),
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    run()
}
