//! Important places, commute radius, and daytime vs evening density grids.

use cdr_mobility::commute::{commute_radius, density_grid, important_places, TimeFilter, DEFAULT_MIN_CALLS};
use cdr_mobility::events::Fixture;
use cdr_mobility::predictor::{train_parallel, DirectionFilter};
use cdr_mobility::synth::{generate_population, generate_records, SynthConfig};
use cdr_mobility::{haversine_km, GridSpec, Result};

pub fn run() -> Result<()> {
    let cfg = SynthConfig {
        n_users: 300,
        weeks: 6,
        p_slot_adherence: 0.9,
        ..SynthConfig::default()
    };
    let (registry, truth) = generate_population(&cfg)?;
    let (records, _) = generate_records(&registry, &truth, &Fixture::default(), &cfg)?;

    let model = train_parallel(&records, DirectionFilter::All, cfg.utc_offset);
    let places = important_places(&model.histogram, DEFAULT_MIN_CALLS);
    let report = commute_radius(&places, &registry)?;
    let planted = truth
        .users
        .iter()
        .map(|u| haversine_km(registry.location(u.home).unwrap(), registry.location(u.work).unwrap()))
        .sum::<f64>()
        / truth.users.len() as f64;
    println!(
        "{} of {} users qualified; mean radius {:.2} km (planted {planted:.2} km), median {:.2} km",
        report.users_qualified,
        report.users_considered,
        report.mean_radius_km.unwrap_or(f64::NAN),
        report.median_radius_km.unwrap_or(f64::NAN)
    );

    let spec = GridSpec::new(cfg.bbox, 0.05)?;
    for hour in [10, 20] {
        let grid = density_grid(&records, &registry, spec, TimeFilter::LocalHour { hour, weekdays_only: true }, cfg.utc_offset);
        let busiest = grid.nonzero().max_by_key(|&(_, _, n)| n);
        println!("{hour:02}:00 weekdays: {} calls, busiest cell {busiest:?}", grid.total());
    }
    Ok(())
}

fn main() -> Result<()> {
    run()
}
