//! A seeded synthetic population with planted home and work antennas.

use cdr_mobility::synth::{generate_fixture, generate_population, generate_records, FixturePlan, SynthConfig};
use cdr_mobility::{haversine_km, Result};

pub fn run() -> Result<()> {
    let cfg = SynthConfig {
        n_users: 200,
        weeks: 4,
        ..SynthConfig::default()
    };
    let (registry, truth) = generate_population(&cfg)?;
    let plan = FixturePlan {
        n_matches: 3,
        ..FixturePlan::default()
    };
    let fixture = generate_fixture(&registry, &truth, &cfg, &plan)?;
    let (records, truth) = generate_records(&registry, &truth, &fixture, &cfg)?;

    let mean_km = truth
        .users
        .iter()
        .map(|u| haversine_km(registry.location(u.home).unwrap(), registry.location(u.work).unwrap()))
        .sum::<f64>()
        / truth.users.len() as f64;
    println!(
        "{} users on {} antennas, {} fans, mean home-work distance {mean_km:.2} km",
        truth.users.len(),
        registry.len(),
        truth.fans().count()
    );
    println!("{} records over {} days, {} fan attendances", records.len(), cfg.days(), truth.attended.len());
    for m in fixture.matches() {
        println!("  {} kickoff {} at ({:.4}, {:.4})", m.match_id, m.kickoff, m.venue.lat, m.venue.lon);
    }

    // Same seed, same records.
    let (again, _) = generate_records(&registry, &truth, &fixture, &cfg)?;
    assert_eq!(records, again);
    Ok(())
}

fn main() -> Result<()> {
    run()
}
