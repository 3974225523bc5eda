//! Override the baseline with the stadium for tagged fans during matches.

use cdr_mobility::events::{compare_on_matches, stadium_zones, tag_fans, ClusterMode};
use cdr_mobility::predictor::{train_parallel, DirectionFilter};
use cdr_mobility::synth::{generate_fixture, generate_population, generate_records, FixturePlan, SynthConfig};
use cdr_mobility::Result;

pub fn run() -> Result<()> {
    let cfg = SynthConfig {
        n_users: 400,
        weeks: 10,
        call_rate: 3.0,
        p_slot_adherence: 0.9,
        fan_fraction: 0.2,
        ..SynthConfig::default()
    };
    let (registry, truth) = generate_population(&cfg)?;
    let plan = FixturePlan {
        n_matches: 20,
        first_day: 2,
        spacing_days: vec![3, 4],
        ..FixturePlan::default()
    };
    let fixture = generate_fixture(&registry, &truth, &cfg, &plan)?;
    let (records, _) = generate_records(&registry, &truth, &fixture, &cfg)?;
    let split = cfg.week_start(8);
    let (train, test): (Vec<_>, Vec<_>) = records.into_iter().partition(|r| r.timestamp < split);

    let model = train_parallel(&train, DirectionFilter::All, cfg.utc_offset);
    let tags = tag_fans(&train, &fixture, &registry, 1.0, 3)?;
    let zones = stadium_zones(&registry, &fixture, 1.0)?;
    println!("{} fans tagged from the training weeks", tags.len());
    for mode in [ClusterMode::ZoneSet, ClusterMode::ExactAntenna] {
        let report = compare_on_matches(&model, &tags, &fixture, &zones, &test, mode)?;
        println!(
            "{:>5}: {} match events; baseline accuracy {:.3} coverage {:.3}; enriched accuracy {:.3} coverage {:.3}",
            mode.label(),
            report.baseline.total_events,
            report.baseline.accuracy().unwrap_or(0.0),
            report.baseline.coverage().unwrap_or(0.0),
            report.enriched.accuracy().unwrap_or(0.0),
            report.enriched.coverage().unwrap_or(0.0)
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    run()
}
