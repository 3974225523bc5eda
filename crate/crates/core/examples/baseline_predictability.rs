//! Train a per-slot most-frequent-antenna model and score it on held-out weeks.

use cdr_mobility::events::Fixture;
use cdr_mobility::predictor::{cluster_antennas, evaluate, train_parallel, DirectionFilter};
use cdr_mobility::synth::{generate_population, generate_records, SynthConfig};
use cdr_mobility::Result;

pub fn run() -> Result<()> {
    let cfg = SynthConfig {
        n_users: 300,
        weeks: 8,
        call_rate: 6.0,
        ..SynthConfig::default()
    };
    let (registry, truth) = generate_population(&cfg)?;
    let (records, _) = generate_records(&registry, &truth, &Fixture::default(), &cfg)?;
    let split = cfg.week_start(6);
    let (train, test): (Vec<_>, Vec<_>) = records.into_iter().partition(|r| r.timestamp < split);

    let clusters = cluster_antennas(&registry, 2.0);
    println!("{} antennas in {} clusters at 2 km", registry.len(), clusters.cluster_count());
    for filter in DirectionFilter::EACH {
        let model = train_parallel(&train, filter, cfg.utc_offset);
        let exact = evaluate(&model, &test, filter, cfg.utc_offset, None);
        let clustered = evaluate(&model, &test, filter, cfg.utc_offset, Some(&clusters));
        println!(
            "{:>3}: accuracy {:.3} (clustered {:.3}), coverage {:.3}, mean slot accuracy {:.3}",
            filter.label(),
            exact.accuracy().unwrap_or(0.0),
            clustered.accuracy().unwrap_or(0.0),
            exact.coverage().unwrap_or(0.0),
            exact.mean_slot_accuracy().unwrap_or(0.0)
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    run()
}
