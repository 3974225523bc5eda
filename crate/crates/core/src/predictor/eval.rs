use std::io::Write;

use log::warn;
use rayon::prelude::*;

use super::{AntennaClustering, BaselineModel, DirectionFilter, PAR_MIN_LEN};
use crate::types::{time_slot, CdrRecord, TimeSlot, UtcOffset, SLOTS_PER_WEEK};

pub const PER_SLOT_HEADER: &str = "slot,total,predicted,correct,accuracy,coverage";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SlotTally {
    pub total: u64,
    pub predicted: u64,
    pub correct: u64,
}

impl SlotTally {
    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.correct, self.predicted)
    }

    pub fn coverage(&self) -> Option<f64> {
        ratio(self.predicted, self.total)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Prediction outcome counts, globally and per hour-of-week slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalReport {
    pub total_events: u64,
    pub predicted_events: u64,
    pub correct_events: u64,
    pub per_slot: Vec<SlotTally>,
}

impl Default for EvalReport {
    fn default() -> Self {
        EvalReport {
            total_events: 0,
            predicted_events: 0,
            correct_events: 0,
            per_slot: vec![SlotTally::default(); SLOTS_PER_WEEK],
        }
    }
}

impl EvalReport {
    /// Records one event. `correct` implies `predicted`.
    pub fn record(&mut self, slot: TimeSlot, predicted: bool, correct: bool) {
        debug_assert!(predicted || !correct);
        let t = &mut self.per_slot[slot.index()];
        t.total += 1;
        self.total_events += 1;
        if predicted {
            t.predicted += 1;
            self.predicted_events += 1;
        }
        if correct {
            t.correct += 1;
            self.correct_events += 1;
        }
    }

    pub fn merge(mut self, other: &EvalReport) -> Self {
        self.total_events += other.total_events;
        self.predicted_events += other.predicted_events;
        self.correct_events += other.correct_events;
        for (a, b) in self.per_slot.iter_mut().zip(&other.per_slot) {
            a.total += b.total;
            a.predicted += b.predicted;
            a.correct += b.correct;
        }
        self
    }

    /// Correct over predicted events; `None` when nothing was predicted.
    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.correct_events, self.predicted_events)
    }

    /// Predicted over total events; `None` on an empty event set.
    pub fn coverage(&self) -> Option<f64> {
        ratio(self.predicted_events, self.total_events)
    }

    /// Unweighted mean of the per-slot accuracies over slots with predictions.
    pub fn mean_slot_accuracy(&self) -> Option<f64> {
        let accs: Vec<f64> = self.per_slot.iter().filter_map(SlotTally::accuracy).collect();
        (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
    }
}

/// Scores the model on every test record accepted by `filter`.
///
/// With a clustering, a prediction counts as correct when it lands in the
/// same cluster as the observed antenna.
pub fn evaluate(
    model: &BaselineModel,
    test: &[CdrRecord],
    filter: DirectionFilter,
    offset: UtcOffset,
    clustering: Option<&AntennaClustering>,
) -> EvalReport {
    if let (Some((lo, hi)), Some(first), Some(last)) = (
        model.training_range,
        test.iter().map(|r| r.timestamp).min(),
        test.iter().map(|r| r.timestamp).max(),
    ) {
        if first <= hi && last >= lo {
            warn!("test range [{first}, {last}] overlaps the training range [{lo}, {hi}]");
        }
    }
    test.par_iter()
        .with_min_len(PAR_MIN_LEN)
        .filter(|r| filter.accepts(r.direction))
        .fold(EvalReport::default, |mut report, r| {
            let slot = time_slot(r.timestamp, offset);
            let guess = model.predict(r.user, slot);
            let correct = guess.is_some_and(|p| match clustering {
                Some(c) => c.same_cluster(p, r.antenna),
                None => p == r.antenna,
            });
            report.record(slot, guess.is_some(), correct);
            report
        })
        .reduce(EvalReport::default, |a, b| a.merge(&b))
}

fn fmt_ratio(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// 168 rows of `slot,total,predicted,correct,accuracy,coverage`; undefined
/// ratios are left blank.
pub fn write_per_slot_csv<W: Write>(report: &EvalReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{PER_SLOT_HEADER}")?;
    for (slot, t) in report.per_slot.iter().enumerate() {
        writeln!(
            out,
            "{slot},{},{},{},{},{}",
            t.total,
            t.predicted,
            t.correct,
            fmt_ratio(t.accuracy()),
            fmt_ratio(t.coverage())
        )?;
    }
    out.flush()
}
