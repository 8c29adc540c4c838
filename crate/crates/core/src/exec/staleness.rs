use crate::error::{Error, Result};
use crate::record::RunRecord;

#[derive(Clone, Debug, PartialEq)]
pub struct StalenessSummary {
    pub mean: f64,
    pub max: usize,
    /// `histogram[t]` counts updates with staleness `t`.
    pub histogram: Vec<u64>,
}

/// Staleness over all applied updates, using the largest per-coordinate
/// staleness for inconsistent reads.
pub fn measure_staleness(r: &RunRecord) -> Result<StalenessSummary> {
    if !r.tracking {
        return Err(Error::invalid("record carries no staleness tracking"));
    }
    if r.events.is_empty() {
        return Err(Error::Empty("run record has no events"));
    }
    let max = r.events.iter().map(|e| e.delay as usize).max().unwrap_or(0);
    let mut histogram = vec![0u64; max + 1];
    let mut sum = 0.0;
    for e in &r.events {
        histogram[e.delay as usize] += 1;
        sum += e.delay as f64;
    }
    Ok(StalenessSummary {
        mean: sum / r.events.len() as f64,
        max,
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{Scheme, StepEvent};

    fn synthetic(delays: &[u32]) -> RunRecord {
        let mut r = RunRecord::new(Scheme::WCon, vec![0.0], 0, 1);
        for (k, &t) in delays.iter().enumerate() {
            r.events.push(StepEvent {
                step: k as u64,
                delay: t,
                delay_min: t,
                ..StepEvent::default()
            });
        }
        r
    }

    #[test]
    fn summary_of_synthetic_delays() {
        let s = measure_staleness(&synthetic(&[0, 1, 2, 3])).unwrap();
        assert_eq!(s.mean, 1.5);
        assert_eq!(s.max, 3);
        assert_eq!(s.histogram, vec![1, 1, 1, 1]);
    }

    #[test]
    fn untracked_record_is_rejected() {
        let mut r = synthetic(&[0, 1]);
        r.tracking = false;
        assert!(measure_staleness(&r).is_err());
    }
}
