//! Finite per-step hyper-parameter schedules with change-point metadata.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{SgdmParams, SpaParams};

/// A finite indexed sequence of per-step parameter pairs.
///
/// Entry `k` holds the pair indexed `k` in the update recurrences. For the
/// standard form, step `k` consumes entry `k` directly. For the averaging
/// form, step `k` consumes `eta` from entry `k` and `c` from entry `k+1`;
/// past the final entry the schedule extends constantly, and entry 0's `c`
/// is never consumed by a run (it exists so that entries stay aligned with
/// the recurrence indexing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule<P> {
    entries: Vec<P>,
    change_points: Vec<usize>,
}

pub type SgdmSchedule = Schedule<SgdmParams>;
pub type SpaSchedule = Schedule<SpaParams>;

impl<P: ScheduleEntry> Schedule<P> {
    /// Builds a schedule from explicit entries. Entries must be finite and
    /// positive where required; momentum values above 1 are allowed here
    /// because converted schedules legitimately carry such spikes.
    pub fn from_entries(entries: Vec<P>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("a schedule needs at least one entry"));
        }
        for (k, e) in entries.iter().enumerate() {
            e.check_storable()
                .map_err(|err| Error::invalid(format!("entry {k}: {err}")))?;
        }
        let change_points = compute_change_points(&entries);
        Ok(Schedule {
            entries,
            change_points,
        })
    }

    /// Constant schedule of the given length.
    pub fn constant(params: P, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("a schedule needs at least one entry"));
        }
        Self::from_entries(vec![params; len])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry for index `k`, extending constantly past the end.
    pub fn entry(&self, k: usize) -> P {
        self.entries[k.min(self.entries.len() - 1)]
    }

    pub fn entries(&self) -> &[P] {
        &self.entries
    }

    /// Indices `k >= 1` whose entry differs from entry `k-1`.
    pub fn change_points(&self) -> &[usize] {
        &self.change_points
    }

    pub fn is_constant(&self) -> bool {
        self.change_points.is_empty()
    }
}

fn compute_change_points<P: PartialEq>(entries: &[P]) -> Vec<usize> {
    entries
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(k, _)| k + 1)
        .collect()
}

/// Storage-level validity for schedule entries.
pub trait ScheduleEntry: Copy + PartialEq {
    fn check_storable(&self) -> Result<()>;
}

impl ScheduleEntry for SgdmParams {
    fn check_storable(&self) -> Result<()> {
        self.validate_relaxed()
    }
}

impl ScheduleEntry for SpaParams {
    fn check_storable(&self) -> Result<()> {
        self.validate_relaxed()
    }
}

impl SpaSchedule {
    /// Switches to plain SGD from `step` onward by forcing the averaging
    /// weight to 1 for every entry with index `> step`.
    ///
    /// From step `step + 1` on, the iterate coincides with the anchor and the
    /// updates are exactly SGD with the schedule's `eta`; step `step` itself
    /// is transitional (it snaps the iterate onto the anchor). Forcing the
    /// weight to 0 instead would freeze the iterate entirely, which is why
    /// "momentum off" is implemented as c = 1.
    pub fn with_momentum_disabled_after(&self, step: usize) -> SpaSchedule {
        let entries: Vec<SpaParams> = self
            .entries
            .iter()
            .enumerate()
            .map(|(k, e)| {
                if k > step {
                    SpaParams { eta: e.eta, c: 1.0 }
                } else {
                    *e
                }
            })
            .collect();
        let change_points = compute_change_points(&entries);
        Schedule {
            entries,
            change_points,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn change_points_characterize_differences() {
        let entries = vec![
            SpaParams { eta: 10.0, c: 0.1 },
            SpaParams { eta: 10.0, c: 0.1 },
            SpaParams { eta: 1.0, c: 0.1 },
            SpaParams { eta: 1.0, c: 0.5 },
            SpaParams { eta: 1.0, c: 0.5 },
        ];
        let s = Schedule::from_entries(entries).unwrap();
        assert_eq!(s.change_points(), &[2, 3]);
        assert!(!s.is_constant());
        assert!(Schedule::constant(SpaParams { eta: 1.0, c: 0.2 }, 5)
            .unwrap()
            .is_constant());
    }

    #[test]
    fn empty_schedules_are_rejected() {
        assert!(SgdmSchedule::from_entries(vec![]).is_err());
        assert!(SpaSchedule::constant(SpaParams { eta: 1.0, c: 0.5 }, 0).is_err());
    }

    #[test]
    fn entries_extend_constantly() {
        let s = SpaSchedule::constant(SpaParams { eta: 2.0, c: 0.3 }, 3).unwrap();
        assert_eq!(s.entry(10).eta, 2.0);
    }

    #[test]
    fn momentum_spike_entries_are_storable() {
        let s = SgdmSchedule::from_entries(vec![
            SgdmParams {
                alpha: 1.0,
                beta: 0.9,
            },
            SgdmParams {
                alpha: 0.1,
                beta: 9.0,
            },
        ]);
        assert!(s.is_ok());
    }

    #[test]
    fn momentum_off_switch_forces_c_to_one() {
        let s = SpaSchedule::constant(SpaParams { eta: 2.0, c: 0.1 }, 6).unwrap();
        let off = s.with_momentum_disabled_after(2);
        assert_eq!(off.entry(2).c, 0.1);
        assert_eq!(off.entry(3).c, 1.0);
        assert_eq!(off.entry(5).c, 1.0);
        assert_eq!(off.change_points(), &[3]);
    }

    proptest::proptest! {
        #[test]
        fn change_points_match_a_direct_scan(raw in proptest::collection::vec(0u8..3, 1..40)) {
            let entries: Vec<SpaParams> = raw
                .iter()
                .map(|&i| SpaParams { eta: 1.0 + f64::from(i), c: 0.5 })
                .collect();
            let s = Schedule::from_entries(entries.clone()).unwrap();
            for k in 1..entries.len() {
                let changed = entries[k] != entries[k - 1];
                proptest::prop_assert_eq!(s.change_points().contains(&k), changed);
            }
            proptest::prop_assert!(!s.change_points().contains(&0));
        }
    }
}
