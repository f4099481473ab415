use serde::{Deserialize, Serialize};

use super::verdict::{DetectorVerdict, Method};

/// One CUSUM recursion: `stat' = max(0, stat + score - drift)`, flagged when
/// `stat'` exceeds `decision`. Resetting after a flag is the caller's job.
pub fn cusum_update(stat: f64, score: f64, drift: f64, decision: f64) -> (f64, bool) {
    let next = (stat + score - drift).max(0.0);
    (next, next > decision)
}

/// Caller-owned CUSUM state that restarts from zero after every flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cusum {
    pub drift: f64,
    pub decision: f64,
    stat: f64,
}

impl Cusum {
    pub fn new(drift: f64, decision: f64) -> Self {
        Cusum {
            drift,
            decision,
            stat: 0.0,
        }
    }

    pub fn stat(&self) -> f64 {
        self.stat
    }

    pub fn reset(&mut self) {
        self.stat = 0.0;
    }

    pub fn observe(&mut self, score: f64, step: usize) -> DetectorVerdict {
        let (stat, flag) = cusum_update(self.stat, score, self.drift, self.decision);
        self.stat = if flag { 0.0 } else { stat };
        DetectorVerdict {
            method: Method::Cusum,
            step,
            score: stat,
            threshold: self.decision,
            flag,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_below_drift_stays_at_zero() {
        let mut s = 0.0;
        for _ in 0..50 {
            let (n, f) = cusum_update(s, 0.3, 0.5, 1.0);
            assert_eq!(n, 0.0);
            assert!(!f);
            s = n;
        }
    }

    #[test]
    fn unit_excess_crosses_decision_at_step_five() {
        // stat after step t (0-based) is t + 1; first value above 5 is at t = 5
        let mut s = 0.0;
        let mut first = None;
        for t in 0..10 {
            let (n, f) = cusum_update(s, 3.0, 2.0, 5.0);
            s = n;
            if f && first.is_none() {
                first = Some(t);
            }
        }
        assert_eq!(first, Some(5));
    }

    #[test]
    fn tracker_resets_after_flag() {
        let mut c = Cusum::new(0.0, 2.5);
        let flags: Vec<bool> = (0..6).map(|t| c.observe(1.0, t).flag).collect();
        assert_eq!(flags, vec![false, false, true, false, false, true]);
        assert_eq!(c.stat(), 0.0);
    }

    #[test]
    fn higher_decision_never_adds_flags() {
        let scores = [0.5, 2.0, 0.1, 3.0, 0.0, 1.5, 4.0];
        let run = |d: f64| {
            let mut s = 0.0;
            scores
                .iter()
                .map(|x| {
                    let (n, f) = cusum_update(s, *x, 0.5, d);
                    s = n;
                    f
                })
                .collect::<Vec<_>>()
        };
        let low = run(1.0);
        let high = run(3.0);
        for (l, h) in low.iter().zip(&high) {
            assert!(*l || !*h);
        }
    }
}
