//! Feedback timing. Information generated at slot `t` is released at the end
//! of slot `t+τ−1`, so at the start of slot `t` the newest readable feedback
//! is from slot `t−τ`. The buffer is the only feedback source the algorithm
//! sees, and every read can be logged for a timing audit.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::problem::{ConstraintSnapshot, DecisionVector};

/// What the environment reveals about slot `origin_slot`.
#[derive(Clone, Debug)]
pub struct SlotFeedback {
    pub origin_slot: usize,
    /// `∇f_t(x_t)`
    pub loss_gradient: Vec<f64>,
    /// `g_t`
    pub constraint: ConstraintSnapshot,
    /// `x_t`
    pub decision: DecisionVector,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccessKind {
    Gradient,
    Constraint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessRecord {
    pub at_slot: usize,
    pub origin_slot: usize,
    pub kind: AccessKind,
}

/// Result of checking an access log against the delay.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingAudit {
    pub reads: usize,
    pub early_reads: usize,
}

impl TimingAudit {
    pub fn is_clean(&self) -> bool {
        self.early_reads == 0
    }
}

#[derive(Debug)]
pub struct DelayBuffer {
    tau: usize,
    constraint_count: usize,
    entries: VecDeque<SlotFeedback>,
    last_pushed: usize,
    log: Option<Vec<AccessRecord>>,
}

impl DelayBuffer {
    pub fn new(tau: usize, constraint_count: usize) -> Result<Self> {
        if tau == 0 {
            return Err(Error::contract("feedback delay must be at least one slot"));
        }
        Ok(DelayBuffer {
            tau,
            constraint_count,
            entries: VecDeque::with_capacity(tau + 2),
            last_pushed: 0,
            log: None,
        })
    }

    /// Separate loss and constraint delays collapse to their maximum.
    pub fn with_mixed_delays(loss_delay: usize, constraint_delay: usize, constraint_count: usize) -> Result<Self> {
        Self::new(loss_delay.max(constraint_delay), constraint_count)
    }

    /// Turn on the access log.
    pub fn with_audit(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn constraint_count(&self) -> usize {
        self.constraint_count
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, feedback: SlotFeedback) -> Result<()> {
        if feedback.origin_slot == 0 || feedback.origin_slot <= self.last_pushed {
            return Err(Error::contract(format!(
                "feedback for slot {} pushed after slot {}",
                feedback.origin_slot, self.last_pushed
            )));
        }
        check_len("feedback constraint count", self.constraint_count, feedback.constraint.count())?;
        check_len("feedback gradient", feedback.decision.len(), feedback.loss_gradient.len())?;
        self.last_pushed = feedback.origin_slot;
        // The next reader is slot origin+1, which needs nothing older than origin−τ.
        self.prune(feedback.origin_slot + 1);
        self.entries.push_back(feedback);
        Ok(())
    }

    /// Feedback visible at the start of slot `t`, oldest first.
    pub fn available(&self, t: usize) -> impl Iterator<Item = &SlotFeedback> {
        let horizon = t.saturating_sub(self.tau);
        self.entries.iter().filter(move |f| f.origin_slot <= horizon)
    }

    /// Drop everything older than slot `t−τ−1`, which nothing at slot `t` or
    /// later can need.
    fn prune(&mut self, t: usize) {
        let keep_from = t.saturating_sub(self.tau + 1);
        while self.entries.front().is_some_and(|f| f.origin_slot < keep_from) {
            self.entries.pop_front();
        }
    }

    fn record(&mut self, at_slot: usize, origin_slot: usize, kind: AccessKind) {
        if let Some(log) = &mut self.log {
            log.push(AccessRecord {
                at_slot,
                origin_slot,
                kind,
            });
        }
    }

    fn lookup(&self, origin: usize) -> Option<&SlotFeedback> {
        self.entries.iter().find(|f| f.origin_slot == origin)
    }

    /// Feedback from slot `t−τ`, or `None` during warm-up (`t ≤ τ`) or if it
    /// never arrived.
    pub fn latest_usable(&mut self, t: usize) -> Option<&SlotFeedback> {
        if t <= self.tau {
            return None;
        }
        self.prune(t);
        let origin = t - self.tau;
        self.record(t, origin, AccessKind::Gradient);
        self.lookup(origin)
    }

    /// Constraint function of slot `origin`, read at the start of slot `t`.
    /// Slot 0 is the identically-zero constraint.
    pub fn constraint_at(&mut self, t: usize, origin: usize) -> Result<ConstraintSnapshot> {
        self.record(t, origin, AccessKind::Constraint);
        if origin + self.tau > t {
            return Err(Error::contract(format!(
                "slot {t} asked for slot-{origin} constraints before their release (tau = {})",
                self.tau
            )));
        }
        if origin == 0 {
            return Ok(ConstraintSnapshot::Zero {
                count: self.constraint_count,
            });
        }
        self.prune(t);
        self.lookup(origin)
            .map(|f| f.constraint.clone())
            .ok_or_else(|| Error::contract(format!("feedback for slot {origin} is missing")))
    }

    pub fn access_log(&self) -> Option<&[AccessRecord]> {
        self.log.as_deref()
    }

    pub fn audit(&self) -> TimingAudit {
        audit_log(self.log.as_deref().unwrap_or(&[]), self.tau)
    }
}

/// Count reads of slot-`s` information before slot `s+τ`.
pub fn audit_log(log: &[AccessRecord], tau: usize) -> TimingAudit {
    TimingAudit {
        reads: log.len(),
        early_reads: log.iter().filter(|r| r.origin_slot + tau > r.at_slot).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fb(slot: usize) -> SlotFeedback {
        SlotFeedback {
            origin_slot: slot,
            loss_gradient: vec![slot as f64],
            constraint: ConstraintSnapshot::Zero { count: 1 },
            decision: DecisionVector::zeros(1),
        }
    }

    fn visible(buf: &DelayBuffer, t: usize) -> Vec<usize> {
        buf.available(t).map(|f| f.origin_slot).collect()
    }

    #[test]
    fn tau_three_exposes_only_first_slot_at_four() {
        let mut buf = DelayBuffer::new(3, 1).unwrap();
        for s in 1..=3 {
            buf.push(fb(s)).unwrap();
        }
        assert_eq!(visible(&buf, 4), vec![1]);
    }

    #[test]
    fn tau_one_is_standard_setting() {
        let mut buf = DelayBuffer::new(1, 1).unwrap();
        for s in 1..=5 {
            buf.push(fb(s)).unwrap();
        }
        assert_eq!(buf.latest_usable(6).unwrap().origin_slot, 5);
    }

    #[test]
    fn warm_up_sees_nothing() {
        let mut buf = DelayBuffer::new(2, 1).unwrap();
        buf.push(fb(1)).unwrap();
        assert!(visible(&buf, 2).is_empty());
        assert!(buf.latest_usable(2).is_none());
    }

    #[test]
    fn latest_usable_is_t_minus_tau() {
        let mut buf = DelayBuffer::new(4, 1).unwrap();
        for s in 1..=9 {
            buf.push(fb(s)).unwrap();
        }
        assert_eq!(buf.latest_usable(10).unwrap().origin_slot, 6);
        assert!(buf.latest_usable(4).is_none());
    }

    #[test]
    fn mixed_delays_use_the_larger() {
        let buf = DelayBuffer::with_mixed_delays(2, 5, 1).unwrap();
        assert_eq!(buf.tau(), 5);
    }

    #[test]
    fn out_of_order_push_is_rejected() {
        let mut buf = DelayBuffer::new(2, 1).unwrap();
        buf.push(fb(3)).unwrap();
        assert!(buf.push(fb(3)).is_err());
        assert!(buf.push(fb(2)).is_err());
    }

    #[test]
    fn zero_delay_is_rejected() {
        assert!(DelayBuffer::new(0, 1).is_err());
    }

    #[test]
    fn slot_zero_constraint_is_zero() {
        let mut buf = DelayBuffer::new(1, 2).unwrap();
        let g0 = buf.constraint_at(1, 0).unwrap();
        assert_eq!(g0.eval(&[3.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn early_constraint_read_is_refused_and_logged() {
        let mut buf = DelayBuffer::new(3, 1).unwrap().with_audit();
        for s in 1..=4 {
            buf.push(fb(s)).unwrap();
        }
        assert!(buf.constraint_at(5, 3).is_err());
        assert!(buf.constraint_at(5, 2).is_ok());
        let audit = buf.audit();
        assert_eq!(audit.reads, 2);
        assert_eq!(audit.early_reads, 1);
    }

    #[test]
    fn memory_stays_within_tau_plus_one() {
        for tau in [1, 2, 7] {
            let mut buf = DelayBuffer::new(tau, 1).unwrap();
            for t in 1..=60 {
                if t > tau {
                    buf.latest_usable(t).unwrap();
                    buf.constraint_at(t, t - tau - 1).unwrap();
                }
                buf.push(fb(t)).unwrap();
                assert!(buf.len() <= tau + 1, "tau {tau} slot {t}: {}", buf.len());
            }
        }
    }
}
