use std::collections::BTreeMap;

use crate::codec::GoosePdu;

/// Classification of one received PDU against the last accepted one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReceiveVerdict {
    NewEvent,
    Retransmission,
    Duplicate,
    /// Same state, but `gap` sequence numbers were skipped.
    OutOfOrder { gap: u32 },
    /// Older state, or an older retransmission of the current one.
    StaleEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Freshness {
    NeverSeen,
    Fresh,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubscriptionEntry {
    pub last_st_num: u32,
    pub last_sq_num: u32,
    pub last_arrival_ns: u64,
    pub last_tatl_ns: u64,
    pub status: Freshness,
    /// Sum of OutOfOrder gaps.
    pub lost_frames: u64,
    pub received: u64,
}

impl SubscriptionEntry {
    fn never_seen() -> Self {
        SubscriptionEntry {
            last_st_num: 0,
            last_sq_num: 0,
            last_arrival_ns: 0,
            last_tatl_ns: 0,
            status: Freshness::NeverSeen,
            lost_frames: 0,
            received: 0,
        }
    }
}

fn next_sq(sq: u32) -> u32 {
    if sq == u32::MAX {
        1
    } else {
        sq + 1
    }
}

/// The verdict table. `last` is `None` before the first reception.
pub fn classify(last: Option<(u32, u32)>, st_num: u32, sq_num: u32) -> ReceiveVerdict {
    let Some((last_st, last_sq)) = last else {
        return ReceiveVerdict::NewEvent;
    };
    if st_num > last_st {
        ReceiveVerdict::NewEvent
    } else if st_num < last_st {
        ReceiveVerdict::StaleEvent
    } else if sq_num == next_sq(last_sq) {
        ReceiveVerdict::Retransmission
    } else if sq_num == last_sq {
        ReceiveVerdict::Duplicate
    } else if sq_num > last_sq {
        ReceiveVerdict::OutOfOrder {
            gap: sq_num - last_sq - 1,
        }
    } else {
        ReceiveVerdict::StaleEvent
    }
}

/// Freshness and sequence tracking per goID.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubscriberState {
    entries: BTreeMap<String, SubscriptionEntry>,
}

impl SubscriberState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers interest in `go_id` before anything has been received.
    pub fn subscribe(&mut self, go_id: impl Into<String>) {
        self.entries
            .entry(go_id.into())
            .or_insert_with(SubscriptionEntry::never_seen);
    }

    pub fn entry(&self, go_id: &str) -> Option<&SubscriptionEntry> {
        self.entries.get(go_id)
    }

    pub fn on_receive(&mut self, pdu: &GoosePdu, now_ns: u64) -> ReceiveVerdict {
        let entry = self
            .entries
            .entry(pdu.go_id.clone())
            .or_insert_with(SubscriptionEntry::never_seen);
        let last = match entry.status {
            Freshness::NeverSeen => None,
            _ => Some((entry.last_st_num, entry.last_sq_num)),
        };
        let verdict = classify(last, pdu.st_num, pdu.sq_num);
        if verdict != ReceiveVerdict::StaleEvent {
            entry.last_st_num = pdu.st_num;
            entry.last_sq_num = pdu.sq_num;
            entry.last_arrival_ns = now_ns;
            entry.last_tatl_ns = u64::from(pdu.time_allowed_to_live) * 1_000_000;
            entry.status = Freshness::Fresh;
            entry.received += 1;
        }
        if let ReceiveVerdict::OutOfOrder { gap } = verdict {
            entry.lost_frames += u64::from(gap);
        }
        verdict
    }

    /// Entries whose TATL has run out (strictly) at `now_ns`, with how long
    /// ago it ran out. Marks them expired.
    pub fn check_expiry(&mut self, now_ns: u64) -> Vec<(String, u64)> {
        let mut out = Vec::new();
        for (go_id, e) in &mut self.entries {
            if e.status == Freshness::NeverSeen {
                continue;
            }
            let deadline = e.last_arrival_ns.saturating_add(e.last_tatl_ns);
            if now_ns > deadline {
                e.status = Freshness::Expired;
                out.push((go_id.clone(), now_ns - deadline));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::UtcTime;

    fn pdu(st: u32, sq: u32, tatl: u32) -> GoosePdu {
        GoosePdu {
            gocb_ref: "LD0/LLN0$GO$gcb".into(),
            time_allowed_to_live: tatl,
            dat_set: "LD0/LLN0$ds".into(),
            go_id: "gcb".into(),
            t: UtcTime::default(),
            st_num: st,
            sq_num: sq,
            test: false,
            conf_rev: 1,
            nds_com: false,
            num_dat_set_entries: 0,
            all_data: vec![],
        }
    }

    #[test]
    fn verdict_examples() {
        let last = Some((1, 5));
        assert_eq!(classify(last, 1, 6), ReceiveVerdict::Retransmission);
        assert_eq!(classify(last, 2, 0), ReceiveVerdict::NewEvent);
        assert_eq!(classify(last, 1, 8), ReceiveVerdict::OutOfOrder { gap: 2 });
        assert_eq!(classify(last, 1, 5), ReceiveVerdict::Duplicate);
        assert_eq!(classify(last, 0, 9), ReceiveVerdict::StaleEvent);
        assert_eq!(classify(last, 1, 3), ReceiveVerdict::StaleEvent);
        assert_eq!(classify(None, 7, 3), ReceiveVerdict::NewEvent);
        assert_eq!(
            classify(Some((1, u32::MAX)), 1, 1),
            ReceiveVerdict::Retransmission
        );
    }

    #[test]
    fn expiry_boundary_is_strict() {
        const MS: u64 = 1_000_000;
        let mut s = SubscriberState::new();
        let t = 5_000 * MS;
        s.on_receive(&pdu(1, 857, 11000), t);
        assert!(s.check_expiry(t + 11000 * MS).is_empty());
        assert_eq!(
            s.check_expiry(t + 11001 * MS),
            vec![("gcb".to_string(), MS)]
        );
        assert_eq!(s.entry("gcb").unwrap().status, Freshness::Expired);
        // a new frame makes it fresh again
        s.on_receive(&pdu(1, 858, 11000), t + 12000 * MS);
        assert_eq!(s.entry("gcb").unwrap().status, Freshness::Fresh);
    }

    #[test]
    fn never_seen_entries_do_not_expire() {
        let mut s = SubscriberState::new();
        s.subscribe("other");
        assert!(s.check_expiry(u64::MAX).is_empty());
        assert_eq!(s.entry("other").unwrap().status, Freshness::NeverSeen);
    }

    #[test]
    fn stale_frames_do_not_refresh() {
        let mut s = SubscriberState::new();
        s.on_receive(&pdu(2, 0, 10), 0);
        assert_eq!(s.on_receive(&pdu(1, 4, 10), 5_000_000), ReceiveVerdict::StaleEvent);
        assert_eq!(s.entry("gcb").unwrap().last_arrival_ns, 0);
        assert_eq!(s.check_expiry(10_000_001).len(), 1);
    }

    #[test]
    fn gaps_accumulate_as_losses() {
        let mut s = SubscriberState::new();
        s.on_receive(&pdu(1, 0, 10), 0);
        s.on_receive(&pdu(1, 3, 10), 1);
        s.on_receive(&pdu(1, 4, 10), 2);
        s.on_receive(&pdu(1, 9, 10), 3);
        assert_eq!(s.entry("gcb").unwrap().lost_frames, 2 + 4);
    }
}
