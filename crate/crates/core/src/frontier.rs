//! FIFO frontier of unvisited URLs.
//!
//! URLs are admitted at the tail and served from the head in strict
//! first-come-first-served order, which together with depth tracking gives a
//! breadth-first traversal. Admission is filtered by deduplication and three
//! independent spider-trap guards: maximum depth, a per-host page budget and
//! a maximum number of path segments.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Mutex;

use serde::Serialize;

use crate::canonical::CanonicalUrl;

pub const DEFAULT_MAX_DEPTH: u32 = 8;
pub const DEFAULT_MAX_PAGES_PER_HOST: usize = 200;
pub const DEFAULT_MAX_PATH_SEGMENTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontierEntry {
    pub url: CanonicalUrl,
    /// Hops from the seed that led here; seeds are 0.
    pub depth: u32,
    pub parent: Option<CanonicalUrl>,
}

impl FrontierEntry {
    pub fn seed(url: CanonicalUrl) -> Self {
        Self {
            url,
            depth: 0,
            parent: None,
        }
    }

    pub fn child_of(parent: &FrontierEntry, url: CanonicalUrl) -> Self {
        Self {
            url,
            depth: parent.depth + 1,
            parent: Some(parent.url.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrontierLimits {
    pub max_depth: u32,
    pub max_pages_per_host: usize,
    pub max_path_segments: usize,
}

impl Default for FrontierLimits {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_MAX_DEPTH,
            max_pages_per_host: DEFAULT_MAX_PAGES_PER_HOST,
            max_path_segments: DEFAULT_MAX_PATH_SEGMENTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Duplicate,
    DepthExceeded,
    HostBudgetExhausted,
    PathTooDeep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admitted,
    Rejected(RejectReason),
}

impl Admission {
    pub fn is_admitted(self) -> bool {
        matches!(self, Admission::Admitted)
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RejectionCounts {
    pub duplicate: u64,
    pub depth_exceeded: u64,
    pub host_budget_exhausted: u64,
    pub path_too_deep: u64,
}

impl RejectionCounts {
    fn bump(&mut self, reason: RejectReason) {
        match reason {
            RejectReason::Duplicate => self.duplicate += 1,
            RejectReason::DepthExceeded => self.depth_exceeded += 1,
            RejectReason::HostBudgetExhausted => self.host_budget_exhausted += 1,
            RejectReason::PathTooDeep => self.path_too_deep += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.duplicate + self.depth_exceeded + self.host_budget_exhausted + self.path_too_deep
    }
}

/// Seen set, per-host admission counters and the configured limits.
#[derive(Debug)]
pub struct TrapGuardState {
    limits: FrontierLimits,
    seen: HashSet<CanonicalUrl>,
    per_host: HashMap<String, usize>,
}

impl TrapGuardState {
    pub fn new(limits: FrontierLimits) -> Self {
        Self {
            limits,
            seen: HashSet::new(),
            per_host: HashMap::new(),
        }
    }

    pub fn limits(&self) -> FrontierLimits {
        self.limits
    }

    pub fn is_seen(&self, url: &CanonicalUrl) -> bool {
        self.seen.contains(url)
    }

    pub fn host_count(&self, host: &str) -> usize {
        self.per_host.get(host).copied().unwrap_or(0)
    }

    pub fn seen_len(&self) -> usize {
        self.seen.len()
    }

    /// Checks every guard and, if all pass, records the URL as seen and
    /// charges its host.
    pub fn admit(&mut self, entry: &FrontierEntry) -> Admission {
        if self.seen.contains(&entry.url) {
            return Admission::Rejected(RejectReason::Duplicate);
        }
        if entry.depth > self.limits.max_depth {
            return Admission::Rejected(RejectReason::DepthExceeded);
        }
        if entry.url.path_segments() > self.limits.max_path_segments {
            return Admission::Rejected(RejectReason::PathTooDeep);
        }
        let host = entry.url.host();
        if self.host_count(host) >= self.limits.max_pages_per_host {
            return Admission::Rejected(RejectReason::HostBudgetExhausted);
        }
        *self.per_host.entry(host.to_string()).or_insert(0) += 1;
        self.seen.insert(entry.url.clone());
        Admission::Admitted
    }

    /// Marks a URL as seen without queueing it (e.g. a redirect target that
    /// was already fetched). Returns false if it was seen before.
    pub fn mark_seen(&mut self, url: &CanonicalUrl) -> bool {
        self.seen.insert(url.clone())
    }
}

#[derive(Debug)]
struct Inner {
    queue: VecDeque<FrontierEntry>,
    guard: TrapGuardState,
    rejections: RejectionCounts,
    admitted: u64,
}

/// Thread-safe FIFO frontier. Admission and dequeue are atomic with respect
/// to the seen set.
#[derive(Debug)]
pub struct Frontier {
    inner: Mutex<Inner>,
}

impl Frontier {
    pub fn new(limits: FrontierLimits) -> Self {
        Self {
            inner: Mutex::new(Inner {
                queue: VecDeque::new(),
                guard: TrapGuardState::new(limits),
                rejections: RejectionCounts::default(),
                admitted: 0,
            }),
        }
    }

    pub fn enqueue(&self, entry: FrontierEntry) -> Admission {
        let mut inner = self.inner.lock().expect("frontier lock poisoned");
        let admission = inner.guard.admit(&entry);
        match admission {
            Admission::Admitted => {
                inner.admitted += 1;
                inner.queue.push_back(entry);
            }
            Admission::Rejected(reason) => inner.rejections.bump(reason),
        }
        admission
    }

    pub fn dequeue(&self) -> Option<FrontierEntry> {
        self.inner
            .lock()
            .expect("frontier lock poisoned")
            .queue
            .pop_front()
    }

    pub fn mark_seen(&self, url: &CanonicalUrl) -> bool {
        self.inner
            .lock()
            .expect("frontier lock poisoned")
            .guard
            .mark_seen(url)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("frontier lock poisoned").queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn admitted(&self) -> u64 {
        self.inner.lock().expect("frontier lock poisoned").admitted
    }

    pub fn rejections(&self) -> RejectionCounts {
        self.inner.lock().expect("frontier lock poisoned").rejections
    }

    pub fn host_count(&self, host: &str) -> usize {
        self.inner
            .lock()
            .expect("frontier lock poisoned")
            .guard
            .host_count(host)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::canonicalize;
    use proptest::prelude::*;

    fn url(s: &str) -> CanonicalUrl {
        canonicalize(s, None).unwrap()
    }

    fn at_depth(s: &str, depth: u32) -> FrontierEntry {
        FrontierEntry {
            url: url(s),
            depth,
            parent: None,
        }
    }

    fn limits(depth: u32, host: usize, segments: usize) -> FrontierLimits {
        FrontierLimits {
            max_depth: depth,
            max_pages_per_host: host,
            max_path_segments: segments,
        }
    }

    #[test]
    fn admits_unseen_url() {
        let f = Frontier::new(limits(10, 100, 20));
        assert_eq!(f.enqueue(at_depth("http://a.test/x", 1)), Admission::Admitted);
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn rejects_duplicate() {
        let f = Frontier::new(limits(10, 100, 20));
        assert!(f.enqueue(at_depth("http://a.test/x", 1)).is_admitted());
        assert_eq!(
            f.enqueue(at_depth("HTTP://A.test/x#frag", 2)),
            Admission::Rejected(RejectReason::Duplicate)
        );
        assert_eq!(f.rejections().duplicate, 1);
    }

    #[test]
    fn rejects_too_many_path_segments() {
        let f = Frontier::new(limits(10, 100, 20));
        let deep = format!("http://a.test/{}", vec!["a"; 25].join("/"));
        assert_eq!(
            f.enqueue(at_depth(&deep, 1)),
            Admission::Rejected(RejectReason::PathTooDeep)
        );
        let ok = format!("http://a.test/{}", vec!["a"; 20].join("/"));
        assert!(f.enqueue(at_depth(&ok, 1)).is_admitted());
    }

    #[test]
    fn rejects_depth_and_host_budget() {
        let f = Frontier::new(limits(2, 2, 20));
        assert_eq!(
            f.enqueue(at_depth("http://a.test/deep", 3)),
            Admission::Rejected(RejectReason::DepthExceeded)
        );
        assert!(f.enqueue(at_depth("http://a.test/1", 0)).is_admitted());
        assert!(f.enqueue(at_depth("http://a.test/2", 0)).is_admitted());
        assert_eq!(
            f.enqueue(at_depth("http://a.test/3", 0)),
            Admission::Rejected(RejectReason::HostBudgetExhausted)
        );
        assert!(f.enqueue(at_depth("http://b.test/1", 0)).is_admitted());
        assert_eq!(f.host_count("a.test"), 2);
    }

    #[test]
    fn rejected_url_is_not_marked_seen() {
        let f = Frontier::new(limits(1, 100, 20));
        assert!(!f.enqueue(at_depth("http://a.test/x", 5)).is_admitted());
        assert!(f.enqueue(at_depth("http://a.test/x", 1)).is_admitted());
    }

    #[test]
    fn dequeue_is_fifo() {
        let f = Frontier::new(FrontierLimits::default());
        for s in ["http://a.test/A", "http://a.test/B", "http://a.test/C"] {
            f.enqueue(at_depth(s, 0));
        }
        let order: Vec<_> = std::iter::from_fn(|| f.dequeue())
            .map(|e| e.url.path().to_string())
            .collect();
        assert_eq!(order, ["/A", "/B", "/C"]);
        assert!(f.dequeue().is_none());
    }

    #[test]
    fn seeds_before_children() {
        let f = Frontier::new(FrontierLimits::default());
        f.enqueue(FrontierEntry::seed(url("http://s1.test/")));
        f.enqueue(FrontierEntry::seed(url("http://s2.test/")));
        let s1 = f.dequeue().unwrap();
        for link in ["http://s1.test/a", "http://s1.test/b"] {
            let child = FrontierEntry::child_of(&s1, url(link));
            assert_eq!(child.depth, 1);
            assert_eq!(child.parent.as_ref(), Some(&s1.url));
            f.enqueue(child);
        }
        let rest: Vec<_> = std::iter::from_fn(|| f.dequeue())
            .map(|e| e.url.to_string())
            .collect();
        assert_eq!(rest, ["http://s2.test/", "http://s1.test/a", "http://s1.test/b"]);
    }

    #[test]
    fn mark_seen_blocks_later_admission() {
        let f = Frontier::new(FrontierLimits::default());
        assert!(f.mark_seen(&url("http://a.test/r")));
        assert!(!f.mark_seen(&url("http://a.test/r")));
        assert_eq!(
            f.enqueue(at_depth("http://a.test/r", 0)),
            Admission::Rejected(RejectReason::Duplicate)
        );
    }

    proptest! {
        // Dequeue order equals admission order, and nothing comes out twice.
        #[test]
        fn fifo_over_random_admissions(ids in prop::collection::vec(0u16..60, 0..200)) {
            let f = Frontier::new(limits(100, 1000, 100));
            let mut admitted = Vec::new();
            for id in &ids {
                let e = at_depth(&format!("http://h{}.test/p{}", id % 3, id), 0);
                if f.enqueue(e.clone()).is_admitted() {
                    admitted.push(e.url);
                }
            }
            let dequeued: Vec<_> = std::iter::from_fn(|| f.dequeue()).map(|e| e.url).collect();
            let unique: HashSet<_> = dequeued.iter().collect();
            prop_assert_eq!(unique.len(), dequeued.len());
            prop_assert_eq!(dequeued, admitted);
        }

        #[test]
        fn host_counter_never_exceeds_budget(
            ids in prop::collection::vec(0u16..500, 0..300),
            budget in 1usize..20,
        ) {
            let f = Frontier::new(limits(100, budget, 100));
            for id in &ids {
                f.enqueue(at_depth(&format!("http://h{}.test/p{}", id % 4, id), 0));
            }
            for h in 0..4 {
                let host = format!("h{}.test", h);
                prop_assert!(f.host_count(&host) <= budget);
            }
        }
    }
}
