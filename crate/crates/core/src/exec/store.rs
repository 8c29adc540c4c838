//! Shared parameter stores.
//!
//! Values are kept as `f64` bit patterns in `AtomicU64` cells, so every
//! single-coordinate load or store is atomic and no read can be torn.

use std::hint;
use std::sync::atomic::{fence, AtomicU64, Ordering};
use std::sync::{Mutex, MutexGuard, RwLock, RwLockReadGuard};
use std::thread;

use crate::langevin::step_coord;

/// Spins briefly, then yields the core; workers may outnumber cores.
#[derive(Default)]
pub(crate) struct Backoff(u32);

impl Backoff {
    pub(crate) fn snooze(&mut self) {
        if self.0 < 6 {
            for _ in 0..(1 << self.0) {
                hint::spin_loop();
            }
            self.0 += 1;
        } else {
            thread::yield_now();
        }
    }
}

fn cells(x0: &[f64]) -> Vec<AtomicU64> {
    x0.iter().map(|v| AtomicU64::new(v.to_bits())).collect()
}

/// How a consistent snapshot is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SnapshotMode {
    /// Versioned double read, retried when a writer interleaves.
    #[default]
    Seqlock,
    /// Readers hold a shared lock that writers take exclusively.
    Blocking,
}

/// Whole-vector store with consistent snapshots.
///
/// The sequence counter is odd while a write is in progress; the version is
/// half the counter, i.e. the number of applied updates.
pub(crate) struct SnapshotStore {
    seq: AtomicU64,
    cells: Vec<AtomicU64>,
    writer: Mutex<()>,
    gate: Option<RwLock<()>>,
}

/// Exclusive write access; the version cannot move while this is held.
pub(crate) struct WriteGuard<'a> {
    store: &'a SnapshotStore,
    _lock: MutexGuard<'a, ()>,
    _gate: Option<std::sync::RwLockWriteGuard<'a, ()>>,
}

impl SnapshotStore {
    pub(crate) fn new(x0: &[f64], mode: SnapshotMode) -> Self {
        Self {
            seq: AtomicU64::new(0),
            cells: cells(x0),
            writer: Mutex::new(()),
            gate: (mode == SnapshotMode::Blocking).then(|| RwLock::new(())),
        }
    }

    /// Copies a consistent vector into `out` and returns its version.
    pub(crate) fn snapshot(&self, out: &mut [f64]) -> u64 {
        if let Some(gate) = &self.gate {
            let _g: RwLockReadGuard<'_, ()> = gate.read().unwrap_or_else(|e| e.into_inner());
            return self.read_unchecked(out);
        }
        let mut backoff = Backoff::default();
        loop {
            let s1 = self.seq.load(Ordering::Acquire);
            if s1 & 1 == 0 {
                for (o, c) in out.iter_mut().zip(&self.cells) {
                    *o = f64::from_bits(c.load(Ordering::Relaxed));
                }
                fence(Ordering::Acquire);
                if self.seq.load(Ordering::Relaxed) == s1 {
                    return s1 / 2;
                }
            }
            backoff.snooze();
        }
    }

    fn read_unchecked(&self, out: &mut [f64]) -> u64 {
        for (o, c) in out.iter_mut().zip(&self.cells) {
            *o = f64::from_bits(c.load(Ordering::Relaxed));
        }
        self.seq.load(Ordering::Acquire) / 2
    }

    pub(crate) fn lock(&self) -> WriteGuard<'_> {
        let lock = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let gate = self
            .gate
            .as_ref()
            .map(|g| g.write().unwrap_or_else(|e| e.into_inner()));
        WriteGuard {
            store: self,
            _lock: lock,
            _gate: gate,
        }
    }

    #[cfg(test)]
    pub(crate) fn into_vec(self) -> Vec<f64> {
        self.cells.into_iter().map(|c| f64::from_bits(c.into_inner())).collect()
    }
}

impl WriteGuard<'_> {
    pub(crate) fn version(&self) -> u64 {
        self.store.seq.load(Ordering::Relaxed) / 2
    }

    /// Current values; exact because no other writer can run.
    pub(crate) fn read(&self, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.store.cells) {
            *o = f64::from_bits(c.load(Ordering::Relaxed));
        }
    }

    /// Applies one Langevin update and returns the new version.
    pub(crate) fn apply(&mut self, g: &[f64], gamma: f64, scale: f64, z: &[f64]) -> u64 {
        let s = self.store.seq.load(Ordering::Relaxed);
        self.store.seq.store(s + 1, Ordering::Relaxed);
        fence(Ordering::Release);
        for (i, c) in self.store.cells.iter().enumerate() {
            let x = f64::from_bits(c.load(Ordering::Relaxed));
            c.store(step_coord(x, g[i], gamma, scale, z[i]).to_bits(), Ordering::Relaxed);
        }
        self.store.seq.store(s + 2, Ordering::Release);
        (s + 2) / 2
    }
}

/// Lock-free store with independent per-coordinate updates and write counts.
pub(crate) struct CoordinateStore {
    cells: Vec<AtomicU64>,
    writes: Vec<AtomicU64>,
    tickets: AtomicU64,
}

impl CoordinateStore {
    pub(crate) fn new(x0: &[f64]) -> Self {
        Self {
            cells: cells(x0),
            writes: x0.iter().map(|_| AtomicU64::new(0)).collect(),
            tickets: AtomicU64::new(0),
        }
    }

    /// Reads every coordinate once; `counts[i]` is the number of completed
    /// writes to coordinate `i` observed before its value was loaded.
    pub(crate) fn read(&self, out: &mut [f64], counts: &mut [u64]) {
        for i in 0..out.len() {
            counts[i] = self.writes[i].load(Ordering::Acquire);
            out[i] = f64::from_bits(self.cells[i].load(Ordering::Acquire));
        }
    }

    /// Claims the next update position.
    pub(crate) fn ticket(&self) -> u64 {
        self.tickets.fetch_add(1, Ordering::AcqRel)
    }

    /// Atomically updates one coordinate and returns the value written.
    pub(crate) fn update(&self, i: usize, g: f64, gamma: f64, scale: f64, z: f64) -> f64 {
        let prev = self.cells[i]
            .fetch_update(Ordering::AcqRel, Ordering::Acquire, |bits| {
                Some(step_coord(f64::from_bits(bits), g, gamma, scale, z).to_bits())
            })
            .unwrap_or_else(|b| b);
        self.writes[i].fetch_add(1, Ordering::Release);
        step_coord(f64::from_bits(prev), g, gamma, scale, z)
    }

    pub(crate) fn into_vec(self) -> Vec<f64> {
        self.cells.into_iter().map(|c| f64::from_bits(c.into_inner())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_versions_count_updates() {
        let s = SnapshotStore::new(&[1.0, 2.0], SnapshotMode::Seqlock);
        let mut out = [0.0; 2];
        assert_eq!(s.snapshot(&mut out), 0);
        assert_eq!(out, [1.0, 2.0]);
        {
            let mut w = s.lock();
            assert_eq!(w.apply(&[1.0, 1.0], 0.5, 0.0, &[0.0, 0.0]), 1);
            assert_eq!(w.version(), 1);
        }
        assert_eq!(s.snapshot(&mut out), 1);
        assert_eq!(out, [0.5, 1.5]);
    }

    #[test]
    fn blocking_mode_reads_the_same_values() {
        let s = SnapshotStore::new(&[3.0], SnapshotMode::Blocking);
        s.lock().apply(&[2.0], 1.0, 1.0, &[0.5]);
        let mut out = [0.0];
        assert_eq!(s.snapshot(&mut out), 1);
        assert_eq!(out, [1.5]);
    }

    #[test]
    fn concurrent_snapshots_are_never_mixed() {
        // every write keeps all coordinates equal
        let d = 32;
        let s = SnapshotStore::new(&vec![0.0; d], SnapshotMode::Seqlock);
        let ones = vec![-1.0; d];
        let zeros = vec![0.0; d];
        thread::scope(|sc| {
            sc.spawn(|| {
                for _ in 0..2000 {
                    s.lock().apply(&ones, 1.0, 0.0, &zeros);
                }
            });
            for _ in 0..2 {
                sc.spawn(|| {
                    let mut out = vec![0.0; d];
                    for _ in 0..2000 {
                        let v = s.snapshot(&mut out);
                        assert!(out.iter().all(|x| *x == v as f64));
                    }
                });
            }
        });
        assert_eq!(s.into_vec(), vec![2000.0; d]);
    }

    #[test]
    fn coordinate_updates_are_never_lost() {
        let s = CoordinateStore::new(&[0.0, 0.0]);
        thread::scope(|sc| {
            for _ in 0..4 {
                sc.spawn(|| {
                    for _ in 0..1000 {
                        s.ticket();
                        s.update(0, -1.0, 1.0, 0.0, 0.0);
                        s.update(1, -2.0, 1.0, 0.0, 0.0);
                    }
                });
            }
        });
        let mut out = [0.0; 2];
        let mut counts = [0; 2];
        s.read(&mut out, &mut counts);
        assert_eq!(counts, [4000, 4000]);
        assert_eq!(s.ticket(), 4000);
        assert_eq!(s.into_vec(), vec![4000.0, 8000.0]);
    }
}
