use std::sync::{Arc, Condvar, Mutex, RwLock};

use super::view::HaloPattern;
use crate::error::{Error, Result};

/// Sum of small per-participant vectors, the one collective the Krylov
/// solvers need.
pub trait Reduce {
    /// Replaces `v` with the elementwise sum over all participants.
    fn sum(&self, v: &mut [f64]) -> Result<()>;

    fn sum_scalar(&self, x: f64) -> Result<f64> {
        let mut v = [x];
        self.sum(&mut v)?;
        Ok(v[0])
    }
}

/// No-op reduction for computations that are not distributed, or that are
/// replicated identically on every participant.
#[derive(Clone, Copy, Debug, Default)]
pub struct Serial;

impl Reduce for Serial {
    fn sum(&self, _v: &mut [f64]) -> Result<()> {
        Ok(())
    }
}

struct BarrierState {
    arrived: usize,
    generation: u64,
    departed: bool,
}

struct Shared {
    size: usize,
    state: Mutex<BarrierState>,
    cvar: Condvar,
    slots: Vec<RwLock<Vec<f64>>>,
}

/// One participant's handle on a group of subdomain workers sharing a
/// process.
///
/// Collectives are synchronization points: every participant must call the
/// same sequence of collectives. Reductions sum contributions in ascending
/// participant order, so all participants receive bitwise-identical results
/// and repeated runs reproduce them exactly. A participant that exits (or
/// panics) while others wait in a collective turns their wait into
/// [`Error::Communicator`] instead of a deadlock.
pub struct Communicator {
    rank: usize,
    shared: Arc<Shared>,
}

impl Communicator {
    /// Runs `work` on `size` worker threads, one per subdomain, and returns
    /// the per-rank results in rank order.
    ///
    /// Each worker executes inside its own rayon pool of
    /// `threads_per_worker` threads, which bounds intra-subdomain
    /// parallelism without affecting results.
    pub fn run<R, F>(size: usize, threads_per_worker: usize, work: F) -> Result<Vec<R>>
    where
        R: Send,
        F: Fn(&Communicator) -> R + Sync,
    {
        if size == 0 {
            return Err(Error::Communicator("participant count must be positive".into()));
        }
        let shared = Arc::new(Shared {
            size,
            state: Mutex::new(BarrierState {
                arrived: 0,
                generation: 0,
                departed: false,
            }),
            cvar: Condvar::new(),
            slots: (0..size).map(|_| RwLock::new(Vec::new())).collect(),
        });
        let threads = threads_per_worker.max(1);
        let work = &work;
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..size)
                .map(|rank| {
                    let shared = Arc::clone(&shared);
                    std::thread::Builder::new()
                        .name(format!("subdomain-{rank}"))
                        .spawn_scoped(scope, move || -> Result<R> {
                            let pool = rayon::ThreadPoolBuilder::new()
                                .num_threads(threads)
                                .build()
                                .map_err(|e| Error::Communicator(e.to_string()))?;
                            let comm = Communicator { rank, shared };
                            Ok(pool.install(|| work(&comm)))
                        })
                        .map_err(|e| Error::Communicator(e.to_string()))
                })
                .collect::<Result<_>>()?;
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .map_err(|_| Error::Communicator("subdomain worker panicked".into()))?
                })
                .collect()
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.shared.size
    }

    pub fn barrier(&self) -> Result<()> {
        let shared = &self.shared;
        let mut st = shared.state.lock().unwrap();
        if st.departed {
            return Err(Error::Communicator("a participant left the group".into()));
        }
        let gen = st.generation;
        st.arrived += 1;
        if st.arrived == shared.size {
            st.arrived = 0;
            st.generation += 1;
            shared.cvar.notify_all();
            return Ok(());
        }
        loop {
            st = shared.cvar.wait(st).unwrap();
            if st.generation != gen {
                return Ok(());
            }
            if st.departed {
                return Err(Error::Communicator(
                    "a participant left the group during a collective".into(),
                ));
            }
        }
    }

    fn publish(&self, data: &[f64]) {
        let mut slot = self.shared.slots[self.rank].write().unwrap();
        slot.clear();
        slot.extend_from_slice(data);
    }

    /// Elementwise sum over all participants.
    pub fn allreduce_sum(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut v = x.to_vec();
        self.allreduce_sum_in_place(&mut v)?;
        Ok(v)
    }

    pub fn allreduce_sum_in_place(&self, x: &mut [f64]) -> Result<()> {
        if self.size() == 1 {
            return Ok(());
        }
        self.publish(x);
        self.barrier()?;
        let mut mismatch = None;
        {
            for (p, slot) in self.shared.slots.iter().enumerate() {
                let s = slot.read().unwrap();
                if s.len() != x.len() {
                    mismatch = Some((p, s.len()));
                    break;
                }
            }
            if mismatch.is_none() {
                let first = self.shared.slots[0].read().unwrap();
                x.copy_from_slice(&first);
                drop(first);
                for slot in &self.shared.slots[1..] {
                    let s = slot.read().unwrap();
                    x.iter_mut().zip(s.iter()).for_each(|(a, b)| *a += b);
                }
            }
        }
        self.barrier()?;
        match mismatch {
            None => Ok(()),
            Some((p, len)) => Err(Error::Communicator(format!(
                "allreduce length mismatch: participant {p} sent {len} values, expected {}",
                x.len()
            ))),
        }
    }

    /// Every participant's `local` slice, concatenated in rank order.
    pub fn allgather(&self, local: &[f64]) -> Result<Vec<f64>> {
        if self.size() == 1 {
            return Ok(local.to_vec());
        }
        self.publish(local);
        self.barrier()?;
        let mut out = Vec::new();
        for slot in &self.shared.slots {
            out.extend_from_slice(&slot.read().unwrap());
        }
        self.barrier()?;
        Ok(out)
    }

    /// Fetches the current owner values of this participant's ghost entries.
    ///
    /// `local` is this participant's owned slice of the distributed vector
    /// laid out by `pattern`'s column partition; the result follows the
    /// order of `pattern.ghosts()`.
    pub fn halo_exchange(&self, local: &[f64], pattern: &HaloPattern) -> Result<Vec<f64>> {
        let offsets = pattern.col_partition().offsets();
        if local.len() != offsets[self.rank + 1] - offsets[self.rank] {
            return Err(Error::dim(format!(
                "halo exchange: rank {} passed {} values, owns {}",
                self.rank,
                local.len(),
                offsets[self.rank + 1] - offsets[self.rank]
            )));
        }
        if self.size() == 1 {
            debug_assert!(pattern.ghosts().is_empty());
            return Ok(Vec::new());
        }
        self.publish(local);
        self.barrier()?;
        let mut ghosts = Vec::with_capacity(pattern.ghosts().len());
        let mut err = None;
        for (owner, globals) in pattern.neighbors() {
            let slot = self.shared.slots[*owner].read().unwrap();
            for &g in globals {
                match slot.get(g - offsets[*owner]) {
                    Some(&v) => ghosts.push(v),
                    None => {
                        err = Some(Error::Communicator(format!(
                            "participant {owner} published {} values, ghost {g} is out of range",
                            slot.len()
                        )));
                        break;
                    }
                }
            }
        }
        self.barrier()?;
        match err {
            None => Ok(ghosts),
            Some(e) => Err(e),
        }
    }
}

impl Reduce for Communicator {
    fn sum(&self, v: &mut [f64]) -> Result<()> {
        self.allreduce_sum_in_place(v)
    }
}

impl Drop for Communicator {
    fn drop(&mut self) {
        if let Ok(mut st) = self.shared.state.lock() {
            st.departed = true;
            self.shared.cvar.notify_all();
        }
    }
}
