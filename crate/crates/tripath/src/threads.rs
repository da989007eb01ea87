use std::sync::Mutex;

use tripath_core::exec::{Executor, Partial};

/// Spreads shards over `threads` scoped OS threads. Results come back in
/// shard order, so the reduced gradient does not depend on the thread count.
#[derive(Clone, Copy, Debug)]
pub struct Threaded {
    pub threads: usize,
}

impl Executor for Threaded {
    fn run(&self, tasks: usize, job: &(dyn Fn(usize) -> Partial + Sync)) -> Vec<Partial> {
        let workers = self.threads.clamp(1, tasks.max(1));
        if workers == 1 {
            return (0..tasks).map(job).collect();
        }
        let slots: Vec<Mutex<Option<Partial>>> = (0..tasks).map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for w in 0..workers {
                let slots = &slots;
                s.spawn(move || {
                    for i in (w..tasks).step_by(workers) {
                        *slots[i].lock().unwrap() = Some(job(i));
                    }
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().unwrap().expect("every shard ran"))
            .collect()
    }
}
