//! Fixed-size worker pool feeding a single in-order sink.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Mutex};

pub type Job<'a, T, E> = Box<dyn FnOnce() -> Result<T, E> + Send + 'a>;

/// Runs `jobs` on `workers` threads and hands results to `sink` in job
/// order, from the calling thread. The first failing job (by index) aborts
/// the run; jobs not yet started are skipped.
pub fn run_ordered<'a, T: Send, E: Send>(
    jobs: Vec<Job<'a, T, E>>,
    workers: usize,
    mut sink: impl FnMut(usize, T) -> Result<(), E>,
) -> Result<(), E> {
    let total = jobs.len();
    let queue = Mutex::new(jobs.into_iter().enumerate());
    let abort = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, Result<T, E>)>();
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, total.max(1)) {
            let tx = tx.clone();
            let (queue, abort) = (&queue, &abort);
            scope.spawn(move || loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let next = queue.lock().unwrap().next();
                let Some((i, job)) = next else { break };
                let out = job();
                if out.is_err() {
                    abort.store(true, Ordering::Relaxed);
                }
                if tx.send((i, out)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut next = 0;
        let mut failure: Option<(usize, E)> = None;
        for (i, out) in rx {
            match out {
                Ok(v) => {
                    pending.insert(i, v);
                }
                Err(e) => {
                    if failure.as_ref().is_none_or(|(j, _)| i < *j) {
                        failure = Some((i, e));
                    }
                }
            }
            if failure.is_some() {
                continue;
            }
            while let Some(v) = pending.remove(&next) {
                if let Err(e) = sink(next, v) {
                    abort.store(true, Ordering::Relaxed);
                    failure = Some((next, e));
                    break;
                }
                next += 1;
            }
        }
        match failure {
            Some((_, e)) => Err(e),
            None => Ok(()),
        }
    })
}
