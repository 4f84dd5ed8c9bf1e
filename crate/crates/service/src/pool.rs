//! Render worker pool shared by batch jobs and previews.
//!
//! Tasks wait in two queues. Idle workers always drain the preview queue
//! first, so a preview overtakes every queued (not yet running) batch frame.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;

type Task = Box<dyn FnOnce() + Send + 'static>;

#[derive(Default)]
struct Queues {
    preview: VecDeque<Task>,
    batch: VecDeque<Task>,
    shutdown: bool,
}

struct Shared {
    queues: Mutex<Queues>,
    ready: Condvar,
}

pub struct RenderPool {
    shared: Arc<Shared>,
    workers: Vec<JoinHandle<()>>,
}

impl RenderPool {
    pub fn new(workers: usize) -> Self {
        let shared = Arc::new(Shared {
            queues: Mutex::new(Queues::default()),
            ready: Condvar::new(),
        });
        let workers = (0..workers.max(1))
            .map(|i| {
                let shared = Arc::clone(&shared);
                std::thread::Builder::new()
                    .name(format!("render-{i}"))
                    .spawn(move || worker_loop(&shared))
                    .expect("spawn render worker")
            })
            .collect();
        Self { shared, workers }
    }

    pub fn worker_count(&self) -> usize {
        self.workers.len()
    }

    pub fn submit_preview(&self, task: impl FnOnce() + Send + 'static) {
        self.push(|q| q.preview.push_back(Box::new(task)));
    }

    pub fn submit_batch(&self, task: impl FnOnce() + Send + 'static) {
        self.push(|q| q.batch.push_back(Box::new(task)));
    }

    /// Queued batch tasks not yet picked up by a worker.
    pub fn queued_batch(&self) -> usize {
        self.shared.queues.lock().unwrap().batch.len()
    }

    fn push(&self, f: impl FnOnce(&mut Queues)) {
        f(&mut self.shared.queues.lock().unwrap());
        self.shared.ready.notify_one();
    }
}

fn worker_loop(shared: &Shared) {
    loop {
        let task = {
            let mut q = shared.queues.lock().unwrap();
            loop {
                if let Some(t) = q.preview.pop_front().or_else(|| q.batch.pop_front()) {
                    break t;
                }
                if q.shutdown {
                    return;
                }
                q = shared.ready.wait(q).unwrap();
            }
        };
        // A panicking render must not take the worker down with it.
        let _ = std::panic::catch_unwind(std::panic::AssertUnwindSafe(task));
    }
}

impl Drop for RenderPool {
    fn drop(&mut self) {
        self.shared.queues.lock().unwrap().shutdown = true;
        self.shared.ready.notify_all();
        // Tasks may hold the last reference to the pool's owner, in which case
        // this runs on a worker. That worker exits on its own once it returns.
        let me = std::thread::current().id();
        for w in self.workers.drain(..) {
            if w.thread().id() != me {
                let _ = w.join();
            }
        }
    }
}
