//! Bounded worker pool with deterministic, slot-ordered result merging.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Apply `f` to every item on up to `workers` threads. Results come back
/// in input order no matter which worker finished first, so callers see
/// identical output for any worker count.
pub fn map_indexed<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    if workers <= 1 || items.len() <= 1 {
        return items.iter().enumerate().map(|(i, item)| f(i, item)).collect();
    }

    let cursor = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..workers.min(items.len()) {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let result = f(i, &items[i]);
                slots.lock().expect("slot lock").insert_result(i, result);
            });
        }
    });

    slots
        .into_inner()
        .expect("slot lock")
        .into_iter()
        .map(|slot| slot.expect("every slot filled"))
        .collect()
}

trait SlotInsert<R> {
    fn insert_result(&mut self, index: usize, value: R);
}

impl<R> SlotInsert<R> for Vec<Option<R>> {
    fn insert_result(&mut self, index: usize, value: R) {
        self[index] = Some(value);
    }
}
