use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

/// Maps `f` over `items` on a small worker pool; results come back in input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(usize, &T) -> R + Sync) -> Vec<R> {
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(items.len()).max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                slots.lock().expect("pool poisoned")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("pool poisoned").into_iter().map(|r| r.expect("every slot filled")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_input_order() {
        let xs: Vec<u64> = (0..37).collect();
        assert_eq!(par_map(&xs, |i, &x| (i as u64, x * x)), xs.iter().map(|&x| (x, x * x)).collect::<Vec<_>>());
        assert!(par_map(&[] as &[u8], |_, _| 0).is_empty());
    }
}
