//! Order-independent parallel passes: exclusive prefix scan, stream
//! compaction and counter-driven scatter.
//!
//! Every function here is one complete pass. Rayon joins all of a pass's
//! tasks before returning, so a following pass observes every write of the
//! previous one.

use std::sync::atomic::{AtomicU32, Ordering};

use num_traits::{PrimInt, Unsigned};
use rayon::prelude::*;

use crate::error::{Error, Result};

const MIN_SCAN_CHUNK: usize = 1 << 14;

fn scan_chunk_len(len: usize) -> usize {
    let workers = rayon::current_num_threads().max(1);
    (len / (workers * 4)).max(MIN_SCAN_CHUNK)
}

/// Exclusive prefix sum of `f(item)` over `items`, with the grand total
/// appended as a final element (`len + 1` entries in total).
pub fn exclusive_scan_map<U, T, F>(items: &[U], f: F) -> Result<Vec<T>>
where
    U: Sync,
    T: PrimInt + Unsigned + Send + Sync,
    F: Fn(&U) -> T + Sync,
{
    let chunk = scan_chunk_len(items.len());
    let chunk_sums = items
        .par_chunks(chunk)
        .map(|c| c.iter().try_fold(T::zero(), |acc, x| acc.checked_add(&f(x))))
        .collect::<Option<Vec<T>>>()
        .ok_or(Error::ScanOverflow)?;

    let mut chunk_offsets = Vec::with_capacity(chunk_sums.len());
    let mut total = T::zero();
    for s in chunk_sums {
        chunk_offsets.push(total);
        total = total.checked_add(&s).ok_or(Error::ScanOverflow)?;
    }

    let mut out = vec![T::zero(); items.len() + 1];
    out[..items.len()]
        .par_chunks_mut(chunk)
        .zip(items.par_chunks(chunk))
        .zip(chunk_offsets.par_iter())
        .for_each(|((dst, src), &offset)| {
            let mut acc = offset;
            for (d, x) in dst.iter_mut().zip(src) {
                *d = acc;
                // cannot overflow: bounded by the checked total
                acc = acc + f(x);
            }
        });
    out[items.len()] = total;
    Ok(out)
}

/// Exclusive prefix sum with the total appended (`len + 1` entries).
pub fn exclusive_scan_with_total<T>(values: &[T]) -> Result<Vec<T>>
where
    T: PrimInt + Unsigned + Send + Sync,
{
    exclusive_scan_map(values, |&v| v)
}

/// Exclusive prefix sum: `out[0] = 0`, `out[t] = values[0] + .. + values[t-1]`.
pub fn exclusive_scan<T>(values: &[T]) -> Result<Vec<T>>
where
    T: PrimInt + Unsigned + Send + Sync,
{
    let mut out = exclusive_scan_with_total(values)?;
    out.pop();
    Ok(out)
}

/// Keeps the items satisfying `keep`, in their original relative order.
pub fn compact<T, F>(items: &[T], keep: F) -> Vec<T>
where
    T: Clone + Send + Sync,
    F: Fn(&T) -> bool + Sync,
{
    items.par_iter().filter(|x| keep(x)).cloned().collect()
}

/// Atomic per-slot counters shared by the tasks of one pass.
#[derive(Debug)]
pub struct CounterArray {
    slots: Vec<AtomicU32>,
}

impl CounterArray {
    pub fn zeroed(len: usize) -> Self {
        CounterArray {
            slots: (0..len).map(|_| AtomicU32::new(0)).collect(),
        }
    }

    /// Adds one to `slot` and returns the previous value.
    #[inline]
    pub fn increment(&self, slot: usize) -> u32 {
        self.slots[slot].fetch_add(1, Ordering::Relaxed)
    }

    pub fn get(&self, slot: usize) -> u32 {
        self.slots[slot].load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn into_values(self) -> Vec<u32> {
        self.slots.into_iter().map(AtomicU32::into_inner).collect()
    }
}

struct SharedSlice<T> {
    ptr: *mut T,
    len: usize,
}

// Writers only ever touch distinct indices (see scatter_with_counters).
unsafe impl<T: Send> Send for SharedSlice<T> {}
unsafe impl<T: Send> Sync for SharedSlice<T> {}

impl<T> SharedSlice<T> {
    /// # Safety
    /// No two concurrent calls may use the same `index`.
    unsafe fn write(&self, index: usize, value: T) {
        assert!(index < self.len);
        self.ptr.add(index).write(value);
    }
}

/// Runs `task_count` independent tasks; task `t` may emit one value for an
/// interval `i`, which is stored at the next free slot of
/// `out[offsets[i]..offsets[i + 1]]` as handed out by `counters`.
///
/// The order of values inside an interval depends on scheduling. Emitting
/// more values into an interval than it has room for is a counting bug in
/// the caller and is reported as [`Error::ScatterOverflow`].
pub fn scatter_with_counters<T, F>(
    task_count: usize,
    offsets: &[u32],
    counters: &CounterArray,
    out: &mut [T],
    emit: F,
) -> Result<()>
where
    T: Send + Sync,
    F: Fn(usize) -> Option<(usize, T)> + Sync,
{
    if counters.len() + 1 != offsets.len()
        || offsets.windows(2).any(|w| w[0] > w[1])
        || offsets.last().is_some_and(|&end| end as usize > out.len())
    {
        return Err(Error::ScatterOffsets);
    }
    let target = SharedSlice {
        ptr: out.as_mut_ptr(),
        len: out.len(),
    };
    (0..task_count).into_par_iter().try_for_each(|t| {
        let Some((interval, value)) = emit(t) else {
            return Ok(());
        };
        let start = offsets[interval] as usize;
        let end = offsets[interval + 1] as usize;
        let slot = start + counters.increment(interval) as usize;
        if slot >= end {
            return Err(Error::ScatterOverflow(interval));
        }
        // Intervals are disjoint (offsets are non-decreasing) and the counter
        // hands out each slot of an interval at most once.
        unsafe { target.write(slot, value) };
        Ok(())
    })
}

/// Splits `out` into the consecutive intervals `offsets[t]..offsets[t + 1]`
/// so that each task can fill its own interval.
pub fn split_intervals_mut<'a, T>(mut out: &'a mut [T], offsets: &[u64]) -> Vec<&'a mut [T]> {
    let mut parts = Vec::with_capacity(offsets.len().saturating_sub(1));
    for w in offsets.windows(2) {
        let (head, tail) = out.split_at_mut((w[1] - w[0]) as usize);
        parts.push(head);
        out = tail;
    }
    parts
}
