//! Two-space heap with a bump allocator and a recursive mark-and-copy
//! collector.
//!
//! Each space has a side bitmap with one bit per word, set at the value
//! address of every object allocated (or copied) into it. Root words are only
//! treated as pointers when they hit a set bit, which makes root scanning
//! exact even for stale frame words.

use crate::failure::Failure;
use crate::layout::*;
use core::ptr;

/// Default size of one space in bytes.
pub const DEFAULT_SPACE_BYTES: usize = 1 << 20;

/// A contiguous, word-aligned region scanned word-by-word for roots.
#[derive(Debug, Clone, Copy)]
pub struct RootRange {
    pub start: *mut u64,
    pub end: *mut u64,
}

impl RootRange {
    pub fn new(start: *mut u64, end: *mut u64) -> Self {
        RootRange { start, end }
    }

    /// # Safety
    /// The slice must stay alive and unaliased for as long as the range is used.
    pub unsafe fn of_slice(words: &mut [u64]) -> Self {
        let range = words.as_mut_ptr_range();
        RootRange { start: range.start, end: range.end }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GcReport {
    pub bytes_copied: usize,
    pub objects_copied: usize,
    /// Words still pointing into the abandoned space after the final sweep.
    /// Only computed when verification is enabled.
    pub stale_pointers: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HeapStats {
    pub collections: usize,
    pub allocated_bytes: usize,
    pub copied_bytes: usize,
    pub stale_pointers: usize,
    pub last: GcReport,
}

pub struct Heap {
    base: *mut u64,
    space_words: usize,
    bitmap_words: usize,
    active: usize,
    cursor: usize,
    /// Run a full sweep for stale old-space pointers after every collection.
    pub verify: bool,
    pub stats: HeapStats,
}

impl Heap {
    /// Words of backing memory needed for spaces of `space_words` words.
    pub fn storage_words(space_words: usize) -> usize {
        2 * space_words + 2 * space_words.div_ceil(64)
    }

    /// # Safety
    /// `base` must point to `storage_words(space_words)` writable words that
    /// outlive the heap.
    pub unsafe fn from_raw(base: *mut u64, space_words: usize) -> Heap {
        let heap = Heap {
            base,
            space_words,
            bitmap_words: space_words.div_ceil(64),
            active: 0,
            cursor: 0,
            verify: cfg!(debug_assertions),
            stats: HeapStats::default(),
        };
        ptr::write_bytes(heap.bitmap(0), 0, heap.bitmap_words);
        ptr::write_bytes(heap.bitmap(1), 0, heap.bitmap_words);
        heap
    }

    fn space(&self, idx: usize) -> *mut u64 {
        unsafe { self.base.add(idx * self.space_words) }
    }

    fn bitmap(&self, idx: usize) -> *mut u64 {
        unsafe { self.base.add(2 * self.space_words + idx * self.bitmap_words) }
    }

    pub fn space_bytes(&self) -> usize {
        self.space_words * WORD
    }

    /// Bytes in use in the active space.
    pub fn used_bytes(&self) -> usize {
        self.cursor * WORD
    }

    pub fn active_range(&self) -> (usize, usize) {
        let start = self.space(self.active) as usize;
        (start, start + self.space_words * WORD)
    }

    unsafe fn bit(&self, space: usize, word: usize) -> bool {
        let cell = *self.bitmap(space).add(word / 64);
        cell & (1 << (word % 64)) != 0
    }

    unsafe fn set_bit(&self, space: usize, word: usize) {
        let cell = self.bitmap(space).add(word / 64);
        *cell |= 1 << (word % 64);
    }

    /// Whether `w` is the value address of an object in space `idx`.
    unsafe fn is_object_in(&self, idx: usize, w: u64) -> bool {
        if w == 0 || w % WORD as u64 != 0 {
            return false;
        }
        let start = self.space(idx) as u64;
        let end = start + (self.space_words * WORD) as u64;
        if w <= start || w >= end {
            return false;
        }
        self.bit(idx, ((w - start) / WORD as u64) as usize)
    }

    /// Whether `w` is a live object address in the active space.
    pub fn is_heap_value(&self, w: u64) -> bool {
        unsafe { self.is_object_in(self.active, w) }
    }

    /// Allocates an object and returns its value address. The buffer is
    /// zero-filled; the tag word of an S-expression is zero as well.
    ///
    /// # Safety
    /// Every live value must be reachable from `roots`, and root ranges must
    /// be valid for reads and writes.
    pub unsafe fn alloc(&mut self, tag: ObjTag, len: usize, roots: &[RootRange]) -> Result<*mut u64, Failure> {
        let total = block_words(tag, len);
        if total > self.space_words {
            return Err(Failure::OutOfMemory);
        }
        if self.cursor + total > self.space_words {
            self.collect(roots);
            if self.cursor + total > self.space_words {
                return Err(Failure::OutOfMemory);
            }
        }
        let block = self.space(self.active).add(self.cursor);
        ptr::write_bytes(block, 0, total);
        let value = block.add(prefix_words(tag));
        *value.sub(1) = make_header(tag, len);
        self.set_bit(self.active, self.cursor + prefix_words(tag));
        self.cursor += total;
        self.stats.allocated_bytes += total * WORD;
        Ok(value)
    }

    /// Copies every object reachable from `roots` into the idle space, then
    /// makes it the active one.
    ///
    /// # Safety
    /// Root ranges must be valid for reads and writes, and the heap must not
    /// be corrupted.
    pub unsafe fn collect(&mut self, roots: &[RootRange]) -> GcReport {
        let from = self.active;
        let to = 1 - from;
        ptr::write_bytes(self.bitmap(to), 0, self.bitmap_words);
        let mut copy = Copier { heap: self, from, to, cursor: 0, report: GcReport::default() };

        for range in roots {
            let mut slot = range.start;
            while slot < range.end {
                *slot = copy.evacuate(*slot);
                slot = slot.add(1);
            }
        }
        copy.fix_to_space();
        let Copier { cursor, mut report, .. } = copy;

        if self.verify {
            report.stale_pointers = self.count_stale(from, to, cursor, roots);
        }
        ptr::write_bytes(self.bitmap(from), 0, self.bitmap_words);
        self.active = to;
        self.cursor = cursor;
        self.stats.collections += 1;
        self.stats.copied_bytes += report.bytes_copied;
        self.stats.stale_pointers += report.stale_pointers;
        self.stats.last = report;
        report
    }

    unsafe fn count_stale(&self, from: usize, to: usize, to_cursor: usize, roots: &[RootRange]) -> usize {
        let old_start = self.space(from) as u64;
        let old_end = old_start + (self.space_words * WORD) as u64;
        let stale = |w: u64| w & 1 == 0 && w >= old_start && w < old_end;
        let mut count = 0;
        for range in roots {
            let mut slot = range.start;
            while slot < range.end {
                count += stale(*slot) as usize;
                slot = slot.add(1);
            }
        }
        for_each_object(self, to, to_cursor, |value, tag, len| {
            if tag != ObjTag::String {
                for i in first_scanned_field(tag)..len {
                    count += stale(*value.add(i)) as usize;
                }
            }
        });
        count
    }

    /// Calls `f(value, tag, len)` for every object in the active space, in
    /// address order.
    ///
    /// # Safety
    /// The heap must not be corrupted.
    pub unsafe fn objects(&self, f: impl FnMut(*mut u64, ObjTag, usize)) {
        for_each_object(self, self.active, self.cursor, f)
    }
}

unsafe fn for_each_object(heap: &Heap, space: usize, limit: usize, mut f: impl FnMut(*mut u64, ObjTag, usize)) {
    let start = heap.space(space);
    let mut word = 0;
    while word < limit {
        if heap.bit(space, word) {
            let value = start.add(word);
            let header = *value.sub(1);
            let tag = ObjTag::from_bits(header).expect("corrupted object header");
            let len = header_len(header);
            f(value, tag, len);
            word += payload_words(tag, len);
        } else {
            word += 1;
        }
    }
}

struct Copier<'h> {
    heap: &'h Heap,
    from: usize,
    to: usize,
    cursor: usize,
    report: GcReport,
}

impl Copier<'_> {
    /// Copies the object `w` refers to (if it is a from-space object that was
    /// not copied yet), leaves a forwarding pointer in its header and
    /// recursively copies its children. Returns the new address.
    unsafe fn evacuate(&mut self, w: u64) -> u64 {
        if !self.heap.is_object_in(self.from, w) {
            return w;
        }
        let value = w as *mut u64;
        let header = *value.sub(1);
        if header & TAG_MASK == 0 {
            return header;
        }
        let tag = match ObjTag::from_bits(header) {
            Some(tag) => tag,
            None => panic!("corrupted object header {header:#x} at {w:#x}"),
        };
        let len = header_len(header);
        let prefix = prefix_words(tag);
        let total = block_words(tag, len);
        let dst = self.heap.space(self.to).add(self.cursor);
        ptr::copy_nonoverlapping(value.sub(prefix), dst, total);
        let new_value = dst.add(prefix);
        self.heap.set_bit(self.to, self.cursor + prefix);
        self.cursor += total;
        self.report.objects_copied += 1;
        self.report.bytes_copied += total * WORD;
        *value.sub(1) = new_value as u64;

        if tag != ObjTag::String {
            for i in first_scanned_field(tag)..len {
                self.evacuate(*new_value.add(i));
            }
        }
        new_value as u64
    }

    /// Rewrites every field of the copied objects that still refers to the
    /// from-space with the forwarding address stored there.
    unsafe fn fix_to_space(&mut self) {
        let (heap, from) = (self.heap, self.from);
        for_each_object(heap, self.to, self.cursor, |value, tag, len| {
            if tag == ObjTag::String {
                return;
            }
            for i in first_scanned_field(tag)..len {
                let field = value.add(i);
                if heap.is_object_in(from, *field) {
                    *field = *(*field as *const u64).sub(1);
                }
            }
        });
    }
}

#[cfg(not(native_runtime))]
pub use owned::OwnedHeap;

#[cfg(not(native_runtime))]
mod owned {
    use super::Heap;
    use crate::layout::WORD;

    /// A heap backed by a vector, for use outside generated binaries.
    pub struct OwnedHeap {
        _storage: Vec<u64>,
        heap: Heap,
    }

    impl OwnedHeap {
        pub fn new(space_bytes: usize) -> OwnedHeap {
            let words = space_bytes / WORD;
            let mut storage = vec![0u64; Heap::storage_words(words)];
            let heap = unsafe { Heap::from_raw(storage.as_mut_ptr(), words) };
            OwnedHeap { _storage: storage, heap }
        }
    }

    impl std::ops::Deref for OwnedHeap {
        type Target = Heap;
        fn deref(&self) -> &Heap {
            &self.heap
        }
    }

    impl std::ops::DerefMut for OwnedHeap {
        fn deref_mut(&mut self) -> &mut Heap {
            &mut self.heap
        }
    }
}
