//! Randomized collector rounds shared by the test suites.

use crate::heap::{OwnedHeap, RootRange};
use crate::layout::{first_scanned_field, is_fixnum};
use crate::{fix_encode, pack_tag, ObjTag};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::collections::HashMap;

/// Canonical shape of the graph reachable from `roots`: objects are numbered
/// in first-visit order and every field is recorded either as a scalar or as
/// the number of the object it points to. Two graphs are isomorphic exactly
/// when their fingerprints are equal.
#[derive(Debug, PartialEq, Eq)]
pub enum Field {
    Scalar(u64),
    Object(usize),
    Byte(u8),
}

#[derive(Debug, PartialEq, Eq)]
pub struct Node {
    pub tag: u64,
    pub header_tag: ObjTag,
    pub fields: Vec<Field>,
}

pub fn fingerprint(heap: &OwnedHeap, roots: &[u64]) -> (Vec<Field>, Vec<Node>) {
    let mut ids: HashMap<u64, usize> = HashMap::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut stack = Vec::new();
    let mut visit = |w: u64, nodes: &mut Vec<Node>, stack: &mut Vec<u64>| -> Field {
        if is_fixnum(w) {
            return Field::Scalar(w);
        }
        assert!(heap.is_heap_value(w), "field {w:#x} is not a live object");
        let next = ids.len();
        let id = *ids.entry(w).or_insert_with(|| {
            stack.push(w);
            nodes.push(Node { tag: 0, header_tag: ObjTag::Array, fields: Vec::new() });
            next
        });
        Field::Object(id)
    };
    let root_fields: Vec<Field> = roots.iter().map(|&w| visit(w, &mut nodes, &mut stack)).collect();
    let mut done = 0;
    while done < stack.len() {
        let w = stack[done];
        let value = w as *const u64;
        unsafe {
            let header = *value.sub(1);
            let tag = ObjTag::from_bits(header).unwrap();
            let len = (header >> 8) as usize;
            let mut fields = Vec::new();
            if tag == ObjTag::String {
                for i in 0..len {
                    fields.push(Field::Byte(*(value as *const u8).add(i)));
                }
            } else {
                for i in 0..first_scanned_field(tag) {
                    fields.push(Field::Scalar(*value.add(i)));
                }
                for i in first_scanned_field(tag)..len {
                    fields.push(visit(*value.add(i), &mut nodes, &mut stack));
                }
            }
            let sexp_tag = if tag == ObjTag::Sexp { *value.sub(2) } else { 0 };
            nodes[done] = Node { tag: sexp_tag, header_tag: tag, fields };
        }
        done += 1;
    }
    (root_fields, nodes)
}

unsafe fn alloc(heap: &mut OwnedHeap, tag: ObjTag, len: usize, roots: &mut [u64]) -> *mut u64 {
    let range = [RootRange::of_slice(roots)];
    let v = heap.alloc(tag, len, &range).unwrap();
    for i in 0..len {
        *v.add(i) = fix_encode(i as i64);
    }
    v
}

unsafe fn collect(heap: &mut OwnedHeap, roots: &mut [u64]) -> crate::GcReport {
    let range = [RootRange::of_slice(roots)];
    heap.collect(&range)
}

fn cons_tag() -> u64 {
    fix_encode(pack_tag("Cons"))
}

/// Builds a random graph with sharing and cycles interleaved with garbage,
/// then checks that a collection preserves its shape, copies every reachable
/// object exactly once and leaves no old-space pointer behind.
pub fn random_round(seed: u64) -> Result<(), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut heap = OwnedHeap::new(1 << 15);
    heap.verify = true;
    let nroots = rng.gen_range(1..8);
    let mut roots = vec![fix_encode(0); nroots];
    let mut live: Vec<u64> = Vec::new();
    unsafe {
        for _ in 0..rng.gen_range(1..60) {
            let tag = match rng.gen_range(0..4) {
                0 => ObjTag::String,
                1 => ObjTag::Array,
                2 => ObjTag::Sexp,
                _ => ObjTag::Closure,
            };
            let len = rng.gen_range(0..6) + (tag == ObjTag::Closure) as usize * 2;
            let v = alloc(&mut heap, tag, len, &mut roots);
            if tag == ObjTag::Sexp {
                *v.sub(2) = cons_tag();
            }
            if tag != ObjTag::String {
                for i in first_scanned_field(tag)..len {
                    if !live.is_empty() && rng.gen_bool(0.6) {
                        *v.add(i) = live[rng.gen_range(0..live.len())];
                    }
                }
            }
            if rng.gen_bool(0.7) {
                live.push(v as u64);
            }
            // Back edges create cycles through earlier objects.
            if rng.gen_bool(0.2) && live.len() > 1 {
                let target = live[rng.gen_range(0..live.len())] as *mut u64;
                let header = *target.sub(1);
                let ttag = ObjTag::from_bits(header).unwrap();
                let tlen = (header >> 8) as usize;
                if ttag != ObjTag::String && tlen > first_scanned_field(ttag) {
                    *target.add(rng.gen_range(first_scanned_field(ttag)..tlen)) = v as u64;
                }
            }
        }
        for r in roots.iter_mut() {
            if !live.is_empty() && rng.gen_bool(0.8) {
                *r = live[rng.gen_range(0..live.len())];
            }
        }
        let before = fingerprint(&heap, &roots);
        let report = collect(&mut heap, &mut roots);
        check(report.stale_pointers == 0, seed, "stale pointers after collection")?;
        check(report.objects_copied == before.1.len(), seed, "reachable objects not copied exactly once")?;
        check(fingerprint(&heap, &roots) == before, seed, "graph shape changed")?;

        // A second collection must be a no-op on the shape as well.
        let report = collect(&mut heap, &mut roots);
        check(report.objects_copied == before.1.len(), seed, "second collection copied a different set")?;
        check(fingerprint(&heap, &roots) == before, seed, "graph shape changed on second collection")?;
    }
    Ok(())
}

fn check(ok: bool, seed: u64, what: &str) -> Result<(), String> {
    if ok { Ok(()) } else { Err(format!("seed {seed}: {what}")) }
}

