//! Entry points called from generated assembly.
//!
//! Generated code pushes call arguments onto its own stack and passes the
//! address of the first one plus their count, so `args` also marks the top of
//! the region the collector scans. Allocating entry points re-read `args`
//! after allocation because a collection may have moved the objects they
//! refer to.

#![allow(non_snake_case, non_upper_case_globals)]

use crate::failure::{parse_int_token, Failure, FAILURE_EXIT_CODE};
use crate::heap::{Heap, RootRange, DEFAULT_SPACE_BYTES};
use crate::layout::*;
use crate::ops;
use core::ffi::c_char;
use core::ptr::{addr_of, addr_of_mut};

extern "C" {
    fn write(fd: i32, buf: *const u8, n: usize) -> isize;
    fn read(fd: i32, buf: *mut u8, n: usize) -> isize;
    fn exit(code: i32) -> !;
    fn malloc(n: usize) -> *mut u8;
    fn getenv(name: *const c_char) -> *const c_char;

    static mut lama_globals_start: u64;
    static mut lama_globals_end: u64;
}

/// Highest address of the scanned stack region, stored by generated `main`.
#[no_mangle]
pub static mut Lama_stack_bottom: u64 = 0;

static mut STACK_TOP: u64 = 0;

struct State {
    heap: Option<Heap>,
    out: [u8; 8192],
    out_len: usize,
    input: [u8; 4096],
    in_pos: usize,
    in_len: usize,
    in_eof: bool,
}

static mut STATE: State = State {
    heap: None,
    out: [0; 8192],
    out_len: 0,
    input: [0; 4096],
    in_pos: 0,
    in_len: 0,
    in_eof: false,
};

unsafe fn state() -> &'static mut State {
    &mut *addr_of_mut!(STATE)
}

unsafe fn write_all(fd: i32, mut bytes: &[u8]) {
    while !bytes.is_empty() {
        let n = write(fd, bytes.as_ptr(), bytes.len());
        if n <= 0 {
            return;
        }
        bytes = &bytes[n as usize..];
    }
}

unsafe fn flush() {
    let st = state();
    write_all(1, &st.out[..st.out_len]);
    st.out_len = 0;
}

unsafe fn emit(bytes: &[u8]) {
    let st = state();
    if st.out_len + bytes.len() > st.out.len() {
        flush();
        if bytes.len() > st.out.len() {
            write_all(1, bytes);
            return;
        }
    }
    st.out[st.out_len..st.out_len + bytes.len()].copy_from_slice(bytes);
    st.out_len += bytes.len();
}

unsafe fn env_flag(name: &[u8]) -> bool {
    let v = getenv(name.as_ptr() as *const c_char);
    !v.is_null() && *v == b'1' as c_char
}

unsafe fn env_usize(name: &[u8]) -> Option<usize> {
    let v = getenv(name.as_ptr() as *const c_char);
    if v.is_null() {
        return None;
    }
    let mut acc: usize = 0;
    let mut p = v as *const u8;
    while (*p).is_ascii_digit() {
        acc = acc.checked_mul(10)?.checked_add((*p - b'0') as usize)?;
        p = p.add(1);
    }
    if *p != 0 {
        return None;
    }
    Some(acc)
}

unsafe fn fail(f: Failure) -> ! {
    flush();
    write_all(2, b"runtime error: ");
    write_all(2, f.message().as_bytes());
    write_all(2, b"\n");
    exit(FAILURE_EXIT_CODE)
}

unsafe fn heap() -> &'static mut Heap {
    let st = state();
    if st.heap.is_none() {
        let bytes = env_usize(b"LAMINA_HEAP_BYTES\0").unwrap_or(DEFAULT_SPACE_BYTES);
        let words = (bytes / WORD).max(16);
        let mem = malloc(Heap::storage_words(words) * WORD) as *mut u64;
        if mem.is_null() {
            fail(Failure::OutOfMemory);
        }
        let mut heap = Heap::from_raw(mem, words);
        heap.verify = env_flag(b"LAMINA_GC_VERIFY\0");
        st.heap = Some(heap);
    }
    st.heap.as_mut().unwrap()
}

unsafe fn alloc(tag: ObjTag, len: usize) -> *mut u64 {
    let roots = [
        RootRange::new(addr_of_mut!(lama_globals_start), addr_of_mut!(lama_globals_end)),
        RootRange::new(STACK_TOP as *mut u64, Lama_stack_bottom as *mut u64),
    ];
    let heap = heap();
    match heap.alloc(tag, len, &roots) {
        Ok(v) => {
            if heap.stats.stale_pointers > 0 {
                flush();
                write_all(2, b"gc: stale pointers into the abandoned space\n");
                exit(crate::GC_CORRUPTION_EXIT_CODE);
            }
            v
        }
        Err(f) => fail(f),
    }
}

unsafe fn check(r: Result<u64, Failure>) -> u64 {
    match r {
        Ok(v) => v,
        Err(f) => fail(f),
    }
}

#[no_mangle]
pub unsafe extern "C" fn Bstring(args: *mut u64, _n: u64) -> u64 {
    STACK_TOP = args as u64;
    let literal = *args as *const u64;
    let len = header_len(*literal.sub(1));
    let v = alloc(ObjTag::String, len);
    core::ptr::copy_nonoverlapping(*args as *const u8, v as *mut u8, len);
    v as u64
}

#[no_mangle]
pub unsafe extern "C" fn Barray(args: *mut u64, n: u64) -> u64 {
    STACK_TOP = args as u64;
    let v = alloc(ObjTag::Array, n as usize);
    core::ptr::copy_nonoverlapping(args, v, n as usize);
    v as u64
}

/// Arguments: the elements, then the encoded packed tag.
#[no_mangle]
pub unsafe extern "C" fn Bsexp(args: *mut u64, n: u64) -> u64 {
    STACK_TOP = args as u64;
    let count = n as usize - 1;
    let v = alloc(ObjTag::Sexp, count);
    *v.sub(2) = *args.add(count);
    core::ptr::copy_nonoverlapping(args, v, count);
    v as u64
}

/// Arguments: code address, encoded arity, captured values.
#[no_mangle]
pub unsafe extern "C" fn Bclosure(args: *mut u64, n: u64) -> u64 {
    STACK_TOP = args as u64;
    let v = alloc(ObjTag::Closure, n as usize);
    core::ptr::copy_nonoverlapping(args, v, n as usize);
    v as u64
}

/// Validates a call through a closure value and returns its code address.
#[no_mangle]
pub unsafe extern "C" fn Bclosure_check(v: u64, nargs: u64) -> u64 {
    match ops::describe(v) {
        Some((ObjTag::Closure, _)) => {
            let arity = *(v as *const u64).add(CLOSURE_ARITY);
            if arity != fix_encode(nargs as i64) {
                fail(Failure::ArityMismatch);
            }
            *(v as *const u64).add(CLOSURE_CODE)
        }
        _ => fail(Failure::NotClosure),
    }
}

#[no_mangle]
pub unsafe extern "C" fn Belem(args: *mut u64, _n: u64) -> u64 {
    check(ops::elem(*args, *args.add(1)))
}

#[no_mangle]
pub unsafe extern "C" fn Bsta(args: *mut u64, _n: u64) -> u64 {
    check(ops::sta(*args, *args.add(1), *args.add(2)))
}

#[no_mangle]
pub unsafe extern "C" fn Btag(args: *mut u64, _n: u64) -> u64 {
    ops::tag_test(*args, *args.add(1), *args.add(2))
}

#[no_mangle]
pub unsafe extern "C" fn Barray_patt(args: *mut u64, _n: u64) -> u64 {
    ops::array_test(*args, *args.add(1))
}

#[no_mangle]
pub unsafe extern "C" fn Llength(args: *mut u64, _n: u64) -> u64 {
    check(ops::length(*args))
}

unsafe fn next_byte() -> Option<u8> {
    let st = state();
    if st.in_pos == st.in_len {
        if st.in_eof {
            return None;
        }
        let n = read(0, st.input.as_mut_ptr(), st.input.len());
        if n <= 0 {
            st.in_eof = true;
            return None;
        }
        st.in_pos = 0;
        st.in_len = n as usize;
    }
    let b = st.input[st.in_pos];
    st.in_pos += 1;
    Some(b)
}

#[no_mangle]
pub unsafe extern "C" fn Lread(_args: *mut u64, _n: u64) -> u64 {
    let mut token = [0u8; 32];
    let mut len = 0;
    let mut b = next_byte();
    while matches!(b, Some(c) if c.is_ascii_whitespace()) {
        b = next_byte();
    }
    if b.is_none() {
        fail(Failure::EndOfInput);
    }
    while let Some(c) = b {
        if c.is_ascii_whitespace() {
            break;
        }
        if len == token.len() {
            fail(Failure::MalformedInput);
        }
        token[len] = c;
        len += 1;
        b = next_byte();
    }
    match parse_int_token(&token[..len]) {
        Ok(v) => fix_encode(v),
        Err(f) => fail(f),
    }
}

#[no_mangle]
pub unsafe extern "C" fn Lwrite(args: *mut u64, _n: u64) -> u64 {
    let v = *args;
    if !is_fixnum(v) {
        fail(Failure::BoxedOperand);
    }
    let mut buf = [0u8; 24];
    emit(ops::format_int(fix_decode(v), &mut buf));
    emit(b"\n");
    fix_encode(0)
}

#[no_mangle]
pub unsafe extern "C" fn Lprintf(args: *mut u64, n: u64) -> u64 {
    let args = core::slice::from_raw_parts(args, n as usize);
    let r = ops::printf(args[0], &args[1..], &mut |bytes| emit(bytes));
    if let Err(f) = r {
        fail(f);
    }
    fix_encode(0)
}

#[no_mangle]
pub unsafe extern "C" fn Lama_immutable(_args: *mut u64, _n: u64) -> u64 {
    fail(Failure::ImmutableAssignment)
}

#[no_mangle]
pub unsafe extern "C" fn Lama_error(code: u64) -> ! {
    fail(Failure::from_code(code).unwrap_or(Failure::BoxedOperand))
}

#[no_mangle]
pub unsafe extern "C" fn Lama_match_failure(line: u64, col: u64) -> ! {
    flush();
    let mut buf = [0u8; 24];
    write_all(2, b"runtime error: match failure at ");
    write_all(2, ops::format_int(line as i64, &mut buf));
    write_all(2, b":");
    write_all(2, ops::format_int(col as i64, &mut buf));
    write_all(2, b"\n");
    exit(FAILURE_EXIT_CODE)
}

#[no_mangle]
pub unsafe extern "C" fn Lama_finish() {
    flush();
    if env_flag(b"LAMINA_GC_STATS\0") {
        let st = &*addr_of!(STATE);
        let mut buf = [0u8; 24];
        let (collections, allocated, copied, stale) = match &st.heap {
            Some(h) => (h.stats.collections, h.stats.allocated_bytes, h.stats.copied_bytes, h.stats.stale_pointers),
            None => (0, 0, 0, 0),
        };
        for (label, value) in [
            (&b"gc: collections="[..], collections),
            (b" allocated=", allocated),
            (b" copied=", copied),
            (b" stale=", stale),
        ] {
            write_all(2, label);
            write_all(2, ops::format_int(value as i64, &mut buf));
        }
        write_all(2, b"\n");
    }
}

#[panic_handler]
fn panic(_: &core::panic::PanicInfo) -> ! {
    unsafe {
        flush();
        write_all(2, b"runtime panic: heap corrupted\n");
        exit(crate::GC_CORRUPTION_EXIT_CODE)
    }
}

/// The precompiled `core` references an unwinding personality even though
/// this archive is built with `panic=abort`.
#[no_mangle]
pub extern "C" fn rust_eh_personality() {}
