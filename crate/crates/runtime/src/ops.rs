//! Builtin operations on raw value words. Allocation-free; the allocating
//! builtins live next to the heap owner (the native glue or a test harness).

use crate::failure::Failure;
use crate::layout::*;

/// Tag and length of a boxed value.
///
/// # Safety
/// `v` must be an even word that is either a valid value address or zero.
pub unsafe fn describe(v: u64) -> Option<(ObjTag, usize)> {
    if is_fixnum(v) || v == 0 {
        return None;
    }
    let header = *(v as *const u64).sub(1);
    ObjTag::from_bits(header).map(|tag| (tag, header_len(header)))
}

unsafe fn aggregate(v: u64) -> Result<(ObjTag, usize), Failure> {
    match describe(v) {
        Some((ObjTag::Closure, _)) | None => Err(Failure::NotAggregate),
        Some(found) => Ok(found),
    }
}

unsafe fn index(i: u64, len: usize) -> Result<usize, Failure> {
    if !is_fixnum(i) {
        return Err(Failure::BoxedOperand);
    }
    let i = fix_decode(i);
    if i < 0 || i as usize >= len {
        return Err(Failure::IndexOutOfBounds);
    }
    Ok(i as usize)
}

/// # Safety
/// `v` must be a fixnum or a valid value address.
pub unsafe fn elem(v: u64, i: u64) -> Result<u64, Failure> {
    let (tag, len) = aggregate(v)?;
    let i = index(i, len)?;
    Ok(match tag {
        ObjTag::String => fix_encode(*(v as *const u8).add(i) as i64),
        _ => *(v as *const u64).add(i),
    })
}

/// Stores `x` at position `i` of `v` and returns `x`. Strings keep the low
/// byte of an integer.
///
/// # Safety
/// `v` must be a fixnum or a valid value address.
pub unsafe fn sta(v: u64, i: u64, x: u64) -> Result<u64, Failure> {
    let (tag, len) = aggregate(v)?;
    let i = index(i, len)?;
    match tag {
        ObjTag::String => {
            if !is_fixnum(x) {
                return Err(Failure::BoxedOperand);
            }
            *(v as *mut u8).add(i) = fix_decode(x) as u8;
        }
        _ => *(v as *mut u64).add(i) = x,
    }
    Ok(x)
}

/// # Safety
/// `v` must be a fixnum or a valid value address.
pub unsafe fn length(v: u64) -> Result<u64, Failure> {
    let (_, len) = aggregate(v)?;
    Ok(fix_encode(len as i64))
}

/// Tests whether `v` is an S-expression with the given (encoded) packed tag
/// and arity. Returns an encoded boolean.
///
/// # Safety
/// `v` must be a fixnum or a valid value address.
pub unsafe fn tag_test(v: u64, tag: u64, arity: u64) -> u64 {
    let ok = match describe(v) {
        Some((ObjTag::Sexp, len)) => *(v as *const u64).sub(2) == tag && fix_encode(len as i64) == arity,
        _ => false,
    };
    fix_encode(ok as i64)
}

/// Tests whether `v` is an array of the given (encoded) length.
///
/// # Safety
/// `v` must be a fixnum or a valid value address.
pub unsafe fn array_test(v: u64, n: u64) -> u64 {
    let ok = matches!(describe(v), Some((ObjTag::Array, len)) if fix_encode(len as i64) == n);
    fix_encode(ok as i64)
}

/// Bytes of a string value.
///
/// # Safety
/// `v` must be a fixnum or a valid value address whose memory outlives the
/// returned slice.
pub unsafe fn string_bytes<'a>(v: u64) -> Option<&'a [u8]> {
    match describe(v) {
        Some((ObjTag::String, len)) => Some(core::slice::from_raw_parts(v as *const u8, len)),
        _ => None,
    }
}

/// Writes the decimal form of `v` into `buf`, returning the used suffix.
pub fn format_int(v: i64, buf: &mut [u8; 24]) -> &[u8] {
    let mut pos = buf.len();
    let neg = v < 0;
    let mut n = v.unsigned_abs();
    loop {
        pos -= 1;
        buf[pos] = b'0' + (n % 10) as u8;
        n /= 10;
        if n == 0 {
            break;
        }
    }
    if neg {
        pos -= 1;
        buf[pos] = b'-';
    }
    &buf[pos..]
}

/// Renders `printf` output. Supports `%d`, `%s`, `%c`, `%%` and literal text;
/// the argument count must match the directives exactly.
///
/// # Safety
/// Every word in `args` must be a fixnum or a valid value address.
pub unsafe fn printf(fmt: u64, args: &[u64], out: &mut dyn FnMut(&[u8])) -> Result<(), Failure> {
    let fmt = string_bytes(fmt).ok_or(Failure::Printf)?;
    let mut next = args.iter();
    let mut i = 0;
    let mut lit_start = 0;
    while i < fmt.len() {
        if fmt[i] != b'%' {
            i += 1;
            continue;
        }
        out(&fmt[lit_start..i]);
        let directive = *fmt.get(i + 1).ok_or(Failure::Printf)?;
        match directive {
            b'%' => out(b"%"),
            b'd' | b'c' => {
                let &arg = next.next().ok_or(Failure::Printf)?;
                if !is_fixnum(arg) {
                    return Err(Failure::Printf);
                }
                let v = fix_decode(arg);
                if directive == b'd' {
                    let mut buf = [0u8; 24];
                    out(format_int(v, &mut buf));
                } else {
                    out(&[v as u8]);
                }
            }
            b's' => {
                let &arg = next.next().ok_or(Failure::Printf)?;
                out(string_bytes(arg).ok_or(Failure::Printf)?);
            }
            _ => return Err(Failure::Printf),
        }
        i += 2;
        lit_start = i;
    }
    out(&fmt[lit_start..]);
    if next.next().is_some() {
        return Err(Failure::Printf);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heap::OwnedHeap;

    unsafe fn string(heap: &mut OwnedHeap, s: &[u8]) -> u64 {
        let v = heap.alloc(ObjTag::String, s.len(), &[]).unwrap();
        core::ptr::copy_nonoverlapping(s.as_ptr(), v as *mut u8, s.len());
        v as u64
    }

    #[test]
    fn sexp_elements_and_length() {
        let mut heap = OwnedHeap::new(4096);
        unsafe {
            let v = heap.alloc(ObjTag::Sexp, 2, &[]).unwrap();
            *v.sub(2) = fix_encode(pack_tag("A"));
            *v = fix_encode(1);
            *v.add(1) = fix_encode(2);
            assert_eq!(elem(v as u64, fix_encode(1)), Ok(fix_encode(2)));
            assert_eq!(length(v as u64), Ok(fix_encode(2)));
            assert_eq!(tag_test(v as u64, fix_encode(pack_tag("A")), fix_encode(2)), fix_encode(1));
            assert_eq!(tag_test(v as u64, fix_encode(pack_tag("A")), fix_encode(3)), fix_encode(0));
            assert_eq!(array_test(v as u64, fix_encode(2)), fix_encode(0));
            assert_eq!(elem(v as u64, fix_encode(2)), Err(Failure::IndexOutOfBounds));
        }
    }

    #[test]
    fn string_store_then_load() {
        let mut heap = OwnedHeap::new(4096);
        unsafe {
            let s = string(&mut heap, b"hello");
            let mut oracle = b"hello".to_vec();
            for (i, b) in [(0usize, b'j'), (4, b'y')] {
                sta(s, fix_encode(i as i64), fix_encode(b as i64)).unwrap();
                oracle[i] = b;
            }
            sta(s, fix_encode(2), fix_encode(300)).unwrap();
            oracle[2] = (300 % 256) as u8;
            for (i, &b) in oracle.iter().enumerate() {
                assert_eq!(elem(s, fix_encode(i as i64)), Ok(fix_encode(b as i64)));
            }
        }
    }

    #[test]
    fn scalars_are_not_aggregates() {
        unsafe {
            assert_eq!(length(fix_encode(3)), Err(Failure::NotAggregate));
            assert_eq!(elem(fix_encode(3), fix_encode(0)), Err(Failure::NotAggregate));
        }
    }

    #[test]
    fn printf_directives() {
        let mut heap = OwnedHeap::new(4096);
        unsafe {
            let fmt = string(&mut heap, b"x=%d %s%c 100%%\n");
            let s = string(&mut heap, b"ab");
            let mut out = Vec::new();
            printf(fmt, &[fix_encode(-12), s, fix_encode(b'!' as i64)], &mut |b| out.extend_from_slice(b)).unwrap();
            assert_eq!(out, b"x=-12 ab! 100%\n");
            let r = printf(fmt, &[fix_encode(1)], &mut |_| {});
            assert_eq!(r, Err(Failure::Printf));
        }
    }

    #[test]
    fn int_formatting() {
        let mut buf = [0u8; 24];
        assert_eq!(format_int(0, &mut buf), b"0");
        assert_eq!(format_int(i64::MIN, &mut buf), b"-9223372036854775808");
        assert_eq!(format_int(-4611686018427387904, &mut buf), b"-4611686018427387904");
    }
}
