//! Word-level representation of language values.
//!
//! Scalars are fixnums: an integer `v` is stored as the word `2v + 1`, so the
//! least significant bit separates scalars (odd) from pointers (even).
//!
//! Boxed values are laid out as a one-word header followed by a buffer, and a
//! value points at the buffer, never at the header:
//!
//! ```text
//!              +-----------+-----------+----------------------
//!   string     |  header   | bytes ... 0 (padded to words)
//!              +-----------+-----------+----------------------
//!   array      |  header   | elem 0 | elem 1 | ...
//!   +----------+-----------+----------------------
//!   | tag word |  header   | elem 0 | elem 1 | ...      (S-expression)
//!   +----------+-----------+----------------------
//!              |  header   | code | arity | captured 0 | ...   (closure)
//!                          ^
//!                          value pointer
//! ```
//!
//! The header keeps the object tag in the low three bits, a mark bit at bit 3
//! and the length from bit 8 upwards. During collection a forwarded object's
//! header is overwritten with the (8-aligned) address of its copy, so a zero
//! tag field identifies a forwarding pointer.

pub const WORD: usize = 8;

/// Smallest integer representable as a fixnum.
pub const FIX_MIN: i64 = -(1 << 62);
/// Largest integer representable as a fixnum.
pub const FIX_MAX: i64 = (1 << 62) - 1;

pub const TAG_MASK: u64 = 0b111;
pub const MARK_BIT: u64 = 0b1000;
pub const LEN_SHIFT: u32 = 8;

/// Number of characters of a constructor name that take part in tag equality.
pub const SEXP_TAG_CHARS: usize = 5;

/// Alphabet used to pack constructor names, six bits per character.
const TAG_ALPHABET: &[u8] = b"_abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789'";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ObjTag {
    String = 1,
    Array = 2,
    Sexp = 3,
    Closure = 4,
}

impl ObjTag {
    pub fn from_bits(bits: u64) -> Option<ObjTag> {
        match bits & TAG_MASK {
            1 => Some(ObjTag::String),
            2 => Some(ObjTag::Array),
            3 => Some(ObjTag::Sexp),
            4 => Some(ObjTag::Closure),
            _ => None,
        }
    }
}

#[inline]
pub fn fix_encode(v: i64) -> u64 {
    (v as u64).wrapping_shl(1) | 1
}

#[inline]
pub fn fix_decode(w: u64) -> i64 {
    debug_assert!(is_fixnum(w), "decoding a non-fixnum word {w:#x}");
    (w as i64) >> 1
}

#[inline]
pub fn is_fixnum(w: u64) -> bool {
    w & 1 == 1
}

/// Reduces an integer to the 63-bit two's-complement range used by fixnums.
#[inline]
pub fn wrap63(v: i64) -> i64 {
    v.wrapping_shl(1) >> 1
}

#[inline]
pub fn make_header(tag: ObjTag, len: usize) -> u64 {
    ((len as u64) << LEN_SHIFT) | tag as u64
}

#[inline]
pub fn header_len(header: u64) -> usize {
    (header >> LEN_SHIFT) as usize
}

/// Words of buffer an object occupies after its header. Every object gets at
/// least one buffer word so that distinct objects never share a value address.
pub fn payload_words(tag: ObjTag, len: usize) -> usize {
    let words = match tag {
        ObjTag::String => (len + 1).div_ceil(WORD),
        ObjTag::Array | ObjTag::Sexp | ObjTag::Closure => len,
    };
    words.max(1)
}

/// Words preceding the value pointer: the header, plus the tag word for
/// S-expressions.
pub fn prefix_words(tag: ObjTag) -> usize {
    match tag {
        ObjTag::Sexp => 2,
        _ => 1,
    }
}

pub fn block_words(tag: ObjTag, len: usize) -> usize {
    prefix_words(tag) + payload_words(tag, len)
}

/// Index of the first buffer word that may hold a language value.
pub fn first_scanned_field(tag: ObjTag) -> usize {
    match tag {
        // word 0 is the code address
        ObjTag::Closure => 1,
        _ => 0,
    }
}

/// Packs the first five characters of a constructor name into one integer.
/// Two names pack equally iff their first five characters coincide.
pub fn pack_tag(name: &str) -> i64 {
    let mut packed: i64 = 0;
    let mut count = 0;
    for b in name.bytes().take(SEXP_TAG_CHARS) {
        let idx = TAG_ALPHABET.iter().position(|&c| c == b).unwrap_or(0) as i64;
        packed = (packed << 6) | (idx + 1);
        count += 1;
    }
    // distinguishes "A" from "_A"-style prefixes of differing length
    (packed << 3) | count
}

/// Closure buffer layout: code address, then encoded arity, then captures.
pub const CLOSURE_CODE: usize = 0;
pub const CLOSURE_ARITY: usize = 1;
pub const CLOSURE_CAPTURES: usize = 2;
