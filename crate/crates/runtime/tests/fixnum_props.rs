use lamina_runtime::layout::{fix_decode, fix_encode, wrap63, FIX_MAX, FIX_MIN};
use proptest::prelude::*;

fn fixnum() -> impl Strategy<Value = i64> {
    prop_oneof![FIX_MIN..=FIX_MAX, -64i64..64, Just(FIX_MIN), Just(FIX_MAX)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4096))]

    #[test]
    fn encoded_add(a in fixnum(), b in fixnum()) {
        let sum = fix_encode(a).wrapping_add(fix_encode(b)).wrapping_sub(1);
        prop_assert_eq!(sum, fix_encode(wrap63(a.wrapping_add(b))));
    }

    #[test]
    fn encoded_sub(a in fixnum(), b in fixnum()) {
        let diff = fix_encode(a).wrapping_sub(fix_encode(b)).wrapping_add(1);
        prop_assert_eq!(diff, fix_encode(wrap63(a.wrapping_sub(b))));
    }

    #[test]
    fn encoded_mul(a in fixnum(), b in fixnum()) {
        let product = fix_encode(fix_decode(fix_encode(a)).wrapping_mul(fix_decode(fix_encode(b))));
        prop_assert_eq!(product, fix_encode(wrap63(a.wrapping_mul(b))));
    }

    #[test]
    fn encoding_preserves_order(a in fixnum(), b in fixnum()) {
        let (ea, eb) = (fix_encode(a) as i64, fix_encode(b) as i64);
        prop_assert_eq!(a.cmp(&b), ea.cmp(&eb));
    }

    #[test]
    fn encoding_round_trip(a in fixnum()) {
        prop_assert_eq!(fix_decode(fix_encode(a)), a);
    }
}
