/// Run-time failures shared by every execution mode. The numeric codes are
/// passed from generated code to the runtime, and the messages are what all
/// three modes print on standard error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Failure {
    BoxedOperand = 1,
    DivisionByZero = 2,
    IndexOutOfBounds = 3,
    NotAggregate = 4,
    NotClosure = 5,
    ArityMismatch = 6,
    MatchFailure = 7,
    EndOfInput = 8,
    MalformedInput = 9,
    ImmutableAssignment = 10,
    Printf = 11,
    OutOfMemory = 12,
}

/// Process exit code used for every run-time failure.
pub const FAILURE_EXIT_CODE: i32 = 3;

impl Failure {
    pub fn from_code(code: u64) -> Option<Failure> {
        use Failure::*;
        Some(match code {
            1 => BoxedOperand,
            2 => DivisionByZero,
            3 => IndexOutOfBounds,
            4 => NotAggregate,
            5 => NotClosure,
            6 => ArityMismatch,
            7 => MatchFailure,
            8 => EndOfInput,
            9 => MalformedInput,
            10 => ImmutableAssignment,
            11 => Printf,
            12 => OutOfMemory,
            _ => return None,
        })
    }

    pub fn message(self) -> &'static str {
        match self {
            Failure::BoxedOperand => "integer operand expected",
            Failure::DivisionByZero => "division by zero",
            Failure::IndexOutOfBounds => "index out of bounds",
            Failure::NotAggregate => "string, array or S-expression expected",
            Failure::NotClosure => "calling a non-function value",
            Failure::ArityMismatch => "wrong number of arguments",
            Failure::MatchFailure => "match failure",
            Failure::EndOfInput => "read: end of input",
            Failure::MalformedInput => "read: malformed integer",
            Failure::ImmutableAssignment => "assignment to an immutable binding",
            Failure::Printf => "printf: bad format or arguments",
            Failure::OutOfMemory => "out of memory",
        }
    }
}

impl core::fmt::Display for Failure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.message())
    }
}

/// Parses one whitespace-delimited token as a fixnum-range integer.
pub fn parse_int_token(token: &[u8]) -> Result<i64, Failure> {
    let (neg, digits) = match token.split_first() {
        Some((b'-', rest)) => (true, rest),
        Some((b'+', rest)) => (false, rest),
        _ => (false, token),
    };
    if digits.is_empty() {
        return Err(Failure::MalformedInput);
    }
    let mut acc: i128 = 0;
    for &d in digits {
        if !d.is_ascii_digit() {
            return Err(Failure::MalformedInput);
        }
        acc = acc * 10 + (d - b'0') as i128;
        if acc > 1 << 63 {
            return Err(Failure::MalformedInput);
        }
    }
    let v = if neg { -acc } else { acc };
    if v < crate::layout::FIX_MIN as i128 || v > crate::layout::FIX_MAX as i128 {
        return Err(Failure::MalformedInput);
    }
    Ok(v as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_round_trip() {
        for code in 1..=12 {
            assert_eq!(Failure::from_code(code).unwrap() as u64, code);
        }
        assert_eq!(Failure::from_code(0), None);
    }

    #[test]
    fn int_tokens() {
        assert_eq!(parse_int_token(b"42"), Ok(42));
        assert_eq!(parse_int_token(b"-7"), Ok(-7));
        assert_eq!(parse_int_token(b"4611686018427387903"), Ok((1 << 62) - 1));
        assert_eq!(parse_int_token(b"4611686018427387904"), Err(Failure::MalformedInput));
        assert_eq!(parse_int_token(b"-4611686018427387904"), Ok(-(1 << 62)));
        assert_eq!(parse_int_token(b"x1"), Err(Failure::MalformedInput));
        assert_eq!(parse_int_token(b"-"), Err(Failure::MalformedInput));
    }
}
