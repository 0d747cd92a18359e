use core::fmt;
use core::ops::Add;
use core::str::FromStr;

/// Milliseconds on the rig's clock. Traces print them as `seconds.mmm`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Millis(pub u64);

impl Millis {
    pub const ZERO: Millis = Millis(0);

    pub const fn from_secs(secs: u64) -> Self {
        Millis(secs * 1000)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn saturating_sub(self, other: Millis) -> Millis {
        Millis(self.0.saturating_sub(other.0))
    }
}

impl Add for Millis {
    type Output = Millis;

    fn add(self, rhs: Millis) -> Millis {
        Millis(self.0.saturating_add(rhs.0))
    }
}

impl fmt::Display for Millis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1000, self.0 % 1000)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid time {0:?}: expected seconds with at most three decimals")]
pub struct ParseMillisError(pub alloc::string::String);

impl FromStr for Millis {
    type Err = ParseMillisError;

    /// Parses decimal seconds (`30`, `30.01`) without going through floats.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseMillisError(s.into());
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        if whole.is_empty() || frac.len() > 3 {
            return Err(err());
        }
        if !whole
            .bytes()
            .chain(frac.bytes())
            .all(|b| b.is_ascii_digit())
        {
            return Err(err());
        }
        if s.contains('.') && frac.is_empty() {
            return Err(err());
        }
        let secs: u64 = whole.parse().map_err(|_| err())?;
        let mut ms = 0u64;
        for (i, b) in frac.bytes().enumerate() {
            ms += u64::from(b - b'0') * [100, 10, 1][i];
        }
        secs.checked_mul(1000)
            .and_then(|v| v.checked_add(ms))
            .map(Millis)
            .ok_or_else(err)
    }
}
