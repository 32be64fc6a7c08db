use crate::error::{Error, Result};
use crate::mac_sim::CW_LIMIT;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbaCw {
    /// Fewer than two contenders: no collisions, no backoff needed.
    NoBackoff,
    Cw(u32),
}

impl AbaCw {
    /// The window to enforce; the no-backoff regime uses 1.
    pub fn cw(self) -> u32 {
        match self {
            AbaCw::NoBackoff => 1,
            AbaCw::Cw(cw) => cw,
        }
    }
}

/// `CW_MIN/2 * a - 1`, rounded with halves going down, clamped to
/// `[1, 1023]`.
pub fn aba_cw(cw_min_default: u32, a: u32) -> Result<AbaCw> {
    if cw_min_default < 2 {
        return Err(Error::domain(format!(
            "cw_min_default must be >= 2, got {cw_min_default}"
        )));
    }
    if a < 2 {
        return Ok(AbaCw::NoBackoff);
    }
    // (c*a - 2)/2 is exact or a half; integer division drops the half.
    let twice = (cw_min_default as u64) * (a as u64);
    let cw = (twice - 2) / 2;
    Ok(AbaCw::Cw(cw.clamp(1, CW_LIMIT as u64) as u32))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(aba_cw(15, 2).unwrap(), AbaCw::Cw(14));
        assert_eq!(aba_cw(15, 8).unwrap(), AbaCw::Cw(59));
        assert_eq!(aba_cw(15, 1).unwrap(), AbaCw::NoBackoff);
        assert_eq!(aba_cw(15, 0).unwrap().cw(), 1);
        assert_eq!(aba_cw(15, 1000).unwrap(), AbaCw::Cw(1023));
        assert_eq!(aba_cw(2, 2).unwrap(), AbaCw::Cw(1));
        assert!(aba_cw(1, 4).is_err());
    }
}
