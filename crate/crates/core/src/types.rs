//! Raw chain and market record types shared by the whole pipeline.

use alloc::string::String;
use core::fmt;

/// Span of one market tick in seconds. Tick data is hourly.
pub const TICK_SECONDS: u64 = 3600;

/// One wei-denominated ether: 10^18 wei.
pub const WEI_PER_ETH: u128 = 1_000_000_000_000_000_000;

/// A 20-byte account address.
///
/// Ordered and hashable so account maps iterate deterministically.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    /// Parse a `0x`-prefixed hex address. Shorter strings are left-padded
    /// with zeroes; longer than 40 nybbles is rejected.
    pub fn parse(s: &str) -> Result<Address, ParseError> {
        let hex = s
            .strip_prefix("0x")
            .or_else(|| s.strip_prefix("0X"))
            .unwrap_or(s);
        if hex.is_empty() || hex.len() > 40 {
            return Err(ParseError::BadAddress);
        }
        let mut out = [0u8; 20];
        // Walk nybbles from the right so short inputs pad on the left.
        let mut byte = 19usize;
        let mut low = true;
        for c in hex.bytes().rev() {
            let v = match c {
                b'0'..=b'9' => c - b'0',
                b'a'..=b'f' => c - b'a' + 10,
                b'A'..=b'F' => c - b'A' + 10,
                _ => return Err(ParseError::BadAddress),
            };
            if low {
                out[byte] = v;
                low = false;
            } else {
                out[byte] |= v << 4;
                if byte == 0 {
                    break;
                }
                byte -= 1;
                low = true;
            }
        }
        Ok(Address(out))
    }

    /// Parse an optional address: empty or missing means "none"
    /// (contract-creation transactions have no receiver).
    pub fn parse_opt(s: &str) -> Result<Option<Address>, ParseError> {
        if s.is_empty() || s == "0x" {
            return Ok(None);
        }
        Address::parse(s).map(Some)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x")?;
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// An unsigned on-chain quantity (wei values, difficulty).
///
/// Raw dumps carry these as 256-bit decimal strings. Ether-scale quantities
/// fit comfortably in 128 bits, so the value is reduced to `u128`; anything
/// larger clamps to `u128::MAX` and sets the saturation flag instead of
/// silently wrapping.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct Amount {
    value: u128,
    saturated: bool,
}

impl Amount {
    pub const ZERO: Amount = Amount {
        value: 0,
        saturated: false,
    };

    pub fn new(value: u128) -> Amount {
        Amount {
            value,
            saturated: false,
        }
    }

    /// Parse a non-negative decimal string, saturating above `u128::MAX`.
    pub fn from_decimal(s: &str) -> Result<Amount, ParseError> {
        if s.is_empty() {
            return Err(ParseError::BadDecimal);
        }
        let mut value: u128 = 0;
        let mut saturated = false;
        for c in s.bytes() {
            let d = match c {
                b'0'..=b'9' => (c - b'0') as u128,
                _ => return Err(ParseError::BadDecimal),
            };
            if saturated {
                continue;
            }
            match value.checked_mul(10).and_then(|v| v.checked_add(d)) {
                Some(v) => value = v,
                None => {
                    value = u128::MAX;
                    saturated = true;
                }
            }
        }
        Ok(Amount { value, saturated })
    }

    /// Parse a `0x`-prefixed hex quantity (JSON-RPC encoding), saturating
    /// above `u128::MAX`.
    pub fn from_hex(s: &str) -> Result<Amount, ParseError> {
        let hex = s
            .strip_prefix("0x")
            .or_else(|| s.strip_prefix("0X"))
            .ok_or(ParseError::BadHex)?;
        if hex.is_empty() {
            return Err(ParseError::BadHex);
        }
        let mut value: u128 = 0;
        let mut saturated = false;
        for c in hex.bytes() {
            let d = match c {
                b'0'..=b'9' => (c - b'0') as u128,
                b'a'..=b'f' => (c - b'a' + 10) as u128,
                b'A'..=b'F' => (c - b'A' + 10) as u128,
                _ => return Err(ParseError::BadHex),
            };
            if saturated {
                continue;
            }
            match value.checked_mul(16).and_then(|v| v.checked_add(d)) {
                Some(v) => value = v,
                None => {
                    value = u128::MAX;
                    saturated = true;
                }
            }
        }
        Ok(Amount { value, saturated })
    }

    pub fn wei(&self) -> u128 {
        self.value
    }

    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    pub fn as_f64(&self) -> f64 {
        self.value as f64
    }

    pub fn saturating_add(self, rhs: Amount) -> Amount {
        let (value, overflow) = self.value.overflowing_add(rhs.value);
        if overflow {
            Amount {
                value: u128::MAX,
                saturated: true,
            }
        } else {
            Amount {
                value,
                saturated: self.saturated || rhs.saturated,
            }
        }
    }

    /// Subtract, clamping at zero. Returns the result and whether clamping
    /// occurred (the transfer exceeded the available balance).
    pub fn clamped_sub(self, rhs: Amount) -> (Amount, bool) {
        if rhs.value > self.value {
            (
                Amount {
                    value: 0,
                    saturated: self.saturated,
                },
                true,
            )
        } else {
            (
                Amount {
                    value: self.value - rhs.value,
                    saturated: self.saturated,
                },
                false,
            )
        }
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ParseError {
    BadAddress,
    BadDecimal,
    BadHex,
    BadSelector,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::BadAddress => write!(f, "malformed address"),
            ParseError::BadDecimal => write!(f, "malformed decimal quantity"),
            ParseError::BadHex => write!(f, "malformed hex quantity"),
            ParseError::BadSelector => write!(f, "malformed 4-byte selector"),
        }
    }
}

impl core::error::Error for ParseError {}

/// Parse an optional 4-byte call-data selector like `a9059cbb` or `0xa9059cbb`.
pub fn parse_selector(s: &str) -> Result<[u8; 4], ParseError> {
    let hex = s.strip_prefix("0x").unwrap_or(s);
    if hex.len() < 8 {
        return Err(ParseError::BadSelector);
    }
    let mut out = [0u8; 4];
    for (i, chunk) in hex.as_bytes()[..8].chunks(2).enumerate() {
        let hi = hex_nybble(chunk[0]).ok_or(ParseError::BadSelector)?;
        let lo = hex_nybble(chunk[1]).ok_or(ParseError::BadSelector)?;
        out[i] = (hi << 4) | lo;
    }
    Ok(out)
}

fn hex_nybble(c: u8) -> Option<u8> {
    match c {
        b'0'..=b'9' => Some(c - b'0'),
        b'a'..=b'f' => Some(c - b'a' + 10),
        b'A'..=b'F' => Some(c - b'A' + 10),
        _ => None,
    }
}

/// One chain block header as ingested from raw dumps or RPC.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Block {
    pub timestamp: u64,
    pub number: u64,
    pub miner: Address,
    pub size_bytes: u64,
    pub difficulty: Amount,
    pub gas_limit: u64,
    pub gas_used: u64,
    pub tx_count: u32,
}

impl Block {
    /// Per-record invariant check; cross-record ordering is the job of
    /// [`chain::validate_chain`](crate::chain::validate_chain).
    pub fn validate(&self) -> Result<(), RecordError> {
        if self.gas_used > self.gas_limit {
            return Err(RecordError::GasOverLimit {
                used: self.gas_used,
                limit: self.gas_limit,
            });
        }
        Ok(())
    }
}

/// A top-level value transfer / contract call. `to == None` denotes a
/// contract-creation transaction.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Transaction {
    pub block_number: u64,
    pub from: Address,
    pub to: Option<Address>,
    pub value: Amount,
    pub gas_used: u64,
    pub gas_price: Amount,
    pub input_selector: Option<[u8; 4]>,
}

/// An internal call recovered by replaying a transaction.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Trace {
    pub block_number: u64,
    pub from: Address,
    pub to: Address,
    pub value: Amount,
    pub kind: TraceKind,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TraceKind {
    Call,
    Create,
}

impl TraceKind {
    pub fn parse(s: &str) -> Result<TraceKind, ParseError> {
        match s {
            "call" => Ok(TraceKind::Call),
            "create" => Ok(TraceKind::Create),
            _ => Err(ParseError::BadDecimal),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TraceKind::Call => "call",
            TraceKind::Create => "create",
        }
    }
}

/// One hour of aggregated market data: OHLC prices plus two-sided volume.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct MarketTick {
    pub time: u64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume_from: f64,
    pub volume_to: f64,
}

impl MarketTick {
    pub fn validate(&self) -> Result<(), RecordError> {
        if !self.time.is_multiple_of(TICK_SECONDS) {
            return Err(RecordError::UnalignedTick { time: self.time });
        }
        if self.low > self.open || self.low > self.close || self.low > self.high {
            return Err(RecordError::BadCandle);
        }
        Ok(())
    }
}

/// Per-record invariant violations surfaced by the ingest readers.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RecordError {
    GasOverLimit { used: u64, limit: u64 },
    UnalignedTick { time: u64 },
    BadCandle,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordError::GasOverLimit { used, limit } => {
                write!(f, "gasUsed {used} exceeds gasLimit {limit}")
            }
            RecordError::UnalignedTick { time } => {
                write!(f, "tick time {time} is not hour-aligned")
            }
            RecordError::BadCandle => write!(f, "low price exceeds open, close or high"),
        }
    }
}

impl core::error::Error for RecordError {}

/// Unix timestamp of the start of the tick containing `timestamp`.
pub fn tick_of(timestamp: u64) -> u64 {
    timestamp - timestamp % TICK_SECONDS
}

/// Render an address-or-empty for wire formats.
pub fn address_opt_string(a: &Option<Address>) -> String {
    use alloc::string::ToString;
    match a {
        Some(addr) => addr.to_string(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn address_round_trip() {
        let a = Address::parse("0x00a329c0648769a73afac7f9381e08fb43dbea72").unwrap();
        assert_eq!(a.to_string(), "0x00a329c0648769a73afac7f9381e08fb43dbea72");
    }

    #[test]
    fn address_short_left_pads() {
        let a = Address::parse("0xaa").unwrap();
        assert_eq!(a.to_string(), "0x00000000000000000000000000000000000000aa");
        let b = Address::parse("0xabc").unwrap();
        assert_eq!(b.to_string(), "0x0000000000000000000000000000000000000abc");
    }

    #[test]
    fn address_rejects_junk() {
        assert!(Address::parse("0xzz").is_err());
        assert!(Address::parse("").is_err());
        assert!(Address::parse("0x00a329c0648769a73afac7f9381e08fb43dbea7200").is_err());
    }

    #[test]
    fn empty_to_is_contract_creation() {
        assert_eq!(Address::parse_opt("").unwrap(), None);
        assert_eq!(Address::parse_opt("0x").unwrap(), None);
        assert!(Address::parse_opt("0xaa").unwrap().is_some());
    }

    #[test]
    fn amount_decimal_parsing() {
        assert_eq!(Amount::from_decimal("0").unwrap().wei(), 0);
        assert_eq!(
            Amount::from_decimal("1000000000000000000").unwrap().wei(),
            WEI_PER_ETH
        );
        assert!(Amount::from_decimal("-1").is_err());
        assert!(Amount::from_decimal("").is_err());
        assert!(Amount::from_decimal("12a").is_err());
    }

    #[test]
    fn amount_saturates_past_u128() {
        // 2^128 = 340282366920938463463374607431768211456
        let a = Amount::from_decimal("340282366920938463463374607431768211456").unwrap();
        assert!(a.is_saturated());
        assert_eq!(a.wei(), u128::MAX);
        let b = Amount::from_decimal("340282366920938463463374607431768211455").unwrap();
        assert!(!b.is_saturated());
        assert_eq!(b.wei(), u128::MAX);
    }

    #[test]
    fn amount_hex_parsing() {
        assert_eq!(Amount::from_hex("0x0").unwrap().wei(), 0);
        assert_eq!(Amount::from_hex("0xff").unwrap().wei(), 255);
        assert!(Amount::from_hex("ff").is_err());
    }

    #[test]
    fn clamped_sub_reports_clamp() {
        let (v, clamped) = Amount::new(3).clamped_sub(Amount::new(5));
        assert_eq!(v.wei(), 0);
        assert!(clamped);
        let (v, clamped) = Amount::new(10).clamped_sub(Amount::new(4));
        assert_eq!(v.wei(), 6);
        assert!(!clamped);
    }

    #[test]
    fn selector_parsing() {
        assert_eq!(
            parse_selector("a9059cbb").unwrap(),
            [0xa9, 0x05, 0x9c, 0xbb]
        );
        assert_eq!(
            parse_selector("0x23b872dd00ff").unwrap(),
            [0x23, 0xb8, 0x72, 0xdd]
        );
        assert!(parse_selector("a9").is_err());
    }

    #[test]
    fn block_gas_invariant() {
        let mut b = Block {
            timestamp: 1_500_000_000,
            number: 1,
            miner: Address::default(),
            size_bytes: 500,
            difficulty: Amount::new(100),
            gas_limit: 8_000_000,
            gas_used: 21_000,
            tx_count: 1,
        };
        assert!(b.validate().is_ok());
        b.gas_used = b.gas_limit + 1;
        assert!(b.validate().is_err());
    }

    #[test]
    fn tick_validation() {
        let mut t = MarketTick {
            time: 1_499_997_600,
            open: 200.0,
            high: 210.0,
            low: 195.0,
            close: 205.0,
            volume_from: 1000.0,
            volume_to: 900.0,
        };
        assert!(t.validate().is_ok());
        t.time = 1_499_997_601;
        assert!(matches!(
            t.validate(),
            Err(RecordError::UnalignedTick { .. })
        ));
        t.time = 1_499_997_600;
        t.low = 300.0;
        assert!(matches!(t.validate(), Err(RecordError::BadCandle)));
    }

    #[test]
    fn tick_of_floors_to_hour() {
        assert_eq!(tick_of(1_500_000_000), 1_499_997_600);
        assert_eq!(tick_of(7200), 7200);
        assert_eq!(tick_of(7201), 7200);
    }
}
