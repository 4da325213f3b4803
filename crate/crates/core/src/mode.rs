//! Failure modes and the classification of (reported, actual) value pairs.
//!
//! Real-valued signals use the alphabet `{l, m, h}` (reads too low, matches,
//! reads too high); boolean signals use `{f, m, t}` (reads False when it
//! should be True, matches, reads True when it should be False).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModeError {
    #[error("value {value} does not have signal type {expected}")]
    TypeMismatch { value: String, expected: SignalType },
    #[error("non-finite real value {0} cannot be classified")]
    NonFinite(f64),
    #[error("mode '{mode}' is not legal for {ty} signals")]
    IllegalMode { mode: FailureMode, ty: SignalType },
    #[error("cannot combine {0} and {1} mode sets")]
    MixedTypes(SignalType, SignalType),
    #[error("unknown failure mode '{0}'")]
    UnknownMode(String),
    #[error("empty mode set")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalType {
    Real,
    Bool,
}

impl SignalType {
    /// The failure modes a signal of this type can be in, in canonical order.
    pub fn alphabet(self) -> &'static [FailureMode] {
        match self {
            SignalType::Real => &[FailureMode::Low, FailureMode::Match, FailureMode::High],
            SignalType::Bool => &[
                FailureMode::FalseFault,
                FailureMode::Match,
                FailureMode::TrueFault,
            ],
        }
    }
}

impl fmt::Display for SignalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignalType::Real => "real",
            SignalType::Bool => "bool",
        })
    }
}

impl FromStr for SignalType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" => Ok(SignalType::Real),
            "bool" => Ok(SignalType::Bool),
            other => Err(format!("unknown signal type '{other}' (expected real or bool)")),
        }
    }
}

/// A qualitative failure class of a (reported, actual) pair.
///
/// The derived ordering (`l < m < h < f < t`) is the canonical order used
/// when sorting literals and scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FailureMode {
    Low,
    Match,
    High,
    FalseFault,
    TrueFault,
}

impl FailureMode {
    pub const ALL: [FailureMode; 5] = [
        FailureMode::Low,
        FailureMode::Match,
        FailureMode::High,
        FailureMode::FalseFault,
        FailureMode::TrueFault,
    ];

    pub fn symbol(self) -> char {
        match self {
            FailureMode::Low => 'l',
            FailureMode::Match => 'm',
            FailureMode::High => 'h',
            FailureMode::FalseFault => 'f',
            FailureMode::TrueFault => 't',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        Some(match c {
            'l' => FailureMode::Low,
            'm' => FailureMode::Match,
            'h' => FailureMode::High,
            'f' => FailureMode::FalseFault,
            't' => FailureMode::TrueFault,
            _ => return None,
        })
    }

    pub fn is_legal_for(self, ty: SignalType) -> bool {
        ty.alphabet().contains(&self)
    }

    pub fn is_match(self) -> bool {
        self == FailureMode::Match
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for FailureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

impl FromStr for FailureMode {
    type Err = ModeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => {
                FailureMode::from_symbol(c).ok_or_else(|| ModeError::UnknownMode(s.to_string()))
            }
            _ => Err(ModeError::UnknownMode(s.to_string())),
        }
    }
}

impl Serialize for FailureMode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FailureMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A nonempty set of failure modes of a single signal type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeSet {
    bits: u8,
    ty: SignalType,
}

impl ModeSet {
    pub fn new(ty: SignalType, modes: impl IntoIterator<Item = FailureMode>) -> Result<Self, ModeError> {
        let mut bits = 0;
        for mode in modes {
            if !mode.is_legal_for(ty) {
                return Err(ModeError::IllegalMode { mode, ty });
            }
            bits |= mode.bit();
        }
        if bits == 0 {
            return Err(ModeError::Empty);
        }
        Ok(ModeSet { bits, ty })
    }

    pub fn singleton(ty: SignalType, mode: FailureMode) -> Result<Self, ModeError> {
        Self::new(ty, [mode])
    }

    /// Every mode of `ty`; for reals this is the "all faults possible" set `a`.
    pub fn full(ty: SignalType) -> Self {
        Self::new(ty, ty.alphabet().iter().copied()).expect("alphabets are nonempty")
    }

    pub fn signal_type(&self) -> SignalType {
        self.ty
    }

    pub fn contains(&self, mode: FailureMode) -> bool {
        self.bits & mode.bit() != 0
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_full(&self) -> bool {
        *self == Self::full(self.ty)
    }

    pub fn iter(&self) -> impl Iterator<Item = FailureMode> + '_ {
        self.ty.alphabet().iter().copied().filter(|m| self.contains(*m))
    }

    pub fn union(&self, other: &ModeSet) -> Result<ModeSet, ModeError> {
        if self.ty != other.ty {
            return Err(ModeError::MixedTypes(self.ty, other.ty));
        }
        Ok(ModeSet {
            bits: self.bits | other.bits,
            ty: self.ty,
        })
    }

    pub fn insert(&mut self, mode: FailureMode) -> Result<(), ModeError> {
        if !mode.is_legal_for(self.ty) {
            return Err(ModeError::IllegalMode { mode, ty: self.ty });
        }
        self.bits |= mode.bit();
        Ok(())
    }
}

/// Set union of two mode sets of the same signal type.
pub fn mode_set_union(a: &ModeSet, b: &ModeSet) -> Result<ModeSet, ModeError> {
    a.union(b)
}

impl fmt::Display for ModeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ty == SignalType::Real && self.is_full() {
            return f.write_str("a");
        }
        for m in self.iter() {
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

impl ModeSet {
    /// Parses the compact form produced by `Display` ("a", "lm", "t", ...).
    pub fn parse(ty: SignalType, s: &str) -> Result<ModeSet, ModeError> {
        if s == "a" && ty == SignalType::Real {
            return Ok(ModeSet::full(ty));
        }
        let modes = s
            .chars()
            .map(|c| FailureMode::from_symbol(c).ok_or_else(|| ModeError::UnknownMode(s.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        ModeSet::new(ty, modes)
    }
}

impl Serialize for ModeSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Real(f64),
    Bool(bool),
}

impl Value {
    pub fn signal_type(&self) -> SignalType {
        match self {
            Value::Real(_) => SignalType::Real,
            Value::Bool(_) => SignalType::Bool,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(x) => write!(f, "{x}"),
            Value::Bool(b) => write!(f, "{}", if *b { "True" } else { "False" }),
        }
    }
}

/// A (reported, actual) pair; a failure state when the two differ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureState {
    pub reported: Value,
    pub actual: Value,
}

impl FailureState {
    pub fn new(reported: Value, actual: Value) -> Self {
        FailureState { reported, actual }
    }

    pub fn is_failure(&self) -> bool {
        self.reported != self.actual
    }
}

pub fn classify_real(reported: f64, actual: f64) -> FailureMode {
    if reported < actual {
        FailureMode::Low
    } else if reported > actual {
        FailureMode::High
    } else {
        FailureMode::Match
    }
}

pub fn classify_bool(reported: bool, actual: bool) -> FailureMode {
    match (reported, actual) {
        (false, true) => FailureMode::FalseFault,
        (true, false) => FailureMode::TrueFault,
        _ => FailureMode::Match,
    }
}

/// Maps a failure state to the unique partition member containing it.
pub fn classify(state: FailureState, ty: SignalType) -> Result<FailureMode, ModeError> {
    match (state.reported, state.actual, ty) {
        (Value::Real(r), Value::Real(a), SignalType::Real) => {
            for x in [r, a] {
                if !x.is_finite() {
                    return Err(ModeError::NonFinite(x));
                }
            }
            Ok(classify_real(r, a))
        }
        (Value::Bool(r), Value::Bool(a), SignalType::Bool) => Ok(classify_bool(r, a)),
        (r, a, ty) => {
            let bad = if r.signal_type() != ty { r } else { a };
            Err(ModeError::TypeMismatch {
                value: bad.to_string(),
                expected: ty,
            })
        }
    }
}
