//! Stop-at-first-count feedback schemes.
//!
//! Message 0 is always the all-zero input. With `M - 1` nonzero messages the
//! horizon is cut into `M - 1` equal slots; message `m` transmits at power `A`
//! during slot `m` until the feedback link reports a count, then stays silent.
//! The decoder answers 0 when nothing was counted and otherwise the slot of
//! the first count. The binary scheme is the `M = 2` case, with one slot
//! covering the whole horizon.
//!
//! Slot `k` covers `((k-1) tau, k tau]` in event terms: the encoder's segment
//! for slot `k` is in force up to and including its end, so a count exactly on
//! a boundary was produced by, and is decoded as, the earlier slot.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytics::{self, PerfReport};
use crate::channel::{ChannelParams, Decoder, EncoderPolicy, MessageId};
use crate::error::{Error, Result};
use crate::process::{RateSegment, Timeline};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SchemeKind {
    BinaryZeroDark,
    BinaryDarkWindow,
    MaryZeroDark,
    MaryDarkWindow,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::BinaryZeroDark,
        SchemeKind::BinaryDarkWindow,
        SchemeKind::MaryZeroDark,
        SchemeKind::MaryDarkWindow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::BinaryZeroDark => "binary-zero-dark",
            SchemeKind::BinaryDarkWindow => "binary-dark-window",
            SchemeKind::MaryZeroDark => "mary-zero-dark",
            SchemeKind::MaryDarkWindow => "mary-dark-window",
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, SchemeKind::BinaryZeroDark | SchemeKind::BinaryDarkWindow)
    }

    pub fn is_zero_dark(self) -> bool {
        matches!(self, SchemeKind::BinaryZeroDark | SchemeKind::MaryZeroDark)
    }

    /// The kind that fits `messages` equiprobable messages over a channel with
    /// dark current `dark`.
    pub fn natural(messages: usize, dark: f64) -> Self {
        match (messages == 2, dark == 0.0) {
            (true, true) => SchemeKind::BinaryZeroDark,
            (true, false) => SchemeKind::BinaryDarkWindow,
            (false, true) => SchemeKind::MaryZeroDark,
            (false, false) => SchemeKind::MaryDarkWindow,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" | "binary-zero-dark" => Ok(SchemeKind::BinaryZeroDark),
            "binary-dark" | "binary-dark-window" => Ok(SchemeKind::BinaryDarkWindow),
            "mary" | "mary-zero-dark" => Ok(SchemeKind::MaryZeroDark),
            "mary-dark" | "mary-dark-window" => Ok(SchemeKind::MaryDarkWindow),
            other => Err(Error::invalid(format!(
                "unknown scheme {other:?}; expected one of binary, binary-dark, mary, mary-dark \
                 (or the long forms {})",
                SchemeKind::ALL.map(SchemeKind::as_str).join(", ")
            ))),
        }
    }
}

impl TryFrom<String> for SchemeKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SchemeKind> for String {
    fn from(k: SchemeKind) -> String {
        k.as_str().to_owned()
    }
}

/// Parameters of a scheme: kind, message count `M`, transmit power `A`,
/// observation horizon (`T`, or the window `Delta` for dark-current kinds) and
/// dark current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    pub messages: usize,
    pub power: f64,
    pub horizon: f64,
    pub dark_current: f64,
}

impl SchemeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kind.is_binary() && self.messages != 2 {
            return Err(Error::invalid(format!(
                "{} requires M = 2, got {}",
                self.kind, self.messages
            )));
        }
        if self.messages < 2 {
            return Err(Error::invalid(format!("M must be >= 2, got {}", self.messages)));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::invalid(format!("A must be finite and > 0, got {}", self.power)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid(format!(
                "horizon must be finite and > 0, got {}",
                self.horizon
            )));
        }
        if !(self.dark_current >= 0.0 && self.dark_current.is_finite()) {
            return Err(Error::invalid(format!(
                "dark current must be finite and >= 0, got {}",
                self.dark_current
            )));
        }
        if self.kind.is_zero_dark() && self.dark_current != 0.0 {
            return Err(Error::invalid(format!(
                "{} requires dark current 0, got {}",
                self.kind, self.dark_current
            )));
        }
        Ok(())
    }

    /// Width of one signalling slot.
    pub fn slot_width(&self) -> f64 {
        self.horizon / (self.messages - 1) as f64
    }
}

/// Encoder for the slot family. Stateless; one instance serves every trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotEncoder {
    power: f64,
    horizon: f64,
    slots: usize,
}

impl SlotEncoder {
    /// End of slot `k` (`1 <= k <= slots`). The last slot ends exactly at the
    /// horizon.
    fn boundary(&self, k: usize) -> f64 {
        if k >= self.slots {
            self.horizon
        } else {
            k as f64 * (self.horizon / self.slots as f64)
        }
    }

    /// Slot whose segment produced a count at `t > 0`.
    fn slot_of(&self, t: f64) -> usize {
        let tau = self.horizon / self.slots as f64;
        let mut k = ((t / tau).ceil() as usize).clamp(1, self.slots);
        while k > 1 && t <= self.boundary(k - 1) {
            k -= 1;
        }
        while k < self.slots && t > self.boundary(k) {
            k += 1;
        }
        k
    }

    fn segment(&self, message: MessageId, now: f64, history: &Timeline) -> RateSegment {
        if message == 0 || !history.is_empty() {
            return RateSegment::silent();
        }
        let start = if message == 1 { 0.0 } else { self.boundary(message - 1) };
        let end = self.boundary(message);
        if now < start {
            RateSegment::zero_until(start)
        } else if now < end {
            RateSegment::new(self.power, end)
        } else {
            RateSegment::silent()
        }
    }
}

impl EncoderPolicy for SlotEncoder {
    fn query(&self, message: MessageId, now: f64, history: &Timeline, _: &mut SimRng) -> RateSegment {
        self.segment(message, now, history)
    }
}

impl Decoder for SlotEncoder {
    fn decode(&self, timeline: &Timeline) -> MessageId {
        match timeline.first_event() {
            Some(t) if t <= self.horizon => self.slot_of(t),
            _ => 0,
        }
    }
}

/// A validated scheme: encoder policy plus decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    spec: SchemeSpec,
    encoder: SlotEncoder,
}

impl Scheme {
    pub fn from_spec(spec: SchemeSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            encoder: SlotEncoder {
                power: spec.power,
                horizon: spec.horizon,
                slots: spec.messages - 1,
            },
        })
    }

    pub fn spec(&self) -> &SchemeSpec {
        &self.spec
    }

    pub fn encoder(&self) -> &SlotEncoder {
        &self.encoder
    }

    /// Channel seen by this scheme. No peak cap is imposed; the encoder never
    /// exceeds `A`, so setting `peak_power = A` is always admissible.
    pub fn params(&self) -> ChannelParams {
        ChannelParams {
            dark_current: self.spec.dark_current,
            peak_power: None,
        }
    }

    pub fn check_message(&self, message: MessageId) -> Result<()> {
        if message < self.spec.messages {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "message {message} out of range for M = {}",
                self.spec.messages
            )))
        }
    }

    /// Closed-form performance, where one is known. The M-ary scheme with dark
    /// current only has a union bound ([`analytics::mary_dark_error_bound`]).
    pub fn closed_form(&self) -> Option<PerfReport> {
        let s = &self.spec;
        match s.kind {
            SchemeKind::BinaryZeroDark => analytics::closed_form_binary(s.power, s.horizon).ok(),
            SchemeKind::BinaryDarkWindow => {
                analytics::closed_form_binary_dark(s.power, s.horizon, s.dark_current).ok()
            }
            SchemeKind::MaryZeroDark => {
                analytics::closed_form_mary(s.messages, s.power, s.horizon).ok()
            }
            SchemeKind::MaryDarkWindow if s.dark_current == 0.0 => {
                analytics::closed_form_mary(s.messages, s.power, s.horizon).ok()
            }
            SchemeKind::MaryDarkWindow => None,
        }
    }
}

impl EncoderPolicy for Scheme {
    fn query(&self, message: MessageId, now: f64, history: &Timeline, rng: &mut SimRng) -> RateSegment {
        self.encoder.query(message, now, history, rng)
    }
}

impl Decoder for Scheme {
    fn decode(&self, timeline: &Timeline) -> MessageId {
        self.encoder.decode(timeline)
    }
}

/// Binary scheme without dark current.
pub fn make_binary(power: f64, horizon: f64) -> Result<Scheme> {
    Scheme::from_spec(SchemeSpec {
        kind: SchemeKind::BinaryZeroDark,
        messages: 2,
        power,
        horizon,
        dark_current: 0.0,
    })
}

/// Binary scheme over a short window `window` with dark current `dark`.
pub fn make_binary_dark(power: f64, window: f64, dark: f64) -> Result<Scheme> {
    Scheme::from_spec(SchemeSpec {
        kind: SchemeKind::BinaryDarkWindow,
        messages: 2,
        power,
        horizon: window,
        dark_current: dark,
    })
}

/// M-ary slot scheme without dark current.
pub fn make_mary(messages: usize, power: f64, horizon: f64) -> Result<Scheme> {
    Scheme::from_spec(SchemeSpec {
        kind: SchemeKind::MaryZeroDark,
        messages,
        power,
        horizon,
        dark_current: 0.0,
    })
}

/// M-ary slot scheme over a short window `window` with dark current `dark`.
pub fn make_mary_dark(messages: usize, power: f64, window: f64, dark: f64) -> Result<Scheme> {
    Scheme::from_spec(SchemeSpec {
        kind: SchemeKind::MaryDarkWindow,
        messages,
        power,
        horizon: window,
        dark_current: dark,
    })
}

/// Default transmit power for the dark-window kinds: `1e4`, raised to
/// `1e3 * dark` for strong dark current so the default window still holds at
/// least ten expected signal counts.
pub fn default_dark_power(dark: f64) -> f64 {
    f64::max(1e4, 1e3 * dark)
}

/// Default window for the dark-window kinds: `0.01 / dark`, or `0.01` when
/// there is no dark current. Together with [`default_dark_power`] this keeps
/// both the spurious-count and the miss probability at or below 1%.
pub fn default_dark_window(dark: f64) -> f64 {
    if dark > 0.0 {
        1e-2 / dark
    } else {
        1e-2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::run_trial;
    use crate::rng::RandomSource;

    fn tl(h: f64, ev: &[f64]) -> Timeline {
        Timeline::from_events(h, ev.to_vec()).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(make_binary(0.0, 1.0).is_err());
        assert!(make_binary(1.0, 0.0).is_err());
        assert!(make_mary(1, 1.0, 1.0).is_err());
        assert!(make_binary_dark(1.0, 1.0, -1.0).is_err());
        let bad = SchemeSpec {
            kind: SchemeKind::BinaryZeroDark,
            messages: 3,
            power: 1.0,
            horizon: 1.0,
            dark_current: 0.0,
        };
        assert!(Scheme::from_spec(bad).is_err());
        let dark = SchemeSpec {
            messages: 2,
            dark_current: 0.5,
            ..bad
        };
        assert!(Scheme::from_spec(dark).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("binary".parse::<SchemeKind>().unwrap(), SchemeKind::BinaryZeroDark);
        assert_eq!("mary-dark-window".parse::<SchemeKind>().unwrap(), SchemeKind::MaryDarkWindow);
        assert!("ternary".parse::<SchemeKind>().is_err());
        for k in SchemeKind::ALL {
            assert_eq!(k.as_str().parse::<SchemeKind>().unwrap(), k);
        }
    }

    #[test]
    fn mary_encoder_segments() {
        let s = make_mary(4, 100.0, 3.0).unwrap();
        let e = s.encoder();
        let empty = tl(3.0, &[]);
        assert_eq!(e.segment(0, 0.0, &empty), RateSegment::silent());
        assert_eq!(e.segment(2, 0.0, &empty), RateSegment::zero_until(1.0));
        assert_eq!(e.segment(2, 1.0, &empty), RateSegment::new(100.0, 2.0));
        assert_eq!(e.segment(3, 2.0, &empty), RateSegment::new(100.0, 3.0));
        assert_eq!(e.segment(2, 2.0, &empty), RateSegment::silent());
        assert_eq!(e.segment(2, 1.5, &tl(3.0, &[1.2])), RateSegment::silent());
    }

    #[test]
    fn decoder_slots_and_boundaries() {
        let s = make_mary(4, 100.0, 3.0).unwrap();
        assert_eq!(s.decode(&tl(3.0, &[])), 0);
        assert_eq!(s.decode(&tl(3.0, &[0.3])), 1);
        assert_eq!(s.decode(&tl(3.0, &[1.0])), 1);
        assert_eq!(s.decode(&tl(3.0, &[1.0000001])), 2);
        assert_eq!(s.decode(&tl(3.0, &[2.5, 2.7])), 3);
        assert_eq!(s.decode(&tl(3.0, &[3.0])), 3);
        // first count wins
        assert_eq!(s.decode(&tl(3.0, &[0.5, 2.5])), 1);
    }

    #[test]
    fn binary_decoder() {
        let s = make_binary(1.0, 2.0).unwrap();
        assert_eq!(s.decode(&tl(2.0, &[])), 0);
        assert_eq!(s.decode(&tl(2.0, &[1.9])), 1);
    }

    #[test]
    fn zero_message_is_free_and_correct_without_dark_current() {
        for s in [make_binary(3.0, 2.0).unwrap(), make_mary(5, 3.0, 2.0).unwrap()] {
            for i in 0..500 {
                let r = run_trial(&s, &s, 0, &s.params(), 2.0, RandomSource::new(4, i)).unwrap();
                assert_eq!(r.energy, 0.0);
                assert!(r.correct);
            }
        }
    }

    #[test]
    fn counted_paths_decode_to_sent_slot() {
        let s = make_mary(4, 100.0, 3.0).unwrap();
        for i in 0..2000 {
            let r = run_trial(&s, &s, 2, &s.params(), 3.0, RandomSource::new(5, i)).unwrap();
            if !r.timeline.is_empty() {
                assert_eq!(r.decoded, 2);
                let t = r.timeline.first_event().unwrap();
                assert!(t > 1.0 && t <= 2.0);
            }
        }
    }

    #[test]
    fn peak_cap_at_power_is_admissible() {
        let s = make_mary_dark(4, 50.0, 0.2, 2.0).unwrap();
        let params = ChannelParams::new(2.0, Some(50.0)).unwrap();
        for m in 0..4 {
            for i in 0..300 {
                let r = run_trial(&s, &s, m, &params, 0.2, RandomSource::new(6, i)).unwrap();
                assert!(r.energy <= 50.0 * 0.2);
            }
        }
    }

    #[test]
    fn closed_form_availability() {
        assert!(make_binary(1.0, 1.0).unwrap().closed_form().is_some());
        assert!(make_binary_dark(1.0, 1.0, 1.0).unwrap().closed_form().is_some());
        assert!(make_mary(3, 1.0, 1.0).unwrap().closed_form().is_some());
        assert!(make_mary_dark(3, 1.0, 1.0, 1.0).unwrap().closed_form().is_none());
        assert_eq!(
            make_mary_dark(3, 1.0, 1.0, 0.0).unwrap().closed_form(),
            make_mary(3, 1.0, 1.0).unwrap().closed_form()
        );
    }

    #[test]
    fn default_window_meets_one_percent() {
        for dark in [0.0, 0.1, 1.0, 30.0, 1e3] {
            let r = analytics::closed_form_binary_dark(default_dark_power(dark), default_dark_window(dark), dark)
                .unwrap();
            assert!(r.p_err_given.iter().all(|&p| p <= 0.01), "{dark}: {r:?}");
        }
    }
}
