//! EIT measurement protocols: ordered lists of injection/measurement channels.
//!
//! Electrodes are numbered from 1, matching the labels on the flexible circuit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::eit::ElectrodeArray;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Channel {
    pub inject: (usize, usize),
    pub measure: (usize, usize),
}

impl Channel {
    pub const fn new(inject: (usize, usize), measure: (usize, usize)) -> Self {
        Self { inject, measure }
    }

    fn span(pair: (usize, usize)) -> (usize, usize) {
        (pair.0.min(pair.1), pair.0.max(pair.1))
    }

    pub fn measure_inside_injection(&self) -> bool {
        let (a, b) = Self::span(self.inject);
        let (c, d) = Self::span(self.measure);
        a < c && d < b
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "inject:{},{} measure:{},{}",
            self.inject.0, self.inject.1, self.measure.0, self.measure.1
        )
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut inject = None;
        let mut measure = None;
        for token in s.split_whitespace() {
            let (key, value) = token
                .split_once(':')
                .ok_or_else(|| format!("expected key:value, got {token:?}"))?;
            let (x, y) = value
                .split_once(',')
                .ok_or_else(|| format!("expected a,b in {token:?}"))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|e| format!("bad electrode {v:?}: {e}"))
            };
            let pair = (parse(x)?, parse(y)?);
            match key {
                "inject" => inject = Some(pair),
                "measure" => measure = Some(pair),
                other => return Err(format!("unknown key {other:?}")),
            }
        }
        match (inject, measure) {
            (Some(inject), Some(measure)) => Ok(Channel { inject, measure }),
            _ => Err("channel needs both inject and measure".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protocol {
    pub name: String,
    pub channels: Vec<Channel>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    ElectrodeOutOfRange { channel: usize, electrode: usize },
    DegenerateInjection { channel: usize },
    DegenerateMeasurement { channel: usize },
    MeasureOutsideInjection { channel: usize },
    Duplicate { channel: usize, first: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "protocol has no channels"),
            Violation::ElectrodeOutOfRange { channel, electrode } => {
                write!(f, "channel {channel}: electrode {electrode} out of range")
            }
            Violation::DegenerateInjection { channel } => {
                write!(f, "channel {channel}: injection pair uses one electrode twice")
            }
            Violation::DegenerateMeasurement { channel } => {
                write!(f, "channel {channel}: measurement pair uses one electrode twice")
            }
            Violation::MeasureOutsideInjection { channel } => {
                write!(f, "channel {channel}: measurement pair not strictly inside injection span")
            }
            Violation::Duplicate { channel, first } => {
                write!(f, "channel {channel} duplicates channel {first}")
            }
        }
    }
}

/// The canonical 9-channel protocol for the 13-electrode strip.
///
/// Three injection spans of decreasing width, each read out by three
/// symmetric measurement pairs nested inside it; this is the `I17 / V26, V35`
/// pattern of the 8-electrode layout carried over to 13 electrodes. Channel
/// order is the TDM order.
pub fn default_protocol_13() -> Protocol {
    const CHANNELS: [Channel; 9] = [
        Channel::new((1, 13), (2, 12)),
        Channel::new((1, 13), (4, 10)),
        Channel::new((1, 13), (6, 8)),
        Channel::new((2, 12), (3, 11)),
        Channel::new((2, 12), (5, 9)),
        Channel::new((2, 12), (6, 8)),
        Channel::new((3, 11), (4, 10)),
        Channel::new((3, 11), (5, 9)),
        Channel::new((3, 11), (6, 8)),
    ];
    Protocol {
        name: "nested-13".into(),
        channels: CHANNELS.to_vec(),
    }
}

impl Protocol {
    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// First `k` channels in TDM order.
    pub fn subset(&self, k: usize) -> Result<Protocol> {
        if k == 0 || k > self.channels.len() {
            return Err(Error::Protocol(format!(
                "subset size {k} outside 1..={}",
                self.channels.len()
            )));
        }
        Ok(Protocol {
            name: format!("{}[..{k}]", self.name),
            channels: self.channels[..k].to_vec(),
        })
    }

    /// Explicit channel selection by zero-based index, order as given.
    pub fn select(&self, indices: &[usize]) -> Result<Protocol> {
        if indices.is_empty() {
            return Err(Error::Protocol("empty channel selection".into()));
        }
        let channels = indices
            .iter()
            .map(|&i| {
                self.channels
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::Protocol(format!("channel index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Protocol {
            name: format!("{}{indices:?}", self.name),
            channels,
        })
    }

    pub fn validate(&self, array: &ElectrodeArray) -> std::result::Result<(), Vec<Violation>> {
        let mut v = Vec::new();
        if self.channels.is_empty() {
            v.push(Violation::Empty);
        }
        for (i, ch) in self.channels.iter().enumerate() {
            let mut in_range = true;
            for e in [ch.inject.0, ch.inject.1, ch.measure.0, ch.measure.1] {
                if e == 0 || e > array.n_electrodes {
                    v.push(Violation::ElectrodeOutOfRange { channel: i, electrode: e });
                    in_range = false;
                }
            }
            if ch.inject.0 == ch.inject.1 {
                v.push(Violation::DegenerateInjection { channel: i });
            }
            if ch.measure.0 == ch.measure.1 {
                v.push(Violation::DegenerateMeasurement { channel: i });
            }
            if in_range && !ch.measure_inside_injection() {
                v.push(Violation::MeasureOutsideInjection { channel: i });
            }
            if let Some(first) = self.channels[..i].iter().position(|c| c == ch) {
                v.push(Violation::Duplicate { channel: i, first });
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# protocol: {}\n", self.name);
        for ch in &self.channels {
            s.push_str(&ch.to_string());
            s.push('\n');
        }
        s
    }

    /// Parses the line format written by [`Protocol::to_text`]. Blank lines and
    /// `#` comments are ignored; a `# protocol: NAME` comment sets the name.
    pub fn from_text(text: &str) -> Result<Protocol> {
        let mut name = String::from("custom");
        let mut channels = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(n) = comment.trim().strip_prefix("protocol:") {
                    name = n.trim().to_string();
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let ch = line
                .parse::<Channel>()
                .map_err(|msg| Error::Parse { line: i + 1, msg })?;
            channels.push(ch);
        }
        Ok(Protocol { name, channels })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_protocol_shape() {
        let p = default_protocol_13();
        assert_eq!(p.len(), 9);
        assert!(p
            .channels
            .iter()
            .any(|c| c.inject == (1, 13) && c.measure.0 + c.measure.1 == 14));
        assert_eq!(p.validate(&ElectrodeArray::default()), Ok(()));
        assert_eq!(p, default_protocol_13());
    }

    #[test]
    fn subsets() {
        let p = default_protocol_13();
        assert_eq!(p.subset(9).unwrap().channels, p.channels);
        assert_eq!(p.subset(1).unwrap().channels, vec![p.channels[0]]);
        let s4 = p.subset(4).unwrap();
        let s8 = p.subset(8).unwrap();
        assert!(s4.channels.iter().all(|c| s8.channels.contains(c)));
        assert!(p.subset(0).is_err());
        assert!(p.subset(10).is_err());
    }

    proptest! {
        #[test]
        fn subset_is_prefix_monotone(j in 1usize..=9, k in 1usize..=9) {
            prop_assume!(j <= k);
            let p = default_protocol_13();
            let a = p.subset(j).unwrap();
            let b = p.subset(k).unwrap();
            prop_assert_eq!(&a.channels[..], &b.channels[..j]);
        }
    }

    #[test]
    fn select_by_index() {
        let p = default_protocol_13();
        let s = p.select(&[8, 0]).unwrap();
        assert_eq!(s.channels, vec![p.channels[8], p.channels[0]]);
        assert!(p.select(&[9]).is_err());
        assert!(p.select(&[]).is_err());
    }

    #[test]
    fn violations_are_reported_with_index() {
        let array = ElectrodeArray::default();
        let p = Protocol {
            name: "bad".into(),
            channels: vec![
                Channel::new((1, 7), (3, 5)),
                Channel::new((3, 5), (1, 7)),
                Channel::new((1, 7), (3, 5)),
                Channel::new((2, 2), (3, 3)),
                Channel::new((1, 14), (3, 5)),
            ],
        };
        let v = p.validate(&array).unwrap_err();
        assert!(v.contains(&Violation::MeasureOutsideInjection { channel: 1 }));
        assert!(v.contains(&Violation::Duplicate { channel: 2, first: 0 }));
        assert!(v.contains(&Violation::DegenerateInjection { channel: 3 }));
        assert!(v.contains(&Violation::DegenerateMeasurement { channel: 3 }));
        assert!(v.contains(&Violation::ElectrodeOutOfRange { channel: 4, electrode: 14 }));
        let empty = Protocol { name: "e".into(), channels: vec![] };
        assert_eq!(empty.validate(&array), Err(vec![Violation::Empty]));
    }

    #[test]
    fn text_format() {
        let p = default_protocol_13();
        let text = p.to_text();
        assert!(text.lines().nth(1) == Some("inject:1,13 measure:2,12"));
        assert_eq!(Protocol::from_text(&text).unwrap(), p);
        let err = Protocol::from_text("inject:1,7 measure:3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
