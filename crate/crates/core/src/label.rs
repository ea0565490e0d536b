use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const N_CLASSES: usize = 3;

/// Event classes. Ordinals are fixed and used as class indices everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventLabel {
    #[serde(rename = "C0")]
    NoEvent = 0,
    #[serde(rename = "C1")]
    Jackhammer = 1,
    #[serde(rename = "C2")]
    Excavator = 2,
}

impl EventLabel {
    pub const ALL: [EventLabel; N_CLASSES] = [
        EventLabel::NoEvent,
        EventLabel::Jackhammer,
        EventLabel::Excavator,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            EventLabel::NoEvent => "C0",
            EventLabel::Jackhammer => "C1",
            EventLabel::Excavator => "C2",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            EventLabel::NoEvent => "no event",
            EventLabel::Jackhammer => "jackhammer",
            EventLabel::Excavator => "excavator",
        }
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for EventLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "C0" => Ok(EventLabel::NoEvent),
            "C1" => Ok(EventLabel::Jackhammer),
            "C2" => Ok(EventLabel::Excavator),
            other => Err(format!("unknown label `{other}` (expected C0, C1 or C2)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordinals_are_fixed() {
        assert_eq!(EventLabel::ALL.len(), 3);
        for (i, l) in EventLabel::ALL.iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(EventLabel::from_index(i), Some(*l));
            assert_eq!(l.code().parse::<EventLabel>().unwrap(), *l);
        }
        assert!("C3".parse::<EventLabel>().is_err());
    }
}
