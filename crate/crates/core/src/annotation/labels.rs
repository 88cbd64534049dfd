//! The three turn-label taxonomies, the dialogue quality scale, and the
//! annotation dimensions that tie them together.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! label_enum {
    ($(#[$doc:meta])* $name:ident, [$(($variant:ident, $code:literal, $display:literal)),+ $(,)?]) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            /// Canonical short code, e.g. `"e3"`.
            pub fn code(self) -> &'static str {
                match self {
                    $($name::$variant => $code),+
                }
            }

            /// Human-readable name.
            pub fn display_name(self) -> &'static str {
                match self {
                    $($name::$variant => $display),+
                }
            }

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|l| *l == self).expect("variant is in ALL")
            }

            pub fn from_index(index: usize) -> Option<$name> {
                Self::ALL.get(index).copied()
            }

            pub fn from_code(code: &str) -> Option<$name> {
                Self::ALL.iter().copied().find(|l| l.code() == code)
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.code())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let code = String::deserialize(d)?;
                $name::from_code(&code).ok_or_else(|| {
                    serde::de::Error::custom(format!(concat!("unknown ", stringify!($name), " code {:?}"), code))
                })
            }
        }
    };
}

label_enum!(
    /// Explanation-specific function of a turn.
    MoveLabel,
    [
        (TestUnderstanding, "e1", "Test understanding"),
        (TestPriorKnowledge, "e2", "Test prior knowledge"),
        (ProvideExplanation, "e3", "Provide explanation"),
        (RequestExplanation, "e4", "Request explanation"),
        (SignalUnderstanding, "e5", "Signal understanding"),
        (SignalNonUnderstanding, "e6", "Signal non-understanding"),
        (ProvideFeedback, "e7", "Provide feedback"),
        (ProvideAssessment, "e8", "Provide assessment"),
        (ProvideExtraInfo, "e9", "Provide extra info"),
        (Other, "e10", "Other"),
    ]
);

label_enum!(
    /// Communicative function of a turn.
    ActLabel,
    [
        (CheckQuestion, "d1", "Check question"),
        (WhatHowQuestion, "d2", "What/How question"),
        (OtherQuestion, "d3", "Other question"),
        (ConfirmingAnswer, "d4", "Confirming answer"),
        (DisconfirmingAnswer, "d5", "Disconfirming answer"),
        (OtherAnswer, "d6", "Other answer"),
        (AgreeingStatement, "d7", "Agreeing statement"),
        (DisagreeingStatement, "d8", "Disagreeing statement"),
        (InformingStatement, "d9", "Informing statement"),
        (Other, "d10", "Other"),
    ]
);

label_enum!(
    /// Relation of a turn's topic to the dialogue's main topic.
    TopicLabel,
    [
        (MainTopic, "t1", "Main topic"),
        (Subtopic, "t2", "Subtopic"),
        (RelatedTopic, "t3", "Related topic"),
        (NoOtherTopic, "t4", "No/Other topic"),
    ]
);

/// 5-point Likert rating of how satisfied the explainee appears.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct QualityScore(u8);

impl QualityScore {
    pub fn new(value: u8) -> Result<Self> {
        if (1..=5).contains(&value) {
            Ok(QualityScore(value))
        } else {
            Err(Error::InvalidParameter {
                name: "quality",
                reason: format!("score must be in 1..=5, got {value}"),
            })
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Zero-based label index (score 1 -> 0).
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(index: usize) -> Option<Self> {
        QualityScore::new(index as u8 + 1).ok()
    }

    pub fn code(self) -> String {
        format!("q{}", self.0)
    }
}

impl TryFrom<u8> for QualityScore {
    type Error = Error;
    fn try_from(value: u8) -> Result<Self> {
        QualityScore::new(value)
    }
}

impl From<QualityScore> for u8 {
    fn from(score: QualityScore) -> u8 {
        score.0
    }
}

/// What an annotation judgment is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Move,
    Act,
    Topic,
    Quality,
}

impl Dimension {
    pub const ALL: &'static [Dimension] = &[
        Dimension::Move,
        Dimension::Act,
        Dimension::Topic,
        Dimension::Quality,
    ];

    /// The three per-turn dimensions, excluding quality.
    pub const TURN: &'static [Dimension] = &[Dimension::Move, Dimension::Act, Dimension::Topic];

    pub fn label_count(self) -> usize {
        match self {
            Dimension::Move | Dimension::Act => 10,
            Dimension::Topic => 4,
            Dimension::Quality => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Move => "move",
            Dimension::Act => "act",
            Dimension::Topic => "topic",
            Dimension::Quality => "quality",
        }
    }

    /// Canonical short codes in label order (`e1..e10`, `d1..d10`, ...).
    pub fn codes(self) -> Vec<String> {
        match self {
            Dimension::Move => MoveLabel::ALL
                .iter()
                .map(|l| l.code().to_string())
                .collect(),
            Dimension::Act => ActLabel::ALL.iter().map(|l| l.code().to_string()).collect(),
            Dimension::Topic => TopicLabel::ALL
                .iter()
                .map(|l| l.code().to_string())
                .collect(),
            Dimension::Quality => (1..=5).map(|v| format!("q{v}")).collect(),
        }
    }

    pub fn code_of(self, index: usize) -> String {
        self.codes()
            .get(index)
            .cloned()
            .unwrap_or_else(|| panic!("label index {index} out of range for {}", self.as_str()))
    }

    /// Parse a canonical short code into a zero-based label index.
    pub fn parse_code(self, code: &str) -> Result<usize> {
        self.codes()
            .iter()
            .position(|c| c == code)
            .ok_or_else(|| Error::InvalidLabelCode {
                code: code.to_string(),
                dimension: self.as_str().to_string(),
            })
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Dimension {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Dimension::ALL
            .iter()
            .copied()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "dimension",
                reason: format!("unknown dimension {s:?}"),
            })
    }
}
