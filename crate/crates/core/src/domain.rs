//! Domain types shared by every stage of the pipeline: student state
//! features, the intent taxonomy, dialog turns and grounding.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A classifiable property of the last student utterance or of the
/// conversation, identified by a letter `a`..`m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateFeature {
    WrongMethod,
    AlgebraError,
    NumericalError,
    IntuitiveSolution,
    Unclear,
    AnsweredCorrectly,
    AsksHowToSolve,
    AsksForTheorem,
    AsksForCalculation,
    NonCanonicalSolution,
    CanonicalSolution,
    LacksMotivation,
    LacksConfidence,
}

impl StateFeature {
    pub const ALL: [StateFeature; 13] = [
        StateFeature::WrongMethod,
        StateFeature::AlgebraError,
        StateFeature::NumericalError,
        StateFeature::IntuitiveSolution,
        StateFeature::Unclear,
        StateFeature::AnsweredCorrectly,
        StateFeature::AsksHowToSolve,
        StateFeature::AsksForTheorem,
        StateFeature::AsksForCalculation,
        StateFeature::NonCanonicalSolution,
        StateFeature::CanonicalSolution,
        StateFeature::LacksMotivation,
        StateFeature::LacksConfidence,
    ];

    pub fn code(self) -> char {
        (b'a' + self as u8) as char
    }

    /// Case-insensitive decode of a feature letter.
    pub fn from_code(code: char) -> Option<Self> {
        let lower = code.to_ascii_lowercase();
        if !lower.is_ascii_lowercase() {
            return None;
        }
        StateFeature::ALL.get((lower as u8 - b'a') as usize).copied()
    }

    /// The label text shown to the state-tracing model.
    pub fn description(self) -> &'static str {
        match self {
            StateFeature::WrongMethod => "The student is using or suggesting a wrong method or taking a wrong path to solve the problem",
            StateFeature::AlgebraError => "The student made an error in the algebraic manipulation",
            StateFeature::NumericalError => "The student made a numerical error",
            StateFeature::IntuitiveSolution => "The student provided an intuitive or incomplete solution",
            StateFeature::Unclear => "The student's answer is not clear or ambiguous",
            StateFeature::AnsweredCorrectly => "The student correctly answered the tutor's previous question",
            StateFeature::AsksHowToSolve => "The student is explicitly asking about how to solve the problem",
            StateFeature::AsksForTheorem => "The student is explicitly asking the tutor to state a specific theorem",
            StateFeature::AsksForCalculation => "The student is explicitly asking the tutor to do a numerical calculation",
            StateFeature::NonCanonicalSolution => "The student and tutor arrived at a complete solution for the entirety of the initial *Problem Statement*",
            StateFeature::CanonicalSolution => "The student and tutor arrived at a complete solution for the entirety of the initial *Problem Statement* equivalent to the method provided in the *Provided Solution*",
            StateFeature::LacksMotivation => "The student shows a strong lack of motivation",
            StateFeature::LacksConfidence => "The student shows a strong lack of self-confidence",
        }
    }
}

impl fmt::Display for StateFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl Serialize for StateFeature {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_char(self.code())
    }
}

impl<'de> Deserialize<'de> for StateFeature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => StateFeature::from_code(c)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown state feature `{s}`"))),
            _ => Err(serde::de::Error::custom(format!("unknown state feature `{s}`"))),
        }
    }
}

pub type FeatureSet = BTreeSet<StateFeature>;

/// Renders a feature set as its concatenated letters, e.g. `"bf"`.
pub fn feature_letters(features: &FeatureSet) -> String {
    features.iter().map(|f| f.code()).collect()
}

/// Parses a string of feature letters, ignoring anything that is not `a`..`m`.
pub fn parse_feature_letters(letters: &str) -> FeatureSet {
    letters.chars().filter_map(StateFeature::from_code).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntentCategory {
    Structuring,
    Problematizing,
    Affective,
    Generic,
}

/// A single-turn pedagogical goal of a tutor utterance.
///
/// Variants are declared in taxonomy row order; the derived `Ord` is the
/// order in which prompt additions are emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Intent {
    GuideSelfCorrection,
    Correct,
    SeekStrategy,
    Hint,
    State,
    Offload,
    IdentifyLimits,
    PromptIntuition,
    ElicitArticulation,
    SelfReflect,
    MaintainChallenge,
    BolsterConfidence,
    PromoteControl,
    EvokeCuriosity,
    Greetings,
    Other,
}

impl Intent {
    pub const ALL: [Intent; 16] = [
        Intent::GuideSelfCorrection,
        Intent::Correct,
        Intent::SeekStrategy,
        Intent::Hint,
        Intent::State,
        Intent::Offload,
        Intent::IdentifyLimits,
        Intent::PromptIntuition,
        Intent::ElicitArticulation,
        Intent::SelfReflect,
        Intent::MaintainChallenge,
        Intent::BolsterConfidence,
        Intent::PromoteControl,
        Intent::EvokeCuriosity,
        Intent::Greetings,
        Intent::Other,
    ];

    pub fn category(self) -> IntentCategory {
        use Intent::*;
        match self {
            GuideSelfCorrection | Correct | SeekStrategy | Hint | State | Offload => {
                IntentCategory::Structuring
            }
            IdentifyLimits | PromptIntuition | ElicitArticulation | SelfReflect => {
                IntentCategory::Problematizing
            }
            MaintainChallenge | BolsterConfidence | PromoteControl | EvokeCuriosity => {
                IntentCategory::Affective
            }
            Greetings | Other => IntentCategory::Generic,
        }
    }

    pub fn display_name(self) -> &'static str {
        use Intent::*;
        match self {
            GuideSelfCorrection => "Guide Self-correction",
            Correct => "Correct",
            SeekStrategy => "Seek Strategy",
            Hint => "Hint",
            State => "State",
            Offload => "Offload",
            IdentifyLimits => "Identify Limits",
            PromptIntuition => "Prompt Intuition/Hypothesis",
            ElicitArticulation => "Elicit Articulation",
            SelfReflect => "(Self-)Reflect",
            MaintainChallenge => "Maintain Sense of Challenge",
            BolsterConfidence => "Bolster Self-Confidence",
            PromoteControl => "Promote Sense of Control",
            EvokeCuriosity => "Evoke Curiosity",
            Greetings => "State Greetings/Farewell",
            Other => "Other",
        }
    }

    /// Symbolic identifier used in graph files and traces.
    pub fn id(self) -> &'static str {
        use Intent::*;
        match self {
            GuideSelfCorrection => "GuideSelfCorrection",
            Correct => "Correct",
            SeekStrategy => "SeekStrategy",
            Hint => "Hint",
            State => "State",
            Offload => "Offload",
            IdentifyLimits => "IdentifyLimits",
            PromptIntuition => "PromptIntuition",
            ElicitArticulation => "ElicitArticulation",
            SelfReflect => "SelfReflect",
            MaintainChallenge => "MaintainChallenge",
            BolsterConfidence => "BolsterConfidence",
            PromoteControl => "PromoteControl",
            EvokeCuriosity => "EvokeCuriosity",
            Greetings => "Greetings",
            Other => "Other",
        }
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown intent `{0}`")]
pub struct UnknownIntent(pub String);

impl FromStr for Intent {
    type Err = UnknownIntent;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Intent::ALL
            .into_iter()
            .find(|i| i.id() == s)
            .ok_or_else(|| UnknownIntent(s.to_string()))
    }
}

pub type IntentSet = BTreeSet<Intent>;

/// One tutoring turn: the tutor utterance followed by the student's reply.
///
/// The intents are those that conditioned `tutor_text`; the features
/// describe `student_text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub tutor_text: String,
    pub student_text: String,
    #[serde(default)]
    pub features: FeatureSet,
    #[serde(default)]
    pub intents: IntentSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub justification: Option<String>,
}

impl Turn {
    pub fn new(index: usize, tutor_text: impl Into<String>, student_text: impl Into<String>) -> Self {
        Turn {
            index,
            tutor_text: tutor_text.into(),
            student_text: student_text.into(),
            features: FeatureSet::new(),
            intents: IntentSet::new(),
            justification: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HistoryError {
    #[error("turn index {found} where {expected} was expected")]
    NonContiguous { expected: usize, found: usize },
}

/// Ordered dialog history with contiguous 1-based turn indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DialogHistory {
    turns: Vec<Turn>,
}

impl DialogHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_turns(turns: Vec<Turn>) -> Result<Self, HistoryError> {
        for (pos, turn) in turns.iter().enumerate() {
            if turn.index != pos + 1 {
                return Err(HistoryError::NonContiguous {
                    expected: pos + 1,
                    found: turn.index,
                });
            }
        }
        Ok(DialogHistory { turns })
    }

    /// Builds a history from `(tutor, student)` pairs, numbering them from 1.
    pub fn from_pairs<T: Into<String>, S: Into<String>>(pairs: impl IntoIterator<Item = (T, S)>) -> Self {
        let turns = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (tutor, student))| Turn::new(i + 1, tutor, student))
            .collect();
        DialogHistory { turns }
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn last(&self) -> Option<&Turn> {
        self.turns.last()
    }

    pub fn last_mut(&mut self) -> Option<&mut Turn> {
        self.turns.last_mut()
    }

    /// Appends a turn carrying the next index.
    pub fn push(&mut self, tutor_text: impl Into<String>, student_text: impl Into<String>) -> &mut Turn {
        let index = self.turns.len() + 1;
        self.turns.push(Turn::new(index, tutor_text, student_text));
        self.turns.last_mut().expect("just pushed")
    }

    /// The last `n` turns, renumbered from 1.
    pub fn tail(&self, n: usize) -> DialogHistory {
        let start = self.turns.len().saturating_sub(n);
        let turns = self.turns[start..]
            .iter()
            .enumerate()
            .map(|(i, t)| Turn { index: i + 1, ..t.clone() })
            .collect();
        DialogHistory { turns }
    }

    pub fn has_student_utterance(&self) -> bool {
        self.turns.iter().any(|t| !t.student_text.is_empty())
    }
}

impl<'de> Deserialize<'de> for DialogHistory {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let turns = Vec::<Turn>::deserialize(deserializer)?;
        DialogHistory::from_turns(turns).map_err(serde::de::Error::custom)
    }
}

/// Problem statement and reference solution given to the tutor and tracer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grounding {
    pub problem_id: String,
    pub problem_statement: String,
    pub solution: String,
}

/// Renders the dialog as `Tutor: ` / `Student: ` lines in chronological
/// order. Empty utterances (an unanswered opening, a student-first first
/// turn) produce no line.
pub fn render_transcript(history: &DialogHistory, max_pairs: Option<usize>) -> String {
    let turns = history.turns();
    let start = match max_pairs {
        Some(n) => turns.len().saturating_sub(n),
        None => 0,
    };
    let mut lines = Vec::new();
    for turn in &turns[start..] {
        if !turn.tutor_text.is_empty() {
            lines.push(format!("Tutor: {}", turn.tutor_text));
        }
        if !turn.student_text.is_empty() {
            lines.push(format!("Student: {}", turn.student_text));
        }
    }
    lines.join("\n")
}
