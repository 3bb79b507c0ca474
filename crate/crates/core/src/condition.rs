//! Boolean conditions over state features, as written on transition-graph
//! edges.
//!
//! Grammar (whitespace is insignificant, letters are case-insensitive):
//!
//! ```text
//! expr  := or
//! or    := and ('|' and)*
//! and   := unary ('&' unary)*
//! unary := '!' unary | atom
//! atom  := feature-letter | 'true' | '(' expr ')'
//! ```
//!
//! A chain of the same operator parses to one n-ary node; an explicitly
//! parenthesised group stays a separate child. [`ConditionExpr`]'s
//! `Display` prints the minimal parenthesisation that parses back to the
//! identical tree.

use std::fmt;

use crate::domain::{FeatureSet, StateFeature};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ConditionExpr {
    Feature(StateFeature),
    Not(Box<ConditionExpr>),
    /// At least two children.
    And(Vec<ConditionExpr>),
    /// At least two children.
    Or(Vec<ConditionExpr>),
    True,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConditionError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown state feature `{letter}` at offset {offset}")]
    UnknownFeature { letter: String, offset: usize },
}

impl ConditionExpr {
    pub fn parse(text: &str) -> Result<Self, ConditionError> {
        let mut parser = Parser { src: text, pos: 0 };
        parser.skip_ws();
        if parser.pos == text.len() {
            return Err(ConditionError::Syntax {
                offset: 0,
                message: "empty condition".into(),
            });
        }
        let expr = parser.parse_or()?;
        parser.skip_ws();
        if parser.pos != text.len() {
            return Err(parser.syntax(format!("unexpected `{}`", parser.peek_char().unwrap())));
        }
        Ok(expr)
    }

    pub fn eval(&self, features: &FeatureSet) -> bool {
        match self {
            ConditionExpr::Feature(f) => features.contains(f),
            ConditionExpr::Not(child) => !child.eval(features),
            ConditionExpr::And(children) => children.iter().all(|c| c.eval(features)),
            ConditionExpr::Or(children) => children.iter().any(|c| c.eval(features)),
            ConditionExpr::True => true,
        }
    }

    /// Every feature mentioned by the expression, in first-occurrence order.
    pub fn features(&self) -> Vec<StateFeature> {
        let mut out = Vec::new();
        self.collect_features(&mut out);
        out
    }

    fn collect_features(&self, out: &mut Vec<StateFeature>) {
        match self {
            ConditionExpr::Feature(f) => {
                if !out.contains(f) {
                    out.push(*f)
                }
            }
            ConditionExpr::Not(c) => c.collect_features(out),
            ConditionExpr::And(cs) | ConditionExpr::Or(cs) => {
                cs.iter().for_each(|c| c.collect_features(out))
            }
            ConditionExpr::True => {}
        }
    }
}

impl std::str::FromStr for ConditionExpr {
    type Err = ConditionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConditionExpr::parse(s)
    }
}

impl fmt::Display for ConditionExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionExpr::Feature(feat) => write!(f, "{}", feat.code()),
            ConditionExpr::True => f.write_str("true"),
            ConditionExpr::Not(child) => match **child {
                ConditionExpr::And(_) | ConditionExpr::Or(_) => write!(f, "!({child})"),
                _ => write!(f, "!{child}"),
            },
            ConditionExpr::And(children) => {
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" & ")?;
                    }
                    match c {
                        ConditionExpr::And(_) | ConditionExpr::Or(_) => write!(f, "({c})")?,
                        _ => write!(f, "{c}")?,
                    }
                }
                Ok(())
            }
            ConditionExpr::Or(children) => {
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" | ")?;
                    }
                    match c {
                        ConditionExpr::Or(_) => write!(f, "({c})")?,
                        _ => write!(f, "{c}")?,
                    }
                }
                Ok(())
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn syntax(&self, message: impl Into<String>) -> ConditionError {
        ConditionError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_char() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn eat(&mut self, want: char) -> bool {
        self.skip_ws();
        if self.peek_char() == Some(want) {
            self.pos += want.len_utf8();
            true
        } else {
            false
        }
    }

    fn parse_or(&mut self) -> Result<ConditionExpr, ConditionError> {
        let first = self.parse_and()?;
        let mut children = vec![first];
        while self.eat('|') {
            children.push(self.parse_and()?);
        }
        Ok(if children.len() == 1 {
            children.pop().unwrap()
        } else {
            ConditionExpr::Or(children)
        })
    }

    fn parse_and(&mut self) -> Result<ConditionExpr, ConditionError> {
        let first = self.parse_unary()?;
        let mut children = vec![first];
        while self.eat('&') {
            children.push(self.parse_unary()?);
        }
        Ok(if children.len() == 1 {
            children.pop().unwrap()
        } else {
            ConditionExpr::And(children)
        })
    }

    fn parse_unary(&mut self) -> Result<ConditionExpr, ConditionError> {
        if self.eat('!') {
            return Ok(ConditionExpr::Not(Box::new(self.parse_unary()?)));
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<ConditionExpr, ConditionError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek_char() {
            None => Err(self.syntax("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let inner = self.parse_or()?;
                if !self.eat(')') {
                    return Err(match self.peek_char() {
                        None => self.syntax("expected `)` before end of input"),
                        Some(c) => self.syntax(format!("expected `)`, found `{c}`")),
                    });
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let word_len = self.src[start..]
                    .find(|ch: char| !ch.is_ascii_alphabetic())
                    .unwrap_or(self.src.len() - start);
                let word = &self.src[start..start + word_len];
                if word.eq_ignore_ascii_case("true") {
                    self.pos += word_len;
                    return Ok(ConditionExpr::True);
                }
                if word_len > 1 {
                    return Err(self.syntax(format!("unexpected identifier `{word}`")));
                }
                match StateFeature::from_code(c) {
                    Some(f) => {
                        self.pos += 1;
                        Ok(ConditionExpr::Feature(f))
                    }
                    None => Err(ConditionError::UnknownFeature {
                        letter: word.to_string(),
                        offset: start,
                    }),
                }
            }
            Some(c) => Err(self.syntax(format!("unexpected `{c}`"))),
        }
    }
}
