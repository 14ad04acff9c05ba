//! Hierarchical five-character event codes.
//!
//! A code is five characters drawn from ASCII alphanumerics and the padding
//! dot. Non-dot characters form a contiguous prefix whose length is the code's
//! level, so `A10..` is a level 3 code and `A....` is level 1. A level `n`
//! code is the child of the level `n - 1` code that shares its first `n - 1`
//! characters.
//!
//! Medical events and drug prescriptions share this shape; [`CodeKind`] keeps
//! the two namespaces apart so that a drug and a diagnosis with the same text
//! are distinct items.

use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

/// Number of characters in every code.
pub const CODE_LEN: usize = 5;

/// Prefix used in text form for codes in the drug namespace.
pub const DRUG_PREFIX: &str = "rx:";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodeError {
    #[error("invalid code {code:?}: expected exactly 5 characters, got {len}")]
    Length { code: String, len: usize },
    #[error("invalid code {code:?}: character {ch:?} is neither alphanumeric nor '.'")]
    Character { code: String, ch: char },
    #[error("invalid code {code:?}: alphanumeric character after a padding dot")]
    InteriorDot { code: String },
    #[error("invalid code {code:?}: a code needs at least one non-dot character")]
    Empty { code: String },
    #[error("cannot truncate {code} to level {level}: code is level {actual}")]
    Truncate { code: String, level: u8, actual: u8 },
}

/// Namespace of a code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum CodeKind {
    /// Diagnoses, symptoms, tests and other recorded events.
    #[default]
    Medical,
    /// Prescribed drugs.
    Drug,
}

/// A validated five-character hierarchical code.
///
/// Ordering is lexicographic on the text, medical before drug on ties; this
/// is the canonical order used for itemsets.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventCode {
    text: [u8; CODE_LEN],
    kind: CodeKind,
}

impl EventCode {
    pub fn new(text: &str, kind: CodeKind) -> Result<Self, CodeError> {
        let bytes = text.as_bytes();
        if text.chars().count() != CODE_LEN || bytes.len() != CODE_LEN {
            return Err(CodeError::Length {
                code: text.to_string(),
                len: text.chars().count(),
            });
        }
        let mut seen_dot = false;
        for &b in bytes {
            if b == b'.' {
                seen_dot = true;
            } else if b.is_ascii_alphanumeric() {
                if seen_dot {
                    return Err(CodeError::InteriorDot {
                        code: text.to_string(),
                    });
                }
            } else {
                return Err(CodeError::Character {
                    code: text.to_string(),
                    ch: b as char,
                });
            }
        }
        if bytes[0] == b'.' {
            return Err(CodeError::Empty {
                code: text.to_string(),
            });
        }
        let mut buf = [0u8; CODE_LEN];
        buf.copy_from_slice(bytes);
        Ok(EventCode { text: buf, kind })
    }

    pub fn medical(text: &str) -> Result<Self, CodeError> {
        Self::new(text, CodeKind::Medical)
    }

    pub fn drug(text: &str) -> Result<Self, CodeError> {
        Self::new(text, CodeKind::Drug)
    }

    /// Parses a code read from a data file.
    ///
    /// Longer forms such as `H33..00` carry trailing term digits after the
    /// five-character code; only the first five characters are kept.
    pub fn from_record(raw: &str, kind: CodeKind) -> Result<Self, CodeError> {
        let raw = raw.trim();
        if raw.is_ascii() && raw.len() > CODE_LEN {
            Self::new(&raw[..CODE_LEN], kind)
        } else {
            Self::new(raw, kind)
        }
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn is_drug(&self) -> bool {
        self.kind == CodeKind::Drug
    }

    /// The five characters of the code, without namespace marker.
    pub fn text(&self) -> &str {
        // Validated ASCII on construction.
        core::str::from_utf8(&self.text).unwrap_or("?????")
    }

    /// Number of non-dot characters, in `1..=5`.
    pub fn level(&self) -> u8 {
        self.text.iter().take_while(|&&b| b != b'.').count() as u8
    }

    /// True iff `self` is exactly one level above `child` in the same branch.
    pub fn is_parent_of(&self, child: &EventCode) -> bool {
        child.level() == self.level() + 1 && self.shares_prefix(child)
    }

    /// True iff `self` is a strictly shallower code on `desc`'s branch.
    pub fn is_ancestor_of(&self, desc: &EventCode) -> bool {
        self.level() < desc.level() && self.shares_prefix(desc)
    }

    /// True iff `code` equals `self` or lies in the subtree below it.
    pub fn covers(&self, code: &EventCode) -> bool {
        self == code || self.is_ancestor_of(code)
    }

    /// Replaces every character after position `level` with a dot.
    pub fn truncate_to_level(&self, level: u8) -> Result<EventCode, CodeError> {
        let actual = self.level();
        if level == 0 || level > actual {
            return Err(CodeError::Truncate {
                code: self.to_string(),
                level,
                actual,
            });
        }
        let mut text = self.text;
        for b in text.iter_mut().skip(level as usize) {
            *b = b'.';
        }
        Ok(EventCode {
            text,
            kind: self.kind,
        })
    }

    /// Rolls the code up to at most `level`; shallower codes are unchanged.
    pub fn generalize(&self, level: u8) -> EventCode {
        let target = level.clamp(1, self.level());
        self.truncate_to_level(target).unwrap_or(*self)
    }

    fn shares_prefix(&self, other: &EventCode) -> bool {
        let n = self.level() as usize;
        self.kind == other.kind && self.text[..n] == other.text[..n]
    }
}

/// Level of a code.
pub fn code_level(code: &EventCode) -> u8 {
    code.level()
}

pub fn is_parent(parent: &EventCode, child: &EventCode) -> bool {
    parent.is_parent_of(child)
}

pub fn is_ancestor(anc: &EventCode, desc: &EventCode) -> bool {
    anc.is_ancestor_of(desc)
}

pub fn truncate_to_level(code: &EventCode, n: u8) -> Result<EventCode, CodeError> {
    code.truncate_to_level(n)
}

impl fmt::Display for EventCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_drug() {
            f.write_str(DRUG_PREFIX)?;
        }
        f.write_str(self.text())
    }
}

impl fmt::Debug for EventCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EventCode({self})")
    }
}

/// Parses the text form produced by `Display`: `rx:` marks a drug code.
impl FromStr for EventCode {
    type Err = CodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix(DRUG_PREFIX) {
            Some(rest) => EventCode::drug(rest),
            None => EventCode::medical(s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(s: &str) -> EventCode {
        EventCode::medical(s).unwrap()
    }

    #[test]
    fn levels() {
        assert_eq!(code_level(&m("A10..")), 3);
        assert_eq!(code_level(&m("A....")), 1);
        assert_eq!(code_level(&m("H33..")), 3);
        assert_eq!(code_level(&m("6781.")), 4);
        assert_eq!(code_level(&m("D21z1")), 5);
    }

    #[test]
    fn malformed_codes_are_named() {
        let err = EventCode::medical("A1.1.").unwrap_err();
        assert!(matches!(err, CodeError::InteriorDot { .. }));
        assert!(err.to_string().contains("A1.1."));
        assert!(matches!(
            EventCode::medical("A1..").unwrap_err(),
            CodeError::Length { len: 4, .. }
        ));
        assert!(matches!(
            EventCode::medical("A1-..").unwrap_err(),
            CodeError::Character { ch: '-', .. }
        ));
        assert!(matches!(
            EventCode::medical(".....").unwrap_err(),
            CodeError::Empty { .. }
        ));
        assert!(EventCode::medical("é....").is_err());
    }

    #[test]
    fn parent_relation() {
        assert!(is_parent(&m("A1..."), &m("A11..")));
        assert!(!is_parent(&m("A...."), &m("A....")));
        assert!(!is_parent(&m("A1..."), &m("B11..")));
        assert!(!is_parent(&m("A...."), &m("A11..")));
    }

    #[test]
    fn ancestor_relation() {
        assert!(is_ancestor(&m("A...."), &m("A11..")));
        assert!(!is_ancestor(&m("A11.."), &m("A1...")));
        assert!(!is_ancestor(&m("C...."), &m("A11..")));
        let drug = EventCode::drug("A1...").unwrap();
        assert!(!is_ancestor(&m("A...."), &drug));
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_to_level(&m("A11.."), 1).unwrap(), m("A...."));
        assert_eq!(truncate_to_level(&m("A11.."), 2).unwrap(), m("A1..."));
        assert_eq!(truncate_to_level(&m("G33.."), 3).unwrap(), m("G33.."));
        assert!(truncate_to_level(&m("G33.."), 4).is_err());
        assert!(truncate_to_level(&m("G33.."), 0).is_err());
        assert_eq!(m("G33..").generalize(4), m("G33.."));
        assert_eq!(m("G33..").generalize(2), m("G3..."));
    }

    #[test]
    fn long_record_form_is_truncated() {
        assert_eq!(
            EventCode::from_record("H33..00", CodeKind::Medical).unwrap(),
            m("H33..")
        );
        assert_eq!(
            EventCode::from_record(" G2... ", CodeKind::Medical).unwrap(),
            m("G2...")
        );
    }

    #[test]
    fn text_form_round_trips() {
        let d = EventCode::drug("5ASA.").unwrap();
        assert_eq!(d.to_string(), "rx:5ASA.");
        assert_eq!("rx:5ASA.".parse::<EventCode>().unwrap(), d);
        assert_eq!("G2...".parse::<EventCode>().unwrap(), m("G2..."));
        assert_ne!(d, EventCode::medical("5ASA.").unwrap());
    }
}
