use std::fmt;

use crate::error::{Error, Result};

/// Opaque agent identifier.
///
/// Ids are non-empty strings without whitespace or commas so that every file
/// format can embed them verbatim. Ordering is plain byte order; code that
/// needs a canonical group key sorts ids with it.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() || id.chars().any(|c| c.is_whitespace() || c == ',') {
            return Err(Error::InvalidAgentId(id));
        }
        Ok(AgentId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl std::str::FromStr for AgentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentId::new(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_plain_ids() {
        for id in ["a", "take_1", "anon000042", "c07"] {
            assert!(AgentId::new(id).is_ok());
        }
    }

    #[test]
    fn rejects_separator_characters() {
        for id in ["", "a b", "a,b", "a\tb", "x\n"] {
            assert!(AgentId::new(id).is_err(), "{id:?} should be rejected");
        }
    }
}
