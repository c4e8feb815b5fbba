use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which audio context accompanies the transcript in a prompt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextVariant {
    TextOnly,
    TextEnergyF0,
    TextEnergyF0Gender,
    TextEnergyF0GenderCodes,
}

impl ContextVariant {
    pub const ALL: [ContextVariant; 4] = [
        ContextVariant::TextOnly,
        ContextVariant::TextEnergyF0,
        ContextVariant::TextEnergyF0Gender,
        ContextVariant::TextEnergyF0GenderCodes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ContextVariant::TextOnly => "text-only",
            ContextVariant::TextEnergyF0 => "text-energy-f0",
            ContextVariant::TextEnergyF0Gender => "text-energy-f0-gender",
            ContextVariant::TextEnergyF0GenderCodes => "text-energy-f0-gender-codes",
        }
    }

    pub fn uses_prosody(self) -> bool {
        self != ContextVariant::TextOnly
    }

    pub fn uses_gender(self) -> bool {
        matches!(self, ContextVariant::TextEnergyF0Gender | ContextVariant::TextEnergyF0GenderCodes)
    }

    pub fn uses_codes(self) -> bool {
        self == ContextVariant::TextEnergyF0GenderCodes
    }
}

impl fmt::Display for ContextVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown context variant {s:?}")))
    }
}

/// Zero-shot or few-shot prompting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shots {
    #[default]
    Zero,
    Few,
}

impl FromStr for Shots {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Shots::Zero),
            "few" => Ok(Shots::Few),
            _ => Err(Error::InvalidConfig(format!("shots must be zero or few, got {s:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for v in ContextVariant::ALL {
            assert_eq!(v.as_str().parse::<ContextVariant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{v}\""));
        }
        assert!("text".parse::<ContextVariant>().is_err());
    }
}
