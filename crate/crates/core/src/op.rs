use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The seven block-internal matrix roles NS budgets are allocated over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorType {
    AttnQ,
    AttnK,
    AttnV,
    AttnO,
    MlpGate,
    MlpUp,
    MlpDown,
}

impl OperatorType {
    pub const ALL: [OperatorType; 7] = [
        OperatorType::AttnQ,
        OperatorType::AttnK,
        OperatorType::AttnV,
        OperatorType::AttnO,
        OperatorType::MlpGate,
        OperatorType::MlpUp,
        OperatorType::MlpDown,
    ];

    pub const COUNT: usize = 7;

    /// Position in [`OperatorType::ALL`]; used as the tie-breaking order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorType::AttnQ => "attn_q",
            OperatorType::AttnK => "attn_k",
            OperatorType::AttnV => "attn_v",
            OperatorType::AttnO => "attn_o",
            OperatorType::MlpGate => "mlp_gate",
            OperatorType::MlpUp => "mlp_up",
            OperatorType::MlpDown => "mlp_down",
        }
    }
}

impl fmt::Display for OperatorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        OperatorType::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown operator type {s:?}")))
    }
}
