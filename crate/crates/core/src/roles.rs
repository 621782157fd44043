use crate::dist::JointDistribution;
use crate::error::Result;

/// Which variable each party holds. Defaults to `X` (sender), `Y`
/// (receiver) and `Z` (reference).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roles {
    pub sender: String,
    pub receiver: String,
    pub reference: String,
}

impl Default for Roles {
    fn default() -> Self {
        Roles::new("X", "Y", "Z")
    }
}

impl Roles {
    pub fn new(sender: &str, receiver: &str, reference: &str) -> Self {
        Roles {
            sender: sender.to_string(),
            receiver: receiver.to_string(),
            reference: reference.to_string(),
        }
    }

    /// Sender and receiver swapped.
    pub fn reversed(&self) -> Self {
        Roles {
            sender: self.receiver.clone(),
            receiver: self.sender.clone(),
            reference: self.reference.clone(),
        }
    }

    pub fn x(&self) -> &str {
        &self.sender
    }

    pub fn y(&self) -> &str {
        &self.receiver
    }

    pub fn z(&self) -> &str {
        &self.reference
    }

    /// Marginal over `(sender, receiver, reference)` in that order; any
    /// other variable (an eavesdropper in product form) is summed out.
    pub fn restrict(&self, d: &JointDistribution) -> Result<JointDistribution> {
        d.marginalize(&[self.x(), self.y(), self.z()])
    }
}
