//! Covariate schema: an ordered list of named columns shared by real-format
//! and synthetic data, with two reserved busyness slots.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Reserved column name for the internal-medicine busyness slot.
pub const BUSY_INTMED_COL: &str = "busy_intmed";
/// Reserved column name for the surgical busyness slot.
pub const BUSY_SURG_COL: &str = "busy_surg";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSchema {
    columns: Vec<String>,
    busy_intmed_idx: usize,
    busy_surg_idx: usize,
}

impl CovariateSchema {
    /// Builds a schema from ordered column names. The two busyness slots are
    /// identified by their reserved names and must both be present.
    pub fn new(columns: Vec<String>) -> Result<Self> {
        let find = |name: &str| {
            columns
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::Config(format!("schema.columns missing '{name}'")))
        };
        let busy_intmed_idx = find(BUSY_INTMED_COL)?;
        let busy_surg_idx = find(BUSY_SURG_COL)?;
        let mut seen = std::collections::BTreeSet::new();
        for c in &columns {
            if !seen.insert(c.clone()) {
                return Err(Error::Config(format!("schema.columns repeats '{c}'")));
            }
        }
        Ok(CovariateSchema {
            columns,
            busy_intmed_idx,
            busy_surg_idx,
        })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn busy_intmed_idx(&self) -> usize {
        self.busy_intmed_idx
    }

    pub fn busy_surg_idx(&self) -> usize {
        self.busy_surg_idx
    }

    /// Overwrites the two busyness slots of a covariate vector in place.
    pub fn set_busyness(&self, covariates: &mut [f64], busy_intmed: f64, busy_surg: f64) {
        covariates[self.busy_intmed_idx] = busy_intmed;
        covariates[self.busy_surg_idx] = busy_surg;
    }

    /// Stable hash of the column layout; stored in serialized forests so a
    /// forest is never applied to data with a different layout.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.columns {
            h.update(c.as_bytes());
            h.update([0u8]);
        }
        hex_string(&h.finalize())
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
