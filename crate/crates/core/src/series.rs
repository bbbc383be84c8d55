use serde::Serialize;

use crate::error::{Error, Result};

/// Per-shell spectrum or flux samples, with the averaging count attached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSeries {
    pub k: Vec<f64>,
    pub value: Vec<f64>,
    pub n_samples: u64,
}

impl SpectrumSeries {
    pub fn new(k: Vec<f64>, value: Vec<f64>, n_samples: u64) -> Result<Self> {
        if k.len() != value.len() {
            return Err(Error::Dimension(format!(
                "series has {} wavenumbers but {} values",
                k.len(),
                value.len()
            )));
        }
        if !k.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Domain("series wavenumbers must be strictly increasing".into()));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("series values must be finite".into()));
        }
        Ok(Self { k, value, n_samples })
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }
}
