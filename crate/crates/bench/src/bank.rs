//! JSON file format for custom IMM banks.

use std::path::Path;

use apesmc::imm::{build_model_bank, BankSpec, ImmModelBank};
use apesmc::ParamVector;
use serde::{Deserialize, Serialize};

use crate::BenchError;

/// `{"stay": 0.95, "modes": [{"omega_deg": 3.0, "eta2": 2.0, "sigma_r2": 2500.0, "sigma_b2_deg": 1.0}]}`.
/// `sigma_b2_deg` is a variance in deg².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankFile {
    pub stay: f64,
    pub modes: Vec<ModeEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub omega_deg: f64,
    pub eta2: f64,
    pub sigma_r2: f64,
    pub sigma_b2_deg: f64,
}

impl BankFile {
    pub fn to_bank(&self) -> Result<ImmModelBank<f64>, BenchError> {
        let rad2 = (std::f64::consts::PI / 180.0).powi(2);
        let modes = self
            .modes
            .iter()
            .map(|m| ParamVector::new(m.omega_deg.to_radians(), m.eta2, m.sigma_r2, m.sigma_b2_deg * rad2))
            .collect();
        build_model_bank(&BankSpec::Custom { modes, stay: self.stay }).map_err(|e| BenchError::Config(e.to_string()))
    }
}

pub fn load_bank(path: &Path) -> Result<ImmModelBank<f64>, BenchError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BenchError::Config(format!("reading {}: {e}", path.display())))?;
    let file: BankFile =
        serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("bank file {}: {e}", path.display())))?;
    file.to_bank()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let file: BankFile = serde_json::from_str(
            r#"{"stay": 0.9, "modes": [{"omega_deg": 0, "eta2": 2, "sigma_r2": 2500, "sigma_b2_deg": 1},
                                       {"omega_deg": 5, "eta2": 2.5, "sigma_r2": 2500, "sigma_b2_deg": 1}]}"#,
        )
        .unwrap();
        let bank = file.to_bank().unwrap();
        assert_eq!(bank.len(), 2);
        assert!((bank.modes[1].omega - 5f64.to_radians()).abs() < 1e-15);
        assert_eq!(bank.transition[0][0], 0.9);
        assert!((bank.transition[0][1] - 0.1).abs() < 1e-15);
        let empty = BankFile { stay: 0.9, modes: vec![] };
        assert!(matches!(empty.to_bank(), Err(BenchError::Config(_))));
    }
}
