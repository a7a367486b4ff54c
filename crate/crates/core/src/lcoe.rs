//! Investment cost and levelized cost of electricity of rooftop PV.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LcoeError {
    #[error("invalid financial parameters: {0}")]
    InvalidParams(String),
    #[error("discounted lifetime energy is zero")]
    ZeroEnergy,
    #[error("cannot average an empty set of LCOE values")]
    Empty,
}

/// Per-kWp investment cost components, EUR/kWp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvCostModel {
    pub equipment_per_kwp: f64,
    pub direct_labor_per_kwp: f64,
    pub indirect_labor_per_kwp: f64,
    pub permitting_per_kwp: f64,
    pub overhead_per_kwp: f64,
}

impl Default for PvCostModel {
    fn default() -> Self {
        Self {
            equipment_per_kwp: 900.0,
            direct_labor_per_kwp: 100.0,
            indirect_labor_per_kwp: 50.0,
            permitting_per_kwp: 30.0,
            overhead_per_kwp: 20.0,
        }
    }
}

impl PvCostModel {
    pub fn per_kwp(&self) -> f64 {
        self.equipment_per_kwp
            + self.direct_labor_per_kwp
            + self.indirect_labor_per_kwp
            + self.permitting_per_kwp
            + self.overhead_per_kwp
    }

    pub fn validate(&self) -> Result<(), LcoeError> {
        let parts = [
            ("equipment_per_kwp", self.equipment_per_kwp),
            ("direct_labor_per_kwp", self.direct_labor_per_kwp),
            ("indirect_labor_per_kwp", self.indirect_labor_per_kwp),
            ("permitting_per_kwp", self.permitting_per_kwp),
            ("overhead_per_kwp", self.overhead_per_kwp),
        ];
        for (name, value) in parts {
            if !value.is_finite() || value < 0.0 {
                return Err(LcoeError::InvalidParams(format!("{name} = {value} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Upfront investment in EUR for `pv_cap` kWp.
pub fn capex(model: &PvCostModel, pv_cap: f64) -> f64 {
    pv_cap * model.per_kwp()
}

/// Lifetime cash-flow and production inputs. Index 0 of each sequence is year 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinancialParams {
    lifetime_years: usize,
    wacc: f64,
    annual_opex: Vec<f64>,
    annual_energy_kwh: Vec<f64>,
}

impl FinancialParams {
    pub fn new(
        lifetime_years: usize,
        wacc: f64,
        annual_opex: Vec<f64>,
        annual_energy_kwh: Vec<f64>,
    ) -> Result<Self, LcoeError> {
        if lifetime_years == 0 {
            return Err(LcoeError::InvalidParams("lifetime_years must be >= 1".into()));
        }
        if !wacc.is_finite() || wacc < 0.0 {
            return Err(LcoeError::InvalidParams(format!("wacc {wacc} must be >= 0")));
        }
        if annual_opex.len() != lifetime_years || annual_energy_kwh.len() != lifetime_years {
            return Err(LcoeError::InvalidParams(format!(
                "expected {lifetime_years} yearly entries, got {} opex and {} energy",
                annual_opex.len(),
                annual_energy_kwh.len()
            )));
        }
        if annual_opex.iter().chain(&annual_energy_kwh).any(|v| !v.is_finite()) {
            return Err(LcoeError::InvalidParams("non-finite yearly entry".into()));
        }
        if annual_energy_kwh.iter().any(|m| *m < 0.0) {
            return Err(LcoeError::InvalidParams("annual energy must be >= 0".into()));
        }
        if !annual_energy_kwh.iter().any(|m| *m > 0.0) {
            return Err(LcoeError::ZeroEnergy);
        }
        Ok(Self {
            lifetime_years,
            wacc,
            annual_opex,
            annual_energy_kwh,
        })
    }

    /// Same OPEX and production every year.
    pub fn constant(
        lifetime_years: usize,
        wacc: f64,
        opex_per_year: f64,
        energy_kwh_per_year: f64,
    ) -> Result<Self, LcoeError> {
        Self::new(
            lifetime_years,
            wacc,
            vec![opex_per_year; lifetime_years],
            vec![energy_kwh_per_year; lifetime_years],
        )
    }

    pub fn lifetime_years(&self) -> usize {
        self.lifetime_years
    }

    pub fn wacc(&self) -> f64 {
        self.wacc
    }

    pub fn annual_opex(&self) -> &[f64] {
        &self.annual_opex
    }

    pub fn annual_energy_kwh(&self) -> &[f64] {
        &self.annual_energy_kwh
    }
}

/// Levelized cost in EUR/MWh:
/// `(i0 + Σ A_n / (1+R)^n) / (Σ M_n / (1+R)^n)` for n = 1..N, with M_n in MWh.
pub fn lcoe(i0: f64, fin: &FinancialParams) -> Result<f64, LcoeError> {
    let mut discount = 1.0;
    let mut costs = i0;
    let mut energy_mwh = 0.0;
    for (opex, energy_kwh) in fin.annual_opex.iter().zip(&fin.annual_energy_kwh) {
        discount /= 1.0 + fin.wacc;
        costs += opex * discount;
        energy_mwh += energy_kwh / 1000.0 * discount;
    }
    if energy_mwh <= 0.0 {
        return Err(LcoeError::ZeroEnergy);
    }
    Ok(costs / energy_mwh)
}

/// Arithmetic mean of per-prosumer LCOE values.
pub fn neighborhood_lcoe(values: &[f64]) -> Result<f64, LcoeError> {
    if values.is_empty() {
        return Err(LcoeError::Empty);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
