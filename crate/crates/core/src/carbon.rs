//! Energy to CO2e conversion with a region-keyed emission-factor table.
//!
//! Carbon intensity is held in gCO2/kWh and converted to kg in exactly one
//! place, [`footprint`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::EnergyReading;

#[derive(Debug, Error, PartialEq)]
pub enum CarbonError {
    #[error("unknown region {region:?}; available: {}", available.join(", "))]
    UnknownRegion {
        region: String,
        available: Vec<String>,
    },
    #[error("malformed factor file at line {line}: {message}")]
    MalformedFactorFile { line: usize, message: String },
    #[error("inference count must be at least 1")]
    ZeroInferences,
    #[error("invalid emission factor: {0}")]
    InvalidFactor(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// GHG Protocol emission scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Scope1,
    /// Indirect emissions from purchased electricity.
    #[default]
    Scope2,
    Scope3,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Scope1 => "scope1",
            Scope::Scope2 => "scope2",
            Scope::Scope3 => "scope3",
        })
    }
}

impl FromStr for Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scope1" => Ok(Scope::Scope1),
            "scope2" => Ok(Scope::Scope2),
            "scope3" => Ok(Scope::Scope3),
            other => Err(format!("unknown scope {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionFactor {
    pub region: String,
    pub gco2_per_kwh: f64,
    pub scope: Scope,
}

impl EmissionFactor {
    pub fn new(region: impl Into<String>, gco2_per_kwh: f64, scope: Scope) -> Result<Self, CarbonError> {
        let region = region.into();
        if region.trim().is_empty() {
            return Err(CarbonError::InvalidFactor("empty region".into()));
        }
        if gco2_per_kwh <= 0.0 || !gco2_per_kwh.is_finite() {
            return Err(CarbonError::InvalidFactor(format!(
                "{region}: intensity must be positive, got {gco2_per_kwh}"
            )));
        }
        Ok(Self {
            region,
            gco2_per_kwh,
            scope,
        })
    }

    /// `region,gco2_per_kwh,scope`, as it appears in a factor file.
    pub fn to_row(&self) -> String {
        format!("{},{},{}", self.region, self.gco2_per_kwh, self.scope)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarbonFootprint {
    pub kg_co2e: f64,
    pub energy_kwh: f64,
    pub factor: EmissionFactor,
    pub per_inference_kg: Option<f64>,
}

impl CarbonFootprint {
    /// Mass per inference if recorded, else the total.
    pub fn comparable_kg(&self) -> f64 {
        self.per_inference_kg.unwrap_or(self.kg_co2e)
    }
}

fn kg_for(kwh: f64, gco2_per_kwh: f64) -> f64 {
    kwh * (gco2_per_kwh / 1000.0)
}

/// CF = E x alpha, with alpha converted from g to kg.
pub fn footprint(energy: &EnergyReading, factor: &EmissionFactor) -> CarbonFootprint {
    CarbonFootprint {
        kg_co2e: kg_for(energy.kwh, factor.gco2_per_kwh),
        energy_kwh: energy.kwh,
        factor: factor.clone(),
        per_inference_kg: None,
    }
}

pub fn per_inference(cf: &CarbonFootprint, n_inferences: usize) -> Result<f64, CarbonError> {
    if n_inferences == 0 {
        return Err(CarbonError::ZeroInferences);
    }
    Ok(cf.kg_co2e / n_inferences as f64)
}

/// Recomputes CF from a footprint's own energy and factor fields.
pub fn recompute_kg(cf: &CarbonFootprint) -> f64 {
    kg_for(cf.energy_kwh, cf.factor.gco2_per_kwh)
}

/// Parsed emission-factor CSV (`region,gco2_per_kwh,scope`, `#` comments allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTable {
    rows: Vec<EmissionFactor>,
}

impl FactorTable {
    pub fn parse(text: &str) -> Result<Self, CarbonError> {
        let malformed = |line: usize, message: String| CarbonError::MalformedFactorFile { line, message };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (header_line, header) = lines
            .next()
            .ok_or_else(|| malformed(1, "missing header `region,gco2_per_kwh,scope`".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["region", "gco2_per_kwh", "scope"] {
            return Err(malformed(
                header_line,
                format!("expected header `region,gco2_per_kwh,scope`, found `{header}`"),
            ));
        }

        let mut rows = Vec::new();
        for (line, content) in lines {
            let fields: Vec<&str> = content.split(',').map(str::trim).collect();
            let [region, intensity, scope] = fields[..] else {
                return Err(malformed(line, format!("expected 3 fields, found {}", fields.len())));
            };
            let intensity: f64 = intensity
                .parse()
                .map_err(|_| malformed(line, format!("bad gco2_per_kwh {intensity:?}")))?;
            let scope: Scope = scope.parse().map_err(|e| malformed(line, e))?;
            let factor = EmissionFactor::new(region, intensity, scope).map_err(|e| malformed(line, e.to_string()))?;
            if rows
                .iter()
                .any(|r: &EmissionFactor| r.region.eq_ignore_ascii_case(region))
            {
                return Err(malformed(line, format!("duplicate region {region:?}")));
            }
            rows.push(factor);
        }
        Ok(Self { rows })
    }

    pub fn load(path: &Path) -> Result<Self, CarbonError> {
        let text = std::fs::read_to_string(path).map_err(|e| CarbonError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn rows(&self) -> &[EmissionFactor] {
        &self.rows
    }

    pub fn lookup(&self, region: &str) -> Result<EmissionFactor, CarbonError> {
        self.rows
            .iter()
            .find(|r| r.region.eq_ignore_ascii_case(region.trim()))
            .cloned()
            .ok_or_else(|| CarbonError::UnknownRegion {
                region: region.to_string(),
                available: self.rows.iter().map(|r| r.region.clone()).collect(),
            })
    }
}

pub fn lookup_factor(table: &str, region: &str) -> Result<EmissionFactor, CarbonError> {
    FactorTable::parse(table)?.lookup(region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::ProviderKind;

    const TABLE: &str = "# fixture\nregion,gco2_per_kwh,scope\ntest-grid,400,scope2\n# second\nother,55.5,scope3\n";

    fn kwh(k: f64) -> EnergyReading {
        EnergyReading::from_joules(k * 3.6e6, ProviderKind::ConstantPower, 0)
    }

    fn grid(g: f64) -> EmissionFactor {
        EmissionFactor::new("g", g, Scope::Scope2).unwrap()
    }

    #[test]
    fn footprint_examples() {
        assert_eq!(footprint(&kwh(0.0), &grid(123.0)).kg_co2e, 0.0);
        let cf = footprint(&kwh(0.01), &grid(400.0));
        assert!((cf.kg_co2e - 0.004).abs() <= 1e-12 * 0.004);
        assert_eq!(footprint(&kwh(1.0), &grid(1000.0)).kg_co2e, 1.0);
        assert_eq!(recompute_kg(&cf), cf.kg_co2e);
    }

    #[test]
    fn per_inference_examples() {
        let mut cf = footprint(&kwh(1.0), &grid(500.0));
        assert_eq!(cf.kg_co2e, 0.5);
        assert!((per_inference(&cf, 100).unwrap() - 0.005).abs() < 1e-15);
        assert_eq!(per_inference(&cf, 1).unwrap(), 0.5);
        cf.kg_co2e = 0.0;
        assert_eq!(per_inference(&cf, 7).unwrap(), 0.0);
        assert_eq!(per_inference(&cf, 0), Err(CarbonError::ZeroInferences));
    }

    #[test]
    fn lookup_examples() {
        let f = lookup_factor(TABLE, "test-grid").unwrap();
        assert_eq!(f.gco2_per_kwh, 400.0);
        assert_eq!(f.scope, Scope::Scope2);
        assert_eq!(lookup_factor(TABLE, "TEST-GRID").unwrap(), f);
        match lookup_factor(TABLE, "nowhere") {
            Err(CarbonError::UnknownRegion { available, .. }) => {
                assert_eq!(available, vec!["test-grid", "other"])
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_files_report_lines() {
        let bad = |t: &str| match FactorTable::parse(t) {
            Err(CarbonError::MalformedFactorFile { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(bad("region,g,scope\n"), 1);
        assert_eq!(bad("# c\nregion,gco2_per_kwh,scope\na,1,scope2\nb,x,scope2\n"), 4);
        assert_eq!(bad("region,gco2_per_kwh,scope\na,0,scope2\n"), 2);
        assert_eq!(bad("region,gco2_per_kwh,scope\na,1,scope9\n"), 2);
        assert_eq!(bad("region,gco2_per_kwh,scope\na,1\n"), 2);
        assert_eq!(bad("region,gco2_per_kwh,scope\na,1,scope2\nA,2,scope2\n"), 3);
        assert_eq!(bad(""), 1);
    }

    #[test]
    fn doubling_intensity_doubles_mass() {
        for (e, g) in [(0.37, 412.0), (1e-6, 0.3), (12.5, 999.9)] {
            let a = footprint(&kwh(e), &grid(g)).kg_co2e;
            let b = footprint(&kwh(e), &grid(2.0 * g)).kg_co2e;
            assert_eq!(b, 2.0 * a);
        }
    }
}
