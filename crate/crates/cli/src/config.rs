//! Run configuration: JSON sections for market, claim, regime, solver, and
//! sweep, all optional with benchmark defaults, plus dotted-path overrides.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;
use xva_core::bsde::SolverConfig;
use xva_core::market::{ClaimSpec, MarketParams, RegimeMode};
use xva_core::regime::{Regime, RegimeParams};
use xva_core::xva::SweepSpec;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct IoConfig {
    pub out_dir: Option<String>,
    pub input: Option<String>,
}

/// Full run configuration. Defaults reproduce the benchmark market: an
/// at-the-money three-month call on a unit spot, symmetric 5% repo and
/// funding rates, 1% collateral and discount rates, bond returns 21% / 16%,
/// 30% volatility, half loss rates, zero collateralization.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub market: MarketParams,
    pub claim: ClaimSpec,
    pub regime: RegimeMode,
    pub solver: SolverConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    pub io: IoConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            market: MarketParams::benchmark(),
            claim: ClaimSpec::benchmark(),
            regime: RegimeMode::FrozenNormal,
            solver: SolverConfig::default(),
            sweep: None,
            io: IoConfig::default(),
        }
    }
}

impl RunConfig {
    /// Dynamic regime parameters: the configured ones, or the published
    /// hysteresis estimates (means 1.39 / 0.99 years) as a fallback.
    pub fn dynamic_regime_params(&self) -> RegimeParams {
        match &self.regime {
            RegimeMode::Dynamic { params } => *params,
            _ => RegimeParams::new(1.0 / 1.39, 1.0 / 0.99, Regime::Normal)
                .expect("static rates are valid"),
        }
    }
}

/// Loads the configuration: benchmark defaults, deep-merged with the JSON
/// file when given, then dotted-path overrides applied in order.
pub fn load_config(path: Option<&Path>, sets: &[String]) -> Result<RunConfig> {
    let mut value = serde_json::to_value(RunConfig::default())?;
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let user: Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        merge(&mut value, &user);
    }
    for set in sets {
        apply_set(&mut value, set)?;
    }
    let config: RunConfig =
        serde_json::from_value(value).context("config does not satisfy the schema")?;
    Ok(config)
}

fn merge(base: &mut Value, user: &Value) {
    match (base, user) {
        (Value::Object(base_map), Value::Object(user_map)) => {
            for (k, v) in user_map {
                match base_map.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    Some(slot) => *slot = v.clone(),
                    None => {
                        base_map.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (base, user) => *base = user.clone(),
    }
}

/// Applies one `section.key=value` override; the value is parsed as JSON,
/// falling back to a plain string.
fn apply_set(value: &mut Value, set: &str) -> Result<()> {
    let (path, raw) = set
        .split_once('=')
        .ok_or_else(|| anyhow!("--set expects `section.key=value`, got `{set}`"))?;
    let parsed: Value =
        serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cursor = value;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.is_empty() {
        bail!("--set path is empty");
    }
    for part in &parts[..parts.len() - 1] {
        cursor = cursor
            .as_object_mut()
            .ok_or_else(|| anyhow!("--set path `{path}` crosses a non-object"))?
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    cursor
        .as_object_mut()
        .ok_or_else(|| anyhow!("--set path `{path}` crosses a non-object"))?
        .insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}
