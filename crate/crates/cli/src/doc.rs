//! The JSON document every command reads: an `"instance"`, optionally a
//! named `"prices"` map or a bundle's `"reference_profiles"`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use netprice::market::{MarketInstance, PriceProfile};
use netprice::ExtPrice;
use serde::Serialize;
use serde_json::Value;

pub struct Document {
    pub instance: MarketInstance,
    /// Prices from `"prices"` (or the selected reference profile), if any.
    pub prices: Option<PriceProfile>,
    /// The whole parsed document, for command-specific fields.
    pub raw: Value,
}

impl Document {
    /// Given prices, or all sellers at Infinity.
    pub fn prices_or_infinite(&self) -> PriceProfile {
        self.prices
            .clone()
            .unwrap_or_else(|| PriceProfile::all_infinite(&self.instance))
    }
}

pub fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) if p != Path::new("-") => {
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
        }
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
            Ok(s)
        }
    }
}

fn named_prices(instance: &MarketInstance, v: &Value) -> Result<PriceProfile> {
    let named: indexmap::IndexMap<String, ExtPrice> = serde_json::from_value(v.clone()).context("parsing prices")?;
    Ok(PriceProfile::from_named(instance, &named)?)
}

/// Parses a document; `profile` picks a bundle reference profile instead of
/// `"prices"`.
pub fn parse_document(text: &str, profile: Option<&str>) -> Result<Document> {
    let v: Value = serde_json::from_str(text).context("input is not JSON")?;
    let inst_v = v.get("instance").ok_or_else(|| anyhow!("input has no \"instance\""))?;
    let instance: MarketInstance = serde_json::from_value(inst_v.clone()).context("parsing instance")?;
    let prices = match profile {
        Some(name) => {
            let p = v
                .get("reference_profiles")
                .and_then(|r| r.get(name))
                .ok_or_else(|| anyhow!("input has no reference profile `{name}`"))?;
            Some(named_prices(&instance, p)?)
        }
        None => match v.get("prices") {
            Some(Value::Null) | None => None,
            Some(p) => Some(named_prices(&instance, p)?),
        },
    };
    Ok(Document { instance, prices, raw: v })
}

pub fn load(input: Option<&PathBuf>, profile: Option<&str>) -> Result<Document> {
    let text = read_input(input.map(|p| p.as_path()))?;
    if text.trim().is_empty() {
        bail!("empty input (expected a JSON document with an \"instance\")");
    }
    parse_document(&text, profile)
}

pub fn write_json<T: Serialize>(out: Option<&PathBuf>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) if p.as_path() != Path::new("-") => {
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        _ => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}
