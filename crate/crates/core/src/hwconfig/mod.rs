//! Line-oriented hardware description plus pass pipeline.
//!
//! ```text
//! mem DRAM cap=1000000 line=8 banks=1
//! mem SRAM cap=512 line=8 banks=4
//! unit TENSOR count=1 stencil=16x16x4 tag=tensorize
//! pass autotile mem=SRAM
//! pass schedule mem=SRAM
//! ```
//!
//! Blank lines and `#` comments are ignored; leading whitespace is allowed.

use std::collections::BTreeMap;
use std::fmt::Write;

use thiserror::Error;

use crate::analysis::CacheModel;
use crate::ir::DType;
use crate::passes::{PassConfig, Registry, StencilSpec};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("ConfigSyntax: line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },
    #[error("UnknownPass: line {line}: `{name}`")]
    UnknownPass { line: usize, name: String },
    #[error("UnknownUnit: line {line}: `{name}`")]
    UnknownUnit { line: usize, name: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemUnit {
    /// Capacity in elements.
    pub capacity: u64,
    /// Cache line in elements.
    pub line: u64,
    pub banks: u64,
}

impl MemUnit {
    pub fn cache_model(&self) -> CacheModel {
        CacheModel::new(self.line, self.capacity).expect("validated at load")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComputeUnit {
    pub count: u64,
    pub stencil: Option<StencilSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HardwareConfig {
    pub mems: BTreeMap<String, MemUnit>,
    pub units: BTreeMap<String, ComputeUnit>,
}

impl HardwareConfig {
    pub fn mem(&self, name: Option<&str>) -> Option<(&str, &MemUnit)> {
        match name {
            Some(n) => self.mems.get_key_value(n).map(|(k, v)| (k.as_str(), v)),
            None => self.smallest_mem(),
        }
    }

    /// The memory with the least capacity; ties go to the first name.
    pub fn smallest_mem(&self) -> Option<(&str, &MemUnit)> {
        self.mems
            .iter()
            .min_by_key(|(n, m)| (m.capacity, n.as_str()))
            .map(|(k, v)| (k.as_str(), v))
    }

    pub fn has_unit(&self, name: &str) -> bool {
        self.mems.contains_key(name) || self.units.contains_key(name)
    }

    pub fn stencils(&self) -> Vec<StencilSpec> {
        self.units.values().filter_map(|u| u.stencil.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Config {
    pub hardware: HardwareConfig,
    pub pipeline: Vec<PassConfig>,
}

fn syntax(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::ConfigSyntax {
        line,
        message: message.into(),
    }
}

fn num(line: usize, key: &str, v: &str) -> Result<u64, ConfigError> {
    let v = v.trim();
    v.parse::<u64>()
        .ok()
        .or_else(|| v.parse::<f64>().ok().filter(|f| f.fract() == 0.0 && *f >= 0.0).map(|f| f as u64))
        .ok_or_else(|| syntax(line, format!("`{key}` needs a non-negative integer, got `{v}`")))
}

fn pairs(line: usize, words: &[&str]) -> Result<Vec<(String, String)>, ConfigError> {
    words
        .iter()
        .map(|w| {
            w.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| syntax(line, format!("expected key=value, got `{w}`")))
        })
        .collect()
}

/// Parses a config with the default pass registry.
pub fn load_config(text: &str) -> Result<Config, ConfigError> {
    load_config_with(text, &Registry::with_defaults())
}

pub fn load_config_with(text: &str, registry: &Registry) -> Result<Config, ConfigError> {
    let mut cfg = Config::default();
    let mut pass_lines = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        match words[0] {
            "mem" | "unit" => {
                let name = words.get(1).ok_or_else(|| syntax(line, "missing unit name"))?.to_string();
                if name.contains('=') {
                    return Err(syntax(line, "missing unit name"));
                }
                if cfg.hardware.has_unit(&name) {
                    return Err(syntax(line, format!("unit `{name}` declared twice")));
                }
                let kv = pairs(line, &words[2..])?;
                if words[0] == "mem" {
                    let (mut cap, mut ln, mut banks) = (None, None, 1);
                    for (key, v) in kv {
                        match key.as_str() {
                            "cap" => cap = Some(num(line, &key, &v)?),
                            "line" => ln = Some(num(line, &key, &v)?),
                            "banks" => banks = num(line, &key, &v)?,
                            _ => return Err(syntax(line, format!("unknown key `{key}` for mem"))),
                        }
                    }
                    let capacity = cap.ok_or_else(|| syntax(line, "mem needs cap="))?;
                    let line_size = ln.unwrap_or(1);
                    if line_size == 0 || capacity < line_size || banks == 0 {
                        return Err(syntax(line, "need cap >= line >= 1 and banks >= 1"));
                    }
                    cfg.hardware.mems.insert(
                        name,
                        MemUnit {
                            capacity,
                            line: line_size,
                            banks,
                        },
                    );
                } else {
                    let (mut count, mut sizes, mut tag, mut dtype) = (1, None, None, None);
                    for (key, v) in kv {
                        match key.as_str() {
                            "count" => count = num(line, &key, &v)?,
                            "stencil" => sizes = Some(crate::passes::stencil_sizes(&v).map_err(|m| syntax(line, m))?),
                            "tag" => tag = Some(v),
                            "dtype" => dtype = Some(v.parse::<DType>().map_err(|_| syntax(line, format!("bad dtype `{v}`")))?),
                            _ => return Err(syntax(line, format!("unknown key `{key}` for unit"))),
                        }
                    }
                    if count == 0 {
                        return Err(syntax(line, "count must be >= 1"));
                    }
                    let stencil = match sizes {
                        Some(sizes) => Some(StencilSpec {
                            name: name.clone(),
                            sizes,
                            dtype,
                            tag: tag.unwrap_or_else(|| "stencil".into()),
                        }),
                        None if tag.is_some() || dtype.is_some() => {
                            return Err(syntax(line, "tag= and dtype= need stencil="));
                        }
                        None => None,
                    };
                    cfg.hardware.units.insert(name, ComputeUnit { count, stencil });
                }
            }
            "pass" => {
                let name = words.get(1).ok_or_else(|| syntax(line, "missing pass name"))?.to_string();
                let params: BTreeMap<String, String> = pairs(line, &words[2..])?.into_iter().collect();
                pass_lines.push((line, PassConfig { name, params }));
            }
            other => return Err(syntax(line, format!("unknown directive `{other}`"))),
        }
    }
    for (line, pc) in pass_lines {
        let Some(pass) = registry.get(&pc.name) else {
            return Err(ConfigError::UnknownPass { line, name: pc.name });
        };
        for key in pc.params.keys() {
            if !pass.keys().contains(&key.as_str()) {
                return Err(syntax(line, format!("unknown key `{key}` for pass `{}`", pc.name)));
            }
        }
        for key in ["mem", "unit"] {
            if let Some(u) = pc.params.get(key) {
                let known = if key == "mem" {
                    cfg.hardware.mems.contains_key(u)
                } else {
                    cfg.hardware.has_unit(u)
                };
                if !known {
                    return Err(ConfigError::UnknownUnit { line, name: u.clone() });
                }
            }
        }
        cfg.pipeline.push(pc);
    }
    Ok(cfg)
}

/// Canonical text: memories, then compute units, each sorted by name, then
/// passes in order.
pub fn print_config(cfg: &Config) -> String {
    let mut s = String::new();
    for (n, m) in &cfg.hardware.mems {
        let _ = writeln!(s, "mem {n} cap={} line={} banks={}", m.capacity, m.line, m.banks);
    }
    for (n, u) in &cfg.hardware.units {
        let _ = write!(s, "unit {n} count={}", u.count);
        if let Some(st) = &u.stencil {
            let _ = write!(s, " stencil={} tag={}", crate::passes::StencilSizes(&st.sizes), st.tag);
            if let Some(dt) = st.dtype {
                let _ = write!(s, " dtype={dt}");
            }
        }
        s.push('\n');
    }
    for p in &cfg.pipeline {
        let _ = write!(s, "pass {}", p.name);
        for (k, v) in &p.params {
            let _ = write!(s, " {k}={v}");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_LEVEL: &str = "
        # two memories
        mem DRAM cap=1e6 line=8
        mem SRAM cap=512 line=8 banks=4
        unit TENSOR count=1 stencil=16x16x4 tag=tensorize
        pass autotile mem=SRAM
        pass schedule mem=SRAM
    ";

    #[test]
    fn two_level_fields() {
        let cfg = load_config(TWO_LEVEL).unwrap();
        assert_eq!(
            cfg.hardware.mems["DRAM"],
            MemUnit {
                capacity: 1_000_000,
                line: 8,
                banks: 1
            }
        );
        assert_eq!(cfg.hardware.mems["SRAM"].banks, 4);
        assert_eq!(cfg.pipeline.len(), 2);
        assert_eq!(cfg.pipeline[0].name, "autotile");
        let (name, mem) = cfg.hardware.mem(cfg.pipeline[0].params.get("mem").map(String::as_str)).unwrap();
        assert_eq!((name, mem.capacity, mem.line), ("SRAM", 512, 8));
        assert_eq!(cfg.hardware.stencils()[0].sizes, vec![16, 16, 4]);
    }

    #[test]
    fn round_trip_and_order_independence() {
        let cfg = load_config(TWO_LEVEL).unwrap();
        assert_eq!(load_config(&print_config(&cfg)).unwrap(), cfg);
        let swapped = "mem SRAM cap=512 line=8 banks=4\nmem DRAM cap=1000000 line=8\nunit TENSOR stencil=16x16x4 tag=tensorize\npass autotile mem=SRAM\npass schedule mem=SRAM\n";
        assert_eq!(load_config(swapped).unwrap(), cfg);
    }

    #[test]
    fn errors() {
        assert_eq!(load_config("").unwrap(), Config::default());
        assert!(matches!(
            load_config("mem A cap=8\npass autotile mem=L9"),
            Err(ConfigError::UnknownUnit { line: 2, .. })
        ));
        assert!(matches!(load_config("pass nonsense"), Err(ConfigError::UnknownPass { .. })));
        assert!(matches!(load_config("mem A cap=4 line=8"), Err(ConfigError::ConfigSyntax { .. })));
        assert!(matches!(load_config("mem A cap=8 colour=red"), Err(ConfigError::ConfigSyntax { .. })));
        assert!(matches!(load_config("pass autotile bogus=1"), Err(ConfigError::ConfigSyntax { .. })));
        assert!(matches!(load_config("gpu X"), Err(ConfigError::ConfigSyntax { line: 1, .. })));
    }
}
