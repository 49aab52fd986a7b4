use std::collections::BTreeMap;
use std::fmt;

use super::{
    autotile, fuse, localize, partition, scalarize, schedule, separate_boundary, stencil_match, transpose_layout,
    AutotileOptions, PassError, TileShape,
};
use crate::analysis::CacheModel;
use crate::hwconfig::{Config, HardwareConfig};
use crate::ir::{Block, Program, Statement};
use crate::validate::{has_errors, validate_static};

/// One pipeline entry: a registered pass name and its `key=value` options.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PassConfig {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

impl PassConfig {
    pub fn new(name: impl Into<String>) -> Self {
        PassConfig {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(String::as_str)
    }

    fn bad(&self, message: impl Into<String>) -> PassError {
        PassError::InvalidParameter {
            pass: self.name.clone(),
            message: message.into(),
        }
    }

    fn u64(&self, key: &str) -> Result<Option<u64>, PassError> {
        self.get(key)
            .map(|v| v.parse().map_err(|_| self.bad(format!("`{key}` must be an integer"))))
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<Option<bool>, PassError> {
        self.get(key)
            .map(|v| match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(self.bad(format!("`{key}` must be true or false"))),
            })
            .transpose()
    }
}

/// A `pass=<name> key=value ...` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassReport {
    pub pass: String,
    pub fields: Vec<(String, String)>,
}

impl PassReport {
    pub fn new(pass: &str) -> Self {
        PassReport {
            pass: pass.to_string(),
            fields: Vec::new(),
        }
    }

    pub fn field(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for PassReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pass={}", self.pass)?;
        for (k, v) in &self.fields {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

pub trait Pass {
    fn name(&self) -> &str;
    /// Accepted option keys.
    fn keys(&self) -> &[&'static str];
    fn run(&self, p: &Program, cfg: &PassConfig, hw: &HardwareConfig) -> Result<(Program, Vec<PassReport>), PassError>;
}

#[derive(Default)]
pub struct Registry {
    passes: BTreeMap<String, Box<dyn Pass>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_defaults() -> Self {
        let mut r = Registry::new();
        r.register(Box::new(Autotile));
        r.register(Box::new(Fuse));
        r.register(Box::new(Simple("localize", localize)));
        r.register(Box::new(Simple("scalarize", scalarize)));
        r.register(Box::new(Stencil));
        r.register(Box::new(Partition));
        r.register(Box::new(Schedule));
        r.register(Box::new(Boundary));
        r.register(Box::new(Transpose));
        r
    }

    pub fn register(&mut self, pass: Box<dyn Pass>) {
        self.passes.insert(pass.name().to_string(), pass);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Pass> {
        self.passes.get(name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.passes.keys().map(String::as_str)
    }
}

/// Runs the pipeline of `cfg` with the default passes.
pub fn apply_pipeline(p: &Program, cfg: &Config) -> Result<(Program, Vec<PassReport>), PassError> {
    apply_pipeline_with(&Registry::with_defaults(), p, &cfg.pipeline, &cfg.hardware)
}

/// Folds the passes over `p`. The result of every pass must validate clean.
pub fn apply_pipeline_with(
    registry: &Registry,
    p: &Program,
    pipeline: &[PassConfig],
    hw: &HardwareConfig,
) -> Result<(Program, Vec<PassReport>), PassError> {
    let mut cur = p.clone();
    let mut reports = Vec::new();
    for pc in pipeline {
        let pass = registry.get(&pc.name).ok_or_else(|| PassError::UnknownPass(pc.name.clone()))?;
        let (next, mut rep) = pass.run(&cur, pc, hw)?;
        let diags = validate_static(&next);
        if has_errors(&diags) {
            return Err(PassError::PassFailed {
                pass: pc.name.clone(),
                diagnostics: diags,
            });
        }
        reports.append(&mut rep);
        cur = next;
    }
    Ok((cur, reports))
}

fn with_root(p: &Program, root: Block) -> Program {
    Program {
        root,
        buffers: p.buffers.clone(),
    }
}

/// Applies `f` to each leaf block directly under the root.
fn map_leaves(
    p: &Program,
    mut f: impl FnMut(usize, &Block) -> Result<Block, PassError>,
) -> Result<Program, PassError> {
    let mut root = p.root.clone();
    for (k, st) in root.statements.iter_mut().enumerate() {
        if let Statement::Block(b) = st {
            if !b.has_child_blocks() && b.ranged().any(|(_, r)| r > 1) {
                **b = f(k, b)?;
            }
        }
    }
    Ok(with_root(p, root))
}

struct Simple(&'static str, fn(&Block) -> Block);

impl Pass for Simple {
    fn name(&self) -> &str {
        self.0
    }

    fn keys(&self) -> &[&'static str] {
        &[]
    }

    fn run(&self, p: &Program, _: &PassConfig, _: &HardwareConfig) -> Result<(Program, Vec<PassReport>), PassError> {
        let root = (self.1)(&p.root);
        let changed = root != p.root;
        Ok((with_root(p, root), vec![PassReport::new(self.0).field("changed", changed)]))
    }
}

struct Autotile;

impl Pass for Autotile {
    fn name(&self) -> &str {
        "autotile"
    }

    fn keys(&self) -> &[&'static str] {
        &["mem", "cap", "line", "pow2", "divisors", "tiles", "search", "interleaved"]
    }

    fn run(&self, p: &Program, cfg: &PassConfig, hw: &HardwareConfig) -> Result<(Program, Vec<PassReport>), PassError> {
        let mem = hw.mem(cfg.get("mem")).map(|(_, m)| m.clone());
        let cap = cfg.u64("cap")?.or(mem.as_ref().map(|m| m.capacity)).unwrap_or(512);
        let line = cfg.u64("line")?.or(mem.as_ref().map(|m| m.line)).unwrap_or(8);
        let cm = CacheModel::new(line, cap.max(line)).map_err(|e| cfg.bad(e.to_string()))?;
        let mut pinned = cfg.get("tiles").map(str::parse::<TileShape>).transpose()?;
        if let Some(ts) = &mut pinned {
            ts.interleaved = cfg.flag("interleaved")?.unwrap_or(false);
        }
        let opts = AutotileOptions {
            mem_cap: cap,
            power_of_two: cfg.flag("pow2")?.unwrap_or(false),
            divisors_only: cfg.flag("divisors")?.unwrap_or(true),
            search: cfg.get("search").map(|s| s.split(',').map(|n| n.trim().to_string()).collect()),
            pinned,
        };
        let mut reports = Vec::new();
        let out = map_leaves(p, |k, b| {
            if let Some(ts) = &opts.pinned {
                if let Some(n) = ts.tiles.keys().find(|n| b.index(n).is_none()) {
                    reports.push(PassReport::new("autotile").field("block", k).field("skipped", format!("no index `{n}`")));
                    return Ok(b.clone());
                }
            }
            let (out, rep) = autotile(b, &cm, &opts)?;
            let mut r = PassReport::new("autotile").field("block", k).field("candidates", rep.candidates);
            if let Some(c) = &rep.chosen {
                r = r.field("chosen", c);
            }
            if let Some(w) = &rep.warning {
                r = r.field("warning", format!("\"{w}\""));
            }
            reports.push(r);
            Ok(out)
        })?;
        Ok((out, reports))
    }
}

struct Fuse;

impl Pass for Fuse {
    fn name(&self) -> &str {
        "fuse"
    }

    fn keys(&self) -> &[&'static str] {
        &[]
    }

    fn run(&self, p: &Program, _: &PassConfig, _: &HardwareConfig) -> Result<(Program, Vec<PassReport>), PassError> {
        let mut root = p.root.clone();
        let mut reports = Vec::new();
        let mut i = 0;
        while i + 1 < root.statements.len() {
            match fuse(&root, i, i + 1) {
                Ok(next) => {
                    reports.push(PassReport::new("fuse").field("fused", format!("{i},{}", i + 1)));
                    root = next;
                }
                Err(r) => {
                    if root.statements[i].as_block().is_some() && root.statements[i + 1].as_block().is_some() {
                        reports.push(PassReport::new("fuse").field("refused", format!("{i},{}", i + 1)).field("reason", r));
                    }
                    i += 1;
                }
            }
        }
        Ok((with_root(p, root), reports))
    }
}

struct Stencil;

impl Pass for Stencil {
    fn name(&self) -> &str {
        "stencil"
    }

    fn keys(&self) -> &[&'static str] {
        &["unit"]
    }

    fn run(&self, p: &Program, cfg: &PassConfig, hw: &HardwareConfig) -> Result<(Program, Vec<PassReport>), PassError> {
        let specs = match cfg.get("unit") {
            Some(u) => hw.units.get(u).and_then(|u| u.stencil.clone()).into_iter().collect(),
            None => hw.stencils(),
        };
        let mut reports = Vec::new();
        let out = map_leaves(p, |k, b| {
            let out = stencil_match(b, &specs);
            reports.push(PassReport::new("stencil").field("block", k).field("matched", &out != b));
            Ok(out)
        })?;
        Ok((out, reports))
    }
}

struct Partition;

impl Pass for Partition {
    fn name(&self) -> &str {
        "partition"
    }

    fn keys(&self) -> &[&'static str] {
        &["index", "n", "unit"]
    }

    fn run(&self, p: &Program, cfg: &PassConfig, hw: &HardwareConfig) -> Result<(Program, Vec<PassReport>), PassError> {
        let index = cfg.get("index").ok_or_else(|| cfg.bad("needs index="))?;
        let unit = match cfg.get("unit") {
            Some(u) => u.to_string(),
            None => hw.smallest_mem().map(|(n, _)| n.to_string()).ok_or_else(|| cfg.bad("needs unit="))?,
        };
        let default_n = hw
            .mems
            .get(&unit)
            .map(|m| m.banks)
            .or(hw.units.get(&unit).map(|u| u.count))
            .unwrap_or(1);
        let n = cfg.u64("n")?.unwrap_or(default_n);
        let mut reports = Vec::new();
        let mut root = p.root.clone();
        for (k, st) in root.statements.iter_mut().enumerate() {
            let Statement::Block(b) = st else { continue };
            if b.index(index).and_then(|i| i.get_range()).is_none() {
                continue;
            }
            match partition(b, index, n, &unit) {
                Ok(out) => {
                    **b = out;
                    reports.push(PassReport::new("partition").field("block", k).field("banks", n));
                }
                Err(e @ PassError::NotPartitionable(_)) => {
                    reports.push(PassReport::new("partition").field("block", k).field("refused", format!("\"{e}\"")));
                }
                Err(e) => return Err(e),
            }
        }
        Ok((with_root(p, root), reports))
    }
}

struct Schedule;

impl Pass for Schedule {
    fn name(&self) -> &str {
        "schedule"
    }

    fn keys(&self) -> &[&'static str] {
        &["mem"]
    }

    fn run(&self, p: &Program, cfg: &PassConfig, hw: &HardwareConfig) -> Result<(Program, Vec<PassReport>), PassError> {
        let out = schedule(&p.root, hw, cfg.get("mem"));
        let order: Vec<String> = out.order.iter().map(usize::to_string).collect();
        let placed: Vec<String> = out.placed.iter().map(|(b, a)| format!("{b}@{a}")).collect();
        let mut reports = vec![PassReport::new("schedule")
            .field("order", order.join(","))
            .field("placed", if placed.is_empty() { "none".into() } else { placed.join(",") })];
        for w in &out.warnings {
            reports.push(PassReport::new("schedule").field("warning", format!("\"{w}\"")));
        }
        Ok((with_root(p, out.block), reports))
    }
}

struct Boundary;

impl Pass for Boundary {
    fn name(&self) -> &str {
        "boundary"
    }

    fn keys(&self) -> &[&'static str] {
        &[]
    }

    fn run(&self, p: &Program, _: &PassConfig, _: &HardwareConfig) -> Result<(Program, Vec<PassReport>), PassError> {
        let mut root = p.root.clone();
        let mut reports = Vec::new();
        let mut stmts = Vec::new();
        for (k, st) in p.root.statements.iter().enumerate() {
            match st {
                Statement::Block(b) if !b.constraints.is_empty() => match separate_boundary(b) {
                    Ok(parts) => {
                        reports.push(PassReport::new("boundary").field("block", k).field("parts", parts.len()));
                        stmts.extend(parts.into_iter().map(|b| Statement::Block(Box::new(b))));
                    }
                    Err(PassError::NoInteriorRegion) => {
                        reports.push(PassReport::new("boundary").field("block", k).field("refused", "NoInteriorRegion"));
                        stmts.push(st.clone());
                    }
                    Err(e) => return Err(e),
                },
                other => stmts.push(other.clone()),
            }
        }
        root.statements = stmts;
        Ok((with_root(p, root), reports))
    }
}

struct Transpose;

impl Pass for Transpose {
    fn name(&self) -> &str {
        "transpose"
    }

    fn keys(&self) -> &[&'static str] {
        &["buffer", "order"]
    }

    fn run(&self, p: &Program, cfg: &PassConfig, _: &HardwareConfig) -> Result<(Program, Vec<PassReport>), PassError> {
        let buffer = cfg.get("buffer").ok_or_else(|| cfg.bad("needs buffer="))?;
        let order = cfg
            .get("order")
            .ok_or_else(|| cfg.bad("needs order="))?
            .split(',')
            .map(|d| d.trim().parse::<usize>().map_err(|_| cfg.bad("order is a comma list of dims")))
            .collect::<Result<Vec<_>, _>>()?;
        let root = transpose_layout(&p.root, buffer, &order)?;
        Ok((
            with_root(p, root),
            vec![PassReport::new("transpose").field("buffer", buffer).field("order", cfg.get("order").unwrap_or(""))],
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hwconfig::load_config;
    use crate::ir::structural_equal;
    use crate::text::parse_program;

    #[test]
    fn empty_pipeline_is_identity() {
        let p = parse_program(include_str!("../../fixtures/fig6a_fixed.stripe")).unwrap();
        let (q, reps) = apply_pipeline(&p, &Config::default()).unwrap();
        assert_eq!(q, p);
        assert!(reps.is_empty());
    }

    #[test]
    fn pinned_autotile_gives_fig6b() {
        let p = parse_program(include_str!("../../fixtures/fig6a_fixed.stripe")).unwrap();
        let want = parse_program(include_str!("../../fixtures/fig6b.stripe")).unwrap();
        let cfg = load_config("mem SRAM cap=512 line=8\npass autotile mem=SRAM tiles=x:3,y:4").unwrap();
        let (q, reps) = apply_pipeline(&p, &cfg).unwrap();
        assert!(structural_equal(&q.root, &want.root, true));
        assert_eq!(reps[0].get("block"), Some("0"));
        assert!(reps[0].to_string().starts_with("pass=autotile block=0 candidates=1 chosen=tiles=x:3,y:4 tile_elements=432"));
    }

    struct Breaker;

    impl Pass for Breaker {
        fn name(&self) -> &str {
            "breaker"
        }

        fn keys(&self) -> &[&'static str] {
            &[]
        }

        fn run(&self, p: &Program, _: &PassConfig, _: &HardwareConfig) -> Result<(Program, Vec<PassReport>), PassError> {
            let mut q = p.clone();
            if let Some(b) = q.root.at_path_mut(&[0]) {
                b.refinements[0].dims[0].size = 50;
            }
            Ok((q, Vec::new()))
        }
    }

    #[test]
    fn broken_rewrite_fails_the_pipeline() {
        let p = parse_program(include_str!("../../fixtures/fig6a_fixed.stripe")).unwrap();
        let mut reg = Registry::with_defaults();
        reg.register(Box::new(Breaker));
        let err = apply_pipeline_with(&reg, &p, &[PassConfig::new("breaker")], &HardwareConfig::default()).unwrap_err();
        assert!(matches!(err, PassError::PassFailed { ref pass, .. } if pass == "breaker"));
        let err = apply_pipeline_with(&reg, &p, &[PassConfig::new("nope")], &HardwareConfig::default()).unwrap_err();
        assert!(matches!(err, PassError::UnknownPass(_)));
    }
}
