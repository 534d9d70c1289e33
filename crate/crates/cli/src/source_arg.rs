//! Resolution of `--source` arguments: a standard-source name (`perf`,
//! `priv`, `disj`, `bsc:0.2`, `sigma:8:0`) or a path to a JSON
//! source-definition file.

use std::path::Path;

use anyhow::{Context, Result};
use corrsim_core::source::{BipartiteSource, SourceSpec, StandardSource};

pub fn resolve_source(arg: &str) -> Result<BipartiteSource> {
    if let Some(std_src) = StandardSource::parse(arg) {
        return BipartiteSource::standard(&std_src)
            .with_context(|| format!("building standard source '{arg}'"));
    }
    let path = Path::new(arg);
    if path.exists() {
        let raw = std::fs::read(path).with_context(|| format!("reading {arg}"))?;
        let spec: SourceSpec =
            serde_json::from_slice(&raw).with_context(|| format!("parsing {arg}"))?;
        return spec.build().with_context(|| format!("validating {arg}"));
    }
    anyhow::bail!(
        "'{arg}' is neither a standard source name (perf, priv, disj, bsc:P, sigma:M:B) nor a file"
    )
}
