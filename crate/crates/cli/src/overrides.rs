//! Pulls `--key value` config flags out of the argument list before clap sees it.

use brainca::config::{config_keys, normalize_key};
use brainca::control::ControlConfig;
use brainca::morph::MorphConfig;

/// Flags owned by a subcommand itself; these are never treated as config keys.
const RESERVED: [&str; 9] = ["condition", "seed", "seeds", "out", "quick", "config", "threads", "runs", "first_seed"];

pub type Overrides = Vec<(String, String)>;

pub fn split_config_flags(argv: Vec<String>) -> Result<(Vec<String>, Overrides), String> {
    let keys = match argv.get(1).map(String::as_str) {
        Some("morpho") => config_keys(&MorphConfig::default()),
        Some("lander") => config_keys(&ControlConfig::default()),
        _ => return Ok((argv, Vec::new())),
    }
    .map_err(|e| e.to_string())?;
    let mut kept = Vec::with_capacity(argv.len());
    let mut overrides = Vec::new();
    let mut args = argv.into_iter();
    while let Some(arg) = args.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            kept.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (normalize_key(n), Some(v.to_string())),
            None => (normalize_key(flag), None),
        };
        if RESERVED.contains(&name.as_str()) || !keys.contains(&name) {
            kept.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => args.next().ok_or_else(|| format!("--{flag} needs a value"))?,
        };
        overrides.push((name, value));
    }
    Ok((kept, overrides))
}
