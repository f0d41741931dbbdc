//! Flat `key = value` run manifests. Each entry becomes a long option placed
//! before the command-line flags, so flags given explicitly win.

use std::path::Path;

/// Parses manifest text into `(option, value)` pairs. Keys may use `-` or
/// `_`; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str, path: &Path) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("{}: line {}: expected key = value", path.display(), n + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("{}: line {}: empty key", path.display(), n + 1));
        }
        if key == "config" {
            return Err(format!("{}: line {}: config files cannot nest", path.display(), n + 1));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Position and value of `--config` in `args`, if present.
fn find_config(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

/// Splices the manifest named by `--config` into `args` right after the
/// subcommand. Boolean entries (`true`/`false`) become bare flags or are
/// dropped.
pub fn expand_args(args: Vec<String>) -> Result<Vec<String>, String> {
    let Some(path) = find_config(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let entries = parse_config(&text, path)?;
    let sub = args
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map(|i| i + 1)
        .ok_or_else(|| "a subcommand is required before the config entries can be applied".to_string())?;
    let mut injected = Vec::new();
    for (k, v) in entries {
        match v.as_str() {
            "true" => injected.push(format!("--{k}")),
            "false" => {}
            _ => {
                injected.push(format!("--{k}"));
                injected.push(v);
            }
        }
    }
    let mut out: Vec<String> = args[..=sub].to_vec();
    out.extend(injected);
    out.extend(args[sub + 1..].iter().cloned());
    Ok(out)
}
