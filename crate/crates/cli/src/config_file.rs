//! `key = value` configuration files, spliced into the argument list as
//! `--key value` pairs ahead of the command-line flags so that flags win.

use std::ffi::OsString;
use std::path::Path;

pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(format!("line {}: empty key", n + 1));
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

/// Finds `--config PATH` or `--config=PATH`, removes it and returns the path.
fn take_config(args: &mut Vec<OsString>) -> Result<Option<OsString>, String> {
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--" {
            break;
        }
        if a == "--config" {
            if i + 1 >= args.len() {
                return Err("--config needs a file path".into());
            }
            let path = args.remove(i + 1);
            args.remove(i);
            return Ok(Some(path));
        }
        if let Some(p) = a.strip_prefix("--config=") {
            args.remove(i);
            return Ok(Some(p.into()));
        }
        i += 1;
    }
    Ok(None)
}

/// Expands a `--config` file into flags placed right after the subcommand.
pub fn expand(mut args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = take_config(&mut args)? else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
    let pairs = parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let Some(sub) = args
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 1)
    else {
        return Ok(args);
    };
    let injected = pairs
        .into_iter()
        .flat_map(|(k, v)| [OsString::from(format!("--{k}")), OsString::from(v)]);
    args.splice(sub + 1..sub + 1, injected);
    Ok(args)
}
