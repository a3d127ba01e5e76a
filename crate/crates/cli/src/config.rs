//! `--config FILE` support: a line-oriented `key = value` file whose keys
//! are long flag names. Keys already given on the command line are skipped.

use std::ffi::OsString;
use std::path::Path;

use clap::{ArgAction, Command};

use crate::error::{CliError, CliResult};

pub fn parse_config(text: &str, path: &Path) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::data(path, format!("line {}: expected key = value", k + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(CliError::data(path, format!("line {}: empty key", k + 1)));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> CliResult<Option<String>> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--" {
            break;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Ok(Some(v.to_string()));
        }
        if a == "--config" {
            return match it.next() {
                Some(v) => Ok(Some(v.to_string_lossy().into_owned())),
                None => Err(CliError::Usage("--config needs a file".into())),
            };
        }
    }
    Ok(None)
}

fn given(args: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let prefix = format!("--{key}=");
    args.iter().any(|a| {
        let a = a.to_string_lossy();
        a == flag || a.starts_with(&prefix)
    })
}

/// Appends config-file entries as flags for the chosen subcommand.
pub fn merge(args: Vec<OsString>, cmd: &Command) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let entries = parse_config(&text, Path::new(&path))?;
    let sub_name = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .find(|a| cmd.find_subcommand(a).is_some());
    let sub = sub_name.as_deref().and_then(|n| cmd.find_subcommand(n));
    let lookup = |key: &str| {
        sub.into_iter()
            .flat_map(|s| s.get_arguments())
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key))
            .cloned()
    };
    let mut out = args.clone();
    for (key, value) in entries {
        if key == "config" || given(&args, &key) {
            continue;
        }
        let arg = lookup(&key).ok_or_else(|| {
            CliError::Usage(format!("{path}: unknown key '{key}' for this subcommand"))
        })?;
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "yes" | "1" => out.push(format!("--{key}").into()),
                "false" | "no" | "0" => {}
                _ => {
                    return Err(CliError::Usage(format!(
                        "{path}: '{key}' expects true or false"
                    )))
                }
            },
            _ => {
                out.push(format!("--{key}").into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}
