//! `--config FILE` support. The file holds flat `key = value` lines whose keys
//! are long flag names; they are turned into flags placed directly after the
//! subcommand, so anything given explicitly on the command line wins.
//!
//! A run manifest is also accepted: its `param.*` keys are used and the
//! bookkeeping keys are skipped, which makes re-running a manifest a one-liner.

use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;

use crate::args::Cli;
use crate::CliError;

/// Keys written by [`crate::manifest::RunManifest`] besides the parameters.
const MANIFEST_KEYS: [&str; 6] = ["version", "subcommand", "seeds", "rng", "start_unix", "end_unix"];

/// Parsed `key = value` pairs in file order.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected `key = value`, got {line:?}", k + 1)));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", k + 1)));
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Flags equivalent to `pairs` for `subcommand`, leaving out keys listed in
/// `explicit`. Unknown keys are an error.
pub fn pairs_to_flags(
    subcommand: &str,
    pairs: &[(String, String)],
    explicit: &[String],
) -> Result<Vec<OsString>, CliError> {
    let cli = Cli::command();
    let Some(sub) = cli.find_subcommand(subcommand) else {
        return Err(CliError::Usage(format!("unknown subcommand {subcommand:?}")));
    };
    let is_manifest = pairs.iter().any(|(k, _)| k == "subcommand");
    let mut flags = Vec::new();
    for (key, value) in pairs {
        let key = if is_manifest {
            if key == "subcommand" && value != subcommand {
                return Err(CliError::Usage(format!(
                    "manifest is for `{value}`, not `{subcommand}`"
                )));
            }
            if MANIFEST_KEYS.contains(&key.as_str()) || key.starts_with("output.") || key.starts_with("result.") {
                continue;
            }
            match key.strip_prefix("param.") {
                Some(k) => k.replace('_', "-"),
                None => return Err(CliError::Usage(format!("unknown manifest key {key:?}"))),
            }
        } else {
            key.replace('_', "-")
        };
        let key = key.as_str();
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key) && key != "config")
            .ok_or_else(|| CliError::Usage(format!("unknown config key {key:?} for `{subcommand}`")))?;
        if explicit.iter().any(|e| e == key) {
            continue;
        }
        if arg.get_action().takes_values() {
            flags.push(OsString::from(format!("--{key}")));
            flags.push(OsString::from(value));
        } else {
            match value.as_str() {
                "true" => flags.push(OsString::from(format!("--{key}"))),
                "false" => {}
                _ => {
                    return Err(CliError::Usage(format!(
                        "config key {key:?} is a switch; use true or false, not {value:?}"
                    )))
                }
            }
        }
    }
    Ok(flags)
}

/// Splice the flags from any `--config FILE` into `argv`.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(sub_idx) = argv
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, a)| !a.to_string_lossy().starts_with('-'))
        .map(|(i, _)| i)
    else {
        return Ok(argv);
    };
    let mut path = None;
    let mut explicit = Vec::new();
    let mut i = sub_idx + 1;
    while i < argv.len() {
        let a = argv[i].to_string_lossy();
        if a == "--" {
            break;
        }
        if let Some(flag) = a.strip_prefix("--") {
            explicit.push(flag.split('=').next().unwrap_or(flag).to_string());
        }
        if a == "--config" {
            path = argv.get(i + 1).cloned();
            i += 1;
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(OsString::from(p));
        }
        i += 1;
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let subcommand = argv[sub_idx].to_string_lossy().into_owned();
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.to_string_lossy())))?;
    let flags = pairs_to_flags(&subcommand, &parse_pairs(&text)?, &explicit)?;
    let mut out = argv;
    out.splice(sub_idx + 1..sub_idx + 1, flags);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[OsString]) -> Vec<String> {
        v.iter().map(|s| s.to_string_lossy().into_owned()).collect()
    }

    #[test]
    fn parses_pairs_and_comments() {
        let pairs = parse_pairs("# run\nn0 = 10\n\nt_end=2.5 \n").unwrap();
        assert_eq!(pairs, vec![("n0".into(), "10".into()), ("t_end".into(), "2.5".into())]);
        assert!(parse_pairs("kappa 0.3").is_err());
    }

    #[test]
    fn keys_become_flags() {
        let pairs = parse_pairs("kappa = 0.3\nspectrum = true\n").unwrap();
        assert_eq!(strings(&pairs_to_flags("ode", &pairs, &[]).unwrap()), ["--kappa", "0.3", "--spectrum"]);
        let off = parse_pairs("spectrum = false").unwrap();
        assert!(pairs_to_flags("ode", &off, &[]).unwrap().is_empty());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let pairs = parse_pairs("kapa = 0.3").unwrap();
        let err = pairs_to_flags("mc", &pairs, &[]).unwrap_err();
        assert!(err.to_string().contains("kapa"));
        // a key valid for one subcommand is unknown for another
        assert!(pairs_to_flags("moments", &parse_pairs("n0 = 5").unwrap(), &[]).is_err());
        assert!(pairs_to_flags("mc", &parse_pairs("config = x").unwrap(), &[]).is_err());
    }

    #[test]
    fn explicit_flags_win() {
        let pairs = parse_pairs("times = 0.1,0.2\nseed = 4").unwrap();
        let flags = pairs_to_flags("mc", &pairs, &["times".to_string()]).unwrap();
        assert_eq!(strings(&flags), ["--seed", "4"]);
    }

    #[test]
    fn manifests_are_accepted() {
        let text = "version = 0.1.0\nsubcommand = mc\nparam.n0 = 50\nparam.t-end = 2\nseeds = 3\nstart_unix = 1.0\noutput.timeseries.csv = sha256:00\n";
        let flags = pairs_to_flags("mc", &parse_pairs(text).unwrap(), &[]).unwrap();
        assert_eq!(strings(&flags), ["--n0", "50", "--t-end", "2"]);
        assert!(pairs_to_flags("ode", &parse_pairs(text).unwrap(), &[]).is_err());
    }
}
