//! Flat `key = value` config files. Values become `--key=value` arguments
//! placed right after the subcommand name, so flags given on the command line
//! (which come later) take precedence.

use std::ffi::OsString;

use clap::Command;

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
/// Keys may use `_` or `-`.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`", i + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("config line {}: empty key", i + 1));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Pulls `--config FILE` / `--config=FILE` out of `args`.
pub fn extract_path(args: &mut Vec<OsString>) -> Result<Option<OsString>, String> {
    let mut found = None;
    let mut i = 0;
    while i < args.len() {
        let s = args[i].to_string_lossy().into_owned();
        if s == "--" {
            break;
        }
        if s == "--config" {
            if i + 1 >= args.len() {
                return Err("--config needs a file".into());
            }
            found = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(p) = s.strip_prefix("--config=") {
            found = Some(OsString::from(p));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(found)
}

/// Turns config entries into arguments understood by `sub`. Keys the
/// subcommand does not define are skipped and returned separately, so one
/// file can serve several subcommands.
pub fn to_args(entries: &[(String, String)], sub: &Command) -> (Vec<OsString>, Vec<String>) {
    let mut args = Vec::new();
    let mut unused = Vec::new();
    for (key, value) in entries {
        let arg = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str()));
        match arg {
            Some(a) if a.get_action().takes_values() => args.push(OsString::from(format!("--{key}={value}"))),
            Some(_) => match value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => args.push(OsString::from(format!("--{key}"))),
                _ => {}
            },
            None => unused.push(key.clone()),
        }
    }
    (args, unused)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::{Arg, ArgAction};

    #[test]
    fn parses_pairs_and_comments() {
        let e = parse("# run\nwindow = 5\n\nmin_count=10\n").unwrap();
        assert_eq!(e, vec![("window".into(), "5".into()), ("min-count".into(), "10".into())]);
        assert!(parse("nonsense\n").is_err());
    }

    #[test]
    fn extracts_config_flag() {
        let mut a: Vec<OsString> = ["synwalk", "count", "--config", "c.txt", "--window", "3"].iter().map(OsString::from).collect();
        assert_eq!(extract_path(&mut a).unwrap(), Some(OsString::from("c.txt")));
        assert_eq!(a.len(), 4);
        let mut b: Vec<OsString> = ["synwalk", "--config=x", "eval"].iter().map(OsString::from).collect();
        assert_eq!(extract_path(&mut b).unwrap(), Some(OsString::from("x")));
    }

    #[test]
    fn keeps_only_known_keys() {
        let sub = Command::new("count")
            .arg(Arg::new("window").long("window"))
            .arg(Arg::new("verbose").long("verbose").action(ArgAction::SetTrue));
        let entries = vec![
            ("window".to_string(), "3".to_string()),
            ("verbose".to_string(), "true".to_string()),
            ("alpha".to_string(), "0.4".to_string()),
        ];
        let (args, unused) = to_args(&entries, &sub);
        assert_eq!(args, vec![OsString::from("--window=3"), OsString::from("--verbose")]);
        assert_eq!(unused, vec!["alpha".to_string()]);
    }
}
