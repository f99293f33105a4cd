//! Run files of `key = value` lines, merged with command-line flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Parses a run file. Blank lines and lines starting with `#` are skipped; keys may use
/// `_` or `-`.
pub fn parse(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            bail!("line {}: duplicate key `{key}`", i + 1);
        }
    }
    Ok(out)
}

/// Resolves settings with precedence flag > file > default and records every resolved value.
#[derive(Debug, Default)]
pub struct Resolver {
    file: BTreeMap<String, String>,
    echo: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(file: BTreeMap<String, String>) -> Resolver {
        Resolver {
            file,
            echo: BTreeMap::new(),
        }
    }

    fn take_file_value<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.file.remove(key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("config key `{key}`: cannot parse `{s}`: {e}")),
        }
    }

    pub fn value<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let file = self.take_file_value(key)?;
        let v = flag.or(file).unwrap_or(default);
        self.echo.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Comma-separated list; empty lists are rejected.
    pub fn list<T: FromStr + Display>(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        let file = self.file.remove(key);
        let text = flag.or(file).unwrap_or_else(|| default.to_string());
        let items: Vec<T> = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| anyhow!("`{key}`: cannot parse `{s}`: {e}")))
            .collect::<Result<_>>()?;
        if items.is_empty() {
            bail!("`{key}` list is empty");
        }
        let shown: Vec<String> = items.iter().map(|x| x.to_string()).collect();
        self.echo.insert(key.to_string(), shown.join(","));
        Ok(items)
    }

    /// Resolved settings; fails on file keys that no setting consumed.
    pub fn finish(self) -> Result<BTreeMap<String, String>> {
        if let Some(k) = self.file.keys().next() {
            bail!("unknown config key `{k}`");
        }
        Ok(self.echo)
    }
}

pub fn load(path: &std::path::Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse(&text).with_context(|| format!("in config {}", path.display()))
}
