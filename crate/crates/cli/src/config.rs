//! Flat `key=value` run configuration. Keys match the long flag names, with
//! dashes or underscores; a flag given on the command line wins over the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::UsageError;

pub const KEYS: &[&str] = &[
    "n",
    "records",
    "zone",
    "delta",
    "epsilon",
    "seed",
    "max_resamples",
    "out",
    "emit_topology",
    "data",
    "split",
    "folds",
    "search_iters",
    "knn_k",
    "knn_p",
    "forest_trees",
    "forest_depth",
    "mlp_layers",
    "mlp_neurons",
    "mlp_eta0",
    "blender_depth",
    "blender_lr",
    "model",
    "jobs",
];

#[derive(Debug, Default, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, (usize, String)>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| UsageError(format!("config line {}: expected key=value", idx + 1)))?;
            let key = k.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(UsageError(format!("config line {}: unknown key `{}`", idx + 1, k.trim())));
            }
            values.insert(key, (idx + 1, v.trim().to_string()));
        }
        Ok(RunConfig { values })
    }

    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The flag value if given, else the file value, else `None`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, UsageError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        debug_assert!(KEYS.contains(&key), "unregistered config key {key}");
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|e| UsageError(format!("config line {line}: invalid `{key}` value `{v}`: {e}"))),
        }
    }

    pub fn or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, UsageError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, flag: Option<T>, key: &str) -> Result<T, UsageError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.pick(flag, key)?
            .ok_or_else(|| UsageError(format!("missing --{} (or `{key}` in the config file)", key.replace('_', "-"))))
    }
}

/// `lo..hi` or a single value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range<T>(pub T, pub T);

impl<T: FromStr + Copy> FromStr for Range<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| t.trim().parse::<T>().map_err(|e| format!("`{t}`: {e}"));
        match s.split_once("..") {
            Some((a, b)) => Ok(Range(parse(a)?, parse(b)?)),
            None => {
                let v = parse(s)?;
                Ok(Range(v, v))
            }
        }
    }
}

/// Three comma-separated fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fractions(pub f64, pub f64, pub f64);

impl FromStr for Fractions {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
            .collect::<Result<_, _>>()?;
        match parts[..] {
            [a, b, c] => Ok(Fractions(a, b, c)),
            _ => Err(format!("expected three fractions, got {}", parts.len())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let cfg = RunConfig::parse("# run\nrecords = 50\nsearch-iters=3\n").unwrap();
        assert_eq!(cfg.pick(None::<usize>, "records").unwrap(), Some(50));
        assert_eq!(cfg.pick(Some(7usize), "records").unwrap(), Some(7));
        assert_eq!(cfg.pick(None::<usize>, "search_iters").unwrap(), Some(3));
        assert_eq!(cfg.or(None::<u64>, "seed", 9).unwrap(), 9);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(RunConfig::parse("records 5").is_err());
        assert!(RunConfig::parse("colour=blue").is_err());
        let cfg = RunConfig::parse("records=many").unwrap();
        assert!(cfg.pick(None::<usize>, "records").is_err());
    }

    #[test]
    fn ranges_and_fractions() {
        assert_eq!("1..10".parse::<Range<usize>>().unwrap(), Range(1, 10));
        assert_eq!("0.5".parse::<Range<f64>>().unwrap(), Range(0.5, 0.5));
        assert_eq!("0.72,0.18,0.10".parse::<Fractions>().unwrap(), Fractions(0.72, 0.18, 0.10));
        assert!("0.5,0.5".parse::<Fractions>().is_err());
    }
}
