//! Plain-text `key=value` configuration with dotted keys.

use std::sync::{Arc, Mutex};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    // shared by clones, so keys read by sweep points count as used
    used: Arc<Mutex<BTreeSet<String>>>,
}

impl Config {
    /// Parse `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Config::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return invalid(format!("config line {}: expected key=value, got {raw:?}", no + 1));
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return invalid(format!("config line {}: empty key", no + 1));
            }
            c.values.insert(k.to_string(), v.to_string());
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Config::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    /// Apply a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        match pair.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                self.set(k.trim(), v.trim());
                Ok(())
            }
            _ => invalid(format!("expected key=value, got {pair:?}")),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.used.lock().unwrap().insert(key.to_string());
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .or_else(|_| invalid(format!("cannot parse {key}={s:?}"))),
        }
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .or_else(|_| invalid(format!("cannot parse {key}={s:?}"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        match self.get_opt(key)? {
            Some(v) => Ok(v),
            None => invalid(format!("missing required setting {key}")),
        }
    }

    /// Keys present but never read.
    pub fn unused(&self) -> Vec<String> {
        let used = self.used.lock().unwrap();
        self.values.keys().filter(|k| !used.contains(*k)).cloned().collect()
    }
}

/// `lo:hi:count`, or a single value.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.hi } else { self.lo + step * i as f64 })
            .collect()
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.count == 0 {
            return invalid(format!("{name}: count must be >= 1"));
        }
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return invalid(format!("{name}: bounds must be finite"));
        }
        if self.count > 1 && self.hi < self.lo {
            return invalid(format!("{name}: hi < lo"));
        }
        Ok(())
    }
}

impl FromStr for Range {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |t: &str| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        match parts.as_slice() {
            [v] => {
                let v = num(v)?;
                Ok(Range { lo: v, hi: v, count: 1 })
            }
            [lo, hi, n] => Ok(Range {
                lo: num(lo)?,
                hi: num(hi)?,
                count: n.parse().map_err(|e| format!("{n:?}: {e}"))?,
            }),
            _ => Err(format!("expected lo:hi:count, got {s:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut c = Config::parse("# x\ngrid.n = 512\nkappa=1 # trailing\n\n").unwrap();
        assert_eq!(c.get::<usize>("grid.n", 0).unwrap(), 512);
        c.set_pair("kappa=0.5").unwrap();
        assert_eq!(c.get::<f64>("kappa", 0.0).unwrap(), 0.5);
        assert!(Config::parse("novalue").is_err());
        assert!(c.get::<usize>("kappa", 0).is_err());
    }

    #[test]
    fn ranges() {
        let r: Range = "0:1:5".parse().unwrap();
        assert_eq!(r.points(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let r: Range = "0.3".parse().unwrap();
        assert_eq!(r.points(), vec![0.3]);
        assert!("1:2".parse::<Range>().is_err());
        assert!(Range { lo: 0.0, hi: 1.0, count: 0 }.validate("x").is_err());
    }
}
