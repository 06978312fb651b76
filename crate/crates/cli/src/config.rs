//! Flat `key = value` settings. Files, manifests and command-line flags all
//! resolve into the same canonical keys; units are part of the key name.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// (canonical key, command-line flag)
pub const KEYS: &[(&str, &str)] = &[
    ("s", "--s"),
    ("J_over_gmuBBz", "--J-over-gmuBBz"),
    ("Bz_T", "--Bz"),
    ("alpha", "--alpha"),
    ("Tmin_K", "--Tmin"),
    ("Tmax_K", "--Tmax"),
    ("points", "--points"),
    ("temperatures_K", "--temperatures"),
    ("model", "--model"),
    ("order", "--order"),
    ("dt_ns", "--dt-ns"),
    ("equil_ns", "--equil-ns"),
    ("average_ns", "--average-ns"),
    ("realizations", "--realizations"),
    ("stride", "--stride"),
    ("seed", "--seed"),
    ("gradient", "--gradient"),
    ("fd_step", "--fd-step"),
    ("paper_scale", "--paper-scale"),
    ("mode", "--mode"),
    ("out", "--out"),
];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(pub BTreeMap<String, String>);

impl Settings {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("{origin}:{}: expected key = value", n + 1));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.iter().any(|(key, _)| *key == k) {
                return err(format!("{origin}:{}: unknown key '{k}'", n + 1));
            }
            map.insert(k.to_string(), v.to_string());
        }
        Ok(Settings(map))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        debug_assert!(KEYS.iter().any(|(k, _)| *k == key), "{key}");
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn set_opt<T: ToString>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    /// `self` with every key of `over` replacing the existing value.
    pub fn overridden_by(mut self, over: &Settings) -> Self {
        self.0.extend(over.0.clone());
        self
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError(format!("invalid value '{v}' for {}", flag_of(key)))),
        }
    }

    /// Returns the value, recording `default` when absent so the resolved
    /// settings echo everything that was used.
    pub fn resolve<T: FromStr + ToString>(&mut self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.get(key)? {
            Some(v) => Ok(v),
            None => {
                self.set(key, default.to_string());
                Ok(default)
            }
        }
    }

    /// Comma-separated list of numbers.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|t| {
                        t.trim()
                            .parse()
                            .map_err(|_| ConfigError(format!("invalid list entry '{t}' for {}", flag_of(key))))
                    })
                    .collect()
            })
            .transpose()
    }
}

pub fn flag_of(key: &str) -> &'static str {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, f)| *f).unwrap_or("?")
}

/// Shortest representation that parses back to the same f64.
pub fn exact(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn to_text(s: &Settings) -> String {
        s.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    #[test]
    fn parse_and_override() {
        let file = Settings::parse("# comment\ns = 2\nBz_T=0.5  # trailing\n\n", "f").unwrap();
        assert_eq!(file.get::<f64>("s").unwrap(), Some(2.0));
        let mut cli = Settings::default();
        cli.set("s", 0.5);
        let merged = file.overridden_by(&cli);
        assert_eq!(merged.get::<f64>("s").unwrap(), Some(0.5));
        assert_eq!(merged.get::<f64>("Bz_T").unwrap(), Some(0.5));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(Settings::parse("Bz = 1", "f").unwrap_err().0.contains("unknown key 'Bz'"));
        assert!(Settings::parse("just words", "f").is_err());
        let s = Settings::parse("points = many", "f").unwrap();
        assert!(s.get::<usize>("points").unwrap_err().0.contains("--points"));
    }

    #[test]
    fn resolve_records_defaults_and_round_trips() {
        let mut s = Settings::default();
        assert_eq!(s.resolve("dt_ns", 5e-6).unwrap(), 5e-6);
        assert_eq!(s.raw("dt_ns"), Some("0.000005"));
        let x = 0.1 + 0.2;
        s.set("alpha", exact(x));
        let back = Settings::parse(&to_text(&s), "echo").unwrap();
        assert_eq!(back.get::<f64>("alpha").unwrap(), Some(x));
        assert_eq!(back, s);
    }

    #[test]
    fn lists() {
        let s = Settings::parse("temperatures_K = 1, 2,4.5", "f").unwrap();
        assert_eq!(s.list("temperatures_K").unwrap(), Some(vec![1.0, 2.0, 4.5]));
        assert_eq!(s.list("Tmin_K").unwrap(), None);
    }
}
