//! Flat sectioned key-value run configuration.
//!
//! ```text
//! # comment
//! [run]
//! images = ramp, steps
//! frames_per_level = 1000
//!
//! [policy]
//! preset = P_cr
//! ```
//!
//! Sections may repeat (several `[policy]` blocks declare several arms).

use crate::error::CliError;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    entries: Vec<(String, String)>,
}

impl Section {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            entries: Vec::new(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    fn parse_with<T, F>(&self, key: &str, what: &str, f: F) -> Result<Option<T>, CliError>
    where
        F: Fn(&str) -> Option<T>,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => f(raw).map(Some).ok_or_else(|| {
                CliError::config(format!(
                    "[{}] {key} = '{raw}' is not a valid {what}",
                    self.name
                ))
            }),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.parse_with(key, "number", |s| s.parse().ok())
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        self.parse_with(key, "integer", |s| s.parse().ok())
    }

    pub fn u32_or(&self, key: &str, default: u32) -> Result<u32, CliError> {
        Ok(self
            .parse_with(key, "integer", |s| s.parse().ok())?
            .unwrap_or(default))
    }

    pub fn i32_or(&self, key: &str, default: i32) -> Result<i32, CliError> {
        Ok(self
            .parse_with(key, "integer", |s| s.parse().ok())?
            .unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self
            .parse_with(key, "integer", |s| s.parse().ok())?
            .unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        self.parse_with(key, "boolean", |s| match s {
            "true" | "yes" | "1" => Some(true),
            "false" | "no" | "0" => Some(false),
            _ => None,
        })
        .map(|v| v.unwrap_or(default))
    }

    pub fn list_f64(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.parse_with(key, "comma-separated number list", |s| {
            s.split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(|p| p.parse().ok())
                .collect()
        })
    }

    pub fn list_u32(&self, key: &str) -> Result<Option<Vec<u32>>, CliError> {
        self.parse_with(key, "comma-separated integer list", |s| {
            s.split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(|p| p.parse().ok())
                .collect()
        })
    }

    pub fn list_str(&self, key: &str) -> Option<Vec<String>> {
        self.get(key).map(|s| {
            s.split(',')
                .map(|p| p.trim().to_string())
                .filter(|p| !p.is_empty())
                .collect()
        })
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key).ok_or_else(|| {
            CliError::config(format!("[{}] is missing required key '{key}'", self.name))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    sections: Vec<Section>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, CliError> {
        let mut sections: Vec<Section> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| {
                        CliError::config(format!(
                            "line {}: unterminated section header",
                            lineno + 1
                        ))
                    })?
                    .trim();
                if name.is_empty() {
                    return Err(CliError::config(format!(
                        "line {}: empty section name",
                        lineno + 1
                    )));
                }
                sections.push(Section::new(name));
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let section = sections.last_mut().ok_or_else(|| {
                CliError::config(format!("line {}: key before any [section]", lineno + 1))
            })?;
            section
                .entries
                .push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(Config { sections })
    }

    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn empty() -> Config {
        Config {
            sections: Vec::new(),
        }
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn sections_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Section> {
        self.sections.iter().filter(move |s| s.name == name)
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    /// Section accessor that tolerates a missing section by yielding an
    /// empty one, so defaults apply uniformly.
    pub fn section_or_empty(&self, name: &str) -> Section {
        self.section(name)
            .cloned()
            .unwrap_or_else(|| Section::new(name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_keys_and_comments() {
        let cfg = Config::parse(
            "# top comment\n[run]\nimages = ramp, steps\nframes = 100\n\n[policy]\npreset = P_cr\n[policy]\npreset = P_s\n",
        )
        .unwrap();
        let run = cfg.section("run").unwrap();
        assert_eq!(run.get("frames"), Some("100"));
        assert_eq!(run.list_str("images").unwrap(), vec!["ramp", "steps"]);
        let arms: Vec<_> = cfg.sections_named("policy").collect();
        assert_eq!(arms.len(), 2);
        assert_eq!(arms[1].get("preset"), Some("P_s"));
    }

    #[test]
    fn typed_accessors_and_defaults() {
        let cfg = Config::parse("[a]\nx = 2.5\nflag = yes\nlist = 1, 2, 3\n").unwrap();
        let a = cfg.section("a").unwrap();
        assert_eq!(a.f64("x").unwrap(), Some(2.5));
        assert_eq!(a.f64_or("missing", 7.0).unwrap(), 7.0);
        assert!(a.bool_or("flag", false).unwrap());
        assert_eq!(a.list_f64("list").unwrap().unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(a.require("nope").is_err());
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(Config::parse("[run\n").is_err());
        assert!(Config::parse("key = 1\n").is_err());
        assert!(Config::parse("[run]\njust a line\n").is_err());
        let cfg = Config::parse("[a]\nx = abc\n").unwrap();
        assert!(cfg.section("a").unwrap().f64("x").is_err());
    }

    #[test]
    fn later_duplicate_keys_win_within_a_section() {
        let cfg = Config::parse("[a]\nx = 1\nx = 2\n").unwrap();
        assert_eq!(cfg.section("a").unwrap().get("x"), Some("2"));
    }
}
