//! Flat sectioned key-value text (INI style).
//!
//! ```text
//! # comment
//! [section]
//! key = value        ; trailing comments start with '#' or ';'
//! ```
//!
//! Keys outside any section belong to the section named `""`. Every value
//! remembers the line it came from so callers can report precise errors.

use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IniError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: field `{section}.{key}`: {msg}")]
    Field {
        line: usize,
        section: String,
        key: String,
        msg: String,
    },
    #[error("missing field `{section}.{key}`")]
    Missing { section: String, key: String },
    #[error("missing section `[{0}]`")]
    MissingSection(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ini {
    pub sections: Vec<Section>,
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self, IniError> {
        let mut sections = vec![Section {
            name: String::new(),
            line: 0,
            entries: Vec::new(),
        }];
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| IniError::Syntax {
                    line: line_no,
                    msg: "unterminated section header".into(),
                })?;
                let name = name.trim();
                if name.is_empty() {
                    return Err(IniError::Syntax {
                        line: line_no,
                        msg: "empty section name".into(),
                    });
                }
                if sections.iter().any(|s| s.name == name) {
                    return Err(IniError::Syntax {
                        line: line_no,
                        msg: format!("duplicate section `[{name}]`"),
                    });
                }
                sections.push(Section {
                    name: name.to_string(),
                    line: line_no,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| IniError::Syntax {
                line: line_no,
                msg: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(IniError::Syntax {
                    line: line_no,
                    msg: "empty key".into(),
                });
            }
            let section = sections.last_mut().expect("root section");
            if section.entries.iter().any(|e| e.key == key) {
                return Err(IniError::Syntax {
                    line: line_no,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line: line_no,
            });
        }
        Ok(Self { sections })
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn require_section(&self, name: &str) -> Result<&Section, IniError> {
        self.section(name)
            .ok_or_else(|| IniError::MissingSection(name.to_string()))
    }

    /// Sections whose name starts with `prefix`, e.g. `node.` for `[node.anna]`.
    pub fn sections_with_prefix<'a>(
        &'a self,
        prefix: &'a str,
    ) -> impl Iterator<Item = (&'a str, &'a Section)> + 'a {
        self.sections
            .iter()
            .filter_map(move |s| s.name.strip_prefix(prefix).map(|rest| (rest, s)))
    }
}

impl Section {
    pub fn entry(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entry(key).map(|e| e.value.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, IniError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| IniError::Field {
                line: e.line,
                section: self.name.clone(),
                key: key.to_string(),
                msg: err.to_string(),
            }),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, IniError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| IniError::Missing {
            section: self.name.clone(),
            key: key.to_string(),
        })
    }

    /// Builds a field error pointing at `key` (or at the section header if absent).
    pub fn field_error(&self, key: &str, msg: impl Into<String>) -> IniError {
        IniError::Field {
            line: self.entry(key).map_or(self.line, |e| e.line),
            section: self.name.clone(),
            key: key.to_string(),
            msg: msg.into(),
        }
    }

    /// Rejects keys not in `allowed`, catching typos in configs.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), IniError> {
        match self.entries.iter().find(|e| !allowed.contains(&e.key.as_str())) {
            Some(e) => Err(IniError::Field {
                line: e.line,
                section: self.name.clone(),
                key: e.key.clone(),
                msg: "unknown field".into(),
            }),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let ini = Ini::parse("top = 1\n# c\n[run]\nseed = 42 ; trailing\n\n[node.anna]\nmu=0.5\n")
            .unwrap();
        assert_eq!(ini.section("").unwrap().require::<u32>("top").unwrap(), 1);
        let run = ini.section("run").unwrap();
        assert_eq!(run.require::<u64>("seed").unwrap(), 42);
        let nodes: Vec<_> = ini.sections_with_prefix("node.").map(|(n, _)| n).collect();
        assert_eq!(nodes, vec!["anna"]);
    }

    #[test]
    fn reports_line_numbers() {
        let err = Ini::parse("[run]\nseed = 1\nbogus\n").unwrap_err();
        assert_eq!(err, IniError::Syntax { line: 3, msg: "expected `key = value`, found `bogus`".into() });
        let ini = Ini::parse("[run]\n\nseed = x\n").unwrap();
        match ini.section("run").unwrap().require::<u64>("seed") {
            Err(IniError::Field { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicates_and_bad_headers() {
        assert!(Ini::parse("[a]\n[a]\n").is_err());
        assert!(Ini::parse("[a]\nx=1\nx=2\n").is_err());
        assert!(Ini::parse("[a\n").is_err());
        assert!(Ini::parse("[]\n").is_err());
    }

    #[test]
    fn unknown_keys_are_flagged() {
        let ini = Ini::parse("[run]\nseed = 1\nsed = 2\n").unwrap();
        let err = ini.section("run").unwrap().check_keys(&["seed"]).unwrap_err();
        assert!(err.to_string().contains("line 3"));
    }
}
