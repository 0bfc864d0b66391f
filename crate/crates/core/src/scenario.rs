//! Scenario files: strict TOML parsing, serialization, the bundled
//! reference scenarios and dotted field-path overrides.

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};
use crate::model::ScenarioConfig;

/// Directory that replaces the compiled-in reference scenarios.
pub const SEED_ENV: &str = "GRIDFREQ_SEED_SCENARIOS";

pub const BUNDLED: [(&str, &str); 8] = [
    ("ei20", include_str!("../scenarios/ei20.cfg")),
    ("ei40", include_str!("../scenarios/ei40.cfg")),
    ("ei60", include_str!("../scenarios/ei60.cfg")),
    ("ei80", include_str!("../scenarios/ei80.cfg")),
    ("ercot20", include_str!("../scenarios/ercot20.cfg")),
    ("ercot40", include_str!("../scenarios/ercot40.cfg")),
    ("ercot60", include_str!("../scenarios/ercot60.cfg")),
    ("ercot80", include_str!("../scenarios/ercot80.cfg")),
];

/// Virtual storage field: setting it fixes `p_max_mw = e_limit_mws / duration`.
const DURATION_FIELD: &str = "duration_s";

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Strict TOML deserialization with line/column and field-path errors.
pub fn parse_toml<T: DeserializeOwned>(text: &str, source_name: &str) -> Result<T> {
    let syntax = |e: toml::de::Error| {
        let at = e
            .span()
            .map(|s| {
                let (l, c) = line_col(text, s.start);
                format!("line {l}, column {c}: ")
            })
            .unwrap_or_default();
        Error::Parse {
            source_name: source_name.to_string(),
            message: format!("{at}{}", e.message()),
        }
    };
    let de = toml::Deserializer::parse(text).map_err(syntax)?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let at = inner
            .span()
            .map(|s| {
                let (l, c) = line_col(text, s.start);
                format!(" (line {l}, column {c})")
            })
            .unwrap_or_default();
        Error::Parse {
            source_name: source_name.to_string(),
            message: if path == "." {
                format!("{}{at}", inner.message())
            } else {
                format!("at `{path}`{at}: {}", inner.message())
            },
        }
    })
}

pub fn parse_config(text: &str, source_name: &str) -> Result<ScenarioConfig> {
    parse_toml(text, source_name)
}

pub fn serialize_config(config: &ScenarioConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Input(format!("cannot serialize scenario: {e}")))
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_config_file(path: &Path) -> Result<ScenarioConfig> {
    parse_config(&read_file(path)?, &path.display().to_string())
}

/// Text of a bundled reference scenario, honouring [`SEED_ENV`].
pub fn bundled_text(name: &str) -> Result<String> {
    let name = name.strip_suffix(".cfg").unwrap_or(name);
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Input(format!("no bundled scenario named `{name}`")))?;
    match std::env::var_os(SEED_ENV) {
        Some(dir) if !dir.is_empty() => seeded_text(name, Path::new(&dir)),
        _ => Ok(text.to_string()),
    }
}

fn seeded_text(name: &str, dir: &Path) -> Result<String> {
    read_file(&dir.join(format!("{name}.cfg")))
}

pub fn bundled_scenario(name: &str) -> Result<ScenarioConfig> {
    let text = bundled_text(name)?;
    parse_config(&text, &format!("{name} (bundled)"))
}

/// A scenario path, or the name of a bundled scenario if no such file exists.
pub fn load_scenario(arg: &str) -> Result<ScenarioConfig> {
    let path = Path::new(arg);
    if path.exists() {
        load_config_file(path)
    } else {
        let stem = arg.strip_suffix(".cfg").unwrap_or(arg);
        if BUNDLED.iter().any(|(n, _)| *n == stem) {
            bundled_scenario(stem)
        } else {
            load_config_file(path)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Key(String),
    Index(usize),
    All,
}

fn parse_path(path: &str) -> Result<Vec<Segment>> {
    let bad = |msg: &str| Error::Override {
        path: path.to_string(),
        message: msg.to_string(),
    };
    let mut out = Vec::new();
    for part in path.split('.') {
        let (key, mut rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if key.is_empty() {
            return Err(bad("empty path component"));
        }
        out.push(Segment::Key(key.to_string()));
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(|| bad("unclosed `[`"))?;
            let inner = &rest[1..close];
            out.push(if inner == "*" {
                Segment::All
            } else {
                Segment::Index(inner.parse().map_err(|_| bad("index must be an integer or `*`"))?)
            });
            rest = &rest[close + 1..];
            if !rest.is_empty() && !rest.starts_with('[') {
                return Err(bad("unexpected text after `]`"));
            }
        }
    }
    Ok(out)
}

fn coerce(old: Option<&toml::Value>, new: &toml::Value) -> toml::Value {
    match (old, new) {
        (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
        _ => new.clone(),
    }
}

fn set_at(node: &mut toml::Value, segs: &[Segment], value: &toml::Value, full: &str) -> Result<()> {
    let err = |message: String| Error::Override {
        path: full.to_string(),
        message,
    };
    match segs {
        [] => unreachable!(),
        [Segment::Key(k)] => {
            let table = node
                .as_table_mut()
                .ok_or_else(|| err(format!("`{k}` is not inside a table")))?;
            if k == DURATION_FIELD && !table.contains_key(DURATION_FIELD) {
                let duration = value
                    .as_float()
                    .or_else(|| value.as_integer().map(|i| i as f64))
                    .filter(|d| *d > 0.0)
                    .ok_or_else(|| err("duration must be a positive number".into()))?;
                let energy = table
                    .get("e_limit_mws")
                    .and_then(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)))
                    .ok_or_else(|| err("duration applies only to storage units".into()))?;
                table.insert("p_max_mw".into(), toml::Value::Float(energy / duration));
            } else {
                let v = coerce(table.get(k), value);
                table.insert(k.clone(), v);
            }
            Ok(())
        }
        [Segment::Key(k), rest @ ..] => {
            let child = node
                .as_table_mut()
                .and_then(|t| t.get_mut(k))
                .ok_or_else(|| err(format!("no field `{k}`")))?;
            set_at(child, rest, value, full)
        }
        [first, rest @ ..] => {
            let arr = node
                .as_array_mut()
                .ok_or_else(|| err("index applied to a non-array".into()))?;
            let len = arr.len();
            let items: Vec<&mut toml::Value> = match first {
                Segment::Index(i) => vec![arr
                    .get_mut(*i)
                    .ok_or_else(|| err(format!("index {i} out of range (length {len})")))?],
                _ => arr.iter_mut().collect(),
            };
            for item in items {
                if rest.is_empty() {
                    *item = coerce(Some(item), value);
                } else {
                    set_at(item, rest, value, full)?;
                }
            }
            Ok(())
        }
    }
}

/// Apply `path = value` overrides. Storage `duration_s` overrides run last
/// so that they see any new `e_limit_mws`.
pub fn apply_overrides(config: &ScenarioConfig, overrides: &[(String, toml::Value)]) -> Result<ScenarioConfig> {
    if overrides.is_empty() {
        return Ok(config.clone());
    }
    let mut root = toml::Value::try_from(config)
        .map_err(|e| Error::Input(format!("cannot convert scenario to a table: {e}")))?;
    let is_duration = |p: &str| p.rsplit('.').next() == Some(DURATION_FIELD);
    let ordered = overrides
        .iter()
        .filter(|(p, _)| !is_duration(p))
        .chain(overrides.iter().filter(|(p, _)| is_duration(p)));
    for (path, value) in ordered {
        let segs = parse_path(path)?;
        set_at(&mut root, &segs, value, path)?;
    }
    let text = toml::to_string(&root).map_err(|e| Error::Input(e.to_string()))?;
    parse_config(&text, "overridden scenario")
}
