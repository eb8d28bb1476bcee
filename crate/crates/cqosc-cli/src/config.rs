//! Flat `key = value` configuration with one `[section]` per subcommand.
//! Lines starting with `#` are comments. Keys are validated strictly: an
//! unknown key anywhere is a `ConfigError`.

use std::collections::BTreeMap;

use cqosc::model::{ActionConvention, OscillatorConfig, TimeGrid};

use crate::CliError;

pub struct RawConfig {
    pub text: String,
    pub global: BTreeMap<String, String>,
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

pub fn parse(text: &str) -> Result<RawConfig, CliError> {
    let mut global = BTreeMap::new();
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(idx) => &raw_line[..idx],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if name.is_empty() {
                return Err(CliError::config(format!("empty section name on line {}", lineno + 1)));
            }
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::config(format!(
                "line {} is neither `key = value` nor `[section]`: {line:?}",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(CliError::config(format!("empty key or value on line {}", lineno + 1)));
        }
        let map = match &current {
            Some(name) => sections.get_mut(name).expect("section exists"),
            None => &mut global,
        };
        if map.insert(key.clone(), value).is_some() {
            return Err(CliError::config(format!(
                "duplicate key {key:?} on line {}",
                lineno + 1
            )));
        }
    }
    Ok(RawConfig {
        text: text.to_string(),
        global,
        sections,
    })
}

/// Typed accessor over one key/value map with strict key checking.
pub struct Keys<'a> {
    map: &'a BTreeMap<String, String>,
    context: &'a str,
}

impl<'a> Keys<'a> {
    pub fn new(map: &'a BTreeMap<String, String>, context: &'a str) -> Self {
        Keys { map, context }
    }

    pub fn check_known(&self, allowed: &[&str]) -> Result<(), CliError> {
        for key in self.map.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::config(format!(
                    "unknown key {key:?} in {}; allowed: {allowed:?}",
                    self.context
                )));
            }
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Result<&str, CliError> {
        self.map.get(key).map(|s| s.as_str()).ok_or_else(|| {
            CliError::config(format!("missing key {key:?} in {}", self.context))
        })
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        self.raw(key)?.parse().map_err(|_| {
            CliError::config(format!("key {key:?} in {} is not a number", self.context))
        })
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.map.get(key) {
            Some(_) => self.f64(key),
            None => Ok(default),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.raw(key)?.parse().map_err(|_| {
            CliError::config(format!("key {key:?} in {} is not an integer", self.context))
        })
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.map.get(key) {
            Some(_) => self.usize(key),
            None => Ok(default),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.map.get(key) {
            Some(raw) => raw.parse().map_err(|_| {
                CliError::config(format!("key {key:?} in {} is not an integer", self.context))
            }),
            None => Ok(default),
        }
    }

    pub fn string_or(&self, key: &str, default: &str) -> String {
        self.map
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        match self.map.get(key) {
            None => Ok(default.to_vec()),
            Some(raw) => raw
                .split(',')
                .map(|tok| {
                    tok.trim().parse().map_err(|_| {
                        CliError::config(format!(
                            "key {key:?} in {} must be a comma-separated number list",
                            self.context
                        ))
                    })
                })
                .collect(),
        }
    }
}

const GLOBAL_KEYS: &[&str] = &[
    "omega_c",
    "omega_q",
    "alpha",
    "d2",
    "convention",
    "t_i",
    "t_f",
    "n",
    "seed",
];

pub struct GlobalConfig {
    pub oscillator: OscillatorConfig,
    pub grid: TimeGrid,
    pub seed: u64,
}

pub fn global_config(raw: &RawConfig, seed_override: Option<u64>) -> Result<GlobalConfig, CliError> {
    let keys = Keys::new(&raw.global, "the global section");
    keys.check_known(GLOBAL_KEYS)?;
    let convention = match keys.string_or("convention", "saturated").as_str() {
        "saturated" => ActionConvention::Saturated,
        "decoherence_diffusion" => ActionConvention::DecoherenceDiffusion,
        other => {
            return Err(CliError::config(format!(
                "convention must be `saturated` or `decoherence_diffusion`, got {other:?}"
            )))
        }
    };
    let oscillator = OscillatorConfig::new(
        keys.f64("omega_c")?,
        keys.f64("omega_q")?,
        keys.f64("alpha")?,
        keys.f64("d2")?,
        convention,
    )?;
    let grid = TimeGrid::new(keys.f64("t_i")?, keys.f64("t_f")?, keys.usize("n")?)?;
    let seed = match seed_override {
        Some(s) => s,
        None => keys.u64_or("seed", 0)?,
    };
    Ok(GlobalConfig {
        oscillator,
        grid,
        seed,
    })
}

pub fn section<'a>(
    raw: &'a RawConfig,
    name: &'a str,
) -> Result<Keys<'a>, CliError> {
    static EMPTY: once_empty::Empty = once_empty::Empty;
    let map = raw.sections.get(name).unwrap_or(EMPTY.get());
    Ok(Keys::new(map, name))
}

/// A lazily created empty map with a stable address, so missing sections
/// behave like empty ones (all keys fall back to defaults).
mod once_empty {
    use std::collections::BTreeMap;
    use std::sync::OnceLock;

    pub struct Empty;

    impl Empty {
        pub fn get(&self) -> &'static BTreeMap<String, String> {
            static MAP: OnceLock<BTreeMap<String, String>> = OnceLock::new();
            MAP.get_or_init(BTreeMap::new)
        }
    }
}

/// Reject sections that no subcommand knows about.
pub fn check_sections(raw: &RawConfig) -> Result<(), CliError> {
    const KNOWN: &[&str] = &[
        "mpp",
        "correlators",
        "lattice_check",
        "langevin",
        "decoherence",
    ];
    for name in raw.sections.keys() {
        if !KNOWN.contains(&name.as_str()) {
            return Err(CliError::config(format!(
                "unknown section [{name}]; known sections: {KNOWN:?}"
            )));
        }
    }
    Ok(())
}

pub fn load(path: &std::path::Path, seed_override: Option<u64>) -> Result<(RawConfig, GlobalConfig), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    let raw = parse(&text)?;
    check_sections(&raw)?;
    let global = global_config(&raw, seed_override)?;
    Ok((raw, global))
}
