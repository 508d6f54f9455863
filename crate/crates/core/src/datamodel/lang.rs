//! Language tags, the language registry, and ordered language sets.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::SchemaError;

/// The 16 evaluation languages the registry starts with.
pub const SEED_LANGUAGES: [&str; 16] = [
    "en", "fr", "de", "es", "it", // main study
    "ms", "da", "fi", "no", "bn", "am", // low-resource
    "ru", "zh", "he", "ar", "hi", // distant scripts / token distributions
];

/// The five-language pool used for mixup, corpus mixing and word translation.
pub const DEFAULT_POOL: [&str; 5] = ["en", "fr", "de", "es", "it"];

/// Set of language codes accepted by [`LanguageTag::parse`].
#[derive(Debug, Clone)]
pub struct LanguageRegistry {
    codes: BTreeSet<String>,
}

impl Default for LanguageRegistry {
    fn default() -> Self {
        Self {
            codes: SEED_LANGUAGES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn global() -> &'static RwLock<LanguageRegistry> {
    static REGISTRY: OnceLock<RwLock<LanguageRegistry>> = OnceLock::new();
    REGISTRY.get_or_init(|| RwLock::new(LanguageRegistry::default()))
}

impl LanguageRegistry {
    pub fn contains(&self, code: &str) -> bool {
        self.codes.contains(code)
    }

    /// Adds a code after checking its shape (2-3 lowercase ASCII letters).
    pub fn register(&mut self, code: &str) -> Result<(), SchemaError> {
        check_shape(code)?;
        self.codes.insert(code.to_string());
        Ok(())
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.codes.iter().map(String::as_str)
    }

    pub fn parse(&self, code: &str) -> Result<LanguageTag, SchemaError> {
        check_shape(code)?;
        if !self.contains(code) {
            return Err(SchemaError::new(format!("unknown language code {code:?}")));
        }
        Ok(LanguageTag(code.to_string()))
    }

    /// Registers extra codes in the process-wide registry used by serde and
    /// `LanguageTag::parse`.
    pub fn register_global(code: &str) -> Result<(), SchemaError> {
        global().write().expect("language registry poisoned").register(code)
    }

    pub fn global_snapshot() -> LanguageRegistry {
        global().read().expect("language registry poisoned").clone()
    }
}

fn check_shape(code: &str) -> Result<(), SchemaError> {
    let ok = (2..=3).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_lowercase());
    if ok {
        Ok(())
    } else {
        Err(SchemaError::new(format!(
            "language code {code:?} must be 2-3 lowercase ASCII letters"
        )))
    }
}

/// ISO-639-1 style language code, validated against the global registry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LanguageTag(String);

impl LanguageTag {
    pub fn parse(code: &str) -> Result<Self, SchemaError> {
        global().read().expect("language registry poisoned").parse(code)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn english() -> Self {
        LanguageTag("en".to_string())
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for LanguageTag {
    type Err = SchemaError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageTag::parse(s)
    }
}

impl Serialize for LanguageTag {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for LanguageTag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        LanguageTag::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// Ordered, duplicate-free language pool with a pivot member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLanguageSet")]
pub struct LanguageSet {
    members: Vec<LanguageTag>,
    pivot: LanguageTag,
}

#[derive(Deserialize)]
struct RawLanguageSet {
    members: Vec<LanguageTag>,
    pivot: LanguageTag,
}

impl TryFrom<RawLanguageSet> for LanguageSet {
    type Error = SchemaError;
    fn try_from(raw: RawLanguageSet) -> Result<Self, Self::Error> {
        LanguageSet::new(raw.members, raw.pivot)
    }
}

impl LanguageSet {
    pub fn new(members: Vec<LanguageTag>, pivot: LanguageTag) -> Result<Self, SchemaError> {
        let distinct: BTreeSet<_> = members.iter().collect();
        if distinct.len() != members.len() {
            return Err(SchemaError::new("language set members must be distinct"));
        }
        if !members.contains(&pivot) {
            return Err(SchemaError::new(format!(
                "pivot {pivot} is not a member of the language set"
            )));
        }
        Ok(Self { members, pivot })
    }

    /// Degenerate single-language set. Only valid as a no-op mixing pool, so it
    /// is built separately from [`LanguageSet::new`], which needs two members.
    pub fn singleton(pivot: LanguageTag) -> Self {
        Self {
            members: vec![pivot.clone()],
            pivot,
        }
    }

    /// Parses a comma separated list; the pivot defaults to `en`, or the first
    /// member when `en` is absent.
    pub fn parse_list(list: &str) -> Result<Self, SchemaError> {
        let members = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(LanguageTag::parse)
            .collect::<Result<Vec<_>, _>>()?;
        if members.is_empty() {
            return Err(SchemaError::new("empty language list"));
        }
        let en = LanguageTag::english();
        let pivot = if members.contains(&en) {
            en
        } else {
            members[0].clone()
        };
        if members.len() == 1 {
            return Ok(Self::singleton(pivot));
        }
        Self::new(members, pivot)
    }

    /// `{en, fr, de, es, it}` with pivot `en`.
    pub fn default_pool() -> Self {
        let members = DEFAULT_POOL
            .iter()
            .map(|c| LanguageTag(c.to_string()))
            .collect();
        Self {
            members,
            pivot: LanguageTag::english(),
        }
    }

    pub fn members(&self) -> &[LanguageTag] {
        &self.members
    }

    pub fn pivot(&self) -> &LanguageTag {
        &self.pivot
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn non_pivot(&self) -> Vec<LanguageTag> {
        self.members
            .iter()
            .filter(|l| **l != self.pivot)
            .cloned()
            .collect()
    }

    pub fn to_list_string(&self) -> String {
        self.members
            .iter()
            .map(LanguageTag::as_str)
            .collect::<Vec<_>>()
            .join(",")
    }
}
