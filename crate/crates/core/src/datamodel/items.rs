//! Dataset record types: multiple-choice items, open-ended QA items and corpus
//! documents.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::lang::LanguageTag;
use super::SchemaError;

/// Number of answer options every MCQ item carries.
pub const OPTION_COUNT: usize = 4;

/// MMLU's four-way subject grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum DomainCategory {
    #[serde(rename = "STEM")]
    Stem,
    SocialSciences,
    Humanities,
    Others,
    #[default]
    Unspecified,
}

impl fmt::Display for DomainCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainCategory::Stem => "STEM",
            DomainCategory::SocialSciences => "SocialSciences",
            DomainCategory::Humanities => "Humanities",
            DomainCategory::Others => "Others",
            DomainCategory::Unspecified => "Unspecified",
        };
        f.write_str(s)
    }
}

/// Identifies one text field of an MCQ item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum McqField {
    Question,
    Option(usize),
}

impl McqField {
    /// Question followed by the four options.
    pub const ALL: [McqField; 5] = [
        McqField::Question,
        McqField::Option(0),
        McqField::Option(1),
        McqField::Option(2),
        McqField::Option(3),
    ];
}

impl fmt::Display for McqField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            McqField::Question => f.write_str("question"),
            McqField::Option(i) => write!(f, "options[{i}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqLang {
    pub question: LanguageTag,
    pub options: [LanguageTag; OPTION_COUNT],
}

impl McqLang {
    pub fn uniform(lang: LanguageTag) -> Self {
        Self {
            question: lang.clone(),
            options: [lang.clone(), lang.clone(), lang.clone(), lang],
        }
    }
}

/// One four-option multiple-choice question with per-field language tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMcqItem")]
pub struct McqItem {
    pub id: String,
    pub subject: String,
    pub domain_category: DomainCategory,
    pub question: String,
    pub options: [String; OPTION_COUNT],
    pub answer: usize,
    pub lang: McqLang,
}

impl McqItem {
    pub fn field(&self, field: McqField) -> &str {
        match field {
            McqField::Question => &self.question,
            McqField::Option(i) => &self.options[i],
        }
    }

    pub fn field_lang(&self, field: McqField) -> &LanguageTag {
        match field {
            McqField::Question => &self.lang.question,
            McqField::Option(i) => &self.lang.options[i],
        }
    }

    pub fn set_field(&mut self, field: McqField, text: String, lang: LanguageTag) {
        match field {
            McqField::Question => {
                self.question = text;
                self.lang.question = lang;
            }
            McqField::Option(i) => {
                self.options[i] = text;
                self.lang.options[i] = lang;
            }
        }
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.id.is_empty() {
            return Err(SchemaError::new("empty id"));
        }
        if self.question.is_empty() {
            return Err(SchemaError::new("empty question"));
        }
        if self.answer >= OPTION_COUNT {
            return Err(SchemaError::new(format!(
                "answer index {} out of range 0-3",
                self.answer
            )));
        }
        if let Some(i) = self.options.iter().position(String::is_empty) {
            return Err(SchemaError::new(format!("option {i} is empty")));
        }
        Ok(())
    }
}

// Loose shape used to produce per-field schema messages.
#[derive(Deserialize)]
struct RawMcqItem {
    id: String,
    subject: String,
    #[serde(default)]
    domain_category: DomainCategory,
    question: String,
    options: Vec<String>,
    answer: i64,
    lang: RawMcqLang,
}

#[derive(Deserialize)]
struct RawMcqLang {
    question: LanguageTag,
    options: Vec<LanguageTag>,
}

impl TryFrom<RawMcqItem> for McqItem {
    type Error = SchemaError;

    fn try_from(raw: RawMcqItem) -> Result<Self, Self::Error> {
        let options: [String; OPTION_COUNT] = raw
            .options
            .try_into()
            .map_err(|_| SchemaError::new("expected 4 options"))?;
        let lang_options: [LanguageTag; OPTION_COUNT] = raw
            .lang
            .options
            .try_into()
            .map_err(|_| SchemaError::new("expected 4 option language tags"))?;
        if !(0..OPTION_COUNT as i64).contains(&raw.answer) {
            return Err(SchemaError::new(format!(
                "answer index {} out of range 0-3",
                raw.answer
            )));
        }
        let item = McqItem {
            id: raw.id,
            subject: raw.subject,
            domain_category: raw.domain_category,
            question: raw.question,
            options,
            answer: raw.answer as usize,
            lang: McqLang {
                question: raw.lang.question,
                options: lang_options,
            },
        };
        item.validate()?;
        Ok(item)
    }
}

/// Open-ended question with an English reference answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawQaItem")]
pub struct QaItem {
    pub id: String,
    pub question: String,
    pub reference_answer: String,
    pub lang: LanguageTag,
}

#[derive(Deserialize)]
struct RawQaItem {
    id: String,
    question: String,
    reference_answer: String,
    lang: LanguageTag,
}

impl TryFrom<RawQaItem> for QaItem {
    type Error = SchemaError;
    fn try_from(raw: RawQaItem) -> Result<Self, Self::Error> {
        if raw.question.is_empty() {
            return Err(SchemaError::new("empty question"));
        }
        if raw.reference_answer.is_empty() {
            return Err(SchemaError::new("empty reference_answer"));
        }
        Ok(QaItem {
            id: raw.id,
            question: raw.question,
            reference_answer: raw.reference_answer,
            lang: raw.lang,
        })
    }
}

/// A corpus document. Id uniqueness is a file-level property checked by the
/// corpus validator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCorpusDoc")]
pub struct CorpusDoc {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct RawCorpusDoc {
    id: String,
    text: String,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

impl TryFrom<RawCorpusDoc> for CorpusDoc {
    type Error = SchemaError;
    fn try_from(raw: RawCorpusDoc) -> Result<Self, Self::Error> {
        if raw.text.is_empty() {
            return Err(SchemaError::new("empty text"));
        }
        Ok(CorpusDoc {
            id: raw.id,
            text: raw.text,
            meta: raw.meta,
        })
    }
}

impl CorpusDoc {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            meta: BTreeMap::new(),
        }
    }
}
