use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::datamodel::{LanguageSet, McqItem};
use crate::rng::RngSpec;
use crate::translate::Translator;
use crate::variantgen::{gen_mcq_variant, VariantKind};

pub const HEADER: &str = "The following are multiple choice questions (with answers) about";
pub const AWARE0_SUFFIX: &str = " Keep in mind that the question and options may be presented in various languages.";
pub const AWARE1_SUFFIX: &str = " Remember that the question and options can be in different languages.";
pub const TTA_SUFFIX: &str = " Remember that the question and options can be in different languages. First translate them all to English. Then output the answer.";
pub const TTA_INSTRUCTION: &str = "Translate the question and options into English, and then answer.";

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub fn as_str(&self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = EvalError;
            fn from_str(s: &str) -> Result<Self, EvalError> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(EvalError::Config(format!(
                        concat!("unknown ", stringify!($name), " {:?}; expected one of: {}"),
                        other,
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

/// Sentence appended to the header line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Instruction {
    #[default]
    Default,
    Aware0,
    Aware1,
}

keyword_enum!(Instruction { Default => "default", Aware0 => "aware0", Aware1 => "aware1" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OptionIds {
    #[default]
    Upper,
    Lower,
    Numeric,
}

keyword_enum!(OptionIds { Upper => "ABCD", Lower => "abcd", Numeric => "1234" });

impl OptionIds {
    pub const ALL: [OptionIds; 3] = [OptionIds::Upper, OptionIds::Lower, OptionIds::Numeric];

    pub fn ids(&self) -> [&'static str; 4] {
        match self {
            OptionIds::Upper => ["A", "B", "C", "D"],
            OptionIds::Lower => ["a", "b", "c", "d"],
            OptionIds::Numeric => ["1", "2", "3", "4"],
        }
    }

    pub fn targets(&self) -> Vec<String> {
        self.ids().iter().map(|s| s.to_string()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DemoStrategy {
    #[default]
    None,
    English,
    SameBias,
    TranslateThenAnswer,
}

keyword_enum!(DemoStrategy {
    None => "none",
    English => "english",
    SameBias => "samebias",
    TranslateThenAnswer => "translate-then-answer",
});

impl DemoStrategy {
    pub const ALL: [DemoStrategy; 4] = [
        DemoStrategy::None,
        DemoStrategy::English,
        DemoStrategy::SameBias,
        DemoStrategy::TranslateThenAnswer,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub instruction: Instruction,
    pub option_ids: OptionIds,
    pub shots: usize,
    pub demo_strategy: DemoStrategy,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            instruction: Instruction::Default,
            option_ids: OptionIds::Upper,
            shots: 0,
            demo_strategy: DemoStrategy::None,
        }
    }
}

impl PromptTemplate {
    pub fn new(
        instruction: Instruction,
        option_ids: OptionIds,
        shots: usize,
        demo_strategy: DemoStrategy,
    ) -> Result<Self, EvalError> {
        let t = Self {
            instruction,
            option_ids,
            shots,
            demo_strategy,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if (self.demo_strategy == DemoStrategy::None) != (self.shots == 0) {
            return Err(EvalError::Config(format!(
                "demo strategy {} is incompatible with {} shots",
                self.demo_strategy, self.shots
            )));
        }
        Ok(())
    }

    /// Header line. The translate-then-answer header carries its own
    /// instruction, so `instruction` does not apply to it.
    pub fn header(&self, subject: &str) -> String {
        let subject = subject.replace('_', " ");
        let suffix = match (self.demo_strategy, self.instruction) {
            (DemoStrategy::TranslateThenAnswer, _) => TTA_SUFFIX,
            (_, Instruction::Default) => "",
            (_, Instruction::Aware0) => AWARE0_SUFFIX,
            (_, Instruction::Aware1) => AWARE1_SUFFIX,
        };
        format!("{HEADER} {subject}.{suffix}")
    }
}

/// A few-shot demonstration. `english` is the untransformed original, used
/// by translate-then-answer demonstrations.
#[derive(Debug, Clone, PartialEq)]
pub struct Demo {
    pub shown: McqItem,
    pub english: Option<McqItem>,
}

/// Question plus option lines, without a trailing newline.
fn question_block(item: &McqItem, ids: &[&str; 4]) -> String {
    let mut s = item.question.clone();
    for (id, opt) in ids.iter().zip(&item.options) {
        s.push('\n');
        s.push_str(id);
        s.push('.');
        s.push_str(opt);
    }
    s
}

pub fn render_prompt(item: &McqItem, tpl: &PromptTemplate, demos: &[Demo]) -> Result<String, EvalError> {
    tpl.validate()?;
    if demos.len() != tpl.shots {
        return Err(EvalError::Config(format!(
            "template needs {} demonstrations, got {}",
            tpl.shots,
            demos.len()
        )));
    }
    let ids = tpl.option_ids.ids();
    let mut out = tpl.header(&item.subject);
    out.push_str("\n\n");
    match tpl.demo_strategy {
        DemoStrategy::TranslateThenAnswer => {
            for d in demos {
                let english = d.english.as_ref().ok_or_else(|| {
                    EvalError::Config(format!("demonstration {} lacks its English original", d.shown.id))
                })?;
                out.push_str("Question: ");
                out.push_str(&question_block(&d.shown, &ids));
                out.push_str("\nAnswer:\n");
                out.push_str(TTA_INSTRUCTION);
                out.push_str("\nQuestion: ");
                out.push_str(&question_block(english, &ids));
                out.push_str("\nAnswer: ");
                out.push_str(ids[english.answer]);
                out.push_str("\n\n");
            }
            out.push_str("Question: ");
            out.push_str(&question_block(item, &ids));
            out.push('\n');
            out.push_str(TTA_INSTRUCTION);
            out.push_str("\nQuestion:");
        }
        _ => {
            for d in demos {
                out.push_str(&question_block(&d.shown, &ids));
                out.push_str("\nAnswer: ");
                out.push_str(ids[d.shown.answer]);
                out.push_str("\n\n");
            }
            out.push_str(&question_block(item, &ids));
            out.push_str("\nAnswer:");
        }
    }
    Ok(out)
}

/// How same-bias demonstrations are derived from the English dev split.
#[derive(Debug, Clone)]
pub struct DemoTransform<'a> {
    pub kind: VariantKind,
    pub langs: LanguageSet,
    pub rng: RngSpec,
    pub translator: &'a Translator,
}

/// Per-subject demonstrations taken from the head of the dev split, in file
/// order; every test item of a subject shares the same list.
#[derive(Debug, Clone, Default)]
pub struct DemoPool {
    by_subject: BTreeMap<String, Vec<Demo>>,
    shots: usize,
}

impl DemoPool {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn build(
        dev: &[McqItem],
        tpl: &PromptTemplate,
        transform: Option<&DemoTransform<'_>>,
    ) -> Result<Self, EvalError> {
        tpl.validate()?;
        let mut by_subject: BTreeMap<String, Vec<Demo>> = BTreeMap::new();
        if tpl.shots == 0 {
            return Ok(Self { by_subject, shots: 0 });
        }
        for item in dev {
            let slot = by_subject.entry(item.subject.clone()).or_default();
            if slot.len() >= tpl.shots {
                continue;
            }
            let demo = match tpl.demo_strategy {
                DemoStrategy::None | DemoStrategy::English => Demo {
                    shown: item.clone(),
                    english: None,
                },
                DemoStrategy::SameBias | DemoStrategy::TranslateThenAnswer => {
                    let shown = match transform {
                        Some(t) => gen_mcq_variant(item, &t.kind, &t.langs, &t.rng, t.translator)
                            .map_err(|e| EvalError::Demos(e.to_string()))?,
                        None => item.clone(),
                    };
                    Demo {
                        shown,
                        english: Some(item.clone()),
                    }
                }
            };
            slot.push(demo);
        }
        Ok(Self {
            by_subject,
            shots: tpl.shots,
        })
    }

    pub fn for_subject(&self, subject: &str) -> Result<&[Demo], EvalError> {
        if self.shots == 0 {
            return Ok(&[]);
        }
        match self.by_subject.get(subject) {
            Some(d) if d.len() == self.shots => Ok(d),
            Some(d) => Err(EvalError::Demos(format!(
                "subject {subject:?} has {} dev items, {} shots requested",
                d.len(),
                self.shots
            ))),
            None => Err(EvalError::Demos(format!("no dev items for subject {subject:?}"))),
        }
    }
}

/// Last four consecutive option lines of a rendered prompt, with the id set
/// they use.
pub fn parse_option_lines(prompt: &str) -> Option<(OptionIds, [String; 4])> {
    let lines: Vec<&str> = prompt.lines().collect();
    let mut best: Option<(usize, OptionIds)> = None;
    for ids in OptionIds::ALL {
        let prefixes = ids.ids().map(|i| format!("{i}."));
        let found = (0..lines.len().saturating_sub(3)).rev().find(|&s| {
            (0..4).all(|j| lines[s + j].starts_with(prefixes[j].as_str()))
        });
        if let Some(s) = found {
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, ids));
            }
        }
    }
    let (start, ids) = best?;
    let opts = std::array::from_fn(|j| lines[start + j][ids.ids()[j].len() + 1..].to_string());
    Some((ids, opts))
}
