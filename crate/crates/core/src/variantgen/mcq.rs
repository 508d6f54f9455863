use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::VariantError;
use crate::datamodel::{LanguageSet, LanguageTag, McqField, McqItem};
use crate::rng::RngSpec;
use crate::translate::Translator;

/// Target language of a single-language variant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Target {
    Lang(LanguageTag),
    /// Drawn per item, uniformly over the non-pivot languages.
    Random,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Lang(l) => write!(f, "{l}"),
            Target::Random => f.write_str("random"),
        }
    }
}

impl FromStr for Target {
    type Err = VariantError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "random" {
            Ok(Target::Random)
        } else {
            LanguageTag::parse(s)
                .map(Target::Lang)
                .map_err(|e| VariantError::InvalidKind(e.to_string()))
        }
    }
}

/// The crosslingual MCQ settings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VariantKind {
    /// Question and every option translated to one language.
    Full(Target),
    /// Question and options each in a different language.
    Mixup,
    QuestionOnly(Target),
    OptionsOnly(Target),
    /// Question and ground-truth option share one language.
    QuestionPlusGt(Target),
    GtOption(Target),
    /// One randomly chosen incorrect option.
    OneWrongOption(Target),
}

impl VariantKind {
    /// Command-line name without the target.
    pub fn name(&self) -> &'static str {
        match self {
            VariantKind::Full(_) => "full",
            VariantKind::Mixup => "mixup",
            VariantKind::QuestionOnly(_) => "question",
            VariantKind::OptionsOnly(_) => "options",
            VariantKind::QuestionPlusGt(_) => "question-gt",
            VariantKind::GtOption(_) => "gt",
            VariantKind::OneWrongOption(_) => "one-wrong",
        }
    }

    pub fn target(&self) -> Option<&Target> {
        match self {
            VariantKind::Mixup => None,
            VariantKind::Full(t)
            | VariantKind::QuestionOnly(t)
            | VariantKind::OptionsOnly(t)
            | VariantKind::QuestionPlusGt(t)
            | VariantKind::GtOption(t)
            | VariantKind::OneWrongOption(t) => Some(t),
        }
    }

    /// Builds a kind from its name and (ignored for mixup) target.
    pub fn from_parts(name: &str, target: Target) -> Result<Self, VariantError> {
        Ok(match name {
            "mixup" => VariantKind::Mixup,
            "full" => VariantKind::Full(target),
            "question" => VariantKind::QuestionOnly(target),
            "options" => VariantKind::OptionsOnly(target),
            "question-gt" => VariantKind::QuestionPlusGt(target),
            "gt" => VariantKind::GtOption(target),
            "one-wrong" => VariantKind::OneWrongOption(target),
            other => return Err(VariantError::InvalidKind(format!("unknown variant {other:?}"))),
        })
    }

    /// All seven kinds with the given target.
    pub fn all(target: Target) -> Vec<VariantKind> {
        vec![
            VariantKind::Mixup,
            VariantKind::Full(target.clone()),
            VariantKind::QuestionOnly(target.clone()),
            VariantKind::OptionsOnly(target.clone()),
            VariantKind::QuestionPlusGt(target.clone()),
            VariantKind::GtOption(target.clone()),
            VariantKind::OneWrongOption(target),
        ]
    }
}

/// `name` or `name:target`.
impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.target() {
            Some(t) => write!(f, "{}:{t}", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for VariantKind {
    type Err = VariantError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, target) = match s.split_once(':') {
            Some((n, t)) => (n, t.parse()?),
            None => (s, Target::Random),
        };
        VariantKind::from_parts(name, target)
    }
}

/// How mixup languages were assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixupMode {
    /// Five distinct languages, sampled without replacement.
    Permutation,
    /// Independent uniform draws (pools smaller than five).
    Independent,
}

impl MixupMode {
    pub fn for_pool(langs: &LanguageSet) -> Self {
        if langs.len() >= McqField::ALL.len() {
            MixupMode::Permutation
        } else {
            MixupMode::Independent
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MixupMode::Permutation => "permutation",
            MixupMode::Independent => "independent",
        }
    }
}

pub(crate) fn item_stream(rng: &RngSpec, kind: &VariantKind, item_id: &str) -> ChaCha8Rng {
    rng.stream(&["mcq-variant", kind.name(), item_id])
}

fn resolve_target(
    target: &Target,
    langs: &LanguageSet,
    stream: &mut ChaCha8Rng,
) -> Result<LanguageTag, VariantError> {
    match target {
        Target::Lang(l) => Ok(l.clone()),
        Target::Random => {
            let pool = langs.non_pivot();
            if pool.is_empty() {
                return Err(VariantError::InvalidKind(
                    "random target needs at least one non-pivot language".into(),
                ));
            }
            Ok(pool[stream.random_range(0..pool.len())].clone())
        }
    }
}

/// Decides the target language of each field to rewrite.
pub fn plan_assignment(
    item: &McqItem,
    kind: &VariantKind,
    langs: &LanguageSet,
    rng: &RngSpec,
) -> Result<Vec<(McqField, LanguageTag)>, VariantError> {
    let mut stream = item_stream(rng, kind, &item.id);
    let gt = McqField::Option(item.answer);
    let plan = match kind {
        VariantKind::Mixup => match MixupMode::for_pool(langs) {
            MixupMode::Permutation => {
                let mut pool = langs.members().to_vec();
                let (chosen, _) = pool.partial_shuffle(&mut stream, McqField::ALL.len());
                McqField::ALL.iter().copied().zip(chosen.iter().cloned()).collect()
            }
            MixupMode::Independent => McqField::ALL
                .iter()
                .map(|f| {
                    let l = langs.members()[stream.random_range(0..langs.len())].clone();
                    (*f, l)
                })
                .collect(),
        },
        VariantKind::Full(t) => {
            let l = resolve_target(t, langs, &mut stream)?;
            McqField::ALL.iter().map(|f| (*f, l.clone())).collect()
        }
        VariantKind::QuestionOnly(t) => {
            vec![(McqField::Question, resolve_target(t, langs, &mut stream)?)]
        }
        VariantKind::OptionsOnly(t) => {
            let l = resolve_target(t, langs, &mut stream)?;
            (0..4).map(|i| (McqField::Option(i), l.clone())).collect()
        }
        VariantKind::QuestionPlusGt(t) => {
            let l = resolve_target(t, langs, &mut stream)?;
            vec![(McqField::Question, l.clone()), (gt, l)]
        }
        VariantKind::GtOption(t) => vec![(gt, resolve_target(t, langs, &mut stream)?)],
        VariantKind::OneWrongOption(t) => {
            let l = resolve_target(t, langs, &mut stream)?;
            let wrong: Vec<usize> = (0..4).filter(|i| *i != item.answer).collect();
            let pick = wrong[stream.random_range(0..wrong.len())];
            vec![(McqField::Option(pick), l)]
        }
    };
    Ok(plan)
}

/// Produces one variant item. Id, subject, option order and answer index are
/// preserved; only field text and language tags change.
pub fn gen_mcq_variant(
    item: &McqItem,
    kind: &VariantKind,
    langs: &LanguageSet,
    rng: &RngSpec,
    translator: &Translator,
) -> Result<McqItem, VariantError> {
    let plan = plan_assignment(item, kind, langs, rng)?;
    let mut out = item.clone();
    for (field, target) in plan {
        let source = item.field_lang(field);
        let text = translator
            .translate_text(item.field(field), source, &target)
            .map_err(|e| VariantError::Translation {
                item_id: item.id.clone(),
                field: field.to_string(),
                source: e,
            })?;
        out.set_field(field, text, target);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{DomainCategory, McqLang};
    use std::collections::BTreeSet;

    fn lang(s: &str) -> LanguageTag {
        LanguageTag::parse(s).unwrap()
    }

    fn item(id: &str, answer: usize) -> McqItem {
        McqItem {
            id: id.to_string(),
            subject: "anatomy".into(),
            domain_category: DomainCategory::Others,
            question: "Which bone is longest?".into(),
            options: ["Femur".into(), "Ulna".into(), "Tibia".into(), "Skull".into()],
            answer,
            lang: McqLang::uniform(lang("en")),
        }
    }

    fn changed_fields(a: &McqItem, b: &McqItem) -> Vec<McqField> {
        McqField::ALL
            .iter()
            .copied()
            .filter(|f| a.field(*f) != b.field(*f) || a.field_lang(*f) != b.field_lang(*f))
            .collect()
    }

    #[test]
    fn gt_option_fixed_target() {
        let src = item("q1", 2);
        let tr = Translator::mock();
        let out = gen_mcq_variant(
            &src,
            &VariantKind::GtOption(Target::Lang(lang("fr"))),
            &LanguageSet::default_pool(),
            &RngSpec::new(1),
            &tr,
        )
        .unwrap();
        let mut expected = src.clone();
        expected.options[2] = "⟦fr⟧Tibia".into();
        expected.lang.options[2] = lang("fr");
        assert_eq!(out, expected);
    }

    #[test]
    fn full_english_is_identity() {
        let src = item("q1", 0);
        let out = gen_mcq_variant(
            &src,
            &VariantKind::Full(Target::Lang(lang("en"))),
            &LanguageSet::default_pool(),
            &RngSpec::new(3),
            &Translator::mock(),
        )
        .unwrap();
        assert_eq!(out, src);
    }

    #[test]
    fn mixup_uses_five_distinct_languages() {
        let tr = Translator::mock();
        let pool = LanguageSet::default_pool();
        for i in 0..50 {
            let out = gen_mcq_variant(&item(&format!("q{i}"), i % 4), &VariantKind::Mixup, &pool, &RngSpec::new(9), &tr)
                .unwrap();
            let tags: BTreeSet<_> = McqField::ALL.iter().map(|f| out.field_lang(*f).as_str()).collect();
            assert_eq!(tags, BTreeSet::from(["en", "fr", "de", "es", "it"]));
        }
    }

    #[test]
    fn mixup_small_pool_falls_back_to_independent_draws() {
        let pool = LanguageSet::parse_list("en,fr").unwrap();
        assert_eq!(MixupMode::for_pool(&pool), MixupMode::Independent);
        let out = gen_mcq_variant(&item("q", 1), &VariantKind::Mixup, &pool, &RngSpec::new(2), &Translator::mock())
            .unwrap();
        assert!(McqField::ALL.iter().all(|f| pool.members().contains(out.field_lang(*f))));
    }

    #[test]
    fn one_wrong_and_gt_touch_exactly_one_field() {
        let tr = Translator::mock();
        let pool = LanguageSet::default_pool();
        for i in 0..40 {
            let src = item(&format!("id{i}"), i % 4);
            let gt = gen_mcq_variant(&src, &VariantKind::GtOption(Target::Random), &pool, &RngSpec::new(5), &tr).unwrap();
            assert_eq!(changed_fields(&src, &gt), vec![McqField::Option(src.answer)]);
            let ow = gen_mcq_variant(&src, &VariantKind::OneWrongOption(Target::Random), &pool, &RngSpec::new(5), &tr)
                .unwrap();
            let changed = changed_fields(&src, &ow);
            assert_eq!(changed.len(), 1);
            assert_ne!(changed[0], McqField::Option(src.answer));
            assert_eq!(ow.answer, src.answer);
        }
    }

    #[test]
    fn question_plus_gt_shares_language() {
        let src = item("x", 3);
        let out = gen_mcq_variant(
            &src,
            &VariantKind::QuestionPlusGt(Target::Random),
            &LanguageSet::default_pool(),
            &RngSpec::new(11),
            &Translator::mock(),
        )
        .unwrap();
        assert_eq!(out.lang.question, out.lang.options[3]);
        assert_ne!(out.lang.question, lang("en"));
        assert_eq!(changed_fields(&src, &out), vec![McqField::Question, McqField::Option(3)]);
    }

    #[test]
    fn kind_labels_round_trip() {
        for k in VariantKind::all(Target::Lang(lang("de"))) {
            assert_eq!(k.to_string().parse::<VariantKind>().unwrap(), k);
        }
        assert_eq!("gt".parse::<VariantKind>().unwrap(), VariantKind::GtOption(Target::Random));
        assert!("bogus:fr".parse::<VariantKind>().is_err());
    }

    #[test]
    fn random_target_needs_non_pivot_language() {
        let pool = LanguageSet::parse_list("en").unwrap();
        let err = gen_mcq_variant(&item("q", 0), &VariantKind::GtOption(Target::Random), &pool, &RngSpec::new(1), &Translator::mock());
        assert!(err.is_err());
    }
}
