//! Renders one item under each demonstration strategy and option-id style.

use xbarrier::datamodel::{DomainCategory, LanguageSet, LanguageTag, McqItem, McqLang};
use xbarrier::evalharness::{render_prompt, DemoPool, DemoStrategy, DemoTransform, Instruction, OptionIds, PromptTemplate};
use xbarrier::rng::RngSpec;
use xbarrier::translate::Translator;
use xbarrier::variantgen::{gen_mcq_variant, VariantKind};

fn item(id: &str, q: &str, opts: [&str; 4], answer: usize) -> McqItem {
    McqItem {
        id: id.into(),
        subject: "high_school_physics".into(),
        domain_category: DomainCategory::Stem,
        question: q.into(),
        options: opts.map(String::from),
        answer,
        lang: McqLang::uniform(LanguageTag::english()),
    }
}

fn main() {
    let dev = [item("d1", "What is the SI unit of mass?", ["Gram", "Kilogram", "Pound", "Ounce"], 1)];
    let tr = Translator::mock();
    let transform = DemoTransform {
        kind: VariantKind::Mixup,
        langs: LanguageSet::default_pool(),
        rng: RngSpec::new(3),
        translator: &tr,
    };
    let test = gen_mcq_variant(
        &item("t", "Which quantity is measured in newtons?", ["Energy", "Force", "Power", "Pressure"], 1),
        &VariantKind::Mixup,
        &transform.langs,
        &transform.rng,
        &tr,
    )
    .unwrap();

    for (strategy, ids) in [
        (DemoStrategy::None, OptionIds::Upper),
        (DemoStrategy::English, OptionIds::Lower),
        (DemoStrategy::SameBias, OptionIds::Numeric),
        (DemoStrategy::TranslateThenAnswer, OptionIds::Upper),
    ] {
        let shots = usize::from(strategy != DemoStrategy::None);
        let tpl = PromptTemplate::new(Instruction::Aware1, ids, shots, strategy).unwrap();
        let pool = DemoPool::build(&dev, &tpl, Some(&transform)).unwrap();
        let prompt = render_prompt(&test, &tpl, pool.for_subject(&test.subject).unwrap()).unwrap();
        println!("===== {strategy} / {ids}\n{prompt}\n");
    }
}
