//! Every crosslingual variant of one multiple-choice item.

use xbarrier::datamodel::{DomainCategory, LanguageSet, LanguageTag, McqField, McqItem, McqLang};
use xbarrier::rng::RngSpec;
use xbarrier::translate::Translator;
use xbarrier::variantgen::{gen_mcq_variant, Target, VariantKind};

fn main() {
    let item = McqItem {
        id: "astro-1".into(),
        subject: "astronomy".into(),
        domain_category: DomainCategory::Stem,
        question: "Which planet is closest to the Sun?".into(),
        options: ["Venus", "Mercury", "Mars", "Earth"].map(String::from),
        answer: 1,
        lang: McqLang::uniform(LanguageTag::english()),
    };
    let pool = LanguageSet::default_pool();
    let tr = Translator::mock();
    for kind in VariantKind::all(Target::Random) {
        let v = gen_mcq_variant(&item, &kind, &pool, &RngSpec::new(42), &tr).unwrap();
        println!("{kind}");
        for f in McqField::ALL {
            println!("  {f:<10} {:<3} {}", v.field_lang(f).as_str(), v.field(f));
        }
    }
}
