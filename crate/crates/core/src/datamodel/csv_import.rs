//! Import helper for MMLU-style headerless CSV files
//! (`question,A,B,C,D,answer_letter`).

use std::path::Path;

use super::items::{DomainCategory, McqItem, McqLang};
use super::lang::LanguageTag;
use super::DataError;

/// Maps an MMLU subject name to its four-way domain category.
pub fn mmlu_domain(subject: &str) -> DomainCategory {
    use DomainCategory::*;
    match subject {
        "abstract_algebra" | "astronomy" | "college_biology" | "college_chemistry"
        | "college_computer_science" | "college_mathematics" | "college_physics"
        | "computer_security" | "conceptual_physics" | "electrical_engineering"
        | "elementary_mathematics" | "high_school_biology" | "high_school_chemistry"
        | "high_school_computer_science" | "high_school_mathematics"
        | "high_school_physics" | "high_school_statistics" | "machine_learning" => Stem,
        "formal_logic" | "high_school_european_history" | "high_school_us_history"
        | "high_school_world_history" | "international_law" | "jurisprudence"
        | "logical_fallacies" | "moral_disputes" | "moral_scenarios" | "philosophy"
        | "prehistory" | "professional_law" | "world_religions" => Humanities,
        "econometrics" | "high_school_geography" | "high_school_government_and_politics"
        | "high_school_macroeconomics" | "high_school_microeconomics"
        | "high_school_psychology" | "human_sexuality" | "professional_psychology"
        | "public_relations" | "security_studies" | "sociology" | "us_foreign_policy" => {
            SocialSciences
        }
        "anatomy" | "business_ethics" | "clinical_knowledge" | "college_medicine"
        | "global_facts" | "human_aging" | "management" | "marketing" | "medical_genetics"
        | "miscellaneous" | "nutrition" | "professional_accounting"
        | "professional_medicine" | "virology" => Others,
        _ => Unspecified,
    }
}

/// Reads an MMLU CSV. Ids are `{subject}/{row}`; every field is tagged `lang`.
pub fn import_mmlu_csv(
    path: &Path,
    subject: &str,
    lang: &LanguageTag,
) -> Result<Vec<McqItem>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| DataError::Csv {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    let domain = mmlu_domain(subject);
    let mut items = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let schema = |message: String| DataError::Schema {
            path: path.display().to_string(),
            line: row + 1,
            message,
        };
        let rec = rec.map_err(|e| schema(e.to_string()))?;
        if rec.len() != 6 {
            return Err(schema(format!("expected 6 columns, found {}", rec.len())));
        }
        let answer = match rec[5].trim() {
            "A" => 0,
            "B" => 1,
            "C" => 2,
            "D" => 3,
            other => return Err(schema(format!("answer letter {other:?} not in A-D"))),
        };
        let item = McqItem {
            id: format!("{subject}/{row}"),
            subject: subject.to_string(),
            domain_category: domain,
            question: rec[0].to_string(),
            options: [
                rec[1].to_string(),
                rec[2].to_string(),
                rec[3].to_string(),
                rec[4].to_string(),
            ],
            answer,
            lang: McqLang::uniform(lang.clone()),
        };
        item.validate().map_err(|e| schema(e.to_string()))?;
        items.push(item);
    }
    Ok(items)
}
