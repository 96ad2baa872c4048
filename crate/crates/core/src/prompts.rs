//! Versioned prompt assets shipped with the crate.

pub const EXTRACTION: &str = include_str!("../prompts/extraction.txt");
pub const EXTRACTION_SCHEMA: &str = include_str!("../prompts/extraction_schema.json");
pub const EXTRACTION_EXAMPLE_ARTICLE: &str = include_str!("../prompts/extraction_example_article.tex");
pub const EXTRACTION_EXAMPLE_RESPONSE: &str = include_str!("../prompts/extraction_example_response.json");
pub const EXTRACTION_EXAMPLE_DATASET: &str = "KonIQ-10K";
pub const CLASSIFY: &str = include_str!("../prompts/classify.txt");
pub const CLASSIFY_EXAMPLES: &str = include_str!("../prompts/classify_examples.txt");
pub const ENTITIES: &str = include_str!("../prompts/entities.txt");
pub const ENTITIES_EXAMPLE: &str = include_str!("../prompts/entities_example.txt");
pub const DATASETS: &str = include_str!("../prompts/datasets.txt");
pub const STRUCTURE_JUDGE: &str = include_str!("../prompts/structure_judge.txt");
pub const REFINE: &str = include_str!("../prompts/refine.txt");

pub const DATASET_PLACEHOLDER: &str = "[SPECIFIED DATASET]";

/// The extraction system prompt with `dataset` slotted into the schema.
pub fn extraction_system(dataset: &str) -> String {
    let schema = EXTRACTION_SCHEMA.trim_end().replace(DATASET_PLACEHOLDER, dataset);
    EXTRACTION
        .replace("[EXAMPLE JSON]", &schema)
        .replace("[EXAMPLE ARTICLE]", EXTRACTION_EXAMPLE_ARTICLE.trim_end())
        .replace("[EXAMPLE DATASET]", EXTRACTION_EXAMPLE_DATASET)
        .replace("[EXAMPLE RESPONSE]", EXTRACTION_EXAMPLE_RESPONSE.trim_end())
}
