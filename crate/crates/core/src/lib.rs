pub mod assembly;
pub mod eval;
pub mod harvest;
pub mod http;
pub mod intel;
pub mod latex;
pub mod llm;
pub mod prompts;
pub mod workspace;
