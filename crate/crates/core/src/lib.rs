//! Execution-grounded text-to-SQL toolkit.
//!
//! The pipeline pieces are:
//!
//! - [`schema`]: introspect SQLite files and render `CREATE TABLE` prompts.
//! - [`sql_analysis`]: parse queries, extract references, classify validity.
//! - [`executor`]: run queries read-only with a timeout and compare results.
//! - [`metrics`]: execution accuracy (EX) and test-suite accuracy (TS).
//! - [`augmentation`]: Cross-DB and Inner-DB training sample construction.
//! - [`model_client`]: chat-completion endpoint client and a scripted mock.
//! - [`preference`]: chosen/rejected pair mining by execution agreement.
//! - [`refine`]: generate, check, debug, repeat.

pub mod augmentation;
pub mod corpus;
pub mod executor;
pub mod fixtures;
pub mod metrics;
pub mod model_client;
pub mod preference;
pub mod refine;
pub mod schema;
pub mod sql_analysis;
pub mod value;

pub use corpus::Sample;
pub use executor::{execute, results_match, ExecutionOutcome};
pub use schema::{introspect_database, render_prompt, DatabaseSchema, TableSchema};
pub use sql_analysis::{extract_references, validate, ValidityReport, ValidityStatus};
pub use value::CellValue;
