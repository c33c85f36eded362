//! Desk-scale model zoos: a self-contained synthetic dataset, five
//! parameterized trigger families covering both mathematical forms of
//! backdoor injection, poisoning-based training, attack-success-rate
//! measurement, and an on-disk zoo layout.

pub mod dataset;
pub mod error;
pub mod recipe;
pub mod store;
pub mod train;

pub use dataset::Dataset;
pub use error::{Result, ZooError};
pub use recipe::{FamilyParams, InjectionRecipe, RecipeFamily};
pub use store::{load_zoo, persist_zoo, ZooEntry, ZooLabel};
pub use train::{asr, poison_and_train, train_clean_entry, StampSpec};
