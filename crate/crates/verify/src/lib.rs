//! Holds the workspace acceptance suite in `tests/acceptance.rs`. It runs
//! after every other test target, so a failing criterion never hides the
//! rest of `cargo test --workspace`.
