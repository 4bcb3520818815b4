//! Acceptance checks for the workspace live in `tests/acceptance.rs`. Run
//! them alone with `cargo test -p fredn-validation`.
