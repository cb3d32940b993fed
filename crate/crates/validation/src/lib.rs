//! Acceptance checks live in `tests/acceptance.rs`; run them with
//! `cargo test -p occurlens-validation --test acceptance -- --nocapture`.
