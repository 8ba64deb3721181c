//! Holds the end-to-end acceptance suite in `tests/acceptance.rs`. Run it with
//! `cargo test -p attitude-validation --test acceptance`.
