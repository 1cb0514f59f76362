//! Holds the `acceptance` test target. Run it with
//! `cargo test -p spvkit-tests --test acceptance`.
