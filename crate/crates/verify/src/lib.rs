//! Holds only the `acceptance` test target; see `tests/acceptance.rs`.
