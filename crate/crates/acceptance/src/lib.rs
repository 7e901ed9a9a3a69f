//! Acceptance criteria for `trigopt`, run as the `acceptance` test target.
//!
//! Kept in its own package so that its failures do not stop the rest of
//! the workspace's tests from running.
