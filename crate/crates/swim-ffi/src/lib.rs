//! C ABI for the swim toolkit.
