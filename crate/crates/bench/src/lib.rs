//! Benchmarks only; see benches/hotpaths.rs.
