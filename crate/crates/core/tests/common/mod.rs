pub mod alloc_oracle;
pub mod nodal;
