pub mod augment_checks;
pub mod cart_oracle;
