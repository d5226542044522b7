//! CSV tables, the model file format and TOML configuration.

mod config;
mod models;
mod tables;

pub use config::{Config, CONFIG_ENV};
pub use models::{decode_models, encode_models, load_models, save_models, MODEL_FORMAT, MODEL_VERSION};
pub use tables::{
    load_curve_table, load_features_table, load_rd_table, load_time_table, write_curve_table, write_features_table,
    write_rd_table, write_time_table,
};
