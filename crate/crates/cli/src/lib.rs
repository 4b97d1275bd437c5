//! Front end of the `pohozaev-flow` binary: config parsing, mode dispatch,
//! output files and plot data.

pub mod config;
pub mod plot;
pub mod run;

pub use config::{parse_config, parse_config_str, ConfigError, Mode, RunConfig};
pub use plot::emit_plot_data;
pub use run::{run, RunError, Status};
