//! Input-driven reservoirs, readout training and benchmark tasks.

mod esn;
mod esp;
mod qnr;
mod readout;
mod states;
mod tasks;

pub use esn::{esn_weights, run_esn, spectral_radius, EsnConfig};
pub use esp::{esp_probe, esp_probe_with, log_slope, random_product_states, EspResult, ESP_FLOOR};
pub use qnr::{
    build_input_unitary, default_masks, instance_config, run_compiled, run_dense, run_qnr,
    run_qnr_from, InitialState, QnrConfig,
};
pub use readout::{fit_readout, min_norm_lstsq, nrmse, FitDiagnostics, Readout, PINV_CUTOFF};
pub use states::{spatial_multiplex, Provenance, StateMatrix};
pub use tasks::{narma2, uniform_inputs, Split};
