//! Conducted EMI simulation toolkit for switched-mode power supply appliances.
//!
//! The crate is organised bottom-up:
//!
//! * [`netlist`] circuit model, text format and appliance templates
//! * [`engine`] fixed-step transient simulation of piecewise-linear circuits
//! * [`spectral`] calibrated spectra, peak finding and harmonic labelling
//! * [`fitting`] recovery of appliance parameters from a measured spectrum
//! * [`scenarios`] end-to-end line-impedance and coupling experiments
//! * [`hfedio`] measured trace files and the appliance catalog
//! * [`plot`] dependency-free SVG spectrum plots

// Validation is written as `!(x > y)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod fitting;
pub mod hfedio;
pub mod netlist;
pub mod plot;
pub mod scenarios;
pub mod spectral;
