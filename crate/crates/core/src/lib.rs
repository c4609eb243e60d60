//! Industry implied-volatility connectedness: option-implied volatility,
//! cap-weighted industry panels, time-varying Bayesian VARs, generalized
//! variance-decomposition networks, cycle-phase summaries and predictive
//! regressions.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cycles;
pub mod forecast;
pub mod industry_panel;
pub mod io;
pub mod linalg;
pub mod network;
pub mod options_iv;
pub mod sim;
pub mod tvp_var;
