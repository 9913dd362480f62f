//! Optimal investment and consumption with logarithmic utility on a market of
//! mean-reverting spreads.
//!
//! The spreads follow the Ornstein-Uhlenbeck dynamics `dS = A S dt + sigma dW`
//! and the investor maximizes `E[int_0^T ln c dt + varpi ln X_T]`. The value
//! function and the optimal rule are available in closed form up to a linear
//! matrix ODE, which [`hjb`] solves two ways. [`sim`] checks the result by
//! Monte Carlo.
//!
//! ```
//! use spreadopt::{hjb, model::Market, presets, strategy};
//! use nalgebra::DVector;
//!
//! let market = Market::new(presets::reference_scalar(5.0)).unwrap();
//! let sol = hjb::solve(&market, 500).unwrap();
//! let z = sol.value(100.0, &DVector::from_element(1, 5.0), 0.0).unwrap();
//! assert!(z.is_finite());
//! let rule = strategy::optimal_strategy(&market, &sol);
//! # let _ = rule;
//! ```

pub mod error;
pub mod hjb;
pub mod linalg;
pub mod model;
pub mod presets;
pub mod sim;
pub mod strategy;

pub use error::{Error, Result};
pub use model::{Market, ModelParams};
