//! Linear analysis and the look-ahead tracking controller.

pub mod design;
pub mod dob;
pub mod linear;
pub mod loopsim;
pub mod tf;

pub use design::{build_controller, feedback_gains, nominal_loop, GainDesign, SweepRow};
pub use dob::{c1_tf, dob_build, nominal_sensitivity, q_filter, ControllerConfig, DobController, Sensitivity, PLANT_DELAY};
pub use linear::{discretize, linear_model, state_space_tf, steering_path_tf, LinearLateralModel};
pub use loopsim::{LinearLoop, LoopSample};
pub use tf::{eigenvalues, log_grid, nyquist, DiscreteTf, IirFilter, Poly};
