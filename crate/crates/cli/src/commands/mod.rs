//! One module per CLI verb.

pub mod analyze;
pub mod gen_prior;
pub mod hm_run;
pub mod make_dataset;
pub mod sim_batch;
pub mod train;
pub mod truth_case;

pub use analyze::cmd_analyze;
pub use gen_prior::cmd_gen_prior;
pub use hm_run::cmd_hm_run;
pub use make_dataset::cmd_make_dataset;
pub use sim_batch::cmd_sim_batch;
pub use train::{cmd_eval_surrogate, cmd_train, SurrogateErrors, TrainTarget};
pub use truth_case::cmd_truth_case;
