//! ERLE, STOI, real-time factor and FLOP accounting.

pub mod erle;
pub mod flops;
pub mod report;
pub mod rt;
pub mod stoi;

pub use erle::{erle, erle_full, erle_selected, erle_tail, ERLE_CAP_DB};
pub use flops::{count_flops, FlopReport};
pub use report::{evaluate, processed_path, render_table, EvalReport, SER_BUCKETS};
pub use rt::rt_factor;
pub use stoi::{stoi, stoi_double_talk};
