//! Training loops for the jigsaw pretext task, the geometric baseline and
//! the frozen-encoder downstream head.

mod config;
mod downstream;
mod trainlog;
mod loss;
mod pretext;

pub use config::{lr_at, DownstreamTrainConfig, PretextTrainConfig};
pub use downstream::{draw_train_frames, encode_clips, predict_cached, train_downstream};
pub use trainlog::{EpochRecord, TrainLog};
pub use loss::{default_pos_weights, weighted_bce, BCE_EPS};
pub use pretext::{train_classifier, train_geo_baseline, train_pretext, GeoSource, SampleSource};
