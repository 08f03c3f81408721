pub mod eval;
pub mod prep;
pub mod retrain;
pub mod score;
pub mod stats;
pub mod synth;
pub mod train;
