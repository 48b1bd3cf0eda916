//! Full-batch gradient descent with spectral instrumentation, plus the
//! analyses run over its trajectories.

mod analysis;
mod io;
mod run;
mod schedule;

pub use analysis::{
    argmax_rows, breakaway_experiment, compare_trajectories, detect_instabilities, detect_spikes, par_map,
    perturbation_scale, perturbation_study, spearman, weight_distance, BreakawayRow, InstabilityEvent,
    PerturbationBand, Quadratic, TrajectoryComparison,
};
pub use io::{
    csv_with_schema, decode_checkpoint, encode_checkpoint, load_checkpoint, meta_path, metrics_csv, record_row,
    save_checkpoint, write_atomic, write_metrics, CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
    METRICS_COLUMNS, METRICS_SCHEMA,
};
pub use run::{train, EpochRecord, Reference, SpectrumRecord, TrainState, Trainer, TrajectoryLog};
pub use schedule::{eos_threshold, Schedule};
