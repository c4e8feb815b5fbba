//! CNN-BLSTM-attention emotion classifier and its plateau-driven trainer.

mod attention;
mod config;
mod model;
mod schedule;
mod train;

pub use attention::{attention_backward, attention_pool, attention_weights};
pub use config::ClassifierConfig;
pub use model::Classifier;
pub use schedule::{PlateauSchedule, ScheduleAction};
pub use train::{
    argmax, confusion, predict_label, train_classifier, train_classifier_with, validation_uar, DecayEvent,
    EpochRecord, Example, StopReason, TrainOutcome,
};
