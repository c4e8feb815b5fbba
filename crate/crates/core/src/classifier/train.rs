use serde::{Deserialize, Serialize};

use super::model::Classifier;
use super::schedule::{PlateauSchedule, ScheduleAction};
use crate::coremath::{AdamState, Rng, Tensor};
use crate::corpus::{ConfusionMatrix, Emotion};
use crate::error::{Error, Result};

/// One labelled spectrogram.
pub type Example<'a> = (&'a Tensor, usize);

/// One line of the training history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_uar: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
    /// Parameter digest at the end of the epoch, before any reversion.
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayEvent {
    pub epoch: usize,
    pub new_lr: f64,
    /// Epoch whose snapshot was restored.
    pub restored_epoch: usize,
    pub restored_digest: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    LrFloor,
    MaxEpochs,
}

pub struct TrainOutcome {
    /// The best-validation snapshot.
    pub model: Classifier,
    pub history: Vec<EpochRecord>,
    pub decays: Vec<DecayEvent>,
    pub best_epoch: usize,
    pub best_val_uar: f64,
    pub stop: StopReason,
}

fn check_training_set(train: &[Example]) -> Result<()> {
    let Some(&(_, first)) = train.first() else {
        return Err(Error::Empty("training split".into()));
    };
    if let Some(&(_, bad)) = train.iter().find(|(_, l)| *l >= Emotion::COUNT) {
        return Err(Error::LabelOutOfRange {
            label: bad,
            classes: Emotion::COUNT,
        });
    }
    if train.iter().all(|&(_, l)| l == first) {
        return Err(Error::Degenerate(format!(
            "all {} training examples are labelled {}",
            train.len(),
            Emotion::ALL[first]
        )));
    }
    Ok(())
}

pub fn predict_label(model: &Classifier, mel: &Tensor) -> Result<(usize, Vec<f64>)> {
    let logits = model.forward(mel)?;
    Ok((argmax(&logits), logits))
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn confusion(model: &Classifier, data: &[Example]) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::four_class();
    for &(mel, label) in data {
        let (pred, _) = predict_label(model, mel)?;
        cm.add(label, pred)?;
    }
    Ok(cm)
}

/// UAR over the classes that occur in `data`; a validation speaker rarely
/// covers all four.
pub fn validation_uar(model: &Classifier, data: &[Example]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("validation split".into()));
    }
    confusion(model, data)?.uar_present()
}

/// Mean loss of one pass over `train` in shuffled mini-batches.
fn run_epoch(model: &mut Classifier, train: &[Example], adam: &mut AdamState, rng: &mut Rng) -> Result<f64> {
    let mut order: Vec<usize> = (0..train.len()).collect();
    rng.shuffle(&mut order);
    let mut total = 0.0;
    for chunk in order.chunks(model.config.batch_size) {
        let batch: Vec<Example> = chunk.iter().map(|&i| train[i]).collect();
        model.zero_grad();
        total += model.backward(&batch)? * batch.len() as f64;
        adam.step(&mut model.params_mut())?;
    }
    Ok(total / train.len() as f64)
}

/// Trains with validation UAR on `val` driving the schedule.
pub fn train_classifier(
    model: Classifier,
    train: &[Example],
    val: &[Example],
    rng: &mut Rng,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    if val.is_empty() {
        return Err(Error::Empty("validation split".into()));
    }
    train_classifier_with(model, train, |m| validation_uar(m, val), rng, on_epoch)
}

/// As [`train_classifier`], with the validation score supplied by `score`.
pub fn train_classifier_with(
    mut model: Classifier,
    train: &[Example],
    mut score: impl FnMut(&Classifier) -> Result<f64>,
    rng: &mut Rng,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    check_training_set(train)?;
    let cfg = model.config.clone();
    let mut sched = PlateauSchedule::new(cfg.lr_init, cfg.lr_decay, cfg.lr_floor, cfg.plateau_patience);
    let mut adam = AdamState::new(sched.lr);
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut decays = Vec::new();
    let mut stop = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        let lr = sched.lr;
        adam.learning_rate = lr;
        let train_loss = run_epoch(&mut model, train, &mut adam, rng)?;
        let val_uar = score(&model)?;
        if !val_uar.is_finite() {
            return Err(Error::NonFinite(format!("validation score at epoch {epoch}")));
        }
        let rec = EpochRecord {
            epoch,
            train_loss,
            val_uar,
            lr,
            digest: model.digest(),
        };
        on_epoch(&rec);
        history.push(rec);
        match sched.observe(val_uar) {
            ScheduleAction::Improved { global: true } => {
                best = model.clone();
                best_epoch = epoch;
            }
            ScheduleAction::Improved { global: false } | ScheduleAction::Continue => {}
            action @ (ScheduleAction::Decay { lr } | ScheduleAction::Stop { lr }) => {
                model.load_params_from(&best);
                adam = AdamState::new(lr);
                decays.push(DecayEvent {
                    epoch,
                    new_lr: lr,
                    restored_epoch: best_epoch,
                    restored_digest: model.digest(),
                });
                if matches!(action, ScheduleAction::Stop { .. }) {
                    stop = StopReason::LrFloor;
                    break;
                }
            }
        }
    }
    best.zero_grad();
    Ok(TrainOutcome {
        model: best,
        history,
        decays,
        best_epoch,
        best_val_uar: sched.best_val_uar,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ClassifierConfig;

    fn tiny() -> ClassifierConfig {
        ClassifierConfig {
            input_hw: (16, 16),
            conv1_filters: 2,
            conv2_filters: 2,
            blstm_units: 3,
            dense_units: 4,
            batch_size: 4,
            max_epochs: 60,
            ..ClassifierConfig::desk()
        }
    }

    #[test]
    fn one_class_training_set_is_degenerate() {
        let m = Classifier::new(tiny(), &mut Rng::new(0)).unwrap();
        let x = Tensor::zeros(&[16, 16]);
        let data = vec![(&x, 1); 4];
        let r = train_classifier(m, &data, &data, &mut Rng::new(0), |_| {});
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn empty_split_is_rejected() {
        let m = Classifier::new(tiny(), &mut Rng::new(0)).unwrap();
        let x = Tensor::zeros(&[16, 16]);
        let r = train_classifier(m, &[], &[(&x, 0)], &mut Rng::new(0), |_| {});
        assert!(matches!(r, Err(Error::Empty(_))));
    }

    #[test]
    fn flat_trace_decays_four_times_then_stops() {
        let m = Classifier::new(tiny(), &mut Rng::new(1)).unwrap();
        let mut rng = Rng::new(2);
        let xs: Vec<Tensor> = (0..4).map(|_| Tensor::from_fn(&[16, 16], |_| rng.uniform(-1.0, 1.0))).collect();
        let data: Vec<Example> = xs.iter().zip(0..4).collect();
        let out = train_classifier_with(m, &data, |_| Ok(0.5), &mut Rng::new(3), |_| {}).unwrap();
        let epochs: Vec<usize> = out.decays.iter().map(|d| d.epoch).collect();
        assert_eq!(epochs, vec![6, 12, 18, 24]);
        assert_eq!(out.stop, StopReason::LrFloor);
        assert_eq!(out.history.len(), 24);
        assert_eq!(out.best_epoch, 1);
        for d in &out.decays {
            assert_eq!(d.restored_digest, out.history[0].digest);
        }
    }
}
