use serde::{Deserialize, Serialize};

/// What the trainer should do after an epoch's validation score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ScheduleAction {
    /// Best score of the current stage; `global` is set when it also beats
    /// every earlier epoch, in which case the caller snapshots the model.
    Improved { global: bool },
    Continue,
    /// Halve the rate and restore the best snapshot.
    Decay { lr: f64 },
    /// Decayed below the floor; training ends after restoring.
    Stop { lr: f64 },
}

/// Reduce-on-plateau with reversion. Each stage (the epochs between two
/// decays) tracks its own best; the first epoch after a decay is measured
/// against the restored model and so always starts the stage fresh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauSchedule {
    pub lr: f64,
    pub lr_init: f64,
    pub lr_decay: f64,
    pub lr_floor: f64,
    pub patience: usize,
    pub decays: usize,
    pub epochs_since_improvement: usize,
    pub best_val_uar: f64,
    stage_best: f64,
}

impl PlateauSchedule {
    pub fn new(lr_init: f64, lr_decay: f64, lr_floor: f64, patience: usize) -> Self {
        PlateauSchedule {
            lr: lr_init,
            lr_init,
            lr_decay,
            lr_floor,
            patience,
            decays: 0,
            epochs_since_improvement: 0,
            best_val_uar: f64::NEG_INFINITY,
            stage_best: f64::NEG_INFINITY,
        }
    }

    pub fn observe(&mut self, val_uar: f64) -> ScheduleAction {
        if val_uar > self.stage_best {
            self.stage_best = val_uar;
            self.epochs_since_improvement = 0;
            let global = val_uar > self.best_val_uar;
            if global {
                self.best_val_uar = val_uar;
            }
            return ScheduleAction::Improved { global };
        }
        self.epochs_since_improvement += 1;
        if self.epochs_since_improvement < self.patience {
            return ScheduleAction::Continue;
        }
        self.decays += 1;
        self.lr = self.lr_init * self.lr_decay.powi(self.decays as i32);
        self.epochs_since_improvement = 0;
        self.stage_best = f64::NEG_INFINITY;
        if self.lr < self.lr_floor {
            ScheduleAction::Stop { lr: self.lr }
        } else {
            ScheduleAction::Decay { lr: self.lr }
        }
    }
}
