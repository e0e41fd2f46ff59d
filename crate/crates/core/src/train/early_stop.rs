//! Early stopping on validation loss: strict improvement resets the bad
//! streak and snapshots the parameters; reaching `patience_limit`
//! consecutive non-improving epochs stops training.

use crate::model::ViTParams;

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

pub struct EarlyStopState {
    pub best_val_loss: f64,
    pub consecutive_bad_epochs: u32,
    pub best_epoch: usize,
    pub best_params: Option<ViTParams>,
}

impl Default for EarlyStopState {
    fn default() -> Self {
        Self::new()
    }
}

impl EarlyStopState {
    pub fn new() -> EarlyStopState {
        EarlyStopState {
            best_val_loss: f64::INFINITY,
            consecutive_bad_epochs: 0,
            best_epoch: 0,
            best_params: None,
        }
    }

    /// Record one epoch. A non-finite loss aborts training with a
    /// diagnostic rather than being compared.
    pub fn update(
        &mut self,
        epoch: usize,
        val_loss: f64,
        params: &ViTParams,
        patience_limit: u32,
    ) -> Result<StopDecision, TrainError> {
        if !val_loss.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                context: "validation".into(),
            });
        }
        if val_loss < self.best_val_loss {
            self.best_val_loss = val_loss;
            self.best_epoch = epoch;
            self.consecutive_bad_epochs = 0;
            self.best_params = Some(params.clone());
            Ok(StopDecision::Continue)
        } else {
            self.consecutive_bad_epochs += 1;
            if self.consecutive_bad_epochs >= patience_limit {
                Ok(StopDecision::Stop)
            } else {
                Ok(StopDecision::Continue)
            }
        }
    }
}
