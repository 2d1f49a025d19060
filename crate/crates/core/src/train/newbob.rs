use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    RampHold,
    RampDecay,
}

/// Newbob learning-rate schedule driven by a validation accuracy.
///
/// While holding, the rate stays fixed until an epoch improves the metric by
/// less than the threshold; then it halves and switches to decay. While
/// decaying it halves after every epoch, and a second small improvement
/// halts training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewbobState {
    pub lr: f64,
    pub phase: Phase,
    pub prev_metric: Option<f64>,
    pub improve_threshold: f64,
    pub halt: bool,
}

impl NewbobState {
    pub fn new(lr: f64, improve_threshold: f64) -> Self {
        Self { lr, phase: Phase::RampHold, prev_metric: None, improve_threshold, halt: false }
    }

    pub fn step(&mut self, metric: f64) {
        let Some(prev) = self.prev_metric.replace(metric) else {
            return;
        };
        let small = metric - prev < self.improve_threshold;
        match self.phase {
            Phase::RampHold => {
                if small {
                    self.phase = Phase::RampDecay;
                    self.lr *= 0.5;
                }
            }
            Phase::RampDecay => {
                self.lr *= 0.5;
                if small {
                    self.halt = true;
                }
            }
        }
    }
}

pub fn newbob_step(state: &NewbobState, metric: f64) -> NewbobState {
    let mut next = state.clone();
    next.step(metric);
    next
}
