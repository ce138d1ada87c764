/// Learning-rate schedule indexed by update count `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// `eta / (1 + gamma t)`.
    InvDecay { eta: f64, gamma: f64 },
    /// `eta0 * max(0, 1 - t / horizon)`.
    LinearToZero { eta0: f64, horizon: usize },
}

impl Schedule {
    pub fn lr_at(&self, t: usize) -> f64 {
        match *self {
            Schedule::InvDecay { eta, gamma } => eta / (1.0 + gamma * t as f64),
            Schedule::LinearToZero { eta0, horizon } => {
                if horizon == 0 {
                    return 0.0;
                }
                eta0 * (1.0 - t as f64 / horizon as f64).max(0.0)
            }
        }
    }
}

pub fn lr_at(schedule: &Schedule, t: usize) -> f64 {
    schedule.lr_at(t)
}
