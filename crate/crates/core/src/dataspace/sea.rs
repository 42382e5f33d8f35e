use super::{DataError, DataSchema, Dataset, Provenance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Label thresholds on `x1 + x2` for the four SEA concepts.
pub const SEA_THRESHOLDS: [f64; 4] = [8.0, 9.0, 7.0, 9.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeaSegment {
    pub variant: u8,
    pub length: usize,
}

/// SEA concept-drift stream: concept switches happen at segment boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeaConfig {
    pub n: usize,
    pub schedule: Vec<SeaSegment>,
    pub noise: f64,
    pub seed: u64,
}

impl SeaConfig {
    /// Two equal segments, concept 0 then concept 1.
    pub fn single_drift(n: usize, noise: f64, seed: u64) -> Self {
        let first = n / 2;
        Self {
            n,
            schedule: vec![
                SeaSegment { variant: 0, length: first },
                SeaSegment { variant: 1, length: n - first },
            ],
            noise,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let total: usize = self.schedule.iter().map(|s| s.length).sum();
        if total != self.n {
            return Err(DataError::Config(format!(
                "SEA schedule lengths sum to {total}, expected n = {}",
                self.n
            )));
        }
        if let Some(s) = self.schedule.iter().find(|s| s.variant > 3) {
            return Err(DataError::Config(format!(
                "SEA variant {} is not in 0..=3",
                s.variant
            )));
        }
        if !(0.0..0.5).contains(&self.noise) {
            return Err(DataError::Config(format!(
                "SEA noise must be in [0, 0.5), got {}",
                self.noise
            )));
        }
        Ok(())
    }

    pub fn id(&self) -> String {
        let sched: Vec<String> = self
            .schedule
            .iter()
            .map(|s| format!("{}x{}", s.variant, s.length))
            .collect();
        format!("sea[{}]noise={}seed={}", sched.join(","), self.noise, self.seed)
    }
}

pub(crate) fn sea_label(variant: u8, x1: f64, x2: f64) -> u8 {
    u8::from(x1 + x2 > SEA_THRESHOLDS[variant as usize])
}

/// Three uniform features on `[0, 10)`; label flips with probability `noise`.
pub fn generate_sea(cfg: &SeaConfig) -> Result<Dataset, DataError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.n);
    let mut labels = Vec::with_capacity(cfg.n);
    for seg in &cfg.schedule {
        for _ in 0..seg.length {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..10.0)).collect();
            let mut y = sea_label(seg.variant, x[0], x[1]);
            if rng.random::<f64>() < cfg.noise {
                y = 1 - y;
            }
            rows.push(x);
            labels.push(y);
        }
    }
    let schema = DataSchema::new(vec!["x1".into(), "x2".into(), "x3".into()], "y".into())?;
    Dataset::new(schema, rows, labels, Provenance::Generator { id: cfg.id() })
}
