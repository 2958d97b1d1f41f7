//! Seeded synthetic hyperthyroidism cohort.
//!
//! Each patient follows one of two latent regimes. Remission patients recover
//! TSH toward mid-normal and clear TRAb quickly; recurrence patients clear
//! TRAb slowly and relapse to suppressed TSH with rebounding TRAb by the
//! two-year visit. The regimes overlap in their early-window signature, and a
//! shared per-patient severity term shifts the two-year TSH continuously, so
//! predictions land on both sides of the TSH low bound.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{RawCohort, RawVisit};
use crate::domain::{FeatureVector, Sex, StaticAttributes, EARLY_WINDOW_DAYS};
use crate::error::{Error, Result};
use crate::seed;

/// Day-0 TRAb is kept at or above this so the eligibility filter passes under
/// the default TRAb high bound (1.75 IU/L).
const MIN_ENTRY_TRAB: f64 = 2.5;
const TWO_YEARS: u32 = 730;
const LAST_DAY: u32 = 3650;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub n_patients: usize,
    pub recurrence_fraction: f64,
    /// Mean number of visits inside the first 180 days.
    pub visit_count_mean: f64,
    pub visit_count_spread: f64,
    /// Sigma of the multiplicative log-normal measurement noise.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_patients: 2460,
            recurrence_fraction: 0.3,
            visit_count_mean: 7.0,
            visit_count_spread: 2.0,
            noise_scale: 0.05,
            seed: 7,
        }
    }
}

impl GeneratorConfig {
    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.recurrence_fraction) {
            return Err(Error::Config(format!(
                "generator.recurrence_fraction {} outside [0, 1]",
                self.recurrence_fraction
            )));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::Config(format!(
                "generator.noise_scale {} must be ≥ 0",
                self.noise_scale
            )));
        }
        if !(self.visit_count_mean > 0.0 && self.visit_count_spread >= 0.0) {
            return Err(Error::Config(
                "generator visit count distribution must have mean > 0, spread ≥ 0".into(),
            ));
        }
        Ok(())
    }
}

/// Latent parameters of one patient's disease course.
struct Course {
    trab0: f64,
    trab_rate: f64,
    tsh0: f64,
    tsh_plateau: f64,
    tsh_rate: f64,
    ft3_0: f64,
    ft4_0: f64,
    thyroxine_rate: f64,
    tsh_2y: f64,
    trab_2y: f64,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

impl Course {
    fn draw(rng: &mut ChaCha8Rng, recurrence: bool) -> Self {
        let severity = normal(rng);
        let (trab_rate, tsh_rate, plateau, tsh_2y_median, trab_2y_median): (
            f64,
            f64,
            f64,
            f64,
            f64,
        ) = if recurrence {
            (1.0 / 200.0, 1.0 / 110.0, 0.6, 0.13, 4.0)
        } else {
            (1.0 / 70.0, 1.0 / 60.0, 1.4, 1.6, 0.8)
        };
        Self {
            trab0: (8.0f64.ln() + 0.4 * severity + 0.3 * normal(rng)).exp(),
            trab_rate: trab_rate * (0.5 * normal(rng) - 0.2 * severity).exp(),
            tsh0: (0.02f64.ln() + 0.5 * normal(rng)).exp(),
            tsh_plateau: plateau * (0.3 * normal(rng)).exp(),
            tsh_rate: tsh_rate * (0.3 * normal(rng)).exp(),
            ft3_0: 14.0 * (0.25 * normal(rng) + 0.1 * severity).exp(),
            ft4_0: 40.0 * (0.25 * normal(rng) + 0.1 * severity).exp(),
            thyroxine_rate: (1.0 / 45.0) * (0.2 * normal(rng)).exp(),
            tsh_2y: (tsh_2y_median.ln() - 0.3 * severity + 0.45 * normal(rng)).exp(),
            trab_2y: if recurrence {
                (trab_2y_median.ln() + 0.2 * severity + 0.5 * normal(rng)).exp()
            } else {
                (trab_2y_median.ln() + 0.4 * normal(rng)).exp()
            },
        }
    }

    /// Noise-free panel inside the early treatment window.
    fn early(&self, day: f64) -> FeatureVector {
        let decay = (-self.thyroxine_rate * day).exp();
        let tsh_w = (-self.tsh_rate * day).exp();
        let log_tsh = self.tsh_plateau.ln() + (self.tsh0.ln() - self.tsh_plateau.ln()) * tsh_w;
        FeatureVector::new(
            5.0 + (self.ft3_0 - 5.0) * decay,
            16.0 + (self.ft4_0 - 16.0) * decay,
            log_tsh.exp(),
            0.6 + self.trab0 * (-self.trab_rate * day).exp(),
        )
    }

    fn late(&self) -> FeatureVector {
        let plateau = self.early(f64::from(EARLY_WINDOW_DAYS));
        FeatureVector::new(plateau.ft3, plateau.ft4, self.tsh_2y, self.trab_2y)
    }

    /// Panel on any day; between the early window and two years the values
    /// move geometrically from the end-of-window panel to the two-year panel.
    fn at(&self, day: u32) -> FeatureVector {
        if day <= EARLY_WINDOW_DAYS {
            return self.early(f64::from(day));
        }
        let late = self.late();
        if day >= TWO_YEARS {
            return late;
        }
        let start = self.early(f64::from(EARLY_WINDOW_DAYS));
        let w = f64::from(day - EARLY_WINDOW_DAYS) / f64::from(TWO_YEARS - EARLY_WINDOW_DAYS);
        let mut out = start.as_array();
        for (o, l) in out.iter_mut().zip(late.as_array()) {
            *o = (o.ln() * (1.0 - w) + l.ln() * w).exp();
        }
        FeatureVector::from_array(out)
    }
}

fn visit_days(rng: &mut ChaCha8Rng, config: &GeneratorConfig) -> Vec<u32> {
    let early = (config.visit_count_mean + config.visit_count_spread * normal(rng))
        .round()
        .clamp(1.0, 12.0) as usize;
    let mut days = vec![0u32];
    while days.len() < early {
        let d = rng.random_range(1..=EARLY_WINDOW_DAYS);
        if !days.contains(&d) {
            days.push(d);
        }
    }
    days.sort_unstable();
    for _ in 0..rng.random_range(1..=3) {
        days.push(rng.random_range(EARLY_WINDOW_DAYS + 1..TWO_YEARS));
    }
    days.push(TWO_YEARS + rng.random_range(0..=60));
    for _ in 0..rng.random_range(0..=3) {
        days.push(rng.random_range(TWO_YEARS + 61..=LAST_DAY));
    }
    days.sort_unstable();
    days.dedup();
    days
}

/// Generates a cohort; deterministic for a fixed `config.seed`.
///
/// Patient `i` draws from its own stream derived from `(seed, i)`, so the
/// first `k` patients do not depend on `n_patients`.
pub fn generate_synthetic(config: &GeneratorConfig) -> Result<RawCohort> {
    config.check()?;
    let mut cohort = RawCohort::default();
    let mut statics = BTreeMap::new();
    for i in 0..config.n_patients {
        let id = format!("P{:05}", i + 1);
        let mut rng = seed::rng(seed::derive(config.seed, &[i as u64]));
        let sex = if rng.random_bool(0.75) {
            Sex::Female
        } else {
            Sex::Male
        };
        let age_years = (42.0 + 13.0 * normal(&mut rng)).clamp(16.0, 85.0);
        statics.insert(id.clone(), StaticAttributes { sex, age_years });

        let recurrence = rng.random_bool(config.recurrence_fraction);
        let course = Course::draw(&mut rng, recurrence);
        for day in visit_days(&mut rng, config) {
            let clean = course.at(day).as_array();
            let mut measured = [0.0; 4];
            for (m, c) in measured.iter_mut().zip(clean) {
                *m = c * (config.noise_scale * normal(&mut rng)).exp();
            }
            if day == 0 {
                measured[3] = measured[3].max(MIN_ENTRY_TRAB);
            }
            cohort.visits.push(RawVisit {
                patient_id: id.clone(),
                day,
                features: FeatureVector::from_array(measured),
            });
        }
    }
    cohort.statics = statics;
    Ok(cohort)
}
