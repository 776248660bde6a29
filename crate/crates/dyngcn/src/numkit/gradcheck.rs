//! Central-difference verification of analytic gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::Result;
use crate::numkit::{Gradients, ParamSet};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Half-width of the central difference stencil.
    pub epsilon: f64,
    /// Denominator floor in the relative error, guarding near-zero pairs.
    pub guard: f64,
    /// Above this many scalars per parameter, only a random subsample of
    /// coordinates is probed.
    pub subsample_above: usize,
    /// How many coordinates to probe when subsampling kicks in.
    pub subsample_count: usize,
    /// Seed for the subsampling draw.
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            epsilon: 1e-5,
            guard: 1e-8,
            subsample_above: 400,
            subsample_count: 200,
            seed: 0,
        }
    }
}

/// Worst coordinate seen during a check, for diagnostics.
#[derive(Debug, Clone)]
pub struct WorstCoordinate {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst: Option<WorstCoordinate>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Compares `analytic` against central differences of `loss` over `params`.
///
/// For each probed scalar p the numeric slope is
/// (loss(p + eps) - loss(p - eps)) / (2 eps) and the relative error is
/// |a - n| / max(|a|, |n|, guard). Parameters larger than
/// `subsample_above` scalars are probed at `subsample_count` randomly
/// chosen coordinates; smaller ones are probed exhaustively.
pub fn finite_diff_check<F>(
    params: &ParamSet,
    analytic: &Gradients,
    mut loss: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamSet) -> Result<f64>,
{
    let mut work = params.clone();
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_err: 0.0,
        worst: None,
    };

    let names = params.names();
    for name in &names {
        let len = params.get(name).map(|m| m.data().len()).unwrap_or(0);
        let coords: Vec<usize> = if len > opts.subsample_above {
            let mut all: Vec<usize> = (0..len).collect();
            all.shuffle(&mut rng);
            all.truncate(opts.subsample_count);
            all
        } else {
            (0..len).collect()
        };

        for idx in coords {
            let orig = work.get(name).unwrap().data()[idx];

            work.get_mut(name).unwrap().data_mut()[idx] = orig + opts.epsilon;
            let up = loss(&work)?;
            work.get_mut(name).unwrap().data_mut()[idx] = orig - opts.epsilon;
            let down = loss(&work)?;
            work.get_mut(name).unwrap().data_mut()[idx] = orig;

            let numeric = (up - down) / (2.0 * opts.epsilon);
            let a = analytic
                .get(name)
                .map(|m| m.data()[idx])
                .unwrap_or(f64::NAN);
            let denom = a.abs().max(numeric.abs()).max(opts.guard);
            let rel = (a - numeric).abs() / denom;

            report.checked += 1;
            if rel > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = report.max_rel_err.max(rel);
                report.worst = Some(WorstCoordinate {
                    param: name.clone(),
                    index: idx,
                    analytic: a,
                    numeric,
                    rel_err: rel,
                });
            }
        }
    }
    Ok(report)
}
