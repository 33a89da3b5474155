//! Central finite-difference verification of recorded gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::scalar::Scalar;

use super::graph::{Bound, Graph, NodeId};
use super::params::ParamSet;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub epsilon: f64,
    /// Entries probed per tensor; larger tensors are subsampled.
    pub max_entries_per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            max_entries_per_tensor: usize::MAX,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub entries_checked: usize,
    /// `(tensor name, flat index, analytic, numeric)` of the worst entry.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// `|a − n| / max(1e-8, |a| + |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compare the reverse-mode gradient of the scalar built by `loss` against
/// central differences, over every trainable tensor of `params`.
pub fn gradient_check<T, F>(params: &ParamSet<T>, loss: F, config: GradCheckConfig) -> Result<GradCheckReport>
where
    T: Scalar,
    F: for<'g> Fn(&mut Graph<'g, T>, &Bound) -> Result<NodeId>,
{
    let analytic = {
        let mut g = Graph::new();
        let bound = g.bind(params);
        let out = loss(&mut g, &bound)?;
        g.backward(out)?.params(&bound, params)
    };

    let eval = |p: &ParamSet<T>| -> Result<f64> {
        let mut g = Graph::new();
        let bound = g.bind(p);
        let out = loss(&mut g, &bound)?;
        Ok(g.scalar(out).as_f64())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut probe = params.clone();
    let eps = T::c(config.epsilon);
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        entries_checked: 0,
        worst: None,
    };
    for id in params.ids() {
        let Some(grad) = analytic.get(id) else { continue };
        let n = grad.len();
        let picks: Vec<usize> = if n <= config.max_entries_per_tensor {
            (0..n).collect()
        } else {
            let mut v = rand::seq::index::sample(&mut rng, n, config.max_entries_per_tensor).into_vec();
            v.sort_unstable();
            v
        };
        for k in picks {
            let original = probe.get(id).data()[k];
            probe.get_mut(id).data_mut()[k] = original + eps;
            let plus = eval(&probe)?;
            probe.get_mut(id).data_mut()[k] = original - eps;
            let minus = eval(&probe)?;
            probe.get_mut(id).data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * config.epsilon);
            let a = grad[k].as_f64();
            let err = relative_error(a, numeric);
            report.entries_checked += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = report.max_relative_error.max(err);
                if err >= report.max_relative_error {
                    report.worst = Some((params.entry(id).name.clone(), k, a, numeric));
                }
            }
        }
    }
    Ok(report)
}
