//! Central finite-difference check of analytic gradients.

use super::graph::Gradients;
use super::tensor::ParameterStore;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// parameter name and flat index of the worst element
    pub worst: Option<(String, usize)>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

/// Elementwise `|a - n| / max(|a|, |n|, floor)`; the floor keeps
/// near-zero gradients from turning round-off into large ratios.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    const FLOOR: f64 = 1e-6;
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Compare `loss_and_grads` against central differences of its loss for
/// every parameter element. `store` is restored before returning.
pub fn check_gradients<F>(store: &mut ParameterStore, h: f64, loss_and_grads: F) -> GradCheckReport
where
    F: Fn(&ParameterStore) -> (f64, Gradients),
{
    let (_, grads) = loss_and_grads(store);
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for k in 0..store.get(id).len() {
            let orig = store.get(id).data[k];
            store.get_mut(id).data[k] = orig + h;
            let (up, _) = loss_and_grads(store);
            store.get_mut(id).data[k] = orig - h;
            let (down, _) = loss_and_grads(store);
            store.get_mut(id).data[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(id).map_or(0.0, |g| g[k]);
            let err = relative_error(analytic, numeric);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((store.name(id).to_string(), k));
            }
        }
    }
    report
}
