use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Outcome of [`finite_diff_check`].
#[derive(Clone, Debug)]
pub struct GradCheck {
    /// max over coordinates of |analytic − numeric| / max(1e-8, |numeric|)
    pub max_rel_error: f64,
    /// (parameter index, flat coordinate) where the maximum occurred
    pub worst: (usize, usize),
    pub coordinates: usize,
}

/// Compares reverse-mode gradients against central differences.
///
/// `f` builds a scalar loss from the parameter vars (in the order of
/// `params`) on a fresh graph; it is re-run twice per coordinate.
pub fn finite_diff_check<F>(f: F, params: &[Tensor<f64>], step: f64) -> Result<GradCheck>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    assert!(step > 0.0, "finite difference step must be positive");
    let eval = |ps: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ps.iter().map(|p| g.param(p.clone())).collect();
        let loss = f(&mut g, &vars)?;
        Ok(g.value(loss).data()[0])
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
    let loss = f(&mut g, &vars)?;
    g.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| {
            g.grad(v)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; p.len()])
        })
        .collect();

    let mut work = params.to_vec();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: (0, 0),
        coordinates: 0,
    };
    for pi in 0..work.len() {
        for ci in 0..work[pi].len() {
            let orig = work[pi].data()[ci];
            work[pi].data_mut()[ci] = orig + step;
            let up = eval(&work)?;
            work[pi].data_mut()[ci] = orig - step;
            let down = eval(&work)?;
            work[pi].data_mut()[ci] = orig;
            let numeric = (up - down) / (2.0 * step);
            let err = (analytic[pi][ci] - numeric).abs() / numeric.abs().max(1e-8);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (pi, ci);
            }
            report.coordinates += 1;
        }
    }
    Ok(report)
}
