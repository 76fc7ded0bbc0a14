use super::params::Parameterized;

/// Central-difference check of an analytic gradient. Perturbs every entry of
/// every parameter tensor by ±eps, evaluates `loss`, and compares the
/// centered difference against `analytic`. Returns the maximum relative
/// error  |a − cd| / max(|a|, |cd|, 1e-8)  over all coordinates.
///
/// `params` is restored to its original bits before returning.
pub fn finite_diff_check<P: Parameterized>(
    params: &mut P,
    analytic: &P,
    eps: f64,
    mut loss: impl FnMut(&P) -> f64,
) -> f64 {
    assert!(eps > 0.0);
    let mut max_rel = 0.0f64;
    for name in params.param_names() {
        let n = params.param(name).numel();
        for idx in 0..n {
            let orig = params.param(name).data[idx];
            params.param_mut(name).data[idx] = orig + eps;
            let up = loss(params);
            params.param_mut(name).data[idx] = orig - eps;
            let down = loss(params);
            params.param_mut(name).data[idx] = orig;

            let cd = (up - down) / (2.0 * eps);
            let a = analytic.param(name).data[idx];
            let rel = (a - cd).abs() / a.abs().max(cd.abs()).max(1e-8);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    max_rel
}
