use serde::{Deserialize, Serialize};

use super::graph::{Fault, Graph, Var};
use super::params::ParamStore;
use crate::error::{Error, Result};

/// Floor of the relative-error denominator.
pub const REL_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstEntry {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<WorstEntry>,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compares reverse-mode gradients of a scalar function against central
/// differences `(f(θ+h) - f(θ-h)) / 2h`, entry by entry over every
/// parameter in `params`.
///
/// `build` records the loss on a fresh graph; it is called once for the
/// analytic pass and twice per scalar parameter. `fault` is forwarded to the
/// analytic graph only.
pub fn grad_check<F>(params: &ParamStore, h: f64, fault: Option<Fault>, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::invalid("grad_check", "step must be positive"));
    }
    let mut g = Graph::with_fault(fault);
    let loss = build(&mut g, params)?;
    let f0 = g.value(loss).item();
    if !f0.is_finite() {
        return Err(Error::NonFinite("grad_check objective".into()));
    }
    let analytic = g.param_grads(&g.backward(loss)?);

    let eval = |p: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let loss = build(&mut g, p)?;
        let v = g.value(loss).item();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("grad_check objective".into()))
        }
    };

    let mut probe = params.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, checked: 0 };
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in names {
        let n = params.get(&name).map_or(0, |a| a.len());
        for i in 0..n {
            let orig = params.get(&name).unwrap().data()[i];
            probe.get_mut(&name).unwrap().data_mut()[i] = orig + h;
            let fp = eval(&probe)?;
            probe.get_mut(&name).unwrap().data_mut()[i] = orig - h;
            let fm = eval(&probe)?;
            probe.get_mut(&name).unwrap().data_mut()[i] = orig;

            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic.get(&name).map_or(0.0, |arr| arr.data()[i]);
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some(WorstEntry { param: name.clone(), index: i, analytic: a, numeric });
            }
        }
    }
    Ok(report)
}
