//! Central-finite-difference gradient checking.
//!
//! The numeric side only reruns forward evaluations, so it is independent of the
//! backward pass it validates.

use super::{ParamStore, Tape, ValueId};
use crate::error::{Error, Result};

pub const DEFAULT_FD_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub elements_checked: usize,
    pub worst_relative_error: f64,
}

fn eval<F>(build: &F, store: &ParamStore) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<ValueId>,
{
    let mut tape = Tape::new();
    let loss = build(&mut tape, store)?;
    Ok(tape.value(loss).scalar_value())
}

fn set_element(store: &mut ParamStore, name: &str, idx: usize, v: f64) {
    let mut t = store.value(name).expect("checked parameter exists").clone();
    t.data_mut()[idx] = v;
    store.insert(name, t);
}

/// Compare every parameter element's analytic gradient against central finite
/// differences of the scalar loss `build` produces.
pub fn check_gradients<F>(
    store: &mut ParamStore,
    build: F,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<ValueId>,
{
    store.zero_grads();
    let mut tape = Tape::new();
    let loss = build(&mut tape, store)?;
    tape.backward(loss, store)?;
    let analytic: Vec<(String, Vec<f64>)> = store
        .iter()
        .map(|(n, p)| (n.to_string(), p.grad.data().to_vec()))
        .collect();

    let mut checked = 0;
    let mut worst = 0.0f64;
    for (name, grads) in analytic {
        for (idx, &a) in grads.iter().enumerate() {
            let orig = store.value(&name)?.data()[idx];
            set_element(store, &name, idx, orig + step);
            let f_plus = eval(&build, store)?;
            set_element(store, &name, idx, orig - step);
            let f_minus = eval(&build, store)?;
            set_element(store, &name, idx, orig);
            let numeric = (f_plus - f_minus) / (2.0 * step);
            let relative = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(relative);
            checked += 1;
            if relative >= tolerance {
                return Err(Error::GradientMismatch {
                    parameter: name,
                    index: idx,
                    analytic: a,
                    numeric,
                });
            }
        }
    }
    Ok(GradCheckReport {
        elements_checked: checked,
        worst_relative_error: worst,
    })
}
