//! Central-finite-difference gradient checking.
//!
//! Used throughout the test suites to pin every analytic gradient against an
//! independent numerical estimate at float64.

use ndarray::ArrayD;

use super::{Tape, Var};

/// Result of a gradient check: worst relative error across all checked
/// coordinates, plus where it occurred.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_input: usize,
    pub worst_coord: usize,
    pub n_checked: usize,
}

/// Compare the tape gradient of `f` against central finite differences.
///
/// `f` rebuilds the computation from scratch for the given inputs and returns
/// the scalar root together with the vars bound to each input (in order).
/// Every coordinate of every input is perturbed by ±`h`.
pub fn check_gradients<F>(inputs: &[ArrayD<f64>], h: f64, f: F) -> GradCheckReport
where
    F: Fn(&Tape, &[ArrayD<f64>]) -> (Var, Vec<Var>),
{
    let (analytic, base_vars_count) = {
        let tape = Tape::new();
        let (root, vars) = f(&tape, inputs);
        let grads = tape.backward(root);
        let gs: Vec<ArrayD<f64>> = vars.iter().map(|&v| grads.get(v, &tape)).collect();
        (gs, vars.len())
    };
    assert_eq!(base_vars_count, inputs.len(), "var count mismatch");

    let eval = |xs: &[ArrayD<f64>]| -> f64 {
        let tape = Tape::new();
        let (root, _) = f(&tape, xs);
        tape.scalar_value(root)
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_input: 0,
        worst_coord: 0,
        n_checked: 0,
    };
    for (ii, input) in inputs.iter().enumerate() {
        for ci in 0..input.len() {
            let mut plus = inputs.to_vec();
            plus[ii].as_slice_mut().unwrap()[ci] += h;
            let mut minus = inputs.to_vec();
            minus[ii].as_slice_mut().unwrap()[ci] -= h;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let an = analytic[ii].as_slice().unwrap()[ci];
            let denom = an.abs().max(fd.abs()).max(1e-8);
            let rel = (an - fd).abs() / denom;
            report.n_checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_input = ii;
                report.worst_coord = ci;
            }
        }
    }
    report
}

/// Convenience wrapper asserting the standard tolerance.
pub fn assert_gradients_close<F>(inputs: &[ArrayD<f64>], h: f64, tol: f64, f: F)
where
    F: Fn(&Tape, &[ArrayD<f64>]) -> (Var, Vec<Var>),
{
    let report = check_gradients(inputs, h, f);
    assert!(
        report.max_rel_err < tol,
        "gradient mismatch: rel err {} at input {} coord {} ({} coords checked)",
        report.max_rel_err,
        report.worst_input,
        report.worst_coord,
        report.n_checked
    );
}
