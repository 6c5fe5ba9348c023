//! Trace CSV emission. The header and the 17-significant-digit float format
//! are a stable contract: identical config and seed produce byte-identical
//! files.

use pavg::TraceRecord;

pub const HEADER: &str =
    "step,f_x,f_z,grad_sq_x,grad_sq_z,xdiff_sq,lyapunov,remainder,ratio_ema,eta,c,alpha,beta";

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub fn render(trace: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in trace {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{},{},{},{}\n",
            r.step,
            r.f_x,
            r.f_z,
            r.grad_sq_x,
            r.grad_sq_z,
            r.xdiff_sq,
            cell(r.lyapunov),
            cell(r.remainder),
            cell(r.ratio_ema),
            cell(r.eta),
            cell(r.c),
            cell(r.alpha),
            cell(r.beta),
        ));
    }
    out
}
