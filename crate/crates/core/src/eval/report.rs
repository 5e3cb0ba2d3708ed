use std::fmt::Write;

use super::EvalReport;

fn pct(x: f64) -> String {
    format!("{:.1}", x * 100.0)
}

/// Plain-text summary: accuracies, strata, then the error breakdown.
pub fn render_table(r: &EvalReport) -> String {
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, "{:<42}{:>10}", "Samples", r.samples);
    let _ = writeln!(
        w,
        "{:<42}{:>10}  ({}/{})",
        "Turn Acc (%)",
        pct(r.turn_acc),
        r.turns_succeeded,
        r.turns_total
    );
    let _ = writeln!(
        w,
        "{:<42}{:>10}  ({}/{})",
        "Call Acc (%)",
        pct(r.call_acc),
        r.calls_matched,
        r.calls_total
    );
    let _ = writeln!(w);
    let _ = writeln!(w, "{:<32}{:>10}{:>10}", "Stratum", "Count", "Turn Acc");
    for (label, st) in &r.strata {
        let _ = writeln!(w, "{:<32}{:>10}{:>10}", label, st.count, pct(st.turn_acc));
    }
    let e = &r.errors;
    let _ = writeln!(w);
    let _ = writeln!(w, "Error Type (%)");
    let _ = writeln!(w, "Call-Level (among {} produced calls)", e.call_level.produced_calls);
    let _ = writeln!(w, "  {:<40}{:>10}", "Function Selection Err", pct(e.call_level.function_selection_err));
    let _ = writeln!(w, "  {:<40}{:>10}", "Parameter Err", pct(e.call_level.parameter_err));
    let _ = writeln!(
        w,
        "Parameter-Level (given correct function, {} calls)",
        e.parameter_level.correct_function_calls
    );
    let _ = writeln!(w, "  {:<40}{:>10}", "Query Param Err", pct(e.parameter_level.query_param_err));
    let _ = writeln!(w, "  {:<40}{:>10}", "Dependency Param Err", pct(e.parameter_level.dependency_param_err));
    let q = &e.sequence_level;
    let _ = writeln!(w, "Sequence-Level ({} of {} samples incomplete)", q.incomplete, q.samples);
    let _ = writeln!(w, "  {:<40}{:>10}", "Stopped after Correct", pct(q.stopped_after_correct));
    let _ = writeln!(w, "  {:<40}{:>10}", "Stopped after Func Err", pct(q.stopped_after_func_err));
    let _ = writeln!(w, "  {:<40}{:>10}", "Stopped after Param Err", pct(q.stopped_after_param_err));
    let _ = writeln!(w, "  {:<40}{:>10}", "Stopped without Calls", pct(q.stopped_without_calls));
    s
}
