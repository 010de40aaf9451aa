//! Report serialization: fixed-width floats for reproducible output.
//!
//! Every float in a JSON or CSV report is printed with 17 significant digits
//! (`{:.16e}`), enough to round-trip f64 exactly, so identical runs produce
//! byte-identical files.

use std::io;

use mobj_lqr::lqr::MultiObjectiveProblem;
use mobj_lqr::pareto::ParetoFrontApprox;
use nalgebra::DMatrix;
use serde_json::ser::Formatter;
use serde_json::Value;

/// 17-significant-digit float rendering shared by CSV and JSON writers.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Finite floats become JSON numbers, non-finite become null.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

pub fn num_opt(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

pub fn vec_nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

/// Row-major nested-array rendering of a matrix.
pub fn matrix_rows(m: &DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| num(m[(i, j)])).collect()))
            .collect(),
    )
}

struct SigFigFormatter;

impl Formatter for SigFigFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        if value.is_finite() {
            writer.write_all(fmt_f64(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }
}

/// Serialize a JSON value with the fixed float format (compact layout).
pub fn to_json_string(value: &Value) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFigFormatter);
    serde::Serialize::serialize(value, &mut ser).expect("JSON serialization cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serializer emits UTF-8")
}

/// Front CSV: `w_1..w_m, k_1..k_(d*n) (row-major), loss_1..loss_m,
/// scalarized_loss, dare_residual`, one row per solved net point.
pub fn front_csv(front: &ParetoFrontApprox, problem: &MultiObjectiveProblem) -> String {
    let m = front.net.m;
    let n = problem.dynamics.state_dim();
    let d = problem.dynamics.control_dim();
    let mut header: Vec<String> = Vec::new();
    header.extend((1..=m).map(|i| format!("w_{i}")));
    header.extend((1..=d * n).map(|i| format!("k_{i}")));
    header.extend((1..=m).map(|i| format!("loss_{i}")));
    header.push("scalarized_loss".into());
    header.push("dare_residual".into());
    let mut out = header.join(",");
    out.push('\n');
    for point in &front.points {
        let mut row: Vec<String> = Vec::new();
        row.extend(point.weight.as_slice().iter().map(|&x| fmt_f64(x)));
        for i in 0..d {
            for j in 0..n {
                row.push(fmt_f64(point.gain[(i, j)]));
            }
        }
        row.extend(point.losses.iter().map(|&x| fmt_f64(x)));
        row.push(fmt_f64(point.scalarized_loss()));
        row.push(fmt_f64(point.dare.residual_norm));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Front JSON: net metadata, problem digest, per-point records, failures.
pub fn front_json(front: &ParetoFrontApprox, problem: &MultiObjectiveProblem) -> Value {
    let points: Vec<Value> = front
        .points
        .iter()
        .zip(&front.net_indices)
        .map(|(point, &net_index)| {
            serde_json::json!({
                "net_index": net_index,
                "w": vec_nums(point.weight.as_slice()),
                "K": matrix_rows(&point.gain),
                "losses": vec_nums(&point.losses),
                "scalarized_loss": num(point.scalarized_loss()),
                "dare_residual": num(point.dare.residual_norm),
            })
        })
        .collect();
    let failures: Vec<Value> = front
        .failures
        .iter()
        .map(|f| {
            serde_json::json!({
                "net_index": f.net_index,
                "w": vec_nums(f.weight.as_slice()),
                "message": f.message,
            })
        })
        .collect();
    serde_json::json!({
        "schema": 1,
        "command": "front",
        "problem_digest": front.problem_digest,
        "epsilon": num(front.epsilon),
        "m": front.net.m,
        "resolution": front.net.resolution,
        "net_size": front.net.points.len(),
        "n": problem.dynamics.state_dim(),
        "d": problem.dynamics.control_dim(),
        "complete": front.is_complete(),
        "points": points,
        "failures": failures,
    })
}
