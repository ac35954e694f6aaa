//! Deterministic file output. Every real number is written with 17
//! significant digits so reruns are byte-identical and values round-trip.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::{Number, Value};

use frachum_core::hum::{HumProblem, RunOutcome};
use frachum_core::models::ProblemSpec;
use frachum_core::spectral::{trace_values, write_grid_dump, SpectralGrid};
use frachum_core::Error;

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "NaN".into()
    }
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn fixed_digits(v: Value) -> Value {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(f) if !(n.is_i64() || n.is_u64()) => match f.is_finite() {
                true => Value::Number(num(f).parse::<Number>().expect("formatted float parses")),
                false => Value::Null,
            },
            _ => Value::Number(n),
        },
        Value::Array(a) => Value::Array(a.into_iter().map(fixed_digits).collect()),
        Value::Object(m) => {
            Value::Object(m.into_iter().map(|(k, v)| (k, fixed_digits(v))).collect())
        }
        other => other,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report serializes");
    let mut s = serde_json::to_string_pretty(&fixed_digits(v)).expect("value serializes");
    s.push('\n');
    s
}

const RUN_FILES: [&str; 5] = [
    "report.json",
    "control.csv",
    "reached.dat",
    "desired.dat",
    "trace.csv",
];

/// Drops outputs of an earlier run of the other kind in the same directory.
fn remove_stale(dir: &Path, names: &[&str]) -> io::Result<()> {
    for n in names {
        match fs::remove_file(dir.join(n)) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e),
            _ => {}
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ReportFile<'a> {
    label: &'a str,
    problem: &'a ProblemSpec,
    report: &'a frachum_core::hum::RunReport,
}

pub fn write_run(
    dir: &Path,
    label: &str,
    spec: &ProblemSpec,
    prob: &HumProblem,
    out: &RunOutcome,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    remove_stale(dir, &["failure.json"])?;
    let report = ReportFile {
        label,
        problem: spec,
        report: &out.report,
    };
    write_atomic(&dir.join("report.json"), to_json(&report).as_bytes())?;

    let mut csv = String::from("t,u\n");
    let u = &out.closed_loop.control;
    for (t, v) in u.times.iter().zip(&u.values) {
        let _ = writeln!(csv, "{},{}", num(*t), num(*v));
    }
    write_atomic(&dir.join("control.csv"), csv.as_bytes())?;

    let order = prob.disc.order;
    let grid = SpectralGrid::new(order, prob.disc.projection_points).map_err(io::Error::other)?;
    for (name, fld) in [
        ("reached.dat", &out.closed_loop.final_state),
        ("desired.dat", &out.y_d),
    ] {
        let mut buf = Vec::new();
        write_grid_dump(&mut buf, fld, &grid)?;
        write_atomic(&dir.join(name), &buf)?;
    }

    let mut csv = String::from("s,reached,desired\n");
    let samples = trace_values(
        &out.closed_loop.final_state,
        &prob.gamma,
        prob.disc.trace_samples,
    )
    .map_err(io::Error::other)?;
    for (s, v) in samples {
        let _ = writeln!(csv, "{},{},{}", num(s), num(v), num((prob.z_d)(s)));
    }
    write_atomic(&dir.join("trace.csv"), csv.as_bytes())
}

#[derive(Serialize)]
struct FailureFile<'a> {
    label: &'a str,
    problem: &'a ProblemSpec,
    error: String,
    /// Time node and time of a blow-up, when that is the cause.
    node: Option<usize>,
    time: Option<f64>,
}

/// Records why a run produced no report.
pub fn write_failure(dir: &Path, label: &str, spec: &ProblemSpec, err: &Error) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    remove_stale(dir, &RUN_FILES)?;
    let (node, time) = match err {
        Error::BlowUp { node, time } => (Some(*node), Some(*time)),
        _ => (None, None),
    };
    let f = FailureFile {
        label,
        problem: spec,
        error: err.to_string(),
        node,
        time,
    };
    write_atomic(&dir.join("failure.json"), to_json(&f).as_bytes())
}

pub struct TableRow {
    pub actuator: String,
    pub region: String,
    pub error_gamma: f64,
    pub error_omega: f64,
    pub gram_min_eig: f64,
    pub iterations: Option<usize>,
    pub converged: bool,
}

fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut csv =
        String::from("actuator,region,error_gamma,error_omega,gram_min_eig,iterations,converged\n");
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            quoted(&r.actuator),
            quoted(&r.region),
            num(r.error_gamma),
            num(r.error_omega),
            num(r.gram_min_eig),
            r.iterations.map_or("NaN".to_string(), |i| i.to_string()),
            r.converged
        );
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(f64::NAN), "NaN");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        let v: f64 = num(std::f64::consts::PI).parse().unwrap();
        assert_eq!(v, std::f64::consts::PI);
    }

    #[test]
    fn json_floats_fixed() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            n: usize,
            bad: f64,
        }
        let s = to_json(&S {
            a: 0.5,
            n: 3,
            bad: f64::INFINITY,
        });
        assert!(s.contains("\"a\": 5.0000000000000000e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
        assert!(s.contains("\"bad\": null"));
    }

    #[test]
    fn table_quotes_fields() {
        let csv = table_csv(&[TableRow {
            actuator: "[0.5, 1]x[0.7, 1]".into(),
            region: "[0, 1]x[0, 1]".into(),
            error_gamma: f64::NAN,
            error_omega: 1.0,
            gram_min_eig: 0.0,
            iterations: None,
            converged: false,
        }]);
        let line = csv.lines().nth(1).unwrap();
        assert!(line.starts_with("\"[0.5, 1]x[0.7, 1]\",\"[0, 1]x[0, 1]\",NaN,"));
        assert!(line.ends_with(",NaN,false"));
    }
}
