//! CSV and JSON rendering. CSV floats use 17 significant digits so repeated
//! runs are byte-identical; missing values are empty cells.

use std::fmt::Write as _;

use planar_period::period::{AnnulusScan, PeriodDerivativeReport};
use planar_period::verify::VerificationReport;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: &str = "level,T,tprime_mu,tprime_etabeta,tprime_fd,max_deviation,flags";

pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{:.16e}", v)
    } else {
        v.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

pub fn csv_row(r: &PeriodDerivativeReport) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        float(r.level),
        float(r.period),
        opt(r.tprime_mu),
        opt(r.tprime_etabeta),
        opt(r.tprime_fd),
        opt(r.max_deviation),
        r.flags().join(";")
    )
}

/// One row per successful level, then one row per failed level with only the
/// level and a `failed` flag.
pub fn scan_csv(scan: &AnnulusScan) -> String {
    let mut rows: Vec<(f64, String)> = scan.reports.iter().map(|r| (r.level, csv_row(r))).collect();
    rows.extend(
        scan.failures
            .iter()
            .map(|f| (f.level, format!("{},,,,,,failed", float(f.level)))),
    );
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (_, row) in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

pub fn report_csv(r: &PeriodDerivativeReport) -> String {
    format!("{}\n{}\n", CSV_HEADER, csv_row(r))
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    #[serde(flatten)]
    body: T,
}

pub fn json<T: Serialize>(command: &str, body: T) -> String {
    let mut s = serde_json::to_string_pretty(&Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        body,
    })
    .expect("report types serialize");
    s.push('\n');
    s
}

/// Aligned two-column table for a single report.
pub fn report_table(system: &str, r: &PeriodDerivativeReport) -> String {
    let mut rows: Vec<(&str, String)> = vec![
        ("system", system.to_string()),
        ("anchor", r.anchor.to_string()),
        ("level H", float(r.level)),
        ("T", float(r.period)),
    ];
    let mut add = |k, v: Option<f64>| {
        if let Some(v) = v {
            rows.push((k, float(v)));
        }
    };
    add("T' (mu)", r.tprime_mu);
    add("T' (etabeta)", r.tprime_etabeta);
    add("T' (fd)", r.tprime_fd);
    add("max deviation", r.max_deviation);
    add("holonomy", r.holonomy);
    rows.push(("closure error", float(r.closure_error)));
    if let Some(n) = r.normalizer {
        rows.push(("normalizer", n.to_string()));
    }
    rows.push(("consistent", if r.consistent { "yes" } else { "no" }.to_string()));
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{:<width$}  {}", k, v, width = width);
    }
    for d in &r.diagnostics {
        let _ = writeln!(out, "note: {}", d);
    }
    out
}

pub fn scan_summary(scan: &AnnulusScan) -> String {
    let mut out = format!(
        "{}: {} levels, {} failed, classification {}\n",
        scan.system,
        scan.reports.len() + scan.failures.len(),
        scan.failures.len(),
        scan.classification
    );
    for c in &scan.critical_levels {
        let _ = writeln!(out, "critical level {} (+/- {:.1e})", float(c.level), c.error);
    }
    out
}

pub fn verify_summary(reports: &[VerificationReport]) -> String {
    let name_w = reports.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let sys_w = reports
        .iter()
        .map(|r| r.system.as_deref().unwrap_or("").len())
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(
            out,
            "{}  {:<sys_w$}  {:<name_w$}  max {:.3e}  tol {:.1e}  samples {} skipped {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.system.as_deref().unwrap_or(""),
            r.name,
            r.max_residual,
            r.tolerance,
            r.samples,
            r.skipped,
            sys_w = sys_w,
            name_w = name_w,
        );
        if r.samples == 0 {
            let _ = writeln!(out, "      {}", r.scale);
        }
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    let _ = writeln!(out, "{} checks, {} failed", reports.len(), failed);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_17_significant_digits() {
        assert_eq!(float(0.1), "1.0000000000000001e-1");
        assert_eq!(float(-2.0), "-2.0000000000000000e0");
        assert_eq!(float(f64::NAN), "NaN");
        let back: f64 = float(std::f64::consts::PI).parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }

    #[test]
    fn json_envelope_carries_version() {
        #[derive(Serialize)]
        struct B {
            x: u8,
        }
        let s = json("list", B { x: 3 });
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["command"], "list");
        assert_eq!(v["x"], 3);
    }
}
