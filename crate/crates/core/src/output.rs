//! Provenance headers and CSV formatting shared by the command-line tool.

use serde_json::{json, Value};

pub const TOOL: &str = "cascade-tracer";

/// `# cascade-tracer <version> map=<name> <flags>` for CSV outputs.
pub fn csv_header(map: &str, flags: &[(String, String)]) -> String {
    let mut s = format!("# {TOOL} {} map={map}", env!("CARGO_PKG_VERSION"));
    for (k, v) in flags {
        s.push_str(&format!(" {k}={v}"));
    }
    s
}

/// Header object for JSON and JSON-lines outputs.
pub fn json_header(map: &str, flags: &[(String, String)]) -> Value {
    let f: serde_json::Map<String, Value> = flags.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    json!({"tool": TOOL, "version": env!("CARGO_PKG_VERSION"), "map": map, "flags": f})
}

/// Seventeen significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02e23] {
            assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn header_records_flags() {
        let h = csv_header("logistic", &[("steps".into(), "3".into())]);
        assert!(h.starts_with("# cascade-tracer "));
        assert!(h.ends_with("map=logistic steps=3"));
    }
}
