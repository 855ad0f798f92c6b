//! Deterministic structured-text reports.
//!
//! One document per run, brace-and-key object notation with two-space
//! indentation, arrays in run order, and every floating-point number printed
//! with 17 significant digits. Rendering the same report twice yields the
//! same bytes, and the numbers round-trip exactly.

use crate::localization::VerificationReport;

/// 17 significant digits; enough to reproduce the bit pattern on parse.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "\"nan\"".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "\"inf\"".into() } else { "\"-inf\"".into() };
    }
    format!("{x:.16e}")
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

struct Writer {
    buf: String,
    indent: usize,
}

impl Writer {
    fn new() -> Writer {
        Writer { buf: String::new(), indent: 0 }
    }

    fn line(&mut self, s: &str) {
        for _ in 0..self.indent {
            self.buf.push_str("  ");
        }
        self.buf.push_str(s);
        self.buf.push('\n');
    }

    fn open(&mut self, key: Option<&str>, bracket: char) {
        match key {
            Some(k) => self.line(&format!("\"{}\": {}", escape(k), bracket)),
            None => self.line(&bracket.to_string()),
        }
        self.indent += 1;
    }

    fn close(&mut self, bracket: char, trailing_comma: bool) {
        self.indent -= 1;
        self.line(&format!("{}{}", bracket, if trailing_comma { "," } else { "" }));
    }

    fn field_str(&mut self, key: &str, value: &str, comma: bool) {
        self.line(&format!(
            "\"{}\": \"{}\"{}",
            escape(key),
            escape(value),
            if comma { "," } else { "" }
        ));
    }

    fn field_num(&mut self, key: &str, value: f64, comma: bool) {
        self.line(&format!("\"{}\": {}{}", escape(key), fmt_f64(value), if comma { "," } else { "" }));
    }

    fn field_int(&mut self, key: &str, value: u64, comma: bool) {
        self.line(&format!("\"{}\": {}{}", escape(key), value, if comma { "," } else { "" }));
    }

    fn field_raw(&mut self, key: &str, raw: &str, comma: bool) {
        self.line(&format!("\"{}\": {}{}", escape(key), raw, if comma { "," } else { "" }));
    }
}

fn num_array(values: &[f64]) -> String {
    let inner: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
    format!("[{}]", inner.join(", "))
}

/// Render the full report document.
pub fn render(report: &VerificationReport) -> String {
    let mut w = Writer::new();
    w.open(None, '{');
    w.field_str("model", &report.model, true);

    w.open(Some("config"), '{');
    let n = report.config_lines.len();
    for (i, (k, v)) in report.config_lines.iter().enumerate() {
        w.field_str(k, v, i + 1 < n);
    }
    w.close('}', true);

    match &report.lhs {
        Some(l) => {
            w.open(Some("lhs"), '{');
            w.field_num("value", l.value, true);
            w.field_num("error_estimate", l.error_estimate, true);
            w.field_int("nodes_used", l.nodes_used as u64, false);
            w.close('}', true);
        }
        None => w.field_raw("lhs", "null", true),
    }
    match report.rhs {
        Some(r) => w.field_num("rhs", r, true),
        None => w.field_raw("rhs", "null", true),
    }

    w.open(Some("fixed_points"), '[');
    let n = report.fixed_points.len();
    for (i, fp) in report.fixed_points.iter().enumerate() {
        w.open(None, '{');
        w.field_str("chart", &fp.chart, true);
        w.field_raw("coords", &num_array(&fp.coords), true);
        w.field_raw("lambdas", &num_array(&fp.lambdas), true);
        w.field_num("sqrt_det", fp.sqrt_det, true);
        w.field_num("alpha0", fp.alpha0, true);
        w.field_num("contribution", fp.contribution, false);
        w.close('}', i + 1 < n);
    }
    w.close(']', true);

    w.open(Some("deformation"), '[');
    let n = report.deformation.len();
    for (i, row) in report.deformation.iter().enumerate() {
        w.line(&format!(
            "{{\"R\": {}, \"I\": {}, \"residual\": {}}}{}",
            fmt_f64(row.r),
            fmt_f64(row.value),
            fmt_f64(row.residual),
            if i + 1 < n { "," } else { "" }
        ));
    }
    w.close(']', true);

    w.open(Some("tail"), '[');
    let n = report.tail.len();
    for (i, row) in report.tail.iter().enumerate() {
        w.line(&format!(
            "{{\"R\": {}, \"T\": {}}}{}",
            fmt_f64(row.r),
            fmt_f64(row.value),
            if i + 1 < n { "," } else { "" }
        ));
    }
    w.close(']', true);

    w.open(Some("limits"), '[');
    let n = report.limits.len();
    for (i, series) in report.limits.iter().enumerate() {
        w.open(None, '{');
        w.field_str("chart", &series.chart, true);
        w.field_num("target", series.target, true);
        w.open(Some("rows"), '[');
        let m = series.rows.len();
        for (j, (r, c)) in series.rows.iter().enumerate() {
            w.line(&format!(
                "{{\"R\": {}, \"C\": {}}}{}",
                fmt_f64(*r),
                fmt_f64(*c),
                if j + 1 < m { "," } else { "" }
            ));
        }
        w.close(']', false);
        w.close('}', i + 1 < n);
    }
    w.close(']', true);

    w.open(Some("checks"), '{');
    let n = report.checks.len();
    for (i, c) in report.checks.iter().enumerate() {
        let pass = match c.pass {
            Some(true) => "true",
            Some(false) => "false",
            None => "null",
        };
        w.field_raw(
            &c.name,
            &format!(
                "{{\"value\": {}, \"tolerance\": {}, \"pass\": {}}}",
                fmt_f64(c.value),
                fmt_f64(c.tolerance),
                pass
            ),
            i + 1 < n,
        );
    }
    w.close('}', true);

    w.field_int("seed", report.seed, false);
    w.close('}', false);
    w.buf
}
