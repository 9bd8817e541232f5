use std::fmt::Write as _;

use irrcorr::spectrum::{CorrelationRecord, LimitEstimate};

use crate::config::CommandConfig;

/// Significant digits of every float written to CSV.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Format `x` with 12 significant digits, `%g` style: fixed notation for
/// moderate exponents, scientific otherwise, trailing zeros removed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

pub fn comment_header(config: &CommandConfig, out: &mut String) {
    for (key, value) in config.header_pairs() {
        let _ = writeln!(out, "# {key}={value}");
    }
}

pub fn csv_columns(n: usize) -> String {
    let mut cols = vec!["k".to_string(), "p0".into(), "S_bits".into(), "C_T_bits".into()];
    cols.extend((2..=n).map(|m| format!("C_{m}_bits")));
    cols.extend(["max_residual".into(), "total_iterations".into(), "flags".into()]);
    cols.join(",")
}

pub fn csv_row(r: &CorrelationRecord) -> String {
    let mut cells = vec![
        r.k.to_string(),
        fmt_sig(r.p0),
        fmt_sig(r.entropy_bits),
        fmt_sig(r.total_bits),
    ];
    cells.extend((2..=r.n).map(|m| fmt_opt(r.order(m))));
    cells.push(fmt_sig(r.max_residual));
    cells.push(r.iterations_total.to_string());
    cells.push(r.flag_string());
    cells.join(",")
}

pub fn limit_comment(e: &LimitEstimate) -> String {
    let name = match e.order {
        Some(m) => format!("C_{m}"),
        None => "C_T".into(),
    };
    format!(
        "# limit {name}: raw_p0={} raw_bits={} linear_estimate_bits={}",
        fmt_sig(e.raw_p0),
        fmt_sig(e.raw_bits),
        fmt_sig(e.estimate_bits)
    )
}
