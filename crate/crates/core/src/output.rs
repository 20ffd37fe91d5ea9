//! Text formats for experiment outputs. Reals are written with 17
//! significant digits in scientific notation, `.` as decimal separator,
//! LF line endings, so identical runs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::experiments::{DecompositionRow, DistComparison, RateReport};
use crate::model::{DeterministicPath, SamplePath};

pub fn fmt_real(v: f64) -> String {
    // -0.0 prints as 0.
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}

pub fn write_text(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

/// `t,x,y,dw`, with `dw` empty on the last row.
pub fn path_csv(path: &SamplePath) -> String {
    let mut out = String::from("t,x,y,dw\n");
    for i in 0..path.times.len() {
        let dw = path.dw.get(i).map(|v| fmt_real(*v)).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", fmt_real(path.times[i]), fmt_real(path.x[i]), fmt_real(path.y[i]), dw);
    }
    out
}

pub fn path_file_name(replicate: usize) -> String {
    format!("path_{replicate:06}.csv")
}

/// `t,x`
pub fn limit_csv(path: &DeterministicPath) -> String {
    let mut out = String::from("t,x\n");
    for (t, x) in path.times.iter().zip(&path.x) {
        let _ = writeln!(out, "{},{}", fmt_real(*t), fmt_real(*x));
    }
    out
}

/// `eps,sup_mse,ci,reps`
pub fn coupling_csv(report: &RateReport) -> String {
    let l = &report.ladder;
    let mut out = String::from("eps,sup_mse,ci,reps\n");
    for i in 0..l.eps_list.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_real(l.eps_list[i]),
            fmt_real(l.mse[i]),
            fmt_real(l.ci_halfwidth[i]),
            l.reps
        );
    }
    out
}

/// `eps,phi,sup_mse,ci,reps`
pub fn rates_csv(report: &RateReport) -> String {
    let l = &report.ladder;
    let mut out = String::from("eps,phi,sup_mse,ci,reps\n");
    for i in 0..l.eps_list.len() {
        let phi = l.phi.get(i).copied().unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_real(l.eps_list[i]),
            fmt_real(phi),
            fmt_real(l.mse[i]),
            fmt_real(l.ci_halfwidth[i]),
            l.reps
        );
    }
    out
}

/// `slope,intercept,r2,theory`
pub fn rate_fit_csv(report: &RateReport) -> String {
    format!(
        "slope,intercept,r2,theory\n{},{},{},{}\n",
        fmt_real(report.slope),
        fmt_real(report.intercept),
        fmt_real(report.r_squared),
        fmt_real(report.theory_exponent)
    )
}

/// `t,i1,i2,i3,mse`
pub fn decomp_csv(rows: &[DecompositionRow]) -> String {
    let mut out = String::from("t,i1,i2,i3,mse\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_real(r.t),
            fmt_real(r.i1),
            fmt_real(r.i2),
            fmt_real(r.i3),
            fmt_real(r.mse)
        );
    }
    out
}

/// `sample,value`; normalized samples are labelled `lhs` / `rhs`, the
/// unnormalized ones `lhs_raw` / `rhs_raw`.
pub fn distcmp_csv(cmp: &DistComparison) -> String {
    let mut out = String::from("sample,value\n");
    for (label, values) in
        [("lhs", &cmp.sample_lhs), ("rhs", &cmp.sample_rhs), ("lhs_raw", &cmp.raw_lhs), ("rhs_raw", &cmp.raw_rhs)]
    {
        for v in values {
            let _ = writeln!(out, "{label},{}", fmt_real(*v));
        }
    }
    out
}

/// Log-log plot of the ladder with the fitted line and a reference line of
/// the theoretical slope through the data's centroid.
pub fn loglog_svg(report: &RateReport, title: &str) -> String {
    let (w, h, pad) = (640.0, 480.0, 60.0);
    let lx: Vec<f64> = report.ladder.eps_list.iter().map(|e| e.log10()).collect();
    let ly: Vec<f64> = report.ladder.mse.iter().map(|m| m.log10()).collect();
    let bounds = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo).max(1e-9);
        (lo - 0.1 * span, hi + 0.1 * span)
    };
    let (x0, x1) = bounds(&lx);
    let (y0, y1) = bounds(&ly);
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let ln10 = std::f64::consts::LN_10;
    let fit = |x: f64| (report.intercept + report.slope * x * ln10) / ln10;
    let cx = lx.iter().sum::<f64>() / lx.len() as f64;
    let cy = ly.iter().sum::<f64>() / ly.len() as f64;
    let theory = |x: f64| cy + report.theory_exponent * (x - cx);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="30" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>"#,
        w / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{1}" y1="{0}" x2="{2}" y2="{0}" stroke="black"/><line x1="{1}" y1="{0}" x2="{1}" y2="{3}" stroke="black"/>"#,
        h - pad,
        pad,
        w - pad,
        pad
    );
    let line = |f: &dyn Fn(f64) -> f64, color: &str, dash: &str| {
        format!(
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="{color}" stroke-dasharray="{dash}"/>"#,
            px(x0),
            py(f(x0)),
            px(x1),
            py(f(x1))
        )
    };
    let _ = writeln!(svg, "{}", line(&fit, "steelblue", "none"));
    let _ = writeln!(svg, "{}", line(&theory, "firebrick", "6,4"));
    for (x, y) in lx.iter().zip(&ly) {
        let _ = writeln!(svg, r#"<circle cx="{:.3}" cy="{:.3}" r="4" fill="black"/>"#, px(*x), py(*y));
    }
    let _ = writeln!(
        svg,
        r#"<text x="{pad}" y="{}" font-family="sans-serif" font-size="12">log10 eps; fitted slope {:.4} (blue), theory {:.4} (red)</text>"#,
        h - 20.0,
        report.slope,
        report.theory_exponent
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_use_seventeen_significant_digits() {
        assert_eq!(fmt_real(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_real(-2.5), "-2.5000000000000000e0");
        assert_eq!(fmt_real(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_real(-0.0), fmt_real(0.0));
    }

    #[test]
    fn path_csv_leaves_last_dw_empty() {
        let p = SamplePath { times: vec![0.0, 1.0], x: vec![1.0, 2.0], dw: vec![0.5], y: vec![0.0, 0.0] };
        let csv = path_csv(&p);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x,y,dw");
        assert!(lines[2].ends_with(','));
        assert_eq!(path_file_name(7), "path_000007.csv");
    }
}
