//! Plain-text outputs: profile, sweep and category CSVs plus the sweep
//! summary. Floats are written with 17 significant digits (`%.17g`), which
//! round-trips every `f64`.

use std::collections::BTreeMap;
use std::io::{self, Write};

use crate::regression::{Boundary, CategoryReport, SweepResult};

/// `%.17g`-style formatting: 17 significant digits, trailing zeros trimmed,
/// scientific notation outside `1e-5 <= |x| < 1e17`.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if negative { "-" } else { "" };

    if !(-5..17).contains(&exp) {
        let m = trim_fraction(&format!("{}.{}", &digits[..1], &digits[1..]));
        let esign = if exp < 0 { '-' } else { '+' };
        return format!("{sign}{m}e{esign}{:02}", exp.abs());
    }
    let body = if exp >= 0 {
        let int_len = exp as usize + 1;
        format!("{}.{}", &digits[..int_len], &digits[int_len..])
    } else {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    };
    format!("{sign}{}", trim_fraction(&body))
}

fn trim_fraction(s: &str) -> String {
    if !s.contains('.') {
        return s.to_owned();
    }
    s.trim_end_matches('0').trim_end_matches('.').to_owned()
}

pub fn write_profile_csv<W: Write>(mut w: W, profile: &[(f64, f64)]) -> io::Result<()> {
    writeln!(w, "d,visibility")?;
    for &(d, v) in profile {
        writeln!(w, "{},{}", fmt_g17(d), fmt_g17(v))?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(mut w: W, sweep: &SweepResult) -> io::Result<()> {
    writeln!(w, "d,r2,n")?;
    for p in &sweep.curve {
        writeln!(w, "{},{},{}", fmt_g17(p.d), fmt_g17(p.r2), p.n)?;
    }
    Ok(())
}

/// `d,r2` only, for plotting.
pub fn write_r2_curve_csv<W: Write>(mut w: W, sweep: &SweepResult) -> io::Result<()> {
    writeln!(w, "d,r2")?;
    for p in &sweep.curve {
        writeln!(w, "{},{}", fmt_g17(p.d), fmt_g17(p.r2))?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub fn write_category_csv<W: Write>(mut w: W, reports: &[CategoryReport]) -> io::Result<()> {
    writeln!(w, "category,r2_max,d_max,n_topics,boundary")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{}",
            csv_field(&r.category),
            fmt_g17(r.r2_max),
            fmt_g17(r.d_max),
            r.n_topics,
            r.boundary
        )?;
    }
    Ok(())
}

/// Headline numbers of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub d_max: f64,
    pub r2_max: f64,
    pub boundary: Boundary,
    pub n: usize,
    pub grid_spec: String,
}

impl SweepSummary {
    pub fn new(sweep: &SweepResult, grid_spec: &str) -> Self {
        SweepSummary {
            d_max: sweep.d_max,
            r2_max: sweep.r2_max,
            boundary: sweep.boundary,
            n: sweep.n,
            grid_spec: grid_spec.to_owned(),
        }
    }

    /// `key=value` lines in a fixed order.
    pub fn to_text(&self) -> String {
        format!(
            "d_max={}\nr2_max={}\nboundary={}\nn={}\ngrid_spec={}\n",
            fmt_g17(self.d_max),
            fmt_g17(self.r2_max),
            self.boundary,
            self.n,
            self.grid_spec
        )
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let fields: BTreeMap<&str, &str> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split_once('=').ok_or_else(|| format!("bad summary line {l:?}")))
            .collect::<Result<_, _>>()?;
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| format!("missing field {k}"));
        let num = |k: &str| -> Result<f64, String> { get(k)?.parse().map_err(|_| format!("bad {k}")) };
        Ok(SweepSummary {
            d_max: num("d_max")?,
            r2_max: num("r2_max")?,
            boundary: get("boundary")?.parse()?,
            n: get("n")?.parse().map_err(|_| "bad n".to_string())?,
            grid_spec: get("grid_spec")?.to_owned(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::SweepPoint;
    use proptest::prelude::*;

    #[test]
    fn g17_examples() {
        assert_eq!(fmt_g17(3.0), "3");
        assert_eq!(fmt_g17(0.0), "0");
        assert_eq!(fmt_g17(0.015), "0.014999999999999999");
        assert_eq!(fmt_g17(0.5), "0.5");
        assert_eq!(fmt_g17(-2.25), "-2.25");
        assert_eq!(fmt_g17(1e-7), "9.9999999999999995e-08");
        assert_eq!(fmt_g17(1e20), "1e+20");
        assert_eq!(fmt_g17(123456.0), "123456");
        assert_eq!(fmt_g17(56.0 / 300.0), "0.18666666666666668");
    }

    proptest! {
        #[test]
        fn g17_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let s = fmt_g17(x);
            prop_assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn summary_round_trips() {
        let sweep = SweepResult::from_curve(vec![
            SweepPoint { d: 0.0, r2: 0.2, n: 10 },
            SweepPoint { d: 0.5, r2: 0.4, n: 10 },
            SweepPoint { d: 1.0, r2: 0.3, n: 10 },
        ])
        .unwrap();
        let s = SweepSummary::new(&sweep, "0:1:0.5");
        let text = s.to_text();
        assert_eq!(text, "d_max=0.5\nr2_max=0.40000000000000002\nboundary=interior\nn=10\ngrid_spec=0:1:0.5\n");
        assert_eq!(SweepSummary::parse(&text).unwrap(), s);
    }

    #[test]
    fn category_csv_quotes_labels() {
        let mut out = Vec::new();
        let rows = vec![CategoryReport {
            category: "film, tv".into(),
            r2_max: 0.5,
            d_max: 1.0,
            n_topics: 40,
            boundary: Boundary::AtUpperEdge,
        }];
        write_category_csv(&mut out, &rows).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "category,r2_max,d_max,n_topics,boundary\n\"film, tv\",0.5,1,40,at_upper_edge\n"
        );
    }
}
