//! CSV and manifest writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::sim::config::ExperimentKind;
use crate::sim::experiment::ExperimentResult;

/// Decimal (non-exponent) rendering with 9 significant digits.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding may carry into a new leading digit (9.9999999996 -> 10.00000000).
    let digits = s.chars().filter(|c| c.is_ascii_digit()).skip_while(|&c| c == '0').count();
    if digits > 9 && decimals > 0 {
        let decimals = decimals - 1;
        format!("{x:.decimals$}")
    } else {
        s
    }
}

pub fn csv_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Convergence => "convergence.csv",
        ExperimentKind::ChannelMse => "channel_mse.csv",
        ExperimentKind::SweepEbn0 => "sweep_ebn0.csv",
        ExperimentKind::SweepUsers => "sweep_users.csv",
    }
}

pub fn render_csv(result: &ExperimentResult) -> String {
    let mut out = String::new();
    match result.config.experiment {
        ExperimentKind::Convergence | ExperimentKind::ChannelMse => {
            let mse = result.config.experiment == ExperimentKind::ChannelMse;
            out.push_str(if mse {
                "symbol_index,receiver,mse,stderr\n"
            } else {
                "symbol_index,receiver,ber,stderr\n"
            });
            let cell = &result.cells[0];
            for rx in &cell.receivers {
                let (mean, se) = if mse {
                    (&rx.mse_curve, &rx.mse_curve_stderr)
                } else {
                    (&rx.ber_curve, &rx.ber_curve_stderr)
                };
                for (i, (m, s)) in mean.iter().zip(se).enumerate() {
                    let _ = writeln!(out, "{},{},{},{}", i + 1, rx.kind, fmt_sig9(*m), fmt_sig9(*s));
                }
            }
        }
        ExperimentKind::SweepEbn0 | ExperimentKind::SweepUsers => {
            out.push_str("x_value,receiver,ber,stderr,trials\n");
            for cell in &result.cells {
                for rx in &cell.receivers {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        fmt_sig9(cell.x_value),
                        rx.kind,
                        fmt_sig9(rx.ber_final),
                        fmt_sig9(rx.ber_stderr),
                        rx.trial_ber.len()
                    );
                }
            }
        }
    }
    out
}

pub fn render_manifest(result: &ExperimentResult) -> String {
    let cfg = &result.config;
    let mut out = String::new();
    let _ = writeln!(out, "experiment = {}", cfg.experiment);
    let _ = writeln!(out, "master_seed = {}", cfg.master_seed);
    let _ = writeln!(out, "output = {}", csv_name(cfg.experiment));
    out.push_str("\n# chosen step sizes: x_value receiver mu_w mu_lambda mu_h pilot_ber\n");
    for cell in &result.cells {
        for rx in &cell.receivers {
            let _ = writeln!(
                out,
                "steps {} {} {} {} {} {}",
                fmt_sig9(cell.x_value),
                rx.kind,
                fmt_sig9(rx.steps.mu_w),
                fmt_sig9(rx.steps.mu_lambda),
                fmt_sig9(rx.steps.mu_h),
                fmt_sig9(rx.pilot_ber)
            );
        }
    }
    out.push_str("\n# configuration\n");
    out.push_str(&cfg.to_text());
    out
}

/// Writes the experiment CSV and `manifest.txt` into `dir`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(csv_name(result.config.experiment));
    fs::write(&csv, render_csv(result))?;
    let manifest = dir.join("manifest.txt");
    fs::write(&manifest, render_manifest(result))?;
    Ok(vec![csv, manifest])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(1.0), "1.00000000");
        assert_eq!(fmt_sig9(0.0123456789123), "0.0123456789");
        assert_eq!(fmt_sig9(12.0), "12.0000000");
        assert_eq!(fmt_sig9(-0.5), "-0.500000000");
        assert_eq!(fmt_sig9(123456789012.0), "123456789012");
        assert_eq!(fmt_sig9(9.9999999996), "10.0000000");
        assert_eq!(fmt_sig9(f64::NAN), "NaN");
    }
}
