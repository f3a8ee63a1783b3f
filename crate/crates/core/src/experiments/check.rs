//! Trend checks over finished reports, shared by `--check` and the tests.

use std::fmt;

use super::report::ExperimentReport;
use super::Variant;
use crate::actuator::ContactLocation;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    fn missing(name: &str, what: &str) -> Self {
        Self::new(name, false, format!("missing {what}"))
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

fn label(loc: ContactLocation, channels: usize) -> String {
    Variant {
        scenario: Some(loc),
        channels,
    }
    .to_string()
}

fn seed_mean_plane(r: &ExperimentReport, label: &str) -> Option<f64> {
    r.variant(label)?.rmse_plane.map(|m| m.mean)
}

fn seed_mean_abs(r: &ExperimentReport, label: &str) -> Option<f64> {
    r.variant(label)?.mean_abs_err.map(|m| m.mean)
}

/// Random amplitudes: EIT plane RMSE at most `max_ratio` times pressure-only.
pub fn check_e2(pressure: &ExperimentReport, eit: &ExperimentReport, max_ratio: f64) -> Check {
    const NAME: &str = "E2 pressure+EIT vs pressure-only";
    let Some(p) = seed_mean_plane(pressure, "pressure") else {
        return Check::missing(NAME, "pressure-only result");
    };
    let Some((label, e)) = eit
        .variants
        .iter()
        .find_map(|v| v.rmse_plane.map(|m| (v.variant.clone(), m.mean)))
    else {
        return Check::missing(NAME, "EIT result");
    };
    let ratio = e / p;
    Check::new(
        NAME,
        ratio <= max_ratio,
        format!("{label} {e:.3} mm / pressure {p:.3} mm = {ratio:.3} (limit {max_ratio})"),
    )
}

/// Constant amplitudes: every variant within `max_fraction` of the tip range.
pub fn check_e1(reports: &[&ExperimentReport], max_fraction: f64) -> Check {
    const NAME: &str = "E1 plane RMSE within tip range fraction";
    let mut parts = Vec::new();
    let mut ok = true;
    for r in reports {
        for v in &r.variants {
            match v.plane_fraction_of_range() {
                Some(f) => {
                    ok &= f <= max_fraction;
                    parts.push(format!("{} {:.2}%", v.variant, 100.0 * f));
                }
                None => {
                    ok = false;
                    parts.push(format!("{} missing", v.variant));
                }
            }
        }
    }
    if parts.is_empty() {
        return Check::missing(NAME, "results");
    }
    Check::new(NAME, ok, format!("{} (limit {:.0}%)", parts.join(", "), 100.0 * max_fraction))
}

/// Force: `many` channels no worse than `few` channels at every location.
pub fn check_e4_channels(r: &ExperimentReport, few: usize, many: usize) -> Check {
    const NAME: &str = "E4 more channels no worse at every location";
    let mut parts = Vec::new();
    let mut ok = true;
    for loc in &r.spec.scenarios {
        let l = loc.letter().to_ascii_uppercase();
        let a = seed_mean_abs(r, &label(*loc, few));
        let b = seed_mean_abs(r, &label(*loc, many));
        match (a, b) {
            (Some(a), Some(b)) => {
                ok &= b <= a;
                parts.push(format!("{l}: {many}ch {b:.2} vs {few}ch {a:.2} mN"));
            }
            _ => {
                ok = false;
                parts.push(format!("{l}: missing"));
            }
        }
    }
    if parts.is_empty() {
        return Check::missing(NAME, "locations");
    }
    Check::new(NAME, ok, parts.join(", "))
}

/// Force: the location nearest rest has the largest mean error, per channel count.
pub fn check_e4_snr(r: &ExperimentReport) -> Check {
    const NAME: &str = "E4 LocationA has the largest error";
    let mut parts = Vec::new();
    let mut ok = true;
    let counts = &r.spec.channel_counts;
    for &k in counts {
        let errs: Option<Vec<(ContactLocation, f64)>> = ContactLocation::ALL
            .iter()
            .map(|loc| seed_mean_abs(r, &label(*loc, k)).map(|e| (*loc, e)))
            .collect();
        let Some(errs) = errs else {
            ok = false;
            parts.push(format!("{k}ch: missing"));
            continue;
        };
        let a = errs[0].1;
        ok &= errs[1..].iter().all(|&(_, e)| a > e);
        let shown: Vec<String> = errs.iter().map(|(l, e)| format!("{}={e:.2}", l.letter().to_ascii_uppercase())).collect();
        parts.push(format!("{k}ch {}", shown.join("/")));
    }
    if parts.is_empty() {
        return Check::missing(NAME, "channel counts");
    }
    Check::new(NAME, ok, format!("{} mN", parts.join(", ")))
}

/// Every trained model ended with a lower training loss than it started with.
pub fn check_loss_decreased(reports: &[&ExperimentReport]) -> Check {
    const NAME: &str = "training loss decreased";
    let mut n = 0;
    let mut bad = Vec::new();
    for r in reports {
        for v in &r.variants {
            for m in &v.per_seed {
                n += 1;
                match (m.initial_train_loss, m.final_train_loss) {
                    (Some(a), Some(b)) if b < a => {}
                    _ => bad.push(format!("{} seed {}", v.variant, m.seed)),
                }
            }
        }
    }
    if n == 0 {
        return Check::missing(NAME, "trained models");
    }
    if bad.is_empty() {
        Check::new(NAME, true, format!("{n} of {n} models"))
    } else {
        Check::new(NAME, false, format!("not decreased: {}", bad.join(", ")))
    }
}
