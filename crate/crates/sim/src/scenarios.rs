//! Scripted traces used as golden fixtures.

use gave_core::protocol::Control;

use crate::trace::{TraceLine, TraceSample};

const CENTER: (f64, f64) = (0.56, 0.51);
const DOWN: (f64, f64) = (0.56, 0.80);
const LEFT: (f64, f64) = (0.80, 0.51);

/// Appends 30 Hz samples at `at` from sample `k` up to (excluding) time
/// `until`, advancing `k`.
fn hold(lines: &mut Vec<TraceLine>, k: &mut u64, until: u64, at: (f64, f64)) {
    loop {
        let t = (*k * 1000 + 15) / 30;
        if t >= until {
            return;
        }
        lines.push(TraceLine::Sample(TraceSample {
            t_ms: t,
            h: at.0,
            v: at.1,
            valid: true,
            blink: false,
        }));
        *k += 1;
    }
}

/// Kiosk use: calibrate on the screen center, then pick the chicken
/// drumstick by looking down until the lower cluster opens, back to the
/// middle, then left onto the drumstick tile.
pub fn walkthrough() -> Vec<TraceLine> {
    let mut lines = vec![TraceLine::Control(Control::StartCalibration {})];
    let mut k = 0;
    hold(&mut lines, &mut k, 2500, CENTER);
    hold(&mut lines, &mut k, 3600, DOWN);
    hold(&mut lines, &mut k, 4100, CENTER);
    hold(&mut lines, &mut k, 5200, LEFT);
    hold(&mut lines, &mut k, 5600, CENTER);
    lines
}

/// A one-trial experiment with the drumstick as target: the lower cluster
/// opens as in [`walkthrough`], then the user keeps looking at the middle
/// until the item stage times out.
pub fn item_timeout() -> Vec<TraceLine> {
    let mut lines = vec![
        TraceLine::Control(Control::StartExperiment {
            targets: vec!["chicken_drumstick".to_owned()],
        }),
        TraceLine::Control(Control::StartCalibration {}),
    ];
    let mut k = 0;
    hold(&mut lines, &mut k, 2500, CENTER);
    hold(&mut lines, &mut k, 3600, DOWN);
    hold(&mut lines, &mut k, 3600 + 10_600, CENTER);
    lines
}
