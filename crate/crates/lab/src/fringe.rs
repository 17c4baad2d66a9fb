//! Peak and angle extraction from a detector distribution.

use std::fmt;

use crate::detector::DetectorRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub bin: usize,
    pub angle_deg: f64,
    pub height: f64,
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FringeReport {
    pub peaks: Vec<Peak>,
    pub central: Option<Peak>,
    /// The stronger of the two peaks adjacent to the central one.
    pub first_order: Option<Peak>,
    /// (d, arcsin(λ/d)) per candidate; None when λ > d.
    pub predictions: Vec<(f64, Option<f64>)>,
    /// [arcsin(λ/d_max), arcsin(λ/d_min)] in degrees.
    pub band: Option<(f64, f64)>,
    pub expected_deg: f64,
    pub tolerance_deg: f64,
    pub threshold: f64,
    pub diagnostic: Option<String>,
}

impl FringeReport {
    pub fn first_order_angle(&self) -> Option<f64> {
        self.first_order.map(|p| p.angle_deg.abs())
    }

    pub fn in_band(&self) -> bool {
        match (self.first_order_angle(), self.band) {
            (Some(a), Some((lo, hi))) => a >= lo && a <= hi,
            _ => false,
        }
    }

    pub fn near_expected(&self) -> bool {
        self.first_order_angle().is_some_and(|a| (a - self.expected_deg).abs() <= self.tolerance_deg)
    }

    pub fn pass(&self) -> bool {
        self.in_band() && self.near_expected()
    }
}

/// Local maxima whose topographic prominence reaches `threshold · max`.
pub fn find_peaks(values: &[f64], threshold: f64) -> Vec<(usize, f64)> {
    let n = values.len();
    let top = values.iter().cloned().fold(0.0, f64::max);
    if n < 3 || top <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        // Plateaus count once, at their left end.
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        let left_lower = i == 0 || values[i - 1] < values[i];
        let right_lower = j + 1 == n || values[j + 1] < values[i];
        if left_lower && right_lower && values[i] > 0.0 {
            let v = values[i];
            let mut lmin = v;
            for k in (0..i).rev() {
                if values[k] > v {
                    break;
                }
                lmin = lmin.min(values[k]);
            }
            let mut rmin = v;
            for &x in &values[j + 1..] {
                if x > v {
                    break;
                }
                rmin = rmin.min(x);
            }
            // At the edge of the record the missing side does not bound the peak.
            let base = match (i == 0, j + 1 == n) {
                (true, true) => 0.0,
                (true, false) => rmin,
                (false, true) => lmin,
                (false, false) => lmin.max(rmin),
            };
            let prom = v - base;
            if prom >= threshold * top {
                out.push((i, prom));
            }
        }
        i = j + 1;
    }
    out
}

pub fn predicted_angles(wavelength: f64, d: &[f64]) -> Vec<(f64, Option<f64>)> {
    d.iter().map(|&d| (d, (wavelength <= d).then(|| (wavelength / d).asin().to_degrees()))).collect()
}

pub fn fringe_analysis(
    record: &DetectorRecord,
    distribution: &[f64],
    wavelength: f64,
    d_candidates: &[f64],
    threshold: f64,
    expected_deg: f64,
    tolerance_deg: f64,
) -> FringeReport {
    let peaks: Vec<Peak> = find_peaks(distribution, threshold)
        .into_iter()
        .map(|(bin, prominence)| Peak { bin, angle_deg: record.angle_deg(bin), height: distribution[bin], prominence })
        .collect();
    let predictions = predicted_angles(wavelength, d_candidates);
    let angles: Vec<f64> = predictions.iter().filter_map(|p| p.1).collect();
    let band = if angles.is_empty() {
        None
    } else {
        Some((angles.iter().cloned().fold(f64::INFINITY, f64::min), angles.iter().cloned().fold(f64::NEG_INFINITY, f64::max)))
    };
    let mut report = FringeReport {
        peaks: peaks.clone(),
        central: None,
        first_order: None,
        predictions,
        band,
        expected_deg,
        tolerance_deg,
        threshold,
        diagnostic: None,
    };
    if distribution.iter().all(|&v| v == 0.0) {
        report.diagnostic = Some("empty detector record".into());
        return report;
    }
    if peaks.is_empty() {
        report.diagnostic = Some(format!("no peak reaches {:.0}% prominence", 100.0 * threshold));
        return report;
    }
    let ci = (0..peaks.len())
        .min_by(|&a, &b| peaks[a].angle_deg.abs().total_cmp(&peaks[b].angle_deg.abs()))
        .expect("non-empty");
    report.central = Some(peaks[ci]);
    let neighbours = [ci.checked_sub(1), (ci + 1 < peaks.len()).then_some(ci + 1)];
    report.first_order = neighbours.into_iter().flatten().map(|k| peaks[k]).max_by(|a, b| a.height.total_cmp(&b.height));
    if report.first_order.is_none() {
        report.diagnostic = Some("only one peak; no first-order maximum".into());
    }
    report
}

impl fmt::Display for FringeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "peak threshold: {:.1}% of maximum", 100.0 * self.threshold)?;
        writeln!(f, "peaks (angle deg, height, prominence):")?;
        for p in &self.peaks {
            writeln!(f, "  {:+8.2}  {:.5}  {:.5}", p.angle_deg, p.height, p.prominence)?;
        }
        for (d, a) in &self.predictions {
            match a {
                Some(a) => writeln!(f, "arcsin(lambda/d) for d = {d:.4} bohr: {a:.2} deg")?,
                None => writeln!(f, "arcsin(lambda/d) for d = {d:.4} bohr: undefined (lambda > d)")?,
            }
        }
        if let Some((lo, hi)) = self.band {
            writeln!(f, "predicted band: [{lo:.2}, {hi:.2}] deg (quoted elsewhere as 20 and 47 deg)")?;
        }
        if let Some(c) = self.central {
            writeln!(f, "central peak: {:+.2} deg", c.angle_deg)?;
        }
        match self.first_order_angle() {
            Some(a) => {
                writeln!(f, "first-order peak: {a:.2} deg")?;
                writeln!(f, "inside band: {}", if self.in_band() { "yes" } else { "no" })?;
                writeln!(
                    f,
                    "within {:.1} deg of {:.1} deg: {}",
                    self.tolerance_deg,
                    self.expected_deg,
                    if self.near_expected() { "PASS" } else { "FAIL" }
                )?;
            }
            None => writeln!(f, "first-order peak: none")?,
        }
        if let Some(d) = &self.diagnostic {
            writeln!(f, "diagnostic: {d}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DetectorSetup;

    fn record(bins: usize) -> DetectorRecord {
        DetectorRecord::new(
            &DetectorSetup {
                plane: 10.0,
                reference: 0.0,
                bins,
                lo: -20.0,
                hi: 20.0,
                prominence: 0.05,
                wavelength: 4.197,
                d_candidates: vec![5.594, 15.004],
                expected_deg: 30.0,
                tolerance_deg: 5.0,
            },
            0.0,
        )
    }

    #[test]
    fn arcsin_band() {
        let p = predicted_angles(4.197, &[5.594, 15.004]);
        assert!((p[0].1.unwrap() - 48.6).abs() < 0.1);
        assert!((p[1].1.unwrap() - 16.2).abs() < 0.1);
        assert_eq!(predicted_angles(2.0, &[1.0])[0].1, None);
    }

    #[test]
    fn small_wiggles_are_ignored() {
        let v = [0.0, 1.0, 0.98, 0.99, 0.5, 0.0, 0.6, 0.1];
        let peaks: Vec<usize> = find_peaks(&v, 0.05).into_iter().map(|p| p.0).collect();
        assert_eq!(peaks, vec![1, 6]);
    }

    #[test]
    fn symmetric_record_gives_symmetric_peaks() {
        let r = record(41);
        let dist: Vec<f64> = (0..41)
            .map(|b| {
                let th = r.angle_deg(b).to_radians();
                (3.0 * th).cos().powi(2) * (-th * th).exp()
            })
            .collect();
        let rep = fringe_analysis(&r, &dist, 4.197, &[5.594, 15.004], 0.05, 30.0, 5.0);
        let angles: Vec<f64> = rep.peaks.iter().map(|p| p.angle_deg).collect();
        assert!(angles.len() >= 3);
        for a in &angles {
            assert!(angles.iter().any(|b| (a + b).abs() < r.bin_width()));
        }
        assert!(rep.central.unwrap().angle_deg.abs() < 1e-9);
        assert!(rep.first_order.is_some());
    }

    #[test]
    fn empty_record_gives_a_diagnostic() {
        let r = record(20);
        let rep = fringe_analysis(&r, &r.count_distribution(), 4.197, &[5.594], 0.05, 30.0, 5.0);
        assert!(rep.diagnostic.is_some());
        assert!(!rep.pass());
        assert!(rep.to_string().contains("diagnostic"));
    }
}
