/// Inclusive `start:stop:step` range.
#[derive(Clone, Debug, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    /// `start, start + step, ...` up to `stop`, with slack for rounding.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

pub fn parse_range(s: &str) -> Result<Range, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| format!("expected start:stop:step, {e}"))?;
    let [start, stop, step] = nums[..] else {
        return Err(format!(
            "expected start:stop:step, got {} fields",
            parts.len()
        ));
    };
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err("range bounds must be finite".into());
    }
    if !(step > 0.0) {
        return Err(format!("step must be positive, got {step}"));
    }
    if start > stop {
        return Err(format!("empty range: start {start} exceeds stop {stop}"));
    }
    Ok(Range { start, stop, step })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inclusive_values() {
        let r = parse_range("0.1:1.0:0.1").unwrap();
        let v = r.values();
        assert_eq!(v.len(), 10);
        assert!((v[9] - 1.0).abs() < 1e-12);
        assert_eq!(parse_range("2:2:1").unwrap().values(), vec![2.0]);
        assert_eq!(parse_range("-1:1:0.5").unwrap().values().len(), 5);
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(parse_range("1:0:0.1").unwrap_err().contains("empty"));
        assert!(parse_range("0:1:0").is_err());
        assert!(parse_range("0:1").is_err());
        assert!(parse_range("a:1:0.1").is_err());
    }
}
