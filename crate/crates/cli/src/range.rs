use std::fmt;
use std::str::FromStr;

/// `MIN:MAX:N`, N evenly spaced points including both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisRange {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.max
                } else {
                    self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeError(String);

impl fmt::Display for RangeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for RangeError {}

impl FromStr for AxisRange {
    type Err = RangeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [min, max, count] = parts[..] else {
            return Err(RangeError(format!("expected MIN:MAX:N, got `{s}`")));
        };
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| RangeError(format!("`{v}` is not a finite number")))
        };
        let (min, max) = (num(min)?, num(max)?);
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| RangeError(format!("`{count}` is not a point count")))?;
        if count == 0 {
            return Err(RangeError("point count must be at least 1".into()));
        }
        if min > max {
            return Err(RangeError(format!("MIN {min} exceeds MAX {max}")));
        }
        Ok(Self { min, max, count })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_spaces() {
        let r: AxisRange = "0:5:6".parse().unwrap();
        assert_eq!(r.points(), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let r: AxisRange = "2.5:2.5:1".parse().unwrap();
        assert_eq!(r.points(), vec![2.5]);
    }

    #[test]
    fn rejects_bad_ranges() {
        for bad in ["1:0:3", "0:1", "0:1:0", "a:1:2", "0:inf:2", "0:1:2:3"] {
            assert!(bad.parse::<AxisRange>().is_err(), "{bad}");
        }
    }
}
