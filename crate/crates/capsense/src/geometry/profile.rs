use serde::{Deserialize, Serialize};

use super::harmonics::RealHarmonic;
use crate::error::{Error, Result};
use crate::jet::Real;

/// Closed-form perturbation amplitude `h`, defined on ambient space and
/// restricted to the surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    Constant { value: f64 },
    Coordinate { axis: usize, scale: f64 },
    Harmonic { l: usize, m: i32, amplitude: f64 },
    Bump { center: [f64; 3], width: f64, amplitude: f64 },
}

impl Profile {
    pub fn one() -> Self {
        Profile::Constant { value: 1.0 }
    }

    pub fn y(l: usize, m: i32) -> Self {
        Profile::Harmonic { l, m, amplitude: 1.0 }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Zero => true,
            Profile::Constant { value } => *value == 0.0,
            Profile::Coordinate { scale, .. } => *scale == 0.0,
            Profile::Harmonic { amplitude, .. } | Profile::Bump { amplitude, .. } => *amplitude == 0.0,
        }
    }

    /// Sign of `h` when it is known to be one-signed: `Some(1)`, `Some(-1)`, else `None`.
    pub fn definite_sign(&self) -> Option<i32> {
        let s = match self {
            Profile::Constant { value } => *value,
            Profile::Bump { amplitude, .. } => *amplitude,
            Profile::Harmonic { l: 0, amplitude, .. } => *amplitude,
            _ => return None,
        };
        if s > 0.0 {
            Some(1)
        } else if s < 0.0 {
            Some(-1)
        } else {
            None
        }
    }

    pub fn eval<T: Real>(&self, x: [T; 3]) -> T {
        match self {
            Profile::Zero => T::cst(0.0),
            Profile::Constant { value } => T::cst(*value),
            Profile::Coordinate { axis, scale } => x[*axis] * *scale,
            Profile::Harmonic { l, m, amplitude } => {
                let y = RealHarmonic::new(*l, *m).expect("validated harmonic indices");
                y.eval(x) * *amplitude
            }
            Profile::Bump { center, width, amplitude } => {
                let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                (r2 * (-0.5 / (width * width))).exp() * *amplitude
            }
        }
    }

    /// Parse `name[:p1,p2,...]`: `zero`, `one`, `const:c`, `x`/`y`/`z[:scale]`,
    /// `Ylm` shorthand such as `Y20`, `ylm:l,m[,amp]`, `bump:cx,cy,cz,width[,amp]`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidProfile(format!("{spec}: {msg}"));
        let (name, args) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), parse_numbers(a).map_err(|e| bad(&e))?),
            None => (spec.trim(), vec![]),
        };
        let lower = name.to_ascii_lowercase();
        let profile = match lower.as_str() {
            "zero" | "0" => {
                expect_len(&args, 0, 0).map_err(|e| bad(&e))?;
                Profile::Zero
            }
            "one" | "1" => {
                expect_len(&args, 0, 0).map_err(|e| bad(&e))?;
                Profile::one()
            }
            "const" | "constant" => {
                expect_len(&args, 1, 1).map_err(|e| bad(&e))?;
                Profile::Constant { value: args[0] }
            }
            "x" | "y" | "z" => {
                expect_len(&args, 0, 1).map_err(|e| bad(&e))?;
                let axis = (lower.as_bytes()[0] - b'x') as usize;
                Profile::Coordinate { axis, scale: args.first().copied().unwrap_or(1.0) }
            }
            "ylm" => {
                expect_len(&args, 2, 3).map_err(|e| bad(&e))?;
                let (l, m) = harmonic_indices(args[0], args[1]).map_err(|e| bad(&e))?;
                Profile::Harmonic { l, m, amplitude: args.get(2).copied().unwrap_or(1.0) }
            }
            "bump" => {
                expect_len(&args, 4, 5).map_err(|e| bad(&e))?;
                if args[3] <= 0.0 {
                    return Err(bad("width must be positive"));
                }
                Profile::Bump {
                    center: [args[0], args[1], args[2]],
                    width: args[3],
                    amplitude: args.get(4).copied().unwrap_or(1.0),
                }
            }
            _ if lower.len() == 3 && lower.starts_with('y') => {
                let d: Vec<u32> = lower[1..].chars().filter_map(|c| c.to_digit(10)).collect();
                if d.len() != 2 {
                    return Err(bad("unknown profile"));
                }
                expect_len(&args, 0, 1).map_err(|e| bad(&e))?;
                let (l, m) = harmonic_indices(d[0] as f64, d[1] as f64).map_err(|e| bad(&e))?;
                Profile::Harmonic { l, m, amplitude: args.first().copied().unwrap_or(1.0) }
            }
            _ => return Err(bad("unknown profile")),
        };
        if args.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        Ok(profile)
    }
}

fn harmonic_indices(l: f64, m: f64) -> std::result::Result<(usize, i32), String> {
    if l.fract() != 0.0 || m.fract() != 0.0 || l < 0.0 {
        return Err("harmonic indices must be integers with l >= 0".into());
    }
    if l > 8.0 || m.abs() > l {
        return Err("harmonic indices need |m| <= l <= 8".into());
    }
    Ok((l as usize, m as i32))
}

pub(crate) fn parse_numbers(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("cannot parse number '{}'", t.trim())))
        .collect()
}

fn expect_len(args: &[f64], lo: usize, hi: usize) -> std::result::Result<(), String> {
    if args.len() < lo || args.len() > hi {
        Err(format!("expected {lo}..={hi} parameters, got {}", args.len()))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_library_names() {
        assert_eq!(Profile::parse("one").unwrap(), Profile::one());
        assert_eq!(Profile::parse("Y20").unwrap(), Profile::y(2, 0));
        assert_eq!(Profile::parse("ylm:3,-2,0.5").unwrap(), Profile::Harmonic { l: 3, m: -2, amplitude: 0.5 });
        assert_eq!(Profile::parse("z").unwrap(), Profile::Coordinate { axis: 2, scale: 1.0 });
        assert!(Profile::parse("bump:0,0,1,0.3").is_ok());
        assert!(Profile::parse("bump:0,0,1,-0.3").is_err());
        assert!(Profile::parse("Y23").is_err());
        assert!(Profile::parse("banana").is_err());
        assert!(Profile::parse("const:x").is_err());
    }

    #[test]
    fn zero_detection() {
        assert!(Profile::Zero.is_zero());
        assert!(Profile::Constant { value: 0.0 }.is_zero());
        assert!(!Profile::one().is_zero());
    }
}
