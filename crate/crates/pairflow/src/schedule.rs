//! Interpolation schedules on [0, 1].
//!
//! A schedule maps flow time `t` to the mixing weight `kappa(t)` that
//! interpolates between the source distribution at `t = 0` and the data
//! distribution at `t = 1`. All schedules are strictly increasing with
//! `kappa(0) = 0` and `kappa(1) = 1`, hit both endpoints exactly, and are
//! differentiable on (0, 1).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheduler {
    /// kappa(t) = t
    Linear,
    /// kappa(t) = t^p with p > 0
    Polynomial(f64),
    /// kappa(t) = (1 - cos(pi t)) / 2
    Cosine,
}

impl Scheduler {
    pub fn polynomial(p: f64) -> Result<Self> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::BadExponent(p));
        }
        Ok(Scheduler::Polynomial(p))
    }

    /// Stable on-disk code for pair files.
    pub fn kind_code(&self) -> u8 {
        match self {
            Scheduler::Linear => 0,
            Scheduler::Polynomial(_) => 1,
            Scheduler::Cosine => 2,
        }
    }

    pub fn kappa(&self, t: f64) -> Result<f64> {
        check_unit(t, "t")?;
        // Endpoints are pinned so downstream code can rely on exact 0 and 1.
        if t == 0.0 {
            return Ok(0.0);
        }
        if t == 1.0 {
            return Ok(1.0);
        }
        Ok(match *self {
            Scheduler::Linear => t,
            Scheduler::Polynomial(p) => t.powf(p),
            Scheduler::Cosine => (1.0 - (std::f64::consts::PI * t).cos()) / 2.0,
        })
    }

    pub fn kappa_dot(&self, t: f64) -> Result<f64> {
        check_unit(t, "t")?;
        Ok(match *self {
            Scheduler::Linear => 1.0,
            Scheduler::Polynomial(p) => p * t.powf(p - 1.0),
            Scheduler::Cosine => {
                std::f64::consts::FRAC_PI_2 * (std::f64::consts::PI * t).sin()
            }
        })
    }
}

impl fmt::Display for Scheduler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheduler::Linear => write!(f, "linear"),
            Scheduler::Polynomial(p) => write!(f, "poly:{p}"),
            Scheduler::Cosine => write!(f, "cosine"),
        }
    }
}

/// Parses `linear`, `cosine`, or `poly:<exponent>`.
impl FromStr for Scheduler {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(Scheduler::Linear),
            "cosine" => Ok(Scheduler::Cosine),
            other => {
                if let Some(p) = other.strip_prefix("poly:") {
                    let p: f64 = p.parse().map_err(|_| format!("bad exponent {p:?}"))?;
                    Scheduler::polynomial(p).map_err(|e| e.to_string())
                } else {
                    Err(format!(
                        "unknown scheduler {other:?}; expected linear, cosine or poly:<p>"
                    ))
                }
            }
        }
    }
}

fn check_unit(t: f64, name: &'static str) -> Result<()> {
    if !(0.0..=1.0).contains(&t) || t.is_nan() {
        return Err(Error::OutOfDomain {
            name,
            value: t,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// Direction of traversal for a uniform grid of `steps` Euler steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Uniform time grid with step size `1 / steps`.
///
/// Forward node k is `k / steps`; backward node k is `1 - k / steps`.
#[derive(Debug, Clone, Copy)]
pub struct TimeGrid {
    steps: u32,
    direction: Direction,
}

impl TimeGrid {
    pub fn new(steps: u32, direction: Direction) -> Result<Self> {
        if steps == 0 {
            return Err(Error::ZeroSteps);
        }
        Ok(TimeGrid { steps, direction })
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn step_size(&self) -> f64 {
        1.0 / self.steps as f64
    }

    /// Node time for step index `k` in `0..steps`.
    pub fn node(&self, k: u32) -> f64 {
        debug_assert!(k < self.steps);
        let t = self.steps as f64;
        match self.direction {
            Direction::Forward => k as f64 / t,
            Direction::Backward => (self.steps - k) as f64 / t,
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.steps).map(move |k| self.node(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEDULERS: [Scheduler; 4] = [
        Scheduler::Linear,
        Scheduler::Polynomial(2.0),
        Scheduler::Polynomial(0.5),
        Scheduler::Cosine,
    ];

    #[test]
    fn endpoints_exact() {
        for s in SCHEDULERS {
            assert_eq!(s.kappa(0.0).unwrap(), 0.0, "{s}");
            assert_eq!(s.kappa(1.0).unwrap(), 1.0, "{s}");
        }
    }

    #[test]
    fn strictly_increasing() {
        for s in SCHEDULERS {
            let mut prev = -1.0;
            for i in 0..=1000 {
                let k = s.kappa(i as f64 / 1000.0).unwrap();
                assert!(k > prev, "{s} not increasing at i={i}");
                prev = k;
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let eps = 1e-7;
        for s in SCHEDULERS {
            for i in 1..100 {
                let t = i as f64 / 100.0;
                if t + eps > 1.0 {
                    continue;
                }
                let fd = (s.kappa(t + eps).unwrap() - s.kappa(t - eps).unwrap()) / (2.0 * eps);
                let an = s.kappa_dot(t).unwrap();
                assert!(
                    (fd - an).abs() <= 1e-6 * (1.0 + an.abs()),
                    "{s} at t={t}: fd={fd} analytic={an}"
                );
            }
        }
    }

    #[test]
    fn domain_checked() {
        assert!(Scheduler::Linear.kappa(-0.1).is_err());
        assert!(Scheduler::Linear.kappa(1.1).is_err());
        assert!(Scheduler::Linear.kappa(f64::NAN).is_err());
        assert!(Scheduler::polynomial(0.0).is_err());
        assert!(Scheduler::polynomial(-1.0).is_err());
    }

    #[test]
    fn grid_nodes() {
        let g = TimeGrid::new(4, Direction::Forward).unwrap();
        let nodes: Vec<f64> = g.nodes().collect();
        assert_eq!(nodes, vec![0.0, 0.25, 0.5, 0.75]);

        let g = TimeGrid::new(4, Direction::Backward).unwrap();
        let nodes: Vec<f64> = g.nodes().collect();
        assert_eq!(nodes, vec![1.0, 0.75, 0.5, 0.25]);

        assert!(TimeGrid::new(0, Direction::Forward).is_err());
    }

    #[test]
    fn scheduler_parsing() {
        assert_eq!("linear".parse::<Scheduler>().unwrap(), Scheduler::Linear);
        assert_eq!("cosine".parse::<Scheduler>().unwrap(), Scheduler::Cosine);
        assert_eq!(
            "poly:2.5".parse::<Scheduler>().unwrap(),
            Scheduler::Polynomial(2.5)
        );
        assert!("poly:0".parse::<Scheduler>().is_err());
        assert!("quadratic".parse::<Scheduler>().is_err());
    }
}
