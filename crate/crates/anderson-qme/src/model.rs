//! Model parameters, index sets and the time grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Creation/annihilation index `η` of a field operator, or the superfermion index `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const ALL: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn bar(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub const ALL: [Spin; 2] = [Spin::Up, Spin::Down];

    pub fn flip(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }
}

/// One wideband lead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reservoir {
    pub gamma_up: f64,
    pub gamma_down: f64,
    #[serde(default)]
    pub mu: f64,
    pub temperature: f64,
}

impl Reservoir {
    /// Spin-independent lead with coupling `gamma`.
    pub fn new(gamma: f64, mu: f64, temperature: f64) -> Self {
        Reservoir {
            gamma_up: gamma,
            gamma_down: gamma,
            mu,
            temperature,
        }
    }

    pub fn gamma(&self, spin: Spin) -> f64 {
        match spin {
            Spin::Up => self.gamma_up,
            Spin::Down => self.gamma_down,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub epsilon: f64,
    #[serde(default)]
    pub u: f64,
    #[serde(default, rename = "reservoir")]
    pub reservoirs: Vec<Reservoir>,
}

impl ModelParams {
    pub fn total_gamma(&self, spin: Spin) -> f64 {
        self.reservoirs.iter().map(|r| r.gamma(spin)).sum()
    }

    /// Copy with every lead set to temperature `t`.
    pub fn with_temperature(&self, t: f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.reservoirs {
            r.temperature = t;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || !self.u.is_finite() {
            return Err(Error::Domain("epsilon and u must be finite".into()));
        }
        for (i, r) in self.reservoirs.iter().enumerate() {
            if !(r.gamma_up >= 0.0 && r.gamma_down >= 0.0) {
                return Err(Error::Domain(format!("reservoir {i}: couplings must be >= 0")));
            }
            if !(r.temperature >= 0.0) {
                return Err(Error::Domain(format!("reservoir {i}: temperature must be >= 0")));
            }
            if !r.mu.is_finite() {
                return Err(Error::Domain(format!("reservoir {i}: mu must be finite")));
            }
        }
        Ok(())
    }
}

/// Uniform grid `t_k = k·h`, `k = 0..=count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub step: f64,
    pub count: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid {
            step: 0.005,
            count: 2000,
        }
    }
}

impl TimeGrid {
    pub fn new(step: f64, count: usize) -> Result<Self> {
        let g = TimeGrid { step, count };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Domain("grid step must be positive".into()));
        }
        Ok(())
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    /// Number of samples, `count + 1`.
    pub fn len(&self) -> usize {
        self.count + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_max(&self) -> f64 {
        self.t(self.count)
    }
}
