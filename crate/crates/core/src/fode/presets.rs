//! Reference systems: the fractional plant, its fitted integer surrogate and
//! the three unity-feedback loops built from them.

use super::{FracTerm, Fode};

/// Parameters of `a2 y^(α) + a1 y^(β) + a0 y = u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    pub a2: f64,
    pub alpha: f64,
    pub a1: f64,
    pub beta: f64,
    pub a0: f64,
}

pub const REFERENCE: PlantParams = PlantParams {
    a2: 0.8,
    alpha: 2.2,
    a1: 0.5,
    beta: 0.9,
    a0: 1.0,
};

/// Integer second-order surrogate `(a2, a1, a0)` of the reference plant.
pub const SURROGATE: (f64, f64, f64) = (0.7414, 0.2313, 1.0);

/// PD gains placing the surrogate's closed-loop poles at -2 ± 5j.
pub const PD_GAIN: f64 = 20.5;
pub const PD_DERIVATIVE: f64 = 2.7343;

/// Fractional PD gains found by experiment for the reference plant.
pub const FPD_DERIVATIVE: f64 = 3.7343;
pub const FPD_ORDER: f64 = 1.15;

impl PlantParams {
    pub fn fode(&self) -> Fode {
        Fode::new(
            &[
                FracTerm::new(self.a2, self.alpha),
                FracTerm::new(self.a1, self.beta),
                FracTerm::new(self.a0, 0.0),
            ],
            &[FracTerm::new(1.0, 0.0)],
        )
        .expect("plant parameters form a proper model")
    }
}

pub fn reference_plant() -> Fode {
    REFERENCE.fode()
}

/// `a2 y'' + a1 y' + a0 y = u`.
pub fn integer_second_order(a2: f64, a1: f64, a0: f64) -> crate::Result<Fode> {
    Fode::new(
        &[
            FracTerm::new(a2, 2.0),
            FracTerm::new(a1, 1.0),
            FracTerm::new(a0, 0.0),
        ],
        &[FracTerm::new(1.0, 0.0)],
    )
}

/// Integer surrogate under integer PD:
/// `a2 y'' + (a1 + Td) y' + (a0 + K) y = K w + Td w'`.
pub fn integer_pd_loop(a2: f64, a1: f64, a0: f64, k: f64, td: f64) -> crate::Result<Fode> {
    Fode::new(
        &[
            FracTerm::new(a2, 2.0),
            FracTerm::new(a1 + td, 1.0),
            FracTerm::new(a0 + k, 0.0),
        ],
        &[FracTerm::new(k, 0.0), FracTerm::new(td, 1.0)],
    )
}

/// Fractional plant under PD^δ (δ = 1 for the integer regulator):
/// `a2 y^(α) + a1 y^(β) + Td y^(δ) + (a0 + K) y = K w + Td w^(δ)`.
pub fn fractional_pd_loop(p: &PlantParams, k: f64, td: f64, delta: f64) -> crate::Result<Fode> {
    Fode::new(
        &[
            FracTerm::new(p.a2, p.alpha),
            FracTerm::new(td, delta),
            FracTerm::new(p.a1, p.beta),
            FracTerm::new(p.a0 + k, 0.0),
        ],
        &[FracTerm::new(k, 0.0), FracTerm::new(td, delta)],
    )
}
