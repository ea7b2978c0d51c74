//! Smooth trigonometric scalar and vector fields with analytic derivatives.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use torus_geometry::{TorusPoint, Vector};

/// Fiber shift of a skew product, a function of the base coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "formula", rename_all = "snake_case")]
pub enum FiberShift {
    /// `c`
    Constant { value: f64 },
    /// `a cos(2π x_axis)`
    CosWave { amplitude: f64, axis: usize },
    /// `a sin(2π x_axis)`
    SinWave { amplitude: f64, axis: usize },
}

impl FiberShift {
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            FiberShift::Constant { value } => value,
            FiberShift::CosWave { amplitude, axis } => amplitude * (TAU * x[axis]).cos(),
            FiberShift::SinWave { amplitude, axis } => amplitude * (TAU * x[axis]).sin(),
        }
    }

    /// Partial derivative along base axis `j`.
    pub fn partial(&self, x: &[f64], j: usize) -> f64 {
        match *self {
            FiberShift::Constant { .. } => 0.0,
            FiberShift::CosWave { amplitude, axis } if axis == j => -amplitude * TAU * (TAU * x[axis]).sin(),
            FiberShift::SinWave { amplitude, axis } if axis == j => amplitude * TAU * (TAU * x[axis]).cos(),
            _ => 0.0,
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match *self {
            FiberShift::Constant { value } => value.abs(),
            FiberShift::CosWave { amplitude, .. } | FiberShift::SinWave { amplitude, .. } => amplitude.abs(),
        }
    }

    pub fn axis(&self) -> Option<usize> {
        match *self {
            FiberShift::Constant { .. } => None,
            FiberShift::CosWave { axis, .. } | FiberShift::SinWave { axis, .. } => Some(axis),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wave {
    Sin,
    Cos,
}

/// One term `amplitude · wave(2π k·x + phase)` in component `component`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub component: usize,
    pub amplitude: f64,
    pub wave: Wave,
    pub frequency: Vec<i32>,
    #[serde(default)]
    pub phase: f64,
}

impl Mode {
    fn arg(&self, x: &Vector) -> f64 {
        let mut s = self.phase;
        for (j, &k) in self.frequency.iter().enumerate() {
            s += TAU * k as f64 * x[j];
        }
        s
    }
}

/// Finite sum of trigonometric modes; smooth and periodic on `T^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub dim: usize,
    pub modes: Vec<Mode>,
}

impl VectorField {
    pub fn zero(dim: usize) -> Self {
        VectorField { dim, modes: Vec::new() }
    }

    /// `(sin 2πx₂, 0)` on `T²`, the standard cat-map perturbation.
    pub fn cat_shear() -> Self {
        VectorField {
            dim: 2,
            modes: vec![Mode { component: 0, amplitude: 1.0, wave: Wave::Sin, frequency: vec![0, 1], phase: 0.0 }],
        }
    }

    /// A field on `T³` moving base and fiber coordinates.
    pub fn skew_mix() -> Self {
        let mode = |component, wave, frequency: [i32; 3]| Mode {
            component,
            amplitude: 1.0,
            wave,
            frequency: frequency.to_vec(),
            phase: 0.0,
        };
        VectorField {
            dim: 3,
            modes: vec![mode(0, Wave::Sin, [0, 1, 0]), mode(1, Wave::Cos, [1, 0, 0]), mode(2, Wave::Sin, [1, 0, 0])],
        }
    }

    /// [`VectorField::skew_mix`] plus fiber-dependent base terms, so the
    /// perturbation tilts the center direction.
    pub fn skew_tilt() -> Self {
        let mut field = Self::skew_mix();
        field.modes.push(Mode { component: 0, amplitude: 1.0, wave: Wave::Sin, frequency: vec![0, 0, 1], phase: 0.0 });
        field.modes.push(Mode { component: 1, amplitude: 0.5, wave: Wave::Cos, frequency: vec![0, 0, 1], phase: 0.0 });
        field
    }

    pub fn value(&self, x: &TorusPoint) -> Vector {
        let v = x.lift();
        let mut out = Vector::zeros(self.dim);
        for m in &self.modes {
            let a = m.arg(&v);
            out[m.component] += m.amplitude
                * match m.wave {
                    Wave::Sin => a.sin(),
                    Wave::Cos => a.cos(),
                };
        }
        out
    }

    pub fn jacobian(&self, x: &TorusPoint) -> DMatrix<f64> {
        let v = x.lift();
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for m in &self.modes {
            let a = m.arg(&v);
            let dw = match m.wave {
                Wave::Sin => a.cos(),
                Wave::Cos => -a.sin(),
            };
            for (j, &k) in m.frequency.iter().enumerate() {
                out[(m.component, j)] += m.amplitude * TAU * k as f64 * dw;
            }
        }
        out
    }

    /// Upper bound on `sup |field|` from the mode amplitudes.
    pub fn sup_bound(&self) -> f64 {
        let mut per = vec![0.0; self.dim];
        for m in &self.modes {
            per[m.component] += m.amplitude.abs();
        }
        per.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// Roof function of a suspension over `T²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "formula", rename_all = "snake_case")]
pub enum Roof {
    Constant {
        value: f64,
    },
    /// `mean + amplitude · cos(2π x_axis)`
    CosWave {
        mean: f64,
        amplitude: f64,
        axis: usize,
    },
}

impl Roof {
    pub fn value(&self, base: &[f64]) -> f64 {
        match *self {
            Roof::Constant { value } => value,
            Roof::CosWave { mean, amplitude, axis } => mean + amplitude * (TAU * base[axis]).cos(),
        }
    }

    pub fn min_value(&self) -> f64 {
        match *self {
            Roof::Constant { value } => value,
            Roof::CosWave { mean, amplitude, .. } => mean - amplitude.abs(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Roof::Constant { .. })
    }
}
