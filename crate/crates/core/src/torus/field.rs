use super::grid::{canonical, PeriodicGrid};
use super::potential::PotentialSpec;
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Real values at the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: PeriodicGrid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Cardinality(values.len(), grid.len()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self { grid, values }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Strictly positive density with unit mass (node mean 1).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

pub(crate) fn check_positive(values: &[f64], floor: f64) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !(value > floor) || !value.is_finite() {
            return Err(Error::Positivity { index, value });
        }
    }
    Ok(())
}

impl DensityField {
    /// Validates positivity and rescales to unit mass.
    pub fn new(grid: PeriodicGrid, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Cardinality(values.len(), grid.len()));
        }
        check_positive(&values, 0.0)?;
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        for v in &mut values {
            *v /= mean;
        }
        Ok(Self { grid, values })
    }

    /// Density proportional to `exp(log_values)`, computed without overflow.
    pub fn from_log(grid: PeriodicGrid, log_values: &[f64]) -> Result<Self> {
        let m = log_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Self::new(grid, log_values.iter().map(|l| (l - m).exp()).collect())
    }

    pub fn uniform(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            values: vec![1.0; grid.len()],
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `int |rho - other|`.
    pub fn l1_distance(&self, other: &DensityField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / self.values.len() as f64
    }

    pub fn sup_distance(&self, other: &DensityField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn as_field(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.clone(),
        }
    }
}

/// Named initial-density families.
#[derive(Clone, Debug, PartialEq)]
pub enum DensityFamily {
    Uniform,
    /// `1 + amplitude cos(2 pi k.x)`.
    Cosine { amplitude: f64, freq: [i32; 2] },
    /// Proportional to `exp(kappa sum_a cos(2 pi (x_a - c_a)))`.
    VonMises { kappa: f64, center: [f64; 2] },
    /// Periodic heat kernel at time `width` centred at `center`.
    HeatKernel { width: f64, center: [f64; 2] },
    /// Proportional to `exp(-V)`.
    Gibbs,
}

impl DensityFamily {
    pub fn build(&self, grid: PeriodicGrid, v: &PotentialSpec) -> Result<DensityField> {
        let dim = grid.dim();
        match self {
            DensityFamily::Uniform => Ok(DensityField::uniform(grid)),
            DensityFamily::Cosine { amplitude, freq } => {
                if amplitude.abs() >= 1.0 {
                    return Err(Error::Domain(format!(
                        "cosine amplitude must be below 1, got {amplitude}"
                    )));
                }
                let f = ScalarField::from_fn(grid, |x| {
                    let th = TWO_PI * (freq[0] as f64 * x[0] + freq[1] as f64 * x[1]);
                    1.0 + amplitude * th.cos()
                });
                DensityField::new(grid, f.values)
            }
            DensityFamily::VonMises { kappa, center } => {
                let f = ScalarField::from_fn(grid, |x| {
                    (0..dim)
                        .map(|a| kappa * (TWO_PI * (x[a] - center[a])).cos())
                        .sum()
                });
                DensityField::from_log(grid, &f.values)
            }
            DensityFamily::HeatKernel { width, center } => {
                if !(*width > 0.0) {
                    return Err(Error::Domain(format!("heat kernel width must be > 0, got {width}")));
                }
                let f = ScalarField::from_fn(grid, |x| {
                    (0..dim)
                        .map(|a| heat_kernel_1d(canonical(x[a] - center[a]), *width))
                        .product()
                });
                DensityField::new(grid, f.values)
            }
            DensityFamily::Gibbs => {
                let neg: Vec<f64> = v.sample(&grid).iter().map(|x| -x).collect();
                DensityField::from_log(grid, &neg)
            }
        }
    }
}

/// Periodic heat kernel at time `s`.
///
/// Narrow kernels use the image sum of Gaussians, which stays positive where
/// the Fourier series would round to tiny negative values.
pub fn heat_kernel_1d(x: f64, s: f64) -> f64 {
    if s < 0.05 {
        let norm = 1.0 / (4.0 * std::f64::consts::PI * s).sqrt();
        let x = canonical(x);
        let mut acc = 0.0;
        for m in -3i32..=3 {
            let y = x + m as f64;
            acc += (-y * y / (4.0 * s)).exp();
        }
        return norm * acc;
    }
    let decay = 4.0 * std::f64::consts::PI.powi(2) * s;
    let kmax = ((45.0 / decay).sqrt().ceil() as i64).max(1);
    let mut acc = 1.0;
    for k in 1..=kmax {
        acc += 2.0 * (-decay * (k * k) as f64).exp() * (TWO_PI * k as f64 * x).cos();
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_are_normalized() {
        let grid = PeriodicGrid::new(1, 128).unwrap();
        let v = PotentialSpec::cos1(1, 0.2);
        for fam in [
            DensityFamily::Uniform,
            DensityFamily::Cosine { amplitude: 0.5, freq: [1, 0] },
            DensityFamily::VonMises { kappa: 2.0, center: [0.3, 0.0] },
            DensityFamily::HeatKernel { width: 0.005, center: [0.5, 0.0] },
            DensityFamily::Gibbs,
        ] {
            let d = fam.build(grid, &v).unwrap();
            assert!((d.mass() - 1.0).abs() < 1e-12, "{fam:?}");
            assert!(d.min() > 0.0);
        }
    }

    #[test]
    fn negative_values_are_rejected() {
        let grid = PeriodicGrid::new(1, 8).unwrap();
        let mut v = vec![1.0; 8];
        v[3] = -1e-3;
        match DensityField::new(grid, v) {
            Err(Error::Positivity { index, .. }) => assert_eq!(index, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn heat_kernel_mass_is_one() {
        let m = 4096;
        for w in [0.003, 0.2] {
            let s: f64 = (0..m).map(|i| heat_kernel_1d(i as f64 / m as f64, w)).sum();
            assert!((s / m as f64 - 1.0).abs() < 1e-12);
        }
        // Both representations agree where they overlap.
        for x in [0.0, 0.1, 0.37, 0.5] {
            let a = heat_kernel_1d(x, 0.049);
            let b = heat_kernel_1d(x, 0.049 + 1e-15);
            assert!((a - b).abs() < 1e-12);
        }
    }
}
