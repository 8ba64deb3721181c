use super::ShootingError;
use crate::problem::ManeuverProblem;
use crate::so3::Vec3;
use nalgebra::DVector;

/// Flattened `(Π_0, λ̄_0, …, Π_N, λ̄_N, μ̄_0)`, length `6N + 9`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingVector {
    steps: usize,
    data: DVector<f64>,
}

impl ShootingVector {
    pub fn len_for(steps: usize) -> usize {
        6 * steps + 9
    }

    pub fn zeros(steps: usize) -> Self {
        Self {
            steps,
            data: DVector::zeros(Self::len_for(steps)),
        }
    }

    pub fn from_vector(steps: usize, data: DVector<f64>) -> Result<Self, ShootingError> {
        let expected = Self::len_for(steps);
        if data.len() != expected {
            return Err(ShootingError::DimensionMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(Self { steps, data })
    }

    /// Default starting point: zero costates and momenta interpolated
    /// linearly between the boundary values.
    pub fn initial_guess(problem: &ManeuverProblem) -> Self {
        let n = problem.steps;
        let mut x = Self::zeros(n);
        for k in 0..=n {
            let s = k as f64 / n as f64;
            x.set_pi(k, &(problem.pi_initial * (1.0 - s) + problem.pi_final * s));
        }
        x
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.data
    }

    pub fn pi_offset(k: usize) -> usize {
        6 * k
    }

    pub fn lambda_offset(k: usize) -> usize {
        6 * k + 3
    }

    pub fn mu_offset(steps: usize) -> usize {
        6 * (steps + 1)
    }

    pub fn pi(&self, k: usize) -> Vec3 {
        self.data.fixed_rows::<3>(Self::pi_offset(k)).into_owned()
    }

    pub fn lambda_bar(&self, k: usize) -> Vec3 {
        self.data.fixed_rows::<3>(Self::lambda_offset(k)).into_owned()
    }

    pub fn mu_bar0(&self) -> Vec3 {
        self.data.fixed_rows::<3>(Self::mu_offset(self.steps)).into_owned()
    }

    pub fn set_pi(&mut self, k: usize, v: &Vec3) {
        self.data.fixed_rows_mut::<3>(Self::pi_offset(k)).copy_from(v);
    }

    pub fn set_lambda_bar(&mut self, k: usize, v: &Vec3) {
        self.data.fixed_rows_mut::<3>(Self::lambda_offset(k)).copy_from(v);
    }

    pub fn set_mu_bar0(&mut self, v: &Vec3) {
        let off = Self::mu_offset(self.steps);
        self.data.fixed_rows_mut::<3>(off).copy_from(v);
    }

    pub fn momenta(&self) -> Vec<Vec3> {
        (0..=self.steps).map(|k| self.pi(k)).collect()
    }

    pub fn costates(&self) -> Vec<Vec3> {
        (0..=self.steps).map(|k| self.lambda_bar(k)).collect()
    }

    /// `self + alpha · delta`.
    pub fn step(&self, delta: &DVector<f64>, alpha: f64) -> Self {
        Self {
            steps: self.steps,
            data: &self.data + delta * alpha,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_offsets() {
        let mut x = ShootingVector::zeros(4);
        assert_eq!(x.len(), 33);
        x.set_pi(2, &Vec3::new(1.0, 2.0, 3.0));
        x.set_lambda_bar(4, &Vec3::new(4.0, 5.0, 6.0));
        x.set_mu_bar0(&Vec3::new(7.0, 8.0, 9.0));
        assert_eq!(x.as_vector()[12], 1.0);
        assert_eq!(x.as_vector()[27], 4.0);
        assert_eq!(x.as_vector()[30], 7.0);
        assert_eq!(x.mu_bar0(), Vec3::new(7.0, 8.0, 9.0));
    }

    #[test]
    fn rejects_wrong_length() {
        let r = ShootingVector::from_vector(3, DVector::zeros(26));
        assert_eq!(r, Err(ShootingError::DimensionMismatch { expected: 27, got: 26 }));
    }
}
