use super::scalar::ScalarField;
use super::tensor::CovectorField;
use super::vec::{Mat2, Vec2};

/// Analytic family tag for the magnetic potential.
#[derive(Debug, Clone)]
pub enum OneFormFamily {
    Zero,
    /// `(λ/2)(−x² dx¹ + x¹ dx²)` with constant λ.
    Solenoid { lambda: f64 },
    /// `α = dh`: closed, hence zero Lorentz force.
    Exact,
    Custom,
}

/// Magnetic potential 1-form `x ↦ α_i(x)` with derivatives `∂_j α_i`.
#[derive(Debug, Clone)]
pub struct OneFormField {
    family: OneFormFamily,
    field: CovectorField,
}

impl OneFormField {
    pub fn zero() -> Self {
        OneFormField {
            family: OneFormFamily::Zero,
            field: CovectorField::zero(),
        }
    }

    /// Constant-curl potential: `dα = λ dx¹∧dx²`.
    pub fn solenoid(lambda: f64) -> Self {
        OneFormField {
            family: OneFormFamily::Solenoid { lambda },
            field: CovectorField::solenoid(lambda),
        }
    }

    /// Exact potential `α = dh`.
    pub fn exact(h: &ScalarField) -> Self {
        OneFormField {
            family: OneFormFamily::Exact,
            field: CovectorField::exact(h),
        }
    }

    pub fn custom(field: CovectorField) -> Self {
        OneFormField {
            family: OneFormFamily::Custom,
            field,
        }
    }

    /// Sum of two potentials (e.g. solenoid plus an exact part).
    pub fn sum(a: &OneFormField, b: &OneFormField) -> Self {
        OneFormField {
            family: OneFormFamily::Custom,
            field: a.field.add(&b.field),
        }
    }

    /// Perturbed potential `α + s·β` of a linearization family.
    pub fn perturbed(&self, beta: &CovectorField, s: f64) -> OneFormField {
        OneFormField {
            family: OneFormFamily::Custom,
            field: self.field.add(&beta.scaled(s)),
        }
    }

    pub fn family(&self) -> &OneFormFamily {
        &self.family
    }

    pub fn negated(&self) -> OneFormField {
        let family = match self.family {
            OneFormFamily::Zero => OneFormFamily::Zero,
            OneFormFamily::Solenoid { lambda } => OneFormFamily::Solenoid { lambda: -lambda },
            _ => OneFormFamily::Custom,
        };
        OneFormField {
            family,
            field: self.field.scaled(-1.0),
        }
    }

    pub fn at(&self, p: Vec2) -> Vec2 {
        self.field.value(p)
    }

    pub fn jacobian(&self, p: Vec2) -> Mat2 {
        self.field.jacobian(p)
    }

    /// Pairing `α_x(v)`.
    pub fn pair(&self, p: Vec2, v: Vec2) -> f64 {
        self.at(p).dot(v)
    }

    /// `Ω_12 = (dα)_12 = ∂_1 α_2 − ∂_2 α_1`.
    pub fn omega12(&self, p: Vec2) -> f64 {
        self.field.curl(p)
    }

    pub fn as_covector_field(&self) -> &CovectorField {
        &self.field
    }
}
