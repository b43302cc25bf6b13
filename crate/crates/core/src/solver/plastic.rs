//! J2 plasticity with linear isotropic hardening and radial return.

use nalgebra::Matrix6;

use crate::materials::ElementMaterial;
use crate::tensor::SymTensor;

/// History variables at one Gauss point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaussState {
    pub plastic_strain: SymTensor,
    pub equivalent_plastic_strain: f64,
}

/// Plastic hardening modulus `H` reproducing a uniaxial post-yield tangent `E_t`.
pub fn hardening_from_tangent(modulus: f64, tangent: f64) -> f64 {
    modulus * tangent / (modulus - tangent)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct J2Material {
    lambda: f64,
    mu: f64,
    yield_stress: f64,
    hardening: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StressUpdate {
    pub stress: SymTensor,
    pub state: GaussState,
    pub tangent: Matrix6<f64>,
    pub yielded: bool,
}

fn deviator(t: &SymTensor) -> SymTensor {
    let m = t.trace() / 3.0;
    let [xx, yy, zz, xy, yz, xz] = t.0;
    SymTensor([xx - m, yy - m, zz - m, xy, yz, xz])
}

fn norm(t: &SymTensor) -> f64 {
    let [xx, yy, zz, xy, yz, xz] = t.0;
    (xx * xx + yy * yy + zz * zz + 2.0 * (xy * xy + yz * yz + xz * xz)).sqrt()
}

impl J2Material {
    pub fn new(material: &ElementMaterial) -> Self {
        let (lambda, mu) = material.lame();
        let (yield_stress, hardening) = match material.plasticity {
            Some(p) => (
                p.yield_stress,
                hardening_from_tangent(material.modulus, p.tangent_modulus),
            ),
            None => (f64::INFINITY, 0.0),
        };
        J2Material {
            lambda,
            mu,
            yield_stress,
            hardening,
        }
    }

    fn elastic_stress(&self, e: &SymTensor) -> SymTensor {
        let tr = e.trace();
        let mut s = e.scale(2.0 * self.mu);
        for c in &mut s.0[..3] {
            *c += self.lambda * tr;
        }
        s
    }

    /// Consistent tangent `κ 1⊗1 + 2μβ I_dev − 2μγ̄ n⊗n` in Voigt form
    /// (acting on engineering shear strains).
    fn tangent(&self, beta: f64, gamma_bar: f64, n: &SymTensor) -> Matrix6<f64> {
        let kappa = self.lambda + 2.0 * self.mu / 3.0;
        let mut d = Matrix6::zeros();
        for i in 0..3 {
            for j in 0..3 {
                d[(i, j)] = kappa - 2.0 * self.mu * beta / 3.0;
            }
            d[(i, i)] += 2.0 * self.mu * beta;
            d[(i + 3, i + 3)] = self.mu * beta;
        }
        if gamma_bar != 0.0 {
            for i in 0..6 {
                for j in 0..6 {
                    d[(i, j)] -= 2.0 * self.mu * gamma_bar * n.0[i] * n.0[j];
                }
            }
        }
        d
    }

    /// Radial return from the committed state for total strain `strain`.
    pub fn update(&self, strain: &SymTensor, committed: &GaussState) -> StressUpdate {
        let elastic = strain.add(&committed.plastic_strain.scale(-1.0));
        let trial = self.elastic_stress(&elastic);
        let s = deviator(&trial);
        let s_norm = norm(&s);
        let q = (1.5_f64).sqrt() * s_norm;
        let radius = self.yield_stress + self.hardening * committed.equivalent_plastic_strain;
        let f = q - radius;
        if !(f > 1e-12 * radius) {
            return StressUpdate {
                stress: trial,
                state: *committed,
                tangent: self.tangent(1.0, 0.0, &SymTensor::ZERO),
                yielded: false,
            };
        }
        let dlambda = f / (3.0 * self.mu + self.hardening);
        let n = s.scale(1.0 / s_norm);
        let flow = (1.5_f64).sqrt() * dlambda;
        let stress = trial.add(&n.scale(-2.0 * self.mu * flow));
        let state = GaussState {
            plastic_strain: committed.plastic_strain.add(&n.scale(flow)),
            equivalent_plastic_strain: committed.equivalent_plastic_strain + dlambda,
        };
        let beta = 1.0 - 3.0 * self.mu * dlambda / q;
        let gamma_bar = 3.0 * self.mu / (3.0 * self.mu + self.hardening) - (1.0 - beta);
        StressUpdate {
            stress,
            state,
            tangent: self.tangent(beta, gamma_bar, &n),
            yielded: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::Plasticity;

    fn material() -> ElementMaterial {
        ElementMaterial {
            density: 0.3,
            modulus: 1000.0,
            poisson: 0.3,
            plasticity: Some(Plasticity {
                yield_stress: 5.0,
                tangent_modulus: 50.0,
            }),
        }
    }

    #[test]
    fn below_yield_is_elastic() {
        let m = J2Material::new(&material());
        let up = m.update(
            &SymTensor::new(1e-3, -3e-4, -3e-4, 0.0, 0.0, 0.0),
            &GaussState::default(),
        );
        assert!(!up.yielded);
        assert!((up.stress.0[0] - 1.0).abs() < 1e-12);
        assert!(up.stress.0[1].abs() < 1e-12);
    }

    #[test]
    fn returned_stress_lies_on_the_hardened_surface() {
        let m = J2Material::new(&material());
        let up = m.update(
            &SymTensor::new(0.02, -0.004, 0.001, 0.003, 0.0, -0.002),
            &GaussState::default(),
        );
        assert!(up.yielded);
        let h = hardening_from_tangent(1000.0, 50.0);
        let radius = 5.0 + h * up.state.equivalent_plastic_strain;
        assert!((up.stress.von_mises() - radius).abs() < 1e-9 * radius);
        // Plastic flow is isochoric.
        assert!(up.state.plastic_strain.trace().abs() < 1e-15);
    }

    #[test]
    fn consistent_tangent_matches_finite_differences() {
        let m = J2Material::new(&material());
        let eps = SymTensor::new(0.012, -0.002, 0.004, 0.003, -0.001, 0.002);
        let base = GaussState {
            plastic_strain: SymTensor::new(0.001, -0.0005, -0.0005, 0.0, 0.0, 0.0),
            equivalent_plastic_strain: 0.001,
        };
        let up = m.update(&eps, &base);
        assert!(up.yielded);
        let h = 1e-7;
        for j in 0..6 {
            let mut p = eps;
            // Engineering shear: a unit Voigt perturbation moves the tensor component by 1/2.
            p.0[j] += if j < 3 { h } else { 0.5 * h };
            let sp = m.update(&p, &base).stress;
            for i in 0..6 {
                let fd = (sp.0[i] - up.stress.0[i]) / h;
                assert!(
                    (fd - up.tangent[(i, j)]).abs() < 1e-3 * 1000.0,
                    "({i},{j}): fd {fd} vs {}",
                    up.tangent[(i, j)]
                );
            }
        }
    }

    #[test]
    fn hardening_convention_recovers_tangent() {
        let (e, et) = (4730.0, 236.5);
        let h = hardening_from_tangent(e, et);
        assert!((e * h / (e + h) - et).abs() < 1e-9);
    }
}
