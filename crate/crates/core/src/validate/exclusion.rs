use serde::{Deserialize, Serialize};

use super::compare::PairedSamples;
use super::metrics::regression_metrics;
use crate::dvc::DvcGrid;
use crate::error::{HfeError, Result};
use crate::tensor::SymTensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExclusionConfig {
    /// Principal strain magnitude over which a point counts as failed.
    pub strain_limit: f64,
    /// Lower reporting tier.
    pub strain_warning: f64,
    /// Fraction of over-limit points that excludes a specimen.
    pub max_failed_fraction: f64,
    /// Minimum fraction of bone points that must correlate.
    pub min_correlating_fraction: f64,
    /// R² of |error| against uncertainty above which the dependence is strong.
    pub r2_threshold: f64,
}

impl Default for ExclusionConfig {
    fn default() -> Self {
        ExclusionConfig {
            strain_limit: 0.01,
            strain_warning: 0.008,
            max_failed_fraction: 0.25,
            min_correlating_fraction: 0.5,
            r2_threshold: 0.5,
        }
    }
}

impl ExclusionConfig {
    pub fn validate(&self) -> Result<()> {
        let frac = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.strain_limit > 0.0
            && self.strain_warning > 0.0
            && self.strain_warning <= self.strain_limit)
        {
            return Err(HfeError::Config(
                "strain limits must satisfy 0 < warning <= limit".into(),
            ));
        }
        if !(frac(self.max_failed_fraction)
            && frac(self.min_correlating_fraction)
            && frac(self.r2_threshold))
        {
            return Err(HfeError::Config(
                "exclusion fractions and thresholds must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrainCriterion {
    pub n_points: usize,
    pub warning_fraction: f64,
    pub failed_fraction: f64,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationCriterion {
    pub bone_points: usize,
    pub correlating_fraction: f64,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DirectionDependence {
    Evaluated {
        r2: f64,
        slope: f64,
        n_points: usize,
        strong: bool,
    },
    NotEvaluated {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum UncertaintyCriterion {
    Evaluated {
        directions: [DirectionDependence; 3],
        excluded: bool,
    },
    NotEvaluated {
        reason: String,
    },
}

impl UncertaintyCriterion {
    pub fn excluded(&self) -> bool {
        matches!(self, UncertaintyCriterion::Evaluated { excluded: true, .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExclusionReport {
    pub strain_limits: StrainCriterion,
    pub correlation_coverage: CorrelationCriterion,
    pub error_uncertainty: UncertaintyCriterion,
    pub excluded: bool,
}

/// Largest principal strain magnitude.
fn peak_principal(t: &SymTensor) -> f64 {
    let p = t.principal();
    p[0].abs().max(p[2].abs())
}

/// Evaluates the three exclusion criteria.
///
/// `point_strains` holds the measured strain per grid point (`None` where
/// undefined); `uncertainty` the zero-strain uncertainty per grid point.
pub fn exclusion_check(
    pairs: &PairedSamples,
    point_strains: &[Option<SymTensor>],
    grid: &DvcGrid,
    uncertainty: Option<&[Option<f64>]>,
    config: &ExclusionConfig,
) -> Result<ExclusionReport> {
    config.validate()?;
    if point_strains.len() != grid.num_points() {
        return Err(HfeError::GridMismatch(
            "strain field does not match grid".into(),
        ));
    }
    let peaks: Vec<f64> = point_strains
        .iter()
        .enumerate()
        .filter(|(i, _)| grid.inside_bone()[*i])
        .filter_map(|(_, s)| s.as_ref().map(peak_principal))
        .collect();
    let n = peaks.len();
    let frac = |limit: f64| {
        if n == 0 {
            0.0
        } else {
            peaks.iter().filter(|&&p| p > limit).count() as f64 / n as f64
        }
    };
    let failed_fraction = frac(config.strain_limit);
    let strain_limits = StrainCriterion {
        n_points: n,
        warning_fraction: frac(config.strain_warning),
        failed_fraction,
        excluded: failed_fraction > config.max_failed_fraction,
    };

    let bone: Vec<usize> = (0..grid.num_points())
        .filter(|&i| grid.inside_bone()[i])
        .collect();
    let correlating = bone.iter().filter(|&&i| grid.correlate()[i]).count();
    let correlating_fraction = if bone.is_empty() {
        0.0
    } else {
        correlating as f64 / bone.len() as f64
    };
    let correlation_coverage = CorrelationCriterion {
        bone_points: bone.len(),
        correlating_fraction,
        excluded: correlating_fraction < config.min_correlating_fraction,
    };

    let error_uncertainty = match uncertainty {
        None => UncertaintyCriterion::NotEvaluated {
            reason: "no zero-strain uncertainty field".into(),
        },
        Some(u) if u.len() != grid.num_points() => {
            return Err(HfeError::GridMismatch(
                "uncertainty field does not match grid".into(),
            ))
        }
        Some(u) => {
            let errors = pairs.errors();
            let directions = [0, 1, 2].map(|d| {
                let (x, y): (Vec<f64>, Vec<f64>) = pairs
                    .grid_index
                    .iter()
                    .zip(&errors)
                    .filter_map(|(&g, e)| u[g].map(|s| (s, e[d].abs())))
                    .unzip();
                match regression_metrics(&x, &y) {
                    Ok(m) => DirectionDependence::Evaluated {
                        r2: m.r2,
                        slope: m.slope,
                        n_points: m.n_points,
                        strong: m.r2 > config.r2_threshold && m.slope > 0.0,
                    },
                    Err(e) => DirectionDependence::NotEvaluated {
                        reason: e.to_string(),
                    },
                }
            });
            let excluded = directions
                .iter()
                .any(|d| matches!(d, DirectionDependence::Evaluated { strong: true, .. }));
            UncertaintyCriterion::Evaluated {
                directions,
                excluded,
            }
        }
    };

    let excluded =
        strain_limits.excluded || correlation_coverage.excluded || error_uncertainty.excluded();
    Ok(ExclusionReport {
        strain_limits,
        correlation_coverage,
        error_uncertainty,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dvc::GridGeometry;

    fn grid() -> DvcGrid {
        DvcGrid::from_fn(
            GridGeometry::new([0.0; 3], 1.0, [10, 10, 1]).unwrap(),
            |_| Some([0.0; 3]),
        )
    }

    fn pairs(grid: &DvcGrid, error: impl Fn(usize) -> f64) -> PairedSamples {
        let mut p = PairedSamples::default();
        for i in 0..grid.num_points() {
            p.grid_index.push(i);
            p.points.push(grid.geometry().position_of(i));
            p.dvc.push([0.0; 3]);
            let e = error(i);
            p.fe.push([e, -e, 0.5 * e]);
        }
        p
    }

    fn uniaxial(e: f64) -> Option<SymTensor> {
        Some(SymTensor::new(0.0, 0.0, -e, 0.0, 0.0, 0.0))
    }

    #[test]
    fn low_strains_pass_with_zero_fraction() {
        let g = grid();
        let strains = vec![uniaxial(0.005); g.num_points()];
        let r = exclusion_check(
            &pairs(&g, |_| 0.0),
            &strains,
            &g,
            None,
            &ExclusionConfig::default(),
        )
        .unwrap();
        assert_eq!(r.strain_limits.failed_fraction, 0.0);
        assert_eq!(r.strain_limits.warning_fraction, 0.0);
        assert!(!r.excluded);
        assert!(matches!(
            r.error_uncertainty,
            UncertaintyCriterion::NotEvaluated { .. }
        ));
    }

    #[test]
    fn thirty_percent_over_the_limit_fails_criterion_one() {
        let g = grid();
        let strains: Vec<_> = (0..100)
            .map(|i| uniaxial(if i % 10 < 3 { 0.02 } else { 0.002 }))
            .collect();
        let r = exclusion_check(
            &pairs(&g, |_| 0.0),
            &strains,
            &g,
            None,
            &ExclusionConfig::default(),
        )
        .unwrap();
        assert!((r.strain_limits.failed_fraction - 0.3).abs() < 1e-15);
        assert!(r.strain_limits.excluded && r.excluded);
        assert!(!r.correlation_coverage.excluded);
    }

    #[test]
    fn error_proportional_to_uncertainty_fails_criterion_three() {
        let g = grid();
        let unc: Vec<Option<f64>> = (0..100)
            .map(|i| Some(1e-4 * (1.0 + (i * 37 % 100) as f64)))
            .collect();
        let p = pairs(&g, |i| 3.0 * unc[i].unwrap());
        let strains = vec![uniaxial(0.001); 100];
        let r = exclusion_check(&p, &strains, &g, Some(&unc), &ExclusionConfig::default()).unwrap();
        match &r.error_uncertainty {
            UncertaintyCriterion::Evaluated {
                directions,
                excluded,
            } => {
                assert!(excluded);
                for d in directions {
                    let DirectionDependence::Evaluated { r2, .. } = d else {
                        panic!()
                    };
                    assert!((r2 - 1.0).abs() < 1e-12);
                }
            }
            other => panic!("{other:?}"),
        }
        assert!(!r.strain_limits.excluded && !r.correlation_coverage.excluded);
    }

    #[test]
    fn criterion_three_is_scale_invariant() {
        let g = grid();
        let unc: Vec<Option<f64>> = (0..100)
            .map(|i| Some(1e-4 * (1.0 + (i * 37 % 100) as f64)))
            .collect();
        let strains = vec![uniaxial(0.001); 100];
        let err = |i: usize| unc[i].unwrap() * (1.0 + ((i * 13) % 7) as f64);
        let r2_of = |scale: f64| {
            let p = pairs(&g, |i| scale * err(i));
            match exclusion_check(&p, &strains, &g, Some(&unc), &ExclusionConfig::default())
                .unwrap()
                .error_uncertainty
            {
                UncertaintyCriterion::Evaluated {
                    directions: [DirectionDependence::Evaluated { r2, .. }, ..],
                    ..
                } => r2,
                other => panic!("{other:?}"),
            }
        };
        assert!((r2_of(1.0) - r2_of(250.0)).abs() < 1e-12);
    }

    #[test]
    fn sparse_correlation_fails_criterion_two() {
        let mut g = grid();
        for i in 0..60 {
            g.set_correlate(i, false);
        }
        let strains = vec![uniaxial(0.001); 100];
        let r = exclusion_check(
            &pairs(&g, |_| 0.0),
            &strains,
            &g,
            None,
            &ExclusionConfig::default(),
        )
        .unwrap();
        assert!((r.correlation_coverage.correlating_fraction - 0.4).abs() < 1e-15);
        assert!(r.correlation_coverage.excluded);
        assert!(!r.strain_limits.excluded);
    }
}
