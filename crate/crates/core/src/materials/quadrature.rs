//! Tetrahedral quadrature in barycentric coordinates.

/// 11-point, degree-4 rule; weights normalized to sum to 1.
pub fn keast11() -> Vec<([f64; 4], f64)> {
    let mut pts = Vec::with_capacity(11);
    pts.push(([0.25; 4], -0.078_933_333_333_333_33));
    let (a, b) = (11.0 / 14.0, 1.0 / 14.0);
    for i in 0..4 {
        let mut l = [b; 4];
        l[i] = a;
        pts.push((l, 0.045_733_333_333_333_33));
    }
    let (c, d) = (0.399_403_576_166_799_2, 0.100_596_423_833_200_8);
    for &(i, j) in &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
        let mut l = [d; 4];
        l[i] = c;
        l[j] = c;
        pts.push((l, 0.149_333_333_333_333_33));
    }
    pts
}

/// Symmetric 4-point, degree-2 rule.
pub fn gauss4() -> [([f64; 4], f64); 4] {
    let a = 0.585_410_196_624_968_5;
    let b = 0.138_196_601_125_010_5;
    [
        ([a, b, b, b], 0.25),
        ([b, a, b, b], 0.25),
        ([b, b, a, b], 0.25),
        ([b, b, b, a], 0.25),
    ]
}

fn mid(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [0, 1, 2, 3].map(|i| 0.5 * (a[i] + b[i]))
}

/// Splits a tetrahedron (given by barycentric vertices) into eight of equal volume.
fn bisect(t: &[[f64; 4]; 4]) -> [[[f64; 4]; 4]; 8] {
    let [x0, x1, x2, x3] = t;
    let (x01, x02, x03) = (mid(x0, x1), mid(x0, x2), mid(x0, x3));
    let (x12, x13, x23) = (mid(x1, x2), mid(x1, x3), mid(x2, x3));
    [
        [*x0, x01, x02, x03],
        [x01, *x1, x12, x13],
        [x02, x12, *x2, x23],
        [x03, x13, x23, *x3],
        [x01, x02, x03, x13],
        [x01, x02, x12, x13],
        [x02, x03, x13, x23],
        [x02, x12, x13, x23],
    ]
}

/// Degree-4 rule applied on each sub-tetrahedron of `levels` uniform refinements.
#[derive(Debug, Clone)]
pub struct ElementQuadrature {
    points: Vec<([f64; 4], f64)>,
}

impl ElementQuadrature {
    pub fn new(levels: u32) -> Self {
        let unit = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let mut tets = vec![unit];
        for _ in 0..levels {
            tets = tets.iter().flat_map(bisect).collect();
        }
        let base = keast11();
        let scale = 1.0 / tets.len() as f64;
        let mut points = Vec::with_capacity(tets.len() * base.len());
        for t in &tets {
            for (l, w) in &base {
                let p = [0, 1, 2, 3].map(|i| (0..4).map(|v| l[v] * t[v][i]).sum::<f64>());
                points.push((p, w * scale));
            }
        }
        ElementQuadrature { points }
    }

    pub fn points(&self) -> &[([f64; 4], f64)] {
        &self.points
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Mean over the simplex of l0^a l1^b l2^c l3^d (closed form, volume normalized).
    fn exact_mean(e: [u32; 4]) -> f64 {
        let s: u32 = e.iter().sum();
        6.0 * e.iter().map(|&k| factorial(k)).product::<f64>() / factorial(s + 3)
    }

    #[test]
    fn rules_integrate_their_degree_exactly() {
        let k11 = keast11();
        let g4 = gauss4();
        assert!((k11.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-14);
        for a in 0..=4u32 {
            for b in 0..=4 - a {
                for c in 0..=4 - a - b {
                    for d in 0..=4 - a - b - c {
                        let e = [a, b, c, d];
                        let f =
                            |l: &[f64; 4]| (0..4).map(|i| l[i].powi(e[i] as i32)).product::<f64>();
                        let q: f64 = k11.iter().map(|(l, w)| w * f(l)).sum();
                        assert!((q - exact_mean(e)).abs() < 1e-14, "keast {e:?}");
                        if a + b + c + d <= 2 {
                            let q2: f64 = g4.iter().map(|(l, w)| w * f(l)).sum();
                            assert!((q2 - exact_mean(e)).abs() < 1e-15, "gauss4 {e:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn refinement_keeps_exactness() {
        let q = ElementQuadrature::new(2);
        assert_eq!(q.points().len(), 64 * 11);
        let e = [2u32, 1, 0, 1];
        let val: f64 = q
            .points()
            .iter()
            .map(|(l, w)| w * (0..4).map(|i| l[i].powi(e[i] as i32)).product::<f64>())
            .sum();
        assert!((val - exact_mean(e)).abs() < 1e-14);
    }
}
