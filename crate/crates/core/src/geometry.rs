//! Element-level geometry and closed-form P1 integrals on tetrahedra and
//! triangles.
//!
//! Integrals of products of barycentric coordinates use
//! `∫ λ₀^a λ₁^b λ₂^c λ₃^d dV = 6V a! b! c! d! / (a+b+c+d+3)!`, so every
//! quantity here is exact for linear coefficient fields.

use num_complex::Complex64;

pub type Point = [f64; 3];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn distance(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// Signed volume of the tetrahedron `(p0, p1, p2, p3)`; positive when
/// `p3` lies on the side of `(p0, p1, p2)` given by the right-hand rule.
pub fn signed_volume(p: &[Point; 4]) -> f64 {
    let e1 = sub(p[1], p[0]);
    let e2 = sub(p[2], p[0]);
    let e3 = sub(p[3], p[0]);
    dot(e1, cross(e2, e3)) / 6.0
}

/// Volume and constant barycentric gradients of a P1 tetrahedron.
#[derive(Debug, Clone, Copy)]
pub struct TetGeometry {
    pub volume: f64,
    pub grads: [Point; 4],
}

impl TetGeometry {
    pub fn new(p: &[Point; 4]) -> Self {
        let e1 = sub(p[1], p[0]);
        let e2 = sub(p[2], p[0]);
        let e3 = sub(p[3], p[0]);
        let c23 = cross(e2, e3);
        let det = dot(e1, c23);
        let g1 = scale(c23, 1.0 / det);
        let g2 = scale(cross(e3, e1), 1.0 / det);
        let g3 = scale(cross(e1, e2), 1.0 / det);
        let g0 = [
            -(g1[0] + g2[0] + g3[0]),
            -(g1[1] + g2[1] + g3[1]),
            -(g1[2] + g2[2] + g3[2]),
        ];
        TetGeometry {
            volume: det / 6.0,
            grads: [g0, g1, g2, g3],
        }
    }

    /// `V ∇λ_a · ∇λ_b`, symmetric in `(a, b)` bit for bit.
    pub fn stiffness(&self) -> [[f64; 4]; 4] {
        let mut k = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in a..4 {
                let v = self.volume * dot(self.grads[a], self.grads[b]);
                k[a][b] = v;
                k[b][a] = v;
            }
        }
        k
    }

    /// Gradient of the P1 function with nodal values `u`.
    pub fn gradient(&self, u: [f64; 4]) -> Point {
        let mut g = [0.0; 3];
        for a in 0..4 {
            for d in 0..3 {
                g[d] += u[a] * self.grads[a][d];
            }
        }
        g
    }

    pub fn gradient_c(&self, u: [Complex64; 4]) -> [Complex64; 3] {
        let mut g = [Complex64::new(0.0, 0.0); 3];
        for a in 0..4 {
            for d in 0..3 {
                g[d] += u[a] * self.grads[a][d];
            }
        }
        g
    }
}

/// `∫ c λ_a λ_b dV` for a P1 coefficient `c` with nodal values `coef`.
pub fn weighted_mass(volume: f64, coef: [f64; 4]) -> [[f64; 4]; 4] {
    let s = coef[0] + coef[1] + coef[2] + coef[3];
    let w = volume / 120.0;
    let mut m = [[0.0; 4]; 4];
    for a in 0..4 {
        m[a][a] = w * (2.0 * s + 4.0 * coef[a]);
        for b in (a + 1)..4 {
            let v = w * (s + (coef[a] + coef[b]));
            m[a][b] = v;
            m[b][a] = v;
        }
    }
    m
}

/// `∫ λ_a λ_b dV`.
pub fn unit_mass(volume: f64) -> [[f64; 4]; 4] {
    let mut m = [[volume / 20.0; 4]; 4];
    for (a, row) in m.iter_mut().enumerate() {
        row[a] = volume / 10.0;
    }
    m
}

/// `∫ λ_n u w dV` for P1 functions `u`, `w` given by their nodal values.
pub fn triple_product(volume: f64, n: usize, u: [Complex64; 4], w: [Complex64; 4]) -> Complex64 {
    let su = u[0] + u[1] + u[2] + u[3];
    let sw = w[0] + w[1] + w[2] + w[3];
    let uw = u[0] * w[0] + u[1] * w[1] + u[2] * w[2] + u[3] * w[3];
    (su * sw + u[n] * sw + w[n] * su + uw + 2.0 * u[n] * w[n]) * (volume / 120.0)
}

/// Area and unit normal (right-hand rule) of a triangle.
pub fn triangle_area_normal(p: &[Point; 3]) -> (f64, Point) {
    let c = cross(sub(p[1], p[0]), sub(p[2], p[0]));
    let n = norm(c);
    if n == 0.0 {
        (0.0, [0.0; 3])
    } else {
        (0.5 * n, scale(c, 1.0 / n))
    }
}

/// `∫ λ_a λ_b dS` on a triangle of the given area.
pub fn facet_mass(area: f64) -> [[f64; 3]; 3] {
    let mut m = [[area / 12.0; 3]; 3];
    for (a, row) in m.iter_mut().enumerate() {
        row[a] = area / 6.0;
    }
    m
}

pub fn centroid<const K: usize>(p: &[Point; K]) -> Point {
    let mut c = [0.0; 3];
    for q in p {
        for d in 0..3 {
            c[d] += q[d];
        }
    }
    scale(c, 1.0 / K as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: [Point; 4] = [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ];

    // Degree-3 Keast rule on the reference tetrahedron (weights sum to 1).
    fn keast5() -> Vec<([f64; 4], f64)> {
        let mut pts = vec![([0.25; 4], -0.8)];
        for i in 0..4 {
            let mut l = [1.0 / 6.0; 4];
            l[i] = 0.5;
            pts.push((l, 0.45));
        }
        pts
    }

    #[test]
    fn unit_tet_geometry() {
        let g = TetGeometry::new(&UNIT);
        assert!((g.volume - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(g.grads[1], [1.0, 0.0, 0.0]);
        assert_eq!(g.grads[0], [-1.0, -1.0, -1.0]);
        let k = g.stiffness();
        assert!((k[0][0] - 0.5).abs() < 1e-15);
        assert!((k[0][1] + 1.0 / 6.0).abs() < 1e-15);
        assert!((k[1][2]).abs() < 1e-15);
    }

    #[test]
    fn weighted_mass_matches_quadrature() {
        let p = [
            [0.1, 0.0, 0.2],
            [1.3, 0.1, 0.0],
            [0.2, 0.9, 0.1],
            [0.3, 0.2, 1.1],
        ];
        let g = TetGeometry::new(&p);
        let coef = [0.3, 1.7, 0.9, 2.2];
        let m = weighted_mass(g.volume, coef);
        for a in 0..4 {
            for b in 0..4 {
                let q: f64 = keast5()
                    .iter()
                    .map(|(l, w)| {
                        let c: f64 = (0..4).map(|i| coef[i] * l[i]).sum();
                        w * c * l[a] * l[b]
                    })
                    .sum::<f64>()
                    * g.volume;
                assert!((m[a][b] - q).abs() < 1e-14, "{a}{b}: {} vs {q}", m[a][b]);
            }
        }
    }

    #[test]
    fn triple_product_matches_quadrature() {
        let g = TetGeometry::new(&UNIT);
        let u = [0.3, -1.0, 2.0, 0.5].map(|x| Complex64::new(x, 0.1 * x));
        let w = [1.0, 0.2, -0.7, 0.4].map(|x| Complex64::new(x, -0.3));
        for n in 0..4 {
            let q: Complex64 = keast5()
                .iter()
                .map(|(l, wt)| {
                    let uu: Complex64 = (0..4).map(|i| u[i] * l[i]).sum();
                    let ww: Complex64 = (0..4).map(|i| w[i] * l[i]).sum();
                    uu * ww * l[n] * *wt
                })
                .sum::<Complex64>()
                * g.volume;
            let t = triple_product(g.volume, n, u, w);
            assert!((t - q).norm() < 1e-14);
        }
    }

    #[test]
    fn facet_area_and_normal() {
        let (a, n) = triangle_area_normal(&[[0.0; 3], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert_eq!(a, 1.0);
        assert_eq!(n, [0.0, 0.0, 1.0]);
    }
}
