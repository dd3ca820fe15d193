//! Fixed quadrature rules on the reference triangle and on edges.

/// Barycentric point with weight normalised so that the weights sum to 1
/// (multiply by the cell area).
#[derive(Debug, Clone, Copy)]
pub struct TriPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// Degree of polynomial integrated exactly by [`triangle_rule`].
pub const TRIANGLE_DEGREE: usize = 5;

/// Seven-point symmetric rule exact for polynomials of degree 5.
pub fn triangle_rule() -> [TriPoint; 7] {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let b1 = (9.0 + 2.0 * s15) / 21.0;
    let w1 = (155.0 - s15) / 1200.0;
    let a2 = (6.0 + s15) / 21.0;
    let b2 = (9.0 - 2.0 * s15) / 21.0;
    let w2 = (155.0 + s15) / 1200.0;
    let third = 1.0 / 3.0;
    [
        TriPoint { bary: [third, third, third], weight: 9.0 / 40.0 },
        TriPoint { bary: [a1, a1, b1], weight: w1 },
        TriPoint { bary: [a1, b1, a1], weight: w1 },
        TriPoint { bary: [b1, a1, a1], weight: w1 },
        TriPoint { bary: [a2, a2, b2], weight: w2 },
        TriPoint { bary: [a2, b2, a2], weight: w2 },
        TriPoint { bary: [b2, a2, a2], weight: w2 },
    ]
}

/// Gauss-Legendre points on `[0, 1]` with weights summing to 1 (exact to degree 5).
pub fn edge_rule() -> [(f64, f64); 3] {
    let r = (0.6f64).sqrt() / 2.0;
    [(0.5 - r, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + r, 5.0 / 18.0)]
}
