//! Quadrature rules on the reference triangle and on edges.

/// Six-point symmetric rule, exact for polynomials of degree 4.
/// Points are barycentric; weights sum to one (multiply by the triangle area).
pub const TRIANGLE_DEGREE4: [([f64; 3], f64); 6] = {
    const A: f64 = 0.445_948_490_915_964_886_318_329_3;
    const WA: f64 = 0.223_381_589_678_011_465_695_007;
    const B: f64 = 0.091_576_213_509_770_743_459_571_46;
    const WB: f64 = 0.109_951_743_655_321_867_638_326_3;
    [
        ([A, A, 1.0 - 2.0 * A], WA),
        ([A, 1.0 - 2.0 * A, A], WA),
        ([1.0 - 2.0 * A, A, A], WA),
        ([B, B, 1.0 - 2.0 * B], WB),
        ([B, 1.0 - 2.0 * B, B], WB),
        ([1.0 - 2.0 * B, B, B], WB),
    ]
};

/// Three-point Gauss-Legendre on `[0, 1]`, exact to degree 5. Weights sum to one.
pub const EDGE_GAUSS3: [(f64, f64); 3] = {
    // sqrt(3/5) / 2
    const D: f64 = 0.387_298_334_620_741_688_517_926_5;
    [(0.5 - D, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + D, 5.0 / 18.0)]
};
