//! Triangle and hexagonal lattices that pick three random exemplar patches
//! per query point.
//!
//! The lattice has edge length `grid_scale` (exemplar UV units) and basis
//! `e1 = (s, 0)`, `e2 = (s / 2, s * sqrt(3) / 2)`. Vertex `(i, j)` draws its
//! patch offset from
//!
//! ```text
//! h = splitmix64(seed); h = splitmix64(h ^ i); h = splitmix64(h ^ j)
//! offset = ((h >> 40) / 2^24, ((h >> 16) & 0xffffff) / 2^24)
//! ```
//!
//! with `i`, `j` reinterpreted as two's-complement `u64`.

/// One selected patch: where to read the exemplar and how much it contributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchLookup {
    pub offset: [f64; 2],
    pub weight: f64,
}

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Uniform offset in `[0, 1)^2` for lattice vertex `(i, j)`.
#[inline]
pub fn vertex_offset(i: i64, j: i64, seed: u64) -> [f64; 2] {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ i as u64);
    h = splitmix64(h ^ j as u64);
    let scale = 1.0 / (1u64 << 24) as f64;
    [(h >> 40) as f64 * scale, ((h >> 16) & 0xff_ffff) as f64 * scale]
}

/// Position of lattice vertex `(i, j)` in exemplar UV.
#[inline]
pub fn vertex_position(i: i64, j: i64, s: f64) -> [f64; 2] {
    [s * (i as f64 + 0.5 * j as f64), s * SQRT3_2 * j as f64]
}

/// The three vertices of the lattice triangle containing `p` and their
/// barycentric weights.
#[inline]
pub fn triangle_vertices(p: [f64; 2], grid_scale: f64) -> [((i64, i64), f64); 3] {
    let fj = p[1] / (grid_scale * SQRT3_2);
    let fi = p[0] / grid_scale - 0.5 * fj;
    let (i0, j0) = (fi.floor(), fj.floor());
    let (a, b) = (fi - i0, fj - j0);
    let (i, j) = (i0 as i64, j0 as i64);
    if a + b < 1.0 {
        [((i, j), 1.0 - a - b), ((i + 1, j), a), ((i, j + 1), b)]
    } else {
        [((i + 1, j + 1), a + b - 1.0), ((i, j + 1), 1.0 - a), ((i + 1, j), 1.0 - b)]
    }
}

fn lookups(u_star: [f64; 2], grid_scale: f64, seed: u64, weights: impl Fn([f64; 3]) -> [f64; 3]) -> [PatchLookup; 3] {
    let verts = triangle_vertices(u_star, grid_scale);
    let w = weights([verts[0].1, verts[1].1, verts[2].1]);
    let mut out = [PatchLookup {
        offset: [0.0; 2],
        weight: 0.0,
    }; 3];
    for (k, ((i, j), _)) in verts.iter().enumerate() {
        let o = vertex_offset(*i, *j, seed);
        let v = vertex_position(*i, *j, grid_scale);
        out[k] = PatchLookup {
            offset: [o[0] + (u_star[0] - v[0]), o[1] + (u_star[1] - v[1])],
            weight: w[k],
        };
    }
    out
}

/// Barycentric weights on the triangle lattice.
pub fn triangle_grid_lookup(u_star: [f64; 2], grid_scale: f64, seed: u64) -> [PatchLookup; 3] {
    lookups(u_star, grid_scale, seed, |w| w)
}

/// Hex tiling: lattice vertices are hexagon centers; the barycentric weights
/// are sharpened as `w^exponent` and renormalized, which makes each hexagon's
/// center fully opaque and confines blending to a band along cell borders.
pub fn hex_grid_lookup(u_star: [f64; 2], grid_scale: f64, seed: u64, exponent: f64) -> [PatchLookup; 3] {
    lookups(u_star, grid_scale, seed, |w| {
        let p = [w[0].max(0.0).powf(exponent), w[1].max(0.0).powf(exponent), w[2].max(0.0).powf(exponent)];
        let s = p[0] + p[1] + p[2];
        [p[0] / s, p[1] / s, p[2] / s]
    })
}
