use crate::error::{Error, Result};

/// Quadrature on a reference simplex. Points are barycentric coordinates
/// (one per simplex vertex); weights sum to one and are scaled by the
/// element measure at use.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

pub const MAX_DEGREE: usize = 4;

impl QuadratureRule {
    /// Rule for a simplex with `vertices` ∈ {2, 3} corners exact to at least
    /// `degree`.
    pub fn for_simplex(vertices: usize, degree: usize) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::UnsupportedDegree(degree));
        }
        match vertices {
            2 => Ok(Self::gauss3()),
            3 => Ok(Self::dunavant4()),
            _ => Err(Error::InvalidMesh(format!("no quadrature for {vertices}-vertex simplices"))),
        }
    }

    /// 3-point Gauss–Legendre, exact to degree 5.
    pub fn gauss3() -> Self {
        let a = 0.5 * (0.6f64).sqrt();
        let pts = [0.5 - a, 0.5, 0.5 + a];
        QuadratureRule {
            points: pts.iter().map(|&s| [1.0 - s, s, 0.0]).collect(),
            weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
            degree: 5,
        }
    }

    /// 6-point symmetric triangle rule, exact to degree 4.
    pub fn dunavant4() -> Self {
        let orbit = |b: f64, w: f64| {
            let c = 1.0 - 2.0 * b;
            [([b, b, c], w), ([b, c, b], w), ([c, b, b], w)]
        };
        let mut points = Vec::with_capacity(6);
        let mut weights = Vec::with_capacity(6);
        for (p, w) in orbit(0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_70)
            .into_iter()
            .chain(orbit(0.091_576_213_509_770_743_460, 0.109_951_743_655_321_867_64))
        {
            points.push(p);
            weights.push(w);
        }
        QuadratureRule {
            points,
            weights,
            degree: 4,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}
