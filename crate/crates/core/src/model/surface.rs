use libm::exp;

/// Ingredients of the two-exponential value surface at a fixed belief.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceTerms {
    pub g: [f64; 2],
    pub kappa: [f64; 2],
}

/// v = sum g_i (1 - e^{-kappa_i x}) and v_x = sum kappa_i g_i e^{-kappa_i x}.
pub fn value_surface(terms: &SurfaceTerms, x: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut vx = 0.0;
    for i in 0..2 {
        let decay = exp(-terms.kappa[i] * x);
        v += terms.g[i] * (1.0 - decay);
        vx += terms.kappa[i] * terms.g[i] * decay;
    }
    (v, vx)
}
