//! Standard normal density and distribution, accurate to double precision in
//! both tails (Cody's rational Chebyshev approximations).

// Coefficients are kept as published.
#![allow(clippy::excessive_precision)]
use std::f64::consts::PI;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

const A: [f64; 5] = [
    2.2352520354606839287,
    161.02823106855587881,
    1067.6894854603709582,
    18154.981253343561249,
    0.065682337918207449113,
];
const B: [f64; 4] = [
    47.20258190468824187,
    976.09855173777669322,
    10260.932208618978205,
    45507.789335026729956,
];
const C: [f64; 9] = [
    0.39894151208813466764,
    8.8831497943883759412,
    93.506656132177855979,
    597.27027639480026226,
    2494.5375852903726711,
    6848.1904505362823326,
    11602.651437647350124,
    9842.7148383839780218,
    1.0765576773720192317e-8,
];
const D: [f64; 8] = [
    22.266688044328115691,
    235.38790178262499861,
    1519.377599407554805,
    6485.558298266760755,
    18615.571640885098091,
    34900.952721145977266,
    38912.003286093271411,
    19685.429676859990727,
];
const P: [f64; 6] = [
    0.21589853405795699,
    0.1274011611602473639,
    0.022235277870649807,
    0.001421619193227893466,
    2.9112874951168792e-5,
    0.02307344176494017303,
];
const Q: [f64; 5] = [
    1.28426009614491121,
    0.468238212480865118,
    0.0659881378689285515,
    0.00378239633202758244,
    7.29751555083966205e-5,
];

pub fn norm_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// `exp(-x^2 / 2)` split so the square does not lose low-order bits.
fn gauss_factor(x: f64) -> f64 {
    let xsq = (x * 16.0).trunc() / 16.0;
    let del = (x - xsq) * (x + xsq);
    (-xsq * xsq * 0.5).exp() * (-del * 0.5).exp()
}

/// `(Phi(x), 1 - Phi(x))`, each with full relative accuracy.
fn cdf_both(x: f64) -> (f64, f64) {
    let y = x.abs();
    if y <= 0.67448975 {
        let xsq = if y > f64::EPSILON * 0.5 { x * x } else { 0.0 };
        let (mut num, mut den) = (A[4] * xsq, xsq);
        for i in 0..3 {
            num = (num + A[i]) * xsq;
            den = (den + B[i]) * xsq;
        }
        let t = x * (num + A[3]) / (den + B[3]);
        return (0.5 + t, 0.5 - t);
    }
    let tail = if y <= 32f64.sqrt() {
        let (mut num, mut den) = (C[8] * y, y);
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        gauss_factor(y) * (num + C[7]) / (den + D[7])
    } else {
        let xsq = 1.0 / (x * x);
        let (mut num, mut den) = (P[5] * xsq, xsq);
        for i in 0..4 {
            num = (num + P[i]) * xsq;
            den = (den + Q[i]) * xsq;
        }
        let t = xsq * (num + P[4]) / (den + Q[4]);
        gauss_factor(y) * (FRAC_1_SQRT_2PI - t) / y
    };
    if x > 0.0 {
        (1.0 - tail, tail)
    } else {
        (tail, 1.0 - tail)
    }
}

pub fn norm_cdf(z: f64) -> f64 {
    cdf_both(z).0
}

/// Upper tail `1 - Phi(z)` without cancellation.
pub fn norm_sf(z: f64) -> f64 {
    cdf_both(z).1
}

pub fn log_norm_cdf(z: f64) -> f64 {
    if z > 0.0 {
        (-norm_sf(z)).ln_1p()
    } else if z > -30.0 {
        norm_cdf(z).ln()
    } else {
        // Asymptotic Mills-ratio series.
        let x = -z;
        let x2 = x * x;
        -0.5 * x2 - x.ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// `pdf(z) / cdf(z)`, the derivative of `log_norm_cdf`.
pub(crate) fn inverse_mills(z: f64) -> f64 {
    if z > -30.0 {
        norm_pdf(z) / norm_cdf(z)
    } else {
        let x = -z;
        let x2 = x * x;
        x / (1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // (x, Phi(x), 1 - Phi(x)) from 50-digit arithmetic.
    const REFERENCE: [(f64, f64, f64); 15] = [
        (-37.0, 5.7255712225245768227e-300, 1.0),
        (-20.0, 2.7536241186062336951e-89, 1.0),
        (-10.0, 7.619853024160526066e-24, 1.0),
        (-5.7, 5.9903714010635344298e-9, 0.99999999400962859894),
        (-5.6, 1.0717590258310907355e-8, 0.99999998928240974169),
        (-3.0, 0.0013498980316300945267, 0.99865010196836990547),
        (-1.0, 0.15865525393145705141, 0.84134474606854294859),
        (-0.6744, 0.25002852137294061452, 0.74997147862705938548),
        (-0.3, 0.38208857781104736269, 0.61791142218895263731),
        (0.2, 0.57925970943910302304, 0.42074029056089697696),
        (0.67, 0.74857110490468988571, 0.25142889509531011429),
        (1.959963984540054, 0.97499999999999998623, 0.025000000000000013765),
        (4.0, 0.99996832875816688008, 0.000031671241833119921254),
        (6.0, 0.99999999901341235496, 9.865876450376981407e-10),
        (8.2, 0.99999999999999987981, 1.201935154273578711e-16),
    ];

    #[test]
    fn matches_high_precision_reference() {
        for (x, cdf, sf) in REFERENCE {
            assert!((norm_cdf(x) / cdf - 1.0).abs() < 1e-14, "cdf({x}) = {} vs {cdf}", norm_cdf(x));
            assert!((norm_sf(x) / sf - 1.0).abs() < 1e-14, "sf({x}) = {} vs {sf}", norm_sf(x));
        }
        assert_eq!(norm_cdf(0.0), 0.5);
        assert!((norm_pdf(0.0) - 0.3989422804014327).abs() < 1e-16);
    }

    #[test]
    fn tails_are_continuous() {
        let (a, b) = (log_norm_cdf(-30.0 + 1e-9), log_norm_cdf(-30.0 - 1e-9));
        assert!((a - b).abs() < 1e-6);
        let (a, b) = (inverse_mills(-30.0 + 1e-9), inverse_mills(-30.0 - 1e-9));
        assert!((a - b).abs() < 1e-6);
        assert!(inverse_mills(8.0) < 1e-14);
    }

    #[test]
    fn mills_is_the_log_cdf_derivative() {
        for z in [-25.0, -5.0, -1.0, 0.0, 0.7, 3.0] {
            let h = 1e-6;
            let fd = (log_norm_cdf(z + h) - log_norm_cdf(z - h)) / (2.0 * h);
            assert!((fd - inverse_mills(z)).abs() <= 1e-6 * inverse_mills(z).max(1.0));
        }
    }
}
