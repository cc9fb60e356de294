//! Error function and normal distribution helpers (Cody's rational
//! Chebyshev approximations, accurate to double precision).

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

// Coefficients from W. J. Cody, "Rational Chebyshev approximation for the
// error function", Math. Comp. 23 (1969).
const P1: [f64; 5] = [
    3.209377589138469472562e3,
    3.774852376853020208137e2,
    1.138641541510501556495e2,
    3.161123743870565596947e0,
    1.857777061846031526730e-1,
];
const Q1: [f64; 5] = [
    2.844236833439170622273e3,
    1.282616526077372275645e3,
    2.440246379344441733056e2,
    2.360129095234412093499e1,
    1.0,
];
const P2: [f64; 9] = [
    1.23033935479799725272e3,
    2.05107837782607146532e3,
    1.71204761263407058314e3,
    8.81952221241769090411e2,
    2.98635138197400131132e2,
    6.61191906371416294775e1,
    8.88314979438837594118e0,
    5.64188496988670089180e-1,
    2.15311535474403846343e-8,
];
const Q2: [f64; 9] = [
    1.23033935480374942043e3,
    3.43936767414372163696e3,
    4.36261909014324715820e3,
    3.29079923573345962678e3,
    1.62138957456669018874e3,
    5.37181101862009857509e2,
    1.17693950891312499305e2,
    1.57449261107098347253e1,
    1.0,
];
const P3: [f64; 6] = [
    -6.58749161529837803157e-4,
    -1.60837851487422766278e-2,
    -1.25781726111229246204e-1,
    -3.60344899949804439429e-1,
    -3.05326634961232344035e-1,
    -1.63153871373020978498e-2,
];
const Q3: [f64; 6] = [
    2.33520497626869185443e-3,
    6.05183413124413191178e-2,
    5.27905102951428412248e-1,
    1.87295284992346047209e0,
    2.56852019228982242072e0,
    1.0,
];

fn polynomial(x: f64, coefs: &[f64]) -> f64 {
    coefs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    if ax <= 0.46875 {
        let t = x * x;
        x * polynomial(t, &P1) / polynomial(t, &Q1)
    } else {
        let e = erfc(ax);
        if x < 0.0 {
            e - 1.0
        } else {
            1.0 - e
        }
    }
}

pub fn erfc(x: f64) -> f64 {
    let ax = x.abs();
    let result = if ax <= 0.46875 {
        return 1.0 - erf(x);
    } else if ax <= 4.0 {
        (-ax * ax).exp() * polynomial(ax, &P2) / polynomial(ax, &Q2)
    } else {
        let t = 1.0 / (ax * ax);
        let frac = t * polynomial(t, &P3) / polynomial(t, &Q3);
        const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
        ((-ax * ax).exp() / ax) * (FRAC_1_SQRT_PI + frac)
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}
