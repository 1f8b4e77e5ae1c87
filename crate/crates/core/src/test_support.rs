//! Numerical oracles shared by unit and integration tests.

/// Adaptive Gauss-Kronrod (7/15) quadrature of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    adapt(&f, a, b, tol, 60)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (val, err) = gk15(f, a, b);
    if err <= tol.max(1e-15 * val.abs()) || depth == 0 {
        return val;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// Moments `(E[V], E[V^2])` of `N(mu, sigma2)` truncated to `(0, inf)` by quadrature.
pub fn truncated_moments_by_quadrature(mu: f64, sigma2: f64) -> (f64, f64) {
    let sigma = sigma2.sqrt();
    // integrate the standardized variable over the region carrying the mass
    let a = -mu / sigma;
    let lo = a.max(-40.0);
    let hi = lo.max(0.0) + 40.0;
    // shift the density by its log-value at the lower end to avoid underflow
    let base = lo.max(0.0);
    let dens = |t: f64| (-0.5 * (t - base) * (t + base)).exp();
    let z0 = integrate(dens, lo, hi, 1e-14);
    let z1 = integrate(|t| t * dens(t), lo, hi, 1e-14);
    let z2 = integrate(|t| t * t * dens(t), lo, hi, 1e-14);
    let (e1, e2) = (z1 / z0, z2 / z0);
    (mu + sigma * e1, mu * mu + 2.0 * mu * sigma * e1 + sigma2 * e2)
}
