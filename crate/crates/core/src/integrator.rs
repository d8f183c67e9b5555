//! Dormand–Prince 8(5,3) explicit Runge–Kutta integrator with adaptive step
//! control (Hairer, Nørsett & Wanner, "Solving ODEs I", DOP853).
//!
//! Only what the propagator needs is implemented: integration of a
//! fixed-size state to an exact end time, forward or backward.

use crate::error::{Error, Result};

/// Mixed absolute/relative tolerances applied componentwise.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const MAX_STEPS: usize = 2_000_000;
const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.333;
const MAX_SCALE: f64 = 6.0;

/// Integrate `dy/dt = f(t, y)` from `t0` to `t1`.
pub fn integrate<const N: usize, F>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    tol: Tolerance,
) -> Result<([f64; N], Stats)>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut stats = Stats::default();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((y0, stats));
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut dy = f(t, &y);
    stats.evaluations += 1;
    let mut h = initial_step(&f, t, &y, &dy, dir, span.abs(), tol);
    stats.evaluations += 1;
    let mut reject = false;

    while (t1 - t) * dir > 0.0 {
        if stats.accepted + stats.rejected > MAX_STEPS {
            return Err(Error::StepFailure { t, step: h });
        }
        let mut last = false;
        if (t + h - t1) * dir >= 0.0 {
            h = t1 - t;
            last = true;
        }
        let step = dop853_step(&f, t, &y, &dy, h);
        stats.evaluations += 11;
        let err = error_norm(&y, &step, h, tol);

        if err <= 1.0 {
            let scale = if err == 0.0 {
                MAX_SCALE
            } else {
                (SAFETY * err.powf(-1.0 / 8.0)).clamp(MIN_SCALE, MAX_SCALE)
            };
            t = if last { t1 } else { t + h };
            y = step.y;
            dy = f(t, &y);
            stats.evaluations += 1;
            stats.accepted += 1;
            h *= if reject { scale.min(1.0) } else { scale };
            reject = false;
        } else {
            let scale = MIN_SCALE.max(SAFETY * err.powf(-1.0 / 8.0));
            h *= scale;
            reject = true;
            stats.rejected += 1;
            if !h.is_finite() || h.abs() <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepFailure { t, step: h });
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepFailure { t, step: h });
        }
    }
    Ok((y, stats))
}

fn initial_step<const N: usize, F>(
    f: &F,
    t: f64,
    y: &[f64; N],
    dy: &[f64; N],
    dir: f64,
    span: f64,
    tol: Tolerance,
) -> f64
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let sk: Vec<f64> = y.iter().map(|v| tol.abs + tol.rel * v.abs()).collect();
    let norm = |v: &[f64; N]| -> f64 {
        (v.iter().zip(&sk).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / N as f64).sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(dy);
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    let mut y1 = [0.0; N];
    for i in 0..N {
        y1[i] = y[i] + dir * h0 * dy[i];
    }
    let dy1 = f(t + dir * h0, &y1);
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = dy1[i] - dy[i];
    }
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 8.0)
    };
    dir * (100.0 * h0).min(h1).min(span)
}

struct Step<const N: usize> {
    y: [f64; N],
    err5: [f64; N],
    err3: [f64; N],
}

fn error_norm<const N: usize>(y0: &[f64; N], step: &Step<N>, h: f64, tol: Tolerance) -> f64 {
    let mut e5 = 0.0;
    let mut e3 = 0.0;
    for i in 0..N {
        let sk = tol.abs + tol.rel * y0[i].abs().max(step.y[i].abs());
        e5 += (step.err5[i] / sk).powi(2);
        e3 += (step.err3[i] / sk).powi(2);
    }
    let mut deno = e5 + 0.01 * e3;
    if deno <= 0.0 {
        deno = 1.0;
    }
    h.abs() * e5 * (1.0 / (N as f64 * deno)).sqrt()
}

#[inline]
fn combine<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn dop853_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> Step<N>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    use coeffs::*;
    let k2 = f(t + C2 * h, &combine(y, h, &[(A21, k1)]));
    let k3 = f(t + C3 * h, &combine(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &combine(y, h, &[(A41, k1), (A43, &k3)]));
    let k5 = f(t + C5 * h, &combine(y, h, &[(A51, k1), (A53, &k3), (A54, &k4)]));
    let k6 = f(t + C6 * h, &combine(y, h, &[(A61, k1), (A64, &k4), (A65, &k5)]));
    let k7 = f(
        t + C7 * h,
        &combine(y, h, &[(A71, k1), (A74, &k4), (A75, &k5), (A76, &k6)]),
    );
    let k8 = f(
        t + C8 * h,
        &combine(y, h, &[(A81, k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)]),
    );
    let k9 = f(
        t + C9 * h,
        &combine(
            y,
            h,
            &[(A91, k1), (A94, &k4), (A95, &k5), (A96, &k6), (A97, &k7), (A98, &k8)],
        ),
    );
    let k10 = f(
        t + C10 * h,
        &combine(
            y,
            h,
            &[
                (A101, k1),
                (A104, &k4),
                (A105, &k5),
                (A106, &k6),
                (A107, &k7),
                (A108, &k8),
                (A109, &k9),
            ],
        ),
    );
    let k11 = f(
        t + C11 * h,
        &combine(
            y,
            h,
            &[
                (A111, k1),
                (A114, &k4),
                (A115, &k5),
                (A116, &k6),
                (A117, &k7),
                (A118, &k8),
                (A119, &k9),
                (A1110, &k10),
            ],
        ),
    );
    let k12 = f(
        t + h,
        &combine(
            y,
            h,
            &[
                (A121, k1),
                (A124, &k4),
                (A125, &k5),
                (A126, &k6),
                (A127, &k7),
                (A128, &k8),
                (A129, &k9),
                (A1210, &k10),
                (A1211, &k11),
            ],
        ),
    );

    let mut slope = [0.0; N];
    let mut err5 = [0.0; N];
    let mut err3 = [0.0; N];
    for i in 0..N {
        slope[i] = B1 * k1[i]
            + B6 * k6[i]
            + B7 * k7[i]
            + B8 * k8[i]
            + B9 * k9[i]
            + B10 * k10[i]
            + B11 * k11[i]
            + B12 * k12[i];
        err5[i] = slope[i] - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
        err3[i] = ER1 * k1[i]
            + ER6 * k6[i]
            + ER7 * k7[i]
            + ER8 * k8[i]
            + ER9 * k9[i]
            + ER10 * k10[i]
            + ER11 * k11[i]
            + ER12 * k12[i];
    }
    let mut y_new = *y;
    for i in 0..N {
        y_new[i] += h * slope[i];
    }
    Step { y: y_new, err5, err3 }
}

#[allow(clippy::excessive_precision, clippy::unreadable_literal)]
mod coeffs {
    pub const C2: f64 = 0.526001519587677318785587544488e-01;
    pub const C3: f64 = 0.789002279381515978178381316732e-01;
    pub const C4: f64 = 0.118350341907227396726757197510e+00;
    pub const C5: f64 = 0.281649658092772603273242802490e+00;
    pub const C6: f64 = 0.333333333333333333333333333333e+00;
    pub const C7: f64 = 0.25e+00;
    pub const C8: f64 = 0.307692307692307692307692307692e+00;
    pub const C9: f64 = 0.651282051282051282051282051282e+00;
    pub const C10: f64 = 0.6e+00;
    pub const C11: f64 = 0.857142857142857142857142857142e+00;

    pub const B1: f64 = 5.42937341165687622380535766363e-2;
    pub const B6: f64 = 4.45031289275240888144113950566e0;
    pub const B7: f64 = 1.89151789931450038304281599044e0;
    pub const B8: f64 = -5.8012039600105847814672114227e0;
    pub const B9: f64 = 3.1116436695781989440891606237e-1;
    pub const B10: f64 = -1.52160949662516078556178806805e-1;
    pub const B11: f64 = 2.01365400804030348374776537501e-1;
    pub const B12: f64 = 4.47106157277725905176885569043e-2;

    pub const BHH1: f64 = 0.244094488188976377952755905512e+00;
    pub const BHH2: f64 = 0.733846688281611857341361741547e+00;
    pub const BHH3: f64 = 0.220588235294117647058823529412e-01;

    pub const ER1: f64 = 0.1312004499419488073250102996e-01;
    pub const ER6: f64 = -0.1225156446376204440720569753e+01;
    pub const ER7: f64 = -0.4957589496572501915214079952e+00;
    pub const ER8: f64 = 0.1664377182454986536961530415e+01;
    pub const ER9: f64 = -0.3503288487499736816886487290e+00;
    pub const ER10: f64 = 0.3341791187130174790297318841e+00;
    pub const ER11: f64 = 0.8192320648511571246570742613e-01;
    pub const ER12: f64 = -0.2235530786388629525884427845e-01;

    pub const A21: f64 = 5.26001519587677318785587544488e-2;
    pub const A31: f64 = 1.97250569845378994544595329183e-2;
    pub const A32: f64 = 5.91751709536136983633785987549e-2;
    pub const A41: f64 = 2.95875854768068491816892993775e-2;
    pub const A43: f64 = 8.87627564304205475450678981324e-2;
    pub const A51: f64 = 2.41365134159266685502369798665e-1;
    pub const A53: f64 = -8.84549479328286085344864962717e-1;
    pub const A54: f64 = 9.24834003261792003115737966543e-1;
    pub const A61: f64 = 3.7037037037037037037037037037e-2;
    pub const A64: f64 = 1.70828608729473871279604482173e-1;
    pub const A65: f64 = 1.25467687566822425016691814123e-1;
    pub const A71: f64 = 3.7109375e-2;
    pub const A74: f64 = 1.70252211019544039314978060272e-1;
    pub const A75: f64 = 6.02165389804559606850219397283e-2;
    pub const A76: f64 = -1.7578125e-2;
    pub const A81: f64 = 3.70920001185047927108779319836e-2;
    pub const A84: f64 = 1.70383925712239993810214054705e-1;
    pub const A85: f64 = 1.07262030446373284651809199168e-1;
    pub const A86: f64 = -1.53194377486244017527936158236e-2;
    pub const A87: f64 = 8.27378916381402288758473766002e-3;
    pub const A91: f64 = 6.24110958716075717114429577812e-1;
    pub const A94: f64 = -3.36089262944694129406857109825e0;
    pub const A95: f64 = -8.68219346841726006818189891453e-1;
    pub const A96: f64 = 2.75920996994467083049415600797e1;
    pub const A97: f64 = 2.01540675504778934086186788979e1;
    pub const A98: f64 = -4.34898841810699588477366255144e1;
    pub const A101: f64 = 4.77662536438264365890433908527e-1;
    pub const A104: f64 = -2.48811461997166764192642586468e0;
    pub const A105: f64 = -5.90290826836842996371446475743e-1;
    pub const A106: f64 = 2.12300514481811942347288949897e1;
    pub const A107: f64 = 1.52792336328824235832596922938e1;
    pub const A108: f64 = -3.32882109689848629194453265587e1;
    pub const A109: f64 = -2.03312017085086261358222928593e-2;
    pub const A111: f64 = -9.3714243008598732571704021658e-1;
    pub const A114: f64 = 5.18637242884406370830023853209e0;
    pub const A115: f64 = 1.09143734899672957818500254654e0;
    pub const A116: f64 = -8.14978701074692612513997267357e0;
    pub const A117: f64 = -1.85200656599969598641566180701e1;
    pub const A118: f64 = 2.27394870993505042818970056734e1;
    pub const A119: f64 = 2.49360555267965238987089396762e0;
    pub const A1110: f64 = -3.0467644718982195003823669022e0;
    pub const A121: f64 = 2.27331014751653820792359768449e0;
    pub const A124: f64 = -1.05344954667372501984066689879e1;
    pub const A125: f64 = -2.00087205822486249909675718444e0;
    pub const A126: f64 = -1.79589318631187989172765950534e1;
    pub const A127: f64 = 2.79488845294199600508499808837e1;
    pub const A128: f64 = -2.85899827713502369474065508674e0;
    pub const A129: f64 = -8.87285693353062954433549289258e0;
    pub const A1210: f64 = 1.23605671757943030647266201528e1;
    pub const A1211: f64 = 6.43392746015763530355970484046e-1;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let tol = Tolerance { abs: 1e-14, rel: 1e-12 };
        let (y, stats) = integrate(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 5.0, tol).unwrap();
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-12);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn harmonic_oscillator_backward_and_forward() {
        let tol = Tolerance { abs: 1e-13, rel: 1e-12 };
        let f = |_: f64, y: &[f64; 2]| [y[1], -y[0]];
        let (fwd, _) = integrate(f, 0.0, [1.0, 0.0], 3.0, tol).unwrap();
        assert!((fwd[0] - 3.0f64.cos()).abs() < 1e-11);
        let (back, _) = integrate(f, 3.0, fwd, 0.0, tol).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-11 && back[1].abs() < 1e-11);
    }

    #[test]
    fn eighth_order_convergence_on_fixed_steps() {
        // Integrate y' = cos(t) with two step sizes; error ratio ≈ 2^8.
        let f = |t: f64, _: &[f64; 1]| [t.cos()];
        let run = |n: usize| {
            let h = 2.0 / n as f64;
            let mut y = [0.0];
            for i in 0..n {
                let t = i as f64 * h;
                let k1 = f(t, &y);
                y = dop853_step(&f, t, &y, &k1, h).y;
            }
            (y[0] - 2.0f64.sin()).abs()
        };
        let ratio = run(4) / run(8);
        assert!(ratio > 150.0, "ratio {ratio}");
    }

    #[test]
    fn zero_span_is_identity() {
        let tol = Tolerance { abs: 1e-9, rel: 1e-12 };
        let (y, _) = integrate(|_, y: &[f64; 2]| [y[1], 1.0], 1.0, [2.0, 3.0], 1.0, tol).unwrap();
        assert_eq!(y, [2.0, 3.0]);
    }
}
