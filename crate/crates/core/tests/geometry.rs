//! Property tests of the Jacobi metric, its geodesics and the two geodesic
//! backends against independent oracles.

use approx::assert_relative_eq;
use nalgebra::Matrix3;
use proptest::prelude::*;

use jacobi_transfer::heatflow::{flow_from, flow_to_geodesic, initial_curve, HeatFlowConfig, Homotopy};
use jacobi_transfer::kepler::{a_min, solve_transfer_ellipses, EllipseTransfer};
use jacobi_transfer::spectral::lobatto_params;
use jacobi_transfer::*;

fn earth() -> GravityModel {
    GravityModel::kepler(BodyConstants::EARTH)
}

fn jupiter_j2() -> GravityModel {
    GravityModel::j2(BodyConstants::JUPITER).unwrap()
}

fn flat() -> JacobiMetric {
    let body = BodyConstants { mu: 1e-300, j2: 0.0, r_body: 1.0 };
    JacobiMetric::new(GravityModel::kepler(body), 1.0)
}

fn direction() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(z, lon)| {
        let s = (1.0 - z * z).sqrt();
        Vec3::new(s * lon.cos(), s * lon.sin(), z)
    })
}

fn point(rmin: f64, rmax: f64) -> impl Strategy<Value = Vec3> {
    (direction(), rmin..rmax).prop_map(|(d, r)| d * r)
}

/// Energy with a kinetic margin at `r`.
fn energy_above(model: &GravityModel, r: &Vec3, speed: f64) -> f64 {
    model.potential(r).unwrap() + 0.5 * speed * speed
}

/// Levi-Civita connection from central differences of the full metric
/// tensor: `Γ^i_jk = ½ g^il (∂_j g_lk + ∂_k g_lj − ∂_l g_jk)`.
fn christoffel_fd(m: &JacobiMetric, r: &Vec3) -> [[[f64; 3]; 3]; 3] {
    let h = 1e-5 * r.norm();
    let dg: Vec<Matrix3<f64>> = (0..3)
        .map(|k| {
            let mut e = Vec3::zeros();
            e[k] = h;
            (m.metric_at(&(r + e)).unwrap() - m.metric_at(&(r - e)).unwrap()) / (2.0 * h)
        })
        .collect();
    let ginv = m.metric_at(r).unwrap().try_inverse().unwrap();
    let mut out = [[[0.0; 3]; 3]; 3];
    for (i, oi) in out.iter_mut().enumerate() {
        for (j, oij) in oi.iter_mut().enumerate() {
            for (k, v) in oij.iter_mut().enumerate() {
                *v = (0..3)
                    .map(|l| 0.5 * ginv[(i, l)] * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]))
                    .sum();
            }
        }
    }
    out
}

fn check_christoffel(m: &JacobiMetric, r: &Vec3, u: &Vec3) -> std::result::Result<(), TestCaseError> {
    let got = m.christoffel(r).unwrap();
    let want = christoffel_fd(m, r);
    let scale = want.iter().flatten().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                prop_assert!((got[i][j][k] - want[i][j][k]).abs() <= 1e-6 * scale, "Γ[{i}][{j}][{k}]");
                prop_assert_eq!(got[i][j][k], got[i][k][j]);
            }
        }
    }
    let contracted = m.christoffel_contract(r, u).unwrap();
    for i in 0..3 {
        let direct: f64 = (0..3).flat_map(|j| (0..3).map(move |k| (j, k))).map(|(j, k)| got[i][j][k] * u[j] * u[k]).sum();
        prop_assert!((contracted[i] - direct).abs() <= 1e-12 * scale * u.norm_squared());
    }
    Ok(())
}

/// Scaled residual of the analytic conic, with derivatives from the Kepler
/// state rather than from any discretization. In Jacobi arclength `σ`,
/// `dt/dσ = 1/φ`, so `c' = v/φ` and `c'' = (a/φ − v φ̇/φ²)/φ` with
/// `φ̇ = 2 a·v`. Normalized like the discrete residual on `s = σ/L`.
fn analytic_residual(t: &EllipseTransfer, metric: &JacobiMetric, n: usize) -> f64 {
    let curve = t.to_discrete_curve(n).unwrap();
    let length = metric.curve_length(&curve).unwrap();
    let model = metric.model;
    let mut worst = 0.0f64;
    let mut speed2 = 0.0;
    for r in &curve.nodes {
        let v = t.velocity_at(r).unwrap();
        let acc = model.acceleration(r).unwrap();
        let phi = metric.conformal_factor(r).unwrap();
        let phi_dot = 2.0 * acc.dot(&v);
        let c1 = v / phi;
        let c2 = (acc / phi - v * (phi_dot / (phi * phi))) / phi;
        let res = c2 + metric.christoffel_contract(r, &c1).unwrap();
        worst = worst.max(res.norm());
        speed2 += c1.norm_squared();
    }
    length * worst / (speed2 / curve.len() as f64).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_gradient_and_hessian_match_finite_differences(r in point(72000.0, 6e5)) {
        let m = jupiter_j2();
        let h = 1e-5 * r.norm();
        let g = m.grad_potential(&r).unwrap();
        let hess = m.hessian_potential(&r).unwrap();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            let fd = (m.potential(&(r + e)).unwrap() - m.potential(&(r - e)).unwrap()) / (2.0 * h);
            prop_assert!((g[k] - fd).abs() <= 1e-7 * g.norm());
            let fd_col = (m.grad_potential(&(r + e)).unwrap() - m.grad_potential(&(r - e)).unwrap()) / (2.0 * h);
            for i in 0..3 {
                prop_assert!((hess[(i, k)] - fd_col[i]).abs() <= 1e-6 * hess.norm());
            }
        }
        prop_assert!((hess - hess.transpose()).norm() <= 1e-14 * hess.norm());
        prop_assert_eq!(m.acceleration(&r).unwrap(), -g);
    }

    #[test]
    fn christoffel_matches_levi_civita_kepler(r in point(6600.0, 60000.0), speed in 0.5..12.0f64, u in direction()) {
        let m = JacobiMetric::new(earth(), energy_above(&earth(), &r, speed));
        check_christoffel(&m, &r, &u)?;
    }

    #[test]
    fn christoffel_matches_levi_civita_j2(r in point(72000.0, 6e5), speed in 1.0..40.0f64, u in direction()) {
        let model = jupiter_j2();
        let m = JacobiMetric::new(model, energy_above(&model, &r, speed));
        check_christoffel(&m, &r, &u)?;
    }

    #[test]
    fn analytic_ellipses_are_geodesics(
        p0 in point(6600.0, 30000.0),
        pf in point(6600.0, 30000.0),
        stretch in 1.0001..3.0f64,
    ) {
        let a = a_min(&p0, &pf) * stretch;
        let Ok(ts) = solve_transfer_ellipses(3.986e5, &p0, &pf, a) else { return Ok(()) };
        for t in &ts {
            let metric = JacobiMetric::new(earth(), t.energy());
            let res = analytic_residual(t, &metric, 40);
            prop_assert!(res <= 1e-6, "focus {} arc {:?} e {}: {res:e}", t.focus, t.arc, t.eccentricity());
            // Same conic under the wrong energy is not a geodesic.
            let wrong = JacobiMetric::new(earth(), t.energy() * 0.9);
            prop_assert!(analytic_residual(t, &wrong, 40) > 1e-3);
        }
    }

    #[test]
    fn length_squared_bounded_by_energy(
        p0 in point(7000.0, 20000.0),
        pf in point(7000.0, 20000.0),
        bumps in prop::collection::vec(-0.3..0.3f64, 9),
    ) {
        let metric = JacobiMetric::new(earth(), -3.986e5 / (2.0 * 40000.0));
        let params = lobatto_params(21);
        let d = pf - p0;
        let side = d.cross(&Vec3::z()).try_normalize(1e-9).unwrap_or(Vec3::x()) * d.norm();
        let lift = d.cross(&side).normalize() * d.norm();
        let nodes: Vec<Vec3> = params
            .iter()
            .map(|&s| {
                let w = (std::f64::consts::PI * s).sin();
                let (b1, b2, b3) = (bumps[0] * w, bumps[1] * w * (1.0 - 2.0 * s), bumps[2] * w * w);
                // Reparameterize with a random monotone warp.
                let sw = s + bumps[3] * 0.5 * s * (1.0 - s);
                p0 + d * sw + side * b1 + lift * (b2 + b3)
            })
            .collect();
        let Ok(curve) = DiscreteCurve::new(nodes, params) else { return Ok(()) };
        if curve.nodes.iter().any(|r| r.norm() < 1000.0) {
            return Ok(());
        }
        let l = metric.curve_length(&curve).unwrap();
        let e = metric.curve_energy(&curve).unwrap();
        prop_assert!(l * l <= e * (1.0 + 1e-12), "L² {} > E {}", l * l, e);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flat_metric_flow_recovers_chord(p0 in point(1.0, 10.0), pf in point(1.0, 10.0)) {
        prop_assume!((pf - p0).norm() > 0.5);
        prop_assume!(p0.cross(&pf).norm() > 1e-3 * p0.norm() * pf.norm());
        // Flat space has a single class; the reflected guess collapses onto
        // the same chord and is rejected by the winding check.
        let homotopy = Homotopy::Direct;
        let metric = flat();
        let cfg = HeatFlowConfig::refine().with_nodes(17);
        let start = initial_curve(&p0, &pf, homotopy, 17).unwrap();
        let out = flow_from(&metric, &start, homotopy, &cfg).unwrap();
        prop_assert!(out.converged, "residual {:e}", out.final_residual);
        let d = pf - p0;
        let chord = d.norm();
        for (r, s) in out.curve.nodes.iter().zip(&out.curve.params) {
            prop_assert!((r - (p0 + d * *s)).norm() <= 1e-9 * chord);
        }
        prop_assert!((out.length - 2f64.sqrt() * chord).abs() <= 1e-9 * out.length);
    }

    #[test]
    fn converged_kepler_geodesics_have_energy_equal_length_squared(
        p0 in point(7000.0, 20000.0),
        pf in point(7000.0, 20000.0),
        stretch in 1.05..2.0f64,
    ) {
        prop_assume!(p0.cross(&pf).norm() > 0.05 * p0.norm() * pf.norm());
        let energy = -3.986e5 / (2.0 * a_min(&p0, &pf) * stretch);
        let metric = JacobiMetric::new(earth(), energy);
        let Ok(out) = flow_to_geodesic(&metric, &p0, &pf, Homotopy::Direct, &HeatFlowConfig::refine()) else {
            return Ok(());
        };
        prop_assume!(out.converged);
        let e = metric.curve_energy(&out.curve).unwrap();
        prop_assert!((e - out.length * out.length).abs() <= 1e-6 * e, "E {e} L² {}", out.length * out.length);
    }

    #[test]
    fn converged_j2_geodesics_have_energy_equal_length_squared(
        p0 in point(3e5, 6e5),
        pf in point(3e5, 6e5),
        margin in 0.2..1.0f64,
    ) {
        prop_assume!(p0.cross(&pf).norm() > 0.05 * p0.norm() * pf.norm());
        let model = jupiter_j2();
        let energy = -model.mu() / (2.0 * a_min(&p0, &pf)) * (1.0 - 0.5 * margin);
        let metric = JacobiMetric::new(model, energy);
        let Ok(out) = flow_to_geodesic(&metric, &p0, &pf, Homotopy::Direct, &HeatFlowConfig::refine()) else {
            return Ok(());
        };
        prop_assume!(out.converged);
        let e = metric.curve_energy(&out.curve).unwrap();
        prop_assert!((e - out.length * out.length).abs() <= 1e-6 * e);
    }
}

#[test]
fn ellipse_and_heat_flow_geodesics_agree() {
    let p0 = Vec3::new(7000.0, 0.0, 500.0);
    let pf = Vec3::new(-3000.0, 11000.0, 1500.0);
    let a = a_min(&p0, &pf) * 1.3;
    let ts = solve_transfer_ellipses(3.986e5, &p0, &pf, a).unwrap();
    let metric = ts[0].metric();
    let out = flow_to_geodesic(&metric, &p0, &pf, Homotopy::Direct, &HeatFlowConfig::refine()).unwrap();
    assert!(out.converged);
    let (v0, vf) = jacobi_transfer::heatflow::endpoint_velocities(&out).unwrap();
    // The flow lands on one of the two short-way conics.
    let t = ts
        .iter()
        .min_by(|x, y| {
            let dx = (x.departure_velocity().unwrap() - v0).norm();
            let dy = (y.departure_velocity().unwrap() - v0).norm();
            dx.total_cmp(&dy)
        })
        .unwrap();
    assert_eq!(t.arc, jacobi_transfer::Arc::Short);
    assert_relative_eq!(v0, t.departure_velocity().unwrap(), max_relative = 1e-6);
    assert_relative_eq!(vf, t.arrival_velocity().unwrap(), max_relative = 1e-6);
    let ell = t.to_discrete_curve(30).unwrap();
    assert_relative_eq!(metric.curve_length(&ell).unwrap(), out.length, max_relative = 1e-6);
}
