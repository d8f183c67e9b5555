//! Benchmark scenarios, solve/contour drivers and the reports they produce.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::astro::{BodyConstants, GravityModel, ModelKind, OrbitState, Vec3};
use crate::error::{Error, Result};
use crate::io;
use crate::planner::{
    coarse_search, contour_grid, count_near_optimal_regions, propagation_miss, refine, refine_only, Backend,
    Branch, ContourGrid, PlannerConfig, SearchDiagnostics, TransferProblem, TransferSolution,
};

/// Bundled fixtures: `(name, json)`.
pub const BUNDLED: [(&str, &str); 5] = [
    ("leo_heo", include_str!("../scenarios/leo_heo.json")),
    ("gto_rgeo", include_str!("../scenarios/gto_rgeo.json")),
    ("earth_dionysus", include_str!("../scenarios/earth_dionysus.json")),
    ("jupiter_io", include_str!("../scenarios/jupiter_io.json")),
    ("jupiter_io_smoke", include_str!("../scenarios/jupiter_io_smoke.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub body: BodyConstants,
    pub model: ModelKind,
    pub initial: OrbitState,
    pub target: OrbitState,
    pub planner: PlannerConfig,
}

impl Scenario {
    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let s: Scenario = io::from_json(text, source)?;
        s.validate().map_err(|e| Error::invalid(format!("{source}: {e}")))?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&io::read_text(path)?, &path.display().to_string())
    }

    pub fn bundled(name: &str) -> Option<Self> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(n, text)| Self::from_json(text, n).expect("bundled scenarios are valid"))
    }

    /// A file path if one exists, otherwise a bundled scenario name.
    pub fn resolve(arg: &str) -> Result<Self> {
        let path = Path::new(arg);
        if path.exists() {
            return Self::load(path);
        }
        Self::bundled(arg).ok_or_else(|| {
            let names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
            Error::invalid(format!("{arg}: no such file or bundled scenario ({})", names.join(", ")))
        })
    }

    pub fn gravity(&self) -> Result<GravityModel> {
        GravityModel::new(self.body, self.model)
    }

    pub fn problem(&self) -> Result<TransferProblem> {
        TransferProblem::new(self.gravity()?, self.initial, self.target)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::invalid("name must not be empty"));
        }
        self.problem()?;
        self.planner.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    CoarseToFine,
    RefineOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDiagnostics {
    /// Coarse-grid counters; all zero except `refine_evaluations` in
    /// refine-only mode.
    pub search: SearchDiagnostics,
    pub coarse_best_dv: Option<f64>,
    pub local_runs: usize,
    pub hops_accepted: usize,
    /// Scaled geodesic residual of the stored curve.
    pub residual: f64,
    /// Distance between the arrival point and the endpoint reached by
    /// propagating the departure state for the time of flight (km).
    pub propagation_miss: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub scenario: String,
    pub mode: Mode,
    pub model: GravityModel,
    pub total_dv: f64,
    pub dv0: Vec3,
    pub dvf: Vec3,
    pub tof: f64,
    pub branch: Branch,
    pub energy: f64,
    pub solution: TransferSolution,
    pub diagnostics: ReportDiagnostics,
    pub config: PlannerConfig,
}

impl SolutionReport {
    /// The report with timing fields cleared, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.diagnostics.wall_time_s = 0.0;
        r
    }
}

/// Run the planner on `scenario` with its own configuration. Refine-only
/// mode swaps in the refine-only search settings.
pub fn solve(scenario: &Scenario, mode: Mode) -> Result<SolutionReport> {
    let start = Instant::now();
    let problem = scenario.problem()?;
    let config = match mode {
        Mode::CoarseToFine => scenario.planner.clone(),
        Mode::RefineOnly => scenario.planner.refine_only_variant(),
    };
    config.validate()?;
    let (outcome, mut search, coarse_best_dv) = match mode {
        Mode::CoarseToFine => {
            let coarse = coarse_search(&problem, &config)?;
            let best = coarse.ranked.first().map(|s| s.total_dv);
            (refine(&problem, &config, &coarse.ranked)?, coarse.diagnostics, best)
        }
        Mode::RefineOnly => (refine_only(&problem, &config)?, SearchDiagnostics::default(), None),
    };
    search.refine_evaluations = outcome.evaluations;
    let sol = outcome.best;
    let miss = propagation_miss(&problem.model, &sol)?;
    Ok(SolutionReport {
        scenario: scenario.name.clone(),
        mode,
        model: problem.model,
        total_dv: sol.total_dv,
        dv0: sol.dv0,
        dvf: sol.dvf,
        tof: sol.tof,
        branch: sol.branch,
        energy: sol.energy,
        diagnostics: ReportDiagnostics {
            search,
            coarse_best_dv,
            local_runs: outcome.local_runs,
            hops_accepted: outcome.hops_accepted,
            residual: sol.residual,
            propagation_miss: miss,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        solution: sol,
        config,
    })
}

/// Cells within this ΔV of the grid minimum count as near-optimal (km/s).
pub const NEAR_OPTIMAL_TOL: f64 = 1e-3;

/// Sidecar metadata of an exported contour grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourReport {
    pub scenario: String,
    pub resolution: usize,
    /// Rows: fraction of the initial orbit, `i / resolution`.
    pub row_axis: String,
    /// Columns: fraction of the target orbit, `j / resolution`.
    pub column_axis: String,
    pub value: String,
    pub minimum_dv: Option<f64>,
    pub minimum_u0: Option<f64>,
    pub minimum_uf: Option<f64>,
    pub missing_cells: usize,
    pub near_optimal_tol: f64,
    pub near_optimal_regions: usize,
    pub wall_time_s: f64,
}

pub fn contour(scenario: &Scenario, resolution: usize) -> Result<(ContourGrid, ContourReport)> {
    let start = Instant::now();
    if scenario.planner.backend != Backend::Ellipse {
        return Err(Error::invalid("contour export needs an ellipse-backend scenario"));
    }
    let grid = contour_grid(&scenario.problem()?, &scenario.planner, resolution, resolution)?;
    let min = grid.minimum();
    let axis = |what: &str| format!("{what} orbit fraction of one period, index / resolution");
    let report = ContourReport {
        scenario: scenario.name.clone(),
        resolution,
        row_axis: axis("initial"),
        column_axis: axis("target"),
        value: "optimal total delta-v over transfer energy and branch (km/s)".into(),
        minimum_dv: min.map(|m| m.0),
        minimum_u0: min.map(|m| grid.u0[m.1]),
        minimum_uf: min.map(|m| grid.uf[m.2]),
        missing_cells: grid.values.iter().flatten().filter(|v| !v.is_finite()).count(),
        near_optimal_tol: NEAR_OPTIMAL_TOL,
        near_optimal_regions: count_near_optimal_regions(&grid, NEAR_OPTIMAL_TOL),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((grid, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Transcription of the published orbit tables and body constants.
    /// Each entry: scenario, JSON pointer, value as printed.
    const TABLE: &[(&str, &str, &str)] = &[
        ("leo_heo", "/body/mu", "3.986e5"),
        ("leo_heo", "/body/r_body", "6378.0"),
        ("leo_heo", "/initial/r/0", "3449.16114893"),
        ("leo_heo", "/initial/r/1", "-2063.72624968"),
        ("leo_heo", "/initial/r/2", "5808.89565173"),
        ("leo_heo", "/initial/v/0", "4.19600114"),
        ("leo_heo", "/initial/v/1", "-4.65510855"),
        ("leo_heo", "/initial/v/2", "-4.14528944"),
        ("leo_heo", "/target/r/0", "7132.67709309"),
        ("leo_heo", "/target/r/1", "644.58087289"),
        ("leo_heo", "/target/r/2", "-698.32594990"),
        ("leo_heo", "/target/v/0", "-0.91780300"),
        ("leo_heo", "/target/v/1", "9.52351726"),
        ("leo_heo", "/target/v/2", "-0.58384682"),
        ("gto_rgeo", "/body/mu", "3.986e5"),
        ("gto_rgeo", "/initial/r/0", "4783.85656098"),
        ("gto_rgeo", "/initial/r/1", "4478.04491028"),
        ("gto_rgeo", "/initial/r/2", "74.45791683"),
        ("gto_rgeo", "/initial/v/0", "-6.60516350"),
        ("gto_rgeo", "/initial/v/1", "7.11177002"),
        ("gto_rgeo", "/initial/v/2", "-3.33974946"),
        ("gto_rgeo", "/target/r/0", "30993.40736267"),
        ("gto_rgeo", "/target/r/1", "-28901.81993650"),
        ("gto_rgeo", "/target/r/2", "0.0"),
        ("gto_rgeo", "/target/v/0", "-2.09161279"),
        ("gto_rgeo", "/target/v/1", "-2.24298010"),
        ("gto_rgeo", "/target/v/2", "0.0"),
        ("earth_dionysus", "/body/mu", "1.327e11"),
        ("earth_dionysus", "/body/r_body", "6.95e5"),
        ("earth_dionysus", "/initial/r/0", "-3637871.081"),
        ("earth_dionysus", "/initial/r/1", "147099798.784"),
        ("earth_dionysus", "/initial/r/2", "-2261.441"),
        ("earth_dionysus", "/initial/v/0", "-30.265"),
        ("earth_dionysus", "/initial/v/1", "-0.848"),
        ("earth_dionysus", "/initial/v/2", "5.050e-5"),
        ("earth_dionysus", "/target/r/0", "-302452014.884"),
        ("earth_dionysus", "/target/r/1", "316097179.632"),
        ("earth_dionysus", "/target/r/2", "82872290.075"),
        ("earth_dionysus", "/target/v/0", "-4.533"),
        ("earth_dionysus", "/target/v/1", "-13.110"),
        ("earth_dionysus", "/target/v/2", "0.656"),
        ("jupiter_io", "/body/mu", "126.687e6"),
        ("jupiter_io", "/body/j2", "1.475e-2"),
        ("jupiter_io", "/body/r_body", "69911.0"),
        ("jupiter_io", "/initial/r/0", "75000.0"),
        ("jupiter_io", "/initial/r/1", "0.0"),
        ("jupiter_io", "/initial/r/2", "0.0"),
        ("jupiter_io", "/initial/v/0", "0.0"),
        ("jupiter_io", "/initial/v/1", "53.261749"),
        ("jupiter_io", "/initial/v/2", "14.271442"),
        ("jupiter_io", "/target/r/0", "489943.356"),
        ("jupiter_io", "/target/r/1", "0.0"),
        ("jupiter_io", "/target/r/2", "0.0"),
        ("jupiter_io", "/target/v/0", "0.0"),
        ("jupiter_io", "/target/v/1", "16.112383"),
        ("jupiter_io", "/target/v/2", "1.406071e-2"),
    ];

    fn raw(name: &str) -> serde_json::Value {
        let text = BUNDLED.iter().find(|(n, _)| *n == name).unwrap().1;
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn fixtures_match_transcription() {
        for (name, pointer, printed) in TABLE {
            let v = raw(name).pointer(pointer).and_then(|v| v.as_f64()).unwrap();
            let want: f64 = printed.parse().unwrap();
            assert_eq!(v.to_bits(), want.to_bits(), "{name}{pointer}");
        }
    }

    #[test]
    fn fixture_text_carries_printed_digits() {
        for (name, _, printed) in TABLE {
            let text = BUNDLED.iter().find(|(n, _)| n == name).unwrap().1;
            assert!(text.contains(printed), "{name}: {printed}");
        }
    }

    #[test]
    fn smoke_variant_shares_the_orbits() {
        let full = raw("jupiter_io");
        let smoke = raw("jupiter_io_smoke");
        for key in ["body", "model", "initial", "target"] {
            assert_eq!(full[key], smoke[key], "{key}");
        }
        let s = Scenario::bundled("jupiter_io_smoke").unwrap();
        assert_eq!(s.planner.n_pos_samples * s.planner.n_periods, 30);
        assert_eq!(s.planner.n_energy_samples, 2);
        assert_eq!(s.planner.coarse_flow.n_nodes, 17);
    }

    #[test]
    fn bundled_constants() {
        let leo = Scenario::bundled("leo_heo").unwrap();
        assert_eq!(leo.body, BodyConstants::EARTH);
        assert_eq!(leo.planner, PlannerConfig::ellipse_default());
        let jup = Scenario::bundled("jupiter_io").unwrap();
        assert_eq!(jup.body, BodyConstants::JUPITER);
        assert_eq!(jup.model, ModelKind::J2);
        assert_eq!(jup.planner, PlannerConfig::heatflow_default());
        assert_eq!(Scenario::bundled("earth_dionysus").unwrap().body, BodyConstants::SUN);
        assert_eq!(Scenario::bundled("earth_dionysus").unwrap().target.v.z, 0.656);
        assert!(Scenario::bundled("nope").is_none());
        for (name, _) in BUNDLED {
            assert_eq!(Scenario::bundled(name).unwrap().name, name);
        }
    }

    #[test]
    fn malformed_scenarios_are_located() {
        let text = BUNDLED[0].1.replace("\"n_best\": 5", "\"n_best\": \"five\"");
        let msg = Scenario::from_json(&text, "s.json").unwrap_err().to_string();
        assert!(msg.contains("planner.n_best") && msg.contains("line"), "{msg}");

        let text = BUNDLED[0].1.replace("\"model\": \"kepler\"", "\"model\": \"kepler\", \"extra\": 1");
        assert!(Scenario::from_json(&text, "s.json").unwrap_err().to_string().contains("extra"));

        // Hyperbolic initial orbit.
        let text = BUNDLED[0].1.replace("4.19600114", "40.19600114");
        let msg = Scenario::from_json(&text, "s.json").unwrap_err().to_string();
        assert!(msg.contains("not elliptic"), "{msg}");

        let text = BUNDLED[0].1.replace("\"n_energy_samples\": 3", "\"n_energy_samples\": 0");
        assert!(Scenario::from_json(&text, "s.json").is_err());
    }

    #[test]
    fn resolve_prefers_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        let text = BUNDLED[1].1.replace("\"gto_rgeo\"", "\"custom\"");
        std::fs::write(&p, text).unwrap();
        assert_eq!(Scenario::resolve(p.to_str().unwrap()).unwrap().name, "custom");
        assert_eq!(Scenario::resolve("gto_rgeo").unwrap().name, "gto_rgeo");
        assert!(Scenario::resolve("missing_thing").unwrap_err().to_string().contains("leo_heo"));
    }

    #[test]
    fn refine_only_variant_keeps_problem_settings() {
        let mut cfg = PlannerConfig::ellipse_default();
        cfg.seed = 9;
        let r = cfg.refine_only_variant();
        assert_eq!(r.seed, 9);
        assert_eq!(r.population_size, Some(50));
        assert!(!r.use_mbh);
        assert_eq!(r.refine_generations, 5000);
    }

    #[test]
    fn contour_requires_ellipse_backend() {
        let s = Scenario::bundled("jupiter_io_smoke").unwrap();
        assert!(contour(&s, 4).is_err());
    }

    #[test]
    fn report_round_trips_through_json() {
        let mut s = Scenario::bundled("leo_heo").unwrap();
        s.planner.n_pos_samples = 8;
        s.planner.refine_generations = 20;
        let rep = solve(&s, Mode::CoarseToFine).unwrap();
        let text = io::to_json(&rep).unwrap();
        let back: SolutionReport = io::from_json(&text, "r").unwrap();
        assert_eq!(back, rep);
        assert!(rep.diagnostics.propagation_miss < 1e-3);
        assert_eq!(rep.diagnostics.search.candidates, 8 * 8 * 3 * 4);
        assert!(rep.total_dv <= rep.diagnostics.coarse_best_dv.unwrap());
    }
}
