//! Acceptance checks, one line per criterion. Run with
//! `cargo test -p gravnet-cli --test acceptance [-- <ids>]`.

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use gravnet::compare::{analytical_var_avg_ns, ensemble_summary, ks_two_sample, EnsembleStatistic};
use gravnet::netstats::{density_from_counts, Direction, NodeStatKind, NodeStats, TradeNetwork, WeightTransform};
use gravnet::prediction::{
    density_induced_binary, density_matched_binary, link_probabilities, sample_bernoulli_ensemble,
    sample_weighted_ensemble, zip_variance, LinkModel, PredictedWeights, ZipParts,
};
use gravnet::synth::NoiseSpec;
use gravnet::{fit_logit, CrossSection, DesignMatrix, DyadPanel, FitResult, ModelTag, ZipFitResult};
use gravnet_cli::artifacts::Manifest;
use gravnet_cli::{run_command, Command, RunConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

/// Criteria that cannot be met as stated; they print FAIL without failing
/// the test run. See the README.
const KNOWN_UNMET: &[u32] = &[7];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(limit: Duration, start: Instant) -> (bool, String) {
    let t = start.elapsed();
    (t < limit, format!("{:.1} s of {} s", t.as_secs_f64(), limit.as_secs()))
}

fn config(out: &Path) -> RunConfig {
    RunConfig {
        out: out.to_path_buf(),
        dyads: out.join("data").join("dyads.csv"),
        countries: out.join("data").join("countries.csv"),
        quiet: true,
        ..RunConfig::default()
    }
}

fn run(cfg: &RunConfig, commands: &[Command]) {
    for &c in commands {
        if let Err(e) = run_command(c, cfg) {
            panic!("gravnet {}: {e}", c.name());
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> T {
    serde_json::from_slice(&fs::read(path.as_ref()).unwrap()).unwrap()
}

fn load_panel(out: &Path) -> DyadPanel {
    DyadPanel::load(out.join("data/dyads.csv"), out.join("data/countries.csv")).unwrap()
}

fn full_design(panel: &DyadPanel, year: i32) -> (CrossSection, DesignMatrix) {
    let cs = panel.cross_section(year).unwrap();
    let dm = DesignMatrix::build(&cs, panel, &Default::default(), false).unwrap();
    (cs, dm)
}

fn density_table() -> Outcome {
    let start = Instant::now();
    // Countries, trade flows and the printed density, 1970 to 2000.
    let table = [
        (129usize, 6583usize, 0.40),
        (135, 7618, 0.42),
        (142, 8162, 0.41),
        (148, 9108, 0.42),
        (145, 10289, 0.49),
        (157, 12138, 0.50),
        (154, 11828, 0.50),
    ];
    let round = |x: f64, dp: i32| (x * 10f64.powi(dp)).round() / 10f64.powi(dp);
    let mut ok = round(density_from_counts(6583, 129), 4) == 0.3987;
    let mut shown = Vec::new();
    for (n, l, printed) in table {
        let rho = density_from_counts(l, n);
        let exact = l as f64 / (n * (n - 1)) as f64;
        ok &= round(rho, 4) == round(exact, 4) && round(rho, 2) == printed;
        shown.push(format!("{:.4}", rho));
    }
    let (fast, t) = within(Duration::from_secs(1), start);
    outcome(ok && fast, format!("densities {} match the table; {t}", shown.join(" ")))
}

fn observation_counts() -> Outcome {
    let dir = TempDir::new().unwrap();
    let mut cfg = config(dir.path());
    cfg.n_countries = 154;
    cfg.years = Some(vec![2000]);
    cfg.noise = NoiseSpec::Poisson;
    run(&cfg, &[Command::Synth]);

    let panel = load_panel(dir.path());
    let mut order: Vec<usize> = (0..panel.dyads.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(154);
    for k in (1..order.len()).rev() {
        order.swap(k, rng.random_range(0..=k));
    }
    let mut dyads = panel.dyads;
    for (rank, &k) in order.iter().enumerate() {
        dyads[k].flow = if rank < 11828 { rng.random_range(0.5..500.0) } else { 0.0 };
    }
    let panel = DyadPanel::new(dyads, panel.countries).unwrap();
    let (cs, full) = full_design(&panel, 2000);
    let positive = full.positive_only();
    let links = cs.n_links();

    let dyads_path = dir.path().join("flows.csv");
    panel.write_dyads(fs::File::create(&dyads_path).unwrap()).unwrap();
    cfg.dyads = dyads_path;
    cfg.default_inputs = false;
    cfg.models = vec![ModelTag::Ols, ModelTag::Ppml];
    run(&cfg, &[Command::Fit]);
    let ols: FitResult = read_json(dir.path().join("2000/OLS/fit.json"));
    let ppml: FitResult = read_json(dir.path().join("2000/PPML/fit.json"));

    let ok = links == 11828
        && positive.n_rows() == 11828
        && full.n_rows() == 23562
        && ols.diagnostics.n_obs == 11828
        && ppml.diagnostics.n_obs == 23562;
    outcome(
        ok,
        format!(
            "L = {links}: positive-only {} rows, full {} rows; fitted n_obs OLS {} PPML {}",
            positive.n_rows(),
            full.n_rows(),
            ols.diagnostics.n_obs,
            ppml.diagnostics.n_obs
        ),
    )
}

fn statistic_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut mismatched = 0;
    let kinds = NodeStatKind::all();
    for trial in 0..200 {
        let n = 4 + trial % 5;
        let p = rng.random_range(0.15..0.95);
        let w = DMatrix::from_fn(n, n, |i, j| {
            if i != j && rng.random_bool(p) {
                rng.random_range(0.01..50.0)
            } else {
                0.0
            }
        });
        let net = TradeNetwork::from_weights(w).unwrap();
        let o = oracle::Oracle::new(&net.weights, &net.adjacency);
        let stats = NodeStats::compute(&net);
        for &kind in &kinds {
            match oracle::max_abs_diff(&stats.get(kind).unwrap().values, &o.values(kind)) {
                Some(d) => worst = worst.max(d),
                None => mismatched += 1,
            }
        }
    }
    let (fast, t) = within(Duration::from_secs(30), start);
    outcome(
        worst <= 1e-12 && mismatched == 0 && fast,
        format!(
            "{} statistics on 200 networks: max |diff| {worst:.2e}, {mismatched} definedness mismatches; {t}",
            kinds.len()
        ),
    )
}

fn estimator_recovery() -> Outcome {
    let start = Instant::now();
    let runs = 20u64;
    // (estimand, coefficient) -> (within 3 SE, fits)
    let mut coverage: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
    let mut em_violations = 0;
    let mut zip_fits = 0;
    let designs = [
        (NoiseSpec::LogNormal { sigma: 1.0 }, vec![ModelTag::Ols, ModelTag::Logit]),
        (NoiseSpec::Poisson, vec![ModelTag::Ppml]),
        (NoiseSpec::Zip, vec![ModelTag::Zip]),
    ];
    for seed in 1..=runs {
        for (noise, models) in &designs {
            let dir = TempDir::new().unwrap();
            let mut cfg = config(dir.path());
            cfg.seed = seed;
            cfg.noise = *noise;
            cfg.models = models.clone();
            run(&cfg, &[Command::Synth, Command::Fit]);
            let truth: gravnet::synth::SynthTruth = read_json(dir.path().join("data/truth.json"));
            let mut tally = |key: &str, fit: &FitResult| {
                for (c, t) in fit.coefficients.iter().zip(&truth.estimands[key]) {
                    let e = coverage.entry((key.to_string(), c.name.clone())).or_default();
                    e.0 += usize::from((c.estimate - t).abs() <= 3.0 * c.std_error);
                    e.1 += 1;
                }
            };
            for &year in &truth.years {
                for &m in models {
                    let path = dir.path().join(format!("{year}/{m}/fit.json"));
                    if m == ModelTag::Zip {
                        let z: ZipFitResult = read_json(path);
                        zip_fits += 1;
                        em_violations += usize::from(z.trace.max_em_decrease() > 0.0);
                        tally("ZIP_logit", &z.logit_part);
                        tally("ZIP_poisson", &z.poisson_part);
                    } else {
                        let f: FitResult = read_json(path);
                        tally(m.as_str(), &f);
                    }
                }
            }
        }
    }
    let share = |(h, n): (usize, usize)| h as f64 / n as f64;
    let (worst_key, worst) = coverage
        .iter()
        .map(|(k, &v)| (k, share(v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let mut per_estimator: BTreeMap<&str, f64> = BTreeMap::new();
    for ((est, _), &v) in &coverage {
        let e = per_estimator.entry(est.as_str()).or_insert(1.0);
        *e = e.min(share(v));
    }
    let (fast, t) = within(Duration::from_secs(300), start);
    let listing: Vec<String> = per_estimator.iter().map(|(k, v)| format!("{k} {:.1}%", 100.0 * v)).collect();
    outcome(
        worst >= 0.95 && em_violations == 0 && fast,
        format!(
            "lowest per-coefficient coverage over {runs} runs x 7 years: {}; worst {}/{} {:.1}%; EM decreases in {em_violations} of {zip_fits} ZIP fits; {t}",
            listing.join(", "),
            worst_key.0,
            worst_key.1,
            100.0 * worst
        ),
    )
}

fn variance_instances(rng: &mut ChaCha8Rng, n: usize) -> Vec<PredictedWeights> {
    let countries: Vec<String> = (0..n).map(|i| format!("C{i:02}")).collect();
    let off = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 });
    let mu = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.random_range(0.0f64..3.0).exp() });
    let psi = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.random_range(0.05..0.6) });
    let mask = DMatrix::from_fn(n, n, |i, j| if i != j && rng.random_bool(0.5) { 1.0 } else { 0.0 });
    let log_w = DMatrix::from_fn(n, n, |i, j| if mask[(i, j)] > 0.0 { rng.random_range(-1.0..4.0) } else { 0.0 });
    let sigma2 = 0.8;
    vec![
        PredictedWeights {
            model: ModelTag::Ols,
            countries: countries.clone(),
            value: log_w,
            variance: &mask * sigma2,
            mask,
            sigma2: Some(sigma2),
            zip_parts: None,
        },
        PredictedWeights {
            model: ModelTag::Ppml,
            countries: countries.clone(),
            value: mu.clone(),
            variance: mu.clone(),
            mask: off.clone(),
            sigma2: None,
            zip_parts: None,
        },
        PredictedWeights {
            model: ModelTag::Zip,
            countries,
            value: mu.zip_map(&psi, |m, p| (1.0 - p) * m),
            variance: mu.zip_map(&psi, |m, p| zip_variance(p, m)),
            mask: off,
            sigma2: None,
            zip_parts: Some(ZipParts { psi, mu }),
        },
    ]
}

fn variance_cross_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for pred in variance_instances(&mut rng, 30) {
        let transform = match pred.model {
            ModelTag::Ols => WeightTransform::LogPositive,
            _ => WeightTransform::Identity,
        };
        let ens = sample_weighted_ensemble(&pred, 10_000, 17).unwrap();
        for d in [Direction::In, Direction::Out, Direction::Tot] {
            let stat = EnsembleStatistic::Average(NodeStatKind::Ns(d));
            let mc = ensemble_summary(&ens, stat, transform).unwrap().sd.powi(2);
            let analytic = analytical_var_avg_ns(&pred, d).unwrap();
            let rel = (mc - analytic).abs() / analytic;
            worst = worst.max(rel);
            if d == Direction::Tot {
                parts.push(format!("{} {:.2}%", pred.model, 100.0 * rel));
            }
        }
    }
    let (fast, t) = within(Duration::from_secs(120), start);
    outcome(
        worst <= 0.05 && fast,
        format!(
            "M = 10000, relative error on NS_tot: {}; worst over in/out/tot {:.2}%; {t}",
            parts.join(", "),
            100.0 * worst
        ),
    )
}

fn qualitative_replication() -> Outcome {
    let runs = 20u64;
    let targets = [
        (ModelTag::Ols, "NS_tot", true),
        (ModelTag::Ols, "ANNS_tot", true),
        (ModelTag::Ols, "WCC_tot", true),
        (ModelTag::Ppml, "ANNS_tot", false),
        (ModelTag::Ppml, "WCC_tot", false),
        (ModelTag::Zip, "ANNS_tot", false),
        (ModelTag::Zip, "WCC_tot", false),
    ];
    let mut hits = vec![0usize; targets.len()];
    for seed in 1..=runs {
        let dir = TempDir::new().unwrap();
        let mut cfg = config(dir.path());
        cfg.seed = seed;
        cfg.years = Some(vec![2000]);
        cfg.models = vec![ModelTag::Ols, ModelTag::Ppml, ModelTag::Zip];
        cfg.replications = 2;
        run(&cfg, &[Command::Synth, Command::Fit, Command::Predict, Command::Compare]);
        let report: gravnet::compare::Report = read_json(dir.path().join("report.json"));
        for (k, &(model, stat, keep)) in targets.iter().enumerate() {
            let cell = report.cells.iter().find(|c| c.model == model).unwrap();
            let row = cell.ks_tests.iter().find(|r| r.statistic.name() == stat).unwrap();
            hits[k] += usize::from(if keep { row.p_value > 0.05 } else { row.p_value < 0.05 });
        }
    }
    let ok = hits.iter().all(|&h| 2 * h > runs as usize);
    let listing: Vec<String> = targets
        .iter()
        .zip(&hits)
        .map(|(&(m, s, keep), h)| format!("{m} {s} p{}0.05 in {h}/{runs}", if keep { ">" } else { "<" }))
        .collect();
    outcome(ok, listing.join(", "))
}

fn binary_predictors() -> Outcome {
    let dir = TempDir::new().unwrap();
    let mut cfg = config(dir.path());
    cfg.seed = 7;
    run(&cfg, &[Command::Synth]);
    let panel = load_panel(dir.path());

    let mut worst_gap = 0.0f64;
    let mut matched_gap = 0.0f64;
    let mut tolerance = f64::INFINITY;
    let mut worst_z = 0.0f64;
    for year in panel.years() {
        let (cs, full) = full_design(&panel, year);
        let n = cs.n() as f64;
        let rho = density_from_counts(cs.n_links(), cs.n());
        let logit = fit_logit(&full, &full.presence()).unwrap();
        let xi = link_probabilities(LinkModel::Logit(&logit), &full).unwrap();
        tolerance = tolerance.min(2.0 / (n * (n - 1.0)));
        worst_gap = worst_gap.max((density_induced_binary(&xi, rho).unwrap().realized_density - rho).abs());
        matched_gap = matched_gap.max((density_matched_binary(&xi, rho).unwrap().realized_density - rho).abs());

        let ens = sample_bernoulli_ensemble(&xi, ModelTag::Logit, 10_000, year as u64).unwrap();
        let s = ensemble_summary(&ens, EnsembleStatistic::Density, WeightTransform::Identity).unwrap();
        let se = s.sd / (s.m as f64).sqrt();
        worst_z = worst_z.max((s.mean - xi.mean()).abs() / se);
    }
    let induced_ok = worst_gap <= tolerance;
    let bernoulli_ok = worst_z <= 3.0;
    outcome(
        induced_ok && bernoulli_ok,
        format!(
            "density-induced |realized - observed| up to {worst_gap:.4} vs tolerance {tolerance:.6} ({}); \
             Bernoulli mean density within {worst_z:.2} MC SE of mean xi ({}); \
             count-matched threshold gap {matched_gap:.6}",
            if induced_ok { "met" } else { "not met" },
            if bernoulli_ok { "met" } else { "not met" },
        ),
    )
}

fn full_pipeline(out: &Path) {
    let mut cfg = config(out);
    cfg.n_countries = 40;
    cfg.years = Some(vec![1990, 2000]);
    cfg.replications = 200;
    cfg.seed = 2024;
    run(
        &cfg,
        &[Command::Synth, Command::Fit, Command::Predict, Command::Netstats, Command::Compare, Command::Report],
    );
}

fn determinism() -> Outcome {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    full_pipeline(a.path());
    full_pipeline(b.path());
    let manifest = Manifest::load(a.path()).unwrap();
    let mut differing = Vec::new();
    let files: Vec<&str> = manifest
        .artifacts
        .keys()
        .map(String::as_str)
        .chain(std::iter::once("manifest.json"))
        .collect();
    for f in &files {
        if fs::read(a.path().join(f)).unwrap() != fs::read(b.path().join(f)).unwrap() {
            differing.push(*f);
        }
    }
    outcome(
        differing.is_empty() && files.len() > 1,
        format!("{} artifacts compared, {} differ {:?}", files.len(), differing.len(), differing),
    )
}

fn ks_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut mismatches = 0;
    for trial in 0..1000 {
        let n1 = rng.random_range(1..25usize);
        let n2 = rng.random_range(1..25usize);
        let draw = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
            if trial % 2 == 0 {
                (0..n).map(|_| rng.random_range(0..6) as f64).collect()
            } else {
                (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
            }
        };
        let x = draw(&mut rng, n1);
        let y = draw(&mut rng, n2);
        let mut num = 0usize;
        for t in x.iter().chain(&y) {
            let c1 = x.iter().filter(|v| *v <= t).count();
            let c2 = y.iter().filter(|v| *v <= t).count();
            num = num.max((c1 * n2).abs_diff(c2 * n1));
        }
        let scan = num as f64 / (n1 * n2) as f64;
        if ks_two_sample(&x, &y).unwrap().d_statistic != scan {
            mismatches += 1;
        }
    }
    let mut identical_ok = true;
    for n in [1, 5, 40] {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let r = ks_two_sample(&x, &x).unwrap();
        identical_ok &= r.d_statistic == 0.0 && r.p_value == 1.0;
    }
    outcome(
        mismatches == 0 && identical_ok,
        format!(
            "{mismatches} of 1000 pairs differ from the ECDF scan; identical samples give D = 0, p = 1: {identical_ok}"
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "density formula", density_table),
        (2, "observation counts", observation_counts),
        (3, "statistic oracle", statistic_oracle),
        (4, "estimator recovery", estimator_recovery),
        (5, "strength variance", variance_cross_check),
        (6, "OLS vs full-matrix K-S pattern", qualitative_replication),
        (7, "binary predictors", binary_predictors),
        (8, "determinism", determinism),
        (9, "K-S statistic", ks_correctness),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = Vec::new();
    let mut passed = 0;
    let mut ran = 0;
    for (id, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        ran += 1;
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "acceptance {id} {verdict} {name}: {} [{:.1} s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if o.pass {
            passed += 1;
        } else if !KNOWN_UNMET.contains(&id) {
            unexpected.push(id);
        }
    }
    println!("acceptance: {passed} of {ran} criteria pass");
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
