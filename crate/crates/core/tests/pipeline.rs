use iabma_core::baselines::{fit_baseline, BaselineKind};
use iabma_core::data::{load_csv, simulate_two_region, split, write_csv, written_schema, SimulationConfig, SplitConfig, Standardizer};
use iabma_core::metrics::{mixture_prediction, mixture_bound_check, MetricReport, DEFAULT_BINS};
use iabma_core::posterior::{assign_weights, train_posterior, PosteriorNet, TrainConfig};
use iabma_core::predictors::{fit_roster, loglik_table, regression_roster, simulation_roster, PredictorSet};
use iabma_core::prior::{EnergyCache, EnergyMode, MonteCarlo};
use iabma_core::{Dataset, Labels, SimplexWeights, Task};
use ndarray::Array2;

fn small_sim(seed: u64) -> (Dataset, Dataset) {
    simulate_two_region(&SimulationConfig {
        n_train: 200,
        n_test: 100,
        seed,
        ..SimulationConfig::default()
    })
    .unwrap()
}

#[test]
fn classification_pipeline_by_hand() {
    let (train, test) = small_sim(1);
    let predictors = fit_roster(&simulation_roster(1.0), &train).unwrap();
    let table = loglik_table(&predictors, &train).unwrap();
    let cache = EnergyCache::build(&predictors, train.features(), EnergyMode::Discrete { num_classes: 2 }).unwrap();
    let priors: Vec<SimplexWeights> = (0..train.n()).map(|i| cache.loo_prior(i).unwrap()).collect();
    let net = PosteriorNet::new(train.d(), predictors.len(), 3).unwrap();
    let cfg = TrainConfig { epochs: 3, ..TrainConfig::default() };
    let trained = train_posterior(net, &train, &table, &priors, &cfg).unwrap();
    assert_eq!(trained.trace.len(), 3);

    let test_table = loglik_table(&predictors, &test).unwrap();
    let weights: Vec<SimplexWeights> = (0..test.n())
        .map(|i| assign_weights(&trained.net, &test.row(i).to_vec()).unwrap())
        .collect();
    assert!(mixture_bound_check(&weights, &test_table).unwrap().holds());
    let pred = mixture_prediction(&predictors, weights, &test, &test_table).unwrap();
    let report = MetricReport::evaluate("iabma", 0, &pred, &test, DEFAULT_BINS).unwrap();
    let acc = report.accuracy.unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert!(report.rmse.is_none());
}

#[test]
fn every_baseline_yields_simplex_weights_on_test_rows() {
    let (train, test) = small_sim(2);
    let predictors = fit_roster(&simulation_roster(1.0), &train).unwrap();
    let table = loglik_table(&predictors, &train).unwrap();
    let test_table = loglik_table(&predictors, &test).unwrap();
    let kinds = [
        BaselineKind::BestSingle,
        BaselineKind::Uniform,
        BaselineKind::AccuracyWeighted,
        BaselineKind::ClassicalBma,
        BaselineKind::Moe(TrainConfig { epochs: 2, ..TrainConfig::default() }),
        BaselineKind::Dla(Default::default()),
    ];
    for kind in &kinds {
        let avg = fit_baseline(kind, &train, &table, &predictors, 5).unwrap();
        let w = avg.weights_for(&test).unwrap();
        assert_eq!(w.len(), test.n(), "{}", kind.name());
        assert!(mixture_bound_check(&w, &test_table).unwrap().holds(), "{}", kind.name());
    }
}

#[test]
fn regression_pipeline_with_mc_prior() {
    let n = 120;
    let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i * 7 + j * 3) % 23) as f64 / 23.0 - 0.5);
    let y: Vec<f64> = (0..n).map(|i| 2.0 * x[[i, 0]] - x[[i, 1]] + 0.1 * ((i % 5) as f64 - 2.0)).collect();
    let data = Dataset::new(x, Labels::Real(y)).unwrap();
    let s = split(&data, &SplitConfig::default(), 4).unwrap();
    let z = Standardizer::fit(&s.train, true).unwrap();
    let (train, test) = (z.apply(&s.train).unwrap(), z.apply(&s.test).unwrap());
    let predictors = fit_roster(&regression_roster(), &train).unwrap();
    let (lo, hi) = MonteCarlo::default_range(train.real_labels().unwrap()).unwrap();
    let mc = MonteCarlo::draw(64, lo, hi, 9).unwrap();
    let cache = EnergyCache::build(&predictors, train.features(), EnergyMode::Continuous(mc)).unwrap();
    let priors: Vec<SimplexWeights> = (0..train.n()).map(|i| cache.loo_prior(i).unwrap()).collect();
    let table = loglik_table(&predictors, &train).unwrap();
    let net = PosteriorNet::new(train.d(), predictors.len(), 1).unwrap();
    let trained = train_posterior(net, &train, &table, &priors, &TrainConfig::default()).unwrap();
    let test_table = loglik_table(&predictors, &test).unwrap();
    let w: Vec<_> = (0..test.n()).map(|i| assign_weights(&trained.net, &test.row(i).to_vec()).unwrap()).collect();
    let pred = mixture_prediction(&predictors, w, &test, &test_table).unwrap();
    let report = MetricReport::evaluate("iabma", 0, &pred, &test, DEFAULT_BINS).unwrap();
    assert!(report.r2.unwrap() > 0.5, "{report:?}");
    assert!(report.accuracy.is_none());
}

#[test]
fn written_simulation_reloads_identically() {
    let (train, _) = small_sim(3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.csv");
    write_csv(&train, &path).unwrap();
    let back = load_csv(&path, &written_schema(&train)).unwrap();
    assert_eq!(back.features(), train.features());
    assert_eq!(back.labels(), train.labels());
    assert_eq!(back.regions(), train.regions());
    assert_eq!(back.task(), Task::Classification);
}

#[test]
fn predictor_set_reloads_with_identical_logliks() {
    let (train, test) = small_sim(4);
    let predictors = fit_roster(&simulation_roster(1.0), &train).unwrap();
    let json = PredictorSet::new(Task::Classification, predictors.clone()).to_json().unwrap();
    let back = PredictorSet::from_json(&json).unwrap();
    assert_eq!(
        loglik_table(&predictors, &test).unwrap().loglik(),
        loglik_table(&back.predictors, &test).unwrap().loglik()
    );
}
