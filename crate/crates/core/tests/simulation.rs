use dctrw::estimator::lag_autocorrelation;
use dctrw::model::{JumpModel, MagnitudeDist, SeasonalityModel, WaitingTimeModel};
use dctrw::simulator::{
    empirical_nvaf, sample_first_wait, sample_trajectory, sample_trajectory_seasonal, FirstWaitMode, SimConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn reference_wtd() -> WaitingTimeModel {
    WaitingTimeModel::double_exponential(3.63, 32.57, 0.586).unwrap()
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
fn ks_distance(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at significance 1e-3.
fn ks_critical(n: usize) -> f64 {
    (-(0.5e-3f64).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

fn run(wtd: WaitingTimeModel, mags: MagnitudeDist, eps: f64, events: f64, seed: u64) -> dctrw::simulator::EventSeries {
    let horizon = events * wtd.mean_wait();
    let cfg = SimConfig::new(wtd, JumpModel::new(mags, eps).unwrap(), horizon, seed).unwrap();
    sample_trajectory(&cfg).unwrap()
}

#[test]
fn waits_follow_the_wtd() {
    let s = run(reference_wtd(), MagnitudeDist::Exponential { mean: 1.0 }, 0.258, 1.0e5, 21);
    let mut waits: Vec<f64> = s.waits()[1..].to_vec();
    let n = waits.len();
    let wtd = reference_wtd();
    let d = ks_distance(&mut waits, |t| wtd.cdf(t));
    assert!(d < ks_critical(n), "KS distance {d} with n = {n}");
}

#[test]
fn magnitude_marginal_ignores_memory() {
    let s = run(WaitingTimeModel::exponential(1.0).unwrap(), MagnitudeDist::Exponential { mean: 2.0 }, 0.7, 1.0e5, 5);
    // a memory run repeats values, so thin to every 20th jump (ε^20 ≈ 8e-4)
    let mut mags: Vec<f64> = s.jumps.iter().step_by(20).copied().collect();
    let n = mags.len();
    let d = ks_distance(&mut mags, |r| 1.0 - (-r / 2.0).exp());
    assert!(d < ks_critical(n), "KS distance {d} with n = {n}");
}

#[test]
fn memory_free_magnitudes_are_uncorrelated() {
    let s = run(WaitingTimeModel::exponential(1.0).unwrap(), MagnitudeDist::Exponential { mean: 1.0 }, 0.0, 1.0e6, 8);
    let n = s.len() as f64;
    let r = lag_autocorrelation(&s.jumps, 1).unwrap();
    assert!(r[0].abs() < 3.0 / n.sqrt(), "lag-1 {}", r[0]);
}

#[test]
fn lag_one_correlation_equals_epsilon() {
    let s = run(reference_wtd(), MagnitudeDist::Exponential { mean: 1.0 }, 0.258, 1.0e6, 9);
    let n = s.len() as f64;
    let r = lag_autocorrelation(&s.jumps, 1).unwrap();
    // exponential marks inflate the lag-1 standard error to ≈ 1.5/√N
    assert!((r[0] - 0.258).abs() < 4.5 / n.sqrt(), "lag-1 {}", r[0]);
}

#[test]
fn lag_k_correlation_decays_geometrically() {
    let eps: f64 = 0.5;
    let s = run(WaitingTimeModel::exponential(1.0).unwrap(), MagnitudeDist::Exponential { mean: 1.0 }, eps, 1.0e6, 10);
    let n = s.len() as f64;
    let r = lag_autocorrelation(&s.jumps, 5).unwrap();
    for (i, rk) in r.iter().enumerate() {
        let k = (i + 1) as i32;
        // Bartlett variance of the lag-k estimate under geometric correlation
        let e2 = eps * eps;
        let var = ((1.0 + e2) * (1.0 - e2.powi(k)) / (1.0 - e2) - 2.0 * k as f64 * e2.powi(k)) / n;
        assert!((rk - eps.powi(k)).abs() < 3.0 * var.sqrt(), "lag {k}: {rk}");
    }
}

#[test]
fn equilibrium_first_wait_mean() {
    let wtd = reference_wtd();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 1_000_000;
    let draws: Vec<f64> =
        (0..n).map(|_| sample_first_wait(&wtd, FirstWaitMode::Equilibrium, &mut rng).unwrap()).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let expected = (0.586 * 3.63f64.powi(2) + 0.414 * 32.57f64.powi(2)) / wtd.mean_wait();
    assert!((mean - expected).abs() < 3.0 * (var / n as f64).sqrt(), "{mean} vs {expected}");
}

#[test]
fn exponential_first_wait_is_memoryless() {
    let wtd = WaitingTimeModel::exponential(2.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut draws: Vec<f64> =
        (0..100_000).map(|_| sample_first_wait(&wtd, FirstWaitMode::Equilibrium, &mut rng).unwrap()).collect();
    let d = ks_distance(&mut draws, |t| wtd.cdf(t));
    assert!(d < ks_critical(100_000));
}

#[test]
fn memory_free_vaf_is_statistically_zero() {
    let s = run(WaitingTimeModel::exponential(1.0).unwrap(), MagnitudeDist::Exponential { mean: 1.0 }, 0.0, 2.0e6, 12);
    let v = empirical_nvaf(&[s], 0.5, 5.0).unwrap();
    for (x, e) in v.curve.values.iter().zip(&v.stderr) {
        assert!(x.abs() < 3.0 * e, "{x} ± {e}");
    }
    assert!((v.curve.delta_weight - 1.0).abs() < 1e-12);
}

#[test]
fn seasonal_bucket_means_trace_theta() {
    let wtd = reference_wtd();
    let day = 28800.0;
    let season = SeasonalityModel::with_mean_wait(14986.0, 2.25e8, day, wtd.mean_wait()).unwrap();
    let days = 2000.0;
    let cfg =
        SimConfig::new(wtd, JumpModel::new(MagnitudeDist::Exponential { mean: 1.0 }, 0.258).unwrap(), days * day, 4)
            .unwrap()
            .with_seasonality(season)
            .unwrap();
    let series = sample_trajectory_seasonal(&cfg).unwrap();
    let b = dctrw::estimator::bucket_means(&series, day, 24).unwrap();
    // skip the last bucket, whose waits are cut short by the close
    for i in 0..b.means.len() - 1 {
        let theta = season.theta(b.times[i]);
        assert!((b.means[i] / theta - 1.0).abs() < 0.02, "bucket {i}: {} vs {theta}", b.means[i]);
    }
    // the longest waits sit around p; θ is flat there, so allow a neighbouring bucket
    let peak = (0..b.means.len()).max_by(|&i, &j| b.means[i].total_cmp(&b.means[j])).unwrap();
    assert!((b.times[peak] - 14986.0).abs() < 2400.0, "peak at {}", b.times[peak]);
}

#[test]
fn flat_seasonality_matches_stationary_rate() {
    let wtd = WaitingTimeModel::exponential(2.0).unwrap();
    let day = 1000.0;
    let flat = SeasonalityModel::with_mean_wait(500.0, 1e14, day, 2.0).unwrap();
    let jumps = JumpModel::new(MagnitudeDist::Degenerate { r0: 1.0 }, 0.0).unwrap();
    let cfg = SimConfig::new(wtd, jumps.clone(), 400.0 * day, 6).unwrap().with_seasonality(flat).unwrap();
    let days = sample_trajectory_seasonal(&cfg).unwrap();
    let mut waits: Vec<f64> = days.iter().flat_map(|d| d.waits()[1..].to_vec()).collect();
    let n = waits.len();
    let d = ks_distance(&mut waits, |t| wtd.cdf(t));
    assert!(d < ks_critical(n), "KS distance {d}, n = {n}");
}

#[test]
fn empirical_vaf_is_bitwise_independent_of_thread_count() {
    let days: Vec<_> =
        (0..40).map(|seed| run(reference_wtd(), MagnitudeDist::Exponential { mean: 1.0 }, 0.258, 2e3, seed)).collect();
    let on = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| empirical_nvaf(&days, 1.0, 50.0).unwrap())
    };
    let one = on(1);
    let many = on(4);
    assert_eq!(one, many);
}
