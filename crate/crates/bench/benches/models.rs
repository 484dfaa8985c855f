use std::hint::black_box;

use agriprice_bench::{frame, regression_rows};
use agriprice_core::ingest::PRESET_WEEKS;
use agriprice_core::models::arima::{self, ArimaOrder};
use agriprice_core::models::gbt::{GbtEnsemble, GbtParams};
use agriprice_core::models::lstm::{Batch, LstmNetwork};
use agriprice_core::models::svr::{kernel_matrix, smo};
use agriprice_core::models::trend::{TrendModel, TrendParams};
use agriprice_core::rng::CounterRng;
use agriprice_core::stationarity::{adf_test, default_max_lag, suggest_order};
use criterion::{criterion_group, criterion_main, Criterion};

fn stationarity(c: &mut Criterion) {
    let prices = frame("chicken", PRESET_WEEKS).prices().unwrap();
    let lag = default_max_lag(prices.len());
    c.bench_function("adf_test 588 weeks", |b| b.iter(|| adf_test(black_box(&prices), lag).unwrap()));
    c.bench_function("suggest_order 588 weeks", |b| b.iter(|| suggest_order(black_box(&prices)).unwrap()));
}

fn arima_fit(c: &mut Criterion) {
    let prices = frame("chili", PRESET_WEEKS).prices().unwrap();
    let order = ArimaOrder::new(1, 1, 1).unwrap();
    c.bench_function("arima(1,1,1) fit", |b| b.iter(|| arima::fit(black_box(&prices), order).unwrap()));
}

fn trend_fit(c: &mut Criterion) {
    let f = frame("tomato", PRESET_WEEKS);
    c.bench_function("trend fit 588 weeks", |b| {
        b.iter(|| TrendModel::fit(black_box(f.base()), &TrendParams::default()).unwrap())
    });
}

fn svr_smo(c: &mut Criterion) {
    let (x, y) = regression_rows(200, 8, 1);
    let kernel = kernel_matrix(&x, 1.0 / 8.0);
    c.bench_function("smo n=200", |b| b.iter(|| smo(black_box(&kernel), &y, 1.0, 0.1).unwrap()));
}

fn gbt_fit(c: &mut Criterion) {
    let (x, y) = regression_rows(500, 8, 2);
    let params = GbtParams {
        n_estimators: 50,
        ..GbtParams::default()
    };
    c.bench_function("gbt fit 500x8, 50 trees", |b| {
        b.iter(|| GbtEnsemble::fit(black_box(&x), &y, &params, None).unwrap())
    });
}

fn lstm_step(c: &mut Criterion) {
    // default architecture: 4 layers of 50 units, 52-week window, 52-week head
    let net = LstmNetwork::init(5, 50, 4, 52, 3);
    let mut rng = CounterRng::new(4);
    let batch = Batch {
        inputs: (0..52 * 10 * 5).map(|_| rng.next_f64()).collect(),
        targets: (0..10 * 52).map(|_| rng.next_f64()).collect(),
        size: 10,
        steps: 52,
    };
    c.bench_function("lstm forward batch 10", |b| b.iter(|| net.forward(black_box(&batch), None).unwrap()));
    c.bench_function("lstm forward+backward batch 10", |b| {
        b.iter(|| net.loss_and_grad(black_box(&batch), None).unwrap())
    });
}

criterion_group!(benches, stationarity, arima_fit, trend_fit, svr_smo, gbt_fit, lstm_step);
criterion_main!(benches);
