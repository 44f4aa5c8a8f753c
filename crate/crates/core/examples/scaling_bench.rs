//! Per-step cost of the three engine variants as the stream grows.

use simulst::decoder::WordRule;
use simulst::harness::{bench_scaling, poly_fit, series, write_bench_csv, BenchConfig};
use simulst::streaming::{Clock, CostTable, Variant};
use simulst::{Model, ModelConfig};

fn main() -> simulst::Result<()> {
    let model = Model::<f32>::random(ModelConfig::default(), WordRule::EveryToken, 7)?;
    let cfg = BenchConfig {
        segments: 16,
        ..BenchConfig::default()
    };
    let records = bench_scaling(&model, &cfg, &Variant::ALL, &Clock::simulated(CostTable::uniform(1.0)))?;
    for v in Variant::ALL {
        let (xs, ys) = series(&records, v, cfg.k);
        let lin = poly_fit(&xs, &ys, 1).map_or(f64::NAN, |f| f.r_squared);
        let quad = poly_fit(&xs, &ys, 2).map_or(f64::NAN, |f| f.coeffs[2]);
        println!("{:<25} last step {:>10} MACs, linear R^2 {lin:.4}, quadratic term {quad:.1}", v.name(), ys[ys.len() - 1]);
    }
    write_bench_csv(&records, std::io::stdout().lock())
}
