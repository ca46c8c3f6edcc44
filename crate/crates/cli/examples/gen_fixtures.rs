//! Regenerates the files under `tests/fixtures` from fixed seeds.
//!
//! cargo run -p tvgc-cli --example gen_fixtures

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use tvgc_core::dataset::AlignedDataset;
use tvgc_core::rng::StreamRng;
use tvgc_core::simulation::{simulate_dgp, Noise, SwitchDgp};

/// Affine rescaling to daily log-return and GSVI-like units.
fn to_market_units(mut d: AlignedDataset, return_sd: f64, attention_mean: f64, attention_sd: f64) -> AlignedDataset {
    let mean = d.mean_attention();
    d.returns.iter_mut().for_each(|r| *r *= return_sd);
    d.attention
        .iter_mut()
        .for_each(|a| *a = attention_mean + attention_sd * (*a - mean));
    d
}

fn save(d: &AlignedDataset, path: &Path) {
    let mut buf = Vec::new();
    d.write_csv(&mut buf).unwrap();
    fs::write(path, buf).unwrap();
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    fs::create_dir_all(dir.join("raw")).unwrap();

    // raw files for the end-to-end run: prices plus overlapping GSVI downloads
    let t = 730;
    let dgp = SwitchDgp::ar1_pair(t, 0.05, 0.6, 50.0, Noise::Gaussian { sd: 1.0 }, 2021)
        .with_effect(1.5, (300, 420))
        .unwrap();
    let d = to_market_units(simulate_dgp(&dgp).unwrap(), 0.035, 45.0, 6.0);
    let mut prices = String::from("date,value\n");
    let mut p = 7000.0f64;
    let day0 = d.dates[0] - chrono::Days::new(1);
    prices.push_str(&format!("{day0},{p:.2}\n"));
    for (date, r) in d.dates.iter().zip(&d.returns) {
        p *= r.exp();
        prices.push_str(&format!("{date},{p:.2}\n"));
    }
    fs::write(dir.join("raw/prices.csv"), prices).unwrap();
    // three-month frames overlapping by a week, each normalised differently
    let scales = [1.0, 0.92, 1.07, 0.95, 1.04, 0.9, 1.1, 0.97, 1.02];
    let (frame, overlap) = (90usize, 7usize);
    let mut start = 0;
    let mut k = 0;
    while start < t {
        let end = (start + frame).min(t);
        let mut seg = String::from("date,value\n");
        for i in start..end {
            let v = (d.attention[i] * scales[k % scales.len()]).round().clamp(0.0, 100.0);
            seg.push_str(&format!("{},{}\n", d.dates[i], v));
        }
        fs::write(dir.join(format!("raw/gsvi_DE_{}.csv", k + 1)), seg).unwrap();
        if end == t {
            break;
        }
        start = end - overlap;
        k += 1;
    }

    // aligned white-noise pair
    let mut rng = StreamRng::new(7, 0);
    let n = 300;
    let dates = (0..n)
        .map(|i| tvgc_core::simulation::epoch() + chrono::Days::new(i as u64))
        .collect();
    let attention = (0..n).map(|_| 50.0 + 5.0 * rng.normal()).collect();
    let returns = (0..n).map(|_| 0.03 * rng.normal()).collect();
    let wn = AlignedDataset::new(dates, attention, returns, "white-noise", BTreeMap::new()).unwrap();
    save(&wn, &dir.join("white_noise.csv"));

    // aligned switch DGP with causality on observations 150..=250
    let dgp = SwitchDgp::ar1_pair(400, 0.1, 0.5, 50.0, Noise::Gaussian { sd: 1.0 }, 11)
        .with_effect(2.0, (150, 250))
        .unwrap();
    let mut sw = to_market_units(simulate_dgp(&dgp).unwrap(), 0.03, 50.0, 5.0);
    sw.country = "switch".into();
    sw.meta.remove("causal_coeff");
    save(&sw, &dir.join("switch.csv"));

    // VAR(9): dynamics concentrated at lags 1 and 9
    let mut r = vec![0.0; 19];
    let mut a = vec![0.0; 19];
    r[1] = 0.1;
    r[17] = 0.35;
    a[2] = 0.3;
    a[0] = 50.0 * (1.0 - 0.3 - 0.4);
    a[18] = 0.4;
    let lag9 = SwitchDgp {
        t: 818,
        p_true: 9,
        base_coeffs: [r, a],
        causal_coeff: 0.0,
        causal_window: (9, 817),
        noise: Noise::Gaussian { sd: 1.0 },
        seed: 9,
    };
    let mut l9 = to_market_units(simulate_dgp(&lag9).unwrap(), 0.03, 50.0, 5.0);
    l9.country = "lag9".into();
    l9.meta.clear();
    save(&l9, &dir.join("lag9.csv"));
}
