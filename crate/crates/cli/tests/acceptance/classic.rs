//! Textbook single-run nested sampling with RadFriends replacement draws.
//!
//! Kept apart from the collaborative sampler on purpose: it owns its own
//! live set, tie-breaking labels, volume ladder and evidence sum.

use conest::model::Model;
use conest::Region;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Estimate {
    pub ln_z: f64,
    pub ln_z_err: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

struct Live {
    unit: Vec<f64>,
    loglike: f64,
    /// Uniform label ordering points of equal likelihood.
    label: f64,
}

fn above(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 > b.1)
}

fn logsumexp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn run<M: Model>(model: &M, data: &M::Data, n_live: usize, dlogz: f64, seed: u64) -> Estimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = model.ndim();
    let mut evaluations = 0;
    let mut eval = |u: &[f64]| {
        evaluations += 1;
        model.log_likelihood(&model.predict(&model.transform(u)), data)
    };
    let mut live: Vec<Live> = (0..n_live)
        .map(|_| {
            let unit: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
            let loglike = eval(&unit);
            Live {
                unit,
                loglike,
                label: rng.random(),
            }
        })
        .collect();

    // (ln weight, ln L) of every dead point
    let mut dead: Vec<(f64, f64)> = Vec::new();
    let mut ln_x = 0.0;
    let mut ln_z = f64::NEG_INFINITY;
    let step = 1.0 / n_live as f64;
    loop {
        let (worst, _) = live
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1.loglike, a.1.label)
                    .partial_cmp(&(b.1.loglike, b.1.label))
                    .unwrap()
            })
            .unwrap();
        let max_l = live
            .iter()
            .map(|p| p.loglike)
            .fold(f64::NEG_INFINITY, f64::max);
        if logsumexp(ln_z, max_l + ln_x) - ln_z < dlogz {
            break;
        }
        let threshold = (live[worst].loglike, live[worst].label);
        let ln_w = ln_x + (-(-step).exp_m1()).ln();
        dead.push((ln_w, threshold.0));
        ln_z = logsumexp(ln_z, ln_w + threshold.0);
        ln_x -= step;

        let points: Vec<&[f64]> = live.iter().map(|p| p.unit.as_slice()).collect();
        let region = Region::fit(&points, 10, &mut rng).expect("region fit");
        loop {
            let unit = region.sample(&mut rng).into_inner();
            let loglike = eval(&unit);
            let label = rng.random();
            if above((loglike, label), threshold) {
                live[worst] = Live {
                    unit,
                    loglike,
                    label,
                };
                break;
            }
        }
    }
    let ln_share = ln_x - (n_live as f64).ln();
    for p in &live {
        dead.push((ln_share, p.loglike));
        ln_z = logsumexp(ln_z, ln_share + p.loglike);
    }
    let info: f64 = dead
        .iter()
        .map(|&(w, l)| (w + l - ln_z).exp() * (l - ln_z))
        .sum();
    Estimate {
        ln_z,
        ln_z_err: (info.max(0.0) / n_live as f64).sqrt(),
        iterations: dead.len() - n_live,
        evaluations,
    }
}
