//! Quick property checks, each against an oracle written here.

use std::path::Path;
use std::process::Command;

use conest::cluster::partition;
use conest::{MembershipTable, QueueEntry, Region, RunState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn queue_rule() -> Check {
    let live = vec![(1.0, 1), (2.0, 2), (3.0, 3)];
    let mut t = MembershipTable::from_live_sets(3, vec![live]).map_err(|e| e.to_string())?;
    ensure(t.queue_accept(1.5, 10, 0), || {
        "1.5 rejected with empty queue".into()
    })?;
    t.push_queue(
        0,
        QueueEntry {
            point_id: 10,
            loglike: 1.5,
        },
    );
    ensure(!t.queue_accept(1.2, 11, 0), || {
        "1.2 accepted behind 1.5".into()
    })?;
    ensure(t.queue_accept(1.8, 12, 0), || {
        "1.8 rejected behind 1.5".into()
    })?;
    Ok("3 cases".into())
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    // a blob, so standardisation matters
    let centre: Vec<f64> = (0..dim).map(|_| rng.random_range(0.3..0.7)).collect();
    let spread: Vec<f64> = (0..dim).map(|_| rng.random_range(0.01..0.2)).collect();
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|k| (centre[k] + spread[k] * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0))
                .collect()
        })
        .collect()
}

pub fn region_contains_training_points() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut total = 0;
    for _ in 0..30 {
        let n = rng.random_range(2..200);
        let dim = rng.random_range(1..5);
        let pts = random_points(&mut rng, n, dim);
        let region = Region::fit(&pts, 10, &mut rng).map_err(|e| e.to_string())?;
        if let Some(p) = pts.iter().find(|p| !region.contains(p)) {
            return Err(format!("training point {p:?} outside its region"));
        }
        total += n;
    }
    Ok(format!("{total} points in 30 regions"))
}

/// Standardised leave-out distances of one bootstrap round, by direct scan.
fn round_radius(pts: &[Vec<f64>], rng: &mut ChaCha8Rng) -> f64 {
    let n = pts.len();
    let dim = pts[0].len();
    let sd: Vec<f64> = (0..dim)
        .map(|k| {
            let m = pts.iter().map(|p| p[k]).sum::<f64>() / n as f64;
            (pts.iter().map(|p| (p[k] - m).powi(2)).sum::<f64>() / n as f64).sqrt()
        })
        .collect();
    let mut kept = vec![false; n];
    for _ in 0..n {
        kept[rng.random_range(0..n)] = true;
    }
    let mut worst: f64 = 0.0;
    for i in (0..n).filter(|&i| !kept[i]) {
        let nn = (0..n)
            .filter(|&j| kept[j])
            .map(|j| {
                (0..dim)
                    .map(|k| ((pts[i][k] - pts[j][k]) / sd[k]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(nn);
    }
    worst
}

pub fn bootstrap_conservative() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..20 {
        let n = rng.random_range(10..120);
        let pts = random_points(&mut rng, n, 3);
        let mut a = ChaCha8Rng::seed_from_u64(case);
        let mut b = a.clone();
        let region = Region::fit(&pts, 10, &mut a).map_err(|e| e.to_string())?;
        for round in 0..10 {
            let r = round_radius(&pts, &mut b);
            ensure(region.radius() >= r * (1.0 - 1e-12), || {
                format!(
                    "case {case}: radius {} below round {round} value {r}",
                    region.radius()
                )
            })?;
        }
    }
    Ok("20 regions, every round covered".into())
}

/// Samples two overlapping discs and compares cell counts with the union's
/// area per cell, integrated on a fine sub-grid.
pub fn draw_uniformity() -> Check {
    let centres = [[0.4, 0.5], [0.55, 0.5]];
    let radius = 0.12;
    let region = Region::new(&centres, vec![1.0, 1.0], radius).map_err(|e| e.to_string())?;
    let (lo, hi, cells, sub) = ((0.25, 0.35), (0.70, 0.65), 12, 40);
    let (wx, wy) = ((hi.0 - lo.0) / cells as f64, (hi.1 - lo.1) / cells as f64);
    let inside = |x: f64, y: f64| {
        centres
            .iter()
            .any(|c| (x - c[0]).powi(2) + (y - c[1]).powi(2) <= radius * radius)
    };
    let mut area = vec![0.0; cells * cells];
    for cx in 0..cells {
        for cy in 0..cells {
            let mut hits = 0;
            for sx in 0..sub {
                for sy in 0..sub {
                    let x = lo.0 + wx * (cx as f64 + (sx as f64 + 0.5) / sub as f64);
                    let y = lo.1 + wy * (cy as f64 + (sy as f64 + 0.5) / sub as f64);
                    hits += inside(x, y) as usize;
                }
            }
            area[cx * cells + cy] = hits as f64;
        }
    }
    let total_area: f64 = area.iter().sum();
    let n = 40_000;
    let mut counts = vec![0.0; cells * cells];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..n {
        let u = region.sample(&mut rng);
        let u = u.as_slice();
        let cx = (((u[0] - lo.0) / wx) as usize).min(cells - 1);
        let cy = (((u[1] - lo.1) / wy) as usize).min(cells - 1);
        counts[cx * cells + cy] += 1.0;
    }
    let mut chi2 = 0.0;
    let mut dof = 0;
    for (c, a) in counts.iter().zip(&area) {
        let expected = n as f64 * a / total_area;
        if expected >= 5.0 {
            chi2 += (c - expected).powi(2) / expected;
            dof += 1;
        } else if *c > 0.0 && *a == 0.0 {
            return Err("sample outside the union of balls".into());
        }
    }
    dof -= 1;
    let critical = ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.999);
    ensure(chi2 < critical, || {
        format!("chi2 {chi2:.1} >= {critical:.1} at {dof} dof")
    })?;
    Ok(format!("chi2 {chi2:.1} < {critical:.1} ({dof} dof)"))
}

/// Groups from union-find over shared point ids.
fn union_find_groups(sets: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = sets.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut owner = std::collections::HashMap::new();
    for (d, ids) in sets.iter().enumerate() {
        for id in ids {
            if let Some(&o) = owner.get(id) {
                let (a, b) = (root(&mut parent, o), root(&mut parent, d));
                parent[a] = b;
            } else {
                owner.insert(*id, d);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for d in 0..n {
        let r = root(&mut parent, d);
        groups.entry(r).or_default().push(d);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

pub fn cluster_partition() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..50 {
        let n = rng.random_range(1..=40);
        let n_live = rng.random_range(2..=10);
        let pool = rng.random_range(n_live..=n_live * n.max(2));
        let sets: Vec<Vec<usize>> = (0..n)
            .map(|_| {
                let mut ids: Vec<usize> = Vec::new();
                while ids.len() < n_live {
                    let id = rng.random_range(0..pool);
                    if !ids.contains(&id) {
                        ids.push(id);
                    }
                }
                ids
            })
            .collect();
        let table = MembershipTable::from_live_sets(
            n_live,
            sets.iter()
                .map(|s| s.iter().map(|&id| (rng.random::<f64>(), id)).collect())
                .collect(),
        )
        .map_err(|e| e.to_string())?;
        let all: Vec<usize> = (0..n).collect();
        let got = partition(&table, &all).groups;
        let want = union_find_groups(&sets);
        ensure(got == want, || format!("table {case}: {got:?} vs {want:?}"))?;
    }
    Ok("50 random tables".into())
}

pub fn shrinkage_ladder() -> Check {
    let n_live = 25;
    let mut s = RunState::new(0, n_live);
    let loglikes: Vec<f64> = (0..200).map(|i| -10.0 + 0.05 * i as f64).collect();
    let mut z = 0.0;
    for (i, &l) in loglikes.iter().enumerate() {
        s.record(i, l, s.expected_ln_shrinkage());
        let x_prev = (-(i as f64) / n_live as f64).exp();
        let x = (-((i + 1) as f64) / n_live as f64).exp();
        z += (x_prev - x) * l.exp();
        ensure((s.ln_volume - x.ln()).abs() < 1e-12, || {
            format!("volume at step {i}")
        })?;
        ensure(
            (s.dead[i].ln_weight - (x_prev - x).ln()).abs() < 1e-9,
            || format!("weight at step {i}"),
        )?;
    }
    ensure((s.ln_z - z.ln()).abs() < 1e-10, || {
        format!("ln Z {} vs {}", s.ln_z, z.ln())
    })?;
    Ok("200 steps".into())
}

fn conest(args: &[&str], single_thread: bool) -> Result<(), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_conest"));
    cmd.args(args);
    if single_thread {
        cmd.env("CONEST_THREADS", "0");
    }
    let out = cmd.output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        String::from_utf8_lossy(&out.stderr).into_owned()
    })
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

pub fn bayes_factor_exact() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    conest(
        &["generate", "--n", "5", "--seed", "2", "--out", p(d)],
        false,
    )?;
    let res = d.join("res");
    conest(
        &[
            "run",
            "--survey",
            p(&d.join("survey.csv")),
            "--nlive",
            "50",
            "--out",
            p(&res),
        ],
        false,
    )?;
    let text = String::from_utf8(read(&res.join("summary.csv"))?).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or(format!("no {name}"))
    };
    let (z1, z0, b) = (col("ln_z1")?, col("ln_z0")?, col("ln_b")?);
    let mut rows = 0;
    for line in lines {
        let f: Vec<f64> = line
            .split(',')
            .map(|v| v.parse().unwrap_or(f64::NAN))
            .collect();
        ensure(f[b] == f[z1] - f[z0], || format!("row `{line}`"))?;
        rows += 1;
    }
    ensure(rows == 5, || format!("{rows} rows"))?;
    Ok("5 rows exact".into())
}

pub fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    for run in ["a", "b"] {
        let out = d.join(run);
        conest(
            &["generate", "--n", "4", "--seed", "6", "--out", p(&out)],
            false,
        )?;
        let survey = out.join("survey.csv");
        let res = out.join("res");
        conest(
            &[
                "run",
                "--survey",
                p(&survey),
                "--nlive",
                "40",
                "--seed",
                "3",
                "--out",
                p(&res),
            ],
            true,
        )?;
    }
    for f in [
        "survey.csv",
        "truth.csv",
        "res/summary.csv",
        "res/posteriors/2.csv",
    ] {
        ensure(
            read(&d.join("a").join(f))? == read(&d.join("b").join(f))?,
            || format!("{f} differs between identical runs"),
        )?;
    }
    Ok("generate and run byte-identical".into())
}
