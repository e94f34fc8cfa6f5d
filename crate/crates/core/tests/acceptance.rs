//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use barcode_grad::barcode::{Barcode, OrderedBarcode};
use barcode_grad::complex::SimplicialComplex;
use barcode_grad::config::Config;
use barcode_grad::differential::{build_lift, directional_derivative, taylor_remainder_check};
use barcode_grad::losses::{BarcodeLoss, BottleneckTo, LOSS_TIE_TOLERANCE};
use barcode_grad::param::{LowerStar, SquaredDistance};
use barcode_grad::persistence::{diagram, perm_lift, total_template};
use barcode_grad::verify::{self, gen, instance_rng, SuiteReport};

struct Outcome {
    passed: bool,
    detail: String,
}

fn from_suite(r: SuiteReport, elapsed: Duration, limit: Option<Duration>) -> Outcome {
    let in_time = limit.is_none_or(|l| elapsed < l);
    let mut detail = format!("{} instances, {} failures, {:.1}s", r.instances, r.failures.len(), elapsed.as_secs_f64());
    if let Some(f) = r.failures.first() {
        detail.push_str(&format!("; first: instance {} {}", f.instance, f.detail));
    }
    if !in_time {
        detail.push_str(&format!("; over the {}s limit", limit.unwrap().as_secs()));
    }
    Outcome {
        passed: r.passed && in_time,
        detail,
    }
}

fn timed_suite(run: impl FnOnce() -> SuiteReport, limit: Option<Duration>) -> Outcome {
    let start = Instant::now();
    let r = run();
    from_suite(r, start.elapsed(), limit)
}

fn oracle() -> Outcome {
    timed_suite(|| verify::oracle_suite(1, 200), Some(Duration::from_secs(60)))
}

fn stability() -> Outcome {
    timed_suite(|| verify::stability_suite(2, 1000), None)
}

fn isometry() -> Outcome {
    timed_suite(|| verify::isometry_suite(3, 100), None)
}

fn gradients() -> Outcome {
    timed_suite(|| verify::gradient_suite(4, 100), Some(Duration::from_secs(300)))
}

fn random_barcode(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Barcode {
    let finite = (0..m)
        .map(|_| {
            let b = gen::uniform(rng, 0.0, 2.0);
            (b, b + gen::uniform(rng, 0.05, 1.5))
        })
        .collect();
    let infinite = (0..n).map(|_| gen::uniform(rng, 0.0, 2.0)).collect();
    Barcode::new(finite, infinite)
}

fn ordered(pairs: &[(f64, f64)], infinite: &[f64]) -> OrderedBarcode {
    let mut data: Vec<f64> = pairs.iter().flat_map(|&(b, d)| [b, d]).collect();
    data.extend_from_slice(infinite);
    OrderedBarcode::new(pairs.len(), infinite.len(), data).unwrap()
}

/// Generic bottleneck instance: a unique critical term, and not one sending a target point to the diagonal.
fn generic_bottleneck(rng: &mut ChaCha8Rng) -> (OrderedBarcode, BottleneckTo) {
    loop {
        let n = rng.gen_range(0..3);
        let (mx, mt) = (rng.gen_range(1..5), rng.gen_range(0..4));
        let x = random_barcode(rng, mx, n);
        let target = random_barcode(rng, mt, n);
        let frozen: Vec<f64> = target.finite().iter().map(|&(b, d)| (d - b) / 2.0).collect();
        let loss = BottleneckTo::new(target);
        let x = OrderedBarcode::from_barcode(&x);
        let e = loss.evaluate(&x).unwrap();
        if e.smooth && frozen.iter().all(|h| (e.scalar() - h).abs() > LOSS_TIE_TOLERANCE) {
            return (x, loss);
        }
    }
}

fn bottleneck_structure() -> Outcome {
    let mut bad = Vec::new();
    for i in 0..200 {
        let mut rng = instance_rng(5, i);
        let (x, loss) = generic_bottleneck(&mut rng);
        let e = loss.evaluate(&x).unwrap();
        let g = e.scalar_grad();
        if !verify::bottleneck_pattern(&g, x.m()) {
            bad.push(format!("{i}: pattern {g:?}"));
            continue;
        }

        let pairs: Vec<(f64, f64)> = x.pairs().collect();
        let mut perm: Vec<usize> = (0..x.m()).collect();
        perm.shuffle(&mut rng);
        let mut inf_perm: Vec<usize> = (0..x.n()).collect();
        inf_perm.shuffle(&mut rng);
        let shuffled = ordered(
            &perm.iter().map(|&k| pairs[k]).collect::<Vec<_>>(),
            &inf_perm.iter().map(|&k| x.infinite()[k]).collect::<Vec<_>>(),
        );
        let es = loss.evaluate(&shuffled).unwrap();
        let gs = es.scalar_grad();
        let moved = perm.iter().enumerate().all(|(slot, &k)| gs[2 * slot] == g[2 * k] && gs[2 * slot + 1] == g[2 * k + 1])
            && inf_perm
                .iter()
                .enumerate()
                .all(|(slot, &k)| gs[2 * x.m() + slot] == g[2 * x.m() + k]);
        if es.scalar() != e.scalar() || !moved || shuffled.quotient() != x.quotient() {
            bad.push(format!("{i}: not invariant under slot permutation"));
            continue;
        }

        let at = rng.gen_range(0..=x.m());
        let c = gen::uniform(&mut rng, 0.0, 2.0);
        let mut padded = pairs.clone();
        padded.insert(at, (c, c));
        let xp = ordered(&padded, x.infinite());
        let ep = loss.evaluate(&xp).unwrap();
        let gp = ep.scalar_grad();
        let mut expected = g.clone();
        expected.splice(2 * at..2 * at, [0.0, 0.0]);
        if ep.scalar() != e.scalar() || gp != expected || xp.quotient() != x.quotient() {
            bad.push(format!("{i}: not invariant under diagonal insertion"));
        }
    }
    Outcome {
        passed: bad.is_empty(),
        detail: match bad.first() {
            None => "200 generic diagrams, patterns and invariances hold".into(),
            Some(b) => format!("{} violations; first {b}", bad.len()),
        },
    }
}

fn distance_example() -> Outcome {
    let k = Arc::new(SimplicialComplex::build(&[vec![0, 1]]).unwrap());
    let f = LowerStar::new(
        k,
        SquaredDistance {
            coordinates: vec![vec![0.0], vec![1.0]],
        },
    )
    .unwrap();
    let run = || -> barcode_grad::error::Result<(f64, f64, f64)> {
        let lift = build_lift(&f, &[0.3], 0)?;
        let value = lift.evaluate(&f, &[0.3])?.infinite()[0];
        let (right, l) = directional_derivative(&f, &[0.5], &[1.0], 0)?;
        let (left, _) = directional_derivative(&f, &[0.5], &[-1.0], 0)?;
        let slot = 2 * l.m();
        Ok((value, right[slot], -left[slot]))
    };
    match run() {
        Ok((value, right, left)) => Outcome {
            passed: (value - 0.09).abs() < 1e-12 && right == -1.0 && left == 1.0,
            detail: format!("lift at 0.3 = {value}; one-sided derivatives at 0.5: right {right}, left {left}"),
        },
        Err(e) => Outcome {
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn perm_lift_check() -> Outcome {
    let mut bad = Vec::new();
    for i in 0..100 {
        let mut rng = instance_rng(6, i);
        let k = gen::random_complex(&mut rng, 6, 0.6, 0.5);
        let grid = i % 2 == 0;
        let f = gen::monotone_filter(&mut rng, &k, grid);
        let g = gen::reparametrize(&mut rng, &f, false);
        let lifts = perm_lift(&f);
        for (p, lift) in lifts.iter().enumerate() {
            if lift.quotient() != diagram(&f, p).unwrap() {
                bad.push(format!("{i}: quotient differs in degree {p}"));
            }
        }
        let (tf, tg) = (total_template(&f), total_template(&g));
        if !f.ordering_equivalent(&g) || tf.permutation() != tg.permutation() {
            bad.push(format!("{i}: permutation changed under reparametrization"));
        }
        if verify::total_simplices(&tf.counts()) != k.len() {
            bad.push(format!("{i}: slot count differs from the number of simplices"));
        }
    }
    Outcome {
        passed: bad.is_empty(),
        detail: match bad.first() {
            None => "100 filters".into(),
            Some(b) => format!("{} violations; first {b}", bad.len()),
        },
    }
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

const RADII: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

fn taylor() -> Outcome {
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for kind in ["rips", "height"] {
        for i in 0..20 {
            let mut rng = instance_rng(8, i);
            let (f, theta) = loop {
                let (f, theta) = verify::random_parametrization(&mut rng, kind).unwrap();
                if f.is_smooth_at(&theta) {
                    break (f, theta);
                }
            };
            let p = i % 2;
            let basis = f.tangent_directions(&theta);
            let c = gen::unit_vector(&mut rng, basis.len());
            let u = unit((0..theta.len()).map(|j| basis.iter().zip(&c).map(|(t, w)| w * t[j]).sum()).collect());
            let r = taylor_remainder_check(f.as_ref(), &theta, p, &RADII, &u).unwrap();
            count += 1;
            let last = *r.ratios.last().unwrap();
            worst = worst.max(last);
            if !r.decreasing || last >= 1e-3 {
                bad.push(format!("{kind} {i}: ratios {:?}", r.ratios));
            }
        }
    }
    Outcome {
        passed: bad.is_empty(),
        detail: match bad.first() {
            None => format!("{count} instances, largest final ratio {worst:.2e}"),
            Some(b) => format!("{} violations; first {b}", bad.len()),
        },
    }
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn end_to_end() -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for name in ["continuation", "simplification"] {
        let cfg = Config::load(&configs_dir().join(format!("{name}.json"))).unwrap();
        let a = cfg.build().unwrap().run().unwrap();
        let b = cfg.build().unwrap().run().unwrap();
        let initial = a.records[0].loss;
        let last = a.final_loss();
        let same = a.to_jsonl() == b.to_jsonl();
        passed &= last < initial && same;
        parts.push(format!("{name} {initial:.4} -> {last:.4}{}", if same { "" } else { " (reruns differ)" }));
    }
    Outcome {
        passed,
        detail: parts.join(", "),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence", oracle),
        ("stability", stability),
        ("local isometry", isometry),
        ("chain-rule gradients", gradients),
        ("bottleneck gradient structure", bottleneck_structure),
        ("distance example", distance_example),
        ("perm lift", perm_lift_check),
        ("taylor remainder", taylor),
        ("end-to-end optimization", end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.passed {
            failed += 1;
        }
        println!("criterion {} {}: {} ({})", i + 1, name, if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
