//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails. Set `ACCEPTANCE_ONLY=1,5,8` to run a subset.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use attnet_core::data::{augment_rotation, simulate_recording, taxonomy, ImuModel, Kind, MotionLabel, Pausing, Recording, Simulator, Speed, Standardizer};
use attnet_core::eval::{compute_rmse, default_filter_grid, default_split, median, run_ablation, AblationVariant, Split};
use attnet_core::filters::{run_filter, tune_filter, FilterParams, Variant};
use attnet_core::nn::activation::{mish, mish_grad};
use attnet_core::nn::batchnorm::BatchNorm;
use attnet_core::nn::head::{head_backward, head_normalize};
use attnet_core::nn::loss::{arccos_loss_grad_d, linear_loss_grad_d, loss, loss_and_grad};
use attnet_core::nn::params::{ParamId, ParamStore};
use attnet_core::nn::{predict, train_with, LossKind, NetConfig, Network, Tensor2, TrainConfig};
use attnet_core::quat::{attitude_error, from_axis_angle, quat_mul, random_unit_quaternion};
use attnet_core::{Quaternion, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------- criterion 1

fn c1_metric() -> Outcome {
    let t = Instant::now();
    let id = Quaternion::IDENTITY;
    let mut worst: f64 = 0.0;
    worst = worst.max(attitude_error(id, id).unwrap().e_alpha.abs());
    for angle in [0.3, 1.7, PI, -2.5] {
        let qz = from_axis_angle(Vec3::new(0.0, 0.0, 1.0), angle).unwrap();
        worst = worst.max(attitude_error(qz, id).unwrap().e_alpha.abs());
    }
    let axis = Vec3::new(1.0, 0.0, 1.0);
    let q = from_axis_angle(axis.scale(1.0 / axis.norm()), FRAC_PI_2).unwrap();
    let e = attitude_error(q, id).unwrap().e_alpha;
    worst = worst.max((e - PI / 3.0).abs());
    if worst > 1e-9 {
        return Err(format!("worked cases off by {worst:e} rad"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut heading: f64 = 0.0;
    let mut sign: f64 = 0.0;
    for _ in 0..100_000 {
        let q_est = random_unit_quaternion(&mut rng);
        let q_err = random_unit_quaternion(&mut rng);
        let q_true = quat_mul(q_err, q_est);
        let rz = from_axis_angle(Vec3::new(0.0, 0.0, 1.0), rng.random_range(-PI..PI)).unwrap();
        let base = attitude_error(q_true, q_est).unwrap().e_alpha;
        heading = heading.max((attitude_error(quat_mul(rz, q_true), q_est).unwrap().e_alpha - base).abs());
        sign = sign.max((attitude_error(q_true.scale(-1.0), q_est).unwrap().e_alpha - base).abs());
        sign = sign.max((attitude_error(q_true, q_est.scale(-1.0)).unwrap().e_alpha - base).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        heading <= 1e-9 && sign <= 1e-9 && secs < 10.0,
        format!("worked cases within {worst:.1e} rad; 1e5 samples: heading dev {heading:.1e}, sign dev {sign:.1e}; {secs:.2} s"),
    )
}

// ---------------------------------------------------------------- criterion 2

fn rel(fd: f64, an: f64) -> f64 {
    // absolute floor keeps rounding noise on vanishing entries from dominating
    (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6)
}

fn fd_step(w: f64) -> f64 {
    1e-5 * w.abs().max(1.0)
}

fn random_tensor(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor2 {
    Tensor2::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn weighted_sum(a: &Tensor2, w: &Tensor2) -> f64 {
    a.data().iter().zip(w.data()).map(|(x, y)| x * y).sum()
}

fn grad_mish() -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let x = -8.0 + 0.08 * i as f64;
        let h = fd_step(x);
        worst = worst.max(rel((mish(x + h) - mish(x - h)) / (2.0 * h), mish_grad(x)));
    }
    worst
}

fn grad_batchnorm() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut ps = ParamStore::new();
    let mut bn = BatchNorm::new(&mut ps, "bn", 3);
    for v in ps.get_mut(bn.gamma).data_mut() {
        *v = rng.random_range(0.5..1.5);
    }
    for v in ps.get_mut(bn.beta).data_mut() {
        *v = rng.random_range(-0.5..0.5);
    }
    let x = random_tensor(&mut rng, 7, 3);
    let w = random_tensor(&mut rng, 7, 3);
    let (_, cache) = bn.forward_train(&ps, &x).unwrap();
    let mut grads = ps.zero_grads();
    let dx = bn.backward(&ps, &cache, &w, &mut grads);
    let mut worst: f64 = 0.0;
    let f = |bn: &mut BatchNorm, ps: &ParamStore, x: &Tensor2| weighted_sum(&bn.forward_train(ps, x).unwrap().0, &w);
    for i in 0..x.len() {
        let h = fd_step(x.data()[i]);
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp.data_mut()[i] += h;
        xm.data_mut()[i] -= h;
        worst = worst.max(rel((f(&mut bn, &ps, &xp) - f(&mut bn, &ps, &xm)) / (2.0 * h), dx.data()[i]));
    }
    for id in [bn.gamma, bn.beta] {
        for i in 0..3 {
            let v = ps.get(id).data()[i];
            let h = fd_step(v);
            ps.get_mut(id).data_mut()[i] = v + h;
            let lp = f(&mut bn, &ps, &x);
            ps.get_mut(id).data_mut()[i] = v - h;
            let lm = f(&mut bn, &ps, &x);
            ps.get_mut(id).data_mut()[i] = v;
            worst = worst.max(rel((lp - lm) / (2.0 * h), grads.get(id).data()[i]));
        }
    }
    worst
}

fn grad_head() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let raw = random_tensor(&mut rng, 6, 4);
    let w = random_tensor(&mut rng, 6, 4);
    let (_, cache, _) = head_normalize(&raw);
    let an = head_backward(&cache, &w);
    let mut worst: f64 = 0.0;
    for i in 0..raw.len() {
        let h = fd_step(raw.data()[i]);
        let (mut p, mut m) = (raw.clone(), raw.clone());
        p.data_mut()[i] += h;
        m.data_mut()[i] -= h;
        let fd = (weighted_sum(&head_normalize(&p).0, &w) - weighted_sum(&head_normalize(&m).0, &w)) / (2.0 * h);
        worst = worst.max(rel(fd, an.data()[i]));
    }
    worst
}

fn unit_rows(rng: &mut ChaCha8Rng, n: usize) -> Tensor2 {
    let mut t = Tensor2::zeros(n, 4);
    for r in 0..n {
        t.row_mut(r).copy_from_slice(&random_unit_quaternion(rng).to_array());
    }
    t
}

fn grad_loss(kind: LossKind) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let q_ref = unit_rows(&mut rng, 16);
    let q_est = unit_rows(&mut rng, 16);
    let (_, an) = loss_and_grad(kind, 0.01, &q_ref, &q_est);
    let mut worst: f64 = 0.0;
    for i in 0..q_est.len() {
        let h = 1e-6;
        let (mut p, mut m) = (q_est.clone(), q_est.clone());
        p.data_mut()[i] += h;
        m.data_mut()[i] -= h;
        let fd = (loss(kind, 0.01, &q_ref, &p) - loss(kind, 0.01, &q_ref, &m)) / (2.0 * h);
        worst = worst.max(rel(fd, an.data()[i]));
    }
    worst
}

fn grad_network(cfg: NetConfig, steps: usize, batch: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new(cfg, Standardizer::identity(), &mut rng).unwrap();
    let x = random_tensor(&mut rng, steps * batch, 6);
    let target = unit_rows(&mut rng, steps * batch);
    let state = net.zero_state(batch);
    let mut fwd_rng = ChaCha8Rng::seed_from_u64(0);
    let (q, _, cache) = net.forward_train(&x, steps, batch, state.as_ref(), &mut fwd_rng).unwrap();
    let (_, dq) = loss_and_grad(LossKind::LinearAttSmoothL1, 0.01, &target, &q);
    let mut grads = net.params.zero_grads();
    net.backward(&cache, &dq, &mut grads);
    let mut eval = |net: &mut Network| {
        let (q, _, _) = net.forward_train(&x, steps, batch, state.as_ref(), &mut fwd_rng).unwrap();
        loss(LossKind::LinearAttSmoothL1, 0.01, &target, &q)
    };
    let mut worst: f64 = 0.0;
    for p in 0..net.params.len() {
        let id = ParamId(p);
        for i in 0..net.params.get(id).len() {
            let w = net.params.get(id).data()[i];
            let h = fd_step(w);
            net.params.get_mut(id).data_mut()[i] = w + h;
            let lp = eval(&mut net);
            net.params.get_mut(id).data_mut()[i] = w - h;
            let lm = eval(&mut net);
            net.params.get_mut(id).data_mut()[i] = w;
            worst = worst.max(rel((lp - lm) / (2.0 * h), grads.get(id).data()[i]));
        }
    }
    worst
}

fn c2_gradients() -> Outcome {
    let t = Instant::now();
    let mut lstm = NetConfig::rnn(8);
    lstm.num_layers = 2;
    let mut tcn = NetConfig::tcn(6);
    tcn.num_layers = 3;
    let results = [
        ("mish", grad_mish()),
        ("batchnorm", grad_batchnorm()),
        ("head", grad_head()),
        ("lstm 2x8/20 steps", grad_network(lstm, 20, 2, 5)),
        ("tcn 3 layers", grad_network(tcn, 16, 2, 6)),
        ("arccos loss", grad_loss(LossKind::ArccosAtt)),
        ("linear loss", grad_loss(LossKind::LinearAttSmoothL1)),
    ];
    let secs = t.elapsed().as_secs_f64();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let detail = results.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    check(worst < 1e-4 && secs < 120.0, format!("max rel err: {detail}; {secs:.1} s"))
}

// ---------------------------------------------------------------- criterion 3

fn c3_exploding() -> Outcome {
    let g_arccos = arccos_loss_grad_d(1.0 - 1e-7).abs();
    let sup_linear = (0..10_000)
        .map(|i| linear_loss_grad_d(i as f64 / 9_999.0, 0.01).abs())
        .fold(0.0, f64::max);
    check(
        g_arccos > 4000.0 && sup_linear <= 1.0,
        format!("|d arccos-loss/dd| at 1-1e-7 = {g_arccos:.1}; sup |d linear-loss/dd| = {sup_linear:.4}"),
    )
}

// ---------------------------------------------------------------- criterion 4

fn static_rec(seconds: f64, rate: f64, gyr: Vec3) -> Recording {
    let n = (seconds * rate) as usize;
    Recording::new(
        "static",
        rate,
        vec![Vec3::new(0.0, 0.0, 9.81); n],
        vec![gyr; n],
        vec![Quaternion::IDENTITY; n],
        None,
    )
    .unwrap()
}

fn c4_filters() -> Outcome {
    let rate = 286.0;
    let p = FilterParams::default();
    let rec = static_rec(60.0, rate, Vec3::ZERO);
    let init = from_axis_angle(Vec3::new(1.0, 0.0, 0.0), FRAC_PI_2).unwrap();
    let est = run_filter(&rec, &Variant::Baseline(p), Some(init)).unwrap();
    let settle = (5.0 * p.tau_base * rate) as usize;
    let err_at_settle = attitude_error(rec.q_ref[settle], est[settle]).unwrap().e_alpha.to_degrees();
    let rms_after = compute_rmse(&rec.q_ref, &est, settle).unwrap();

    let bias = 0.01;
    let drift = static_rec(30.0, rate, Vec3::new(bias, 0.0, 0.0));
    let sd = run_filter(&drift, &Variant::Strapdown, None).unwrap();
    let k = drift.len() - 1;
    let slope = attitude_error(drift.q_ref[k], sd[k]).unwrap().e_alpha.to_degrees() / drift.time(k);
    check(
        err_at_settle < 1.0 && rms_after < 0.1 && (slope - 0.57).abs() <= 0.06,
        format!("baseline error after 5 tau {err_at_settle:.3} deg, e_RMS after settle {rms_after:.4} deg; strapdown drift {slope:.4} deg/s"),
    )
}

// ---------------------------------------------------------------- criterion 5

fn c5_causality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let label = MotionLabel::new(Kind::Arbitrary, Speed::Fast, Pausing::Nonstop);
    let rec = simulate_recording(label, 6.0, 100.0, &ImuModel::default(), 3);
    let k = 300;
    let mut bumped = rec.clone();
    for j in (k + 1)..rec.len() {
        bumped.acc[j] = bumped.acc[j].scale(1.5);
        bumped.gyr[j] = bumped.gyr[j].scale(-2.0);
    }
    let mut msgs = Vec::new();
    let mut ok = true;

    let base = run_filter(&rec, &Variant::Baseline(FilterParams::default()), None).unwrap();
    let bb = run_filter(&bumped, &Variant::Baseline(FilterParams::default()), None).unwrap();
    let filt_ok = base[..=k] == bb[..=k] && base[k + 1..] != bb[k + 1..];
    ok &= filt_ok;
    msgs.push(format!("filter causal {filt_ok}"));

    let mut rnn = NetConfig::rnn(6);
    rnn.grouped_input = true;
    let mut tcn = NetConfig::tcn(5);
    tcn.num_layers = 4;
    for cfg in [rnn, tcn] {
        let arch = cfg.arch;
        let net = Network::new(cfg, Standardizer::identity(), &mut rng).unwrap();
        let a = predict(&net, &rec).unwrap();
        let b = predict(&net, &bumped).unwrap();
        let causal = a[..=k] == b[..=k] && a[k + 1..] != b[k + 1..];
        ok &= causal;
        msgs.push(format!("{} causal {causal}", arch.as_str()));
    }

    // receptive field of the TCN: 2^layers samples
    let mut tcn = NetConfig::tcn(4);
    tcn.num_layers = 4;
    let rf = tcn.receptive_field().expect("tcn has a receptive field");
    let net = Network::new(tcn, Standardizer::identity(), &mut rng).unwrap();
    let at = |shift: usize| {
        let mut r = rec.clone();
        r.gyr[k - shift] = r.gyr[k - shift].scale(3.0);
        predict(&net, &r).unwrap()[k]
    };
    let q0 = predict(&net, &rec).unwrap()[k];
    let rf_ok = at(rf) == q0 && at(rf - 1) != q0;
    ok &= rf_ok;
    msgs.push(format!("tcn receptive field {rf} exact {rf_ok}"));

    // windows with carried state against one pass
    let mut cfg = NetConfig::rnn(8);
    cfg.num_layers = 2;
    let net = Network::new(cfg, Standardizer::identity(), &mut rng).unwrap();
    let (steps, batch, win) = (120, 3, 25);
    let x = random_tensor(&mut rng, steps * batch, 6);
    let (full, _) = net.forward_eval(&x, steps, batch, net.zero_state(batch).as_ref()).unwrap();
    let mut state = net.zero_state(batch);
    let mut dev: f64 = 0.0;
    let mut t0 = 0;
    while t0 < steps {
        let len = win.min(steps - t0);
        let xs = Tensor2::from_vec(len * batch, 6, x.rows_slice(t0 * batch, len * batch).to_vec()).unwrap();
        let (q, s) = net.forward_eval(&xs, len, batch, state.as_ref()).unwrap();
        for (a, b) in q.data().iter().zip(full.rows_slice(t0 * batch, len * batch)) {
            dev = dev.max((a - b).abs());
        }
        state = s;
        t0 += len;
    }
    ok &= dev <= 1e-9;
    msgs.push(format!("windowed-with-carry deviation {dev:.1e}"));
    check(ok, msgs.join("; "))
}

// ---------------------------------------------------------------- criterion 6

const SET_SECONDS: f64 = 180.0;
const SET_RATE: f64 = 286.0;
const SET_SEED: u64 = 100;
/// About two seconds at 286 Hz, the order of a complementary filter's time
/// constant.
const MEMORY_HORIZON: f64 = 600.0;

fn desk_set() -> Vec<Recording> {
    taxonomy(6)
        .into_iter()
        .enumerate()
        .map(|(i, l)| simulate_recording(l, SET_SECONDS, SET_RATE, &ImuModel::default(), SET_SEED + i as u64))
        .collect()
}

fn headline_train_config() -> TrainConfig {
    TrainConfig {
        window_len: 256,
        windows_per_seq: 8,
        batch_size: 16,
        max_lr: 3e-3,
        epochs: 60,
        plateau_frac: 0.3,
        val_every: 10,
        seed: 0,
        ..TrainConfig::default()
    }
}

fn c6_headline(recs: &[Recording], split: &Split) -> Outcome {
    let t = Instant::now();
    let tuned = tune_filter(recs, &default_filter_grid()).unwrap();
    let (train_recs, val_recs) = split.pick(recs);
    let mut net = NetConfig::rnn(25);
    net.grouped_input = true;
    net.memory_horizon = Some(MEMORY_HORIZON);
    let (net, tr) = AblationVariant::BmLoDaGi.configure(&net, &headline_train_config());
    let (model, _) = train_with(&train_recs, &val_recs, &net, &tr, |e| {
        if let Some(v) = e.val_rmse_deg {
            eprintln!("  [c6] epoch {} train loss {:.5} val mean {:.2} deg", e.epoch, e.train_loss, v);
        }
    })
    .map_err(|e| format!("training failed: {e}"))?;
    let mut lines = Vec::new();
    let mut ok = true;
    let mut any_fast = false;
    for r in &val_recs {
        let nn = compute_rmse(&r.q_ref, &predict(&model, r).unwrap(), 0).unwrap();
        let bl = compute_rmse(&r.q_ref, &run_filter(r, &Variant::Baseline(tuned), None).unwrap(), 0).unwrap();
        lines.push(format!("{} nn {nn:.2} vs baseline {bl:.2}", r.name));
        if r.label.map(|l| l.speed) == Some(Speed::Fast) {
            any_fast = true;
            ok &= nn <= bl;
        }
    }
    let mins = t.elapsed().as_secs_f64() / 60.0;
    check(
        ok && any_fast && mins <= 60.0,
        format!("{}; {mins:.1} min", lines.join(", ")),
    )
}

// ---------------------------------------------------------------- criterion 7

fn ablation_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        window_len: 256,
        windows_per_seq: 8,
        batch_size: 16,
        max_lr: 3e-3,
        epochs: 25,
        plateau_frac: 0.3,
        val_every: 25,
        seed,
        ..TrainConfig::default()
    }
}

fn c7_ablation(recs: &[Recording], split: &Split) -> Outcome {
    let t = Instant::now();
    let mut per_variant: Vec<(AblationVariant, Vec<f64>, usize)> = AblationVariant::ALL.iter().map(|v| (*v, Vec::new(), 0)).collect();
    for seed in 0..3 {
        let base = NetConfig {
            memory_horizon: Some(MEMORY_HORIZON),
            ..NetConfig::rnn(25)
        };
        let res = run_ablation(recs, split, &[(base, ablation_train_config(seed))], 1).map_err(|e| e.to_string())?;
        for row in res.rows {
            let slot = per_variant.iter_mut().find(|s| s.0 == row.variant).unwrap();
            slot.1.push(row.val_rmse.iter().map(|(_, e)| e).sum::<f64>() / row.val_rmse.len() as f64);
            slot.2 = row.param_count;
        }
    }
    let med: Vec<f64> = per_variant.iter().map(|s| median(&s.1)).collect();
    let (bm, lo, da, gi) = (med[0], med[1], med[2], med[3]);
    let fewer = per_variant[3].2 < per_variant[2].2;
    let detail = per_variant
        .iter()
        .zip(&med)
        .map(|(s, m)| format!("{} {m:.2} deg ({} params)", s.0.as_str(), s.2))
        .collect::<Vec<_>>()
        .join(", ");
    check(
        bm >= lo && lo >= da && fewer && gi <= 1.1 * da,
        format!("median val e_RMS over 3 seeds: {detail}; {:.1} min", t.elapsed().as_secs_f64() / 60.0),
    )
}

// ---------------------------------------------------------------- criterion 8

fn c8_augmentation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for (i, label) in taxonomy(6).into_iter().enumerate() {
        let r = random_unit_quaternion(&mut rng);
        let mut sim = Simulator::new(label, 40.0, 286.0, 200 + i as u64);
        sim.imu = ImuModel::ideal();
        let base = sim.run();
        sim.sensor_rotation = r;
        let resim = sim.run();
        let aug = augment_rotation(&base, r);
        for k in 0..base.len() {
            worst = worst.max((aug.acc[k] - resim.acc[k]).norm());
            worst = worst.max((aug.gyr[k] - resim.gyr[k]).norm());
            let (a, b) = (aug.q_ref[k], resim.q_ref[k]);
            let s = if a.dot(b) < 0.0 { -1.0 } else { 1.0 };
            worst = worst.max((a.to_array().iter().zip(b.to_array()).map(|(x, y)| (x - s * y).abs())).fold(0.0, f64::max));
        }
    }
    check(worst <= 1e-6, format!("max channel deviation {worst:.1e} over 6 motions"))
}

// ---------------------------------------------------------------- criterion 9

fn c9_cli() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let cfg = root.join("cfg.json");
    fs::write(
        &cfg,
        r#"{"net": {"arch": "rnn", "num_layers": 1, "hidden": 4, "grouped_input": true},
            "tcn": {"arch": "tcn", "num_layers": 3, "hidden": 4},
            "train": {"window_len": 20, "windows_per_seq": 2, "batch_size": 4, "epochs": 2},
            "filter_grid": {"tau_base": [0.5, 2.0], "adapt_gain": [0.0, 0.1]},
            "sizes": [2, 4]}"#,
    )
    .unwrap();
    let data = root.join("data");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let run = |args: &[String]| -> Result<(), String> {
        let out = Command::new(env!("CARGO_BIN_EXE_attnet")).args(args).output().map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
        }
    };
    let v = |a: &[&str]| a.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    run(&v(&["simulate", "--set", "4", "--duration", "3", "--rate", "50", "--seed", "11", "--out", &s(&data)]))?;
    let mut listing: Vec<_> = fs::read_dir(&data)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    listing.sort();
    let rec = s(&listing[0]);
    let c = s(&cfg);
    let d = s(&data);

    type Job<'a> = (&'a str, Box<dyn Fn(&Path) -> Vec<Vec<String>> + 'a>);
    let jobs: Vec<Job> = vec![
        ("simulate", Box::new(|o: &Path| vec![v(&["simulate", "--seed", "4", "--duration", "2", "--out", &s(&o.join("r.csv"))])])),
        ("filter", Box::new(|o: &Path| vec![v(&["filter", "--in", &rec, "--out", &s(&o.join("e.csv"))])])),
        ("tune-filter", Box::new(|o: &Path| vec![v(&["tune-filter", "--config", &c, "--data-dir", &d, "--out", &s(&o.join("p.json"))])])),
        (
            "train+predict",
            Box::new(|o: &Path| {
                let m = s(&o.join("m.ckpt"));
                vec![
                    v(&["train", "--config", &c, "--seed", "5", "--data-dir", &d, "--out", &m, "--history", &s(&o.join("h.csv"))]),
                    v(&["predict", "--model", &m, "--in", &rec, "--out", &s(&o.join("e.csv"))]),
                ]
            }),
        ),
        ("loocv", Box::new(|o: &Path| vec![v(&["loocv", "--config", &c, "--jobs", "2", "--data-dir", &d, "--out-dir", &s(o)])])),
        ("ablation", Box::new(|o: &Path| vec![v(&["ablation", "--config", &c, "--data-dir", &d, "--out-dir", &s(o)])])),
        ("size-sweep", Box::new(|o: &Path| vec![v(&["size-sweep", "--config", &c, "--data-dir", &d, "--out-dir", &s(o)])])),
        (
            "report",
            Box::new(|o: &Path| {
                let first = o.join("src");
                vec![
                    v(&["loocv", "--config", &c, "--data-dir", &d, "--out-dir", &s(&first)]),
                    v(&["report", "--in", &s(&first.join("report.json")), "--out-dir", &s(&o.join("merged"))]),
                ]
            }),
        ),
    ];
    let mut names = Vec::new();
    for (name, job) in &jobs {
        let mut snaps = Vec::new();
        for rep in 0..2 {
            let o = root.join(format!("{name}_{rep}"));
            fs::create_dir_all(&o).unwrap();
            for args in job(&o) {
                run(&args)?;
            }
            snaps.push(snapshot(&o));
        }
        if snaps[0].is_empty() || snaps[0] != snaps[1] {
            return Err(format!("{name}: outputs differ between identical runs"));
        }
        names.push(*name);
    }
    Ok(format!("bit-identical reruns: {}", names.join(", ")))
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

// ---------------------------------------------------------------- runner

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    // cargo passes harness flags such as --nocapture; none apply here
    let mut failed = 0;
    let mut report = |n: usize, name: &str, t: Duration, r: Outcome| {
        let (tag, msg) = match r {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("criterion {n} {tag} [{name}] {msg} ({:.1} s)", t.as_secs_f64());
    };
    let simple: [(usize, &str, fn() -> Outcome); 6] = [
        (1, "metric", c1_metric),
        (2, "gradients", c2_gradients),
        (3, "exploding gradient", c3_exploding),
        (4, "filter sanity", c4_filters),
        (5, "causality and TBPTT", c5_causality),
        (8, "augmentation", c8_augmentation),
    ];
    for (n, name, f) in simple {
        if wanted(n) {
            let t = Instant::now();
            let r = f();
            report(n, name, t.elapsed(), r);
        }
    }
    if wanted(6) || wanted(7) {
        let recs = desk_set();
        let split = default_split(&recs, &default_filter_grid()).expect("split");
        let names: Vec<&str> = split.val.iter().map(|&i| recs[i].name.as_str()).collect();
        println!("desk-scale split: validation {names:?}");
        if wanted(6) {
            let t = Instant::now();
            let r = c6_headline(&recs, &split);
            report(6, "desk-scale headline", t.elapsed(), r);
        }
        if wanted(7) {
            let t = Instant::now();
            let r = c7_ablation(&recs, &split);
            report(7, "ablation direction", t.elapsed(), r);
        }
    }
    if wanted(9) {
        let t = Instant::now();
        let r = c9_cli();
        report(9, "reproducibility", t.elapsed(), r);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
