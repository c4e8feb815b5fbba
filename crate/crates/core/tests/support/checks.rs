//! Composite checks shared by the per-area tests and the acceptance suite.
//! Each returns `Ok(detail)` on success and `Err(detail)` on failure.

use std::collections::{BTreeSet, HashMap, HashSet};

use serann::classifier::{train_classifier_with, Classifier, Example, StopReason};
use serann::coremath::{Rng, Tensor};
use serann::corpus::synth::{pattern_clip, synth_corpus, SynthConfig};
use serann::corpus::{cross_corpus_split, loso_folds, ConfusionMatrix, Emotion, UtteranceRecord};
use serann::dsp::{average_energy, average_pitch, mel_spectrogram, AudioClip, MelSpec, SAMPLE_RATE};
use serann::vqvae::{evaluate_vqvae, nearest, train_vqvae, Codebook, VqVae, VqVaeConfig};

use super::grad_suite::{toy_classifier_config, toy_vqvae_config};
use super::oracles::{
    brute_force_nearest, brute_force_uar, flat_trace_decay_epochs, reference_mel, sine,
};

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_codebook(k: usize, d: usize, rng: &mut Rng) -> (Codebook, Vec<Vec<f64>>) {
    let rows: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
    let t = Tensor::new(&[k, d], rows.concat()).unwrap();
    (Codebook::new(t).unwrap(), rows)
}

/// `n` random vectors against a random k x d codebook; returns the number of
/// index disagreements with the brute-force scan.
pub fn quantizer_disagreements(k: usize, d: usize, n: usize, seed: u64) -> usize {
    let mut rng = Rng::new(seed);
    let (book, rows) = random_codebook(k, d, &mut rng);
    (0..n)
        .filter(|_| {
            let z: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            nearest(&z, &book).0 != brute_force_nearest(&z, &rows)
        })
        .count()
}

pub fn quantizer() -> Check {
    let main = quantizer_disagreements(64, 16, 1000, 1);
    ensure(main == 0, || format!("k=64: {main}/1000 indices disagree"))?;
    // Near-ties: vectors placed next to a code, plus exact duplicates in the book.
    let mut rng = Rng::new(2);
    let (mut book_rows, mut disagree) = (random_codebook(64, 8, &mut rng).1, 0);
    book_rows[10] = book_rows[3].clone();
    let book = Codebook::new(Tensor::new(&[64, 8], book_rows.concat()).unwrap()).unwrap();
    for i in 0..200 {
        let z: Vec<f64> = book_rows[i % 64].iter().map(|v| v + 1e-9 * rng.normal()).collect();
        if nearest(&z, &book).0 != brute_force_nearest(&z, &book_rows) {
            disagree += 1;
        }
    }
    ensure(disagree == 0, || format!("near-tie set: {disagree}/200 disagree"))?;
    let big = quantizer_disagreements(8192, 512, 20, 3);
    ensure(big == 0, || format!("k=8192: {big}/20 indices disagree"))?;
    Ok("1000/1000 (k=64), 200/200 near-ties, 20/20 (k=8192, d=512)".into())
}

/// Straight-through routing on the toy VQ-VAE.
pub fn straight_through() -> Check {
    let cfg = toy_vqvae_config();
    let mut rng = Rng::new(31);
    let mut model = VqVae::new(cfg.clone(), &mut rng).unwrap();
    for p in model.params_mut().into_iter().filter(|p| p.rank() == 1) {
        *p = Tensor::from_fn(p.shape(), |_| rng.uniform(-0.1, 0.1));
    }
    let x = Tensor::from_fn(&[80, 8], |_| rng.uniform(-1.0, 1.0));
    let z0 = model.encode(&x).unwrap();
    let d = cfg.code_dim;
    model.codebook = Tensor::from_fn(&[cfg.codebook_size, d], |i| z0.data()[i % z0.len()] + rng.uniform(-0.3, 0.3));
    let fwd = model.forward(&[&x]).unwrap();
    model.zero_grad();
    let (_, q) = model.backward(&[&x]).unwrap();

    let same_bits = q
        .at_z_q
        .data()
        .iter()
        .zip(q.recon_at_z_e.data())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    ensure(q.at_z_q.shape() == q.recon_at_z_e.shape() && same_bits, || {
        "reconstruction gradient at z_e differs from the one at z_q".into()
    })?;
    ensure(q.at_z_q.data().iter().any(|v| *v != 0.0), || "reconstruction gradient is all zero".into())?;
    ensure(q.codebook_at_z_e.data().iter().all(|v| *v == 0.0), || {
        "codebook term sends gradient to the encoder".into()
    })?;
    ensure(q.commitment_at_e.data().iter().all(|v| *v == 0.0), || {
        "commitment term sends gradient to the codebook".into()
    })?;

    // The codebook's accumulated gradient is the codebook term alone:
    // d/de of mean_p ||sg(z_e) - e||^2, which is 2 (e - z_e) / P per use.
    let p_count = fwd.codes.len() as f64;
    let mut expected = vec![0.0; cfg.codebook_size * d];
    for (p, &c) in fwd.codes.iter().enumerate() {
        for j in 0..d {
            expected[c * d + j] += 2.0 * (model.codebook.data()[c * d + j] - fwd.z_e.data()[p * d + j]) / p_count;
        }
    }
    let got = model.codebook.grad().unwrap();
    let worst = got.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(worst < 1e-12, || format!("codebook gradient off the codebook-term oracle by {worst:e}"))?;
    let unused: BTreeSet<usize> = (0..cfg.codebook_size).filter(|c| !fwd.codes.contains(c)).collect();
    ensure(unused.iter().all(|&c| got[c * d..(c + 1) * d].iter().all(|v| *v == 0.0)), || {
        "unused code received gradient".into()
    })?;
    Ok(format!(
        "bitwise copy over {} values; stop-gradient terms exactly zero",
        q.at_z_q.len()
    ))
}

pub fn dsp() -> Check {
    let clip = |x: Vec<f64>| AudioClip::new(x, SAMPLE_RATE).unwrap();
    let x = sine(1000.0, 1.5, 0.5);
    let ours = mel_spectrogram(&clip(x.clone())).map_err(|e| e.to_string())?;
    ensure(ours.tensor().shape() == [80, 256], || format!("shape {:?}", ours.tensor().shape()))?;
    let reference = reference_mel(&x);
    let worst = ours
        .tensor()
        .data()
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(worst < 1e-3, || format!("mel cell differs from reference by {worst:e}"))?;
    ensure(ours.tensor().data().iter().all(|v| (-1.0..=1.0).contains(v)), || "mel outside [-1, 1]".into())?;
    let mut worst_pitch = 0.0f64;
    for f in [120.0, 200.0, 300.0] {
        let p = average_pitch(&clip(sine(f, 1.0, 0.5)));
        worst_pitch = worst_pitch.max((p - f).abs());
        ensure((p - f).abs() <= 3.0, || format!("{f} Hz tone read as {p:.2} Hz"))?;
    }
    let e = average_energy(&clip(sine(440.0, 1.0, 0.5)));
    ensure((e - 0.3536).abs() < 1e-3, || format!("half-scale sine energy {e}"))?;
    Ok(format!(
        "mel max diff {worst:.2e}; pitch max error {worst_pitch:.2} Hz; energy {e:.4}"
    ))
}

/// Scripted flat validation trace through the real training loop, with the
/// published learning-rate settings.
pub fn schedule() -> Check {
    let cfg = serann::classifier::ClassifierConfig {
        lr_init: 1e-4,
        lr_decay: 0.5,
        lr_floor: 1e-5,
        plateau_patience: 5,
        batch_size: 4,
        max_epochs: 300,
        ..toy_classifier_config()
    };
    let (h, w) = cfg.input_hw;
    let model = Classifier::new(cfg.clone(), &mut Rng::new(41)).unwrap();
    let mut rng = Rng::new(42);
    let xs: Vec<Tensor> = (0..8).map(|_| Tensor::from_fn(&[h, w], |_| rng.uniform(-1.0, 1.0))).collect();
    let data: Vec<Example> = xs.iter().zip((0..4).cycle()).collect();
    // Keep every evaluated model's exact bytes, indexed by epoch.
    let mut seen: Vec<Vec<u8>> = Vec::new();
    let out = train_classifier_with(
        model,
        &data,
        |m| {
            seen.push(m.to_checkpoint().to_bytes());
            Ok(0.4)
        },
        &mut Rng::new(43),
        |_| {},
    )
    .map_err(|e| e.to_string())?;

    let (oracle_epochs, oracle_lr) = flat_trace_decay_epochs(5, 1e-4, 0.5, 1e-5);
    let epochs: Vec<usize> = out.decays.iter().map(|d| d.epoch).collect();
    ensure(epochs == oracle_epochs && epochs == [6, 12, 18, 24], || format!("decays at {epochs:?}"))?;
    let lrs: Vec<f64> = out.decays.iter().map(|d| d.new_lr).collect();
    ensure(lrs == [5e-5, 2.5e-5, 1.25e-5, 6.25e-6], || format!("learning rates {lrs:?}"))?;
    ensure(out.stop == StopReason::LrFloor && *lrs.last().unwrap() == oracle_lr, || {
        format!("stopped by {:?} at {:?}", out.stop, lrs.last())
    })?;
    ensure(out.history.len() == 24, || format!("{} epochs ran", out.history.len()))?;
    // The epoch after each decay starts from the epoch-1 weights exactly.
    let best = Classifier::from_checkpoint(
        &serann::coremath::Checkpoint::from_bytes(&seen[0]).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    for d in &out.decays {
        ensure(d.restored_epoch == 1 && d.restored_digest == best.digest(), || {
            format!("decay at epoch {} restored epoch {}", d.epoch, d.restored_epoch)
        })?;
    }
    ensure(out.model.to_checkpoint().to_bytes() == seen[0], || "returned model is not the best checkpoint".into())?;
    let lr_at = |e: usize| out.history[e - 1].lr;
    ensure(lr_at(6) == 1e-4 && lr_at(7) == 5e-5 && lr_at(24) == 1.25e-5, || "per-epoch lr trace".into())?;
    Ok(format!("decays at {epochs:?}, stop at lr {oracle_lr:e}, 4 bit-exact reversions"))
}

pub fn metrics() -> Check {
    let mut rng = Rng::new(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = 2 + rng.below(7);
        let counts: Vec<Vec<u64>> = (0..k)
            .map(|i| {
                let mut row: Vec<u64> = (0..k).map(|_| rng.below(50) as u64).collect();
                row[i] += 1;
                row
            })
            .collect();
        let names = (0..k).map(|i| format!("c{i}")).collect();
        let m = ConfusionMatrix::from_counts(names, counts.clone()).map_err(|e| e.to_string())?;
        let ours = m.uar().map_err(|e| e.to_string())?;
        worst = worst.max((ours - brute_force_uar(&counts)).abs());
    }
    ensure(worst <= 1e-12, || format!("uar differs from brute force by {worst:e}"))?;
    let mut one_class = ConfusionMatrix::four_class();
    for gold in 0..4 {
        for _ in 0..25 {
            one_class.add(gold, 2).unwrap();
        }
    }
    let u = one_class.uar().map_err(|e| e.to_string())?;
    ensure(u == 0.25, || format!("all-one-class predictor scored {u}"))?;
    Ok(format!("1000 matrices, max diff {worst:.1e}; one-class predictor 0.25"))
}

pub fn splits() -> Check {
    let records: Vec<UtteranceRecord> = synth_corpus(&SynthConfig {
        speakers: 10,
        per_class_per_speaker: 2,
        seed: 3,
        ..Default::default()
    })
    .into_iter()
    .map(|(r, _)| r)
    .collect();
    let plan = loso_folds(&records).map_err(|e| e.to_string())?;
    ensure(plan.folds.len() == 10, || format!("{} LOSO folds", plan.folds.len()))?;
    plan.validate(&records).map_err(|e| e.to_string())?;
    let all: BTreeSet<&str> = records.iter().map(|r| r.utterance_id.as_str()).collect();
    let mut tested = BTreeSet::new();
    for f in &plan.folds {
        let parts: BTreeSet<&str> = f.train.iter().chain(&f.test).map(String::as_str).collect();
        ensure(parts == all && parts.len() == f.train.len() + f.test.len(), || {
            format!("fold {} does not cover the corpus exactly", f.name)
        })?;
        let test_spk: HashSet<&str> = records
            .iter()
            .filter(|r| f.test.contains(&r.utterance_id))
            .map(|r| r.speaker_id.as_str())
            .collect();
        let leak = records
            .iter()
            .any(|r| f.train.contains(&r.utterance_id) && test_spk.contains(r.speaker_id.as_str()));
        ensure(test_spk.len() == 1 && !leak, || format!("fold {} leaks its speaker", f.name))?;
        tested.extend(f.test.iter().map(String::as_str));
    }
    ensure(tested == all, || "LOSO test sets do not cover every utterance once".into())?;

    let eval: Vec<UtteranceRecord> = synth_corpus(&SynthConfig {
        speakers: 5,
        per_class_per_speaker: 5,
        seed: 4,
        id_prefix: "eval_".into(),
        ..Default::default()
    })
    .into_iter()
    .map(|(r, _)| r)
    .collect();
    let n = eval.len();
    let split = |seed| cross_corpus_split(&records, &eval, 0.3, &Rng::new(seed)).unwrap();
    let a = split(5);
    let fold = &a.folds[0];
    let eval_ids: BTreeSet<&str> = eval.iter().map(|r| r.utterance_id.as_str()).collect();
    let got: BTreeSet<&str> = fold.val.iter().chain(&fold.test).map(String::as_str).collect();
    ensure(got == eval_ids && fold.val.len() + fold.test.len() == n, || "cross split is not a partition".into())?;
    ensure(fold.val.len() == 30 && fold.test.len() == 70, || {
        format!("val {} / test {} of {n}", fold.val.len(), fold.test.len())
    })?;
    ensure(fold.train.len() == records.len(), || "training corpus not used whole".into())?;
    ensure(split(5) == a, || "same seed gave a different split".into())?;
    ensure(split(6) != a, || "different seeds gave the same split".into())?;
    for e in Emotion::ALL {
        let in_val = eval
            .iter()
            .filter(|r| r.gold_label == Some(e) && fold.val.contains(&r.utterance_id))
            .count();
        ensure((7..=8).contains(&in_val), || format!("{e}: {in_val} in val"))?;
    }
    Ok(format!("10 LOSO folds, no leakage; cross split 30/70 of {n}, seed-reproducible"))
}

/// `per_pattern` clips of each synthetic pattern, as (pattern, mel).
pub fn pattern_set(per_pattern: usize, seed: u64) -> Vec<(usize, MelSpec)> {
    let mut rng = Rng::new(seed);
    (0..per_pattern * 2)
        .map(|i| {
            let p = i % 2;
            (p, mel_spectrogram(&pattern_clip(p, &mut rng)).unwrap())
        })
        .collect()
}

/// Most frequent code of each pattern at each latent position.
pub fn dominant_codes(model: &VqVae, set: &[(usize, MelSpec)], pattern: usize) -> BTreeSet<u32> {
    let mut per_pos: Vec<HashMap<u32, usize>> = vec![HashMap::new(); 64];
    for (_, m) in set.iter().filter(|(p, _)| *p == pattern) {
        for (pos, c) in model.codes(m).unwrap().as_slice().iter().enumerate() {
            *per_pos[pos].entry(*c).or_default() += 1;
        }
    }
    per_pos
        .iter()
        .map(|h| *h.iter().max_by_key(|(c, n)| (**n, std::cmp::Reverse(**c))).unwrap().0)
        .collect()
}

/// Desk-profile VQ-VAE on the 2-pattern set.
pub fn vqvae_learning() -> Check {
    let train = pattern_set(8, 11);
    let held = pattern_set(4, 12);
    let mels: Vec<Tensor> = train.iter().map(|(_, m)| m.tensor().clone()).collect();
    let held_mels: Vec<Tensor> = held.iter().map(|(_, m)| m.tensor().clone()).collect();
    let cfg = VqVaeConfig::desk();
    ensure(cfg.epochs == 50, || format!("desk profile trains {} epochs", cfg.epochs))?;
    let fit = || {
        let mut rng = Rng::new(5);
        let mut model = VqVae::new(cfg.clone(), &mut rng).unwrap();
        let hist = train_vqvae(&mut model, &mels, &mut rng, |_| {}).unwrap();
        (model, hist)
    };
    let (model, hist) = fit();
    let ratio = hist.last().unwrap().recon / hist[0].recon;
    ensure(ratio < 0.5, || format!("epoch-50 recon is {:.1}% of epoch 1", 100.0 * ratio))?;
    let untrained = VqVae::new(cfg.clone(), &mut Rng::new(5)).unwrap();
    let held_ratio = evaluate_vqvae(&model, &held_mels).unwrap().recon / evaluate_vqvae(&untrained, &held_mels).unwrap().recon;
    let (a, b) = (dominant_codes(&model, &held, 0), dominant_codes(&model, &held, 1));
    ensure(a.is_disjoint(&b), || format!("dominant code sets overlap: {a:?} / {b:?}"))?;
    let again = fit().0;
    for (_, m) in &held {
        let c = model.codes(m).unwrap();
        ensure(c == model.codes(m).unwrap() && c == again.codes(m).unwrap(), || "code extraction differs between runs".into())?;
    }
    Ok(format!(
        "recon {:.1}% of epoch 1 (held-out {:.1}% of untrained); dominant codes {a:?} vs {b:?}; deterministic",
        100.0 * ratio,
        100.0 * held_ratio
    ))
}
