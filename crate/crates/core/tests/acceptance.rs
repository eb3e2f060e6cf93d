//! Acceptance gate. One test per contract criterion, so the runner
//! prints one pass/fail line for each. Numeric targets are checked
//! against oracles implemented here from scratch, never by calling
//! back into the code under test.
//!
//! The wall-clock-budgeted scenarios (deblur sweep, inpainting loads,
//! the 500-frame corpus) serialize on a shared lock so each budget is
//! measured without the other heavy jobs competing for cores.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use frametriage::deteval::{average_precision, evaluate, EvalDataset, EvalFrame, EVAL_IOU_THRESHOLDS};
use frametriage::geometry::raster::blur_frame;
use frametriage::io::{
    frame_log_csv, video_report_json, write_frame_png, write_sidecar, DetectionSidecar, PngDepth,
    SidecarFrame, SimConfig,
};
use frametriage::metrics::{compute_all, psnr, reco, ssim, vif};
use frametriage::pipeline::{
    baseline_keep_count, plan_restoration, process_video, restore_frame, FrameTask,
    PipelineConfig, StageKind,
};
use frametriage::quality::{quality_score, Disposition, QualityConfig};
use frametriage::restore::{
    color_retransfer, color_stats, color_stats_over_mask, patch_inpaint, tv_deconvolve,
    tv_inpaint, TvParams, COLOR_CEILING, DEFAULT_PATCH_SIDE,
};
use frametriage::sim::{corrupt, random_masks, test_chart};
use frametriage::{ArtifactClass, BBox, Detection, Frame};

static HEAVY: Mutex<()> = Mutex::new(());

fn det(code: u8, x: f64, y: f64, w: f64, h: f64, conf: f64) -> Detection {
    Detection::new(
        ArtifactClass::from_code(code).unwrap(),
        BBox::new(x, y, w, h).unwrap(),
        conf,
    )
    .unwrap()
}

/// Straight-line re-summation of the quality score under the default
/// weights, written from the scoring contract rather than the library
/// types: severity by wire code, area term w*h, location weight from
/// the 3x3 grid cell holding the box center, both lambdas jumping from
/// 0.5 to 1.0 when fewer than five boxes are present, final clamp to
/// [0,1].
fn oracle_qs(boxes: &[(u8, f64, f64, f64, f64)]) -> f64 {
    const SEVERITY: [f64; 6] = [0.05, 0.10, 0.20, 0.10, 0.05, 0.50];
    const GRID: [[f64; 3]; 3] = [
        [0.125, 0.25, 0.125],
        [0.25, 0.5, 0.25],
        [0.125, 0.25, 0.125],
    ];
    let lambda = if boxes.len() < 5 { 1.0 } else { 0.5 };
    let mut penalty = 0.0;
    for &(code, x, y, w, h) in boxes {
        let severity = SEVERITY[code as usize];
        let col = (((x + w / 2.0) * 3.0).floor() as usize).min(2);
        let row = (((y + h / 2.0) * 3.0).floor() as usize).min(2);
        penalty += lambda * severity * (w * h) + lambda * severity * GRID[row][col];
    }
    (1.0 - penalty).clamp(0.0, 1.0)
}

#[test]
fn c01_quality_score_matches_hand_cases_and_oracle() {
    let start = Instant::now();
    let cfg = QualityConfig::default();

    // Hand-worked cases. No artifacts: nothing to penalize.
    let empty = quality_score(&[], &cfg).unwrap();
    assert!((empty.qs - 1.0).abs() < 1e-9);
    assert_eq!(empty.disposition, Disposition::Keep);

    // One full-frame misc box: 1.0*(0.5*1.0) + 1.0*(0.5*0.5) = 0.75 penalty.
    let full = quality_score(&[det(5, 0.0, 0.0, 1.0, 1.0, 1.0)], &cfg).unwrap();
    assert!((full.qs - 0.25).abs() < 1e-9);
    assert_eq!(full.disposition, Disposition::Discard);

    // Six central specularities of area 0.1: each 0.5*0.2*0.1 + 0.5*0.2*0.5 = 0.06.
    let spec = det(2, 0.3, 0.375, 0.4, 0.25, 1.0);
    let six = quality_score(&[spec; 6], &cfg).unwrap();
    assert!((six.qs - 0.64).abs() < 1e-9);
    assert_eq!(six.disposition, Disposition::Restore);

    // Lambda switch at five boxes: four central 0.2x0.2 specularities
    // score 1 - 4*0.108 = 0.568; a fifth halves the lambdas and the
    // score rises to 1 - 5*0.054 = 0.73.
    let small = det(2, 0.4, 0.4, 0.2, 0.2, 1.0);
    let four = quality_score(&[small; 4], &cfg).unwrap();
    let five = quality_score(&[small; 5], &cfg).unwrap();
    assert!((four.qs - 0.568).abs() < 1e-9);
    assert!((five.qs - 0.73).abs() < 1e-9);

    // Three full-frame misc boxes drive the raw score negative; it clamps.
    let three = quality_score(&[det(5, 0.0, 0.0, 1.0, 1.0, 1.0); 3], &cfg).unwrap();
    assert!(three.qs.abs() < 1e-9);
    assert_eq!(three.disposition, Disposition::Discard);

    // Randomized agreement with the straight-line oracle.
    let mut rng = ChaCha8Rng::seed_from_u64(0xface);
    for case in 0..1000 {
        let n = rng.gen_range(0..=8);
        let mut raw = Vec::with_capacity(n);
        for _ in 0..n {
            let code = rng.gen_range(0..6u8);
            let w = rng.gen_range(0.01..0.3);
            let h = rng.gen_range(0.01..0.3);
            let x = rng.gen_range(0.0..1.0 - w);
            let y = rng.gen_range(0.0..1.0 - h);
            raw.push((code, x, y, w, h));
        }
        let dets: Vec<Detection> = raw
            .iter()
            .map(|&(c, x, y, w, h)| det(c, x, y, w, h, 1.0))
            .collect();
        let got = quality_score(&dets, &cfg).unwrap().qs;
        let want = oracle_qs(&raw);
        assert!(
            (got - want).abs() < 1e-9,
            "case {case}: scored {got}, oracle {want}"
        );
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
    println!("criterion 1: 5 hand cases + 1000 oracle cases agree to 1e-9 in {elapsed:?}");
}

#[test]
fn c02_relabeling_contrast_to_misc_strictly_lowers_score() {
    let cfg = QualityConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xbead);
    for case in 0..100 {
        // A large box whose center stays in the middle grid cell, plus
        // small low-severity boxes identical across both labelings.
        let w = rng.gen_range(0.3..0.6);
        let h = rng.gen_range(0.3..0.6);
        let cx = rng.gen_range(0.4..0.6);
        let cy = rng.gen_range(0.4..0.6);
        let (x, y) = (cx - w / 2.0, cy - h / 2.0);
        let mut fillers = Vec::new();
        for _ in 0..rng.gen_range(0..=7) {
            let fw = rng.gen_range(0.02..0.08);
            let fh = rng.gen_range(0.02..0.08);
            let fx = rng.gen_range(0.0..1.0 - fw);
            let fy = rng.gen_range(0.0..1.0 - fh);
            fillers.push(det(0, fx, fy, fw, fh, 1.0));
        }
        let mut as_contrast = fillers.clone();
        as_contrast.push(det(4, x, y, w, h, 1.0));
        let mut as_misc = fillers;
        as_misc.push(det(5, x, y, w, h, 1.0));
        let qs_contrast = quality_score(&as_contrast, &cfg).unwrap().qs;
        let qs_misc = quality_score(&as_misc, &cfg).unwrap().qs;
        assert!(
            qs_contrast > qs_misc,
            "case {case}: contrast {qs_contrast} not above misc {qs_misc}"
        );
    }
    println!("criterion 2: 100 relabelings, contrast scores strictly above misc_artifact");
}

/// Plain-struct box for the evaluation oracle.
#[derive(Clone, Copy)]
struct OBox {
    code: u8,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    conf: f64,
}

fn oracle_iou(a: &OBox, b: &OBox) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a.w * a.h + b.w * b.h - inter)
}

/// Brute-force all-points AP for one class, in percent. Per frame,
/// predictions walk in descending confidence (ties keep input order)
/// and each claims the free same-class ground-truth box of highest IoU
/// at or above the threshold, earliest entry on IoU ties. Pooled
/// dataset-wide, ranked by confidence with (frame, input order) as the
/// tie-break, the precision envelope integrates over achieved recall.
/// None when the class has no ground truth.
fn oracle_ap(frames: &[(Vec<OBox>, Vec<OBox>)], code: u8, thr: f64) -> Option<f64> {
    let mut pooled: Vec<(f64, bool)> = Vec::new();
    let mut gt_total = 0usize;
    for (gts, preds) in frames {
        let gt_idx: Vec<usize> = (0..gts.len()).filter(|i| gts[*i].code == code).collect();
        gt_total += gt_idx.len();
        let pred_idx: Vec<usize> = (0..preds.len()).filter(|i| preds[*i].code == code).collect();
        let mut order = pred_idx.clone();
        order.sort_by(|a, b| preds[*b].conf.partial_cmp(&preds[*a].conf).unwrap());
        let mut taken = vec![false; gts.len()];
        let mut is_tp = vec![false; preds.len()];
        for &pi in &order {
            let mut best: Option<(usize, f64)> = None;
            for &gi in &gt_idx {
                if taken[gi] {
                    continue;
                }
                let ov = oracle_iou(&preds[pi], &gts[gi]);
                if ov >= thr && best.is_none_or(|(_, b)| ov > b) {
                    best = Some((gi, ov));
                }
            }
            if let Some((gi, _)) = best {
                taken[gi] = true;
                is_tp[pi] = true;
            }
        }
        for &pi in &pred_idx {
            pooled.push((preds[pi].conf, is_tp[pi]));
        }
    }
    if gt_total == 0 {
        return None;
    }
    pooled.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut tp_cum = 0usize;
    let mut recalls = Vec::with_capacity(pooled.len());
    let mut precisions = Vec::with_capacity(pooled.len());
    for (i, (_, tp)) in pooled.iter().enumerate() {
        if *tp {
            tp_cum += 1;
        }
        recalls.push(tp_cum as f64 / gt_total as f64);
        precisions.push(tp_cum as f64 / (i as f64 + 1.0));
    }
    let mut ap = 0.0;
    let mut prev = 0.0;
    for i in 0..recalls.len() {
        let peak = precisions[i..].iter().fold(0.0f64, |m, p| m.max(*p));
        ap += (recalls[i] - prev) * peak;
        prev = recalls[i];
    }
    Some(100.0 * ap)
}

fn to_dataset(frames: &[(Vec<OBox>, Vec<OBox>)]) -> EvalDataset {
    EvalDataset {
        frames: frames
            .iter()
            .enumerate()
            .map(|(i, (gts, preds))| EvalFrame {
                frame_id: format!("f{i}"),
                ground_truth: gts
                    .iter()
                    .map(|b| det(b.code, b.x, b.y, b.w, b.h, 1.0))
                    .collect(),
                predictions: preds
                    .iter()
                    .map(|b| det(b.code, b.x, b.y, b.w, b.h, b.conf))
                    .collect(),
            })
            .collect(),
    }
}

/// Boxes on a coarse lattice so draws collide often: exact overlaps,
/// IoU ties, and repeated confidences all occur.
fn lattice_box(rng: &mut ChaCha8Rng, code: u8, conf_pool: &[f64]) -> OBox {
    OBox {
        code,
        x: 0.1 * rng.gen_range(0..=6) as f64,
        y: 0.1 * rng.gen_range(0..=6) as f64,
        w: 0.1 * rng.gen_range(1..=3) as f64,
        h: 0.1 * rng.gen_range(1..=3) as f64,
        conf: conf_pool[rng.gen_range(0..conf_pool.len())],
    }
}

fn check_against_oracle(frames: &[(Vec<OBox>, Vec<OBox>)]) {
    let ds = to_dataset(frames);
    let result = evaluate(&ds).unwrap();
    for (ti, thr) in EVAL_IOU_THRESHOLDS.iter().enumerate() {
        let mut sum = 0.0;
        let mut n = 0usize;
        for class in ArtifactClass::ALL {
            let want = oracle_ap(frames, class.code(), *thr);
            let got = average_precision(&ds, class, *thr).unwrap();
            match (got, want) {
                (None, None) => {}
                (Some(g), Some(w)) => {
                    assert!(
                        (g - w).abs() < 1e-9,
                        "{class} at iou {thr}: got {g}, oracle {w}"
                    );
                    sum += w;
                    n += 1;
                }
                (g, w) => panic!("{class} at iou {thr}: presence disagrees ({g:?} vs {w:?})"),
            }
        }
        let want_map = if n == 0 { None } else { Some(sum / n as f64) };
        match (result.map_percent[ti], want_map) {
            (None, None) => {}
            (Some(g), Some(w)) => {
                assert!((g - w).abs() < 1e-9, "map at iou {thr}: got {g}, oracle {w}")
            }
            (g, w) => panic!("map at iou {thr}: presence disagrees ({g:?} vs {w:?})"),
        }
    }
}

#[test]
fn c03_detection_eval_matches_brute_force_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xdec0de);
    let conf_pool = [0.3, 0.5, 0.5, 0.7, 0.9, 0.9];
    let mut datasets = 0usize;

    // Frozen ranking case: a false positive outranking two true
    // positives over two ground-truth boxes integrates to AP = 2/3.
    let frozen_gts = vec![
        OBox { code: 2, x: 0.1, y: 0.1, w: 0.2, h: 0.2, conf: 1.0 },
        OBox { code: 2, x: 0.6, y: 0.6, w: 0.2, h: 0.2, conf: 1.0 },
    ];
    let frozen_preds = vec![
        OBox { code: 2, x: 0.4, y: 0.1, w: 0.1, h: 0.1, conf: 0.9 },
        OBox { code: 2, x: 0.1, y: 0.1, w: 0.2, h: 0.2, conf: 0.8 },
        OBox { code: 2, x: 0.6, y: 0.6, w: 0.2, h: 0.2, conf: 0.7 },
    ];
    let frozen = vec![(frozen_gts, frozen_preds)];
    let ap = average_precision(&to_dataset(&frozen), ArtifactClass::Specularity, 0.5)
        .unwrap()
        .unwrap();
    assert!((ap - 200.0 / 3.0).abs() < 1e-9, "frozen case AP {ap}");
    check_against_oracle(&frozen);
    datasets += 1;

    // Every (prediction count, ground-truth count) combination, one
    // class, one frame, several geometry draws each.
    for n_pred in 0..=4usize {
        for n_gt in 0..=3usize {
            for _ in 0..8 {
                let gts = (0..n_gt).map(|_| lattice_box(&mut rng, 2, &[1.0])).collect();
                let preds = (0..n_pred)
                    .map(|_| lattice_box(&mut rng, 2, &conf_pool))
                    .collect();
                check_against_oracle(&[(gts, preds)]);
                datasets += 1;
            }
        }
    }

    // Same combinations with a second class mixed in, exercising
    // per-class pooling.
    for n_pred in 0..=4usize {
        for n_gt in 0..=3usize {
            for _ in 0..4 {
                let mut gts: Vec<OBox> =
                    (0..n_gt).map(|_| lattice_box(&mut rng, 2, &[1.0])).collect();
                gts.extend((0..n_gt.min(2)).map(|_| lattice_box(&mut rng, 5, &[1.0])));
                let mut preds: Vec<OBox> = (0..n_pred)
                    .map(|_| lattice_box(&mut rng, 2, &conf_pool))
                    .collect();
                preds.extend((0..n_pred.min(3)).map(|_| lattice_box(&mut rng, 5, &conf_pool)));
                check_against_oracle(&[(gts, preds)]);
                datasets += 1;
            }
        }
    }

    // Same combinations split over two frames, exercising cross-frame
    // ranking and confidence ties between frames.
    for n_pred in 0..=4usize {
        for n_gt in 0..=3usize {
            for _ in 0..4 {
                let frames: Vec<(Vec<OBox>, Vec<OBox>)> = (0..2)
                    .map(|_| {
                        (
                            (0..n_gt).map(|_| lattice_box(&mut rng, 2, &[1.0])).collect(),
                            (0..n_pred)
                                .map(|_| lattice_box(&mut rng, 2, &conf_pool))
                                .collect(),
                        )
                    })
                    .collect();
                check_against_oracle(&frames);
                datasets += 1;
            }
        }
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    println!("criterion 3: {datasets} datasets match the brute-force oracle to 1e-9 in {elapsed:?}");
}

#[test]
fn c04_map_nonincreasing_in_iou_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa11a);
    let conf_pool = [0.3, 0.5, 0.5, 0.7, 0.9, 0.9];
    for case in 0..50 {
        let frames: Vec<(Vec<OBox>, Vec<OBox>)> = (0..3)
            .map(|_| {
                let mut gts = Vec::new();
                let mut preds = Vec::new();
                for code in [0u8, 2, 5] {
                    for _ in 0..rng.gen_range(1..=4) {
                        gts.push(lattice_box(&mut rng, code, &[1.0]));
                    }
                    for _ in 0..rng.gen_range(0..=6) {
                        preds.push(lattice_box(&mut rng, code, &conf_pool));
                    }
                }
                (gts, preds)
            })
            .collect();
        let maps = evaluate(&to_dataset(&frames)).unwrap().map_percent;
        let (m5, m25, m50) = (maps[0].unwrap(), maps[1].unwrap(), maps[2].unwrap());
        assert!(
            m5 >= m25 && m25 >= m50,
            "case {case}: map {m5:.4} / {m25:.4} / {m50:.4} not nonincreasing"
        );
    }
    println!("criterion 4: 50 random datasets, mAP_5 >= mAP_25 >= mAP_50 throughout");
}

#[test]
fn c05_deblur_gains_two_db_mean_over_trajectory_sweep() {
    let _heavy = HEAVY.lock().unwrap();
    let start = Instant::now();
    let sim = SimConfig::default();
    let results: Vec<(f64, f64, f64, f64)> = (0..sim.count as u64)
        .into_par_iter()
        .map(|i| {
            let frame_seed = 1000u64.wrapping_add(i);
            let clean = test_chart(sim.width, sim.height, frame_seed).unwrap();
            let spec = sim.degradation_spec(frame_seed).unwrap();
            let corrupted = corrupt(&clean, &spec, frame_seed).unwrap();
            let restored = tv_deconvolve(
                &corrupted.frame,
                corrupted.psf.as_ref(),
                &TvParams::default(),
            )
            .unwrap();
            (
                psnr(&clean, &corrupted.frame).unwrap(),
                psnr(&clean, &restored).unwrap(),
                ssim(&clean, &corrupted.frame).unwrap(),
                ssim(&clean, &restored).unwrap(),
            )
        })
        .collect();
    assert_eq!(results.len(), 15);
    let mut gain_sum = 0.0;
    for (i, (p_pre, p_post, s_pre, s_post)) in results.iter().enumerate() {
        println!(
            "  trajectory {i:2}: psnr {p_pre:6.2} -> {p_post:6.2} dB, ssim {s_pre:.4} -> {s_post:.4}"
        );
        gain_sum += p_post - p_pre;
        assert!(
            *s_post >= *s_pre - 0.005,
            "trajectory {i}: ssim degraded {s_pre} -> {s_post}"
        );
    }
    let mean_gain = gain_sum / results.len() as f64;
    let elapsed = start.elapsed();
    assert!(mean_gain >= 2.0, "mean psnr gain {mean_gain:.3} dB below 2 dB");
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}, budget 5 min");
    println!("criterion 5: mean psnr gain {mean_gain:.2} dB over 15 trajectories in {elapsed:?}");
}

#[test]
fn c06_inpainting_meets_mask_load_thresholds() {
    let _heavy = HEAVY.lock().unwrap();
    let clean = test_chart(512, 512, 4242).unwrap();
    let loads = [
        ("5%", &[21usize, 23, 25, 27, 29][..], 0.04..0.06, 35.0, 30.0),
        ("12%", &[35, 37, 39, 41, 43][..], 0.10..0.14, 30.0, 26.0),
    ];
    for (label, sides, band, tv_floor, patch_floor) in loads {
        let mask = random_masks(512, 512, 21, sides, 9).unwrap();
        let fraction = mask.fraction();
        assert!(
            band.contains(&fraction),
            "{label} load: mask fraction {fraction:.4} outside {band:?}"
        );
        let degraded = Frame::from_fn(512, 512, clean.channels(), |x, y, c| {
            if mask.get(x, y) {
                1.0
            } else {
                clean.get(x, y, c)
            }
        })
        .unwrap();

        let t_tv = Instant::now();
        let tv = tv_inpaint(&degraded, &mask, &TvParams::for_inpainting()).unwrap();
        let tv_elapsed = t_tv.elapsed();
        let tv_db = psnr(&clean, &tv).unwrap();

        let t_patch = Instant::now();
        let patch = patch_inpaint(&degraded, &mask, DEFAULT_PATCH_SIDE).unwrap();
        let patch_elapsed = t_patch.elapsed();
        let patch_db = psnr(&clean, &patch.frame).unwrap();

        println!(
            "  {label} load (fraction {fraction:.4}): tv {tv_db:.2} dB in {tv_elapsed:?}, \
             patch {patch_db:.2} dB in {patch_elapsed:?}"
        );
        assert!(tv_db >= tv_floor, "{label}: tv psnr {tv_db:.2} below {tv_floor}");
        assert!(
            patch_db >= patch_floor,
            "{label}: patch psnr {patch_db:.2} below {patch_floor}"
        );
        assert!(
            tv_elapsed.as_secs_f64() < 180.0,
            "{label}: tv took {tv_elapsed:?}, budget 3 min"
        );
        assert!(
            patch_elapsed.as_secs_f64() < 60.0,
            "{label}: patch took {patch_elapsed:?}, budget 1 min"
        );
    }
    println!("criterion 6: both inpainters clear their thresholds at both mask loads");
}

/// Chart texture compressed toward mid-gray with per-channel spread and
/// offset: every value stays far from the [0,1] clamp and below the
/// intensity ceiling, so the whole frame qualifies for statistics and
/// the retransfer map stays purely affine.
fn soft_chart(rng: &mut ChaCha8Rng) -> Frame {
    let base = test_chart(64, 64, rng.gen()).unwrap();
    let spread: Vec<f64> = (0..3).map(|_| rng.gen_range(0.2..0.35)).collect();
    let offset: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.06..0.06)).collect();
    Frame::from_fn(64, 64, 3, |x, y, c| {
        0.5 + (base.get(x, y, c) - 0.5) * spread[c] + offset[c]
    })
    .unwrap()
}

#[test]
fn c07_color_retransfer_reproduces_source_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc010);
    for case in 0..100 {
        let source = soft_chart(&mut rng);
        let target = soft_chart(&mut rng);
        let src_stats = color_stats(&source, COLOR_CEILING).unwrap();
        let tgt_stats = color_stats(&target, COLOR_CEILING).unwrap();
        assert_eq!(tgt_stats.count, 64 * 64, "case {case}: a pixel hit the ceiling");

        let out = color_retransfer(&target, &src_stats, &tgt_stats).unwrap();
        assert!(!out.regularized, "case {case}: target covariance degenerate");
        // Values strictly inside (0,1) prove the final clamp never
        // fired, so the map applied exactly.
        assert!(
            out.frame.data().iter().all(|v| *v > 0.0 && *v < 1.0),
            "case {case}: a transformed pixel clamped"
        );

        let redone = color_stats_over_mask(&out.frame, &tgt_stats.mask).unwrap();
        for ch in 0..3 {
            assert!(
                (redone.mean[ch] - src_stats.mean[ch]).abs() <= 1e-6,
                "case {case}: mean[{ch}] {} vs {}",
                redone.mean[ch],
                src_stats.mean[ch]
            );
        }
        for i in 0..9 {
            assert!(
                (redone.cov[i] - src_stats.cov[i]).abs() <= 1e-6,
                "case {case}: cov[{i}] {} vs {}",
                redone.cov[i],
                src_stats.cov[i]
            );
        }
    }
    println!("criterion 7: 100 random pairs, transformed stats match the source to 1e-6");
}

#[test]
fn c08_metric_identity_and_blur_ladder() {
    let chart = test_chart(96, 96, 31).unwrap();

    let p = psnr(&chart, &chart).unwrap();
    assert!(p.is_infinite() && p > 0.0, "identity psnr {p}");
    assert_eq!(ssim(&chart, &chart).unwrap(), 1.0);
    let v = vif(&chart, &chart).unwrap();
    assert!((v - 1.0).abs() < 1e-9, "identity vif {v}");
    assert_eq!(reco(&chart, &chart).unwrap(), Some(1.0));

    // Sub-pixel blurs can raise relative edge coherence: suppressing
    // fine texture while strong edges survive reads as sharpening,
    // which the edge-ratio metric rewards above 1. The ladder therefore
    // starts where blur strictly destroys edge information.
    let sigmas = [1.6, 2.0, 2.8, 4.5, 7.0];
    let mut rows = Vec::new();
    for sigma in sigmas {
        let blurred = blur_frame(&chart, sigma);
        let m = compute_all(&chart, &blurred).unwrap();
        rows.push((
            sigma,
            m.psnr.unwrap(),
            m.ssim.unwrap(),
            m.vif.unwrap(),
            m.reco.unwrap(),
        ));
        let r = rows.last().unwrap();
        println!(
            "  sigma {sigma:.1}: psnr {:.2} ssim {:.4} vif {:.4} reco {:.4}",
            r.1, r.2, r.3, r.4
        );
    }
    for pair in rows.windows(2) {
        let (s0, p0, ss0, v0, r0) = pair[0];
        let (s1, p1, ss1, v1, r1) = pair[1];
        assert!(p1 <= p0 + 1e-6, "psnr rose {p0} -> {p1} from sigma {s0} to {s1}");
        assert!(ss1 <= ss0 + 1e-6, "ssim rose {ss0} -> {ss1} from sigma {s0} to {s1}");
        assert!(v1 <= v0 + 1e-6, "vif rose {v0} -> {v1} from sigma {s0} to {s1}");
        assert!(r1 <= r0 + 1e-6, "reco rose {r0} -> {r1} from sigma {s0} to {s1}");
    }
    println!("criterion 8: identity values exact, all four metrics nonincreasing with blur");
}

#[test]
fn c09_pipeline_retention_on_mixed_corpus() {
    let _heavy = HEAVY.lock().unwrap();
    let start = Instant::now();
    // 60% clean, 30% mildly corrupted (one central specularity, scores
    // 0.882), 10% severe (three large misc boxes, scores 0.0),
    // interleaved. A third of the clean frames carry a detection below
    // the confidence threshold, which the baseline must also ignore.
    let tasks: Vec<FrameTask> = (0..500usize)
        .map(|i| {
            let detections = match i % 10 {
                0 | 3 => vec![det(0, 0.1, 0.1, 0.05, 0.05, 0.1)],
                s if s < 6 => Vec::new(),
                s if s < 9 => vec![det(2, 0.35, 0.35, 0.3, 0.3, 0.8)],
                _ => vec![det(5, 0.275, 0.275, 0.45, 0.45, 0.9); 3],
            };
            FrameTask {
                frame_id: format!("f{i:04}"),
                detections,
            }
        })
        .collect();
    let cfg = PipelineConfig::default();
    let loads = AtomicUsize::new(0);
    let report = process_video(
        &tasks,
        &cfg,
        |i: usize, _t: &FrameTask| {
            loads.fetch_add(1, Ordering::Relaxed);
            test_chart(64, 64, i as u64)
        },
        None::<fn(usize, &FrameTask) -> frametriage::Result<Frame>>,
        |_, _, _, _| Ok(()),
    )
    .unwrap();
    let elapsed = start.elapsed();

    assert!(
        report.frames.iter().all(|f| f.failure.is_none()),
        "a restoration failed"
    );
    // Pixels load only for frames routed to restoration.
    assert_eq!(loads.load(Ordering::Relaxed), 150);

    let retained = (report.kept + report.restored) as f64 / report.total as f64;
    let baseline = baseline_keep_count(&tasks, &cfg) as f64 / report.total as f64;
    println!(
        "  kept {} restored {} discarded {} of {}; retained {:.1}%, baseline {:.1}%",
        report.kept,
        report.restored,
        report.discarded,
        report.total,
        100.0 * retained,
        100.0 * baseline
    );
    assert!(retained >= 0.85, "retained fraction {retained:.3} below 0.85");
    assert!(baseline <= 0.65, "baseline keep fraction {baseline:.3} above 0.65");
    assert!(
        (report.restored_fraction - 0.30).abs() <= 0.05,
        "restored fraction {:.3} not within 0.30 +/- 0.05",
        report.restored_fraction
    );
    assert!(elapsed.as_secs_f64() < 900.0, "took {elapsed:?}, budget 15 min");
    println!("criterion 9: retention beats the any-detection baseline in {elapsed:?}");
}

#[test]
fn c10_exactness_invariants() {
    // (a) Keep-path frames pass through the command-line pipeline
    // byte-identical.
    let dir = tempfile::tempdir().unwrap();
    let frames_dir = dir.path().join("frames");
    let out_dir = dir.path().join("out");
    std::fs::create_dir_all(&frames_dir).unwrap();
    let mut sidecar = DetectionSidecar::default();
    for i in 0..3u64 {
        let id = format!("k{i}");
        let frame = test_chart(48, 48, 100 + i).unwrap();
        write_frame_png(&frames_dir.join(format!("{id}.png")), &frame, PngDepth::Sixteen).unwrap();
        let detections = match i {
            0 => Vec::new(),
            // Below the confidence threshold: ignored entirely.
            1 => vec![det(5, 0.2, 0.2, 0.3, 0.3, 0.1)],
            // Tiny corner blur box penalizes ~0.0063, staying above the
            // keep line.
            _ => vec![det(0, 0.0, 0.0, 0.01, 0.01, 0.9)],
        };
        sidecar.frames.push(SidecarFrame {
            frame_id: id,
            detections,
        });
    }
    let sidecar_path = dir.path().join("dets.json");
    write_sidecar(&sidecar_path, &sidecar).unwrap();
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_frametriage"))
        .arg("pipeline")
        .arg("--frames")
        .arg(&frames_dir)
        .arg("--sidecar")
        .arg(&sidecar_path)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "pipeline failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    for i in 0..3 {
        let name = format!("k{i}.png");
        let original = std::fs::read(frames_dir.join(&name)).unwrap();
        let kept = std::fs::read(out_dir.join(&name)).unwrap();
        assert_eq!(original, kept, "{name} changed on the keep path");
    }

    // (b) Inpaint-only restoration leaves out-of-mask pixels bit-exact.
    let frame = test_chart(48, 48, 7).unwrap();
    let dets = vec![det(2, 0.4, 0.4, 0.2, 0.2, 0.9)];
    let cfg = PipelineConfig::default();
    let plan = plan_restoration(&dets, 48, 48, &cfg).unwrap();
    assert_eq!(plan.stages.len(), 1);
    assert!(matches!(plan.stages[0].kind, StageKind::Inpaint));
    let mask = plan.stages[0].mask.clone().unwrap();
    let restored = restore_frame(&frame, &plan, &cfg).frame.unwrap();
    let mut rewritten = 0usize;
    for y in 0..48 {
        for x in 0..48 {
            for c in 0..3 {
                let a = frame.get(x, y, c);
                let b = restored.get(x, y, c);
                if mask.get(x, y) {
                    rewritten += (a.to_bits() != b.to_bits()) as usize;
                } else {
                    assert_eq!(
                        a.to_bits(),
                        b.to_bits(),
                        "pixel ({x},{y},{c}) outside the mask changed"
                    );
                }
            }
        }
    }
    assert!(rewritten > 0, "inpainting wrote nothing inside the mask");

    // (c) Reports are byte-reproducible across identical runs.
    let tasks: Vec<FrameTask> = (0..30usize)
        .map(|i| FrameTask {
            frame_id: format!("r{i:02}"),
            detections: match i % 3 {
                0 => Vec::new(),
                1 => vec![det(2, 0.35, 0.35, 0.3, 0.3, 0.8)],
                _ => vec![det(5, 0.275, 0.275, 0.45, 0.45, 0.9); 3],
            },
        })
        .collect();
    let run = || {
        let report = process_video(
            &tasks,
            &cfg,
            |i: usize, _t: &FrameTask| test_chart(48, 48, i as u64),
            None::<fn(usize, &FrameTask) -> frametriage::Result<Frame>>,
            |_, _, _, _| Ok(()),
        )
        .unwrap();
        (video_report_json(&report), frame_log_csv(&report.frames).unwrap())
    };
    let (json_a, csv_a) = run();
    let (json_b, csv_b) = run();
    assert_eq!(json_a, json_b, "report json differs between runs");
    assert_eq!(csv_a, csv_b, "log csv differs between runs");

    println!(
        "criterion 10: keep path byte-identical, out-of-mask pixels bit-exact, reports byte-reproducible"
    );
}
