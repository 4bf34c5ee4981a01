//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see the lines as they go).
//! Every tolerance is pinned in this file.

use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use textrack_core::ablation::{cells, run_cell, AblationMode};
use textrack_core::association::{
    fused_distance, morphological_distance, solve_assignment, DistanceMatrix, DistanceWeights,
    Embedding,
};
use textrack_core::embeddings::triplet_loss;
use textrack_core::geometry::{iou, quad_to_rotated_rect, Point, Quad, RotatedRect};
use textrack_core::io;
use textrack_core::localization::{
    build_complement_mask, extract_boxes, fuse_and_binarize, fuse_and_binarize_with_mode,
    synthesize_probability_map, BinaryMask, BoostMode, ComplementConfig, ProbabilityMap,
};
use textrack_core::metrics::{clear_mot, idf1, GroundTruth};
use textrack_core::synth::{generate, MotionKind, ScenarioSpec};
use textrack_core::tracker::{run_frames, TextInstance};

fn criterion(name: &str, f: impl FnOnce() + UnwindSafe) {
    let start = Instant::now();
    match catch_unwind(f) {
        Ok(()) => println!("[{name}] PASS ({:.2?})", start.elapsed()),
        Err(cause) => {
            println!("[{name}] FAIL");
            resume_unwind(cause);
        }
    }
}

/// The standard benchmark scenario at one seed: 20 tracks over 200
/// frames of 512x384, dropout 0.3, jitter 0.5, three sustained-miss
/// windows.
fn standard_spec(seed: u64) -> ScenarioSpec {
    ScenarioSpec { seed, ..ScenarioSpec::default() }
}

#[test]
fn criterion_1_assignment_exactness() {
    criterion("criterion 1: assignment optimality on 500 random matrices", || {
        fn brute_force(m: &DistanceMatrix) -> f64 {
            fn recurse(
                row: usize,
                rows: usize,
                cols: usize,
                used: &mut [bool],
                get: &dyn Fn(usize, usize) -> f64,
            ) -> f64 {
                if row == rows {
                    return 0.0;
                }
                let mut best = f64::INFINITY;
                for j in 0..cols {
                    if !used[j] {
                        used[j] = true;
                        let total = get(row, j) + recurse(row + 1, rows, cols, used, get);
                        used[j] = false;
                        if total < best {
                            best = total;
                        }
                    }
                }
                best
            }
            let transposed = m.rows() > m.cols();
            let (rows, cols) = if transposed {
                (m.cols(), m.rows())
            } else {
                (m.rows(), m.cols())
            };
            let get = |i: usize, j: usize| if transposed { m.get(j, i) } else { m.get(i, j) };
            recurse(0, rows, cols, &mut vec![false; cols], &get)
        }

        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(0xACCE97);
        for case in 0..500 {
            let rows = rng.gen_range(1..=7);
            let cols = rng.gen_range(1..=7);
            let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(0.0..100.0)).collect();
            let m = DistanceMatrix::from_rows(rows, cols, data).unwrap();
            let assignment = solve_assignment(&m, f64::INFINITY);
            assert_eq!(assignment.pairs.len(), rows.min(cols));
            let total: f64 = assignment.pairs.iter().map(|&(i, j)| m.get(i, j)).sum();
            let oracle = brute_force(&m);
            assert!(
                (total - oracle).abs() <= 1e-9,
                "case {case} ({rows}x{cols}): {total} vs {oracle}"
            );
        }
        let elapsed = start.elapsed();
        assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    });
}

#[test]
fn criterion_2_geometry_against_monte_carlo() {
    criterion("criterion 2: rotated IOU vs Monte-Carlo and closed form", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x9E0);
        for case in 0..100 {
            let w = rng.gen_range(4.0..24.0);
            let h = rng.gen_range(2.0..w);
            let a = RotatedRect::new(0.0, 0.0, w, h, rng.gen_range(-1.5..1.5))
                .unwrap()
                .to_quad();
            let b = RotatedRect::new(
                rng.gen_range(-w / 2.0..w / 2.0),
                rng.gen_range(-h..h),
                rng.gen_range(4.0..24.0),
                rng.gen_range(2.0..12.0),
                rng.gen_range(-1.5..1.5),
            )
            .unwrap()
            .to_quad();
            let exact = iou(&a, &b).unwrap();

            // Ratio estimator over the union bounding box.
            let (ax0, ay0, ax1, ay1) = a.bounding_box();
            let (bx0, by0, bx1, by1) = b.bounding_box();
            let (x0, y0) = (ax0.min(bx0), ay0.min(by0));
            let (x1, y1) = (ax1.max(bx1), ay1.max(by1));
            let mut both = 0u64;
            let mut either = 0u64;
            for _ in 0..100_000 {
                let p = Point::new(rng.gen_range(x0..x1), rng.gen_range(y0..y1));
                let in_a = a.contains(p);
                let in_b = b.contains(p);
                if in_a || in_b {
                    either += 1;
                }
                if in_a && in_b {
                    both += 1;
                }
            }
            let estimate = both as f64 / either as f64;
            assert!(
                (exact - estimate).abs() <= 1e-2,
                "case {case}: exact {exact} vs mc {estimate}"
            );
        }

        // Closed-form axis-aligned overlaps.
        for case in 0..100 {
            let ax = rng.gen_range(-50.0..50.0);
            let ay = rng.gen_range(-50.0..50.0);
            let aw = rng.gen_range(1.0..30.0);
            let ah = rng.gen_range(1.0..30.0);
            let bx = ax + rng.gen_range(-aw..aw);
            let by = ay + rng.gen_range(-ah..ah);
            let bw = rng.gen_range(1.0..30.0);
            let bh = rng.gen_range(1.0..30.0);
            let a = Quad::axis_aligned(ax, ay, ax + aw, ay + ah).unwrap();
            let b = Quad::axis_aligned(bx, by, bx + bw, by + bh).unwrap();
            let ix = (ax + aw).min(bx + bw) - ax.max(bx);
            let iy = (ay + ah).min(by + bh) - ay.max(by);
            let inter = ix.max(0.0) * iy.max(0.0);
            let expected = inter / (aw * ah + bw * bh - inter);
            let got = iou(&a, &b).unwrap();
            assert!(
                (got - expected).abs() <= 1e-9,
                "case {case}: {got} vs {expected}"
            );
        }
    });
}

#[test]
fn criterion_3_formula_fidelity() {
    criterion("criterion 3: frozen hand-computed formula values", || {
        let w = DistanceWeights::default();
        // Morphological distance at the published sigma setting.
        let ri = RotatedRect::new(10.0, 10.0, 20.0, 5.0, 0.0).unwrap();
        let rj = RotatedRect::new(12.0, 14.0, 22.0, 6.0, 0.1).unwrap();
        let dm = morphological_distance(&ri, &rj, 1, &w).unwrap();
        assert!((dm - 2.87).abs() <= 1e-9, "dm {dm}");

        // Fused distance at the published alpha/beta/gamma setting.
        let fused = fused_distance(1.0, 0.5, 2.87, &w);
        assert!((fused - 1.274).abs() <= 1e-9, "fused {fused}");

        // Mask-fusion grid at the published h1/h2 setting.
        let b = ProbabilityMap::from_data(2, 2, vec![0.7, 0.2, 0.5, 0.9]).unwrap();
        let mut m = BinaryMask::zeros(2, 2);
        m.set(0, 0);
        m.set(1, 0);
        m.set(1, 1);
        let (fused_map, mask) = fuse_and_binarize(&b, &m, 0.6, 0.3).unwrap();
        let expect_fused = [(0, 0, 1.7), (1, 0, 0.2), (0, 1, 0.5), (1, 1, 1.9)];
        for (x, y, v) in expect_fused {
            assert!(
                (fused_map.get(x, y) - v).abs() <= 1e-9,
                "fused({x},{y}) = {}",
                fused_map.get(x, y)
            );
        }
        let expect_mask = [(0, 0, true), (1, 0, false), (0, 1, true), (1, 1, true)];
        for (x, y, v) in expect_mask {
            assert_eq!(mask.get(x, y), v, "mask({x},{y})");
        }

        // Triplet losses at the published margin of 1.0.
        let origin = Embedding::new(vec![0.0, 0.0]).unwrap();
        let far = Embedding::new(vec![2.0, 0.0]).unwrap();
        let p = Embedding::new(vec![0.2, 0.0]).unwrap();
        let n = Embedding::new(vec![0.5, 0.0]).unwrap();
        let l0 = triplet_loss(&origin, &origin, &far, 1.0).unwrap();
        assert!(l0.abs() <= 1e-9, "loss {l0}");
        let l07 = triplet_loss(&origin, &p, &n, 1.0).unwrap();
        assert!((l07 - 0.7).abs() <= 1e-9, "loss {l07}");
        let l1 = triplet_loss(&origin, &origin, &origin, 1.0).unwrap();
        assert!((l1 - 1.0).abs() <= 1e-9, "loss {l1}");
    });
}

#[test]
fn criterion_4_metric_fidelity() {
    criterion("criterion 4: hand-traced metric values", || {
        let quad = |x: f64, y: f64, w: f64, h: f64| Quad::axis_aligned(x, y, x + w, y + h).unwrap();
        let record = |frame: u64, id: u64, q: Quad| io::InstanceRecord {
            frame,
            trajectory_id: id,
            quad: q,
            confidence: 0.9,
        };
        let result_from = |records: Vec<io::InstanceRecord>| io::TrackingResult {
            records,
            config: Vec::new(),
            seed: None,
            trajectories: Vec::new(),
        };

        // Hand-traced toy: 6 GT boxes, one miss, one id switch, no FP.
        let mut gt = GroundTruth::new();
        for t in 0..3 {
            gt.insert(1, t, quad(0.0, 0.0, 10.0, 5.0), None).unwrap();
            gt.insert(2, t, quad(50.0, 0.0, 10.0, 5.0), None).unwrap();
        }
        let records = vec![
            record(0, 101, quad(0.0, 0.0, 10.0, 5.0)),
            record(1, 101, quad(0.0, 0.0, 10.0, 5.0)),
            record(1, 102, quad(50.0, 0.0, 10.0, 5.0)),
            record(2, 103, quad(0.0, 0.0, 10.0, 5.0)),
            record(2, 102, quad(50.0, 0.0, 10.0, 5.0)),
        ];
        let cm = clear_mot(&gt, &result_from(records), 0.5).unwrap();
        assert!((cm.mota - 0.6667).abs() <= 1e-4, "mota {}", cm.mota);

        // Constructed jitter: every box shifted by w/9 so IOU is 0.8.
        let mut gt_jitter = GroundTruth::new();
        let mut records = Vec::new();
        for t in 0..5 {
            for (id, x) in [(1u64, 0.0), (2u64, 40.0)] {
                gt_jitter.insert(id, t, quad(x, 0.0, 9.0, 9.0), None).unwrap();
                records.push(record(t, id + 10, quad(x + 1.0, 0.0, 9.0, 9.0)));
            }
        }
        let cm = clear_mot(&gt_jitter, &result_from(records), 0.5).unwrap();
        assert_eq!(cm.mota, 1.0);
        assert!((cm.motp - 0.8).abs() <= 1e-6, "motp {}", cm.motp);

        // Half-split identity case.
        let mut gt_split = GroundTruth::new();
        for t in 0..10 {
            gt_split.insert(1, t, quad(0.0, 0.0, 10.0, 5.0), None).unwrap();
        }
        let split: Vec<io::InstanceRecord> = (0..10)
            .map(|t| record(t, if t < 5 { 7 } else { 8 }, quad(0.0, 0.0, 10.0, 5.0)))
            .collect();
        let (score, _, _, _) = idf1(&gt_split, &result_from(split), 0.5).unwrap();
        assert!((score - 0.5).abs() <= 1e-9, "idf1 {score}");
    });
}

#[test]
fn criterion_5_scm_ablation_direction() {
    criterion("criterion 5: complementer strictly improves mota/recall/ml", || {
        let table = cells(AblationMode::Scm);
        for seed in 1..=5u64 {
            let scenario = generate(&standard_spec(seed)).unwrap();
            let (_, off) = run_cell(&scenario, &table[0].config).unwrap();
            let started = Instant::now();
            let (_, on) = run_cell(&scenario, &table[1].config).unwrap();
            let elapsed = started.elapsed();
            assert!(
                on.mota > off.mota,
                "seed {seed}: mota {} !> {}",
                on.mota,
                off.mota
            );
            assert!(
                on.recall > off.recall,
                "seed {seed}: recall {} !> {}",
                on.recall,
                off.recall
            );
            assert!(on.ml < off.ml, "seed {seed}: ml {} !< {}", on.ml, off.ml);
            assert!(
                elapsed.as_secs_f64() < 60.0,
                "seed {seed}: complemented run took {elapsed:?}"
            );
        }
    });
}

#[test]
fn criterion_6_embedding_ablation_direction() {
    criterion("criterion 6: combined embedding reduces id switches", || {
        let table = cells(AblationMode::Embedding);
        let geometry = &table[0];
        let combined = table.last().unwrap();
        assert_eq!(combined.name, "ve+se");
        let mut aggregate_geometry = 0usize;
        let mut aggregate_combined = 0usize;
        for seed in 1..=5u64 {
            let spec = ScenarioSpec::crossing_twins(seed);
            assert!(spec.twin_pairs >= 3);
            let scenario = generate(&spec).unwrap();
            let (_, geo) = run_cell(&scenario, &geometry.config).unwrap();
            let (_, emb) = run_cell(&scenario, &combined.config).unwrap();
            assert!(
                emb.id_switches <= geo.id_switches,
                "seed {seed}: {} !<= {}",
                emb.id_switches,
                geo.id_switches
            );
            aggregate_geometry += geo.id_switches;
            aggregate_combined += emb.id_switches;
        }
        assert!(
            aggregate_combined < aggregate_geometry,
            "aggregate {aggregate_combined} !< {aggregate_geometry}"
        );
    });
}

#[test]
fn criterion_7_distance_ablation_monotonicity() {
    criterion("criterion 7: idf1 non-decreasing as dp, dm join de", || {
        let table = cells(AblationMode::Distances);
        let index_of = |name: &str| table.iter().position(|c| c.name == name).unwrap();
        let chain = [index_of("de"), index_of("de+dp"), index_of("de+dp+dm")];
        let mut aggregates = [0.0f64; 3];
        for seed in 1..=5u64 {
            let scenario = generate(&standard_spec(seed)).unwrap();
            for (k, &ci) in chain.iter().enumerate() {
                let (_, report) = run_cell(&scenario, &table[ci].config).unwrap();
                aggregates[k] += report.idf1;
            }
        }
        assert!(
            aggregates[0] <= aggregates[1] && aggregates[1] <= aggregates[2],
            "aggregate idf1 chain {aggregates:?} is not non-decreasing"
        );
    });
}

#[test]
fn criterion_8_determinism() {
    criterion("criterion 8: byte-identical reruns", || {
        // Library level: identical serialized results.
        let scenario = generate(&standard_spec(1)).unwrap();
        let cfg = textrack_core::ablation::scm_config();
        let a = run_frames(&scenario.detections, Some(&scenario.frames), &cfg, Some(1)).unwrap();
        let b = run_frames(&scenario.detections, Some(&scenario.frames), &cfg, Some(1)).unwrap();
        assert_eq!(io::write_result_string(&a), io::write_result_string(&b));

        // CLI level: `track` twice on identical inputs.
        let dir = tempfile::tempdir().unwrap();
        let spec = ScenarioSpec {
            width: 256,
            height: 192,
            frames: 30,
            tracks: 4,
            blackout_tracks: 1,
            blackout_len: 15,
            seed: 2,
            ..ScenarioSpec::default()
        };
        let scenario = generate(&spec).unwrap();
        let det_path = dir.path().join("detections.txt");
        io::save_detections(&det_path, &scenario.detections).unwrap();
        let frames_dir = dir.path().join("frames");
        std::fs::create_dir(&frames_dir).unwrap();
        for (k, frame) in scenario.frames.iter().enumerate() {
            io::write_frame(&frames_dir.join(io::frame_file_name(k as u64)), frame).unwrap();
        }
        std::fs::write(
            dir.path().join("config.txt"),
            "complement_enabled = true\nboost_unconditional = true\n",
        )
        .unwrap();
        for name in ["a.txt", "b.txt"] {
            let out = Command::new(env!("CARGO_BIN_EXE_textrack"))
                .current_dir(dir.path())
                .args([
                    "track",
                    "--detections",
                    "detections.txt",
                    "--frames",
                    "frames",
                    "--config",
                    "config.txt",
                    "--out",
                    name,
                    "--seed",
                    "2",
                ])
                .output()
                .unwrap();
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        }
        let a = std::fs::read(dir.path().join("a.txt")).unwrap();
        let b = std::fs::read(dir.path().join("b.txt")).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    });
}

#[test]
fn criterion_9_recovery_invariant() {
    criterion("criterion 9: deletion recovered in 50 of 50 static trials", || {
        for seed in 1..=50u64 {
            let spec = ScenarioSpec {
                width: 192,
                height: 144,
                frames: 2,
                tracks: 3,
                motion: MotionKind::Linear,
                speed: 0.0,
                dropout_p: 0.0,
                jitter_sigma: 0.0,
                distractor_rate: 0.0,
                twin_pairs: 0,
                blackout_tracks: 0,
                blackout_len: 0,
                seed,
            };
            let scenario = generate(&spec).unwrap();
            let gt_frames = scenario.gt.boxes_by_frame();
            let prev_instances: Vec<TextInstance> = gt_frames[&0]
                .iter()
                .map(|&(id, quad)| TextInstance {
                    quad: quad.clone(),
                    embedding: None,
                    confidence: 0.9,
                    trajectory_id: id,
                    frame: 0,
                })
                .collect();
            let deleted = (seed % 3) as usize;
            let mut raw = scenario.detections[1].clone();
            let removed = raw.remove(deleted);

            let map = synthesize_probability_map(&raw, spec.width, spec.height);
            let mask = build_complement_mask(
                &prev_instances,
                &scenario.frames[0],
                &scenario.frames[1],
                &ComplementConfig::default(),
            )
            .unwrap();
            let (fused, final_mask) =
                fuse_and_binarize_with_mode(&map, &mask, 0.6, 0.3, BoostMode::Unconditional)
                    .unwrap();
            let recovered = extract_boxes(&final_mask, &fused, 9).unwrap();
            let best = recovered
                .iter()
                .map(|det| iou(&det.quad, &removed.quad).unwrap())
                .fold(0.0f64, f64::max);
            assert!(best >= 0.7, "seed {seed}: best recovered IOU {best}");
            // Sanity: the recovered quad really is a rectangle-shaped box.
            let _ = quad_to_rotated_rect(&removed.quad).unwrap();
        }
    });
}
