// Hand-traced oracles for fixation pooling, region reading measures, and
// vertical drift correction on synthetic gaze data.

use rand::Rng;
use skipread::etk::*;

// Two displayed lines on a fixed-width font; regions in reading order are
//   0 "the"  1 "old"  2 "king"   (line 0)
//   3 "won"  4 "the"  5 "war."   (line 1)
fn layout() -> (Vec<Region>, LineGeometry) {
    let regions = text_regions(&["the old king", "won the war."], 100.0, 10.0);
    let lines = LineGeometry { centers: vec![100.0, 140.0], height: 20.0 };
    (regions, lines)
}

/// A fixation on the center of a region, or off the text entirely.
fn path(steps: &[(Option<usize>, f64)], regions: &[Region], lines: &LineGeometry) -> Vec<RawFixation> {
    steps
        .iter()
        .enumerate()
        .map(|(order, &(place, duration))| match place {
            Some(r) => RawFixation {
                trial: 0,
                x: 0.5 * (regions[r].x_start + regions[r].x_end),
                y: lines.centers[regions[r].line],
                duration,
                order,
            },
            None => RawFixation { trial: 0, x: 400.0, y: 120.0, duration, order },
        })
        .collect()
}

// ─── pooling ───────────────────────────────────────────────────────────────

fn fix(order: usize, x: f64, duration: f64) -> RawFixation {
    RawFixation { trial: 0, x, y: 100.0, duration, order }
}

#[test]
fn a_short_fixation_merges_into_its_long_neighbor() {
    let pooled = pool_fixations(&[fix(0, 200.0, 70.0), fix(1, 205.0, 200.0)], 10.0);
    assert_eq!(pooled.len(), 1);
    assert_eq!(pooled[0].duration, 270.0);
    assert_eq!(pooled[0].x, 205.0); // the longer fixation's position survives
    assert_eq!(pooled[0].order, 1);
}

#[test]
fn an_isolated_very_short_fixation_is_deleted() {
    let pooled = pool_fixations(&[fix(0, 200.0, 35.0), fix(1, 400.0, 150.0)], 10.0);
    assert_eq!(pooled.len(), 1);
    assert_eq!(pooled[0].duration, 150.0);
}

#[test]
fn an_ordinary_fixation_passes_through_unchanged() {
    let input = [fix(0, 200.0, 100.0)];
    assert_eq!(pool_fixations(&input, 10.0), input.to_vec());
}

#[test]
fn a_short_survivor_between_forty_and_eighty_is_kept() {
    // nothing within reach: too far to merge, long enough to keep
    let pooled = pool_fixations(&[fix(0, 200.0, 55.0), fix(1, 400.0, 150.0)], 10.0);
    assert_eq!(pooled.len(), 2);
    assert_eq!(pooled[0].duration, 55.0);
}

#[test]
fn merging_cascades_until_a_fixed_point() {
    // 30 folds into the 70 beside it; the merged 100 then stands
    let pooled = pool_fixations(&[fix(0, 200.0, 30.0), fix(1, 206.0, 70.0)], 10.0);
    assert_eq!(pooled.len(), 1);
    assert_eq!(pooled[0].duration, 100.0);
    assert_eq!(pooled[0].x, 206.0);
}

#[test]
fn the_longer_neighbor_wins_and_equal_durations_prefer_the_earlier() {
    let pooled = pool_fixations(
        &[fix(0, 195.0, 150.0), fix(1, 200.0, 50.0), fix(2, 205.0, 300.0)],
        10.0,
    );
    assert_eq!(pooled.len(), 2);
    assert_eq!(pooled[1].duration, 350.0); // went to the longer, later neighbor
    let pooled = pool_fixations(
        &[fix(0, 195.0, 200.0), fix(1, 200.0, 50.0), fix(2, 205.0, 200.0)],
        10.0,
    );
    assert_eq!(pooled.len(), 2);
    assert_eq!(pooled[0].duration, 250.0); // tie broken toward the earlier
    assert_eq!(pooled[1].duration, 200.0);
}

#[test]
fn pooling_never_increases_count_and_conserves_kept_duration() {
    let mut rng = skipread::rng::root(31);
    for _ in 0..50 {
        let n = rng.gen_range(1..30);
        let input: Vec<RawFixation> = (0..n)
            .map(|order| fix(order, rng.gen_range(100.0..700.0), rng.gen_range(40..400) as f64))
            .collect();
        let total_in: f64 = input.iter().map(|f| f.duration).sum();
        let pooled = pool_fixations(&input, 12.0);
        assert!(pooled.len() <= input.len());
        // durations ≥ 40 everywhere: nothing can be deleted, only merged
        let total_out: f64 = pooled.iter().map(|f| f.duration).sum();
        assert_eq!(total_in, total_out);
        for pair in pooled.windows(2) {
            assert!(pair[0].order < pair[1].order);
        }
    }
}

#[test]
fn deletion_removes_exactly_the_stranded_short_durations() {
    // the 35 ms fixation is beyond reach of anything: deleted, and the
    // remaining total drops by exactly that amount
    let input = [fix(0, 100.0, 35.0), fix(1, 300.0, 90.0), fix(2, 306.0, 60.0)];
    let pooled = pool_fixations(&input, 10.0);
    let total_out: f64 = pooled.iter().map(|f| f.duration).sum();
    assert_eq!(total_out, 150.0);
    assert_eq!(pooled.len(), 1);
}

// ─── reading measures: ten hand-traced scanpaths ───────────────────────────

struct Fixture {
    name: &'static str,
    steps: &'static [(Option<usize>, f64)],
    /// (region, first_fixation, first_pass, total_time, fixated_first_pass)
    expect: &'static [(usize, Option<f64>, Option<f64>, Option<f64>, bool)],
    off_text: usize,
}

const FIXTURES: &[Fixture] = &[
    Fixture {
        name: "return to the first word",
        steps: &[(Some(0), 200.0), (Some(1), 150.0), (Some(0), 100.0)],
        expect: &[
            (0, Some(200.0), Some(200.0), Some(300.0), true),
            (1, Some(150.0), Some(150.0), Some(150.0), true),
        ],
        off_text: 0,
    },
    Fixture {
        name: "a word first reached after material beyond it",
        steps: &[(Some(0), 100.0), (Some(2), 120.0), (Some(1), 90.0)],
        expect: &[
            (0, Some(100.0), Some(100.0), Some(100.0), true),
            (1, None, None, Some(90.0), false),
            (2, Some(120.0), Some(120.0), Some(120.0), true),
        ],
        off_text: 0,
    },
    Fixture {
        name: "refixations extend the first pass",
        steps: &[
            (Some(1), 80.0),
            (Some(1), 70.0),
            (Some(1), 60.0),
            (Some(2), 100.0),
            (Some(1), 50.0),
        ],
        expect: &[
            (1, Some(80.0), Some(210.0), Some(260.0), true),
            (2, Some(100.0), Some(100.0), Some(100.0), true),
        ],
        off_text: 0,
    },
    Fixture {
        name: "a whole line skipped on the way down",
        steps: &[(Some(3), 180.0), (Some(0), 90.0)],
        expect: &[
            (0, None, None, Some(90.0), false),
            (3, Some(180.0), Some(180.0), Some(180.0), true),
        ],
        off_text: 0,
    },
    Fixture {
        name: "a regression revisits an earlier word",
        steps: &[(Some(2), 140.0), (Some(1), 110.0), (Some(2), 130.0)],
        expect: &[
            (1, None, None, Some(110.0), false),
            (2, Some(140.0), Some(140.0), Some(270.0), true),
        ],
        off_text: 0,
    },
    Fixture {
        name: "the same pattern on the second line",
        steps: &[(Some(4), 200.0), (Some(5), 150.0), (Some(4), 100.0)],
        expect: &[
            (4, Some(200.0), Some(200.0), Some(300.0), true),
            (5, Some(150.0), Some(150.0), Some(150.0), true),
        ],
        off_text: 0,
    },
    Fixture {
        name: "a clean sequential read",
        steps: &[
            (Some(0), 250.0),
            (Some(1), 200.0),
            (Some(2), 180.0),
            (Some(3), 220.0),
            (Some(4), 160.0),
            (Some(5), 240.0),
        ],
        expect: &[
            (0, Some(250.0), Some(250.0), Some(250.0), true),
            (1, Some(200.0), Some(200.0), Some(200.0), true),
            (2, Some(180.0), Some(180.0), Some(180.0), true),
            (3, Some(220.0), Some(220.0), Some(220.0), true),
            (4, Some(160.0), Some(160.0), Some(160.0), true),
            (5, Some(240.0), Some(240.0), Some(240.0), true),
        ],
        off_text: 0,
    },
    Fixture {
        name: "a double fixation then a late return",
        steps: &[(Some(0), 120.0), (Some(0), 80.0), (Some(1), 140.0), (Some(0), 60.0)],
        expect: &[
            (0, Some(120.0), Some(200.0), Some(260.0), true),
            (1, Some(140.0), Some(140.0), Some(140.0), true),
        ],
        off_text: 0,
    },
    Fixture {
        name: "an off-text fixation blocks nothing",
        steps: &[(Some(0), 100.0), (None, 50.0), (Some(1), 130.0)],
        expect: &[
            (0, Some(100.0), Some(100.0), Some(100.0), true),
            (1, Some(130.0), Some(130.0), Some(130.0), true),
        ],
        off_text: 1,
    },
    Fixture {
        name: "a late word seen early blocks an earlier word",
        steps: &[(Some(1), 100.0), (Some(5), 80.0), (Some(2), 70.0)],
        expect: &[
            (1, Some(100.0), Some(100.0), Some(100.0), true),
            (2, None, None, Some(70.0), false),
            (5, Some(80.0), Some(80.0), Some(80.0), true),
        ],
        off_text: 0,
    },
];

#[test]
fn ten_scanpaths_match_their_hand_traced_measures() {
    let (regions, lines) = layout();
    for f in FIXTURES {
        let scan = path(f.steps, &regions, &lines);
        let out = compute_measures(&scan, &regions, &lines).unwrap();
        assert_eq!(out.off_text, f.off_text, "{}", f.name);
        let mut expected = vec![RegionMeasures::default(); regions.len()];
        for &(r, ff, fp, tt, flag) in f.expect {
            expected[r] = RegionMeasures {
                first_fixation: ff,
                first_pass: fp,
                total_time: tt,
                fixated_first_pass: flag,
            };
        }
        assert_eq!(out.measures, expected, "{}", f.name);
    }
}

#[test]
fn total_time_dominates_first_pass_dominates_first_fixation() {
    let (regions, lines) = layout();
    let mut rng = skipread::rng::root(37);
    for _ in 0..60 {
        let n = rng.gen_range(1..25);
        let steps: Vec<(Option<usize>, f64)> = (0..n)
            .map(|_| {
                let place = if rng.gen::<f64>() < 0.1 {
                    None
                } else {
                    Some(rng.gen_range(0..regions.len()))
                };
                (place, rng.gen_range(40..300) as f64)
            })
            .collect();
        let scan = path(&steps, &regions, &lines);
        let out = compute_measures(&scan, &regions, &lines).unwrap();
        for m in &out.measures {
            if let (Some(ff), Some(fp)) = (m.first_fixation, m.first_pass) {
                let tt = m.total_time.unwrap();
                assert!(tt >= fp && fp >= ff);
                assert!(m.fixated_first_pass);
            }
            assert_eq!(m.fixated_first_pass, m.first_fixation.is_some());
        }
    }
}

#[test]
fn a_never_fixated_region_has_no_measures() {
    let (regions, lines) = layout();
    let scan = path(&[(Some(0), 200.0)], &regions, &lines);
    let out = compute_measures(&scan, &regions, &lines).unwrap();
    let m = &out.measures[4];
    assert_eq!(m.first_fixation, None);
    assert_eq!(m.first_pass, None);
    assert_eq!(m.total_time, None);
    assert!(!m.fixated_first_pass);
}

// ─── regions and geometry ──────────────────────────────────────────────────

#[test]
fn text_regions_attach_punctuation_to_the_adjacent_word() {
    let regions = text_regions(&["win, fast"], 0.0, 10.0);
    assert_eq!(regions.len(), 2);
    assert_eq!(regions[0].word, "win,");
    assert_eq!(regions[0].x_start, 0.0);
    assert_eq!(regions[0].x_end, 40.0);
    assert_eq!(regions[1].word, "fast");
    assert_eq!(regions[1].x_start, 50.0);
}

#[test]
fn region_spans_are_half_open_and_line_bands_are_centered() {
    let (regions, lines) = layout();
    validate_regions(&regions).unwrap();
    assert_eq!(assign_region(100.0, 100.0, &regions, &lines), Some(0));
    assert_eq!(assign_region(129.9, 100.0, &regions, &lines), Some(0));
    assert_eq!(assign_region(130.0, 100.0, &regions, &lines), None); // gap
    assert_eq!(assign_region(100.0, 140.0, &regions, &lines), Some(3));
    assert_eq!(assign_region(100.0, 120.0, &regions, &lines), None); // between lines
    assert_eq!(lines.assign(109.9), Some(0));
    assert_eq!(lines.assign(111.0), None);
}

#[test]
fn out_of_order_or_overlapping_regions_are_rejected() {
    let mut regions = text_regions(&["a b"], 0.0, 10.0);
    regions.swap(0, 1);
    assert!(validate_regions(&regions).is_err());
    let overlapping = vec![
        Region { word: "x".into(), line: 0, x_start: 0.0, x_end: 20.0 },
        Region { word: "y".into(), line: 0, x_start: 10.0, x_end: 30.0 },
    ];
    assert!(validate_regions(&overlapping).is_err());
}

// ─── drift correction ──────────────────────────────────────────────────────

fn drift_setup() -> (CalibrationGrid, LineGeometry, DriftCoefficients) {
    let grid = CalibrationGrid { xs: [100.0, 400.0, 700.0], ys: [80.0, 140.0, 200.0] };
    let lines = LineGeometry { centers: vec![100.0, 140.0, 180.0], height: 20.0 };
    let coeffs = DriftCoefficients {
        calibration: 0.01,
        off_line: 1.0,
        line_change: 0.2,
        within_line: 0.05,
        outside: 0.5,
    };
    (grid, lines, coeffs)
}

/// Reading-like clean fixations: each line visited in order, with jitter.
fn clean_fixations(rng: &mut impl Rng, lines: &LineGeometry) -> (Vec<RawFixation>, Vec<usize>) {
    let mut fixations = Vec::new();
    let mut true_lines = Vec::new();
    let mut order = 0;
    for (li, &center) in lines.centers.iter().enumerate() {
        let mut x = 110.0;
        while x < 690.0 {
            fixations.push(RawFixation {
                trial: 0,
                x,
                y: center + rng.gen_range(-3.0..3.0),
                duration: rng.gen_range(120..280) as f64,
                order,
            });
            true_lines.push(li);
            order += 1;
            x += rng.gen_range(25.0..60.0);
        }
    }
    (fixations, true_lines)
}

#[test]
fn fixations_exactly_on_line_centers_stay_put() {
    let (grid, lines, coeffs) = drift_setup();
    let fixations: Vec<RawFixation> = (0..30)
        .map(|i| RawFixation {
            trial: 0,
            x: 110.0 + 20.0 * (i % 10) as f64,
            y: lines.centers[i / 10],
            duration: 200.0,
            order: i,
        })
        .collect();
    let out = drift_correct(&fixations, &grid, &lines, &coeffs).unwrap();
    // zero offsets already minimize: any shift pays the calibration and
    // center-distance terms for nothing
    assert_eq!(out.offsets, [0.0; 9]);
    assert_eq!(out.rounds, 1);
    assert!(out.converged);
    for (a, b) in out.fixations.iter().zip(&fixations) {
        assert_eq!(a.y.to_bits(), b.y.to_bits());
    }
}

#[test]
fn jittered_clean_data_keeps_its_line_assignments() {
    let (grid, lines, coeffs) = drift_setup();
    let mut rng = skipread::rng::root(41);
    let (fixations, true_lines) = clean_fixations(&mut rng, &lines);
    let out = drift_correct(&fixations, &grid, &lines, &coeffs).unwrap();
    // offsets may soak up sample jitter, but stay well under a line spacing
    for o in out.offsets {
        assert!(o.abs() < lines.height / 4.0, "offset {o}");
    }
    for (f, &t) in out.fixations.iter().zip(&true_lines) {
        assert_eq!(lines.assign(f.y), Some(t));
    }
}

#[test]
fn constant_vertical_drift_is_recovered() {
    let (grid, lines, coeffs) = drift_setup();
    let mut rng = skipread::rng::root(43);
    let (mut fixations, true_lines) = clean_fixations(&mut rng, &lines);
    for f in &mut fixations {
        f.y += 15.0;
    }
    let out = drift_correct(&fixations, &grid, &lines, &coeffs).unwrap();
    let correct = out
        .fixations
        .iter()
        .zip(&true_lines)
        .filter(|(f, &t)| lines.assign(f.y) == Some(t))
        .count();
    let accuracy = correct as f64 / true_lines.len() as f64;
    assert!(accuracy >= 0.95, "line assignment accuracy {accuracy}");
}

#[test]
fn a_linear_vertical_tilt_is_recovered() {
    let (grid, lines, coeffs) = drift_setup();
    let mut rng = skipread::rng::root(47);
    let (mut fixations, true_lines) = clean_fixations(&mut rng, &lines);
    for f in &mut fixations {
        f.y += 20.0 * (f.x - 100.0) / 600.0;
    }
    let out = drift_correct(&fixations, &grid, &lines, &coeffs).unwrap();
    let correct = out
        .fixations
        .iter()
        .zip(&true_lines)
        .filter(|(f, &t)| lines.assign(f.y) == Some(t))
        .count();
    let accuracy = correct as f64 / true_lines.len() as f64;
    assert!(accuracy >= 0.90, "line assignment accuracy {accuracy}");
}

#[test]
fn correction_touches_only_vertical_positions_and_never_worsens() {
    let (grid, lines, coeffs) = drift_setup();
    let mut rng = skipread::rng::root(53);
    let (mut fixations, _) = clean_fixations(&mut rng, &lines);
    for f in &mut fixations {
        f.y += rng.gen_range(-25.0..25.0);
    }
    let out = drift_correct(&fixations, &grid, &lines, &coeffs).unwrap();
    for (a, b) in out.fixations.iter().zip(&fixations) {
        assert_eq!(a.x.to_bits(), b.x.to_bits());
        assert_eq!(a.duration, b.duration);
        assert_eq!(a.order, b.order);
    }
    let zero = drift_correct(&fixations, &grid, &lines, &coeffs).unwrap().objective;
    assert!(out.objective <= zero + 1e-12);
}

#[test]
fn drift_inputs_are_validated() {
    let (grid, lines, mut coeffs) = drift_setup();
    coeffs.off_line = -1.0;
    assert!(drift_correct(&[], &grid, &lines, &coeffs).is_err());
    let (_, lines2, coeffs2) = drift_setup();
    let bad_grid = CalibrationGrid { xs: [100.0, 100.0, 700.0], ys: [80.0, 140.0, 200.0] };
    assert!(drift_correct(&[], &bad_grid, &lines2, &coeffs2).is_err());
}

#[test]
fn interpolation_is_linear_across_the_grid() {
    let grid = CalibrationGrid { xs: [0.0, 50.0, 100.0], ys: [0.0, 50.0, 100.0] };
    let mut offsets = [0.0; 9];
    // left column 0, right column 10, linear in x on every row
    for row in 0..3 {
        offsets[row * 3 + 1] = 5.0;
        offsets[row * 3 + 2] = 10.0;
    }
    assert_eq!(grid.interpolate(&offsets, 0.0, 50.0), 0.0);
    assert_eq!(grid.interpolate(&offsets, 25.0, 50.0), 2.5);
    assert_eq!(grid.interpolate(&offsets, 75.0, 10.0), 7.5);
    assert_eq!(grid.interpolate(&offsets, 100.0, 90.0), 10.0);
    // clamped outside
    assert_eq!(grid.interpolate(&offsets, 160.0, 50.0), 10.0);
    assert_eq!(grid.interpolate(&offsets, -10.0, 50.0), 0.0);
}

// ─── file round trips ──────────────────────────────────────────────────────

#[test]
fn fixation_files_round_trip_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("fixations.csv");
    let fixations = vec![
        RawFixation { trial: 0, x: 120.5, y: 99.25, duration: 210.0, order: 0 },
        RawFixation { trial: 0, x: 180.0, y: 101.0, duration: 140.0, order: 1 },
        RawFixation { trial: 2, x: 150.0, y: 140.0, duration: 95.5, order: 0 },
    ];
    save_fixations(&file, &fixations).unwrap();
    let back = load_fixations(&file).unwrap();
    assert_eq!(back, fixations);

    let trials = by_trial(&back);
    assert_eq!(trials.len(), 2);
    assert_eq!(trials[&0].len(), 2);

    std::fs::write(
        &file,
        "trial,x,y,duration,order\n0,1,2,100,5\n0,1,2,100,5\n",
    )
    .unwrap();
    assert!(load_fixations(&file).is_err()); // order must strictly increase
    std::fs::write(&file, "trial,x,y,duration,order\n0,1,2,0,0\n").unwrap();
    assert!(load_fixations(&file).is_err()); // nonpositive duration
}

#[test]
fn region_and_measure_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (regions, lines) = layout();
    let rfile = dir.path().join("regions.csv");
    save_regions(&rfile, &regions).unwrap();
    assert_eq!(load_regions(&rfile).unwrap(), regions);

    let scan = path(&[(Some(0), 200.0), (Some(1), 150.0)], &regions, &lines);
    let out = compute_measures(&scan, &regions, &lines).unwrap();
    let mfile = dir.path().join("measures.csv");
    save_measures(&mfile, &regions, &out.measures).unwrap();
    let text = std::fs::read_to_string(&mfile).unwrap();
    let mut lines_iter = text.lines();
    assert_eq!(
        lines_iter.next().unwrap(),
        "word,line,fixated_first_pass,first_fixation,first_pass,total_time"
    );
    assert_eq!(lines_iter.next().unwrap(), "the,0,1,200,200,200");
    assert_eq!(lines_iter.next().unwrap(), "old,0,1,150,150,150");
    assert_eq!(lines_iter.next().unwrap(), "king,0,0,,,");
}
