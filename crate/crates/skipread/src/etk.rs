//! Eye-tracking preprocessing: pooling of short fixations, word-region
//! reading measures (first fixation, first pass, total time, first-pass
//! fixation flag), and five-term vertical drift correction driven by the
//! nine calibration points. Input and output are plain CSV so the toolkit
//! composes with the analysis-table export.

use std::collections::BTreeMap;
use std::path::Path;

use crate::{Error, Result};

// ─── Fixations ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct RawFixation {
    pub trial: usize,
    pub x: f64,
    pub y: f64,
    /// milliseconds
    pub duration: f64,
    /// temporal index within the trial, strictly increasing
    pub order: usize,
}

/// CSV with header `trial,x,y,duration,order`.
pub fn load_fixations(path: &Path) -> Result<Vec<RawFixation>> {
    let mut out = Vec::new();
    let mut reader = csv::Reader::from_path(path)?;
    for (index, row) in reader.records().enumerate() {
        let row = row?;
        let bad = |reason: String| Error::MalformedRecord { index, reason };
        if row.len() != 5 {
            return Err(bad(format!("expected 5 fields, got {}", row.len())));
        }
        let field = |k: usize| row.get(k).unwrap_or("").trim();
        let num = |k: usize, name: &str| -> Result<f64> {
            let v: f64 = field(k).parse().map_err(|e| bad(format!("{name}: {e}")))?;
            if !v.is_finite() {
                return Err(bad(format!("{name} must be finite")));
            }
            Ok(v)
        };
        let fix = RawFixation {
            trial: field(0).parse().map_err(|e| bad(format!("trial: {e}")))?,
            x: num(1, "x")?,
            y: num(2, "y")?,
            duration: num(3, "duration")?,
            order: field(4).parse().map_err(|e| bad(format!("order: {e}")))?,
        };
        if fix.duration <= 0.0 {
            return Err(bad(format!("duration {} must be positive", fix.duration)));
        }
        out.push(fix);
    }
    // orders must be strictly increasing within each trial
    let mut last: BTreeMap<usize, usize> = BTreeMap::new();
    for (index, f) in out.iter().enumerate() {
        if let Some(&prev) = last.get(&f.trial) {
            if f.order <= prev {
                return Err(Error::MalformedRecord {
                    index,
                    reason: format!(
                        "trial {}: order {} does not increase past {}",
                        f.trial, f.order, prev
                    ),
                });
            }
        }
        last.insert(f.trial, f.order);
    }
    Ok(out)
}

pub fn save_fixations(path: &Path, fixations: &[RawFixation]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["trial", "x", "y", "duration", "order"])?;
    for f in fixations {
        w.write_record([
            f.trial.to_string(),
            f.x.to_string(),
            f.y.to_string(),
            f.duration.to_string(),
            f.order.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Splits a flat stream into per-trial streams, each ordered by `order`.
pub fn by_trial(fixations: &[RawFixation]) -> BTreeMap<usize, Vec<RawFixation>> {
    let mut out: BTreeMap<usize, Vec<RawFixation>> = BTreeMap::new();
    for f in fixations {
        out.entry(f.trial).or_default().push(f.clone());
    }
    for trial in out.values_mut() {
        trial.sort_by_key(|f| f.order);
    }
    out
}

// ─── Pooling ───────────────────────────────────────────────────────────────

/// Short fixations reflect mid-saccade noise rather than reading: fixations
/// under 80 ms are folded into a longer temporal neighbor within one
/// character's width (durations summed, the longer fixation's position
/// kept), and whatever remains under 40 ms is deleted.
///
/// Merging is deterministic: candidates are processed shortest first (order
/// breaks ties); of the two temporal neighbors, a fixation merges into the
/// one with the longer duration — at least its own — preferring the earlier
/// neighbor when both have the same duration. Merges repeat to a fixed
/// point, so a grown fixation can absorb further neighbors.
pub fn pool_fixations(fixations: &[RawFixation], char_width: f64) -> Vec<RawFixation> {
    let mut live: Vec<Option<RawFixation>> = {
        let mut v = fixations.to_vec();
        v.sort_by_key(|f| f.order);
        v.into_iter().map(Some).collect()
    };

    loop {
        let mut shorts: Vec<usize> = live
            .iter()
            .enumerate()
            .filter(|(_, f)| f.as_ref().map_or(false, |f| f.duration < 80.0))
            .map(|(i, _)| i)
            .collect();
        shorts.sort_by(|&a, &b| {
            let (fa, fb) = (live[a].as_ref().unwrap(), live[b].as_ref().unwrap());
            fa.duration.total_cmp(&fb.duration).then(fa.order.cmp(&fb.order))
        });

        let mut merged_any = false;
        for i in shorts {
            let Some(short) = live[i].clone() else { continue };
            if short.duration >= 80.0 {
                continue; // grew since the candidate list was drawn
            }
            let neighbor = |mut j: isize, step: isize| -> Option<usize> {
                loop {
                    j += step;
                    if j < 0 || j as usize >= live.len() {
                        return None;
                    }
                    if live[j as usize].is_some() {
                        return Some(j as usize);
                    }
                }
            };
            let reachable = |j: Option<usize>| {
                j.filter(|&j| {
                    let f = live[j].as_ref().unwrap();
                    (f.x - short.x).abs() <= char_width && f.duration >= short.duration
                })
            };
            let prev = reachable(neighbor(i as isize, -1));
            let next = reachable(neighbor(i as isize, 1));
            let target = match (prev, next) {
                (Some(p), Some(n)) => {
                    let (dp, dn) = (
                        live[p].as_ref().unwrap().duration,
                        live[n].as_ref().unwrap().duration,
                    );
                    // longer neighbor wins; the earlier one on equal durations
                    Some(if dn > dp { n } else { p })
                }
                (Some(p), None) => Some(p),
                (None, Some(n)) => Some(n),
                (None, None) => None,
            };
            if let Some(t) = target {
                live[t].as_mut().unwrap().duration += short.duration;
                live[i] = None;
                merged_any = true;
            }
        }
        if !merged_any {
            break;
        }
    }

    live.into_iter().flatten().filter(|f| f.duration >= 40.0).collect()
}

// ─── Regions and lines ─────────────────────────────────────────────────────

/// One word of the displayed text. Punctuation belongs to the region of the
/// word it follows or precedes without intervening whitespace, which is
/// exactly what whitespace segmentation of the displayed line produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub word: String,
    pub line: usize,
    pub x_start: f64,
    pub x_end: f64,
}

/// Vertical layout: line centers in reading order plus the band height a
/// fixation may deviate from a center and still count as on that line.
#[derive(Debug, Clone)]
pub struct LineGeometry {
    pub centers: Vec<f64>,
    pub height: f64,
}

impl LineGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() || self.height <= 0.0 {
            return Err(Error::Config {
                field: "lines".into(),
                reason: "need at least one line and a positive height".into(),
            });
        }
        if self.centers.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config {
                field: "lines".into(),
                reason: "line centers must increase down the page".into(),
            });
        }
        Ok(())
    }

    /// Index of the line whose band contains `y`.
    pub fn assign(&self, y: f64) -> Option<usize> {
        self.centers
            .iter()
            .position(|&c| (y - c).abs() <= self.height / 2.0)
    }
}

/// Builds word regions from displayed lines of text on a fixed-width font:
/// each whitespace-delimited chunk spans its character cells.
pub fn text_regions(lines: &[&str], x0: f64, char_width: f64) -> Vec<Region> {
    let mut out = Vec::new();
    for (line_idx, line) in lines.iter().enumerate() {
        let mut col = 0usize;
        for chunk in line.split(' ') {
            let len = chunk.chars().count();
            if len > 0 {
                out.push(Region {
                    word: chunk.to_string(),
                    line: line_idx,
                    x_start: x0 + col as f64 * char_width,
                    x_end: x0 + (col + len) as f64 * char_width,
                });
            }
            col += len + 1;
        }
    }
    out
}

/// Regions must arrive in reading order, disjoint within each line.
pub fn validate_regions(regions: &[Region]) -> Result<()> {
    for (index, pair) in regions.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let ordered = b.line > a.line || (b.line == a.line && b.x_start >= a.x_end);
        if !ordered {
            return Err(Error::MalformedRecord {
                index: index + 1,
                reason: format!(
                    "region `{}` does not follow `{}` in reading order",
                    b.word, a.word
                ),
            });
        }
    }
    for (index, r) in regions.iter().enumerate() {
        if r.x_end <= r.x_start {
            return Err(Error::MalformedRecord {
                index,
                reason: format!("region `{}` has an empty span", r.word),
            });
        }
    }
    Ok(())
}

/// CSV with header `word,line,x_start,x_end`, rows in reading order.
pub fn load_regions(path: &Path) -> Result<Vec<Region>> {
    let mut out = Vec::new();
    let mut reader = csv::Reader::from_path(path)?;
    for (index, row) in reader.records().enumerate() {
        let row = row?;
        let bad = |reason: String| Error::MalformedRecord { index, reason };
        if row.len() != 4 {
            return Err(bad(format!("expected 4 fields, got {}", row.len())));
        }
        let field = |k: usize| row.get(k).unwrap_or("").trim();
        out.push(Region {
            word: field(0).to_string(),
            line: field(1).parse().map_err(|e| bad(format!("line: {e}")))?,
            x_start: field(2).parse().map_err(|e| bad(format!("x_start: {e}")))?,
            x_end: field(3).parse().map_err(|e| bad(format!("x_end: {e}")))?,
        });
    }
    validate_regions(&out)?;
    Ok(out)
}

pub fn save_regions(path: &Path, regions: &[Region]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["word", "line", "x_start", "x_end"])?;
    for r in regions {
        w.write_record([
            r.word.clone(),
            r.line.to_string(),
            r.x_start.to_string(),
            r.x_end.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Region index for a fixation, by line band then horizontal span.
pub fn assign_region(
    x: f64,
    y: f64,
    regions: &[Region],
    lines: &LineGeometry,
) -> Option<usize> {
    let line = lines.assign(y)?;
    regions
        .iter()
        .position(|r| r.line == line && x >= r.x_start && x < r.x_end)
}

// ─── Reading measures ──────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionMeasures {
    /// duration of the first fixation in the region, defined only when no
    /// earlier fixation landed on material beyond the region
    pub first_fixation: Option<f64>,
    /// fixation durations from that first fixation until the first saccade
    /// out of the region in either direction
    pub first_pass: Option<f64>,
    /// all fixation durations in the region; undefined when never fixated
    pub total_time: Option<f64>,
    /// fixated (rather than skipped) on first-pass reading
    pub fixated_first_pass: bool,
}

#[derive(Debug, Clone)]
pub struct MeasureOutcome {
    /// aligned with the region slice
    pub measures: Vec<RegionMeasures>,
    /// fixations that matched no region; reported, never fatal
    pub off_text: usize,
}

/// Walks one trial's pooled scanpath and fills the per-region reading
/// measures. "Beyond" a region means any region later in reading order;
/// off-text fixations belong to no region and block nothing.
pub fn compute_measures(
    fixations: &[RawFixation],
    regions: &[Region],
    lines: &LineGeometry,
) -> Result<MeasureOutcome> {
    validate_regions(regions)?;
    lines.validate()?;
    let mut path: Vec<&RawFixation> = fixations.iter().collect();
    path.sort_by_key(|f| f.order);

    let assigned: Vec<Option<usize>> = path
        .iter()
        .map(|f| assign_region(f.x, f.y, regions, lines))
        .collect();
    let off_text = assigned.iter().filter(|a| a.is_none()).count();

    let mut measures = vec![RegionMeasures::default(); regions.len()];
    for r in 0..regions.len() {
        let mut total = 0.0;
        let mut first_at: Option<usize> = None;
        let mut blocked = false;
        for (t, assign) in assigned.iter().enumerate() {
            match assign {
                Some(region) if *region == r => {
                    total += path[t].duration;
                    if first_at.is_none() && !blocked {
                        first_at = Some(t);
                    }
                }
                Some(region) if *region > r && first_at.is_none() => blocked = true,
                _ => {}
            }
        }
        let m = &mut measures[r];
        m.total_time = (total > 0.0).then_some(total);
        if let Some(start) = first_at {
            m.fixated_first_pass = true;
            m.first_fixation = Some(path[start].duration);
            let mut pass = 0.0;
            for t in start..path.len() {
                if assigned[t] == Some(r) {
                    pass += path[t].duration;
                } else {
                    break; // first saccade out of the region, either direction
                }
            }
            m.first_pass = Some(pass);
        }
    }
    Ok(MeasureOutcome { measures, off_text })
}

/// CSV with header
/// `word,line,fixated_first_pass,first_fixation,first_pass,total_time`;
/// undefined measures are empty cells.
pub fn save_measures(
    path: &Path,
    regions: &[Region],
    measures: &[RegionMeasures],
) -> Result<()> {
    if regions.len() != measures.len() {
        return Err(Error::Shape(format!(
            "{} regions vs {} measure rows",
            regions.len(),
            measures.len()
        )));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "word",
        "line",
        "fixated_first_pass",
        "first_fixation",
        "first_pass",
        "total_time",
    ])?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (r, m) in regions.iter().zip(measures) {
        w.write_record([
            r.word.clone(),
            r.line.to_string(),
            (m.fixated_first_pass as u8).to_string(),
            cell(m.first_fixation),
            cell(m.first_pass),
            cell(m.total_time),
        ])?;
    }
    w.flush()?;
    Ok(())
}

// ─── Drift correction ──────────────────────────────────────────────────────

/// The nine calibration points: three column positions by three row
/// positions, both increasing.
#[derive(Debug, Clone)]
pub struct CalibrationGrid {
    pub xs: [f64; 3],
    pub ys: [f64; 3],
}

impl CalibrationGrid {
    pub fn validate(&self) -> Result<()> {
        let increasing = |v: &[f64; 3]| v[0] < v[1] && v[1] < v[2];
        if !increasing(&self.xs) || !increasing(&self.ys) {
            return Err(Error::Config {
                field: "calibration".into(),
                reason: "grid coordinates must increase".into(),
            });
        }
        Ok(())
    }

    /// Bilinear interpolation of the nine row-major offsets at (x, y);
    /// points outside the grid clamp to its edge.
    pub fn interpolate(&self, offsets: &[f64; 9], x: f64, y: f64) -> f64 {
        let locate = |v: f64, axis: &[f64; 3]| -> (usize, f64) {
            let v = v.clamp(axis[0], axis[2]);
            let cell = if v <= axis[1] { 0 } else { 1 };
            let span = axis[cell + 1] - axis[cell];
            (cell, (v - axis[cell]) / span)
        };
        let (cx, tx) = locate(x, &self.xs);
        let (cy, ty) = locate(y, &self.ys);
        let at = |row: usize, col: usize| offsets[row * 3 + col];
        let top = at(cy, cx) * (1.0 - tx) + at(cy, cx + 1) * tx;
        let bottom = at(cy + 1, cx) * (1.0 - tx) + at(cy + 1, cx + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

/// Weights of the five squared objective terms.
#[derive(Debug, Clone)]
pub struct DriftCoefficients {
    /// displacement of each calibration point from its recorded position
    pub calibration: f64,
    /// count of fixations on no line
    pub off_line: f64,
    /// count of successive fixations assigned to different lines
    pub line_change: f64,
    /// within-line vertical distance to the line center
    pub within_line: f64,
    /// distance above the first or below the last line
    pub outside: f64,
}

impl DriftCoefficients {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("calibration", self.calibration),
            ("off_line", self.off_line),
            ("line_change", self.line_change),
            ("within_line", self.within_line),
            ("outside", self.outside),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config {
                    field: name.into(),
                    reason: format!("coefficient {v} must be nonnegative"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DriftOutcome {
    /// y-corrected fixations; x coordinates are untouched
    pub fixations: Vec<RawFixation>,
    /// row-major vertical offsets of the nine calibration points
    pub offsets: [f64; 9],
    pub objective: f64,
    /// false when the round cap stopped the descent while still improving
    pub converged: bool,
    pub rounds: usize,
}

fn drift_objective(
    fixations: &[RawFixation],
    grid: &CalibrationGrid,
    lines: &LineGeometry,
    c: &DriftCoefficients,
    offsets: &[f64; 9],
) -> f64 {
    let calibration: f64 = offsets.iter().map(|o| o * o).sum();

    let mut off_line = 0usize;
    let mut changes = 0usize;
    let mut within = 0.0;
    let mut outside = 0.0;
    let mut prev_line: Option<usize> = None;
    let first = lines.centers[0];
    let last = *lines.centers.last().unwrap();
    for f in fixations {
        let y = f.y + grid.interpolate(offsets, f.x, f.y);
        let line = lines.assign(y);
        match line {
            Some(i) => {
                let d = y - lines.centers[i];
                within += d * d;
                if let Some(p) = prev_line {
                    if p != i {
                        changes += 1;
                    }
                }
            }
            None => {
                off_line += 1;
                if y < first - lines.height / 2.0 {
                    let d = first - y;
                    outside += d * d;
                } else if y > last + lines.height / 2.0 {
                    let d = y - last;
                    outside += d * d;
                }
            }
        }
        if line.is_some() {
            prev_line = line;
        }
    }
    c.calibration * calibration
        + c.off_line * (off_line * off_line) as f64
        + c.line_change * (changes * changes) as f64
        + c.within_line * within
        + c.outside * outside
}

/// Finds nine vertical calibration offsets minimizing the five-term
/// objective by coordinate descent: each offset in turn is scanned over
/// ±2 line heights on a fine grid, refined by golden-section search, and a
/// tie within 1e-12 prefers the offset closest to zero. Horizontal
/// positions are never touched. Starting from zero offsets and accepting
/// only improvements guarantees the result is at least as good as no
/// correction.
pub fn drift_correct(
    fixations: &[RawFixation],
    grid: &CalibrationGrid,
    lines: &LineGeometry,
    coeffs: &DriftCoefficients,
) -> Result<DriftOutcome> {
    grid.validate()?;
    lines.validate()?;
    coeffs.validate()?;

    let bound = 2.0 * lines.height;
    let mut offsets = [0.0f64; 9];
    let mut best = drift_objective(fixations, grid, lines, coeffs, &offsets);

    let max_rounds = 24;
    let mut rounds = 0;
    let mut converged = false;
    while rounds < max_rounds {
        rounds += 1;
        let before = best;
        for k in 0..9 {
            let eval = |v: f64, offsets: &mut [f64; 9]| {
                let saved = offsets[k];
                offsets[k] = v;
                let obj = drift_objective(fixations, grid, lines, coeffs, offsets);
                offsets[k] = saved;
                obj
            };
            // fine scan over the bounded range probes every plateau
            let steps = 160;
            let mut cand = offsets[k];
            let mut cand_obj = best;
            for s in 0..=steps {
                let v = -bound + 2.0 * bound * s as f64 / steps as f64;
                let obj = eval(v, &mut offsets);
                let better = obj < cand_obj - 1e-12
                    || (obj < cand_obj + 1e-12 && v.abs() < cand.abs());
                if better {
                    cand = v;
                    cand_obj = obj;
                }
            }
            // golden-section refinement around the winning cell
            let step = 2.0 * bound / steps as f64;
            let (mut lo, mut hi) = (cand - step, cand + step);
            let phi = 0.5 * (5.0f64.sqrt() - 1.0);
            let mut x1 = hi - phi * (hi - lo);
            let mut x2 = lo + phi * (hi - lo);
            let mut f1 = eval(x1, &mut offsets);
            let mut f2 = eval(x2, &mut offsets);
            for _ in 0..48 {
                if f1 < f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - phi * (hi - lo);
                    f1 = eval(x1, &mut offsets);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + phi * (hi - lo);
                    f2 = eval(x2, &mut offsets);
                }
            }
            let refined = 0.5 * (lo + hi);
            let refined_obj = eval(refined, &mut offsets);
            if refined_obj < cand_obj - 1e-12
                || (refined_obj < cand_obj + 1e-12 && refined.abs() < cand.abs())
            {
                cand = refined;
                cand_obj = refined_obj;
            }
            // walk a tied plateau toward zero
            for frac in [0.0, 0.25, 0.5, 0.75] {
                let v = cand * frac;
                let obj = eval(v, &mut offsets);
                if obj < cand_obj + 1e-12 {
                    cand = v;
                    cand_obj = obj;
                    break;
                }
            }
            if cand_obj < best {
                offsets[k] = cand;
                best = cand_obj;
            }
        }
        if before - best < 1e-9 {
            converged = true;
            break;
        }
    }

    let corrected: Vec<RawFixation> = fixations
        .iter()
        .map(|f| RawFixation {
            y: f.y + grid.interpolate(&offsets, f.x, f.y),
            ..f.clone()
        })
        .collect();
    Ok(DriftOutcome { fixations: corrected, offsets, objective: best, converged, rounds })
}
