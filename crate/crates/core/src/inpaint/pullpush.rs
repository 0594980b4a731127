//! Multi-resolution pull-push hole filling.
//!
//! Pull builds a pyramid of weighted averages over known samples until a level has no
//! unknown cell. Push walks back down: unknown cells start from the bilinearly upsampled
//! coarser level and are then relaxed by Jacobi sweeps of their 4-neighborhood with known
//! cells held fixed. Every filled value is a convex combination of known values.

const SWEEPS_PER_LEVEL: usize = 4;

struct Level {
    w: usize,
    h: usize,
    values: Vec<f32>,
    weight: Vec<f32>,
}

/// Fills `values` (interleaved, `channels` per pixel) wherever `known` is false.
///
/// `wrap_x` treats the left and right borders as adjacent during relaxation, which suits
/// equirectangular rasters. Known samples are returned unchanged. Panics if no sample is
/// known; callers check that first.
pub fn fill(
    values: &[f32],
    known: &[bool],
    w: usize,
    h: usize,
    channels: usize,
    wrap_x: bool,
) -> Vec<f32> {
    assert_eq!(values.len(), w * h * channels);
    assert_eq!(known.len(), w * h);
    assert!(known.iter().any(|k| *k), "pull-push needs at least one known sample");
    if known.iter().all(|k| *k) {
        return values.to_vec();
    }

    let mut levels = vec![Level {
        w,
        h,
        values: values.to_vec(),
        weight: known.iter().map(|k| *k as u8 as f32).collect(),
    }];
    loop {
        let top = levels.last().expect("non-empty");
        if top.weight.iter().all(|wt| *wt > 0.0) || (top.w == 1 && top.h == 1) {
            break;
        }
        let next = pull(top, channels);
        levels.push(next);
    }

    // the coarsest level is fully known now
    let mut filled = levels.pop().expect("non-empty").values;
    while let Some(level) = levels.pop() {
        let coarse_w = level.w.div_ceil(2);
        let coarse_h = level.h.div_ceil(2);
        filled = push(&level, &filled, coarse_w, coarse_h, channels, wrap_x);
    }

    // bound by the known range per channel to absorb rounding
    let mut lo = vec![f32::INFINITY; channels];
    let mut hi = vec![f32::NEG_INFINITY; channels];
    for (i, k) in known.iter().enumerate() {
        if *k {
            for c in 0..channels {
                lo[c] = lo[c].min(values[i * channels + c]);
                hi[c] = hi[c].max(values[i * channels + c]);
            }
        }
    }
    for (i, k) in known.iter().enumerate() {
        for c in 0..channels {
            let v = &mut filled[i * channels + c];
            if *k {
                *v = values[i * channels + c];
            } else {
                *v = v.clamp(lo[c], hi[c]);
            }
        }
    }
    filled
}

fn pull(fine: &Level, channels: usize) -> Level {
    let w = fine.w.div_ceil(2);
    let h = fine.h.div_ceil(2);
    let mut values = vec![0f32; w * h * channels];
    let mut weight = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = vec![0f32; channels];
            let mut wsum = 0f32;
            for fy in (2 * y)..(2 * y + 2).min(fine.h) {
                for fx in (2 * x)..(2 * x + 2).min(fine.w) {
                    let i = fy * fine.w + fx;
                    let wt = fine.weight[i];
                    if wt > 0.0 {
                        wsum += wt;
                        for c in 0..channels {
                            acc[c] += wt * fine.values[i * channels + c];
                        }
                    }
                }
            }
            let o = y * w + x;
            if wsum > 0.0 {
                for c in 0..channels {
                    values[o * channels + c] = acc[c] / wsum;
                }
                weight[o] = wsum.min(1.0);
            }
        }
    }
    Level {
        w,
        h,
        values,
        weight,
    }
}

fn push(
    level: &Level,
    coarse: &[f32],
    cw: usize,
    ch: usize,
    channels: usize,
    wrap_x: bool,
) -> Vec<f32> {
    let (w, h) = (level.w, level.h);
    let mut cur = level.values.clone();
    let unknown: Vec<usize> = (0..w * h).filter(|i| level.weight[*i] == 0.0).collect();
    for &i in &unknown {
        let (x, y) = (i % w, i / w);
        let cx = ((x as f32 + 0.5) / 2.0 - 0.5).clamp(0.0, (cw - 1) as f32);
        let cy = ((y as f32 + 0.5) / 2.0 - 0.5).clamp(0.0, (ch - 1) as f32);
        let (x0, y0) = (cx.floor() as usize, cy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(cw - 1), (y0 + 1).min(ch - 1));
        let (fx, fy) = (cx - x0 as f32, cy - y0 as f32);
        for c in 0..channels {
            let at = |xx: usize, yy: usize| coarse[(yy * cw + xx) * channels + c];
            let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
            let bot = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
            cur[i * channels + c] = top * (1.0 - fy) + bot * fy;
        }
    }

    let mut next = cur.clone();
    let mut acc = vec![0f32; channels];
    for _ in 0..SWEEPS_PER_LEVEL {
        for &i in &unknown {
            let (x, y) = (i % w, i / w);
            acc.fill(0.0);
            let mut count = 0f32;
            let mut add = |j: usize| {
                for c in 0..channels {
                    acc[c] += cur[j * channels + c];
                }
                count += 1.0;
            };
            if x > 0 {
                add(i - 1);
            } else if wrap_x && w > 1 {
                add(i + w - 1);
            }
            if x + 1 < w {
                add(i + 1);
            } else if wrap_x && w > 1 {
                add(i + 1 - w);
            }
            if y > 0 {
                add(i - w);
            }
            if y + 1 < h {
                add(i + w);
            }
            if count > 0.0 {
                for c in 0..channels {
                    next[i * channels + c] = acc[c] / count;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_holes_is_identity() {
        let v: Vec<f32> = (0..12).map(|i| i as f32).collect();
        assert_eq!(fill(&v, &[true; 12], 4, 3, 1, false), v);
    }

    #[test]
    fn single_hole_is_mean_of_neighbors() {
        let (w, h) = (5, 5);
        let mut v: Vec<f32> = (0..w * h).map(|i| ((i * 37) % 11) as f32).collect();
        let mut known = vec![true; w * h];
        known[12] = false;
        v[12] = 1000.0;
        let out = fill(&v, &known, w, h, 1, false);
        let want = (v[7] + v[11] + v[13] + v[17]) / 4.0;
        assert!((out[12] - want).abs() < 1e-5, "{} vs {want}", out[12]);
    }

    #[test]
    fn constant_field_stays_constant() {
        let (w, h) = (37, 19);
        let known: Vec<bool> = (0..w * h).map(|i| i % 7 == 0 || i > 600).collect();
        let v = vec![2.0f32; w * h];
        assert!(fill(&v, &known, w, h, 1, true).iter().all(|x| *x == 2.0));
    }

    #[test]
    fn lone_known_sample_floods_everything() {
        let mut known = vec![false; 64];
        known[9] = true;
        let mut v = vec![0.0; 64 * 2];
        v[18] = 3.0;
        v[19] = -1.0;
        let out = fill(&v, &known, 8, 8, 2, false);
        for px in out.chunks(2) {
            assert_eq!(px, &[3.0, -1.0]);
        }
    }
}
