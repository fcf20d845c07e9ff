//! Euclidean projections onto the capped simplex `{u >= 0, Σu <= C}` and the
//! probability simplex `{w >= 0, Σw = 1}`.

/// Projects onto `{u >= 0, Σu <= C}` in place by clipping and repeatedly
/// shifting the positive entries down by the average excess. Each pass
/// either finishes or removes at least one entry from the positive set, so
/// there are at most `N` passes of `O(N)` work.
pub fn project_capacity_simplex_in_place(u: &mut [f64], capacity: f64) {
    debug_assert!(capacity > 0.0);
    for v in u.iter_mut() {
        *v = v.max(0.0);
    }
    for _ in 0..=u.len() {
        let (count, total) = u
            .iter()
            .filter(|&&v| v > 0.0)
            .fold((0usize, 0.0), |(c, s), &v| (c + 1, s + v));
        if total <= capacity || count == 0 {
            return;
        }
        let shift = (total - capacity) / count as f64;
        let mut clipped = false;
        for v in u.iter_mut().filter(|v| **v > 0.0) {
            *v -= shift;
            if *v < 0.0 {
                *v = 0.0;
                clipped = true;
            }
        }
        if !clipped {
            // the positive set is final; the sum now equals C up to rounding
            break;
        }
    }
    // rounding can leave the sum a few ulps above C
    let total: f64 = u.iter().sum();
    if total > capacity {
        let scale = capacity / total;
        u.iter_mut().for_each(|v| *v *= scale);
    }
}

pub fn project_capacity_simplex(u: &[f64], capacity: f64) -> Vec<f64> {
    let mut out = u.to_vec();
    project_capacity_simplex_in_place(&mut out, capacity);
    out
}

/// Sort-based projection onto `{w >= 0, Σw = total}`.
pub fn project_simplex_in_place(w: &mut [f64], total: f64) {
    if w.is_empty() {
        return;
    }
    let mut sorted = w.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - total) / (j + 1) as f64;
        if v - t > 0.0 {
            tau = t;
        }
    }
    for v in w.iter_mut() {
        *v = (*v - tau).max(0.0);
    }
}

pub fn project_simplex(w: &[f64], total: f64) -> Vec<f64> {
    let mut out = w.to_vec();
    project_simplex_in_place(&mut out, total);
    out
}
