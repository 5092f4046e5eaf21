//! Exhaustive integer-allocation search, used only as a test oracle.

#![allow(dead_code)]

/// Exhaustive search over integer allocations: can every session be fully
/// charged without any hour exceeding its headroom?
pub fn feasible(
    sessions: &[(usize, usize, u32, u32)],
    headroom: &mut [u32; 8],
    idx: usize,
) -> bool {
    if idx == sessions.len() {
        return true;
    }
    let (start, _, energy, _) = sessions[idx];
    fn place(
        sessions: &[(usize, usize, u32, u32)],
        headroom: &mut [u32; 8],
        idx: usize,
        hour: usize,
        left: u32,
    ) -> bool {
        let (start, dur, _, power) = sessions[idx];
        if left == 0 {
            return feasible(sessions, headroom, idx + 1);
        }
        if hour == start + dur {
            return false;
        }
        let most = power.min(headroom[hour]).min(left);
        for p in (0..=most).rev() {
            headroom[hour] -= p;
            let ok = place(sessions, headroom, idx, hour + 1, left - p);
            headroom[hour] += p;
            if ok {
                return true;
            }
        }
        false
    }
    place(sessions, headroom, idx, start, energy)
}
