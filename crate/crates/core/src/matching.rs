//! Full reuse matchings and their class indices.
//!
//! A matching assigns each of the N V-UEs a distinct C-UE out of M, i.e. a
//! partial permutation. There are M!/(M−N)! of them. Class indices follow
//! lexicographic order of the matching vector, which is also the order the
//! solvers enumerate in.

/// Number of full matchings, `M!/(M−N)!`. Zero when `N > M`.
pub fn matching_count(num_cue: usize, num_vue: usize) -> usize {
    if num_vue > num_cue {
        return 0;
    }
    (num_cue - num_vue + 1..=num_cue).product()
}

/// All matchings in lexicographic order.
pub fn enumerate_matchings(num_cue: usize, num_vue: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(matching_count(num_cue, num_vue));
    let mut current = Vec::with_capacity(num_vue);
    let mut used = vec![false; num_cue];
    fn rec(m: usize, n: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for c in 0..m {
            if !used[c] {
                used[c] = true;
                cur.push(c);
                rec(m, n, cur, used, out);
                cur.pop();
                used[c] = false;
            }
        }
    }
    if num_vue <= num_cue {
        rec(num_cue, num_vue, &mut current, &mut used, &mut out);
    }
    out
}

/// Class index of a matching, or `None` if it is not a valid full matching.
pub fn encode(matching: &[usize], num_cue: usize) -> Option<usize> {
    let n = matching.len();
    if n > num_cue {
        return None;
    }
    let mut used = vec![false; num_cue];
    let mut index = 0;
    for (pos, &c) in matching.iter().enumerate() {
        if c >= num_cue || used[c] {
            return None;
        }
        let rank = (0..c).filter(|&x| !used[x]).count();
        // Matchings sharing this prefix: (M−pos−1)!/(M−n)!
        index += rank * matching_count(num_cue - pos - 1, n - pos - 1);
        used[c] = true;
    }
    Some(index)
}

/// Inverse of [`encode`]. `None` for out-of-range classes.
pub fn decode(class: usize, num_cue: usize, num_vue: usize) -> Option<Vec<usize>> {
    if class >= matching_count(num_cue, num_vue) {
        return None;
    }
    let mut free: Vec<usize> = (0..num_cue).collect();
    let mut rest = class;
    let mut out = Vec::with_capacity(num_vue);
    for pos in 0..num_vue {
        let block = matching_count(num_cue - pos - 1, num_vue - pos - 1);
        let rank = rest / block;
        rest %= block;
        out.push(free.remove(rank));
    }
    Some(out)
}
