"""Hot simulation loops, compiled via the backend kernel decorator.

One genuine task is dispatched per slot (slot width = 1/task_rate). Vote
values are computed at dispatch; arrival timestamps carry the per-message
round-trip delay, and anything order-sensitive (the detect step) consumes
votes sorted by arrival. The detection-phase loop owns the CVT table:
admissions in sequence order as verifications complete, one probe per
detect period, eviction/replacement when an entry runs out of unprobed
workers, and an immediate return when a probe vote triggers detection.

All loops share one RNG stream with a fixed draw order, so a (config,
seed) pair maps to exactly one trace on either backend.
"""

import numpy as np

from ._backend import kernel
from .behaviors import cast_pool_votes
from .cvt import cvt_detect, cvt_find, cvt_set_entry, cvt_unprobed
from .repository import add_pool_pairs, greedy_pool, min_pair_count
from .rng import randbelow, uniform
from .voting import majority_value, sample_k

__all__ = [
    "draw_arrivals",
    "order_by_time",
    "dispatch_single",
    "run_plain_stream",
    "run_detection_phase",
    "run_observation_phase",
    "run_sne_phase",
]


def _draw_arrivals(state, n, t, rtt_lo, rtt_hi, out):
    """Arrival time of each vote: dispatch + an independent round trip."""
    for i in range(n):
        out[i] = t + uniform(state, rtt_lo, rtt_hi)


draw_arrivals = kernel(_draw_arrivals)


def _order_by_time(times, n, idx_out):
    """Stable insertion-sort indices of times[:n], ties by position."""
    for i in range(n):
        idx_out[i] = i
    for i in range(1, n):
        key = idx_out[i]
        kt = times[key]
        j = i - 1
        while j >= 0 and times[idx_out[j]] > kt:
            idx_out[j + 1] = idx_out[j]
            j -= 1
        idx_out[j + 1] = key


order_by_time = kernel(_order_by_time)


def _dispatch_single(
    state, vote_buf, arr_buf, pool_buf, n_pool, seq, t,
    classes, seen, ring_seen, shared_mem, joint,
    t_act, pc, eps, salt, rtt_lo, rtt_hi,
):
    """Cast and timestamp one pool dispatch; returns True if the ring colluded."""
    colluded = cast_pool_votes(
        state, vote_buf, pool_buf, n_pool, classes, seen, ring_seen,
        shared_mem, joint, seq, t, t_act, pc, eps, salt,
    )
    draw_arrivals(state, n_pool, t, rtt_lo, rtt_hi, arr_buf)
    return colluded


dispatch_single = kernel(_dispatch_single)


def _store_genuine(
    slot, t, k, pool_buf, vote_buf, arr_buf, colluded,
    g_pool, g_votes, g_arr, g_dispatch, g_done, g_maj, g_maj_has, g_colluded,
):
    done = 0.0
    for a in range(k):
        g_pool[slot, a] = pool_buf[a]
        g_votes[slot, a] = vote_buf[a]
        g_arr[slot, a] = arr_buf[a]
        if arr_buf[a] > done:
            done = arr_buf[a]
    g_dispatch[slot] = t
    g_done[slot] = done
    has, val = majority_value(vote_buf, k)
    g_maj_has[slot] = has
    g_maj[slot] = val
    g_colluded[slot] = colluded
    return done


store_genuine = kernel(_store_genuine)


def _run_plain_stream(
    state, start_slot, end_slot, slot_dt, n, k,
    classes, seen, ring_seen, shared_mem, joint, t_act, pc, eps, salt,
    rtt_lo, rtt_hi,
    g_pool, g_votes, g_arr, g_dispatch, g_done, g_maj, g_maj_has, g_colluded,
    scratch, pool_buf, vote_buf, arr_buf,
):
    """Genuine traffic only: uniform pools, no CVT activity."""
    slot = start_slot
    while slot < end_slot:
        t = slot * slot_dt
        for w in range(n):
            scratch[w] = w
        sample_k(state, scratch, n, k, pool_buf)
        colluded = cast_pool_votes(
            state, vote_buf, pool_buf, k, classes, seen, ring_seen,
            shared_mem, joint, slot, t, t_act, pc, eps, salt,
        )
        draw_arrivals(state, k, t, rtt_lo, rtt_hi, arr_buf)
        store_genuine(
            slot, t, k, pool_buf, vote_buf, arr_buf, colluded,
            g_pool, g_votes, g_arr, g_dispatch, g_done, g_maj, g_maj_has, g_colluded,
        )
        slot += 1
    return slot


run_plain_stream = kernel(_run_plain_stream)


def _record_task_into_entry(row, seq, k, g_pool, g_votes, r2_idx, r2_pool, r2_votes, c_rec, c_has):
    """Record every vote the task ever received (both pools if re-dispatched)."""
    for a in range(k):
        c_rec[row, g_pool[seq, a]] = g_votes[seq, a]
        c_has[row, g_pool[seq, a]] = True
    r2 = r2_idx[seq]
    if r2 >= 0:
        for a in range(k):
            c_rec[row, r2_pool[r2, a]] = r2_votes[r2, a]
            c_has[row, r2_pool[r2, a]] = True


record_task_into_entry = kernel(_record_task_into_entry)


def _run_detection_phase(
    state, start_slot, end_slot, slot_dt, n, k,
    classes, seen, ring_seen, shared_mem, joint, t_act, pc, eps, salt,
    rtt_lo, rtt_hi,
    g_pool, g_votes, g_arr, g_dispatch, g_done, g_maj, g_maj_has, g_colluded,
    r2_of, r2_pool, r2_votes, r2_arr, r2_idx, r2_count,
    cvt_cap, c_task, c_vals, c_nulls, c_rec, c_has, c_size,
    detect_dt, next_probe_idx,
    done_cursor, admit_cursor,
    p_time, p_task, p_pool, p_votes, p_arr, p_outcome, p_count,
    scratch, pool_buf, vote_buf, arr_buf, free_buf, order_buf,
):
    """Genuine stream + CVT probing until detection or end_slot.

    Returns a packed status tuple; on detection the table is already wiped
    and the triggering entry snapshot lives in the last probe log row plus
    the returned scalars.
    """
    r2_cap = r2_of.shape[0]
    det_time = -1.0
    det_task = np.int64(-1)
    det_worker = np.int64(-1)
    det_value = np.uint64(0)
    det_vmaj = np.uint64(0)
    det_vmaj_null = False
    detected = False

    slot = start_slot
    while slot < end_slot:
        t = slot * slot_dt

        # verification completions, in sequence order; a no-majority task is
        # re-dispatched once to a disjoint pool at its completion time
        while done_cursor < slot:
            seq = done_cursor
            if g_done[seq] > t:
                break
            if (not g_maj_has[seq]) and r2_idx[seq] < 0 and (n - k) >= k and r2_count < r2_cap:
                nc = 0
                for w in range(n):
                    inpool = False
                    for a in range(k):
                        if g_pool[seq, a] == w:
                            inpool = True
                    if not inpool:
                        scratch[nc] = w
                        nc += 1
                sample_k(state, scratch, nc, k, pool_buf)
                td = g_done[seq]
                colluded = cast_pool_votes(
                    state, vote_buf, pool_buf, k, classes, seen, ring_seen,
                    shared_mem, joint, seq, td, t_act, pc, eps, salt,
                )
                draw_arrivals(state, k, td, rtt_lo, rtt_hi, arr_buf)
                r2 = r2_count
                r2_count += 1
                r2_of[r2] = seq
                r2_idx[seq] = r2
                done = td
                for a in range(k):
                    r2_pool[r2, a] = pool_buf[a]
                    r2_votes[r2, a] = vote_buf[a]
                    r2_arr[r2, a] = arr_buf[a]
                    if arr_buf[a] > done:
                        done = arr_buf[a]
                has, val = majority_value(vote_buf, k)
                g_maj_has[seq] = has
                if has:
                    g_maj[seq] = val
                if colluded:
                    g_colluded[seq] = True
                g_done[seq] = done
                # completion moved into the future; re-check next slot
            else:
                done_cursor += 1

        # admit completed verifications while the table is filling
        while admit_cursor < done_cursor:
            seq = admit_cursor
            if c_size < cvt_cap and cvt_find(c_task, c_size, seq) < 0:
                row = c_size
                c_size += 1
                cvt_set_entry(c_task, c_vals, c_nulls, c_rec, c_has, row, seq, g_maj_has[seq], g_maj[seq])
                record_task_into_entry(row, seq, k, g_pool, g_votes, r2_idx, r2_pool, r2_votes, c_rec, c_has)
            admit_cursor += 1

        # periodic probe
        while next_probe_idx * detect_dt <= t + 1e-12:
            tp = next_probe_idx * detect_dt
            next_probe_idx += 1
            if c_size == 0:
                continue
            row = np.int64(-1)
            n_free = 0
            attempts = 0
            while attempts <= cvt_cap + 1:
                attempts += 1
                cand = np.int64(randbelow(state, c_size))
                n_free = cvt_unprobed(c_has, cand, free_buf)
                if n_free > k:
                    row = cand
                    break
                # entry exhausted: replace with the most recent verified task
                repl = np.int64(-1)
                s2 = done_cursor - 1
                while s2 >= 0:
                    if cvt_find(c_task, c_size, s2) < 0:
                        repl = s2
                        break
                    s2 -= 1
                if repl < 0:
                    break
                cvt_set_entry(c_task, c_vals, c_nulls, c_rec, c_has, cand, repl, g_maj_has[repl], g_maj[repl])
                record_task_into_entry(cand, repl, k, g_pool, g_votes, r2_idx, r2_pool, r2_votes, c_rec, c_has)
            if row < 0:
                continue

            task = c_task[row]
            sample_k(state, free_buf, n_free, k, pool_buf)
            cast_pool_votes(
                state, vote_buf, pool_buf, k, classes, seen, ring_seen,
                shared_mem, joint, task, tp, t_act, pc, eps, salt,
            )
            draw_arrivals(state, k, tp, rtt_lo, rtt_hi, arr_buf)

            p_time[p_count] = tp
            p_task[p_count] = task
            for a in range(k):
                p_pool[p_count, a] = pool_buf[a]
                p_votes[p_count, a] = vote_buf[a]
                p_arr[p_count, a] = arr_buf[a]
            p_outcome[p_count] = -1

            order_by_time(arr_buf, k, order_buf)
            for oi in range(k):
                a = order_buf[oi]
                wkr = pool_buf[a]
                val = vote_buf[a]
                res = cvt_detect(c_vals, c_nulls, c_rec, c_has, row, wkr, val)
                if res == 1:
                    detected = True
                    det_time = arr_buf[a]
                    det_task = task
                    det_worker = wkr
                    det_value = val
                    det_vmaj = c_vals[row]
                    det_vmaj_null = c_nulls[row]
                    break
            if detected:
                p_outcome[p_count] = 1
                p_count += 1
                break
            p_count += 1
        if detected:
            break

        # genuine dispatch of this slot's task
        for w in range(n):
            scratch[w] = w
        sample_k(state, scratch, n, k, pool_buf)
        colluded = cast_pool_votes(
            state, vote_buf, pool_buf, k, classes, seen, ring_seen,
            shared_mem, joint, slot, t, t_act, pc, eps, salt,
        )
        draw_arrivals(state, k, t, rtt_lo, rtt_hi, arr_buf)
        store_genuine(
            slot, t, k, pool_buf, vote_buf, arr_buf, colluded,
            g_pool, g_votes, g_arr, g_dispatch, g_done, g_maj, g_maj_has, g_colluded,
        )
        slot += 1

    status = 1 if detected else 0
    return (
        status, slot, r2_count, c_size, next_probe_idx, done_cursor, admit_cursor,
        p_count, det_time, det_task, det_worker, det_value, det_vmaj, det_vmaj_null,
    )


run_detection_phase = kernel(_run_detection_phase)


def _run_observation_phase(
    state, start_slot, end_slot, slot_dt, n, k,
    classes, seen, ring_seen, shared_mem, joint, t_act, pc, eps, salt,
    rtt_lo, rtt_hi,
    g_pool, g_votes, g_arr, g_dispatch, g_done, g_maj, g_maj_has, g_colluded,
    pair_counts, target,
    tr_seq, tr_pool, tr_votes, tr_count,
    pool_buf, vote_buf, arr_buf,
):
    """Greedy pair-coverage pools until every pair co-appeared ``target`` times.

    The observation tasks are the genuine tasks of those slots (one pool per
    task). Returns (tr_count, slot, ready_time, reached_target).
    """
    tr_cap = tr_seq.shape[0]
    t_ready = start_slot * slot_dt
    slot = start_slot
    while slot < end_slot and tr_count < tr_cap:
        if min_pair_count(pair_counts, n) >= target:
            break
        t = slot * slot_dt
        greedy_pool(pair_counts, n, k, pool_buf)
        colluded = cast_pool_votes(
            state, vote_buf, pool_buf, k, classes, seen, ring_seen,
            shared_mem, joint, slot, t, t_act, pc, eps, salt,
        )
        draw_arrivals(state, k, t, rtt_lo, rtt_hi, arr_buf)
        done = store_genuine(
            slot, t, k, pool_buf, vote_buf, arr_buf, colluded,
            g_pool, g_votes, g_arr, g_dispatch, g_done, g_maj, g_maj_has, g_colluded,
        )
        if done > t_ready:
            t_ready = done
        tr_seq[tr_count] = slot
        for a in range(k):
            tr_pool[tr_count, a] = pool_buf[a]
            tr_votes[tr_count, a] = vote_buf[a]
        tr_count += 1
        add_pool_pairs(pair_counts, pool_buf, k)
        slot += 1
    reached = min_pair_count(pair_counts, n) >= target
    return tr_count, slot, t_ready, reached


run_observation_phase = kernel(_run_observation_phase)


def _run_sne_phase(
    state, start_slot, end_slot, slot_dt, n, k,
    classes, seen, ring_seen, shared_mem, joint, t_act, pc, eps, salt,
    rtt_lo, rtt_hi,
    g_pool, g_votes, g_arr, g_dispatch, g_done, g_maj, g_maj_has, g_colluded,
    total_counts, win_bits, win_len, win_pos, win_sum, window,
    last_min, t_ready_in,
    pool_buf, vote_buf, arr_buf,
):
    """SnE observation gathering until the next re-cluster point.

    Keeps a sliding window of the last ``window`` agreement bits per pair.
    Returns at every full observation round (the minimum total count over
    pairs increments past the window fill); the caller clusters the window
    graph and resumes. Status 1 = re-cluster now, 0 = slot budget exhausted.
    """
    slot = start_slot
    t_ready = t_ready_in
    while slot < end_slot:
        t = slot * slot_dt
        greedy_pool(total_counts, n, k, pool_buf)
        colluded = cast_pool_votes(
            state, vote_buf, pool_buf, k, classes, seen, ring_seen,
            shared_mem, joint, slot, t, t_act, pc, eps, salt,
        )
        draw_arrivals(state, k, t, rtt_lo, rtt_hi, arr_buf)
        done = store_genuine(
            slot, t, k, pool_buf, vote_buf, arr_buf, colluded,
            g_pool, g_votes, g_arr, g_dispatch, g_done, g_maj, g_maj_has, g_colluded,
        )
        if done > t_ready:
            t_ready = done

        for a in range(k):
            for b in range(a + 1, k):
                i = pool_buf[a]
                j = pool_buf[b]
                if i > j:
                    i, j = j, i
                bit = 1 if vote_buf[a] == vote_buf[b] else 0
                if win_len[i, j] == window:
                    win_sum[i, j] -= win_bits[i, j, win_pos[i, j]]
                else:
                    win_len[i, j] += 1
                win_bits[i, j, win_pos[i, j]] = bit
                win_sum[i, j] += bit
                win_pos[i, j] = (win_pos[i, j] + 1) % window
                total_counts[i, j] += 1
                total_counts[j, i] += 1
        slot += 1

        new_min = min_pair_count(total_counts, n)
        if new_min >= window and new_min > last_min:
            return 1, slot, t_ready, new_min
    return 0, slot, t_ready, last_min


run_sne_phase = kernel(_run_sne_phase)
