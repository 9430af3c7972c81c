"""CTC, permutation-invariant CTC, diarization MSE and their combinations.

Permutation convention used throughout: ``perm[s]`` is the model output
stream assigned to reference speaker ``s``.  Ties between permutations are
broken towards the lexicographically smallest tuple.
"""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from . import tensor as T
from .tensor import ShapeError, Tensor

NEG = -1e30


class CTCError(ValueError):
    pass


def _check_target(target: Sequence[int], n_vocab: int) -> list[int]:
    tgt = [int(v) for v in target]
    for v in tgt:
        if not 1 <= v < n_vocab:
            raise CTCError(f"target token {v} outside [1, {n_vocab - 1}] (0 is blank)")
    return tgt


def min_frames(target: Sequence[int]) -> int:
    """Fewest frames that can emit ``target``: one per token plus a blank per repeat."""
    return len(target) + sum(1 for a, b in zip(target, target[1:]) if a == b)


def _lse3(a, b, c):
    m = np.maximum(np.maximum(a, b), c)
    return m + np.log(np.exp(a - m) + np.exp(b - m) + np.exp(c - m))


def ctc_forward_backward(log_probs: np.ndarray, targets: Sequence[Sequence[int]]):
    """Batched CTC over (N, T, V) log-probabilities.

    Returns ``(nll, grad)`` where ``nll`` is (N,) (``inf`` for impossible
    targets) and ``grad`` = d nll / d log_probs, i.e. minus the state
    occupancy posteriors summed per vocabulary entry.
    """
    lp = np.asarray(log_probs, dtype=np.float64)
    N, Tn, V = lp.shape
    tgts = [_check_target(t, V) for t in targets]
    lens = np.array([len(t) for t in tgts])
    S = 2 * int(lens.max(initial=0)) + 1
    ext = np.zeros((N, S), dtype=np.intp)
    for n, t in enumerate(tgts):
        ext[n, 1:2 * len(t):2] = t
    valid = np.arange(S)[None, :] < (2 * lens + 1)[:, None]
    skip = np.zeros((N, S), dtype=bool)
    skip[:, 2:] = (ext[:, 2:] != 0) & (ext[:, 2:] != ext[:, :-2])
    emit = np.take_along_axis(lp, np.broadcast_to(ext[:, None, :], (N, Tn, S)), axis=2)
    emit = np.where(valid[:, None, :], emit, NEG)

    alpha = np.full((Tn, N, S), NEG)
    alpha[0, :, 0] = emit[:, 0, 0]
    if S > 1:
        alpha[0, :, 1] = np.where(lens > 0, emit[:, 0, 1], NEG)
    for t in range(1, Tn):
        prev = alpha[t - 1]
        s1 = np.concatenate([np.full((N, 1), NEG), prev[:, :-1]], axis=1)
        s2 = np.concatenate([np.full((N, 2), NEG), prev[:, :-2]], axis=1)[:, :S]
        s2 = np.where(skip, s2, NEG)
        alpha[t] = np.maximum(_lse3(prev, s1, s2) + emit[:, t], NEG)

    ends = 2 * lens
    rows = np.arange(N)
    last = alpha[Tn - 1, rows, ends]
    last2 = np.where(lens > 0, alpha[Tn - 1, rows, np.maximum(ends - 1, 0)], NEG)
    ll = np.logaddexp(last, last2)

    # beta excludes the emission at its own frame
    beta = np.full((Tn, N, S), NEG)
    beta[Tn - 1, rows, ends] = 0.0
    beta[Tn - 1, rows[lens > 0], ends[lens > 0] - 1] = 0.0
    skip_next = np.zeros((N, S), dtype=bool)
    skip_next[:, :-2] = skip[:, 2:]
    for t in range(Tn - 2, -1, -1):
        nb = beta[t + 1] + emit[:, t + 1]
        n1 = np.concatenate([nb[:, 1:], np.full((N, 1), NEG)], axis=1)
        n2 = np.concatenate([nb[:, 2:], np.full((N, 2), NEG)], axis=1)[:, :S]
        n2 = np.where(skip_next, n2, NEG)
        beta[t] = np.maximum(_lse3(nb, n1, n2), NEG)

    possible = ll > NEG / 2
    nll = np.where(possible, -ll, np.inf)
    post = np.exp(np.where(possible[None, :, None], alpha + beta - ll[None, :, None], NEG))
    onehot = np.zeros((N, S, V))
    np.put_along_axis(onehot, ext[:, :, None], 1.0, axis=2)
    onehot *= valid[:, :, None]
    occupancy = np.einsum("tns,nsv->ntv", post, onehot)
    grad = np.where(possible[:, None, None], -occupancy, 0.0)
    return nll, grad


def ctc_loss_batch(log_probs: Tensor, targets: Sequence[Sequence[int]], strict: bool = True) -> Tensor:
    """Per-item CTC negative log-likelihood (N,) for (N, T, V) log-probs."""
    if log_probs.ndim != 3 or log_probs.shape[0] != len(targets):
        raise ShapeError(f"ctc_loss_batch: log_probs {log_probs.shape} vs {len(targets)} targets")
    if strict:
        for n, tgt in enumerate(targets):
            need = min_frames(tgt)
            if need > log_probs.shape[1]:
                raise CTCError(f"target of length L={len(tgt)} needs {need} frames but T={log_probs.shape[1]}"
                               f" (item {n})")
    nll, grad = ctc_forward_backward(log_probs.data, targets)

    def bw(g):
        return (grad * g[:, None, None],)

    return T._result("ctc", nll, (log_probs,), bw)


def ctc_loss(log_probs: Tensor, target: Sequence[int], strict: bool = True) -> Tensor:
    """CTC loss for one (T, V) stream of log-softmax outputs; scalar tensor.

    With ``strict`` an unreachable target raises; otherwise the loss is inf.
    """
    if not isinstance(log_probs, Tensor):
        log_probs = Tensor(log_probs)
    if log_probs.ndim != 2:
        raise ShapeError(f"ctc_loss: expected (T, V) log-probs, got {log_probs.shape}")
    out = ctc_loss_batch(T.reshape(log_probs, (1,) + log_probs.shape), [target], strict)
    return T.reshape(out, ())


def ctc_brute_force(log_probs, target: Sequence[int]) -> float:
    """Enumerate all V^T label paths and keep those that collapse to ``target``."""
    lp = np.asarray(log_probs.data if isinstance(log_probs, Tensor) else log_probs, dtype=np.float64)
    Tn, V = lp.shape
    if Tn > 8 or V > 4:
        raise ValueError(f"brute force limited to T<=8, V<=4 (got T={Tn}, V={V})")
    target = tuple(int(v) for v in target)
    scores = []
    for path in itertools.product(range(V), repeat=Tn):
        collapsed = []
        prev = None
        for p in path:
            if p != prev and p != 0:
                collapsed.append(p)
            prev = p
        if tuple(collapsed) == target:
            scores.append(sum(lp[t, p] for t, p in enumerate(path)))
    if not scores:
        return float("inf")
    m = max(scores)
    return float(-(m + np.log(sum(np.exp(s - m) for s in scores))))


# --------------------------------------------------------------------------
# permutation invariant training


def best_permutation(cost: np.ndarray) -> tuple[tuple[int, ...], float]:
    """Exhaustive argmin over bijections of sum_s cost[perm[s], s]; lexicographic ties."""
    S = cost.shape[0]
    best, best_val = None, np.inf
    for perm in itertools.permutations(range(S)):
        val = sum(cost[perm[s], s] for s in range(S))
        # values equal up to summation-order rounding count as ties
        if best is None or val < best_val - 1e-12 * max(1.0, abs(best_val)):
            best, best_val = perm, val
    return best, float(best_val)


def pit_ctc_batch(log_probs: Tensor, targets: Sequence[Sequence[Sequence[int]]]):
    """PIT-CTC for (B, S, T, V) log-probs and B lists of S targets.

    Returns ``(loss, perms, pair_losses)``: the batch-mean of the per-item
    minimum over permutations of the speaker-averaged CTC, the chosen
    permutations and the (B, S, S) stream x target loss table.
    """
    if log_probs.ndim != 4:
        raise ShapeError(f"pit_ctc: expected (B, S, T, V) log-probs, got {log_probs.shape}")
    B, S, Tn, V = log_probs.shape
    if len(targets) != B or any(len(t) != S for t in targets):
        raise ShapeError(f"pit_ctc: need {B} x {S} targets")
    if S > 4:
        raise ValueError(f"pit_ctc: exhaustive search supports S <= 4, got {S}")
    flat = T.reshape(log_probs, (B * S, Tn, V))
    # every (stream, target) pair: row b*S*S + i*S + j is stream i vs target j
    stream_idx = np.repeat(np.arange(B * S), S)
    pair_targets = [targets[b][j] for b in range(B) for i in range(S) for j in range(S)]
    try:
        pairs = ctc_loss_batch(T.take(flat, stream_idx, axis=0), pair_targets)
    except CTCError as exc:
        raise CTCError(f"pit_ctc: {exc}") from None
    table = pairs.data.reshape(B, S, S)
    perms = []
    picks = []
    for b in range(B):
        perm, _ = best_permutation(table[b])
        perms.append(perm)
        picks.extend(b * S * S + perm[s] * S + s for s in range(S))
    loss = T.mean(T.take(pairs, np.array(picks), axis=0))
    return loss, perms, table


def pit_ctc(log_probs_per_stream: Tensor, targets: Sequence[Sequence[int]]):
    """Single-item PIT-CTC on (S, T, V) log-probs; returns ``(loss, perm)``."""
    lp = log_probs_per_stream
    loss, perms, _ = pit_ctc_batch(T.reshape(lp, (1,) + lp.shape), [targets])
    return loss, perms[0]


# --------------------------------------------------------------------------
# diarization


def _permute_streams(D: Tensor, perms: Sequence[Sequence[int]]) -> Tensor:
    B, S, _ = D.shape
    rows = np.repeat(np.arange(B), S)
    cols = np.array([p[s] for p in perms for s in range(S)])
    return T.reshape(T.getitem(D, (rows, cols)), D.shape)


def diar_mse(D: Tensor, ref, perms) -> Tensor:
    """Mean over (B, S, T) of (D[b, perm_b[s], t] - ref[b, s, t])^2.

    ``perms`` is one permutation (applied to every item) or one per item.
    """
    if not isinstance(D, Tensor):
        D = Tensor(D)
    ref = np.asarray(ref, dtype=np.float64)
    if D.ndim != 3 or D.shape != ref.shape:
        raise ShapeError(f"diar_mse: activity {D.shape} vs reference {ref.shape}")
    B, S, _ = D.shape
    if len(perms) and not isinstance(perms[0], (tuple, list, np.ndarray)):
        perms = [tuple(perms)] * B
    if len(perms) != B or any(sorted(p) != list(range(S)) for p in perms):
        raise ValueError(f"diar_mse: invalid permutations {perms} for S={S}")
    diff = T.sub(_permute_streams(D, perms), ref)
    return T.mean(T.mul(diff, diff))


def combined_loss(logits: Tensor, targets, D: Tensor, ref, lam: float = 0.01):
    """PIT-CTC + lam * diarization MSE under the CTC-chosen permutation.

    ``logits``: (B, S, T, V) raw decoder scores.  Returns
    ``(loss, perms, parts)`` with ``parts = {"ctc": float, "diar": float}``.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    lp = T.log_softmax(logits, axis=-1)
    ctc, perms, _ = pit_ctc_batch(lp, targets)
    diar = diar_mse(D, ref, perms)
    loss = T.add(ctc, T.mul(diar, lam)) if lam else ctc
    return loss, perms, {"ctc": float(ctc.data), "diar": float(diar.data)}


def adaptation_loss(D_segments: Sequence[Tensor], ref_segments: Sequence, starts: Sequence[int]):
    """Diarization-only loss over the segments of one recording.

    The first segment's permutation is the exhaustive MSE minimiser against
    its reference; each later segment is aligned to the previous (already
    re-ordered) segment on their shared frames, and the alignments chain.
    Returns ``(loss, perms)``; loss is the frame-weighted mean squared error.
    """
    from .diarize import align_permutation

    if not D_segments:
        raise ValueError("adaptation_loss: no segments")
    if not (len(D_segments) == len(ref_segments) == len(starts)):
        raise ValueError("adaptation_loss: segments, references and starts differ in length")
    D0 = D_segments[0]
    S = D0.shape[0]
    ref0 = np.asarray(ref_segments[0], dtype=np.float64)
    cost = np.array([[np.sum((D0.data[i] - ref0[j]) ** 2) for j in range(S)] for i in range(S)])
    perm, _ = best_permutation(cost)
    perms = [perm]
    prev_vals = D0.data[list(perm)]
    prev_start = starts[0]
    for D, start in zip(D_segments[1:], starts[1:]):
        prev_end = prev_start + prev_vals.shape[1]
        n_sh = min(prev_end, start + D.shape[1]) - start
        if start <= prev_start or n_sh < 1:
            raise ValueError(f"adaptation_loss: segment at {start} does not overlap its predecessor")
        rel = align_permutation(prev_vals[:, start - prev_start:start - prev_start + n_sh], D.data[:, :n_sh])
        perms.append(rel)
        prev_vals = D.data[list(rel)]
        prev_start = start
    total = None
    n_total = 0
    for D, ref, perm in zip(D_segments, ref_segments, perms):
        ref = np.asarray(ref, dtype=np.float64)
        if D.shape != ref.shape:
            raise ShapeError(f"adaptation_loss: segment {D.shape} vs reference {ref.shape}")
        diff = T.sub(T.take(D, list(perm), axis=0), ref)
        sq = T.sum_(T.mul(diff, diff))
        total = sq if total is None else T.add(total, sq)
        n_total += D.size
    return T.mul(total, 1.0 / n_total), perms
