"""Score fusion, max-object selection, exclusive-object prior and regrouping."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np


def _check_unit(name: str, x: np.ndarray) -> None:
    if np.any(~np.isfinite(x)) or np.any(x < 0) or np.any(x > 1):
        raise ValueError(f"{name} must lie in [0, 1]")


def fuse_scores(s_a, s_i, s_h, s_o):
    """Final triplet score: action * interactiveness * human * object confidence."""
    arrs = [np.asarray(v, dtype=np.float64) for v in (s_a, s_i, s_h, s_o)]
    for name, a in zip(("action score", "interactiveness", "human score", "object score"), arrs):
        _check_unit(name, a)
    out = arrs[0] * arrs[1] * arrs[2] * arrs[3]
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ScoreTensor:
    """Per-image factors; ``fused`` is their product, shape (N_h, N_o, A)."""

    action: np.ndarray  # (N_h, N_o, A)
    interactiveness: np.ndarray  # (N_h, N_o)
    human: np.ndarray  # (N_h,)
    object: np.ndarray  # (N_o,)

    def __post_init__(self):
        a = np.asarray(self.action, dtype=np.float64)
        if a.ndim != 3:
            raise ValueError("action scores must be (N_h, N_o, A)")
        nh, no, _ = a.shape
        i = np.asarray(self.interactiveness, dtype=np.float64).reshape(nh, no)
        h = np.asarray(self.human, dtype=np.float64).reshape(nh)
        o = np.asarray(self.object, dtype=np.float64).reshape(no)
        object.__setattr__(self, "action", a)
        object.__setattr__(self, "interactiveness", i)
        object.__setattr__(self, "human", h)
        object.__setattr__(self, "object", o)
        object.__setattr__(self, "fused", fuse_scores(
            a, i[:, :, None], h[:, None, None], o[None, :, None]))

    @classmethod
    def from_fused(cls, fused: np.ndarray) -> "ScoreTensor":
        """Wrap an already-fused matrix (other factors set to 1)."""
        fused = np.asarray(fused, dtype=np.float64)
        nh, no, _ = fused.shape
        return cls(fused, np.ones((nh, no)), np.ones(nh), np.ones(no))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.action.shape


class PairAssignment(NamedTuple):
    human: int
    action: int
    object: int
    score: float


def max_object_select(S: ScoreTensor | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Best object per (human, action); ties go to the lowest object index.

    Returns (object index, score), both shaped (N_h, A).
    """
    fused = S.fused if isinstance(S, ScoreTensor) else np.asarray(S)
    if fused.shape[1] < 1:
        raise ValueError("need at least one object")
    idx = np.argmax(fused, axis=1)
    best = np.take_along_axis(fused, idx[:, None, :], axis=1)[:, 0, :]
    return idx, best


@dataclass(frozen=True)
class ActionPrior:
    q_e: int
    q_s: int
    exclusive: bool

    @property
    def ratio(self) -> float:
        total = self.q_e + self.q_s
        return self.q_e / total if total else 0.0


ExclusivePrior = dict[str, ActionPrior]


def compute_exclusive_prior(annotations: Iterable[tuple], beta: float = 0.95,
                            actions: Sequence[str] = ()) -> dict[str, ActionPrior]:
    """Count exclusive vs shared human-object pairs per action.

    ``annotations`` yields (image_id, human_id, action, object_id) tuples;
    object-less tuples (object_id None) are ignored.  Duplicate pairs
    count once.
    """
    pairs = defaultdict(set)  # (action, image, object) -> humans
    for image_id, human_id, action, object_id in annotations:
        if object_id is None:
            continue
        pairs[(action, image_id, object_id)].add(human_id)
    counts = {a: [0, 0] for a in actions}
    for (action, _, _), humans in pairs.items():
        c = counts.setdefault(action, [0, 0])
        if len(humans) == 1:
            c[0] += 1
        else:
            c[1] += len(humans)
    prior = {}
    for action, (q_e, q_s) in counts.items():
        total = q_e + q_s
        prior[action] = ActionPrior(q_e, q_s, bool(total and q_e / total > beta))
    return prior


@dataclass(frozen=True)
class RegroupConfig:
    s_min: float = 0.5
    beta: float = 0.95

    def __post_init__(self):
        if not (0 <= self.s_min <= 1 and 0 <= self.beta <= 1):
            raise ValueError("s_min and beta must lie in [0, 1]")


def regroup_action(scores: np.ndarray, s_min: float = 0.5) -> list[Optional[int]]:
    """Resolve shared objects for one exclusive action.

    ``scores`` is the (N_h, N_o) fused matrix.  Returns the object index
    per human, or None for humans left without an object.

    Starting from the per-human argmax, the conflict (object held by more
    than one human) with the highest best-pair score is resolved first:
    if that score exceeds ``s_min`` the best human keeps the object for
    good and every other holder, in descending score order, moves to its
    best object not yet kept by someone.  Conflicts whose best score is
    at most ``s_min`` are left alone.
    """
    scores = np.asarray(scores, dtype=np.float64)
    nh, no = scores.shape
    assign: list[Optional[int]] = [int(np.argmax(scores[h])) for h in range(nh)]
    kept = set()
    while True:
        holders = defaultdict(list)
        for h, o in enumerate(assign):
            if o is not None:
                holders[o].append(h)
        best = None  # (score, object, winner)
        for o in sorted(holders):
            hs = holders[o]
            if len(hs) < 2:
                continue
            winner = min(hs, key=lambda h: (-scores[h, o], h))
            cand = (scores[winner, o], o, winner)
            if cand[0] > s_min and (best is None or cand[0] > best[0]):
                best = cand
        if best is None:
            return assign
        _, o, winner = best
        kept.add(o)
        losers = sorted((h for h in holders[o] if h != winner), key=lambda h: (-scores[h, o], h))
        for h in losers:
            free = [j for j in range(no) if j not in kept]
            assign[h] = min(free, key=lambda j: (-scores[h, j], j)) if free else None


def exclusive_regroup(S: ScoreTensor | np.ndarray, exclusive: Sequence[bool],
                      cfg: RegroupConfig = RegroupConfig()) -> list[PairAssignment]:
    """Max-object selection followed by regrouping of exclusive actions.

    ``exclusive[a]`` flags action ``a``; other actions keep their argmax
    object.  Output is ordered by (action, human).
    """
    fused = S.fused if isinstance(S, ScoreTensor) else np.asarray(S, dtype=np.float64)
    nh, no, A = fused.shape
    if len(exclusive) != A:
        raise ValueError(f"exclusive flags for {len(exclusive)} actions, scores have {A}")
    if nh == 0 or no == 0:
        return []
    obj, _ = max_object_select(fused)
    out = []
    for a in range(A):
        if exclusive[a]:
            assign = regroup_action(fused[:, :, a], cfg.s_min)
        else:
            assign = [int(o) for o in obj[:, a]]
        for h, o in enumerate(assign):
            if o is not None:
                out.append(PairAssignment(h, a, o, float(fused[h, o, a])))
    return out


def exclusive_flags(prior: Mapping[str, ActionPrior], actions: Sequence[str]) -> list[bool]:
    return [bool(prior[a].exclusive) if a in prior else False for a in actions]
