"""Leader/follower affine formations.

Leaders follow ``Q(t) r_i(t0) + d(t)``; every follower tracks the weighted
average of its in-neighbours' *current* positions. Agent ids are 1-based
throughout, matching the JSON config format.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from .errors import ConfigError, MissingNeighbor, NotALeader, UnsafeTransform
from .geom import rot_z
from .sim import COMPLETED, DIVERGED, SimConfig, SimLog, control_step
from .trajectories import FlatSample, _compose, sigma_T
from .vehicle import RigidState

WEIGHT_SUM_TOL = 1e-12
HALTED = "halted"
TRANSFORM_KINDS = ("identity", "translate", "scale", "rotate_z")


@dataclass(frozen=True)
class AffineTransform:
    """``Q(t)`` and ``d(t)`` blended in by the smooth step ``s = sigma_T(t) / T``.

    kinds and params:
      identity  -- none
      translate -- ``offset`` (3-vector): d = s * offset
      scale     -- ``factor``: Q = (1 + s (factor - 1)) I
      rotate_z  -- ``angle`` (rad): Q = rot_z(s * angle)
    """

    kind: str = "identity"
    params: dict = field(default_factory=dict)
    T: float = 10.0

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise ConfigError(f"unknown transform kind {self.kind!r}")
        if not self.T > 0.0:
            raise ConfigError("transform T must be positive")
        need = {"translate": "offset", "scale": "factor", "rotate_z": "angle"}.get(self.kind)
        if need and need not in self.params:
            raise ConfigError(f"{self.kind} transform needs param {need!r}")

    def _blend(self, t):
        """Derivatives 0..4 of s(t), held at 1 after T."""
        if t >= self.T:
            return (1.0, 0.0, 0.0, 0.0, 0.0)
        return tuple(x / self.T for x in sigma_T(max(t, 0.0), self.T))

    def Q(self, t):
        s = self._blend(t)[0]
        if self.kind == "scale":
            return (1.0 + s * (float(self.params["factor"]) - 1.0)) * np.eye(3)
        if self.kind == "rotate_z":
            return rot_z(s * float(self.params["angle"]))
        return np.eye(3)

    def d(self, t):
        if self.kind == "translate":
            return self._blend(t)[0] * np.asarray(self.params["offset"], dtype=float)
        return np.zeros(3)

    def _image_in_s(self, r0, s):
        """Derivatives 0..4 with respect to s of ``Q(s) r0 + d(s)``."""
        r0 = np.asarray(r0, dtype=float)
        zero = np.zeros(3)
        if self.kind == "translate":
            off = np.asarray(self.params["offset"], dtype=float)
            return (r0 + s * off, off, zero, zero, zero)
        if self.kind == "scale":
            f = float(self.params["factor"])
            return ((1.0 + s * (f - 1.0)) * r0, (f - 1.0) * r0, zero, zero, zero)
        if self.kind == "rotate_z":
            a = float(self.params["angle"])
            out = [rot_z(a * s) @ r0]
            for k in range(1, 5):
                v = a**k * (rot_z(a * s + k * math.pi / 2.0) @ r0)
                v[2] = 0.0
                out.append(v)
            return tuple(out)
        return (r0.copy(), zero, zero, zero, zero)

    def image(self, r0, t) -> FlatSample:
        """Affine image of `r0` at time t with time derivatives through snap."""
        s = self._blend(t)
        f = self._image_in_s(r0, s[0])
        return FlatSample(*_compose(f, s))

    def to_dict(self):
        return {"kind": self.kind, "params": dict(self.params), "T": self.T}


class Safety(NamedTuple):
    delta: float
    epsilon: float
    d_min: float


class SafetyCheck(NamedTuple):
    lambda_min: float
    threshold: float
    ok: bool


def safety_margin(Q, safety: Safety) -> SafetyCheck:
    """Smallest singular value of Q against ``2 (delta + epsilon) / d_min``."""
    lam = float(np.linalg.svd(np.asarray(Q, dtype=float), compute_uv=False)[-1])
    thr = 2.0 * (safety.delta + safety.epsilon) / safety.d_min
    return SafetyCheck(lam, thr, lam >= thr)


@dataclass(frozen=True)
class FormationConfig:
    N: int
    leaders: tuple
    neighbors: dict
    weights: dict
    initial_positions: np.ndarray
    transform: AffineTransform = field(default_factory=AffineTransform)
    safety: Safety = Safety(0.1, 0.15, 1.0)

    def __post_init__(self):
        N = self.N
        pos = np.asarray(self.initial_positions, dtype=float)
        if pos.shape != (N, 3):
            raise ConfigError(f"need {N} initial positions of length 3, got shape {pos.shape}")
        object.__setattr__(self, "initial_positions", pos)
        leaders = tuple(int(i) for i in self.leaders)
        if not leaders or any(not 1 <= i <= N for i in leaders) or len(set(leaders)) != len(leaders):
            raise ConfigError("leaders must be distinct ids in 1..N")
        object.__setattr__(self, "leaders", leaders)
        nb = {int(k): tuple(int(j) for j in v) for k, v in self.neighbors.items()}
        w = {int(k): tuple(float(x) for x in v) for k, v in self.weights.items()}
        for i in leaders:
            if nb.get(i):
                raise ConfigError(f"leader {i} must not have in-neighbours")
            nb.pop(i, None)
            w.pop(i, None)
        for i in self.followers_of(leaders, N):
            if not nb.get(i):
                raise ConfigError(f"follower {i} has no in-neighbours")
            if len(w.get(i, ())) != len(nb[i]):
                raise ConfigError(f"follower {i}: one weight per in-neighbour required")
            if any(not 1 <= j <= N or j == i for j in nb[i]):
                raise ConfigError(f"follower {i}: bad neighbour id")
            if any(not x > 0.0 for x in w[i]):
                raise ConfigError(f"follower {i}: weights must be positive")
            if abs(math.fsum(w[i]) - 1.0) > WEIGHT_SUM_TOL:
                raise ConfigError(f"follower {i}: weights sum to {math.fsum(w[i])!r}, not 1")
        object.__setattr__(self, "neighbors", nb)
        object.__setattr__(self, "weights", w)
        s = self.safety
        if not isinstance(s, Safety):
            s = Safety(*s)
            object.__setattr__(self, "safety", s)
        if s.delta < 0.0 or s.epsilon < 0.0 or not s.d_min > 0.0:
            raise ConfigError("safety needs delta, epsilon >= 0 and d_min > 0")

    @staticmethod
    def followers_of(leaders, N):
        return tuple(i for i in range(1, N + 1) if i not in leaders)

    @property
    def followers(self):
        return self.followers_of(self.leaders, self.N)

    def initial(self, i):
        return self.initial_positions[i - 1]

    @classmethod
    def from_dict(cls, doc):
        try:
            tr = doc.get("transform", {"kind": "identity"})
            sf = doc["safety"]
            return cls(
                N=int(doc["agents"]),
                leaders=tuple(doc["leaders"]),
                neighbors=doc.get("neighbors", {}),
                weights=doc.get("weights", {}),
                initial_positions=np.array(doc["initial_positions"], dtype=float),
                transform=AffineTransform(tr["kind"], dict(tr.get("params", {})),
                                          float(tr.get("T", 10.0))),
                safety=Safety(float(sf["delta"]), float(sf["epsilon"]), float(sf["d_min"])),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed formation config: {exc}") from exc

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self):
        return {
            "agents": self.N,
            "leaders": list(self.leaders),
            "neighbors": {str(k): list(v) for k, v in self.neighbors.items()},
            "weights": {str(k): list(v) for k, v in self.weights.items()},
            "initial_positions": self.initial_positions.tolist(),
            "transform": self.transform.to_dict(),
            "safety": self.safety._asdict(),
        }


def leader_ref(i, t, config: FormationConfig) -> np.ndarray:
    if i not in config.leaders:
        raise NotALeader(f"agent {i} is not a leader")
    tr = config.transform
    return tr.Q(t) @ config.initial(i) + tr.d(t)


def follower_ref(i, neighbor_positions: Mapping, config: FormationConfig) -> np.ndarray:
    if i in config.leaders:
        raise ConfigError(f"agent {i} is a leader")
    out = np.zeros(3)
    for j, w in zip(config.neighbors[i], config.weights[i]):
        if j not in neighbor_positions:
            raise MissingNeighbor(j)
        out += w * np.asarray(neighbor_positions[j], dtype=float)
    return out


def affine_weights(target, neighbors):
    """Weights with ``sum w_j p_j = target`` and ``sum w_j = 1`` (least squares).

    Needs at least four non-coplanar neighbour positions. The weights are not
    guaranteed positive; positivity is checked when the config is built.
    """
    P = np.asarray(neighbors, dtype=float)
    if P.ndim != 2 or P.shape[1] != 3 or len(P) < 4:
        raise ValueError("need at least 4 neighbour positions in 3-D")
    A = np.vstack([P.T, np.ones(len(P))])
    if np.linalg.matrix_rank(A) < 4:
        raise ValueError("neighbour positions are coplanar")
    b = np.append(np.asarray(target, dtype=float), 1.0)
    w, *_ = np.linalg.lstsq(A, b, rcond=None)
    return w


class BackwardDifference:
    """Derivatives 1..4 at the newest of up to 5 equally spaced samples.

    Fits the interpolating polynomial through the available history, so
    fewer samples give fewer nonzero derivatives.
    """

    DEPTH = 5

    def __init__(self, dt):
        self.dt = dt
        self.history = []
        self._inv = {}
        for n in range(1, self.DEPTH + 1):
            tau = -np.arange(n, dtype=float)
            V = np.array([[x**k / math.factorial(k) for k in range(n)] for x in tau])
            self._inv[n] = np.linalg.inv(V)

    def push(self, value):
        self.history.insert(0, np.asarray(value, dtype=float))
        del self.history[self.DEPTH:]

    def sample(self) -> FlatSample:
        n = len(self.history)
        c = self._inv[n] @ np.array(self.history)
        d = [c[k] / self.dt**k if k < n else np.zeros(3) for k in range(5)]
        d[0] = self.history[0].copy()
        return FlatSample(*d)


@dataclass
class FormationResult:
    logs: dict
    safety: np.ndarray  # columns t, lambda_min, threshold, ok
    status: str = COMPLETED
    diverged_agent: int | None = None

    @property
    def unsafe_count(self):
        return int(np.count_nonzero(self.safety[:, 3] == 0.0))

    @property
    def first_unsafe_time(self):
        bad = np.nonzero(self.safety[:, 3] == 0.0)[0]
        return float(self.safety[bad[0], 0]) if bad.size else None

    def safety_to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,lambda_min,threshold,pass\n")
            for t, lam, thr, ok in self.safety:
                fh.write(f"{t:.9g},{lam:.9g},{thr:.9g},{int(ok)}\n")


def run_formation(config: FormationConfig, sim: SimConfig | None = None) -> FormationResult:
    """Simulate every agent with its own controller in synchronous rounds.

    `sim` supplies controller choice, poles, vehicle params, dt and duration;
    its trajectory is ignored. All references in a round are computed from the
    positions at the start of the round.
    """
    sim = sim or SimConfig(controller="snap")
    ids = range(1, config.N + 1)
    ctrls = {i: sim.build_controller() for i in ids}
    states = {i: RigidState(config.initial(i).copy(), np.zeros(3), np.eye(3), np.zeros(3))
              for i in ids}
    fd = {i: BackwardDifference(sim.dt) for i in config.followers}
    rows = {i: [] for i in ids}
    safety_rows = []
    warned = False
    status, bad_agent = COMPLETED, None

    for k in range(sim.n_steps + 1):
        t = k * sim.dt
        check = safety_margin(config.transform.Q(t), config.safety)
        safety_rows.append((t, check.lambda_min, check.threshold, float(check.ok)))
        if not check.ok and not warned:
            warnings.warn(f"formation transform unsafe at t={t:.9g}: lambda_min "
                          f"{check.lambda_min:.6g} < {check.threshold:.6g}", UnsafeTransform)
            warned = True

        snapshot = {i: states[i].r.copy() for i in ids}
        refs = {}
        for i in ids:
            if i in config.leaders:
                refs[i] = config.transform.image(config.initial(i), t)
            else:
                fd[i].push(follower_ref(i, snapshot, config))
                refs[i] = fd[i].sample()

        nxt = {}
        for i in ids:
            row, nxt[i], failed = control_step(ctrls[i], states[i], refs[i], t, sim)
            rows[i].append(row)
            if failed and bad_agent is None:
                status, bad_agent = DIVERGED, i
        if bad_agent is not None:
            break
        states = nxt

    t_end = safety_rows[-1][0]
    logs = {}
    for i in ids:
        if status == COMPLETED:
            logs[i] = SimLog(np.array(rows[i]), COMPLETED, None)
        elif i == bad_agent:
            logs[i] = SimLog(np.array(rows[i]), DIVERGED, t_end)
        else:
            logs[i] = SimLog(np.array(rows[i]), HALTED, None)
    return FormationResult(logs, np.array(safety_rows), status, bad_agent)


def exact_tracking_refs(config: FormationConfig, t):
    """Every agent's reference when all positions equal their references.

    Followers are resolved by fixed-point iteration on the neighbour graph,
    starting from the transformed initial positions.
    """
    tr = config.transform
    pos = {i: tr.Q(t) @ config.initial(i) + tr.d(t) for i in range(1, config.N + 1)}
    for _ in range(4 * config.N):
        for i in config.followers:
            pos[i] = follower_ref(i, pos, config)
    return pos


def tetrahedron_config(transform: AffineTransform | None = None, safety=Safety(0.1, 0.15, 1.0),
                       center=(0.0, 0.0, 1.0)) -> FormationConfig:
    """Four leaders on a regular tetrahedron, one follower at their barycentre."""
    c = np.asarray(center, dtype=float)
    verts = np.array([[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]])
    pos = np.vstack([c + verts, c])
    return FormationConfig(
        N=5, leaders=(1, 2, 3, 4), neighbors={5: (1, 2, 3, 4)}, weights={5: (0.25,) * 4},
        initial_positions=pos, transform=transform or AffineTransform(), safety=safety)

