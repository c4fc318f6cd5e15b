"""Deterministic synthetic video generator with exact ground truth.

Produces a frame matrix D = clip(B + S + E) built from an exactly low-rank
background (smooth spatial modes times slowly drifting temporal
coefficients), small moving rectangular targets, and optional iid Gaussian
noise, together with per-frame bounding-box annotations. Scenarios are
fully reproducible from their seed.
"""

import json
from dataclasses import dataclass, asdict

import numpy as np

from .detection import Box, GtBox
from .errors import InvalidParameterError, ScenarioError
from .linalg import FrameMatrix

# Compass directions with integer components: a target advances
# speed*component pixels per frame along each axis, so integer speeds
# translate boxes by whole pixels every frame.
_DIRECTIONS = np.array([
    (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0),
    (1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0),
])


@dataclass
class SynthScenario:
    height: int
    width: int
    n_frames: int
    rank: int
    n_targets: int = 0
    target_size: tuple = (3, 3)
    target_contrast: float = 0.3
    target_speed: float = 1.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.target_size = tuple(self.target_size)
        if self.height < 1 or self.width < 1 or self.n_frames < 1:
            raise InvalidParameterError("height, width and n_frames must be >= 1")
        if not 1 <= self.rank <= min(self.height, self.width, self.n_frames):
            raise InvalidParameterError(
                f"rank must be in [1, {min(self.height, self.width, self.n_frames)}]"
            )
        if self.n_targets < 0:
            raise InvalidParameterError("n_targets must be >= 0")
        th, tw = self.target_size
        if th < 1 or tw < 1:
            raise InvalidParameterError("target_size must be positive")
        if not 0 < self.target_contrast <= 1:
            raise InvalidParameterError("target_contrast must be in (0, 1]")
        if self.target_speed < 0 or self.noise_sigma < 0:
            raise InvalidParameterError("speed and noise_sigma must be >= 0")

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


@dataclass
class SynthResult:
    """Generated data plus its exact decomposition and annotations.

    ``d.data - background - foreground - residual`` is zero wherever the
    final [0,1] clipping was inactive; ``clip_delta`` is the largest
    clipping perturbation (zero for well-margined scenarios).
    """

    d: FrameMatrix
    background: np.ndarray
    foreground: np.ndarray
    residual: np.ndarray
    boxes: list
    clip_delta: float


def _background(scn, rng):
    h, w, n = scn.height, scn.width, scn.n_frames
    i = np.linspace(0.0, 1.0, h)[:, None]
    j = np.linspace(0.0, 1.0, w)[None, :]
    f = np.arange(n) / max(n - 1, 1)

    # Mode 0: mid-grey planar gradient with a slow temporal drift; higher
    # modes are low-amplitude separable sinusoids at distinct frequencies.
    # Amplitudes keep B inside (0.05, 0.95) so the later clip stays inactive.
    spatial = [0.35 + 0.10 * (i + j - 1.0)]
    temporal = [1.0 + 0.02 * (f - 0.5)]
    for k in range(1, scn.rank):
        phase_i, phase_j, phase_t = rng.uniform(0, 2 * np.pi, size=3)
        amp = 0.08 / (k + 1)
        spatial.append(
            amp * np.sin(2 * np.pi * k * i + phase_i)
            * np.cos(2 * np.pi * k * j + phase_j)
        )
        temporal.append(0.5 + 0.4 * np.sin(2 * np.pi * k * f + phase_t))
    B = np.zeros((h * w, n))
    for u, c in zip(spatial, temporal):
        B += np.outer(u.ravel(), c)
    return B


def _plan_targets(scn, rng):
    """Pick directions and starts so every path stays in frame and paths
    of distinct targets never overlap (2 px margin). Placement is greedy
    with whole-plan restarts so early draws cannot wedge later targets."""
    h, w, n = scn.height, scn.width, scn.n_frames
    th, tw = scn.target_size
    if th > h or tw > w:
        raise ScenarioError(f"target {th}x{tw} does not fit a {h}x{w} frame")

    def try_place(plans):
        for _ in range(50):
            dx, dy = _DIRECTIONS[rng.integers(len(_DIRECTIONS))]
            span_x = scn.target_speed * (n - 1) * dx
            span_y = scn.target_speed * (n - 1) * dy
            lo_x, hi_x = max(0.0, -span_x), w - tw - max(0.0, span_x)
            lo_y, hi_y = max(0.0, -span_y), h - th - max(0.0, span_y)
            if hi_x < lo_x or hi_y < lo_y:
                continue
            x0 = rng.uniform(lo_x, hi_x)
            y0 = rng.uniform(lo_y, hi_y)
            path = np.empty((n, 2), dtype=np.int64)
            for f in range(n):
                path[f, 0] = int(round(x0 + dx * scn.target_speed * f))
                path[f, 1] = int(round(y0 + dy * scn.target_speed * f))
            ext = (path[:, 0].min() - 2, path[:, 0].max() + tw + 2,
                   path[:, 1].min() - 2, path[:, 1].max() + th + 2)
            if all(ext[1] <= q[0] or q[1] <= ext[0]
                   or ext[3] <= q[2] or q[3] <= ext[2]
                   for q, _ in plans):
                return ext, path
        return None

    for _ in range(40):
        plans = []
        for _t in range(scn.n_targets):
            placed = try_place(plans)
            if placed is None:
                break
            plans.append(placed)
        else:
            return [path for _, path in plans]
    raise ScenarioError(
        f"could not place {scn.n_targets} non-overlapping target paths in a "
        f"{h}x{w} frame at speed {scn.target_speed} over {n} frames"
    )


def generate(scn: SynthScenario):
    """Build (D, B, S, E, ground-truth boxes) for a scenario."""
    rng = np.random.default_rng(scn.seed)
    h, w, n = scn.height, scn.width, scn.n_frames
    th, tw = scn.target_size

    B = _background(scn, rng)
    paths = _plan_targets(scn, rng)

    S = np.zeros((h * w, n))
    boxes = [[] for _ in range(n)]
    for tid, path in enumerate(paths):
        for f in range(n):
            x, y = int(path[f, 0]), int(path[f, 1])
            frame = S[:, f].reshape(h, w)
            frame[y:y + th, x:x + tw] += scn.target_contrast
            boxes[f].append(GtBox(target_id=tid, box=Box(x=x, y=y, w=tw, h=th)))

    E = rng.normal(0.0, scn.noise_sigma, size=(h * w, n)) \
        if scn.noise_sigma > 0 else np.zeros((h * w, n))

    raw = B + S + E
    D = np.clip(raw, 0.0, 1.0)
    clip_delta = float(np.max(np.abs(D - raw)))
    return SynthResult(
        d=FrameMatrix(D, h, w),
        background=B,
        foreground=S,
        residual=E,
        boxes=boxes,
        clip_delta=clip_delta,
    )
