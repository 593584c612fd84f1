"""Temporal alignment of demonstrations.

Trajectories are warped onto a common clock with dynamic time warping. The
default local cost compares task completion indices (TCI): the fraction of
total SE(3) path length accumulated so far. Matching by completion instead of
absolute pose keeps demonstrations of different spatial extent from having
their intermediate samples dragged onto the wrong task phase.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTrajectoryError, InvalidInputError
from .se3 import (ANGLE_EPS, DistanceWeights, Pose, RotationVector,
                  arc_distance, pose_distance, quaternion_of,
                  rotvec_from_quaternion)

MEASURES = ("tci", "euclidean-pose")


class AlignmentWarning(UserWarning):
    """Raised in warning form when a demonstration is skipped."""


@dataclass(frozen=True)
class Trajectory:
    """Strictly increasing timestamps paired with poses, at least two samples."""

    stamps: np.ndarray
    poses: tuple

    def __post_init__(self):
        stamps = np.asarray(self.stamps, dtype=float)
        poses = tuple(self.poses)
        if stamps.ndim != 1 or stamps.size < 2:
            raise InvalidInputError("trajectory needs at least two samples")
        if not np.all(np.isfinite(stamps)):
            raise InvalidInputError("timestamps must be finite")
        if np.any(np.diff(stamps) <= 0.0):
            raise InvalidInputError("timestamps must be strictly increasing")
        if len(poses) != stamps.size:
            raise InvalidInputError("timestamps and poses differ in length")
        if not all(isinstance(p, Pose) for p in poses):
            raise InvalidInputError("trajectory samples must be Pose instances")
        object.__setattr__(self, "stamps", stamps)
        object.__setattr__(self, "poses", poses)
        stamps.setflags(write=False)

    def __len__(self):
        return self.stamps.size

    def positions(self) -> np.ndarray:
        return np.stack([p.position for p in self.poses])

    def rotation_vectors(self) -> np.ndarray:
        return np.stack([p.rotation.vec for p in self.poses])

    def as_matrix(self) -> np.ndarray:
        """Sample-major (n, 6) array of concatenated pose vectors."""
        return np.hstack([self.positions(), self.rotation_vectors()])


@dataclass(frozen=True)
class TCIProfile:
    """Monotone completion fractions, 0 at the start and 1 at the end."""

    zeta: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.zeta, dtype=float)
        object.__setattr__(self, "zeta", z)
        z.setflags(write=False)


def _step_lengths(traj: Trajectory, weights: DistanceWeights) -> np.ndarray:
    pos = traj.positions()
    rot = traj.rotation_vectors()
    dp = np.diff(pos, axis=0)
    trans_sq = np.einsum("ij,ij->i", dp, dp)
    arc = _arc_distances(rot[:-1], rot[1:])
    return np.sqrt(weights.rotation * arc * arc + weights.translation * trans_sq)


def _arc_distances(ra: np.ndarray, rb: np.ndarray) -> np.ndarray:
    """Vectorized geodesic angles between rows of canonical rotation vectors."""
    tha = np.linalg.norm(ra, axis=-1)
    thb = np.linalg.norm(rb, axis=-1)
    ua = np.where(tha[..., None] < ANGLE_EPS, [1.0, 0.0, 0.0],
                  ra / np.maximum(tha, ANGLE_EPS)[..., None])
    ub = np.where(thb[..., None] < ANGLE_EPS, [1.0, 0.0, 0.0],
                  rb / np.maximum(thb, ANGLE_EPS)[..., None])
    ca, sa = np.cos(0.5 * tha), np.sin(0.5 * tha)
    cb, sb = np.cos(0.5 * thb), np.sin(0.5 * thb)
    # Same atan2 form as se3.arc_distance: exact zero for coincident rows.
    w = ca * cb + sa * sb * np.einsum("...i,...i->...", ua, ub)
    v = ((ca * sb)[..., None] * ub - (cb * sa)[..., None] * ua
         - (sa * sb)[..., None] * np.cross(ua, ub))
    return 2.0 * np.arctan2(np.linalg.norm(v, axis=-1), np.abs(w))


def path_length(traj: Trajectory,
                weights: DistanceWeights = DistanceWeights()) -> float:
    """Total SE(3) arc length under the weighted pose distance."""
    return float(np.sum(_step_lengths(traj, weights)))


def tci_profile(traj: Trajectory,
                weights: DistanceWeights = DistanceWeights()) -> TCIProfile:
    """Cumulative fraction of path length covered at each sample."""
    steps = _step_lengths(traj, weights)
    total = float(np.sum(steps))
    if total <= 0.0:
        raise DegenerateTrajectoryError(
            "zero path length: completion fractions are undefined")
    zeta = np.concatenate([[0.0], np.cumsum(steps) / total])
    zeta[-1] = 1.0
    return TCIProfile(zeta=zeta)


@dataclass(frozen=True)
class WarpPath:
    """Monotone index pairs from (0, 0) to (len(a)-1, len(b)-1)."""

    pairs: np.ndarray
    cost: float

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=int)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise InvalidInputError("warp path must be an (L, 2) index array")
        steps = np.diff(pairs, axis=0)
        if np.any(steps < 0) or np.any(steps > 1) or np.any(steps.sum(axis=1) < 1):
            raise InvalidInputError("warp path steps must advance by (1,0), "
                                    "(0,1) or (1,1)")
        object.__setattr__(self, "pairs", pairs)
        pairs.setflags(write=False)


def _cost_matrix(a: Trajectory, b: Trajectory, weights: DistanceWeights,
                 measure: str) -> np.ndarray:
    if measure == "tci":
        za = tci_profile(a, weights).zeta
        zb = tci_profile(b, weights).zeta
        return np.abs(za[:, None] - zb[None, :])
    if measure == "euclidean-pose":
        pa, pb = a.positions(), b.positions()
        dp = pa[:, None, :] - pb[None, :, :]
        trans_sq = np.einsum("ijk,ijk->ij", dp, dp)
        ra, rb = a.rotation_vectors(), b.rotation_vectors()
        arc = _arc_distances(ra[:, None, :], rb[None, :, :])
        return np.sqrt(weights.rotation * arc * arc
                       + weights.translation * trans_sq)
    raise InvalidInputError(f"unknown alignment measure {measure!r}; "
                            f"expected one of {MEASURES}")


def dtw_align(a: Trajectory, b: Trajectory,
              weights: DistanceWeights = DistanceWeights(),
              measure: str = "tci") -> WarpPath:
    """Minimum-cost monotone warp between two trajectories.

    ``a`` is treated as the reference: when backtracking hits cost ties the
    diagonal step is preferred, then the step that advances ``a``.
    """
    C = _cost_matrix(a, b, weights, measure)
    na, nb = C.shape
    D = np.full((na, nb), np.inf)
    D[0, 0] = C[0, 0]
    for j in range(1, nb):
        D[0, j] = D[0, j - 1] + C[0, j]
    for i in range(1, na):
        row = D[i - 1]
        D[i, 0] = row[0] + C[i, 0]
        for j in range(1, nb):
            D[i, j] = C[i, j] + min(row[j - 1], row[j], D[i, j - 1])

    pairs = [(na - 1, nb - 1)]
    i, j = na - 1, nb - 1
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            best = min(D[i - 1, j - 1], D[i - 1, j], D[i, j - 1])
            if D[i - 1, j - 1] == best:
                i, j = i - 1, j - 1
            elif D[i - 1, j] == best:
                i -= 1
            else:
                j -= 1
        pairs.append((i, j))
    pairs.reverse()
    return WarpPath(pairs=np.array(pairs), cost=float(D[na - 1, nb - 1]))


def _mean_rotation_pick(rotvecs: np.ndarray) -> RotationVector:
    # Among collided samples keep the member closest to their componentwise
    # mean; averaging rotation vectors directly is only a tie-break device.
    if rotvecs.shape[0] == 1:
        return RotationVector(rotvecs[0])
    center = RotationVector(np.mean(rotvecs, axis=0))
    dists = [arc_distance(RotationVector(r), center) for r in rotvecs]
    return RotationVector(rotvecs[int(np.argmin(dists))])


def align_demonstrations(demos, weights: DistanceWeights = DistanceWeights(),
                         measure: str = "tci"):
    """Warp every demonstration onto a shared normalized clock.

    The reference is the demonstration whose total SE(3) arc length is the
    median of the set. Each other demonstration is warped against it; pose
    values are carried along the warp, with collisions onto one reference
    index resolved by averaging positions and picking the rotation closest
    to the collided mean. Demonstrations with zero path length are skipped
    with a warning. Output trajectories all share the reference's sample
    count and a stamp vector normalized to [0, 1].
    """
    demos = list(demos)
    if not demos:
        raise InvalidInputError("no demonstrations to align")

    usable, lengths = [], []
    for idx, demo in enumerate(demos):
        total = path_length(demo, weights)
        if total <= 0.0:
            warnings.warn(f"demonstration {idx} has zero path length; skipped",
                          AlignmentWarning)
            continue
        usable.append(demo)
        lengths.append(total)
    if not usable:
        raise DegenerateTrajectoryError("every demonstration was degenerate")

    ref = usable[int(np.argsort(lengths, kind="stable")[len(usable) // 2])]
    span = ref.stamps[-1] - ref.stamps[0]
    stamps = (ref.stamps - ref.stamps[0]) / span

    aligned = []
    for demo in usable:
        if demo is ref:
            aligned.append(Trajectory(stamps, ref.poses))
            continue
        warp = dtw_align(ref, demo, weights, measure)
        poses = []
        pairs = warp.pairs
        for i in range(len(ref)):
            js = pairs[pairs[:, 0] == i, 1]
            if js.size == 1:
                poses.append(demo.poses[int(js[0])])
                continue
            members = [demo.poses[int(j)] for j in js]
            position = np.mean([p.position for p in members], axis=0)
            rotation = _mean_rotation_pick(
                np.stack([p.rotation.vec for p in members]))
            poses.append(Pose(position, rotation))
        aligned.append(Trajectory(stamps, tuple(poses)))
    return aligned


def _slerp(ra: RotationVector, rb: RotationVector, frac: float) -> RotationVector:
    if frac <= 0.0:
        return ra
    if frac >= 1.0:
        return rb
    qa, qb = quaternion_of(ra), quaternion_of(rb)
    dot = float(np.dot(qa, qb))
    if dot < 0.0:
        qb, dot = -qb, -dot
    if dot > 1.0 - 1e-12:
        q = (1.0 - frac) * qa + frac * qb
        return rotvec_from_quaternion(q / np.linalg.norm(q))
    omega = math.acos(min(1.0, dot))
    s = math.sin(omega)
    q = (math.sin((1.0 - frac) * omega) / s) * qa + (math.sin(frac * omega) / s) * qb
    return rotvec_from_quaternion(q / np.linalg.norm(q))


def resample(traj: Trajectory, grid) -> Trajectory:
    """Sample a trajectory on a new stamp grid inside its time span.

    Positions interpolate linearly; rotations follow the geodesic between
    the bracketing samples. Grid points that coincide with original stamps
    reproduce the original poses exactly.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise InvalidInputError("resample grid needs at least two points")
    if np.any(np.diff(grid) <= 0.0):
        raise InvalidInputError("resample grid must be strictly increasing")
    if grid[0] < traj.stamps[0] - 1e-12 or grid[-1] > traj.stamps[-1] + 1e-12:
        raise InvalidInputError("resample grid extends outside the trajectory span")

    stamps = traj.stamps
    pos = traj.positions()
    new_pos = np.stack([np.interp(grid, stamps, pos[:, d]) for d in range(3)],
                       axis=1)
    idx = np.clip(np.searchsorted(stamps, grid, side="right") - 1,
                  0, len(traj) - 2)
    poses = []
    for g, k, p in zip(grid, idx, new_pos):
        t0, t1 = stamps[k], stamps[k + 1]
        frac = (g - t0) / (t1 - t0)
        rot = _slerp(traj.poses[k].rotation, traj.poses[k + 1].rotation, frac)
        poses.append(Pose(p, rot))
    return Trajectory(grid, tuple(poses))
