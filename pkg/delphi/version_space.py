"""Version space of admissible parameters and its optimistic program.

The version space is the ball ``‖θ‖ ≤ B`` cut by slabs
``|⟨Δ̃ᵢ, 1 ⊕ θ⟩| ≤ τᵢ``. Points of the slabs nearest to a target are
exact least-distance solutions from non-negative least squares; the ball is
handled by bisection on a scalar that scales the target.
"""

__all__ = [
    "Constraint",
    "Membership",
    "OptimisticSolution",
    "VersionSpace",
    "optimistic_argmax",
    "project",
]

import pickle
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import nnls

from delphi.errors import (
    EmptyVersionSpace,
    InvalidArgument,
    IterationOverflow,
    SolverStall,
)
from delphi.logger import get_logger
from delphi.measure import TDVector
from delphi.util import abbr_str, as_vector

MEMBER_SLACK = 1e-9
FEASIBLE_TOL = 1e-6
BISECT_TOL = 1e-12
MAX_ITER = 10_000
NNLS_ITER = 30
INFEASIBLE_TOL = 1e-14
DEGENERATE_NORM = 1e-12
UNBOUNDED_SCALE = 1e6

logger = get_logger("version_space")


@dataclass(frozen=True)
class Constraint:
    """Slab ``|⟨Δ̃, 1 ⊕ θ⟩| ≤ τ`` with where and when it was added."""

    td: TDVector
    tau: float
    origin: str = None
    iteration: int = None

    def residual(self, theta):
        return self.td.residual(theta)

    def to_dict(self):
        return {"delta": self.td.values.tolist(), "n": self.td.n,
                "tag": self.td.tag, "tau": self.tau,
                "origin": self.origin, "iteration": self.iteration}

    @classmethod
    def from_dict(cls, doc):
        td = TDVector(np.asarray(doc["delta"], dtype=float),
                      int(doc.get("n", 0)), doc.get("tag", "refined"))
        return cls(td, float(doc["tau"]), doc.get("origin"),
                   doc.get("iteration"))


class Membership(NamedTuple):
    """Result of a membership test; truthy when θ is admissible."""

    ok: bool
    ball: float
    slabs: np.ndarray

    def __bool__(self):
        return self.ok

    @property
    def worst(self):
        """Largest violation over the ball and all slabs."""
        return max([self.ball] + list(self.slabs))


class OptimisticSolution(NamedTuple):
    """Maximizer of ``c·θ`` over the version space."""

    theta: np.ndarray
    value: float
    residual: float
    iterations: int


class VersionSpace:
    """Immutable ball ∩ slabs; ``add_constraint`` returns a new snapshot.

    Parameters
    ----------
    B : float
        Radius of the parameter ball.
    d : int
        Parameter dimension.
    constraints : sequence of Constraint, optional
        Slabs, in the order they were added.
    max_constraints : int, optional
        Bound on the number of slabs, usually ``E_d + 1``.

    """

    def __init__(self, B, d, constraints=(), max_constraints=None):
        if B <= 0:
            raise InvalidArgument(f"B must be positive; found {B}")
        self.B = float(B)
        self.d = int(d)
        self.constraints = tuple(constraints)
        self.max_constraints = max_constraints
        for con in self.constraints:
            as_vector(con.td.values, self.d + 1, "TD vector")

    def __repr__(self):
        cap = "" if self.max_constraints is None else \
            f" of {self.max_constraints}"
        return (f"<{self.__class__.__name__}: B={self.B:g}, d={self.d}, "
                f"{len(self)}{cap} constraints />")

    def __len__(self):
        return len(self.constraints)

    def __eq__(self, other):
        if not isinstance(other, VersionSpace):
            return False
        return (self.B == other.B and self.d == other.d
                and self.max_constraints == other.max_constraints
                and [c.to_dict() for c in self.constraints]
                == [c.to_dict() for c in other.constraints])

    def __getstate__(self):
        return {"class": self.__class__.__name__, **self.to_dict()}

    def __setstate__(self, state):
        if state.get("class") != self.__class__.__name__:
            raise ValueError("expected state class {!r}; found {!r}"
                             .format(self.__class__.__name__,
                                     state.get("class")))
        other = self.from_dict(state)
        self.__dict__.update(other.__dict__)

    def to_pickle(self, path, protocol=pickle.HIGHEST_PROTOCOL):
        """Pickle (serialize) object to file."""
        with open(path, "wb") as f:
            pickle.dump(self, f, protocol=protocol)

    @classmethod
    def from_pickle(cls, path):
        """Read a pickled format from a file."""
        with open(path, "rb") as f:
            return pickle.load(f)

    def to_dict(self):
        return {"B": self.B, "d": self.d,
                "max_constraints": self.max_constraints,
                "constraints": [c.to_dict() for c in self.constraints]}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["B"], doc["d"],
                   [Constraint.from_dict(c) for c in doc["constraints"]],
                   doc.get("max_constraints"))

    def add_constraint(self, td, tau, origin=None, iteration=None):
        """Return a new space with the slab ``|⟨td, 1 ⊕ θ⟩| ≤ tau`` added."""
        if not tau > 0:
            raise InvalidArgument(f"tau must be positive; found {tau}")
        as_vector(td.values, self.d + 1, "TD vector")
        if self.max_constraints is not None and \
                len(self) >= self.max_constraints:
            raise IterationOverflow(
                f"version space already holds {len(self)} constraints, "
                f"the bound is {self.max_constraints}")
        con = Constraint(td, float(tau),
                         None if origin is None else str(origin), iteration)
        return self.__class__(self.B, self.d, self.constraints + (con,),
                              self.max_constraints)

    def violations(self, theta):
        """Return (ball violation, slab violations), clipped at zero."""
        theta = as_vector(theta, self.d, "theta")
        ball = max(float(np.linalg.norm(theta)) - self.B, 0.0)
        slabs = np.array([max(abs(c.residual(theta)) - c.tau, 0.0)
                          for c in self.constraints])
        return ball, slabs

    def contains(self, theta, slack=MEMBER_SLACK):
        """Test membership of ``theta`` within ``slack``.

        Examples
        --------
        >>> space = VersionSpace(1.0, 2)
        >>> bool(space.contains([0.6, 0.8]))
        True
        >>> round(space.contains([1.1, 0.0]).ball, 9)
        0.1
        """
        ball, slabs = self.violations(theta)
        ok = ball <= slack and bool((slabs <= slack).all())
        return Membership(ok, ball, slabs)

    def optimistic_argmax(self, c, **kwargs):
        """See :func:`optimistic_argmax`."""
        return optimistic_argmax(self, c, **kwargs)

    def _slab_bounds(self):
        """Return (U, lo, hi) with slabs written as ``lo ≤ U θ ≤ hi``."""
        if not self.constraints:
            return np.zeros((0, self.d)), np.zeros(0), np.zeros(0)
        W = np.array([c.td.values for c in self.constraints])
        tau = np.array([c.tau for c in self.constraints])
        return W[:, 1:], -tau - W[:, 0], tau - W[:, 0]


def _polyhedron(space):
    """Return ``(G, h)`` with the slabs written as ``G θ ≥ h``.

    Rows are scaled to unit length. Slabs with a zero feature part are
    dropped after checking that their constant part is within τ.
    """
    U, lo, hi = space._slab_bounds()
    norms = np.linalg.norm(U, axis=1)
    degenerate = norms <= DEGENERATE_NORM
    excess = np.where(degenerate, np.maximum(np.maximum(lo, -hi), 0.0), 0.0)
    if (excess > MEMBER_SLACK).any():
        bad = np.flatnonzero(excess > MEMBER_SLACK)
        raise EmptyVersionSpace(
            f"constraints {bad.tolist()} exclude every parameter",
            np.concatenate(([0.0], excess)))
    keep = ~degenerate
    rows = U[keep] / norms[keep, None]
    G = np.vstack((rows, -rows))
    h = np.concatenate((lo[keep] / norms[keep], -hi[keep] / norms[keep]))
    return G, h


def _nearest(G, h, p):
    """Return the point of ``{θ : G θ ≥ h}`` nearest to ``p``.

    Least-distance programming: with the gap ``g = (h − G p)/σ`` scaled by
    its largest entry, ``E = [Gᵀ; gᵀ]`` and ``f = e_{n+1}``, the
    non-negative least-squares residual ``r = E u − f`` gives the step
    ``−σ r[:n] / r[n]``. A vanishing ``r[n]`` certifies that the slabs share
    no point, and None is returned.
    """
    if len(G) == 0:
        return p.copy()
    n = G.shape[1]
    gap = h - G @ p
    scale = max(1.0, float(gap.max()))
    E = np.vstack((G.T, gap[None, :] / scale))
    f = np.zeros(n + 1)
    f[-1] = 1.0
    u, _ = nnls(E, f, maxiter=NNLS_ITER * E.shape[1])
    r = E @ u - f
    if -r[-1] <= INFEASIBLE_TOL:
        return None
    theta = p - scale * r[:n] / r[-1]
    if (G @ theta - h).min() < -FEASIBLE_TOL * scale:
        return None
    return theta


def _disjoint(space):
    _, slabs = space.violations(np.zeros(space.d))
    return EmptyVersionSpace(
        "version space is empty: the slabs share no point",
        np.concatenate(([0.0], slabs)))


def project(space, x, tol=BISECT_TOL, max_iter=MAX_ITER):
    """Project ``x`` onto ``space``.

    The projection is the point of the slabs nearest to ``s·x`` for the
    largest ``s ∈ [0, 1]`` that keeps it inside the ball; ``s`` is found by
    bisection and each trial point is exact.

    Returns
    -------
    y : numpy.ndarray
        The projection, inside the ball.
    solves : int
        Number of least-distance solves.
    converged : bool
        Whether the bisection bracket closed to ``tol`` relative to its
        upper end.

    Raises
    ------
    EmptyVersionSpace
        If the slabs share no point or the nearest one lies outside the
        ball.

    """
    x = as_vector(x, space.d, "point")
    G, h = _polyhedron(space)
    if len(G) == 0:
        norm = np.linalg.norm(x)
        return (x if norm <= space.B else x * (space.B / norm)), 0, True
    y = _nearest(G, h, x)
    if y is None:
        raise _disjoint(space)
    if np.linalg.norm(y) <= space.B:
        return y, 1, True
    best = _nearest(G, h, np.zeros(space.d))
    _check_ball(space, best)
    lo, hi, solves = 0.0, 1.0, 2
    while hi - lo > tol * hi and solves < max_iter:
        s = 0.5 * (lo + hi)
        y = _nearest(G, h, s * x)
        solves += 1
        if np.linalg.norm(y) <= space.B:
            lo, best = s, y
        else:
            hi = s
    return best, solves, hi - lo <= tol * hi


def _check_ball(space, point):
    norm = float(np.linalg.norm(point))
    if norm > space.B + FEASIBLE_TOL:
        ball, slabs = space.violations(point)
        logger.error("nearest point of the slabs has norm %.6g; slabs %s",
                     norm, abbr_str(slabs, 8))
        raise EmptyVersionSpace(
            f"version space is empty: the nearest point of the slabs has "
            f"norm {norm:.6g} > B = {space.B:g}",
            np.concatenate(([ball], slabs)))


def optimistic_argmax(space, c, tol=BISECT_TOL, max_iter=MAX_ITER):
    """Maximize ``c·θ`` over the version space.

    For ``s ≥ 0`` let ``θ(s)`` be the point of the slabs nearest to ``s·c``;
    it maximizes ``c·θ − ‖θ‖²/(2s)`` over the slabs, and its norm and
    objective grow with ``s``. The maximizer is ``θ(s*)`` for the ``s*``
    where the norm reaches B, found by doubling then bisection. If the
    norm stays within B up to ``s = 10⁶·max(B, 1)/‖c‖`` the slabs bound
    the objective and that point is returned. ``θ(0)`` is the minimum-norm
    point, which is also the answer for ``c = 0``.

    Parameters
    ----------
    space : VersionSpace
        Feasible set.
    c : array_like
        Objective direction, length ``d``.
    tol : float, optional
        Relative width at which the bisection bracket counts as closed.
    max_iter : int, optional
        Cap on least-distance solves.

    Returns
    -------
    OptimisticSolution

    Raises
    ------
    EmptyVersionSpace
        If the slabs share no point, or their minimum-norm point lies
        outside the ball; both are certificates of emptiness.
    SolverStall
        If the bracket does not close within ``max_iter`` solves; ``best``
        holds the best feasible point found.

    Examples
    --------
    >>> sol = optimistic_argmax(VersionSpace(1.0, 2), [1.0, 0.0])
    >>> round(sol.value, 6)
    1.0
    """
    c = as_vector(c, space.d, "objective")
    cnorm = float(np.linalg.norm(c))
    G, h = _polyhedron(space)

    def solution(theta, solves):
        ball, slabs = space.violations(theta)
        worst = max([ball] + list(slabs))
        return OptimisticSolution(theta, float(c @ theta), worst, solves)

    if len(G) == 0:
        theta = np.zeros(space.d) if cnorm == 0.0 else c * (space.B / cnorm)
        return solution(theta, 0)
    best = _nearest(G, h, np.zeros(space.d))
    if best is None:
        raise _disjoint(space)
    _check_ball(space, best)
    solves = 1
    if cnorm == 0.0:
        return solution(best, solves)
    s_cap = UNBOUNDED_SCALE * max(space.B, 1.0) / cnorm
    lo, hi = 0.0, None

    def nearest(s):
        try:
            return _nearest(G, h, s * c)
        except RuntimeError as err:
            raise SolverStall(f"least-distance solve failed: {err}",
                              solution(best, solves)) from err

    s = space.B / cnorm
    while solves < max_iter:
        point = nearest(s)
        solves += 1
        if np.linalg.norm(point) > space.B:
            hi = s
            break
        lo, best = s, point
        if s >= s_cap:
            break
        s = min(2.0 * s, s_cap)
    while hi is not None and hi - lo > tol * hi and solves < max_iter:
        s = 0.5 * (lo + hi)
        point = nearest(s)
        solves += 1
        if np.linalg.norm(point) <= space.B:
            lo, best = s, point
        else:
            hi = s
    sol = solution(best, solves)
    settled = (hi - lo <= tol * hi) if hi is not None else lo >= s_cap
    if not settled:
        raise SolverStall(
            f"optimistic program did not settle after {solves} solves", sol)
    logger.debug("optimistic value %.6g after %d solves", sol.value, solves)
    return sol
