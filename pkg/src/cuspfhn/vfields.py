"""Vector fields and coordinate charts for two repulsively coupled
FitzHugh-Nagumo cells.

The coupled cell pair is

    v1' = -v1^3 + 3 v1 - w1 + g (v2 - v1)
    v2' = -v2^3 + 3 v2 - w2 + g (v1 - v2)
    w1' = eps (v1 - c)
    w2' = eps (v2 - c)

with repulsive coupling ``g < 0`` and time-scale ratio ``eps``.  Everything
downstream (singularity geometry, small-oscillation counting, averaging)
is phrased in a handful of coordinate systems; this module owns all of
them as pure state-to-derivative maps and exact chart transitions.

State conventions (plain 1-D ndarrays; component order matters):

=====================  =======================================================
full                   ``(v1, v2, w1, w2)``
symmetric              ``(x, u, y, z)`` with ``x = (v1+v2)/2``,
                       ``u = (v1-v2)/2``, ``y = (w1+w2)/2 - w_s``,
                       ``z = (w1-w2)/2``
reduced (desing.)      ``(v1, v2)`` on the critical surface ``w = h(v)``
reduced (cusp chart)   ``(u, y)`` on the local sheet ``z = Q(u, y)``
entry chart            ``(r1, u1, z1, eps1)``: ``u = r1 u1``, ``y = -r1^2``,
                       ``z = r1^3 z1``, ``eps = r1^4 eps1``
scaling chart          ``(r2, u2, y2, z2)``: ``u = r2 u2``, ``y = r2^2 y2``,
                       ``z = r2^3 z2``, ``eps = r2^4``
=====================  =======================================================

The constant ``w_s = -v_s^3 + 3 v_s`` (with ``v_s = sqrt(1 - 2g/3)``) shifts
the symmetric slow variable so that the degenerate point of the critical
surface sits at the origin of the ``(u, y, z)`` coordinates.

Chart vector fields are exposed in desingularized form, i.e. after division
of the blown-up field by ``r^2``; only these rescaled flows are ever
integrated.  Higher-order remainders of the center-manifold reduction and
of the chart fields (formally ``O(r^2)`` terms with no closed form) are
truncated to zero throughout; the full four-dimensional cell pair serves as
ground truth for everything the truncated models predict.

All functions here are pure and reentrant; parameters and states are value
types that can be shared freely across threads or processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ChartDomainError

__all__ = [
    "Params",
    "rhs_full",
    "rhs_sym",
    "rhs_reduced_desing",
    "rhs_reduced_cm",
    "rhs_scaling",
    "rhs_entry",
    "rhs_lienard_fast",
    "rhs_weber",
    "to_sym",
    "from_sym",
    "swap_cells",
    "flip_antisym",
    "blowdown_entry",
    "blowdown_scaling",
    "chart_entry_to_scaling",
    "chart_scaling_to_entry",
    "equilibrium_full",
]


@dataclass(frozen=True)
class Params:
    """Model parameters.

    Parameters
    ----------
    g : float
        Coupling strength.  Cusped-singularity operations require ``g < 0``;
        that is checked at their call sites, not here.
    c : float
        Slow-nullcline parameter.
    eps : float
        Time-scale ratio, ``eps >= 0`` (``eps = 0`` is the singular limit).
    c2 : float or None
        Optional saddle-node offset.  When the near-degenerate regime is
        parametrized as ``c = v_s + sqrt(eps) * c2``, the offset is stored
        here as well so chart fields can use it directly.

    Notes
    -----
    ``v_s`` and ``w_s`` are derived quantities and are recomputed on every
    access; they can never go stale relative to ``g``.
    """

    g: float
    c: float = 0.0
    eps: float = 0.0
    c2: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.g):
            raise ValueError("coupling g must be finite")
        if not (self.eps >= 0.0):
            raise ValueError(f"eps must be >= 0, got {self.eps}")

    @property
    def v_s(self) -> float:
        """Fast-variable coordinate of the degenerate point, sqrt(1 - 2g/3)."""
        return math.sqrt(1.0 - 2.0 * self.g / 3.0)

    @property
    def w_s(self) -> float:
        """Slow-variable offset -v_s^3 + 3 v_s of the degenerate point."""
        v = self.v_s
        return -v * v * v + 3.0 * v

    @classmethod
    def from_c2(cls, g: float, eps: float, c2: float) -> "Params":
        """Build parameters in the saddle-node scaling c = v_s + sqrt(eps)*c2."""
        v_s = math.sqrt(1.0 - 2.0 * g / 3.0)
        return cls(g=g, c=v_s + math.sqrt(eps) * c2, eps=eps, c2=c2)

    def replace(self, **kw) -> "Params":
        d = {"g": self.g, "c": self.c, "eps": self.eps, "c2": self.c2}
        d.update(kw)
        return Params(**d)


def require_repulsive(p: Params, what: str = "this operation") -> None:
    """Raise unless the coupling is repulsive (g < 0)."""
    if not (p.g < 0.0):
        raise ValueError(f"{what} requires repulsive coupling g < 0, got g={p.g}")


# ----------------------------------------------------------------------
# full coordinates
# ----------------------------------------------------------------------

def rhs_full(s, p: Params):
    """Right-hand side of the coupled cell pair in (v1, v2, w1, w2)."""
    v1, v2, w1, w2 = s
    g = p.g
    return np.array((
        -v1 * v1 * v1 + 3.0 * v1 - w1 + g * (v2 - v1),
        -v2 * v2 * v2 + 3.0 * v2 - w2 + g * (v1 - v2),
        p.eps * (v1 - p.c),
        p.eps * (v2 - p.c),
    ))


def swap_cells(s):
    """Cell-exchange symmetry (v1, v2, w1, w2) -> (v2, v1, w2, w1)."""
    v1, v2, w1, w2 = s
    return np.array((v2, v1, w2, w1))


def equilibrium_full(p: Params):
    """The unique equilibrium (c, c, -c^3 + 3c, -c^3 + 3c)."""
    c = p.c
    w = -c * c * c + 3.0 * c
    return np.array((c, c, w, w))


# ----------------------------------------------------------------------
# symmetric coordinates
# ----------------------------------------------------------------------

def to_sym(s, p: Params):
    """Full (v1, v2, w1, w2) -> symmetric (x, u, y, z) coordinates."""
    v1, v2, w1, w2 = s
    return np.array((
        0.5 * (v1 + v2),
        0.5 * (v1 - v2),
        0.5 * (w1 + w2) - p.w_s,
        0.5 * (w1 - w2),
    ))


def from_sym(s, p: Params):
    """Symmetric (x, u, y, z) -> full (v1, v2, w1, w2) coordinates."""
    x, u, y, z = s
    wbar = y + p.w_s
    return np.array((x + u, x - u, wbar + z, wbar - z))


def flip_antisym(s):
    """The symmetry (u, z) -> (-u, -z) in (x, u, y, z) coordinates."""
    x, u, y, z = s
    return np.array((x, -u, y, -z))


def rhs_sym(s, p: Params):
    """Cell pair in symmetric coordinates.

        x' = -x^3 + 3x - (y + w_s) - 3 x u^2
        u' = -z - u^3 + 3 (v_s^2 - x^2) u
        y' = eps (x - c)
        z' = eps u

    Equivariant under (u, z) -> (-u, -z); the set u = z = 0 is invariant.
    Agrees with the pushforward of :func:`rhs_full` under :func:`to_sym`.
    """
    x, u, y, z = s
    v_s = p.v_s
    return np.array((
        -x * x * x + 3.0 * x - (y + p.w_s) - 3.0 * x * u * u,
        -z - u * u * u + 3.0 * (v_s * v_s - x * x) * u,
        p.eps * (x - p.c),
        p.eps * u,
    ))


# ----------------------------------------------------------------------
# reduced problems
# ----------------------------------------------------------------------

def rhs_reduced_desing(v, p: Params):
    """Desingularized reduced flow adj(Dh(v)) (v - (c, c)) on the critical
    surface, written over the fast variables ``v = (v1, v2)``.

    Time is reversed relative to the true slow flow on the saddle-type
    sheet (where det Dh < 0); equilibria off ``v = (c, c)`` with
    det Dh = 0 are the folded singularities.
    """
    v1, v2 = v
    g = p.g
    a11 = -3.0 * v2 * v2 - g + 3.0
    a22 = -3.0 * v1 * v1 - g + 3.0
    d1 = v1 - p.c
    d2 = v2 - p.c
    return np.array((a11 * d1 - g * d2, -g * d1 + a22 * d2))


def _q_parts(u, y, p: Params):
    """Truncated sheet function Q and its partials (shared helper)."""
    v_s = p.v_s
    k = 9.0 * v_s * v_s + p.g
    q = -(u / p.g) * (3.0 * v_s * y + k * u * u)
    q_u = -(3.0 * v_s * y + 3.0 * k * u * u) / p.g
    q_y = -3.0 * v_s * u / p.g
    return q, q_u, q_y


def rhs_reduced_cm(s, p: Params):
    """Desingularized slow flow on the local cusp sheet, in ``(u, y)``.

    Implements -A(u, y) (u, G(u, y)) with
    ``G = v_s - c + y/(2g) + 3 v_s u^2 / (2g)`` and
    ``A = [[1, -Q_y], [0, Q_u]]`` built from the truncated sheet function
    Q, then rescales time by the positive constant ``4 g^2`` so that the
    node at the origin has eigenvalues ``(-2g) lam1`` and ``(-2g) lam2``
    (the weak direction is the invariant line u = 0).  The rescaling
    leaves orbits unchanged.

    Intended for ``|u|, |y|`` within the truncation neighborhood
    (radius 0.5 by default convention); nothing is enforced.
    """
    u, y = s
    g = p.g
    v_s = p.v_s
    _, q_u, q_y = _q_parts(u, y, p)
    G = v_s - p.c + y / (2.0 * g) + 3.0 * v_s * u * u / (2.0 * g)
    scale = 4.0 * g * g
    return np.array((scale * (-u + q_y * G), scale * (-q_u * G)))


# ----------------------------------------------------------------------
# blowup charts
# ----------------------------------------------------------------------

def rhs_scaling(s, p: Params, saddle_node: bool = False):
    """Desingularized flow in the scaling chart ``(r2, u2, y2, z2)``.

    Fast part (both variants):

        u2' = -z2 - (1/g) (3 v_s y2 + (9 v_s^2 + g) u2^2) u2
        z2' = u2

    Slow part:

    * plain variant: ``y2' = v_s - c`` (leading order on the blowup
      sphere; no r2 correction kept),
    * saddle-node variant (requires ``p.c2``):
      ``y2' = r2^2 (-c2 + y2/(2g) + 3 v_s u2^2/(2g))``.

    ``r2' = 0`` always (r2 = eps^(1/4) is a parameter of the chart).
    """
    r2, u2, y2, z2 = s
    g = p.g
    v_s = p.v_s
    k = 9.0 * v_s * v_s + g
    du2 = -z2 - (3.0 * v_s * y2 + k * u2 * u2) * u2 / g
    if saddle_node:
        if p.c2 is None:
            raise ValueError("saddle-node variant needs Params.c2 set")
        dy2 = r2 * r2 * (-p.c2 + y2 / (2.0 * g) + 3.0 * v_s * u2 * u2 / (2.0 * g))
    else:
        dy2 = v_s - p.c
    return np.array((0.0, du2, dy2, u2))


def rhs_entry(s, p: Params):
    """Desingularized flow in the entry chart ``(r1, u1, z1, eps1)``.

    The common bracket ``B = v_s - c + r1^2 (-1/(2g) + 3 v_s u1^2/(2g))``
    drives the radial and eps1 directions:

        r1'   = -(1/2) r1 eps1 B
        u1'   = -z1 - (1/g)(-3 v_s + (9 v_s^2 + g) u1^2) u1 + (1/2) u1 eps1 B
        z1'   = eps1 (u1 + (3/2) z1 B)
        eps1' = 2 eps1^2 B

    ``r1^4 * eps1`` (the original eps) is an exact first integral of this
    truncated field.
    """
    r1, u1, z1, eps1 = s
    g = p.g
    v_s = p.v_s
    k = 9.0 * v_s * v_s + g
    B = v_s - p.c + r1 * r1 * (-1.0 + 3.0 * v_s * u1 * u1) / (2.0 * g)
    du1 = -z1 - (-3.0 * v_s + k * u1 * u1) * u1 / g + 0.5 * u1 * eps1 * B
    return np.array((
        -0.5 * r1 * eps1 * B,
        du1,
        eps1 * (u1 + 1.5 * z1 * B),
        2.0 * eps1 * eps1 * B,
    ))


def rhs_lienard_fast(s, y2: float, p: Params):
    """Fast Lienard subsystem in ``(u2, z2)`` with ``y2`` frozen.

        u2' = -z2 - (1/g) (3 v_s y2 + (9 v_s^2 + g) u2^2) u2
        z2' = u2

    For g < 0 and y2 < 0 this has a unique repelling limit cycle around
    the stable origin (van der Pol in backward time).
    """
    u2, z2 = s
    v_s = p.v_s
    k = 9.0 * v_s * v_s + p.g
    return np.array((
        -z2 - (3.0 * v_s * y2 + k * u2 * u2) * u2 / p.g,
        u2,
    ))


def lienard_divergence(u2: float, y2: float, p: Params) -> float:
    """Divergence of :func:`rhs_lienard_fast` (equals d u2'/d u2)."""
    v_s = p.v_s
    k = 9.0 * v_s * v_s + p.g
    return -(3.0 * v_s * y2 + 3.0 * k * u2 * u2) / p.g


def gamma2_jacobian(y2: float, p: Params):
    """Linearization of the fast Lienard subsystem around the axis point
    (u2, z2) = (0, 0): [[-3 v_s y2 / g, -1], [1, 0]]."""
    return np.array(((-3.0 * p.v_s * y2 / p.g, -1.0), (1.0, 0.0)))


def rhs_weber(s, Y: float, mu: float):
    """First-order form of U'' = Y U' - mu U, state ``s = (U, U')``."""
    U, Up = s
    return np.array((Up, Y * Up - mu * U))


# ----------------------------------------------------------------------
# chart transitions and blowdowns
# ----------------------------------------------------------------------

def blowdown_entry(s):
    """Entry chart (r1, u1, z1, eps1) -> (u, y, z, eps)."""
    r1, u1, z1, eps1 = s
    return np.array((r1 * u1, -r1 * r1, r1 ** 3 * z1, r1 ** 4 * eps1))


def blowdown_scaling(s):
    """Scaling chart (r2, u2, y2, z2) -> (u, y, z, eps)."""
    r2, u2, y2, z2 = s
    return np.array((r2 * u2, r2 * r2 * y2, r2 ** 3 * z2, r2 ** 4))


def chart_entry_to_scaling(s):
    """Entry chart -> scaling chart on the overlap (requires eps1 > 0).

        r2 = r1 eps1^(1/4),  u2 = u1 eps1^(-1/4),
        y2 = -eps1^(-1/2),   z2 = z1 eps1^(-3/4)
    """
    r1, u1, z1, eps1 = s
    if not eps1 > 0.0:
        raise ChartDomainError(
            f"entry->scaling transition needs eps1 > 0, got eps1={eps1}")
    q = eps1 ** 0.25
    return np.array((r1 * q, u1 / q, -1.0 / (q * q), z1 / q ** 3))


def chart_scaling_to_entry(s):
    """Scaling chart -> entry chart on the overlap (requires y2 < 0).

    Inverts :func:`chart_entry_to_scaling` via eps1 = y2^(-2).
    """
    r2, u2, y2, z2 = s
    if not y2 < 0.0:
        raise ChartDomainError(
            f"scaling->entry transition needs y2 < 0, got y2={y2}")
    root = math.sqrt(-y2)  # = eps1^(-1/4)
    return np.array((r2 * root, u2 / root, z2 / root ** 3, 1.0 / (y2 * y2)))
