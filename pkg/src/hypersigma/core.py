"""Deterministic quantities of the marginal model.

Coupling matrix A(u), the local observables beta and theta, the conjugated
matrix H_beta, three equivalent forms of the density rho, Newton inversion of
beta -> u, and the cartesian coordinate change (including the odd sector).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grassmann import GeneratorSet, GrassmannElement
from .graphs import Graph

__all__ = [
    "FieldConfig",
    "CartesianPoint",
    "build_A",
    "compute_beta",
    "compute_theta",
    "h_beta",
    "rho_density",
    "log_rho_density",
    "u_from_beta",
    "s_from_beta_theta",
    "spinor_det_sides",
    "to_cartesian",
    "s_cart",
    "InversionError",
]


class InversionError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True)
class FieldConfig:
    """A point (u, s) of the field space; the pinned components vanish."""

    u: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        s = np.asarray(self.s, dtype=float)
        if u.shape != s.shape:
            raise ValueError("u and s must have the same shape")
        if abs(u[-1]) > 0 or abs(s[-1]) > 0:
            raise ValueError("pinned components must vanish")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "s", s)


def build_A(g: Graph, u: np.ndarray) -> np.ndarray:
    """Weighted coupling matrix: off-diagonal -W_ij e^{u_i+u_j}, rows sum to 0."""
    eu = np.exp(np.asarray(u, dtype=float))
    a = -g.weights * np.outer(eu, eu)
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(a, -a.sum(axis=1))
    return a


def compute_beta(g: Graph, u: np.ndarray) -> np.ndarray:
    """beta_i = (1/2) sum_j W_ij e^{u_j - u_i}, restricted to the inner vertices."""
    u = np.asarray(u, dtype=float)
    eu = np.exp(u)
    return 0.5 * (g.weights @ eu / eu)[:-1]


def compute_theta(g: Graph, u: np.ndarray, s: np.ndarray) -> np.ndarray:
    """theta = e^{-u} A(u) s on inner vertices; equals sum_j W_ij e^{u_j}(s_i - s_j)."""
    u = np.asarray(u, dtype=float)
    s = np.asarray(s, dtype=float)
    a = build_A(g, u)
    return (np.exp(-u) * (a @ s))[:-1]


def h_beta(g: Graph, u: np.ndarray) -> np.ndarray:
    """H = e^{-u} A(u) e^{-u}: off-diagonal -W_ij, diagonal 2*beta_i."""
    u = np.asarray(u, dtype=float)
    emu = np.exp(-u)
    return emu[:, None] * build_A(g, u) * emu[None, :]


def _logdet_psd(m: np.ndarray) -> float:
    chol = np.linalg.cholesky(m)
    return 2.0 * np.log(np.diag(chol)).sum()


def log_rho_density(g: Graph, cfg: FieldConfig, mode: str = "direct") -> float:
    """log of the model density, in one of three equivalent representations."""
    u, s = cfg.u, cfg.s
    a = build_A(g, u)
    avv = a[:-1, :-1]
    logdet = _logdet_psd(avv)
    if mode == "direct":
        acc = 0.0
        for i, j, w in g.edges():
            acc -= w * (np.cosh(u[i] - u[j]) - 1.0 + 0.5 * (s[i] - s[j]) ** 2 * np.exp(u[i] + u[j]))
        return logdet + acc
    if mode == "quadratic":
        emu = np.exp(-u)
        return logdet - 0.5 * s @ a @ s - 0.5 * emu @ a @ emu
    if mode == "spinor":
        acc = 0.0
        for i, j, w in g.edges():
            vi = np.array([[np.exp(-u[i]), s[i]], [0.0, 1.0]])
            vj = np.array([[np.exp(-u[j]), s[j]], [0.0, 1.0]])
            mi = vi @ vi.T * np.exp(u[i])
            mj = vj @ vj.T * np.exp(u[j])
            acc += 0.5 * w * np.linalg.det(mi - mj)
        return logdet + acc
    raise ValueError(f"unknown mode {mode!r}")


def rho_density(g: Graph, cfg: FieldConfig, mode: str = "direct") -> float:
    """exp of log_rho_density; underflows to 0.0 for extreme fields."""
    logval = log_rho_density(g, cfg, mode)
    if logval < -745.0:  # exp underflow threshold for float64
        return 0.0
    return float(np.exp(logval))


def u_from_beta(
    g: Graph,
    beta: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> np.ndarray:
    """Invert compute_beta by damped Newton iteration started at u = 0.

    Raises InversionError (carrying the final residual) when the residual does
    not fall below `tol` in max-norm within `max_iter` iterations.
    """
    beta = np.asarray(beta, dtype=float)
    n = g.n_inner
    u = np.zeros(n + 1)
    res = compute_beta(g, u) - beta
    for _ in range(max_iter):
        if np.abs(res).max() <= tol:
            return u
        eu = np.exp(u)
        # d beta_i / d u_j over inner vertices
        jac = 0.5 * g.weights[:-1, :-1] * np.outer(1.0 / eu[:-1], eu[:-1])
        np.fill_diagonal(jac, -compute_beta(g, u))
        try:
            step = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError:
            raise InversionError("singular Jacobian", residual=np.abs(res).max())
        # damped step: halve until the residual decreases
        norm0 = np.abs(res).max()
        lam = 1.0
        for _ in range(40):
            trial = u.copy()
            trial[:-1] = u[:-1] - lam * step
            new_res = compute_beta(g, trial) - beta
            if np.abs(new_res).max() < norm0:
                u, res = trial, new_res
                break
            lam *= 0.5
        else:
            raise InversionError("line search failed", residual=norm0)
    if np.abs(res).max() <= tol:
        return u
    raise InversionError("Newton iteration did not converge", residual=np.abs(res).max())


def s_from_beta_theta(g: Graph, beta: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Recover s with pinned component 0 from (beta, theta) via the u inversion."""
    u = u_from_beta(g, beta)
    avv = build_A(g, u)[:-1, :-1]
    s = np.zeros(g.n_total)
    s[:-1] = np.linalg.solve(avv, np.exp(u[:-1]) * np.asarray(theta, dtype=float))
    return s


def spinor_det_sides(vi, vj):
    """Both sides of the 2x2 determinant identity for group points [a, b].

    A point v = [a, b] with a > 0 is the matrix [[a, b], [0, 1]].  Returns
    (det(v_i v_i^t / a_i - v_j v_j^t / a_j),
     2 - ||v_i^t eps v_j||_F^2 / (a_i a_j)) with eps = [[0, -1], [1, 0]].
    """
    ai, bi = vi
    aj, bj = vj
    mi = np.array([[ai, bi], [0.0, 1.0]])
    mj = np.array([[aj, bj], [0.0, 1.0]])
    lhs = np.linalg.det(mi @ mi.T / ai - mj @ mj.T / aj)
    eps = np.array([[0.0, -1.0], [1.0, 0.0]])
    cross = mi.T @ eps @ mj
    rhs = 2.0 - (cross**2).sum() / (ai * aj)
    return float(lhs), float(rhs)


@dataclass(frozen=True)
class CartesianPoint:
    """Cartesian coordinates (x, y, z, xi, eta).

    y is a real vector; xi/eta are odd elements; x and z are even elements
    (x acquires a nilpotent part from the odd sector) obeying the constraint
    z_i^2 = 1 + x_i^2 + y_i^2 + 2 xi_i eta_i, with z = 1, x = y = 0 at the
    pinned vertex.
    """

    x: tuple  # even GrassmannElements
    y: np.ndarray
    z: tuple  # even GrassmannElements
    xi: tuple  # odd GrassmannElements
    eta: tuple

    @property
    def x_body(self) -> np.ndarray:
        return np.array([xe.body for xe in self.x])


def to_cartesian(cfg: FieldConfig, psibar=None, psi=None, algebra: GeneratorSet | None = None) -> CartesianPoint:
    """Map horospherical coordinates (and odd partners) to cartesian ones.

    psibar/psi are sequences of odd GrassmannElements per vertex (pinned entry
    zero); omitted they default to 0 over a trivial algebra.
    """
    u, s = cfg.u, cfg.s
    n = len(u)
    if algebra is None:
        algebra = GeneratorSet([])
    zero = algebra.zero()
    if psibar is None:
        psibar = [zero] * n
    if psi is None:
        psi = [zero] * n
    eu = np.exp(u)
    y = s * eu
    x = []
    z = []
    xi = []
    eta = []
    for i in range(n):
        pp = psibar[i] * psi[i]
        x_i = algebra.scalar(np.sinh(u[i]) - 0.5 * s[i] ** 2 * eu[i]) - pp * eu[i]
        z_i = algebra.scalar(np.cosh(u[i]) + 0.5 * s[i] ** 2 * eu[i]) + pp * eu[i]
        x.append(x_i)
        z.append(z_i)
        xi.append(psibar[i] * eu[i])
        eta.append(psi[i] * eu[i])
    return CartesianPoint(x=tuple(x), y=y, z=tuple(z), xi=tuple(xi), eta=tuple(eta))


def s_cart(g: Graph, p: CartesianPoint) -> GrassmannElement:
    """Edge action in cartesian coordinates, as an even element.

    With vanishing odd part its body equals
    -sum_edges W [cosh(u_i-u_j) - 1 + (1/2)(s_i-s_j)^2 e^{u_i+u_j}].
    """
    algebra = p.z[0].algebra
    y = p.y
    total = algebra.zero()
    for i, j, w in g.edges():
        term = (
            algebra.scalar(-1.0 - y[i] * y[j])
            - p.x[i] * p.x[j]
            + p.z[i] * p.z[j]
            - p.xi[i] * p.eta[j]
            + p.eta[i] * p.xi[j]
        )
        total = total - term * w
    return total
