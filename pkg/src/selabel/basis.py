"""Orthonormal shifted-Legendre bases on [0, 1] and sieve least squares.

Univariate bases of order q have dimension q + 1; bivariate tensor bases have
dimension (q + 1)**2 with row-major (s, t) layout. Inputs outside [0, 1] are
clamped so estimated indices that drift out of range stay evaluable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from selabel.errors import SingularBasisError

DEFAULT_RIDGE = 1e-10
AIC_VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class AffineMap:
    """Affine rescale of raw index values onto [0, 1], with clamping."""

    lo: float
    hi: float

    @classmethod
    def from_samples(cls, values) -> "AffineMap":
        values = np.asarray(values, dtype=float)
        return cls(lo=float(values.min()), hi=float(values.max()))

    def apply(self, values):
        values = np.asarray(values, dtype=float)
        span = self.hi - self.lo
        if span <= 0.0:
            return np.full_like(values, 0.5)
        return np.clip((values - self.lo) / span, 0.0, 1.0)


@dataclass(frozen=True)
class SieveBasis:
    """Basis descriptor: ``univariate`` has q+1 functions, ``tensor`` (q+1)**2."""

    order: int
    kind: str = "univariate"

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("basis order must be nonnegative")
        if self.kind not in ("univariate", "tensor"):
            raise ValueError(f"unknown basis kind {self.kind!r}")

    @property
    def dimension(self) -> int:
        q1 = self.order + 1
        return q1 * q1 if self.kind == "tensor" else q1


@dataclass(frozen=True)
class SieveCoefficients:
    """Fitted sieve coefficients, with the rescale maps used at fit time.

    ``u_map`` (and ``v_map`` for tensor bases) record the affine rescale that
    was applied to raw index values before basis evaluation, so evaluation at
    new points reuses the same map.
    """

    values: np.ndarray
    basis: SieveBasis
    u_map: AffineMap | None = None
    v_map: AffineMap | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.basis.dimension,):
            raise ValueError(
                f"coefficient length {values.shape} does not match basis "
                f"dimension {self.basis.dimension}"
            )
        object.__setattr__(self, "values", values)

    def evaluate(self, u, v=None) -> np.ndarray:
        """Evaluate the fitted sieve function at raw index values."""
        if self.basis.kind == "univariate":
            uu = self.u_map.apply(u) if self.u_map is not None else u
            return legendre_univariate(uu, self.basis.order) @ self.values
        if v is None:
            raise ValueError("tensor basis evaluation needs both coordinates")
        uu = self.u_map.apply(u) if self.u_map is not None else u
        vv = self.v_map.apply(v) if self.v_map is not None else v
        return tensor_bivariate(uu, vv, self.basis.order) @ self.values


def legendre_univariate(u, q: int) -> np.ndarray:
    """Orthonormal shifted Legendre values; returns shape (*u.shape, q+1).

    Entry j is sqrt(2j+1) * P_j(2u - 1), normalized so that the functions are
    orthonormal in L2[0, 1]. Inputs are clamped to [0, 1].
    """
    if q < 0:
        raise ValueError("order must be nonnegative")
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    x = 2.0 * u - 1.0
    out = np.empty(u.shape + (q + 1,), dtype=float)
    p_prev = np.ones_like(x)
    out[..., 0] = 1.0
    if q >= 1:
        p_cur = x
        out[..., 1] = np.sqrt(3.0) * p_cur
        for j in range(2, q + 1):
            p_next = ((2 * j - 1) * x * p_cur - (j - 1) * p_prev) / j
            out[..., j] = np.sqrt(2 * j + 1.0) * p_next
            p_prev, p_cur = p_cur, p_next
    return out


def tensor_bivariate(u, v, q: int) -> np.ndarray:
    """Tensor-product basis; flat entry s*(q+1)+t equals P~_s(u) * P~_t(v)."""
    pu = legendre_univariate(u, q)
    pv = legendre_univariate(v, q)
    prod = pu[..., :, None] * pv[..., None, :]
    return prod.reshape(prod.shape[:-2] + ((q + 1) ** 2,))


def tensor_flat_index(s: int, t: int, q: int) -> int:
    """Row-major position of the (s, t) tensor term."""
    return s * (q + 1) + t


def tensor_pair_from_flat(idx: int, q: int) -> tuple[int, int]:
    return divmod(idx, q + 1)


def sieve_ols_fit(
    rows: np.ndarray,
    responses: np.ndarray,
    mask=None,
    ridge: float = DEFAULT_RIDGE,
    basis: SieveBasis | None = None,
    u_map: AffineMap | None = None,
    v_map: AffineMap | None = None,
) -> SieveCoefficients:
    """Masked (optionally ridge-regularized) least squares on basis rows.

    Minimizes sum_i mask_i (responses_i - rows_i @ pi)**2 + ridge * ||pi||**2.
    With ridge = 0 the normal equations are solved exactly; a singular Gram
    matrix then raises SingularBasisError naming the deficient column.
    """
    rows = np.asarray(rows, dtype=float)
    responses = np.asarray(responses, dtype=float)
    if rows.ndim != 2 or rows.shape[0] != responses.shape[0]:
        raise ValueError("rows and responses must conform")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise ValueError("at least one observation must be masked in")
        rows = rows[mask]
        responses = responses[mask]

    gram = rows.T @ rows
    moment = rows.T @ responses
    dim = gram.shape[0]
    if ridge > 0:
        gram = gram + ridge * np.eye(dim)
        values = np.linalg.solve(gram, moment)
    else:
        try:
            values = np.linalg.solve(gram, moment)
        except np.linalg.LinAlgError:
            values = None
        if values is None or not np.isfinite(values).all():
            eigvals, eigvecs = np.linalg.eigh(gram)
            null = eigvecs[:, 0]
            deficient = int(np.argmax(np.abs(null)))
            raise SingularBasisError(
                f"sieve Gram matrix is singular (column {deficient} is in a "
                "deficient direction) and ridge is zero",
                deficient_dimension=deficient,
            )
    if basis is None:
        basis = _infer_basis(dim)
    return SieveCoefficients(values=values, basis=basis, u_map=u_map, v_map=v_map)


def _infer_basis(dim: int) -> SieveBasis:
    root = int(round(np.sqrt(dim)))
    if root * root == dim and dim > 1:
        return SieveBasis(order=root - 1, kind="tensor")
    return SieveBasis(order=dim - 1, kind="univariate")


def select_order_aic(
    responses: np.ndarray,
    fitter,
    candidates,
    effective_n: int,
    mask=None,
) -> int:
    """Pick the basis order minimizing log(sigma2_q) + 2q / effective_n.

    ``fitter(q)`` returns fitted values aligned with ``responses``; sigma2_q is
    the mean squared residual over masked-in rows, floored to avoid -inf. Ties
    break toward the smaller order; failing candidates are skipped with a
    warning.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidates must be nonempty")
    if effective_n < 1:
        raise ValueError("effective_n must be at least 1")
    responses = np.asarray(responses, dtype=float)
    mask = np.ones(responses.shape[0], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)

    best_q = None
    best_crit = np.inf
    for q in sorted(candidates):
        try:
            fitted = np.asarray(fitter(q), dtype=float)
            resid = responses[mask] - fitted[mask]
            sigma2 = float(np.mean(resid**2))
        except Exception as exc:  # noqa: BLE001 - per contract, skip and warn
            warnings.warn(f"order candidate q={q} failed: {exc}", stacklevel=2)
            continue
        crit = np.log(max(sigma2, AIC_VARIANCE_FLOOR)) + 2.0 * q / effective_n
        if crit < best_crit:
            best_crit = crit
            best_q = q
    if best_q is None:
        raise RuntimeError("all order candidates failed")
    return best_q
