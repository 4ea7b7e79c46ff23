"""Reversible polynomial coupling transformations over random feature partitions.

A transformation splits the (even-dimensional) feature space into two
random halves p1 and p2 and perturbs each half additively by a random
polynomial of the other:

    y2 = x_p2 + F(x_p1)
    y1 = x_p1 + G(y2)

Because each output half depends only on values the inverse already has,
the map is invertible in closed form: x_p1 = y1 - G(y2), then
x_p2 = y2 - F(x_p1).  F maps are built from the Chebyshev basis and G
maps from the Legendre basis so the two roles stay distinct.  Each
per-feature map is a polynomial with `chain_length` drawn terms summed
together; output slots keep the input layout (y1 in the p1 positions,
y2 in the p2 positions).
"""

from dataclasses import dataclass

import numpy as np

from .basis import (
    CHEBYSHEV,
    LEGENDRE,
    PolyTerm,
    eval_chebyshev,
    eval_legendre,
    nonconstant_degrees,
)
from .errors import TransformOverflowError
from .validation import as_float_vector


@dataclass(frozen=True)
class TransformationSpec:
    """One reversible transformation: partition plus per-feature polynomials."""

    id: int
    p1: tuple
    p2: tuple
    f_chains: tuple  # one tuple of PolyTerm per p1 feature (Chebyshev)
    g_chains: tuple  # one tuple of PolyTerm per p2 feature (Legendre)
    chain_length: int

    @property
    def dim(self):
        return len(self.p1) + len(self.p2)


def _draw_chain(rng, basis, degrees, chain_length, h):
    # Degrees below h would be amplified by the divide factor 10^(degree-h);
    # folding the counter-scale into the coefficient keeps every term's
    # effective magnitude within the drawn [0.05, 1) range, which bounds the
    # coupled outputs and preserves the 1e-8 round-trip budget.
    terms = []
    for _ in range(chain_length):
        degree = int(degrees[rng.integers(len(degrees))])
        magnitude = rng.uniform(0.05, 1.0)
        sign = -1.0 if rng.random() < 0.5 else 1.0
        coefficient = sign * magnitude * 10.0 ** min(0, degree - h)
        terms.append(PolyTerm(basis, degree, coefficient, degree - h))
    return tuple(terms)


def generate_spec(rng, dim, max_degree=10, chain_length=2, h=2, spec_id=0):
    """Draw a random transformation over an even-dimensional feature space.

    Parameters
    ----------
    rng : numpy.random.Generator
        Consumed sequentially; a fixed generator state yields a fixed spec.
    dim : int
        Padded feature count; must be even (pad first if necessary).
    max_degree : int
        Upper bound for drawn term degrees (only non-constant basis
        elements, i.e. odd degrees, are eligible).
    chain_length : int
        Number of terms summed in each per-feature polynomial.
    h : int
        Divide-factor pivot; each term is scaled by 10^-(degree - h).
    """
    if dim < 2 or dim % 2 != 0:
        raise ValueError(f"dim must be a positive even integer, got {dim}")
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    if chain_length < 1:
        raise ValueError("chain_length must be >= 1")
    half = dim // 2
    perm = rng.permutation(dim)
    p1 = tuple(sorted(int(i) for i in perm[:half]))
    p2 = tuple(sorted(int(i) for i in perm[half:]))
    cheb_degrees = nonconstant_degrees(CHEBYSHEV, max_degree)
    leg_degrees = nonconstant_degrees(LEGENDRE, max_degree)
    f_chains = tuple(
        _draw_chain(rng, CHEBYSHEV, cheb_degrees, chain_length, h) for _ in range(half)
    )
    g_chains = tuple(
        _draw_chain(rng, LEGENDRE, leg_degrees, chain_length, h) for _ in range(half)
    )
    return TransformationSpec(int(spec_id), p1, p2, f_chains, g_chains, chain_length)


def _chain_values(chain, x):
    """Sum of the chain's terms on an input column; finiteness checked by caller."""
    out = np.zeros_like(x)
    for term in chain:
        if term.basis == CHEBYSHEV:
            base = eval_chebyshev(term.degree, x)
        else:
            base = eval_legendre(term.degree, x)
        out += term.coefficient * base * 10.0 ** (-term.divide_exponent)
    return out


def _raise_overflow(values, spec, features, rows_are_batch):
    bad_row, bad_col = np.argwhere(~np.isfinite(values))[0]
    feature = features[bad_col]
    row = int(bad_row) if rows_are_batch else None
    where = f"row {row}, " if rows_are_batch else ""
    raise TransformOverflowError(
        f"transformation {spec.id} overflowed at {where}feature {feature}",
        spec_id=spec.id,
        feature=int(feature),
        row=row,
    )


def _coupled_halves(spec, xp1, xp2):
    with np.errstate(over="ignore", invalid="ignore"):
        f_vals = np.column_stack(
            [_chain_values(spec.f_chains[i], xp1[:, i]) for i in range(xp1.shape[1])]
        )
        y2 = xp2 + f_vals
        g_vals = np.column_stack(
            [_chain_values(spec.g_chains[i], y2[:, i]) for i in range(y2.shape[1])]
        )
        y1 = xp1 + g_vals
    return y1, y2


def forward_batch(spec, xs):
    """Apply the transformation row-wise; any non-finite row aborts the batch."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2:
        raise ValueError(f"xs must be 2-dimensional, got shape {xs.shape}")
    if xs.shape[0] == 0:
        return xs.copy()
    if xs.shape[1] != spec.dim:
        raise ValueError(f"expected {spec.dim} columns, got {xs.shape[1]}")
    p1 = list(spec.p1)
    p2 = list(spec.p2)
    y1, y2 = _coupled_halves(spec, xs[:, p1], xs[:, p2])
    if not np.all(np.isfinite(y2)):
        _raise_overflow(y2, spec, spec.p2, rows_are_batch=True)
    if not np.all(np.isfinite(y1)):
        _raise_overflow(y1, spec, spec.p1, rows_are_batch=True)
    out = np.empty_like(xs)
    out[:, p1] = y1
    out[:, p2] = y2
    return out


def forward_batch_masked(spec, xs):
    """Row-tolerant variant: returns (outputs, ok_mask) instead of raising.

    Rows whose transformed values are non-finite are zeroed and reported
    False in the mask; used at inference time where an overflowing row is
    an anomaly signal rather than an error.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2:
        raise ValueError(f"xs must be 2-dimensional, got shape {xs.shape}")
    if xs.shape[0] == 0:
        return xs.copy(), np.ones(0, dtype=bool)
    if xs.shape[1] != spec.dim:
        raise ValueError(f"expected {spec.dim} columns, got {xs.shape[1]}")
    p1 = list(spec.p1)
    p2 = list(spec.p2)
    y1, y2 = _coupled_halves(spec, xs[:, p1], xs[:, p2])
    ok = np.all(np.isfinite(y1), axis=1) & np.all(np.isfinite(y2), axis=1)
    out = np.empty_like(xs)
    out[:, p1] = y1
    out[:, p2] = y2
    out[~ok] = 0.0
    return out, ok


def forward(spec, x):
    """Transform a single sample; see the module docstring for the map."""
    x = as_float_vector(x)
    return forward_batch(spec, x[None, :])[0]


def invert_batch(spec, ys):
    """Undo forward_batch: x_p1 = y1 - G(y2), then x_p2 = y2 - F(x_p1)."""
    ys = np.asarray(ys, dtype=float)
    if ys.ndim != 2:
        raise ValueError(f"ys must be 2-dimensional, got shape {ys.shape}")
    if ys.shape[0] == 0:
        return ys.copy()
    if ys.shape[1] != spec.dim:
        raise ValueError(f"expected {spec.dim} columns, got {ys.shape[1]}")
    p1 = list(spec.p1)
    p2 = list(spec.p2)
    y1 = ys[:, p1]
    y2 = ys[:, p2]
    with np.errstate(over="ignore", invalid="ignore"):
        g_vals = np.column_stack(
            [_chain_values(spec.g_chains[i], y2[:, i]) for i in range(y2.shape[1])]
        )
        xp1 = y1 - g_vals
        f_vals = np.column_stack(
            [_chain_values(spec.f_chains[i], xp1[:, i]) for i in range(xp1.shape[1])]
        )
        xp2 = y2 - f_vals
    if not np.all(np.isfinite(xp1)):
        _raise_overflow(xp1, spec, spec.p1, rows_are_batch=True)
    if not np.all(np.isfinite(xp2)):
        _raise_overflow(xp2, spec, spec.p2, rows_are_batch=True)
    out = np.empty_like(ys)
    out[:, p1] = xp1
    out[:, p2] = xp2
    return out


def invert(spec, y):
    """Invert a single transformed sample."""
    y = as_float_vector(y)
    return invert_batch(spec, y[None, :])[0]
