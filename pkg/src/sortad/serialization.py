"""Versioned text serialization of fitted detectors.

A model file is a single self-describing UTF-8 document.  The first line is
the format tag ``SORTADv1``; every following line is a space-separated
record whose first tokens name the section.  Floats are written with 17
significant decimal digits, so loading reproduces the stored doubles (and
therefore all scores) bit for bit.
"""

import numpy as np

from .basis import PolyTerm
from .classifier import ClassifierModel
from .data import RobustScaler
from .detector import SortadDetector
from .errors import ModelFormatError, ModelVersionError
from .scoring import DirichletModel
from .selection import TransformBank
from .transforms import TransformationSpec
from .validation import require_fitted

FORMAT_TAG = "SORTADv1"

_INT_PARAMS = (
    "n_transformations",
    "n_candidates",
    "max_degree",
    "chain_length",
    "divide_h",
    "epochs",
    "batch_size",
    "seed",
)
_FLOAT_PARAMS = ("beta", "learning_rate", "r_multiplier", "epsilon", "alert_fraction")
_STR_PARAMS = ("scoring",)
_OPTIONAL_INT_PARAMS = ("center_subsample",)
_PARAM_ORDER = (
    "n_transformations",
    "n_candidates",
    "beta",
    "max_degree",
    "chain_length",
    "divide_h",
    "epochs",
    "batch_size",
    "learning_rate",
    "scoring",
    "r_multiplier",
    "epsilon",
    "center_subsample",
    "alert_fraction",
    "seed",
)


def _fmt(value):
    return format(float(value), ".17e")


def _fmt_vec(values):
    return " ".join(_fmt(v) for v in values)


def save_model(detector, path):
    """Write a fitted detector to a SORTADv1 file."""
    require_fitted(detector, "classifier_")
    params = detector.get_params()
    lines = [FORMAT_TAG]
    for key in _PARAM_ORDER:
        value = params[key]
        if key in _INT_PARAMS:
            text = str(int(value))
        elif key in _FLOAT_PARAMS:
            text = _fmt(value)
        elif key in _OPTIONAL_INT_PARAMS:
            text = "none" if value is None else str(int(value))
        else:
            text = str(value)
        lines.append(f"param {key} {text}")
    lines.append(f"fitted n_features {detector.n_features_in_}")
    lines.append(f"fitted padded_dim {detector.padded_dim_}")
    lines.append(f"fitted threshold {_fmt(detector.threshold_)}")
    lines.append(f"scaler medians {_fmt_vec(detector.scaler_.medians_)}")
    lines.append(f"scaler iqrs {_fmt_vec(detector.scaler_.iqrs_)}")
    bank = detector.bank_
    lines.append(f"bank {len(bank)}")
    for i, spec in enumerate(bank.specs):
        lines.append(f"spec {i} p1 " + " ".join(str(j) for j in spec.p1))
        lines.append(f"spec {i} p2 " + " ".join(str(j) for j in spec.p2))
        for role, chains in (("f", spec.f_chains), ("g", spec.g_chains)):
            for feat, chain in enumerate(chains):
                for term in chain:
                    lines.append(
                        f"spec {i} {role} {feat} {term.basis} {term.degree} "
                        f"{_fmt(term.coefficient)}"
                    )
        lines.append(f"spec {i} center {_fmt_vec(bank.centers[i])}")
    clf = detector.classifier_
    lines.append("classifier dims " + " ".join(str(d) for d in clf.layer_dims))
    for k, (w, b) in enumerate(zip(clf.weights, clf.biases)):
        for row in range(w.shape[0]):
            lines.append(f"layer {k} weight {row} {_fmt_vec(w[row])}")
        lines.append(f"layer {k} bias {_fmt_vec(b)}")
    dm = detector.dirichlet_
    for m in range(dm.n_transformations):
        lines.append(f"dirichlet alpha {m} {_fmt_vec(dm.alphas[m])}")
    lines.append(f"dirichlet means {_fmt_vec(dm.train_means)}")
    lines.append("end")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


class _Reader:
    def __init__(self, lines):
        self.lines = lines
        self.pos = 0

    def next(self, *prefix):
        if self.pos >= len(self.lines):
            raise ModelFormatError("unexpected end of model file")
        line = self.lines[self.pos]
        self.pos += 1
        tokens = line.split()
        if tuple(tokens[: len(prefix)]) != prefix:
            raise ModelFormatError(
                f"line {self.pos}: expected {' '.join(prefix)!r}, got {line!r}"
            )
        return tokens[len(prefix) :]


def _parse_floats(tokens, context):
    try:
        return np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise ModelFormatError(f"bad float in {context}: {exc}") from exc


def _parse_int(token, context):
    try:
        return int(token)
    except ValueError as exc:
        raise ModelFormatError(f"bad integer in {context}: {exc}") from exc


def load_model(path):
    """Read a SORTADv1 file back into a fitted detector."""
    try:
        with open(path, encoding="utf-8") as handle:
            lines = [line.rstrip("\n") for line in handle]
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    lines = [line for line in lines if line.strip()]
    if not lines:
        raise ModelFormatError("empty model file")
    if lines[0] != FORMAT_TAG:
        if lines[0].startswith("SORTAD"):
            raise ModelVersionError(
                f"unsupported model version {lines[0]!r}; this build reads {FORMAT_TAG}"
            )
        raise ModelFormatError("not a SORTAD model file")
    reader = _Reader(lines)
    reader.pos = 1

    params = {}
    for key in _PARAM_ORDER:
        tokens = reader.next("param", key)
        if len(tokens) != 1:
            raise ModelFormatError(f"param {key} must have exactly one value")
        raw = tokens[0]
        if key in _INT_PARAMS:
            params[key] = _parse_int(raw, f"param {key}")
        elif key in _FLOAT_PARAMS:
            params[key] = float(raw)
        elif key in _OPTIONAL_INT_PARAMS:
            params[key] = None if raw == "none" else _parse_int(raw, f"param {key}")
        else:
            params[key] = raw

    n_features = _parse_int(reader.next("fitted", "n_features")[0], "n_features")
    padded_dim = _parse_int(reader.next("fitted", "padded_dim")[0], "padded_dim")
    threshold = float(reader.next("fitted", "threshold")[0])

    medians = _parse_floats(reader.next("scaler", "medians"), "scaler medians")
    iqrs = _parse_floats(reader.next("scaler", "iqrs"), "scaler iqrs")
    if medians.shape != (n_features,) or iqrs.shape != (n_features,):
        raise ModelFormatError("scaler width does not match n_features")

    n_specs = _parse_int(reader.next("bank")[0], "bank")
    if n_specs < 1:
        raise ModelFormatError("bank must contain at least one transformation")
    h = params["divide_h"]
    specs, centers = [], []
    for i in range(n_specs):
        p1 = tuple(_parse_int(t, "p1") for t in reader.next("spec", str(i), "p1"))
        p2 = tuple(_parse_int(t, "p2") for t in reader.next("spec", str(i), "p2"))
        if len(p1) != len(p2) or len(p1) + len(p2) != padded_dim:
            raise ModelFormatError(f"spec {i} partition does not match padded_dim")
        chains = {"f": [[] for _ in p1], "g": [[] for _ in p2]}
        for role, n_feats in (("f", len(p1)), ("g", len(p2))):
            for feat in range(n_feats):
                for _ in range(params["chain_length"]):
                    tokens = reader.next("spec", str(i), role, str(feat))
                    if len(tokens) != 3:
                        raise ModelFormatError(f"spec {i} {role} {feat}: bad term record")
                    basis, degree_tok, coeff_tok = tokens
                    degree = _parse_int(degree_tok, "term degree")
                    chains[role][feat].append(
                        PolyTerm(basis, degree, float(coeff_tok), degree - h)
                    )
        center = _parse_floats(reader.next("spec", str(i), "center"), "spec center")
        if center.shape != (padded_dim,):
            raise ModelFormatError(f"spec {i} center width mismatch")
        specs.append(
            TransformationSpec(
                i,
                p1,
                p2,
                tuple(tuple(c) for c in chains["f"]),
                tuple(tuple(c) for c in chains["g"]),
                params["chain_length"],
            )
        )
        centers.append(center)

    dims = [_parse_int(t, "classifier dims") for t in reader.next("classifier", "dims")]
    if len(dims) < 2:
        raise ModelFormatError("classifier needs at least two layer dims")
    if dims[0] != padded_dim or dims[-1] != n_specs:
        raise ModelFormatError("classifier dims inconsistent with bank and padded_dim")
    weights, biases = [], []
    for k, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        rows = []
        for row in range(fan_in):
            values = _parse_floats(
                reader.next("layer", str(k), "weight", str(row)), f"layer {k} weights"
            )
            if values.shape != (fan_out,):
                raise ModelFormatError(f"layer {k} weight row {row} width mismatch")
            rows.append(values)
        weights.append(np.vstack(rows))
        bias = _parse_floats(reader.next("layer", str(k), "bias"), f"layer {k} bias")
        if bias.shape != (fan_out,):
            raise ModelFormatError(f"layer {k} bias width mismatch")
        biases.append(bias)

    alphas = []
    for m in range(n_specs):
        row = _parse_floats(reader.next("dirichlet", "alpha", str(m)), "dirichlet alpha")
        if row.shape != (n_specs,):
            raise ModelFormatError(f"dirichlet alpha {m} width mismatch")
        alphas.append(row)
    means = _parse_floats(reader.next("dirichlet", "means"), "dirichlet means")
    if means.shape != (n_specs,):
        raise ModelFormatError("dirichlet means width mismatch")
    reader.next("end")
    if reader.pos != len(lines):
        raise ModelFormatError("trailing content after end marker")

    detector = SortadDetector(**params)
    detector.n_features_in_ = n_features
    detector.padded_dim_ = padded_dim
    detector.threshold_ = threshold
    scaler = RobustScaler()
    scaler.medians_ = medians
    scaler.iqrs_ = iqrs
    detector.scaler_ = scaler
    detector.bank_ = TransformBank(specs=specs, centers=centers, beta=params["beta"])
    detector.classifier_ = ClassifierModel(weights, biases)
    detector.dirichlet_ = DirichletModel(
        alphas=np.vstack(alphas),
        train_means=means,
        r=params["r_multiplier"],
        epsilon=params["epsilon"],
    )
    return detector
