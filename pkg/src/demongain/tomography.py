"""Nine-setting two-qubit Pauli tomography with linear inversion.

Sign convention: outcome "+" is the +1 eigenvalue of the measured Pauli
operator, so in the energy basis <Z> = Pr(0) - Pr(1) (|1> is the
energetically higher state). Outcomes per setting are ordered
(++, +-, -+, --) with the agent sign first.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import qlin
from .qlin import ID2, PAULI_X, PAULI_Y, PAULI_Z, dag, kron

AXES = ("X", "Y", "Z")
ALL_SETTINGS: tuple[tuple[str, str], ...] = tuple(product(AXES, AXES))

_PAULI = {"I": ID2, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}

# Basis-change unitaries U with U P U^dag = Z, so measuring Z after U
# realizes a measurement of axis P (global phases irrelevant).
_ROT_TO_Z = {
    "X": (np.cos(np.pi / 4) * ID2 + 1j * np.sin(np.pi / 4) * PAULI_Y),  # exp(+i pi Y/4)
    "Y": (np.cos(np.pi / 4) * ID2 - 1j * np.sin(np.pi / 4) * PAULI_X),  # exp(-i pi X/4)
    "Z": ID2,
}

# outcome index -> (sign_agent, sign_demon); + maps to |0> after rotation
_OUTCOME_SIGNS = ((1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass
class BootstrapSummary:
    """Percentile spread of tomography metrics over parametric resamples."""

    resamples: int
    point: dict[str, float]
    lower: dict[str, float]
    upper: dict[str, float]
    percentiles: tuple[float, float] = (16.0, 84.0)


@dataclass
class Tomogram:
    """Counts, reconstruction and metrics of one tomography run."""

    counts: dict[tuple[str, str], np.ndarray]
    shots_per_setting: int
    rho_hat: np.ndarray
    concurrence: float
    purity: float
    bootstrap: BootstrapSummary | None = None


def setting_probs(rho: np.ndarray, setting: tuple[str, str]) -> np.ndarray:
    """Born probabilities of the 4 outcomes of one Pauli setting."""
    ua, ud = _ROT_TO_Z[setting[0]], _ROT_TO_Z[setting[1]]
    u = kron(ua, ud)
    diag = np.clip(np.real(np.diag(u @ rho @ dag(u))), 0.0, None)
    return diag / diag.sum()


def simulate_setting(
    rho: np.ndarray, setting: tuple[str, str], shots: int, seed: int
) -> np.ndarray:
    """Multinomial shot counts for one setting; deterministic under seed."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    idx = ALL_SETTINGS.index(tuple(setting))
    rng = np.random.Generator(np.random.Philox(key=[seed, idx]))
    return rng.multinomial(shots, setting_probs(rho, setting))


def simulate_tomogram_counts(
    rho: np.ndarray, shots: int, seed: int
) -> dict[tuple[str, str], np.ndarray]:
    """Counts for all nine settings."""
    return {s: simulate_setting(rho, s, shots, seed) for s in ALL_SETTINGS}


def exact_moment_probs(rho: np.ndarray) -> dict[tuple[str, str], np.ndarray]:
    """Infinite-shot outcome frequencies, for the inversion oracle."""
    return {s: setting_probs(rho, s) for s in ALL_SETTINGS}


def _freqs(counts_or_probs) -> dict[tuple[str, str], np.ndarray]:
    out = {}
    for s in ALL_SETTINGS:
        if s not in counts_or_probs:
            raise ValueError(f"missing tomography setting {s}")
        v = np.asarray(counts_or_probs[s], dtype=float)
        if v.shape != (4,):
            raise ValueError(f"setting {s} must have 4 outcome entries")
        out[s] = v / v.sum()
    return out


def linear_inversion(counts_or_probs) -> np.ndarray:
    """Reconstruct rho = (1/4) sum <P(x)Q> P(x)Q from empirical frequencies.

    Two-body correlators come from the matching setting; single-qubit
    expectations average the corresponding marginal over the three
    settings that measure the non-identity factor. Accepts raw counts or
    probabilities per setting. The result has unit trace by construction
    but is not necessarily positive.
    """
    freqs = _freqs(counts_or_probs)
    exp: dict[tuple[str, str], float] = {("I", "I"): 1.0}
    for sa, sd in ALL_SETTINGS:
        f = freqs[(sa, sd)]
        exp[(sa, sd)] = sum(f[i] * a * d for i, (a, d) in enumerate(_OUTCOME_SIGNS))
    for p in AXES:
        exp[(p, "I")] = np.mean(
            [
                sum(f[i] * a for i, (a, _) in enumerate(_OUTCOME_SIGNS))
                for q in AXES
                for f in [freqs[(p, q)]]
            ]
        )
        exp[("I", p)] = np.mean(
            [
                sum(f[i] * d for i, (_, d) in enumerate(_OUTCOME_SIGNS))
                for q in AXES
                for f in [freqs[(q, p)]]
            ]
        )
    rho = np.zeros((4, 4), dtype=complex)
    for (pa, pd), val in exp.items():
        rho += val * kron(_PAULI[pa], _PAULI[pd])
    return rho / 4.0


def clamp_to_physical(rho: np.ndarray) -> np.ndarray:
    """Project onto valid states: zero out negative eigenvalues, renormalize."""
    w, v = qlin.eig_hermitian(rho)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        raise ValueError("matrix has no positive spectral weight")
    w /= w.sum()
    return (v * w) @ v.conj().T


# Eigenvalues this far below the leading one are treated as exact zeros
# when taking square roots; otherwise eps-level eigensolver noise turns
# into sqrt(eps) ~ 1e-8 errors on the spin-flip spectrum of pure states.
_SQRT_ZERO_TOL = 1e-13


def _clamped_sqrt(w: np.ndarray) -> np.ndarray:
    w = np.clip(w, 0.0, None)
    w[w < _SQRT_ZERO_TOL * max(w.max(), 1.0)] = 0.0
    return np.sqrt(w)


def concurrence(rho: np.ndarray) -> float:
    """Two-qubit concurrence via the spin-flipped overlap spectrum.

    Negative eigenvalues of the input are clamped to zero first, so
    linear-inversion outputs are accepted; the trace is deliberately not
    renormalized (renormalizing shrinks the leading spin-flip eigenvalue
    and roughly doubles the downward finite-shot bias on near-pure
    states). The lambda_i are the descending eigenvalues of
    sqrt(sqrt(rho) rho~ sqrt(rho)), computed spectrally with near-zero
    eigenvalues snapped to 0 before each square root.
    """
    rho = np.asarray(rho, dtype=complex)
    if not qlin.is_hermitian(rho):
        raise ValueError("concurrence requires a Hermitian matrix")
    w, v = qlin.eig_hermitian(rho)
    w = np.clip(w, 0.0, None)
    rho = (v * w) @ v.conj().T
    yy = kron(PAULI_Y, PAULI_Y)
    rho_tilde = yy @ rho.conj() @ yy
    sq = (v * _clamped_sqrt(w)) @ v.conj().T
    m = sq @ rho_tilde @ sq
    wm, _ = qlin.eig_hermitian((m + m.conj().T) / 2)
    lam = np.sort(_clamped_sqrt(wm))[::-1]
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3])


def purity(rho: np.ndarray) -> float:
    """Tr(rho^2) on the raw matrix; may exceed 1 for non-PSD inversions."""
    rho = np.asarray(rho, dtype=complex)
    if not qlin.is_hermitian(rho):
        raise ValueError("purity requires a Hermitian matrix")
    return np.trace(rho @ rho).real


def bootstrap(
    rho_hat: np.ndarray, shots: int, resamples: int, seed: int
) -> BootstrapSummary:
    """Parametric bootstrap of concurrence and purity.

    Each resample redraws every setting's 4-outcome multinomial from the
    clamped, renormalized diagonal of rho_hat rotated into that setting's
    basis, then re-inverts and recomputes the metrics. Resample r uses a
    Philox stream keyed by (seed, r), so the summary is independent of
    evaluation order.
    """
    if resamples < 2:
        raise ValueError("resamples must be >= 2")
    dists = {}
    for s in ALL_SETTINGS:
        ua, ud = _ROT_TO_Z[s[0]], _ROT_TO_Z[s[1]]
        u = kron(ua, ud)
        diag = np.clip(np.real(np.diag(u @ rho_hat @ dag(u))), 0.0, None)
        if diag.sum() <= 0:
            raise ValueError(f"setting {s} diagonal not normalizable after clamping")
        dists[s] = diag / diag.sum()
    conc = np.empty(resamples)
    pur = np.empty(resamples)
    for r in range(resamples):
        rng = np.random.Generator(np.random.Philox(key=[seed, r]))
        counts = {s: rng.multinomial(shots, dists[s]) for s in ALL_SETTINGS}
        rho_r = linear_inversion(counts)
        conc[r] = concurrence(rho_r)
        pur[r] = purity(rho_r)
    lo, hi = 16.0, 84.0
    return BootstrapSummary(
        resamples=resamples,
        point={"concurrence": concurrence(rho_hat), "purity": purity(rho_hat)},
        lower={
            "concurrence": float(np.percentile(conc, lo)),
            "purity": float(np.percentile(pur, lo)),
        },
        upper={
            "concurrence": float(np.percentile(conc, hi)),
            "purity": float(np.percentile(pur, hi)),
        },
    )


def tomography_study(
    rho: np.ndarray, shots: int, resamples: int, seed: int
) -> Tomogram:
    """Simulate counts, reconstruct, and attach bootstrap intervals."""
    counts = simulate_tomogram_counts(rho, shots, seed)
    rho_hat = linear_inversion(counts)
    return Tomogram(
        counts=counts,
        shots_per_setting=shots,
        rho_hat=rho_hat,
        concurrence=concurrence(rho_hat),
        purity=purity(rho_hat),
        bootstrap=bootstrap(rho_hat, shots, resamples, seed) if resamples else None,
    )


def fit_c0(points: list[tuple[float, float]]) -> tuple[float, float]:
    """One-parameter least-squares fit of c = c0 * cos(theta).

    Closed form: c0 = sum(c cos) / sum(cos^2); the standard error comes
    from the residual variance (0 for a single point).
    """
    if not points:
        raise ValueError("need at least one point")
    th = np.array([p[0] for p in points], dtype=float)
    c = np.array([p[1] for p in points], dtype=float)
    x = np.cos(th)
    sxx = np.sum(x * x)
    if sxx <= 1e-20:
        raise ValueError("all cos(theta) vanish; c0 is unidentifiable")
    c0 = float(np.sum(c * x) / sxx)
    n = len(points)
    if n <= 1:
        return c0, 0.0
    ssr = float(np.sum((c - c0 * x) ** 2))
    return c0, float(np.sqrt(ssr / (n - 1) / sxx))


# ---------------------------------------------------------------------------
# serialization

COUNTS_CSV_HEADER = ["setting_a", "setting_d", "outcome", "count"]
_OUTCOME_NAMES = ("++", "+-", "-+", "--")


def write_counts_csv(path, counts: dict[tuple[str, str], np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COUNTS_CSV_HEADER)
        for (sa, sd), vec in counts.items():
            for i, name in enumerate(_OUTCOME_NAMES):
                w.writerow([sa, sd, name, int(vec[i])])


def read_counts_csv(path) -> dict[tuple[str, str], np.ndarray]:
    counts: dict[tuple[str, str], np.ndarray] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["setting_a"], row["setting_d"])
            counts.setdefault(key, np.zeros(4))
            counts[key][_OUTCOME_NAMES.index(row["outcome"])] = int(row["count"])
    return counts


def summary_to_json_dict(theta: float, t: Tomogram) -> dict:
    d = {
        "theta": theta,
        "shots_per_setting": t.shots_per_setting,
        "concurrence": t.concurrence,
        "purity": t.purity,
    }
    if t.bootstrap is not None:
        b = t.bootstrap
        d["bootstrap"] = {
            "resamples": b.resamples,
            "percentiles": list(b.percentiles),
            "point": b.point,
            "lower": b.lower,
            "upper": b.upper,
        }
    return d
