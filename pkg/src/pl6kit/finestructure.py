"""Excited-state (^3E) and ground-state fine-structure Hamiltonians.

All energies are ordinary frequencies in GHz.  The excited-state operator
acts on the product basis ``{|X>, |Y>} (x) {|+1>, |0>, |-1>}``; index
``3*orbital + spin`` addresses a basis state.  Written out, with
``|E+-> = (|X> +- i|Y>)/sqrt(2)`` the orbital angular-momentum eigenstates::

    H = lambda_so * Lz (x) Sz
      + d_es * I (x) (Sz^2 - 2/3)
      + d2 * [sigma_z (x) (Sx^2 - Sy^2) + sigma_x (x) {Sx, Sy}]
      + d1 * [sigma_z (x) {Sz, Sx}     - sigma_x (x) {Sz, Sy}]
      + delta_x * sigma_z (x) I - delta_y * sigma_x (x) I

with ``Lz = [[0, -i], [i, 0]]``.  The d2 term equals
``|E+><E-| (x) S-^2 + h.c.`` and splits A1/A2 by ``4*d2`` at zero strain; the
d1 term equals ``|E+><E-| (x) {Sz, S+} + h.c.`` and mixes m_s=0 with the
E1/E2 manifold.  Both are invariant under the C3v operations; with
``delta_y = 0`` the mirror through the xz plane survives and splits the six
levels into two parity sectors of three.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InputError, NumericalError, TrackingError

GAMMA_E_GHZ_PER_MT = 0.028025

LABELS = ("A1", "A2", "Ex", "Ey", "E1", "E2")
MS_ORDER = (+1, 0, -1)

MS0 = "ms0"
MS1 = "ms±1"


@dataclass(frozen=True)
class FineStructureParams:
    """Global fine-structure constants in GHz (defaults: fitted medians)."""

    lambda_so: float = 5.739
    d_es: float = 0.932
    d1: float = 0.026
    d2: float = 0.285
    d_gs: float = 1.365

    def __post_init__(self):
        for name in ("lambda_so", "d_es", "d1", "d2", "d_gs"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise InputError(f"{name} must be finite, got {value!r}")
            if value < 0:
                raise InputError(f"{name} must be >= 0, got {value!r}")

    @property
    def is_physical(self):
        # zero spin-orbit or zero D_GS is allowed for limiting cases only
        return self.lambda_so > 0 and self.d_gs > 0

    def excited_array(self):
        return np.array([self.lambda_so, self.d_es, self.d1, self.d2])

    def scaled(self, c):
        return FineStructureParams(*(c * v for v in self.as_tuple()))

    def as_tuple(self):
        return (self.lambda_so, self.d_es, self.d1, self.d2, self.d_gs)

    def to_dict(self):
        return dict(zip(("lambda_so", "d_es", "d1", "d2", "d_gs"), self.as_tuple()))


DEFAULT_PARAMS = FineStructureParams()


@dataclass(frozen=True)
class StrainVector:
    delta_x: float = 0.0
    delta_y: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.delta_x) and np.isfinite(self.delta_y)):
            raise InputError("strain components must be finite")

    @classmethod
    def transverse(cls, delta_perp):
        """Strain of magnitude ``delta_perp`` along x, the gauge used by sweeps."""
        return cls(float(delta_perp), 0.0)

    @property
    def delta_perp(self):
        return float(np.hypot(self.delta_x, self.delta_y))

    def to_dict(self):
        return {"delta_x": self.delta_x, "delta_y": self.delta_y, "delta_perp": self.delta_perp}


@dataclass(frozen=True)
class EnergyLevel:
    label: str
    energy: float
    eigenvector: np.ndarray = field(repr=False)
    ms_weight: tuple

    @property
    def ms0_weight(self):
        return self.ms_weight[1]


@dataclass(frozen=True)
class LevelSet:
    params: FineStructureParams
    strain: StrainVector
    levels: tuple
    ambiguous: bool = False

    def by_label(self, label):
        for level in self.levels:
            if level.label == label:
                return level
        raise KeyError(label)

    def energy(self, label):
        return self.by_label(label).energy

    @property
    def energies(self):
        return {level.label: level.energy for level in self.levels}

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "strain": self.strain.to_dict(),
            "levels": [
                {"label": lv.label, "energy_ghz": lv.energy, "ms_weight": list(lv.ms_weight)}
                for lv in self.levels
            ],
            "ambiguous": self.ambiguous,
        }


@dataclass(frozen=True)
class TransitionLine:
    upper_label: str
    frequency_offset: float
    spin_branch: str


class Eigensystem(NamedTuple):
    energies: np.ndarray
    vectors: np.ndarray


def spin_operators():
    """Spin-1 matrices ``(Sx, Sy, Sz)`` in the basis ``|+1>, |0>, |-1>``."""
    r = np.sqrt(2.0)
    s_plus = np.array([[0, r, 0], [0, 0, r], [0, 0, 0]], dtype=complex)
    s_minus = s_plus.conj().T
    sx = (s_plus + s_minus) / 2
    sy = (s_plus - s_minus) / 2j
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return sx, sy, sz


def _anti(a, b):
    return a @ b + b @ a


@lru_cache(maxsize=None)
def _es_terms():
    sx, sy, sz = spin_operators()
    i2, i3 = np.eye(2), np.eye(3)
    lz = np.array([[0, -1j], [1j, 0]])
    pz = np.diag([1.0, -1.0]).astype(complex)
    px = np.array([[0, 1], [1, 0]], dtype=complex)
    terms = (
        np.kron(lz, sz),
        np.kron(i2, sz @ sz - (2.0 / 3.0) * i3),
        np.kron(pz, _anti(sz, sx)) - np.kron(px, _anti(sz, sy)),
        np.kron(pz, sx @ sx - sy @ sy) + np.kron(px, _anti(sx, sy)),
        np.kron(pz, i3),
        -np.kron(px, i3),
    )
    for t in terms:
        t.setflags(write=False)
    return terms


def build_es_hamiltonian(params, strain=None):
    """6x6 excited-state Hamiltonian in GHz (see module docstring for the form)."""
    strain = strain or StrainVector()
    so, axial, t_d1, t_d2, sx_term, sy_term = _es_terms()
    h = (
        params.lambda_so * so
        + params.d_es * axial
        + params.d1 * t_d1
        + params.d2 * t_d2
        + strain.delta_x * sx_term
        + strain.delta_y * sy_term
    )
    if not np.all(np.isfinite(h)):
        raise InputError("non-finite Hamiltonian entries")
    return h


def build_gs_hamiltonian(params, b_field_mT=0.0):
    """Ground-state ``D_GS (Sz^2 - 2/3) + gamma_e B Sz`` for a c-axis field."""
    if not np.isfinite(b_field_mT) or b_field_mT < 0:
        raise InputError(f"b_field_mT must be finite and >= 0, got {b_field_mT!r}")
    sz = np.diag([1.0, 0.0, -1.0])
    return params.d_gs * (sz @ sz - (2.0 / 3.0) * np.eye(3)) + GAMMA_E_GHZ_PER_MT * b_field_mT * sz


def diagonalize(h, hermitian_tol=1e-10):
    """Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InputError(f"expected a square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise InputError("matrix contains non-finite entries")
    asym = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if asym > hermitian_tol:
        raise InputError(f"matrix is not Hermitian (max |H - H^dag| = {asym:.3e})")
    try:
        energies, vectors = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc
    if not (np.all(np.isfinite(energies)) and np.all(np.isfinite(vectors))):
        raise NumericalError("eigensolver returned non-finite values")
    norm = np.linalg.norm(h, 2) if h.size else 0.0
    residual = np.linalg.norm(h @ vectors - vectors * energies, axis=0)
    if residual.size and residual.max() > 1e-9 * norm:
        raise NumericalError(f"eigenpair residual {residual.max():.3e} exceeds 1e-9*||H||")
    return Eigensystem(energies, vectors)


@lru_cache(maxsize=None)
def _mirror():
    # xz-plane reflection: orbital y -> -y, spin rotated by pi about y
    spin_c2y = np.array([[0, 0, 1], [0, -1, 0], [1, 0, 0]], dtype=float)
    return np.kron(np.diag([1.0, -1.0]), spin_c2y)


@lru_cache(maxsize=None)
def _references():
    """Zero-strain symmetry-adapted states, columns in ``LABELS`` order."""
    x, y = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    e_plus = (x + 1j * y) / np.sqrt(2)
    e_minus = (x - 1j * y) / np.sqrt(2)
    up, zero, down = np.eye(3)
    k = np.kron
    refs = {
        "A1": (k(e_minus, up) - k(e_plus, down)) / np.sqrt(2),
        "A2": (k(e_minus, up) + k(e_plus, down)) / np.sqrt(2),
        "Ex": k(x, zero).astype(complex),
        "Ey": k(y, zero).astype(complex),
        "E1": (k(e_plus, up) + k(e_minus, down)) / np.sqrt(2),
        "E2": (k(e_plus, up) - k(e_minus, down)) / np.sqrt(2),
    }
    out = np.column_stack([refs[label] for label in LABELS])
    out.setflags(write=False)
    return out


def reference_parities():
    m = _mirror()
    refs = _references()
    return {label: int(round(np.vdot(refs[:, i], m @ refs[:, i]).real)) for i, label in enumerate(LABELS)}


def ms_weights(vector):
    pops = np.abs(np.asarray(vector)) ** 2
    w = pops[:3] + pops[3:]
    return tuple(float(v) for v in w / w.sum())


def _clusters(energies, tol):
    groups, start = [], 0
    for i in range(1, len(energies) + 1):
        if i == len(energies) or energies[i] - energies[i - 1] > tol:
            groups.append(list(range(start, i)))
            start = i
    return groups


def _align(prev, prev_energies, energies, vectors, tol):
    """Match eigenvectors to the labeled columns of ``prev``.

    Degenerate clusters are rotated inside their subspace onto the previous
    vectors.  Returns ``(vectors_by_label, energies_by_label, overlaps, ambiguous)``.
    """
    n = prev.shape[1]
    groups = _clusters(energies, tol)
    owner = np.empty(n, dtype=int)
    for g, idx in enumerate(groups):
        owner[idx] = g
    proj = np.empty((n, len(groups)))
    for g, idx in enumerate(groups):
        q = vectors[:, idx]
        proj[:, g] = np.sum(np.abs(q.conj().T @ prev) ** 2, axis=0)
    weight = proj[:, owner]

    # ties resolved by m_s=0 weight agreement, then by energy order
    prev_ms0 = np.abs(prev[1]) ** 2 + np.abs(prev[4]) ** 2
    new_ms0 = np.abs(vectors[1]) ** 2 + np.abs(vectors[4]) ** 2
    prev_rank = np.argsort(np.argsort(prev_energies, kind="stable"), kind="stable")
    cost = (
        -np.round(weight, 6)
        + 1e-7 * np.abs(prev_ms0[:, None] - new_ms0[None, :])
        + 1e-9 * np.abs(prev_rank[:, None] - np.arange(n)[None, :])
    )
    rows, cols = linear_sum_assignment(cost)
    assigned = np.empty(n, dtype=int)
    assigned[rows] = cols

    ambiguous = False
    for i in range(n):
        g = owner[assigned[i]]
        others = np.delete(proj[i], g)
        if others.size and others.max() >= proj[i, g] - 1e-6:
            ambiguous = True

    out = np.empty_like(prev)
    for g, idx in enumerate(groups):
        members = [i for i in range(n) if owner[assigned[i]] == g]
        q = vectors[:, idx]
        m = q.conj().T @ prev[:, members]
        u, _, vh = np.linalg.svd(m)
        out[:, members] = q @ (u @ vh)
    for i in range(n):
        ov = np.vdot(prev[:, i], out[:, i])
        if abs(ov) > 1e-14:
            out[:, i] *= np.conj(ov) / abs(ov)
    overlaps = np.abs(np.einsum("ij,ij->j", prev.conj(), out))
    return out, energies[assigned], overlaps, ambiguous


def _degeneracy_tol(energies):
    return 1e-9 * max(1.0, float(np.max(np.abs(energies))))


def _level_set(params, strain, vectors, energies, ambiguous):
    levels = []
    for i, label in enumerate(LABELS):
        v = vectors[:, i] / np.linalg.norm(vectors[:, i])
        v.setflags(write=False)
        levels.append(EnergyLevel(label, float(energies[i]), v, ms_weights(v)))
    levels.sort(key=lambda lv: (lv.energy, LABELS.index(lv.label)))
    return LevelSet(params, strain, tuple(levels), ambiguous)


def _labeled_matrix(level_set):
    vecs = np.column_stack([level_set.by_label(label).eigenvector for label in LABELS])
    energies = np.array([level_set.energy(label) for label in LABELS])
    return vecs, energies


def _zero_strain_levels(params):
    h0 = build_es_hamiltonian(params)
    eig = diagonalize(h0)
    refs = _references()
    ref_e = np.einsum("ij,ik,kj->j", refs.conj(), h0, refs).real
    vecs, energies, _, amb = _align(refs, ref_e, eig.energies, eig.vectors, _degeneracy_tol(eig.energies))
    return _level_set(params, StrainVector(), vecs, energies, amb)


def classify_levels(eigensystem, params, strain=None):
    """Label an excited-state eigensystem with A1, A2, Ex, Ey, E1, E2.

    At zero strain labels come from overlap with the symmetry-adapted
    states.  At finite strain they follow adiabatic continuation along the
    straight path from zero strain (step halving keeps adjacent overlaps
    above 0.9).
    """
    strain = strain or StrainVector()
    energies = np.asarray(eigensystem.energies, dtype=float)
    vectors = np.asarray(eigensystem.vectors)
    if vectors.shape != (6, 6):
        raise InputError("expected a 6-level excited-state eigensystem")
    start = _zero_strain_levels(params)
    if strain.delta_perp == 0.0:
        prev, prev_e = _labeled_matrix(start)
    else:
        end = _track_ray(params, strain, start)
        prev, prev_e = _labeled_matrix(end)
    vecs, lab_e, overlaps, amb = _align(prev, prev_e, energies, vectors, _degeneracy_tol(energies))
    if overlaps.min() < 0.5:
        raise TrackingError("eigensystem does not match the tracked levels (overlap < 0.5)")
    return _level_set(params, strain, vecs, lab_e, amb)


def levels_at(params, strain=None):
    """Build, diagonalize and label in one call."""
    h = build_es_hamiltonian(params, strain)
    return classify_levels(diagonalize(h), params, strain)


def _track_ray(params, strain, start, max_step=0.05, min_step=1e-7):
    vecs, energies = _labeled_matrix(start)
    s, total = 0.0, strain.delta_perp
    h_frac = min(1.0, max_step / total)
    while s < 1.0:
        step = min(h_frac, 1.0 - s)
        while True:
            target = StrainVector((s + step) * strain.delta_x, (s + step) * strain.delta_y)
            eig = diagonalize(build_es_hamiltonian(params, target))
            new, new_e, ov, _ = _align(vecs, energies, eig.energies, eig.vectors, _degeneracy_tol(eig.energies))
            if ov.min() >= 0.9 or step * total <= min_step:
                break
            step /= 2
        if ov.min() < 0.5:
            raise TrackingError(f"lost adiabatic continuity near delta_perp={s * total:.6g} GHz")
        vecs, energies, s = new, new_e, s + step
    return _level_set(params, strain, vecs, energies, False)


def track_levels(params, strains: Sequence[StrainVector], start: LevelSet, threshold=0.5):
    """Follow labeled levels through a sequence of strains by eigenvector overlap."""
    vecs, energies = _labeled_matrix(start)
    out = []
    previous = start.strain
    ambiguous = start.ambiguous
    for strain in strains:
        eig = diagonalize(build_es_hamiltonian(params, strain))
        vecs, energies, ov, amb = _align(vecs, energies, eig.energies, eig.vectors, _degeneracy_tol(eig.energies))
        if ov.min() <= threshold:
            raise TrackingError(
                f"grid step too coarse between delta_perp={previous.delta_perp:.6g} and "
                f"{strain.delta_perp:.6g} GHz (min overlap {ov.min():.3f}); refine the grid"
            )
        out.append(_level_set(params, strain, vecs, energies, amb or ambiguous))
        previous = strain
    return out


def strain_sweep(params, delta_perp_grid):
    """Labeled level sets along an ascending transverse-strain grid (strain along x)."""
    grid = np.asarray(delta_perp_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InputError("strain grid must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(grid)) or grid[0] < 0:
        raise InputError("strain grid values must be finite and >= 0")
    if np.any(np.diff(grid) <= 0):
        raise InputError("strain grid must be strictly ascending")
    first = levels_at(params, StrainVector.transverse(grid[0]))
    rest = track_levels(params, [StrainVector.transverse(d) for d in grid[1:]], first)
    return [first] + rest


def transition_table(level_set):
    """One line per excited level, offsets relative to the ^3E centroid."""
    return [
        TransitionLine(lv.label, lv.energy, MS0 if lv.ms0_weight > 0.5 else MS1)
        for lv in level_set.levels
    ]


# --- parity-sector route: exact adiabatic labels for strain along x ---------

@lru_cache(maxsize=None)
def _sector_data():
    m = _mirror()
    w, basis = np.linalg.eigh(m)
    odd, even = basis[:, w < 0], basis[:, w > 0]
    b = np.hstack([odd, even]).astype(complex)
    blocks = []
    for term in _es_terms()[:5]:
        t = b.conj().T @ term @ b
        if np.max(np.abs(t[:3, 3:])) > 1e-12:
            raise NumericalError("term is not mirror symmetric")
        blocks.append((t[:3, :3], t[3:, 3:]))
    refs = b.conj().T @ _references()
    parities = reference_parities()
    sectors = (
        [i for i, lab in enumerate(LABELS) if parities[lab] < 0],
        [i for i, lab in enumerate(LABELS) if parities[lab] > 0],
    )
    return blocks, refs, sectors


def labeled_energies(excited, delta_perp):
    """Energies in ``LABELS`` order for strain ``delta_perp`` along x.

    ``excited`` is ``(lambda_so, d_es, d1, d2)`` or a FineStructureParams;
    ``delta_perp`` may be an array, giving shape ``(n, 6)``.  Within each
    mirror-parity sector levels cannot cross, so the adiabatic label is the
    zero-strain ordinal inside the sector.
    """
    if isinstance(excited, FineStructureParams):
        excited = excited.excited_array()
    coeffs = np.asarray(excited, dtype=float)
    deltas = np.atleast_1d(np.asarray(delta_perp, dtype=float))
    blocks, refs, sectors = _sector_data()
    out = np.empty((deltas.size, 6))
    for s, labels in enumerate(sectors):
        base = sum(c * blk[s] for c, blk in zip(coeffs, blocks[:4]))
        strain_block = blocks[4][s]
        # zero-strain ordering of the labels inside this sector
        _, v0 = np.linalg.eigh(base)
        r = refs[3 * s:3 * s + 3][:, labels]
        overlap = np.abs(v0.conj().T @ r) ** 2
        ordinal, lab_idx = linear_sum_assignment(-overlap)
        stack = base[None] + deltas[:, None, None] * strain_block[None]
        e = np.linalg.eigvalsh(stack)
        for o, li in zip(ordinal, lab_idx):
            out[:, labels[li]] = e[:, o]
    return out if np.ndim(delta_perp) else out[0]
