"""Plane-strain elasticity tensors in Voigt form (11, 22, 12; engineering shear)."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

GPa = 1e9


@dataclass(frozen=True)
class CubicParams:
    """Cubic plane-strain moduli in Pa; isotropy is the case mu_star == mu."""

    lam: float
    mu: float
    mu_star: float

    def __post_init__(self):
        if not (self.mu > 0 and self.mu_star > 0 and self.lam + self.mu > 0):
            raise ValueError(f"cubic tensor not positive definite: {self}")

    @classmethod
    def from_gpa(cls, lam, mu, mu_star=None):
        return cls(lam * GPa, mu * GPa, (mu if mu_star is None else mu_star) * GPa)

    def gpa(self):
        return np.array([self.lam, self.mu, self.mu_star]) / GPa

    def scaled(self, factor: float) -> "CubicParams":
        return CubicParams(factor * self.lam, factor * self.mu, factor * self.mu_star)

    @property
    def is_isotropic(self) -> bool:
        return bool(np.isclose(self.mu, self.mu_star, rtol=1e-12))

    def voigt(self) -> "VoigtTensor":
        return cubic_to_voigt(self)


@dataclass(frozen=True)
class IsotropicParams:
    lam: float
    mu: float

    def __post_init__(self):
        if not (self.mu > 0 and self.lam + self.mu > 0):
            raise ValueError(f"isotropic tensor not positive definite: {self}")

    @classmethod
    def from_gpa(cls, lam, mu):
        return cls(lam * GPa, mu * GPa)

    @classmethod
    def from_young(cls, E, nu):
        """Plane-strain Lame constants from Young's modulus and Poisson's ratio."""
        return cls(E * nu / ((1 + nu) * (1 - 2 * nu)), E / (2 * (1 + nu)))

    @property
    def young(self) -> float:
        return self.mu * (3 * self.lam + 2 * self.mu) / (self.lam + self.mu)

    @property
    def poisson(self) -> float:
        return self.lam / (2 * (self.lam + self.mu))

    def as_cubic(self) -> CubicParams:
        return CubicParams(self.lam, self.mu, self.mu)


@dataclass(frozen=True, eq=False)
class VoigtTensor:
    """Symmetric 3x3 stiffness in Pa with a symmetry-class label."""

    matrix: np.ndarray
    symmetry: str = "general"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("Voigt tensor must be 3x3")
        if not np.allclose(m, m.T, rtol=1e-10, atol=1e-12 * np.abs(m).max()):
            raise ValueError("Voigt tensor must be symmetric")
        m = (m + m.T) / 2
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def is_positive_definite(self) -> bool:
        return bool(np.linalg.eigvalsh(self.matrix).min() > 0)

    def scaled(self, factor) -> "VoigtTensor":
        return VoigtTensor(factor * self.matrix, self.symmetry)

    def to_cubic(self) -> tuple[CubicParams, float]:
        """Nearest cubic parameters and the relative off-cubic residual."""
        m = self.matrix
        c11 = (m[0, 0] + m[1, 1]) / 2
        lam = m[0, 1]
        mu = (c11 - lam) / 2
        cub = CubicParams(lam, mu, m[2, 2])
        resid = np.linalg.norm(m - cubic_to_voigt(cub).matrix) / np.linalg.norm(m)
        return cub, float(resid)

    def tensor4(self) -> np.ndarray:
        """Full C_ijkl (2x2x2x2) acting on symmetric tensors."""
        idx = {(0, 0): 0, (1, 1): 1, (0, 1): 2, (1, 0): 2}
        C = np.zeros((2, 2, 2, 2))
        for (i, j), a in idx.items():
            for (k, l), b in idx.items():
                C[i, j, k, l] = self.matrix[a, b]
        return C


def cubic_to_voigt(p: CubicParams) -> VoigtTensor:
    a = 2 * p.mu + p.lam
    m = np.array([[a, p.lam, 0.0], [p.lam, a, 0.0], [0.0, 0.0, p.mu_star]])
    return VoigtTensor(m, "isotropic" if p.is_isotropic else "cubic")


def _as_matrix(c):
    if isinstance(c, CubicParams):
        return cubic_to_voigt(c).matrix
    if isinstance(c, IsotropicParams):
        return cubic_to_voigt(c.as_cubic()).matrix
    return np.asarray(c, dtype=float)


def _symmetry_of(*tensors):
    labels = []
    for t in tensors:
        if isinstance(t, VoigtTensor):
            labels.append(t.symmetry)
        elif isinstance(t, CubicParams):
            labels.append("isotropic" if t.is_isotropic else "cubic")
        elif isinstance(t, IsotropicParams):
            labels.append("isotropic")
        else:
            labels.append("general")
    for cls in ("general", "cubic"):
        if cls in labels:
            return cls
    return "isotropic"


def reuss_ce(c_micro, c_macro) -> VoigtTensor:
    """Coupling tensor C_e with C_macro^-1 = C_micro^-1 + C_e^-1."""
    cm, cM = _as_matrix(c_micro), _as_matrix(c_macro)
    diff = cm - cM
    if np.linalg.eigvalsh((diff + diff.T) / 2).min() <= 1e-12 * np.abs(cm).max():
        raise ValueError("micro not stiffer than macro")
    ce = cm @ np.linalg.solve(diff, cM)
    ce = (ce + ce.T) / 2
    return VoigtTensor(ce, _symmetry_of(c_micro, c_macro))


def harmonic_sum(a, b) -> VoigtTensor:
    """(A^-1 + B^-1)^-1, the series combination of two stiffnesses."""
    A, B = _as_matrix(a), _as_matrix(b)
    m = np.linalg.inv(np.linalg.inv(A) + np.linalg.inv(B))
    return VoigtTensor((m + m.T) / 2, _symmetry_of(a, b))


def lowner_sup_cubic(candidates) -> CubicParams:
    """Least cubic tensor dominating every candidate in the Loewner order."""
    cands = list(candidates)
    if not cands:
        raise ValueError("need at least one candidate")
    mu_star = max(c.mu_star for c in cands)
    mu = max(c.mu for c in cands)
    lam = max(c.lam + c.mu for c in cands) - mu
    return CubicParams(lam, mu, mu_star)


def cubic_dominates(a: CubicParams, b: CubicParams, rtol=0.0) -> bool:
    """a >= b restricted to cubic tensors: the three eigen-moduli compare."""
    s = 1 + rtol
    return (a.mu_star * s >= b.mu_star) and (a.mu * s >= b.mu) and ((a.lam + a.mu) * s >= b.lam + b.mu)


def alpha_upper_bound(matrix, lowner: CubicParams) -> float:
    m = matrix.as_cubic() if isinstance(matrix, IsotropicParams) else matrix
    return min(m.mu_star / lowner.mu_star, m.mu / lowner.mu, (m.mu + m.lam) / (lowner.mu + lowner.lam))


def plane_strain_bending_modulus(p) -> float:
    """Normal-block modulus with the transverse stress condensed out."""
    if isinstance(p, IsotropicParams):
        p = p.as_cubic()
    a = 2 * p.mu + p.lam
    return a - p.lam**2 / a


@dataclass(frozen=True, eq=False)
class RmmMaterial:
    """Parameters of the relaxed micromorphic energy.

    ``mu_c`` is the Cosserat couple modulus, ``mu_curv`` the modulus of the
    curvature term and ``n_scale`` divides ``Lc`` in it.  ``skew_floor`` is a
    tiny stiffness on skew P that keeps the system definite when ``mu_c`` is
    zero.
    """

    C_e: VoigtTensor
    C_micro: VoigtTensor
    mu_c: float = 0.0
    mu_curv: float = 1.0
    Lc: float = 0.0
    n_scale: float = 1.0
    kappa1: float = 0.0
    skew_floor: float | None = None

    def __post_init__(self):
        for name in ("C_e", "C_micro"):
            t = getattr(self, name)
            if not isinstance(t, VoigtTensor):
                object.__setattr__(self, name, VoigtTensor(_as_matrix(t), _symmetry_of(t)))
            if not getattr(self, name).is_positive_definite():
                raise ValueError(f"{name} must be positive definite")
        if self.mu_c < 0 or self.Lc < 0 or self.kappa1 < 0 or self.n_scale <= 0 or self.mu_curv < 0:
            raise ValueError("mu_c, Lc, kappa1 and mu_curv must be >= 0 and n_scale > 0")
        if self.skew_floor is None:
            object.__setattr__(self, "skew_floor", 1e-10 * float(np.abs(self.C_e.matrix).max()))

    @property
    def curvature_modulus(self) -> float:
        """mu_curv (Lc / n)^2, the weight of |Curl P|^2."""
        return self.mu_curv * (self.Lc / self.n_scale) ** 2

    @property
    def C_macro(self) -> VoigtTensor:
        return harmonic_sum(self.C_e, self.C_micro)

    def with_(self, **kw) -> "RmmMaterial":
        return replace(self, **kw)
