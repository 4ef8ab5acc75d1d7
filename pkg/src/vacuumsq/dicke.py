"""Numerically exact collective-spin dynamics on the Dicke ladder.

States live on the (2S+1)-dimensional symmetric subspace, stored as a
dense complex amplitude vector c_m, m = -S..S ascending.  Twisting
(Omega Sz^2) is diagonal and applied exactly; rotation-assisted twisting
(Omega (S Sx + Sz^2)) is real symmetric tridiagonal and propagated either
through one spectral decomposition reused across a time grid or, for
large ladders, through Krylov stepping.  Both paths must pass a norm
gate of 1e-9 before the state is renormalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import expm_multiply
from scipy.special import gammaln

from .core import (DerivedParams, DegenerateMeanSpinError, NormDriftError,
                   NumericsError, PhysicsError)
from .analytic import NoiseModel, SpinMoments, SqueezingTrace, replace_moment_noise
from . import analytic

NORM_TOL = 1e-12        # invariant: sum |c_m|^2 = 1 within this, always
NORM_DRIFT_GATE = 1e-9  # propagation drift beyond this is an error
SPECTRAL_MAX_DIM = 4096  # larger ladders use Krylov stepping (memory)

__all__ = [
    "DickeState", "css", "evolve_oat", "evolve_tat", "TatPropagator",
    "moments", "min_transverse_variance", "xi_numeric", "apply_noise",
    "total_spin_sq", "dump_state", "load_state", "squeezing_trace",
]


@dataclass(frozen=True, eq=False)
class DickeState:
    """Amplitudes over the collective ladder |m>, m = -S..S ascending."""

    spin_S: float
    amplitudes: np.ndarray

    def __post_init__(self):
        S = float(self.spin_S)
        dim = int(round(2 * S + 1))
        if abs(2 * S + 1 - dim) > 1e-9 or dim < 2:
            raise PhysicsError(f"spin must be a half-integer >= 1/2, got {S}")
        amps = np.ascontiguousarray(self.amplitudes, dtype=complex)
        if amps.shape != (dim,):
            raise PhysicsError(f"expected {dim} amplitudes for S={S}, got shape {amps.shape}")
        if not np.all(np.isfinite(amps.view(float))):
            raise NumericsError("non-finite amplitudes (overflow during propagation?)")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise NumericsError(f"state norm {norm!r} deviates from 1 beyond {NORM_TOL}")
        object.__setattr__(self, "spin_S", S)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def m_values(self) -> np.ndarray:
        return np.arange(self.dim, dtype=float) - self.spin_S

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


def _gated_state(spin_S, amps) -> DickeState:
    """Renormalize within the drift gate, else raise NormDriftError."""
    norm = float(np.sum(np.abs(amps) ** 2))
    if not math.isfinite(norm):
        raise NumericsError("non-finite amplitudes (overflow during propagation?)")
    if abs(norm - 1.0) > NORM_DRIFT_GATE:
        raise NormDriftError(
            f"norm drifted to {norm!r} (gate {NORM_DRIFT_GATE}); increase n_steps")
    return DickeState(spin_S, amps / math.sqrt(norm))


def css(n_atoms: int) -> DickeState:
    """Coherent spin state along +x: c_m = sqrt(C(2S, m+S) / 2^(2S)).

    Binomial weights are evaluated in log space so that N up to 1e5 is
    exact to rounding (no overflow of the raw binomials).
    """
    if n_atoms < 1 or int(n_atoms) != n_atoms:
        raise PhysicsError(f"n_atoms must be a positive integer, got {n_atoms}")
    S = n_atoms / 2.0
    m = np.arange(n_atoms + 1, dtype=float) - S
    log_amp = 0.5 * (gammaln(2 * S + 1) - gammaln(S + m + 1) - gammaln(S - m + 1)
                     - 2 * S * math.log(2.0))
    amps = np.exp(log_amp).astype(complex)
    amps /= math.sqrt(float(np.sum(np.abs(amps) ** 2)))
    return DickeState(S, amps)


def evolve_oat(state: DickeState, omega_twist: float, t: float) -> DickeState:
    """Twisting evolution: c_m -> exp(-i Omega m^2 t) c_m, exactly diagonal."""
    if t < 0:
        raise PhysicsError("time must be >= 0")
    phases = np.exp(-1j * omega_twist * t * state.m_values ** 2)
    return _gated_state(state.spin_S, phases * state.amplitudes)


def _sx_offdiag(S: float, m: np.ndarray) -> np.ndarray:
    """Matrix elements <m+1|Sx|m> = (1/2) sqrt((S-m)(S+m+1)) for m[:-1]."""
    return 0.5 * np.sqrt((S - m[:-1]) * (S + m[:-1] + 1.0))


class TatPropagator:
    """Propagator for H = Omega (S Sx + Sz^2), reusable across a time grid.

    ``method``: "spectral" (one tridiagonal eigendecomposition, exact for
    any t), "krylov" (sparse expm stepping, memory-light for big ladders),
    or "auto" (spectral up to dim 4096).
    """

    def __init__(self, spin_S: float, omega_twist: float, method: str = "auto"):
        dim = int(round(2 * spin_S + 1))
        self.spin_S = float(spin_S)
        self.omega_twist = float(omega_twist)
        m = np.arange(dim, dtype=float) - spin_S
        diag = omega_twist * m ** 2
        off = omega_twist * spin_S * _sx_offdiag(spin_S, m)
        if method == "auto":
            method = "spectral" if dim <= SPECTRAL_MAX_DIM else "krylov"
        if method not in ("spectral", "krylov"):
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        if method == "spectral":
            self._eigvals, self._eigvecs = eigh_tridiagonal(diag, off)
        else:
            self._h = sparse.diags([off, diag, off], [-1, 0, 1], format="csr")

    def evolve(self, state: DickeState, t: float) -> DickeState:
        if t < 0:
            raise PhysicsError("time must be >= 0")
        return self._advance_gated(state, t)

    def _advance_gated(self, state, dt):
        return _gated_state(state.spin_S, self._advance(state.amplitudes, dt))

    def _advance(self, amps, dt):
        if dt == 0.0:
            return amps.copy()
        if self.method == "spectral":
            coeffs = self._eigvecs.T @ amps
            return self._eigvecs @ (np.exp(-1j * self._eigvals * dt) * coeffs)
        return expm_multiply(-1j * dt * self._h, amps)

    def evolve_grid(self, state: DickeState, times) -> list[DickeState]:
        """States at the given (ascending, >= 0) times from one initial state.

        The Krylov path steps sequentially between grid points, so a full
        curve costs about the same as one evolution to the final time.
        """
        times = np.asarray(times, dtype=float)
        if times.size and (np.any(times < 0) or np.any(np.diff(times) < 0)):
            raise PhysicsError("times must be ascending and >= 0")
        out = []
        if self.method == "spectral":
            coeffs = self._eigvecs.T @ state.amplitudes
            for t in times:
                amps = self._eigvecs @ (np.exp(-1j * self._eigvals * t) * coeffs)
                out.append(_gated_state(state.spin_S, amps))
        else:
            amps = state.amplitudes
            prev = 0.0
            for t in times:
                amps = self._advance(amps, t - prev)
                prev = t
                out.append(_gated_state(state.spin_S, amps))
        return out


def evolve_tat(state: DickeState, omega_twist: float, t: float,
               n_steps: int = 1) -> DickeState:
    """Rotation-assisted twisting under H = Omega (S Sx + Sz^2).

    ``n_steps`` subdivides the interval on the Krylov path (the spectral
    path is exact in one application and ignores it).  Norm drift beyond
    1e-9 raises; smaller drift is renormalized away.
    """
    if n_steps < 1:
        raise PhysicsError("n_steps must be >= 1")
    prop = TatPropagator(state.spin_S, omega_twist)
    if prop.method == "spectral" or n_steps == 1:
        return prop.evolve(state, t)
    out = state
    for _ in range(n_steps):
        out = prop.evolve(out, t / n_steps)
    return out


def _ladder_applications(state: DickeState):
    """Sz c, Sy c, Sx c as dense vectors; O(dim) each."""
    S, c, m = state.spin_S, state.amplitudes, state.m_values
    up = np.sqrt((S - m[:-1]) * (S + m[:-1] + 1.0))  # <m+1| S+ |m>
    sp_c = np.zeros_like(c)
    sp_c[1:] = up * c[:-1]
    sm_c = np.zeros_like(c)
    sm_c[:-1] = up * c[1:]
    return m * c, (sp_c - sm_c) / 2j, (sp_c + sm_c) / 2.0


def moments(state: DickeState) -> SpinMoments:
    """All first moments and the transverse (z, y) second moments.

    ``min_transverse_var``/``optimal_angle`` are filled via
    :func:`min_transverse_variance` when the mean spin defines a usable
    transverse plane, else left as None.
    """
    sz_c, sy_c, sx_c = _ladder_applications(state)
    c = state.amplitudes
    mx = float(np.real(np.vdot(c, sx_c)))
    my = float(np.real(np.vdot(c, sy_c)))
    mz = float(np.real(np.vdot(c, sz_c)))
    var_z = float(np.real(np.vdot(sz_c, sz_c))) - mz * mz
    var_y = float(np.real(np.vdot(sy_c, sy_c))) - my * my
    cross = 2.0 * float(np.real(np.vdot(sz_c, sy_c))) - 2.0 * mz * my
    mom = SpinMoments(spin_S=state.spin_S, mean_x=mx, mean_y=my, mean_z=mz,
                      var_z=var_z, var_y=var_y, cross_zy=cross)
    try:
        variance, angle = min_transverse_variance(mom)
    except PhysicsError:
        return mom
    return SpinMoments(spin_S=state.spin_S, mean_x=mx, mean_y=my, mean_z=mz,
                       var_z=var_z, var_y=var_y, cross_zy=cross,
                       min_transverse_var=variance, optimal_angle=angle)


# Relative tilt of the mean spin away from x beyond which the stored
# (z, y) block no longer spans the transverse plane.
_TILT_TOL = 1e-3
_ISOTROPY_TOL = 1e-12


def min_transverse_variance(m: SpinMoments) -> tuple[float, float]:
    """Smallest transverse variance and its quadrature angle.

    Diagonalizes the 2x2 covariance of (Sz, Sy) in the plane orthogonal to
    the mean spin.  The mean must be well defined (|<S>| > 1e-9 S) and lie
    along +-x to within 1e-3 relative -- the only states produced here;
    the angle convention matches ``analytic.xi_unitary`` exactly
    (quadrature cos(phi) Sy - sin(phi) Sz, isotropic tie-break 0).
    """
    length = math.sqrt(m.mean_x ** 2 + m.mean_y ** 2 + m.mean_z ** 2)
    if length <= 1e-9 * m.spin_S:
        raise DegenerateMeanSpinError(
            f"mean spin length {length!r} ~ 0: transverse plane undefined")
    if math.hypot(m.mean_y, m.mean_z) > _TILT_TOL * length:
        raise PhysicsError(
            "mean spin tilted away from the x axis; the stored (z, y) block "
            "does not span its transverse plane")
    half_sum = 0.5 * (m.var_z + m.var_y)
    radius = math.hypot(0.5 * (m.var_z - m.var_y), 0.5 * m.cross_zy)
    variance = half_sum - radius
    if radius <= _ISOTROPY_TOL * max(1.0, half_sum):
        return variance, 0.0  # isotropic: any angle, report 0 by tie-break
    angle = 0.5 * (math.pi - math.atan2(m.cross_zy, m.var_y - m.var_z))
    if angle > math.pi / 2:
        angle -= math.pi  # fold to (-pi/2, pi/2]
    return variance, angle


def xi_numeric(state: DickeState) -> float:
    """Squeezing parameter of a ladder state: min transverse var / (S/2)."""
    variance, _ = min_transverse_variance(moments(state))
    return variance / (state.spin_S / 2.0)


def apply_noise(m: SpinMoments, d: DerivedParams, t, noise: NoiseModel) -> SpinMoments:
    """Add the decoherence variances isotropically in the transverse plane.

    Both channel variances go onto var_z and var_y (cross terms
    untouched), which shifts each covariance eigenvalue by the same
    amount and therefore adds exactly [dS2_leak + dS2_decay]/(S/2) to xi.
    The same rule is applied to twisting and rotation-assisted states.
    """
    added = 0.0
    p = d.params
    if noise.include_cavity_leak and p.kappa > 0:
        added += float(analytic.noise_var_cavity_leak(
            d, p.kappa, t, noise.detector_efficiency_q))
    if noise.include_free_space and p.gamma > 0:
        added += float(analytic.noise_var_free_space(d, p.gamma, t))
    return replace_moment_noise(m, added)


def total_spin_sq(state: DickeState) -> float:
    """<S^2> computed from the ladder operators (conserved: S(S+1))."""
    sz_c, sy_c, sx_c = _ladder_applications(state)
    return float(np.real(np.vdot(sx_c, sx_c) + np.vdot(sy_c, sy_c)
                         + np.vdot(sz_c, sz_c)))


def squeezing_trace(d: DerivedParams, times, noise: NoiseModel,
                    protocol: str = "oat") -> SqueezingTrace:
    """Numerically exact squeezing trace over a time grid (dicke tier)."""
    times = np.asarray(times, dtype=float)
    state0 = css(d.params.n_atoms)
    if protocol == "oat":
        states = [evolve_oat(state0, d.omega_twist, t) for t in times]
    elif protocol == "tat":
        states = TatPropagator(state0.spin_S, d.omega_twist).evolve_grid(state0, times)
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    xi_u = np.empty_like(times)
    xi_tot = np.empty_like(times)
    mean_x = np.empty_like(times)
    angle = np.empty_like(times)
    for i, (t, st) in enumerate(zip(times, states)):
        mom = moments(st)
        if mom.min_transverse_var is None:
            raise NumericsError(f"transverse plane undefined at t={t}")
        xi_u[i] = mom.min_transverse_var / (d.spin_S / 2.0)
        noisy = apply_noise(mom, d, t, noise)
        xi_tot[i] = noisy.min_transverse_var / (d.spin_S / 2.0)
        mean_x[i] = mom.mean_x
        angle[i] = noisy.optimal_angle
    return SqueezingTrace(times=times, xi_unitary=xi_u, xi_total=xi_tot,
                          mean_x=mean_x, var_min=xi_tot * (d.spin_S / 2.0),
                          angle=angle, model_tier="dicke", protocol=protocol)


def dump_state(state: DickeState, path) -> None:
    """Write "m re(c_m) im(c_m)" per line, full round-trip precision."""
    with open(path, "w", encoding="ascii") as fh:
        for m, amp in zip(state.m_values, state.amplitudes):
            fh.write(f"{float(m)!r} {float(amp.real)!r} {float(amp.imag)!r}\n")


def load_state(path) -> DickeState:
    """Read a state written by :func:`dump_state`."""
    ms, amps = [], []
    with open(path, encoding="ascii") as fh:
        for line in fh:
            if not line.strip():
                continue
            m_str, re_str, im_str = line.split()
            ms.append(float(m_str))
            amps.append(complex(float(re_str), float(im_str)))
    if not ms:
        raise ValueError(f"no amplitudes found in {path}")
    spin_S = (len(ms) - 1) / 2.0
    if abs(ms[0] + spin_S) > 1e-9 or abs(ms[-1] - spin_S) > 1e-9:
        raise ValueError(f"m column of {path} is not a -S..S ladder")
    return DickeState(spin_S, np.asarray(amps, dtype=complex))
