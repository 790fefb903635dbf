"""Pure-numpy stepping kernel.

Reference implementation of the interface provided by the compiled
``_core`` extension.  Spectral coefficients follow the ``numpy.fft.rfft``
convention (unnormalised forward transform).
"""
from __future__ import annotations

import numpy as np

STATUS_OK = 0
STATUS_CFL = 1
STATUS_FLOOR = 2
STATUS_NONFINITE = 3


class SpectralCore:
    """Right-hand side and RK4 loop of the two-component system.

    Parameters
    ----------
    n, length : grid size and period.
    dealias : bool
        Evaluate quadratic products on a 3/2-padded grid.
    """

    backend = "python"

    def __init__(self, n: int, length: float, dealias: bool = True) -> None:
        self.n = int(n)
        self.length = float(length)
        self.dealias = bool(dealias)
        self.m = 3 * self.n // 2 if dealias else self.n
        self.nh = self.n // 2 + 1
        self.h = self.length / self.n
        k = 2.0 * np.pi / self.length * np.arange(self.nh)
        ik = 1j * k
        ik[-1] = 0.0
        self.ik = ik
        self.sym = 1.0 / (1.0 + k * k)
        self.to_fine_scale = self.m / self.n
        self.to_coarse_scale = self.n / self.m
        self.last_umax = 0.0
        self.last_floor = 1.0

    # transforms -----------------------------------------------------
    def forward(self, u: np.ndarray) -> np.ndarray:
        return np.fft.rfft(np.asarray(u, dtype=float))

    def backward(self, uh: np.ndarray) -> np.ndarray:
        return np.fft.irfft(uh, self.n)

    def _fine(self, ah: np.ndarray) -> np.ndarray:
        if self.m == self.n:
            return np.fft.irfft(ah, self.n)
        pad = np.zeros(self.m // 2 + 1, dtype=complex)
        pad[: self.nh] = ah
        # the coarse Nyquist mode is a cosine split between +/- n/2
        pad[self.nh - 1] *= 0.5
        return np.fft.irfft(pad * self.to_fine_scale, self.m)

    def _coarse(self, p: np.ndarray) -> np.ndarray:
        ph = np.fft.rfft(p)[: self.nh] * self.to_coarse_scale
        ph[-1] = 0.0
        return ph

    # right-hand side -------------------------------------------------
    def _rhs(self, uh: np.ndarray, eh: np.ndarray):
        ik = self.ik
        uf = self._fine(uh)
        uxf = self._fine(ik * uh)
        ef = self._fine(eh)
        p_uu = self._coarse(uf * uf)
        p_b = self._coarse(0.5 * (uxf * uxf + ef * ef))
        p_ue = self._coarse(uf * ef)
        du = -ik * (0.5 * p_uu + self.sym * (p_uu + p_b + eh))
        de = -ik * (uh + p_ue)
        return du, de, uf, ef

    def rhs(self, uh: np.ndarray, eh: np.ndarray):
        """Time derivative of the spectral state ``(uh, eh)``."""
        du, de, _, _ = self._rhs(uh, eh)
        return du, de

    def advance(self, uh, eh, dt: float, nsteps: int, cfl_guard: float, floor: float):
        """Take up to ``nsteps`` RK4 steps.

        Each step first checks the current state: non-finite values,
        ``min(1 + eta) <= floor`` or ``max|u| dt / h > cfl_guard`` stop the
        loop before the state is touched.

        Returns
        -------
        uh, eh : new spectral state (copies).
        steps : number of completed steps.
        status : one of the ``STATUS_*`` codes.
        """
        uh = np.array(uh, dtype=complex)
        eh = np.array(eh, dtype=complex)
        h = self.h
        for step in range(int(nsteps)):
            k1u, k1e, uf, ef = self._rhs(uh, eh)
            umax = float(np.max(np.abs(uf)))
            emin = float(np.min(ef))
            self.last_umax, self.last_floor = umax, 1.0 + emin
            if not (np.isfinite(umax) and np.isfinite(emin)):
                return uh, eh, step, STATUS_NONFINITE
            if 1.0 + emin <= floor:
                return uh, eh, step, STATUS_FLOOR
            if umax * abs(dt) / h > cfl_guard:
                return uh, eh, step, STATUS_CFL
            k2u, k2e = self.rhs(uh + 0.5 * dt * k1u, eh + 0.5 * dt * k1e)
            k3u, k3e = self.rhs(uh + 0.5 * dt * k2u, eh + 0.5 * dt * k2e)
            k4u, k4e = self.rhs(uh + dt * k3u, eh + dt * k3e)
            uh = uh + (dt / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            eh = eh + (dt / 6.0) * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
        return uh, eh, int(nsteps), STATUS_OK
