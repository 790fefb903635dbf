# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernel backed by FFTW.

Same interface and arithmetic as :mod:`twoch._kernels_py`.  Plans use
``FFTW_ESTIMATE`` so results do not depend on run-time plan measurement.
The time-stepping loop runs without the GIL.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite

cnp.import_array()

cdef extern from "fftw3.h" nogil:
    ctypedef double fftw_complex[2]
    ctypedef struct fftw_plan_s:
        pass
    ctypedef fftw_plan_s* fftw_plan
    fftw_plan fftw_plan_dft_r2c_1d(int n, double* inp, fftw_complex* out, unsigned flags)
    fftw_plan fftw_plan_dft_c2r_1d(int n, fftw_complex* inp, double* out, unsigned flags)
    void fftw_execute_dft_r2c(fftw_plan p, double* inp, fftw_complex* out)
    void fftw_execute_dft_c2r(fftw_plan p, fftw_complex* inp, double* out)
    void fftw_destroy_plan(fftw_plan p)
    void* fftw_malloc(size_t n)
    void fftw_free(void* p)
    unsigned FFTW_ESTIMATE
    unsigned FFTW_DESTROY_INPUT

cdef enum:
    STATUS_OK = 0
    STATUS_CFL = 1
    STATUS_FLOOR = 2
    STATUS_NONFINITE = 3

ctypedef double complex cplx


cdef cplx* _calloc_c(Py_ssize_t n) except NULL:
    cdef cplx* p = <cplx*> fftw_malloc(n * sizeof(cplx))
    cdef Py_ssize_t j
    if p == NULL:
        raise MemoryError()
    for j in range(n):
        p[j] = 0
    return p


cdef double* _calloc_d(Py_ssize_t n) except NULL:
    cdef double* p = <double*> fftw_malloc(n * sizeof(double))
    cdef Py_ssize_t j
    if p == NULL:
        raise MemoryError()
    for j in range(n):
        p[j] = 0
    return p


cdef class SpectralCore:
    """Right-hand side and RK4 loop of the two-component system (FFTW)."""

    cdef readonly int n, m, nh, mh
    cdef readonly double length, h
    cdef readonly bint dealias
    cdef readonly double last_umax, last_floor
    cdef double scale_f, scale_c
    cdef double* kk
    cdef double* sym
    cdef cplx* pad
    cdef cplx* prodh
    cdef double* uf
    cdef double* uxf
    cdef double* ef
    cdef double* prod
    cdef cplx* puu
    cdef cplx* pb
    cdef cplx* pue
    cdef cplx* U
    cdef cplx* E
    cdef cplx* su
    cdef cplx* se
    cdef cplx* au
    cdef cplx* ae
    cdef cplx* ku
    cdef cplx* ke
    cdef fftw_plan c2r_m
    cdef fftw_plan r2c_m

    backend = "compiled"

    def __cinit__(self, int n, double length, bint dealias=True):
        cdef int j
        cdef double twopi = 6.283185307179586
        if n < 16 or n % 2:
            raise ValueError("n must be even and >= 16")
        self.n = n
        self.length = length
        self.dealias = dealias
        self.m = 3 * n // 2 if dealias else n
        self.nh = n // 2 + 1
        self.mh = self.m // 2 + 1
        self.h = length / n
        self.scale_f = 1.0 / n
        self.scale_c = (<double> n) / self.m
        self.last_umax = 0.0
        self.last_floor = 1.0
        self.kk = _calloc_d(self.nh)
        self.sym = _calloc_d(self.nh)
        for j in range(self.nh):
            self.kk[j] = twopi / length * j
            self.sym[j] = 1.0 / (1.0 + self.kk[j] * self.kk[j])
        self.kk[self.nh - 1] = 0.0
        self.pad = _calloc_c(self.mh)
        self.prodh = _calloc_c(self.mh)
        self.uf = _calloc_d(self.m)
        self.uxf = _calloc_d(self.m)
        self.ef = _calloc_d(self.m)
        self.prod = _calloc_d(self.m)
        self.puu = _calloc_c(self.nh)
        self.pb = _calloc_c(self.nh)
        self.pue = _calloc_c(self.nh)
        self.U = _calloc_c(self.nh)
        self.E = _calloc_c(self.nh)
        self.su = _calloc_c(self.nh)
        self.se = _calloc_c(self.nh)
        self.au = _calloc_c(self.nh)
        self.ae = _calloc_c(self.nh)
        self.ku = _calloc_c(self.nh)
        self.ke = _calloc_c(self.nh)
        self.c2r_m = fftw_plan_dft_c2r_1d(self.m, <fftw_complex*> self.pad, self.uf,
                                          FFTW_ESTIMATE | FFTW_DESTROY_INPUT)
        self.r2c_m = fftw_plan_dft_r2c_1d(self.m, self.prod, <fftw_complex*> self.prodh,
                                          FFTW_ESTIMATE)
        if self.c2r_m == NULL or self.r2c_m == NULL:
            raise MemoryError("FFTW planning failed")

    def __dealloc__(self):
        if self.c2r_m != NULL:
            fftw_destroy_plan(self.c2r_m)
        if self.r2c_m != NULL:
            fftw_destroy_plan(self.r2c_m)
        fftw_free(self.kk)
        fftw_free(self.sym)
        fftw_free(self.pad)
        fftw_free(self.prodh)
        fftw_free(self.uf)
        fftw_free(self.uxf)
        fftw_free(self.ef)
        fftw_free(self.prod)
        fftw_free(self.puu)
        fftw_free(self.pb)
        fftw_free(self.pue)
        fftw_free(self.U)
        fftw_free(self.E)
        fftw_free(self.su)
        fftw_free(self.se)
        fftw_free(self.au)
        fftw_free(self.ae)
        fftw_free(self.ku)
        fftw_free(self.ke)

    # helpers running without the GIL --------------------------------
    cdef void _fine(self, const cplx* ah, bint differentiate, double* out) noexcept nogil:
        cdef int j
        for j in range(self.nh):
            if differentiate:
                self.pad[j] = ah[j] * (1j * self.kk[j])
            else:
                self.pad[j] = ah[j]
        if self.m != self.n:
            self.pad[self.nh - 1] = 0.5 * self.pad[self.nh - 1]
        for j in range(self.nh, self.mh):
            self.pad[j] = 0
        fftw_execute_dft_c2r(self.c2r_m, <fftw_complex*> self.pad, out)
        for j in range(self.m):
            out[j] = out[j] * self.scale_f

    cdef void _coarse(self, cplx* out) noexcept nogil:
        cdef int j
        fftw_execute_dft_r2c(self.r2c_m, self.prod, <fftw_complex*> self.prodh)
        for j in range(self.nh - 1):
            out[j] = self.prodh[j] * self.scale_c
        out[self.nh - 1] = 0

    cdef void _rhs(self, const cplx* uh, const cplx* eh, cplx* du, cplx* de) noexcept nogil:
        cdef int j
        cdef cplx mik
        self._fine(uh, False, self.uf)
        self._fine(uh, True, self.uxf)
        self._fine(eh, False, self.ef)
        for j in range(self.m):
            self.prod[j] = self.uf[j] * self.uf[j]
        self._coarse(self.puu)
        for j in range(self.m):
            self.prod[j] = 0.5 * (self.uxf[j] * self.uxf[j] + self.ef[j] * self.ef[j])
        self._coarse(self.pb)
        for j in range(self.m):
            self.prod[j] = self.uf[j] * self.ef[j]
        self._coarse(self.pue)
        for j in range(self.nh):
            mik = -1j * self.kk[j]
            du[j] = mik * (0.5 * self.puu[j] + self.sym[j] * (self.puu[j] + self.pb[j] + eh[j]))
            de[j] = mik * (uh[j] + self.pue[j])

    cdef int _check(self, double dt, double cfl_guard, double floor) noexcept nogil:
        cdef int j
        cdef double umax = 0.0, emin = 1e300, a
        cdef bint bad = False
        for j in range(self.m):
            if not (isfinite(self.uf[j]) and isfinite(self.ef[j])):
                bad = True
                break
            a = fabs(self.uf[j])
            if a > umax:
                umax = a
            if self.ef[j] < emin:
                emin = self.ef[j]
        self.last_umax = umax
        self.last_floor = 1.0 + emin
        if bad:
            return STATUS_NONFINITE
        if 1.0 + emin <= floor:
            return STATUS_FLOOR
        if umax * fabs(dt) / self.h > cfl_guard:
            return STATUS_CFL
        return STATUS_OK

    cdef int _stage(self, double a, double b) noexcept nogil:
        # stage input = state + a*k ; accumulator += b*k
        cdef int j
        for j in range(self.nh):
            self.au[j] = self.au[j] + b * self.ku[j]
            self.ae[j] = self.ae[j] + b * self.ke[j]
            self.su[j] = self.U[j] + a * self.ku[j]
            self.se[j] = self.E[j] + a * self.ke[j]
        return 0

    cdef int _advance(self, double dt, long nsteps, double cfl_guard, double floor,
                      long* done) noexcept nogil:
        cdef long step
        cdef int j, status
        for step in range(nsteps):
            self._rhs(self.U, self.E, self.ku, self.ke)
            status = self._check(dt, cfl_guard, floor)
            if status != STATUS_OK:
                done[0] = step
                return status
            for j in range(self.nh):
                self.au[j] = self.U[j]
                self.ae[j] = self.E[j]
            self._stage(0.5 * dt, dt / 6.0)
            self._rhs(self.su, self.se, self.ku, self.ke)
            self._stage(0.5 * dt, dt / 3.0)
            self._rhs(self.su, self.se, self.ku, self.ke)
            self._stage(dt, dt / 3.0)
            self._rhs(self.su, self.se, self.ku, self.ke)
            for j in range(self.nh):
                self.U[j] = self.au[j] + (dt / 6.0) * self.ku[j]
                self.E[j] = self.ae[j] + (dt / 6.0) * self.ke[j]
        done[0] = nsteps
        return STATUS_OK

    # Python interface -----------------------------------------------
    def forward(self, u):
        return np.fft.rfft(np.asarray(u, dtype=float))

    def backward(self, uh):
        return np.fft.irfft(uh, self.n)

    cdef void _load(self, uh, eh) except *:
        cdef cnp.ndarray[cnp.complex128_t, ndim=1] a = np.ascontiguousarray(uh, dtype=np.complex128)
        cdef cnp.ndarray[cnp.complex128_t, ndim=1] b = np.ascontiguousarray(eh, dtype=np.complex128)
        cdef int j
        if a.shape[0] != self.nh or b.shape[0] != self.nh:
            raise ValueError("spectral arrays have the wrong length")
        for j in range(self.nh):
            self.U[j] = a[j]
            self.E[j] = b[j]

    cdef _dump(self, const cplx* x):
        cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(self.nh, dtype=np.complex128)
        cdef int j
        for j in range(self.nh):
            out[j] = x[j]
        return out

    def rhs(self, uh, eh):
        """Time derivative of the spectral state ``(uh, eh)``."""
        self._load(uh, eh)
        with nogil:
            self._rhs(self.U, self.E, self.ku, self.ke)
        return self._dump(self.ku), self._dump(self.ke)

    def advance(self, uh, eh, double dt, long nsteps, double cfl_guard, double floor):
        """Take up to ``nsteps`` RK4 steps; see the numpy kernel for the contract."""
        cdef long done = 0
        cdef int status
        self._load(uh, eh)
        with nogil:
            status = self._advance(dt, nsteps, cfl_guard, floor, &done)
        return self._dump(self.U), self._dump(self.E), int(done), int(status)
