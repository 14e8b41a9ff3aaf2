# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled amplitude-update kernels.

Every routine works on a C-contiguous ``(rows, 2**n)`` complex128 array and
updates it in place. Rows are independent statevectors (a batch). Qubit 0 is
the most significant bit of the basis index.
"""
from cython.parallel cimport prange

# Below this many amplitude pairs the OpenMP region costs more than it saves.
DEF PARALLEL_MIN_PAIRS = 16384


cdef inline Py_ssize_t _expand(Py_ssize_t k, Py_ssize_t* pos, int npos) noexcept nogil:
    cdef int q
    cdef Py_ssize_t low
    for q in range(npos):
        low = k & (((<Py_ssize_t>1) << pos[q]) - 1)
        k = ((k >> pos[q]) << (pos[q] + 1)) | low
    return k


def apply_1q(double complex[:, ::1] psi, int num_qubits, int target,
             Py_ssize_t cmask, Py_ssize_t cval,
             double complex u00, double complex u01,
             double complex u10, double complex u11,
             int num_threads=1):
    """Apply a (multi-)controlled 2x2 matrix to ``target`` on every row."""
    cdef Py_ssize_t nrows = psi.shape[0]
    cdef int tpos = num_qubits - 1 - target
    cdef Py_ssize_t tbit = (<Py_ssize_t>1) << tpos
    cdef Py_ssize_t pos[64]
    cdef int npos = 0
    cdef int p
    for p in range(num_qubits):
        if p == tpos or (cmask >> p) & 1:
            pos[npos] = p
            npos += 1
    cdef Py_ssize_t count = psi.shape[1] >> npos
    cdef Py_ssize_t r, k, i, j
    cdef double complex a, b

    for r in range(nrows):
        if num_threads > 1 and count >= PARALLEL_MIN_PAIRS:
            for k in prange(count, nogil=True, num_threads=num_threads, schedule="static"):
                i = _expand(k, pos, npos) | cval
                j = i | tbit
                a = psi[r, i]
                b = psi[r, j]
                psi[r, i] = u00 * a + u01 * b
                psi[r, j] = u10 * a + u11 * b
        else:
            with nogil:
                for k in range(count):
                    i = _expand(k, pos, npos) | cval
                    j = i | tbit
                    a = psi[r, i]
                    b = psi[r, j]
                    psi[r, i] = u00 * a + u01 * b
                    psi[r, j] = u10 * a + u11 * b


def apply_diag(double complex[:, ::1] psi, int num_qubits, int target,
               Py_ssize_t cmask, Py_ssize_t cval,
               double complex d0, double complex d1, int num_threads=1):
    """Diagonal special case of :func:`apply_1q` (Z, RZ and their controlled forms)."""
    cdef Py_ssize_t nrows = psi.shape[0]
    cdef int tpos = num_qubits - 1 - target
    cdef Py_ssize_t tbit = (<Py_ssize_t>1) << tpos
    cdef Py_ssize_t pos[64]
    cdef int npos = 0
    cdef int p
    for p in range(num_qubits):
        if p == tpos or (cmask >> p) & 1:
            pos[npos] = p
            npos += 1
    cdef Py_ssize_t count = psi.shape[1] >> npos
    cdef Py_ssize_t r, k, i
    cdef bint skip0 = d0 == 1.0

    for r in range(nrows):
        if num_threads > 1 and count >= PARALLEL_MIN_PAIRS:
            for k in prange(count, nogil=True, num_threads=num_threads, schedule="static"):
                i = _expand(k, pos, npos) | cval
                if not skip0:
                    psi[r, i] = d0 * psi[r, i]
                psi[r, i | tbit] = d1 * psi[r, i | tbit]
        else:
            with nogil:
                for k in range(count):
                    i = _expand(k, pos, npos) | cval
                    if not skip0:
                        psi[r, i] = d0 * psi[r, i]
                    psi[r, i | tbit] = d1 * psi[r, i | tbit]
