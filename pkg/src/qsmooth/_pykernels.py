"""Pure-numpy fallback for the compiled kernels in ``_kernels.pyx``.

Same signatures and in-place semantics. The statevector is viewed as an
``(rows, 2, 2, ..., 2)`` tensor; fixing the control axes with integer indices
yields views, so the update writes straight into ``psi``.
"""


def _halves(psi, num_qubits, target, cmask, cval):
    rows = psi.shape[0]
    view = psi.reshape((rows,) + (2,) * num_qubits)
    idx = [slice(None)] * (num_qubits + 1)
    for q in range(num_qubits):
        bit = 1 << (num_qubits - 1 - q)
        if cmask & bit:
            idx[q + 1] = 1 if cval & bit else 0
    idx[target + 1] = 0
    lo = view[tuple(idx)]
    idx[target + 1] = 1
    hi = view[tuple(idx)]
    return lo, hi


def apply_1q(psi, num_qubits, target, cmask, cval, u00, u01, u10, u11, num_threads=1):
    lo, hi = _halves(psi, num_qubits, target, cmask, cval)
    new_lo = u00 * lo + u01 * hi
    hi[...] = u10 * lo + u11 * hi
    lo[...] = new_lo


def apply_diag(psi, num_qubits, target, cmask, cval, d0, d1, num_threads=1):
    lo, hi = _halves(psi, num_qubits, target, cmask, cval)
    if d0 != 1.0:
        lo *= d0
    hi *= d1


__all__ = ["apply_1q", "apply_diag"]
