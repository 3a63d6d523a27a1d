# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled kernels for the hot inner loops (LCS and Kendall pair counting).

Behavior must match _kernels_py exactly; parity is enforced by tests.
"""

from libc.stdlib cimport free, malloc


def lcs_length(a, b):
    """Length of the longest common subsequence of two id sequences."""
    cdef Py_ssize_t na = len(a), nb = len(b)
    if na == 0 or nb == 0:
        return 0
    if nb > na:
        a, b = b, a
        na, nb = nb, na
    cdef long *av = <long *> malloc(na * sizeof(long))
    cdef long *bv = <long *> malloc(nb * sizeof(long))
    cdef long *prev = <long *> malloc((nb + 1) * sizeof(long))
    cdef long *curr = <long *> malloc((nb + 1) * sizeof(long))
    if av == NULL or bv == NULL or prev == NULL or curr == NULL:
        free(av); free(bv); free(prev); free(curr)
        raise MemoryError()
    cdef Py_ssize_t i, j
    cdef long ai, best
    cdef long *tmp
    try:
        for i in range(na):
            av[i] = a[i]
        for j in range(nb):
            bv[j] = b[j]
        for j in range(nb + 1):
            prev[j] = 0
            curr[j] = 0
        for i in range(1, na + 1):
            ai = av[i - 1]
            for j in range(1, nb + 1):
                if ai == bv[j - 1]:
                    curr[j] = prev[j - 1] + 1
                else:
                    best = curr[j - 1]
                    if prev[j] > best:
                        best = prev[j]
                    curr[j] = best
            tmp = prev; prev = curr; curr = tmp
        return prev[nb]
    finally:
        free(av); free(bv); free(prev); free(curr)


def kendall_pair_counts(x, y):
    """Count (concordant, discordant, tied-x-only, tied-y-only, tied-both) pairs."""
    cdef Py_ssize_t n = len(x)
    if len(y) != n:
        raise ValueError("x and y must have equal length")
    cdef double *xv = <double *> malloc(n * sizeof(double))
    cdef double *yv = <double *> malloc(n * sizeof(double))
    if xv == NULL or yv == NULL:
        free(xv); free(yv)
        raise MemoryError()
    cdef long concordant = 0, discordant = 0, tied_x = 0, tied_y = 0, tied_both = 0
    cdef Py_ssize_t i, j
    cdef double dx, dy
    try:
        for i in range(n):
            xv[i] = x[i]
            yv[i] = y[i]
        for i in range(n):
            for j in range(i + 1, n):
                dx = xv[i] - xv[j]
                dy = yv[i] - yv[j]
                if dx == 0.0 and dy == 0.0:
                    tied_both += 1
                elif dx == 0.0:
                    tied_x += 1
                elif dy == 0.0:
                    tied_y += 1
                elif (dx > 0.0) == (dy > 0.0):
                    concordant += 1
                else:
                    discordant += 1
        return concordant, discordant, tied_x, tied_y, tied_both
    finally:
        free(xv); free(yv)
