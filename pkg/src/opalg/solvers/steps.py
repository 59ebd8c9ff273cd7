"""Fused per-iteration kernels of the Krylov solvers.

Every kernel honors the per-column stopping mask: columns whose status is
stopped are left bitwise untouched. Declared traffic follows the solver
memory model; the per-kernel charges are the model constants tabulated in
``docs/traffic_model.md`` (vector operands per n*m elements, per-column
scalars per m).
"""

from __future__ import annotations

import numpy as np

from ..executor import Operation, Traffic


def _vtb(arr):
    return arr.size * arr.dtype.itemsize


def _safe_div(num, den):
    """num/den with 0/0 collapsed to 0 (exactly-converged columns)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    both_zero = (den == 0) & (num == 0)
    if both_zero.any():
        out = np.where(both_zero, 0.0, out)
    return out


class _MaskedStep(Operation):
    """Base for column-masked fused vector updates."""

    #: (reads, writes) charged per vector element, plus scalar writes per column.
    CHARGE = (0, 0, 0)

    def __init__(self, active=None):
        self.active = active

    def _run(self, exc):
        coeffs = self._coeffs()
        n = self._nrows()
        exc.map_blocks(n, lambda lo, hi: self._body(lo, hi, coeffs))

    reference = parallel = _run

    def _nrows(self):
        raise NotImplementedError

    def _coeffs(self):
        return ()

    def traffic(self):
        reads_per_elem, writes_per_elem, scalar_writes = self.CHARGE
        ref = self._ref_vector()
        vt = ref.dtype.itemsize
        m = ref.shape[1]
        return Traffic(reads_per_elem * _vtb(ref),
                       writes_per_elem * _vtb(ref) + scalar_writes * m * vt)


class _InitKernel(Operation):
    """Zero the workspace vectors and seed the per-column scalars."""

    def __init__(self, vectors, scalar_seeds, charge):
        self.vectors = vectors
        self.scalar_seeds = scalar_seeds    # [(array, value), ...]
        self.charge = charge                # precomputed Traffic

    def _run(self, exc):
        n = self.vectors[0].shape[0]

        def body(lo, hi):
            for v in self.vectors:
                v[lo:hi] = 0.0

        exc.map_blocks(n, body)
        for arr, value in self.scalar_seeds:
            arr[...] = value

    reference = parallel = _run

    def traffic(self):
        return self.charge


def cg_init(z, p, q, prev_rho):
    vt = z.dtype.itemsize
    m = z.shape[1]
    return _InitKernel([z, p, q], [(prev_rho, 1.0)],
                       Traffic(0, 3 * _vtb(z) + m * vt))


def fcg_init(z, p, q, t, prev_rho, rho_t):
    vt = z.dtype.itemsize
    m = z.shape[1]
    return _InitKernel([z, p, q, t], [(prev_rho, 1.0), (rho_t, 0.0)],
                       Traffic(0, 4 * _vtb(z) + 2 * m * vt))


class CgStep1(_MaskedStep):
    """p <- z + (rho / prev_rho) * p."""

    name = "cg_step_1"
    CHARGE = (4, 1, 0)

    def __init__(self, p, z, rho, prev_rho, active=None):
        super().__init__(active)
        self.p, self.z = p, z
        self.rho, self.prev_rho = rho, prev_rho

    def _nrows(self):
        return self.p.shape[0]

    def _ref_vector(self):
        return self.p

    def _coeffs(self):
        return (_safe_div(self.rho[0], self.prev_rho[0]),)

    def _body(self, lo, hi, coeffs):
        (beta,) = coeffs
        p, z, act = self.p, self.z, self.active
        if act is None:
            p[lo:hi] = z[lo:hi] + beta * p[lo:hi]
        else:
            p[lo:hi, act] = z[lo:hi, act] + beta[act] * p[lo:hi, act]


class CgStep2(_MaskedStep):
    """x += alpha * p; r -= alpha * q with alpha = rho / sigma."""

    name = "cg_step_2"
    CHARGE = (6, 2, 0)

    def __init__(self, x, r, p, q, sigma, rho, active=None):
        super().__init__(active)
        self.x, self.r, self.p, self.q = x, r, p, q
        self.sigma, self.rho = sigma, rho

    def _nrows(self):
        return self.x.shape[0]

    def _ref_vector(self):
        return self.x

    def _coeffs(self):
        return (_safe_div(self.rho[0], self.sigma[0]),)

    def _body(self, lo, hi, coeffs):
        (alpha,) = coeffs
        x, r, p, q, act = self.x, self.r, self.p, self.q, self.active
        if act is None:
            x[lo:hi] += alpha * p[lo:hi]
            r[lo:hi] -= alpha * q[lo:hi]
        else:
            x[lo:hi, act] += alpha[act] * p[lo:hi, act]
            r[lo:hi, act] -= alpha[act] * q[lo:hi, act]


class FcgStep1(CgStep1):
    """p <- z + (rho_t / prev_rho) * p (Polak-Ribiere style update)."""

    name = "fcg_step_1"


class FcgStep2(_MaskedStep):
    """x += alpha p; t = r_new - r_old; r = r_new with r_new = r - alpha q."""

    name = "fcg_step_2"
    CHARGE = (6, 3, 0)

    def __init__(self, x, r, t, p, q, sigma, rho, active=None):
        super().__init__(active)
        self.x, self.r, self.t, self.p, self.q = x, r, t, p, q
        self.sigma, self.rho = sigma, rho

    def _nrows(self):
        return self.x.shape[0]

    def _ref_vector(self):
        return self.x

    def _coeffs(self):
        return (_safe_div(self.rho[0], self.sigma[0]),)

    def _body(self, lo, hi, coeffs):
        (alpha,) = coeffs
        x, r, t, p, q, act = self.x, self.r, self.t, self.p, self.q, self.active
        if act is None:
            x[lo:hi] += alpha * p[lo:hi]
            rn = r[lo:hi] - alpha * q[lo:hi]
            t[lo:hi] = rn - r[lo:hi]
            r[lo:hi] = rn
        else:
            x[lo:hi, act] += alpha[act] * p[lo:hi, act]
            rn = r[lo:hi, act] - alpha[act] * q[lo:hi, act]
            t[lo:hi, act] = rn - r[lo:hi, act]
            r[lo:hi, act] = rn


class _MonolithicInit(Operation):
    """r = b; shadow = r; zero the remaining workspace; seed the scalars."""

    def __init__(self, b, r, shadow, zeros, scalar_seeds, charge):
        self.b, self.r, self.shadow = b, r, shadow
        self.zeros = zeros
        self.scalar_seeds = scalar_seeds
        self.charge = charge

    def _run(self, exc):
        b, r, shadow = self.b, self.r, self.shadow

        def body(lo, hi):
            r[lo:hi] = b[lo:hi]
            shadow[lo:hi] = b[lo:hi]
            for v in self.zeros:
                v[lo:hi] = 0.0

        exc.map_blocks(r.shape[0], body)
        for arr, value in self.scalar_seeds:
            arr[...] = value

    reference = parallel = _run

    def traffic(self):
        return self.charge


def cgs_init(b, r, rt, zeros, prev_rho, rho):
    vt = r.dtype.itemsize
    m = r.shape[1]
    assert len(zeros) == 6
    return _MonolithicInit(b, r, rt, zeros, [(prev_rho, 1.0), (rho, 0.0)],
                           Traffic(_vtb(b), 8 * _vtb(r) + 2 * m * vt))


def bicgstab_init(b, r, rt, zeros, seeds):
    vt = r.dtype.itemsize
    m = r.shape[1]
    assert len(zeros) == 6 and len(seeds) == 6
    return _MonolithicInit(b, r, rt, zeros, seeds,
                           Traffic(_vtb(b), 8 * _vtb(r) + 6 * m * vt))


class CgsStep1(_MaskedStep):
    """u = r + beta q; p = u + beta (q + beta p) with beta = rho / prev_rho."""

    name = "cgs_step_1"
    CHARGE = (6, 2, 0)

    def __init__(self, u, p, r, q, rho, prev_rho, active=None):
        super().__init__(active)
        self.u, self.p, self.r, self.q = u, p, r, q
        self.rho, self.prev_rho = rho, prev_rho

    def _nrows(self):
        return self.u.shape[0]

    def _ref_vector(self):
        return self.u

    def _coeffs(self):
        return (_safe_div(self.rho[0], self.prev_rho[0]),)

    def _body(self, lo, hi, coeffs):
        (beta,) = coeffs
        u, p, r, q, act = self.u, self.p, self.r, self.q, self.active
        if act is None:
            u[lo:hi] = r[lo:hi] + beta * q[lo:hi]
            p[lo:hi] = u[lo:hi] + beta * (q[lo:hi] + beta * p[lo:hi])
        else:
            un = r[lo:hi, act] + beta[act] * q[lo:hi, act]
            u[lo:hi, act] = un
            p[lo:hi, act] = un + beta[act] * (q[lo:hi, act]
                                              + beta[act] * p[lo:hi, act])


class CgsStep2(_MaskedStep):
    """alpha = rho / gamma; q = u - alpha v_hat; w = u + q."""

    name = "cgs_step_2"
    CHARGE = (3, 2, 1)

    def __init__(self, q, w, u, v_hat, rho, gamma, alpha, active=None):
        super().__init__(active)
        self.q, self.w, self.u, self.v_hat = q, w, u, v_hat
        self.rho, self.gamma, self.alpha = rho, gamma, alpha

    def _nrows(self):
        return self.q.shape[0]

    def _ref_vector(self):
        return self.q

    def _coeffs(self):
        alpha = _safe_div(self.rho[0], self.gamma[0])
        if self.active is None:
            self.alpha[0, :] = alpha
        else:
            self.alpha[0, self.active] = alpha[self.active]
        return (alpha,)

    def _body(self, lo, hi, coeffs):
        (alpha,) = coeffs
        q, w, u, v, act = self.q, self.w, self.u, self.v_hat, self.active
        if act is None:
            qn = u[lo:hi] - alpha * v[lo:hi]
            q[lo:hi] = qn
            w[lo:hi] = u[lo:hi] + qn
        else:
            qn = u[lo:hi, act] - alpha[act] * v[lo:hi, act]
            q[lo:hi, act] = qn
            w[lo:hi, act] = u[lo:hi, act] + qn


class CgsStep3(_MaskedStep):
    """r -= alpha t; x += alpha u_hat."""

    name = "cgs_step_3"
    CHARGE = (5, 2, 0)

    def __init__(self, x, r, t, u_hat, alpha, active=None):
        super().__init__(active)
        self.x, self.r, self.t, self.u_hat = x, r, t, u_hat
        self.alpha = alpha

    def _nrows(self):
        return self.x.shape[0]

    def _ref_vector(self):
        return self.x

    def _coeffs(self):
        return (self.alpha[0],)

    def _body(self, lo, hi, coeffs):
        (alpha,) = coeffs
        x, r, t, uh, act = self.x, self.r, self.t, self.u_hat, self.active
        if act is None:
            r[lo:hi] -= alpha * t[lo:hi]
            x[lo:hi] += alpha * uh[lo:hi]
        else:
            r[lo:hi, act] -= alpha[act] * t[lo:hi, act]
            x[lo:hi, act] += alpha[act] * uh[lo:hi, act]


class BicgstabStep1(_MaskedStep):
    """p = r + beta (p - omega v), beta = (rho/prev_rho) * (alpha/omega)."""

    name = "bicgstab_step_1"
    CHARGE = (6, 1, 0)

    def __init__(self, p, r, v, rho, prev_rho, alpha, omega, active=None):
        super().__init__(active)
        self.p, self.r, self.v = p, r, v
        self.rho, self.prev_rho = rho, prev_rho
        self.alpha, self.omega = alpha, omega

    def _nrows(self):
        return self.p.shape[0]

    def _ref_vector(self):
        return self.p

    def _coeffs(self):
        beta = _safe_div(self.rho[0], self.prev_rho[0]) \
            * _safe_div(self.alpha[0], self.omega[0])
        return (beta, self.omega[0])

    def _body(self, lo, hi, coeffs):
        beta, omega = coeffs
        p, r, v, act = self.p, self.r, self.v, self.active
        if act is None:
            p[lo:hi] = r[lo:hi] + beta * (p[lo:hi] - omega * v[lo:hi])
        else:
            p[lo:hi, act] = r[lo:hi, act] + beta[act] * (
                p[lo:hi, act] - omega[act] * v[lo:hi, act])


class BicgstabStep2(_MaskedStep):
    """alpha = rho / gamma; s = r - alpha v."""

    name = "bicgstab_step_2"
    CHARGE = (5, 1, 0)

    def __init__(self, s, r, v, rho, gamma, alpha, active=None):
        super().__init__(active)
        self.s, self.r, self.v = s, r, v
        self.rho, self.gamma, self.alpha = rho, gamma, alpha

    def _nrows(self):
        return self.s.shape[0]

    def _ref_vector(self):
        return self.s

    def _coeffs(self):
        alpha = _safe_div(self.rho[0], self.gamma[0])
        if self.active is None:
            self.alpha[0, :] = alpha
        else:
            self.alpha[0, self.active] = alpha[self.active]
        return (alpha,)

    def _body(self, lo, hi, coeffs):
        (alpha,) = coeffs
        s, r, v, act = self.s, self.r, self.v, self.active
        if act is None:
            s[lo:hi] = r[lo:hi] - alpha * v[lo:hi]
        else:
            s[lo:hi, act] = r[lo:hi, act] - alpha[act] * v[lo:hi, act]


class BicgstabStep3(_MaskedStep):
    """omega = ts/tt; x += alpha y + omega z; r = s - omega t."""

    name = "bicgstab_step_3"
    CHARGE = (8, 2, 1)

    def __init__(self, x, r, s, t, y, z, ts, tt, alpha, omega, active=None):
        super().__init__(active)
        self.x, self.r, self.s, self.t = x, r, s, t
        self.y, self.z = y, z
        self.ts, self.tt = ts, tt
        self.alpha, self.omega = alpha, omega

    def _nrows(self):
        return self.x.shape[0]

    def _ref_vector(self):
        return self.x

    def _coeffs(self):
        omega = _safe_div(self.ts[0], self.tt[0])
        if self.active is None:
            self.omega[0, :] = omega
        else:
            self.omega[0, self.active] = omega[self.active]
        return (omega, self.alpha[0])

    def _body(self, lo, hi, coeffs):
        omega, alpha = coeffs
        x, r, s, t, y, z, act = (self.x, self.r, self.s, self.t, self.y,
                                 self.z, self.active)
        if act is None:
            x[lo:hi] += alpha * y[lo:hi] + omega * z[lo:hi]
            r[lo:hi] = s[lo:hi] - omega * t[lo:hi]
        else:
            x[lo:hi, act] += alpha[act] * y[lo:hi, act] \
                + omega[act] * z[lo:hi, act]
            r[lo:hi, act] = s[lo:hi, act] - omega[act] * t[lo:hi, act]


class BicgstabFinalize(_MaskedStep):
    """x += alpha y for columns converging at the mid-cycle check."""

    name = "bicgstab_finalize"
    CHARGE = (2, 1, 0)

    def __init__(self, x, y, alpha, active=None):
        super().__init__(active)
        self.x, self.y, self.alpha = x, y, alpha

    def _nrows(self):
        return self.x.shape[0]

    def _ref_vector(self):
        return self.x

    def _coeffs(self):
        return (self.alpha[0],)

    def _body(self, lo, hi, coeffs):
        (alpha,) = coeffs
        x, y, act = self.x, self.y, self.active
        if act is None:
            x[lo:hi] += alpha * y[lo:hi]
        else:
            x[lo:hi, act] += alpha[act] * y[lo:hi, act]
