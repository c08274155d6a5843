"""Pure numpy stepping kernels.

Same signatures as the compiled ``_kernels`` module, vectorised over the
batch axis instead of looping.  The ``*_fn`` variants take any field
callable ``field(y[..., n], u[..., m], w[..., n] | None)`` and are used for
systems without a compiled counterpart.
"""
import numpy as np

BIOREACTOR = 0
LINEAR_DIAG = 1


def native_field(code, params):
    p = np.asarray(params, dtype=float)
    if code == BIOREACTOR:
        D, Ki, Km, Pm, Yxs, alpha, beta, mum = p

        def field(y, u, w=None):
            X = y[..., 0]
            S = y[..., 1]
            P = y[..., 2]
            mu = mum * (1.0 - P / Pm) * S / (Km + S + S * S / Ki)
            out = np.stack(
                [
                    -D * X + mu * X,
                    D * (u[..., 0] - S) - mu * X / Yxs,
                    -D * P + (alpha * mu + beta) * X,
                ],
                axis=-1,
            )
            return out if w is None else out + w

    elif code == LINEAR_DIAG:

        def field(y, u, w=None):
            out = p * y + u
            return out if w is None else out + w

    else:
        raise ValueError(f"unknown native field code {code}")
    return field


def euler_rollout_fn(field, y0, u_steps, dt, w=None):
    y0 = np.asarray(y0, dtype=float)
    B, n = y0.shape
    N = len(u_steps)
    out = np.empty((B, N + 1, n))
    out[:, 0] = y0
    y = y0
    for j in range(N):
        f = field(y, u_steps[j], None if w is None else w[:, j])
        y = y + dt * f
        out[:, j + 1] = y
    return out


def rk4_rollout_fn(field, y0, u_steps, dt, refinement, w=None):
    y0 = np.asarray(y0, dtype=float)
    B, n = y0.shape
    N = len(u_steps)
    h = dt / refinement
    out = np.empty((B, N + 1, n))
    out[:, 0] = y0
    y = y0.copy()
    for j in range(N):
        u = u_steps[j]
        wj = None if w is None else w[:, j]
        for _ in range(refinement):
            k1 = field(y, u, wj)
            k2 = field(y + 0.5 * h * k1, u, wj)
            k3 = field(y + 0.5 * h * k2, u, wj)
            k4 = field(y + h * k3, u, wj)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[:, j + 1] = y
    return out


def euler_transitions_fn(field, y0, modes, steps, dt, integrand):
    y0 = np.asarray(y0, dtype=float)
    modes = np.asarray(modes, dtype=float)
    B, n = y0.shape
    M = modes.shape[0]
    y = np.broadcast_to(y0[:, None, :], (B, M, n)).copy()
    acc = np.zeros((B, M))
    for _ in range(steps):
        acc = acc + integrand(y) * dt
        y = y + dt * field(y, modes[None, :, :])
    return y, acc


def euler_rollout(code, params, y0, u_steps, dt, w=None):
    return euler_rollout_fn(native_field(code, params), y0, u_steps, dt, w)


def rk4_rollout(code, params, y0, u_steps, dt, refinement, w=None):
    return rk4_rollout_fn(native_field(code, params), y0, u_steps, dt, refinement, w)


def euler_transitions(code, params, y0, modes, steps, dt, weights):
    weights = np.asarray(weights, dtype=float)

    def integrand(y):
        # same summation order as the compiled loop
        g = np.zeros(y.shape[:-1])
        for i in range(y.shape[-1]):
            g = g + weights[i] * y[..., i]
        return g

    return euler_transitions_fn(native_field(code, params), y0, modes, steps, dt, integrand)
