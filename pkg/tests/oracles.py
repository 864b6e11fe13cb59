"""Independent oracles used by the test suite.

Everything here is implemented from first principles (closed forms, fine
quadrature, fine Runge-Kutta with analytic coefficients) without calling the
library's solvers, so agreement is evidence and not tautology.
"""

from __future__ import annotations

import math

import numpy as np


def riccati_constant_roots(alpha: float, beta: float, gamma: float):
    """Real roots of alpha r^2 + beta r + gamma = 0, larger first."""
    disc = beta * beta - 4.0 * alpha * gamma
    if disc <= 0:
        raise ValueError("oracle expects two distinct real roots")
    s = math.sqrt(disc)
    return (-beta + s) / (2.0 * alpha), (-beta - s) / (2.0 * alpha)


def riccati_constant_solution(
    alpha: float, beta: float, gamma: float, horizon: float, t, terminal: float = 0.0
):
    """Closed-form solution of y' = alpha y^2 + beta y + gamma with y(T) given.

    Writing the quadratic as alpha (y - r1)(y - r2), the log-ratio
    (y - r1)/(y - r2) evolves linearly, giving
    y(t) = (r1 - r2 k(t)) / (1 - k(t)) with
    k(t) = ((y_T - r1)/(y_T - r2)) exp(-alpha (r1 - r2)(T - t)).
    """
    r1, r2 = riccati_constant_roots(alpha, beta, gamma)
    t = np.asarray(t, dtype=float)
    ratio = (terminal - r1) / (terminal - r2)
    kappa = ratio * np.exp(-alpha * (r1 - r2) * (horizon - t))
    return (r1 - r2 * kappa) / (1.0 - kappa)


def riccati_constant_integral(alpha: float, beta: float, gamma: float, horizon: float, t):
    """Closed-form running integral of the solution above from 0 to t."""
    r1, r2 = riccati_constant_roots(alpha, beta, gamma)
    t = np.asarray(t, dtype=float)

    def kappa(s):
        return (r1 / r2) * np.exp(-alpha * (r1 - r2) * (horizon - s))

    return r1 * t - (1.0 / alpha) * (np.log(1.0 - kappa(t)) - np.log(1.0 - kappa(0.0)))


class FollowerClosedForm:
    """Analytic follower quantities for constant coefficients."""

    def __init__(self, a_drift, b_control, sigma, q_track, r_control, horizon):
        self.alpha = 2.0 * b_control**2 / r_control
        self.beta = -2.0 * a_drift
        self.gamma = -0.5 * q_track
        self.a_drift = a_drift
        self.q_track = q_track
        self.horizon = horizon

    def a(self, t):
        return riccati_constant_solution(self.alpha, self.beta, self.gamma, self.horizon, t)

    def cum_f(self, t):
        cum_a = riccati_constant_integral(self.alpha, self.beta, self.gamma, self.horizon, t)
        return self.a_drift * np.asarray(t, dtype=float) - self.alpha * cum_a

    def f(self, t):
        return self.a_drift - self.alpha * self.a(t)

    def weight(self, t):
        return self.q_track * np.exp(self.cum_f(t))

    def decay(self, t):
        return np.exp(-2.0 * self.cum_f(t))

    def decay_l1(self, n_quad: int = 200_001) -> float:
        """Integral of the decay kernel over [0, T] by dense Simpson."""
        t = np.linspace(0.0, self.horizon, n_quad)
        return float(simpson(self.decay(t), t[1] - t[0]))


def simpson(values: np.ndarray, h: float) -> float:
    n = len(values) - 1
    if n % 2 != 0:
        raise ValueError("simpson needs an even interval count")
    return (h / 3.0) * (
        values[0]
        + values[-1]
        + 4.0 * np.sum(values[1:-1:2])
        + 2.0 * np.sum(values[2:-2:2])
    )


def leader_system_fine(
    follower_cf: FollowerClosedForm,
    a_leader,
    b_leader,
    sigma_leader,
    q_leader,
    r_leader,
    q_terminal,
    inference_weight,
    noise_to_signal,
    target_amp,
    target_omega,
    horizon,
    n_steps,
):
    """Backward RK4 for the leader's augmented system with analytic coefficients.

    Runs a plain-float loop over the ten independent components (six of the
    symmetric quadratic block, three linear, one offset); coefficient values
    at every stage time come from the closed forms, so the scheme keeps full
    fourth order. Returns (quad(0) as 3x3, lin(0) as 3-vector, offset(0)).
    """
    lam_s = 0.0 if inference_weight == 0.0 else inference_weight / noise_to_signal
    gain = 2.0 * b_leader**2 / r_leader
    half_q = 0.5 * q_leader
    sig2 = sigma_leader**2
    b2_over_2r = b_leader**2 / (2.0 * r_leader)
    a_l = a_leader
    q_l = q_leader

    # Analytic coefficient values at every node and half-node, precomputed
    # vectorized so the sequential loop is pure float arithmetic.
    cf = follower_cf
    stage_t = np.linspace(0.0, horizon, 2 * n_steps + 1)
    w_all = cf.weight(stage_t).tolist()
    d_all = cf.decay(stage_t).tolist()
    f_all = (target_amp * np.sin(target_omega * stage_t)).tolist()

    f_T = f_all[-1]
    decay_l1 = cf.decay_l1()
    y = (
        0.5 * q_terminal, 0.0, 0.0,
        -lam_s * decay_l1, lam_s, 0.0,
        -q_terminal * f_T, 0.0, 0.0,
        0.5 * q_terminal * f_T * f_T,
    )
    h = horizon / n_steps
    h6 = h / 6.0
    half_h = 0.5 * h

    def rhs(y, w, d, ft):
        l11, l12, l13, l22, l23, l33, m1, m2, m3, _ = y
        return (
            -2.0 * (l11 * a_l - l12 * w) + gain * l11 * l11 - half_q,
            -(l13 * d + l12 * a_l - l22 * w) + gain * l11 * l12,
            -(l13 * a_l - l23 * w) + gain * l11 * l13,
            -2.0 * l23 * d + gain * l12 * l12 + lam_s * d,
            -l33 * d + gain * l12 * l13,
            gain * l13 * l13,
            -a_l * m1 + w * m2 + gain * l11 * m1 + q_l * ft,
            -d * m3 + gain * l12 * m1,
            gain * l13 * m1,
            b2_over_2r * m1 * m1 - sig2 * l11 - half_q * ft * ft,
        )

    for j in range(n_steps - 1, -1, -1):
        ir, im, il = 2 * j + 2, 2 * j + 1, 2 * j
        w_r, w_m, w_l = w_all[ir], w_all[im], w_all[il]
        d_r, d_m, d_l = d_all[ir], d_all[im], d_all[il]
        f_r, f_m, f_l = f_all[ir], f_all[im], f_all[il]
        k1 = rhs(y, w_r, d_r, f_r)
        yk = (y[0] - half_h * k1[0], y[1] - half_h * k1[1], y[2] - half_h * k1[2],
              y[3] - half_h * k1[3], y[4] - half_h * k1[4], y[5] - half_h * k1[5],
              y[6] - half_h * k1[6], y[7] - half_h * k1[7], y[8] - half_h * k1[8],
              y[9] - half_h * k1[9])
        k2 = rhs(yk, w_m, d_m, f_m)
        yk = (y[0] - half_h * k2[0], y[1] - half_h * k2[1], y[2] - half_h * k2[2],
              y[3] - half_h * k2[3], y[4] - half_h * k2[4], y[5] - half_h * k2[5],
              y[6] - half_h * k2[6], y[7] - half_h * k2[7], y[8] - half_h * k2[8],
              y[9] - half_h * k2[9])
        k3 = rhs(yk, w_m, d_m, f_m)
        yk = (y[0] - h * k3[0], y[1] - h * k3[1], y[2] - h * k3[2],
              y[3] - h * k3[3], y[4] - h * k3[4], y[5] - h * k3[5],
              y[6] - h * k3[6], y[7] - h * k3[7], y[8] - h * k3[8],
              y[9] - h * k3[9])
        k4 = rhs(yk, w_l, d_l, f_l)
        y = tuple(
            y[i] - h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(10)
        )
    l11, l12, l13, l22, l23, l33, m1, m2, m3, off = y
    quad0 = np.array([[l11, l12, l13], [l12, l22, l23], [l13, l23, l33]])
    return quad0, np.array([m1, m2, m3]), off


def ou_mean_variance(x0, f_vals, drive_vals, sigma, grid_nodes):
    """Closed-form mean/variance of a linear SDE dX = (f X + drive) dt + sigma dW.

    Evaluated at the final time by fine trapezoid over the supplied nodes
    (which should be much denser than the grid under test).
    """
    h = grid_nodes[1] - grid_nodes[0]
    cum_f = np.concatenate([[0.0], np.cumsum(0.5 * h * (f_vals[1:] + f_vals[:-1]))])
    growth_to_end = np.exp(cum_f[-1] - cum_f)
    mean = x0 * growth_to_end[0] + np.trapezoid(growth_to_end * drive_vals, dx=h)
    var = sigma**2 * np.trapezoid(growth_to_end**2, dx=h)
    return float(mean), float(var)


def trapezoid_primary_cost(x_vals, u_vals, target_vals, q_track, r_control, q_terminal, h):
    """Primary cost of a node path, written independently of the library.

    Same trapezoid semantics, different code path (numpy's own trapezoid),
    so agreement checks the library's accumulation, weights and terminal
    handling rather than restating them.
    """
    integrand = 0.5 * q_track * (np.asarray(x_vals) - np.asarray(target_vals)) ** 2
    integrand = integrand + 0.5 * r_control * np.asarray(u_vals) ** 2
    run = float(np.trapezoid(integrand, dx=h))
    return run + 0.5 * q_terminal * (x_vals[-1] - target_vals[-1]) ** 2
