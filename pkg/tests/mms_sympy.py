"""Symbolic restatement of the manufactured solution, independent of the package."""
import numpy as np
import sympy as s

x, y, t = s.symbols("x y t", real=True)
mu, gamma, nu, rho, lam, sigma, kappa, eta = s.symbols("mu gamma nu rho lam sigma kappa eta", positive=True)

u = s.Matrix([(s.cos(2 * s.pi * x) - 1) * s.sin(2 * s.pi * y), -s.sin(2 * s.pi * x) * s.cos(2 * s.pi * y)]) * s.exp(2 * t)
xi = (x ** 3 - 3 * x * y ** 2) * s.exp(2 * t)
kp = 3 * s.pi ** 2
p = s.sin(kp * x) * s.cos(kp * y) * s.exp(-t)
phi = (s.cos(4 * s.pi * x) * s.cos(4 * s.pi * y) + s.cos(3 * s.pi * x) * s.cos(3 * s.pi * y)) * s.exp(-t)


def grad(f):
    return s.Matrix([s.diff(f, x), s.diff(f, y)])


def lap(f):
    return s.diff(f, x, 2) + s.diff(f, y, 2)


def vlap(v):
    return s.Matrix([lap(v[0]), lap(v[1])])


def div(v):
    return s.diff(v[0], x) + s.diff(v[1], y)


w = -vlap(u) - grad(xi)
m = kappa * (-lap(phi) + (phi ** 3 - phi) / eta ** 2)
conv = s.Matrix([u.dot(grad(u[0])), u.dot(grad(u[1]))])
g_u = s.diff(u, t) - mu * vlap(u) - gamma * vlap(w) + nu * conv + rho * u + lam * u.dot(u) * u + grad(p) - m * grad(phi)
g_phi = s.diff(phi, t) + u.dot(grad(phi)) + sigma * m

params = (mu, gamma, nu, rho, lam, sigma, kappa, eta)


def lambdify(expr):
    return s.lambdify((x, y, t) + params, expr, "numpy")


FUNCS = {
    "u": lambdify(u), "w": lambdify(w), "xi": lambdify(xi), "p": lambdify(p), "phi": lambdify(phi),
    "m": lambdify(m), "g_u": lambdify(g_u), "g_phi": lambdify(g_phi),
    "div_u": lambdify(div(u)), "div_w": lambdify(div(w)),
    "grad_u": lambdify(s.Matrix([[s.diff(u[a], v) for v in (x, y)] for a in range(2)])),
    "grad_w": lambdify(s.Matrix([[s.diff(w[a], v) for v in (x, y)] for a in range(2)])),
    "lap_u": lambdify(vlap(u)), "lap_w": lambdify(vlap(w)),
    "grad_phi": lambdify(grad(phi)), "lap_phi": lambdify(lap(phi)), "grad_lap_phi": lambdify(grad(lap(phi))),
    "grad_m": lambdify(grad(m)),
}


def evaluate(name, X, Y, T, P):
    vals = (P.mu, P.gamma, P.nu, P.rho, P.lam, P.sigma, P.kappa, P.eta)
    out = FUNCS[name](X, Y, T, *vals)
    return np.asarray(out, dtype=float) if not isinstance(out, (list, tuple)) else out
