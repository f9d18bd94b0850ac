"""Independent reference values frozen into the C++ unit tests.

Run with numpy and scipy; prints each quantity at full precision.
"""
import numpy as np
from scipy import linalg, special
from scipy.interpolate import BSpline

np.set_printoptions(precision=17)


def show(name, value):
    print(name, repr(np.asarray(value).tolist()))


# Matern correlation, delta(d) = 2^{1-nu}/Gamma(nu) x^nu K_nu(x), x = sqrt(2 nu) d / range
def matern(d, nu, rng):
    x = np.sqrt(2 * nu) * d / rng
    return 2 ** (1 - nu) / special.gamma(nu) * x ** nu * special.kv(nu, x)


show("matern(0.7; 2.3, 1.5)", matern(0.7, 2.3, 1.5))
show("matern(2.0; 0.8, 0.5)", matern(2.0, 0.8, 0.5))
show("matern(0.05; 7.5, 3.0)", matern(0.05, 7.5, 3.0))

# B-spline basis, order 4, knots on [0, 1] with one interior knot at 0.5
t = np.r_[[0.0] * 4, 0.5, [1.0] * 4]
for x in (0.0, 0.3, 0.5, 0.9, 1.0):
    vals = [BSpline.basis_element(t[i:i + 5], extrapolate=False)(x) for i in range(5)]
    vals = np.nan_to_num(vals)
    if x == 1.0:
        vals = np.zeros(5)
        vals[-1] = 1.0
    show(f"bspline4 at {x}", vals)

# Matrix exponential of a fixed non-symmetric matrix
m = np.array([[0.0, 0.3, 0.1], [0.2, 0.0, 0.4], [0.5, 0.1, 0.0]])
show("expm", linalg.expm(m))
show("expm(2m)", linalg.expm(2 * m))

# Spectral radius of a fixed non-symmetric matrix
w = np.array([[0, 2, 0, 1], [1, 0, 1, 0], [0, 3, 0, 1], [1, 0, 2, 0]], dtype=float)
show("rho", max(abs(np.linalg.eigvals(w))))

# Weighted least squares with Sigma = diag(1, 2, 3, 4)
psi = np.array([[1, 0.5], [1, 1.5], [1, -1.0], [1, 2.0]])
y = np.array([1.0, 2.5, -0.5, 4.0])
sinv = np.diag(1 / np.array([1.0, 2, 3, 4]))
beta = np.linalg.solve(psi.T @ sinv @ psi, psi.T @ sinv @ y)
r = y - psi @ beta
show("wls beta", beta)
show("wls sigma2", r @ sinv @ r / 4)

# Linear null on three points
x = np.array([0.0, 1.0, 3.0])
yy = np.array([1.0, 2.0, 2.0])
a = np.column_stack([np.ones(3), x])
show("null alpha", np.linalg.solve(a.T @ a, a.T @ yy))

# Innovations for n = 4, SEM weight ring, gamma = 0.5, no MA part
w4 = np.array([[0, 1, 0, 0], [0.5, 0, 0.5, 0], [0, 0.5, 0, 0.5], [0, 0, 1, 0]])
y4 = np.array([1.0, -2.0, 0.5, 3.0])
th4 = np.array([0.2, 0.1, -0.3, 0.4])
xi = (np.eye(4) - 0.5 * w4) @ (y4 - th4)
show("innovations", xi - xi.mean())
# and with an MA part gamma_3 = 0.4 on the same matrix
xi_ma = np.linalg.solve(np.eye(4) + 0.4 * w4, (np.eye(4) - 0.5 * w4) @ (y4 - th4))
show("innovations sarma", xi_ma - xi_ma.mean())

# Disturbance covariance for n = 3 at gamma = 0.3
w3 = np.array([[0, 0.5, 0.5], [1, 0, 0], [0.5, 0.5, 0]])
b = np.linalg.inv(np.eye(3) - 0.3 * w3)
show("cov u", b @ b.T)

# Local alternative factor and theta increment
show("shift p=10 n=60", 10 ** 0.25 / np.sqrt(60))
show("theta increment c=3 p=10 n=100", 3 * 10 ** 0.25 / 10)
