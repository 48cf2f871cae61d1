"""Central finite-difference gradient oracle shared by unit and acceptance tests."""

import numpy as np

from protqa import autograd as ag


def numeric_grads(f, arrays, h=1e-4):
    """Central differences of scalar-valued f w.r.t. each float64 array."""
    out = []
    for i, x in enumerate(arrays):
        g = np.zeros_like(x)
        flat, gf = x.reshape(-1), g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            fp = float(f(*arrays).data)
            flat[j] = orig - h
            fm = float(f(*arrays).data)
            flat[j] = orig
            gf[j] = (fp - fm) / (2.0 * h)
        out.append(g)
    return out


def analytic_grads(f, arrays):
    tensors = [ag.Tensor(x.copy(), tracked=True, dtype=np.float64) for x in arrays]
    loss = f(*tensors)
    ag.backward(loss)
    return [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]


def rel_err(a, b):
    scale = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    return float(np.max(np.abs(a - b))) / scale if a.size else 0.0


def check_grads(f, arrays, tol=1e-4, h=1e-4):
    """Assert analytic gradients of f match central differences.

    `f` must accept either raw float64 arrays or Tensors (it should build its
    graph with protqa.autograd ops and return a scalar Tensor).
    """
    def wrap(*xs):
        ts = [x if isinstance(x, ag.Tensor) else ag.Tensor(x, dtype=np.float64) for x in xs]
        return f(*ts)

    ana = analytic_grads(wrap, arrays)
    num = numeric_grads(wrap, arrays, h=h)
    for k, (a, n) in enumerate(zip(ana, num)):
        err = rel_err(a, n)
        assert err < tol, f"gradient mismatch on input {k}: rel err {err:.3g}"
