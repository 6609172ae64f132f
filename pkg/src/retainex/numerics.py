"""Shared numeric primitives: stable softmax/sigmoid, the parameter store
with Adam updates, seeded RNG construction, and a finite-difference
gradient checker.

All arithmetic is float64. Randomness always flows through an explicitly
seeded PCG64 generator; there is no global RNG state anywhere in the
package.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ArgumentError",
    "StateError",
    "NumericError",
    "make_rng",
    "softmax",
    "sigmoid",
    "ParamStore",
    "adam_step",
    "finite_diff_check",
]

# Smallest positive normal float64; used to keep sigmoid strictly inside (0, 1).
_TINY = np.finfo(np.float64).tiny
_ONE_MINUS_EPS = 1.0 - np.finfo(np.float64).eps


class ArgumentError(ValueError):
    """A caller-supplied argument violates a documented precondition."""


class StateError(RuntimeError):
    """An object is in the wrong state for the requested operation."""


class NumericError(ArithmeticError):
    """A computation produced a non-finite value."""


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator. Identical seeds yield identical streams on
    every platform; all randomness in the package goes through this."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def softmax(v) -> np.ndarray:
    """Probability vector exp(v_i) / sum_j exp(v_j), computed with
    max-subtraction so large inputs cannot overflow."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ArgumentError("softmax expects a non-empty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise ArgumentError("softmax input must be finite")
    e = np.exp(v - v.max())
    return e / e.sum()


def sigmoid(x: float) -> float:
    """1 / (1 + e^{-x}), branch-stable for either sign. Saturated outputs
    are nudged into the open interval (0, 1) so downstream logs stay
    finite."""
    x = float(x)
    if not np.isfinite(x):
        raise ArgumentError("sigmoid input must be finite")
    if x >= 0.0:
        out = 1.0 / (1.0 + np.exp(-x))
    else:
        ex = np.exp(x)
        out = ex / (1.0 + ex)
    return float(min(max(out, _TINY), _ONE_MINUS_EPS))


class ParamStore:
    """Named float64 parameter tensors plus their gradient buffers and Adam
    moments.

    Each entry keeps four same-shape arrays: value, grad, m (first moment),
    v (second moment). Gradients accumulate via ``add_grad`` and must be
    populated for every parameter before ``adam_step``; the step zeroes
    them again. Single-writer: callers serialize mutation.
    """

    def __init__(self):
        self._values: dict[str, np.ndarray] = {}
        self._grads: dict[str, np.ndarray] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._populated: set[str] = set()
        self.step_count: int = 0

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self._values:
            raise ArgumentError(f"duplicate parameter {name!r}")
        arr = np.ascontiguousarray(value, dtype=np.float64)
        self._values[name] = arr
        self._grads[name] = np.zeros_like(arr)
        self._m[name] = np.zeros_like(arr)
        self._v[name] = np.zeros_like(arr)
        return arr

    def names(self) -> list[str]:
        return list(self._values)

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def __getitem__(self, name: str) -> np.ndarray:
        return self._values[name]

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def add_grad(self, name: str, g: np.ndarray) -> None:
        buf = self._grads[name]
        g = np.asarray(g, dtype=np.float64)
        if g.shape != buf.shape:
            raise ArgumentError(
                f"gradient shape {g.shape} does not match parameter "
                f"{name!r} shape {buf.shape}"
            )
        buf += g
        self._populated.add(name)

    def acc(self, name: str) -> np.ndarray:
        """Gradient buffer for in-place accumulation; marks it populated."""
        self._populated.add(name)
        return self._grads[name]

    def zero_grads(self) -> None:
        for g in self._grads.values():
            g[...] = 0.0
        self._populated.clear()

    def copy(self) -> "ParamStore":
        """Deep copy of values and optimizer state (grads reset)."""
        out = ParamStore()
        for name, val in self._values.items():
            out.add(name, val.copy())
            out._m[name][...] = self._m[name]
            out._v[name][...] = self._v[name]
        out.step_count = self.step_count
        return out

    def values_equal(self, other: "ParamStore") -> bool:
        if self.names() != other.names():
            return False
        return all(
            np.array_equal(self._values[n], other._values[n]) for n in self._values
        )


def adam_step(
    store: ParamStore,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> ParamStore:
    """One Adam update over every parameter in the store, in place.

    Bias correction uses step_count + 1. Gradients are zeroed afterwards
    and step_count is incremented. Every parameter must have received a
    gradient since the previous step.
    """
    if not lr > 0.0:
        raise ArgumentError("learning rate must be positive")
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ArgumentError("betas must lie in [0, 1)")
    missing = [n for n in store.names() if n not in store._populated]
    if missing:
        raise StateError(f"missing gradient for parameter {missing[0]!r}")
    t = store.step_count + 1
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name in store.names():
        g = store._grads[name]
        m = store._m[name]
        v = store._v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        store._values[name] -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    store.zero_grads()
    store.step_count = t
    return store


def finite_diff_check(loss_fn, store: ParamStore, h: float = 1e-5) -> float:
    """Max relative disagreement between the analytic gradients sitting in
    ``store`` and central finite differences of ``loss_fn``.

    ``loss_fn`` takes the store and returns a scalar, must be deterministic,
    and must not touch the stored gradients. Per element the error is
    |a - n| / max(1, |a|, |n|); the max over all parameters is returned.
    """
    if not h > 0.0:
        raise ArgumentError("step size h must be positive")
    worst = 0.0
    for name in store.names():
        val = store[name]
        analytic = store.grad(name)
        flat = val.reshape(-1)
        aflat = analytic.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = float(loss_fn(store))
            flat[i] = orig - h
            f_minus = float(loss_fn(store))
            flat[i] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NumericError("loss function returned a non-finite value")
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = aflat[i]
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            if err > worst:
                worst = err
    return worst
